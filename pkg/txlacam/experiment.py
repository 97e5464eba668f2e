"""Parameter Sweeps

Overview
--------

A sweep runs a synthetic template-matching workload at every point of a grid over

- ``v_en_V``, the bias of the current-limiting transistors,
- ``v_th_V``, the sense-amplifier threshold,
- ``sigma``, the RRAM write noise,
- ``sparsity``, the fraction of matching cells, and
- ``cell_kind``, the cell design whose energy is accounted (``txl9t4r`` or ``sixt2r``).

The sweep specification is a TOML file mapping each of these names to a list of values. A name that
is absent sweeps only over its configured value, and an empty list yields an empty sweep.

At each point, ``sweep.searches`` random template sets and queries are generated. Every cell's window
either contains its column's query value or lies entirely to one side of it, with at least 50 mV of
margin, and the share of containing windows is ``sparsity``. The templates are compiled,
programmed with ``sigma`` write noise and searched. The *accuracy* is the fraction of rows whose
sensed hit agrees with the match count required by the threshold, i.e. ``count >= k_boundary``.

Functions
---------

Author, Copyright, and License
------------------------------
Copyright (c) 2024 The txlacam developers

This program is free software: you can redistribute it and/or modify
it under the terms of the GNU General Public License as published by
the Free Software Foundation, either version 3 of the License, or
(at your option) any later version.

This program is distributed in the hope that it will be useful,
but WITHOUT ANY WARRANTY; without even the implied warranty of
MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE. See the
GNU General Public License for more details.

You should have received a copy of the GNU General Public License
along with this program. If not, see https://www.gnu.org/licenses/
"""
import logging
import itertools
import dataclasses
from collections.abc import Iterator, Mapping, Sequence
from typing import Any, NamedTuple
import numpy as np
from .error import ConfigError, VerifyFailed
from .cell import MatchWindow, men_current
from .matchline import count_levels, k_boundary
from .acam import AcamArray, array_search, enter_programming_mode, exit_programming_mode
from .compiler import Template, compile_templates, design_curve, program_and_verify
from .energy import CellKind, search_energy
from .frontend import QueryVector, window_counts
from .config import RunConfig

_logger = logging.getLogger(__name__)

#: Minimum distance between a query value and any window bound in synthetic workloads.
MARGIN_V = 0.05

class GridPoint(NamedTuple):
    v_en_V :float
    v_th_V :float
    sigma :float
    sparsity :float
    cell_kind :CellKind

GRID_KEYS = GridPoint._fields

def parse_sweep_spec(spec :Mapping[str, Any], config :RunConfig) -> dict[str, list]:
    """Validate a sweep specification and fill in the configured value for absent names.

    :raises ConfigError: for unknown names, non-list values or values out of range"""
    unknown = set(spec) - set(GRID_KEYS)
    if unknown:
        raise ConfigError(f"unknown sweep parameters {sorted(unknown)}, expected some of {list(GRID_KEYS)}")
    vdd = config['array.vdd_txl_V']
    defaults :dict[str, Any] = {'v_en_V': config.v_en(), 'v_th_V': config['matchline.v_th_V'],
                                'sigma': config['devices.rram.write_sigma'], 'sparsity': 0.5, 'cell_kind': CellKind.TXL9T4R.value}
    checks = {'v_en_V': lambda v: 0 <= v <= vdd, 'v_th_V': lambda v: 0 < v < vdd, 'sigma': lambda v: v >= 0,
              'sparsity': lambda v: 0 <= v <= 1}
    grid :dict[str, list] = {}
    for name in GRID_KEYS:
        values = spec.get(name, [defaults[name]])
        if not isinstance(values, list):
            raise ConfigError(f"sweep parameter {name!r} must be a list")
        if name == 'cell_kind':
            try:
                grid[name] = [CellKind(v) for v in values]
            except ValueError as ex:
                raise ConfigError(f"sweep parameter cell_kind: {ex}") from ex
            continue
        for v in values:
            if isinstance(v, bool) or not isinstance(v, (int, float)) or not checks[name](v):
                raise ConfigError(f"sweep parameter {name!r}: invalid value {v!r}")
        grid[name] = [float(v) for v in values]
    return grid

def sweep_grid(grid :Mapping[str, Sequence]) -> Iterator[GridPoint]:
    for values in itertools.product(*(grid[k] for k in GRID_KEYS)):
        yield GridPoint(*values)

def synthesize_workload(rng :np.random.Generator, achievable :tuple[float, float], rows :int, columns :int,
                        sparsity :float, vdd :float) -> tuple[list[Template], QueryVector]:
    """One random template set with a query, in which each window contains its query value with probability ``sparsity``."""
    lo, hi = achievable
    pad = 4*MARGIN_V
    if hi - lo <= 2*pad:
        raise ConfigError(f"achievable threshold range [{lo:.3f}, {hi:.3f}] V too narrow for synthetic workloads")
    query = rng.uniform(lo + pad, hi - pad, columns)
    templates :list[Template] = []
    for row in range(rows):
        windows :list[MatchWindow] = []
        for q in query.tolist():
            margins = rng.uniform(MARGIN_V, 1.6*MARGIN_V, 2)
            if rng.random() < sparsity:
                windows.append(MatchWindow(q - margins[0], q + margins[1]))
            elif rng.random() < 0.5:
                windows.append(MatchWindow(q - margins[0] - margins[1], q - margins[0]))
            else:
                windows.append(MatchWindow(q + margins[0], q + margins[0] + margins[1]))
        templates.append(Template(row, tuple(windows), f"synthetic row {row}"))
    return templates, QueryVector(tuple(query.tolist()), vdd)

def program(config :RunConfig, templates :Sequence[Template], sigma :float, seed :int) -> AcamArray:
    """Compile and program ``templates`` into a fresh array with write noise ``sigma``.
    Devices that do not verify are left as they are."""
    fresh = config.new_array()
    array = enter_programming_mode(dataclasses.replace(fresh, write_sigma=sigma))
    cmap = compile_templates(templates, fresh.design, g_min=fresh.g_min, g_max=fresh.g_max, rram_rows=fresh.config.rram_rows)
    try:
        array, _report = program_and_verify(array, cmap, config['compiler.tol_V'], config['compiler.max_iters'], seed)
    except VerifyFailed as ex:
        _logger.info("%d devices out of tolerance", len(ex.devices))
        array = ex.array
    return exit_programming_mode(array)

def run_sweep(config :RunConfig, grid :Mapping[str, Sequence]) -> list[dict[str, Any]]:
    """Run every grid point; returns one record per point with the columns of :data:`txlacam.formats.SWEEP_COLUMNS`."""
    fresh = config.new_array()
    cfg = fresh.config
    achievable = design_curve(fresh.design, fresh.g_min, fresh.g_max).achievable
    searches :int = config['sweep.searches']
    seed :int = config['run.seed']
    timing, matchline, fidelity = config.timing(), config.matchline(), config.fidelity()
    programmed :dict[tuple[float, float], list[tuple[list[Template], QueryVector, AcamArray]]] = {}
    out :list[dict[str, Any]] = []
    for point in sweep_grid(grid):
        key = (point.sparsity, point.sigma)
        if key not in programmed:
            work = []
            for i in range(searches):
                rng = np.random.default_rng([seed, i, int(round(point.sparsity*1_000_000))])
                templates, query = synthesize_workload(rng, achievable, cfg.rram_rows, cfg.columns, point.sparsity, cfg.vdd_txl)
                work.append((templates, query, program(config, templates, point.sigma, seed + i)))
            programmed[key] = work
        sa = config.sense_amp(point.v_th_V)
        i_lim = men_current(fresh.design.m_men, cfg.vdd_txl, point.v_en_V)
        k = k_boundary(count_levels(cfg.columns, i_lim, c_ml=matchline.c_ml, r_leak=matchline.r_leak, vdd=cfg.vdd_txl,
                                    v_ov=fresh.design.v_ov, timing=timing).tolist(), point.v_th_V)
        correct = total_rows = 0
        energy = 0.0
        for templates, query, array in programmed[key]:
            result = array_search(array, query, point.v_en_V, timing, fidelity, matchline=matchline, sense_amp=sa)
            counts = window_counts(templates, query)
            for row, count in counts.items():
                correct += int(bool(result.hits[row]) == (count >= k))
            total_rows += len(counts)
            energy += search_energy(result, config.energy_table(), config['energy.overhead'], point.cell_kind,
                                    timing=timing, vdd=cfg.vdd_txl).total_J
        cells = searches*cfg.rows*cfg.columns
        out.append({'v_en_V': point.v_en_V, 'v_th_V': point.v_th_V, 'sigma': point.sigma, 'sparsity': point.sparsity,
                    'cell_kind': point.cell_kind.value, 'k_boundary': k, 'accuracy': correct/total_rows if total_rows else 1.0,
                    'energy_total_J': energy, 'energy_per_cell_J': energy/cells if cells else 0.0})
        _logger.info("sweep point %s: k=%d accuracy=%.4f", point, k, out[-1]['accuracy'])
    return out
