"""Template Compiler

Overview
--------

A :class:`Template` holds the desired match window of every cell of one row. Compiling it inverts
the inverter threshold function: the lower bound ``v_low`` is stored in ``M1`` (top of ``inv_low``)
and the upper bound ``v_high`` in ``M2`` (top of ``inv_high``), while the bottom elements stay at the
reference conductance ``g_ref``, the geometric mean of the RRAM range. Since the threshold rises
monotonically with the top conductance, the inverse is found by binary search over the cached
characterisation from :func:`~txlacam.devices.threshold_curve`.

:func:`program_and_verify` then writes the resulting :class:`ConductanceMap` into an array in
programming mode, reads every device back and rewrites those whose realized bound is more than
``tol_v`` off, for at most ``max_iters`` rounds.

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
from dataclasses import dataclass, field
from collections.abc import Iterable, Mapping
from typing import Optional
import numpy as np
from .error import ImmutableDevice, ModeError, OutOfRange, Unachievable, VerifyFailed
from .devices import HybridInverter, ThresholdCurve, G_MIN, G_MAX, reference_conductance, threshold_curve
from .cell import CellDesign, MatchWindow, Mode, Which
from .acam import AcamArray, ArrayConfig, DeviceAddress, ProgrammingSession

_logger = logging.getLogger(__name__)

#: Default verify tolerance on a realized window bound.
TOL_V = 0.02
#: Default maximum number of write rounds.
MAX_ITERS = 10

@dataclass(frozen=True)
class Template:
    row :int
    windows :tuple[MatchWindow, ...]
    label :str = ''

    def __post_init__(self):
        if self.row < 0:
            raise OutOfRange(f"negative template row {self.row}")

@dataclass(frozen=True)
class ConductanceMap:
    """Target conductances of the RRAM devices, by address."""
    entries :Mapping[DeviceAddress, float] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.entries)

    def sorted_items(self) -> list[tuple[DeviceAddress, float]]:
        return sorted(self.entries.items(), key=lambda kv: (kv[0].row, kv[0].col, kv[0].which.value))

def design_curve(design :CellDesign = CellDesign(), g_min :float = G_MIN, g_max :float = G_MAX) -> ThresholdCurve:
    """The threshold characterisation of a cell design's inverters with the bottom element at ``g_ref``."""
    return threshold_curve(design.pmos, design.nmos, design.vdd, reference_conductance(g_min, g_max), g_min, g_max)

def threshold_to_conductance(target_v :float, inverter_template :HybridInverter) -> float:
    """The top conductance that puts the inverter's threshold at ``target_v``.

    The search range is the top element's ``[g_min, g_max]``; everything else is taken from ``inverter_template``.

    :raises Unachievable: if ``target_v`` lies outside the realizable range, which the error reports"""
    inv = inverter_template
    curve = threshold_curve(inv.pmos, inv.nmos, inv.vdd, inv.bottom_element.conductance,
                            inv.top_element.g_min, inv.top_element.g_max)
    return float(curve.conductance(target_v))

def compile_templates(templates :Iterable[Template], design :CellDesign = CellDesign(), *,
                      g_min :float = G_MIN, g_max :float = G_MAX, rram_rows :int = ArrayConfig().rram_rows) -> ConductanceMap:
    """Compile any number of templates into one map of ``2 * columns`` entries per template.

    :raises ImmutableDevice: for a template in one of the polysilicon rows, i.e. at or beyond ``rram_rows``
    :raises Unachievable: naming the ``(row, col)`` of the first bound that cannot be realized
    :raises OutOfRange: for bounds outside ``[0, vdd]``"""
    curve = design_curve(design, g_min, g_max)
    addrs :list[DeviceAddress] = []
    targets :list[float] = []
    for tpl in templates:
        for col, win in enumerate(tpl.windows):
            if tpl.row >= rram_rows:
                raise ImmutableDevice(f"row {tpl.row} col {col}: row is a polysilicon row (only rows below {rram_rows} are RRAM)")
            try:
                win.check_supply(design.vdd)
            except OutOfRange as ex:
                raise OutOfRange(f"row {tpl.row} col {col}: {ex}") from ex
            for which, v in ((Which.M1, win.v_low), (Which.M2, win.v_high)):
                addrs.append(DeviceAddress(tpl.row, col, which))
                targets.append(v)
    v = np.array(targets, dtype=float)
    lo, hi = curve.achievable
    bad = np.flatnonzero((v < lo) | (v > hi))
    if len(bad):
        a = addrs[bad[0]]
        raise Unachievable(float(v[bad[0]]), (lo, hi), (a.row, a.col))
    g = curve.conductance(v) if len(v) else v
    _logger.debug("compiled %d device targets", len(addrs))
    return ConductanceMap(dict(zip(addrs, g.tolist(), strict=True)))

def compile_template(template :Template, design :CellDesign = CellDesign(), *,
                     g_min :float = G_MIN, g_max :float = G_MAX, rram_rows :int = ArrayConfig().rram_rows) -> ConductanceMap:
    """Compile a single template; see :func:`compile_templates`."""
    return compile_templates((template,), design, g_min=g_min, g_max=g_max, rram_rows=rram_rows)

@dataclass(frozen=True)
class DeviceRecord:
    addr :DeviceAddress
    target_g :float
    target_v :float
    realized_g :float
    realized_v :float
    iterations :int

    @property
    def error_v(self) -> float:
        return abs(self.realized_v - self.target_v)

@dataclass(frozen=True)
class VerifyReport:
    records :tuple[DeviceRecord, ...]
    iterations :int
    tol_v :float
    max_iters :int

    @property
    def failed(self) -> tuple[DeviceAddress, ...]:
        return tuple(r.addr for r in self.records if r.error_v > self.tol_v)

    @property
    def converged(self) -> bool:
        return not self.failed

    @property
    def max_error_v(self) -> float:
        return max((r.error_v for r in self.records), default=0.0)

    def render(self) -> str:
        """The plain-text verify report."""
        lines = [f"iterations: {self.iterations}",
                 f"devices: {len(self.records)}",
                 f"converged: {'yes' if self.converged else 'no'}",
                 f"tol_V: {self.tol_v!r}",
                 f"max_error_V: {self.max_error_v!r}",
                 "row,col,which,iterations,target_S,realized_S,error_V"]
        lines.extend(f"{r.addr.row},{r.addr.col},{r.addr.which.value},{r.iterations},{r.target_g!r},{r.realized_g!r},{r.error_v!r}"
                     for r in self.records)
        return '\n'.join(lines) + '\n'

def program_and_verify(array :AcamArray, cmap :ConductanceMap, tol_v :float = TOL_V, max_iters :int = MAX_ITERS,
                       seed :int = 0) -> tuple[AcamArray, VerifyReport]:
    """Write every device of ``cmap``, then keep rewriting the devices whose realized window bound is
    more than ``tol_v`` from the target, for at most ``max_iters`` rounds.

    Write noise for device ``(row, col, which)`` in round ``i`` is seeded with ``[seed, i, row, col, which]``,
    so results do not depend on the order of writes.

    :return: the programmed array (still in programming mode) and the report
    :raises ModeError: if the array is not in programming mode
    :raises VerifyFailed: listing the devices still out of tolerance, with the report and the array attached"""
    if array.mode is not Mode.PROGRAMMING:
        raise ModeError("array is not in programming mode")
    if max_iters < 1 or tol_v < 0:
        raise OutOfRange(f"invalid verify parameters tol_v={tol_v}, max_iters={max_iters}")
    curve = design_curve(array.design, array.g_min, array.g_max)
    items = cmap.sorted_items()
    target_g = np.array([g for _a, g in items], dtype=float)
    target_v = curve.threshold(target_g) if items else np.zeros(0)
    realized = np.zeros(len(items))
    iters = np.zeros(len(items), dtype=int)
    session = ProgrammingSession(array)
    pending = np.arange(len(items))
    rounds = 0
    while len(pending) and rounds < max_iters:
        rounds += 1
        for i in pending.tolist():
            addr = items[i][0]
            realized[i] = session.write(addr, target_g[i], seed=[seed, rounds, addr.row, addr.col, 0 if addr.which is Which.M1 else 1])
            iters[i] = rounds
        errors = np.abs(curve.threshold(realized[pending]) - target_v[pending])
        pending = pending[errors > tol_v]
        _logger.debug("verify round %d: %d devices out of tolerance", rounds, len(pending))
    realized_v = curve.threshold(realized) if items else np.zeros(0)
    report = VerifyReport(tuple(DeviceRecord(a, float(target_g[i]), float(target_v[i]), float(realized[i]), float(realized_v[i]), int(iters[i]))
                                for i, (a, _g) in enumerate(items)), rounds, tol_v, max_iters)
    _logger.info("programmed %d devices in %d rounds, max error %.3g V", len(items), rounds, report.max_error_v)
    if not report.converged:
        failed = report.failed
        raise VerifyFailed(f"{len(failed)} devices out of tolerance after {rounds} rounds: "
                           + ', '.join(f"({a.row}, {a.col}, {a.which.value})" for a in failed[:10])
                           + (', ...' if len(failed) > 10 else ''), failed, report, session.array)
    return session.array, report

def refresh(array :AcamArray, cmap :Optional[ConductanceMap] = None) -> AcamArray:
    """Hook for periodically refreshing the stored conductances. Drift is not modelled, so this returns ``array`` as is."""
    _logger.debug("refresh: no drift model, %s devices unchanged", 'all' if cmap is None else len(cmap))
    return array
