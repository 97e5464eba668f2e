"""File Formats

Overview
--------

Readers and writers for every file the command-line interface consumes or produces. All writers
take an open text stream (see :func:`txlacam.file.atomic_write`); floats are written with
:func:`repr` or, for unit-scaled columns such as ``target_uS`` and ``time_ns``, with
:func:`txlacam.file.scaled_str`, so that reading a file back reproduces the values exactly.

============================ ===========================================================
template CSV                 ``row,col,v_low_V,v_high_V``
conductance map CSV          ``row,col,which,target_uS``
array JSON                   ``{"config": {...}, "devices": [{row, col, which, conductance_S, kind}]}``
search result CSV            ``row,count,v_ml_V,hit``
PISO file                    one line of ``0``/``1``, row 0 first
energy JSON                  ``{per_row, total_J, per_search_per_cell_J, reference_table2_J, ...}``
trace CSV                    ``time_ns,row_index,v_ml``
waveform CSV                 ``time_ns,value_V``
query CSV                    a single line of voltages
sweep CSV                    see :data:`SWEEP_COLUMNS`
============================ ===========================================================

Errors in input files raise :exc:`~txlacam.error.ParseError` naming the line and, where applicable,
the cell.

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
import csv
import json
import typing
from collections.abc import Iterable, Iterator, Sequence
from typing import Any
import numpy as np
from more_itertools import classify_unique
from .error import LengthMismatch, OutOfRange, ParseError
from .file import scaled_str, unscaled
from .devices import VDD_TXL, ElementKind
from .cell import CellDesign, MatchWindow, Mode, Which
from .acam import AcamArray, ArrayConfig, DeviceAddress, SearchResult
from .compiler import ConductanceMap, Template
from .energy import CellKind, EnergyReport
from .frontend import QueryVector, Waveform

def _rows(fh :typing.TextIO, header :Sequence[str], what :str) -> Iterator[tuple[int, list[str]]]:
    """Yield ``(line_number, fields)`` for each data line, after checking the header."""
    reader = csv.reader(fh, strict=True)
    try:
        first = next(reader)
    except StopIteration as ex:
        raise ParseError(f"{what}: empty file, expected header {','.join(header)}") from ex
    except csv.Error as ex:
        raise ParseError(f"{what}: {ex}") from ex
    if [h.strip() for h in first] != list(header):
        raise ParseError(f"{what}: bad header {first!r}, expected {','.join(header)}")
    try:
        for fields in reader:
            if not fields:
                continue
            if len(fields) != len(header):
                raise ParseError(f"{what} line {reader.line_num}: expected {len(header)} fields, got {len(fields)}")
            yield reader.line_num, [f.strip() for f in fields]
    except csv.Error as ex:
        raise ParseError(f"{what} line {reader.line_num}: {ex}") from ex

def _num(text :str, conv :typing.Callable[[str], Any], where :str) -> Any:
    try:
        return conv(text)
    except (ValueError, ArithmeticError) as ex:
        raise ParseError(f"{where}: bad number {text!r}") from ex

TEMPLATE_HEADER = ('row', 'col', 'v_low_V', 'v_high_V')

def write_templates(templates :Iterable[Template], fh :typing.TextIO) -> None:
    fh.write(','.join(TEMPLATE_HEADER) + '\n')
    for tpl in sorted(templates, key=lambda t: t.row):
        for col, w in enumerate(tpl.windows):
            fh.write(f"{tpl.row},{col},{w.v_low!r},{w.v_high!r}\n")

def read_templates(fh :typing.TextIO, *, columns :int = 32, rows :int = 48, vdd :float = VDD_TXL) -> list[Template]:
    """Read a template CSV. Every listed row must give a window for each of the ``columns`` columns.

    :raises ParseError: naming the line or the ``(row, col)`` of the first problem"""
    cells :dict[tuple[int, int], MatchWindow] = {}
    entries = ((ln, _num(f[0], int, f"line {ln}"), _num(f[1], int, f"line {ln}"), f) for ln, f in _rows(fh, TEMPLATE_HEADER, 'template'))
    for (ln, row, col, f), _uj, unique in classify_unique(entries, key=lambda e: (e[1], e[2])):
        where = f"template line {ln}, row {row} col {col}"
        if not unique:
            raise ParseError(f"{where}: duplicate cell")
        if not (0 <= row < rows and 0 <= col < columns):
            raise ParseError(f"{where}: cell outside the {rows}x{columns} array")
        v_low, v_high = _num(f[2], float, where), _num(f[3], float, where)
        if not (0 <= v_low <= vdd and 0 <= v_high <= vdd):
            raise ParseError(f"{where}: window ({v_low}, {v_high}) V outside [0, {vdd}] V")
        cells[row, col] = MatchWindow(v_low, v_high)
    out :list[Template] = []
    for row in sorted({r for r, _c in cells}):
        missing = [c for c in range(columns) if (row, c) not in cells]
        if missing:
            raise ParseError(f"template row {row}: no window for col {missing[0]}")
        out.append(Template(row, tuple(cells[row, c] for c in range(columns)), f"row {row}"))
    return out

CMAP_HEADER = ('row', 'col', 'which', 'target_uS')

def write_conductance_map(cmap :ConductanceMap, fh :typing.TextIO) -> None:
    fh.write(','.join(CMAP_HEADER) + '\n')
    for addr, g in cmap.sorted_items():
        fh.write(f"{addr.row},{addr.col},{addr.which.value},{scaled_str(g, 6)}\n")

def read_conductance_map(fh :typing.TextIO) -> ConductanceMap:
    entries :dict[DeviceAddress, float] = {}
    for ln, f in _rows(fh, CMAP_HEADER, 'conductance map'):
        where = f"conductance map line {ln}"
        try:
            addr = DeviceAddress(_num(f[0], int, where), _num(f[1], int, where), Which(f[2]))
        except ValueError as ex:
            raise ParseError(f"{where}: bad device {f[2]!r}") from ex
        if addr in entries:
            raise ParseError(f"{where}: duplicate device {addr}")
        entries[addr] = _num(f[3], lambda s: unscaled(s, 6), where)
    return ConductanceMap(entries)

def array_to_json(array :AcamArray) -> dict[str, Any]:
    cfg = array.config
    devices = [{'row': r, 'col': c, 'which': which.value,
                'conductance_S': float((array.g_m1 if which is Which.M1 else array.g_m2)[r, c]), 'kind': array.kind(r).value}
               for r in range(cfg.rows) for c in range(cfg.columns) for which in Which]
    return {'config': {'columns': cfg.columns, 'rram_rows': cfg.rram_rows, 'poly_rows': cfg.poly_rows,
                       'vdd_txl_V': cfg.vdd_txl, 'vdd_prog_V': cfg.vdd_prog, 'g_min_S': array.g_min,
                       'g_max_S': array.g_max, 'write_sigma': array.write_sigma, 'mode': array.mode.value},
            'devices': devices}

def write_array(array :AcamArray, fh :typing.TextIO) -> None:
    json.dump(array_to_json(array), fh, indent=1)
    fh.write('\n')

def read_array(fh :typing.TextIO, design :CellDesign = CellDesign()) -> AcamArray:
    """Read an array state file; the transistor parameters come from ``design``.

    :raises ParseError: if the file is malformed or a device is missing or listed twice"""
    try:
        data = json.load(fh)
        conf = data['config']
        config = ArrayConfig(int(conf['columns']), int(conf['rram_rows']), int(conf['poly_rows']),
                             float(conf['vdd_txl_V']), float(conf['vdd_prog_V']))
        g = np.zeros((2, config.rows, config.columns))
        seen = np.zeros(g.shape, dtype=bool)
        for dev in data['devices']:
            idx = (0 if Which(dev['which']) is Which.M1 else 1, int(dev['row']), int(dev['col']))
            if not (0 <= idx[1] < config.rows and 0 <= idx[2] < config.columns):
                raise ParseError(f"array file: device {dev!r} outside the array")
            if seen[idx]:
                raise ParseError(f"array file: duplicate device {dev!r}")
            if ElementKind(dev['kind']) is not (ElementKind.RRAM if idx[1] < config.rram_rows else ElementKind.POLYSILICON):
                raise ParseError(f"array file: wrong kind for device {dev!r}")
            seen[idx] = True
            g[idx] = float(dev['conductance_S'])
        if not seen.all():
            raise ParseError(f"array file: {int((~seen).sum())} devices missing")
        return AcamArray(config, g[0], g[1], design, float(conf['g_min_S']), float(conf['g_max_S']),
                         float(conf['write_sigma']), Mode(conf['mode']))
    except ParseError:
        raise
    except (KeyError, TypeError, ValueError) as ex:
        raise ParseError(f"array file: {ex!r}") from ex

RESULT_HEADER = ('row', 'count', 'v_ml_V', 'hit')

def write_search_result(result :SearchResult, fh :typing.TextIO) -> None:
    fh.write(','.join(RESULT_HEADER) + '\n')
    for r, (n, v, h) in enumerate(zip(result.counts.tolist(), result.v_ml.tolist(), result.hits.tolist(), strict=True)):
        fh.write(f"{r},{n},{v!r},{int(h)}\n")

def read_search_result(fh :typing.TextIO) -> list[tuple[int, int, float, bool]]:
    """Read a search result CSV as ``(row, count, v_ml, hit)`` tuples."""
    out = []
    for ln, f in _rows(fh, RESULT_HEADER, 'search result'):
        where = f"search result line {ln}"
        out.append((_num(f[0], int, where), _num(f[1], int, where), _num(f[2], float, where), _num(f[3], int, where) == 1))
    return out

def write_piso(bits :str, fh :typing.TextIO) -> None:
    fh.write(bits + '\n')

def read_piso(fh :typing.TextIO) -> str:
    bits = fh.read().strip()
    if set(bits) - {'0', '1'}:
        raise ParseError(f"not a bitstream: {bits!r}")
    return bits

def energy_to_json(report :EnergyReport) -> dict[str, Any]:
    return {'cell_kind': report.cell_kind.value, 'per_row': list(report.per_row), 'total_J': report.total_J,
            'per_search_per_cell_J': report.per_search_per_cell_J, 'reference_table2_J': report.reference_per_cell_J,
            'cells': report.cells, 'overhead': report.overhead, 'cycle_rate_Hz': report.cycle_rate_Hz}

def write_energy(report :EnergyReport, fh :typing.TextIO) -> None:
    json.dump(energy_to_json(report), fh, indent=1)
    fh.write('\n')

def read_energy(fh :typing.TextIO) -> EnergyReport:
    try:
        d = json.load(fh)
        return EnergyReport(CellKind(d['cell_kind']), tuple(float(x) for x in d['per_row']), float(d['total_J']),
                            int(d['cells']), float(d['overhead']), float(d['cycle_rate_Hz']), float(d['reference_table2_J']))
    except (KeyError, TypeError, ValueError) as ex:
        raise ParseError(f"energy file: {ex!r}") from ex

TRACE_HEADER = ('time_ns', 'row_index', 'v_ml')

def write_traces(result :SearchResult, fh :typing.TextIO, t0 :float = 0.0) -> None:
    """Write the matchline trajectories of a search recorded with traces, in long format.
    ``t0`` is the time of the start of the evaluate phase."""
    if result.times is None or result.traces is None:
        raise ValueError("search result has no traces")
    fh.write(','.join(TRACE_HEADER) + '\n')
    for t, volts in zip(result.times.tolist(), result.traces.tolist(), strict=True):
        ts = scaled_str(t0 + t, 9)
        for r, v in enumerate(volts):
            fh.write(f"{ts},{r},{v!r}\n")

WAVEFORM_HEADER = ('time_ns', 'value_V')

def write_waveform(w :Waveform, fh :typing.TextIO) -> None:
    fh.write(','.join(WAVEFORM_HEADER) + '\n')
    for t, v in w.samples:
        fh.write(f"{scaled_str(t, 9)},{v!r}\n")

def read_waveform(fh :typing.TextIO, vdd :float = VDD_TXL) -> Waveform:
    points = []
    for ln, f in _rows(fh, WAVEFORM_HEADER, 'waveform'):
        where = f"waveform line {ln}"
        points.append((_num(f[0], lambda s: unscaled(s, 9), where), _num(f[1], float, where)))
    try:
        return Waveform(tuple(points), vdd)
    except OutOfRange as ex:
        raise ParseError(f"waveform: {ex}") from ex

def write_query(query :Sequence[float], fh :typing.TextIO) -> None:
    fh.write(','.join(repr(float(v)) for v in query) + '\n')

def read_query(fh :typing.TextIO, columns :int = 32, vdd :float = VDD_TXL) -> QueryVector:
    """Read a query CSV: a single line of ``columns`` voltages.

    :raises LengthMismatch: reporting the expected and actual number of values"""
    lines = [ln for ln in fh.read().splitlines() if ln.strip()]
    if len(lines) != 1:
        raise ParseError(f"query file: expected a single line, got {len(lines)}")
    values = tuple(_num(v.strip(), float, 'query file') for v in lines[0].split(','))
    if len(values) != columns:
        raise LengthMismatch(f"query file: expected {columns} values, got {len(values)}")
    try:
        return QueryVector(values, vdd)
    except OutOfRange as ex:
        raise ParseError(f"query file: {ex}") from ex

#: Columns of the sweep CSV, in order.
SWEEP_COLUMNS = ('v_en_V', 'v_th_V', 'sigma', 'sparsity', 'cell_kind', 'k_boundary', 'accuracy', 'energy_total_J', 'energy_per_cell_J')

def write_sweep(points :Iterable[dict[str, Any]], fh :typing.TextIO) -> None:
    fh.write(','.join(SWEEP_COLUMNS) + '\n')
    for p in points:
        fh.write(','.join(p[c] if isinstance(p[c], str) else repr(p[c]) for c in SWEEP_COLUMNS) + '\n')

def read_sweep(fh :typing.TextIO) -> list[dict[str, str]]:
    return [dict(zip(SWEEP_COLUMNS, f, strict=True)) for _ln, f in _rows(fh, SWEEP_COLUMNS, 'sweep')]
