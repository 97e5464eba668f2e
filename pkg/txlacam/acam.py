"""The TXL-ACAM Array

Overview
--------

:class:`AcamArray` is an immutable snapshot of a ``rows × columns`` array of 9T4R cells: by default
32 rows of RRAM-based cells followed by 16 rows whose top elements are fixed polysilicon resistors,
used for calibration and readout assist. Each cell holds two conductances, ``M1`` (lower bound) and
``M2`` (upper bound), stored as two :mod:`numpy` matrices.

In *matching* mode, :func:`array_search` broadcasts a query vector down the columns, lets every
matching cell charge its row's matchline, and senses every matchline at the end of the evaluate
phase. The result's hit bits are read out through the :class:`PisoRegister`, row 0 first.

In *programming* mode the array is a 1T1R crossbar: every RRAM device is reached through its row
line and one of 64 bottom-electrode lines (two per column, see :func:`address_decode`), selected by
a control word shifted in through the :class:`SipoRegister`. :class:`ProgrammingSession` wraps this.

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
import functools
import dataclasses
from dataclasses import dataclass
from collections.abc import Sequence
from typing import NamedTuple, Optional, Union
import numpy as np
from .error import AddressOutOfRange, ImmutableDevice, LengthMismatch, ModeError, OutOfRange, ParseError
from .devices import (ElementKind, HybridInverter, ResistiveElement, VDD_TXL, VDD_PROG, G_MIN, G_MAX, reference_conductance,
                      threshold_curve, threshold_batch, vtc_batch, rram_write)
from .cell import CellDesign, Fidelity, MatchWindow, Mode, TxlCell, Which, CIRCUIT_GRID, men_current, stack_current
from .matchline import MatchlineState, SenseAmp, TimingConfig, integrate, level_traces

_logger = logging.getLogger(__name__)

#: Die area of the prototype, mm².
DIE_AREA_MM2 = 3.8
#: Number of cells in the prototype (48 rows of 32).
PROTOTYPE_CELLS = 1536
#: Reported cell density, cells/mm².
CELL_DENSITY_PER_MM2 = 3135

@dataclass(frozen=True)
class ArrayConfig:
    columns :int = 32
    rram_rows :int = 32
    poly_rows :int = 16
    vdd_txl :float = VDD_TXL
    vdd_prog :float = VDD_PROG

    def __post_init__(self):
        if self.columns < 1 or self.rram_rows < 0 or self.poly_rows < 0 or self.rows < 1:
            raise OutOfRange(f"invalid array dimensions: {self!r}")

    @property
    def rows(self) -> int:
        return self.rram_rows + self.poly_rows

    @property
    def cells(self) -> int:
        return self.rows*self.columns

    @property
    def area_mm2(self) -> float:
        """Array area at the prototype's cell density, peripherals excluded."""
        return self.cells/CELL_DENSITY_PER_MM2

    @property
    def be_lines(self) -> int:
        """Number of bottom-electrode lines: two per column."""
        return 2*self.columns

class DeviceAddress(NamedTuple):
    row :int
    col :int
    which :Which

def _check_address(config :ArrayConfig, addr :DeviceAddress) -> None:
    if not (0 <= addr.row < config.rows and 0 <= addr.col < config.columns):
        raise AddressOutOfRange(f"address {addr} outside {config.rows}x{config.columns} array")

def address_decode(addr :DeviceAddress, config :ArrayConfig = ArrayConfig()) -> tuple[int, int]:
    """Map a device to its ``(row_line, be_line)``, where ``be_line = 2*col`` for ``M1`` and ``2*col + 1`` for ``M2``.

    :raises AddressOutOfRange: if the address does not exist"""
    _check_address(config, addr)
    return addr.row, 2*addr.col + (0 if addr.which is Which.M1 else 1)

def address_encode(row_line :int, be_line :int, config :ArrayConfig = ArrayConfig()) -> DeviceAddress:
    """Inverse of :func:`address_decode`."""
    if not 0 <= be_line < config.be_lines:
        raise AddressOutOfRange(f"bottom-electrode line {be_line} outside [0, {config.be_lines})")
    addr = DeviceAddress(row_line, be_line//2, Which.M1 if be_line%2==0 else Which.M2)
    _check_address(config, addr)
    return addr

@dataclass(frozen=True, eq=False)
class AcamArray:
    """An immutable array snapshot. Use :meth:`create` rather than the constructor."""
    config :ArrayConfig
    g_m1 :np.ndarray
    g_m2 :np.ndarray
    design :CellDesign = CellDesign()
    g_min :float = G_MIN
    g_max :float = G_MAX
    write_sigma :float = 0.0
    mode :Mode = Mode.MATCHING

    def __post_init__(self):
        shape = (self.config.rows, self.config.columns)
        if self.g_m1.shape != shape or self.g_m2.shape != shape:
            raise LengthMismatch(f"conductance matrices must have shape {shape}, got {self.g_m1.shape} and {self.g_m2.shape}")
        if self.config.vdd_txl != self.design.vdd:
            raise OutOfRange(f"array supply {self.config.vdd_txl} V differs from cell supply {self.design.vdd} V")
        rram = slice(0, self.config.rram_rows)
        for g in (self.g_m1[rram], self.g_m2[rram]):
            if np.any(g < self.g_min) or np.any(g > self.g_max):
                raise OutOfRange(f"RRAM conductance outside [{self.g_min}, {self.g_max}] S")
        for g in (self.g_m1, self.g_m2):
            if np.any(g <= 0):
                raise OutOfRange("conductances must be positive")
            g.setflags(write=False)

    @classmethod
    def create(cls, config :ArrayConfig = ArrayConfig(), design :Optional[CellDesign] = None, *, g_min :float = G_MIN,
               g_max :float = G_MAX, write_sigma :float = 0.0, poly_g_m1 :Optional[float] = None,
               poly_g_m2 :Optional[float] = None) -> 'AcamArray':
        """A freshly formed array: every device at the reference conductance, so every window is empty.

        The polysilicon rows get ``poly_g_m1``/``poly_g_m2`` (default: the reference conductance)."""
        if design is None:
            design = CellDesign(vdd=config.vdd_txl)
        g_ref = reference_conductance(g_min, g_max)
        g_m1 = np.full((config.rows, config.columns), g_ref)
        g_m2 = g_m1.copy()
        g_m1[config.rram_rows:] = g_ref if poly_g_m1 is None else poly_g_m1
        g_m2[config.rram_rows:] = g_ref if poly_g_m2 is None else poly_g_m2
        return cls(config, g_m1, g_m2, design, g_min, g_max, write_sigma)

    @property
    def g_ref(self) -> float:
        return reference_conductance(self.g_min, self.g_max)

    def kind(self, row :int) -> ElementKind:
        return ElementKind.RRAM if row < self.config.rram_rows else ElementKind.POLYSILICON

    def conductance(self, addr :DeviceAddress) -> float:
        _check_address(self.config, addr)
        return float((self.g_m1 if addr.which is Which.M1 else self.g_m2)[addr.row, addr.col])

    def element(self, addr :DeviceAddress) -> ResistiveElement:
        g = self.conductance(addr)
        if self.kind(addr.row) is ElementKind.POLYSILICON:
            return ResistiveElement.polysilicon(g)
        return ResistiveElement.rram(g, g_min=self.g_min, g_max=self.g_max, write_sigma=self.write_sigma)

    def cell(self, row :int, col :int) -> TxlCell:
        """The cell at ``(row, col)`` as a standalone :class:`TxlCell`, in the array's mode."""
        d = self.design
        def inverter(which :Which) -> HybridInverter:
            return HybridInverter(self.element(DeviceAddress(row, col, which)), ResistiveElement.polysilicon(self.g_ref),
                                  d.pmos, d.nmos, d.vdd)
        return TxlCell(inverter(Which.M1), inverter(Which.M2), d.m_men, d.m_mlp, d.m_mln,
                       mode=self.mode, v_ov=d.v_ov, match_fraction=d.match_fraction)

    def with_conductance(self, addr :DeviceAddress, g :float) -> 'AcamArray':
        _check_address(self.config, addr)
        g_m1, g_m2 = self.g_m1.copy(), self.g_m2.copy()
        (g_m1 if addr.which is Which.M1 else g_m2)[addr.row, addr.col] = g
        return dataclasses.replace(self, g_m1=g_m1, g_m2=g_m2)

    @functools.cached_property
    def windows(self) -> tuple[np.ndarray, np.ndarray]:
        """``(v_low, v_high)`` matrices of all match windows, from the cached threshold characterisation."""
        d = self.design
        curve = threshold_curve(d.pmos, d.nmos, d.vdd, self.g_ref, self.g_min, self.g_max)
        def thresholds(g :np.ndarray) -> np.ndarray:
            v = curve.threshold(g)
            outside = (g < self.g_min) | (g > self.g_max)
            if np.any(outside):  # polysilicon values need not lie in the RRAM range
                v[outside] = threshold_batch(g[outside], self.g_ref, d.pmos, d.nmos, d.vdd)
            return v
        v_low, v_high = thresholds(self.g_m1), thresholds(self.g_m2)
        v_low.setflags(write=False)
        v_high.setflags(write=False)
        return v_low, v_high

    def window(self, row :int, col :int) -> MatchWindow:
        v_low, v_high = self.windows
        return MatchWindow(float(v_low[row, col]), float(v_high[row, col]))

def enter_programming_mode(array :AcamArray) -> AcamArray:
    return dataclasses.replace(array, mode=Mode.PROGRAMMING)

def exit_programming_mode(array :AcamArray) -> AcamArray:
    return dataclasses.replace(array, mode=Mode.MATCHING)

@dataclass(frozen=True, eq=False)
class SearchResult:
    """The outcome of one search cycle.

    ``counts`` and ``matching`` are the exact per-cell window decisions, independent of the sense amplifier."""
    query :tuple[float, ...]
    v_en :float
    i_lim :float
    fidelity :Fidelity
    #: matchline voltage of each row at the sampling instant
    v_ml :np.ndarray
    #: sensed hit of each row
    hits :np.ndarray
    #: number of matching cells of each row
    counts :np.ndarray
    #: per-cell match decisions, ``rows × columns``
    matching :np.ndarray
    #: sampled matchline voltage for ``0..columns`` behavioral matches
    levels :np.ndarray
    sense_amp :SenseAmp
    #: sample times of the evaluate phase, if traces were requested
    times :Optional[np.ndarray] = None
    #: matchline voltages, ``len(times) × rows``, if traces were requested
    traces :Optional[np.ndarray] = None

    @property
    def rows(self) -> int:
        return len(self.v_ml)

    @property
    def sa_levels(self) -> np.ndarray:
        """The sense amplifiers' output voltages (0 V on a hit)."""
        return np.where(self.hits, self.sense_amp.hit_level, self.sense_amp.miss_level)

    @property
    def hit_word(self) -> str:
        """The hit bits as the word loaded into the PISO register, row 0 first, ``1`` for a hit."""
        return ''.join('1' if h else '0' for h in self.hits)

def _circuit_drive(array :AcamArray, query :np.ndarray, v_en :float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-cell match decisions and per-row drive tables on a uniform matchline-voltage grid."""
    d = array.design
    g_ref = array.g_ref
    gate_p = vtc_batch(array.g_m1, g_ref, d.pmos, d.nmos, d.vdd, query[np.newaxis, :])
    gate_n = vtc_batch(array.g_m2, g_ref, d.pmos, d.nmos, d.vdd, query[np.newaxis, :])
    i_lim = men_current(d.m_men, d.vdd, v_en)
    i0 = stack_current(d.m_men, d.m_mlp, d.m_mln, d.vdd, v_en, gate_p, gate_n, 0.0)
    matching = (i0 > 0) & (i0 >= d.match_fraction*i_lim)
    grid = np.linspace(0, d.vdd, CIRCUIT_GRID)
    table = np.zeros((array.config.rows, CIRCUIT_GRID))
    rows, _cols = np.nonzero(matching)
    if len(rows):
        cur = stack_current(d.m_men, d.m_mlp, d.m_mln, d.vdd, v_en,
                            gate_p[matching][:, np.newaxis], gate_n[matching][:, np.newaxis], grid[np.newaxis, :])
        np.add.at(table, rows, np.minimum.accumulate(cur, axis=1))
    return matching, grid, table

def array_search(array :AcamArray, query :Sequence[float], v_en :float, timing :TimingConfig = TimingConfig(),
                 fidelity :Fidelity = Fidelity.BEHAVIORAL, *, matchline :MatchlineState = MatchlineState(),
                 sense_amp :SenseAmp = SenseAmp(), traces :bool = False) -> SearchResult:
    """Search all rows in parallel: evaluate every cell against the query value of its column,
    integrate every matchline over the evaluate phase and sense it.

    At behavioral fidelity all matching cells are identical current sources, so a row's matchline
    voltage depends only on its match count and is looked up from :func:`~txlacam.matchline.level_traces`.
    At circuit fidelity each matching cell's transistor stack is solved and the rows are integrated individually.

    :param matchline: supplies the matchline capacitance and leakage
    :raises ModeError: in programming mode
    :raises LengthMismatch: if the query length differs from the number of columns
    :raises OutOfRange: for query values or ``v_en`` outside the supply range"""
    if array.mode is not Mode.MATCHING:
        raise ModeError("array is in programming mode")
    cfg, d = array.config, array.design
    q = np.asarray(query, dtype=float)
    if q.shape != (cfg.columns,):
        raise LengthMismatch(f"query has {q.size} values, expected {cfg.columns}")
    if np.any(q < 0) or np.any(q > d.vdd) or not 0 <= v_en <= d.vdd:
        raise OutOfRange(f"query or v_en={v_en} outside [0, {d.vdd}] V")
    i_lim = men_current(d.m_men, d.vdd, v_en)
    ml_args = {'c_ml': matchline.c_ml, 'r_leak': matchline.r_leak, 'vdd': d.vdd}
    times, level_volts = level_traces(cfg.columns, i_lim, v_ov=d.v_ov, timing=timing, **ml_args)
    if fidelity is Fidelity.BEHAVIORAL:
        v_low, v_high = array.windows
        matching = (v_low < q) & (q < v_high)
        counts = matching.sum(axis=1)
        volts = level_volts[:, counts]
    else:
        matching, grid, table = _circuit_drive(array, q, v_en)
        counts = matching.sum(axis=1)
        step = grid[1] - grid[0]
        row_idx = np.arange(cfg.rows)
        def drive(v :np.ndarray) -> np.ndarray:
            pos = np.clip(v/step, 0, CIRCUIT_GRID-1)
            lo = np.minimum(pos.astype(int), CIRCUIT_GRID-2)
            frac = pos - lo
            return table[row_idx, lo]*(1-frac) + table[row_idx, lo+1]*frac
        times, volts = integrate(np.zeros(cfg.rows), drive, timing=timing, **ml_args)
    v_ml = np.array(volts[-1])
    hits = v_ml > sense_amp.v_th
    _logger.debug("search (%s): counts %s, %d hits", fidelity.value, counts.tolist(), int(hits.sum()))
    return SearchResult(query=tuple(q.tolist()), v_en=v_en, i_lim=i_lim, fidelity=fidelity, v_ml=v_ml, hits=hits,
                        counts=counts, matching=matching, levels=np.array(level_volts[-1]), sense_amp=sense_amp,
                        times=np.array(times) if traces else None, traces=np.array(volts) if traces else None)

def program_device(array :AcamArray, addr :DeviceAddress, target_g :float, seed :Union[int, Sequence[int]]) -> AcamArray:
    """Write one RRAM device; every other device is unchanged.

    :raises ModeError: in matching mode
    :raises AddressOutOfRange: if the address does not exist
    :raises ImmutableDevice: for the polysilicon rows"""
    if array.mode is not Mode.PROGRAMMING:
        raise ModeError("array is not in programming mode")
    elem = array.element(addr)
    if elem.kind is ElementKind.POLYSILICON:
        raise ImmutableDevice(f"row {addr.row} is a polysilicon row")
    return array.with_conductance(addr, rram_write(elem, target_g, seed).conductance)

def _bits(bits :Union[str, Sequence[int]]) -> tuple[int, ...]:
    try:
        out = tuple(int(b) for b in bits)
    except (TypeError, ValueError) as ex:
        raise ParseError(f"not a bit sequence: {bits!r}") from ex
    if any(b not in (0, 1) for b in out):
        raise ParseError(f"not a bit sequence: {bits!r}")
    return out

@dataclass(frozen=True)
class SipoRegister:
    """Serial-in parallel-out shift register. Each shift moves every bit one stage along and takes the serial
    input into stage 0; the parallel outputs read the stages in reverse, so after ``width`` shifts they equal
    the bits in the order they were shifted in."""
    width :int
    stages :tuple[int, ...] = ()

    def __post_init__(self):
        if not self.stages:
            object.__setattr__(self, 'stages', (0,)*self.width)
        if len(self.stages) != self.width:
            raise LengthMismatch(f"register has {len(self.stages)} stages, expected {self.width}")

    def shift(self, bit :int) -> 'SipoRegister':
        return dataclasses.replace(self, stages=(bit,) + self.stages[:-1])

    @property
    def outputs(self) -> tuple[int, ...]:
        return self.stages[::-1]

def sipo_load(reg :SipoRegister, bitstream :Union[str, Sequence[int]]) -> SipoRegister:
    """Shift a full bitstream into the register.

    :raises LengthMismatch: if the bitstream length differs from the register width"""
    bits = _bits(bitstream)
    if len(bits) != reg.width:
        raise LengthMismatch(f"bitstream has {len(bits)} bits, register width is {reg.width}")
    for b in bits:
        reg = reg.shift(b)
    return reg

@dataclass(frozen=True)
class PisoRegister:
    """Parallel-in serial-out shift register with separate load and shift controls; stage 0 is shifted out first."""
    width :int
    stages :tuple[int, ...] = ()

    def __post_init__(self):
        if not self.stages:
            object.__setattr__(self, 'stages', (0,)*self.width)
        if len(self.stages) != self.width:
            raise LengthMismatch(f"register has {len(self.stages)} stages, expected {self.width}")

    def load(self, word :Union[str, Sequence[int]]) -> 'PisoRegister':
        bits = _bits(word)
        if len(bits) != self.width:
            raise LengthMismatch(f"word has {len(bits)} bits, register width is {self.width}")
        return dataclasses.replace(self, stages=bits)

    def shift(self) -> tuple[int, 'PisoRegister']:
        return self.stages[0], dataclasses.replace(self, stages=self.stages[1:] + (0,))

def piso_load_and_shift(reg :PisoRegister, parallel_word :Union[str, Sequence[int]]) -> str:
    """Load a word in parallel, then shift it out completely; returns the serial bitstream as a ``0``/``1`` string."""
    reg = reg.load(parallel_word)
    out :list[str] = []
    for _ in range(reg.width):
        bit, reg = reg.shift()
        out.append(str(bit))
    return ''.join(out)

def control_fields(config :ArrayConfig = ArrayConfig()) -> tuple[int, int]:
    """Bit widths of the row-line and bottom-electrode-line fields of the control word."""
    return max(1, (config.rows-1).bit_length()), max(1, (config.be_lines-1).bit_length())

def encode_control(mode :Mode, row_line :int, be_line :int, config :ArrayConfig = ArrayConfig()) -> str:
    """The configuration word shifted into the SIPO: a mode bit (``1`` for programming), then the row line
    and the bottom-electrode line, each most significant bit first."""
    row_bits, be_bits = control_fields(config)
    if not (0 <= row_line < config.rows and 0 <= be_line < config.be_lines):
        raise AddressOutOfRange(f"lines ({row_line}, {be_line}) outside the array")
    return ('1' if mode is Mode.PROGRAMMING else '0') + format(row_line, f'0{row_bits}b') + format(be_line, f'0{be_bits}b')

def decode_control(bits :Sequence[int], config :ArrayConfig = ArrayConfig()) -> tuple[Mode, int, int]:
    """Inverse of :func:`encode_control`, applied to a register's parallel outputs."""
    row_bits, be_bits = control_fields(config)
    if len(bits) != 1 + row_bits + be_bits:
        raise LengthMismatch(f"control word has {len(bits)} bits, expected {1 + row_bits + be_bits}")
    text = ''.join(map(str, bits))
    return (Mode.PROGRAMMING if text[0]=='1' else Mode.MATCHING,
            int(text[1:1+row_bits], 2), int(text[1+row_bits:], 2))

class ProgrammingSession:
    """Single-writer access to an array in programming mode.

    Used as a context manager, it switches the array into programming mode on entry and back on exit;
    :attr:`array` always holds the current snapshot. Each :meth:`write` first shifts the device's control
    word into the SIPO and addresses the device from the register's outputs.

    >>> with ProgrammingSession(array) as session:  # doctest: +SKIP
    ...     session.write(DeviceAddress(5, 7, Which.M1), 80e-6, seed=1)
    >>> array = session.array  # doctest: +SKIP
    """
    def __init__(self, array :AcamArray):
        self.array = array
        row_bits, be_bits = control_fields(array.config)
        self.sipo = SipoRegister(1 + row_bits + be_bits)
        self.writes = 0
        self._entered = False

    def __enter__(self) -> 'ProgrammingSession':
        if self.array.mode is Mode.PROGRAMMING:
            raise ModeError("array is already in programming mode")
        self.array = enter_programming_mode(self.array)
        self._entered = True
        return self

    def __exit__(self, *exc) -> None:
        if self._entered:
            self.array = exit_programming_mode(self.array)
            self._entered = False

    def write(self, addr :DeviceAddress, target_g :float, seed :Union[int, Sequence[int]]) -> float:
        """Program one device and return its read-back conductance."""
        if self.array.mode is not Mode.PROGRAMMING:
            raise ModeError("array is not in programming mode")
        row_line, be_line = address_decode(addr, self.array.config)
        self.sipo = sipo_load(self.sipo, encode_control(Mode.PROGRAMMING, row_line, be_line, self.array.config))
        _mode, row_line, be_line = decode_control(self.sipo.outputs, self.array.config)
        target = address_encode(row_line, be_line, self.array.config)
        self.array = program_device(self.array, target, target_g, seed)
        self.writes += 1
        return self.read(target)

    def read(self, addr :DeviceAddress) -> float:
        return self.array.conductance(addr)
