"""The 9T4R Cell

Overview
--------

A :class:`TxlCell` consists of two hybrid inverters and three output transistors:
the power-gating pMOS ``M_MEN``, the output pMOS ``M_MLP`` (gate driven by ``inv_low``) and the
output nMOS ``M_MLN`` (gate driven by ``inv_high``), in series between the supply and the matchline.
``M_MLP`` conducts once the input rises above ``inv_low``'s threshold, ``M_MLN`` conducts while the
input is below ``inv_high``'s threshold, so current reaches the matchline only when the input lies
inside the window ``(v_low, v_high)`` (see :func:`cell_window`). The gate voltage ``v_en`` of
``M_MEN`` limits that current to ``I_lim`` (see :func:`men_current`).

:func:`cell_evaluate` has two fidelities: *behavioral*, a window comparison driving a constant
current source that tapers to zero at the supply, and *circuit*, which takes the output-device gate
voltages from the inverters' transfer curves and solves the three-transistor stack at every
matchline voltage.

In programming mode the two RRAM devices are exposed as 1T1R paths (:func:`programming_paths`),
and the cell contributes no matchline current.

:class:`SixT2RCell` is the pre-charge baseline used for energy comparisons: two 1T1R voltage
dividers set its bounds, and a mismatch discharges the matchline.

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
import enum
import math
import dataclasses
from dataclasses import dataclass
from collections.abc import Iterable
import numpy as np
from scipy.optimize import brentq
from .error import ModeError, OutOfRange, Unachievable
from .devices import (HybridInverter, MosfetParams, ResistiveElement, ArrayLike, NMOS, PMOS, VDD_TXL, G_MIN, G_MAX,
                      threshold_batch, inverter_vtc, channel_current, bisect_decreasing)

#: Width of the linear taper of the behavioral current source below the supply.
V_OV = 0.3
#: Fraction of ``I_lim`` at zero matchline voltage above which a circuit-fidelity cell counts as matching.
MATCH_FRACTION = 0.1
#: Default per-cell matchline current.
I_LIM = 5e-6
#: Number of matchline voltage points at which circuit-fidelity drive currents are tabulated.
CIRCUIT_GRID = 31

_STACK_ITERS = 30

class Mode(enum.Enum):
    MATCHING = 'matching'
    PROGRAMMING = 'programming'

class Fidelity(enum.Enum):
    BEHAVIORAL = 'behavioral'
    CIRCUIT = 'circuit'

class Outcome(enum.Enum):
    MATCH = 'match'
    MISMATCH = 'mismatch'

class Which(enum.Enum):
    """The two RRAM devices of a cell: ``M1`` (top of ``inv_low``) and ``M2`` (top of ``inv_high``)."""
    M1 = 'm1'
    M2 = 'm2'

@dataclass(frozen=True)
class MatchWindow:
    """The acceptance interval of a cell. A window with ``v_low >= v_high`` matches nothing.

    Construction only rejects negative bounds, since the window does not know its supply;
    whoever takes a window into a cell checks it with :meth:`check_supply`."""
    v_low :float
    v_high :float

    def __post_init__(self):
        if self.v_low < 0 or self.v_high < 0:
            raise OutOfRange(f"negative window bound in {self!r}")

    def check_supply(self, vdd :float) -> 'MatchWindow':
        """Return this window if both bounds lie within ``[0, vdd]``.

        :raises OutOfRange: otherwise"""
        if self.v_low > vdd or self.v_high > vdd:
            raise OutOfRange(f"window ({self.v_low}, {self.v_high}) V outside [0, {vdd}] V")
        return self

    @property
    def empty(self) -> bool:
        return self.v_low >= self.v_high

    @property
    def midpoint(self) -> float:
        return (self.v_low + self.v_high)/2

    def contains(self, v_in :float) -> bool:
        return self.v_low < v_in < self.v_high

@dataclass(frozen=True, eq=False)
class DriveCurve:
    """Piecewise-linear current injected into a matchline as a function of the matchline voltage.

    ``v`` is an increasing grid from 0 to the supply voltage, ``i`` the currents at those points."""
    v :np.ndarray
    i :np.ndarray

    def __call__(self, v_ml :ArrayLike) -> np.ndarray:
        return np.interp(v_ml, self.v, self.i)

    def __add__(self, other :'DriveCurve') -> 'DriveCurve':
        grid = np.union1d(self.v, other.v)
        return DriveCurve(grid, self(grid) + other(grid))

    @classmethod
    def zero(cls, vdd :float) -> 'DriveCurve':
        return cls(np.array([0.0, vdd]), np.zeros(2))

    @classmethod
    def behavioral(cls, i_lim :float, vdd :float, v_ov :float = V_OV) -> 'DriveCurve':
        """A constant ``i_lim`` up to ``vdd - v_ov``, falling linearly to zero at ``vdd``."""
        return cls(np.array([0.0, vdd - v_ov, vdd]), np.array([i_lim, i_lim, 0.0]))

    @staticmethod
    def total(curves :Iterable['DriveCurve'], vdd :float) -> 'DriveCurve':
        out = DriveCurve.zero(vdd)
        for c in curves:
            out = out + c
        return out

@dataclass(frozen=True, eq=False)
class CellOutput:
    matching :bool
    i_drive :DriveCurve

@dataclass(frozen=True)
class CellDesign:
    """The transistors and constants shared by every cell of an array."""
    pmos :MosfetParams = PMOS
    nmos :MosfetParams = NMOS
    m_men :MosfetParams = PMOS
    m_mlp :MosfetParams = PMOS
    m_mln :MosfetParams = NMOS
    vdd :float = VDD_TXL
    v_ov :float = V_OV
    match_fraction :float = MATCH_FRACTION

@dataclass(frozen=True)
class TxlCell:
    """One 9T4R pixel. The top elements of the inverters are the RRAM devices ``R_M1`` and ``R_M2``,
    the bottom elements the polysilicon references ``R_1`` and ``R_2``."""
    inv_low :HybridInverter
    inv_high :HybridInverter
    m_men :MosfetParams = PMOS
    m_mlp :MosfetParams = PMOS
    m_mln :MosfetParams = NMOS
    mode :Mode = Mode.MATCHING
    v_ov :float = V_OV
    match_fraction :float = MATCH_FRACTION

    @property
    def vdd(self) -> float:
        return self.inv_low.vdd

    @classmethod
    def build(cls, g_m1 :float, g_m2 :float, g_ref :float, design :CellDesign = CellDesign(), *,
              g_min :float = G_MIN, g_max :float = G_MAX, write_sigma :float = 0.0) -> 'TxlCell':
        """Assemble a cell from its two RRAM conductances and the reference conductance."""
        def inv(g :float) -> HybridInverter:
            return HybridInverter(ResistiveElement.rram(g, g_min=g_min, g_max=g_max, write_sigma=write_sigma),
                                  ResistiveElement.polysilicon(g_ref), design.pmos, design.nmos, design.vdd)
        return cls(inv(g_m1), inv(g_m2), design.m_men, design.m_mlp, design.m_mln,
                   v_ov=design.v_ov, match_fraction=design.match_fraction)

def men_current(m_men :MosfetParams, vdd :float, v_en :float) -> float:
    """``I_lim``: the saturation current of the power-gating pMOS with its gate at ``v_en``."""
    v_ov = max(vdd - v_en - m_men.v_t, 0.0)
    return m_men.k/2 * v_ov*v_ov

def v_en_for_current(m_men :MosfetParams, vdd :float, i_lim :float = I_LIM) -> float:
    """Inverse of :func:`men_current`: the gate bias that limits the cell current to ``i_lim``."""
    v_en = vdd - m_men.v_t - math.sqrt(2*i_lim/m_men.k)
    if not 0 <= v_en <= vdd:
        raise OutOfRange(f"current limit {i_lim} A not reachable with {m_men!r} at vdd={vdd}")
    return v_en

def stack_current(m_men :MosfetParams, m_mlp :MosfetParams, m_mln :MosfetParams, vdd :float, v_en :float,
                  gate_p :ArrayLike, gate_n :ArrayLike, v_ml :ArrayLike) -> np.ndarray:
    """DC current of the series stack ``M_MEN``, ``M_MLP``, ``M_MLN`` into a matchline held at ``v_ml``.

    ``gate_p`` and ``gate_n`` are the gate voltages of ``M_MLP`` and ``M_MLN``; all array arguments broadcast.
    The node between ``M_MLP`` and ``M_MLN`` is found by bisection, and for each trial value of it the node
    between ``M_MEN`` and ``M_MLP`` by a nested bisection."""
    shape = np.broadcast_shapes(np.shape(gate_p), np.shape(gate_n), np.shape(v_ml))
    v_ml = np.broadcast_to(np.asarray(v_ml, dtype=float), shape)
    top = np.full(shape, float(vdd))
    def upper_current(v_b :np.ndarray) -> np.ndarray:
        v_a = bisect_decreasing(
            lambda a: channel_current(m_men, vdd-v_en, vdd-a) - channel_current(m_mlp, a-gate_p, a-v_b), v_b, top, _STACK_ITERS)
        return channel_current(m_men, vdd-v_en, vdd-v_a)
    v_b = bisect_decreasing(lambda b: upper_current(b) - channel_current(m_mln, gate_n-v_ml, b-v_ml), v_ml, top, _STACK_ITERS)
    return channel_current(m_mln, gate_n-v_ml, v_b-v_ml)

def _check_matching(cell :TxlCell) -> None:
    if cell.mode is not Mode.MATCHING:
        raise ModeError("cell is in programming mode")

def cell_window(cell :TxlCell) -> MatchWindow:
    """The match window ``(threshold of inv_low, threshold of inv_high)``.

    Both thresholds are solved in one :func:`~txlacam.devices.threshold_batch` call; unlike
    :func:`~txlacam.devices.inverter_threshold` the transfer curves are not sampled for monotonicity first.

    :raises ModeError: in programming mode
    :raises NoCrossing: if a transfer curve never crosses ``vdd/2``"""
    _check_matching(cell)
    low, high = cell.inv_low, cell.inv_high
    if (low.pmos, low.nmos, low.vdd) == (high.pmos, high.nmos, high.vdd):
        v = threshold_batch(np.array([low.top_element.conductance, high.top_element.conductance]),
                            np.array([low.bottom_element.conductance, high.bottom_element.conductance]),
                            low.pmos, low.nmos, low.vdd)
    else:
        v = [ threshold_batch(inv.top_element.conductance, inv.bottom_element.conductance, inv.pmos, inv.nmos, inv.vdd)
              for inv in (low, high) ]
    return MatchWindow(float(v[0]), float(v[1]))

def cell_evaluate(cell :TxlCell, v_in :float, v_en :float, fidelity :Fidelity = Fidelity.BEHAVIORAL) -> CellOutput:
    """Evaluate a query voltage into a match decision and a matchline drive current.

    :raises ModeError: in programming mode
    :raises OutOfRange: if ``v_in`` or ``v_en`` lies outside ``[0, vdd]``"""
    _check_matching(cell)
    vdd = cell.vdd
    if not 0 <= v_in <= vdd or not 0 <= v_en <= vdd:
        raise OutOfRange(f"v_in={v_in} / v_en={v_en} outside [0, {vdd}] V")
    i_lim = men_current(cell.m_men, vdd, v_en)
    if fidelity is Fidelity.BEHAVIORAL:
        if cell_window(cell).contains(v_in):
            return CellOutput(True, DriveCurve.behavioral(i_lim, vdd, cell.v_ov))
        return CellOutput(False, DriveCurve.zero(vdd))
    grid = np.linspace(0, vdd, CIRCUIT_GRID)
    gate_p = inverter_vtc(cell.inv_low, v_in)
    gate_n = inverter_vtc(cell.inv_high, v_in)
    # physically non-increasing in v_ml; this removes bisection jitter
    cur = np.minimum.accumulate(stack_current(cell.m_men, cell.m_mlp, cell.m_mln, vdd, v_en, gate_p, gate_n, grid))
    if cur[0] > 0 and cur[0] >= cell.match_fraction*i_lim:
        return CellOutput(True, DriveCurve(grid, cur))
    return CellOutput(False, DriveCurve.zero(vdd))

def cell_set_mode(cell :TxlCell, mode :Mode) -> TxlCell:
    return dataclasses.replace(cell, mode=mode)

def programming_paths(cell :TxlCell) -> dict[Which, ResistiveElement]:
    """The two RRAM devices reachable as 1T1R paths in programming mode;
    the programming transistors ``M_PR1`` and ``M_PR2`` select one at a time.

    :raises ModeError: in matching mode"""
    if cell.mode is not Mode.PROGRAMMING:
        raise ModeError("cell is not in programming mode")
    return {Which.M1: cell.inv_low.top_element, Which.M2: cell.inv_high.top_element}

@dataclass(frozen=True)
class SixT2RCell:
    """The 6T2R baseline cell.

    Each bound comes from a voltage divider: the RRAM device (``g_lo`` or ``g_hi``) pulls the divider node up
    from the supply, and an access nMOS driven by the input pulls it down. The lower divider's node drives a
    pull-down transistor directly, which discharges the matchline while the input is below the lower bound.
    The upper divider's node drives the pull-down through an inverter that switches at ``vdd/2``, so the
    matchline is discharged once the input exceeds the upper bound."""
    g_lo :float
    g_hi :float
    lo_access :MosfetParams = NMOS
    hi_access :MosfetParams = NMOS
    lo_pulldown :MosfetParams = NMOS
    hi_pulldown :MosfetParams = NMOS
    vdd :float = VDD_TXL

def _divider_threshold(access :MosfetParams, g :float, vdd :float, node_v :float) -> float:
    # the divider node falls with the input; solve for the input that puts it at node_v
    need = g*(vdd - node_v)
    def excess(v_in :float) -> float:
        return float(channel_current(access, v_in, node_v)) - need
    if excess(vdd) <= 0:
        return vdd
    return float(brentq(excess, 0.0, vdd, xtol=1e-12))

def _divider_conductance(access :MosfetParams, v_in :float, vdd :float, node_v :float) -> float:
    return float(channel_current(access, v_in, node_v))/(vdd - node_v)

def sixt2r_window(cell :SixT2RCell) -> MatchWindow:
    return MatchWindow(_divider_threshold(cell.lo_access, cell.g_lo, cell.vdd, cell.lo_pulldown.v_t),
                       _divider_threshold(cell.hi_access, cell.g_hi, cell.vdd, cell.vdd/2))

def sixt2r_evaluate(cell :SixT2RCell, v_in :float) -> Outcome:
    """Match iff ``v_in`` is inside the divider window; a mismatch is a matchline discharge."""
    if not 0 <= v_in <= cell.vdd:
        raise OutOfRange(f"v_in={v_in} outside [0, {cell.vdd}] V")
    return Outcome.MATCH if sixt2r_window(cell).contains(v_in) else Outcome.MISMATCH

def compile_sixt2r(window :MatchWindow, *, g_min :float = G_MIN, g_max :float = G_MAX, vdd :float = VDD_TXL,
                   access :MosfetParams = NMOS, pulldown :MosfetParams = NMOS) -> SixT2RCell:
    """Choose the divider conductances so that :func:`sixt2r_window` reproduces ``window``.

    :raises OutOfRange: if a bound exceeds ``vdd``
    :raises Unachievable: if a bound needs a conductance outside ``[g_min, g_max]``"""
    window.check_supply(vdd)
    bounds = ((window.v_low, pulldown.v_t), (window.v_high, vdd/2))
    gs :list[float] = []
    for v, node_v in bounds:
        g = _divider_conductance(access, v, vdd, node_v)
        if not g_min <= g <= g_max:
            raise Unachievable(v, (_divider_threshold(access, g_min, vdd, node_v), _divider_threshold(access, g_max, vdd, node_v)))
        gs.append(g)
    return SixT2RCell(gs[0], gs[1], access, access, pulldown, pulldown, vdd)
