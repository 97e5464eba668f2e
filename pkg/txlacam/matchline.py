"""Matchline and Sense Amplifier

Overview
--------

Every row of the array shares one matchline. It starts each clock cycle discharged (the *initialise*
phase, during which ``SA_RES_EN`` discharges it through a low reset resistance), then, during the
*evaluate* phase, every matching cell injects its drive current and the line charges up:

.. math:: \\frac{dv}{dt} = \\frac{\\sum i_{drive}(v) - v/r_{leak}}{c_{ml}}

At the end of the evaluate phase the dynamic-latch sense amplifier compares the line against ``v_th``;
an output of 0 V signals a hit. Because each matching cell contributes roughly the same charge, the
sampled voltage encodes the row's match count, and ``v_th`` selects how many matches are needed for
a hit (see :func:`count_levels` and :func:`k_boundary`).

Integration uses a fixed-step classical Runge-Kutta scheme, vectorised over rows.

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
import functools
import dataclasses
from dataclasses import dataclass
from collections.abc import Callable, Sequence
from typing import NamedTuple
import numpy as np
from .error import OutOfRange
from .devices import VDD_TXL
from .cell import CellOutput, DriveCurve, V_OV

#: Default matchline capacitance.
C_ML = 245e-15
#: Default leakage resistance during evaluation.
R_LEAK = 1e6
#: Default reset resistance (``SA_RES_EN`` active).
R_RESET = 1e3
#: Default sense threshold.
V_TH = 1.4

@dataclass(frozen=True)
class TimingConfig:
    """Clock-cycle timing: an initialise phase followed by an evaluate phase, and the integration step."""
    t_clock :float = 15e-9
    t_evaluate :float = 5e-9
    t_initialise :float = 10e-9
    dt :float = 10e-12

    def __post_init__(self):
        if min(self.t_clock, self.t_evaluate, self.t_initialise, self.dt) <= 0:
            raise OutOfRange(f"timing values must be positive: {self!r}")
        if not math.isclose(self.t_evaluate + self.t_initialise, self.t_clock, rel_tol=1e-9):
            raise OutOfRange(f"t_evaluate + t_initialise != t_clock in {self!r}")
        if self.dt > self.t_evaluate/100 * (1+1e-9):
            raise OutOfRange(f"dt={self.dt} must be at most t_evaluate/100")

    @property
    def steps(self) -> int:
        """Number of integration steps in the evaluate phase (the step is shrunk slightly if ``dt`` does not divide it)."""
        return math.ceil(self.t_evaluate/self.dt - 1e-9)

    @property
    def cycle_rate(self) -> float:
        return 1/self.t_clock

@dataclass(frozen=True)
class MatchlineState:
    c_ml :float = C_ML
    r_leak :float = R_LEAK
    v :float = 0.0
    #: ``(time, voltage)`` pairs with strictly increasing times
    trace :tuple[tuple[float, float], ...] = ()
    r_reset :float = R_RESET
    vdd :float = VDD_TXL

    def __post_init__(self):
        if self.c_ml <= 0 or self.r_leak <= 0 or self.r_reset <= 0:
            raise OutOfRange(f"matchline parameters must be positive: {self!r}")
        if not 0 <= self.v <= self.vdd:
            raise OutOfRange(f"matchline voltage {self.v} outside [0, {self.vdd}] V")

    @property
    def time(self) -> float:
        return self.trace[-1][0] if self.trace else 0.0

class SenseResult(enum.Enum):
    HIT = 'hit'
    MISS = 'miss'

@dataclass(frozen=True)
class SenseAmp:
    """Dynamic-latch comparator. Its output is ``hit_level`` (0 V) on a hit and ``miss_level`` (5 V) on a miss."""
    v_th :float = V_TH
    vdd :float = VDD_TXL
    hit_level :float = 0.0
    miss_level :float = 5.0

    def __post_init__(self):
        if not 0 < self.v_th < self.vdd:
            raise OutOfRange(f"v_th={self.v_th} outside (0, {self.vdd}) V")

    def output_level(self, result :SenseResult) -> float:
        return self.hit_level if result is SenseResult.HIT else self.miss_level

def integrate(v0 :np.ndarray, drive :Callable[[np.ndarray], np.ndarray], *, c_ml :float, r_leak :float,
              vdd :float, timing :TimingConfig) -> tuple[np.ndarray, np.ndarray]:
    """Integrate any number of independent matchlines over the evaluate phase.

    :param v0: starting voltages, one per line
    :param drive: total injected current as a function of the line voltages (elementwise)
    :return: ``(times, volts)``, with times relative to the start of the phase (``steps+1`` points,
        including the start) and volts of shape ``(steps+1,) + v0.shape``"""
    n = timing.steps
    h = timing.t_evaluate/n
    def slope(v :np.ndarray) -> np.ndarray:
        return (drive(v) - v/r_leak)/c_ml
    out = np.empty((n+1,) + np.shape(v0))
    v = out[0] = np.asarray(v0, dtype=float)
    for step in range(1, n+1):
        k1 = slope(v)
        k2 = slope(v + h/2*k1)
        k3 = slope(v + h/2*k2)
        k4 = slope(v + h*k3)
        v = out[step] = np.clip(v + h/6*(k1 + 2*k2 + 2*k3 + k4), 0.0, vdd)
    return h*np.arange(n+1), out

def _append(ml :MatchlineState, times :np.ndarray, volts :Sequence[float]) -> tuple[tuple[float, float], ...]:
    points = tuple(zip((ml.time + t for t in times.tolist()), volts))
    return ml.trace + (points[1:] if ml.trace else points)

def matchline_evaluate(ml :MatchlineState, outputs :Sequence[CellOutput], timing :TimingConfig = TimingConfig()) -> MatchlineState:
    """Integrate the currents of the matching ``outputs`` onto the matchline over one evaluate phase,
    appending the trajectory to the trace."""
    drive = DriveCurve.total((o.i_drive for o in outputs if o.matching), ml.vdd)
    times, volts = integrate(np.array(ml.v), drive, c_ml=ml.c_ml, r_leak=ml.r_leak, vdd=ml.vdd, timing=timing)
    return dataclasses.replace(ml, v=float(volts[-1]), trace=_append(ml, times, volts.tolist()))

def matchline_reset(ml :MatchlineState, duration :float) -> MatchlineState:
    """Discharge the matchline through the reset resistance for ``duration`` seconds."""
    if duration <= 0:
        return ml
    v = ml.v * math.exp(-duration/(ml.r_reset*ml.c_ml))
    trace = (ml.trace if ml.trace else ((0.0, ml.v),)) + ((ml.time + duration, v),)
    return dataclasses.replace(ml, v=v, trace=trace)

def sense(v_ml :float, sa :SenseAmp = SenseAmp()) -> SenseResult:
    """Sample the matchline at the end of the evaluate phase: a hit iff ``v_ml > v_th`` (strictly)."""
    if not 0 <= v_ml <= sa.vdd:
        raise OutOfRange(f"matchline voltage {v_ml} outside [0, {sa.vdd}] V")
    return SenseResult.HIT if v_ml > sa.v_th else SenseResult.MISS

def closed_form_voltage(n :int, i_lim :float, c_ml :float, r_leak :float, t :float) -> float:
    """RC charging of a matchline by ``n`` constant current sources (no taper)."""
    return n*i_lim*r_leak*(1 - math.exp(-t/(r_leak*c_ml)))

@functools.lru_cache(maxsize=64)
def level_traces(columns :int, i_lim :float, *, c_ml :float = C_ML, r_leak :float = R_LEAK, vdd :float = VDD_TXL,
                 v_ov :float = V_OV, timing :TimingConfig = TimingConfig()) -> tuple[np.ndarray, np.ndarray]:
    """Matchline trajectories for ``N = 0..columns`` identical behavioral cells, as from :func:`integrate`.

    The returned arrays are read-only and shared between callers."""
    unit = DriveCurve.behavioral(i_lim, vdd, v_ov)
    counts = np.arange(columns+1, dtype=float)
    times, volts = integrate(np.zeros(columns+1), lambda v: counts*unit(v), c_ml=c_ml, r_leak=r_leak, vdd=vdd, timing=timing)
    times.setflags(write=False)
    volts.setflags(write=False)
    return times, volts

def count_levels(columns :int, i_lim :float, **kwargs) -> np.ndarray:
    """Sampled matchline voltage for each match count ``0..columns``; keyword arguments as for :func:`level_traces`."""
    return level_traces(columns, i_lim, **kwargs)[1][-1]

def k_boundary(levels :Sequence[float], v_th :float) -> int:
    """The smallest match count whose sampled voltage exceeds ``v_th``, or ``len(levels)`` if none does."""
    for n, v in enumerate(levels):
        if v > v_th:
            return n
    return len(levels)

def boundary_voltage(levels :Sequence[float], k :int) -> float:
    """A sense threshold at which exactly the rows with at least ``k`` matches are hits:
    the midpoint between the levels for ``k-1`` and ``k`` matches."""
    if not 1 <= k < len(levels):
        raise OutOfRange(f"k={k} outside [1, {len(levels)-1}]")
    return (levels[k-1] + levels[k])/2

class ControlEvent(NamedTuple):
    """A transition of one of the array's global control signals."""
    time :float
    signal :str
    level :bool

def read_cycle(timing :TimingConfig = TimingConfig()) -> tuple[ControlEvent, ...]:
    """The control sequence of one read cycle: reset the matchlines, enable the cells, then clock the sense amplifiers."""
    t_eval = timing.t_initialise
    return (ControlEvent(0.0, 'SA_RES_EN', True),
            ControlEvent(t_eval, 'SA_RES_EN', False),
            ControlEvent(t_eval, 'TXL_EN', True),
            ControlEvent(timing.t_clock, 'SA_CLK', True),
            ControlEvent(timing.t_clock, 'TXL_EN', False))
