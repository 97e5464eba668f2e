"""Device Models

Overview
--------

Device-level primitives of the 9T4R pixel:

- :class:`ResistiveElement`, either a programmable RRAM device or a fixed polysilicon resistor,
  with :func:`rram_write` (lognormal write noise) and :func:`rram_read`.
- :class:`MosfetParams` and :func:`mosfet_current`, a long-channel square-law MOSFET
  (no body effect, no subthreshold conduction).
- :class:`HybridInverter`, a CMOS inverter whose source terminals are degenerated by a resistive
  element each. The ratio of the two elements moves the switching threshold, which is how a
  cell stores one bound of its match window. :func:`inverter_vtc` solves its DC transfer curve
  and :func:`inverter_threshold` finds the input at which the output crosses ``vdd/2``.

The DC solvers work on :mod:`numpy` arrays throughout; :func:`vtc_batch` and :func:`threshold_batch`
evaluate many inverters at once, and :func:`threshold_curve` caches a characterisation of
threshold vs. top conductance for a given parameter set, which array-scale code uses instead of
solving every cell individually.

All voltages are in volts, currents in amperes, conductances in siemens.

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
import logging
import functools
import dataclasses
from dataclasses import dataclass
from collections.abc import Callable, Sequence
from typing import Union
import numpy as np
from scipy.optimize import bisect
from .error import ImmutableDevice, OutOfRange, NoConvergence, NoCrossing, Unachievable

_logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]
"""A scalar or a :mod:`numpy` array of floats."""

#: Default supply voltage in matching mode.
VDD_TXL = 3.0
#: Default supply voltage in programming mode.
VDD_PROG = 5.0
#: Default RRAM conductance range (500 kOhm to 5 kOhm).
G_MIN = 2e-6
G_MAX = 200e-6

#: Iteration counts of the vectorised bisections; each halves a bracket of at most ``vdd``.
_INNER_ITERS = 30
_OUTER_ITERS = 30
_THRESHOLD_ITERS = 24

class ElementKind(enum.Enum):
    RRAM = 'rram'
    POLYSILICON = 'polysilicon'

class Polarity(enum.Enum):
    N = 'n'
    P = 'p'

def reference_conductance(g_min :float, g_max :float) -> float:
    """The conductance of the fixed reference (bottom) elements: the geometric mean of the RRAM range."""
    return math.sqrt(g_min*g_max)

@dataclass(frozen=True)
class ResistiveElement:
    """A resistive element of a hybrid inverter.

    Only the upper elements of the inverters are programmable RRAM devices,
    the lower ones are polysilicon resistors, whose conductance cannot be written."""
    kind :ElementKind
    conductance :float
    g_min :float
    g_max :float
    #: Relative standard deviation of the lognormal write noise (RRAM only).
    write_sigma :float = 0.0

    def __post_init__(self):
        if not 0 < self.g_min <= self.g_max:
            raise OutOfRange(f"bad conductance range [{self.g_min}, {self.g_max}]")
        if not self.g_min <= self.conductance <= self.g_max:
            raise OutOfRange(f"conductance {self.conductance} S outside [{self.g_min}, {self.g_max}]")
        if self.write_sigma < 0:
            raise OutOfRange(f"negative write_sigma {self.write_sigma}")

    @classmethod
    def rram(cls, conductance :float, *, g_min :float = G_MIN, g_max :float = G_MAX, write_sigma :float = 0.0) -> 'ResistiveElement':
        return cls(ElementKind.RRAM, conductance, g_min, g_max, write_sigma)

    @classmethod
    def polysilicon(cls, conductance :float) -> 'ResistiveElement':
        return cls(ElementKind.POLYSILICON, conductance, conductance, conductance)

@dataclass(frozen=True)
class MosfetParams:
    """Square-law MOSFET parameters.

    ``v_t`` is the magnitude of the threshold voltage for both polarities,
    ``k`` the transconductance factor in A/V² (W/L absorbed) and ``lam`` the channel-length modulation in 1/V."""
    polarity :Polarity
    v_t :float
    k :float
    lam :float = 0.0

    def __post_init__(self):
        if self.v_t <= 0 or self.k <= 0 or self.lam < 0:
            raise OutOfRange(f"invalid MOSFET parameters {self!r}")

#: Default nMOS (5 V-class device).
NMOS = MosfetParams(Polarity.N, v_t=0.8, k=200e-6)
#: Default pMOS (5 V-class device).
PMOS = MosfetParams(Polarity.P, v_t=0.8, k=100e-6)

@dataclass(frozen=True)
class HybridInverter:
    """A CMOS inverter with ``top_element`` between the supply and the pMOS source,
    and ``bottom_element`` between the nMOS source and ground."""
    top_element :ResistiveElement
    bottom_element :ResistiveElement
    pmos :MosfetParams = PMOS
    nmos :MosfetParams = NMOS
    vdd :float = VDD_TXL

    def __post_init__(self):
        if self.vdd <= 0:
            raise OutOfRange(f"vdd must be positive, not {self.vdd}")
        if self.pmos.polarity is not Polarity.P or self.nmos.polarity is not Polarity.N:
            raise OutOfRange("pmos/nmos polarity mismatch")

    def with_top(self, conductance :float) -> 'HybridInverter':
        """Return a copy with the top element's conductance replaced, keeping its kind and range."""
        return dataclasses.replace(self, top_element=dataclasses.replace(self.top_element, conductance=conductance))

def channel_current(params :MosfetParams, v_on :ArrayLike, v_d :ArrayLike) -> np.ndarray:
    """Forward-biased channel current for gate drive ``v_on`` (vgs or vsg) and drain bias ``v_d`` ≥ 0."""
    v_ov = np.maximum(np.asarray(v_on, dtype=float) - params.v_t, 0.0)
    v_d = np.asarray(v_d, dtype=float)
    v_eff = np.minimum(v_d, v_ov)  # triode below pinch-off, saturation above
    return params.k * (v_ov*v_eff - v_eff*v_eff/2) * (1 + params.lam*v_d)

def mosfet_current(params :MosfetParams, v_gs :ArrayLike, v_ds :ArrayLike) -> ArrayLike:
    """Square-law drain current.

    For nMOS the result is the current flowing from drain to source; for pMOS the voltages are mirrored
    and the result is the current flowing from source to drain, so in both cases a conducting device in its
    normal bias returns a positive value. A reversed drain bias swaps the roles of source and drain.

    :param params: The device parameters.
    :param v_gs: Gate-source voltage (negative for a conducting pMOS).
    :param v_ds: Drain-source voltage (negative for a conducting pMOS).
    :return: The current; a :class:`float` for scalar inputs, otherwise an array."""
    sign = 1.0 if params.polarity is Polarity.N else -1.0
    vgs = sign*np.asarray(v_gs, dtype=float)
    vds = sign*np.asarray(v_ds, dtype=float)
    fwd = channel_current(params, vgs, np.maximum(vds, 0.0))
    rev = channel_current(params, vgs-vds, np.maximum(-vds, 0.0))
    out = np.where(vds >= 0, fwd, -rev)
    return float(out) if out.ndim==0 else out

def bisect_decreasing(fn :Callable[[np.ndarray], np.ndarray], lo :np.ndarray, hi :np.ndarray, iters :int) -> np.ndarray:
    """Elementwise bisection for the zero of ``fn``, which must be non-increasing with ``fn(lo) >= 0 >= fn(hi)``."""
    for _ in range(iters):
        mid = (lo+hi)/2
        above = fn(mid) > 0
        lo = np.where(above, mid, lo)
        hi = np.where(above, hi, mid)
    return (lo+hi)/2

def _degenerated_current(params :MosfetParams, g :ArrayLike, v_on :ArrayLike, v_d :ArrayLike) -> np.ndarray:
    """Current through a forward-biased MOSFET whose source reaches the rail through conductance ``g``.

    ``v_on`` is the gate drive and ``v_d`` the drain bias, both measured from the rail. Without channel-length
    modulation the source node solves a quadratic (the smaller root lies between the rail and the drain),
    otherwise it is found by bisection."""
    v_d = np.maximum(np.asarray(v_d, dtype=float), 0.0)
    if params.lam:
        shape = np.broadcast_shapes(np.shape(g), np.shape(v_on), v_d.shape)
        x = bisect_decreasing(lambda x: channel_current(params, v_on-x, v_d-x) - g*x,
                              np.zeros(shape), np.broadcast_to(v_d, shape), _INNER_ITERS)
        return g*x
    k = params.k
    a = np.maximum(np.asarray(v_on, dtype=float) - params.v_t, 0.0)
    u = np.minimum(v_d, a)  # saturation pins the effective drain bias at the overdrive
    x = k*u*(2*a - u) / (k*a + g + np.sqrt((k*(a - u))**2 + 2*k*a*g + g*g))
    return g*x

def _pulldown_current(nmos :MosfetParams, g_bottom :ArrayLike, v_in :ArrayLike, v_out :ArrayLike) -> np.ndarray:
    """Current through the nMOS and bottom element for a given output voltage."""
    return _degenerated_current(nmos, g_bottom, v_in, v_out)

def _pullup_current(pmos :MosfetParams, g_top :ArrayLike, vdd :float, v_in :ArrayLike, v_out :ArrayLike) -> np.ndarray:
    """Current through the top element and pMOS for a given output voltage."""
    return _degenerated_current(pmos, g_top, vdd - np.asarray(v_in, dtype=float), vdd - np.asarray(v_out, dtype=float))

def vtc_batch(g_top :ArrayLike, g_bottom :ArrayLike, pmos :MosfetParams, nmos :MosfetParams,
              vdd :float, v_in :ArrayLike) -> np.ndarray:
    """Vectorised DC transfer curve: all arguments broadcast against each other.

    The output node is found by bisection on current continuity: the pull-up current falls and the
    pull-down current rises with the output voltage, each being solved for its source-node voltage.

    :raises NoConvergence: if the solution is not finite"""
    shape = np.broadcast_shapes(np.shape(g_top), np.shape(g_bottom), np.shape(v_in))
    v_out = bisect_decreasing(
        lambda v: _pullup_current(pmos, g_top, vdd, v_in, v) - _pulldown_current(nmos, g_bottom, v_in, v),
        np.zeros(shape), np.full(shape, float(vdd)), _OUTER_ITERS)
    if not np.all(np.isfinite(v_out)):
        raise NoConvergence("transfer curve solver produced non-finite output")
    return v_out

def _imbalance(g_top :ArrayLike, g_bottom :ArrayLike, pmos :MosfetParams, nmos :MosfetParams,
               vdd :float, v_in :ArrayLike) -> np.ndarray:
    # positive iff the transfer curve at v_in lies above vdd/2
    return _pullup_current(pmos, g_top, vdd, v_in, vdd/2) - _pulldown_current(nmos, g_bottom, v_in, vdd/2)

def threshold_batch(g_top :ArrayLike, g_bottom :ArrayLike, pmos :MosfetParams, nmos :MosfetParams, vdd :float) -> np.ndarray:
    """Vectorised :func:`inverter_threshold` (without the monotonicity check).

    Since the transfer curve is non-increasing, it lies above ``vdd/2`` exactly where the pull-up
    current at ``v_out = vdd/2`` exceeds the pull-down current, so the bisection runs on that imbalance.

    :raises NoCrossing: if any of the curves does not cross ``vdd/2``"""
    shape = np.broadcast_shapes(np.shape(g_top), np.shape(g_bottom))
    if np.any(_imbalance(g_top, g_bottom, pmos, nmos, vdd, np.zeros(shape)) <= 0) \
            or np.any(_imbalance(g_top, g_bottom, pmos, nmos, vdd, np.full(shape, float(vdd))) >= 0):
        raise NoCrossing(f"transfer curve does not cross vdd/2={vdd/2} V")
    return bisect_decreasing(lambda v: _imbalance(g_top, g_bottom, pmos, nmos, vdd, v),
                              np.zeros(shape), np.full(shape, float(vdd)), _THRESHOLD_ITERS)

def inverter_vtc(inv :HybridInverter, v_in :ArrayLike) -> ArrayLike:
    """DC output voltage of the inverter for input ``v_in`` (a scalar or an array), within ``0 ≤ v_in ≤ vdd``.

    :raises OutOfRange: if an input is outside the supply range
    :raises NoConvergence: if the solver fails"""
    vin = np.asarray(v_in, dtype=float)
    if np.any(vin < 0) or np.any(vin > inv.vdd):
        raise OutOfRange(f"input voltage outside [0, {inv.vdd}] V")
    out = vtc_batch(inv.top_element.conductance, inv.bottom_element.conductance, inv.pmos, inv.nmos, inv.vdd, vin)
    return float(out) if out.ndim==0 else out

def inverter_threshold(inv :HybridInverter, *, xtol :float = 1e-5, check_samples :int = 61) -> float:
    """The input voltage at which :func:`inverter_vtc` crosses ``vdd/2``.

    The transfer curve is first sampled at ``check_samples`` points and must be non-increasing,
    then the crossing is found with :func:`scipy.optimize.bisect` to within ``xtol``.

    :raises NoCrossing: if the curve is not monotone or never crosses ``vdd/2``
    :raises NoConvergence: if the bisection does not converge"""
    g_top, g_bottom = inv.top_element.conductance, inv.bottom_element.conductance
    if check_samples:
        samples = vtc_batch(g_top, g_bottom, inv.pmos, inv.nmos, inv.vdd, np.linspace(0, inv.vdd, check_samples))
        if np.any(np.diff(samples) > 1e-6):
            raise NoCrossing(f"transfer curve is not monotone for {inv!r}")
    def imbalance(v :float) -> float:
        return float(_imbalance(g_top, g_bottom, inv.pmos, inv.nmos, inv.vdd, v))
    if imbalance(0.0) <= 0 or imbalance(inv.vdd) >= 0:
        raise NoCrossing(f"transfer curve does not cross vdd/2={inv.vdd/2} V for {inv!r}")
    root, res = bisect(imbalance, 0.0, inv.vdd, xtol=xtol, maxiter=200, full_output=True, disp=False)
    if not res.converged:
        raise NoConvergence(f"threshold bisection did not converge: {res.flag}")
    return float(root)

@dataclass(frozen=True, eq=False)
class ThresholdCurve:
    """Characterisation of an inverter's threshold as a function of its top conductance,
    with everything else held fixed. The threshold rises monotonically with the top conductance.

    :seealso: :func:`threshold_curve`"""
    #: natural log of the sampled conductances
    log_g :np.ndarray
    #: thresholds at those conductances
    v :np.ndarray

    @property
    def achievable(self) -> tuple[float, float]:
        """The ``(low, high)`` range of realizable thresholds."""
        return float(self.v[0]), float(self.v[-1])

    @property
    def g_range(self) -> tuple[float, float]:
        return float(np.exp(self.log_g[0])), float(np.exp(self.log_g[-1]))

    def threshold(self, g :ArrayLike) -> np.ndarray:
        """Thresholds for the given top conductances (interpolated in log-conductance)."""
        return np.interp(np.log(np.asarray(g, dtype=float)), self.log_g, self.v)

    def conductance(self, target_v :ArrayLike) -> np.ndarray:
        """Top conductances realizing the given thresholds, found by binary search over the monotone table.

        :raises Unachievable: for the first target outside :attr:`achievable`"""
        target = np.asarray(target_v, dtype=float)
        lo, hi = self.achievable
        bad = (target < lo) | (target > hi)
        if np.any(bad):
            raise Unachievable(float(target[bad].flat[0]), (lo, hi))
        g = np.exp(np.interp(target, self.v, self.log_g))
        g_min, g_max = self.g_range
        return np.clip(g, g_min, g_max)

@functools.lru_cache(maxsize=32)
def threshold_curve(pmos :MosfetParams, nmos :MosfetParams, vdd :float, g_bottom :float,
                    g_min :float, g_max :float, points :int = 1025) -> ThresholdCurve:
    """Characterise threshold vs. top conductance over ``[g_min, g_max]`` at ``points`` log-spaced points.

    Results are cached per parameter set."""
    log_g = np.linspace(math.log(g_min), math.log(g_max), points)
    v = threshold_batch(np.exp(log_g), g_bottom, pmos, nmos, vdd)
    # bisection noise is orders of magnitude below the grid spacing, this only guards the table's ordering
    v = np.maximum.accumulate(v)
    _logger.debug("characterised thresholds %.4f..%.4f V for g_bottom=%g S", v[0], v[-1], g_bottom)
    return ThresholdCurve(log_g=log_g, v=v)

def rram_write(elem :ResistiveElement, target_g :float, rng_seed :Union[int, Sequence[int]]) -> ResistiveElement:
    """Write an RRAM device: the new conductance is ``target_g * exp(eps)`` with ``eps ~ Normal(0, write_sigma)``,
    clamped to the device range. The noise is drawn from :func:`numpy.random.default_rng` seeded with ``rng_seed``.

    :raises ImmutableDevice: for polysilicon elements
    :raises OutOfRange: if the target is outside the device range"""
    if elem.kind is ElementKind.POLYSILICON:
        raise ImmutableDevice("polysilicon elements cannot be written")
    if not elem.g_min <= target_g <= elem.g_max:
        raise OutOfRange(f"target {target_g} S outside [{elem.g_min}, {elem.g_max}]")
    if elem.write_sigma == 0:
        g = float(target_g)
    else:
        eps = np.random.default_rng(rng_seed).normal(0.0, elem.write_sigma)
        g = min(max(float(target_g*math.exp(eps)), elem.g_min), elem.g_max)
    return dataclasses.replace(elem, conductance=g)

def rram_read(elem :ResistiveElement) -> float:
    return elem.conductance
