"""Energy Model

Overview
--------

Energy is accounted per cell and per clock cycle from a table of event costs: for each cell kind
(the 9T4R cell and the 6T2R baseline) and each outcome (match or mismatch), a *low* cost at input
0 V and a *high* cost at input ``vdd``, interpolated linearly in between. The defaults are the
SPICE-characterised figures for the two cells:

============ ========= ========= ========= ==========
cell         match low match hi  mism. low mism. high
============ ========= ========= ========= ==========
9T4R         152 fJ    168 fJ    30 fJ     130 fJ
6T2R         2.25 pJ   2.25 pJ   479.2 fJ  3.84 pJ
============ ========= ========= ========= ==========

Averaged over uniformly distributed inputs, a 9T4R match costs 0.16 pJ and a mismatch 0.08 pJ.
The 9T4R cell only spends charge on a match (conditional charging), while the 6T2R cell
pre-charges its matchline and spends most on a mismatch, so which design is cheaper depends on
the fraction of matching cells; see :func:`compare_designs` and :func:`sparsity_sweep`.

The whole prototype (peripherals included) is quoted at 185 fJ per search per cell; reports
carry that figure as a reference without trying to reproduce it. The 0.036 pJ mismatch figure
sometimes quoted for the cell does not agree with the table above and is kept only as
:data:`QUOTED_MISMATCH_J`.

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
from dataclasses import dataclass
from collections.abc import Iterable, Sequence
from typing import NamedTuple, Optional
import numpy as np
from .error import OutOfRange
from .devices import VDD_TXL
from .cell import Outcome
from .matchline import TimingConfig
from .acam import DIE_AREA_MM2, PROTOTYPE_CELLS, SearchResult

class CellKind(enum.Enum):
    TXL9T4R = 'txl9t4r'
    SIXT2R = 'sixt2r'

class CostAnchors(NamedTuple):
    """Event cost at input 0 V (``low``) and at input ``vdd`` (``high``), in joules."""
    low :float
    high :float

    def at(self, fraction :float) -> float:
        return self.low*(1-fraction) + self.high*fraction

@dataclass(frozen=True)
class EnergyTable:
    txl9t4r_match :CostAnchors = CostAnchors(152e-15, 168e-15)
    txl9t4r_mismatch :CostAnchors = CostAnchors(30e-15, 130e-15)
    sixt2r_match :CostAnchors = CostAnchors(2.25e-12, 2.25e-12)
    sixt2r_mismatch :CostAnchors = CostAnchors(479.2e-15, 3.84e-12)

    def __post_init__(self):
        for name in ('txl9t4r_match', 'txl9t4r_mismatch', 'sixt2r_match', 'sixt2r_mismatch'):
            if min(getattr(self, name)) < 0:
                raise OutOfRange(f"negative energy in {name}")

    def anchors(self, cell_kind :CellKind, outcome :Outcome) -> CostAnchors:
        return getattr(self, f"{cell_kind.value}_{outcome.value}")

#: Per-search-per-cell energy of the whole prototype, peripherals included.
REFERENCE_PER_CELL_J = 185e-15
#: Average per-cell energies as quoted for the 9T4R cell.
QUOTED_MATCH_J = 0.16e-12
QUOTED_MISMATCH_J = 0.036e-12

class ReferenceDesign(NamedTuple):
    technology_nm :int
    supply_V :tuple[float, float]
    area_mm2 :Optional[float]
    cells :int
    energy_per_search_per_cell_J :float
    clock_Hz :Optional[float]

#: The 9T4R prototype.
TXL_REFERENCE = ReferenceDesign(180, (3.0, 3.0), DIE_AREA_MM2, PROTOTYPE_CELLS, REFERENCE_PER_CELL_J, 1/15e-9)
#: The 6T2R design it is compared against.
SIXT2R_REFERENCE = ReferenceDesign(22, (0.6, 0.9), None, 1032, 0.57e-15, None)

def event_cost(table :EnergyTable, cell_kind :CellKind, outcome :Outcome, v_in :float, vdd :float = VDD_TXL) -> float:
    """Cost of one cell evaluation, interpolated linearly between the anchors at 0 V and ``vdd``.

    :raises OutOfRange: if ``v_in`` lies outside ``[0, vdd]``"""
    if not 0 <= v_in <= vdd:
        raise OutOfRange(f"v_in={v_in} outside [0, {vdd}] V")
    return table.anchors(cell_kind, outcome).at(v_in/vdd)

def uniform_average(table :EnergyTable, cell_kind :CellKind, outcome :Outcome) -> float:
    """Mean event cost over inputs uniformly distributed in ``[0, vdd]``."""
    low, high = table.anchors(cell_kind, outcome)
    return (low + high)/2

def cell_costs(result :SearchResult, table :EnergyTable, cell_kind :CellKind, vdd :float = VDD_TXL) -> np.ndarray:
    """The ``rows × columns`` matrix of event costs of one search."""
    frac = np.asarray(result.query, dtype=float)/vdd
    match = table.anchors(cell_kind, Outcome.MATCH)
    mismatch = table.anchors(cell_kind, Outcome.MISMATCH)
    return np.where(result.matching, match.at(frac), mismatch.at(frac))

@dataclass(frozen=True)
class EnergyReport:
    cell_kind :CellKind
    per_row :tuple[float, ...]
    total_J :float
    cells :int
    overhead :float
    cycle_rate_Hz :float
    reference_per_cell_J :float = REFERENCE_PER_CELL_J

    @property
    def per_search_per_cell_J(self) -> float:
        return self.total_J/self.cells if self.cells else 0.0

    @property
    def power_W(self) -> float:
        """Average power when searching on every clock cycle."""
        return self.total_J*self.cycle_rate_Hz

def search_energy(result :SearchResult, table :EnergyTable = EnergyTable(), overhead :float = 0.0,
                  cell_kind :CellKind = CellKind.TXL9T4R, *, timing :TimingConfig = TimingConfig(),
                  vdd :float = VDD_TXL) -> EnergyReport:
    """Energy of one search cycle: the event costs of every cell, scaled by ``1 + overhead``.

    The total is the sum of the per-row figures."""
    if overhead < 0:
        raise OutOfRange(f"negative overhead {overhead}")
    costs = cell_costs(result, table, cell_kind, vdd)
    per_row = tuple(float(r)*(1+overhead) for r in costs.sum(axis=1))
    return EnergyReport(cell_kind, per_row, sum(per_row), int(costs.size), overhead, timing.cycle_rate)

class SparsityPoint(NamedTuple):
    sparsity :float
    txl9t4r_J :float
    sixt2r_J :float

    @property
    def ratio(self) -> float:
        """6T2R energy relative to 9T4R energy."""
        return self.sixt2r_J/self.txl9t4r_J if self.txl9t4r_J else math.inf

@dataclass(frozen=True)
class DesignComparison:
    totals :dict[CellKind, float]
    #: mean cost of a match and of a mismatch per design, over all events of that outcome in the workload
    averages :dict[tuple[CellKind, Outcome], float]
    #: one point per search: the fraction of matching cells and both designs' energies
    curve :tuple[SparsityPoint, ...]

    @property
    def ratio(self) -> float:
        txl = self.totals[CellKind.TXL9T4R]
        return self.totals[CellKind.SIXT2R]/txl if txl else math.inf

def compare_designs(workload :Iterable[SearchResult], table :EnergyTable = EnergyTable(), vdd :float = VDD_TXL) -> DesignComparison:
    """Account the same workload with both cell kinds."""
    totals = {k: 0.0 for k in CellKind}
    sums = {(k, o): 0.0 for k in CellKind for o in Outcome}
    events = {o: 0 for o in Outcome}
    curve :list[SparsityPoint] = []
    for result in workload:
        energies = {}
        for kind in CellKind:
            costs = cell_costs(result, table, kind, vdd)
            energies[kind] = float(costs.sum())
            totals[kind] += energies[kind]
            sums[kind, Outcome.MATCH] += float(costs[result.matching].sum())
            sums[kind, Outcome.MISMATCH] += float(costs[~result.matching].sum())
        n_match = int(result.matching.sum())
        events[Outcome.MATCH] += n_match
        events[Outcome.MISMATCH] += result.matching.size - n_match
        curve.append(SparsityPoint(n_match/result.matching.size if result.matching.size else 0.0,
                                   energies[CellKind.TXL9T4R], energies[CellKind.SIXT2R]))
    averages = {(k, o): (sums[k, o]/events[o] if events[o] else 0.0) for k in CellKind for o in Outcome}
    return DesignComparison(totals, averages, tuple(curve))

def sparsity_sweep(table :EnergyTable = EnergyTable(), sparsities :Sequence[float] = (0.0, 0.25, 0.5, 0.75, 1.0),
                   v_in :Optional[float] = None, cells :int = TXL_REFERENCE.cells, vdd :float = VDD_TXL) -> tuple[SparsityPoint, ...]:
    """Expected energy of one search over ``cells`` cells for each fraction of matching cells,
    all at input ``v_in`` (default ``vdd``, the most expensive input for both designs)."""
    v = vdd if v_in is None else v_in
    out :list[SparsityPoint] = []
    for s in sparsities:
        if not 0 <= s <= 1:
            raise OutOfRange(f"sparsity {s} outside [0, 1]")
        per_design = [cells*(s*event_cost(table, k, Outcome.MATCH, v, vdd) + (1-s)*event_cost(table, k, Outcome.MISMATCH, v, vdd))
                      for k in (CellKind.TXL9T4R, CellKind.SIXT2R)]
        out.append(SparsityPoint(s, *per_design))
    return tuple(out)
