"""Front End: Sampling and Classification

Overview
--------

An analogue input signal is turned into a query by a bank of sample-and-hold channels, one per
column, sampled one after another (:func:`sample_and_hold`; the hold is ideal). After a search,
:func:`classify` applies one of three match policies to the result:

- *exact*: rows in which every cell matched,
- *threshold(k)*: rows with at least ``k`` matching cells,
- *best*: the single row with the highest matchline voltage (winner-take-all; ties go to the lowest row).

The threshold policies sense every matchline against the voltage half-way between the levels for
``k-1`` and ``k`` matches (:func:`~txlacam.matchline.boundary_voltage`), so a row is a hit exactly when
its match count is at least ``k``. The fixed sense threshold of the array itself corresponds to a
``k`` given by :func:`~txlacam.matchline.k_boundary`.

:func:`oracle_classify` computes the same classifications by comparing the templates' windows
with the query directly.

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
from dataclasses import dataclass
from collections.abc import Sequence, Iterator
from typing import Optional, overload
import numpy as np
from .error import OutOfRange, OutOfSupport, ParseError
from .devices import VDD_TXL
from .matchline import SenseAmp, SenseResult, boundary_voltage, sense
from .acam import SearchResult
from .compiler import Template

@dataclass(frozen=True)
class Waveform:
    """A piecewise-linear signal through ``(time, value)`` points."""
    samples :tuple[tuple[float, float], ...]
    vdd :float = VDD_TXL

    def __post_init__(self):
        if len(self.samples) < 1:
            raise OutOfRange("a waveform needs at least one point")
        times = [t for t, _v in self.samples]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise OutOfRange("waveform times must be strictly increasing")
        if any(not 0 <= v <= self.vdd for _t, v in self.samples):
            raise OutOfRange(f"waveform values must lie within [0, {self.vdd}] V")

    @property
    def support(self) -> tuple[float, float]:
        return self.samples[0][0], self.samples[-1][0]

    def __call__(self, t :float) -> float:
        start, end = self.support
        if not start <= t <= end:
            raise OutOfSupport(f"time {t} s outside waveform support [{start}, {end}] s")
        return float(np.interp(t, [s[0] for s in self.samples], [s[1] for s in self.samples]))

@dataclass(frozen=True)
class QueryVector(Sequence[float]):
    values :tuple[float, ...]
    vdd :float = VDD_TXL

    def __post_init__(self):
        if any(not 0 <= v <= self.vdd for v in self.values):
            raise OutOfRange(f"query values must lie within [0, {self.vdd}] V")

    @overload
    def __getitem__(self, index :int) -> float: ...
    @overload
    def __getitem__(self, index :slice) -> Sequence[float]: ...
    def __getitem__(self, index):
        return self.values[index]

    def __len__(self) -> int:
        return len(self.values)

    def __iter__(self) -> Iterator[float]:
        return iter(self.values)

def sample_and_hold(w :Waveform, start :float, period :float, n :int = 32) -> QueryVector:
    """Sample ``w`` at ``start + i*period`` for ``i`` in ``0..n-1``.

    :raises OutOfSupport: if any sample time lies outside the waveform"""
    if period <= 0 or n < 1:
        raise OutOfRange(f"invalid sampling period {period} or count {n}")
    return QueryVector(tuple(w(start + i*period) for i in range(n)), w.vdd)

class PolicyKind(enum.Enum):
    EXACT = 'exact'
    BEST = 'best'
    THRESHOLD = 'threshold'

@dataclass(frozen=True)
class MatchPolicy:
    kind :PolicyKind
    k :Optional[int] = None

    def __post_init__(self):
        if (self.kind is PolicyKind.THRESHOLD) != (self.k is not None):
            raise OutOfRange("k must be given for, and only for, the threshold policy")
        if self.k is not None and self.k < 1:
            raise OutOfRange(f"threshold k={self.k} must be at least 1")

    @classmethod
    def exact(cls) -> 'MatchPolicy':
        return cls(PolicyKind.EXACT)

    @classmethod
    def best(cls) -> 'MatchPolicy':
        return cls(PolicyKind.BEST)

    @classmethod
    def threshold(cls, k :int) -> 'MatchPolicy':
        return cls(PolicyKind.THRESHOLD, k)

    @classmethod
    def parse(cls, text :str) -> 'MatchPolicy':
        """Parse ``exact``, ``best`` or ``threshold:K``."""
        name, sep, k = text.strip().partition(':')
        try:
            kind = PolicyKind(name)
            if sep and kind is not PolicyKind.THRESHOLD:
                raise ValueError(f"{kind.value} takes no argument")
            return cls(kind, int(k) if kind is PolicyKind.THRESHOLD else None)
        except (ValueError, OutOfRange) as ex:
            raise ParseError(f"bad match policy {text!r}") from ex

    def __str__(self) -> str:
        return self.kind.value if self.k is None else f"{self.kind.value}:{self.k}"

    def min_count(self, columns :int) -> int:
        """The match count needed by the exact and threshold policies."""
        k = columns if self.kind is PolicyKind.EXACT else self.k
        if k is None or not 1 <= k <= columns:
            raise OutOfRange(f"policy {self} needs 1 <= k <= {columns}")
        return k

@dataclass(frozen=True)
class Classification:
    """The rows selected by a policy, in increasing order; empty if none."""
    policy :MatchPolicy
    rows :tuple[int, ...]

    @property
    def row(self) -> Optional[int]:
        """The first (for the best policy: the only) selected row, or ``None``."""
        return self.rows[0] if self.rows else None

def classify(result :SearchResult, policy :MatchPolicy, sa :SenseAmp = SenseAmp()) -> Classification:
    """Classify a search result. The threshold policies re-sense every matchline at the boundary voltage for their ``k``."""
    if policy.kind is PolicyKind.BEST:
        if not result.rows or float(np.max(result.v_ml)) <= 0:
            return Classification(policy, ())
        return Classification(policy, (int(np.argmax(result.v_ml)),))
    columns = len(result.levels) - 1
    boundary = SenseAmp(boundary_voltage(result.levels, policy.min_count(columns)), sa.vdd, sa.hit_level, sa.miss_level)
    return Classification(policy, tuple(r for r, v in enumerate(result.v_ml.tolist()) if sense(v, boundary) is SenseResult.HIT))

def window_counts(templates :Sequence[Template], query :Sequence[float]) -> dict[int, int]:
    """Number of windows of each template that strictly contain their column's query value, by row."""
    return {t.row: sum(1 for w, q in zip(t.windows, query, strict=True) if w.contains(q)) for t in templates}

def oracle_classify(templates :Sequence[Template], query :Sequence[float], policy :MatchPolicy) -> Classification:
    """Classify by direct window comparison, with the same policy semantics and tie rule as :func:`classify`."""
    counts = window_counts(templates, query)
    if policy.kind is PolicyKind.BEST:
        best = max(counts.values(), default=0)
        if best == 0:
            return Classification(policy, ())
        return Classification(policy, (min(r for r, c in counts.items() if c == best),))
    k = policy.min_count(len(query))
    return Classification(policy, tuple(sorted(r for r, c in counts.items() if c >= k)))
