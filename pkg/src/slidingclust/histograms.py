"""Smooth histograms for suffix sums and shell tables for center replacement.

Both structures answer questions about the suffix of assignments that
arrived at or after a time tau, using space logarithmic in the range of the
answers rather than linear in the number of assignments.
"""

from __future__ import annotations

import math
from bisect import bisect_left, bisect_right

import numpy as np


class SmoothHistogram:
    """Suffix sums of a nonnegative sequence within a factor (1 + eps).

    Entry l remembers the time t_l of one recorded increment, the increment
    itself, and the running total just before it, so that the suffix sum from
    t_l onwards is ``total - prefix_l``. Interior entries are deleted when
    their neighbours' suffix sums are already within a factor (1 + eps), which
    is what keeps the list short; entries whose suffix sum exceeds ``cap`` are
    dropped from the head (they can no longer matter for any window).

    ``floor`` is a lower bound on any single increment and only feeds the
    length bound used to schedule compaction.

    Totals are kept in internal units (see ``_enc``/``_dec``) so that
    subclasses can make the running sums exact.
    """

    __slots__ = ("eps", "cap", "floor", "times", "prefix", "own", "total", "_next_compact")

    def __init__(self, eps: float, cap: float, floor: float | None = None):
        if eps <= 0:
            raise ValueError("eps must be positive")
        self.eps = float(eps)
        self.cap = float(cap)
        self.floor = floor
        self.times: list[int] = []
        self.prefix: list = []
        self.own: list = []
        self.total = 0
        self._next_compact = 16

    @staticmethod
    def _enc(amount):
        return amount

    @staticmethod
    def _dec(units):
        return units

    def __len__(self) -> int:
        return len(self.times)

    def value(self, l: int) -> float:
        return self._dec(self.total - self.prefix[l])

    def entries(self) -> list[tuple[float, int]]:
        """(suffix value, time) pairs, values decreasing."""
        return [(self._dec(self.total - P), t) for P, t in zip(self.prefix, self.times)]

    def length_bound(self) -> int:
        """Length guaranteed right after a compaction."""
        lo = self.floor
        if lo is None:
            if not self.own:
                return 2
            lo = self._dec(self.own[-1])
        ratio = max(self.cap / lo, 1.0) if lo > 0 else 1.0
        return 2 * math.ceil(math.log(ratio) / math.log1p(self.eps)) + 2

    def record(self, amount: float, t: int) -> None:
        if amount < 0:
            raise ValueError("increments must be nonnegative")
        if self.times and t <= self.times[-1]:
            raise ValueError(f"out-of-order record: t={t} after {self.times[-1]}")
        if amount == 0:
            return  # suffix sums are unchanged for every tau
        u = self._enc(amount)
        self.times.append(t)
        self.prefix.append(self.total)
        self.own.append(u)
        self.total += u
        self._drop_over_cap()
        n = len(self.times)
        if n > self._next_compact or n > self.length_bound():
            self.compact()
            self._next_compact = 2 * len(self.times) + 16

    def _drop_over_cap(self) -> None:
        drop = 0
        n = len(self.times)
        while drop < n - 1 and self.value(drop) > self.cap:
            drop += 1
        if drop:
            del self.times[:drop], self.prefix[:drop], self.own[:drop]

    def compact(self) -> None:
        n = len(self.times)
        if n <= 2:
            return
        grow = 1 + self.eps
        keep = [0]
        for l in range(1, n - 1):
            # delete l when the kept neighbour before it is within (1+eps) of the one after
            if self.value(keep[-1]) <= grow * self.value(l + 1):
                continue
            keep.append(l)
        keep.append(n - 1)
        if len(keep) < n:
            self.times = [self.times[i] for i in keep]
            self.prefix = [self.prefix[i] for i in keep]
            self.own = [self.own[i] for i in keep]

    def query(self, tau: int) -> float:
        """Estimate of the sum of increments recorded at times >= tau."""
        times = self.times
        n = len(times)
        if n == 0:
            return 0
        l = bisect_right(times, tau) - 1
        if l < 0:
            return self.value(0)
        if times[l] == tau:
            return self.value(l)
        if l == n - 1:
            return 0
        # strictly between two entries: everything after t_l, an overestimate
        # by at most the compaction slack
        v = self._dec(self.total - self.prefix[l] - self.own[l])
        return v if v > 0 else 0


class WeightHistogram(SmoothHistogram):
    """Counts of assignments to one center, capped at (1+eps) w."""

    __slots__ = ()

    def __init__(self, eps: float, w: int):
        super().__init__(eps, (1 + eps) * w, floor=1)

    def record_one(self, t: int) -> None:
        self.record(1, t)


# every finite double is an integer multiple of 2^-1074
_FIXED_SHIFT = 1074
_FIXED_ONE = 1 << _FIXED_SHIFT


class CostHistogram(SmoothHistogram):
    """Mapping-cost increments of one sketch, capped at (1+eps) 2^(p+7) M.

    Costs are summed exactly as fixed-point integers, so a tiny suffix is not
    swamped by rounding in the much larger running total.
    """

    __slots__ = ()

    def __init__(self, eps: float, cap: float):
        super().__init__(eps, cap)

    @staticmethod
    def _enc(amount):
        num, den = float(amount).as_integer_ratio()
        return num << (_FIXED_SHIFT - den.bit_length() + 1)

    @staticmethod
    def _dec(units):
        return units / _FIXED_ONE  # int true division rounds correctly


def wh_record(h: WeightHistogram, t: int) -> None:
    h.record(1, t)


def wh_query(h: WeightHistogram, tau: int) -> float:
    return h.query(tau)


def ch_record(h: CostHistogram, delta_cost: float, t: int) -> None:
    h.record(delta_cost, t)


def ch_query(h: CostHistogram, tau: int) -> float:
    return h.query(tau)


_ZERO_SHELL = -(1 << 62)


class ShellTable:
    """Most recent assignment per distance shell around one center.

    Shell j holds points with d^p in ((1+eps)^(j-1), (1+eps)^j]; a dedicated
    lowest shell holds points at distance 0 (the center itself). Recording at
    shell j overwrites every shell >= j, so the live content is a stack whose
    shell indices and times both increase from bottom to top: recording pops
    every entry at shell >= j and pushes the new one.
    """

    __slots__ = ("eps", "top", "_lg", "idx", "times", "ids", "coords")

    def __init__(self, eps: float, top: float):
        self.eps = float(eps)
        self.top = float(top)
        self._lg = math.log1p(self.eps)
        self.idx: list[int] = []
        self.times: list[int] = []
        self.ids: list[int] = []
        self.coords: list[np.ndarray] = []

    def __len__(self) -> int:
        return len(self.idx)

    def shell_index(self, dp: float) -> int:
        if dp <= 0:
            return _ZERO_SHELL
        base = 1 + self.eps
        j = math.ceil(math.log(dp) / self._lg)
        if base ** (j - 1) >= dp:
            j -= 1
        elif base ** j < dp:
            j += 1
        return j

    def radius(self, j: int) -> float:
        return 0.0 if j == _ZERO_SHELL else (1 + self.eps) ** j

    def record(self, coords: np.ndarray, index: int, dp: float, t: int) -> None:
        if dp > self.top * (1 + 1e-12):
            raise ValueError(f"distance^p {dp} exceeds the bound Delta^p = {self.top}")
        if self.times and t < self.times[-1]:
            raise ValueError("out-of-order shell record")
        j = self.shell_index(dp)
        idx = self.idx
        while idx and idx[-1] >= j:
            idx.pop()
            self.times.pop()
            self.ids.pop()
            self.coords.pop()
        idx.append(j)
        self.times.append(t)
        self.ids.append(index)
        self.coords.append(coords)

    def query(self, tau: int) -> tuple[np.ndarray, int] | None:
        """(coords, arrival index) of the representative, or None if all stale."""
        i = bisect_left(self.times, tau)
        if i == len(self.times):
            return None
        return self.coords[i], self.ids[i]

    def shells(self) -> list[tuple[float, int, int]]:
        """Per-radius view ``(radius, arrival index, time)`` for radii 1, (1+eps), ... up to Delta^p.

        Sub-unit shells are folded into radius 1 as in the classical layout;
        the stack itself keeps them apart.
        """
        out = []
        top_j = self.shell_index(self.top) if self.top > 0 else 0
        for j in range(0, max(top_j, 0) + 1):
            # representative of shell j = last recorded entry with index <= j
            pos = bisect_right(self.idx, j) - 1
            if pos < 0:
                continue
            out.append(((1 + self.eps) ** j, self.ids[pos], self.times[pos]))
        return out


def shell_record(s: ShellTable, coords: np.ndarray, index: int, dp: float, t: int) -> None:
    s.record(coords, index, dp, t)


def shell_query(s: ShellTable, tau: int):
    return s.query(tau)
