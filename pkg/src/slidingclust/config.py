"""Problem parameters and the constants derived from them."""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, replace

import numpy as np


def log2_ceil(x: float) -> int:
    """Ceiling of log2(x), floored at 0 (so arguments <= 1 give 0)."""
    if x <= 1:
        return 0
    c = math.ceil(math.log2(x))
    # guard against log2 rounding just above an exact power of two
    if 2.0 ** (c - 1) >= x:
        c -= 1
    return c


def derive_seed(master: int, *key: int) -> int:
    """Stable 64-bit seed for a (master, key...) stream."""
    ss = np.random.SeedSequence(entropy=int(master) & ((1 << 64) - 1),
                                spawn_key=tuple(int(k) & 0xFFFFFFFF for k in key))
    hi, lo = ss.generate_state(2, dtype=np.uint32)
    return int(hi) << 32 | int(lo)


def derive_random(master: int, *key: int) -> random.Random:
    return random.Random(derive_seed(master, *key))


def derive_generator(master: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(derive_seed(master, *key))


@dataclass(frozen=True)
class ProblemConfig:
    """Parameters shared by every sketch in one run.

    ``m``/``M`` bound the optimum window cost, ``Delta`` bounds distances.
    ``copies`` is ``"single"`` (one Meyerson run per guess) or ``"full"``
    (2*ceil(log2(1/gamma)) runs per guess).
    """

    k: int
    w: int
    m: float
    M: float
    Delta: float
    p: float = 2.0
    epsilon: float = 0.05
    delta: float = 0.2
    gamma: float = 0.1
    alpha: float = 0.5
    beta: float = 16.0
    eta: float = 0.05
    copies: str = "single"
    log_window: bool = False

    def __post_init__(self):
        if int(self.k) != self.k or self.k < 1:
            raise ValueError("k must be a positive integer")
        if self.w < 1:
            raise ValueError("w must be >= 1")
        if not self.p >= 1:
            raise ValueError("p must be >= 1")
        if not 0 < self.m <= self.M:
            raise ValueError(f"need 0 < m <= M, got m={self.m}, M={self.M}")
        if not self.Delta >= 1:
            raise ValueError("Delta must be >= 1")
        if not 0 < self.epsilon:
            raise ValueError("epsilon must be positive")
        if not 0 < self.gamma < 1:
            raise ValueError("gamma must lie in (0, 1)")
        if not 0 < self.alpha < 1:
            raise ValueError("alpha must lie in (0, 1)")
        if self.delta <= 0 or self.beta < 1 or self.eta <= 0:
            raise ValueError("delta, eta must be positive and beta >= 1")
        if self.copies not in ("single", "full"):
            raise ValueError("copies must be 'single' or 'full'")

    def with_(self, **changes) -> "ProblemConfig":
        return replace(self, **changes)

    @property
    def log_delta(self) -> int:
        return log2_ceil(self.Delta)

    @property
    def log_inv_gamma(self) -> int:
        return max(1, log2_ceil(1.0 / self.gamma))

    @property
    def sampling_factor(self) -> float:
        """k(1 + log Delta): scales d(x,S)^p / L into an opening probability."""
        if self.log_window:
            return self.k * (1 + log2_ceil(2 * self.w))
        return self.k * (1 + self.log_delta)

    @property
    def n_copies(self) -> int:
        return 1 if self.copies == "single" else 2 * self.log_inv_gamma

    @property
    def copy_cap(self) -> int:
        """Per-copy center limit; a copy that would exceed it closes."""
        a = 2.0 ** (self.p + 3) / self.alpha ** self.p + 1
        return math.ceil(4 * self.k * (1 + self.log_delta) * a)

    @property
    def guess_size_bound(self) -> float:
        """A guess qualifies only with fewer centers (over its copies) than this."""
        return 8 * self.k * self.log_inv_gamma * (1 + self.log_delta) * (2.0 ** (2 * self.p + 3) + 1)

    @property
    def guess_cost_factor(self) -> float:
        """A guess L qualifies only with mapping cost below this times L."""
        return 2.0 ** (self.p + 6)

    @property
    def guesses(self) -> list[float]:
        top = log2_ceil(self.M / self.m)
        return [self.m * 2.0 ** i for i in range(top + 1)]

    @property
    def weight_cap(self) -> float:
        return (1 + self.epsilon) * self.w

    @property
    def cost_cap(self) -> float:
        return (1 + self.epsilon) * 2.0 ** (self.p + 7) * self.M

    @property
    def shell_top(self) -> float:
        return float(self.Delta) ** self.p
