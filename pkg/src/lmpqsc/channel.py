"""q-ary symmetric channel."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .galois import GF2m, gf


@dataclass(frozen=True)
class QscChannel:
    p: float
    m: int = 32

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"p must lie in [0, 1], got {self.p}")
        if not 1 <= self.m <= 32:
            raise ValueError(f"m must lie in [1, 32], got {self.m}")

    @property
    def q(self) -> int:
        return 1 << self.m

    @property
    def field(self) -> GF2m:
        return gf(self.m)

    def capacity(self) -> float:
        return capacity(self.p, self.q)


def transmit(x, channel: QscChannel, seed=None) -> np.ndarray:
    """Pass symbols through the q-SC.

    Each symbol survives with probability 1-p; otherwise it is XORed with a
    uniform nonzero field element, which lands uniformly on the other q-1
    symbols.
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    x = np.asarray(x, dtype=np.uint64)
    if np.any(x >= np.uint64(channel.q)):
        raise ValueError("symbol outside the field")
    hit = rng.random(x.shape) < channel.p
    noise = channel.field.uniform_nonzero(rng, int(hit.sum()))
    y = x.copy()
    y[hit] ^= noise
    return y


def _xlogx(x: float) -> float:
    return 0.0 if x <= 0.0 else x * np.log(x)


def capacity(p: float, q: int) -> float:
    """Capacity of the q-SC in q-ary symbols per channel use."""
    if q < 2:
        raise ValueError("q must be at least 2")
    lq = np.log(q)
    return float(1.0 + (_xlogx(1.0 - p) + _xlogx(p) - p * np.log(q - 1)) / lq)
