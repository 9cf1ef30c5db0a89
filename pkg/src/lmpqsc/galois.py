"""Arithmetic over binary extension fields GF(2^m), 1 <= m <= 32.

Elements are plain unsigned integers (bit i = coefficient of x^i). Each m uses
one fixed irreducible polynomial: the lexicographically smallest monic
irreducible polynomial of degree m over GF(2).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numba
import numpy as np

MAX_M = 32


# ---------------------------------------------------------------------------
# GF(2)[x] helpers on python ints
# ---------------------------------------------------------------------------

def _clmul(a: int, b: int) -> int:
    r = 0
    while b:
        if b & 1:
            r ^= a
        a <<= 1
        b >>= 1
    return r


def _pmod(a: int, f: int) -> int:
    df = f.bit_length() - 1
    while a and a.bit_length() - 1 >= df:
        a ^= f << (a.bit_length() - 1 - df)
    return a


def _pgcd(a: int, b: int) -> int:
    while b:
        a, b = b, _pmod(a, b)
    return a


def _mulmod(a: int, b: int, f: int) -> int:
    return _pmod(_clmul(a, b), f)


def _prime_factors(m: int) -> list[int]:
    out, d = [], 2
    while d * d <= m:
        if m % d == 0:
            out.append(d)
            while m % d == 0:
                m //= d
        d += 1
    if m > 1:
        out.append(m)
    return out


def is_irreducible(f: int) -> bool:
    """Rabin's irreducibility test for a polynomial over GF(2)."""
    m = f.bit_length() - 1
    if m < 1:
        return False
    if m == 1:
        return True

    def x_pow_2k(k: int) -> int:
        # x^(2^k) mod f by repeated squaring
        r = 0b10
        for _ in range(k):
            r = _mulmod(r, r, f)
        return r

    if x_pow_2k(m) != _pmod(0b10, f):
        return False
    for r in _prime_factors(m):
        h = x_pow_2k(m // r) ^ 0b10
        if _pgcd(f, h) != 1:
            return False
    return True


@lru_cache(maxsize=None)
def default_polynomial(m: int) -> int:
    """Lexicographically smallest irreducible polynomial of degree m."""
    if not 1 <= m <= MAX_M:
        raise ValueError(f"m must be in [1, {MAX_M}], got {m}")
    top = 1 << m
    for low in range(1 << m):
        f = top | low
        if is_irreducible(f):
            return f
    raise RuntimeError("no irreducible polynomial found")  # unreachable


# ---------------------------------------------------------------------------
# numba kernels, shared by decoders
# ---------------------------------------------------------------------------

@numba.njit(cache=True, inline="always")
def nb_mul(a, b, m, poly):
    """Shift-and-add product of two field elements (uint64 inputs)."""
    r = np.uint64(0)
    top = np.uint64(1) << np.uint64(m)
    one = np.uint64(1)
    while b:
        if b & one:
            r ^= a
        b >>= one
        a <<= one
        if a & top:
            a ^= poly
    return r


@numba.njit(cache=True)
def _deg(a):
    d = -1
    while a:
        a >>= np.uint64(1)
        d += 1
    return d


@numba.njit(cache=True)
def nb_inv(a, m, poly):
    """Inverse by the extended Euclidean algorithm on GF(2)[x]."""
    # invariants: u = s * a (mod poly), v = t * a (mod poly)
    u, v = np.uint64(a), np.uint64(poly)
    s, t = np.uint64(1), np.uint64(0)
    while u != np.uint64(1):
        j = _deg(u) - _deg(v)
        if j < 0:
            u, v = v, u
            s, t = t, s
            j = -j
        u ^= v << np.uint64(j)
        s ^= t << np.uint64(j)
    return s


@numba.njit(cache=True)
def _nb_mul_arrays(a, b, m, poly):
    out = np.empty(a.shape[0], dtype=np.uint64)
    for i in range(a.shape[0]):
        out[i] = nb_mul(a[i], b[i], m, poly)
    return out


@numba.njit(cache=True)
def _nb_inv_array(a, m, poly):
    out = np.empty(a.shape[0], dtype=np.uint64)
    for i in range(a.shape[0]):
        out[i] = nb_inv(a[i], m, poly)
    return out


# ---------------------------------------------------------------------------
# Field context
# ---------------------------------------------------------------------------

class FieldError(ValueError):
    pass


class GF2m:
    """Field context for GF(2^m).

    Scalar operations take and return python ints; ``mul_array`` and
    ``inv_array`` work elementwise on uint64 arrays.
    """

    def __init__(self, m: int, polynomial: int | None = None):
        if not 1 <= m <= MAX_M:
            raise FieldError(f"m must be in [1, {MAX_M}], got {m}")
        poly = default_polynomial(m) if polynomial is None else int(polynomial)
        if poly.bit_length() - 1 != m or not is_irreducible(poly):
            raise FieldError(f"polynomial {poly:#x} is not irreducible of degree {m}")
        self.m = m
        self.poly = poly
        self.q = 1 << m
        self._mask = self.q - 1

    def __repr__(self) -> str:
        return f"GF2m(m={self.m}, polynomial={self.poly:#x})"

    def __eq__(self, other) -> bool:
        return isinstance(other, GF2m) and (self.m, self.poly) == (other.m, other.poly)

    def __hash__(self) -> int:
        return hash((self.m, self.poly))

    def to_dict(self) -> dict:
        return {"m": self.m, "polynomial": self.poly}

    @classmethod
    def from_dict(cls, d: dict) -> "GF2m":
        return cls(int(d["m"]), d.get("polynomial"))

    def _check(self, a: int) -> int:
        a = int(a)
        if a < 0 or a > self._mask:
            raise FieldError(f"{a} is not an element of GF(2^{self.m})")
        return a

    # scalar ops
    def add(self, a: int, b: int) -> int:
        return self._check(a) ^ self._check(b)

    sub = add

    def mul(self, a: int, b: int) -> int:
        return _mulmod(self._check(a), self._check(b), self.poly)

    def inv(self, a: int) -> int:
        a = self._check(a)
        if a == 0:
            raise ZeroDivisionError("zero has no inverse")
        return self.pow(a, self.q - 2)

    def div(self, a: int, b: int) -> int:
        return self.mul(a, self.inv(b))

    def pow(self, a: int, e: int) -> int:
        a = self._check(a)
        if e < 0:
            a, e = self.inv(a), -e
        r = 1
        while e:
            if e & 1:
                r = _mulmod(r, a, self.poly)
            a = _mulmod(a, a, self.poly)
            e >>= 1
        return r

    # array ops
    def mul_array(self, a, b) -> np.ndarray:
        a, b = np.broadcast_arrays(np.asarray(a, dtype=np.uint64), np.asarray(b, dtype=np.uint64))
        shape = a.shape
        out = _nb_mul_arrays(np.ascontiguousarray(a).ravel(), np.ascontiguousarray(b).ravel(),
                             self.m, np.uint64(self.poly))
        return out.reshape(shape)

    def inv_array(self, a) -> np.ndarray:
        a = np.asarray(a, dtype=np.uint64)
        if np.any(a == 0):
            raise ZeroDivisionError("zero has no inverse")
        return _nb_inv_array(np.ascontiguousarray(a).ravel(), self.m, np.uint64(self.poly)).reshape(a.shape)

    def uniform_nonzero(self, rng: np.random.Generator, size) -> np.ndarray:
        """i.i.d. uniform draws from GF(q) minus {0}."""
        return rng.integers(1, self.q, size=size, dtype=np.uint64, endpoint=False)

    def uniform(self, rng: np.random.Generator, size) -> np.ndarray:
        return rng.integers(0, self.q, size=size, dtype=np.uint64, endpoint=False)

    def element(self, value: int) -> "FieldElement":
        return FieldElement(self._check(value), self)


@dataclass(frozen=True)
class FieldElement:
    """A field value bound to its context; operators refuse mixed contexts."""

    value: int
    field: GF2m

    def _other(self, other: "FieldElement") -> int:
        if not isinstance(other, FieldElement):
            raise TypeError("operand is not a FieldElement")
        if other.field != self.field:
            raise FieldError("mismatched field contexts")
        return other.value

    def __add__(self, other):
        return FieldElement(self.value ^ self._other(other), self.field)

    __sub__ = __add__

    def __mul__(self, other):
        return FieldElement(self.field.mul(self.value, self._other(other)), self.field)

    def __truediv__(self, other):
        return FieldElement(self.field.div(self.value, self._other(other)), self.field)

    def inverse(self) -> "FieldElement":
        return FieldElement(self.field.inv(self.value), self.field)

    def __int__(self) -> int:
        return self.value


@lru_cache(maxsize=None)
def gf(m: int) -> GF2m:
    """Cached default field context."""
    return GF2m(m)
