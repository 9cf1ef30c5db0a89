"""Error-floor estimates: ML union bound with a Chernoff pairwise bound,
false-verification estimates and the unverification bound on short cycles
of degree-2 variable nodes.

Short-cycle statistics use the Poisson limit: the number of degree-2 cycles
of length k (k variable nodes) has mean mu^k / (2k) with mu = lambda_2 rho'(1).
"""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass
from math import comb, log, sqrt

import numpy as np

from .ensemble import DegreeDistribution

K_MAX = 200
PEP_EXACT_MAX_K = 30


class SeriesDivergence(RuntimeWarning):
    pass


@dataclass(frozen=True)
class SeriesResult:
    """Truncated series value plus an upper bound on the omitted tail."""

    value: float
    tail: float
    k_start: int | None
    k_max: int
    converged: bool

    @property
    def upper(self) -> float:
        return self.value + self.tail

    def to_dict(self) -> dict:
        return {"value": self.value, "tail": self.tail, "k_start": self.k_start,
                "k_max": self.k_max, "converged": self.converged}


# ---------------------------------------------------------------------------
# Cycle statistics
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CycleSpectrum:
    mu: float
    q: int | None = None  # None: no weight-product factor

    def b(self, k: int) -> float:
        """Expected number of degree-2 cycles of length k (divided by q-1
        when a field size is set)."""
        return float(np.exp(self.log_b(k)))

    def log_b(self, k: int) -> float:
        if self.mu <= 0.0:
            return -np.inf
        v = k * log(self.mu) - log(2 * k)
        if self.q is not None:
            v -= log(self.q - 1)
        return v

    def first_index(self, k_max: int = K_MAX) -> int | None:
        """Smallest k with expected multiplicity >= 1; None if there is none
        up to k_max (every weight expurgated)."""
        for k in range(1, k_max + 1):
            if self.log_b(k) >= -1e-12:
                return k
        return None


def spectrum(dd: DegreeDistribution, q: int | None = None) -> CycleSpectrum:
    return CycleSpectrum(dd.mu(), q)


def _geometric_series(log_term, ratio: float, k_start: int | None, k_max: int,
                      tail: float | None = None) -> SeriesResult:
    """Sum exp(log_term(k)) for k_start <= k <= k_max. Unless ``tail`` is
    given, terms beyond k_max are bounded by t_{k_max} * ratio / (1 - ratio),
    valid when t_{k+1} / t_k <= ratio for all k >= k_max."""
    if k_start is None or k_start > k_max:
        return SeriesResult(0.0, 0.0, k_start, k_max, True)
    ks = np.arange(k_start, k_max + 1)
    logs = np.array([log_term(int(k)) for k in ks])
    value = float(np.exp(logs).sum())
    if ratio < 1.0:
        if tail is None:
            tail = float(np.exp(logs[-1])) * ratio / (1.0 - ratio)
        return SeriesResult(value, tail, k_start, k_max, True)
    warnings.warn(f"series diverges (ratio {ratio:.4g} >= 1); partial sum reported",
                  SeriesDivergence, stacklevel=3)
    return SeriesResult(value, float("inf"), k_start, k_max, False)


# ---------------------------------------------------------------------------
# Pairwise error probability on the q-SC
# ---------------------------------------------------------------------------

def _pep_base(p: float, q: int) -> float:
    return p * (q - 2) / (q - 1) + sqrt(4.0 * p * (1.0 - p) / (q - 1))


def pep_bound(k: int, p: float, q: int) -> float:
    """Chernoff-type bound on the probability that ML prefers a weight-k
    codeword over the transmitted one."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if q < 2:
        raise ValueError("q must be >= 2")
    return _pep_base(p, q) ** k


def pep_exact(k: int, p: float, q: int) -> float:
    """Exact pairwise error probability, ties counted as errors.

    On each of the k support positions the received symbol matches the
    transmitted one (prob 1-p), matches the competitor (p/(q-1)) or matches
    neither (p(q-2)/(q-1)). The competitor wins or ties iff it collects at
    least as many matches, i.e. the exponent of x in
    ((1-p) + p x^2/(q-1) + p(q-2) x/(q-1))^k is at least k.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if k > PEP_EXACT_MAX_K:
        raise ValueError(f"k > {PEP_EXACT_MAX_K} refused (combinatorial blow-up)")
    if q < 2:
        raise ValueError("q must be >= 2")
    base = np.array([1.0 - p, p * (q - 2) / (q - 1), p / (q - 1)])
    coeffs = np.array([1.0])
    for _ in range(k):
        coeffs = np.convolve(coeffs, base)
    return float(coeffs[k:].sum())


def pep_exact_multinomial(k: int, p: float, q: int) -> float:
    """Same quantity by the explicit multinomial sum over (correct, competitor,
    other) counts; used as an independent check."""
    tot = 0.0
    for i in range(k + 1):
        for j in range(k + 1 - i):
            if j >= i:  # competitor matches j >= i transmitted matches
                m = comb(k, i) * comb(k - i, j)
                tot += m * (1 - p) ** i * (p / (q - 1)) ** j * (p * (q - 2) / (q - 1)) ** (k - i - j)
    return tot


def ml_union_bound(dd: DegreeDistribution, p: float, q: int, k_max: int = K_MAX,
                   k_start: int | None = None) -> dict:
    """Union bound on ML frame error (and expected symbol errors) from
    low-weight codewords supported on degree-2 cycles."""
    spec = spectrum(dd, q)
    if p <= 0.0 or spec.mu <= 0.0:
        zero = SeriesResult(0.0, 0.0, None, k_max, True)
        return {"frame": zero, "symbol": zero}
    k1 = spec.first_index(k_max) if k_start is None else k_start
    base = _pep_base(p, q)
    ratio = spec.mu * base
    lb = log(base) if base > 0 else -np.inf
    frame = _geometric_series(lambda k: spec.log_b(k) + k * lb, ratio, k1, k_max)
    symbol = _geometric_series(lambda k: spec.log_b(k) + log(k) + k * lb, ratio, k1, k_max)
    return {"frame": frame, "symbol": symbol}


# ---------------------------------------------------------------------------
# False verification
# ---------------------------------------------------------------------------

def type2_fv_bound(dd: DegreeDistribution, p: float, q: int, k_max: int = K_MAX,
                   k_start: int | None = None) -> dict:
    """Bounds on the probability of any type-II false verification and on the
    expected number of symbols involved. The default start index expurgates
    lengths whose weight-product-one cycle count is below 1."""
    spec = spectrum(dd, q)
    if p <= 0.0 or spec.mu <= 0.0:
        zero = SeriesResult(0.0, 0.0, None, k_max, True)
        return {"frame": zero, "symbols": zero}
    k1 = spec.first_index(k_max) if k_start is None else k_start
    a = spec.mu * sqrt(p)
    la = log(a)
    lq = log(q - 1)
    frame = _geometric_series(lambda k: k * la - log(k) - lq, a, k1, k_max)
    symbols = _geometric_series(lambda k: k * la - lq, a, k1, k_max)
    return {"frame": frame, "symbols": symbols}


def birthday_fv_estimate(s: int, m: int, q: int) -> float:
    """Rough type-I false-verification probability for m lists of size s."""
    return s * s * comb(m, 2) / q


def type1_fv_probability(sizes, q: int) -> float:
    """Probability that m independent uniform lists over the q-1 wrong
    symbols are not pairwise disjoint."""
    n = q - 1
    sizes = [int(x) for x in sizes]
    if sum(sizes) > n:
        return 1.0
    log_disjoint = 0.0
    used = 0
    for s in sizes:
        # P(list avoids the `used` symbols taken so far) = C(n-used, s) / C(n, s)
        t = np.arange(s)
        log_disjoint += float(np.log1p(-used / (n - t)).sum())
        used += s
    return float(-np.expm1(log_disjoint))


# ---------------------------------------------------------------------------
# Unverification on degree-2 cycles
# ---------------------------------------------------------------------------

def uv_transfer_matrix(s: int, p: float) -> np.ndarray:
    """(s+1) x (s+1) transfer matrix. State 0: the last s symbols were all
    incorrect; state i > 0: a correct symbol followed by i-1 incorrect ones."""
    if s < 1:
        raise ValueError("s must be >= 1")
    B = np.zeros((s + 1, s + 1))
    B[0, 0] = p
    B[0, 1] = 1.0 - p
    for i in range(1, s):
        B[i, i + 1] = p
    B[s, 0] = p
    return B


def uv_probability(s: int, p: float, k: int) -> float:
    """Probability that a length-k cycle has at most one correct symbol in
    every window of s+1 cyclically consecutive positions."""
    if k < 1:
        raise ValueError("k must be >= 1")
    return float(np.trace(np.linalg.matrix_power(uv_transfer_matrix(s, p), k)))


def uv_probability_bruteforce(s: int, p: float, k: int) -> float:
    """Enumerate all 2^k cyclic error patterns (1 = incorrect)."""
    total = 0.0
    for z in itertools.product((0, 1), repeat=k):
        ok = True
        for i in range(k):
            correct = sum(1 for t in range(s + 1) if z[(i + t) % k] == 0)
            if correct > 1:
                ok = False
                break
        if ok:
            w = sum(z)
            total += p ** w * (1.0 - p) ** (k - w)
    return total


def uv_union_bound(dd: DegreeDistribution, s: int, p: float, q: int | None = None,
                   k_max: int = K_MAX, k_start: int | None = None, girth: int | None = None) -> dict:
    """Union bounds on the probability of an unverification event and on the
    expected number of unverified symbols.

    With ``q`` set, cycles whose weight product is one are excluded via the
    factor (q-2)/(q-1). A Tanner-graph ``girth`` g drops cycles through
    fewer than g/2 variable nodes.
    """
    spec = spectrum(dd, None)
    if spec.mu <= 0.0:
        zero = SeriesResult(0.0, 0.0, None, k_max, True)
        return {"frame": zero, "symbols": zero}
    k2 = spec.first_index(k_max) if k_start is None else k_start
    if girth is not None and k2 is not None:
        k2 = max(k2, (girth + 1) // 2)
    if q is None:
        lf = 0.0
    elif q > 2:
        lf = log((q - 2) / (q - 1))
    else:
        lf = -np.inf
    lmu = log(spec.mu)
    B = uv_transfer_matrix(s, p)
    # Tr(B^k) <= (s+1) rad^k, so terms beyond k_max are dominated by a
    # geometric series with ratio mu * rad
    rad = float(max(abs(np.linalg.eigvals(B))))
    ratio = spec.mu * rad

    def lphi(k):
        v = float(np.trace(np.linalg.matrix_power(B, k)))
        return log(v) if v > 0 else -np.inf

    def tail(scale_log):
        if k2 is None or ratio >= 1.0:
            return None
        k = k_max + 1
        return float(np.exp(scale_log(k) + lf + log(s + 1) + k * log(ratio))) / (1.0 - ratio)

    frame = _geometric_series(lambda k: k * lmu - log(2 * k) + lphi(k) + lf, ratio, k2, k_max,
                              tail(lambda k: -log(2 * k)))
    symbols = _geometric_series(lambda k: k * lmu - log(2) + lphi(k) + lf, ratio, k2, k_max,
                                tail(lambda k: -log(2)))
    return {"frame": frame, "symbols": symbols}


def stability_check(dd: DegreeDistribution, p: float) -> tuple[bool, float]:
    """Stability of the zero-error fixed point: p lambda_2 rho'(1) < 1."""
    prod = p * dd.mu()
    return prod < 1.0, prod
