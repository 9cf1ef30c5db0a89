"""Density evolution for LMP decoders (unbounded and bounded list size) and
for the single-value LM1/LM2 message-based decoders.

Bounded-list densities are stored as ``Density(V, E, L, N)`` where ``L`` and
``N`` are arrays of length ``s_max + 1`` indexed by list size (entry 0 unused).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numba
import numpy as np
from scipy.optimize import minimize_scalar

from .ensemble import DegreeDistribution, eval_poly, rate

NEG_TOL = 1e-12


# ---------------------------------------------------------------------------
# Unbounded list size
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class UnboundedDeState:
    x: float  # P(correct symbol absent from the list)
    y: float  # P(message unverified)
    z: float  # mean list size


def de_unbounded_step(state: UnboundedDeState, dd: DegreeDistribution, p: float) -> UnboundedDeState:
    x, y, z = state.x, state.y, state.z
    xt = 1.0 - dd.rho_at(1.0 - x)
    yt = 1.0 - dd.rho_at(1.0 - y)
    with np.errstate(over="ignore"):
        # mean list size grows doubly exponentially and may reach inf
        zt = eval_poly(dd, "rho", 0, z)
    lam1 = eval_poly(dd, "lambda", 1, xt)
    x_new = p * dd.lam_at(xt)
    y_new = dd.lam_at(xt) + p * (yt - xt) * lam1
    z_new = 1.0 + (xt * lam1 + p * (yt - xt) * (lam1 + xt * eval_poly(dd, "lambda", 2, xt))) * zt
    return UnboundedDeState(x_new, y_new, z_new)


def de_unbounded_run(dd: DegreeDistribution, p: float, max_iters: int = 2000,
                     tol: float = 1e-6) -> tuple[bool, list[UnboundedDeState]]:
    """Iterate from x = y = 1, z = 1 until y < tol."""
    st = UnboundedDeState(1.0, 1.0, 1.0)
    trace = [st]
    for _ in range(max_iters):
        st = de_unbounded_step(st, dd, p)
        trace.append(st)
        if st.y < tol:
            return True, trace
    return False, trace


def _bec_ratio(dd: DegreeDistribution, x):
    return x / eval_poly(dd, "lambda", 0, 1.0 - eval_poly(dd, "rho", 0, 1.0 - x))


def threshold_unbounded(dd: DegreeDistribution, grid: int = 200_001) -> float:
    """sup{p : p*lambda(1 - rho(1 - x)) < x for all x in (0, 1]}.

    Equals the minimum over x of x / lambda(1 - rho(1 - x)). The minimum is
    located on a grid (dense near 0 so the stability limit is seen) and then
    polished with a bounded scalar minimization.
    """
    xs = np.unique(np.r_[np.geomspace(1e-9, 1e-2, 2001), np.linspace(1e-2, 1.0, grid)])
    vals = _bec_ratio(dd, xs)
    i = int(np.argmin(vals))
    best = float(vals[i])
    lo, hi = xs[max(i - 1, 0)], xs[min(i + 1, xs.size - 1)]
    if hi > lo:
        res = minimize_scalar(lambda t: float(_bec_ratio(dd, t)), bounds=(lo, hi),
                              method="bounded", options={"xatol": 1e-13})
        best = min(best, float(res.fun))
    if dd.lam[2] > 0:
        best = min(best, 1.0 / dd.mu())
    return min(best, 1.0)


# ---------------------------------------------------------------------------
# Bounded list size
# ---------------------------------------------------------------------------

@dataclass
class Density:
    V: float
    E: float
    L: np.ndarray
    N: np.ndarray

    @property
    def s_max(self) -> int:
        return self.L.size - 1

    def mass(self) -> float:
        return float(self.V + self.E + self.L.sum() + self.N.sum())

    def unverified(self) -> float:
        return 1.0 - self.V

    def copy(self) -> "Density":
        return Density(self.V, self.E, self.L.copy(), self.N.copy())

    @classmethod
    def initial(cls, p: float, s_max: int) -> "Density":
        L = np.zeros(s_max + 1)
        N = np.zeros(s_max + 1)
        L[1] = 1.0 - p
        N[1] = p
        return cls(0.0, 0.0, L, N)

    @classmethod
    def zeros(cls, s_max: int) -> "Density":
        return cls(0.0, 0.0, np.zeros(s_max + 1), np.zeros(s_max + 1))


def _clamp(d: Density) -> Density:
    """Zero tiny negative round-off and restore unit mass.

    Complement-form updates keep the mass at one, but clamping a -1e-13 entry
    to zero adds mass that would otherwise compound over iterations.
    """
    for arr in (d.L, d.N):
        if arr.min(initial=0.0) < -NEG_TOL:
            raise FloatingPointError(f"negative density coefficient {arr.min():.3e}")
        np.maximum(arr, 0.0, out=arr)
    if d.V < -NEG_TOL or d.E < -NEG_TOL:
        raise FloatingPointError("negative density mass")
    d.V = max(d.V, 0.0)
    d.E = max(d.E, 0.0)
    m = d.mass()
    if abs(m - 1.0) > 1e-9:
        raise FloatingPointError(f"density mass {m!r} drifted from 1")
    if m != 1.0:
        d.V /= m
        d.E /= m
        d.L /= m
        d.N /= m
    return d


def _conv_sat(a: np.ndarray, b: np.ndarray, s_max: int) -> np.ndarray:
    """Size-adding product; all sizes >= s_max collect in the last cell."""
    c = np.convolve(a, b)
    out = c[: s_max + 1].copy()
    out[s_max] += c[s_max + 1:].sum()
    return out


def vn_basic_op(a: Density, b: Density) -> Density:
    """Variable-node basic operation (before the channel symbol is folded in).

    List sizes add. The last cell of L/N aggregates every size >= s_max, which
    is all the truncation step needs. V is formed as the complement of the
    other parts: exact when inputs carry unit mass and immune to drift.
    """
    s = a.s_max
    E = a.E * b.E
    L = a.L * b.E + b.L * a.E + _conv_sat(a.L, b.N, s) + _conv_sat(b.L, a.N, s)
    N = a.N * b.E + b.N * a.E + _conv_sat(a.N, b.N, s)
    V = 1.0 - E - L.sum() - N.sum()
    return _clamp(Density(V, E, L, N))


def vn_basic_op_literal(a: Density, b: Density) -> Density:
    """Same as ``vn_basic_op`` but with V from its explicit formula."""
    out = vn_basic_op(a, b)
    out.V = a.V + b.V - a.V * b.V + a.L.sum() * b.L.sum()
    return out


def _size_product_index(s_max: int) -> np.ndarray:
    j = np.arange(s_max + 1)
    return np.minimum(np.outer(j, j), s_max + 1).ravel()


def cn_basic_op_raw(a: Density, b: Density) -> tuple[float, np.ndarray, np.ndarray]:
    """Check-node basic operation before truncation.

    Returns (V, L, N) with L/N of length s_max + 2; the last cell holds all
    mass whose size product exceeds s_max.
    """
    s = a.s_max
    idx = _size_product_index(s)
    V = a.V * b.V
    L = np.bincount(idx, np.outer(a.L, b.L).ravel(), minlength=s + 2)
    N = np.bincount(idx, (np.outer(a.N, b.N) + np.outer(a.N, b.L) + np.outer(a.L, b.N)).ravel(),
                    minlength=s + 2)
    # a verified input acts as a size-one list
    L[: s + 1] += a.V * b.L + b.V * a.L
    N[: s + 1] += a.V * b.N + b.V * a.N
    return V, L, N


def truncate_cn_raw(V: float, L: np.ndarray, N: np.ndarray) -> Density:
    """Check-side truncation: overflow mass (last cell) becomes erasure.

    E is the complement of the retained parts, so it carries both the inputs'
    erasures and the overflow.
    """
    Lk, Nk = L[:-1].copy(), N[:-1].copy()
    E = 1.0 - V - Lk.sum() - Nk.sum()
    return _clamp(Density(V, E, Lk, Nk))


def cn_basic_op(a: Density, b: Density) -> Density:
    """Check-node basic operation followed by check-side truncation."""
    return truncate_cn_raw(*cn_basic_op_raw(a, b))


def truncate_cn(d: Density, s_max: int) -> Density:
    """Move list mass with size above s_max into E."""
    L = np.zeros(s_max + 1)
    N = np.zeros(s_max + 1)
    k = min(d.L.size, s_max + 1)
    L[:k] = d.L[:k]
    N[:k] = d.N[:k]
    E = d.E + d.L[k:].sum() + d.N[k:].sum()
    return _clamp(Density(d.V, E, L, N))


def truncate_vn_channel(d: Density, s_max: int, p: float) -> Density:
    """Fold in the channel symbol and truncate at the variable node.

    ``d`` holds the combined check messages; L/N entries at index >= s_max
    (any length of array) count as lists too long to accept the channel symbol.
    """
    A = np.zeros(s_max + 1)
    C = np.zeros(s_max + 1)
    k = min(d.L.size, s_max)
    A[:k] = d.L[:k]
    C[:k] = d.N[:k]
    B = float(d.L[s_max:].sum())
    D = float(d.N[s_max:].sum())
    V = d.V + (1.0 - p) * (A.sum() + B)
    L = np.zeros(s_max + 1)
    N = np.zeros(s_max + 1)
    # multiplying by x shifts sizes up by one
    L[1:] += (1.0 - p) * C[:s_max] + p * A[:s_max]
    L[1] += (1.0 - p) * (d.E + D)
    N[1:] += p * C[:s_max]
    N[1] += p * (d.E + B + D)
    return _clamp(Density(V, 0.0, L, N))


def _mix(parts: list[tuple[float, Density]], s_max: int) -> Density:
    out = Density.zeros(s_max)
    for w, d in parts:
        out.V += w * d.V
        out.E += w * d.E
        out.L += w * d.L
        out.N += w * d.N
    return out


def check_side(P: Density, dd: DegreeDistribution) -> Density:
    """sum_k rho_k T(P boxplus ... boxplus P)  (k-1 operands)."""
    s = P.s_max
    parts = []
    acc = P
    for k in range(2, dd.rho.size):
        if k > 2:
            acc = cn_basic_op(acc, P)
        if dd.rho[k] > 0:
            parts.append((dd.rho[k], acc))
    return _mix(parts, s)


def variable_side(Pt: Density, dd: DegreeDistribution, p: float) -> Density:
    """sum_k lambda_k T'(Pt otimes ... otimes Pt)  (k-1 operands)."""
    s = Pt.s_max
    parts = []
    acc = Pt
    for k in range(2, dd.lam.size):
        if k > 2:
            acc = vn_basic_op(acc, Pt)
        if dd.lam[k] > 0:
            parts.append((dd.lam[k], truncate_vn_channel(acc, s, p)))
    return _mix(parts, s)


@dataclass
class BoundedDeResult:
    converged: bool
    final: Density
    iterations: int
    trace: list = field(default_factory=list)  # rows (iter, V, E, L1, unverified)


def de_bounded_iterate(dd: DegreeDistribution, p: float, s_max: int, max_iters: int = 5000,
                       tol: float = 1e-10, plateau_rel: float = 1e-12, plateau_len: int = 50,
                       keep_trace: bool = False) -> BoundedDeResult:
    P = Density.initial(p, s_max)
    trace = []
    prev = 1.0
    flat = 0
    for it in range(1, max_iters + 1):
        Pt = check_side(P, dd)
        P = variable_side(Pt, dd, p)
        u = P.unverified()
        if keep_trace:
            trace.append((it, P.V, P.E, float(P.L[1]), u))
        if u < tol:
            return BoundedDeResult(True, P, it, trace)
        if abs(prev - u) <= plateau_rel * max(u, 1e-300):
            flat += 1
            if flat >= plateau_len:
                break
        else:
            flat = 0
        prev = u
    return BoundedDeResult(False, P, it, trace)


def bisect_threshold(converges, lo: float = 0.0, hi: float = 1.0, tol: float = 5e-4) -> float:
    """Largest p with ``converges(p)`` true, assuming monotonicity."""
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if converges(mid):
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def threshold_bounded(dd: DegreeDistribution, s_max: int, tol: float = 5e-4,
                      max_iters: int = 5000, lo: float = 0.0, hi: float | None = None) -> float:
    """Bisection on p over bounded-DE convergence (compiled kernel)."""
    if hi is None:
        hi = min(1.0, 1.0 - rate(dd) + 1e-3)
    return bisect_threshold(lambda p: de_bounded_converges(dd, p, s_max, max_iters), lo, hi, tol)


def de_bounded_converges(dd: DegreeDistribution, p: float, s_max: int, max_iters: int = 5000,
                         tol: float = 1e-10) -> bool:
    """Fast convergence test; same recursion as ``de_bounded_iterate``."""
    ok, _, _ = _de_bounded_kernel(dd.lam, dd.rho, float(p), int(s_max), int(max_iters), float(tol))
    return bool(ok)


@numba.njit(cache=True)
def _nb_normalize(V, E, L, N):
    if E < 0.0:
        E = 0.0
    if V < 0.0:
        V = 0.0
    m = V + E
    for j in range(L.size):
        if L[j] < 0.0:
            L[j] = 0.0
        if N[j] < 0.0:
            N[j] = 0.0
        m += L[j] + N[j]
    V /= m
    E /= m
    for j in range(L.size):
        L[j] /= m
        N[j] /= m
    return V, E


@numba.njit(cache=True)
def _nb_cn_op(aV, aL, aN, bV, bL, bN, L, N):
    s = aL.size - 1
    for j in range(s + 1):
        L[j] = aV * bL[j] + bV * aL[j]
        N[j] = aV * bN[j] + bV * aN[j]
    for j in range(1, s + 1):
        for k in range(1, s + 1):
            jk = j * k
            if jk > s:
                break
            L[jk] += aL[j] * bL[k]
            N[jk] += aN[j] * bN[k] + aN[j] * bL[k] + aL[j] * bN[k]
    V = aV * bV
    E = 1.0 - V
    for j in range(s + 1):
        E -= L[j] + N[j]
    return _nb_normalize(V, E, L, N)


@numba.njit(cache=True)
def _nb_vn_op(aE, aL, aN, bE, bL, bN, L, N):
    s = aL.size - 1
    for j in range(s + 1):
        L[j] = aL[j] * bE + bL[j] * aE
        N[j] = aN[j] * bE + bN[j] * aE
    for j in range(1, s + 1):
        for k in range(1, s + 1):
            t = j + k
            if t > s:
                t = s
            L[t] += aL[j] * bN[k] + bL[j] * aN[k]
            N[t] += aN[j] * bN[k]
    E = aE * bE
    V = 1.0 - E
    for j in range(s + 1):
        V -= L[j] + N[j]
    return _nb_normalize(V, E, L, N)


@numba.njit(cache=True)
def _de_bounded_kernel(lam, rho, p, s, max_iters, tol):
    PV, PE = 0.0, 0.0
    PL = np.zeros(s + 1)
    PN = np.zeros(s + 1)
    PL[1] = 1.0 - p
    PN[1] = p
    accL = np.zeros(s + 1)
    accN = np.zeros(s + 1)
    tL = np.zeros(s + 1)
    tN = np.zeros(s + 1)
    QL = np.zeros(s + 1)
    QN = np.zeros(s + 1)
    prev = 1.0
    flat = 0
    u = 1.0
    for it in range(1, max_iters + 1):
        # check side
        QtV, QtE = 0.0, 0.0
        QtL = np.zeros(s + 1)
        QtN = np.zeros(s + 1)
        aV, aE = PV, PE
        accL[:] = PL
        accN[:] = PN
        for k in range(2, rho.size):
            if k > 2:
                aV, aE = _nb_cn_op(aV, accL, accN, PV, PL, PN, tL, tN)
                accL[:] = tL
                accN[:] = tN
            w = rho[k]
            if w > 0.0:
                QtV += w * aV
                QtE += w * aE
                QtL += w * accL
                QtN += w * accN
        # variable side
        nV = 0.0
        nL = np.zeros(s + 1)
        nN = np.zeros(s + 1)
        aE = QtE
        accL[:] = QtL
        accN[:] = QtN
        aV = QtV
        for k in range(2, lam.size):
            if k > 2:
                aV, aE = _nb_vn_op(aE, accL, accN, QtE, QtL, QtN, tL, tN)
                accL[:] = tL
                accN[:] = tN
            w = lam[k]
            if w > 0.0:
                A = 0.0
                C = 0.0
                for j in range(s):
                    A += accL[j]
                    C += accN[j]
                B = accL[s]
                D = accN[s]
                nV += w * (aV + (1.0 - p) * (A + B))
                for j in range(s):
                    nL[j + 1] += w * ((1.0 - p) * accN[j] + p * accL[j])
                    nN[j + 1] += w * p * accN[j]
                nL[1] += w * (1.0 - p) * (aE + D)
                nN[1] += w * p * (aE + B + D)
        PV, PE = _nb_normalize(nV, 0.0, nL, nN)
        PL[:] = nL
        PN[:] = nN
        u = 1.0 - PV
        if u < tol:
            return True, u, it
        if abs(prev - u) <= 1e-12 * max(u, 1e-300):
            flat += 1
            if flat >= 50:
                return False, u, it
        else:
            flat = 0
        prev = u
    return False, u, max_iters


# ---------------------------------------------------------------------------
# Single-value message-based decoders (LM1-MB, LM2-MB)
# ---------------------------------------------------------------------------

def de_mb_iterate(dd: DegreeDistribution, p: float, variant: str = "lm1",
                  max_iters: int = 5000, tol: float = 1e-10) -> tuple[bool, float, int]:
    """DE for value/status messages.

    Variable-to-check messages are verified (v), unverified with the correct
    value (c) or unverified with a wrong value (i). A check output is verified
    when all other inputs are verified and correct when all other inputs carry
    correct values.
    """
    if variant not in ("lm1", "lm2"):
        raise ValueError("variant must be 'lm1' or 'lm2'")
    v, c = 0.0, 1.0 - p
    u = 1.0
    prev = 1.0
    flat = 0
    for it in range(1, max_iters + 1):
        vt = dd.rho_at(v)
        ct = dd.rho_at(min(v + c, 1.0)) - vt
        it_ = max(1.0 - vt - ct, 0.0)
        c_new = (1.0 - p) * dd.lam_at(it_)
        if variant == "lm1":
            # wrong channel value survives unless some input is verified
            i_new = p * dd.lam_at(1.0 - vt)
        else:
            # ... or unless two inputs carry the same correct value
            i_new = p * (dd.lam_at(it_) + ct * eval_poly(dd, "lambda", 1, it_))
        v, c = 1.0 - i_new - c_new, c_new
        u = 1.0 - v
        if u < tol:
            return True, u, it
        if abs(prev - u) <= 1e-12 * u:
            flat += 1
            if flat >= 50:
                break
        else:
            flat = 0
        prev = u
    return False, u, it


def threshold_mb(dd: DegreeDistribution, variant: str = "lm1", tol: float = 5e-4) -> float:
    hi = min(1.0, 1.0 - rate(dd) + 1e-3)
    return bisect_threshold(lambda p: de_mb_iterate(dd, p, variant)[0], 0.0, hi, tol)
