"""Differential-equation analysis of the LM1-NB and LM2-NB peeling decoders.

States hold edge fractions normalized by the edge count of the original
graph. One removed variable node advances time by 1/E.

LM1 state: ``l[k]`` and ``r[k]`` (edges on correct / incorrect variable nodes
of residual degree k) and ``n[i, j]`` (edges on checks with i correct and j
incorrect residual edges).

LM2 state: ``l[k]``, ``n[i, j]`` and ``r[i, j, k]`` (edges on incorrect
variable nodes with i NIE, j IER2 and k IER1 edges). An NIE edge sits on a
check with two or more incorrect edges, an IER2 edge on a check of type
(i, 1) with i >= 1, and an IER1 edge on a check of type (0, 1).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import comb, factorial

import numba
import numpy as np

from .ensemble import DegreeDistribution, TannerGraph

EPS_DEN = 1e-12
EPS_STOP = 1e-8
DELTA_SUCC = 1e-6
BLOWUP = 10.0
CLAMP_TOL = 1e-9
MASS_STEP = 0.1


class IntegrationFault(RuntimeError):
    """Raised when a trajectory leaves the physically meaningful region."""


def _div(a, b):
    return a / b if b > EPS_DEN else 0.0


# ---------------------------------------------------------------------------
# States
# ---------------------------------------------------------------------------

@dataclass
class Lm1OdeState:
    l: np.ndarray  # (dv+1,)
    r: np.ndarray  # (dv+1,)
    n: np.ndarray  # (dc+1, dc+1)

    @property
    def e_l(self) -> float:
        return float(self.l.sum())

    @property
    def e_r(self) -> float:
        return float(self.r.sum())

    @property
    def a(self) -> float:
        k = np.arange(self.l.size)
        return _div(float(k @ self.l), self.e_l)

    @property
    def b(self) -> float:
        k = np.arange(self.r.size)
        return _div(float(k @ self.r), self.e_r)

    def move_mass(self) -> float:
        return float(self.n[1:, 0].sum() + self.n[0, 1])

    def weights(self) -> tuple[float, ...]:
        cer = float(self.n[1:, 0].sum())
        tot = cer + float(self.n[0, 1])
        if tot <= 0.0:
            return 0.0, 0.0
        return cer / tot, float(self.n[0, 1]) / tot

    def pack(self) -> np.ndarray:
        return np.concatenate([self.l, self.r, self.n.ravel()])

    def unpack(self, vec: np.ndarray) -> "Lm1OdeState":
        a, b = self.l.size, self.r.size
        return Lm1OdeState(vec[:a].copy(), vec[a:a + b].copy(), vec[a + b:].reshape(self.n.shape).copy())


@dataclass
class Lm2OdeState:
    l: np.ndarray  # (dv+1,)
    r: np.ndarray  # (dv+1, dv+1, dv+1)
    n: np.ndarray  # (dc+1, dc+1)

    @property
    def e_l(self) -> float:
        return float(self.l.sum())

    @property
    def e_r(self) -> float:
        return float(self.r.sum())

    @property
    def a(self) -> float:
        k = np.arange(self.l.size)
        return _div(float(k @ self.l), self.e_l)

    def _tot(self) -> np.ndarray:
        d = self.r.shape[0]
        i, j, k = np.indices((d, d, d))
        return i, j, k, i + j + k

    def eta_check(self) -> tuple[float, float, float]:
        n = self.n
        i, j = np.indices(n.shape)
        s = i + j
        frac = np.divide(j * n, s, out=np.zeros_like(n), where=s > 0)
        eta0 = float(frac[:, 2:].sum())
        eta1 = float(n[0, 1])
        eta2 = float(frac[1:, 1].sum())
        return eta0, eta1, eta2

    def eta_variable(self) -> tuple[float, float, float]:
        i, j, k, t = self._tot()
        w = np.divide(self.r, t, out=np.zeros_like(self.r), where=t > 0)
        return float((i * w).sum()), float((k * w).sum()), float((j * w).sum())

    def node_fractions(self) -> tuple[float, float, float, float]:
        """(s0, s1, s2, s3): NIE, CER, IER1 and IER2 node fractions."""
        i, j, k, t = self._tot()
        w = np.divide(self.r, t, out=np.zeros_like(self.r), where=t > 0)
        s0 = float(w[(k == 0) & (j <= 1)].sum())
        deg = np.arange(self.n.shape[0])
        s1 = float((self.n[1:, 0] / deg[1:]).sum())
        s2 = float(w[k >= 1].sum())
        s3 = float(w[j >= 2].sum())
        return s0, s1, s2, s3

    def move_mass(self) -> float:
        _, s1, s2, s3 = self.node_fractions()
        return s1 + s2 + s3

    def weights(self) -> tuple[float, ...]:
        _, s1, s2, s3 = self.node_fractions()
        tot = s1 + s2 + s3
        if tot <= 0.0:
            return 0.0, 0.0, 0.0
        return s1 / tot, s2 / tot, s3 / tot

    def pack(self) -> np.ndarray:
        return np.concatenate([self.l, self.r.ravel(), self.n.ravel()])

    def unpack(self, vec: np.ndarray) -> "Lm2OdeState":
        a, b = self.l.size, self.r.size
        return Lm2OdeState(vec[:a].copy(), vec[a:a + b].reshape(self.r.shape).copy(),
                           vec[a + b:].reshape(self.n.shape).copy())


# ---------------------------------------------------------------------------
# Initial conditions
# ---------------------------------------------------------------------------

def _check_init(dd: DegreeDistribution, p: float) -> np.ndarray:
    dc = dd.dc
    n = np.zeros((dc + 1, dc + 1))
    for i in range(dc + 1):
        for j in range(dc + 1 - i):
            if i + j > 0:
                n[i, j] = dd.rho[i + j] * comb(i + j, i) * (1 - p) ** i * p ** j
    return n


def _validate_p(p: float) -> None:
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must lie in [0, 1], got {p}")


def lm1_init(dd: DegreeDistribution, p: float) -> Lm1OdeState:
    _validate_p(p)
    lam = dd.lam[: dd.dv + 1].astype(float)
    return Lm1OdeState((1 - p) * lam, p * lam, _check_init(dd, p))


def socket_probabilities(n0: np.ndarray, p: float) -> tuple[float, float, float]:
    """(g0, g1, g2): probabilities that an incorrect variable socket carries an
    NIE, IER2 or IER1 edge at time zero."""
    if p <= 0.0:
        return 1.0, 0.0, 0.0
    i, j = np.indices(n0.shape)
    s = i + j
    frac = np.divide(j * n0, s, out=np.zeros_like(n0), where=s > 0)
    return float(frac[:, 2:].sum()) / p, float(frac[1:, 1].sum()) / p, float(n0[0, 1]) / p


def lm2_init(dd: DegreeDistribution, p: float) -> Lm2OdeState:
    _validate_p(p)
    dv = dd.dv
    n = _check_init(dd, p)
    g0, g1, g2 = socket_probabilities(n, p)
    r = np.zeros((dv + 1,) * 3)
    for i in range(dv + 1):
        for j in range(dv + 1 - i):
            for k in range(dv + 1 - i - j):
                d = i + j + k
                if d == 0:
                    continue
                multi = factorial(d) // (factorial(i) * factorial(j) * factorial(k))
                r[i, j, k] = p * dd.lam[d] * multi * g0 ** i * g1 ** j * g2 ** k
    lam = dd.lam[: dv + 1].astype(float)
    return Lm2OdeState((1 - p) * lam, r, n)


# ---------------------------------------------------------------------------
# Shared check-side pieces
# ---------------------------------------------------------------------------

def _cer_effect(l: np.ndarray, n: np.ndarray) -> tuple[np.ndarray, np.ndarray, float]:
    """CER contribution to dl and dn, plus a(t)."""
    e_l = l.sum()
    dl = np.zeros_like(l)
    dn = np.zeros_like(n)
    if e_l < EPS_DEN:
        return dl, dn, 0.0
    k = np.arange(l.size)
    a = float(k @ l) / e_l
    dl = -k * l / e_l
    i, j = np.indices(n.shape)
    s = i + j
    p1 = np.divide(n * i * (a - 1.0), s * e_l, out=np.zeros_like(n), where=s > 0)
    p1_up = np.zeros_like(p1)
    p1_up[:-1] = p1[1:]
    dn = (p1_up - p1) * s
    cer = n[1:, 0].sum()
    if cer > EPS_DEN:
        q = np.zeros(n.shape[0] + 1)
        q[1:-1] = n[1:, 0] / cer
        ii = np.arange(n.shape[0])
        dn[:, 0] += (q[ii + 1] - q[ii]) * ii
    return dl, dn, a


# ---------------------------------------------------------------------------
# LM1
# ---------------------------------------------------------------------------

def lm1_parts(state: Lm1OdeState) -> tuple[Lm1OdeState, Lm1OdeState]:
    """CER and IER1 contributions (before weighting by c1 and c2)."""
    l, r, n = state.l, state.r, state.n
    dl1, dn1, _ = _cer_effect(l, n)
    cer = Lm1OdeState(dl1, np.zeros_like(r), dn1)
    e_r = r.sum()
    dr2 = np.zeros_like(r)
    dn2 = np.zeros_like(n)
    if e_r >= EPS_DEN:
        k = np.arange(r.size)
        b = float(k @ r) / e_r
        dr2 = -k * r / e_r
        i, j = np.indices(n.shape)
        s = i + j
        p2 = np.divide(n * j * (b - 1.0), s * e_r, out=np.zeros_like(n), where=s > 0)
        p2_up = np.zeros_like(p2)
        p2_up[:, :-1] = p2[:, 1:]
        dn2 = (p2_up - p2) * s
        dn2[0, 1] -= 1.0
    ier = Lm1OdeState(np.zeros_like(l), dr2, dn2)
    return cer, ier


def lm1_derivative(state: Lm1OdeState) -> Lm1OdeState:
    c1, c2 = state.weights()
    cer, ier = lm1_parts(state)
    return Lm1OdeState(c1 * cer.l + c2 * ier.l, c1 * cer.r + c2 * ier.r, c1 * cer.n + c2 * ier.n)


# ---------------------------------------------------------------------------
# LM2
# ---------------------------------------------------------------------------

def _shift(x: np.ndarray, di: int, dj: int, dk: int) -> np.ndarray:
    """y[i, j, k] = x[i + di, j + dj, k + dk] with zero padding."""
    d = x.shape[0]
    y = np.zeros_like(x)
    src = [slice(max(o, 0), d + min(o, 0)) for o in (di, dj, dk)]
    dst = [slice(max(-o, 0), d + min(-o, 0)) for o in (di, dj, dk)]
    y[tuple(dst)] = x[tuple(src)]
    return y


def _edge_effects(n: np.ndarray, eta0: float, eta2: float):
    """Per-edge check-side effects u (NIE), v (IER2) and w (IER1)."""
    i, j = np.indices(n.shape)
    u = np.zeros_like(n)
    if eta0 >= EPS_DEN:
        s = i + j
        loss = -j * n / eta0
        n_up = np.zeros_like(n)
        n_up[:, :-1] = n[:, 1:]
        gain = np.divide((j + 1) * n_up * s, (s + 1) * eta0, out=np.zeros_like(n), where=s + 1 > 0)
        u[:, 2:] = loss[:, 2:] + gain[:, 2:]
        u[:, 1] = gain[:, 1]
    v = np.zeros_like(n)
    if eta2 >= EPS_DEN:
        ii = np.arange(1, n.shape[0])
        v[1:, 1] = -n[1:, 1] / eta2
        v[1:, 0] = ii * n[1:, 1] / ((ii + 1) * eta2)
    w = np.zeros_like(n)
    w[0, 1] = -1.0
    return u, v, w


def _reflect_effect(r: np.ndarray, n: np.ndarray, eta0: float) -> np.ndarray:
    """Per-NIE-edge change of r caused by the other edges of the hit check."""
    if eta0 < EPS_DEN:
        return np.zeros_like(r)
    d = r.shape[0]
    ii = np.arange(1, n.shape[0] - 1)
    hit_a = float((2.0 * n[1:-1, 2] / (ii + 2)).sum()) / eta0 if n.shape[0] > 2 else 0.0
    hit_b = float(n[0, 2]) / eta0 if n.shape[0] > 2 else 0.0
    i = np.arange(d)[:, None, None]
    loss = -i * r / eta0
    moved = (i + 1) * _shift(r, 1, 0, 0)  # (i+1) r[i+1, ., .]
    to_ier2 = _shift(moved, 0, -1, 0) / eta0  # from r[i+1, j-1, k]
    to_ier1 = _shift(moved, 0, 0, -1) / eta0  # from r[i+1, j, k-1]
    return hit_a * (loss + to_ier2) + hit_b * (loss + to_ier1)


def lm2_parts(state: Lm2OdeState) -> tuple[Lm2OdeState, Lm2OdeState, Lm2OdeState]:
    """CER, IER1 and IER2 contributions (before weighting)."""
    l, r, n = state.l, state.r, state.n
    eta0, _, eta2 = state.eta_check()
    i, j, k, tot = state._tot()
    dl1, dn1, a = _cer_effect(l, n)
    dr1 = np.zeros_like(r)
    e_l = l.sum()
    if e_l >= EPS_DEN and eta2 >= EPS_DEN:
        rate = (a - 1.0) * n[1, 1] / (2.0 * e_l)
        dr1 = rate * (-j * r + _shift(j * r, 0, 1, -1)) / eta2  # gain: (j+1) r[i, j+1, k-1]
    cer = Lm2OdeState(dl1, dr1, dn1)

    u, v, w = _edge_effects(n, eta0, eta2)
    refl = _reflect_effect(r, n, eta0)
    node = np.divide(r, tot, out=np.zeros_like(r), where=tot > 0)
    out = []
    for mask in (k >= 1, j >= 2):
        sel = np.where(mask, node, 0.0)
        s = sel.sum()
        if s < EPS_DEN:
            out.append(Lm2OdeState(np.zeros_like(l), np.zeros_like(r), np.zeros_like(n)))
            continue
        pr = sel / s
        ei, ej, ek = float((pr * i).sum()), float((pr * j).sum()), float((pr * k).sum())
        dn = ei * u + ej * v + ek * w
        dr = -pr * tot + ei * refl
        out.append(Lm2OdeState(np.zeros_like(l), dr, dn))
    return cer, out[0], out[1]


def lm2_derivative(state: Lm2OdeState) -> Lm2OdeState:
    c1, c2, c3 = state.weights()
    parts = lm2_parts(state)
    cs = (c1, c2, c3)
    return Lm2OdeState(sum(c * p.l for c, p in zip(cs, parts)),
                       sum(c * p.r for c, p in zip(cs, parts)),
                       sum(c * p.n for c, p in zip(cs, parts)))


# ---------------------------------------------------------------------------
# Integration
# ---------------------------------------------------------------------------

SYSTEMS = {
    "lm1": (lm1_init, lm1_derivative),
    "lm2": (lm2_init, lm2_derivative),
}


@dataclass
class OdeResult:
    success: bool
    p: float
    t_end: float
    e_r_final: float
    reason: str
    trajectory: list[tuple[float, ...]] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"success": self.success, "p": self.p, "t_end": self.t_end,
                "e_r_final": self.e_r_final, "reason": self.reason}


def _row(t: float, st) -> tuple[float, ...]:
    return (t, st.e_l, st.e_r, *st.weights())


def integrate(system: str, dd: DegreeDistribution, p: float, dt: float = 1e-4,
              eps_stop: float = EPS_STOP, delta_succ: float = DELTA_SUCC,
              t_max: float = 1.0, record_every: int = 0, mass_step: float = MASS_STEP,
              max_steps: int = 2_000_000) -> OdeResult:
    """RK4 from t = 0 until the move mass falls below ``eps_stop`` or
    ``t_max`` is reached. Success means the incorrect-edge fraction is below
    ``delta_succ`` at termination.

    The step is ``dt`` except where the move mass m is small: there the
    ratio between the move pools relaxes on a time scale of order m, so the
    step is capped at ``mass_step * m``. Without the cap a fixed step lets the
    trajectory bounce off m ~ dt instead of stopping.

    ``record_every`` > 0 stores (t, e_l, e_r, c1, c2[, c3]) every that many
    steps.
    """
    if not 0.0 < dt <= 1e-3:
        raise ValueError("dt must lie in (0, 1e-3]")
    if system not in SYSTEMS:
        raise ValueError(f"unknown system {system!r}")
    init, deriv = SYSTEMS[system]
    st = init(dd, p)
    mask = _structural_mask(st)

    def f(vec):
        # RK4 stages may overshoot zero near the stopping point
        return deriv(st.unpack(np.maximum(vec, 0.0))).pack()

    x = st.pack()
    t = 0.0
    steps = 0
    traj = [_row(t, st)] if record_every else []
    reason = "t_max"
    while t < t_max:
        cur = st.unpack(x)
        mass = cur.move_mass()
        if mass < eps_stop:
            reason = "stopped"
            break
        if steps >= max_steps:
            raise IntegrationFault("step budget exhausted")
        h = min(dt, mass_step * mass)
        k1 = f(x)
        k2 = f(x + 0.5 * h * k1)
        k3 = f(x + 0.5 * h * k2)
        k4 = f(x + h * k3)
        x = x + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        x[~mask] = 0.0
        x[x < 0.0] = 0.0  # round-off clamp
        if np.any(x > BLOWUP) or not np.all(np.isfinite(x)):
            raise IntegrationFault(f"state blow-up at t={t:.4f}")
        t += h
        steps += 1
        if record_every and steps % record_every == 0:
            traj.append(_row(t, st.unpack(x)))
    final = st.unpack(x)
    if record_every and (not traj or traj[-1][0] != t):
        traj.append(_row(t, final))
    e_r = final.e_r
    return OdeResult(e_r < delta_succ, p, t, e_r, reason, traj)


def _structural_mask(st) -> np.ndarray:
    """Entries that may be nonzero along a trajectory."""
    l = np.ones_like(st.l, dtype=bool)
    l[0] = False
    dc = st.n.shape[0] - 1
    i, j = np.indices(st.n.shape)
    n = (i + j >= 1) & (i + j <= dc)
    if st.r.ndim == 1:
        r = np.ones_like(st.r, dtype=bool)
        r[0] = False
        return Lm1OdeState(l, r, n).pack().astype(bool)
    dv = st.r.shape[0] - 1
    a, b, c = np.indices(st.r.shape)
    r = (a + b + c >= 1) & (a + b + c <= dv)
    return Lm2OdeState(l, r, n).pack().astype(bool)


def threshold_ode(system: str, dd: DegreeDistribution, tol: float = 1e-3, dt: float = 1e-4,
                  lo: float = 0.0, hi: float | None = None) -> float:
    """Bisection over integration success."""
    from .density_evolution import bisect_threshold

    if hi is None:
        hi = 1.0
    return bisect_threshold(lambda p: integrate(system, dd, p, dt=dt).success, lo, hi, tol)


# ---------------------------------------------------------------------------
# Peeling simulation (drift and trajectory oracle)
# ---------------------------------------------------------------------------
#
# Genie-typed peeling on an actual graph: a variable node is correct iff its
# received value equals the transmitted one. Variable degrees never change
# (edges leave only with their variable node); check types (i, j) count live
# correct and incorrect neighbours.

@numba.njit(cache=True)
def _lm1_counts(var_ptr, chk_ptr, chk_edges, edge_var, correct, alive, dv, dc):
    l = np.zeros(dv + 1)
    r = np.zeros(dv + 1)
    n = np.zeros((dc + 1, dc + 1))
    nv = var_ptr.size - 1
    for v in range(nv):
        if alive[v]:
            d = var_ptr[v + 1] - var_ptr[v]
            if correct[v]:
                l[d] += d
            else:
                r[d] += d
    nc = chk_ptr.size - 1
    for c in range(nc):
        ci = 0
        ii = 0
        for t in range(chk_ptr[c], chk_ptr[c + 1]):
            v = edge_var[chk_edges[t]]
            if alive[v]:
                if correct[v]:
                    ci += 1
                else:
                    ii += 1
        if ci + ii > 0:
            n[ci, ii] += ci + ii
    return l, r, n


@numba.njit(cache=True)
def _check_types(chk_ptr, chk_edges, edge_var, correct, alive):
    nc = chk_ptr.size - 1
    ci = np.zeros(nc, np.int64)
    ii = np.zeros(nc, np.int64)
    for c in range(nc):
        for t in range(chk_ptr[c], chk_ptr[c + 1]):
            v = edge_var[chk_edges[t]]
            if alive[v]:
                if correct[v]:
                    ci[c] += 1
                else:
                    ii[c] += 1
    return ci, ii


@numba.njit(cache=True)
def _lm1_drift(var_ptr, var_edges, edge_chk, chk_ptr, chk_edges, edge_var, correct, alive, dv, dc):
    """Exact expected one-step change (in edge counts) of the c-weighted
    LM1 peeling process from the given state."""
    ci, ii = _check_types(chk_ptr, chk_edges, edge_var, correct, alive)
    nc = ci.size
    cer_edges = 0.0
    ier_checks = 0.0
    for c in range(nc):
        if ii[c] == 0 and ci[c] > 0:
            cer_edges += ci[c]
        if ii[c] == 1 and ci[c] == 0:
            ier_checks += 1.0
    dl = np.zeros(dv + 1)
    dr = np.zeros(dv + 1)
    dn = np.zeros((dc + 1, dc + 1))
    tot = cer_edges + ier_checks
    if tot == 0.0:
        return dl, dr, dn
    c1 = cer_edges / tot
    c2 = ier_checks / tot
    nv = var_ptr.size - 1
    for v in range(nv):
        if not alive[v]:
            continue
        hits = 0.0
        for t in range(var_ptr[v], var_ptr[v + 1]):
            c = edge_chk[var_edges[t]]
            if correct[v] and ii[c] == 0:
                hits += 1.0
            if (not correct[v]) and ii[c] == 1 and ci[c] == 0:
                hits += 1.0
        if hits == 0.0:
            continue
        wgt = c1 * hits / cer_edges if correct[v] else c2 * hits / ier_checks
        d = var_ptr[v + 1] - var_ptr[v]
        if correct[v]:
            dl[d] -= wgt * d
        else:
            dr[d] -= wgt * d
        for t in range(var_ptr[v], var_ptr[v + 1]):
            c = edge_chk[var_edges[t]]
            a = ci[c]
            b = ii[c]
            dn[a, b] -= wgt * (a + b)
            if correct[v]:
                a -= 1
            else:
                b -= 1
            if a + b > 0:
                dn[a, b] += wgt * (a + b)
    return dl, dr, dn


@numba.njit(cache=True)
def _bag_set(bag, pos, size, c, member):
    if member and pos[c] < 0:
        bag[size] = c
        pos[c] = size
        return size + 1
    if (not member) and pos[c] >= 0:
        k = pos[c]
        last = bag[size - 1]
        bag[k] = last
        pos[last] = k
        pos[c] = -1
        return size - 1
    return size


@numba.njit(cache=True)
def _lm1_peel_run(var_ptr, var_edges, edge_chk, chk_ptr, chk_edges, edge_var, correct, seed,
                  stride, max_rows, max_steps):
    np.random.seed(seed)
    nv = var_ptr.size - 1
    nc = chk_ptr.size - 1
    alive = np.ones(nv, np.bool_)
    ci, ii = _check_types(chk_ptr, chk_edges, edge_var, correct, alive)
    dcmax = 0
    for c in range(nc):
        dcmax = max(dcmax, chk_ptr[c + 1] - chk_ptr[c])
    cer_bag = np.empty(nc, np.int64)
    cer_pos = -np.ones(nc, np.int64)
    ier_bag = np.empty(nc, np.int64)
    ier_pos = -np.ones(nc, np.int64)
    n_cer = 0
    n_ier = 0
    cer_edges = 0
    e_l = 0
    e_r = 0
    for v in range(nv):
        d = var_ptr[v + 1] - var_ptr[v]
        if correct[v]:
            e_l += d
        else:
            e_r += d
    for c in range(nc):
        if ii[c] == 0 and ci[c] > 0:
            n_cer = _bag_set(cer_bag, cer_pos, n_cer, c, True)
            cer_edges += ci[c]
        if ii[c] == 1 and ci[c] == 0:
            n_ier = _bag_set(ier_bag, ier_pos, n_ier, c, True)
    E = float(e_l + e_r)
    rows = np.zeros((max_rows, 5))
    nrow = 0
    steps = 0
    while True:
        tot = cer_edges + n_ier
        if steps % stride == 0 and nrow < max_rows:
            rows[nrow, 0] = steps / E
            rows[nrow, 1] = e_l / E
            rows[nrow, 2] = e_r / E
            if tot > 0:
                rows[nrow, 3] = cer_edges / tot
                rows[nrow, 4] = n_ier / tot
            nrow += 1
        if tot == 0 or steps == max_steps:
            break
        if np.random.random() * tot < cer_edges:
            while True:  # check chosen with probability proportional to its CER edges
                c = cer_bag[np.random.randint(n_cer)]
                if np.random.random() * dcmax < ci[c]:
                    break
            k = np.random.randint(ci[c])
            v = -1
            for t in range(chk_ptr[c], chk_ptr[c + 1]):
                u = edge_var[chk_edges[t]]
                if alive[u]:
                    if k == 0:
                        v = u
                        break
                    k -= 1
        else:
            c = ier_bag[np.random.randint(n_ier)]
            v = -1
            for t in range(chk_ptr[c], chk_ptr[c + 1]):
                u = edge_var[chk_edges[t]]
                if alive[u]:
                    v = u
                    break
        alive[v] = False
        d = var_ptr[v + 1] - var_ptr[v]
        if correct[v]:
            e_l -= d
        else:
            e_r -= d
        for t in range(var_ptr[v], var_ptr[v + 1]):
            c = edge_chk[var_edges[t]]
            was_cer = ii[c] == 0 and ci[c] > 0
            if was_cer:
                cer_edges -= ci[c]
            if correct[v]:
                ci[c] -= 1
            else:
                ii[c] -= 1
            is_cer = ii[c] == 0 and ci[c] > 0
            if is_cer:
                cer_edges += ci[c]
            n_cer = _bag_set(cer_bag, cer_pos, n_cer, c, is_cer)
            n_ier = _bag_set(ier_bag, ier_pos, n_ier, c, ii[c] == 1 and ci[c] == 0)
        steps += 1
    return rows[:nrow], steps, e_r / E, alive


@numba.njit(cache=True)
def _incorrect_class(ci, ii):
    """0 = NIE, 1 = IER2, 2 = IER1 for an incorrect edge on a check (ci, ii)."""
    if ii >= 2:
        return 0
    if ci >= 1:
        return 1
    return 2


@numba.njit(cache=True)
def _lm2_types(var_ptr, var_edges, edge_chk, correct, alive, ci, ii):
    nv = var_ptr.size - 1
    typ = np.zeros((nv, 3), np.int64)
    for v in range(nv):
        if alive[v] and not correct[v]:
            for t in range(var_ptr[v], var_ptr[v + 1]):
                c = edge_chk[var_edges[t]]
                typ[v, _incorrect_class(ci[c], ii[c])] += 1
    return typ


@numba.njit(cache=True)
def _lm2_counts(var_ptr, var_edges, edge_chk, chk_ptr, chk_edges, edge_var, correct, alive, dv, dc):
    ci, ii = _check_types(chk_ptr, chk_edges, edge_var, correct, alive)
    typ = _lm2_types(var_ptr, var_edges, edge_chk, correct, alive, ci, ii)
    l = np.zeros(dv + 1)
    r = np.zeros((dv + 1, dv + 1, dv + 1))
    n = np.zeros((dc + 1, dc + 1))
    for v in range(var_ptr.size - 1):
        if alive[v]:
            d = var_ptr[v + 1] - var_ptr[v]
            if correct[v]:
                l[d] += d
            else:
                r[typ[v, 0], typ[v, 1], typ[v, 2]] += d
    for c in range(ci.size):
        if ci[c] + ii[c] > 0:
            n[ci[c], ii[c]] += ci[c] + ii[c]
    return l, r, n


@numba.njit(cache=True)
def _lm2_drift(var_ptr, var_edges, edge_chk, chk_ptr, chk_edges, edge_var, correct, alive, dv, dc):
    """Exact expected one-step change (in edge counts) of the LM2 peeling
    process that picks CER, IER1 or IER2 with weights proportional to the
    CER check count and the IER1 / IER2 node counts."""
    ci, ii = _check_types(chk_ptr, chk_edges, edge_var, correct, alive)
    typ = _lm2_types(var_ptr, var_edges, edge_chk, correct, alive, ci, ii)
    nv = var_ptr.size - 1
    nc = ci.size
    s1 = 0.0
    cer_edges = 0.0
    for c in range(nc):
        if ii[c] == 0 and ci[c] > 0:
            s1 += 1.0
            cer_edges += ci[c]
    s2 = 0.0
    s3 = 0.0
    for v in range(nv):
        if alive[v] and not correct[v]:
            if typ[v, 2] >= 1:
                s2 += 1.0
            if typ[v, 1] >= 2:
                s3 += 1.0
    dl = np.zeros(dv + 1)
    dr = np.zeros((dv + 1, dv + 1, dv + 1))
    dn = np.zeros((dc + 1, dc + 1))
    tot = s1 + s2 + s3
    if tot == 0.0:
        return dl, dr, dn
    for v in range(nv):
        if not alive[v]:
            continue
        wgt = 0.0
        if correct[v]:
            hits = 0.0
            for t in range(var_ptr[v], var_ptr[v + 1]):
                if ii[edge_chk[var_edges[t]]] == 0:
                    hits += 1.0
            if hits > 0.0:
                wgt = s1 / tot * hits / cer_edges
        else:
            if typ[v, 2] >= 1:
                wgt += s2 / tot / s2
            if typ[v, 1] >= 2:
                wgt += s3 / tot / s3
        if wgt == 0.0:
            continue
        d = var_ptr[v + 1] - var_ptr[v]
        if correct[v]:
            dl[d] -= wgt * d
        else:
            dr[typ[v, 0], typ[v, 1], typ[v, 2]] -= wgt * d
        for t in range(var_ptr[v], var_ptr[v + 1]):
            c = edge_chk[var_edges[t]]
            a = ci[c]
            b = ii[c]
            dn[a, b] -= wgt * (a + b)
            a2 = a - 1 if correct[v] else a
            b2 = b if correct[v] else b - 1
            if a2 + b2 > 0:
                dn[a2, b2] += wgt * (a2 + b2)
            if b2 == 0:
                continue
            # incorrect edges of the other neighbours may change class
            old = _incorrect_class(a, b)
            new = _incorrect_class(a2, b2)
            if old == new:
                continue
            for s in range(chk_ptr[c], chk_ptr[c + 1]):
                u = edge_var[chk_edges[s]]
                if u == v or not alive[u] or correct[u]:
                    continue
                du = var_ptr[u + 1] - var_ptr[u]
                x0, x1, x2 = typ[u, 0], typ[u, 1], typ[u, 2]
                dr[x0, x1, x2] -= wgt * du
                if old == 0:
                    x0 -= 1
                elif old == 1:
                    x1 -= 1
                else:
                    x2 -= 1
                if new == 0:
                    x0 += 1
                elif new == 1:
                    x1 += 1
                else:
                    x2 += 1
                dr[x0, x1, x2] += wgt * du
    return dl, dr, dn


def _graph_arrays(graph: TannerGraph):
    edge_var = np.asarray(graph.var, dtype=np.int64)
    edge_chk = np.asarray(graph.chk, dtype=np.int64)
    return (graph.var_ptr, graph.var_edges, edge_chk, graph.chk_ptr, graph.chk_edges, edge_var)


def _normalize(graph: TannerGraph, *arrs):
    E = float(graph.n_edges)
    return tuple(a / E for a in arrs)


def lm1_graph_state(graph: TannerGraph, correct, alive=None) -> Lm1OdeState:
    """Empirical LM1 state of a (partially peeled) graph."""
    if alive is None:
        alive = np.ones(graph.n, dtype=bool)
    va, ve, ec, cp, ce, ev = _graph_arrays(graph)
    dv = int(np.diff(va).max())
    dc = int(np.diff(cp).max())
    l, r, n = _lm1_counts(va, cp, ce, ev, np.asarray(correct, bool), np.asarray(alive, bool), dv, dc)
    return Lm1OdeState(*_normalize(graph, l, r, n))


def lm1_simulated_drift(graph: TannerGraph, correct, alive=None) -> Lm1OdeState:
    """Exact expected one-step change of the LM1 peeling process, normalized
    per unit of ODE time (one step is 1/E)."""
    if alive is None:
        alive = np.ones(graph.n, dtype=bool)
    va, ve, ec, cp, ce, ev = _graph_arrays(graph)
    dv = int(np.diff(va).max())
    dc = int(np.diff(cp).max())
    dl, dr, dn = _lm1_drift(va, ve, ec, cp, ce, ev, np.asarray(correct, bool), np.asarray(alive, bool), dv, dc)
    return Lm1OdeState(dl, dr, dn)


@dataclass
class PeelingRun:
    trajectory: np.ndarray  # columns t, e_l, e_r, c1, c2
    steps: int
    e_r_final: float
    alive: np.ndarray


def simulate_lm1_peeling(graph: TannerGraph, correct, seed: int = 0, stride: int = 1000,
                        max_steps: int = -1) -> PeelingRun:
    """Run the c-weighted random LM1 peeling process until it stalls (or for
    ``max_steps`` steps)."""
    va, ve, ec, cp, ce, ev = _graph_arrays(graph)
    max_rows = graph.n // stride + 2
    rows, steps, er, alive = _lm1_peel_run(va, ve, ec, cp, ce, ev, np.asarray(correct, bool), int(seed),
                                           int(stride), int(max_rows), int(max_steps))
    return PeelingRun(rows, int(steps), float(er), alive)


def lm2_graph_state(graph: TannerGraph, correct, alive=None) -> Lm2OdeState:
    """Empirical LM2 state of a (partially peeled) graph."""
    if alive is None:
        alive = np.ones(graph.n, dtype=bool)
    va, ve, ec, cp, ce, ev = _graph_arrays(graph)
    dv = int(np.diff(va).max())
    dc = int(np.diff(cp).max())
    l, r, n = _lm2_counts(va, ve, ec, cp, ce, ev, np.asarray(correct, bool), np.asarray(alive, bool), dv, dc)
    return Lm2OdeState(*_normalize(graph, l, r, n))


def lm2_simulated_drift(graph: TannerGraph, correct, alive=None) -> Lm2OdeState:
    """Exact expected one-step change of the LM2 peeling process."""
    if alive is None:
        alive = np.ones(graph.n, dtype=bool)
    va, ve, ec, cp, ce, ev = _graph_arrays(graph)
    dv = int(np.diff(va).max())
    dc = int(np.diff(cp).max())
    dl, dr, dn = _lm2_drift(va, ve, ec, cp, ce, ev, np.asarray(correct, bool), np.asarray(alive, bool), dv, dc)
    return Lm2OdeState(dl, dr, dn)
