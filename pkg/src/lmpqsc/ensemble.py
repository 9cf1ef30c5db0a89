"""Degree distributions and random Tanner-graph sampling."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .galois import GF2m, gf


class EnsembleError(ValueError):
    pass


@dataclass(frozen=True)
class DegreeDistribution:
    """Edge-perspective pair (lambda, rho).

    ``lam[k]`` is the fraction of edges attached to degree-k variable nodes,
    so lambda(x) = sum_k lam[k] x^(k-1). Same layout for ``rho``. Index 0 and 1
    of ``lam`` are always zero.
    """

    lam: np.ndarray
    rho: np.ndarray

    def __post_init__(self):
        lam = np.asarray(self.lam, dtype=float)
        rho = np.asarray(self.rho, dtype=float)
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "rho", rho)
        for name, v in (("lambda", lam), ("rho", rho)):
            if v.ndim != 1 or v.size < 3:
                raise EnsembleError(f"{name} must be a 1-d coefficient vector indexed by degree")
            if np.any(v < 0):
                raise EnsembleError(f"{name} has negative coefficients")
            if abs(v.sum() - 1.0) > 1e-12:
                raise EnsembleError(f"{name} coefficients sum to {v.sum():.15g}, not 1")
        if lam[0] != 0 or lam[1] != 0:
            raise EnsembleError("lambda must have no degree-0/1 variable nodes")
        if rho[0] != 0:
            raise EnsembleError("rho must have no degree-0 check nodes")

    # construction -----------------------------------------------------------
    @classmethod
    def from_pairs(cls, lam_pairs, rho_pairs, normalize: bool = False) -> "DegreeDistribution":
        """Build from [[degree, coeff], ...] lists (or dicts)."""
        def vec(pairs):
            items = list(pairs.items()) if isinstance(pairs, dict) else [tuple(p) for p in pairs]
            dmax = max(int(d) for d, _ in items)
            v = np.zeros(max(dmax + 1, 3))
            for d, c in items:
                v[int(d)] += float(c)
            if normalize:
                v = v / v.sum()
            return v
        return cls(vec(lam_pairs), vec(rho_pairs))

    @classmethod
    def regular(cls, dv: int, dc: int) -> "DegreeDistribution":
        return cls.from_pairs({dv: 1.0}, {dc: 1.0})

    def to_pairs(self) -> dict:
        return {
            "lambda": [[int(k), float(c)] for k, c in enumerate(self.lam) if c > 0],
            "rho": [[int(k), float(c)] for k, c in enumerate(self.rho) if c > 0],
        }

    # basic attributes ------------------------------------------------------
    @property
    def dv(self) -> int:
        return int(np.nonzero(self.lam)[0].max())

    @property
    def dc(self) -> int:
        return int(np.nonzero(self.rho)[0].max())

    def lam_at(self, x: float) -> float:
        return eval_poly(self, "lambda", 0, x)

    def rho_at(self, x: float) -> float:
        return eval_poly(self, "rho", 0, x)

    def node_fractions(self, which: str = "lambda") -> np.ndarray:
        """Node-perspective degree fractions (index = degree)."""
        c = self.lam if which == "lambda" else self.rho
        k = np.arange(c.size)
        w = np.divide(c, k, out=np.zeros_like(c), where=k > 0)
        return w / w.sum()

    def mu(self) -> float:
        """lambda_2 * rho'(1), the mean number of degree-2 cycles scale."""
        return float(self.lam[2] * eval_poly(self, "rho", 1, 1.0))


def _coeffs(dd: DegreeDistribution, which: str) -> np.ndarray:
    if which in ("lambda", "lam", "λ"):
        return dd.lam
    if which in ("rho", "ρ"):
        return dd.rho
    raise ValueError(f"unknown polynomial {which!r}")


def eval_poly(dd: DegreeDistribution, which: str, order: int, x):
    """Evaluate lambda/rho or their first/second derivative at x.

    The polynomial is sum_k c_k x^(k-1).
    """
    c = _coeffs(dd, which)
    if order not in (0, 1, 2):
        raise ValueError("only derivative orders 0, 1, 2 are supported")
    x = np.asarray(x, dtype=float)
    k = np.arange(c.size)
    e = k - 1
    if order == 0:
        fac = np.ones_like(c)
    elif order == 1:
        fac = e.astype(float)
    else:
        fac = (e * (e - 1)).astype(float)
    pw = np.maximum(e - order, 0)
    mask = (c > 0) & (fac != 0)
    terms = (c * fac)[mask] * np.power.outer(x, pw[mask])
    out = terms.sum(axis=-1)
    return float(out) if out.ndim == 0 else out


def eval_derivative(dd: DegreeDistribution, which: str, order: int, x):
    return eval_poly(dd, which, order, x)


def rate(dd: DegreeDistribution) -> float:
    """Design rate 1 - (sum rho_k/k) / (sum lambda_k/k)."""
    k_l = np.arange(dd.lam.size)
    k_r = np.arange(dd.rho.size)
    il = np.sum(dd.lam[1:] / k_l[1:])
    ir = np.sum(dd.rho[1:] / k_r[1:])
    return float(1.0 - ir / il)


# ---------------------------------------------------------------------------
# Tanner graphs
# ---------------------------------------------------------------------------

@dataclass
class TannerGraph:
    """Bipartite graph stored as an edge list plus CSR adjacency.

    Edge e joins variable ``var[e]`` and check ``chk[e]`` with nonzero field
    weight ``weight[e]``. ``var_edges[var_ptr[v]:var_ptr[v+1]]`` lists the
    edges of variable v; likewise for checks.
    """

    n: int
    m: int
    var: np.ndarray
    chk: np.ndarray
    weight: np.ndarray
    field: GF2m
    var_ptr: np.ndarray = field(init=False, repr=False)
    var_edges: np.ndarray = field(init=False, repr=False)
    chk_ptr: np.ndarray = field(init=False, repr=False)
    chk_edges: np.ndarray = field(init=False, repr=False)
    _winv: np.ndarray | None = field(init=False, repr=False, default=None)

    def __post_init__(self):
        self.var = np.ascontiguousarray(self.var, dtype=np.int64)
        self.chk = np.ascontiguousarray(self.chk, dtype=np.int64)
        self.weight = np.ascontiguousarray(self.weight, dtype=np.uint64)
        if np.any(self.weight == 0):
            raise EnsembleError("edge weights must be nonzero")
        self.var_ptr, self.var_edges = _csr(self.var, self.n)
        self.chk_ptr, self.chk_edges = _csr(self.chk, self.m)

    @property
    def weight_inv(self) -> np.ndarray:
        """Inverse edge weights, computed once per graph."""
        if self._winv is None:
            self._winv = self.field.inv_array(self.weight)
        return self._winv

    @property
    def n_edges(self) -> int:
        return int(self.var.size)

    @property
    def var_degree(self) -> np.ndarray:
        return np.diff(self.var_ptr)

    @property
    def chk_degree(self) -> np.ndarray:
        return np.diff(self.chk_ptr)

    def to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("var,check,weight_hex\n")
            for v, c, w in zip(self.var, self.chk, self.weight):
                fh.write(f"{v},{c},{int(w):x}\n")


def _csr(owner: np.ndarray, count: int) -> tuple[np.ndarray, np.ndarray]:
    order = np.argsort(owner, kind="stable")
    ptr = np.zeros(count + 1, dtype=np.int64)
    np.cumsum(np.bincount(owner, minlength=count), out=ptr[1:])
    return ptr, order.astype(np.int64)


def _largest_remainder(weights: np.ndarray, total: int) -> np.ndarray:
    raw = weights / weights.sum() * total
    base = np.floor(raw).astype(np.int64)
    short = total - int(base.sum())
    if short > 0:
        order = np.argsort(-(raw - base), kind="stable")
        base[order[:short]] += 1
    return base


def degree_sequences(dd: DegreeDistribution, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Integer variable/check degree sequences realizing ``dd`` on n nodes.

    Node counts per degree use the largest-remainder method. The check side is
    then patched one socket at a time on its highest-degree nodes so that both
    sides carry the same number of sockets; a regular check side that cannot
    grow gets one extra node holding the remainder.
    """
    kv = np.arange(dd.lam.size)
    kc = np.arange(dd.rho.size)
    nv = _largest_remainder(np.divide(dd.lam, np.maximum(kv, 1)) * (kv > 0), n)
    n_edges = int(np.sum(nv * kv))
    ratio = np.sum(dd.rho[1:] / kc[1:]) / np.sum(dd.lam[1:] / kv[1:])
    m = max(int(round(n * ratio)), 1)
    nc = _largest_remainder(np.divide(dd.rho, np.maximum(kc, 1)) * (kc > 0), m)
    vdeg = np.repeat(kv, nv)
    cdeg = list(np.repeat(kc, nc)[::-1])  # highest degrees first
    dc = dd.dc
    while True:
        diff = n_edges - int(sum(cdeg))
        if diff == 0:
            break
        if diff > 0:
            room = [i for i, d in enumerate(cdeg) if d < dc]
            if room:
                room.sort(key=lambda i: -cdeg[i])
                for i in room[:diff]:
                    cdeg[i] += 1
            else:
                # regular check side: one extra node carries the remainder
                cdeg.append(min(max(diff, 2), dc))
        else:
            high = sorted((i for i, d in enumerate(cdeg) if d > 2), key=lambda i: -cdeg[i])
            if not high:
                raise EnsembleError("degree rounding infeasible")
            for i in high[: -diff]:
                cdeg[i] -= 1
    cdeg = np.array(sorted(cdeg, reverse=True), dtype=np.int64)
    return vdeg, cdeg


def count_short_cycles(var: np.ndarray, chk: np.ndarray, n: int) -> tuple[int, int]:
    """Return (#repeated edges, #4-cycles) by pairwise scan over checks."""
    key = chk * n + var
    _, mult = np.unique(key, return_counts=True)
    repeated = int(np.sum(mult - 1))
    pairs = _check_var_pairs(var, chk, n)
    _, cnt = np.unique(pairs, return_counts=True)
    cycles = int(np.sum(cnt * (cnt - 1) // 2))
    return repeated, cycles


def _check_var_pairs(var, chk, n, return_edges: bool = False):
    """All unordered variable pairs (u < v) sharing a check, encoded u*n+v."""
    order = np.lexsort((var, chk))
    c_sorted, v_sorted = chk[order], var[order]
    starts = np.r_[0, np.nonzero(np.diff(c_sorted))[0] + 1]
    ends = np.r_[starts[1:], c_sorted.size]
    deg = ends - starts
    keys, e1 = [], []
    for d in np.unique(deg):
        if d < 2:
            continue
        s = starts[deg == d]
        iu, ju = np.triu_indices(d, 1)
        a = v_sorted[s[:, None] + iu[None, :]]
        b = v_sorted[s[:, None] + ju[None, :]]
        lo, hi = np.minimum(a, b), np.maximum(a, b)
        keys.append((lo * n + hi).ravel())
        e1.append(order[(s[:, None] + ju[None, :])].ravel())
    if not keys:
        empty = np.zeros(0, dtype=np.int64)
        return (empty, empty) if return_edges else empty
    keys = np.concatenate(keys)
    if return_edges:
        return keys, np.concatenate(e1)
    return keys


def _bad_edges(var, chk, n) -> np.ndarray:
    """Edges participating in a repeated edge or a 4-cycle (one per defect)."""
    key = chk * n + var
    order = np.argsort(key, kind="stable")
    ks = key[order]
    dup = order[1:][ks[1:] == ks[:-1]]
    pairs, edge = _check_var_pairs(var, chk, n, return_edges=True)
    o = np.argsort(pairs, kind="stable")
    ps = pairs[o]
    cyc = edge[o][1:][ps[1:] == ps[:-1]]
    return np.unique(np.r_[dup, cyc])


def sample_graph(dd: DegreeDistribution, n: int, seed=None, girth_filter: bool = True,
                 field: GF2m | int = 32, max_swaps_factor: int = 100) -> TannerGraph:
    """Configuration-model Tanner graph with i.i.d. nonzero edge weights.

    With ``girth_filter`` the graph has no repeated edges and no 4-cycles;
    defects are removed by swapping the check endpoint of an offending edge
    with that of a uniformly chosen edge, within a budget of
    ``max_swaps_factor`` times the edge count. A configuration that is still
    defective after 10 swaps per edge is reshuffled.
    """
    fld = gf(field) if isinstance(field, int) else field
    rng = np.random.default_rng(seed)
    vdeg, cdeg = degree_sequences(dd, n)
    var = np.repeat(np.arange(n, dtype=np.int64), vdeg)
    chk = np.repeat(np.arange(cdeg.size, dtype=np.int64), cdeg)
    n_edges = var.size
    base = chk
    chk = base[rng.permutation(n_edges)]
    if girth_filter:
        # random-swap repair; a stuck configuration is reshuffled from scratch
        budget = max_swaps_factor * n_edges
        used = 0
        since_restart = 0
        while True:
            bad = _bad_edges(var, chk, n)
            if bad.size == 0:
                break
            used += bad.size
            since_restart += bad.size
            if used > budget:
                raise EnsembleError("4-cycle repair budget exhausted")
            if since_restart > 10 * n_edges:
                chk = base[rng.permutation(n_edges)]
                since_restart = 0
                continue
            partner = rng.integers(0, n_edges, size=bad.size)
            # sequential swaps so that overlapping pairs stay consistent
            for a, b in zip(bad, partner):
                chk[a], chk[b] = chk[b], chk[a]
    weights = fld.uniform_nonzero(rng, n_edges)
    return TannerGraph(n=n, m=int(cdeg.size), var=var, chk=chk, weight=weights, field=fld)
