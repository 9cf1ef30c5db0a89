"""Differential-evolution search over degree distributions.

Candidates are coefficient vectors over the allowed variable degrees followed
by the allowed check degrees. Every trial vector is repaired onto the
probability simplex and onto the target rate before it is scored, so the
whole population stays feasible.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import density_evolution as de
from . import ode_analysis
from .ensemble import DegreeDistribution, rate

OBJECTIVES = ("bounded_de", "unbounded_de", "ode_lm1", "ode_lm2", "mb_lm1", "mb_lm2")
RATE_TOL = 1e-6


class OptimizerError(ValueError):
    pass


@dataclass(frozen=True)
class OptimizerConfig:
    objective: str = "bounded_de"
    rate_target: float = 0.5
    lam_degrees: tuple[int, ...] = (2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15)
    rho_degrees: tuple[int, ...] = (3, 4, 5, 6, 7, 8, 9)
    s_max: int = 1
    population: int = 40
    F: float = 0.5
    CR: float = 0.9
    generations: int = 200
    seed: int = 0
    search_tol: float = 2e-3
    final_tol: float = 5e-4
    anchor: DegreeDistribution | None = None

    def __post_init__(self):
        if self.objective not in OBJECTIVES:
            raise OptimizerError(f"unknown objective {self.objective!r}")
        if self.population < 8:
            raise OptimizerError("population must be >= 8")
        if not 0.0 < self.F <= 1.0:
            raise OptimizerError("F must lie in (0, 1]")
        if not 0.0 <= self.CR <= 1.0:
            raise OptimizerError("CR must lie in [0, 1]")
        if not 0.0 < self.rate_target < 1.0:
            raise OptimizerError("rate_target must lie in (0, 1)")
        if not self.lam_degrees or min(self.lam_degrees) < 2:
            raise OptimizerError("variable degrees must be >= 2")
        if not self.rho_degrees or min(self.rho_degrees) < 2:
            raise OptimizerError("check degrees must be >= 2")
        object.__setattr__(self, "lam_degrees", tuple(sorted(set(int(d) for d in self.lam_degrees))))
        object.__setattr__(self, "rho_degrees", tuple(sorted(set(int(d) for d in self.rho_degrees))))

    @property
    def dim(self) -> int:
        return len(self.lam_degrees) + len(self.rho_degrees)


# ---------------------------------------------------------------------------
# Encoding and repair
# ---------------------------------------------------------------------------

def _inv(degrees) -> np.ndarray:
    return 1.0 / np.asarray(degrees, dtype=float)


def encode(dd: DegreeDistribution, cfg: OptimizerConfig) -> np.ndarray:
    lam = np.array([dd.lam[d] if d < dd.lam.size else 0.0 for d in cfg.lam_degrees])
    rho = np.array([dd.rho[d] if d < dd.rho.size else 0.0 for d in cfg.rho_degrees])
    return np.concatenate([lam, rho])


def decode_vector(vec: np.ndarray, cfg: OptimizerConfig) -> DegreeDistribution:
    nl = len(cfg.lam_degrees)
    lam = np.zeros(max(cfg.lam_degrees) + 1)
    rho = np.zeros(max(cfg.rho_degrees) + 1)
    lam[list(cfg.lam_degrees)] = vec[:nl]
    rho[list(cfg.rho_degrees)] = vec[nl:]
    lam /= lam.sum()
    rho /= rho.sum()
    return DegreeDistribution(lam, rho)


def _rate_gap(lam: np.ndarray, rho: np.ndarray, cfg: OptimizerConfig) -> float:
    """sum rho_k/k - (1 - R) sum lam_k/k; zero exactly at the target rate.
    Linear in the coefficients, which makes blending solvable in closed form."""
    return float(rho @ _inv(cfg.rho_degrees) - (1.0 - cfg.rate_target) * (lam @ _inv(cfg.lam_degrees)))


def _unit(n: int, i: int) -> np.ndarray:
    e = np.zeros(n)
    e[i] = 1.0
    return e


def _blend_to_zero(x: np.ndarray, anchor: np.ndarray, g_x: float, g_a: float) -> np.ndarray | None:
    if g_x == 0.0:
        return x
    if g_a == 0.0 or np.sign(g_a) == np.sign(g_x):
        return None
    t = g_x / (g_x - g_a)
    return (1.0 - t) * x + t * anchor


def default_anchor(cfg: OptimizerConfig) -> np.ndarray:
    """A feasible vector built from at most two vertices (single variable
    degree, single check degree) of the search box. The rate gap is jointly
    linear, so blending a vertex on each side of the target hits it exactly.
    Degree 3 on the variable side is preferred when allowed."""
    nl, nr = len(cfg.lam_degrees), len(cfg.rho_degrees)
    verts = []
    for li in range(nl):
        for ri in range(nr):
            x = np.concatenate([_unit(nl, li), _unit(nr, ri)])
            g = _rate_gap(x[:nl], x[nl:], cfg)
            verts.append((cfg.lam_degrees[li] != 3, abs(g), g, x))
    verts.sort(key=lambda v: (v[0], v[1]))
    for _, _, g, x in verts:
        if g == 0.0:
            return x
        for _, _, g2, y in verts:
            mixed = _blend_to_zero(x, y, g, g2)
            if mixed is not None:
                return mixed
    raise OptimizerError("no degree distribution meets the rate target under the degree caps")


def repair(raw: np.ndarray, cfg: OptimizerConfig, anchor: np.ndarray | None = None) -> np.ndarray | None:
    """Project a raw vector onto the simplex and the target rate.

    Negatives are clipped and each side renormalized. The check side is then
    blended toward the extreme check distribution (all mass on the lowest or
    highest allowed degree) that pushes the rate back to target; the rate gap
    is linear in the coefficients so the blend weight is exact. If the check
    side alone cannot reach the target, the variable side is blended toward
    its extreme as well. Returns None when the target is unreachable.
    """
    if anchor is None:
        anchor = default_anchor(cfg) if cfg.anchor is None else encode(cfg.anchor, cfg)
    nl, nr = len(cfg.lam_degrees), len(cfg.rho_degrees)
    x = np.clip(np.asarray(raw, dtype=float), 0.0, None)
    lam, rho = x[:nl], x[nl:]
    if lam.sum() <= 0.0 or rho.sum() <= 0.0:
        return anchor.copy()
    lam = lam / lam.sum()
    rho = rho / rho.sum()
    g = _rate_gap(lam, rho, cfg)
    if abs(g) < 1e-15:
        return np.concatenate([lam, rho])
    # g > 0: rate too low, push checks to higher degree (smaller sum rho/k)
    r_ext = _unit(nr, nr - 1 if g > 0 else 0)
    fixed = _blend_to_zero(rho, r_ext, g, _rate_gap(lam, r_ext, cfg))
    if fixed is not None:
        rho = fixed
    else:
        rho = r_ext
        g = _rate_gap(lam, rho, cfg)
        l_ext = _unit(nl, 0 if g > 0 else nl - 1)
        fixed = _blend_to_zero(lam, l_ext, g, _rate_gap(l_ext, rho, cfg))
        if fixed is None:
            return None
        lam = fixed
    lam = np.clip(lam, 0.0, None)
    rho = np.clip(rho, 0.0, None)
    out = np.concatenate([lam / lam.sum(), rho / rho.sum()])
    dd = decode_vector(out, cfg)
    if abs(rate(dd) - cfg.rate_target) >= RATE_TOL:
        return None
    return out


# ---------------------------------------------------------------------------
# Objectives
# ---------------------------------------------------------------------------

def converges(dd: DegreeDistribution, p: float, cfg: OptimizerConfig) -> bool:
    obj = cfg.objective
    if obj == "bounded_de":
        return de.de_bounded_converges(dd, p, cfg.s_max)
    if obj == "unbounded_de":
        return p < de.threshold_unbounded(dd)
    if obj in ("mb_lm1", "mb_lm2"):
        return de.de_mb_iterate(dd, p, obj[3:])[0]
    return ode_analysis.integrate(obj[4:], dd, p).success


def threshold(dd: DegreeDistribution, cfg: OptimizerConfig, tol: float, lo: float = 0.0) -> float:
    if cfg.objective == "unbounded_de":
        return de.threshold_unbounded(dd)
    hi = min(1.0, 1.0 - rate(dd) + 1e-3)
    if lo >= hi:
        return lo
    return de.bisect_threshold(lambda p: converges(dd, p, cfg), lo, hi, tol)


# ---------------------------------------------------------------------------
# Search
# ---------------------------------------------------------------------------

@dataclass
class OptimizerResult:
    best_dd: DegreeDistribution
    best_threshold: float
    history: list[tuple[int, float]] = field(default_factory=list)
    evaluations: int = 0

    def to_dict(self) -> dict:
        return {"best_threshold": self.best_threshold, "ensemble": self.best_dd.to_pairs(),
                "evaluations": self.evaluations,
                "history": [{"generation": g, "best_threshold": t} for g, t in self.history]}


class _Scorer:
    """Threshold evaluation with a cache keyed on coefficients rounded to a
    1e-6 grid."""

    def __init__(self, cfg: OptimizerConfig):
        self.cfg = cfg
        self.cache: dict[tuple, float] = {}
        self.evaluations = 0

    @staticmethod
    def key(vec: np.ndarray) -> tuple:
        return tuple(np.round(vec * 1e6).astype(np.int64).tolist())

    def score(self, vec: np.ndarray) -> float:
        k = self.key(vec)
        if k not in self.cache:
            self.evaluations += 1
            self.cache[k] = threshold(decode_vector(vec, self.cfg), self.cfg, self.cfg.search_tol)
        return self.cache[k]

    def beats(self, vec: np.ndarray, bar: float) -> float | None:
        """Threshold of ``vec`` if it converges at ``bar`` (so it can match or
        beat a parent scored ``bar``), else None without a full bisection."""
        k = self.key(vec)
        if k in self.cache:
            return self.cache[k]
        dd = decode_vector(vec, self.cfg)
        if self.cfg.objective != "unbounded_de" and bar > 0.0 and not converges(dd, bar, self.cfg):
            return None
        self.evaluations += 1
        t = threshold(dd, self.cfg, self.cfg.search_tol, lo=bar if self.cfg.objective != "unbounded_de" else 0.0)
        self.cache[k] = t
        return t


def _rng(cfg: OptimizerConfig, generation: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(generation, index)))


def optimize(cfg: OptimizerConfig, progress=None) -> OptimizerResult:
    """DE/rand/1/bin with elitist one-to-one selection."""
    anchor = default_anchor(cfg) if cfg.anchor is None else encode(cfg.anchor, cfg)
    if repair(anchor, cfg, anchor) is None:
        raise OptimizerError("anchor distribution violates the rate target")
    scorer = _Scorer(cfg)
    pop = []
    for i in range(cfg.population):
        raw = _rng(cfg, 0, i).random(cfg.dim) if i > 0 else anchor
        vec = repair(raw, cfg, anchor)
        pop.append(anchor.copy() if vec is None else vec)
    fit = [scorer.score(v) for v in pop]
    best = int(np.argmax(fit))
    history = [(0, float(fit[best]))]
    for gen in range(1, cfg.generations + 1):
        for i in range(cfg.population):
            rng = _rng(cfg, gen, i)
            r1, r2, r3 = rng.choice([j for j in range(cfg.population) if j != i], 3, replace=False)
            mutant = pop[r1] + cfg.F * (pop[r2] - pop[r3])
            cross = rng.random(cfg.dim) < cfg.CR
            cross[rng.integers(cfg.dim)] = True
            trial = repair(np.where(cross, mutant, pop[i]), cfg, anchor)
            if trial is None:
                continue
            t = scorer.beats(trial, fit[i])
            if t is not None and t >= fit[i]:
                pop[i], fit[i] = trial, t
        best = int(np.argmax(fit))
        history.append((gen, float(fit[best])))
        if progress is not None:
            progress(gen, fit[best])
    dd = decode_vector(pop[best], cfg)
    final = threshold(dd, cfg, cfg.final_tol)
    return OptimizerResult(dd, float(final), history, scorer.evaluations)
