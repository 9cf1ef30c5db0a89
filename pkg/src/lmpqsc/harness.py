"""Monte-Carlo sweeps: sample a graph, send the all-zero word over the q-SC,
decode and tally frame, symbol, false-verification and unverified counts.

Also holds the config-file loaders shared by the command-line front end.
"""

from __future__ import annotations

import json
import logging
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .channel import QscChannel, transmit
from .ensemble import DegreeDistribution, EnsembleError, sample_graph
from .lmp_decoder import DecoderConfig, decode
from .nb_decoders import lm1_mb_decode, lm1_nb_decode, lm2_mb_decode, lm2_nb_decode

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
CSV_HEADER = "p,frames,frame_errors,symbol_errors,fv_symbols,unverified_symbols,mean_iters"
ALGORITHMS = ("lmp", "lm1_mb", "lm1_nb", "lm2_mb", "lm2_nb")


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Config files
# ---------------------------------------------------------------------------

def load_mapping(path) -> dict:
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    try:
        if path.suffix.lower() == ".json":
            data = json.loads(raw)
        else:
            data = tomllib.loads(raw.decode())
    except (ValueError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a table")
    return data


def ensemble_from_mapping(data: dict, normalize: bool = False) -> DegreeDistribution:
    try:
        return DegreeDistribution.from_pairs(data["lambda"], data["rho"],
                                             normalize=bool(data.get("normalize", normalize)))
    except KeyError as exc:
        raise ConfigError(f"ensemble is missing {exc.args[0]!r}") from exc
    except (TypeError, ValueError, EnsembleError) as exc:
        raise ConfigError(f"bad ensemble: {exc}") from exc


def load_ensemble(path) -> tuple[DegreeDistribution, dict]:
    """Ensemble file: lambda/rho pair lists plus optional n, field.m,
    girth_filter and seed, returned as the second element."""
    data = load_mapping(path)
    return ensemble_from_mapping(data), data


def dump_ensemble(dd: DegreeDistribution, path) -> None:
    pairs = dd.to_pairs()
    lines = []
    for key in ("lambda", "rho"):
        body = ", ".join(f"[{d}, {c!r}]" for d, c in pairs[key])
        lines.append(f"{key} = [{body}]")
    Path(path).write_text("\n".join(lines) + "\n")


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else ("inf" if x > 0 else "-inf" if x < 0 else "nan")
    if isinstance(x, np.bool_):
        return bool(x)
    return x


def dumps_json(obj: dict) -> str:
    body = {"schema_version": SCHEMA_VERSION, **obj}
    return json.dumps(_jsonable(body), indent=2, sort_keys=True) + "\n"


# ---------------------------------------------------------------------------
# Sweep configuration and report
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SimConfig:
    dd: DegreeDistribution
    algorithm: str = "lmp"
    s_max: int = 1
    n: int = 10_000
    m: int = 32
    p_values: tuple[float, ...] = (0.1,)
    trials: int = 200
    max_iterations: int = 200
    seed: int = 0
    girth_filter: bool = True
    fresh_graph: bool = True
    cross_check: bool = False
    workers: int = 1

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ConfigError(f"unknown algorithm {self.algorithm!r}; choose from {ALGORITHMS}")
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if self.n < 2:
            raise ConfigError("n must be >= 2")
        if self.s_max < 1:
            raise ConfigError("s_max must be >= 1")
        if not 1 <= self.m <= 32:
            raise ConfigError("field m must lie in [1, 32]")
        if not self.p_values or any(not 0.0 <= p <= 1.0 for p in self.p_values):
            raise ConfigError("p values must lie in [0, 1]")
        if self.cross_check and self.algorithm not in ("lm1_mb", "lm1_nb"):
            raise ConfigError("cross_check applies to lm1_mb / lm1_nb only")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")

    @classmethod
    def from_mapping(cls, data: dict, base_dir=".") -> "SimConfig":
        ens = data.get("ensemble")
        if isinstance(ens, str):
            dd, extra = load_ensemble(Path(base_dir) / ens)
        elif isinstance(ens, dict):
            dd, extra = ensemble_from_mapping(ens), ens
        else:
            raise ConfigError("config needs an ensemble file name or inline table")
        algo = str(data.get("algorithm", "lmp"))
        s_max = int(data.get("s_max", 1))
        # "lmp8" shorthand
        if algo.startswith("lmp") and algo[3:].isdigit():
            algo, s_max = "lmp", int(algo[3:])
        field_m = data.get("field", extra.get("field", {})).get("m", 32)
        known = {"ensemble", "algorithm", "s_max", "n", "field", "p", "trials", "max_iterations",
                 "seed", "girth_filter", "fresh_graph", "cross_check", "workers"}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys {sorted(unknown)}")
        p = data.get("p", [0.1])
        p = [p] if isinstance(p, (int, float)) else list(p)
        try:
            return cls(dd=dd, algorithm=algo, s_max=s_max, n=int(data.get("n", extra.get("n", 10_000))),
                       m=int(field_m), p_values=tuple(float(x) for x in p),
                       trials=int(data.get("trials", 200)),
                       max_iterations=int(data.get("max_iterations", 200)),
                       seed=int(data.get("seed", extra.get("seed", 0))),
                       girth_filter=bool(data.get("girth_filter", extra.get("girth_filter", True))),
                       fresh_graph=bool(data.get("fresh_graph", True)),
                       cross_check=bool(data.get("cross_check", False)),
                       workers=int(data.get("workers", 1)))
        except (TypeError, AttributeError) as exc:
            raise ConfigError(f"bad config value: {exc}") from exc

    def echo(self) -> dict:
        d = {k: v for k, v in asdict(self).items() if k not in ("dd", "workers")}
        d["ensemble"] = self.dd.to_pairs()
        return d


@dataclass
class SweepRow:
    p: float
    frames: int = 0
    frame_errors: int = 0
    symbol_errors: int = 0
    fv_symbols: int = 0
    unverified_symbols: int = 0
    iterations: int = 0
    graph_failures: int = 0
    cross_mismatches: int = 0
    wall_time: float = 0.0

    @property
    def mean_iters(self) -> float:
        return self.iterations / self.frames if self.frames else 0.0

    @property
    def fer(self) -> float:
        return self.frame_errors / self.frames if self.frames else float("nan")

    def csv_line(self) -> str:
        return (f"{self.p!r},{self.frames},{self.frame_errors},{self.symbol_errors},"
                f"{self.fv_symbols},{self.unverified_symbols},{self.mean_iters:.6f}")


@dataclass
class SimReport:
    config: SimConfig
    rows: list[SweepRow] = field(default_factory=list)

    def to_csv(self) -> str:
        return "\n".join([CSV_HEADER] + [r.csv_line() for r in self.rows]) + "\n"

    def to_dict(self) -> dict:
        """Wall times are left out so files are reproducible byte for byte."""
        rows = []
        for r in self.rows:
            d = asdict(r)
            d.pop("wall_time")
            d.pop("iterations")
            d["mean_iters"] = r.mean_iters
            rows.append(d)
        return {"config": self.config.echo(), "seed": self.config.seed, "rows": rows}


# ---------------------------------------------------------------------------
# Trials
# ---------------------------------------------------------------------------

def _streams(seed: int, p_index: int, trial: int, fresh: bool):
    graph_key = (p_index, trial, 0) if fresh else (p_index, 0, 0)
    g = np.random.SeedSequence(seed, spawn_key=graph_key)
    z = np.random.SeedSequence(seed, spawn_key=(p_index, trial, 1))
    return g, z


def _decode(cfg: SimConfig, graph, y):
    algo = cfg.algorithm
    if algo == "lmp":
        return decode(graph, y, DecoderConfig(s_max=cfg.s_max, max_iterations=cfg.max_iterations))
    if algo == "lm1_mb":
        return lm1_mb_decode(graph, y, cfg.max_iterations)
    if algo == "lm2_mb":
        return lm2_mb_decode(graph, y, cfg.max_iterations)
    if algo == "lm1_nb":
        return lm1_nb_decode(graph, y)
    return lm2_nb_decode(graph, y)


_graph_cache: dict = {}


def _graph(cfg: SimConfig, ss: np.random.SeedSequence):
    key = (id(cfg), ss.spawn_key)
    if not cfg.fresh_graph and key in _graph_cache:
        return _graph_cache[key]
    g = sample_graph(cfg.dd, cfg.n, seed=ss, girth_filter=cfg.girth_filter, field=cfg.m)
    if not cfg.fresh_graph:
        _graph_cache.clear()
        _graph_cache[key] = g
    return g


def run_trial(cfg: SimConfig, p_index: int, trial: int) -> dict:
    """One frame. Returns counters; a graph failure yields {'graph_failure': 1}."""
    gs, zs = _streams(cfg.seed, p_index, trial, cfg.fresh_graph)
    try:
        graph = _graph(cfg, gs)
    except EnsembleError as exc:
        log.warning("p index %d trial %d: graph construction failed: %s", p_index, trial, exc)
        return {"graph_failure": 1}
    p = cfg.p_values[p_index]
    x = np.zeros(cfg.n, dtype=np.uint64)
    y = transmit(x, QscChannel(p, cfg.m), seed=np.random.default_rng(zs))
    rep = _decode(cfg, graph, y)
    out = {
        "frame_error": int(rep.frame_error),
        "symbol_errors": rep.n_symbol_errors,
        "fv_symbols": rep.n_false_verified,
        "unverified_symbols": rep.n_unverified,
        "iterations": rep.iterations,
        "mismatch": 0,
    }
    if cfg.cross_check:
        other = lm1_nb_decode(graph, y) if cfg.algorithm == "lm1_mb" else lm1_mb_decode(graph, y, cfg.max_iterations)
        if not np.array_equal(other.verified, rep.verified):
            log.error("p index %d trial %d: LM1 MB/NB verified sets differ", p_index, trial)
            out["mismatch"] = 1
    return out


def _run_chunk(args):
    cfg, p_index, trials = args
    return [run_trial(cfg, p_index, t) for t in trials]


def _accumulate(row: SweepRow, res: dict) -> None:
    if res.get("graph_failure"):
        row.graph_failures += 1
        return
    row.frames += 1
    row.frame_errors += res["frame_error"]
    row.symbol_errors += res["symbol_errors"]
    row.fv_symbols += res["fv_symbols"]
    row.unverified_symbols += res["unverified_symbols"]
    row.iterations += res["iterations"]
    row.cross_mismatches += res["mismatch"]


def run_sweep(cfg: SimConfig, progress=None) -> SimReport:
    """Run ``cfg.trials`` frames at each p. Every trial draws its graph and
    noise from streams keyed on (master seed, p index, trial index), and the
    counters are sums, so results do not depend on worker scheduling."""
    report = SimReport(cfg)
    pool = ProcessPoolExecutor(cfg.workers) if cfg.workers > 1 else None
    try:
        for pi, p in enumerate(cfg.p_values):
            row = SweepRow(p=float(p))
            t0 = time.perf_counter()
            if pool is None:
                results = (run_trial(cfg, pi, t) for t in range(cfg.trials))
            else:
                chunks = [(cfg, pi, range(w, cfg.trials, cfg.workers)) for w in range(cfg.workers)]
                results = (r for chunk in pool.map(_run_chunk, chunks) for r in chunk)
            for res in results:
                _accumulate(row, res)
            row.wall_time = time.perf_counter() - t0
            log.info("p=%g frames=%d fer=%.4g wall=%.2fs", p, row.frames, row.fer, row.wall_time)
            if progress is not None:
                progress(row)
            report.rows.append(row)
    finally:
        if pool is not None:
            pool.shutdown()
    return report
