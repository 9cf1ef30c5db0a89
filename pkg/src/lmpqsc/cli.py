"""Command-line front end.

Every subcommand writes deterministic JSON (and CSV where relevant) into the
``--out`` directory, or prints the JSON to stdout when ``--out`` is omitted.
Exit codes: 0 success, 2 usage or config error, 3 runtime fault.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import bounds, density_evolution as de, ode_analysis
from .channel import capacity
from .ensemble import EnsembleError, rate
from .harness import (ConfigError, SimConfig, dump_ensemble, dumps_json, load_ensemble,
                      load_mapping, run_sweep)
from .optimizer import OptimizerConfig, OptimizerError, optimize

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _parse_q(text: str) -> int:
    text = text.strip()
    if text.startswith("2^"):
        return 1 << int(text[2:])
    return int(text)


def _parse_smax(text: str):
    return None if text.lower() in ("inf", "infinity") else int(text)


def _emit(args, name: str, payload: dict, extra_files: dict | None = None) -> None:
    text = dumps_json(payload)
    if args.out is None:
        sys.stdout.write(text)
        return
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / f"{name}.json").write_text(text)
    for fname, content in (extra_files or {}).items():
        (out / fname).write_text(content)


def _csv(header: str, rows) -> str:
    return "\n".join([header] + [",".join(repr(float(v)) if isinstance(v, float) else str(v) for v in r)
                                 for r in rows]) + "\n"


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_threshold(args) -> None:
    dd, _ = load_ensemble(args.ensemble)
    smax = _parse_smax(args.smax)
    if args.mb:
        thr = de.threshold_mb(dd, args.mb, args.tol)
        ok, _, iters = de.de_mb_iterate(dd, max(thr - args.tol, 0.0), args.mb)
        _emit(args, "threshold", {"threshold": thr, "decoder": f"{args.mb}_mb", "iterations": iters,
                                  "rate": rate(dd)})
        return
    if smax is None:
        thr = de.threshold_unbounded(dd)
        ok, trace = de.de_unbounded_run(dd, max(thr - args.tol, 0.0))
        rows = [(i, 1.0 - st.y, st.x, "", st.y) for i, st in enumerate(trace)]
        iters = len(trace) - 1
    else:
        thr = de.threshold_bounded(dd, smax, args.tol)
        res = de.de_bounded_iterate(dd, max(thr - args.tol, 0.0), smax, keep_trace=True)
        rows = res.trace
        iters = res.iterations
    trace_csv = _csv("iter,V,E,L1,unverified_mass", rows)
    _emit(args, "threshold", {"threshold": thr, "smax": "inf" if smax is None else smax,
                              "iterations": iters, "rate": rate(dd), "trace_file": "trace.csv"},
          {"trace.csv": trace_csv})


def cmd_ode(args) -> None:
    dd, _ = load_ensemble(args.ensemble)
    if args.threshold:
        thr = ode_analysis.threshold_ode(args.system, dd, tol=args.tol, dt=args.dt)
        _emit(args, "ode", {"system": args.system, "threshold": thr, "dt": args.dt})
        return
    if args.p is None:
        raise ConfigError("ode needs --p or --threshold")
    res = ode_analysis.integrate(args.system, dd, args.p, dt=args.dt, record_every=args.record_every)
    header = "t,e_l,e_r,c1,c2" + (",c3" if args.system == "lm2" else "")
    _emit(args, "ode", {"system": args.system, "dt": args.dt, **res.to_dict(),
                        "trajectory_file": "trajectory.csv"},
          {"trajectory.csv": _csv(header, res.trajectory)})


def cmd_bounds(args) -> None:
    dd, _ = load_ensemble(args.ensemble)
    q = _parse_q(args.q)
    ml = bounds.ml_union_bound(dd, args.p, q)
    fv = bounds.type2_fv_bound(dd, args.p, q)
    uv = bounds.uv_union_bound(dd, args.smax, args.p, q, girth=args.girth)
    stable, prod = bounds.stability_check(dd, args.p)
    scale = 1.0 / args.n if args.n else 1.0
    payload = {
        "p": args.p, "q": q, "smax": args.smax, "mu": dd.mu(),
        "ml_union": {k: v.to_dict() for k, v in ml.items()},
        "type2_fv": {k: v.to_dict() for k, v in fv.items()},
        "uv_bound": {k: v.to_dict() for k, v in uv.items()},
        "uv_symbol_rate": uv["symbols"].value * scale if args.n else None,
        "stability": {"stable": stable, "p_mu": prod},
    }
    _emit(args, "bounds", payload)


def cmd_optimize(args) -> None:
    data = load_mapping(args.config)
    anchor = data.pop("anchor", None)
    if anchor is not None:
        anchor, _ = load_ensemble(Path(args.config).parent / anchor)
    if args.seed is not None:
        data["seed"] = args.seed
    for key in ("lam_degrees", "rho_degrees"):
        if key in data:
            data[key] = tuple(data[key])
    try:
        cfg = OptimizerConfig(anchor=anchor, **data)
    except TypeError as exc:
        raise ConfigError(f"bad optimizer config: {exc}") from exc
    res = optimize(cfg)
    history = _csv("generation,best_threshold", res.history)
    payload = res.to_dict()
    payload.pop("history")
    payload.update({"rate": rate(res.best_dd), "ensemble_file": "best_ensemble.toml",
                    "history_file": "history.csv"})
    if args.out is not None:
        Path(args.out).mkdir(parents=True, exist_ok=True)
        dump_ensemble(res.best_dd, Path(args.out) / "best_ensemble.toml")
    _emit(args, "optimize", payload, {"history.csv": history})


def cmd_simulate(args) -> None:
    data = load_mapping(args.config)
    if args.seed is not None:
        data["seed"] = args.seed
    if args.workers is not None:
        data["workers"] = args.workers
    cfg = SimConfig.from_mapping(data, Path(args.config).parent)
    rep = run_sweep(cfg)
    if args.out is None:
        sys.stdout.write(rep.to_csv())
        return
    _emit(args, "simulate", rep.to_dict(), {"sweep.csv": rep.to_csv()})


def cmd_capacity(args) -> None:
    if not 0.0 <= args.p <= 1.0:
        raise ConfigError("p must lie in [0, 1]")
    if not 1 <= args.m <= 32:
        raise ConfigError("m must lie in [1, 32]")
    _emit(args, "capacity", {"p": args.p, "m": args.m, "capacity": capacity(args.p, 1 << args.m)})


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="lmpqsc", description="List-message-passing decoding on the q-SC")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp):
        sp.add_argument("--out", help="output directory (default: JSON on stdout)")
        sp.add_argument("--seed", type=int, default=None)
        return sp

    sp = common(sub.add_parser("threshold", help="density-evolution threshold"))
    sp.add_argument("--ensemble", required=True)
    sp.add_argument("--smax", default="1", help="list size or 'inf'")
    sp.add_argument("--mb", choices=("lm1", "lm2"), help="message-based LM1/LM2 DE instead")
    sp.add_argument("--tol", type=float, default=5e-4)
    sp.set_defaults(func=cmd_threshold)

    sp = common(sub.add_parser("ode", help="peeling ODE integration"))
    sp.add_argument("--system", choices=("lm1", "lm2"), required=True)
    sp.add_argument("--ensemble", required=True)
    g = sp.add_mutually_exclusive_group(required=True)
    g.add_argument("--p", type=float)
    g.add_argument("--threshold", action="store_true")
    sp.add_argument("--dt", type=float, default=1e-4)
    sp.add_argument("--tol", type=float, default=1e-3)
    sp.add_argument("--record-every", type=int, default=100)
    sp.set_defaults(func=cmd_ode)

    sp = common(sub.add_parser("bounds", help="error-floor bounds"))
    sp.add_argument("--ensemble", required=True)
    sp.add_argument("--p", type=float, required=True)
    sp.add_argument("--smax", type=int, default=1)
    sp.add_argument("--q", default="2^32")
    sp.add_argument("--girth", type=int, default=None)
    sp.add_argument("--n", type=int, default=None, help="block length for per-symbol rates")
    sp.set_defaults(func=cmd_bounds)

    sp = common(sub.add_parser("optimize", help="degree-distribution search"))
    sp.add_argument("--config", required=True)
    sp.set_defaults(func=cmd_optimize)

    sp = common(sub.add_parser("simulate", help="Monte-Carlo sweep"))
    sp.add_argument("--config", required=True)
    sp.add_argument("--workers", type=int, default=None)
    sp.set_defaults(func=cmd_simulate)

    sp = common(sub.add_parser("capacity", help="q-SC capacity"))
    sp.add_argument("--p", type=float, required=True)
    sp.add_argument("--m", type=int, required=True)
    sp.set_defaults(func=cmd_capacity)
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        args.func(args)
    except (ConfigError, OptimizerError, EnsembleError, ValueError) as exc:
        # ValueError: argument validation in the library (p range, dt, ...)
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001
        print(f"runtime fault: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
