"""Command-line front end.

Exit codes: 0 success, 1 numerical failure, 2 input error, 3 unsupported
configuration.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

from . import __version__
from .bi_infinite import BiBandedOperator, double
from .errors import InputError, NumericalError, UnsupportedConfiguration
from .model import BandedOperator

EXIT_OK, EXIT_NUMERIC, EXIT_INPUT, EXIT_UNSUPPORTED = 0, 1, 2, 3


def _load_json(path: str) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON ({exc})") from exc


def _load_operator(path: str) -> BandedOperator:
    obj = _load_json(path)
    if not isinstance(obj, dict):
        raise InputError(f"{path}: expected a JSON object")
    if obj.get("bi_infinite"):
        return double(BiBandedOperator.from_json(obj))
    return BandedOperator.from_json(obj)


def _dump(obj, out: str | None) -> None:
    text = json.dumps(obj, sort_keys=True, indent=2, allow_nan=True) + "\n"
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _int_list(s: str) -> list[int]:
    try:
        return [int(x) for x in s.split(",") if x.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {s!r}") from exc


def cmd_analyze(args) -> int:
    from .oracle import match, write_csv
    from .spectrum import AnalysisConfig, analyze, gamma_grid

    op = _load_operator(args.input)
    cfg = AnalysisConfig(tol=args.tol, edge_delta=args.edge_delta, exclusion_eps=args.exclusion_eps,
                         j_max=args.jmax, route=args.route, threads=args.threads)
    rep, engine = analyze(op, cfg)
    if args.require_enclosure and rep.enclosure is None:
        raise UnsupportedConfiguration(rep.enclosure_error)
    # the worker count never changes results, so it stays out of the report
    config = {"tol": cfg.tol, "edge_delta": cfg.edge_delta, "exclusion_eps": cfg.exclusion_eps,
              "jmax": cfg.j_max, "route": cfg.route, "oracle": args.oracle or []}
    out = {"version": __version__, "command": "analyze", "config": config,
           "operator": {"p": op.p, "n_explicit": op.n_explicit, "tail": op.tail.to_json()},
           "report": rep.to_json()}
    if args.oracle:
        table = match(rep.eigenvalues, op, args.oracle, threads=args.threads)
        out["oracle"] = table.to_json()
        if args.oracle_csv:
            write_csv(args.oracle_csv, table.spectra)
    if args.gamma_csv:
        rows = gamma_grid(engine, args.gamma_grid)
        with open(args.gamma_csv, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["re_z", "im_z", "abs_gamma"])
            w.writerows([[repr(float(x)) for x in r] for r in rows])
    _dump(out, args.out)
    return EXIT_OK


def cmd_periodic(args) -> int:
    from .errors import NotQuasiSymmetric
    from .periodic import (AsymptoticallyPeriodicJacobi, PeriodicBackground, analyze_asymptotic,
                           bc_polynomial, spectral_arcs)
    from .spectrum import AnalysisConfig

    obj = _load_json(args.input)
    if not isinstance(obj, dict):
        raise InputError(f"{args.input}: expected a JSON object")
    asym = "background" in obj
    J = AsymptoticallyPeriodicJacobi.from_json(obj) if asym else None
    bg = J.background if asym else PeriodicBackground.from_json(obj)
    if not bg.is_quasi_symmetric():
        raise NotQuasiSymmetric(f"alpha = {bg.alpha} differs from delta = {bg.delta}")
    out = {"version": __version__, "command": "periodic",
           "config": {"arcs": args.arcs, "tol": args.tol, "edge_delta": args.edge_delta},
           "background": bg.to_json()}
    if asym:
        cfg = AnalysisConfig(tol=args.tol, edge_delta=args.edge_delta, threads=args.threads)
        out["report"] = analyze_asymptotic(J, cfg, samples=args.arcs).to_json()
    else:
        bcp = bc_polynomial(bg)
        out["report"] = {"polynomial": bcp.to_json(),
                         "arcs": spectral_arcs(bg, args.arcs, P=bcp.P).to_json()}
    _dump(out, args.out)
    return EXIT_OK


def cmd_generate(args) -> int:
    from . import generators as gen

    if args.family == "class":
        op = gen.sample_class(args.p, args.beta, args.C1, args.C2, seed=args.seed,
                              n_explicit=args.rows, tol=args.tol)
    elif args.family == "finite":
        op = gen.random_finite(args.p, args.rows or 10, q_max=args.C1, seed=args.seed)
    elif args.family == "slow":
        op = gen.slowly_decaying(signs=[1, -1][: args.p] if args.p <= 2 else [1] * args.p,
                                 strength=args.C1, gamma=args.gamma, n_rows=args.rows or 1000)
    elif args.family == "interleave":
        if not args.components:
            raise InputError("interleave needs --components")
        op = gen.interleave([_load_operator(c) for c in args.components])
    else:  # pragma: no cover - argparse restricts choices
        raise InputError(f"unknown family {args.family}")
    _dump(op.to_json(), args.out)
    return EXIT_OK


def cmd_double(args) -> int:
    obj = _load_json(args.input)
    if not isinstance(obj, dict):
        raise InputError(f"{args.input}: expected a JSON object")
    _dump(double(BiBandedOperator.from_json(obj)).to_json(), args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="bandjost", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--out", help="output path (default stdout)")
        p.add_argument("--threads", type=int, default=None, help="worker threads")
        p.add_argument("--tol", type=float, default=1e-14)
        p.add_argument("--seed", type=int, default=0)

    a = sub.add_parser("analyze", help="eigenvalues of a banded operator")
    common(a)
    a.add_argument("--input", required=True)
    a.add_argument("--edge-delta", type=float, default=1e-2)
    a.add_argument("--exclusion-eps", type=float, default=1e-3)
    a.add_argument("--jmax", type=int, default=None)
    a.add_argument("--route", choices=("taylor", "iteration"), default="taylor")
    a.add_argument("--oracle", type=_int_list, default=None, help="section sizes, e.g. 200,400")
    a.add_argument("--oracle-csv", help="dump section eigenvalues as CSV")
    a.add_argument("--gamma-csv", help="dump |gamma| on a z grid as CSV")
    a.add_argument("--gamma-grid", type=int, default=101)
    a.add_argument("--require-enclosure", action="store_true",
                   help="fail with exit 3 when the enclosure constants do not exist")
    a.set_defaults(func=cmd_analyze)

    p = sub.add_parser("periodic", help="periodic background or asymptotically periodic matrix")
    common(p)
    p.add_argument("--input", required=True)
    p.add_argument("--arcs", type=int, default=256)
    p.add_argument("--edge-delta", type=float, default=1e-2)
    p.set_defaults(func=cmd_periodic)

    g = sub.add_parser("generate", help="emit a test operator")
    common(g)
    g.add_argument("--family", choices=("class", "finite", "slow", "interleave"), required=True)
    g.add_argument("--p", type=int, default=1)
    g.add_argument("--beta", type=float, default=0.5)
    g.add_argument("--C1", type=float, default=0.3)
    g.add_argument("--C2", type=float, default=1.0)
    g.add_argument("--gamma", type=float, default=1.5)
    g.add_argument("--rows", type=int, default=None)
    g.add_argument("--components", nargs="*")
    g.set_defaults(func=cmd_generate)

    d = sub.add_parser("double", help="bi-infinite operator to its half-line image")
    d.add_argument("--input", required=True)
    d.add_argument("--out")
    d.set_defaults(func=cmd_double)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except InputError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except UnsupportedConfiguration as exc:
        print(f"unsupported: {exc}", file=sys.stderr)
        return EXIT_UNSUPPORTED
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
