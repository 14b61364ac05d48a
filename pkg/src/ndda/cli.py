"""Command-line entry point: ``ndda {generate,certify,run,verify,compare,fit-rate}``."""

import argparse
import json
import logging
import sys
from pathlib import Path

from . import harness
from .algorithms import DivergenceError
from .analysis import fit_rate, running_min
from .graph import GraphError
from .problem import save_lasso

EXIT_OK, EXIT_CONFIG, EXIT_DIVERGED, EXIT_VERIFY = 0, 1, 2, 3


def _config_args(p, algorithm=True):
    p.add_argument("--config", help="JSON run configuration")
    p.add_argument("--preset", choices=("desk", "paper"), default="desk")
    p.add_argument("--seed", type=int)
    if algorithm:
        p.add_argument("--algorithm", choices=("NDDA", "DDA", "DPG", "CDA"))
    p.add_argument("--a", type=float, help="constant control parameter")
    p.add_argument("--c", type=float, help="scale c of a_t = c/sqrt(t+1)")
    p.add_argument("--horizon", type=int)
    p.add_argument("--stride", type=int)
    p.add_argument("--force", action="store_true", help="run N-DDA with an inadmissible step")
    p.add_argument("--timing", action="store_true", help="add a wall-clock column to the trace")


def _resolve(args, algorithm=None):
    algorithm = algorithm or getattr(args, "algorithm", None)
    if args.config:
        cfg = harness.RunConfig.load(args.config)
        if algorithm:
            cfg = cfg.with_(algorithm=algorithm)
    else:
        cfg = harness.preset(args.preset, algorithm or "NDDA")
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.a is not None:
        changes["control"] = {"kind": "constant", "value": args.a}
    if args.c is not None:
        changes["control"] = {"kind": "inverse_sqrt", "value": args.c}
    for name in ("horizon", "stride"):
        if getattr(args, name, None) is not None:
            changes[name] = getattr(args, name)
    if getattr(args, "force", False):
        changes["force"] = True
    if getattr(args, "timing", False):
        changes["timing"] = True
    if getattr(args, "out", None) and not getattr(args, "out_is_dir", False):
        changes["output"] = args.out
    return cfg.with_(**changes) if changes else cfg


def _print(doc):
    print(json.dumps(doc, indent=1, default=float))


def cmd_generate(args):
    cfg = _resolve(args, "NDDA")
    setup = harness.build(cfg)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_lasso(setup.data, out, reference=setup.reference)
    base = out.with_suffix("")
    Path(f"{base}.topology.json").write_text(json.dumps(setup.topology.to_dict()) + "\n")
    Path(f"{base}.weights.json").write_text(json.dumps(setup.P.to_dict()) + "\n")
    _print({"instance": str(out.with_suffix(".json")), "n": setup.inst.n, "m": setup.inst.m,
            "L": setup.inst.L, "beta": setup.beta, "f_star": setup.reference.f_star})
    return EXIT_OK


def cmd_certify(args):
    doc = harness.certify(_resolve(args, "NDDA"))
    _print(doc)
    return EXIT_OK


def cmd_run(args):
    cfg = _resolve(args)
    result = harness.run(cfg)
    _print(result.to_dict())
    if result.checks is not None and not result.checks.ok:
        return EXIT_VERIFY
    return EXIT_OK


def cmd_verify(args):
    cfg = _resolve(args, "NDDA")
    result = harness.run(cfg)
    if result.checks is None:
        print("no certificate: the step is not admissible", file=sys.stderr)
        return EXIT_VERIFY
    _print(result.checks.summary())
    return EXIT_OK if result.checks.ok else EXIT_VERIFY


def cmd_compare(args):
    if args.configs:
        configs = [harness.RunConfig.load(p) for p in args.configs]
    else:
        args.out_is_dir = True
        configs = [_resolve(args, kind) for kind in args.algorithms]
    if args.out:
        outdir = Path(args.out)
        outdir.mkdir(parents=True, exist_ok=True)
        configs = [c.with_(output=str(outdir / f"{c.algorithm.lower()}.csv")) for c in configs]
    report = harness.compare(configs)
    report.pop("results")
    _print(report)
    return EXIT_OK


def cmd_fit_rate(args):
    trace = harness.read_trace(args.trace)
    gap = trace[args.column]
    if args.envelope:
        gap = running_min(gap)
    window = tuple(args.window) if args.window else None
    fit = fit_rate(trace["t"], gap, window)
    _print({"column": args.column, "envelope": args.envelope, "window": window,
            "slope": fit.slope, "intercept": fit.intercept, "used": fit.used,
            "excluded": fit.excluded})
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="ndda", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write instance, topology and weights files")
    _config_args(p, algorithm=False)
    p.add_argument("--out", required=True, help="instance path prefix")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("certify", help="step-size admissibility report")
    _config_args(p, algorithm=False)
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("run", help="run one algorithm and write its trace")
    _config_args(p)
    p.add_argument("--out", help="trace CSV path")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("verify", help="run N-DDA and check the lemma/theorem inequalities")
    _config_args(p, algorithm=False)
    p.add_argument("--out", help="trace CSV path")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("compare", help="run several algorithms on one instance")
    _config_args(p, algorithm=False)
    p.add_argument("--algorithms", nargs="+", default=["NDDA", "DDA", "DPG"],
                   choices=("NDDA", "DDA", "DPG", "CDA"))
    p.add_argument("--configs", nargs="*", help="config files (overrides --preset)")
    p.add_argument("--out", help="directory for per-algorithm traces")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("fit-rate", help="log-log slope of a trace column")
    p.add_argument("trace")
    p.add_argument("--column", default="gap_avg")
    p.add_argument("--window", nargs=2, type=float, metavar=("T_LO", "T_HI"))
    p.add_argument("--envelope", action="store_true", help="fit the running minimum")
    p.set_defaults(func=cmd_fit_rate)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    try:
        return args.func(args)
    except (harness.ConfigError, GraphError, FileNotFoundError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DivergenceError as exc:
        print(f"diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED


if __name__ == "__main__":
    sys.exit(main())
