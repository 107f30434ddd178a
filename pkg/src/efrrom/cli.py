"""Command line front end.

Subcommands: ``fom`` (single trajectory), ``offline``, ``online``,
``analyze-filter``, ``mc-oracle``, ``verify``. Exit status is 0 on success,
1 on validation failure (bad arguments, configuration or missing artifacts)
and 2 on numerical failure.
"""

import argparse
import sys

from efrrom import _kernels
from efrrom.config import load_config
from efrrom.errors import NumericalError, ValidationError


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2 on bad arguments; those are validation
    # failures here
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _build_parser():
    parser = _Parser(prog="efrrom", description=__doc__)
    parser.add_argument("--version", action="store_true", help="print version and backend")
    sub = parser.add_subparsers(dest="command")
    for name, text in (
        ("fom", "run one full-order trajectory at the parameter-box center"),
        ("offline", "train the basis and reduced operators"),
        ("online", "run the filter sweep over the collocation grid"),
        ("analyze-filter", "tabulate filter transfer factors"),
        ("mc-oracle", "Monte Carlo estimate of the expected window energy"),
        ("verify", "run the invariant self-checks"),
    ):
        p = sub.add_parser(name, help=text, description=text)
        p.add_argument("--config", default=None, help="key=value configuration file")
        p.add_argument("--workers", type=int, default=1, help="worker pool size")
        p.add_argument("--seed", type=int, default=None, help="override uq.seed")
        p.add_argument("--out", default=None, help="override out.dir")
        p.add_argument("--permissive", action="store_true",
                       help="keep going past per-node failures")
        if name == "mc-oracle":
            p.add_argument("--samples", type=int, default=None,
                           help="override uq.mc_samples")
    return parser


def _config_from_args(args):
    overrides = {}
    if args.seed is not None:
        overrides["uq.seed"] = int(args.seed)
    if args.out is not None:
        overrides["out.dir"] = args.out
    return load_config(args.config, overrides=overrides)


def main(argv=None):
    args = _build_parser().parse_args(argv)
    if args.version:
        from efrrom import __version__

        print(f"efrrom {__version__} (backend: {_kernels.BACKEND})")
        return 0
    if args.command is None:
        print("efrrom: no command given (see --help)", file=sys.stderr)
        return 1
    try:
        return _dispatch(args)
    except ValidationError as exc:
        print(f"efrrom: {exc}", file=sys.stderr)
        return 1
    except NumericalError as exc:
        print(f"efrrom: numerical failure: {exc}", file=sys.stderr)
        return 2


def _dispatch(args):
    from efrrom import pipeline

    cfg = _config_from_args(args)
    if args.command == "fom":
        out = pipeline.fom_single_run(cfg)
        print(f"full-order trajectory written to {out}")
        return 0
    if args.command == "offline":
        artifacts = pipeline.offline(cfg, workers=args.workers)
        print(
            f"offline artifacts written to {cfg.out_dir}/offline "
            f"(r={artifacts.basis.r}, backend={_kernels.BACKEND})"
        )
        return 0
    if args.command == "online":
        summary = pipeline.online(cfg, workers=args.workers, permissive=args.permissive)
        print(f"online sweep written to {cfg.out_dir}/online")
        if summary["failed_nodes"]:
            print(f"failed nodes: {summary['failed_nodes']}")
        if "errors" in summary:
            best = sorted(summary["errors"].items(), key=lambda kv: kv[1][1])
            for tag, (err_w, err_h) in best[:5]:
                print(f"  {tag:24s} window={err_w:.4e} horizon={err_h:.4e}")
        return 0
    if args.command == "analyze-filter":
        path = pipeline.analyze_filter(cfg)
        print(f"transfer table written to {path}")
        return 0
    if args.command == "mc-oracle":
        mean, stderr, n, seed = pipeline.run_mc_oracle(cfg, n_samples=args.samples,
                                                       seed=args.seed)
        print(f"MC expected window energy = {mean:.10e} +- {stderr:.3e} "
              f"(n={n}, seed={seed})")
        return 0
    if args.command == "verify":
        results = pipeline.verify(cfg)
        failures = 0
        for name, ok, detail in results:
            status = "PASS" if ok else "FAIL"
            print(f"[{status}] {name}: {detail}")
            failures += 0 if ok else 1
        if failures:
            raise NumericalError(f"{failures} verification check(s) failed")
        print(f"all {len(results)} checks passed (backend: {_kernels.BACKEND})")
        return 0
    raise ValidationError(f"unknown command {args.command!r}")


if __name__ == "__main__":
    raise SystemExit(main())
