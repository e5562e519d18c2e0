"""Command line entry point.

Subcommands:

    bifikinetic run   --model high|low --config C --samples S --out DIR
    bifikinetic train --config C --out DIR [--budget N]
    bifikinetic eval  --surrogate DIR --samples S --out DIR [--with-reference] [--r-list 2,4]
    bifikinetic study --config C --r-list 2,4,6 --out DIR

Exit codes: 2 bad configuration, 3 sample or layout mismatch, 4 solver failure.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from ..errors import BlockLayoutMismatch, ConfigError, IdMismatch, InvalidState, SampleMismatch, StateBlowup
from ..scenarios import draw_samples
from .config import CONFIG_ENV, load_config, resolve_config_path
from .fieldio import read_samples_csv, write_field_csv
from . import pipeline

log = logging.getLogger("bifikinetic")

EXIT_CONFIG = 2
EXIT_SAMPLES = 3
EXIT_SOLVER = 4


def _r_list(text: str) -> list:
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"r list must be comma separated integers: {text!r}") from exc


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="bifikinetic", description=__doc__.split("\n\n")[0])
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, config=True):
        if config:
            sp.add_argument("--config", help=f"experiment JSON (the {CONFIG_ENV} variable overrides this)")
            sp.add_argument("--paper-scale", action="store_true", help="full-resolution grids and sample sizes")
        sp.add_argument("--out", required=True, type=Path, help="output directory")
        sp.add_argument("--workers", type=int, default=None, help="parallel solver processes")
        sp.add_argument("--seed", type=int, default=None, help="override the sample seed")

    sp = sub.add_parser("run", help="run one model over a sample set")
    common(sp)
    sp.add_argument("--model", choices=("high", "low"), required=True)
    sp.add_argument("--samples", type=Path, help="sample CSV (id, z1..zd); default: draw the test set")
    sp.add_argument("--dump-every", type=int, default=0, metavar="K", help="also write fields every K steps")

    sp = sub.add_parser("train", help="offline stage: build a surrogate")
    common(sp)
    sp.add_argument("--budget", type=int, default=None)
    sp.add_argument("--samples", type=Path, help="training sample CSV; default: draw n_train points")

    sp = sub.add_parser("eval", help="online stage: reconstruct test samples")
    common(sp, config=False)
    sp.add_argument("--surrogate", required=True, type=Path)
    sp.add_argument("--samples", type=Path, help="test sample CSV; default: draw n_test points")
    sp.add_argument("--with-reference", action="store_true", help="also run the expensive model and report errors")
    sp.add_argument("--r-list", type=_r_list, default=None)

    sp = sub.add_parser("study", help="error versus number of expensive runs")
    common(sp)
    sp.add_argument("--r-list", type=_r_list, default=None)
    return p


def _experiment(args):
    path = resolve_config_path(args.config)
    if path is None:
        raise ConfigError(f"no config given (use --config or set {CONFIG_ENV})")
    return load_config(path, paper_scale=args.paper_scale)


def _workers(args, exp=None) -> int:
    w = args.workers if args.workers is not None else (exp.workers if exp else 1)
    if w < 1:
        raise ConfigError("--workers must be at least 1")
    return w


def _samples(args, scen, stream, count):
    if args.samples is not None:
        return read_samples_csv(args.samples, scen.dim)
    return draw_samples(scen, count, args.seed, stream)


def _dump_observer(out: Path, sample_id: str, grid_x, every: int):
    state = {"step": 0}
    (out / sample_id).mkdir(parents=True, exist_ok=True)

    def observe(s):
        state["step"] += 1
        if state["step"] % every == 0:
            write_field_csv(out / sample_id / f"step_{state['step']:06d}.csv", grid_x, s.W)

    return observe


def cmd_run(args) -> int:
    exp = _experiment(args)
    samples = _samples(args, exp.scenario, "test", exp.scenario.n_test)
    workers = _workers(args, exp)
    manifest = pipeline.run_model(args.model, exp, samples, args.out, workers)
    if args.dump_every > 0:
        x = exp.scenario.high_grid().x_centers
        runner = pipeline.RUNNERS[args.model]
        for s in samples:
            runner(s, exp.scenario, observer=_dump_observer(args.out / "trajectories", s.id, x, args.dump_every))
    log.info("wrote %d fields to %s", len(manifest["samples"]), args.out)
    return 0


def cmd_train(args) -> int:
    exp = _experiment(args)
    samples = read_samples_csv(args.samples, exp.scenario.dim) if args.samples else None
    out = pipeline.train(exp, args.out, _workers(args, exp), samples, args.budget, args.seed)
    log.info("surrogate written to %s", out)
    return 0


def cmd_eval(args) -> int:
    _, exp, _ = pipeline.load_surrogate(args.surrogate)
    samples = _samples(args, exp.scenario, "test", exp.scenario.n_test)
    report = pipeline.evaluate(args.surrogate, samples, args.out, args.with_reference, _workers(args, exp), args.r_list)
    if "errors" in report:
        for r, err in report["errors"].items():
            log.info("r=%s  rho %.3e  u1 %.3e  T %.3e", r, err["rho"], err["u1"], err["T"])
    return 0


def cmd_study(args) -> int:
    exp = _experiment(args)
    r_list = args.r_list or list(exp.r_list)
    if not r_list:
        raise ConfigError("study needs --r-list or r_list in the config")
    pipeline.study(exp, r_list, args.out, _workers(args, exp), args.seed)
    log.info("convergence table written to %s", args.out / "study.csv")
    return 0


COMMANDS = {"run": cmd_run, "train": cmd_train, "eval": cmd_eval, "study": cmd_study}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SampleMismatch, BlockLayoutMismatch, IdMismatch) as exc:
        print(f"sample mismatch: {exc}", file=sys.stderr)
        return EXIT_SAMPLES
    except pipeline.SolverFailure as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (InvalidState, StateBlowup) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
