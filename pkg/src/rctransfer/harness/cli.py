"""Command line: ``rctransfer {run,list,describe,sweep,ingest,emit-plot-data}``.

Exit status is 0 when every check passes, 1 when a threshold check fails, and
2 for usage or I/O errors. ``RCTRANSFER_OUT`` overrides the default output root.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

import yaml

from .. import seeding
from ..errors import ContractError, ExperimentError, IngestError
from ..training import GridSpec, autonomous_horizon_objective, driven_sync_objective, grid_search
from . import artifacts, config as cfgmod, registry
from .ingest import ingest_csv
from .runner import _dataset, channel_names, default_out_root, run_experiment

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _configs(args) -> list:
    if args.config:
        cfgs = [cfgmod.load(args.config)]
    elif args.experiment:
        try:
            cfgs = registry.resolve(args.experiment)
        except KeyError:
            raise UsageError(
                f"unknown experiment {args.experiment!r}; registered: {', '.join(registry.REGISTRY)}"
            ) from None
    else:
        raise UsageError("give an experiment id or --config PATH")
    seeds = None
    if getattr(args, "seed", None) is not None:
        seeds = [args.seed]
    elif getattr(args, "seeds", None) is not None:
        if args.seeds < 1:
            raise UsageError("--seeds must be >= 1")
        seeds = range(args.seeds)
    return [c.with_seeds(seeds) if seeds is not None else c for c in cfgs]


def _out(args) -> Path:
    return Path(args.out) if args.out else default_out_root()


def cmd_list(args) -> int:
    for k, e in registry.REGISTRY.items():
        print(f"{k:6s} {e.kind:9s} {e.description}")
    return EXIT_OK


def _describe(e: cfgmod.ExperimentConfig) -> str:
    lines = [f"{e.id} ({e.kind}): {e.description}"]
    if e.train is not None:
        lines.append(f"  training system: {e.train.describe()}")
    for i, st in enumerate(e.stages, start=1):
        lines.append(f"  stage {i}: {st.train.describe()}; reservoir {st.reservoir.hyper}")
    if e.drive is not None:
        scale = "its own min-max" if e.drive_scaler == "own" else "the training record's scaler"
        lines.append(f"  driving system:  {e.drive.describe()}, normalized with {scale}")
    if e.reservoir is not None:
        lines.append(f"  reservoir (N, p, eta, alpha, sigma, lambda) = {e.reservoir.hyper}")
    if e.kind == "parallel":
        lines.append(f"  {e.drive.n_nodes} reservoir copies coupled all-to-all with eps={e.coupling_eps:g}")
    if e.sweep:
        lines.append(f"  sweep: {e.sweep_param} = base - delta, delta in {list(e.sweep)}")
    names = channel_names(e.drive or e.train or e.stages[0].train)
    lines.append(f"  driven channels: {[names[c] for c in e.driven]}; constants: {list(e.constants)}")
    s = e.split
    lines.append(f"  split: washout {s.washout_len}, train {s.train_len}, test {s.test_len}; discard {e.discard}; warm-up {e.warmup}")
    lines.append(f"  seeds: {list(e.seeds)}")
    for c in e.checks:
        lines.append(f"  check: median {c.metric} {c.op} {c.value:g}")
    return "\n".join(lines)


def cmd_describe(args) -> int:
    for e in _configs(args):
        print(_describe(e))
    return EXIT_OK


def cmd_run(args) -> int:
    status = EXIT_OK
    log = None if args.quiet else (lambda s: print(s, file=sys.stderr, flush=True))
    for cfg in _configs(args):
        rep = run_experiment(cfg, _out(args), save_models=args.save_models, log=log)
        for line in rep.lines():
            print(line)
        print(f"{cfg.id}: {'PASS' if rep.passed else 'FAIL'} in {rep.elapsed:.0f}s -> {rep.out_dir}")
        if not rep.passed:
            status = EXIT_FAIL
    return status


def cmd_sweep(args) -> int:
    """Hyperparameter grid search on the held-out part of the training record."""
    cfgs = _configs(args)
    if len(cfgs) != 1 or cfgs[0].train is None:
        raise UsageError("sweep needs exactly one experiment with a training system")
    cfg = cfgs[0]
    grid_d = yaml.safe_load(Path(args.grid).read_text()) if args.grid else {}
    grid = GridSpec(
        **{k: tuple(grid_d.get(k, (getattr(cfg.reservoir, k),))) for k in ("p", "eta", "alpha", "sigma", "lam")},
        objective=grid_d.get("objective", "driven_sync_error"),
        n_seeds=int(grid_d.get("n_seeds", len(cfg.seeds))),
    )
    seed = cfg.seeds[0]
    data = _dataset(cfg.train, seed, seeding.TRAIN_IC, split=cfg.split)
    if grid.objective == "driven_sync_error":
        evaluate = driven_sync_objective(data, cfg.split, cfg.driven, cfg.discard, warmup=cfg.warmup)
    else:
        lam = float(grid_d.get("lyapunov", 1.0))
        evaluate = autonomous_horizon_objective(data, cfg.split, lam, horizon=cfg.horizon or 2000)
    best, table = grid_search(grid, replace(cfg.reservoir, seed=seed), evaluate)
    out_dir = _out(args) / cfg.id
    out_dir.mkdir(parents=True, exist_ok=True)
    table.to_csv(out_dir / "grid.csv")
    print(f"best (N, p, eta, alpha, sigma, lambda) = {best.hyper}; table -> {out_dir / 'grid.csv'}")
    return EXIT_OK


def cmd_ingest(args) -> int:
    spec = cfgmod.IngestSpec(
        path=args.csv,
        sample_rate=args.rate,
        cutoff=None if args.cutoff <= 0 else args.cutoff,
        time_column=args.time_col or None,
        theta_column=args.theta_col,
        omega_column=args.omega_col,
    )
    traj = ingest_csv(spec)
    out = Path(args.output)
    artifacts.write_table(out, ["t", "theta", "omega"], [[t, *row] for t, row in zip(traj.times, traj.data)])
    print(f"{len(traj)} rows -> {out}")
    return EXIT_OK


def cmd_emit(args) -> int:
    status = EXIT_OK
    for cfg in _configs(args):
        files = artifacts.emit_plot_data(_out(args) / cfg.id)
        print(f"{cfg.id}: {len(files)} files")
    return status


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rctransfer", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="verb", required=True)

    def exp_args(sp, seeds=True):
        sp.add_argument("experiment", nargs="?", help="registered id, figure prefix (fig2) or 'all'")
        sp.add_argument("--config", help="YAML experiment file instead of a registered id")
        sp.add_argument("--out", help="output root (default $RCTRANSFER_OUT or ./results)")
        if seeds:
            g = sp.add_mutually_exclusive_group()
            g.add_argument("--seed", type=int, help="run a single master seed")
            g.add_argument("--seeds", type=int, help="run seeds 0..N-1")

    sub.add_parser("list", help="registered experiments").set_defaults(func=cmd_list)
    sp = sub.add_parser("describe", help="print an experiment's setup")
    exp_args(sp, seeds=False)
    sp.set_defaults(func=cmd_describe)
    sp = sub.add_parser("run", help="run experiments and check thresholds")
    exp_args(sp)
    sp.add_argument("--save-models", action="store_true", help="write trained weights as .npz")
    sp.add_argument("--quiet", action="store_true")
    sp.set_defaults(func=cmd_run)
    sp = sub.add_parser("sweep", help="hyperparameter grid search")
    exp_args(sp)
    sp.add_argument("--grid", help="YAML with lists for p, eta, alpha, sigma, lam (+ objective, n_seeds)")
    sp.set_defaults(func=cmd_sweep)
    sp = sub.add_parser("ingest", help="filter and normalize an angle-sensor CSV")
    sp.add_argument("csv")
    sp.add_argument("--rate", type=float, default=50.0, help="sampling frequency in Hz")
    sp.add_argument("--cutoff", type=float, default=5.0, help="low-pass cutoff in Hz (<= 0 disables)")
    sp.add_argument("--time-col", default="t")
    sp.add_argument("--theta-col", default="theta")
    sp.add_argument("--omega-col", default=None)
    sp.add_argument("-o", "--output", required=True)
    sp.set_defaults(func=cmd_ingest)
    sp = sub.add_parser("emit-plot-data", help="gnuplot tables from a finished run")
    exp_args(sp, seeds=False)
    sp.set_defaults(func=cmd_emit)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, ContractError, IngestError, yaml.YAMLError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ExperimentError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
