"""Run a configured experiment over its seeds and write the artifacts.

Output layout under ``<out_root>/<experiment id>/``:

- ``config.yaml``: the exact configuration that ran
- ``seed_<s>*.csv``: trajectories (t, truth channels, predicted channels)
- ``summary.csv``: long table (experiment, seed, metric, value); ``seed`` is the
  integer seed, ``median`` for the across-seed median, or ``all`` for
  experiment-level statistics
- ``verdict.csv``: one row per registered check
- ``sweep.csv``: per-delta medians (sweep experiments only)
"""

from __future__ import annotations

import math
import os
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
from scipy.stats import spearmanr

from .. import seeding
from ..dynamics import DatasetSplit, Trajectory, make_dataset
from ..errors import DivergenceError, ExperimentError
from ..inference import ChainSpec, ChainStage, DriveMask, ParallelSpec, auxiliary_test, run_chain, run_driven
from ..inference import run_autonomous, run_parallel
from ..metrics import largest_lyapunov, pairwise_desync, split_nodes, sync_error, valid_prediction_time
from ..reservoir import warm_start
from ..training import train, with_constants
from . import artifacts, config as cfgmod
from .config import ExperimentConfig, SystemConfig
from .ingest import ingest_csv

OUT_ENV = "RCTRANSFER_OUT"
CHANNEL_NAMES = {"pendulum": ("theta", "omega")}


def default_out_root() -> Path:
    return Path(os.environ.get(OUT_ENV, "results"))


def channel_names(system: SystemConfig) -> tuple:
    return CHANNEL_NAMES.get(system.family, ("x", "y", "z"))


@dataclass
class CheckResult:
    check: cfgmod.Check
    value: float
    passed: bool

    def line(self, exp_id: str) -> str:
        c = self.check
        verdict = "PASS" if self.passed else "FAIL"
        return f"{verdict} {exp_id}: median {c.metric} = {self.value:.4g} (need {c.op} {c.value:g})"


@dataclass
class Report:
    experiment: str
    out_dir: Path
    per_seed: dict  # seed -> {metric: value}
    aggregate: dict = field(default_factory=dict)
    checks: list = field(default_factory=list)
    elapsed: float = 0.0

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def lines(self) -> list:
        return [c.line(self.experiment) for c in self.checks]


def _dataset(system: SystemConfig, seed: int, stream: int, *extra, split: Optional[DatasetSplit] = None):
    return make_dataset(
        system.spec(),
        system.dt,
        system.transient_time,
        system.record_len,
        seeding.seed_sequence(seed, stream, *extra),
        system.substeps,
        split,
    )


def _drive_record(cfg: ExperimentConfig, system: SystemConfig, seed: int, tr: Trajectory) -> Trajectory:
    dv = _dataset(system, seed, seeding.DRIVE_IC)
    if cfg.drive_scaler == "train":
        # express the drive in the training record's units instead of its own min-max
        dv = Trajectory(dv.dt, dv.t0, tr.scaler.forward(dv.raw()), tr.scaler)
    return dv


def _r0(seed: int, stream: int, n: int, *extra) -> np.ndarray:
    return seeding.rng(seed, stream, *extra).uniform(-1.0, 1.0, n)


def _sync_metrics(truth, predicted, names, discard, prefix="") -> dict:
    truth = np.asarray(getattr(truth, "data", truth))
    rep = sync_error(truth[:, : len(names)], predicted, discard)
    m = {}
    for name, e, ph in zip(names, rep.errors, rep.phase_sync):
        m[f"{prefix}d{name}"] = e
        m[f"{prefix}phase_{name}"] = float(ph)
    return m


class _Context:
    def __init__(self, cfg: ExperimentConfig, out_dir: Path, save_models: bool):
        self.cfg = cfg
        self.out_dir = out_dir
        self.save_models = save_models

    def trajectory(self, name, times, truth, predicted, names, rows=None):
        rows = self.cfg.trajectory_rows if rows is None else rows
        artifacts.write_trajectory(self.out_dir / name, times, truth, predicted, names, rows)

    def model(self, name, model, rc):
        if self.save_models:
            (self.out_dir / "models").mkdir(exist_ok=True)
            artifacts.save_model(self.out_dir / "models" / name, model.weights, model.readout, rc)


# ---- per-kind seed runners ---------------------------------------------------


def _transfer(ctx: _Context, seed: int) -> dict:
    cfg, split = ctx.cfg, ctx.cfg.split
    tr = _dataset(cfg.train, seed, seeding.TRAIN_IC, split=split)
    rc = cfg.reservoir.with_seed(seed)
    model = train(tr, rc, split, cfg.constants, label=cfg.train.describe())
    ctx.model(f"seed_{seed}.npz", model, rc)
    if cfg.drive is None:
        dv = tr.slice(split.washout_len + split.train_len)
    else:
        dv = _drive_record(cfg, cfg.drive, seed, tr)
    names = channel_names(cfg.drive or cfg.train)
    mask = DriveMask.build(rc.n_out, cfg.driven, cfg.constants)
    r0 = _r0(seed, seeding.DRIVE_R0, rc.N)
    m = {"train_rmse": model.train_rmse}
    out = None
    if cfg.aux_test:
        try:
            aux = auxiliary_test(
                model.weights, model.readout, rc, mask, dv, r0, _r0(seed, seeding.AUX_R0, rc.N), warmup=cfg.warmup
            )
            out = aux.output_a
            m["aux_diff"] = aux.final_difference
        except DivergenceError:
            m["aux_diff"] = math.inf
    if out is None:
        out = run_driven(model.weights, model.readout, rc, mask, dv, r0, warmup=cfg.warmup)
    m.update(_sync_metrics(dv, out, names, cfg.discard))
    ctx.trajectory(f"seed_{seed}.csv", dv.times, dv.data[:, : len(names)], out.data, names)
    return m


def _sweep(ctx: _Context, seed: int) -> dict:
    cfg, split = ctx.cfg, ctx.cfg.split
    tr = _dataset(cfg.train, seed, seeding.TRAIN_IC, split=split)
    rc = cfg.reservoir.with_seed(seed)
    model = train(tr, rc, split, cfg.constants, label=cfg.train.describe())
    ctx.model(f"seed_{seed}.npz", model, rc)
    names = channel_names(cfg.drive)
    mask = DriveMask.build(rc.n_out, cfg.driven, cfg.constants)
    r0 = _r0(seed, seeding.DRIVE_R0, rc.N)
    base = cfg.drive.params[cfg.sweep_param]
    m = {"train_rmse": model.train_rmse}
    for delta in cfg.sweep:
        # one initial condition for every delta, so only the parameter differs across the sweep
        dv = _drive_record(cfg, cfg.drive.with_param(cfg.sweep_param, base - delta), seed, tr)
        try:
            out = run_driven(model.weights, model.readout, rc, mask, dv, r0, warmup=cfg.warmup)
        except DivergenceError:
            m.update({f"d{c}@{delta:g}": math.inf for c in names})
            continue
        rep = sync_error(dv, out, cfg.discard)
        m.update({f"d{c}@{delta:g}": e for c, e in zip(names, rep.errors)})
        ctx.trajectory(f"seed_{seed}_delta{delta:g}.csv", dv.times, dv.data, out.data, names)
    return m


def _chain(ctx: _Context, seed: int) -> dict:
    cfg, split = ctx.cfg, ctx.cfg.split
    stages = []
    m = {}
    for i, st in enumerate(cfg.stages, start=1):
        tr = _dataset(st.train, seed, seeding.TRAIN_IC, i, split=split)
        rc = st.reservoir.with_seed(seeding.child(seed, i))
        model = train(tr, rc, split, label=st.train.describe())
        ctx.model(f"seed_{seed}_stage{i}.npz", model, rc)
        stages.append(ChainStage(model.weights, model.readout, rc))
        m[f"stage{i}_train_rmse"] = model.train_rmse
    dv = _dataset(cfg.drive, seed, seeding.DRIVE_IC)
    names = channel_names(cfg.drive)
    r0s = [_r0(seed, seeding.DRIVE_R0, s.config.N, i) for i, s in enumerate(stages, start=1)]
    outs = run_chain(ChainSpec(tuple(stages), relay_channel=cfg.driven[0]), dv, r0s, warmup=cfg.warmup)
    for i, out in enumerate(outs, start=1):
        m.update(_sync_metrics(dv, out, names, cfg.discard, prefix=f"stage{i}_"))
    m.update(_sync_metrics(dv, outs[-1], names, cfg.discard))
    ctx.trajectory(f"seed_{seed}.csv", dv.times, dv.data, outs[-1].data, names)
    return m


def _parallel(ctx: _Context, seed: int) -> dict:
    cfg, split = ctx.cfg, ctx.cfg.split
    n = cfg.drive.n_nodes
    names = channel_names(cfg.drive)
    d = len(names)
    tr = _dataset(cfg.train, seed, seeding.TRAIN_IC, split=split)
    rc = cfg.reservoir.with_seed(seed)
    model = train(tr.channels(range(d)), rc, split, label=cfg.train.describe() + ", node 1")
    ctx.model(f"seed_{seed}.npz", model, rc)
    dv = _dataset(cfg.drive, seed, seeding.DRIVE_IC)
    m = {
        "train_rmse": model.train_rmse,
        "train_desync": pairwise_desync(split_nodes(tr, cfg.train.n_nodes)),
        "desync": pairwise_desync(split_nodes(dv, n)),
    }
    mask = DriveMask.build(rc.n_out, cfg.driven)
    par = ParallelSpec(n, model.weights, model.readout, rc, cfg.coupling_eps, mask)
    r0s = [_r0(seed, seeding.DRIVE_R0, rc.N, i) for i in range(1, n + 1)]
    outs = run_parallel(par, dv, r0s, warmup=cfg.warmup)
    for i, (node, out) in enumerate(zip(split_nodes(dv, n), outs), start=1):
        m.update(_sync_metrics(node, out, names, cfg.discard, prefix=f"node{i}_"))
    node_names = [f"{c}{i}" for i in range(1, n + 1) for c in names]
    ctx.trajectory(f"seed_{seed}.csv", dv.times, dv.data, np.hstack([o.data for o in outs]), node_names)
    return m


def _pendulum(ctx: _Context, seed: int) -> dict:
    cfg, split = ctx.cfg, ctx.cfg.split
    names = channel_names(cfg.train)
    m = {}
    lam = None
    if cfg.lyapunov is not None:
        L = cfg.lyapunov
        lam = largest_lyapunov(
            cfg.train.spec(), L.dt, L.total_time, L.renorm_interval, L.transient_time, seed=seed
        ).lambda_max
        m["lyapunov"] = lam
    tr = _dataset(cfg.train, seed, seeding.TRAIN_IC, split=split)
    rc = cfg.reservoir.with_seed(seed)
    model = train(tr, rc, split, cfg.constants, label=cfg.train.describe())
    ctx.model(f"seed_{seed}.npz", model, rc)
    m["train_rmse"] = model.train_rmse
    if cfg.horizon:
        start = split.washout_len + split.train_len
        inputs = with_constants(tr, cfg.constants)
        state = warm_start(model.weights, rc, inputs[start - split.washout_len : start + 1])
        truth = tr.slice(start + 1, start + 1 + cfg.horizon)
        auto = run_autonomous(model.weights, model.readout, rc, state, len(truth), dt=tr.dt, t0=truth.t0)
        h = valid_prediction_time(truth, auto, lam if lam else 1.0)
        m["vpt_time"] = h.model_time
        m["vpt_saturated"] = float(h.saturated)
        if lam:
            m["vpt_lyap"] = h.lyapunov_times
        ctx.trajectory(f"seed_{seed}_autonomous.csv", truth.times, truth.data, auto.data, names)
    dv = ingest_csv(cfg.ingest) if cfg.ingest is not None else _dataset(cfg.drive, seed, seeding.DRIVE_IC)
    mask = DriveMask.build(rc.n_out, cfg.driven, cfg.constants)
    out = run_driven(model.weights, model.readout, rc, mask, dv, _r0(seed, seeding.DRIVE_R0, rc.N), warmup=cfg.warmup)
    m.update(_sync_metrics(dv, out, names, cfg.discard))
    ctx.trajectory(f"seed_{seed}.csv", dv.times, dv.data, out.data, names)
    return m


RUNNERS = {"transfer": _transfer, "sweep": _sweep, "chain": _chain, "parallel": _parallel, "pendulum": _pendulum}


# ---- aggregation -------------------------------------------------------------


def _fill_diverged(cfg: ExperimentConfig) -> dict:
    # a diverged seed fails every "error below" check and never counts as phase-locked
    m = {"diverged": 1.0}
    for c in cfg.checks:
        m[c.metric] = 0.0 if "phase" in c.metric else math.inf
    return m


def _aggregate(cfg: ExperimentConfig, per_seed: dict) -> dict:
    keys = []
    for m in per_seed.values():
        keys += [k for k in m if k not in keys]
    agg = {}
    for k in keys:
        vals = [m[k] for m in per_seed.values() if k in m]
        agg[k] = float(np.median(vals))
    if cfg.kind == "sweep":
        names = channel_names(cfg.drive)
        deltas = np.asarray(cfg.sweep)
        for c in names:
            med = np.asarray([agg.get(f"d{c}@{d:g}", math.nan) for d in deltas])
            ok = np.isfinite(med)
            rho = spearmanr(deltas[ok], med[ok]).statistic if ok.sum() > 2 else math.nan
            agg[f"spearman_d{c}"] = float(rho)
    return agg


def _clean(out_dir: Path) -> None:
    # only files this runner writes
    for pattern in ("seed_*.csv", "seed_*.dat", "summary.*", "verdict.*", "sweep.*", "models/*.npz"):
        for p in out_dir.glob(pattern):
            p.unlink()


def run_experiment(
    cfg: ExperimentConfig,
    out_root=None,
    save_models: bool = False,
    log=None,
) -> Report:
    """Run every seed of ``cfg`` and write the artifacts; returns the Report.

    A seed whose reservoir diverges is recorded (``diverged = 1``) and scored as
    failing; any other error is re-raised as ExperimentError naming id and seed.
    """
    out_root = Path(out_root) if out_root is not None else default_out_root()
    out_dir = out_root / cfg.id
    out_dir.mkdir(parents=True, exist_ok=True)
    _clean(out_dir)
    cfgmod.save(cfg, out_dir / "config.yaml")
    ctx = _Context(cfg, out_dir, save_models)
    runner = RUNNERS[cfg.kind]
    t_start = time.perf_counter()
    per_seed = {}
    for seed in cfg.seeds:
        t0 = time.perf_counter()
        try:
            m = runner(ctx, seed)
            m.setdefault("diverged", 0.0)
        except DivergenceError as exc:
            m = _fill_diverged(cfg)
            m["diverged_step"] = float(exc.step) if exc.step is not None else math.nan
        except Exception as exc:
            raise ExperimentError(f"{cfg.id} seed {seed}: {type(exc).__name__}: {exc}", cfg.id, seed) from exc
        per_seed[seed] = m
        if log is not None:
            shown = ", ".join(f"{k}={v:.4g}" for k, v in m.items() if k in {c.metric for c in cfg.checks})
            log(f"{cfg.id} seed {seed}: {shown} ({time.perf_counter() - t0:.1f}s)")
    agg = _aggregate(cfg, per_seed)
    checks = []
    for c in cfg.checks:
        v = agg.get(c.metric, math.nan)
        checks.append(CheckResult(c, v, c.passes(v)))
    report = Report(cfg.id, out_dir, per_seed, agg, checks, time.perf_counter() - t_start)
    _write_reports(cfg, report)
    return report


def _write_reports(cfg: ExperimentConfig, rep: Report) -> None:
    rows = []
    for seed, m in rep.per_seed.items():
        rows += [(cfg.id, seed, k, v) for k, v in m.items()]
    seed_keys = {k for m in rep.per_seed.values() for k in m}
    rows += [(cfg.id, "median", k, v) for k, v in rep.aggregate.items() if k in seed_keys]
    rows += [(cfg.id, "all", k, v) for k, v in rep.aggregate.items() if k not in seed_keys]
    artifacts.write_table(rep.out_dir / "summary.csv", artifacts.SUMMARY_COLUMNS, rows)
    artifacts.write_table(
        rep.out_dir / "verdict.csv",
        artifacts.VERDICT_COLUMNS,
        [(cfg.id, c.check.metric, c.check.op, c.check.value, c.value, c.passed) for c in rep.checks],
    )
    if cfg.kind == "sweep":
        names = channel_names(cfg.drive)
        table = [[d] + [rep.aggregate.get(f"d{c}@{d:g}", math.nan) for c in names] for d in cfg.sweep]
        artifacts.write_table(rep.out_dir / "sweep.csv", ["delta", *(f"median_d{c}" for c in names)], table)
