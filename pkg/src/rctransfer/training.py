"""Readout training by ridge regression, and exhaustive hyperparameter search."""

from __future__ import annotations

import csv
import itertools
import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Callable, NamedTuple, Sequence

import numpy as np
import scipy.linalg

from .dynamics import DatasetSplit, Trajectory
from .errors import ContractError
from .reservoir import ReservoirConfig, ReservoirWeights, build, run_teacher_forced


@dataclass(frozen=True)
class ReadoutMatrix:
    w_out: np.ndarray  # n_out x (1 + n_in + N)
    trained_on: str = ""

    def __post_init__(self):
        if not np.all(np.isfinite(self.w_out)):
            raise ContractError("readout matrix has non-finite entries")

    @property
    def shape(self):
        return self.w_out.shape


def with_constants(data, constants: Sequence[float] = ()) -> np.ndarray:
    """Append constant auxiliary input columns (never predicted) to ``data``."""
    data = np.asarray(getattr(data, "data", data), dtype=float)
    if not constants:
        return data
    return np.hstack([data, np.tile(np.asarray(constants, dtype=float), (data.shape[0], 1))])


def assemble(states, inputs, split: DatasetSplit, n_out: int, b_out: float = 1.0):
    """Regression matrices from a teacher-forced run.

    ``states[k]`` must be r(k+1), as returned by ``run_teacher_forced``. For
    k = washout .. washout+train-1 (0-based) the columns are
    ``U[:, j] = [b_out; u(k); r(k+1)]`` and ``V[:, j] = u(k+1)[:n_out]``.
    """
    states = np.asarray(states)
    inputs = np.asarray(getattr(inputs, "data", inputs))
    tau, T = split.washout_len, split.train_len
    if states.shape[0] < tau + T or inputs.shape[0] < tau + T + 1:
        raise ContractError(
            f"need {tau + T} states and {tau + T + 1} inputs, got {states.shape[0]} states "
            f"and {inputs.shape[0]} inputs"
        )
    ks = np.arange(tau, tau + T)
    U = np.vstack([np.full((1, T), b_out), inputs[ks].T, states[ks].T])
    V = inputs[ks + 1, :n_out].T
    return U, V


def _solve_normal(G, rhs, lam: float) -> np.ndarray:
    if lam == 0 and np.linalg.matrix_rank(G) < G.shape[0]:
        raise ContractError("U U^T is singular at lambda = 0; use lambda > 0")
    G = G.copy()
    G[np.diag_indices_from(G)] += lam
    with warnings.catch_warnings():
        # ill-conditioning at lambda ~ 1e-10 is expected; the solve is still the ridge optimum
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        try:
            return scipy.linalg.solve(G, rhs, assume_a="pos")
        except np.linalg.LinAlgError:
            return scipy.linalg.solve(G, rhs, assume_a="sym")


def ridge_solve(U, V, lam: float, trained_on: str = "") -> ReadoutMatrix:
    """W_out minimizing ||V - W U||^2 + lam ||W||^2, via a symmetric solve (no inverse)."""
    U = np.asarray(U, dtype=float)
    V = np.asarray(V, dtype=float)
    if lam < 0:
        raise ContractError("ridge parameter must be >= 0")
    if U.shape[1] != V.shape[1]:
        raise ContractError(f"U has {U.shape[1]} columns but V has {V.shape[1]}")
    return ReadoutMatrix(_solve_normal(U @ U.T, U @ V.T, lam).T, trained_on)


CHUNK = 20_000


def _column_blocks(states, inputs, split: DatasetSplit, config: ReservoirConfig):
    start, end = split.washout_len, split.washout_len + split.train_len
    for a in range(start, end, CHUNK):
        b = min(a + CHUNK, end)
        sub = DatasetSplit(a, b - a, 1)
        yield assemble(states[:b], inputs[: b + 1], sub, config.n_out, config.b_out)


class TrainResult(NamedTuple):
    weights: ReservoirWeights
    readout: ReadoutMatrix
    train_rmse: float


def train(
    data: Trajectory,
    config: ReservoirConfig,
    split: DatasetSplit,
    constants: Sequence[float] = (),
    r0=None,
    label: str = "",
) -> TrainResult:
    """Build, wash out, teacher-force, and fit the readout on one normalized record.

    ``constants`` are appended as fixed auxiliary inputs (e.g. a drive frequency).
    ``train_rmse`` is the one-step root-mean-square error over the T columns.
    """
    inputs = with_constants(data, constants)
    if inputs.shape[1] != config.n_in:
        raise ContractError(f"data + constants give {inputs.shape[1]} inputs, config expects {config.n_in}")
    split.check(inputs.shape[0] - 1)
    weights = build(config)
    need = split.washout_len + split.train_len + 1
    states = run_teacher_forced(weights, config, inputs[:need], r0)
    if split.train_len <= CHUNK:
        U, V = assemble(states, inputs[:need], split, config.n_out, config.b_out)
        readout = ridge_solve(U, V, config.lam, trained_on=label)
        rmse = float(np.sqrt(np.mean((readout.w_out @ U - V) ** 2)))
        return TrainResult(weights, readout, rmse)
    # long records: accumulate U U^T and U V^T over column blocks
    n_rows = 1 + config.n_in + config.N
    G = np.zeros((n_rows, n_rows))
    UV = np.zeros((n_rows, config.n_out))
    for U, V in _column_blocks(states, inputs[:need], split, config):
        G += U @ U.T
        UV += U @ V.T
    readout = ReadoutMatrix(_solve_normal(G, UV, config.lam).T, label)
    # second pass rebuilds the blocks rather than holding all of U
    sq = sum(float(np.sum((readout.w_out @ U - V) ** 2)) for U, V in _column_blocks(states, inputs[:need], split, config))
    rmse = math.sqrt(sq / (split.train_len * config.n_out))
    return TrainResult(weights, readout, rmse)


OBJECTIVES = ("driven_sync_error", "autonomous_horizon")


@dataclass(frozen=True)
class GridSpec:
    p: tuple = (0.25,)
    eta: tuple = (0.99,)
    alpha: tuple = (0.95,)
    sigma: tuple = (1.0,)
    lam: tuple = (1e-10,)
    objective: str = "driven_sync_error"
    n_seeds: int = 1

    def __post_init__(self):
        for name in ("p", "eta", "alpha", "sigma", "lam"):
            vals = tuple(float(v) for v in getattr(self, name))
            if not vals:
                raise ContractError(f"grid list {name!r} is empty")
            object.__setattr__(self, name, vals)
        if self.n_seeds < 1:
            raise ContractError("n_seeds must be >= 1")
        if self.objective not in OBJECTIVES:
            raise ContractError(f"objective must be one of {OBJECTIVES}")

    def candidates(self):
        return itertools.product(self.p, self.eta, self.alpha, self.sigma, self.lam)


SCORE_COLUMNS = ("p", "eta", "alpha", "sigma", "lambda", "seed_count", "score")


@dataclass
class ScoreTable:
    rows: list = field(default_factory=list)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(SCORE_COLUMNS)
            for row in self.rows:
                w.writerow([f"{row[c]:.15g}" if isinstance(row[c], float) else row[c] for c in SCORE_COLUMNS])


class GridSearchError(RuntimeError):
    def __init__(self, message, table: ScoreTable):
        super().__init__(message)
        self.table = table


def grid_search(
    grid: GridSpec,
    base: ReservoirConfig,
    evaluate: Callable[[ReservoirConfig], float],
):
    """Exhaustive sweep; lower score is better.

    ``evaluate(config)`` scores one seeded configuration (non-finite or raising
    counts as divergence). Each candidate's score is the median over seeds
    ``base.seed .. base.seed + n_seeds - 1``; ties go to the lexicographically
    smallest (p, eta, alpha, sigma, lambda).
    """
    table = ScoreTable()
    best = None
    for cand in grid.candidates():
        p, eta, alpha, sigma, lam = cand
        scores = []
        for i in range(grid.n_seeds):
            cfg = replace(base, p=p, eta=eta, alpha=alpha, sigma=sigma, lam=lam, seed=base.seed + i)
            try:
                s = float(evaluate(cfg))
            except (ArithmeticError, RuntimeError, ValueError):
                s = math.inf
            scores.append(s if math.isfinite(s) else math.inf)
        score = float(np.median(scores))
        table.rows.append(dict(zip(SCORE_COLUMNS, (p, eta, alpha, sigma, lam, grid.n_seeds, score))))
        key = (score, cand)
        if math.isfinite(score) and (best is None or key < best):
            best = key
    if best is None:
        raise GridSearchError("every grid candidate diverged", table)
    p, eta, alpha, sigma, lam = best[1]
    return replace(base, p=p, eta=eta, alpha=alpha, sigma=sigma, lam=lam), table


def driven_sync_objective(
    data: Trajectory, split: DatasetSplit, driven=(1,), discard: int = 500, length=None, warmup: int = 0
):
    """Score = mean absolute sync error of the feedback channels on the held-out part of ``data``."""
    from .inference import DriveMask, run_driven
    from .metrics import sync_error
    from . import seeding

    def evaluate(cfg: ReservoirConfig) -> float:
        model = train(data, cfg, split)
        test = data.slice(split.washout_len + split.train_len)
        if length is not None:
            test = test.slice(0, length)
        mask = DriveMask.build(cfg.n_out, driven)
        r0 = seeding.rng(cfg.seed, seeding.DRIVE_R0).uniform(-1, 1, cfg.N)
        out = run_driven(model.weights, model.readout, cfg, mask, test, r0, warmup=warmup)
        rep = sync_error(test, out, discard)
        return float(np.mean([rep.errors[c] for c in mask.feedback]))

    return evaluate


def autonomous_horizon_objective(data: Trajectory, split: DatasetSplit, lyapunov: float, threshold=0.4, horizon=2000):
    """Score = minus the valid prediction time (Lyapunov units) after a warm start."""
    from .inference import run_autonomous
    from .metrics import valid_prediction_time
    from .reservoir import warm_start

    def evaluate(cfg: ReservoirConfig) -> float:
        model = train(data, cfg, split)
        start = split.washout_len + split.train_len
        state = warm_start(model.weights, cfg, data.data[start - split.washout_len : start + 1])
        truth = data.slice(start + 1, start + 1 + horizon)
        out = run_autonomous(model.weights, model.readout, cfg, state, len(truth), dt=data.dt)
        return -valid_prediction_time(truth, out, lyapunov, threshold).lyapunov_times

    return evaluate
