"""Synchronization errors, prediction horizons and dynamical invariants."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple, Optional, Sequence

import numpy as np

from . import seeding
from .dynamics import DIVERGENCE_LIMIT, System, Trajectory, field_of, _rk4
from .errors import ContractError, DivergenceError

PHASE_TOLERANCE = 0.10


def _data(x) -> np.ndarray:
    d = np.asarray(getattr(x, "data", x), dtype=float)
    return d[:, None] if d.ndim == 1 else d


@dataclass(frozen=True)
class SyncReport:
    errors: tuple  # mean absolute error per channel
    phase_sync: tuple  # per-channel phase agreement flag
    discard: int
    window: int

    def __post_init__(self):
        if self.window <= 0:
            raise ContractError("window must be positive")


def _upcrossings(x: np.ndarray) -> np.ndarray:
    """Indices where ``x`` crosses zero upward, with a 10%-of-std hysteresis band.

    Series are in normalized units, so zero is the midpoint of the recorded range.
    """
    h = 0.1 * x.std()
    idx = []
    armed = False
    for i, val in enumerate(x):
        if val < -h:
            armed = True
        elif val > h and armed:
            idx.append(i)
            armed = False
    return np.asarray(idx)


def phase_synchronized(truth: np.ndarray, predicted: np.ndarray, tol: float = PHASE_TOLERANCE) -> bool:
    """Mean interval between zero upcrossings agrees to within ``tol`` (relative)."""
    a, b = _upcrossings(truth), _upcrossings(predicted)
    if len(a) < 2 or len(b) < 2:
        return False
    ia, ib = np.diff(a).mean(), np.diff(b).mean()
    return bool(abs(ib - ia) / ia < tol)


def sync_error(truth, predicted, discard: int = 500, window: Optional[int] = None) -> SyncReport:
    """Per-channel mean |truth - predicted| over ``window`` rows after ``discard``."""
    a, b = _data(truth), _data(predicted)
    if a.shape[1] != b.shape[1]:
        raise ContractError(f"channel mismatch: {a.shape[1]} vs {b.shape[1]}")
    n = min(a.shape[0], b.shape[0])
    if window is None:
        window = n - discard
    if discard < 0 or window <= 0 or discard + window > n:
        raise ContractError(f"discard {discard} + window {window} exceeds available {n} rows")
    a, b = a[discard : discard + window], b[discard : discard + window]
    errors = tuple(float(e) for e in np.mean(np.abs(a - b), axis=0))
    phase = tuple(phase_synchronized(a[:, c], b[:, c]) for c in range(a.shape[1]))
    return SyncReport(errors, phase, discard, window)


class PredictionHorizon(NamedTuple):
    lyapunov_times: float
    model_time: float
    steps: int
    saturated: bool


def valid_prediction_time(truth: Trajectory, predicted: Trajectory, lyapunov: float, threshold: float = 0.4):
    """Time until ||pred - truth|| / sqrt(<||truth||^2>) first exceeds ``threshold``, in Lyapunov units.

    Both series start at the same instant. A prediction that never crosses the
    threshold returns the full horizon with ``saturated`` set; a prediction cut
    short by divergence counts as crossing where it stops.
    """
    a, b = _data(truth), _data(predicted)
    n = a.shape[0]
    m = min(n, b.shape[0])
    scale = math.sqrt(np.mean(np.sum(a**2, axis=1)))
    err = np.linalg.norm(a[:m] - b[:m], axis=1) / scale
    over = np.flatnonzero(err > threshold)
    dt = getattr(truth, "dt", 1.0)
    if over.size:
        steps, saturated = int(over[0]), False
    elif m < n:
        steps, saturated = m, False
    else:
        steps, saturated = n, True
    return PredictionHorizon(steps * dt * lyapunov, steps * dt, steps, saturated)


@dataclass(frozen=True)
class LyapunovEstimate:
    lambda_max: float  # natural-log units per model time
    integration_time: float
    renormalization_interval: float
    dt: float

    def __post_init__(self):
        if not math.isfinite(self.lambda_max):
            raise ContractError("Lyapunov estimate is not finite")


def largest_lyapunov(
    system: System,
    dt: float,
    total_time: float,
    renorm_interval: float,
    transient_time: float = 200.0,
    d0: float = 1e-8,
    seed: int = 0,
) -> LyapunovEstimate:
    """Benettin two-trajectory estimate.

    A reference and a trajectory displaced by ``d0`` are stepped together with
    RK4; every ``renorm_interval`` the separation is logged and pulled back to ``d0``.
    """
    rng = seeding.rng(seed, seeding.LYAP)
    f = field_of(system)
    s = rng.uniform(-1.0, 1.0, system.dim)
    t = 0.0
    for _ in range(int(round(transient_time / dt))):
        s = _rk4(f, s, t, dt)
        t += dt
    direction = rng.normal(size=system.dim)
    pair = np.stack([s, s + d0 * direction / np.linalg.norm(direction)])
    k = max(1, int(round(renorm_interval / dt)))
    n_blocks = int(round(total_time / (k * dt)))
    if n_blocks < 1:
        raise ContractError("total_time shorter than one renormalization interval")
    acc = 0.0
    for b in range(n_blocks):
        for _ in range(k):
            pair = _rk4(f, pair, t, dt)
            t += dt
        if not np.all(np.abs(pair) < DIVERGENCE_LIMIT):
            raise DivergenceError(f"{system.label()} diverged during Lyapunov estimation", step=b)
        sep = pair[1] - pair[0]
        d = float(np.linalg.norm(sep))
        acc += math.log(d / d0)
        pair[1] = pair[0] + sep * (d0 / d)
    T = n_blocks * k * dt
    return LyapunovEstimate(acc / T, T, k * dt, dt)


def pairwise_desync(nodes, discard: int = 0) -> float:
    """Time average of the mean pairwise Euclidean distance between node states.

    ``nodes`` is a sequence of equal-length (T, d) arrays or one (T, n, d) array.
    """
    if isinstance(nodes, np.ndarray) and nodes.ndim == 3:
        X = nodes
    else:
        arrs = [_data(x) for x in nodes]
        if len({a.shape for a in arrs}) != 1:
            raise ContractError("node trajectories must have equal shapes")
        X = np.stack(arrs, axis=1)
    n = X.shape[1]
    if n < 2:
        raise ContractError("need at least two nodes")
    X = X[discard:]
    dists = [np.linalg.norm(X[:, i] - X[:, j], axis=1) for i in range(n) for j in range(i + 1, n)]
    return float(np.mean(dists))


def split_nodes(traj, n_nodes: int) -> list:
    """Split a node-major network trajectory into per-node arrays."""
    d = _data(traj)
    k = d.shape[1] // n_nodes
    return [d[:, i * k : (i + 1) * k] for i in range(n_nodes)]


def mismatch_sweep(
    models: Sequence,
    delta_rhos: Sequence[float],
    drive_for: Callable[[float, int], Trajectory],
    mask,
    discard: int = 500,
    window: Optional[int] = None,
    warmup: int = 0,
) -> list:
    """Sync error of fixed trained reservoirs against drives of varying mismatch.

    ``models`` holds (weights, readout, config) per seed; ``drive_for(delta, i)``
    returns the normalized driving record for mismatch ``delta`` and seed index i.
    Each row carries the per-channel median over seeds plus the per-seed errors.
    A diverging run scores inf.
    """
    from .inference import run_driven

    rows = []
    for delta in delta_rhos:
        per_seed = []
        for i, (weights, readout, config) in enumerate(models):
            drive = drive_for(delta, i)
            r0 = seeding.rng(config.seed, seeding.DRIVE_R0).uniform(-1.0, 1.0, config.N)
            try:
                out = run_driven(weights, readout, config, mask, drive, r0, warmup=warmup)
                per_seed.append(sync_error(drive, out, discard, window).errors)
            except DivergenceError:
                per_seed.append((math.inf,) * config.n_out)
        per_seed = np.asarray(per_seed)
        rows.append(
            {
                "delta_rho": float(delta),
                "median": tuple(float(v) for v in np.median(per_seed, axis=0)),
                "per_seed": per_seed,
            }
        )
    return rows
