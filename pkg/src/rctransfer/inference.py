"""Prediction-phase runs of trained reservoirs.

Every run records ``out[n]``, the reservoir's estimate of the signal at sample n,
so outputs line up row-for-row with the driving trajectory. Row 0 of a driven run
is the all-zero initial guess and belongs to the transient that metrics discard.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import NamedTuple, Optional, Sequence

import numpy as np

from .dynamics import Trajectory
from .errors import ContractError, DivergenceError
from .reservoir import ReservoirConfig, ReservoirState, ReservoirWeights, Stepper, readout_vector
from .training import ReadoutMatrix

DIVERGENCE_BOUND = 10.0  # closed loop: outputs are normalized, so |v| > 10 is off the attractor
# driven runs start from a random state off the trained manifold and may overshoot
# for a few steps before the drive pulls them in; only runaway growth counts
DRIVEN_DIVERGENCE_BOUND = 1e8


class Mode(str, enum.Enum):
    FEEDBACK = "feedback"
    DRIVEN = "driven"
    CONSTANT = "constant"


@dataclass(frozen=True)
class DriveMask:
    """Routing of each reservoir input channel in the prediction phase."""

    modes: tuple
    constants: tuple = ()  # values for the CONSTANT channels, in channel order

    def __post_init__(self):
        object.__setattr__(self, "modes", tuple(Mode(m) for m in self.modes))
        object.__setattr__(self, "constants", tuple(float(c) for c in self.constants))
        n_const = sum(m is Mode.CONSTANT for m in self.modes)
        if n_const != len(self.constants):
            raise ContractError(f"{n_const} constant channels but {len(self.constants)} values")
        seen_const = False
        for m in self.modes:
            if m is Mode.CONSTANT:
                seen_const = True
            elif seen_const:
                raise ContractError("constant channels must follow every predicted channel")

    @classmethod
    def build(cls, n_out: int, driven: Sequence[int] = (1,), constants: Sequence[float] = ()) -> "DriveMask":
        modes = [Mode.DRIVEN if c in driven else Mode.FEEDBACK for c in range(n_out)]
        modes += [Mode.CONSTANT] * len(constants)
        return cls(tuple(modes), tuple(constants))

    @property
    def n_in(self) -> int:
        return len(self.modes)

    @property
    def n_out(self) -> int:
        return sum(m is not Mode.CONSTANT for m in self.modes)

    @property
    def feedback(self) -> list:
        return [i for i, m in enumerate(self.modes) if m is Mode.FEEDBACK]

    @property
    def driven(self) -> list:
        return [i for i, m in enumerate(self.modes) if m is Mode.DRIVEN]

    @property
    def constant_channels(self) -> list:
        return [i for i, m in enumerate(self.modes) if m is Mode.CONSTANT]


def _check_mask(mask: DriveMask, config: ReservoirConfig):
    if mask.n_in != config.n_in or mask.n_out != config.n_out:
        raise ContractError(
            f"mask has {mask.n_in} inputs / {mask.n_out} outputs, reservoir has {config.n_in} / {config.n_out}"
        )


def _w(readout) -> np.ndarray:
    return np.asarray(getattr(readout, "w_out", readout))


def run_autonomous(
    weights: ReservoirWeights,
    readout,
    config: ReservoirConfig,
    state: ReservoirState,
    n_steps: int,
    mask: Optional[DriveMask] = None,
    dt: float = 1.0,
    t0: float = 0.0,
) -> Trajectory:
    """Closed loop: each output becomes the next input (constant channels held fixed).

    ``state`` is a warm-started ReservoirState; the first output row is its readout.
    If any output exceeds 10 in magnitude the run stops and ``diverged_at`` holds
    the offending row index.
    """
    if mask is None:
        mask = DriveMask.build(config.n_out, driven=(), constants=state.last_input[config.n_out :])
    _check_mask(mask, config)
    step = Stepper(weights, config)
    W = _w(readout)
    const_idx = mask.constant_channels
    u_prev = state.last_input.astype(float).copy()
    r = state.r
    out = np.empty((n_steps, config.n_out))
    diverged_at = None
    u = np.empty(config.n_in)
    u[const_idx] = mask.constants
    for n in range(n_steps):
        v = W @ readout_vector(config.b_out, u_prev, r)
        if not np.all(np.abs(v) <= DIVERGENCE_BOUND):
            diverged_at = n
            out = out[:n]
            break
        out[n] = v
        u = u.copy()
        u[: config.n_out] = v
        r = step(r, u)
        u_prev = u
    return Trajectory(dt, t0, out, diverged_at=diverged_at)


def _drive_data(drive, n_steps: Optional[int]) -> np.ndarray:
    data = np.asarray(getattr(drive, "data", drive), dtype=float)
    if n_steps is None:
        n_steps = data.shape[0]
    if data.shape[0] < n_steps:
        raise ContractError(f"drive has {data.shape[0]} samples, run needs {n_steps}")
    return data[:n_steps]


def run_driven(
    weights: ReservoirWeights,
    readout,
    config: ReservoirConfig,
    mask: DriveMask,
    drive,
    r0,
    n_steps: Optional[int] = None,
    return_states: bool = False,
    warmup: int = 0,
):
    """Drive-response run: DRIVEN channels are overwritten by ``drive`` before every update.

    ``drive`` rows are samples of the driving system (its own normalization);
    only the DRIVEN columns are read. For the first ``warmup`` steps the FEEDBACK
    inputs are held at zero so a random ``r0`` is pulled toward the drive before
    the loop closes. Returns the output Trajectory, plus the
    reservoir states (row n = r(n+1)) when ``return_states`` is set. Raises
    DivergenceError if an output exceeds 1e8 in magnitude or is not finite.
    """
    _check_mask(mask, config)
    data = _drive_data(drive, n_steps)
    L = data.shape[0]
    step = Stepper(weights, config)
    W = _w(readout)
    fb, dr = mask.feedback, mask.driven
    u = np.zeros(config.n_in)
    u[mask.constant_channels] = mask.constants
    v = np.zeros(config.n_out)
    r = np.asarray(r0, dtype=float)
    out = np.empty((L, config.n_out))
    states = np.empty((L, config.N)) if return_states else None
    for n in range(L):
        u = u.copy()
        u[fb] = v[fb] if n >= warmup else 0.0
        u[dr] = data[n, dr]
        out[n] = v
        r = step(r, u)
        if states is not None:
            states[n] = r
        v = W @ readout_vector(config.b_out, u, r)
        if not np.all(np.abs(v) <= DRIVEN_DIVERGENCE_BOUND):
            raise DivergenceError(f"driven reservoir output diverged at step {n + 1}", step=n + 1)
    traj = Trajectory(getattr(drive, "dt", 1.0), getattr(drive, "t0", 0.0), out)
    return (traj, states) if return_states else traj


class AuxiliaryResult(NamedTuple):
    output_a: Trajectory
    output_b: Trajectory
    final_difference: float
    converged: bool


def auxiliary_test(
    weights, readout, config, mask, drive, r0_a, r0_b, tol: float = 1e-6, warmup: int = 0
) -> AuxiliaryResult:
    """Two identical driven copies from different initial states.

    ``converged`` is true when their mean absolute output difference over the
    final quarter of the run is below ``tol`` (the response forgot its initial
    condition, i.e. generalized synchronization with the drive).
    """
    a = run_driven(weights, readout, config, mask, drive, r0_a, warmup=warmup)
    b = run_driven(weights, readout, config, mask, drive, r0_b, warmup=warmup)
    tail = len(a) - len(a) // 4
    diff = float(np.mean(np.abs(a.data[tail:] - b.data[tail:])))
    return AuxiliaryResult(a, b, diff, diff < tol)


@dataclass(frozen=True)
class ChainStage:
    weights: ReservoirWeights
    readout: ReadoutMatrix
    config: ReservoirConfig


@dataclass(frozen=True)
class ChainSpec:
    """Reservoirs in series: stage 1 hears the physical drive, stage i the output of stage i-1."""

    stages: tuple
    relay_channel: int = 1

    def __post_init__(self):
        if not self.stages:
            raise ContractError("a chain needs at least one stage")
        n_in = {s.config.n_in for s in self.stages}
        n_out = {s.config.n_out for s in self.stages}
        if len(n_in) != 1 or len(n_out) != 1:
            raise ContractError("all chain stages must share input and output dimensions")
        if not 0 <= self.relay_channel < self.stages[0].config.n_out:
            raise ContractError("relay channel must be an output channel")


def run_chain(chain: ChainSpec, drive, r0s: Sequence, n_steps: Optional[int] = None, warmup: int = 0) -> list:
    """All stages advance together each sample.

    At sample n stage 1 takes the drive value and stage i > 1 takes stage i-1's
    estimate of the relay channel at the same sample n, so the relayed signal is
    time-aligned. Returns one output Trajectory per stage; the last is the remote one.
    """
    data = _drive_data(drive, n_steps)
    L = data.shape[0]
    k = chain.relay_channel
    n_out = chain.stages[0].config.n_out
    masks = [DriveMask.build(n_out, driven=(k,)) for _ in chain.stages]
    steppers = [Stepper(s.weights, s.config) for s in chain.stages]
    Ws = [_w(s.readout) for s in chain.stages]
    rs = [np.asarray(r, dtype=float) for r in r0s]
    if len(rs) != len(chain.stages):
        raise ContractError(f"{len(chain.stages)} stages but {len(rs)} initial states")
    vs = [np.zeros(n_out) for _ in chain.stages]
    us = [np.zeros(s.config.n_in) for s in chain.stages]
    outs = [np.empty((L, n_out)) for _ in chain.stages]
    for n in range(L):
        relay = [data[n, k]] + [vs[i - 1][k] for i in range(1, len(vs))]
        new_vs = []
        for i, stage in enumerate(chain.stages):
            u = us[i].copy()
            fb = masks[i].feedback
            u[fb] = vs[i][fb] if n >= warmup else 0.0
            u[k] = relay[i]
            outs[i][n] = vs[i]
            rs[i] = steppers[i](rs[i], u)
            v = Ws[i] @ readout_vector(stage.config.b_out, u, rs[i])
            if not np.all(np.abs(v) <= DRIVEN_DIVERGENCE_BOUND):
                raise DivergenceError(f"chain stage {i + 1} diverged at step {n + 1}", step=n + 1, stage=i + 1)
            us[i] = u
            new_vs.append(v)
        vs = new_vs
    dt, t0 = getattr(drive, "dt", 1.0), getattr(drive, "t0", 0.0)
    return [Trajectory(dt, t0, o) for o in outs]


@dataclass(frozen=True)
class ParallelSpec:
    """Copies of one trained reservoir coupled all-to-all on their fed-back outputs."""

    n_copies: int
    weights: ReservoirWeights
    readout: ReadoutMatrix
    config: ReservoirConfig
    eps: float
    mask: DriveMask
    coupled: Optional[tuple] = None  # channels entering the coupling function; None = all

    def __post_init__(self):
        if self.n_copies < 1:
            raise ContractError("n_copies must be >= 1")
        _check_mask(self.mask, self.config)
        if self.coupled is None:
            object.__setattr__(self, "coupled", (True,) * self.config.n_out)
        if len(self.coupled) != self.config.n_out:
            raise ContractError("coupling mask must cover the output channels")


def run_parallel(par: ParallelSpec, drives, r0s: Sequence, n_steps: Optional[int] = None, warmup: int = 0) -> list:
    """Simultaneous update of all copies from step-n values.

    ``drives`` has ``n_copies * n_out`` columns, node-major. Before each update,
    copy i's feedback channels become ``v_i + eps * sum_j (v_j - v_i)`` on the
    coupled channels (no time-step scaling); driven channels come from node i.
    """
    cfg = par.config
    n, d = par.n_copies, cfg.n_out
    data = _drive_data(drives, n_steps)
    if data.shape[1] != n * d:
        raise ContractError(f"drives need {n * d} columns, got {data.shape[1]}")
    if len(r0s) != n:
        raise ContractError(f"{n} copies but {len(r0s)} initial states")
    L = data.shape[0]
    step = Stepper(par.weights, cfg)
    W = _w(par.readout)
    fb, dr = par.mask.feedback, par.mask.driven
    cmask = np.zeros(d)
    cmask[[c for c in fb if par.coupled[c]]] = 1.0
    rs = [np.asarray(r, dtype=float) for r in r0s]
    V = np.zeros((n, d))
    U = np.zeros((n, cfg.n_in))
    U[:, par.mask.constant_channels] = par.mask.constants
    outs = np.empty((n, L, d))
    drive_nodes = data.reshape(L, n, d)
    for t in range(L):
        coupled = V + par.eps * (V[None, :, :] - V[:, None, :]).sum(axis=1) * cmask
        U = U.copy()
        U[:, fb] = coupled[:, fb] if t >= warmup else 0.0
        U[:, dr] = drive_nodes[t][:, dr]
        outs[:, t] = V
        newV = np.empty_like(V)
        for i in range(n):
            rs[i] = step(rs[i], U[i])
            newV[i] = W @ readout_vector(cfg.b_out, U[i], rs[i])
        if not np.all(np.abs(newV) <= DRIVEN_DIVERGENCE_BOUND):
            raise DivergenceError(f"parallel reservoir diverged at step {t + 1}", step=t + 1)
        V = newV
    dt, t0 = getattr(drives, "dt", 1.0), getattr(drives, "t0", 0.0)
    return [Trajectory(dt, t0, outs[i]) for i in range(n)]
