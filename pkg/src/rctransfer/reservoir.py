"""Echo state network: fixed random weights, leaky-tanh state update and linear readout.

State update::

    r(n+1) = (1 - alpha) r(n) + alpha * tanh(A r(n) + W_in [b_in; u(n)])

Readout::

    v(n) = W_out [b_out; u(n-1); r(n)]
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from . import seeding
from .errors import ConstructionError, ContractError, DomainError


@dataclass(frozen=True)
class ReservoirConfig:
    N: int = 500
    p: float = 0.25
    eta: float = 0.99
    alpha: float = 0.95
    sigma: float = 1.0
    lam: float = 1e-10
    b_in: float = 1.0
    b_out: float = 1.0
    n_in: int = 3
    n_out: int = 3
    seed: int = 0

    def __post_init__(self):
        checks = [
            (self.N >= 1, "N >= 1"),
            (0 < self.p <= 1, "p in (0, 1]"),
            (self.eta > 0, "eta > 0"),
            (0 < self.alpha <= 1, "alpha in (0, 1]"),
            (self.sigma > 0, "sigma > 0"),
            (self.lam >= 0, "lambda >= 0"),
            (1 <= self.n_out <= self.n_in, "1 <= n_out <= n_in"),
        ]
        for ok, what in checks:
            if not ok:
                raise ContractError(f"invalid reservoir config ({what}): {self}")

    def with_seed(self, seed: int) -> "ReservoirConfig":
        return replace(self, seed=int(seed))

    @property
    def hyper(self) -> tuple:
        """(N, p, eta, alpha, sigma, lambda), the tuple figures are quoted in."""
        return (self.N, self.p, self.eta, self.alpha, self.sigma, self.lam)


@dataclass(frozen=True)
class ReservoirWeights:
    w_in: np.ndarray  # N x (n_in + 1), first column multiplies b_in
    a: np.ndarray  # N x N


@dataclass(frozen=True)
class ReservoirState:
    r: np.ndarray
    last_input: np.ndarray


def spectral_radius(a: np.ndarray, tol: float = 1e-10, max_iter: int = 100_000) -> float:
    """Largest eigenvalue magnitude by power iteration from the all-ones vector.

    Converges for primitive nonnegative matrices, which is what ``build`` makes.
    Raises ConstructionError when the iteration stalls or the matrix is nilpotent.
    """
    n = a.shape[0]
    x = np.full(n, 1.0 / math.sqrt(n))
    lam = 0.0
    for _ in range(max_iter):
        y = a @ x
        lam = float(np.linalg.norm(y))
        if lam == 0.0:
            raise ConstructionError("recurrent matrix has zero spectral radius; reseed")
        y /= lam
        if np.linalg.norm(y - x) < tol:
            return lam
        x = y
    raise ConstructionError(f"power iteration did not converge in {max_iter} iterations; reseed")


def build(config: ReservoirConfig, max_attempts: int = 5) -> ReservoirWeights:
    """Draw W_in ~ U[-sigma, sigma] and a sparse nonnegative A rescaled to radius eta.

    Each A entry is present with probability p and has magnitude U[0, 1). A draw
    whose radius cannot be found is replaced by a fresh draw from the same stream,
    so the result stays a pure function of ``config``.
    """
    rng = seeding.rng(config.seed, seeding.WEIGHTS)
    N = config.N
    w_in = rng.uniform(-config.sigma, config.sigma, size=(N, config.n_in + 1))
    last = None
    for _ in range(max_attempts):
        mask = rng.random((N, N)) < config.p
        a = np.where(mask, rng.random((N, N)), 0.0)
        try:
            rho = spectral_radius(a)
        except ConstructionError as exc:
            last = exc
            continue
        return ReservoirWeights(w_in, a * (config.eta / rho))
    raise ConstructionError(f"no usable recurrent matrix after {max_attempts} draws: {last}")


class Stepper:
    """Applies the state update with fixed weights; the single kernel every run uses."""

    def __init__(self, weights: ReservoirWeights, config: ReservoirConfig):
        self.a = weights.a
        self.w_u = np.ascontiguousarray(weights.w_in[:, 1:])
        self.w_b = weights.w_in[:, 0] * config.b_in
        self.alpha = config.alpha
        self.n_in = config.n_in

    def __call__(self, r: np.ndarray, u: np.ndarray) -> np.ndarray:
        pre = self.a @ r + self.w_u @ u + self.w_b
        return (1.0 - self.alpha) * r + self.alpha * np.tanh(pre)


def step(weights: ReservoirWeights, config: ReservoirConfig, state: ReservoirState, u) -> ReservoirState:
    u = np.asarray(u, dtype=float)
    if u.shape != (config.n_in,):
        raise ContractError(f"input has shape {u.shape}, expected ({config.n_in},)")
    if state.r.shape != (config.N,):
        raise ContractError(f"state has shape {state.r.shape}, expected ({config.N},)")
    if not np.all(np.isfinite(u)):
        raise DomainError(f"non-finite reservoir input {u}")
    return ReservoirState(Stepper(weights, config)(state.r, u), u)


def readout_vector(b_out: float, last_input: np.ndarray, r: np.ndarray) -> np.ndarray:
    return np.concatenate(([b_out], last_input, r))


def readout(w_out, state: ReservoirState, b_out: float = 1.0) -> np.ndarray:
    """v = W_out [b_out; u(n-1); r(n)]. ``w_out`` may be a ReadoutMatrix or an array."""
    w = getattr(w_out, "w_out", w_out)
    w = np.asarray(w)
    expected = 1 + state.last_input.shape[0] + state.r.shape[0]
    if w.ndim != 2 or w.shape[1] != expected:
        raise ContractError(f"readout matrix shape {w.shape} does not take a {expected}-vector")
    return w @ readout_vector(b_out, state.last_input, state.r)


def initial_state(config: ReservoirConfig, rng: np.random.Generator) -> np.ndarray:
    return rng.uniform(-1.0, 1.0, config.N)


def run_teacher_forced(
    weights: ReservoirWeights,
    config: ReservoirConfig,
    inputs,
    r0: Optional[np.ndarray] = None,
) -> np.ndarray:
    """Drive the reservoir open loop with ``inputs`` (rows u(0), u(1), ...).

    Returns an array whose row n is r(n+1), the state after consuming u(n).
    ``r0`` defaults to a U(-1, 1) draw from the TRAIN_R0 stream of ``config.seed``.
    """
    inputs = np.asarray(getattr(inputs, "data", inputs), dtype=float)
    if inputs.ndim != 2 or inputs.shape[1] != config.n_in:
        raise ContractError(f"inputs must be T x {config.n_in}, got {inputs.shape}")
    if not np.all(np.isfinite(inputs)):
        raise DomainError("non-finite teacher-forcing input")
    if r0 is None:
        r0 = initial_state(config, seeding.rng(config.seed, seeding.TRAIN_R0))
    stepper = Stepper(weights, config)
    states = np.empty((inputs.shape[0], config.N))
    r = np.asarray(r0, dtype=float)
    for n in range(inputs.shape[0]):
        r = stepper(r, inputs[n])
        states[n] = r
    return states


def warm_start(weights, config, inputs, r0=None) -> ReservoirState:
    """Teacher-force through ``inputs`` and return the state ready to close the loop."""
    inputs = np.asarray(getattr(inputs, "data", inputs), dtype=float)
    states = run_teacher_forced(weights, config, inputs, r0)
    return ReservoirState(states[-1], inputs[-1].copy())
