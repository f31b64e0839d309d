"""Ground-truth dynamical systems and the data pipeline that feeds the reservoirs.

All right-hand sides accept batched states of shape ``(..., dim)`` so that a
reference and a perturbed trajectory (or several seeds) can be stepped together.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .errors import ContractError, DivergenceError, DomainError

GRAVITY = 9.8
DIVERGENCE_LIMIT = 1e8


class Family(str, enum.Enum):
    LORENZ = "lorenz"
    ROSSLER = "rossler"
    CHEN = "chen"
    HINDMARSH_ROSE = "hindmarsh_rose"
    PENDULUM = "pendulum"


# (state dimension, parameter names in storage order)
_LAYOUT = {
    Family.LORENZ: (3, ("a", "rho", "c")),
    Family.ROSSLER: (3, ("a", "b", "c")),
    Family.CHEN: (3, ("a", "b", "c")),
    Family.HINDMARSH_ROSE: (3, ("a", "b", "c", "d", "r", "s", "x0", "I")),
    Family.PENDULUM: (2, ("J", "gamma", "k", "m", "r", "M", "omega_d")),
}


@dataclass(frozen=True)
class SystemSpec:
    """A named ODE family together with its parameter vector."""

    family: Family
    params: tuple

    def __post_init__(self):
        object.__setattr__(self, "family", Family(self.family))
        object.__setattr__(self, "params", tuple(float(p) for p in self.params))
        names = _LAYOUT[self.family][1]
        if len(self.params) != len(names):
            raise ContractError(
                f"{self.family.value} takes {len(names)} parameters {names}, got {len(self.params)}"
            )
        if not all(math.isfinite(p) for p in self.params):
            raise DomainError(f"non-finite parameter in {self.params}")

    @property
    def dim(self) -> int:
        return _LAYOUT[self.family][0]

    @property
    def autonomous(self) -> bool:
        return self.family is not Family.PENDULUM

    def param(self, name: str) -> float:
        return self.params[_LAYOUT[self.family][1].index(name)]

    def label(self) -> str:
        names = _LAYOUT[self.family][1]
        return self.family.value + "(" + ", ".join(f"{n}={p:g}" for n, p in zip(names, self.params)) + ")"


def lorenz(rho: float, a: float = 10.0, c: float = 8.0 / 3.0) -> SystemSpec:
    return SystemSpec(Family.LORENZ, (a, rho, c))


def rossler(c: float, a: float = 0.2, b: float = 0.2) -> SystemSpec:
    return SystemSpec(Family.ROSSLER, (a, b, c))


def chen(a: float, b: float, c: float) -> SystemSpec:
    return SystemSpec(Family.CHEN, (a, b, c))


def hindmarsh_rose(I: float, a=1.0, b=3.0, c=1.0, d=5.0, r=6e-3, s=4.0, x0=-1.56) -> SystemSpec:
    # x0 < 0 is the resting-potential convention under which I=2.1 bursts with
    # period 3 and I=2.8 bursts chaotically.
    return SystemSpec(Family.HINDMARSH_ROSE, (a, b, c, d, r, s, x0, I))


def pendulum(J=1.0, gamma=0.3, k=5.0, m=3.0, r=0.2, M=0.4, omega_d=1.0) -> SystemSpec:
    """Driven torsion pendulum with an off-centre mass (state: angle, angular velocity)."""
    return SystemSpec(Family.PENDULUM, (J, gamma, k, m, r, M, omega_d))


def _components(spec: SystemSpec):
    """Right-hand side written on unpacked components; works for floats and arrays."""
    p = spec.params
    fam = spec.family
    if fam is Family.LORENZ:
        a, rho, c = p
        return lambda t, x, y, z: (a * (y - x), rho * x - y - x * z, x * y - c * z)
    if fam is Family.ROSSLER:
        a, b, c = p
        return lambda t, x, y, z: (-y - z, x + a * y, b + z * (x - c))
    if fam is Family.CHEN:
        a, b, c = p
        return lambda t, x, y, z: (a * (y - x), (c - a) * x + c * y - x * z, x * y - b * z)
    if fam is Family.HINDMARSH_ROSE:
        a, b, c, d, r, s, x0, I = p
        return lambda t, x, y, z: (
            y - a * x * x * x + b * x * x - z + I,
            c - d * x * x - y,
            r * (s * (x - x0) - z),
        )
    J, gamma, k, m, r, M, wd = p
    mgr = m * GRAVITY * r
    return lambda t, th, w: (w, (-gamma * w - k * th + mgr * np.sin(th) + M * np.cos(wd * t)) / J)


def _field(spec: SystemSpec) -> Callable[[np.ndarray, float], np.ndarray]:
    comp = _components(spec)

    def f(s, t):
        if s.ndim == 1:
            return np.array(comp(t, *s.tolist()))
        parts = comp(t, *np.moveaxis(s, -1, 0))
        return np.stack(np.broadcast_arrays(*parts), axis=-1)

    return f


@dataclass(frozen=True)
class CoupledNetworkSpec:
    """Identical nodes with all-to-all diffusive coupling ``eps * sum_j [H(x_j) - H(x_i)]``.

    ``coupled`` selects the channels entering H; ``None`` couples every channel
    (the identity/diagonal coupling function).
    """

    node: SystemSpec
    n_nodes: int
    eps: float
    coupled: Optional[tuple] = None

    def __post_init__(self):
        if self.n_nodes < 2:
            raise ContractError("a coupled network needs at least two nodes")
        if not (self.eps >= 0 and math.isfinite(self.eps)):
            raise ContractError(f"coupling strength must be finite and >= 0, got {self.eps}")
        if self.coupled is None:
            object.__setattr__(self, "coupled", (True,) * self.node.dim)
        object.__setattr__(self, "coupled", tuple(bool(c) for c in self.coupled))
        if len(self.coupled) != self.node.dim:
            raise ContractError("coupling mask length must equal the node dimension")

    @property
    def dim(self) -> int:
        return self.n_nodes * self.node.dim

    @property
    def autonomous(self) -> bool:
        return self.node.autonomous

    def label(self) -> str:
        return f"network[{self.n_nodes} x {self.node.label()}, eps={self.eps:g}]"


def _network_field(net: CoupledNetworkSpec):
    f = _field(net.node)
    n, d = net.n_nodes, net.node.dim
    mask = np.asarray(net.coupled, dtype=float)
    eps = net.eps

    comp = _components(net.node)
    cm = [bool(c) for c in net.coupled]

    def g(s, t):
        if s.ndim == 1:
            # scalar path: a 3-node network is too small for array ops to pay off
            v = s.tolist()
            nodes = [v[i * d : (i + 1) * d] for i in range(n)]
            out = []
            for xi in nodes:
                fi = comp(t, *xi)
                for c in range(d):
                    cpl = sum(xj[c] - xi[c] for xj in nodes) if cm[c] else 0.0
                    out.append(fi[c] + eps * cpl)
            return np.array(out)
        X = s.reshape(s.shape[:-1] + (n, d))
        # pairwise differences are exactly zero for equal nodes, unlike sum - n*x
        diff = (X[..., None, :, :] - X[..., :, None, :]).sum(axis=-2)
        out = f(X, t) + eps * diff * mask
        return out.reshape(s.shape)

    return g


System = Union[SystemSpec, CoupledNetworkSpec]


def field_of(system: System):
    if isinstance(system, CoupledNetworkSpec):
        return _network_field(system)
    return _field(system)


def _check_state(system: System, state) -> np.ndarray:
    s = np.asarray(state, dtype=float)
    if s.shape[-1] != system.dim:
        raise ContractError(f"state length {s.shape[-1]} does not match dimension {system.dim}")
    if not np.all(np.isfinite(s)):
        raise DomainError(f"non-finite state {s}")
    return s


def rhs(spec: SystemSpec, state, t: float = 0.0) -> np.ndarray:
    """Time derivative of ``state`` for a single system."""
    return _field(spec)(_check_state(spec, state), t)


def coupled_rhs(net: CoupledNetworkSpec, flat_state, t: float = 0.0) -> np.ndarray:
    """Time derivative of a flattened network state (node-major)."""
    return _network_field(net)(_check_state(net, flat_state), t)


def _rk4(f, s, t, h):
    k1 = f(s, t)
    k2 = f(s + 0.5 * h * k1, t + 0.5 * h)
    k3 = f(s + 0.5 * h * k2, t + 0.5 * h)
    k4 = f(s + h * k3, t + h)
    return s + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _rk4_checked(f, s, t, h):
    k1 = f(s, t)
    if not np.all(np.isfinite(k1)):
        raise DomainError("non-finite slope at RK4 stage 1")
    k2 = f(s + 0.5 * h * k1, t + 0.5 * h)
    if not np.all(np.isfinite(k2)):
        raise DomainError("non-finite slope at RK4 stage 2")
    k3 = f(s + 0.5 * h * k2, t + 0.5 * h)
    if not np.all(np.isfinite(k3)):
        raise DomainError("non-finite slope at RK4 stage 3")
    k4 = f(s + h * k3, t + h)
    if not np.all(np.isfinite(k4)):
        raise DomainError("non-finite slope at RK4 stage 4")
    return s + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def rk4_step(system: System, state, t: float, dt: float) -> np.ndarray:
    """One classical fourth-order Runge-Kutta step."""
    if not dt > 0:
        raise ContractError(f"dt must be positive, got {dt}")
    return _rk4_checked(field_of(system), _check_state(system, state), t, dt)


def rk4_step_fn(f: Callable, state, t: float, dt: float) -> np.ndarray:
    """RK4 step for an arbitrary field ``f(state, t)``; used for test fields like x' = -x."""
    return _rk4_checked(f, np.asarray(state, dtype=float), t, dt)


@dataclass
class Scaler:
    """Per-channel min-max map onto [-1, 1]."""

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        self.lo = np.asarray(self.lo, dtype=float)
        self.hi = np.asarray(self.hi, dtype=float)
        if np.any(self.hi <= self.lo):
            bad = np.flatnonzero(self.hi <= self.lo).tolist()
            raise DomainError(f"channels {bad} are constant; min-max scaling is undefined")

    @classmethod
    def fit(cls, data, groups: Optional[Sequence[int]] = None) -> "Scaler":
        """Fit on ``data`` (rows = samples).

        ``groups`` assigns each channel a group id; channels sharing an id share
        one range (used to give every node of a network the same units).
        """
        data = np.asarray(data, dtype=float)
        lo, hi = data.min(axis=0), data.max(axis=0)
        if groups is not None:
            groups = np.asarray(groups)
            for g in np.unique(groups):
                sel = groups == g
                lo[sel], hi[sel] = lo[sel].min(), hi[sel].max()
        return cls(lo, hi)

    def forward(self, x) -> np.ndarray:
        return 2.0 * (np.asarray(x, dtype=float) - self.lo) / (self.hi - self.lo) - 1.0

    def inverse(self, y) -> np.ndarray:
        return (np.asarray(y, dtype=float) + 1.0) * 0.5 * (self.hi - self.lo) + self.lo

    def select(self, channels) -> "Scaler":
        return Scaler(self.lo[list(channels)], self.hi[list(channels)])


@dataclass
class Trajectory:
    """Uniformly sampled multichannel series; rows are samples.

    ``scaler`` is the map that produced ``data`` from physical units (``None``
    when the data are raw). ``diverged_at`` marks a run that was cut short.
    """

    dt: float
    t0: float
    data: np.ndarray
    scaler: Optional[Scaler] = None
    diverged_at: Optional[int] = None

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=float)
        if self.data.ndim == 1:
            self.data = self.data[:, None]

    def __len__(self):
        return self.data.shape[0]

    @property
    def n_channels(self) -> int:
        return self.data.shape[1]

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(len(self))

    def raw(self) -> np.ndarray:
        return self.data if self.scaler is None else self.scaler.inverse(self.data)

    def slice(self, start: int, stop: Optional[int] = None) -> "Trajectory":
        stop = len(self) if stop is None else stop
        return Trajectory(self.dt, self.t0 + start * self.dt, self.data[start:stop], self.scaler)

    def channels(self, idx) -> "Trajectory":
        idx = list(idx)
        sc = None if self.scaler is None else self.scaler.select(idx)
        return Trajectory(self.dt, self.t0, self.data[:, idx], sc)


@dataclass(frozen=True)
class DatasetSplit:
    washout_len: int = 400
    train_len: int = 2600
    test_len: int = 7000

    def __post_init__(self):
        if min(self.washout_len, self.train_len, self.test_len) <= 0:
            raise ContractError(f"split lengths must be positive: {self}")

    @property
    def total(self) -> int:
        return self.washout_len + self.train_len + self.test_len

    def check(self, n_rows: int) -> None:
        if self.washout_len + self.train_len > n_rows:
            raise ContractError(
                f"washout {self.washout_len} + train {self.train_len} exceeds record length {n_rows}"
            )


def integrate(system: System, initial, t0: float, dt: float, n_steps: int, substeps: int = 1) -> Trajectory:
    """Integrate with RK4 and return ``n_steps + 1`` samples spaced ``dt`` apart.

    Each sample interval is covered by ``substeps`` RK4 steps of size ``dt / substeps``.
    Raises DivergenceError (with the sample index) once any component exceeds 1e8.
    """
    if n_steps < 1:
        raise ContractError(f"n_steps must be >= 1, got {n_steps}")
    if not dt > 0:
        raise ContractError(f"dt must be positive, got {dt}")
    if substeps < 1:
        raise ContractError("substeps must be >= 1")
    f = field_of(system)
    s = _check_state(system, initial).copy()
    h = dt / substeps
    out = np.empty((n_steps + 1, system.dim))
    out[0] = s
    for i in range(1, n_steps + 1):
        t_base = t0 + (i - 1) * dt
        for j in range(substeps):
            prev = s
            s = _rk4(f, prev, t_base + j * h, h)
            if not np.all(np.isfinite(s)):
                _rk4_checked(f, prev, t_base + j * h, h)  # raises, naming the stage
                raise DomainError(f"non-finite state at sample {i}")
        if not np.all(np.abs(s) < DIVERGENCE_LIMIT):
            raise DivergenceError(f"{system.label()} diverged at sample {i}", step=i)
        out[i] = s
    return Trajectory(dt, t0, out)


def make_dataset(
    system: System,
    dt: float,
    transient_time: float,
    record_len: int,
    seed,
    substeps: int = 1,
    split: Optional[DatasetSplit] = None,
) -> Trajectory:
    """Random start in (-1, 1)^dim, discard the transient, record, min-max normalize.

    Network records share one range per state variable across nodes.
    Deterministic per ``seed`` (anything ``np.random.default_rng`` accepts).
    """
    if split is not None:
        split.check(record_len)
    if record_len < 2:
        raise ContractError("record_len must be >= 2")
    rng = np.random.default_rng(seed)
    s0 = rng.uniform(-1.0, 1.0, system.dim)
    n_trans = int(round(transient_time / dt))
    t = 0.0
    if n_trans > 0:
        warm = integrate(system, s0, 0.0, dt, n_trans, substeps)
        s0, t = warm.data[-1], n_trans * dt
    rec = integrate(system, s0, t, dt, record_len - 1, substeps)
    groups = None
    if isinstance(system, CoupledNetworkSpec):
        groups = np.tile(np.arange(system.node.dim), system.n_nodes)
    scaler = Scaler.fit(rec.data, groups)
    return Trajectory(dt, t, scaler.forward(rec.data), scaler)
