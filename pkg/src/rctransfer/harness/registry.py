"""The registered figure experiments.

Reservoir tuples are (N, p, eta, alpha, sigma, lambda). Sampling intervals are
per family: Lorenz 0.02, Chen 0.01, Rossler 0.05, Hindmarsh-Rose 0.2 (four RK4
substeps), pendulum 0.05. Checks compare the median over seeds.
"""

from __future__ import annotations

from dataclasses import replace

from ..dynamics import DatasetSplit
from ..reservoir import ReservoirConfig
from .config import Check, ExperimentConfig, LyapunovConfig, StageConfig, SystemConfig


def _rc(p, eta, alpha, sigma, lam, **kw) -> ReservoirConfig:
    return ReservoirConfig(N=500, p=p, eta=eta, alpha=alpha, sigma=sigma, lam=lam, **kw)


def lorenz(rho: float, **kw) -> SystemConfig:
    return SystemConfig("lorenz", {"a": 10.0, "rho": rho, "c": 8.0 / 3.0}, dt=0.02, **kw)


def rossler(c: float) -> SystemConfig:
    return SystemConfig("rossler", {"a": 0.2, "b": 0.2, "c": c}, dt=0.05)


def chen(a: float, b: float, c: float) -> SystemConfig:
    return SystemConfig("chen", {"a": a, "b": b, "c": c}, dt=0.01)


def hindmarsh_rose(I: float) -> SystemConfig:
    params = {"a": 1.0, "b": 3.0, "c": 1.0, "d": 5.0, "r": 6e-3, "s": 4.0, "x0": -1.56, "I": I}
    return SystemConfig("hindmarsh_rose", params, dt=0.2, substeps=4)


PENDULUM = SystemConfig(
    "pendulum",
    {"J": 1.0, "gamma": 0.3, "k": 5.0, "m": 3.0, "r": 0.2, "M": 0.4, "omega_d": 1.0},
    dt=0.05,
    record_len=400 + 80_000 + 2000,
)

RC_FIG1 = _rc(0.25, 0.99, 0.95, 1.0, 1e-10)
RC_FIG2A = _rc(0.1, 0.99, 0.85, 1.0, 1e-10)

SYNC_X = Check("dx", "<", 0.1)
PHASE_Z = Check("phase_z", ">", 0.5)  # majority of seeds flag z phase-locked


DRIVE_LEN = 7000  # same length as the held-out test part of a training record


def _drive(system: SystemConfig) -> SystemConfig:
    return replace(system, record_len=DRIVE_LEN)


def _transfer(id_, description, train, drive, rc, checks, **kw) -> ExperimentConfig:
    drive = None if drive is None else _drive(drive)
    return ExperimentConfig(
        id=id_, kind="transfer", description=description, train=train, drive=drive, reservoir=rc,
        checks=tuple(checks), **kw
    )


def _experiments() -> list:
    exps = [
        _transfer(
            "fig1", "Lorenz rho=60 trained and driven by y of the same system (held-out record)",
            lorenz(60), None, RC_FIG1, [Check("dx", "<", 0.05), Check("dz", "<", 0.05)],
        ),
        _transfer(
            "fig2a", "Lorenz period-4 (rho=166) reservoir driven by chaotic Lorenz rho=60",
            lorenz(166), lorenz(60), RC_FIG2A, [SYNC_X, PHASE_Z], aux_test=True,
        ),
        _transfer(
            "fig2b", "Lorenz chaotic (rho=60) reservoir driven by period-4 Lorenz rho=166",
            lorenz(60), lorenz(166), RC_FIG1, [SYNC_X, PHASE_Z], aux_test=True,
        ),
        _transfer(
            "fig2c", "Lorenz chaotic (rho=60) reservoir driven by chaotic Lorenz rho=50",
            lorenz(60), lorenz(50), RC_FIG1, [SYNC_X, PHASE_Z], aux_test=True,
        ),
        ExperimentConfig(
            id="fig3", kind="sweep",
            description="Lorenz rho=60 reservoir driven by rho=60-delta, delta = 0..15",
            train=lorenz(60), drive=_drive(lorenz(60)), reservoir=RC_FIG1,
            sweep=tuple(range(16)), trajectory_rows=1000,
            drive_scaler="train",  # the sweep compares parameters, not record-to-record min-max jitter
            checks=(Check("spearman_dx", ">=", 0.9), Check("spearman_dz", ">=", 0.9)),
        ),
        _transfer(
            "fig4a", "Rossler period-4 (c=4) reservoir driven by chaotic Rossler c=4.5",
            rossler(4.0), rossler(4.5), _rc(0.27, 0.95, 0.95, 0.5, 1e-10), [SYNC_X], aux_test=True,
        ),
        _transfer(
            "fig4b", "Chen period-8 (45, 3.18, 28) reservoir driven by chaotic Chen (35, 3, 28)",
            chen(45, 3.18, 28), chen(35, 3, 28), _rc(0.17, 0.8, 0.9, 0.65, 1e-10), [SYNC_X, PHASE_Z],
            aux_test=True,
        ),
        _transfer(
            "fig4c", "Hindmarsh-Rose period-3 (I=2.1) reservoir driven by chaotic HR I=2.8",
            hindmarsh_rose(2.1), hindmarsh_rose(2.8), _rc(0.36, 0.6, 0.8, 0.73, 8e-6), [SYNC_X],
            aux_test=True,
        ),
        _transfer(
            "fig5a", "Chen period-8 reservoir driven by chaotic Lorenz rho=60",
            chen(45, 3.18, 28), lorenz(60), _rc(0.25, 0.8, 0.5, 0.3, 1e-9), [SYNC_X, PHASE_Z],
            aux_test=True,
        ),
        _transfer(
            "fig5b", "chaotic Rossler (c=4.5) reservoir driven by chaotic Lorenz rho=60: expected desync",
            rossler(4.5), lorenz(60), _rc(0.2, 0.95, 0.9, 1.0, 1e-10),
            [Check("dx", ">=", 0.3), Check("aux_diff", "<", 1e-6)], aux_test=True,
        ),
        ExperimentConfig(
            id="fig6", kind="chain",
            description="5-reservoir relay chain (rho = 55, 166, 60, 45, 313) driven by y of Lorenz rho=50",
            stages=(
                StageConfig(lorenz(55), _rc(0.35, 0.95, 0.8, 0.1, 1e-10)),
                StageConfig(lorenz(166), RC_FIG2A),
                StageConfig(lorenz(60), RC_FIG1),
                StageConfig(lorenz(45), _rc(0.25, 0.95, 0.9, 0.5, 1e-10)),
                StageConfig(lorenz(313), _rc(0.15, 0.85, 0.99, 0.4, 1e-11)),
            ),
            drive=_drive(lorenz(50)),
            checks=(Check("dx", "<", 0.15), Check("dz", "<", 0.15)),
        ),
        ExperimentConfig(
            id="fig7", kind="parallel",
            description=(
                "3 coupled reservoirs trained on node 1 of 3 synchronized period-4 Lorenz (rho=166, eps=1e-3), "
                "driven by y_i of 3 desynchronized chaotic Lorenz (rho=60, eps=2e-2)"
            ),
            train=lorenz(166, n_nodes=3, eps=1e-3, transient_time=6000.0),
            drive=_drive(lorenz(60, n_nodes=3, eps=2e-2)),
            reservoir=_rc(0.35, 0.99, 0.95, 1.0, 1e-10),
            coupling_eps=2e-2,
            checks=(Check("desync", ">=", 0.1),)
            + tuple(Check(f"node{i}_{c}", "<", 0.15) for i in (1, 2, 3) for c in ("dx", "dz")),
        ),
        ExperimentConfig(
            id="fig8", kind="pendulum",
            description="driven pendulum: Lyapunov exponent, autonomous horizon, theta inferred from omega",
            train=PENDULUM,
            drive=_drive(PENDULUM),
            reservoir=_rc(0.3, 0.8, 0.5, 1.0, 2e-8, n_in=3, n_out=2),
            split=DatasetSplit(400, 80_000, 2000),
            constants=(1.0,),
            horizon=2000,
            lyapunov=LyapunovConfig(dt=0.05, total_time=5000.0, renorm_interval=1.0, transient_time=500.0),
            checks=(
                Check("lyapunov", ">=", 0.19),
                Check("lyapunov", "<=", 0.29),
                Check("vpt_lyap", ">=", 8.0),
                Check("dtheta", "<", 0.05),
            ),
        ),
    ]
    return exps


REGISTRY = {e.id: e for e in _experiments()}


def resolve(name: str) -> list:
    """Registered configs for an id, a figure prefix ("fig2"), or "all"."""
    if name == "all":
        return list(REGISTRY.values())
    if name in REGISTRY:
        return [REGISTRY[name]]
    group = [e for k, e in REGISTRY.items() if k.rstrip("abc") == name]
    if not group:
        raise KeyError(name)
    return group
