"""Experiment configuration: dataclasses plus a lossless YAML round trip."""

from __future__ import annotations

import math
import operator
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path
from typing import Optional

import yaml

from .. import dynamics
from ..dynamics import CoupledNetworkSpec, DatasetSplit, Family, SystemSpec
from ..errors import ContractError
from ..reservoir import ReservoirConfig

KINDS = ("transfer", "sweep", "chain", "parallel", "pendulum")
OPS = {"<": operator.lt, "<=": operator.le, ">": operator.gt, ">=": operator.ge}


@dataclass(frozen=True)
class SystemConfig:
    """A system plus how it is sampled. ``n_nodes > 1`` makes an all-to-all coupled network."""

    family: str
    params: dict
    dt: float = 0.02
    substeps: int = 1
    transient_time: float = 1000.0
    record_len: int = 10_000
    n_nodes: int = 1
    eps: float = 0.0

    def __post_init__(self):
        fam = Family(self.family)
        names = dynamics._LAYOUT[fam][1]
        if set(self.params) != set(names):
            raise ContractError(f"{fam.value} needs parameters {names}, got {sorted(self.params)}")
        # canonical order and float values so equality survives a round trip
        object.__setattr__(self, "family", fam.value)
        object.__setattr__(self, "params", {k: float(self.params[k]) for k in names})
        if self.dt <= 0 or self.substeps < 1 or self.record_len < 2 or self.transient_time < 0:
            raise ContractError(f"bad sampling settings in {self}")
        if self.n_nodes < 1:
            raise ContractError("n_nodes must be >= 1")

    def spec(self):
        node = SystemSpec(Family(self.family), tuple(self.params.values()))
        if self.n_nodes == 1:
            return node
        return CoupledNetworkSpec(node, self.n_nodes, self.eps)

    def with_param(self, name: str, value: float) -> "SystemConfig":
        params = dict(self.params)
        params[name] = value
        return SystemConfig(**{**asdict(self), "params": params})

    def describe(self) -> str:
        ps = ", ".join(f"{k}={v:g}" for k, v in self.params.items())
        s = f"{self.family}({ps}) sampled every {self.dt:g}"
        if self.substeps > 1:
            s += f" ({self.substeps} RK4 substeps)"
        if self.n_nodes > 1:
            s = f"{self.n_nodes} globally coupled {s}, eps={self.eps:g}"
        return s


@dataclass(frozen=True)
class StageConfig:
    train: SystemConfig
    reservoir: ReservoirConfig


@dataclass(frozen=True)
class IngestSpec:
    """External pendulum record. ``omega_column=None`` rebuilds omega from theta by forward difference."""

    path: str
    sample_rate: float = 50.0  # Hz
    cutoff: Optional[float] = 5.0  # Hz; None disables filtering
    time_column: Optional[str] = "t"
    theta_column: str = "theta"
    omega_column: Optional[str] = None

    def __post_init__(self):
        if not self.sample_rate > 0:
            raise ContractError("sample_rate must be > 0")
        if self.cutoff is not None and not 0 < self.cutoff < self.sample_rate / 2:
            raise ContractError(f"cutoff must lie in (0, {self.sample_rate / 2}) Hz")


@dataclass(frozen=True)
class LyapunovConfig:
    dt: float = 0.05
    total_time: float = 5000.0
    renorm_interval: float = 1.0
    transient_time: float = 500.0


@dataclass(frozen=True)
class Check:
    """Pass condition ``median-over-seeds(metric) op value``."""

    metric: str
    op: str
    value: float

    def __post_init__(self):
        if self.op not in OPS:
            raise ContractError(f"unknown comparison {self.op!r}")
        object.__setattr__(self, "value", float(self.value))

    def passes(self, x: float) -> bool:
        return not math.isnan(x) and OPS[self.op](x, self.value)


@dataclass(frozen=True)
class ExperimentConfig:
    id: str
    kind: str
    description: str = ""
    train: Optional[SystemConfig] = None
    reservoir: Optional[ReservoirConfig] = None
    drive: Optional[SystemConfig] = None  # None: the held-out part of the training record
    split: DatasetSplit = DatasetSplit()
    driven: tuple = (1,)
    constants: tuple = ()
    discard: int = 500
    warmup: int = 400  # driven runs hold feedback inputs at zero this long; must not exceed discard
    drive_scaler: str = "own"  # "own": drive record's own min-max; "train": training record's scaler
    aux_test: bool = False
    stages: tuple = ()  # chain
    coupling_eps: float = 0.0  # parallel reservoirs
    sweep_param: str = "rho"
    sweep: tuple = ()  # drive parameter = base - delta
    horizon: int = 0  # autonomous steps for the prediction horizon
    lyapunov: Optional[LyapunovConfig] = None
    ingest: Optional[IngestSpec] = None
    checks: tuple = ()
    seeds: tuple = tuple(range(10))
    trajectory_rows: int = 0  # 0 writes every row
    out_dir: str = "results"

    def __post_init__(self):
        object.__setattr__(self, "driven", tuple(int(c) for c in self.driven))
        object.__setattr__(self, "constants", tuple(float(c) for c in self.constants))
        object.__setattr__(self, "sweep", tuple(float(c) for c in self.sweep))
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
        if self.kind not in KINDS:
            raise ContractError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if not self.id:
            raise ContractError("experiment id is empty")
        if self.drive_scaler not in ("own", "train"):
            raise ContractError(f"{self.id}: drive_scaler must be 'own' or 'train'")
        if self.drive_scaler == "train" and self.kind not in ("transfer", "sweep"):
            raise ContractError(f"{self.id}: drive_scaler 'train' needs a single training record")
        if not 0 <= self.warmup <= self.discard:
            raise ContractError(f"{self.id}: warmup must lie in [0, discard]")
        if not self.seeds:
            raise ContractError(f"{self.id}: seeds list is empty")
        if self.kind == "chain":
            if not self.stages or self.drive is None:
                raise ContractError(f"{self.id}: a chain needs stages and a drive")
        elif self.train is None or self.reservoir is None:
            raise ContractError(f"{self.id}: {self.kind} needs train and reservoir")
        if self.kind == "sweep" and (not self.sweep or self.drive is None):
            raise ContractError(f"{self.id}: a sweep needs a drive and delta values")
        if self.kind == "parallel" and (self.drive is None or self.drive.n_nodes < 2):
            raise ContractError(f"{self.id}: parallel runs need a coupled driving network")
        if self.ingest is not None and not Path(self.ingest.path).exists():
            raise ContractError(f"{self.id}: ingest file {self.ingest.path} does not exist")

    def with_seeds(self, seeds) -> "ExperimentConfig":
        return replace(self, seeds=tuple(seeds))


# ---- dict / YAML round trip -------------------------------------------------


def _plain(x):
    if isinstance(x, tuple):
        return [_plain(v) for v in x]
    if isinstance(x, dict):
        return {k: _plain(v) for k, v in x.items()}
    return x


def to_dict(cfg: ExperimentConfig) -> dict:
    out = {}
    for f in fields(cfg):
        v = getattr(cfg, f.name)
        if f.name == "stages":
            v = [{"train": asdict(s.train), "reservoir": asdict(s.reservoir)} for s in v]
        elif f.name == "checks":
            v = [[c.metric, c.op, c.value] for c in v]
        elif hasattr(v, "__dataclass_fields__"):
            v = asdict(v)
        out[f.name] = _plain(v)
    return out


def _opt(cls, d):
    return None if d is None else cls(**d)


_INT_FIELDS = {"N", "n_in", "n_out", "seed"}


def _reservoir(d):
    # YAML 1.1 reads "1e-10" as a string; coerce so hand-written files behave
    if d is None:
        return None
    return ReservoirConfig(**{k: int(v) if k in _INT_FIELDS else float(v) for k, v in d.items()})


def from_dict(d: dict) -> ExperimentConfig:
    d = dict(d)
    known = {f.name for f in fields(ExperimentConfig)}
    extra = set(d) - known
    if extra:
        raise ContractError(f"unknown config keys {sorted(extra)}")
    d["train"] = _opt(SystemConfig, d.get("train"))
    d["drive"] = _opt(SystemConfig, d.get("drive"))
    d["reservoir"] = _reservoir(d.get("reservoir"))
    if "split" in d:
        d["split"] = DatasetSplit(**d["split"])
    d["lyapunov"] = _opt(LyapunovConfig, d.get("lyapunov"))
    d["ingest"] = _opt(IngestSpec, d.get("ingest"))
    d["stages"] = tuple(
        StageConfig(SystemConfig(**s["train"]), _reservoir(s["reservoir"])) for s in d.get("stages", ())
    )
    d["checks"] = tuple(Check(*c) for c in d.get("checks", ()))
    return ExperimentConfig(**d)


def dumps(cfg: ExperimentConfig) -> str:
    return yaml.safe_dump(to_dict(cfg), sort_keys=False, default_flow_style=None, width=100)


def loads(text: str) -> ExperimentConfig:
    d = yaml.safe_load(text)
    if not isinstance(d, dict):
        raise ContractError("config file must hold a mapping")
    return from_dict(d)


def save(cfg: ExperimentConfig, path) -> None:
    Path(path).write_text(dumps(cfg))


def load(path) -> ExperimentConfig:
    return loads(Path(path).read_text())
