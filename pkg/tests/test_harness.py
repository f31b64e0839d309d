import math
from dataclasses import replace

import numpy as np
import pytest
import yaml

from rctransfer.dynamics import DatasetSplit, Scaler, integrate
from rctransfer.errors import ContractError, IngestError
from rctransfer.harness import artifacts, cli, config as C, registry
from rctransfer.harness.ingest import gain, ingest_csv, lowpass
from rctransfer.harness.runner import run_experiment
from rctransfer.reservoir import ReservoirConfig, build
from rctransfer.training import ReadoutMatrix


def tiny(exp_id="fig1", **kw):
    """A registered experiment shrunk to run in about a second."""
    base = registry.REGISTRY[exp_id]
    split = DatasetSplit(100, 600, 700)
    small = dict(
        reservoir=replace(base.reservoir, N=60),
        split=split,
        train=replace(base.train, transient_time=20.0, record_len=1400),
        seeds=(0, 1),
        discard=200,
        warmup=100,
    )
    if base.drive is not None:
        small["drive"] = replace(base.drive, transient_time=20.0, record_len=700)
    small.update(kw)
    return replace(base, **small)


# ---- configs ----------------------------------------------------------------


@pytest.mark.parametrize("exp_id", list(registry.REGISTRY))
def test_registry_round_trips_through_yaml(exp_id):
    cfg = registry.REGISTRY[exp_id]
    assert C.loads(C.dumps(cfg)) == cfg


def test_resolve_groups():
    assert [c.id for c in registry.resolve("fig2")] == ["fig2a", "fig2b", "fig2c"]
    assert len(registry.resolve("all")) == len(registry.REGISTRY)
    with pytest.raises(KeyError):
        registry.resolve("fig9")


def test_unknown_key_and_bad_values():
    d = C.to_dict(registry.REGISTRY["fig1"])
    with pytest.raises(ContractError):
        C.from_dict({**d, "colour": "red"})
    with pytest.raises(ContractError):
        C.from_dict({**d, "kind": "magic"})
    with pytest.raises(ContractError):
        C.from_dict({**d, "warmup": 900})
    with pytest.raises(ContractError):
        C.SystemConfig("lorenz", {"a": 10.0})
    with pytest.raises(ContractError):
        C.from_dict({**d, "drive_scaler": "pooled"})
    chain = C.to_dict(registry.REGISTRY["fig6"])
    with pytest.raises(ContractError):
        C.from_dict({**chain, "drive_scaler": "train"})


def test_hand_written_yaml_exponents():
    d = C.to_dict(registry.REGISTRY["fig1"])
    d["reservoir"]["lam"] = "1e-10"  # how YAML 1.1 reads an unsigned exponent
    assert C.from_dict(d).reservoir.lam == 1e-10


def test_checks():
    assert C.Check("dx", "<", 0.1).passes(0.05)
    assert not C.Check("dx", "<", 0.1).passes(math.nan)
    assert C.Check("dx", ">=", 0.3).passes(math.inf)
    with pytest.raises(ContractError):
        C.Check("dx", "!=", 0.1)


# ---- ingest -----------------------------------------------------------------


def test_filter_passes_slow_sine():
    fs, fc, f = 50.0, 5.0, 0.2
    t = np.arange(0, 200, 1 / fs)
    y = lowpass(np.sin(2 * np.pi * f * t)[:, None], fs, fc)[:, 0]
    amp = (y[len(y) // 2 :].max() - y[len(y) // 2 :].min()) / 2
    assert abs(amp - 1.0) < 0.02
    assert abs(amp - gain(fs, fc, f)) < 1e-3


def test_filter_gain_at_cutoff_is_near_half_power():
    assert gain(1000.0, 5.0, 5.0) == pytest.approx(1 / math.sqrt(2), abs=0.01)


def write_csv(path, header, rows):
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for r in rows:
            fh.write(",".join(str(v) for v in r) + "\n")


def good_rows(n=50, fs=50.0):
    return [[i / fs, math.sin(i / fs)] for i in range(n)]


def test_ingest_reports_bad_lines(tmp_path):
    rows = good_rows()
    rows[7][1] = "nan"
    rows[9][1] = "abc"
    p = tmp_path / "bad.csv"
    write_csv(p, ["t", "theta"], rows)
    with pytest.raises(IngestError, match=r"\[9, 11\]"):
        ingest_csv(C.IngestSpec(str(p)))


def test_ingest_reports_gap_and_reversal(tmp_path):
    rows = good_rows()
    gap = [r for i, r in enumerate(rows) if i != 20]
    p = tmp_path / "gap.csv"
    write_csv(p, ["t", "theta"], gap)
    with pytest.raises(IngestError, match=r"gaps.*\[22\]"):
        ingest_csv(C.IngestSpec(str(p)))
    rows[30][0] = rows[28][0]
    write_csv(p, ["t", "theta"], rows)
    with pytest.raises(IngestError, match=r"not increasing.*\[32\]"):
        ingest_csv(C.IngestSpec(str(p)))


def test_ingest_missing_column(tmp_path):
    p = tmp_path / "m.csv"
    write_csv(p, ["t", "angle"], good_rows())
    with pytest.raises(IngestError, match="missing"):
        ingest_csv(C.IngestSpec(str(p)))


def test_ingest_spec_validation():
    with pytest.raises(ContractError):
        C.IngestSpec("x.csv", sample_rate=50.0, cutoff=30.0)


@pytest.fixture(scope="module")
def pendulum_csv(tmp_path_factory):
    fs = 50.0
    spec = registry.PENDULUM.spec()
    tr = integrate(spec, [0.1, 0.0], 0.0, 1 / fs, 20_000)
    raw = tr.data[5000:]
    t = tr.times[5000:]
    p = tmp_path_factory.mktemp("pend") / "pendulum.csv"
    write_csv(p, ["t", "theta", "omega"], [[f"{a:.15g}", f"{b:.15g}", f"{c:.15g}"] for a, (b, c) in zip(t, raw)])
    return p, t, raw


def test_pendulum_csv_round_trip(pendulum_csv):
    p, t, raw = pendulum_csv
    exact = ingest_csv(C.IngestSpec(str(p), cutoff=None, omega_column="omega"))
    np.testing.assert_allclose(exact.raw(), raw, rtol=1e-12, atol=1e-12)
    assert exact.t0 == pytest.approx(t[0]) and exact.dt == pytest.approx(0.02)
    filtered = ingest_csv(C.IngestSpec(str(p), cutoff=5.0, omega_column="omega"))
    ref = Scaler.fit(raw).forward(raw)
    assert np.max(np.abs(filtered.data[200:] - ref[200:])) < 0.1


def test_omega_rebuilt_from_angle(pendulum_csv):
    p, _, raw = pendulum_csv
    tr = ingest_csv(C.IngestSpec(str(p), cutoff=None))
    assert len(tr) == len(raw) - 1
    corr = np.corrcoef(tr.raw()[:, 1], raw[:-1, 1])[0, 1]
    assert corr > 0.999


# ---- artifacts ----------------------------------------------------------------


def test_model_file_round_trip(tmp_path):
    cfg = ReservoirConfig(N=20, seed=4)
    w = build(cfg)
    ro = ReadoutMatrix(np.random.default_rng(0).normal(size=(3, 24)), "lorenz")
    artifacts.save_model(tmp_path / "m.npz", w, ro, cfg)
    w2, ro2, cfg2 = artifacts.load_model(tmp_path / "m.npz")
    assert cfg2 == cfg and ro2.trained_on == "lorenz"
    assert np.array_equal(w2.a, w.a) and np.array_equal(ro2.w_out, ro.w_out)


def test_emit_requires_a_run(tmp_path):
    with pytest.raises(FileNotFoundError):
        artifacts.emit_plot_data(tmp_path / "fig1")


# ---- running experiments --------------------------------------------------------


@pytest.fixture(scope="module")
def tiny_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("runs")
    rep = run_experiment(tiny(), out)
    return out, rep


def test_run_writes_schema(tiny_run):
    out, rep = tiny_run
    d = out / "fig1"
    assert {p.name for p in d.glob("*.csv")} == {"seed_0.csv", "seed_1.csv", "summary.csv", "verdict.csv"}
    header, rows = artifacts.read_table(d / "seed_0.csv")
    assert header == ["t", "x", "y", "z", "u_x", "u_y", "u_z"]
    assert len(rows) == 700
    header, rows = artifacts.read_table(d / "summary.csv")
    assert tuple(header) == artifacts.SUMMARY_COLUMNS
    assert {r[1] for r in rows} >= {"0", "1", "median"}
    header, rows = artifacts.read_table(d / "verdict.csv")
    assert tuple(header) == artifacts.VERDICT_COLUMNS and len(rows) == 2
    assert C.load(d / "config.yaml") == tiny()


def test_emit_columns_match_csv(tiny_run):
    out, _ = tiny_run
    files = artifacts.emit_plot_data(out / "fig1")
    for dat in files:
        header, rows = artifacts.read_table(dat.with_suffix(".csv"))
        lines = dat.read_text().splitlines()
        assert lines[0] == "# " + " ".join(header)
        assert lines[1].split() == rows[0]


def test_rerun_is_byte_identical(tiny_run, tmp_path):
    out, _ = tiny_run
    run_experiment(tiny(), tmp_path)
    for name in ("seed_0.csv", "seed_1.csv", "summary.csv", "verdict.csv"):
        assert (tmp_path / "fig1" / name).read_bytes() == (out / "fig1" / name).read_bytes()


def test_drive_in_training_units(tmp_path):
    cfg = tiny("fig3", sweep=(0.0,), seeds=(0,))
    own = run_experiment(replace(cfg, drive_scaler="own"), tmp_path / "own")
    shared = run_experiment(cfg, tmp_path / "shared")
    assert shared.per_seed[0]["dz@0"] != own.per_seed[0]["dz@0"]


def test_median_matches_seed_rows(tiny_run):
    _, rep = tiny_run
    assert rep.aggregate["dx"] == pytest.approx(np.median([rep.per_seed[s]["dx"] for s in (0, 1)]))


@pytest.mark.parametrize("exp_id", ["fig2a", "fig3", "fig6", "fig7"])
def test_every_kind_runs(exp_id, tmp_path):
    kw = {"seeds": (0,)}
    if exp_id == "fig3":
        kw["sweep"] = (0.0, 5.0, 10.0)
    if exp_id == "fig6":
        base = registry.REGISTRY["fig6"]
        kw["stages"] = tuple(
            C.StageConfig(replace(s.train, transient_time=20.0, record_len=1400), replace(s.reservoir, N=60))
            for s in base.stages[:2]
        )
        cfg = replace(
            base, stages=kw["stages"], split=DatasetSplit(100, 600, 700), seeds=(0,), discard=200, warmup=100,
            drive=replace(base.drive, transient_time=20.0, record_len=700),
        )
    elif exp_id == "fig7":
        base = registry.REGISTRY["fig7"]
        cfg = tiny("fig7", train=replace(base.train, transient_time=200.0, record_len=1400), **kw)
    else:
        cfg = tiny(exp_id, **kw)
    rep = run_experiment(cfg, tmp_path)
    assert set(c.check.metric for c in rep.checks) == set(c.metric for c in cfg.checks)
    assert (tmp_path / exp_id / "verdict.csv").exists()


# ---- CLI --------------------------------------------------------------------------


def test_cli_list_and_describe(capsys):
    assert cli.main(["list"]) == 0
    assert "fig8" in capsys.readouterr().out
    assert cli.main(["describe", "fig6"]) == 0
    assert "stage 5" in capsys.readouterr().out


def test_cli_unknown_experiment(capsys):
    assert cli.main(["run", "fig42"]) == 2
    assert "fig1" in capsys.readouterr().err


def test_cli_emit_before_run(tmp_path):
    assert cli.main(["emit-plot-data", "fig1", "--out", str(tmp_path)]) == 2


def test_cli_bad_yaml(tmp_path):
    p = tmp_path / "c.yaml"
    p.write_text("id: [unclosed\n")
    assert cli.main(["run", "--config", str(p), "--out", str(tmp_path)]) == 2


def test_cli_run_exit_codes(tmp_path, monkeypatch):
    cfg = tiny(seeds=(0,), checks=(C.Check("dx", "<", 10.0),))
    good = tmp_path / "good.yaml"
    C.save(cfg, good)
    monkeypatch.setenv("RCTRANSFER_OUT", str(tmp_path / "env"))
    assert cli.main(["run", "--config", str(good), "--quiet"]) == 0
    assert (tmp_path / "env" / "fig1" / "verdict.csv").exists()
    impossible = replace(cfg, checks=(C.Check("dx", "<", 0.0),))
    bad = tmp_path / "bad.yaml"
    C.save(impossible, bad)
    assert cli.main(["run", "--config", str(bad), "--out", str(tmp_path), "--quiet"]) == 1


def test_cli_ingest(pendulum_csv, tmp_path):
    p, _, raw = pendulum_csv
    out = tmp_path / "clean.csv"
    assert cli.main(["ingest", str(p), "--omega-col", "omega", "-o", str(out)]) == 0
    header, rows = artifacts.read_table(out)
    assert header == ["t", "theta", "omega"] and len(rows) == len(raw)


def test_cli_sweep_grid(tmp_path):
    cfg = tiny(seeds=(0,))
    cp = tmp_path / "c.yaml"
    C.save(cfg, cp)
    grid = tmp_path / "g.yaml"
    grid.write_text(yaml.safe_dump({"alpha": [0.5, 0.95], "n_seeds": 1}))
    assert cli.main(["sweep", "--config", str(cp), "--grid", str(grid), "--out", str(tmp_path)]) == 0
    header, rows = artifacts.read_table(tmp_path / "fig1" / "grid.csv")
    assert len(rows) == 2 and header[-1] == "score"


def test_committed_configs_match_registry():
    from pathlib import Path

    root = Path(__file__).resolve().parents[1] / "configs"
    for exp_id, cfg in registry.REGISTRY.items():
        assert C.load(root / f"{exp_id}.yaml") == cfg, f"configs/{exp_id}.yaml is stale"
