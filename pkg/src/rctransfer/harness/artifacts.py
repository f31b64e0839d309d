"""On-disk artifacts: trajectory and summary CSVs, gnuplot tables, model files."""

from __future__ import annotations

import csv
import json
from dataclasses import asdict
from pathlib import Path

import numpy as np

from ..errors import ContractError
from ..reservoir import ReservoirConfig, ReservoirWeights
from ..training import ReadoutMatrix

SUMMARY_COLUMNS = ("experiment", "seed", "metric", "value")
VERDICT_COLUMNS = ("experiment", "metric", "op", "threshold", "value", "passed")


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.15g}"
    return str(x)


def write_table(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])


def write_trajectory(path, times, truth, predicted, names, max_rows: int = 0) -> None:
    """Columns: t, truth channels, predicted channels (``u_<name>``)."""
    truth = np.asarray(truth, dtype=float)
    predicted = np.asarray(predicted, dtype=float)
    n = min(len(times), len(truth), len(predicted))
    if max_rows:
        n = min(n, max_rows)
    header = ["t", *names, *(f"u_{c}" for c in names)]
    block = np.column_stack([np.asarray(times[:n]), truth[:n], predicted[:n]])
    write_table(path, header, block.tolist())


def read_table(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ContractError(f"{path} is empty")
    return rows[0], rows[1:]


def emit_plot_data(exp_dir) -> list:
    """Write a whitespace-separated ``.dat`` twin of every CSV in ``exp_dir``.

    The first line is a ``#`` comment with the CSV header, so columns keep their
    order and names. Raises FileNotFoundError when the experiment has not been run.
    """
    exp_dir = Path(exp_dir)
    csvs = sorted(exp_dir.glob("*.csv")) if exp_dir.is_dir() else []
    if not csvs:
        raise FileNotFoundError(f"no results under {exp_dir}; run the experiment first")
    written = []
    for path in csvs:
        header, rows = read_table(path)
        out = path.with_suffix(".dat")
        with open(out, "w") as fh:
            fh.write("# " + " ".join(header) + "\n")
            for row in rows:
                fh.write(" ".join(row) + "\n")
        written.append(out)
    return written


def save_model(path, weights: ReservoirWeights, readout: ReadoutMatrix, config: ReservoirConfig) -> None:
    """One ``.npz`` per trained reservoir: W_in, A, W_out and the config as JSON."""
    np.savez(
        path,
        w_in=weights.w_in,
        a=weights.a,
        w_out=readout.w_out,
        trained_on=np.array(readout.trained_on),
        config=np.array(json.dumps(asdict(config))),
    )


def load_model(path):
    with np.load(path, allow_pickle=False) as z:
        config = ReservoirConfig(**json.loads(str(z["config"])))
        weights = ReservoirWeights(z["w_in"], z["a"])
        readout = ReadoutMatrix(z["w_out"], str(z["trained_on"]))
    if weights.a.shape != (config.N, config.N) or readout.w_out.shape != (config.n_out, 1 + config.n_in + config.N):
        raise ContractError(f"{path}: matrix shapes do not match the stored config")
    return weights, readout, config
