"""Loading an external pendulum record (angle sensor CSV) into a normalized Trajectory.

The smoothing filter is first-order IIR (exponential smoothing)::

    y[n] = y[n-1] + a (x[n] - y[n-1]),   a = 1 - exp(-2 pi f_cut / f_s)
    H(z) = a / (1 - (1 - a) z^-1)

which is a one-pole low-pass with -3 dB point near f_cut for f_cut << f_s.
"""

from __future__ import annotations

import csv
import math

import numpy as np
from scipy.signal import lfilter

from ..dynamics import Scaler, Trajectory
from ..errors import IngestError
from .config import IngestSpec


def smoothing_coefficient(sample_rate: float, cutoff: float) -> float:
    return 1.0 - math.exp(-2.0 * math.pi * cutoff / sample_rate)


def lowpass(x, sample_rate: float, cutoff: float) -> np.ndarray:
    """Filter each column of ``x``; the filter starts at rest on the first sample."""
    x = np.asarray(x, dtype=float)
    a = smoothing_coefficient(sample_rate, cutoff)
    b, den = [a], [1.0, a - 1.0]
    zi = (1.0 - a) * x[:1]  # steady state for a constant input equal to x[0]
    y, _ = lfilter(b, den, x, axis=0, zi=zi)
    return y


def gain(sample_rate: float, cutoff: float, freq: float) -> float:
    """|H| at ``freq`` Hz."""
    a = smoothing_coefficient(sample_rate, cutoff)
    z = np.exp(-2j * math.pi * freq / sample_rate)
    return float(abs(a / (1.0 - (1.0 - a) * z)))


def _read(path, columns):
    rows = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise IngestError(f"{path}: empty file")
        missing = [c for c in columns if c not in reader.fieldnames]
        if missing:
            raise IngestError(f"{path}: missing columns {missing}; header is {reader.fieldnames}")
        bad = []
        for line, rec in enumerate(reader, start=2):  # line 1 is the header
            try:
                vals = [float(rec[c]) for c in columns]
            except (TypeError, ValueError):
                vals = [math.nan]
            if not all(math.isfinite(v) for v in vals):
                bad.append(line)
            rows.append(vals)
    if bad:
        raise IngestError(f"{path}: non-numeric or NaN values on lines {bad[:20]}")
    if len(rows) < 3:
        raise IngestError(f"{path}: need at least 3 data rows, got {len(rows)}")
    return np.asarray(rows)


def ingest_csv(spec: IngestSpec) -> Trajectory:
    """Parse, rebuild omega if absent, low-pass filter, and min-max normalize.

    Rebuilding omega by forward difference drops the last sample. Time must be
    strictly increasing with no gap longer than one sample (1.5 / f_s tolerance).
    Returned channels are (theta, omega).
    """
    cols = [c for c in (spec.time_column, spec.theta_column, spec.omega_column) if c is not None]
    raw = _read(spec.path, cols)
    dt = 1.0 / spec.sample_rate
    i = 0
    t0 = 0.0
    if spec.time_column is not None:
        t = raw[:, 0]
        d = np.diff(t)
        back = np.flatnonzero(d <= 0)
        if back.size:
            raise IngestError(f"{spec.path}: time not increasing at lines {(back + 3).tolist()[:20]}")
        gaps = np.flatnonzero(d > 1.5 * dt)
        if gaps.size:
            raise IngestError(f"{spec.path}: gaps longer than one sample before lines {(gaps + 3).tolist()[:20]}")
        t0 = float(t[0])
        i = 1
    theta = raw[:, i]
    if spec.omega_column is None:
        omega = (theta[1:] - theta[:-1]) / dt
        theta = theta[:-1]
    else:
        omega = raw[:, i + 1]
    data = np.column_stack([theta, omega])
    if spec.cutoff is not None:
        data = lowpass(data, spec.sample_rate, spec.cutoff)
    scaler = Scaler.fit(data)
    return Trajectory(dt, t0, scaler.forward(data), scaler)
