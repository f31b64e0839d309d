import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from rctransfer import metrics as M
from rctransfer.dynamics import Trajectory, lorenz
from rctransfer.errors import ContractError


def test_lorenz_classic_exponent():
    # reference value for (10, 28, 8/3) is 0.9056 in natural-log units
    est = M.largest_lyapunov(lorenz(28), 0.01, 300.0, 1.0, transient_time=50.0, seed=1)
    assert abs(est.lambda_max - 0.9056) < 0.05
    assert est.integration_time == pytest.approx(300.0)


def test_lyapunov_rejects_short_run():
    with pytest.raises(ContractError):
        M.largest_lyapunov(lorenz(28), 0.01, 0.5, 1.0, transient_time=0.0)


def test_lyapunov_of_stable_fixed_point_is_negative():
    # rho < 1: the origin attracts everything
    est = M.largest_lyapunov(lorenz(0.5), 0.01, 50.0, 1.0, transient_time=10.0)
    assert est.lambda_max < 0


def test_sync_error_by_hand():
    truth = np.zeros((10, 2))
    pred = np.tile([1.0, -2.0], (10, 1))
    rep = M.sync_error(truth, pred, discard=4)
    assert rep.errors == (1.0, 2.0) and rep.window == 6


def test_sync_error_window_checks():
    with pytest.raises(ContractError):
        M.sync_error(np.zeros((10, 1)), np.zeros((10, 1)), discard=10)
    with pytest.raises(ContractError):
        M.sync_error(np.zeros((10, 1)), np.zeros((10, 2)), discard=0)


@settings(max_examples=40)
@given(arrays(np.float64, (30, 3), elements=st.floats(-5, 5)), arrays(np.float64, (30, 3), elements=st.floats(-5, 5)))
def test_sync_error_is_symmetric_and_nonnegative(a, b):
    e1, e2 = M.sync_error(a, b, 5).errors, M.sync_error(b, a, 5).errors
    assert e1 == e2
    assert all(e >= 0 for e in e1)
    assert all(e == 0 for e in M.sync_error(a, a, 5).errors)


def test_phase_flag():
    t = np.arange(4000) * 0.05
    a = np.sin(t)
    assert M.phase_synchronized(a, np.sin(t + 1.0) * 0.3)  # same period, any phase and amplitude
    assert M.phase_synchronized(a, np.sin(1.05 * t))
    assert not M.phase_synchronized(a, np.sin(1.2 * t))
    assert not M.phase_synchronized(a, np.zeros_like(t))


def test_hysteresis_ignores_small_ripple():
    t = np.arange(4000) * 0.05
    a = np.sin(t)
    ripple = a + 0.02 * np.sin(37 * t)
    assert len(M._upcrossings(ripple)) == len(M._upcrossings(a))


def test_vpt_crossing_and_units():
    truth = Trajectory(0.1, 0.0, np.ones((100, 1)))
    pred = np.ones((100, 1))
    pred[30:] += 1.0
    h = M.valid_prediction_time(truth, Trajectory(0.1, 0.0, pred), lyapunov=0.5)
    assert (h.steps, h.saturated) == (30, False)
    assert h.model_time == pytest.approx(3.0) and h.lyapunov_times == pytest.approx(1.5)


def test_vpt_saturates_and_truncates():
    truth = Trajectory(0.1, 0.0, np.ones((50, 2)))
    full = M.valid_prediction_time(truth, Trajectory(0.1, 0.0, np.ones((50, 2))), 1.0)
    assert full.saturated and full.steps == 50
    short = M.valid_prediction_time(truth, Trajectory(0.1, 0.0, np.ones((20, 2))), 1.0)
    assert not short.saturated and short.steps == 20


def test_pairwise_desync():
    a = np.zeros((10, 2))
    b = np.tile([3.0, 4.0], (10, 1))
    assert M.pairwise_desync([a, b]) == pytest.approx(5.0)
    assert M.pairwise_desync([a, a, a]) == 0.0
    # mean of the three pairwise distances 5, 0, 5
    assert M.pairwise_desync([a, b, a]) == pytest.approx(10 / 3)
    with pytest.raises(ContractError):
        M.pairwise_desync([a])


def test_split_nodes():
    x = np.arange(12.0).reshape(2, 6)
    n1, n2 = M.split_nodes(x, 2)
    assert n1.tolist() == [[0, 1, 2], [6, 7, 8]] and n2.tolist() == [[3, 4, 5], [9, 10, 11]]


def test_desync_of_coupled_lorenz_networks():
    from rctransfer.dynamics import CoupledNetworkSpec, integrate

    rng = np.random.default_rng(0)
    s0 = rng.uniform(-1, 1, 9) + np.tile([1.0, 1.0, 20.0], 3)
    sync = integrate(CoupledNetworkSpec(lorenz(166), 3, 1.0), s0, 0.0, 0.02, 5000)
    free = integrate(CoupledNetworkSpec(lorenz(60), 3, 2e-2), s0, 0.0, 0.02, 5000)
    assert M.pairwise_desync(M.split_nodes(sync, 3), discard=4000) < 1e-6
    assert M.pairwise_desync(M.split_nodes(free, 3), discard=4000) > 1.0


@pytest.mark.slow
def test_lyapunov_insensitive_to_dt_and_renormalization():
    ref = M.largest_lyapunov(lorenz(28), 0.01, 300.0, 1.0, transient_time=50.0, seed=2).lambda_max
    half_dt = M.largest_lyapunov(lorenz(28), 0.005, 300.0, 1.0, transient_time=50.0, seed=2).lambda_max
    half_tau = M.largest_lyapunov(lorenz(28), 0.01, 300.0, 0.5, transient_time=50.0, seed=2).lambda_max
    assert abs(half_dt - ref) < 0.1 * ref
    assert abs(half_tau - ref) < 0.1 * ref
