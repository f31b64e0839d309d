import numpy as np
import pytest

from rctransfer import inference as I
from rctransfer.dynamics import DatasetSplit, lorenz, make_dataset
from rctransfer.errors import ContractError, DivergenceError
from rctransfer.reservoir import ReservoirConfig, ReservoirState, run_teacher_forced, warm_start
from rctransfer.training import train

CFG = ReservoirConfig(N=80, p=0.25, eta=0.95, alpha=0.9, sigma=1.0, lam=1e-6, seed=5)
SPLIT = DatasetSplit(200, 1500, 1000)


@pytest.fixture(scope="module")
def model():
    data = make_dataset(lorenz(60), 0.02, 20.0, 2700, seed=0)
    return data, train(data, CFG, SPLIT)


def r0(k):
    return np.random.default_rng(k).uniform(-1, 1, CFG.N)


def test_mask_build_and_validation():
    m = I.DriveMask.build(2, driven=(1,), constants=(1.0,))
    assert m.modes == (I.Mode.FEEDBACK, I.Mode.DRIVEN, I.Mode.CONSTANT)
    assert (m.n_in, m.n_out, m.feedback, m.driven) == (3, 2, [0], [1])
    with pytest.raises(ContractError):
        I.DriveMask(("feedback", "constant"), ())
    with pytest.raises(ContractError):
        I.DriveMask(("constant", "feedback"), (1.0,))
    with pytest.raises(ContractError):
        I.run_driven(None, None, CFG, m, np.zeros((5, 3)), r0(0))


def test_driven_is_causal(model):
    data, res = model
    mask = I.DriveMask.build(3, (1,))
    drive = data.data[-600:].copy()
    a = I.run_driven(res.weights, res.readout, CFG, mask, drive, r0(1), warmup=200)
    drive[300:, 1] += 0.01
    b = I.run_driven(res.weights, res.readout, CFG, mask, drive, r0(1), warmup=200)
    # output row n only depends on drive rows < n
    np.testing.assert_array_equal(a.data[:301], b.data[:301])
    assert not np.array_equal(a.data[302:], b.data[302:])


def test_fully_driven_equals_teacher_forcing(model):
    data, res = model
    mask = I.DriveMask.build(3, driven=(0, 1, 2))
    drive = data.data[:400]
    out, states = I.run_driven(res.weights, res.readout, CFG, mask, drive, r0(2), return_states=True)
    tf = run_teacher_forced(res.weights, CFG, drive, r0(2))
    np.testing.assert_array_equal(states, tf)
    Wt = res.readout.w_out
    expected = Wt @ np.concatenate(([1.0], drive[10], tf[10]))
    np.testing.assert_allclose(out.data[11], expected, rtol=1e-12)


def test_driven_sync_on_own_system(model):
    data, res = model
    mask = I.DriveMask.build(3, (1,))
    test = data.slice(SPLIT.washout_len + SPLIT.train_len)
    out = I.run_driven(res.weights, res.readout, CFG, mask, test, r0(3), warmup=200)
    err = np.mean(np.abs(out.data[300:] - test.data[300:len(out)]), axis=0)
    assert err[0] < 0.05 and err[2] < 0.05


def test_autonomous_first_step_tracks_truth(model):
    data, res = model
    start = SPLIT.washout_len + SPLIT.train_len
    s = warm_start(res.weights, CFG, data.data[start - 200 : start + 1])
    out = I.run_autonomous(res.weights, res.readout, CFG, s, 20)
    np.testing.assert_allclose(out.data[0], data.data[start + 1], atol=0.02)


def test_autonomous_divergence_flag():
    W = np.zeros((3, 1 + 3 + CFG.N))
    W[:, 0] = 50.0
    s = ReservoirState(np.zeros(CFG.N), np.zeros(3))
    from rctransfer.reservoir import build

    out = I.run_autonomous(build(CFG), W, CFG, s, 10)
    assert out.diverged_at == 0 and len(out) == 0


def test_driven_divergence_raises():
    from rctransfer.reservoir import build

    W = np.zeros((3, 1 + 3 + CFG.N))
    W[:, 0] = 1e9
    with pytest.raises(DivergenceError):
        I.run_driven(build(CFG), W, CFG, I.DriveMask.build(3), np.zeros((10, 3)), r0(0))


def test_auxiliary_copies_converge(model):
    data, res = model
    mask = I.DriveMask.build(3, (1,))
    drive = data.data[:1500]
    aux = I.auxiliary_test(res.weights, res.readout, CFG, mask, drive, r0(4), r0(5), warmup=200)
    assert aux.converged and aux.final_difference < 1e-6
    swapped = I.auxiliary_test(res.weights, res.readout, CFG, mask, drive, r0(5), r0(4), warmup=200)
    assert swapped.final_difference == aux.final_difference
    same = I.auxiliary_test(res.weights, res.readout, CFG, mask, drive[:300], r0(4), r0(4), warmup=200)
    assert same.final_difference == 0.0
    assert np.array_equal(same.output_a.data, same.output_b.data)


def test_chain_of_one_is_driven_run(model):
    data, res = model
    stage = I.ChainStage(res.weights, res.readout, CFG)
    drive = data.data[:500]
    [chain] = I.run_chain(I.ChainSpec((stage,)), drive, [r0(6)], warmup=200)
    single = I.run_driven(res.weights, res.readout, CFG, I.DriveMask.build(3, (1,)), drive, r0(6), warmup=200)
    np.testing.assert_array_equal(chain.data, single.data)


def test_chain_second_stage_hears_first(model):
    data, res = model
    stage = I.ChainStage(res.weights, res.readout, CFG)
    drive = data.data[:500]
    o1, o2 = I.run_chain(I.ChainSpec((stage, stage)), drive, [r0(6), r0(7)], warmup=200)
    relay = o1.data[:, 1]
    mask = I.DriveMask.build(3, (1,))
    # stage 2 driven by stage 1's y estimate, sample for sample
    ref = I.run_driven(res.weights, res.readout, CFG, mask, np.column_stack([relay] * 3), r0(7), warmup=200)
    np.testing.assert_allclose(o2.data, ref.data, rtol=1e-12, atol=1e-12)


def test_chain_validation(model):
    _, res = model
    with pytest.raises(ContractError):
        I.ChainSpec(())
    stage = I.ChainStage(res.weights, res.readout, CFG)
    with pytest.raises(ContractError):
        I.run_chain(I.ChainSpec((stage,)), np.zeros((10, 3)), [r0(0), r0(1)])


def test_parallel_uncoupled_equals_independent(model):
    data, res = model
    mask = I.DriveMask.build(3, (1,))
    par = I.ParallelSpec(2, res.weights, res.readout, CFG, 0.0, mask)
    d1, d2 = data.data[:400], data.data[400:800]
    outs = I.run_parallel(par, np.hstack([d1, d2]), [r0(8), r0(9)], warmup=200)
    for out, d, k in zip(outs, (d1, d2), (8, 9)):
        ref = I.run_driven(res.weights, res.readout, CFG, mask, d, r0(k), warmup=200)
        np.testing.assert_allclose(out.data, ref.data, rtol=1e-12, atol=1e-13)


def test_parallel_identical_copies_stay_identical(model):
    data, res = model
    mask = I.DriveMask.build(3, (1,))
    par = I.ParallelSpec(3, res.weights, res.readout, CFG, 0.05, mask)
    d = data.data[:300]
    outs = I.run_parallel(par, np.hstack([d, d, d]), [r0(1)] * 3, warmup=200)
    assert np.array_equal(outs[0].data, outs[2].data)
    with pytest.raises(ContractError):
        I.run_parallel(par, d, [r0(1)] * 3)


def test_warmup_holds_feedback_at_zero(model):
    data, res = model
    mask = I.DriveMask.build(3, driven=(1,))
    drive = data.data[:300]
    _, states = I.run_driven(res.weights, res.readout, CFG, mask, drive, r0(2), return_states=True, warmup=50)
    gated = np.zeros_like(drive)
    gated[:, 1] = drive[:, 1]
    tf = run_teacher_forced(res.weights, CFG, gated[:50], r0(2))
    np.testing.assert_array_equal(states[:50], tf)


def test_warmup_makes_start_state_irrelevant(model):
    data, res = model
    mask = I.DriveMask.build(3, (1,))
    drive = data.data[:1200]
    a = I.run_driven(res.weights, res.readout, CFG, mask, drive, r0(11), warmup=400)
    b = I.run_driven(res.weights, res.readout, CFG, mask, drive, r0(12), warmup=400)
    assert np.max(np.abs(a.data[500:] - b.data[500:])) < 1e-8
