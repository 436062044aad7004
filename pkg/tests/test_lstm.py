import numpy as np

from helpers import central_difference, max_rel_err
from inode import engine as en
from inode import lstm
from inode.preprocess import Batch, TimeStats, make_batch
from inode.synth import moving_dot


def _store(seed=0, n_classes=3, hidden=5, bidirectional=False):
    return lstm.init_params(np.random.default_rng(seed), n_classes, hidden=hidden,
                            bidirectional=bidirectional)


def _batch(seed=0, b=2, s=5, n_classes=3):
    rng = np.random.default_rng(seed)
    return Batch(
        inputs=rng.uniform(-1, 1, (b, s, 3)),
        dtaus=rng.uniform(0, 1, (b, s)),
        labels=rng.integers(0, n_classes, b),
    )


def test_zero_weights_give_zero_hidden_state():
    store = _store()
    for name in store.names():
        store[name][:] = 0.0
    state = (np.zeros((2, 5)), np.zeros((2, 5)))
    h, c = lstm.lstm_step(state, np.ones((2, 4)), store)
    assert np.array_equal(h, np.zeros((2, 5)))
    assert np.array_equal(c, np.zeros((2, 5)))


def test_saturated_forget_gate_preserves_cell():
    store = _store(seed=1)
    for name in store.names():
        if name.startswith("fwd_"):
            store[name][:] = 0.0
    store["fwd_bf"][:] = 10.0
    c0 = np.random.default_rng(2).uniform(-1, 1, (3, 5))
    _, c1 = lstm.lstm_step((np.zeros((3, 5)), c0), np.ones((3, 4)), store)
    assert np.abs(c1 - c0).max() < 1e-4


def test_gradients_match_finite_differences():
    store = _store(seed=3)
    batch = _batch(seed=4)
    grads, _ = lstm.backward_bptt(batch, store)
    fd = central_difference(lambda: lstm.forward(batch, store).loss, store)
    assert max_rel_err(grads, fd) < 1e-5


def test_bidirectional_gradients_match_finite_differences():
    store = _store(seed=5, bidirectional=True, hidden=4)
    batch = _batch(seed=6, s=4)
    grads, _ = lstm.backward_bptt(batch, store)
    fd = central_difference(lambda: lstm.forward_bidirectional(batch, store).loss, store)
    assert max_rel_err(grads, fd) < 1e-5


def test_single_step_window_equals_one_cell_application():
    store = _store(seed=7)
    batch = _batch(seed=8, s=1)
    res = lstm.forward(batch, store)
    feats = batch.features_with_dt()
    h, _ = lstm.lstm_step((np.zeros((2, 5)), np.zeros((2, 5))), feats[:, 0, :], store)
    z = lstm.classify(h, store)
    assert np.array_equal(res.logits[:, 0, :], z)


def test_bidirectional_palindrome_symmetry():
    store = _store(seed=9, bidirectional=True)
    # a palindromic constant sequence reads the same in both directions
    full = np.tile(np.array([0.3, -0.2, 1.0, 0.5]), (2, 6, 1))
    fwd = (np.zeros((2, 5)), np.zeros((2, 5)))
    bwd = (np.zeros((2, 5)), np.zeros((2, 5)))
    for i in range(6):
        fwd = lstm.lstm_step(fwd, full[:, i, :], store, prefix="fwd")
        bwd = lstm.lstm_step(bwd, full[:, 5 - i, :], store, prefix="fwd")
    assert np.abs(fwd[0] - bwd[0]).max() < 1e-12


def test_recurrent_core_parameter_count():
    store = lstm.init_params(np.random.default_rng(10), n_classes=10, hidden=72)
    core = store.total_scalars("fwd_")
    assert core == 4 * (72 * (4 + 72) + 72)  # 22,176
    assert lstm.hidden_dim_of(store) == 72


def test_online_equals_batched_prefix_bitwise():
    stats = TimeStats(dq=100.0)
    store = _store(seed=11, n_classes=2, hidden=6)
    seq = moving_dot(1, seed=12, n_events=120, noise_rate=0.1)
    s = 25
    rng = np.random.default_rng(13)
    batch = make_batch([seq.truncated(s + 1)], s, stats, rng)
    res = lstm.forward(batch, store)
    online = lstm.OnlineLstm(store, stats, seq.sensor_dims)
    for i in range(s):
        pred, posterior = online.observe(seq.event(i))
        assert np.array_equal(posterior, en.softmax(res.logits[0, i:i + 1], axis=1)[0])


def test_bidirectional_refuses_online():
    store = _store(seed=14, bidirectional=True)
    stats = TimeStats(dq=100.0)
    try:
        lstm.OnlineLstm(store, stats, (34, 34))
    except ValueError:
        return
    raise AssertionError("bidirectional model must not run online")


def test_training_runs_are_bit_reproducible():
    from inode.optim import AdamState, adam_step

    def run():
        store = _store(seed=15, n_classes=2, hidden=4)
        adam = AdamState(store, lr=1e-3)
        rng = np.random.default_rng(16)
        seqs = [moving_dot(i % 2, seed=i, n_events=80) for i in range(6)]
        stats = TimeStats(dq=100.0)
        for _ in range(3):
            batch = make_batch(seqs, 10, stats, rng)
            grads, _ = lstm.backward_bptt(batch, store)
            adam_step(store, grads, adam)
        return store

    a, b = run(), run()
    for name in a.names():
        assert np.array_equal(a[name], b[name])
