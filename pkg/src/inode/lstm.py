"""LSTM and bidirectional LSTM baselines on the shared gradient engine.

Baselines receive the normalized time step as a fourth input feature.
Element i of a window carries the gap separating it from element i-1
(zero at the head), so the exact same feature is computable online.
The unidirectional model is trained with the same per-step averaged loss
as the ODE classifier; the bidirectional one classifies from the two
concatenated final states and is recomputed per prefix length, since its
backward pass needs the whole prefix.
"""

import warnings
from dataclasses import dataclass

import numpy as np

from . import engine as en
from .params import ParamStore, uniform_init
from .preprocess import normalize_dt, normalize_input

GATES = ("i", "f", "g", "o")
INPUT_DIM = 4


def init_params(rng, n_classes, hidden, input_dim=INPUT_DIM, bidirectional=False):
    """Gate weights W_* (in->H), recurrent U_* (H->H), biases, classifier."""
    store = ParamStore()
    prefixes = ("fwd", "bwd") if bidirectional else ("fwd",)
    for prefix in prefixes:
        for gate in GATES:
            store.add(f"{prefix}_w{gate}", uniform_init(rng, input_dim, (input_dim, hidden)))
            store.add(f"{prefix}_u{gate}", uniform_init(rng, hidden, (hidden, hidden)))
            store.add(f"{prefix}_b{gate}", np.zeros(hidden))
    head_in = 2 * hidden if bidirectional else hidden
    store.add("fcc_w", uniform_init(rng, head_in, (head_in, n_classes)))
    store.add("fcc_b", np.zeros(n_classes))
    return store


def hidden_dim_of(store):
    return store["fwd_wi"].shape[1]


def class_count_of(store):
    return store["fcc_w"].shape[1]


def is_bidirectional(store):
    return "bwd_wi" in store


def _gate(p, prefix, gate, u, h):
    return en.add(
        en.add(en.matmul(u, p(f"{prefix}_w{gate}")), en.matmul(h, p(f"{prefix}_u{gate}"))),
        p(f"{prefix}_b{gate}"),
    )


def lstm_step(state, u, store, tape=None, prefix="fwd"):
    """Standard LSTM cell: sigmoid gates, tanh candidate and output."""
    h, c = state
    p = store.__getitem__ if tape is None else (lambda name: tape.param(name, store[name]))
    i = en.sigmoid(_gate(p, prefix, "i", u, h))
    f = en.sigmoid(_gate(p, prefix, "f", u, h))
    g = en.tanh(_gate(p, prefix, "g", u, h))
    o = en.sigmoid(_gate(p, prefix, "o", u, h))
    c_new = en.add(en.mul(f, c), en.mul(i, g))
    h_new = en.mul(o, en.tanh(c_new))
    return h_new, c_new


def classify(h, store, tape=None):
    p = store.__getitem__ if tape is None else (lambda name: tape.param(name, store[name]))
    return en.add(en.matmul(h, p("fcc_w")), p("fcc_b"))


@dataclass
class ForwardResult:
    logits: np.ndarray          # [B x S x C] per-step (uni) or [B x 1 x C] (bi)
    loss: float | None
    loss_node: object
    final_state: np.ndarray


def _val(x):
    return x.value if isinstance(x, en.Node) else x


def _zero_state(b, hidden, tape):
    h = np.zeros((b, hidden))
    c = np.zeros((b, hidden))
    if tape is None:
        return h, c
    return tape.const(h), tape.const(c)


def forward(batch, store, tape=None):
    """Unidirectional pass: read-out after every step, per-step averaged loss."""
    feats = batch.features_with_dt()
    b, s = batch.size, batch.steps
    state = _zero_state(b, hidden_dim_of(store), tape)
    with_loss = bool(np.all(batch.labels >= 0))
    logits = np.empty((b, s, class_count_of(store)))
    loss_acc = None
    for i in range(s):
        state = lstm_step(state, feats[:, i, :], store, tape)
        z = classify(state[0], store, tape)
        logits[:, i, :] = _val(z)
        if with_loss:
            step_loss, _ = en.softmax_cross_entropy(z, batch.labels)
            loss_acc = step_loss if loss_acc is None else en.add(loss_acc, step_loss)
    loss_node = en.scale(loss_acc, 1.0 / s) if loss_acc is not None else None
    return ForwardResult(
        logits=logits,
        loss=None if loss_node is None else float(_val(loss_node)),
        loss_node=loss_node,
        final_state=_val(state[0]),
    )


def forward_bidirectional(batch, store, tape=None):
    """Both directions over the whole window; classify the joined final states."""
    feats = batch.features_with_dt()
    b, s = batch.size, batch.steps
    hidden = hidden_dim_of(store)
    fwd = _zero_state(b, hidden, tape)
    bwd = _zero_state(b, hidden, tape)
    for i in range(s):
        fwd = lstm_step(fwd, feats[:, i, :], store, tape, prefix="fwd")
        bwd = lstm_step(bwd, feats[:, s - 1 - i, :], store, tape, prefix="bwd")
    joined = en.concat(fwd[0], bwd[0])
    z = classify(joined, store, tape)
    with_loss = bool(np.all(batch.labels >= 0))
    loss_node = None
    if with_loss:
        loss_node, _ = en.softmax_cross_entropy(z, batch.labels)
    return ForwardResult(
        logits=_val(z)[:, None, :],
        loss=None if loss_node is None else float(_val(loss_node)),
        loss_node=loss_node,
        final_state=_val(joined),
    )


def backward_bptt(batch, store):
    """Exact gradients of the window loss for every parameter."""
    tape = en.Tape()
    run = forward_bidirectional if is_bidirectional(store) else forward
    result = run(batch, store, tape=tape)
    if result.loss_node is None:
        raise ValueError("cannot differentiate an unlabeled batch")
    return en.backward(tape, result.loss_node), result.loss


class OnlineLstm:
    """Streamed unidirectional inference, equal to the batched prefix."""

    def __init__(self, store, stats, sensor_dims):
        if is_bidirectional(store):
            raise ValueError("a bidirectional model cannot run online")
        self.store = store
        self.stats = stats
        self.sensor_dims = sensor_dims
        self.reset()

    def reset(self):
        hidden = hidden_dim_of(self.store)
        self.state = (np.zeros((1, hidden)), np.zeros((1, hidden)))
        self._last_t = None

    def observe(self, event):
        if self._last_t is None:
            dt = 0
        else:
            dt = event.t - self._last_t
            if dt < 0:
                warnings.warn(f"timestamp regression ({self._last_t} -> {event.t}); clamping to 0",
                              stacklevel=2)
                dt = 0
        u3 = normalize_input(event, self.sensor_dims)
        u = np.concatenate([u3, [normalize_dt(dt, self.stats)]]).reshape(1, INPUT_DIM)
        self.state = lstm_step(self.state, u, self.store)
        z = classify(self.state[0], self.store)
        self._last_t = event.t
        return int(np.argmax(z[0])), en.softmax(z, axis=1)[0]
