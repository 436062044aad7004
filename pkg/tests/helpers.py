"""Shared oracles for the test suite."""

import numpy as np


def central_difference(loss_fn, store, names=None, h=1e-6):
    """Finite-difference gradient of loss_fn() w.r.t. every store entry.

    loss_fn takes no arguments and reads the store in place.
    """
    out = {}
    for name in (names or store.names()):
        p = store[name]
        g = np.empty_like(p)
        it = np.nditer(p, flags=["multi_index"])
        for _ in it:
            idx = it.multi_index
            orig = p[idx]
            p[idx] = orig + h
            lp = loss_fn()
            p[idx] = orig - h
            lm = loss_fn()
            p[idx] = orig
            g[idx] = (lp - lm) / (2.0 * h)
        out[name] = g
    return out


def max_rel_err(analytic, numeric, floor=1e-3):
    """Worst relative error between two gradient dicts.

    The denominator floor stops finite-difference noise on true-zero
    entries from being read as error.
    """
    worst = 0.0
    for name, a in analytic.items():
        b = numeric[name]
        denom = np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)
        worst = max(worst, float(np.max(np.abs(a - b) / denom)))
    return worst


def matmul_triple_loop(a, b):
    """Brute-force product, independent of the library path."""
    n, k = a.shape
    k2, m = b.shape
    assert k == k2
    out = np.zeros((n, m))
    for i in range(n):
        for j in range(m):
            acc = 0.0
            for kk in range(k):
                acc += a[i, kk] * b[kk, j]
            out[i, j] = acc
    return out


def cross_entropy_direct(logits, labels):
    """Plain exp/normalize/-log oracle for the batched loss."""
    losses = []
    probs = []
    for row, label in zip(logits, labels):
        e = np.exp(row)
        p = e / e.sum()
        probs.append(p)
        losses.append(-np.log(p[label]))
    return float(np.mean(losses)), np.array(probs)
