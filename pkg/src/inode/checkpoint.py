"""Self-contained model checkpoints.

A checkpoint is the binary record format of :mod:`inode.params` with a
few reserved ``__meta__/...`` records carrying everything inference
needs: the time-step statistics, the model geometry, and the run
configuration as JSON, so loading never touches training data.
"""

import json
from dataclasses import dataclass

import numpy as np

from .errors import FormatError
from .params import ParamStore, load_records, save_store
from .preprocess import TimeStats

MODEL_KINDS = ("inode", "lstm", "bilstm")

META_STATS = "__meta__/time_stats"
META_MODEL = "__meta__/model"
META_CONFIG = "__meta__/config_json"


@dataclass
class Checkpoint:
    store: ParamStore
    stats: TimeStats
    kind: str
    n_classes: int
    state_dim: int
    features: int
    sensor_dims: tuple
    config: dict | None = None


def save_checkpoint(path, store, stats, kind, n_classes, state_dim, features,
                    sensor_dims, config=None):
    if kind not in MODEL_KINDS:
        raise ValueError(f"unknown model kind {kind!r}")
    extra = [
        (META_STATS, np.array([[stats.dq, stats.dmax]])),
        (META_MODEL, np.array([[float(MODEL_KINDS.index(kind)), float(n_classes),
                                float(state_dim), float(features),
                                float(sensor_dims[0]), float(sensor_dims[1])]])),
    ]
    if config is not None:
        blob = json.dumps(config, sort_keys=True).encode("utf-8")
        extra.append((META_CONFIG, np.frombuffer(blob, dtype=np.uint8)[None, :].astype(np.float64)))
    save_store(store, path, extra=extra)


def load_checkpoint(path):
    records = load_records(path)
    if META_STATS not in records or META_MODEL not in records:
        raise FormatError("checkpoint is missing its metadata records")
    dq, dmax = records.pop(META_STATS)[0]
    kind_code, n_classes, state_dim, features, w, h = records.pop(META_MODEL)[0]
    config = None
    blob = records.pop(META_CONFIG, None)
    if blob is not None:
        config = json.loads(bytes(blob[0].astype(np.uint8)).decode("utf-8"))
    store = ParamStore()
    for name, value in records.items():
        if name.startswith("__meta__/"):
            continue
        store.add(name, value)
    return Checkpoint(
        store=store,
        stats=TimeStats(dq=float(dq), dmax=float(dmax)),
        kind=MODEL_KINDS[int(kind_code)],
        n_classes=int(n_classes),
        state_dim=int(state_dim),
        features=int(features),
        sensor_dims=(int(w), int(h)),
        config=config,
    )
