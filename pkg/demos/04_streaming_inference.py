#!/usr/bin/env python3
"""Event-by-event inference over the text line protocol.

Every inbound event advances the hidden state across the elapsed gap
(holding the previous input constant) and immediately yields a class
posterior, so a downstream consumer always has an up-to-date guess.
"""

import io

import numpy as np

from inode import stream
from inode.checkpoint import Checkpoint
from inode.model import init_params
from inode.preprocess import TimeStats
from inode.synth import moving_dot

ckpt = Checkpoint(store=init_params(np.random.default_rng(1), n_classes=2),
                  stats=TimeStats(dq=100.0), kind="inode", n_classes=2,
                  state_dim=30, features=3, sensor_dims=(34, 34))
session = stream.LineSession(stream.make_session(ckpt))

print("line protocol: 'E x y p t_us' in, 't_us argmax p0 p1' out, 'R' resets\n")
for line in ("E 3 7 1 1000", "E 4 7 1 1080", "E 4 8 0 1150", "R", "E 3 7 1 1000",
             "E oops", "E 3 7 9 10"):
    reply = session.handle(line)
    print(f"  > {line:18s} < {reply}")

print("\nafter R the state is fresh: the two 'E 3 7 1 1000' replies above match")

# replay a whole stream at full speed through the chunked fast path
seq = moving_dot(1, seed=5, n_events=30_000, noise_rate=0.1)
sink = io.StringIO()
n, seconds = stream.fast_replay(seq, ckpt, sink)
print(f"\nfast replay: {n} events in {seconds:.2f}s = {n / seconds:,.0f} events/s")
last = sink.getvalue().strip().rsplit("\n", 1)[-1]
print(f"last outbound line: {last}")

print("\nfor a live socket endpoint:  inode stream --ckpt model.ckpt --listen 0.0.0.0:9000")
print("then:  printf 'E 3 7 1 1000\\n' | nc <host> 9000")
