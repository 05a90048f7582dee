#!/usr/bin/env python3
"""Compare the numba kernels against the pure-numpy fallbacks.

Per-kernel timings run both implementations in-process on transformer-shaped
inputs; `--train-steps N` additionally times a short MLM pretraining loop in
two subprocesses, one per CIVICML_NUMBA setting, to show the end-to-end
effect of the env flag.
"""

import argparse
import os
import subprocess
import sys
import time

import numpy as np

from civicml import kernels as K

B, H, L, E, HID, V = 16, 4, 128, 64, 256, 8192
REPEATS = 50


def timeit(fn, *args, repeats=REPEATS):
    fn(*args)  # warm-up (and numba compile)
    t0 = time.perf_counter()
    for _ in range(repeats):
        fn(*args)
    return (time.perf_counter() - t0) / repeats


def bench_kernels():
    rng = np.random.default_rng(0)
    x2 = rng.normal(size=(B * L, HID))
    dy2 = rng.normal(size=(B * L, HID))
    xe = rng.normal(size=(B * L, E))
    dye = rng.normal(size=(B * L, E))
    gain = rng.normal(size=E)
    bias = rng.normal(size=E)
    _, xhat, rstd = K.layer_norm_fwd_np(xe, gain, bias, 1e-5)
    scores = rng.normal(size=(B, H, L, L))
    valid = np.ones((B, L), dtype=bool)
    valid[:, 100:] = False
    probs = K.masked_softmax_np(scores, valid)
    dprobs = rng.normal(size=probs.shape)
    ids = rng.integers(0, V, size=B * L)
    dx = rng.normal(size=(B * L, E))
    param = rng.normal(size=V * E)
    grad = rng.normal(size=V * E)
    m = np.zeros(V * E)
    v = np.zeros(V * E)

    cases = [
        ("gelu_fwd", (x2,)),
        ("gelu_bwd", (x2, dy2)),
        ("layer_norm_fwd", (xe, gain, bias, 1e-5)),
        ("layer_norm_bwd", (dye, xhat, rstd, gain)),
        ("masked_softmax", (scores, valid)),
        ("softmax_bwd", (probs, dprobs)),
        ("embedding_grad", (ids, dx, np.zeros((V, E)))),
        ("adam_step", (param.copy(), grad, m.copy(), v.copy(), 1e-3, 0.9, 0.999, 1e-6, 0.1, 0.001)),
    ]

    print(f"shapes: batch={B} heads={H} len={L} embed={E} hidden={HID} vocab={V}; "
          f"mean of {REPEATS} calls")
    print(f"{'kernel':<16} {'numpy ms':>10} {'numba ms':>10} {'speedup':>8}")
    for name, args in cases:
        t_np = timeit(getattr(K, name + "_np"), *args) * 1e3
        if K.HAVE_NUMBA:
            t_nb = timeit(getattr(K, name + "_nb"), *args) * 1e3
            print(f"{name:<16} {t_np:>10.3f} {t_nb:>10.3f} {t_np / t_nb:>7.1f}x")
        else:
            print(f"{name:<16} {t_np:>10.3f} {'n/a':>10} {'':>8}")


TRAIN_SNIPPET = r"""
import time
import numpy as np
from civicml.model import ModelConfig, init_model
from civicml.tokenizer import train_vocab
from civicml.training import TrainSchedule, pretrain_mlm

words = [f"w{i:02d}" for i in range(20)]
rng = np.random.default_rng(0)
corpus = [" ".join(words[(int(s) + k) % 20] for k in range(24))
          for s in rng.integers(0, 20, size=128)]
vocab = train_vocab(corpus, 160)
cfg = ModelConfig(num_blocks=2, context_width=32, embed_dim=64, hidden_dim=256,
                  num_heads=4, vocab_size=len(vocab))
model = init_model(cfg, seed=0)
sched = TrainSchedule(steps=STEPS, batch_size=16, grad_accum=1, lr=1e-3,
                      warmup_steps=10, max_grad_norm=5.0, seed=1)
pretrain_mlm(model, corpus, vocab, sched)  # compile warm-up
t0 = time.time()
pretrain_mlm(model, corpus, vocab, sched)
print(f"{(time.time() - t0) / STEPS * 1e3:.1f}")
"""


def bench_train_steps(steps: int):
    print(f"\nend-to-end MLM pretraining, {steps} updates per run:")
    for flag, label in (("1", "numba"), ("0", "numpy")):
        env = dict(os.environ, CIVICML_NUMBA=flag)
        out = subprocess.run(
            [sys.executable, "-c", TRAIN_SNIPPET.replace("STEPS", str(steps))],
            env=env, capture_output=True, text=True, check=True,
        )
        print(f"  {label:<6} {out.stdout.strip()} ms/update")


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--train-steps", type=int, default=0,
                        help="also time a short pretraining loop under both env settings")
    args = parser.parse_args()
    print(f"active kernel path: {K.ACTIVE} (CIVICML_NUMBA={os.environ.get('CIVICML_NUMBA', 'unset')})")
    bench_kernels()
    if args.train_steps:
        bench_train_steps(args.train_steps)


if __name__ == "__main__":
    main()
