"""Compiled vs. numpy pooling kernels, alone and inside a short training run.

    python3 benchmarks/bench_kernels.py [--repeat 5]
"""
import argparse
import time

import numpy as np

from ensemble_ssl import kernels
from ensemble_ssl.data import stratified_split
from ensemble_ssl.harness.config import TrainConfig
from ensemble_ssl.harness.synthetic import SyntheticSpec, generate_synthetic
from ensemble_ssl.harness.train import train


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t)
    return min(times)


def kernel_case(batch, length, vocab, dim, seed=0):
    rng = np.random.default_rng(seed)
    emb = rng.normal(size=(vocab, dim))
    ids = rng.integers(0, vocab, size=(batch, length))
    ids[:, length // 2:] *= rng.random((batch, length - length // 2)) < 0.5  # ragged padding
    d = rng.normal(size=(batch, dim))
    return emb, ids, d


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    impls = kernels.implementations()
    print(f"backends: {sorted(impls)}")

    print(f"\n{'case':<28}" + "".join(f"{n:>12}" for n in impls) + "   speedup")
    for batch, length, vocab, dim in [(8, 16, 3000, 32), (64, 32, 3000, 32), (1200, 32, 3000, 32)]:
        emb, ids, d = kernel_case(batch, length, vocab, dim)
        row = {}
        for name, impl in impls.items():
            def step():
                pooled, inv = kernels.pool_forward(emb, ids, impl=impl)
                g = np.zeros_like(emb)
                kernels.pool_backward(d, ids, inv, g, impl=impl)
            row[name] = best_of(step, args.repeat * 20)
        label = f"fwd+bwd b={batch} L={length}"
        ratio = row["python"] / row["cython"] if "cython" in row else float("nan")
        print(f"{label:<28}" + "".join(f"{row[n] * 1e6:>10.1f}us" for n in impls) + f"   {ratio:.1f}x")

    corpus = generate_synthetic(SyntheticSpec(n_examples=800, seed=1))
    pools = stratified_split(corpus, (0.2, 0.6, 0.2), seed=1)
    cfg = TrainConfig(epochs=3, warmup_epochs=2, seed=1)
    row = {}
    metrics = {}
    for name in impls:
        kernels.use(name)
        row[name] = best_of(lambda: metrics.__setitem__(name, train(cfg, corpus, pools).metrics_csv()),
                            max(1, args.repeat // 2))
    ratio = row["python"] / row["cython"] if "cython" in row else float("nan")
    print(f"{'train 800 ex, 3 epochs':<28}" + "".join(f"{row[n]:>11.2f}s" for n in impls)
          + f"   {ratio:.1f}x")
    if len(set(metrics.values())) == 1:
        print("metrics.csv identical across backends")
    else:
        print("WARNING: metrics.csv differs across backends")


if __name__ == "__main__":
    main()
