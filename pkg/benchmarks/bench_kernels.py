"""Benchmark the compiled classifier kernels against the numpy fallback.

Runs the three hot paths (token hashing, one SGD epoch, batch scoring) on a
synthetic corpus with both backends and prints a timing table plus speedups.

Usage: python3 benchmarks/bench_kernels.py [--docs N] [--epochs N] [--dim D]
"""

import argparse
import time

import numpy as np

from llambert.classifier import build_csr, featurize
from llambert.classifier import _kernels_py as kpy
from llambert.synth import make_synthetic_corpus

try:
    from llambert.classifier import _kernels_c as kc
except ImportError:
    kc = None


def timeit(fn, repeats=3):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--docs", type=int, default=5000)
    ap.add_argument("--epochs", type=int, default=5)
    ap.add_argument("--dim", type=int, default=18)
    args = ap.parse_args()

    corpus = make_synthetic_corpus(0, 0, args.docs, seed=1)
    texts = [corpus[i].text for i in corpus.split_ids("extra")]
    tokens = [t.encode("utf-8") for text in texts for t in text.split()]
    vectors = [featurize(t, args.dim) for t in texts]
    indptr, indices, values = build_csr(vectors)
    labels = np.array([float(i % 2) for i in range(len(texts))])
    order = np.arange(len(texts), dtype=np.int64)
    rng = np.random.default_rng(0)
    w_scored = rng.normal(0, 0.1, (1 << args.dim) + 1)

    backends = [("python", kpy)]
    if kc is not None:
        backends.insert(0, ("cython", kc))
    else:
        print("compiled kernels not available; benchmarking fallback only")

    def bench(kernels):
        out = {}
        out["hash_tokens"] = timeit(lambda: kernels.hash_tokens(tokens, args.dim))

        def sgd():
            w = np.zeros((1 << args.dim) + 1)
            step = 0
            for _ in range(args.epochs):
                _, n = kernels.sgd_epoch(w, indptr, indices, values, labels,
                                         order, 0.1, 1e-6, 16, step)
                step += n

        out[f"sgd {args.epochs} epochs"] = timeit(sgd)
        out["predict_scores"] = timeit(
            lambda: kernels.predict_scores(w_scored, indptr, indices, values))
        return out

    results = {name: bench(kernels) for name, kernels in backends}

    rows = list(results[backends[0][0]])
    width = max(len(r) for r in rows)
    header = f"{'kernel':<{width}}" + "".join(f"  {name:>10}" for name, _ in backends)
    if len(backends) == 2:
        header += f"  {'speedup':>8}"
    print(f"\n{args.docs} docs, d={args.dim}, {len(tokens)} tokens\n")
    print(header)
    print("-" * len(header))
    for row in rows:
        line = f"{row:<{width}}"
        for name, _ in backends:
            line += f"  {results[name][row] * 1000:>8.1f}ms"
        if len(backends) == 2:
            line += f"  {results['python'][row] / results['cython'][row]:>7.1f}x"
        print(line)


if __name__ == "__main__":
    main()
