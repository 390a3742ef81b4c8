"""Compare the compiled and pure-Python SkipGram kernels.

Usage: python3 benchmarks/bench_sgns.py [--users 2000] [--dim 32] [--repeat 3]

Both backends run the same pairs, negatives and learning-rate schedule on
copies of the same initial tables; the script reports pairs per second and
the largest absolute difference between the resulting input tables.
"""
import argparse
import time

import numpy as np

from mgembed import kernels, synth
from mgembed.context import corpus_to_prediction_pairs, generate_groups
from mgembed.skipgram import build_noise_table, init_embeddings


def setup(users, dim, negatives, seed):
    g = synth.gen_friendship(synth.SynthConfig(users=users, seed=seed))
    corpus = generate_groups(g, seed=seed)
    centers, contexts = corpus_to_prediction_pairs(corpus)
    rng = np.random.default_rng(seed)
    negs = build_noise_table(corpus).draw((len(centers), negatives), rng).astype(np.int32)
    e = init_embeddings(g.num_nodes, dim, rng)
    return e, centers, contexts, negs


def run(fn, e, centers, contexts, negs, workers, limit=None):
    syn0, syn1 = e.input.copy(), e.output.copy()
    if limit is not None:
        centers, contexts, negs = centers[:limit], contexts[:limit], negs[:limit]
    t0 = time.perf_counter()
    fn(syn0, syn1, centers, contexts, negs, 0.025, 0.0125, workers)
    return time.perf_counter() - t0, syn0, len(centers)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--users", type=int, default=2000)
    ap.add_argument("--dim", type=int, default=32)
    ap.add_argument("--negatives", type=int, default=5)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--python-pairs", type=int, default=50000,
                    help="pairs given to the Python kernel (it is much slower)")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    e, centers, contexts, negs = setup(args.users, args.dim, args.negatives, args.seed)
    print(f"pairs={len(centers)} dim={args.dim} negatives={args.negatives} backend={kernels.BACKEND}")
    rows = [("python", kernels.python_sgns_pairs, 1, args.python_pairs)]
    if kernels.compiled_sgns_pairs is not None:
        rows += [("cython", kernels.compiled_sgns_pairs, 1, None),
                 ("cython", kernels.compiled_sgns_pairs, 4, None)]
    else:
        print("compiled kernel unavailable; timing the fallback only")
    results = {}
    for name, fn, workers, limit in rows:
        best = min(run(fn, e, centers, contexts, negs, workers, limit)[0] for _ in range(args.repeat))
        n = len(centers) if limit is None else min(limit, len(centers))
        results[(name, workers)] = n / best
        print(f"{name:>7} workers={workers}  {n / best:12.0f} pairs/s")
    if kernels.compiled_sgns_pairs is not None:
        n = args.python_pairs
        _, a, _ = run(kernels.python_sgns_pairs, e, centers, contexts, negs, 1, n)
        _, b, _ = run(kernels.compiled_sgns_pairs, e, centers, contexts, negs, 1, n)
        print(f"speedup (1 worker): {results[('cython', 1)] / results[('python', 1)]:.1f}x; "
              f"max |diff| over {n} pairs: {np.abs(a - b).max():.3g}")


if __name__ == "__main__":
    main()
