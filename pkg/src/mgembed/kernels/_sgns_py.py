"""Pure-Python SkipGram negative-sampling kernel (fallback for ``_sgns``).

For pair ``(c, o)`` with negatives ``n_1..n_K`` the per-pair objective is::

    log s(r'_o . r_c) + sum_k log s(-r'_{n_k} . r_c)

Negatives equal to ``o`` are dropped. All scores and gradient scalars are
computed from the vectors as they were before the step, so the update is
``lr`` times the exact gradient (duplicates simply add up).
"""
from concurrent.futures import ThreadPoolExecutor

import numpy as np


def _run(syn0, syn1, centers, contexts, negatives, lr_start, lr_end, lo, hi, total):
    dtype = syn0.dtype
    for i in range(lo, hi):
        c = centers[i]
        o = contexts[i]
        lr = lr_start + (lr_end - lr_start) * (i / total)
        negs = negatives[i]
        targets = np.concatenate(([o], negs[negs != o]))
        labels = np.zeros(len(targets))
        labels[0] = 1.0
        rc = syn0[c].astype(np.float64)
        w = syn1[targets].astype(np.float64)
        with np.errstate(over="ignore"):
            grad = lr * (labels - 1.0 / (1.0 + np.exp(-(w @ rc))))
        if not np.all(np.isfinite(grad)):
            return i
        neu1e = grad @ w
        for t, g in zip(targets.tolist(), grad.tolist()):
            syn1[t] = (syn1[t].astype(np.float64) + g * rc).astype(dtype)
        syn0[c] = (rc + neu1e).astype(dtype)
        if not np.all(np.isfinite(syn0[c])):
            return i
    return -1


def sgns_pairs(syn0, syn1, centers, contexts, negatives, lr_start, lr_end, workers=1):
    total = len(centers)
    if total == 0:
        return -1
    if workers <= 1:
        return _run(syn0, syn1, centers, contexts, negatives, lr_start, lr_end, 0, total, total)
    bounds = [(s * total // workers, (s + 1) * total // workers) for s in range(workers)]
    with ThreadPoolExecutor(workers) as pool:
        results = list(pool.map(
            lambda b: _run(syn0, syn1, centers, contexts, negatives,
                           lr_start, lr_end, b[0], b[1], total), bounds))
    bad = [r for r in results if r >= 0]
    return bad[0] if bad else -1
