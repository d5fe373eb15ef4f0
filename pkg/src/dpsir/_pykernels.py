"""Pure-numpy implementations of the hot kernels.

These are the reference semantics; the compiled module in ``_ckernels`` must
agree with them to floating-point summation order.
"""

import numpy as np


def bin_counts(t, m):
    """Counts of ``t`` (values in [-1, 1]) over ``m`` equal-width bins."""
    t = np.asarray(t, dtype=float)
    idx = np.floor((t + 1.0) * (m / 2.0)).astype(np.int64)
    np.clip(idx, 0, m - 1, out=idx)
    return np.bincount(idx, minlength=m).astype(np.int64)


def slice_sums(X, labels, H):
    """Per-slice column sums of ``X`` and slice sizes."""
    X = np.asarray(X, dtype=float)
    labels = np.asarray(labels, dtype=np.int64)
    sums = np.zeros((H, X.shape[1]))
    np.add.at(sums, labels, X)
    counts = np.bincount(labels, minlength=H).astype(np.int64)
    return sums, counts


def fold_terms(X, labels, B, R, H):
    """Truncated moment terms of one gradient step on a data fold.

    With ``Z_i = clip(x_i' B, -R, R)`` and fold size ``n_t`` returns

    * ``kern``: sum_h mean(x | h) (sum_{i in h} Z_i)' / n_t   (p x k)
    * ``cross``: sum_i x_i Z_i' / n_t                          (p x k)
    * ``gram``: sum_i Z_i Z_i' / n_t                           (k x k)
    """
    X = np.asarray(X, dtype=float)
    B = np.asarray(B, dtype=float)
    n_t = X.shape[0]
    Z = np.clip(X @ B, -R, R)
    xsum, counts = slice_sums(X, labels, H)
    zsum, _ = slice_sums(Z, labels, H)
    live = counts > 0
    means = xsum[live] / counts[live][:, None]
    kern = means.T @ zsum[live] / n_t
    cross = X.T @ Z / n_t
    gram = Z.T @ Z / n_t
    return kern, cross, gram


def peel_select(scores, noise):
    """Noisy top-s selection without replacement.

    ``noise`` has shape (s, d); round i picks the unselected index maximizing
    ``scores + noise[i]``, lowest index on ties.
    """
    scores = np.asarray(scores, dtype=float)
    noise = np.asarray(noise, dtype=float)
    s, d = noise.shape
    taken = np.zeros(d, dtype=bool)
    out = np.empty(s, dtype=np.int64)
    for i in range(s):
        noisy = scores + noise[i]
        noisy[taken] = -np.inf
        j = int(np.argmax(noisy))
        out[i] = j
        taken[j] = True
    return out
