"""Stopping diagnostics: running maximum posterior variance and
cosine dissimilarity of new candidates against everything simulated so far.
"""

from __future__ import annotations

import numpy as np

EPS_NORM = 1e-6   # denominator floor in the cosine; prevents division by zero


def max_posterior_variance(per_epoch_vars) -> float:
    """Running maximum over the per-epoch peak predictive variances."""
    v = np.asarray(per_epoch_vars, dtype=float)
    if v.size == 0:
        raise ValueError("need at least one epoch variance")
    return float(v.max())


def dissimilarity(history, x) -> float:
    """Minimum cosine dissimilarity of x against the history vectors.

    0 means some history vector points the same way (scale-invariant);
    the floored denominator makes the all-zero case read as 1.
    """
    H = np.atleast_2d(np.asarray(history, dtype=float))
    if len(H) == 0:
        raise ValueError("history must be nonempty")
    x = np.asarray(x, dtype=float).reshape(-1)
    dots = H @ x
    denom = np.maximum(np.linalg.norm(H, axis=1) * np.linalg.norm(x), EPS_NORM)
    return float((1.0 - dots / denom).min())


def batch_dissimilarity(history, batch) -> float:
    """Mean per-point dissimilarity of a candidate batch against history."""
    B = np.atleast_2d(np.asarray(batch, dtype=float))
    return float(np.mean([dissimilarity(history, b) for b in B]))
