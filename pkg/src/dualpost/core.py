"""Shift-stable smooth-max primitives and the projected gradient mapping.

Everything downstream (dual objectives, optimizer steps, certificates) is
assembled from the five small functions here, so they are kept free of any
problem-specific structure.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "lse",
    "softmax",
    "positive_part",
    "gradient_mapping",
    "norm_1_to_2",
]


def lse(w, beta=1.0, axis=-1):
    """Smoothed maximum  beta^{-1} * log(sum_j exp(beta * w_j)).

    Computed with a max shift so that large positive or negative entries
    never overflow.  Satisfies max(w) <= lse(w) <= max(w) + log(m)/beta.

    Parameters
    ----------
    w : array_like
        Scores; the reduction runs over `axis`.
    beta : float
        Smoothing parameter, > 0.
    axis : int
        Axis to reduce.

    Returns
    -------
    float or ndarray
        Smoothed maximum, one value per slice along `axis`.
    """
    w = np.asarray(w, dtype=float)
    if w.shape == () or w.shape[axis] == 0:
        raise ValueError("lse needs at least one entry along the reduced axis")
    if not beta > 0:
        raise ValueError(f"beta must be positive, got {beta}")
    m = np.max(w, axis=axis, keepdims=True)
    out = m.squeeze(axis) + np.log(np.sum(np.exp(beta * (w - m)), axis=axis)) / beta
    return float(out) if out.ndim == 0 else out


def softmax(w, beta=1.0, axis=-1):
    """Gibbs weights exp(beta*w_j) / sum_k exp(beta*w_k), the gradient of `lse`.

    Invariant under a common shift of `w`; rows sum to one by construction.
    """
    w = np.asarray(w, dtype=float)
    if w.shape == () or w.shape[axis] == 0:
        raise ValueError("softmax needs at least one entry along the reduced axis")
    if not beta > 0:
        raise ValueError(f"beta must be positive, got {beta}")
    z = np.exp(beta * (w - np.max(w, axis=axis, keepdims=True)))
    return z / np.sum(z, axis=axis, keepdims=True)


def positive_part(v):
    """Componentwise max(v, 0), the projection onto the nonnegative orthant."""
    return np.maximum(np.asarray(v, dtype=float), 0.0)


def gradient_mapping(lam, grad, alpha):
    """Projected gradient mapping  (lam - (lam - alpha*grad)_+) / alpha.

    Componentwise this equals min(lam_j / alpha, grad_j); its norm is the
    stationarity residual used by the certificates.  `lam` must already lie
    in the nonnegative orthant.
    """
    lam = np.asarray(lam, dtype=float)
    grad = np.asarray(grad, dtype=float)
    if not alpha > 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    if lam.shape != grad.shape:
        raise ValueError(f"shape mismatch: lam {lam.shape} vs grad {grad.shape}")
    if np.any(lam < 0):
        raise ValueError("lam must be componentwise nonnegative")
    return (lam - positive_part(lam - alpha * grad)) / alpha


def norm_1_to_2(A):
    """Largest column 2-norm of a matrix, i.e. the 1->2 operator norm."""
    A = np.asarray(A, dtype=float)
    if A.ndim != 2:
        raise ValueError(f"expected a matrix, got ndim={A.ndim}")
    if A.size == 0:
        return 0.0
    return float(np.max(np.linalg.norm(A, axis=0)))
