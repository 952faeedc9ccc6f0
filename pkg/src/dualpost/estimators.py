"""Plug-in class-probability estimation by local polynomial regression.

Fits, at each evaluation point, a weighted least-squares polynomial of
bounded total degree in the centered covariates and reads off the constant
term.  Degenerate local designs (rank-deficient Gram matrix) yield 0 rather
than an arbitrary least-norm solution.  One-vs-all indicator regressions
with renormalization turn this into a class-probability table.
"""

from __future__ import annotations

from itertools import combinations_with_replacement

import numpy as np

from .core import norm_1_to_2

__all__ = [
    "local_poly_fit_predict",
    "one_vs_all",
    "estimation_errors",
    "default_bandwidth",
    "save_probability_table",
    "load_probability_table",
]

KERNELS = ("box", "epanechnikov", "gaussian")

_RANK_TOL = 1e-10


def _as_points(a):
    """Covariates as an (n, d) array; 1-d input means scalar covariates."""
    a = np.asarray(a, dtype=float)
    if a.ndim == 1:
        return a[:, None]
    if a.ndim != 2:
        raise ValueError(f"covariates must be (n, d), got shape {a.shape}")
    return a


def _kernel_weights(u_sq, kernel):
    """Radial kernel value from squared scaled distances ||u||^2."""
    if kernel == "box":
        return (u_sq <= 1.0).astype(float)
    if kernel == "epanechnikov":
        return np.maximum(1.0 - u_sq, 0.0)
    if kernel == "gaussian":
        return np.exp(-0.5 * u_sq)
    raise ValueError(f"unknown kernel {kernel!r}; choose from {KERNELS}")


def default_bandwidth(n, dims, degree):
    """Rate-balancing bandwidth  n^(-1 / (2*degree + 2 + dims))."""
    if n < 1:
        raise ValueError("bandwidth needs a positive sample count")
    return float(n) ** (-1.0 / (2 * degree + 2 + dims))


def _monomials(diff, degree):
    """Design columns: all monomials of total degree <= degree in diff rows."""
    n, d = diff.shape
    cols = [np.ones(n)]
    for deg in range(1, degree + 1):
        for combo in combinations_with_replacement(range(d), deg):
            col = np.ones(n)
            for j in combo:
                col = col * diff[:, j]
            cols.append(col)
    return np.column_stack(cols)


def local_poly_fit_predict(x_train, y_train, x_eval, degree=0, kernel="epanechnikov", bandwidth=None):
    """Local polynomial estimates of E[Y|X=x] at each evaluation point.

    At each x the polynomial of total degree <= `degree` minimizing the
    kernel-weighted squared error over centered covariates is fit; the
    prediction is its constant coefficient, clipped to [0, 1].  If the
    weighted design is rank deficient (smallest Gram eigenvalue below
    1e-10 times the Gram trace) the prediction is 0.  degree=0 is the
    kernel-weighted mean.

    Parameters
    ----------
    x_train : (n, d) or (n,) array
    y_train : (n,) array of responses in [0, 1]
    x_eval : (m, d) or (m,) array
    degree : int, total polynomial degree
    kernel : "box", "epanechnikov", or "gaussian", applied radially
    bandwidth : float, defaults to n^(-1/(2*degree + 2 + d))

    Returns
    -------
    (m,) array of estimates in [0, 1].
    """
    x_train = _as_points(x_train)
    x_eval = _as_points(x_eval)
    y_train = np.asarray(y_train, dtype=float)
    n, d = x_train.shape
    if x_eval.shape[1] != d:
        raise ValueError(
            f"evaluation points have {x_eval.shape[1]} features, training has {d}"
        )
    if y_train.shape != (n,):
        raise ValueError(f"{n} training points but responses shaped {y_train.shape}")
    if degree < 0:
        raise ValueError(f"degree must be nonnegative, got {degree}")
    if bandwidth is None:
        bandwidth = default_bandwidth(n, d, degree)
    if not bandwidth > 0:
        raise ValueError(f"bandwidth must be positive, got {bandwidth}")

    out = np.zeros(x_eval.shape[0])
    for k, x in enumerate(x_eval):
        diff = (x_train - x) / bandwidth
        w = _kernel_weights(np.sum(diff * diff, axis=1), kernel)
        if not np.any(w > 0):
            continue
        phi = _monomials(diff, degree)
        gram = phi.T @ (w[:, None] * phi)
        eigs = np.linalg.eigvalsh(gram)
        if eigs[0] <= _RANK_TOL * np.trace(gram):
            continue
        theta = np.linalg.solve(gram, phi.T @ (w * y_train))
        out[k] = theta[0]
    return np.clip(out, 0.0, 1.0)


def one_vs_all(x_train, labels, n_classes, x_eval, degree=0, kernel="epanechnikov", bandwidth=None):
    """Class-probability table from per-class indicator regressions.

    Each class's indicator is regressed with `local_poly_fit_predict`; rows
    are renormalized to the simplex, falling back to uniform where every
    class estimate is zero.
    """
    labels = np.asarray(labels)
    if labels.ndim != 1:
        raise ValueError(f"labels must be 1-d, got shape {labels.shape}")
    if n_classes < 2:
        raise ValueError(f"need at least two classes, got {n_classes}")
    cols = [
        local_poly_fit_predict(
            x_train, (labels == y).astype(float), x_eval, degree, kernel, bandwidth
        )
        for y in range(n_classes)
    ]
    table = np.column_stack(cols)
    totals = table.sum(axis=1)
    flat = totals <= 0.0
    table[flat] = 1.0 / n_classes
    totals[flat] = 1.0
    return table / totals[:, None]


def estimation_errors(loss_true, loss_est, cons_true, cons_est, xs, weights):
    """Oracle-approximation terms for the certificates.

    Returns (delta_loss, delta_cost): the expected sup-norm loss error
    E max_a |L - L_hat|  and the root mean squared constraint-column error
    sqrt(E ||C - C_hat||_{1->2}^2)  over the weighted support.
    """
    weights = np.asarray(weights, dtype=float)
    d_loss = 0.0
    d_cost_sq = 0.0
    for x, w in zip(xs, weights):
        d_loss += w * float(np.max(np.abs(loss_true(x) - loss_est(x))))
        d_cost_sq += w * norm_1_to_2(cons_true(x) - cons_est(x)) ** 2
    return d_loss, float(np.sqrt(d_cost_sq))


def save_probability_table(path, table):
    """Write class probabilities as CSV: header p0..p{K-1}, full precision."""
    table = np.asarray(table, dtype=float)
    if table.ndim != 2:
        raise ValueError(f"probability table must be 2-d, got shape {table.shape}")
    with open(path, "w") as fh:
        fh.write(",".join(f"p{j}" for j in range(table.shape[1])) + "\n")
        for row in table:
            fh.write(",".join(f"{v:.17g}" for v in row) + "\n")


def load_probability_table(path):
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        if not header or not all(h.startswith("p") for h in header):
            raise ValueError(f"{path}: not a probability table (header {header!r})")
        rows = [line.strip().split(",") for line in fh if line.strip()]
    table = np.array(rows, dtype=float)
    if table.ndim != 2 or table.shape[1] != len(header):
        raise ValueError(f"{path}: ragged probability table")
    return table
