"""Set-valued prediction: independent include/exclude decisions per class.

A set-valued rule keeps a marginal inclusion probability per class instead
of a distribution over single actions.  Each class contributes a two-entry
(include, exclude) cost pair, so the smoothed dual decomposes into a sum of
per-class two-point smooth maxima and the Gibbs policy into per-class
logistic inclusion probabilities.  The optimizer consumes this through the
same objective protocol as the single-action problems.
"""

from __future__ import annotations

import numpy as np

from .core import lse, norm_1_to_2, softmax
from .problem import _check_weights

__all__ = [
    "SetValuedProblem",
    "SetGibbsClassifier",
    "SetDualObjective",
    "build_set_valued",
    "set_risk_value",
    "set_size_value",
    "set_churn_value",
    "set_constraint_values",
    "solve_set_greedy",
]

# trailing axis convention for all tables: column 0 = include, 1 = exclude
INCLUDE, EXCLUDE = 0, 1


class SetValuedProblem:
    """Finite-support product problem with explicit cost tables.

    loss_table has shape (n, K, 2) and cost_table (n, M, K, 2); entries are
    per-class include/exclude costs.  Constraint rows encode expectation
    budgets E[sum_y c_{j,y,in} pi_y + c_{j,y,out} (1 - pi_y)] <= 0.
    """

    def __init__(self, weights, loss_table, cost_table, class_probs=None):
        loss_table = np.ascontiguousarray(loss_table, dtype=float)
        cost_table = np.ascontiguousarray(cost_table, dtype=float)
        if loss_table.ndim != 3 or loss_table.shape[2] != 2:
            raise ValueError(f"loss table must be (n, classes, 2), got {loss_table.shape}")
        n, k = loss_table.shape[:2]
        if cost_table.ndim != 4 or cost_table.shape[0] != n or cost_table.shape[2:] != (k, 2):
            raise ValueError(
                f"cost table shape {cost_table.shape} does not match loss table"
            )
        self.weights = _check_weights(range(n), weights)
        self.loss_table = loss_table
        self.cost_table = cost_table
        self.class_probs = None if class_probs is None else np.asarray(class_probs, float)

    @property
    def n(self):
        return self.loss_table.shape[0]

    @property
    def n_classes(self):
        return self.loss_table.shape[1]

    @property
    def n_constraints(self):
        return self.cost_table.shape[1]

    def support(self):
        return np.arange(self.n), self.weights

    def dual_objective(self, beta):
        return SetDualObjective(self, beta)

    def gibbs(self, lam, beta):
        return SetGibbsClassifier(self, lam, beta)

    def sigma_sq_bound(self, i):
        """Squared bound on the dual gradient norm at one support point."""
        c = self.cost_table[int(i)]
        total = sum(norm_1_to_2(c[:, y, :]) for y in range(self.n_classes))
        return total**2


class SetGibbsClassifier:
    """Per-class logistic inclusion rule from a dual multiplier."""

    def __init__(self, problem, lam, beta):
        lam = np.ascontiguousarray(lam, dtype=float)
        if lam.shape != (problem.n_constraints,):
            raise ValueError(
                f"lam shape {lam.shape} does not match {problem.n_constraints} constraints"
            )
        if np.any(lam < 0):
            raise ValueError("lam must be componentwise nonnegative")
        if not beta > 0:
            raise ValueError(f"beta must be positive, got {beta}")
        self.problem = problem
        self.lam = lam
        self.beta = float(beta)

    def scores(self, i):
        """(K, 2) dual scores -L - C^T lam at support point i."""
        i = int(i)
        p = self.problem
        return -p.loss_table[i] - np.tensordot(self.lam, p.cost_table[i], axes=1)

    def inclusion_proba(self, i):
        """Marginal inclusion probability per class."""
        return softmax(self.scores(i), self.beta, axis=-1)[:, INCLUDE]

    def sample_set(self, i, rng):
        """Independent Bernoulli membership mask over classes."""
        return rng.random(self.problem.n_classes) < self.inclusion_proba(i)

    def proba_table(self):
        """(n, K) inclusion probabilities over the whole support."""
        return np.stack([self.inclusion_proba(i) for i in range(self.problem.n)])


class SetDualObjective:
    """Smoothed dual of the set-valued problem in lam >= 0.

    Value at one sample is the sum of per-class two-point smooth maxima;
    the gradient aggregates include/exclude constraint costs under the
    per-class Gibbs inclusion probabilities.
    """

    def __init__(self, problem, beta):
        if problem.n_constraints == 0:
            raise ValueError("dual objective needs at least one constraint")
        if not beta > 0:
            raise ValueError(f"beta must be positive, got {beta}")
        self.problem = problem
        self.beta = float(beta)
        self.n_constraints = problem.n_constraints

    def _scores(self, lam, i):
        p = self.problem
        i = int(i)
        return -p.loss_table[i] - np.tensordot(lam, p.cost_table[i], axes=1)

    def value(self, lam, i):
        return float(np.sum(lse(self._scores(lam, i), self.beta, axis=-1)))

    def grad(self, lam, i):
        sigma = softmax(self._scores(lam, i), self.beta, axis=-1)  # (K, 2)
        return -np.einsum("jya,ya->j", self.problem.cost_table[int(i)], sigma)

    def tables(self):
        return self.problem.loss_table, self.problem.cost_table


def build_set_valued(probs, weights, mode, budget, baseline=None, churn_budget=None):
    """Set-valued problem over a finite support of class-probability rows.

    mode="size": minimize expected missed-class mass subject to an expected
    set size of at most `budget` (in units of classes, 0 < budget < K).
    mode="risk": minimize expected set size subject to expected missed-class
    mass at most `budget` (0 < budget < 1).
    An optional churn row bounds E[1 - pi_{baseline(x)}] by `churn_budget`.
    """
    probs = np.ascontiguousarray(probs, dtype=float)
    if probs.ndim != 2:
        raise ValueError(f"probability table must be (n, classes), got {probs.shape}")
    n, k = probs.shape
    if np.any(probs < -1e-6) or np.max(np.abs(probs.sum(axis=1) - 1.0)) > 1e-6:
        raise ValueError("probability rows must be distributions")

    loss = np.zeros((n, k, 2))
    rows = []
    if mode == "size":
        if not 0.0 < budget < k:
            raise ValueError(f"size budget must lie in (0, {k}), got {budget}")
        loss[:, :, EXCLUDE] = probs
        row = np.zeros((n, k, 2))
        row[:, :, INCLUDE] = 1.0
        rows.append(row - budget / k)
    elif mode == "risk":
        if not 0.0 < budget < 1.0:
            raise ValueError(f"risk budget must lie in (0, 1), got {budget}")
        loss[:, :, INCLUDE] = 1.0
        row = np.zeros((n, k, 2))
        row[:, :, EXCLUDE] = probs
        rows.append(row - budget / k)
    else:
        raise ValueError(f"unknown set-valued mode {mode!r}")

    if baseline is not None:
        if churn_budget is None or not 0.0 < churn_budget <= 1.0:
            raise ValueError(f"churn budget must lie in (0, 1], got {churn_budget}")
        base = np.asarray(baseline, dtype=int)
        if base.shape != (n,) or base.min() < 0 or base.max() >= k:
            raise ValueError("baseline must give one class index per support point")
        row = np.zeros((n, k, 2))
        row[np.arange(n), base, EXCLUDE] = 1.0
        rows.append(row - churn_budget / k)
    elif churn_budget is not None:
        raise ValueError("churn budget given without a baseline")

    cost = np.stack(rows, axis=1)
    return SetValuedProblem(weights, loss, cost, class_probs=probs)


def set_risk_value(classifier, probs, weights):
    """Expected missed-class mass  E[sum_y p_y (1 - pi_y)]."""
    probs = np.asarray(probs, dtype=float)
    weights = _check_weights(range(probs.shape[0]), weights)
    total = 0.0
    for i in range(probs.shape[0]):
        total += weights[i] * float(probs[i] @ (1.0 - classifier.inclusion_proba(i)))
    return total


def set_size_value(classifier, weights):
    """Expected set size  E[sum_y pi_y]."""
    n = classifier.problem.n
    weights = _check_weights(range(n), weights)
    return float(
        sum(weights[i] * classifier.inclusion_proba(i).sum() for i in range(n))
    )


def set_churn_value(classifier, baseline, weights):
    """Expected baseline exclusion  E[1 - pi_{baseline(x)}]."""
    n = classifier.problem.n
    weights = _check_weights(range(n), weights)
    base = np.asarray(baseline, dtype=int)
    return float(
        sum(
            weights[i] * (1.0 - classifier.inclusion_proba(i)[base[i]])
            for i in range(n)
        )
    )


def set_constraint_values(classifier, weights=None):
    """Expected constraint row values  E[C(X) . pi-pairs]  of the policy."""
    p = classifier.problem
    weights = p.weights if weights is None else _check_weights(range(p.n), weights)
    out = np.zeros(p.n_constraints)
    for i in range(p.n):
        pi = classifier.inclusion_proba(i)
        pairs = np.stack([pi, 1.0 - pi], axis=-1)  # (K, 2)
        out += weights[i] * np.einsum("jya,ya->j", p.cost_table[i], pairs)
    return out


def solve_set_greedy(probs, weights, mode, budget):
    """Fractional optimum of the set-valued program by greedy exchange.

    Both modes are continuous knapsacks over the (point, class) inclusion
    cells, so sorting by class probability and filling (or draining) until
    the budget binds is exact.  Returns (inclusion matrix, objective value).
    """
    probs = np.asarray(probs, dtype=float)
    n, k = probs.shape
    weights = _check_weights(range(n), weights)
    cell_w = np.repeat(weights, k)  # weight of each (i, y) cell
    cell_p = probs.reshape(-1)
    order = np.argsort(-cell_p, kind="stable")

    pi = np.zeros(n * k)
    if mode == "size":
        # fill highest-probability cells until expected size hits the budget
        remaining = float(budget)
        for cell in order:
            if remaining <= 0:
                break
            take = min(1.0, remaining / cell_w[cell]) if cell_w[cell] > 0 else 1.0
            pi[cell] = take
            remaining -= take * cell_w[cell]
        value = float(cell_w @ (cell_p * (1.0 - pi)))
    elif mode == "risk":
        # start full, drain lowest-probability cells while risk stays in budget
        pi[:] = 1.0
        room = float(budget)
        for cell in order[::-1]:
            if room <= 0:
                break
            mass = cell_w[cell] * cell_p[cell]
            if mass <= 0:
                pi[cell] = 0.0
                continue
            drop = min(1.0, room / mass)
            pi[cell] = 1.0 - drop
            room -= drop * mass
        value = float(cell_w @ pi)
    else:
        raise ValueError(f"unknown set-valued mode {mode!r}")
    return pi.reshape(n, k), value
