"""Constraint family builders.

Each builder turns class-probability estimates (and auxiliary models) into a
problem triple whose constraint rows encode expectation budgets of the form
E[C(X) pi(X)] <= 0.  Budgets are folded into the rows using that action
probabilities sum to one, so every family presents the same homogeneous
interface to the optimizer and the certificates.

Row layouts are fixed and documented per builder; evaluation code relies on
them to label reported violations.
"""

from __future__ import annotations

import numpy as np

from .problem import ActionSpace, ConstraintOracle, LossOracle, Problem
from .setvalued import build_set_valued

__all__ = [
    "ProbabilityModel",
    "build_standard",
    "build_reject_controlled_rejection",
    "build_reject_controlled_error",
    "build_demographic_parity",
    "build_equalized_odds",
    "build_churn",
    "build_set_valued",
    "combine",
    "one_hot_groups",
    "dp_row_labels",
    "eo_row_labels",
]

_SIMPLEX_TOL = 1e-6


class ProbabilityModel:
    """Maps x to a probability vector of fixed length.

    Entries must be nonnegative and sum to one within a small tolerance;
    estimators in this package guarantee that, raw scores do not.
    """

    def __init__(self, fn, size, name="probability"):
        self.fn = fn
        self.size = int(size)
        self.name = name
        self.table = None

    @classmethod
    def from_table(cls, values, name="probability"):
        values = np.ascontiguousarray(values, dtype=float)
        if values.ndim != 2:
            raise ValueError(f"probability table must be (n, size), got {values.shape}")
        model = cls(lambda i: values[int(i)], values.shape[1], name=name)
        model.table = values
        return model

    def __call__(self, x):
        p = np.asarray(self.fn(x), dtype=float)
        if p.shape != (self.size,):
            raise ValueError(
                f"{self.name} model returned shape {p.shape}, expected ({self.size},)"
            )
        if not np.all(np.isfinite(p)):
            raise ValueError(f"{self.name} model returned non-finite values at x={x!r}")
        if np.any(p < -_SIMPLEX_TOL) or abs(p.sum() - 1.0) > _SIMPLEX_TOL:
            raise ValueError(
                f"{self.name} model output is not a probability vector at x={x!r}: {p!r}"
            )
        return np.clip(p, 0.0, None)


def _as_prob_model(p, name):
    if isinstance(p, ProbabilityModel):
        return p
    return ProbabilityModel.from_table(p, name=name)


def _tabulate(problem, n):
    """Rebuild a problem on table-backed oracles over support indices 0..n-1."""
    loss_table = np.stack([problem.loss(i) for i in range(n)])
    cost_table = np.stack([problem.constraints(i) for i in range(n)])
    return Problem(
        problem.actions,
        LossOracle.from_table(loss_table, name=problem.loss.name),
        ConstraintOracle.from_table(cost_table, name=problem.constraints.name),
    )


def _maybe_tabulate(problem, *models):
    tables = [m.table for m in models if isinstance(m, ProbabilityModel)]
    if tables and all(t is not None for t in tables):
        return _tabulate(problem, tables[0].shape[0])
    return problem


def build_standard(probs):
    """Unconstrained classification: actions = classes, loss 1 - p_a."""
    probs = _as_prob_model(probs, "class probability")
    k = probs.size
    loss = LossOracle(lambda x: 1.0 - probs(x), k, name="classification loss")
    prob = Problem(ActionSpace.classes(k), loss)
    return _maybe_tabulate(prob, probs)


def build_reject_controlled_rejection(probs, budget):
    """Abstention with a rejection budget.

    Actions are the classes plus reject.  Loss charges 1 - p_a on class
    actions and nothing on reject; the single constraint row keeps the
    expected rejection rate at or below `budget`.
    """
    probs = _as_prob_model(probs, "class probability")
    if not 0.0 < budget < 1.0:
        raise ValueError(f"rejection budget must lie in (0, 1), got {budget}")
    k = probs.size
    space = ActionSpace.with_reject(k)

    def loss_fn(x):
        return np.append(1.0 - probs(x), 0.0)

    row = np.full(k + 1, -budget)
    row[k] = 1.0 - budget

    loss = LossOracle(loss_fn, k + 1, name="accept loss")
    cons = ConstraintOracle(lambda x: row[None, :], 1, k + 1, name="rejection rate")
    return _maybe_tabulate(Problem(space, loss, cons), probs)


def build_reject_controlled_error(probs, delta):
    """Abstention that minimizes rejections subject to an error budget.

    Loss counts rejections; the constraint row keeps the expected
    misclassification mass among accepted points at or below `delta`.
    """
    probs = _as_prob_model(probs, "class probability")
    if not 0.0 < delta < 1.0:
        raise ValueError(f"error budget must lie in (0, 1), got {delta}")
    k = probs.size
    space = ActionSpace.with_reject(k)
    loss_row = np.zeros(k + 1)
    loss_row[k] = 1.0

    def cons_fn(x):
        row = np.append(1.0 - probs(x), 0.0) - delta
        return row[None, :]

    loss = LossOracle(lambda x: loss_row, k + 1, name="rejection loss")
    cons = ConstraintOracle(cons_fn, 1, k + 1, name="accepted error")
    return _maybe_tabulate(Problem(space, loss, cons), probs)


def dp_row_labels(n_groups, n_classes):
    """Row labels for demographic parity: (sign, group, class), '+' block first."""
    return [
        (sign, s, y)
        for sign in ("+", "-")
        for s in range(n_groups)
        for y in range(n_classes)
    ]


def build_demographic_parity(probs, groups, group_marginals, eps):
    """Demographic parity within eps_s per group.

    Two rows per (group s, class y) bound both signs of
    P(hat{Y}=y | S=s) - P(hat{Y}=y).  Row order follows `dp_row_labels`.
    `groups` maps x to group membership probabilities; pass one-hot rows
    (see `one_hot_groups`) when the sensitive attribute is observed.
    """
    probs = _as_prob_model(probs, "class probability")
    groups = _as_prob_model(groups, "group probability")
    k, n_groups = probs.size, groups.size
    marg = np.asarray(group_marginals, dtype=float)
    if marg.shape != (n_groups,):
        raise ValueError(
            f"group marginals shape {marg.shape} does not match {n_groups} groups"
        )
    if np.any(marg <= 0) or abs(marg.sum() - 1.0) > _SIMPLEX_TOL:
        raise ValueError("group marginals must be positive and sum to one")
    eps = np.broadcast_to(np.asarray(eps, dtype=float), (n_groups,)).copy()
    if np.any(eps < 0):
        raise ValueError("eps must be nonnegative")

    m = 2 * n_groups * k

    def cons_fn(x):
        tau = groups(x)
        ratio = tau / marg - 1.0  # (S,)
        out = np.empty((2, n_groups, k, k))
        eye = np.eye(k)
        out[0] = ratio[:, None, None] * eye[None, :, :] - eps[:, None, None]
        out[1] = -ratio[:, None, None] * eye[None, :, :] - eps[:, None, None]
        return out.reshape(m, k)

    loss = LossOracle(lambda x: 1.0 - probs(x), k, name="classification loss")
    cons = ConstraintOracle(cons_fn, m, k, name="demographic parity")
    return _maybe_tabulate(Problem(ActionSpace.classes(k), loss, cons), probs, groups)


def eo_row_labels(n_groups, n_classes):
    """Row labels for equalized odds: (sign, action, group, true class)."""
    return [
        (sign, y, s, yt)
        for sign in ("+", "-")
        for y in range(n_classes)
        for s in range(n_groups)
        for yt in range(n_classes)
    ]


def build_equalized_odds(joint, joint_marginals, eps):
    """Equalized odds within eps.

    `joint` maps x to P(S=s, Y=y | X=x) flattened row-major over (s, y);
    class probabilities are its group sums, which keeps the loss and the
    constraint rows consistent.  Two rows per (action y, group s, true
    class y') bound both signs of
    P(hat{Y}=y | S=s, Y=y') - P(hat{Y}=y | Y=y').
    Row order follows `eo_row_labels`.
    """
    if not isinstance(joint, ProbabilityModel):
        joint = np.ascontiguousarray(joint, dtype=float)
        if joint.ndim != 3:
            raise ValueError(
                f"joint table must be (n, groups, classes), got {joint.shape}"
            )
        joint = ProbabilityModel.from_table(
            joint.reshape(joint.shape[0], -1), name="joint probability"
        )
    q_marg = np.asarray(joint_marginals, dtype=float)
    if q_marg.ndim != 2:
        raise ValueError(f"joint marginals must be (groups, classes), got {q_marg.shape}")
    n_groups, k = q_marg.shape
    if joint.size != n_groups * k:
        raise ValueError(
            f"joint model emits {joint.size} entries, marginals imply {n_groups * k}"
        )
    if np.any(q_marg <= 0) or abs(q_marg.sum() - 1.0) > _SIMPLEX_TOL:
        raise ValueError("joint marginals must be positive and sum to one")
    if not eps >= 0:
        raise ValueError("eps must be nonnegative")
    p_marg = q_marg.sum(axis=0)  # (K,)

    m = 2 * k * n_groups * k
    eye = np.eye(k)

    def joint_matrix(x):
        return joint(x).reshape(n_groups, k)

    def cons_fn(x):
        q = joint_matrix(x)
        p = q.sum(axis=0)
        # ratio[s, yt] = q_{s,yt}(x)/Q_{s,yt} - p_{yt}(x)/P_{yt}
        ratio = q / q_marg - (p / p_marg)[None, :]
        block = ratio[None, :, :, None] * eye[:, None, None, :]  # (y, s, yt, a)
        out = np.empty((2, k, n_groups, k, k))
        out[0] = block - eps
        out[1] = -block - eps
        return out.reshape(m, k)

    def loss_fn(x):
        return 1.0 - joint_matrix(x).sum(axis=0)

    loss = LossOracle(loss_fn, k, name="classification loss")
    cons = ConstraintOracle(cons_fn, m, k, name="equalized odds")
    return _maybe_tabulate(Problem(ActionSpace.classes(k), loss, cons), joint)


def build_churn(probs, baseline, budget):
    """Standard classification with bounded disagreement against a baseline.

    `baseline` maps x to the incumbent label index (or is an int array over
    the support).  The constraint row keeps E[pi(a != baseline)] <= budget.
    """
    probs = _as_prob_model(probs, "class probability")
    if not 0.0 < budget <= 1.0:
        raise ValueError(f"churn budget must lie in (0, 1], got {budget}")
    k = probs.size
    if not callable(baseline):
        table = np.asarray(baseline)
        if table.ndim != 1:
            raise ValueError(f"baseline table must be 1-d, got shape {table.shape}")
        baseline_fn = lambda i: table[int(i)]
    else:
        baseline_fn = baseline

    def cons_fn(x):
        g = int(baseline_fn(x))
        if not 0 <= g < k:
            raise ValueError(f"baseline label {g} outside 0..{k - 1} at x={x!r}")
        row = np.full(k, 1.0 - budget)
        row[g] = -budget
        return row[None, :]

    loss = LossOracle(lambda x: 1.0 - probs(x), k, name="classification loss")
    cons = ConstraintOracle(cons_fn, 1, k, name="churn rate")
    return _maybe_tabulate(Problem(ActionSpace.classes(k), loss, cons), probs)


def combine(first, *rest):
    """Stack the constraint rows of several problems; loss comes from `first`.

    All problems must share the same action space.
    """
    problems = (first,) + rest
    for p in rest:
        if p.actions != first.actions:
            raise ValueError("combined problems must share one action space")
    parts = [p.constraints for p in problems if p.constraints.n_constraints > 0]
    if not parts:
        return Problem(first.actions, first.loss)
    m = sum(c.n_constraints for c in parts)
    a = first.actions.size

    tables = [c.table for c in parts]
    if all(t is not None for t in tables) and len({t.shape[0] for t in tables}) == 1:
        cons = ConstraintOracle.from_table(
            np.concatenate(tables, axis=1), name="combined"
        )
    else:
        cons = ConstraintOracle(
            lambda x: np.vstack([c(x) for c in parts]), m, a, name="combined"
        )
    return Problem(first.actions, first.loss, cons)


def one_hot_groups(labels, n_groups):
    """Table model for an observed sensitive attribute: tau_s(x) = 1{s(x)=s}."""
    labels = np.asarray(labels, dtype=int)
    if labels.ndim != 1:
        raise ValueError(f"labels must be 1-d, got shape {labels.shape}")
    if labels.size and (labels.min() < 0 or labels.max() >= n_groups):
        raise ValueError(f"labels must lie in 0..{n_groups - 1}")
    table = np.zeros((labels.size, n_groups))
    table[np.arange(labels.size), labels] = 1.0
    return ProbabilityModel.from_table(table, name="group indicator")
