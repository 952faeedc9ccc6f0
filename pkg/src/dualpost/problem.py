"""Problem model: action spaces, cost oracles, Gibbs policies, dual objective.

A problem is a triple (actions, loss oracle, constraint oracle).  Oracles map
an input x to per-action costs; the loss is a vector over actions and the
constraints a matrix with one row per constraint.  Finite-support problems
carry explicit tables and use the support index as the input x, which keeps
expectations exact and feeds the compiled optimizer path.
"""

from __future__ import annotations

import json

import numpy as np

from .core import lse, softmax

__all__ = [
    "ActionSpace",
    "OracleError",
    "LossOracle",
    "ConstraintOracle",
    "Problem",
    "GibbsClassifier",
    "DualObjective",
    "SampleStream",
    "FiniteInstance",
    "score_vector",
    "predict_proba",
    "sample_action",
    "dual_objective",
    "stochastic_gradient",
    "exact_gradient",
    "constraint_values",
    "risk_value",
]

REJECT = "reject"

_WEIGHT_TOL = 1e-9


class OracleError(RuntimeError):
    """A loss or constraint oracle returned values that cannot be used."""


class ActionSpace:
    """Ordered action labels, optionally including a distinguished reject."""

    def __init__(self, labels, reject=None):
        labels = tuple(labels)
        if len(labels) == 0:
            raise ValueError("action space must not be empty")
        if len(set(labels)) != len(labels):
            raise ValueError("action labels must be distinct")
        if reject is not None and reject not in labels:
            raise ValueError(f"reject label {reject!r} not among actions")
        self.labels = labels
        self.reject = reject

    @classmethod
    def classes(cls, k):
        """Plain label set {0, ..., k-1}."""
        return cls(range(k))

    @classmethod
    def with_reject(cls, k):
        """Labels {0, ..., k-1} plus a trailing reject action."""
        return cls(list(range(k)) + [REJECT], reject=REJECT)

    @property
    def size(self):
        return len(self.labels)

    @property
    def reject_index(self):
        if self.reject is None:
            raise ValueError("action space has no reject action")
        return self.labels.index(self.reject)

    def index(self, label):
        return self.labels.index(label)

    def __eq__(self, other):
        return (
            isinstance(other, ActionSpace)
            and self.labels == other.labels
            and self.reject == other.reject
        )

    def __repr__(self):
        return f"ActionSpace({list(self.labels)!r}, reject={self.reject!r})"


class LossOracle:
    """Maps x to the per-action loss vector L(x) of length n_actions."""

    def __init__(self, fn, n_actions, name="loss"):
        self.fn = fn
        self.n_actions = int(n_actions)
        self.name = name
        self.table = None

    @classmethod
    def from_table(cls, values, name="loss"):
        values = np.ascontiguousarray(values, dtype=float)
        if values.ndim != 2:
            raise ValueError(f"loss table must be (n, actions), got {values.shape}")
        oracle = cls(lambda i: values[int(i)], values.shape[1], name=name)
        oracle.table = values
        return oracle

    def __call__(self, x):
        row = np.asarray(self.fn(x), dtype=float)
        if row.shape != (self.n_actions,):
            raise ValueError(
                f"{self.name} oracle returned shape {row.shape}, "
                f"expected ({self.n_actions},)"
            )
        if not np.all(np.isfinite(row)):
            raise OracleError(f"{self.name} oracle returned non-finite values at x={x!r}")
        return row


class ConstraintOracle:
    """Maps x to the constraint cost matrix C(x), one row per constraint."""

    def __init__(self, fn, n_constraints, n_actions, name="constraint"):
        self.fn = fn
        self.n_constraints = int(n_constraints)
        self.n_actions = int(n_actions)
        self.name = name
        self.table = None

    @classmethod
    def from_table(cls, values, name="constraint"):
        values = np.ascontiguousarray(values, dtype=float)
        if values.ndim != 3:
            raise ValueError(
                f"constraint table must be (n, constraints, actions), got {values.shape}"
            )
        oracle = cls(lambda i: values[int(i)], values.shape[1], values.shape[2], name=name)
        oracle.table = values
        return oracle

    @classmethod
    def empty(cls, n_actions):
        """Zero-constraint oracle for unconstrained problems."""
        return cls(lambda x: np.empty((0, n_actions)), 0, n_actions)

    def __call__(self, x):
        mat = np.asarray(self.fn(x), dtype=float)
        if mat.shape != (self.n_constraints, self.n_actions):
            raise ValueError(
                f"{self.name} oracle returned shape {mat.shape}, "
                f"expected ({self.n_constraints}, {self.n_actions})"
            )
        if not np.all(np.isfinite(mat)):
            raise OracleError(f"{self.name} oracle returned non-finite values at x={x!r}")
        return mat


class Problem:
    """Triple of action space, loss oracle, and constraint oracle."""

    def __init__(self, actions, loss, constraints=None):
        if constraints is None:
            constraints = ConstraintOracle.empty(actions.size)
        if loss.n_actions != actions.size:
            raise ValueError(
                f"loss oracle covers {loss.n_actions} actions, space has {actions.size}"
            )
        if constraints.n_actions != actions.size:
            raise ValueError(
                f"constraint oracle covers {constraints.n_actions} actions, "
                f"space has {actions.size}"
            )
        self.actions = actions
        self.loss = loss
        self.constraints = constraints

    @property
    def n_constraints(self):
        return self.constraints.n_constraints

    def dual_objective(self, beta):
        return DualObjective(self.loss, self.constraints, beta)

    def gibbs(self, lam, beta):
        return GibbsClassifier(self.actions, self.loss, self.constraints, lam, beta)

    def sigma_sq_bound(self, x):
        """Squared bound on the dual gradient norm at one input."""
        from .core import norm_1_to_2

        return norm_1_to_2(self.constraints(x)) ** 2


def score_vector(loss, constraints, lam, x):
    """Per-action dual score  -L(x) - C(x)^T lam  at input x."""
    row = loss(x)
    lam = np.asarray(lam, dtype=float)
    if constraints.n_constraints == 0:
        if lam.size != 0:
            raise ValueError(f"lam has {lam.size} entries for a 0-constraint problem")
        return -row
    if lam.shape != (constraints.n_constraints,):
        raise ValueError(
            f"lam shape {lam.shape} does not match {constraints.n_constraints} constraints"
        )
    return -row - constraints(x).T @ lam


class GibbsClassifier:
    """Randomized policy pi(a|x) proportional to exp(beta * score_a(x)).

    The score is the dual score -L(x) - C(x)^T lam, so this is the closed-form
    minimizer of the entropically smoothed Lagrangian at the multiplier lam.
    """

    def __init__(self, actions, loss, constraints, lam, beta):
        lam = np.ascontiguousarray(lam, dtype=float)
        if constraints is None:
            constraints = ConstraintOracle.empty(actions.size)
        if lam.shape != (constraints.n_constraints,):
            raise ValueError(
                f"lam shape {lam.shape} does not match "
                f"{constraints.n_constraints} constraints"
            )
        if np.any(lam < 0):
            raise ValueError("lam must be componentwise nonnegative")
        if not beta > 0:
            raise ValueError(f"beta must be positive, got {beta}")
        self.actions = actions
        self.loss = loss
        self.constraints = constraints
        self.lam = lam
        self.beta = float(beta)

    def predict_proba(self, x):
        return predict_proba(self, x)

    def sample_action(self, x, rng):
        return sample_action(self, x, rng)


def predict_proba(classifier, x):
    """Action probabilities of the Gibbs policy at x."""
    s = score_vector(classifier.loss, classifier.constraints, classifier.lam, x)
    return softmax(s, classifier.beta)


def sample_action(classifier, x, rng):
    """Draw one action label by inverse CDF over the ordered action list."""
    p = predict_proba(classifier, x)
    u = rng.random()
    idx = int(np.searchsorted(np.cumsum(p), u, side="right"))
    idx = min(idx, classifier.actions.size - 1)
    return classifier.actions.labels[idx]


def dual_objective(loss, constraints, lam, batch, beta):
    """Mean smoothed dual value over a batch of inputs."""
    vals = [lse(score_vector(loss, constraints, lam, x), beta) for x in batch]
    if not vals:
        raise ValueError("dual_objective needs a non-empty batch")
    return float(np.mean(vals))


def stochastic_gradient(loss, constraints, lam, x, beta):
    """Unbiased dual gradient estimate  -C(x) @ pi_lam(x)  at one input."""
    if constraints.n_constraints == 0:
        raise ValueError("stochastic_gradient needs at least one constraint")
    s = score_vector(loss, constraints, lam, x)
    return -constraints(x) @ softmax(s, beta)


def _check_weights(xs, weights):
    weights = np.asarray(weights, dtype=float)
    if weights.ndim != 1 or len(xs) != weights.shape[0]:
        raise ValueError(f"support has {len(xs)} points but {weights.shape} weights")
    if np.any(weights < 0):
        raise ValueError("support weights must be nonnegative")
    if abs(weights.sum() - 1.0) > _WEIGHT_TOL:
        raise ValueError(f"support weights sum to {weights.sum()!r}, expected 1")
    return weights


def exact_gradient(loss, constraints, lam, xs, weights, beta):
    """Dual gradient as an exact expectation over a weighted finite support."""
    weights = _check_weights(xs, weights)
    out = np.zeros(constraints.n_constraints)
    for x, w in zip(xs, weights):
        out += w * stochastic_gradient(loss, constraints, lam, x, beta)
    return out


def constraint_values(classifier, constraints, xs, weights):
    """Expected constraint costs  E[C(X) pi(X)]  of a policy over a support."""
    weights = _check_weights(xs, weights)
    if constraints.n_actions != classifier.actions.size:
        raise ValueError(
            f"constraint oracle covers {constraints.n_actions} actions, "
            f"policy has {classifier.actions.size}"
        )
    out = np.zeros(constraints.n_constraints)
    for x, w in zip(xs, weights):
        out += w * (constraints(x) @ predict_proba(classifier, x))
    return out


def risk_value(classifier, loss, xs, weights):
    """Expected loss  E[<L(X), pi(X)>]  of a policy over a support."""
    weights = _check_weights(xs, weights)
    if loss.n_actions != classifier.actions.size:
        raise ValueError(
            f"loss oracle covers {loss.n_actions} actions, "
            f"policy has {classifier.actions.size}"
        )
    total = 0.0
    for x, w in zip(xs, weights):
        total += w * float(loss(x) @ predict_proba(classifier, x))
    return total


class DualObjective:
    """Stochastic first-order view of the smoothed dual in lam >= 0.

    Exposes per-sample value and gradient; optimizers must not assume
    anything beyond this interface.  `tables()` reveals the underlying
    (loss, constraint) arrays when both oracles are table backed, which
    enables the compiled inner loop.
    """

    def __init__(self, loss, constraints, beta):
        if constraints.n_constraints == 0:
            raise ValueError("dual objective needs at least one constraint")
        if not beta > 0:
            raise ValueError(f"beta must be positive, got {beta}")
        self.loss = loss
        self.constraints = constraints
        self.beta = float(beta)
        self.n_constraints = constraints.n_constraints

    def value(self, lam, x):
        return lse(score_vector(self.loss, self.constraints, lam, x), self.beta)

    def grad(self, lam, x):
        return stochastic_gradient(self.loss, self.constraints, lam, x, self.beta)

    def tables(self):
        if self.loss.table is not None and self.constraints.table is not None:
            if self.loss.table.shape[0] == self.constraints.table.shape[0]:
                return self.loss.table, self.constraints.table
        return None


class SampleStream:
    """Deterministic stream of draws from a finite weighted pool.

    A stream belongs to a single consumer; repeated `draw` calls advance
    shared generator state.  Two streams built with the same pool and seed
    produce identical sequences.

    mode="iid" draws independently with the pool weights.  mode="cycle"
    replays reshuffled passes over a uniform pool; it exists for the
    experimental multi-pass option and falls outside the i.i.d. analysis.
    """

    def __init__(self, items, weights=None, seed=0, mode="iid"):
        self.items = items
        self.n = len(items)
        if self.n == 0:
            raise ValueError("sample pool must not be empty")
        if weights is not None:
            weights = _check_weights(items, weights)
        if mode not in ("iid", "cycle"):
            raise ValueError(f"unknown stream mode {mode!r}")
        if mode == "cycle" and weights is not None:
            if np.max(np.abs(weights - 1.0 / self.n)) > _WEIGHT_TOL:
                raise ValueError("cycle mode requires a uniform pool")
        self.weights = weights
        self.mode = mode
        self.seed = seed
        self._rng = np.random.default_rng(seed)
        self._leftover = np.empty(0, dtype=np.int64)

    def draw_positions(self, k):
        """Next k pool positions as an int64 array."""
        if k < 0:
            raise ValueError("k must be nonnegative")
        if self.mode == "iid":
            return self._rng.choice(self.n, size=k, p=self.weights).astype(np.int64)
        parts = [self._leftover]
        have = self._leftover.size
        while have < k:
            perm = self._rng.permutation(self.n).astype(np.int64)
            parts.append(perm)
            have += self.n
        flat = np.concatenate(parts) if len(parts) > 1 else parts[0]
        self._leftover = flat[k:]
        return flat[:k]

    def draw(self, k):
        """Next k pool items."""
        pos = self.draw_positions(k)
        if isinstance(self.items, np.ndarray):
            return self.items[pos]
        return [self.items[i] for i in pos]

    def spawn(self, tag):
        """Independent stream over the same pool, seed derived from (seed, tag)."""
        base = tuple(self.seed) if isinstance(self.seed, (tuple, list)) else (self.seed,)
        return SampleStream(self.items, self.weights, seed=base + (tag,), mode="iid")


class FiniteInstance:
    """Finite-support problem with explicit loss and constraint tables.

    The support index doubles as the oracle input, so expectations over the
    instance are exact weighted sums.  `points` carries the original feature
    vectors (or other identifiers) for estimators and serialization.
    """

    def __init__(self, points, weights, loss_table, cost_table, actions):
        loss_table = np.ascontiguousarray(loss_table, dtype=float)
        cost_table = np.ascontiguousarray(cost_table, dtype=float)
        if loss_table.ndim != 2:
            raise ValueError(f"loss table must be (n, actions), got {loss_table.shape}")
        n, a = loss_table.shape
        if cost_table.ndim != 3 or cost_table.shape[0] != n or cost_table.shape[2] != a:
            raise ValueError(
                f"cost table shape {cost_table.shape} does not match loss table {loss_table.shape}"
            )
        if a != actions.size:
            raise ValueError(f"tables cover {a} actions, space has {actions.size}")
        if len(points) != n:
            raise ValueError(f"{len(points)} points for {n} table rows")
        self.points = points
        self.weights = _check_weights(range(n), weights)
        self.loss_table = loss_table
        self.cost_table = cost_table
        self.actions = actions

    @property
    def n(self):
        return self.loss_table.shape[0]

    @property
    def n_actions(self):
        return self.loss_table.shape[1]

    @property
    def n_constraints(self):
        return self.cost_table.shape[1]

    def problem(self):
        """Problem triple over the integer support, backed by the tables."""
        return Problem(
            self.actions,
            LossOracle.from_table(self.loss_table),
            ConstraintOracle.from_table(self.cost_table),
        )

    def support(self):
        """(inputs, weights) pair for exact expectations."""
        return np.arange(self.n), self.weights

    @classmethod
    def from_problem(cls, problem, xs, weights, points=None):
        """Tabulate a problem's oracles over an explicit support."""
        loss_table = np.stack([problem.loss(x) for x in xs])
        cost_table = np.stack([problem.constraints(x) for x in xs])
        return cls(
            points if points is not None else list(xs),
            weights,
            loss_table,
            cost_table,
            problem.actions,
        )

    def to_json(self):
        """Serializable dict: actions, weighted support, loss and cost tables."""
        points = np.asarray(self.points)
        support = []
        for i in range(self.n):
            x = points[i]
            x = x.tolist() if isinstance(x, (np.ndarray, np.generic)) else x
            support.append({"x": x, "weight": float(self.weights[i])})
        return {
            "actions": [
                a.item() if isinstance(a, np.generic) else a for a in self.actions.labels
            ],
            "support": support,
            "L": self.loss_table.tolist(),
            "C": self.cost_table.tolist(),
        }

    @classmethod
    def from_json(cls, data):
        labels = data["actions"]
        reject = REJECT if REJECT in labels else None
        points = [entry["x"] for entry in data["support"]]
        weights = [entry["weight"] for entry in data["support"]]
        try:
            points = np.asarray(points, dtype=float)
        except (TypeError, ValueError):
            pass
        return cls(
            points,
            weights,
            np.asarray(data["L"], dtype=float),
            np.asarray(data["C"], dtype=float),
            ActionSpace(labels, reject=reject),
        )

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh, indent=2)
            fh.write("\n")

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_json(json.load(fh))
