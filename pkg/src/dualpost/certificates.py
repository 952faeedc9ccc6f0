"""Computable guarantees for a policy produced from a dual multiplier.

The certificate is built from the exact dual gradient over the evaluation
support: the projected gradient mapping at the returned multiplier bounds
both the constraint excess of the policy and its risk gap against any
feasible comparator.  Estimation slack for plug-in loss and cost tables
enters through two scalar deltas; leaving them at zero certifies the
plug-in problem itself.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np

from .core import gradient_mapping

__all__ = ["Certificate", "certify", "log_policy_cells"]


def log_policy_cells(problem):
    """Log-cardinality of the decision space the smoothing pays for."""
    if hasattr(problem, "actions"):
        return math.log(problem.actions.size)
    return problem.n_classes * math.log(2.0)


@dataclass
class Certificate:
    """Bounds attached to one multiplier on one evaluation support.

    `violation_bound` dominates the euclidean norm of the positive part of
    the expected constraint values of the policy; `risk_gap_bound` dominates
    the policy risk minus the risk of any feasible comparator.  Both are in
    terms of the problem the deltas are measured against; deltas of None
    mean no reference oracles were available and the bounds speak about the
    plug-in problem itself.
    """

    lam: np.ndarray
    beta: float
    alpha: float
    grad_map_norm: float
    mean_cost_norm: float
    smoothing_gap: float
    delta_loss: float | None
    delta_cost: float | None
    violation_bound: float
    risk_gap_bound: float

    def to_dict(self):
        d = asdict(self)
        d["lam"] = [float(v) for v in self.lam]
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        d["lam"] = np.asarray(d["lam"], dtype=float)
        return cls(**d)

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)
            fh.write("\n")

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def certify(problem, lam, beta, alpha, *, support=None, delta_loss=None, delta_cost=None):
    """Certificate for the Gibbs policy of `lam` on an evaluation support.

    `alpha` is the certificate step attached by the optimizer; the exact
    dual gradient is an expectation over the finite support, so the bound
    holds for the stated problem rather than a sampled surrogate.  Accepts
    anything with the dual-objective protocol plus a built-in support, or
    an explicit `support=(points, weights)` pair.
    """
    lam = np.ascontiguousarray(lam, dtype=float)
    if np.any(lam < 0):
        raise ValueError("lam must be componentwise nonnegative")
    if not alpha > 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    d_loss = 0.0 if delta_loss is None else float(delta_loss)
    d_cost = 0.0 if delta_cost is None else float(delta_cost)
    if d_loss < 0 or d_cost < 0:
        raise ValueError("estimation deltas must be nonnegative")

    if support is None:
        if not hasattr(problem, "support"):
            raise ValueError("problem carries no support; pass support=(points, weights)")
        support = problem.support()
    if not hasattr(problem, "dual_objective"):
        problem = problem.problem()

    objective = problem.dual_objective(beta)
    xs, weights = support
    grad = np.zeros(objective.n_constraints)
    mean_cost = 0.0
    for x, w in zip(xs, weights):
        grad += w * objective.grad(lam, x)
        mean_cost += w * math.sqrt(problem.sigma_sq_bound(x))

    gm = gradient_mapping(lam, grad, alpha)
    gm_norm = float(np.linalg.norm(gm))
    lam_norm = float(np.linalg.norm(lam))
    gap = 2.0 * log_policy_cells(problem) / beta

    return Certificate(
        lam=lam,
        beta=float(beta),
        alpha=float(alpha),
        grad_map_norm=gm_norm,
        mean_cost_norm=mean_cost,
        smoothing_gap=gap,
        delta_loss=None if delta_loss is None else d_loss,
        delta_cost=None if delta_cost is None else d_cost,
        violation_bound=gm_norm + d_cost,
        risk_gap_bound=(lam_norm + alpha * mean_cost) * gm_norm
        + 2.0 * d_loss
        + d_cost * lam_norm
        + gap,
    )
