"""Exact reference solvers for small finite-support instances.

Two independent routes: `solve_lp_exact` solves the randomized-policy linear
program directly with HiGHS and reports primal, dual, and slack values;
`solve_dual_grid` minimizes the smoothed dual deterministically (grid
localization plus derivative bisection, coordinate sweeps for two
constraints).  Optimizer output is validated against both, and against the
support/slackness structure of the optimal policy.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

from .core import softmax

__all__ = [
    "InfeasibleInstanceError",
    "LPSolution",
    "DualGridSolution",
    "StructureReport",
    "solve_lp_exact",
    "solve_dual_grid",
    "validate_np_structure",
]

MAX_LP_CELLS = 10_000


class InfeasibleInstanceError(RuntimeError):
    """The LP has no feasible policy (constraint budgets cannot be met)."""


@dataclass
class LPSolution:
    value: float          # optimal expected loss
    pi: np.ndarray        # (n, actions) optimal randomized policy
    lam: np.ndarray       # (m,) multipliers on the budget rows
    slack: np.ndarray     # (m,) -E[C pi], nonnegative at the optimum


@dataclass
class DualGridSolution:
    lam: np.ndarray
    value: float
    status: str           # "interior" or "boundary"


def _dual_value_and_grad(instance, lam, beta):
    """Exact smoothed dual value and gradient over the instance support."""
    scores = -instance.loss_table - np.einsum(
        "j,ijA->iA", lam, instance.cost_table
    )
    top = scores.max(axis=1, keepdims=True)
    z = np.exp(beta * (scores - top))
    zsum = z.sum(axis=1)
    value = float(instance.weights @ (top[:, 0] + np.log(zsum) / beta))
    sigma = z / zsum[:, None]
    grad = -np.einsum("i,ijA,iA->j", instance.weights, instance.cost_table, sigma)
    return value, grad


def solve_lp_exact(instance):
    """Optimal randomized policy of the finite LP, with duals and slacks.

    Decision variables are the n*A policy entries; each support point's row
    must sum to one and the weighted constraint costs must be nonpositive.
    Raises InfeasibleInstanceError when the budgets cannot be met.
    """
    n, a, m = instance.n, instance.n_actions, instance.n_constraints
    if n * a > MAX_LP_CELLS:
        raise ValueError(
            f"instance has {n * a} policy cells, exact oracle accepts at most {MAX_LP_CELLS}"
        )
    w = instance.weights
    c = (w[:, None] * instance.loss_table).reshape(n * a)
    a_eq = np.zeros((n, n * a))
    for i in range(n):
        a_eq[i, i * a : (i + 1) * a] = 1.0
    b_eq = np.ones(n)
    if m > 0:
        a_ub = (w[:, None, None] * instance.cost_table).transpose(1, 0, 2).reshape(m, n * a)
        b_ub = np.zeros(m)
    else:
        a_ub = b_ub = None
    res = linprog(
        c,
        A_ub=a_ub,
        b_ub=b_ub,
        A_eq=a_eq,
        b_eq=b_eq,
        bounds=(0.0, None),
        method="highs",
    )
    if res.status == 2:
        raise InfeasibleInstanceError(
            "no policy satisfies the constraint budgets on this instance"
        )
    if res.status != 0:
        raise RuntimeError(f"linear program solver failed: {res.message}")
    pi = res.x.reshape(n, a)
    if m > 0:
        lam = np.maximum(-np.asarray(res.ineqlin.marginals, dtype=float), 0.0)
        slack = -(a_ub @ res.x)
    else:
        lam = np.zeros(0)
        slack = np.zeros(0)
    return LPSolution(value=float(res.fun), pi=pi, lam=lam, slack=slack)


def _minimize_coordinate(instance, lam, j, beta, lam_max, tol):
    """Exact minimization of the dual along coordinate j by bisection.

    The partial derivative is nondecreasing in lam_j (convexity), so the
    sign change brackets the coordinate optimum.
    """
    probe = lam.copy()

    def deriv(v):
        probe[j] = v
        return _dual_value_and_grad(instance, probe, beta)[1][j]

    lo, hi = 0.0, float(lam_max)
    d_lo = deriv(lo)
    if d_lo >= 0.0:
        return 0.0, "interior"
    d_hi = deriv(hi)
    if d_hi < 0.0:
        return hi, "boundary"
    while hi - lo > tol * max(1.0, hi):
        mid = 0.5 * (lo + hi)
        if deriv(mid) < 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi), "interior"


def solve_dual_grid(instance, beta, lam_max=64.0, grid=129, tol=1e-14):
    """Deterministic minimizer of the smoothed dual for one or two constraints.

    A coarse grid localizes the minimum, then bisection on the monotone
    coordinate derivative refines it to full precision (coordinate sweeps
    when m = 2, stopped on the projected-gradient residual).  If the search
    box [0, lam_max]^m clips the minimizer, the status is "boundary" and a
    warning is issued.
    """
    m = instance.n_constraints
    if m not in (1, 2):
        raise ValueError(f"grid oracle handles 1 or 2 constraints, got {m}")
    if not beta > 0:
        raise ValueError(f"beta must be positive, got {beta}")

    axis = np.linspace(0.0, lam_max, grid)
    status = "interior"
    if m == 1:
        vals = [_dual_value_and_grad(instance, np.array([v]), beta)[0] for v in axis]
        k = int(np.argmin(vals))
        lam = np.array([axis[k]])
        v, st = _minimize_coordinate(instance, lam, 0, beta, lam_max, tol)
        lam[0] = v
        status = st
    else:
        grid_pts = [np.array([u, v]) for u in axis for v in axis]
        vals = [_dual_value_and_grad(instance, p, beta)[0] for p in grid_pts]
        lam = grid_pts[int(np.argmin(vals))].copy()
        for _ in range(1000):
            moved = 0.0
            for j in range(2):
                v, st = _minimize_coordinate(instance, lam, j, beta, lam_max, tol)
                moved = max(moved, abs(v - lam[j]))
                lam[j] = v
                if st == "boundary":
                    status = "boundary"
            _, grad = _dual_value_and_grad(instance, lam, beta)
            residual = np.minimum(lam, grad)
            if np.linalg.norm(residual) <= 1e-10 or (
                moved == 0.0 and status == "boundary"
            ):
                break
        else:
            if status != "boundary":
                raise RuntimeError("coordinate sweeps did not reach the residual target")
    if status == "boundary":
        warnings.warn(
            f"dual minimizer clipped at the search boundary lam_max={lam_max}; "
            "increase lam_max",
            stacklevel=2,
        )
    value = _dual_value_and_grad(instance, lam, beta)[0]
    return DualGridSolution(lam=lam, value=value, status=status)


@dataclass
class StructureReport:
    """Optimality-structure checks of an exact LP solution.

    `support_mass_outside` is the policy mass on actions that do not attain
    the minimal reduced cost; `slackness` holds lam_j * slack_j per
    constraint; `dual_checks` maps beta to (risk gap minus log(A)/beta cap,
    max constraint value) for the Gibbs policy at the grid-solved dual.
    """

    support_mass_outside: float
    slackness: np.ndarray
    dual_checks: dict = field(default_factory=dict)
    gap_tol: float = 1e-6

    @property
    def ok(self):
        fine = self.support_mass_outside <= self.gap_tol
        fine &= bool(np.all(self.slackness <= self.gap_tol))
        for excess, violation in self.dual_checks.values():
            fine &= excess <= self.gap_tol and violation <= self.gap_tol
        return bool(fine)


def validate_np_structure(instance, lp=None, betas=(), gap_tol=1e-6):
    """Check the optimal-policy structure and, per beta, the smoothed dual.

    The LP optimum must put its mass on actions minimizing the reduced cost
    L + C^T lam and satisfy complementary slackness.  For each beta, the
    Gibbs policy at the grid-solved dual must be feasible and lose at most
    log(n_actions)/beta risk against the LP value.
    """
    if lp is None:
        lp = solve_lp_exact(instance)
    reduced = instance.loss_table + np.einsum("j,ijA->iA", lp.lam, instance.cost_table)
    gaps = reduced - reduced.min(axis=1, keepdims=True)
    mass_outside = float(
        instance.weights @ ((lp.pi * (gaps > gap_tol)).sum(axis=1))
    )
    slackness = lp.lam * lp.slack

    checks = {}
    for beta in betas:
        sol = solve_dual_grid(instance, beta)
        scores = -instance.loss_table - np.einsum(
            "j,ijA->iA", sol.lam, instance.cost_table
        )
        pi = softmax(scores, beta, axis=1)
        risk = float(instance.weights @ np.sum(instance.loss_table * pi, axis=1))
        cons = np.einsum("i,ijA,iA->j", instance.weights, instance.cost_table, pi)
        excess = risk - lp.value - np.log(instance.n_actions) / beta
        checks[beta] = (excess, float(cons.max()) if cons.size else 0.0)
    return StructureReport(
        support_mass_outside=mass_outside,
        slackness=slackness,
        dual_checks=checks,
        gap_tol=gap_tol,
    )
