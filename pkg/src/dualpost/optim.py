"""Stochastic first-order optimizers for the smoothed dual.

`ac_sa` runs the accelerated stochastic approximation recursion projected
onto the nonnegative orthant; `sgd3` wraps it in geometric proximal restarts
so the final iterate carries a gradient-mapping certificate; `copt` is the
end-to-end pipeline from a problem to a Gibbs policy.

Two execution backends share one sample sequence: a compiled inner loop for
table-backed finite-support objectives and a generic Python loop for
arbitrary objectives.  Selection is automatic; set DUALPOST_BACKEND to
"python" or "compiled" to force one.  All randomness is drawn from the
sample stream up front, so iterates never feed back into the draws and a
fixed seed reproduces the run bitwise on a given backend.
"""

from __future__ import annotations

import math
import os
import time
from dataclasses import dataclass, replace

import numpy as np

from .core import norm_1_to_2

try:
    from . import _acsa as _compiled
except ImportError:  # pragma: no cover - depends on build environment
    _compiled = None

__all__ = [
    "OptimizerParams",
    "OptimizerResult",
    "TRACE_COLUMNS",
    "ac_sa",
    "sgd3",
    "projected_sgd",
    "default_schedule",
    "minimal_default_iterations",
    "estimate_sigma_sq",
    "copt",
    "available_backends",
    "resolve_backend",
    "write_trace",
]

TRACE_COLUMNS = ("iteration", "stage", "objective", "lam_norm", "elapsed")


def available_backends():
    return ("python", "compiled") if _compiled is not None else ("python",)


def resolve_backend(backend=None):
    """Map None/'auto'/'python'/'compiled' to a concrete backend name."""
    if backend is None:
        backend = os.environ.get("DUALPOST_BACKEND", "auto")
    if backend == "auto":
        return "compiled" if _compiled is not None else "python"
    if backend not in ("python", "compiled"):
        raise ValueError(f"unknown backend {backend!r}")
    if backend == "compiled" and _compiled is None:
        raise RuntimeError("compiled backend requested but the extension is not built")
    return backend


@dataclass(frozen=True)
class OptimizerParams:
    """Schedule constants for one optimizer run.

    `smoothness` is the gradient Lipschitz constant of the smoothed dual,
    `mu` the proximal strong-convexity weight, `stages` the restart count,
    and `alpha_cert` the step used by the gradient-mapping certificate.
    """

    beta: float
    mu: float
    smoothness: float
    iterations: int
    stages: int
    alpha_cert: float
    sigma_sq: float | None = None
    variant: str = "manual"

    @classmethod
    def from_constants(cls, beta, mu, smoothness, iterations, sigma_sq=None, variant="manual"):
        if not beta > 0:
            raise ValueError(f"beta must be positive, got {beta}")
        if not 0 < mu <= smoothness:
            raise ValueError(f"need 0 < mu <= smoothness, got mu={mu}, smoothness={smoothness}")
        if iterations < 1:
            raise ValueError(f"iterations must be >= 1, got {iterations}")
        j = int(math.floor(math.log2(smoothness / mu)))
        stages = max(1, j)
        alpha_cert = 1.0 / (2.0 ** (j + 2) * mu)
        return cls(
            beta=float(beta),
            mu=float(mu),
            smoothness=float(smoothness),
            iterations=int(iterations),
            stages=stages,
            alpha_cert=alpha_cert,
            sigma_sq=sigma_sq,
            variant=variant,
        )

    def stage_threshold(self):
        """Smallest iteration count exceeding the restart admissibility bound."""
        j = int(math.floor(math.log2(self.smoothness / self.mu)))
        return 4.0 * math.sqrt(self.smoothness / self.mu) * j


@dataclass
class OptimizerResult:
    lam: np.ndarray
    alpha_cert: float
    params: OptimizerParams
    trace: np.ndarray | None = None


def write_trace(trace, path):
    """Write a trace array as CSV with full-precision floats."""
    with open(path, "w") as fh:
        fh.write(",".join(TRACE_COLUMNS) + "\n")
        for row in trace:
            fh.write(
                f"{int(row[0])},{int(row[1])},{row[2]:.17g},{row[3]:.17g},{row[4]:.17g}\n"
            )


class _Prox:
    """Accumulated quadratic  sum_i (w_i/2)||lam - a_i||^2  in expanded form."""

    __slots__ = ("rho", "shift", "const")

    def __init__(self, m):
        self.rho = 0.0
        self.shift = np.zeros(m)
        self.const = 0.0

    def add(self, weight, center):
        self.rho += weight
        self.shift = self.shift + weight * center
        self.const += 0.5 * weight * float(center @ center)

    def grad(self, lam):
        return self.rho * lam - self.shift

    def value(self, lam):
        return 0.5 * self.rho * float(lam @ lam) - float(self.shift @ lam) + self.const


def _block_tables(objective):
    """Tables reshaped to (n, blocks, actions) / (n, m, blocks, actions)."""
    tabs = objective.tables() if hasattr(objective, "tables") else None
    if tabs is None:
        return None
    loss, cost = tabs
    if loss.ndim == 2:
        loss = loss[:, None, :]
        cost = cost[:, :, None, :]
    return np.ascontiguousarray(loss), np.ascontiguousarray(cost)


def _kernel_inputs(stream, positions):
    items = stream.items
    if isinstance(items, np.ndarray) and np.issubdtype(items.dtype, np.integer):
        return items[positions].astype(np.int64)
    if isinstance(items, range):
        return positions.astype(np.int64) + items.start
    return None


def ac_sa(
    objective,
    lam0,
    mu,
    smoothness,
    iterations,
    stream,
    *,
    prox=None,
    trace=None,
    stage=1,
    iteration_offset=0,
    clock_start=None,
    backend=None,
):
    """One accelerated stochastic approximation stage.

    Minimizes E f(lam; X) + prox(lam) over lam >= 0 and returns the
    aggregate iterate.  Exactly `iterations` samples are drawn from the
    stream before the loop starts.  When `trace` is given, rows
    [iteration_offset, iteration_offset + iterations) are filled with the
    per-sample objective estimate at the interpolation point and the
    aggregate iterate norm; under the compiled backend the elapsed column
    holds the stage-end wall time for every row of the stage.
    """
    lam0 = np.ascontiguousarray(lam0, dtype=float)
    if np.any(lam0 < 0):
        raise ValueError("lam0 must be componentwise nonnegative")
    if iterations < 1:
        raise ValueError(f"iterations must be >= 1, got {iterations}")
    if not smoothness > 0 or mu < 0:
        raise ValueError(f"need smoothness > 0 and mu >= 0, got {smoothness}, {mu}")
    m = lam0.shape[0]
    if prox is None:
        prox = _Prox(m)
    if clock_start is None:
        clock_start = time.perf_counter()
    record = trace is not None

    positions = stream.draw_positions(iterations)
    backend = resolve_backend(backend)

    if backend == "compiled":
        tabs = _block_tables(objective)
        idx = _kernel_inputs(stream, positions)
        if tabs is not None and idx is not None:
            loss_t, cost_t = tabs
            obj_buf = np.empty(iterations if record else 0)
            norm_buf = np.empty(iterations if record else 0)
            ag = _compiled.acsa_stage(
                loss_t,
                cost_t,
                idx,
                lam0,
                float(mu),
                float(smoothness),
                float(objective.beta),
                float(prox.rho),
                np.ascontiguousarray(prox.shift),
                float(prox.const),
                obj_buf,
                norm_buf,
            )
            if record:
                rows = slice(iteration_offset, iteration_offset + iterations)
                trace[rows, 0] = np.arange(iteration_offset + 1, iteration_offset + iterations + 1)
                trace[rows, 1] = stage
                trace[rows, 2] = obj_buf
                trace[rows, 3] = norm_buf
                trace[rows, 4] = time.perf_counter() - clock_start
            return ag

    if isinstance(stream.items, np.ndarray):
        xs = stream.items[positions]
    else:
        xs = [stream.items[p] for p in positions]

    lam = lam0.copy()
    ag = lam0.copy()
    for t in range(1, iterations + 1):
        x = xs[t - 1]
        alpha = 2.0 / (t + 1.0)
        gamma = 4.0 * smoothness / (t * (t + 1.0))
        den = gamma + (1.0 - alpha * alpha) * mu
        md = ((1.0 - alpha) * (mu + gamma) / den) * ag + (
            alpha * ((1.0 - alpha) * mu + gamma) / den
        ) * lam
        g = objective.grad(md, x) + prox.grad(md)
        lam = np.maximum(
            (((1.0 - alpha) * mu + gamma) / (mu + gamma)) * lam
            + (alpha * mu / (mu + gamma)) * md
            - (alpha / (mu + gamma)) * g,
            0.0,
        )
        ag = alpha * lam + (1.0 - alpha) * ag
        if record:
            row = iteration_offset + t - 1
            trace[row, 0] = row + 1
            trace[row, 1] = stage
            trace[row, 2] = objective.value(md, x) + prox.value(md)
            trace[row, 3] = np.linalg.norm(ag)
            trace[row, 4] = time.perf_counter() - clock_start
    return ag


def sgd3(objective, lam0, params, stream, *, collect_trace=True, backend=None):
    """Multi-stage accelerated method with geometric proximal restarts.

    Stage j minimizes the running objective plus accumulated proximal
    quadratics centered at earlier stage outputs, with strong convexity
    parameter mu * 2^(j-1) and a fixed smoothness of
    2 * (params.smoothness + params.mu).  The iteration budget is split
    evenly across stages (remainder to the last).  The returned iterate
    carries `params.alpha_cert` for the gradient-mapping certificate.
    """
    lam0 = np.ascontiguousarray(lam0, dtype=float)
    m = objective.n_constraints
    if lam0.shape != (m,):
        raise ValueError(f"lam0 shape {lam0.shape} does not match {m} constraints")
    total, stages = params.iterations, params.stages
    if total < stages:
        raise ValueError(f"{total} iterations cannot cover {stages} stages")
    if total <= params.stage_threshold():
        raise ValueError(
            f"iterations={total} is at or below the restart admissibility bound "
            f"{params.stage_threshold():.4g}; the rate guarantee needs a larger budget"
        )
    budgets = [total // stages] * stages
    budgets[-1] += total - sum(budgets)

    trace = np.empty((total, len(TRACE_COLUMNS))) if collect_trace else None
    clock_start = time.perf_counter()
    prox = _Prox(m)
    prox.add(params.mu, lam0)
    lam_hat = lam0
    mu_stage = params.mu
    smooth_stage = 2.0 * (params.smoothness + params.mu)
    offset = 0
    for j in range(1, stages + 1):
        lam_hat = ac_sa(
            objective,
            lam_hat,
            mu_stage,
            smooth_stage,
            budgets[j - 1],
            stream,
            prox=prox,
            trace=trace,
            stage=j,
            iteration_offset=offset,
            clock_start=clock_start,
            backend=backend,
        )
        offset += budgets[j - 1]
        mu_stage *= 2.0
        prox.add(mu_stage, lam_hat)
    return OptimizerResult(
        lam=lam_hat, alpha_cert=params.alpha_cert, params=params, trace=trace
    )


def projected_sgd(objective, lam0, params, stream, *, collect_trace=True, backend=None):
    """Plain projected stochastic gradient, tail-averaged.

    Reference implementation of the optimizer contract; anything with this
    signature returning an OptimizerResult can replace `sgd3` in `copt`.
    """
    lam = np.ascontiguousarray(lam0, dtype=float)
    m = objective.n_constraints
    if lam.shape != (m,):
        raise ValueError(f"lam0 shape {lam.shape} does not match {m} constraints")
    total = params.iterations
    positions = stream.draw_positions(total)
    if isinstance(stream.items, np.ndarray):
        xs = stream.items[positions]
    else:
        xs = [stream.items[p] for p in positions]
    trace = np.empty((total, len(TRACE_COLUMNS))) if collect_trace else None
    clock_start = time.perf_counter()
    tail_from = total - total // 2
    tail_sum = np.zeros(m)
    tail_n = 0
    for t in range(1, total + 1):
        x = xs[t - 1]
        if trace is not None:
            trace[t - 1] = (
                t,
                1,
                objective.value(lam, x),
                np.linalg.norm(lam),
                time.perf_counter() - clock_start,
            )
        step = min(1.0 / params.smoothness, 2.0 / (params.mu * (t + 1)))
        lam = np.maximum(lam - step * objective.grad(lam, x), 0.0)
        if t >= tail_from:
            tail_sum += lam
            tail_n += 1
    return OptimizerResult(
        lam=tail_sum / tail_n,
        alpha_cert=params.alpha_cert,
        params=params,
        trace=trace,
    )


def minimal_default_iterations(variant="default"):
    """Smallest iteration count the given schedule variant accepts."""
    t = 2
    while True:
        try:
            default_schedule(t, 1.0, variant=variant)
            return t
        except ValueError:
            t += 1


def default_schedule(iterations, sigma_sq, variant="default"):
    """Schedule constants from the iteration budget and gradient bound.

    variant="default" sets beta = T / (8 log2 T); variant="experiment" uses
    the more aggressive beta = 0.5 sqrt(T) log sqrt(T) (natural log).  Both
    set mu = 2 sigma^2 / beta and smoothness = 2 beta sigma^2, so the
    condition number is beta^2.  Raises when the budget is too small for
    the restart construction to be admissible.
    """
    if iterations < 2:
        raise ValueError(f"iterations must be >= 2, got {iterations}")
    if not sigma_sq > 0:
        raise ValueError(f"sigma_sq must be positive, got {sigma_sq}")
    t = float(iterations)
    if variant == "default":
        beta = t / (8.0 * math.log2(t))
    elif variant == "experiment":
        beta = 0.5 * math.sqrt(t) * math.log(math.sqrt(t))
    else:
        raise ValueError(f"unknown schedule variant {variant!r}")
    if beta < 1.0:
        raise ValueError(
            f"iterations={iterations} gives beta={beta:.4g} < 1 so mu would exceed "
            f"the smoothness; increase the budget"
        )
    mu = 2.0 * sigma_sq / beta
    smoothness = 2.0 * beta * sigma_sq
    params = OptimizerParams.from_constants(
        beta, mu, smoothness, iterations, sigma_sq=sigma_sq, variant=variant
    )
    if iterations <= params.stage_threshold():
        raise ValueError(
            f"iterations={iterations} is at or below the restart admissibility "
            f"bound {params.stage_threshold():.4g} for variant={variant!r}; "
            f"increase the budget"
        )
    return params


def estimate_sigma_sq(constraints, batch, weights=None, safety=1.1):
    """Upper estimate of E ||C(X)||_{1->2}^2 from a batch, with safety margin."""
    vals = np.array([norm_1_to_2(constraints(x)) ** 2 for x in batch])
    if vals.size == 0:
        raise ValueError("estimate_sigma_sq needs a non-empty batch")
    if weights is not None:
        weights = np.asarray(weights, dtype=float)
        mean = float(weights @ vals / weights.sum())
    else:
        mean = float(vals.mean())
    if mean == 0.0:
        raise ValueError("constraint costs are identically zero on the batch")
    return safety * mean


def _pool_sigma_sq(problem, stream, cap, safety):
    if stream.n <= cap:
        items = stream.items
        xs = [items[i] for i in range(stream.n)]
        vals = np.array([problem.sigma_sq_bound(x) for x in xs])
        w = stream.weights
        mean = float(vals.mean()) if w is None else float(w @ vals)
    else:
        xs = stream.spawn(0x5167).draw(cap)
        mean = float(np.mean([problem.sigma_sq_bound(x) for x in xs]))
    if mean == 0.0:
        raise ValueError("constraint costs are identically zero on the sample pool")
    return safety * mean


def copt(
    problem,
    iterations,
    stream,
    *,
    params=None,
    variant="default",
    optimizer=None,
    lam0=None,
    collect_trace=True,
    calibration_cap=4096,
    safety=1.1,
    backend=None,
):
    """Full pipeline: schedule, optimize the smoothed dual, return the policy.

    When `params` is omitted the gradient bound sigma^2 is computed over the
    stream pool (exactly for pools up to `calibration_cap`, otherwise from a
    calibration sample on a spawned stream) and fed to `default_schedule`.
    Returns (gibbs_policy, optimizer_result).
    """
    if params is None:
        sigma_sq = _pool_sigma_sq(problem, stream, calibration_cap, safety)
        params = default_schedule(iterations, sigma_sq, variant=variant)
    elif params.iterations != iterations:
        params = replace(params, iterations=int(iterations))
    objective = problem.dual_objective(params.beta)
    if lam0 is None:
        lam0 = np.zeros(objective.n_constraints)
    run = sgd3 if optimizer is None else optimizer
    result = run(
        objective, lam0, params, stream, collect_trace=collect_trace, backend=backend
    )
    return problem.gibbs(result.lam, params.beta), result
