"""Acceptance gate: one test per release criterion.

Each test prints a [PASS]/[FAIL] line on the real stdout (bypassing
capture) so the gate summary is visible in any pytest run, and enforces
its runtime budget where one is stated.
"""

import functools
import math
import sys
import time
from dataclasses import replace

import numpy as np
import pytest

from dualpost.certificates import certify
from dualpost.constraints import build_reject_controlled_rejection
from dualpost.core import lse, norm_1_to_2, softmax
from dualpost.estimators import estimation_errors, local_poly_fit_predict
from dualpost.harness import build_family, evaluate_support, sweep, synth_generate
from dualpost.optim import (
    OptimizerParams,
    copt,
    default_schedule,
    minimal_default_iterations,
    sgd3,
)
from dualpost.oracle import solve_lp_exact, validate_np_structure
from dualpost.problem import (
    ActionSpace,
    FiniteInstance,
    SampleStream,
    predict_proba,
    stochastic_gradient,
)
from dualpost.setvalued import build_set_valued, solve_set_greedy


def criterion(num, label, seconds=None):
    def deco(fn):
        @functools.wraps(fn)
        def wrapper(*args, **kwargs):
            start = time.perf_counter()
            try:
                fn(*args, **kwargs)
                elapsed = time.perf_counter() - start
                if seconds is not None:
                    assert elapsed < seconds, f"took {elapsed:.1f}s, budget {seconds}s"
            except BaseException:
                print(f"[FAIL] criterion {num}: {label}", file=sys.__stdout__)
                raise
            print(
                f"[PASS] criterion {num}: {label} ({elapsed:.1f}s)",
                file=sys.__stdout__,
            )

        return wrapper

    return deco


def _random_instance(rng, m, n, a, margin=None):
    """Random finite instance; with a margin, the uniform policy is strictly
    feasible (every constraint sits margin below its budget there)."""
    loss = rng.random((n, a))
    cost = rng.uniform(-1.0, 1.0, size=(n, m, a))
    w = rng.random(n) + 0.1
    w /= w.sum()
    if margin is not None:
        uni = np.einsum("i,ija->j", w, cost) / a
        cost -= (uni + margin)[None, :, None]
    acts = ActionSpace(list(range(a)))
    return FiniteInstance(list(range(n)), w, loss, cost, acts)


@criterion(1, "log-sum-exp / softmax identities and curvature bound", seconds=10.0)
def test_criterion_1_lse_softmax_identities():
    rng = np.random.default_rng(101)
    total = 0
    for _ in range(20):
        cases = 500
        k = int(rng.integers(2, 9))
        m = int(rng.integers(1, 5))
        beta = float(np.exp(rng.uniform(np.log(0.2), np.log(20.0))))
        w = rng.normal(scale=3.0, size=(cases, k))

        vals = lse(w, beta, axis=-1)
        top = w.max(axis=-1)
        assert np.all(vals >= top - 1e-12)
        assert np.all(vals <= top + np.log(k) / beta + 1e-12)

        sig = softmax(w, beta, axis=-1)
        h = 1e-5 / max(1.0, beta)
        fd = np.empty_like(w)
        for j in range(k):
            e = np.zeros(k)
            e[j] = h
            fd[:, j] = (lse(w + e, beta, axis=-1) - lse(w - e, beta, axis=-1)) / (2 * h)
        err = np.linalg.norm(fd - sig, axis=-1)
        assert np.all(err <= 1e-6 * np.linalg.norm(sig, axis=-1))

        # curvature of lam -> lse(b - C^T lam): beta * C(diag s - s s^T)C^T
        c = rng.normal(size=(cases, m, k))
        d = sig[:, :, None] * np.eye(k)[None] - sig[:, :, None] * sig[:, None, :]
        hess = beta * np.einsum("cmk,ckl,cnl->cmn", c, d, c)
        op = np.abs(np.linalg.eigvalsh(hess)).max(axis=-1)
        col = np.sqrt((c**2).sum(axis=1)).max(axis=-1)
        assert np.all(op <= 2.0 * beta * col**2 + 1e-9)
        total += cases
    assert total >= 10_000


@criterion(2, "stochastic gradient statistics", seconds=30.0)
def test_criterion_2_gradient_suite():
    rng = np.random.default_rng(202)
    for _ in range(100):
        m = int(rng.integers(1, 4))
        n = int(rng.integers(2, 15))
        a = int(rng.integers(2, 6))
        inst = _random_instance(rng, m, n, a)
        beta = float(np.exp(rng.uniform(np.log(0.5), np.log(50.0))))
        prob = inst.problem()
        obj = prob.dual_objective(beta)
        xs, weights = inst.support()
        lam = rng.exponential(scale=1.0, size=m)

        # unbiasedness: weighted mean of per-point draws equals the gradient
        grads = np.stack(
            [stochastic_gradient(prob.loss, prob.constraints, lam, x, beta) for x in xs]
        )
        exact = weights @ grads
        batch = np.zeros(m)
        for x, wx in zip(xs, weights):
            batch = batch + wx * obj.grad(lam, x)
        assert np.linalg.norm(exact - batch) <= 1e-10

        def value(l):
            return float(sum(wx * obj.value(l, x) for x, wx in zip(xs, weights)))

        h = 1e-6 / max(1.0, beta)
        fd = np.zeros(m)
        for j in range(m):
            e = np.zeros(m)
            e[j] = h
            fd[j] = (value(lam + e) - value(lam - e)) / (2 * h)
        assert np.linalg.norm(fd - exact) <= 1e-6 * max(1.0, np.linalg.norm(exact))

        col_sq = np.array([norm_1_to_2(prob.constraints(x)) ** 2 for x in xs])
        variance = float(weights @ np.sum((grads - exact) ** 2, axis=1))
        assert variance <= float(weights @ col_sq) + 1e-12
        assert np.linalg.norm(exact) <= float(weights @ np.sqrt(col_sq)) + 1e-12

        lam2 = rng.exponential(scale=1.0, size=m)
        other = np.zeros(m)
        for x, wx in zip(xs, weights):
            other = other + wx * obj.grad(lam2, x)
        lip = 2.0 * beta * float(weights @ col_sq)
        assert np.linalg.norm(exact - other) <= lip * np.linalg.norm(lam - lam2) + 1e-12


@criterion(3, "exact solver and smoothed-dual agreement", seconds=120.0)
def test_criterion_3_oracle_equivalence():
    rng = np.random.default_rng(303)
    for i in range(20):
        m = 1 + (i % 2)
        n = int(rng.integers(4, 21))
        a = int(rng.integers(2, 6))
        inst = _random_instance(rng, m, n, a, margin=0.1)
        lp = solve_lp_exact(inst)
        report = validate_np_structure(inst, lp, betas=(500.0, 2000.0))
        # optimal mass stays on reduced-cost minimizers
        assert report.support_mass_outside <= 1e-6
        # multipliers pair with zero slack
        assert np.all(report.slackness <= 1e-6)
        for beta, (excess, violation) in report.dual_checks.items():
            # risk of the smoothed policy within log|A|/beta of the optimum
            assert excess <= 1e-6, (i, beta)
            # and feasible
            assert violation <= 1e-6, (i, beta)
        assert report.ok


@criterion(4, "certificate soundness on full solver runs")
def test_criterion_4_certificate_soundness():
    data = synth_generate(3, 3, 30, 0, 42, n_groups=2)
    bin_data = synth_generate(2, 2, 25, 0, 43, n_groups=2)
    cases = [
        ("reject_rate", data, {"budget": 0.15}),
        ("reject_error", data, {"delta": 0.05}),
        ("dp", data, {"eps": 0.02}),
        ("eo", bin_data, {"eps": 0.02}),
        ("churn", data, {"budget": 0.1}),
    ]
    for family, d, params in cases:
        baseline = d.class_probs.argmax(axis=1) if family == "churn" else None
        built = build_family(
            family,
            d.class_probs,
            d.weights,
            params,
            group_probs=d.group_probs,
            group_marginals=d.group_marginals,
            baseline=baseline,
        )
        lp = solve_lp_exact(built)
        n = d.class_probs.shape[0]
        for seed in (0, 1):
            stream = SampleStream(range(n), weights=d.weights, seed=(seed, 44))
            _, res = copt(built.problem(), 800, stream)
            cert = certify(built, res.lam, res.params.beta, res.alpha_cert)
            rep = evaluate_support(family, built, res.lam, res.params.beta, d)
            measured = float(np.linalg.norm(rep.violations))
            assert measured <= cert.violation_bound + 1e-9, (family, seed)
            assert rep.risk <= lp.value + cert.risk_gap_bound + 1e-9, (family, seed)

    for mode, budget in (("size", 1.6), ("risk", 0.1)):
        built = build_set_valued(data.class_probs, data.weights, mode, budget)
        _, best = solve_set_greedy(data.class_probs, data.weights, mode, budget)
        for seed in (0, 1):
            stream = SampleStream(range(30), weights=data.weights, seed=(seed, 45))
            _, res = copt(built, 800, stream)
            cert = certify(built, res.lam, res.params.beta, res.alpha_cert)
            rep = evaluate_support("set_size", built, res.lam, res.params.beta, data)
            measured = float(np.linalg.norm(rep.violations))
            assert measured <= cert.violation_bound + 1e-9, (mode, seed)
            assert rep.risk <= best + cert.risk_gap_bound + 1e-9, (mode, seed)


@criterion(5, "end-to-end rejection control on the half-half point", seconds=60.0)
def test_criterion_5_end_to_end():
    # one support point with p=(0.5, 0.5) and rejection budget 0.3: the best
    # policy rejects 0.3 and splits the rest, risk 0.7 * 0.5 = 0.35
    probs = np.array([[0.5, 0.5]])
    inst = FiniteInstance.from_problem(
        build_reject_controlled_rejection(probs, 0.3), range(1), np.ones(1)
    )
    rates, risks = [], []
    for seed in range(10):
        stream = SampleStream(range(1), weights=inst.weights, seed=(seed, 77))
        clf, res = copt(inst.problem(), 10_000, stream)
        pi = predict_proba(clf, 0)
        rates.append(float(pi[clf.actions.reject_index]))
        risks.append(float(inst.loss_table[0] @ pi))
        cert = certify(inst, res.lam, res.params.beta, res.alpha_cert)
        viol = max(0.0, rates[-1] - 0.3)
        assert viol <= cert.violation_bound + 1e-9
        assert risks[-1] <= 0.35 + cert.risk_gap_bound + 1e-9
    assert abs(np.mean(rates) - 0.3) < 0.02
    assert abs(np.mean(risks) - 0.35) < 0.02


@criterion(6, "gradient-mapping norm shrinks with the budget", seconds=300.0)
def test_criterion_6_rate_trend():
    data = synth_generate(2, 2, 30, 0, 606, n_groups=2, group_scale=2.0)
    built = build_family(
        "dp",
        data.class_probs,
        data.weights,
        {"eps": 0.01},
        group_probs=data.group_probs,
        group_marginals=data.group_marginals,
    )
    lp = solve_lp_exact(built)
    means = {}
    for iters in (1000, 4000):
        norms = []
        for seed in range(10):
            stream = SampleStream(range(30), weights=data.weights, seed=(seed, 66, iters))
            _, res = copt(built.problem(), iters, stream)
            cert = certify(built, res.lam, res.params.beta, res.alpha_cert)
            norms.append(cert.grad_map_norm)
            rep = evaluate_support("dp", built, res.lam, res.params.beta, data)
            assert float(np.linalg.norm(rep.violations)) <= cert.violation_bound + 1e-9
            assert rep.risk <= lp.value + cert.risk_gap_bound + 1e-9
        means[iters] = float(np.mean(norms))
    assert means[4000] <= 0.75 * means[1000], means


@criterion(7, "schedule arithmetic and the iteration threshold")
def test_criterion_7_schedule_arithmetic():
    p = default_schedule(1024, 1.0)
    assert p.beta == 12.8
    assert p.mu == 0.15625
    assert p.smoothness == 25.6
    assert p.stages == math.floor(math.log2(p.beta**2)) == 7
    assert p.alpha_cert == 0.0125

    assert minimal_default_iterations() == 44
    with pytest.raises(ValueError):
        default_schedule(43, 1.0)
    default_schedule(44, 1.0)

    # with the constants above the restart bound is 4 * 12.8 * 7 = 358.4:
    # budgets up to 358 must error, 359 up must run
    rng = np.random.default_rng(707)
    inst = _random_instance(rng, 1, 1, 3, margin=0.1)
    obj = inst.problem().dual_objective(p.beta)
    threshold = 4.0 * math.sqrt(p.smoothness / p.mu) * 7
    assert abs(threshold - 358.4) < 1e-9
    for total in range(330, 390):
        params = replace(p, iterations=total)
        stream = SampleStream(range(1), seed=(total, 7))
        if total <= threshold:
            with pytest.raises(ValueError):
                sgd3(obj, np.zeros(1), params, stream, collect_trace=False)
        else:
            sgd3(obj, np.zeros(1), params, stream, collect_trace=False)


@criterion(8, "probability estimator identities")
def test_criterion_8_estimators():
    rng = np.random.default_rng(808)
    x = rng.normal(size=(40, 2))
    y = rng.random(40)
    q = rng.normal(size=(6, 2))

    # degree 0 is the kernel-weighted mean
    pred = local_poly_fit_predict(x, y, q, 0, "gaussian", 0.9)
    for i, point in enumerate(q):
        w = np.exp(-0.5 * np.sum(((x - point) / 0.9) ** 2, axis=1))
        assert abs(pred[i] - w @ y / w.sum()) <= 1e-12

    # degree 1 reproduces affine data exactly (values kept inside [0, 1]
    # so the probability clamp stays inactive)
    coef = np.array([0.05, -0.03])
    y_lin = 0.4 + x @ coef
    pred = local_poly_fit_predict(x, y_lin, q, 1, "epanechnikov", 2.5)
    assert np.max(np.abs(pred - (0.4 + q @ coef))) <= 1e-8

    # a singular local system returns 0
    same = np.zeros((5, 2))
    pred = local_poly_fit_predict(same, np.full(5, 0.6), q[:1], 1, "gaussian", 1.0)
    assert pred[0] == 0.0

    loss = lambda x: np.array([0.2, 0.8])
    cons = lambda x: np.array([[0.1, -0.1]])
    assert estimation_errors(loss, loss, cons, cons, range(3), np.full(3, 1 / 3)) == (0.0, 0.0)
    loss2 = lambda x: np.array([0.2, 0.5])
    cons2 = lambda x: np.array([[0.1, 0.3]])
    d_loss, d_cost = estimation_errors(loss, loss2, cons, cons2, range(4), np.full(4, 0.25))
    assert abs(d_loss - 0.3) <= 1e-12
    assert abs(d_cost - 0.4) <= 1e-12


@criterion(9, "sweep trade-off and byte reproducibility", seconds=300.0)
def test_criterion_9_sweep(tmp_path):
    data = synth_generate(3, 3, 40, 0, 909)
    grid = [0.2, 0.1, 0.05, 0.025, 0.0125]
    seeds = list(range(10))
    rows = sweep(data, "reject_rate", grid, 2000, seeds, out_path=str(tmp_path / "a.csv"))
    assert len(rows) == len(grid) * len(seeds)

    lp_values = {}
    for budget in grid:
        built = build_family("reject_rate", data.class_probs, data.weights, {"budget": budget})
        lp_values[budget] = solve_lp_exact(built).value
    for row in rows:
        assert row["violation"] <= row["violation_bound"] + 1e-9
        assert row["risk"] <= lp_values[row["budget"]] + row["risk_gap_bound"] + 1e-9

    by_budget = {
        b: np.mean([r["risk"] for r in rows if r["budget"] == b]) for b in grid
    }
    ordered = [by_budget[b] for b in sorted(grid)]
    assert all(a >= b - 1e-12 for a, b in zip(ordered, ordered[1:]))

    sweep(data, "reject_rate", grid, 2000, seeds, out_path=str(tmp_path / "b.csv"))
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
