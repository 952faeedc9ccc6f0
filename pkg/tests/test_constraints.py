import numpy as np
import pytest

from dualpost.constraints import (
    ProbabilityModel,
    build_churn,
    build_demographic_parity,
    build_equalized_odds,
    build_reject_controlled_error,
    build_reject_controlled_rejection,
    build_set_valued,
    build_standard,
    combine,
    dp_row_labels,
    eo_row_labels,
    one_hot_groups,
)
from dualpost.problem import GibbsClassifier, constraint_values, risk_value


def _random_policy(rng, n, a):
    return rng.dirichlet(np.ones(a), size=n)


def _expect(table, weights, policy):
    """E[C(X) pi(X)] for a table-backed constraint oracle and policy table."""
    return np.einsum("i,ijA,iA->j", weights, table, policy)


def test_standard_loss_is_misclassification_mass():
    rng = np.random.default_rng(20)
    p = rng.dirichlet(np.ones(3), size=6)
    prob = build_standard(p)
    assert prob.n_constraints == 0
    assert prob.actions.size == 3
    np.testing.assert_allclose(prob.loss.table, 1.0 - p, atol=1e-15)


def test_rejection_builder_tables():
    prob = build_reject_controlled_rejection(np.array([[0.5, 0.5]]), budget=0.3)
    np.testing.assert_allclose(prob.loss.table, [[0.5, 0.5, 0.0]])
    np.testing.assert_allclose(prob.constraints.table, [[[-0.3, -0.3, 0.7]]])
    assert prob.actions.reject == "reject"


def test_rejection_constraint_measures_rejection_rate():
    rng = np.random.default_rng(21)
    n, k, budget = 8, 3, 0.2
    p = rng.dirichlet(np.ones(k), size=n)
    w = rng.dirichlet(np.ones(n))
    prob = build_reject_controlled_rejection(p, budget)
    policy = _random_policy(rng, n, k + 1)
    got = _expect(prob.constraints.table, w, policy)
    reject_rate = float(w @ policy[:, k])
    assert got[0] == pytest.approx(reject_rate - budget, abs=1e-12)
    # loss ignores rejected mass
    risk = float(np.einsum("i,iA,iA->", w, prob.loss.table, policy))
    manual = float(w @ np.sum((1.0 - p) * policy[:, :k], axis=1))
    assert risk == pytest.approx(manual, abs=1e-12)


def test_error_builder_tables():
    prob = build_reject_controlled_error(np.array([[0.8, 0.2]]), delta=0.1)
    np.testing.assert_allclose(prob.loss.table, [[0.0, 0.0, 1.0]])
    np.testing.assert_allclose(
        prob.constraints.table, [[[0.1, 0.7, -0.1]]], atol=1e-15
    )


def test_error_constraint_measures_accepted_error():
    rng = np.random.default_rng(22)
    n, k, delta = 5, 4, 0.15
    p = rng.dirichlet(np.ones(k), size=n)
    w = rng.dirichlet(np.ones(n))
    prob = build_reject_controlled_error(p, delta)
    policy = _random_policy(rng, n, k + 1)
    got = _expect(prob.constraints.table, w, policy)
    accepted_error = float(w @ np.sum((1.0 - p) * policy[:, :k], axis=1))
    assert got[0] == pytest.approx(accepted_error - delta, abs=1e-12)
    risk = float(np.einsum("i,iA,iA->", w, prob.loss.table, policy))
    assert risk == pytest.approx(float(w @ policy[:, k]), abs=1e-12)


def test_dp_hand_example():
    # one point in group 0 of two equally likely groups, eps 0.1
    probs = np.array([[0.6, 0.4]])
    groups = np.array([[1.0, 0.0]])
    prob = build_demographic_parity(probs, groups, [0.5, 0.5], eps=0.1)
    assert prob.n_constraints == 8
    expected = np.array(
        [
            [0.9, -0.1],   # (+, s=0, y=0): ratio +1
            [-0.1, 0.9],   # (+, s=0, y=1)
            [-1.1, -0.1],  # (+, s=1, y=0): ratio -1
            [-0.1, -1.1],  # (+, s=1, y=1)
            [-1.1, -0.1],  # (-, s=0, y=0)
            [-0.1, -1.1],  # (-, s=0, y=1)
            [0.9, -0.1],   # (-, s=1, y=0)
            [-0.1, 0.9],   # (-, s=1, y=1)
        ]
    )
    np.testing.assert_allclose(prob.constraints.table[0], expected, atol=1e-15)
    assert dp_row_labels(2, 2) == [
        ("+", 0, 0), ("+", 0, 1), ("+", 1, 0), ("+", 1, 1),
        ("-", 0, 0), ("-", 0, 1), ("-", 1, 0), ("-", 1, 1),
    ]


def test_dp_rows_measure_parity_gaps():
    rng = np.random.default_rng(23)
    n, k, s_count = 10, 3, 2
    p = rng.dirichlet(np.ones(k), size=n)
    labels = rng.integers(0, s_count, size=n)
    w = rng.dirichlet(np.ones(n))
    marg = np.array([w[labels == s].sum() for s in range(s_count)])
    eps = np.array([0.04, 0.07])
    prob = build_demographic_parity(p, one_hot_groups(labels, s_count), marg, eps)
    policy = _random_policy(rng, n, k)
    got = _expect(prob.constraints.table, w, policy)
    for row, (sign, s, y) in zip(got, dp_row_labels(s_count, k)):
        rate_in_group = float(w[labels == s] @ policy[labels == s, y]) / marg[s]
        rate_overall = float(w @ policy[:, y])
        gap = rate_in_group - rate_overall
        want = (gap if sign == "+" else -gap) - eps[s]
        assert row == pytest.approx(want, abs=1e-10)


def test_dp_soft_group_model():
    # non-indicator group probabilities: the unaware setting
    rng = np.random.default_rng(24)
    n, k, s_count = 7, 2, 3
    p = rng.dirichlet(np.ones(k), size=n)
    tau = rng.dirichlet(np.ones(s_count), size=n)
    w = rng.dirichlet(np.ones(n))
    marg = w @ tau
    prob = build_demographic_parity(p, tau, marg, eps=0.0)
    policy = _random_policy(rng, n, k)
    got = _expect(prob.constraints.table, w, policy)
    for row, (sign, s, y) in zip(got, dp_row_labels(s_count, k)):
        rate_in_group = float(w @ (tau[:, s] * policy[:, y])) / marg[s]
        gap = rate_in_group - float(w @ policy[:, y])
        assert row == pytest.approx(gap if sign == "+" else -gap, abs=1e-10)


def test_dp_validation():
    p = np.full((4, 2), 0.5)
    tau = np.tile([1.0, 0.0], (4, 1))
    with pytest.raises(ValueError, match="marginals"):
        build_demographic_parity(p, tau, [0.7, 0.7], eps=0.1)
    with pytest.raises(ValueError, match="eps"):
        build_demographic_parity(p, tau, [0.5, 0.5], eps=-0.1)


def test_eo_rows_measure_odds_gaps():
    rng = np.random.default_rng(25)
    n, k, s_count = 9, 2, 2
    joint = rng.dirichlet(np.ones(s_count * k), size=n).reshape(n, s_count, k)
    w = rng.dirichlet(np.ones(n))
    q_marg = np.einsum("i,isy->sy", w, joint)
    prob = build_equalized_odds(joint, q_marg, eps=0.03)
    assert prob.n_constraints == 2 * k * s_count * k
    policy = _random_policy(rng, n, k)
    got = _expect(prob.constraints.table, w, policy)
    p_marg = q_marg.sum(axis=0)
    for row, (sign, y, s, yt) in zip(got, eo_row_labels(s_count, k)):
        rate_sy = float(w @ (joint[:, s, yt] * policy[:, y])) / q_marg[s, yt]
        rate_y = float(w @ (joint.sum(axis=1)[:, yt] * policy[:, y])) / p_marg[yt]
        gap = rate_sy - rate_y
        want = (gap if sign == "+" else -gap) - 0.03
        assert row == pytest.approx(want, abs=1e-10)
    # loss is one minus the class-marginal probability
    np.testing.assert_allclose(prob.loss.table, 1.0 - joint.sum(axis=1), atol=1e-12)


def test_churn_builder():
    prob = build_churn(np.array([[0.2, 0.5, 0.3]]), np.array([1]), budget=0.25)
    np.testing.assert_allclose(prob.constraints.table, [[[0.75, -0.25, 0.75]]])
    rng = np.random.default_rng(26)
    n, k = 6, 3
    p = rng.dirichlet(np.ones(k), size=n)
    g = rng.integers(0, k, size=n)
    w = rng.dirichlet(np.ones(n))
    prob = build_churn(p, g, budget=0.25)
    policy = _random_policy(rng, n, k)
    got = _expect(prob.constraints.table, w, policy)
    churn = float(w @ (1.0 - policy[np.arange(n), g]))
    assert got[0] == pytest.approx(churn - 0.25, abs=1e-12)
    with pytest.raises(ValueError, match="baseline"):
        build_churn(p, np.full(n, k), budget=0.25).constraints(0)


def test_combine_stacks_rows():
    rng = np.random.default_rng(27)
    p = rng.dirichlet(np.ones(2), size=5)
    g = rng.integers(0, 2, size=5)
    a = build_churn(p, g, budget=0.3)
    labels = rng.integers(0, 2, size=5)
    marg = np.bincount(labels, minlength=2) / 5
    b = build_demographic_parity(p, one_hot_groups(labels, 2), marg, eps=0.1)
    both = combine(a, b)
    assert both.n_constraints == a.n_constraints + b.n_constraints
    np.testing.assert_array_equal(
        both.constraints.table,
        np.concatenate([a.constraints.table, b.constraints.table], axis=1),
    )
    np.testing.assert_array_equal(both.loss.table, a.loss.table)
    mismatched = build_reject_controlled_rejection(p, 0.3)
    with pytest.raises(ValueError, match="action space"):
        combine(a, mismatched)


def test_budget_validation():
    p = np.array([[0.5, 0.5]])
    for bad in (0.0, 1.0, -0.2, 1.5):
        with pytest.raises(ValueError):
            build_reject_controlled_rejection(p, bad)
        with pytest.raises(ValueError):
            build_reject_controlled_error(p, bad)
    with pytest.raises(ValueError):
        build_churn(p, np.zeros(1, dtype=int), 0.0)


def test_probability_model_validation():
    model = ProbabilityModel(lambda x: np.array([0.7, 0.4]), 2)
    with pytest.raises(ValueError, match="probability"):
        model(0)
    nan_model = ProbabilityModel(lambda x: np.array([np.nan, 1.0]), 2)
    with pytest.raises(ValueError, match="non-finite"):
        nan_model(0)


def test_generic_models_stay_lazy():
    # callable models produce a working problem without tables
    probs = ProbabilityModel(lambda x: np.array([0.8, 0.2]) if x < 1 else np.array([0.3, 0.7]), 2)
    prob = build_reject_controlled_rejection(probs, 0.25)
    assert prob.loss.table is None
    np.testing.assert_allclose(prob.loss(0), [0.2, 0.8, 0.0], atol=1e-15)
    np.testing.assert_allclose(prob.constraints(1)[0], [-0.25, -0.25, 0.75])


def test_gibbs_policy_on_built_problem():
    # feasibility direction: a policy that rejects too much violates the row
    prob = build_reject_controlled_rejection(np.array([[0.5, 0.5]]), budget=0.3)
    clf = GibbsClassifier(
        prob.actions, prob.loss, prob.constraints, np.array([0.0]), 1.0
    )
    vals = constraint_values(clf, prob.constraints, [0], [1.0])
    pi_r = clf.predict_proba(0)[2]
    assert vals[0] == pytest.approx(pi_r - 0.3, abs=1e-12)


def test_set_valued_builder_rows():
    probs = np.array([[0.5, 0.3, 0.2]])
    sp = build_set_valued(probs, [1.0], mode="size", budget=1.0)
    assert sp.n_constraints == 1 and sp.n_classes == 3
    # loss charges the class mass on exclusion only
    np.testing.assert_allclose(sp.loss_table[0, :, 0], 0.0)
    np.testing.assert_allclose(sp.loss_table[0, :, 1], probs[0])
    b = 1.0 / 3.0
    np.testing.assert_allclose(sp.cost_table[0, 0, :, 0], 1.0 - b, atol=1e-15)
    np.testing.assert_allclose(sp.cost_table[0, 0, :, 1], -b, atol=1e-15)


def test_set_valued_constraint_identities():
    rng = np.random.default_rng(28)
    n, k = 6, 4
    probs = rng.dirichlet(np.ones(k), size=n)
    w = rng.dirichlet(np.ones(n))
    base = rng.integers(0, k, size=n)
    incl = rng.uniform(size=(n, k))
    pairs = np.stack([incl, 1.0 - incl], axis=-1)

    sp = build_set_valued(probs, w, mode="size", budget=1.5, baseline=base, churn_budget=0.2)
    got = np.einsum("i,ijya,iya->j", w, sp.cost_table, pairs)
    size = float(w @ incl.sum(axis=1))
    churn = float(w @ (1.0 - incl[np.arange(n), base]))
    assert got[0] == pytest.approx(size - 1.5, abs=1e-12)
    assert got[1] == pytest.approx(churn - 0.2, abs=1e-12)

    sp2 = build_set_valued(probs, w, mode="risk", budget=0.1)
    got2 = np.einsum("i,ijya,iya->j", w, sp2.cost_table, pairs)
    risk = float(w @ np.sum(probs * (1.0 - incl), axis=1))
    assert got2[0] == pytest.approx(risk - 0.1, abs=1e-12)
    # size objective
    loss_val = float(np.einsum("i,iya,iya->", w, sp2.loss_table, pairs))
    assert loss_val == pytest.approx(size, abs=1e-12)


def test_set_valued_validation():
    probs = np.array([[0.6, 0.4]])
    with pytest.raises(ValueError):
        build_set_valued(probs, [1.0], mode="size", budget=2.0)
    with pytest.raises(ValueError):
        build_set_valued(probs, [1.0], mode="risk", budget=1.2)
    with pytest.raises(ValueError):
        build_set_valued(probs, [1.0], mode="other", budget=0.5)
    with pytest.raises(ValueError, match="churn"):
        build_set_valued(probs, [1.0], mode="size", budget=1.0, churn_budget=0.1)
