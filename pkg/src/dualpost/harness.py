"""Experiment plumbing: evaluation metrics, synthetic data, sweeps, ingestion.

Evaluation uses expected policy probabilities, so the reported numbers are
exact functionals of the policy rather than Monte Carlo estimates; a sampled
mode is available for demonstration.  All randomness fans out from one
top-level seed through fixed component tags, so any cell of a sweep can be
reproduced in isolation.
"""

from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import dataclass

import numpy as np

from .certificates import certify
from .constraints import (
    build_churn,
    build_demographic_parity,
    build_equalized_odds,
    build_reject_controlled_error,
    build_reject_controlled_rejection,
)
from .core import softmax
from .optim import copt
from .problem import (
    FiniteInstance,
    SampleStream,
    _check_weights,
    constraint_values,
    predict_proba,
    risk_value,
)
from .setvalued import build_set_valued

__all__ = [
    "EvalReport",
    "SyntheticData",
    "LabeledDataset",
    "FAMILIES",
    "SWEEP_COLUMNS",
    "evaluate",
    "evaluate_sets",
    "evaluate_support",
    "PARAM_KEYS",
    "group_unfairness",
    "synth_generate",
    "build_family",
    "family_metric",
    "sweep",
    "ingest_csv",
]

# fixed seed-tag offsets: (seed, tag, ...) tuples feed numpy's SeedSequence,
# so data synthesis, optimizer streams, action sampling, and splits never
# share generator state
DATA_TAG = 1
STREAM_TAG = 2
SAMPLE_TAG = 3
SPLIT_TAG = 4

FAMILIES = (
    "reject_rate",
    "reject_error",
    "dp",
    "eo",
    "churn",
    "set_size",
    "set_risk",
)


@dataclass
class EvalReport:
    """Metrics of one policy on labeled data; None where not applicable.

    `unfairness` carries one entry per group and is NaN for groups with no
    mass in the data.  All rates live in [0, 1].
    """

    risk: float
    violations: np.ndarray | None = None
    rejection_rate: float | None = None
    unfairness: np.ndarray | None = None
    churn_rate: float | None = None
    set_size: float | None = None

    def to_dict(self):
        def conv(v):
            if isinstance(v, np.ndarray):
                return [None if math.isnan(e) else float(e) for e in v]
            return v

        return {
            "risk": self.risk,
            "violations": conv(self.violations),
            "rejection_rate": self.rejection_rate,
            "unfairness": conv(self.unfairness),
            "churn_rate": self.churn_rate,
            "set_size": self.set_size,
        }

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)
            fh.write("\n")


def group_unfairness(pi, group_probs, weights, base_probs=None):
    """Largest gap per group between conditional and reference mean outputs.

    `group_probs` holds membership probabilities (one-hot for observed
    groups); a group with zero mass gets NaN.  The reference is the plain
    marginal, or the `base_probs`-conditional mean when given (used for
    label-conditional comparisons).
    """
    pi = np.asarray(pi, dtype=float)
    group_probs = np.asarray(group_probs, dtype=float)
    weights = np.asarray(weights, dtype=float)
    if base_probs is None:
        marginal = weights @ pi
    else:
        base = weights * np.asarray(base_probs, dtype=float)
        marginal = base @ pi / base.sum()
    mass = weights @ group_probs
    out = np.full(group_probs.shape[1], np.nan)
    for g in range(group_probs.shape[1]):
        if mass[g] > 0:
            cond = (weights * group_probs[:, g]) @ pi / mass[g]
            out[g] = float(np.max(np.abs(cond - marginal)))
    return out


def _sample_one_hot(pi, rng):
    """One action draw per row, returned as a one-hot matrix."""
    cum = np.cumsum(pi, axis=1)
    u = rng.random(pi.shape[0])
    picks = np.minimum((u[:, None] < cum).argmax(axis=1), pi.shape[1] - 1)
    out = np.zeros_like(pi)
    out[np.arange(pi.shape[0]), picks] = 1.0
    return out


def evaluate(
    clf,
    xs,
    labels,
    *,
    groups=None,
    n_groups=None,
    baseline=None,
    constraints=None,
    weights=None,
    sampled=False,
    rng=None,
):
    """Expected-probability metrics of a single-action policy.

    Risk is the mass placed on wrong class labels; a reject action never
    counts as an error and is reported separately as the rejection rate.
    `labels`, `baseline` are action labels; `groups` are integer group ids.
    sampled=True replaces the policy row at each point with one sampled
    action (demonstration mode; the certificates speak about the expected
    form).
    """
    xs = list(xs)
    m = len(xs)
    if m == 0:
        raise ValueError("evaluation needs at least one point")
    weights = np.full(m, 1.0 / m) if weights is None else _check_weights(xs, weights)
    pi = np.stack([predict_proba(clf, x) for x in xs])
    if sampled:
        if rng is None:
            raise ValueError("sampled evaluation needs an rng")
        pi = _sample_one_hot(pi, rng)

    actions = clf.actions
    has_reject = actions.reject is not None
    label_idx = np.array([actions.index(lab) for lab in labels])
    if label_idx.shape != (m,):
        raise ValueError(f"{m} points but {label_idx.shape[0]} labels")
    if has_reject and np.any(label_idx == actions.reject_index):
        raise ValueError("labels must be class labels, not the reject action")

    correct = pi[np.arange(m), label_idx]
    rejected = pi[:, actions.reject_index] if has_reject else np.zeros(m)
    risk = float(weights @ (1.0 - correct - rejected))

    report = EvalReport(risk=risk)
    if has_reject:
        report.rejection_rate = float(weights @ rejected)
    if groups is not None:
        groups = np.asarray(groups, dtype=int)
        k = int(groups.max()) + 1 if n_groups is None else int(n_groups)
        report.unfairness = group_unfairness(pi, np.eye(k)[groups], weights)
    if baseline is not None:
        base_idx = np.array([actions.index(lab) for lab in baseline])
        report.churn_rate = float(weights @ (1.0 - pi[np.arange(m), base_idx]))
    if constraints is not None:
        vals = np.zeros(constraints.n_constraints)
        for i, x in enumerate(xs):
            vals += weights[i] * (constraints(x) @ pi[i])
        report.violations = np.maximum(vals, 0.0)
    return report


def evaluate_sets(clf, labels, *, baseline=None, weights=None, sampled=False, rng=None):
    """Metrics of a set-valued policy over its own support.

    Risk is the miss probability of the true label, size the expected
    number of included classes.  `labels` aligns with the support order.
    """
    problem = clf.problem
    n = problem.n
    weights = problem.weights if weights is None else _check_weights(range(n), weights)
    q = clf.proba_table()
    if sampled:
        if rng is None:
            raise ValueError("sampled evaluation needs an rng")
        q = (rng.random(q.shape) < q).astype(float)

    labels = np.asarray(labels, dtype=int)
    if labels.shape != (n,) or labels.min() < 0 or labels.max() >= problem.n_classes:
        raise ValueError("labels must give one class index per support point")
    risk = float(weights @ (1.0 - q[np.arange(n), labels]))
    report = EvalReport(risk=risk, set_size=float(weights @ q.sum(axis=1)))
    if baseline is not None:
        base = np.asarray(baseline, dtype=int)
        report.churn_rate = float(weights @ (1.0 - q[np.arange(n), base]))
    pairs = np.stack([q, 1.0 - q], axis=-1)
    vals = np.einsum("i,ijya,iya->j", weights, problem.cost_table, pairs)
    report.violations = np.maximum(vals, 0.0)
    return report


@dataclass
class SyntheticData:
    """Finite-support ground truth plus labeled draws from it.

    The feature distribution is the weighted point cloud itself, so the
    class and group probability tables are exact oracles; draws record the
    support position they came from, which doubles as the oracle input.
    """

    points: np.ndarray
    weights: np.ndarray
    class_probs: np.ndarray
    group_probs: np.ndarray | None
    group_marginals: np.ndarray | None
    x: np.ndarray
    y: np.ndarray
    s: np.ndarray | None
    positions: np.ndarray
    # fixed group/label joint marginal to reuse when rebuilding over new
    # points (pointwise extension keeps the training-time constants)
    joint_marginals: np.ndarray | None = None

    @property
    def n_classes(self):
        return self.class_probs.shape[1]


def _rows_inverse_cdf(prob_rows, rng):
    cum = np.cumsum(prob_rows, axis=1)
    u = rng.random(prob_rows.shape[0])
    return np.minimum((u[:, None] < cum).argmax(axis=1), prob_rows.shape[1] - 1)


def synth_generate(
    dims,
    n_classes,
    n_support,
    n_samples,
    seed,
    *,
    n_groups=None,
    class_scale=2.0,
    group_scale=1.0,
):
    """Gaussian-mixture feature cloud with logistic class and group maps.

    Support points are drawn from per-class mixture components with
    group-dependent shifts; class probabilities are a softmax of inner
    products with the class centers, so they are smooth in the features and
    exactly known.  n_samples=0 returns the instance without draws.
    """
    if dims < 1 or n_classes < 2 or n_support < 1 or n_samples < 0:
        raise ValueError(
            f"invalid synthetic sizes dims={dims}, classes={n_classes}, "
            f"support={n_support}, samples={n_samples}"
        )
    if n_groups is not None and n_groups < 2:
        raise ValueError(f"need at least 2 groups, got {n_groups}")
    rng = np.random.default_rng((seed, DATA_TAG))

    centers = class_scale * rng.normal(size=(n_classes, dims))
    shifts = (
        group_scale * rng.normal(size=(n_groups, dims))
        if n_groups is not None
        else np.zeros((1, dims))
    )
    comp_c = rng.integers(0, n_classes, size=n_support)
    comp_g = rng.integers(0, shifts.shape[0], size=n_support)
    points = centers[comp_c] + shifts[comp_g] + rng.normal(size=(n_support, dims))
    weights = np.full(n_support, 1.0 / n_support)

    class_probs = softmax(points @ centers.T, 1.0, axis=-1)
    group_probs = None
    group_marginals = None
    if n_groups is not None:
        group_probs = softmax(points @ shifts.T, 1.0, axis=-1)
        group_marginals = weights @ group_probs

    positions = rng.choice(n_support, size=n_samples, p=weights)
    x = points[positions]
    y = _rows_inverse_cdf(class_probs[positions], rng) if n_samples else np.empty(0, int)
    s = None
    if n_groups is not None:
        s = (
            _rows_inverse_cdf(group_probs[positions], rng)
            if n_samples
            else np.empty(0, int)
        )
    return SyntheticData(
        points=points,
        weights=weights,
        class_probs=class_probs,
        group_probs=group_probs,
        group_marginals=group_marginals,
        x=x,
        y=y,
        s=s,
        positions=positions,
    )


def build_family(
    family,
    probs,
    weights,
    params,
    *,
    group_probs=None,
    group_marginals=None,
    joint_marginals=None,
    baseline=None,
):
    """Named constraint family over a class-probability table.

    Returns a finite instance for the single-action families and a
    set-valued problem for the set families; both expose the support the
    optimizer and certificates work with.  `params` carries the family's
    scalars (budget / delta / eps).
    """
    probs = np.asarray(probs, dtype=float)
    n = probs.shape[0]
    weights = _check_weights(range(n), weights)

    if family == "reject_rate":
        prob = build_reject_controlled_rejection(probs, params["budget"])
    elif family == "reject_error":
        prob = build_reject_controlled_error(probs, params["delta"])
    elif family == "dp":
        if group_probs is None or group_marginals is None:
            raise ValueError("dp needs group probabilities and marginals")
        prob = build_demographic_parity(probs, group_probs, group_marginals, params["eps"])
    elif family == "eo":
        if group_probs is None:
            raise ValueError("eo needs group probabilities")
        joint = group_probs[:, :, None] * probs[:, None, :]
        joint_marg = (
            np.einsum("i,isy->sy", weights, joint)
            if joint_marginals is None
            else np.asarray(joint_marginals, dtype=float)
        )
        prob = build_equalized_odds(joint, joint_marg, params["eps"])
    elif family == "churn":
        if baseline is None:
            raise ValueError("churn needs a baseline decision per support point")
        prob = build_churn(probs, np.asarray(baseline, dtype=int), params["budget"])
    elif family in ("set_size", "set_risk"):
        mode = "size" if family == "set_size" else "risk"
        churn_b = params.get("churn_budget")
        return build_set_valued(
            probs,
            weights,
            mode,
            params["budget"],
            baseline=baseline if churn_b is not None else None,
            churn_budget=churn_b,
        )
    else:
        raise ValueError(f"unknown family {family!r}; choose one of {FAMILIES}")
    return FiniteInstance.from_problem(prob, range(n), weights)


def family_metric(family, report):
    """The constraint-side column of a sweep row for the given family."""
    if family in ("reject_rate", "reject_error"):
        return report.rejection_rate
    if family in ("dp", "eo"):
        vals = report.unfairness[~np.isnan(report.unfairness)]
        return float(vals.max()) if vals.size else float("nan")
    if family == "churn":
        return report.churn_rate
    return report.set_size


def evaluate_support(family, built, lam, beta, data):
    """Exact expected metrics of the Gibbs policy over the truth support."""
    if isinstance(built, FiniteInstance):
        prob = built.problem()
        clf = prob.gibbs(lam, beta)
        xs, w = built.support()
        report = EvalReport(risk=risk_value(clf, prob.loss, xs, w))
        report.violations = np.maximum(
            constraint_values(clf, prob.constraints, xs, w), 0.0
        )
        pi = np.stack([predict_proba(clf, x) for x in xs])
        if clf.actions.reject is not None:
            report.rejection_rate = float(w @ pi[:, clf.actions.reject_index])
        if family == "eo" and data.group_probs is not None:
            # gaps conditional on the true label, maximized over labels
            per_group = np.full(data.group_probs.shape[1], np.nan)
            for y in range(data.n_classes):
                joint_y = data.group_probs * data.class_probs[:, y : y + 1]
                gaps = group_unfairness(pi, joint_y, w, base_probs=data.class_probs[:, y])
                per_group = np.fmax(per_group, gaps)
            report.unfairness = per_group
        elif data.group_probs is not None:
            report.unfairness = group_unfairness(pi, data.group_probs, w)
        return report
    clf = built.gibbs(lam, beta)
    q = clf.proba_table()
    _, w = built.support()
    pairs = np.stack([q, 1.0 - q], axis=-1)
    vals = np.einsum("i,ijya,iya->j", w, built.cost_table, pairs)
    # objective risk of the set problem: missed mass (size mode) or size
    risk = float(np.einsum("i,iya,iya->", w, built.loss_table, pairs))
    return EvalReport(
        risk=risk,
        set_size=float(w @ q.sum(axis=1)),
        violations=np.maximum(vals, 0.0),
    )


SWEEP_COLUMNS = (
    "budget",
    "seed",
    "risk",
    "violation",
    "family_metric",
    "grad_map_norm",
    "violation_bound",
    "risk_gap_bound",
    "lam_norm",
)

PARAM_KEYS = {
    "reject_rate": "budget",
    "reject_error": "delta",
    "dp": "eps",
    "eo": "eps",
    "churn": "budget",
    "set_size": "budget",
    "set_risk": "budget",
}


def _format_row(row):
    parts = [f"{row['budget']:.17g}", str(int(row["seed"]))]
    parts += [f"{row[c]:.17g}" for c in SWEEP_COLUMNS[2:]]
    return ",".join(parts)


def _read_done(path):
    done = set()
    if path is None or not os.path.exists(path):
        return done
    with open(path) as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is not None and tuple(reader.fieldnames) != SWEEP_COLUMNS:
            raise ValueError(f"existing sweep file has columns {reader.fieldnames}")
        for rec in reader:
            done.add((rec["budget"], int(rec["seed"])))
    return done


def sweep(
    data,
    family,
    budgets,
    iterations,
    seeds,
    *,
    out_path=None,
    variant="default",
    backend=None,
    baseline=None,
    extra_params=None,
):
    """Trade-off table over a budget grid and seed list.

    Each (budget, seed) cell runs the full pipeline on the truth tables of
    `data`, certifies the result, and evaluates it exactly over the
    support.  Rows are flushed to `out_path` as they finish; cells already
    present in the file are skipped, so an interrupted sweep resumes where
    it stopped.  Output contains no timestamps: same inputs, same bytes.
    """
    budgets = list(budgets)
    if not budgets:
        raise ValueError("budget grid must not be empty")
    if family not in PARAM_KEYS:
        raise ValueError(f"unknown family {family!r}; choose one of {FAMILIES}")
    done = _read_done(out_path)
    fh = None
    if out_path is not None:
        fresh = not os.path.exists(out_path) or os.path.getsize(out_path) == 0
        fh = open(out_path, "a")
        if fresh:
            fh.write(",".join(SWEEP_COLUMNS) + "\n")
            fh.flush()

    rows = []
    try:
        for b_idx, budget in enumerate(budgets):
            params = dict(extra_params or {})
            params[PARAM_KEYS[family]] = budget
            built = build_family(
                family,
                data.class_probs,
                data.weights,
                params,
                group_probs=data.group_probs,
                group_marginals=data.group_marginals,
                baseline=baseline,
            )
            problem = built.problem() if isinstance(built, FiniteInstance) else built
            n = data.class_probs.shape[0]
            for seed in seeds:
                if (f"{float(budget):.17g}", int(seed)) in done:
                    continue
                stream = SampleStream(
                    range(n), weights=data.weights, seed=(seed, STREAM_TAG, b_idx)
                )
                clf, result = copt(
                    problem,
                    iterations,
                    stream,
                    variant=variant,
                    backend=backend,
                    collect_trace=False,
                )
                cert = certify(
                    built, result.lam, result.params.beta, result.alpha_cert
                )
                report = evaluate_support(
                    family, built, result.lam, result.params.beta, data
                )
                row = {
                    "budget": float(budget),
                    "seed": int(seed),
                    "risk": report.risk,
                    "violation": float(np.linalg.norm(report.violations)),
                    "family_metric": family_metric(family, report),
                    "grad_map_norm": cert.grad_map_norm,
                    "violation_bound": cert.violation_bound,
                    "risk_gap_bound": cert.risk_gap_bound,
                    "lam_norm": float(np.linalg.norm(result.lam)),
                }
                rows.append(row)
                if fh is not None:
                    fh.write(_format_row(row) + "\n")
                    fh.flush()
    finally:
        if fh is not None:
            fh.close()
    return rows


@dataclass
class LabeledDataset:
    """Parsed feature/label/group columns with a fixed three-way split."""

    x: np.ndarray
    y: np.ndarray
    s: np.ndarray | None
    train: np.ndarray
    unlabeled: np.ndarray
    test: np.ndarray


def ingest_csv(
    path,
    feature_cols,
    label_col,
    group_col=None,
    *,
    seed=0,
    proportions=(0.4, 0.4, 0.2),
):
    """Labeled dataset from a CSV file with a deterministic split.

    The split permutation depends only on the seed; proportions give the
    train/unlabeled/test fractions (first two rounded down, remainder to
    test).
    """
    if len(proportions) != 3 or abs(sum(proportions) - 1.0) > 1e-9:
        raise ValueError(f"proportions must be three fractions summing to 1, got {proportions}")
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise ValueError(f"{path} is empty")
        header = reader.fieldnames
        needed = list(feature_cols) + [label_col] + ([group_col] if group_col else [])
        for col in needed:
            if col not in header:
                raise ValueError(f"missing column {col!r} in {path}")
        records = list(reader)
    if not records:
        raise ValueError(f"{path} has a header but no data rows")

    n = len(records)
    x = np.empty((n, len(feature_cols)))
    y = np.empty(n, dtype=int)
    s = np.empty(n, dtype=int) if group_col else None
    for i, rec in enumerate(records):
        for j, col in enumerate(feature_cols):
            try:
                x[i, j] = float(rec[col])
            except ValueError:
                raise ValueError(
                    f"non-numeric value {rec[col]!r} in column {col!r}, row {i + 2}"
                ) from None
        try:
            y[i] = int(float(rec[label_col]))
        except ValueError:
            raise ValueError(
                f"non-integer label {rec[label_col]!r} in row {i + 2}"
            ) from None
        if s is not None:
            try:
                s[i] = int(float(rec[group_col]))
            except ValueError:
                raise ValueError(
                    f"non-integer group {rec[group_col]!r} in row {i + 2}"
                ) from None

    perm = np.random.default_rng((seed, SPLIT_TAG)).permutation(n)
    n_train = int(proportions[0] * n)
    n_unlab = int(proportions[1] * n)
    return LabeledDataset(
        x=x,
        y=y,
        s=s,
        train=perm[:n_train],
        unlabeled=perm[n_train : n_train + n_unlab],
        test=perm[n_train + n_unlab :],
    )
