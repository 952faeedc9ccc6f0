"""Command-line pipeline over one YAML configuration file.

Subcommands: `run` (fit, optimize, certify, evaluate, write artifacts),
`sweep` (budget-grid trade-off table), `oracle` (exact small-instance
solver), `validate-config`.  Exit codes: 0 success, 1 runtime failure,
2 invalid configuration, 3 infeasible instance.

One top-level seed drives everything; per-component generators are derived
from it with the fixed tags in `harness`, so artifacts are byte-identical
across reruns of the same config and seed.
"""

from __future__ import annotations

import json
import os
import sys

import click
import numpy as np
import yaml

from .certificates import certify
from .constraints import ProbabilityModel
from .estimators import (
    KERNELS,
    estimation_errors,
    load_probability_table,
    one_vs_all,
)
from .harness import (
    FAMILIES,
    PARAM_KEYS,
    SAMPLE_TAG,
    STREAM_TAG,
    SyntheticData,
    build_family,
    evaluate,
    evaluate_sets,
    evaluate_support,
    group_unfairness,
    ingest_csv,
    sweep as run_sweep,
    synth_generate,
)
from .optim import copt, resolve_backend, write_trace
from .oracle import InfeasibleInstanceError, solve_lp_exact, validate_np_structure
from .problem import FiniteInstance, SampleStream, predict_proba


def load_config(path):
    with open(path) as fh:
        cfg = yaml.safe_load(fh)
    return cfg


def validate_config(cfg, *, need_sweep=False):
    """Field-level error messages for a config mapping; empty means valid."""
    errs = []
    if not isinstance(cfg, dict):
        return ["config: top level must be a mapping"]

    if cfg.get("version") != 1:
        errs.append(f"version: expected 1, got {cfg.get('version')!r}")

    family = cfg.get("family")
    if family not in FAMILIES:
        errs.append(f"family: expected one of {FAMILIES}, got {family!r}")

    params = cfg.get("params")
    if not isinstance(params, dict):
        errs.append("params: expected a mapping of family scalars")
        params = {}
    if family in PARAM_KEYS:
        key = PARAM_KEYS[family]
        val = params.get(key)
        if val is None and need_sweep:
            pass  # the sweep grid supplies the family scalar
        elif not isinstance(val, (int, float)):
            errs.append(f"params.{key}: required number for family {family}")
        elif family in ("reject_rate", "reject_error", "churn") and not 0 < val < 1:
            errs.append(f"params.{key}: must lie in (0, 1), got {val}")
        elif family in ("dp", "eo") and not val > 0:
            errs.append(f"params.{key}: must be positive, got {val}")
        elif family in ("set_size", "set_risk") and not val > 0:
            errs.append(f"params.{key}: must be positive, got {val}")
        cb = params.get("churn_budget")
        if cb is not None:
            if family not in ("set_size", "set_risk"):
                errs.append("params.churn_budget: only valid for the set families")
            elif not (isinstance(cb, (int, float)) and 0 < cb <= 1):
                errs.append(f"params.churn_budget: must lie in (0, 1], got {cb}")

    data = cfg.get("data")
    synth = csv_src = None
    if not isinstance(data, dict):
        errs.append("data: expected a mapping with exactly one of synthetic/csv")
    else:
        synth = data.get("synthetic")
        csv_src = data.get("csv")
        if (synth is None) == (csv_src is None):
            errs.append("data: exactly one of data.synthetic and data.csv required")
    if synth is not None:
        if not isinstance(synth, dict):
            errs.append("data.synthetic: expected a mapping")
        else:
            for key, low in (("dims", 1), ("classes", 2), ("support", 1), ("samples", 0)):
                v = synth.get(key)
                if not isinstance(v, int) or v < low:
                    errs.append(f"data.synthetic.{key}: integer >= {low} required")
            g = synth.get("groups")
            if g is not None and (not isinstance(g, int) or g < 2):
                errs.append("data.synthetic.groups: integer >= 2 required when given")
            if family in ("dp", "eo") and synth.get("groups") is None:
                errs.append(f"data.synthetic.groups: required for family {family}")
    if csv_src is not None:
        if not isinstance(csv_src, dict):
            errs.append("data.csv: expected a mapping")
        else:
            path = csv_src.get("path")
            if not isinstance(path, str):
                errs.append("data.csv.path: required string")
            elif not os.path.exists(path):
                errs.append(f"data.csv.path: no such file {path!r}")
            feats = csv_src.get("features")
            if not isinstance(feats, list) or not feats:
                errs.append("data.csv.features: nonempty column list required")
            if not isinstance(csv_src.get("label"), str):
                errs.append("data.csv.label: required column name")
            if family in ("dp", "eo") and not isinstance(csv_src.get("group"), str):
                errs.append(f"data.csv.group: required for family {family}")

    est = cfg.get("estimator")
    if est is not None:
        if not isinstance(est, dict):
            errs.append("estimator: expected a mapping")
        else:
            if ("table" in est) and ({"degree", "kernel", "bandwidth"} & est.keys()):
                errs.append("estimator: table is exclusive with degree/kernel/bandwidth")
            if "table" in est:
                if not isinstance(est["table"], str):
                    errs.append("estimator.table: expected a path string")
                elif not os.path.exists(est["table"]):
                    errs.append(f"estimator.table: no such file {est['table']!r}")
                if csv_src is not None:
                    errs.append("estimator.table: not usable with csv data")
                if family in ("dp", "eo"):
                    errs.append("estimator.table: carries no group probabilities, "
                                f"so it cannot serve family {family}")
            deg = est.get("degree", 0)
            if not isinstance(deg, int) or deg < 0:
                errs.append(f"estimator.degree: integer >= 0 required, got {deg!r}")
            kern = est.get("kernel", "epanechnikov")
            if kern not in KERNELS:
                errs.append(f"estimator.kernel: expected one of {sorted(KERNELS)}, got {kern!r}")
            bw = est.get("bandwidth")
            if bw is not None and not (isinstance(bw, (int, float)) and bw > 0):
                errs.append(f"estimator.bandwidth: positive number or null, got {bw!r}")
    elif csv_src is not None:
        errs.append("estimator: required for csv data")

    opt = cfg.get("optimizer")
    if not isinstance(opt, dict):
        errs.append("optimizer: expected a mapping")
    else:
        t = opt.get("iterations")
        if not isinstance(t, int) or t < 2:
            errs.append(f"optimizer.iterations: integer >= 2 required, got {t!r}")
        variant = opt.get("variant", "default")
        if variant not in ("default", "experiment"):
            errs.append(f"optimizer.variant: expected default or experiment, got {variant!r}")
        backend = opt.get("backend", "auto")
        if backend not in ("auto", "python", "compiled"):
            errs.append(f"optimizer.backend: expected auto/python/compiled, got {backend!r}")

    seed = cfg.get("seed", 0)
    if not isinstance(seed, int) or seed < 0:
        errs.append(f"seed: nonnegative integer required, got {seed!r}")

    if need_sweep:
        sw = cfg.get("sweep")
        if not isinstance(sw, dict):
            errs.append("sweep: expected a mapping with grid and seeds")
        else:
            grid = sw.get("grid")
            if not isinstance(grid, list) or not grid:
                errs.append("sweep.grid: nonempty list of budgets required")
            elif not all(isinstance(v, (int, float)) for v in grid):
                errs.append("sweep.grid: entries must be numbers")
            elif family in ("reject_rate", "reject_error", "churn") and not all(
                0 < v < 1 for v in grid
            ):
                errs.append(f"sweep.grid: entries must lie in (0, 1) for {family}")
            elif not all(v > 0 for v in grid):
                errs.append("sweep.grid: entries must be positive")
            seeds = sw.get("seeds")
            n_seeds = sw.get("n_seeds")
            if seeds is None and n_seeds is None:
                errs.append("sweep.seeds: give a seed list or n_seeds")
            if seeds is not None and (
                not isinstance(seeds, list)
                or not seeds
                or not all(isinstance(v, int) for v in seeds)
            ):
                errs.append("sweep.seeds: nonempty integer list required")
            if n_seeds is not None and (not isinstance(n_seeds, int) or n_seeds < 1):
                errs.append(f"sweep.n_seeds: positive integer required, got {n_seeds!r}")
    return errs


def _estimate_tables(cfg, x_train, y_train, s_train, points, n_classes, n_groups):
    """Class (and group) probability tables at `points` from labeled rows."""
    est = cfg.get("estimator") or {}
    if "table" in est:
        table = load_probability_table(est["table"])
        if table.shape != (len(points), n_classes):
            raise ValueError(
                f"probability table shape {table.shape} does not match "
                f"({len(points)}, {n_classes})"
            )
        return table, None
    degree = est.get("degree", 0)
    kernel = est.get("kernel", "epanechnikov")
    bandwidth = est.get("bandwidth")
    probs = one_vs_all(x_train, y_train, n_classes, points, degree, kernel, bandwidth)
    groups = None
    if s_train is not None and n_groups is not None:
        groups = one_vs_all(x_train, s_train, n_groups, points, degree, kernel, bandwidth)
    return probs, groups


def _baseline_for(cfg, probs):
    """Churn reference decisions: the maximum-probability class per point."""
    if cfg.get("family") in ("churn",):
        return np.asarray(probs).argmax(axis=1)
    if cfg.get("family") in ("set_size", "set_risk") and "churn_budget" in (
        cfg.get("params") or {}
    ):
        return np.asarray(probs).argmax(axis=1)
    return None


def _prepare(cfg, seed):
    """Working tables, optional truth, and test data for one run.

    Returns a dict with the estimated-side SyntheticData view (`work`), the
    truth view when available (`truth`), estimation deltas, and the labeled
    test block (oracle inputs + labels + groups) when one exists.
    """
    family = cfg["family"]
    data_cfg = cfg["data"]
    if "synthetic" in data_cfg and data_cfg["synthetic"] is not None:
        sd = data_cfg["synthetic"]
        truth = synth_generate(
            sd["dims"],
            sd["classes"],
            sd["support"],
            sd["samples"],
            seed,
            n_groups=sd.get("groups"),
        )
        work = truth
        if cfg.get("estimator") is not None and sd["samples"] > 0:
            probs, groups = _estimate_tables(
                cfg,
                truth.x,
                truth.y,
                truth.s,
                truth.points,
                sd["classes"],
                sd.get("groups"),
            )
            marginals = None if groups is None else truth.weights @ groups
            work = SyntheticData(
                points=truth.points,
                weights=truth.weights,
                class_probs=probs,
                group_probs=groups,
                group_marginals=marginals,
                x=truth.x,
                y=truth.y,
                s=truth.s,
                positions=truth.positions,
            )
        test = None
        if sd["samples"] > 0:
            # draws land on support points, so the trained policy covers them
            test = {
                "labels": truth.y,
                "groups": truth.s,
                "positions": truth.positions,
                "est_view": None,
                "n_groups": sd.get("groups"),
            }
        return {"family": family, "work": work, "truth": truth, "test": test}

    csv_cfg = data_cfg["csv"]
    ds = ingest_csv(
        csv_cfg["path"],
        csv_cfg["features"],
        csv_cfg["label"],
        csv_cfg.get("group"),
        seed=seed,
    )
    n_classes = int(ds.y.max()) + 1
    n_groups = None if ds.s is None else int(ds.s.max()) + 1
    x_tr, y_tr = ds.x[ds.train], ds.y[ds.train]
    s_tr = None if ds.s is None else ds.s[ds.train]
    pool = ds.x[ds.unlabeled]
    probs, groups = _estimate_tables(cfg, x_tr, y_tr, s_tr, pool, n_classes, n_groups)
    w = np.full(pool.shape[0], 1.0 / pool.shape[0])
    joint_marg = None
    if family == "eo" and groups is not None:
        joint_marg = np.einsum("i,is,iy->sy", w, groups, probs)
    work = SyntheticData(
        points=pool,
        weights=w,
        class_probs=probs,
        group_probs=groups,
        group_marginals=None if groups is None else w @ groups,
        x=np.empty((0, pool.shape[1])),
        y=np.empty(0, int),
        s=None,
        positions=np.empty(0, int),
        joint_marginals=joint_marg,
    )
    # test points get tables from the same fit, constants stay train-time
    t_probs, t_groups = _estimate_tables(
        cfg, x_tr, y_tr, s_tr, ds.x[ds.test], n_classes, n_groups
    )
    t_w = np.full(len(ds.test), 1.0 / len(ds.test))
    test_work = SyntheticData(
        points=ds.x[ds.test],
        weights=t_w,
        class_probs=t_probs,
        group_probs=t_groups,
        group_marginals=work.group_marginals,
        x=np.empty((0, pool.shape[1])),
        y=np.empty(0, int),
        s=None,
        positions=np.empty(0, int),
        joint_marginals=joint_marg,
    )
    test = {
        "labels": ds.y[ds.test],
        "groups": None if ds.s is None else ds.s[ds.test],
        "positions": None,
        "est_view": test_work,
        "n_groups": n_groups,
    }
    return {"family": family, "work": work, "truth": None, "test": test}


def _build(cfg, view):
    baseline = _baseline_for(cfg, view.class_probs)
    return (
        build_family(
            cfg["family"],
            view.class_probs,
            view.weights,
            cfg["params"],
            group_probs=view.group_probs,
            group_marginals=view.group_marginals,
            joint_marginals=view.joint_marginals,
            baseline=baseline,
        ),
        baseline,
    )


def _rows_view(view, idx):
    """Uniformly weighted row slice of a support table, marginals kept."""
    m = len(idx)
    return SyntheticData(
        points=view.points[idx],
        weights=np.full(m, 1.0 / m),
        class_probs=view.class_probs[idx],
        group_probs=None if view.group_probs is None else view.group_probs[idx],
        group_marginals=view.group_marginals,
        x=np.empty((0, view.points.shape[1])),
        y=np.empty(0, int),
        s=None,
        positions=np.empty(0, int),
        joint_marginals=view.joint_marginals,
    )


def _policy_header(built):
    if isinstance(built, FiniteInstance):
        return ["index"] + [str(lab) for lab in built.actions.labels]
    return ["index"] + [f"include_{y}" for y in range(built.n_classes)]


def _write_policy(path, built, lam, beta):
    if isinstance(built, FiniteInstance):
        clf = built.problem().gibbs(lam, beta)
        rows = [predict_proba(clf, i) for i in range(built.n)]
    else:
        clf = built.gibbs(lam, beta)
        rows = clf.proba_table()
    with open(path, "w") as fh:
        fh.write(",".join(_policy_header(built)) + "\n")
        for i, row in enumerate(rows):
            fh.write(",".join([str(i)] + [f"{v:.17g}" for v in row]) + "\n")


def _eo_test_unfairness(pi, labels, groups, n_groups):
    """Empirical per-group output gaps conditional on the label, max over labels."""
    labels = np.asarray(labels, dtype=int)
    onehot = np.eye(n_groups)[np.asarray(groups, dtype=int)]
    w = np.full(len(labels), 1.0 / len(labels))
    out = np.full(n_groups, np.nan)
    for y in np.unique(labels):
        mask = (labels == y).astype(float)
        gaps = group_unfairness(pi, onehot * mask[:, None], w, base_probs=mask)
        out = np.fmax(out, gaps)
    return out


def _evaluate_run(cfg, built, lam, beta, prep, seed, sampled):
    """Test-side metrics of the estimated policy.

    The policy always comes from estimated tables; when an exact table is
    available it only supplies the constraint oracle (measured violation
    under the true distribution) and the labels.
    """
    family = cfg["family"]
    test = prep["test"]
    if test is None:
        return evaluate_support(family, built, lam, beta, prep["work"])
    rng = np.random.default_rng((seed, SAMPLE_TAG)) if sampled else None
    truth = prep["truth"]
    plug_in = truth is not None and truth is not prep["work"]

    if family in ("set_size", "set_risk"):
        if test["positions"] is not None:
            view = _rows_view(prep["work"], test["positions"])
            true_view = _rows_view(truth, test["positions"]) if plug_in else None
        else:
            view, true_view = test["est_view"], None
        eval_built, baseline = _build(cfg, view)
        clf = eval_built.gibbs(lam, beta)
        report = evaluate_sets(
            clf, test["labels"], baseline=baseline, sampled=sampled, rng=rng
        )
        if true_view is not None:
            # violation measured with the exact per-point cost tables
            q = clf.proba_table()
            pairs = np.stack([q, 1.0 - q], axis=-1)
            true_built, _ = _build(cfg, true_view)
            vals = np.einsum(
                "i,ijya,iya->j", view.weights, true_built.cost_table, pairs
            )
            report.violations = np.maximum(vals, 0.0)
        return report

    if test["positions"] is not None:
        xs = list(test["positions"])
        prob = built.problem()
        cons = _build(cfg, truth)[0].problem().constraints if plug_in else prob.constraints
        base_all = _baseline_for(cfg, prep["work"].class_probs)
        baseline = None if base_all is None else [base_all[i] for i in xs]
    else:
        view = test["est_view"]
        eval_built, base_all = _build(cfg, view)
        xs = list(range(view.class_probs.shape[0]))
        prob = eval_built.problem()
        cons = prob.constraints
        baseline = None if base_all is None else list(base_all)
    clf = prob.gibbs(lam, beta)
    report = evaluate(
        clf,
        xs,
        list(test["labels"]),
        groups=test["groups"],
        n_groups=test["n_groups"],
        baseline=baseline,
        constraints=cons,
        sampled=sampled,
        rng=rng,
    )
    if family == "eo" and test["groups"] is not None:
        pi = np.stack([predict_proba(clf, x) for x in xs])
        report.unfairness = _eo_test_unfairness(
            pi, test["labels"], test["groups"], test["n_groups"]
        )
    return report


@click.group()
def main():
    """Post-processing pipeline for constrained classification."""


def _load_validated(config_path, need_sweep=False):
    try:
        cfg = load_config(config_path)
    except yaml.YAMLError as exc:
        click.echo(f"config error: not valid YAML: {exc}", err=True)
        sys.exit(2)
    errs = validate_config(cfg, need_sweep=need_sweep)
    if errs:
        for e in errs:
            click.echo(f"config error: {e}", err=True)
        sys.exit(2)
    return cfg


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_dir", default=None, type=click.Path())
@click.option("--seed", default=None, type=int, help="overrides the config seed")
@click.option("--passes", default=None, type=int, help="experimental: full passes over the pool instead of i.i.d. draws")
@click.option("--sampled", is_flag=True, help="evaluate with sampled actions instead of expected probabilities")
@click.option("--trace", "trace_flag", is_flag=True, help="also write the optimizer trace CSV")
def run(config_path, out_dir, seed, passes, sampled, trace_flag):
    """Fit, optimize, certify, evaluate; write artifacts to the out dir."""
    cfg = _load_validated(config_path)
    seed = cfg.get("seed", 0) if seed is None else seed
    out = out_dir or cfg.get("out", "artifacts")
    opt = cfg["optimizer"]
    try:
        prep = _prepare(cfg, seed)
        built, _ = _build(cfg, prep["work"])
        problem = built.problem() if isinstance(built, FiniteInstance) else built
        n = prep["work"].class_probs.shape[0]
        iterations = opt["iterations"]
        mode = "iid"
        if passes is not None:
            if passes < 1:
                raise ValueError(f"passes must be >= 1, got {passes}")
            iterations = passes * n
            mode = "cycle"
        stream = SampleStream(
            range(n),
            weights=None if mode == "cycle" else prep["work"].weights,
            seed=(seed, STREAM_TAG, 0),
            mode=mode,
        )
        clf, result = copt(
            problem,
            iterations,
            stream,
            variant=opt.get("variant", "default"),
            backend=None if opt.get("backend", "auto") == "auto" else opt["backend"],
            collect_trace=trace_flag,
        )
        delta_loss = delta_cost = None
        if prep["truth"] is not None and prep["work"] is not prep["truth"]:
            true_built, _ = _build(cfg, prep["truth"])
            if isinstance(built, FiniteInstance):
                tp, ep = true_built.problem(), built.problem()
                delta_loss, delta_cost = estimation_errors(
                    tp.loss, ep.loss, tp.constraints, ep.constraints,
                    range(n), prep["work"].weights,
                )
        cert = certify(
            built,
            result.lam,
            result.params.beta,
            result.alpha_cert,
            delta_loss=delta_loss,
            delta_cost=delta_cost,
        )
        report = _evaluate_run(
            cfg, built, result.lam, result.params.beta, prep, seed, sampled
        )

        os.makedirs(out, exist_ok=True)
        with open(os.path.join(out, "lambda.json"), "w") as fh:
            json.dump(
                {
                    "lam": [float(v) for v in result.lam],
                    "beta": result.params.beta,
                    "alpha": result.alpha_cert,
                    "iterations": result.params.iterations,
                    "stages": result.params.stages,
                    "variant": result.params.variant,
                    "seed": seed,
                    "backend": resolve_backend(
                        None if opt.get("backend", "auto") == "auto" else opt["backend"]
                    ),
                },
                fh,
                indent=2,
            )
            fh.write("\n")
        _write_policy(os.path.join(out, "policy.csv"), built, result.lam, result.params.beta)
        cert.save(os.path.join(out, "certificate.json"))
        report.save(os.path.join(out, "eval_report.json"))
        if trace_flag and result.trace is not None:
            write_trace(result.trace, os.path.join(out, "trace.csv"))
    except Exception as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)
    click.echo(f"artifacts written to {out}")
    sys.exit(0)


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_dir", default=None, type=click.Path())
@click.option("--seed", default=None, type=int, help="single-seed filter for resuming")
def sweep(config_path, out_dir, seed):
    """Budget-grid sweep; appends to an existing table, skipping done cells."""
    cfg = _load_validated(config_path, need_sweep=True)
    out = out_dir or cfg.get("out", "artifacts")
    sw = cfg["sweep"]
    seeds = sw.get("seeds") or list(range(sw["n_seeds"]))
    if seed is not None:
        seeds = [seed]
    opt = cfg["optimizer"]
    try:
        prep = _prepare(cfg, cfg.get("seed", 0))
        os.makedirs(out, exist_ok=True)
        baseline = _baseline_for(cfg, prep["work"].class_probs)
        extra = {
            k: v for k, v in cfg["params"].items() if k != PARAM_KEYS[cfg["family"]]
        }
        rows = run_sweep(
            prep["work"],
            cfg["family"],
            sw["grid"],
            opt["iterations"],
            seeds,
            out_path=os.path.join(out, "sweep.csv"),
            variant=opt.get("variant", "default"),
            backend=None if opt.get("backend", "auto") == "auto" else opt["backend"],
            baseline=baseline,
            extra_params=extra,
        )
    except Exception as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)
    click.echo(f"{len(rows)} new cells -> {os.path.join(out, 'sweep.csv')}")
    sys.exit(0)


@main.command()
@click.option("--instance", "instance_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_dir", default="artifacts", type=click.Path())
@click.option("--beta", "betas", multiple=True, type=float, help="temperatures for dual cross-checks")
def oracle(instance_path, out_dir, betas):
    """Exact LP solution and structure report for a small instance file."""
    try:
        inst = FiniteInstance.load(instance_path)
        lp = solve_lp_exact(inst)
    except InfeasibleInstanceError as exc:
        click.echo(f"infeasible: {exc}", err=True)
        sys.exit(3)
    except Exception as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)
    report = validate_np_structure(inst, lp, betas=betas)
    os.makedirs(out_dir, exist_ok=True)
    payload = {
        "value": lp.value,
        "lam": [float(v) for v in lp.lam],
        "pi": [[float(v) for v in row] for row in lp.pi],
        "slack": [float(v) for v in lp.slack],
        "support_mass_outside": report.support_mass_outside,
        "slackness": [float(v) for v in report.slackness],
        "dual_checks": {
            f"{b:.17g}": [float(e), float(v)]
            for b, (e, v) in sorted(report.dual_checks.items())
        },
        "ok": bool(report.ok),
    }
    path = os.path.join(out_dir, "oracle.json")
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")
    click.echo(f"value {lp.value:.17g} -> {path}")
    sys.exit(0)


@main.command(name="validate-config")
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--sweep", "need_sweep", is_flag=True, help="also require the sweep section")
def validate_config_cmd(config_path, need_sweep):
    """Check a config file and report field-level problems."""
    _load_validated(config_path, need_sweep=need_sweep)
    click.echo("config ok")
    sys.exit(0)


if __name__ == "__main__":
    main()
