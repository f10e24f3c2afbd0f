"""End-to-end reproductions of the four worked examples.

Each ``example*`` function returns ``(report, artifacts)`` where ``report``
is a JSON-ready dict of named checks and ``artifacts`` maps file names to
CSV text ready for external plotting.
"""

from __future__ import annotations

import contextlib
import io
import csv
import math

import numpy as np

from . import defaults
from .balance import balance, simulate_reduced, truncate
from .dictionary import example1_dictionary, identity_dictionary, input_dictionary, output_selector
from .dynsys import (
    example1_system,
    example3_system,
    linear_system,
    linearize,
    linear_observability_gramian,
    simulate,
    sin_ramp,
)
from .edmd import (
    build_snapshots,
    channel_errors,
    fit_koopman,
    fit_koopman_with_input,
    generate_training_data,
    grid_initial_conditions,
    predict,
    prediction_error,
)
from .errors import KoopgramError
from .gramians import (
    controllability_gramian,
    normalize,
    observability_gramian,
    phi_c,
    project,
)


@contextlib.contextmanager
def stage(name):
    try:
        yield
    except KoopgramError as exc:
        raise KoopgramError(f"demo stage '{name}' failed: {exc}") from exc
    except (ValueError, np.linalg.LinAlgError) as exc:
        raise KoopgramError(f"demo stage '{name}' failed: {exc}") from exc


class Checks:
    """Collects named checks against the thresholds table."""

    def __init__(self, thresholds):
        self.thresholds = thresholds
        self.items = {}

    def add(self, name, value, passed=None, threshold=None):
        default, comparison, provenance = self.thresholds[name]
        threshold = default if threshold is None else threshold
        if passed is None:
            if comparison == "<=":
                passed = value <= threshold
            elif comparison == ">=":
                passed = value >= threshold
            else:
                raise ValueError(f"check {name} needs an explicit verdict")
        self.items[name] = {
            "passed": bool(passed),
            "value": _jsonable(value),
            "threshold": _jsonable(threshold),
            "comparison": comparison,
            "provenance": provenance,
        }

    @property
    def all_passed(self):
        return all(c["passed"] for c in self.items.values())


def _jsonable(v):
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, float) and not math.isfinite(v):
        return str(v)
    return v


def _cell(v):
    if isinstance(v, (int, np.integer)):
        return str(v)
    return "" if math.isnan(v) else format(float(v), ".17g")


def _table(header, columns):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in zip(*columns):
        w.writerow([_cell(v) for v in row])
    return buf.getvalue()


def _training_grid(cfg):
    return grid_initial_conditions(cfg["train_lo"], cfg["train_hi"], cfg["train_grid"])


def _report(example, seed, cfg, checks, info):
    return {
        "type": "demo-report",
        "example": example,
        "seed": seed,
        "thresholds_version": defaults.THRESHOLDS_VERSION,
        "config": _jsonable({k: v for k, v in cfg.items()}),
        "passed": checks.all_passed,
        "checks": _jsonable(checks.items),
        "info": _jsonable(info),
    }


# ---------------------------------------------------------------------------


def example1(seed=0, thresholds=None, **overrides):
    cfg = {**defaults.DEMO, **overrides}
    checks = Checks(thresholds or defaults.THRESHOLDS)
    x0 = np.asarray(cfg["x0"], dtype=float)
    with stage("data"):
        sys = example1_system()
        d, W, P = example1_dictionary(sys)
        trajs = generate_training_data(sys, _training_grid(cfg), cfg["train_length"])
        truth = simulate(sys, x0, None, cfg["example1_test_horizon"])
    with stage("fit"):
        model = fit_koopman(build_snapshots(trajs, d), cfg["zeta"], dictionary=d, W_h=W, P_x=P)
    with stage("predict"):
        rep = prediction_error(model, truth, "one-step", channels="state")
        rep_out = prediction_error(model, truth, "one-step", channels="output")
        pred = predict(model, x0, truth.horizon, mode="one-step", truth=truth)
    checks.add("example1.one_step_eps", rep.total_error)
    with stage("gramians"):
        H = cfg["example1_obs_horizon"]
        g = normalize(project(observability_gramian(model, H), P))
        one_step = project(observability_gramian(model, 1), P)
        lin = linearize(sys, x0)
        lin_g = linear_observability_gramian(lin, H)
    X = g.matrix
    pattern_ok = bool(X[0, 0] > 0 and X[1, 1] > 0 and X[0, 1] < 0 and X[1, 0] < 0)
    checks.add("example1.proj_obs_sign_pattern", X, passed=pattern_ok,
               threshold=[["+", "-"], ["-", "+"]])
    checks.add("example1.proj_obs_diag_order", [X[0, 0], X[1, 1]], passed=bool(X[0, 0] > X[1, 1]),
               threshold="X[0,0] > X[1,1]")
    ref = np.array(defaults.REFERENCE_PROJ_OBS)
    info = {
        "training_trajectories": len(trajs),
        "snapshots": sum(t.horizon for t in trajs),
        "fit_residual": model.fit_residual,
        "one_step_eps_outputs": rep_out.total_error,
        "per_channel_state_errors": rep.per_channel_errors,
        "proj_obs_horizon": H,
        "proj_obs_normalized": X,
        "proj_obs_scale": g.scale,
        "proj_obs_reference": ref,
        "proj_obs_reference_maxdiff": float(np.max(np.abs(X - ref))),
        "proj_obs_reference_tol": defaults.REFERENCE_PROJ_OBS_TOL,
        "proj_obs_1step_abs_max": float(np.max(np.abs(one_step.matrix))),
        "linearized_A": lin.A,
        "linearized_C": lin.C,
        "linearized_obs_gramian": lin_g,
        "spectral_radius_K": float(np.max(np.abs(np.linalg.eigvals(model.K_x)))),
    }
    t = truth.dt_index
    csv_text = _table(["t", "x1", "x2", "x1_pred", "x2_pred"],
                      [t, truth.states[:, 0], truth.states[:, 1], pred.states[:, 0], pred.states[:, 1]])
    return _report(1, seed, cfg, checks, info), {"example1_prediction.csv": csv_text}


def _random_stable(rng, n, p):
    A = rng.standard_normal((n, n))
    A *= rng.uniform(0.3, 0.9) / max(np.abs(np.linalg.eigvals(A)))
    C = rng.standard_normal((p, n))
    return A, C


def example2(seed=0, thresholds=None, **overrides):
    cfg = {**defaults.DEMO, **overrides}
    checks = Checks(thresholds or defaults.THRESHOLDS)
    rng = np.random.default_rng(seed)
    n, p = cfg["example2_state_dim"], cfg["example2_output_dim"]
    d = identity_dictionary(n)
    worst = 0.0
    per_system = []
    with stage("linear-equivalence"):
        for _ in range(cfg["example2_systems"]):
            A, C = _random_stable(rng, n, p)
            sys = linear_system(A, C=C)
            trajs = [simulate(sys, rng.standard_normal(n), None, 10) for _ in range(n + 2)]
            model = fit_koopman(build_snapshots(trajs, d), 0.0, dictionary=d,
                                W_h=output_selector(d, sys))
            lin = linearize(sys, rng.standard_normal(n))
            diffs = []
            for H in (math.inf, cfg["example2_finite_horizon"]):
                Xk = observability_gramian(model, H).matrix
                Xl = linear_observability_gramian(lin, H)
                diffs.append(float(np.max(np.abs(Xk - Xl))))
            per_system.append(max(diffs))
            worst = max(worst, max(diffs))
    checks.add("example2.linear_equivalence_maxdiff", worst)
    return _report(2, seed, cfg, checks, {"per_system_maxdiff": per_system}), {}


def _example3_pipeline(cfg):
    x0 = np.asarray(cfg["x0"], dtype=float)
    with stage("data"):
        sys = example3_system()
        signal = sin_ramp(sys.params["mu"])
        d, W, P = example1_dictionary(sys)
        idict = input_dictionary("sin_augmented", 1)
        trajs = generate_training_data(sys, _training_grid(cfg), cfg["train_length"], signal)
        truth = simulate(sys, x0, signal, cfg["example3_horizon"])
    with stage("fit"):
        snaps = build_snapshots(trajs, d, idict)
        model = fit_koopman_with_input(snaps, cfg["zeta"], dictionary=d, input_dictionary=idict,
                                       W_h=W, P_x=P)
    return sys, signal, d, idict, P, trajs, truth, model


def example3(seed=0, thresholds=None, **overrides):
    cfg = {**defaults.DEMO, **overrides}
    checks = Checks(thresholds or defaults.THRESHOLDS)
    sys, signal, d, idict, P, trajs, truth, model = _example3_pipeline(cfg)
    with stage("predict"):
        ctrl = prediction_error(model, truth, "one-step", use_input=True, channels="state")
        open_ = prediction_error(model, truth, "one-step", use_input=False, channels="state")
        ctrl_out = prediction_error(model, truth, "one-step", use_input=True, channels="output")
        pc = predict(model, truth.states[0], truth.horizon, mode="one-step", truth=truth)
        po = predict(model, truth.states[0], truth.horizon, mode="one-step", truth=truth,
                     use_input=False)
    checks.add("example3.with_control_eps", ctrl.total_error)
    checks.add("example3.open_loop_eps", open_.total_error)
    with stage("gramians"):
        Xc = project(controllability_gramian(model, cfg["example3_ctrl_horizon"]), P).matrix
        phi = phi_c(model, 0).matrix
    ratio = float(Xc[1, 1] / Xc[0, 0]) if Xc[0, 0] != 0 else math.inf
    checks.add("example3.ctrl_gram_ratio", ratio)
    checks.add("example3.phi_c_x2_row_max", float(np.max(np.abs(phi[1]))))
    info = {
        "training_trajectories": len(trajs),
        "fit_residual": model.fit_residual,
        "with_control_eps_outputs": ctrl_out.total_error,
        "proj_ctrl_gramian": Xc,
        "proj_ctrl_horizon": cfg["example3_ctrl_horizon"],
        "phi_c_0": phi,
        "phi_c_x1_row": phi[0],
    }
    t = truth.dt_index
    csv_text = _table(
        ["t", "u1", "x1", "x2", "x1_ctrl", "x2_ctrl", "x1_open", "x2_open"],
        [t, np.append(truth.inputs[:, 0], np.nan), truth.states[:, 0], truth.states[:, 1],
         pc.states[:, 0], pc.states[:, 1], po.states[:, 0], po.states[:, 1]],
    )
    return _report(3, seed, cfg, checks, info), {"example3_prediction.csv": csv_text}


def example4(seed=0, thresholds=None, **overrides):
    cfg = {**defaults.DEMO, **overrides}
    checks = Checks(thresholds or defaults.THRESHOLDS)
    sys, signal, d, idict, P, trajs, truth, model = _example3_pipeline(cfg)
    H = cfg["example4_gramian_horizon"]
    T = cfg["example3_horizon"]
    with stage("gramians"):
        Xc = controllability_gramian(model, H)
        Xo = observability_gramian(model, H)
    with stage("balance"):
        bal = balance(Xc, Xo, model)
    hsv = bal.hsv
    checks.add("example4.hsv_gap_9_10", float(hsv[8] / hsv[9]) if hsv[9] > 0 else math.inf)
    with stage("reduce"):
        full = predict(model, truth.states[0], T, signal, mode="free-run").outputs
        errors, vs_truth, bounds, outputs = {}, {}, {}, {}
        for r in cfg["example4_orders"]:
            rm = truncate(bal, r)
            y = simulate_reduced(rm, truth.states[0], d, idict, signal, T)
            outputs[r] = y
            errors[r] = float(channel_errors(y, full).sum())
            vs_truth[r] = float(channel_errors(y, truth.outputs).sum())
            bounds[r] = (rm.bound_lower, rm.bound_upper, rm.advisory_only)
    orders = list(cfg["example4_orders"])
    seq = [errors[r] for r in orders]
    checks.add("example4.reduced_error_monotone", seq,
               passed=all(a >= b for a, b in zip(seq, seq[1:])), threshold="nonincreasing in r")
    checks.add("example4.full_order_error", errors[orders[-1]])
    if 2 in errors:
        checks.add("example4.reduced_order2_error", errors[2], passed=errors[2] <= bounds[2][1],
                   threshold=bounds[2][1])
    info = {
        "hsv": hsv,
        "gramian_horizon": H,
        "regularization_used": bal.regularization_used,
        "regularization_shift": bal.regularization_shift,
        "realization_rank": bal.rank,
        "balanced_stable": bal.stable,
        "reduced_error_vs_full": {str(r): errors[r] for r in orders},
        "reduced_error_vs_truth": {str(r): vs_truth[r] for r in orders},
        "bounds": {str(r): {"lower": b[0], "upper": b[1], "advisory_only": b[2]}
                   for r, b in bounds.items()},
    }
    t = np.arange(T + 1)
    cols, header = [t, truth.outputs[:, 0], truth.outputs[:, 1], full[:, 0], full[:, 1]], \
        ["t", "y1", "y2", "y1_full", "y2_full"]
    for r in orders:
        cols += [outputs[r][:, 0], outputs[r][:, 1]]
        header += [f"y1_r{r}", f"y2_r{r}"]
    hsv_csv = _table(["i", "hsv"], [np.arange(1, hsv.size + 1), hsv])
    return _report(4, seed, cfg, checks, info), {
        "example4_reduced.csv": _table(header, cols),
        "example4_hsv.csv": hsv_csv,
    }


EXAMPLES = {1: example1, 2: example2, 3: example3, 4: example4}


def run_demo(example: int, seed: int = 0, thresholds=None, **overrides):
    if example not in EXAMPLES:
        raise ValueError(f"unknown example {example}; choose from 1-4")
    return EXAMPLES[example](seed=seed, thresholds=thresholds, **overrides)
