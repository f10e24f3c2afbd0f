"""Command-line front end: simulate, fit, gramians, balance, reduce, demo.

Exit codes: 0 success, 1 computational error, 2 usage or input error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

import numpy as np

from . import defaults
from .balance import (
    balance,
    balanced_from_dict,
    balanced_to_dict,
    reduced_to_dict,
    truncate,
)
from .demo import run_demo
from .dictionary import (
    dictionary_from_spec,
    input_dictionary_from_spec,
    output_selector,
    state_projector,
)
from .dynsys import (
    input_from_config,
    read_trajectory_csv,
    simulate,
    system_from_config,
    write_trajectory_csv,
)
from .edmd import (
    build_snapshots,
    fit_koopman,
    fit_koopman_with_input,
    model_from_dict,
    model_to_dict,
    regress_output_selector,
)
from .errors import KoopgramError
from .gramians import (
    controllability_gramian,
    gramian_from_dict,
    gramian_to_dict,
    normalize,
    observability_gramian,
    parse_horizon,
    project,
)

log = logging.getLogger("koopgram")


class UsageError(Exception):
    """Bad arguments or unreadable/malformed input files (exit code 2)."""


class _JsonFormatter(logging.Formatter):
    def format(self, record):
        return json.dumps({"level": record.levelname, "logger": record.name,
                           "message": record.getMessage()})


def _setup_logging(quiet, json_logs):
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(_JsonFormatter() if json_logs else
                         logging.Formatter("%(levelname)s %(name)s: %(message)s"))
    root = logging.getLogger("koopgram")
    root.handlers[:] = [handler]
    root.setLevel(logging.WARNING if quiet else logging.INFO)
    root.propagate = False


# ---------------------------------------------------------------------------
# input helpers


def _require_file(path):
    if not os.path.isfile(path):
        raise UsageError(f"input file not found: {path}")
    if not os.access(path, os.R_OK):
        raise UsageError(f"input file not readable: {path}")


def _require_out(path):
    parent = os.path.dirname(os.path.abspath(path))
    if not os.path.isdir(parent):
        raise UsageError(f"output directory does not exist: {parent}")


def _read_json_text(text, source):
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise UsageError(f"{source}: malformed JSON at line {exc.lineno}, column {exc.colno} "
                         f"(offset {exc.pos}): {exc.msg}") from None


def _load_json(path):
    with open(path, encoding="utf-8") as fh:
        return _read_json_text(fh.read(), path)


def _json_arg(value):
    """Inline JSON (starting with '{') or a path to a JSON file."""
    if value.lstrip().startswith("{"):
        return _read_json_text(value, "<argument>")
    _require_file(value)
    return _load_json(value)


def _write_json(doc, path):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(json.dumps(doc, indent=2) + "\n")


def _floats(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


class _Flatten(argparse.Action):
    def __call__(self, parser, namespace, values, option_string=None):
        setattr(namespace, self.dest, [v for group in values for v in group])


def _positive_int(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}")
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {v}")
    return v


def _horizon(text):
    try:
        return parse_horizon(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc))


# ---------------------------------------------------------------------------
# commands


def cmd_simulate(args):
    cfg = {}
    if args.config:
        _require_file(args.config)
        cfg = _load_json(args.config)
    _require_out(args.out)
    if args.system:
        cfg["system"] = args.system
    if args.params:
        cfg["params"] = {**(cfg.get("params") or {}), **_json_arg(args.params)}
    if args.x0 is not None:
        cfg["x0"] = args.x0
    if args.T is not None:
        cfg["horizon"] = args.T
    if args.input:
        cfg["input"] = {"kind": args.input, **({"mu": args.mu} if args.mu is not None else {})}
    for key in ("system", "x0", "horizon"):
        if key not in cfg:
            raise UsageError(f"missing {key} (flag or --config)")
    try:
        sys_ = system_from_config(cfg)
    except KeyError as exc:
        raise UsageError(str(exc.args[0])) from None
    inp = cfg.get("input")
    if inp is None and sys_.name == "example3":
        inp = {"kind": "sin_ramp", "mu": sys_.params["mu"]}
    traj = simulate(sys_, cfg["x0"], input_from_config(inp, sys_.input_dim), int(cfg["horizon"]))
    write_trajectory_csv(traj, args.out)
    log.info("wrote %d rows to %s", traj.horizon + 1, args.out)


def cmd_fit(args):
    for p in args.traj:
        _require_file(p)
    _require_out(args.out)
    dspec = _json_arg(args.dict)
    trajs = []
    for p in args.traj:
        try:
            trajs.append(read_trajectory_csv(p))
        except ValueError as exc:
            raise UsageError(str(exc)) from None
    dspec.setdefault("n", trajs[0].states.shape[1])
    try:
        d = dictionary_from_spec(dspec)
    except KeyError as exc:
        raise UsageError(f"bad dictionary spec: missing or unknown {exc.args[0]}") from None
    if args.system:
        sys_ = system_from_config(_json_arg(args.system) if args.system.lstrip().startswith("{")
                                  else {"system": args.system})
        W = output_selector(d, sys_).matrix
    else:
        W = regress_output_selector(trajs, d)
    meta = {"seed": args.seed}
    if args.input_dict:
        idict = input_dictionary_from_spec(_json_arg(args.input_dict), trajs[0].inputs.shape[1])
        snaps = build_snapshots(trajs, d, idict)
        model = fit_koopman_with_input(snaps, args.zeta, dictionary=d, input_dictionary=idict,
                                       W_h=W, P_x=state_projector(d))
    else:
        model = fit_koopman(build_snapshots(trajs, d), args.zeta, dictionary=d, W_h=W,
                            P_x=state_projector(d))
    doc = model_to_dict(model)
    doc["meta"] = meta
    _write_json(doc, args.out)
    log.info("fit %d-dim model from %d trajectories, residual %.3g", model.lifted_dim, len(trajs),
             model.fit_residual)


def cmd_gramians(args):
    _require_file(args.model)
    _require_out(args.out)
    model = model_from_dict(_load_json(args.model))
    g = (observability_gramian if args.kind == "obs" else controllability_gramian)(model, args.horizon)
    if args.project == "state":
        if model.P_x is None:
            raise KoopgramError("model has no state projector")
        g = project(g, model.P_x)
    if args.normalize:
        g = normalize(g)
    _write_json(gramian_to_dict(g, seed=args.seed), args.out)


def cmd_balance(args):
    for p in (args.model, args.xc, args.xo):
        _require_file(p)
    _require_out(args.out)
    model = model_from_dict(_load_json(args.model))
    Xc = gramian_from_dict(_load_json(args.xc))
    Xo = gramian_from_dict(_load_json(args.xo))
    if Xc.kind != "controllability" or Xo.kind != "observability":
        raise UsageError("--xc must be a controllability gramian and --xo an observability gramian")
    if Xc.normalized or Xo.normalized:
        raise UsageError("balancing needs unnormalized gramians")
    bal = balance(Xc, Xo, model, args.eps_reg)
    _write_json(balanced_to_dict(bal, seed=args.seed), args.out)
    log.info("hsv: %s", np.array2string(bal.hsv, precision=3))


def cmd_reduce(args):
    _require_file(args.bal)
    _require_out(args.out)
    bal = balanced_from_dict(_load_json(args.bal))
    rm = truncate(bal, args.order)
    _write_json(reduced_to_dict(rm, seed=args.seed), args.out)


def cmd_demo(args):
    _require_out(args.out)
    if args.csv_dir and not os.path.isdir(args.csv_dir):
        raise UsageError(f"CSV directory does not exist: {args.csv_dir}")
    thresholds = dict(defaults.THRESHOLDS)
    for item in args.threshold or []:
        name, _, value = item.partition("=")
        if name not in thresholds or not value:
            raise UsageError(f"bad --threshold {item!r}; known names: {', '.join(thresholds)}")
        _, comparison, provenance = thresholds[name]
        try:
            thresholds[name] = (float(value), comparison, provenance)
        except ValueError:
            raise UsageError(f"threshold value must be a number: {item!r}") from None
    overrides = {"x0": tuple(args.x0)} if args.x0 is not None else {}
    report, artifacts = run_demo(args.example, args.seed, thresholds, **overrides)
    _write_json(report, args.out)
    if args.csv_dir:
        for name, text in artifacts.items():
            with open(os.path.join(args.csv_dir, name), "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
    for name, chk in report["checks"].items():
        log.info("%s %s value=%s threshold=%s", "PASS" if chk["passed"] else "FAIL", name,
                 chk["value"], chk["threshold"])
    if not report["passed"]:
        log.warning("example %d: some checks failed", args.example)


# ---------------------------------------------------------------------------


def build_parser():
    def add_common(p, default):
        p.add_argument("--seed", type=int, default=0 if default else argparse.SUPPRESS,
                       help="seed for randomized data (recorded in artifacts)")
        p.add_argument("--quiet", action="store_true",
                       default=False if default else argparse.SUPPRESS,
                       help="only log warnings and errors")
        p.add_argument("--json-logs", action="store_true",
                       default=False if default else argparse.SUPPRESS,
                       help="emit log records as JSON lines")

    # accepted before or after the subcommand
    common = argparse.ArgumentParser(add_help=False)
    add_common(common, False)
    parser = argparse.ArgumentParser(prog="koopgram", description=__doc__.splitlines()[0])
    add_common(parser, True)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[common], help="simulate a built-in system to CSV")
    p.add_argument("--system", choices=["example1", "example3", "linear"])
    p.add_argument("--config", help="system configuration JSON file")
    p.add_argument("--params", help="coefficient overrides (inline JSON or file)")
    p.add_argument("--x0", type=_floats, nargs="+", action=_Flatten, help="initial state, e.g. 0.3 0.3 or 0.3,0.3")
    p.add_argument("--T", "--horizon", dest="T", type=_positive_int)
    p.add_argument("--input", choices=["zero", "sin_ramp"])
    p.add_argument("--mu", type=float)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", parents=[common], help="fit a Koopman model from trajectory CSVs")
    p.add_argument("--traj", nargs="+", required=True)
    p.add_argument("--dict", required=True, help="dictionary spec (inline JSON or file)")
    p.add_argument("--input-dict", help="input dictionary spec; enables the with-input fit")
    p.add_argument("--system", help="system name or config, used to build W_h exactly")
    p.add_argument("--zeta", type=float, default=0.0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("gramians", parents=[common], help="observability/controllability gramians")
    p.add_argument("--model", required=True)
    p.add_argument("--kind", choices=["obs", "ctrl"], required=True)
    p.add_argument("--horizon", type=_horizon, required=True, help="integer or 'inf'")
    p.add_argument("--project", choices=["none", "state"], default="none")
    p.add_argument("--normalize", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gramians)

    p = sub.add_parser("balance", parents=[common], help="balance a gramian pair")
    p.add_argument("--model", required=True)
    p.add_argument("--xc", required=True)
    p.add_argument("--xo", required=True)
    p.add_argument("--eps-reg", type=float, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_balance)

    p = sub.add_parser("reduce", parents=[common], help="truncate a balanced realization")
    p.add_argument("--bal", required=True)
    p.add_argument("--order", type=_positive_int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_reduce)

    p = sub.add_parser("demo", parents=[common], help="reproduce a worked example")
    p.add_argument("--example", type=int, choices=[1, 2, 3, 4], required=True)
    p.add_argument("--x0", type=_floats, nargs="+", action=_Flatten, help="initial state, e.g. 0.3 0.3 or 0.3,0.3")
    p.add_argument("--out", required=True)
    p.add_argument("--csv-dir")
    p.add_argument("--threshold", action="append", metavar="NAME=VALUE")
    p.set_defaults(func=cmd_demo)
    return parser


def _glue_vectors(argv):
    """``--x0 -0.2,0.1`` would read as a flag; rewrite it to ``--x0=-0.2,0.1``."""
    out, i = [], 0
    while i < len(argv):
        tok = argv[i]
        if tok == "--x0" and i + 1 < len(argv) and "," in argv[i + 1]:
            out.append(f"--x0={argv[i + 1]}")
            i += 2
            continue
        out.append(tok)
        i += 1
    return out


def run(argv=None) -> int:
    parser = build_parser()
    argv = _glue_vectors(list(sys.argv[1:] if argv is None else argv))
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    _setup_logging(args.quiet, args.json_logs)
    try:
        args.func(args)
    except UsageError as exc:
        print(f"koopgram {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except (KoopgramError, ValueError, KeyError, np.linalg.LinAlgError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"koopgram {args.command}: {msg}", file=sys.stderr)
        return 1
    return 0


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
