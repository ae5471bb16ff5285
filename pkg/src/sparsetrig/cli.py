"""Command-line front end: ``sparsetrig build|refine|eval|study|report-anisotropy``.

Exit codes: 0 success, 2 configuration or input error, 3 model (oracle)
failure, 4 internal error.
"""

import argparse
import json
import logging
import os
import sys
import tempfile

import numpy as np

from . import adaptive, anisotropy, metrics
from .adaptive import BudgetError, RefinementState
from .index_sets import LowerSet
from .model_client import ExternalModelSpec, external_oracle
from .models import parse_model
from .sparse_grid import OracleError, SparseGrid

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_ORACLE = 3
EXIT_INTERNAL = 4

DEFAULT_BUDGET = 10_000
DEFAULT_L0 = 3.0

log = logging.getLogger("sparsetrig")


class ConfigError(Exception):
    pass


# ---------------------------------------------------------------- helpers

def _space(name):
    key = name.replace("-", "_")
    if key not in anisotropy.SPACES:
        raise ConfigError(f"unknown space {name!r}; use hyperbolic or total-degree")
    return key


def _floats(text, what):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"could not parse {what} {text!r}") from None


def _domain(text, dim):
    """``a:b`` (all dimensions) or ``a1:b1,a2:b2,...``."""
    if text is None:
        return [(0.0, 1.0)] * dim
    parts = text.split(",")
    try:
        pairs = [tuple(float(v) for v in p.split(":")) for p in parts]
    except ValueError:
        raise ConfigError(f"could not parse domain {text!r}") from None
    if any(len(p) != 2 for p in pairs):
        raise ConfigError(f"domain intervals must look like a:b, got {text!r}")
    if len(pairs) == 1:
        pairs = pairs * dim
    if len(pairs) != dim:
        raise ConfigError(f"domain has {len(pairs)} intervals for dimension {dim}")
    return pairs


def model_config(args):
    """The JSON-serializable description of the model stored with each grid."""
    if args.model in (None, "external"):
        if not (args.command or args.exchange_dir):
            raise ConfigError("--model is required (a built-in name, or external with --command)")
        if not args.dim:
            raise ConfigError("external models need --dim")
        return {
            "kind": "external", "command": args.command, "exchange_dir": args.exchange_dir,
            "dim": args.dim, "domain": _domain(args.domain, args.dim),
            "batch_size": args.batch_size, "timeout": args.timeout, "retries": args.retries,
        }
    try:
        model = parse_model(args.model)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    if args.dim and args.dim != model.dim:
        raise ConfigError(f"model {args.model} is {model.dim}-dimensional, --dim says {args.dim}")
    return {"kind": "builtin", "name": args.model, "noise": args.noise, "seed": args.seed}


def make_oracle(config, args=None):
    jobs = getattr(args, "jobs", 1) or 1
    if config["kind"] == "builtin":
        model = parse_model(config["name"])
        return model.oracle(noise=config.get("noise") or 0.0, seed=config.get("seed"))
    spec = ExternalModelSpec(
        command=config.get("command"), dim=config["dim"],
        domain=[tuple(p) for p in config["domain"]], batch_size=config.get("batch_size", 1000),
        timeout=config.get("timeout", 600.0), retries=config.get("retries", 2),
        exchange_dir=config.get("exchange_dir"), keep_io=bool(getattr(args, "keep_io", False)),
        work_dir=getattr(args, "work_dir", None), jobs=jobs)
    return external_oracle(spec)


def _write_atomic(path, text):
    path = os.fspath(path)
    fd, tmp = tempfile.mkstemp(prefix=".tmp-", dir=os.path.dirname(os.path.abspath(path)))
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _history_path(args, grid_path):
    return args.history or grid_path + ".history.jsonl"


def _append_history(path, records):
    with open(path, "a", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec) + "\n")


def _run_settings(args, config):
    alpha = _floats(args.alpha, "alpha") if args.alpha else None
    if args.mode == adaptive.ANALYTIC and alpha is None:
        model_alpha = parse_model(config["name"]).alpha if config["kind"] == "builtin" else None
        if model_alpha is None:
            raise ConfigError("analytic mode requires --alpha")
        alpha = list(model_alpha)
    if args.budget is not None and args.budget < 1:
        raise ConfigError(f"budget must be positive, got {args.budget}")
    return {"space": _space(args.space), "mode": args.mode, "alpha": alpha,
            "l0": args.l0, "budget": DEFAULT_BUDGET if args.budget is None else args.budget,
            "seed": args.seed,
            "min_new_nodes": args.min_new_nodes}


def _save_state(path, state, config, settings):
    extra = {"lambda": state.lam.to_json(), "model": config, "settings": settings}
    state.grid.save(path, extra)


def _load(path):
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
        grid = SparseGrid.from_json(data)
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise ConfigError(f"cannot read grid file {path}: {exc}") from None
    lam = LowerSet.from_json(data["lambda"], grid.dim) if "lambda" in data else None
    return grid, lam, data.get("model"), data.get("settings", {})


def _manifest(args, config, settings, path):
    manifest = {"command": args.command_name, "model": config, **settings, "grid": path}
    _write_atomic(path + ".manifest.json", json.dumps(manifest, indent=2) + "\n")


# ---------------------------------------------------------------- subcommands

def cmd_build(args):
    config = model_config(args)
    settings = _run_settings(args, config)
    oracle = make_oracle(config, args)
    if oracle.dim < 1:
        raise ConfigError("dimension must be positive")
    try:
        state = adaptive.init_isotropic(oracle.dim, settings["l0"], oracle, settings["space"],
                                        budget=settings["budget"])
    except (BudgetError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    _save_state(args.out, state, config, settings)
    _manifest(args, config, settings, args.out)
    print(f"built {args.out}: {state.node_count} nodes, {len(state.grid.theta)} tensors")
    return EXIT_OK


def cmd_refine(args):
    grid, lam, config, settings = _load(args.grid)
    if lam is None or config is None:
        raise ConfigError(f"{args.grid} has no refinement metadata (not written by build)")
    # command-line flags override the stored settings
    for key, flag in (("space", "space"), ("mode", "mode"), ("alpha", "alpha"),
                      ("budget", "budget"), ("min_new_nodes", "min_new_nodes")):
        value = getattr(args, flag)
        if value is not None:
            settings[key] = _space(value) if key == "space" else value
    if isinstance(settings.get("alpha"), str):
        settings["alpha"] = _floats(settings["alpha"], "alpha")
    settings.setdefault("space", anisotropy.HYPERBOLIC)
    settings.setdefault("mode", adaptive.ADAPTIVE)
    settings.setdefault("min_new_nodes", 1)
    if settings.get("budget") is None:
        settings["budget"] = DEFAULT_BUDGET
    if settings["mode"] == adaptive.ANALYTIC and not settings.get("alpha"):
        raise ConfigError("analytic mode requires --alpha")
    if settings["alpha"] is not None and len(settings["alpha"]) != grid.dim:
        raise ConfigError(f"alpha has {len(settings['alpha'])} components for dimension {grid.dim}")
    oracle = make_oracle(config, args)
    state = RefinementState(grid=grid, lam=lam, budget=int(settings["budget"]),
                            space=settings["space"], oracle=oracle)
    history_path = _history_path(args, args.grid)
    done = 0
    offset = _count_lines(history_path)

    def checkpoint(st):
        nonlocal done
        rec = dict(st.history[-1])
        rec["iteration"] += offset
        _save_state(args.grid, st, config, settings)
        _append_history(history_path, [rec])
        done += 1

    try:
        state = adaptive.run(state, settings["mode"], settings.get("alpha"),
                             settings["min_new_nodes"], callback=checkpoint)
    except OracleError:
        print(f"refine stopped after {done} iteration(s); {args.grid} holds the last good grid",
              file=sys.stderr)
        raise
    print(f"refined {args.grid}: {done} iteration(s), {state.node_count} nodes")
    return EXIT_OK


def _count_lines(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return sum(1 for line in fh if line.strip())
    except FileNotFoundError:
        return 0


def read_points(text, dim):
    rows = []
    for n, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        fields = line.split(",")
        if len(fields) != dim:
            raise ConfigError(f"row {n}: expected {dim} values, got {len(fields)}")
        try:
            row = [float(v) for v in fields]
        except ValueError:
            raise ConfigError(f"row {n}: non-numeric value in {line.strip()!r}") from None
        if not all(np.isfinite(row)):
            raise ConfigError(f"row {n}: non-finite coordinate")
        rows.append(row)
    return np.array(rows, dtype=float).reshape(-1, dim)


def cmd_eval(args):
    grid, _, config, _ = _load(args.grid)
    if config and config.get("kind") == "builtin":
        domain = parse_model(config["name"]).domain
    elif config:
        domain = [tuple(p) for p in config["domain"]]
    else:
        domain = [(0.0, 1.0)] * grid.dim
    try:
        with open(args.points, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read points file: {exc}") from None
    points = read_points(text, grid.dim)
    lo = np.array([a for a, _ in domain])
    hi = np.array([b for _, b in domain])
    if args.clamp:
        points = np.clip(points, lo, hi)
    else:
        outside = np.any((points < lo) | (points > hi), axis=1)
        if outside.any():
            row = int(np.argmax(outside)) + 1
            raise ConfigError(f"row {row}: point outside the domain {domain} (use --clamp)")
    values = grid.evaluate((points - lo) / (hi - lo)) if len(points) else np.zeros(0)
    body = "".join(f"{v:.17g}\n" for v in values)
    if args.out:
        _write_atomic(args.out, body)
    else:
        sys.stdout.write(body)
    return EXIT_OK


STUDY_MODES = ("adaptive", "analytic", "isotropic", "isotropic-total-degree", "tensor")


def _study_one(tag, model, args, validation, reference):
    oracle = model.oracle(noise=args.noise, seed=args.seed)
    budget = args.budget or DEFAULT_BUDGET

    def errors(grid):
        return metrics.error_metrics(grid, oracle, validation, reference)

    if tag == "tensor":
        _, history = adaptive.run_full_tensor(model.dim, oracle, budget, callback=errors)
        return history
    space = anisotropy.TOTAL_DEGREE if tag.endswith("total-degree") else _space(args.space)
    mode = tag.split("-")[0]
    alpha = _floats(args.alpha, "alpha") if args.alpha else model.alpha
    if mode == adaptive.ANALYTIC and alpha is None:
        raise ConfigError(f"model {model.name} has no known anisotropy; pass --alpha")
    try:
        state = adaptive.init_isotropic(model.dim, args.l0, oracle, space, budget=budget)
    except (BudgetError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    first = {"iteration": 0, "node_count": state.node_count, "alpha_used": [1.0] * model.dim,
             **errors(state.grid)}
    state = adaptive.run(state, mode, alpha, args.min_new_nodes,
                         callback=lambda st: errors(st.grid))
    return [first] + state.history


def cmd_study(args):
    if not args.model or args.model == "external":
        raise ConfigError("study needs a built-in model (exact reference values)")
    try:
        model = parse_model(args.model)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    tags = [t.strip() for t in args.modes.split(",") if t.strip()]
    for tag in tags:
        if tag not in STUDY_MODES:
            raise ConfigError(f"unknown study mode {tag!r}; choose from {', '.join(STUDY_MODES)}")
    os.makedirs(args.out, exist_ok=True)
    validation = metrics.ValidationSet(model.domain, size=args.validation_size, seed=args.seed)
    reference = model.oracle().evaluate_domain(validation.points)
    summary = {}
    for tag in tags:
        history = _study_one(tag, model, args, validation, reference)
        path = os.path.join(args.out, f"{tag}.csv")
        metrics.write_study_csv(path, history, model.dim)
        final = history[-1] if history else {}
        summary[tag] = {"nodes": final.get("node_count"), "max_error": final.get("max_error"),
                        "rmse": final.get("rmse"), "csv": path}
        print(f"{tag:>24}: {final.get('node_count')} nodes, max error {final.get('max_error')}")
    _write_atomic(os.path.join(args.out, "summary.json"), json.dumps(summary, indent=2) + "\n")
    return EXIT_OK


def cmd_report_anisotropy(args):
    grid, _, config, settings = _load(args.grid)
    space = _space(args.space) if args.space else settings.get("space", anisotropy.HYPERBOLIC)
    try:
        est = anisotropy.estimate(grid.weights, space, labels=grid.nodes)
    except (anisotropy.UnderdeterminedFit, anisotropy.RankDeficientFit) as exc:
        raise ConfigError(f"cannot fit anisotropy: {exc}") from None
    report = est.report()
    report["nodes"] = grid.num_nodes
    text = json.dumps(report, indent=2) + "\n"
    if args.out:
        _write_atomic(args.out, text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


# ---------------------------------------------------------------- parser

def build_parser():
    parser = argparse.ArgumentParser(prog="sparsetrig",
                                     description="Adaptive sparse trigonometric interpolation.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command_name", required=True)

    def model_flags(p):
        p.add_argument("--model", help="product:i1,i2,..., aniso6d, pib, constant:c:d or external")
        p.add_argument("--dim", type=int)
        p.add_argument("--domain", help="a:b or a1:b1,a2:b2,... (external models)")
        p.add_argument("--command", help="external backend, run as CMD request.csv response.csv")
        p.add_argument("--exchange-dir", help="poll this directory instead of running a command")
        p.add_argument("--work-dir", help="where request/response files are written")
        p.add_argument("--batch-size", type=int, default=1000)
        p.add_argument("--timeout", type=float, default=600.0)
        p.add_argument("--retries", type=int, default=2)
        p.add_argument("--noise", type=float, default=0.0,
                       help="uniform noise amplitude added to built-in model values")
        p.add_argument("--keep-io", action="store_true")
        p.add_argument("--jobs", type=int, default=1)

    def run_flags(p, defaults=True):
        p.add_argument("--space", default="hyperbolic" if defaults else None,
                       choices=["hyperbolic", "total-degree", "total_degree"])
        p.add_argument("--mode", default=adaptive.ADAPTIVE if defaults else None,
                       choices=list(adaptive.MODES))
        p.add_argument("--alpha", help="comma-separated anisotropy (analytic mode)")
        p.add_argument("--budget", type=int)
        p.add_argument("--min-new-nodes", type=int, default=1 if defaults else None)

    p = sub.add_parser("build", help="sample the initial isotropic grid")
    model_flags(p)
    run_flags(p)
    p.add_argument("--l0", type=float, default=DEFAULT_L0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("refine", help="refine a grid until the budget stops growth")
    p.add_argument("--grid", required=True)
    run_flags(p, defaults=False)
    p.add_argument("--history", help="JSON-lines history file (default GRID.history.jsonl)")
    p.add_argument("--keep-io", action="store_true")
    p.add_argument("--work-dir")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_refine)

    p = sub.add_parser("eval", help="evaluate a grid at points from a CSV file")
    p.add_argument("--grid", required=True)
    p.add_argument("--points", required=True)
    p.add_argument("--out")
    p.add_argument("--clamp", action="store_true", help="clamp points into the domain")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("study", help="convergence study of a built-in model")
    model_flags(p)
    p.add_argument("--space", default="hyperbolic",
                   choices=["hyperbolic", "total-degree", "total_degree"])
    p.add_argument("--modes", default="adaptive,analytic,isotropic",
                   help=f"comma-separated subset of {', '.join(STUDY_MODES)}")
    p.add_argument("--alpha")
    p.add_argument("--budget", type=int, default=DEFAULT_BUDGET)
    p.add_argument("--l0", type=float, default=DEFAULT_L0)
    p.add_argument("--min-new-nodes", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--validation-size", type=int, default=metrics.VALIDATION_SIZE)
    p.add_argument("--out", required=True, help="output directory for the study CSVs")
    p.set_defaults(func=cmd_study)

    p = sub.add_parser("report-anisotropy", help="fit decay rates to a grid's weights")
    p.add_argument("--grid", required=True)
    p.add_argument("--space", choices=["hyperbolic", "total-degree", "total_degree"])
    p.add_argument("--out")
    p.set_defaults(func=cmd_report_anisotropy)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OracleError as exc:
        print(f"model error: {exc}", file=sys.stderr)
        return EXIT_ORACLE
    except Exception as exc:  # pragma: no cover - safety net
        log.exception("internal error")
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
