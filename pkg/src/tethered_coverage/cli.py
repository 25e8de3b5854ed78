"""Command-line interface: placement tables, coverage runs, parameter sweeps,
empirical validation and figure recipes. Every command writes CSV."""
import argparse
import csv
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
import math
import sys

import numpy as np

from .coverage import METHODS, coverage_probability, optimal_delta
from .model import (FIGURE_WINDOW_RADIUS, PER_KM2, ParameterError, check_params, check_settings, config_dict,
                    load_config, tomllib)
from .montecarlo import empirical_oracles, simulate_coverage
from .numerics import NumericalError, substream
from .placement import build_deployment_plan

EXIT_OK, EXIT_ERROR, EXIT_CONFIG, EXIT_VALIDATION = 0, 1, 2, 3

COVERAGE_COLUMNS = ("method", "p_cov", "p_cov_tbs", "p_cov_aerial", "p_cov_cluster",
                    "ci_low", "ci_high")
SWEEP_COLUMNS = ("env", "param", "value", "delta", "config") + COVERAGE_COLUMNS
PLACEMENT_COLUMNS = ("ring", "R_n", "p_i", "T_opt", "theta_opt_deg", "h_u", "R_u", "pl_avg")
VALIDATE_COLUMNS = ("check", "empirical", "analytic", "gap", "tolerance", "passed")

# CLI units: lambda_C in 1/km^2, lengths in metres
SWEEP_PARAMS = {
    "T_max": (1.0, 10.0),
    "delta": (1.0, 0.1),
    "lambda_C": (PER_KM2, 1.0),
    "kappa_b": (1.0, 0.01),
    "R_0": (1.0, 50.0),
    "gamma": (1.0, None),
}

FIGURES = {
    "fig3": dict(param="T_max", values="50..120", deltas=(0.7, 1.0)),
    "fig4": dict(param="delta", values="0.1..1.0"),
    "fig5": dict(param="T_max", values="50..120", optimal=True),
    "fig6": dict(param="lambda_C", values="1..10", optimal=True),
    "fig7": dict(param="kappa_b", values="0.01,0.02,0.04,0.06,0.08,0.1", optimal=True,
                 reference=True),
    "fig8": dict(param="R_0", values="100..500"),
}


def _fmt(value):
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".9g")
    return str(value)


def emit_csv(rows, schema, path=None, comments=()):
    """Write ``rows`` (mappings keyed by ``schema``) as CSV.

    ``comments`` are emitted first as ``#`` lines. ``path`` of None or
    ``"-"`` writes to stdout.
    """
    schema = tuple(schema)
    rows = list(rows)
    for row in rows:
        extra = set(row) - set(schema)
        if extra:
            raise ValueError(f"row has columns outside the schema: {sorted(extra)}")
    own = path not in (None, "-")
    fh = open(path, "w", encoding="utf-8", newline="") if own else sys.stdout
    try:
        for line in comments:
            fh.write(f"# {line}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(schema)
        for row in rows:
            writer.writerow([_fmt(row.get(col)) for col in schema])
    finally:
        if own:
            fh.close()


def read_csv(path):
    """Parse a file written by :func:`emit_csv`: ``(comments, header, rows)``."""
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    comments = [ln[2:] for ln in lines if ln.startswith("#")]
    body = list(csv.reader(ln for ln in lines if not ln.startswith("#")))
    return comments, body[0], body[1:]


def parse_values(text, param):
    """``"a,b,c"``, ``"a..b"`` (default step of ``param``) or ``"a..b:step"``."""
    if param not in SWEEP_PARAMS:
        raise ParameterError(f"unknown sweep parameter {param!r}")
    text = text.strip()
    if ".." not in text:
        try:
            values = [float(v) for v in text.split(",") if v.strip()]
        except ValueError as exc:
            raise ParameterError(f"bad value list {text!r}") from exc
    else:
        rng, _, step = text.partition(":")
        lo, _, hi = rng.partition("..")
        try:
            lo, hi = float(lo), float(hi)
            step = float(step) if step else SWEEP_PARAMS[param][1]
        except (TypeError, ValueError) as exc:
            raise ParameterError(f"bad range {text!r}") from exc
        if step is None:
            raise ParameterError(f"{param} ranges need an explicit ':step'")
        if step <= 0 or hi < lo:
            raise ParameterError(f"bad range {text!r}")
        count = int(math.floor((hi - lo) / step + 1e-9)) + 1
        values = [round(lo + k * step, 10) for k in range(count)]
    if not values:
        raise ParameterError("empty value list")
    return values


def _apply(net, param, value):
    scale = SWEEP_PARAMS[param][0]
    return replace(net, **{param: value * scale})


def _analytic_row(res):
    return dict(method="analytic", p_cov=res.total, p_cov_tbs=res.tbs,
                p_cov_aerial=res.aerial, p_cov_cluster=res.cluster)


def _sim_row(est):
    cov = est.covered_by
    return dict(method="simulate", p_cov=est.estimate, p_cov_tbs=cov["tbs"],
                p_cov_aerial=cov["los"] + cov["nlos"],
                p_cov_cluster=cov["cluster_los"] + cov["cluster_nlos"],
                ci_low=est.ci_low, ci_high=est.ci_high)


def _evaluate(task):
    """One sweep point; top level so that worker processes can run it.

    Analytic rows use ``settings``; simulated rows use ``sim_settings``.
    """
    env, net, settings, sim_settings, method, formula, optimal, reference = task
    rows = []
    delta = net.delta
    if reference:
        net = replace(net, delta=1.0)
        delta = 1.0
    if method in ("analytic", "both"):
        if optimal and not reference:
            delta, res = optimal_delta(env, net, formula, settings)
        else:
            res = coverage_probability(env, net, formula, settings=settings, reference=reference)
        rows.append(dict(delta=delta, **_analytic_row(res)))
    if method in ("simulate", "both"):
        if optimal and not reference and not rows:
            delta, _ = optimal_delta(env, net, formula, settings)
        sim_net = replace(net, delta=delta)
        plan = build_deployment_plan(env, sim_net, reference=reference)
        est = simulate_coverage(env, sim_net, plan, settings=sim_settings)
        rows.append(dict(delta=delta, **_sim_row(est)))
    return rows


def _run_tasks(tasks, jobs):
    if jobs and jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_evaluate, tasks))
    return [_evaluate(t) for t in tasks]


def _comments(args, env, net, settings, extra=()):
    out = [f"command: {' '.join(args.argv)}", f"seed: {settings.seed}"]
    out += [f"{k} = {v}" for k, v in config_dict(env, net, settings).items()]
    return out + list(extra)


def sweep_rows(env, net, settings, param, values, method="analytic", formula="approximate",
               optimal=False, reference=False, jobs=1, deltas=None, sim_settings=None):
    """Rows of a one-parameter sweep, in input order."""
    sim_settings = settings if sim_settings is None else sim_settings
    tasks, keys = [], []
    for value in values:
        point = _apply(net, param, value)
        for d in (deltas or (None,)):
            p = point if d is None else replace(point, delta=d)
            configs = [("proposed", False)] + ([("reference", True)] if reference else [])
            for label, ref in configs:
                tasks.append((env, p, settings, sim_settings, method, formula, optimal, ref))
                keys.append((value, label))
    out = []
    for (value, label), rows in zip(keys, _run_tasks(tasks, jobs)):
        for row in rows:
            out.append(dict(env=env.name, param=param, value=value, config=label, **row))
    return out


# --- subcommands ---------------------------------------------------------------

def cmd_optimize_placement(args, env, net, settings):
    plan = build_deployment_plan(env, net, reference=args.reference)
    rows = [dict(ring=r.ring, R_n=r.R_n, p_i=r.p_i, T_opt=r.T_opt,
                 theta_opt_deg=math.degrees(r.theta_opt), h_u=r.h_u, R_u=r.R_u, pl_avg=r.pl_avg)
            for r in plan.rings]
    emit_csv(rows, PLACEMENT_COLUMNS, args.output,
             _comments(args, env, net, settings, [f"p_out = {plan.p_out!r}"]))
    return EXIT_OK


def cmd_coverage(args, env, net, settings):
    rows = _evaluate((env, net, settings, settings, args.method, args.formula, False, False))
    for r in rows:
        r.pop("delta")
    emit_csv(rows, COVERAGE_COLUMNS, args.output,
             _comments(args, env, net, settings, [f"formula: {args.formula}"]))
    return EXIT_OK


def cmd_sweep(args, env, net, settings):
    values = parse_values(args.values, args.param)
    if args.optimal_delta and args.param == "delta":
        raise ParameterError("--optimal-delta cannot be combined with a delta sweep")
    for v in values:
        _check_point(env, net, args.param, v)
    rows = sweep_rows(env, net, settings, args.param, values, args.method, args.formula,
                      optimal=args.optimal_delta, reference=args.reference, jobs=args.jobs)
    emit_csv(rows, SWEEP_COLUMNS, args.output,
             _comments(args, env, net, settings, [f"formula: {args.formula}"]))
    return EXIT_OK


def _check_point(env, net, param, value):
    check_params(env, _apply(net, param, value))


def cmd_reproduce(args, env, net, settings):
    """Figure recipes. Analytic rows use the 400 km-square equivalent window
    unless ``--window-km`` is given; simulated rows use the configured one."""
    recipe = FIGURES[args.figure]
    envs = [args.env] if args.env else ["urban", "suburban"]
    rows, comments = [], []
    for name in envs:
        e, n, sim = load_config(args.config, name)
        sim = _override_settings(args, sim)
        ana = sim if args.window_km is not None else replace(sim, window_radius=FIGURE_WINDOW_RADIUS)
        values = parse_values(recipe["values"], recipe["param"])
        rows += sweep_rows(e, n, ana, recipe["param"], values, args.method, args.formula,
                           optimal=recipe.get("optimal", False),
                           reference=recipe.get("reference", False),
                           jobs=args.jobs, deltas=recipe.get("deltas"), sim_settings=sim)
        comments += _comments(args, e, n, ana)
        if args.method != "analytic":
            comments.append(f"simulation window_radius = {sim.window_radius}")
    emit_csv(rows, SWEEP_COLUMNS, args.output, comments + [f"formula: {args.formula}"])
    return EXIT_OK


def cmd_validate(args, env, net, settings):
    plan = build_deployment_plan(env, net)
    checks = empirical_oracles(env, net, plan, args.samples, substream(settings.seed, 10_001),
                               settings=settings)
    rows = [dict(check=c.name, empirical=c.empirical, analytic=c.analytic, gap=c.gap,
                 tolerance=c.tolerance, passed=c.passed) for c in checks]
    emit_csv(rows, VALIDATE_COLUMNS, args.output, _comments(args, env, net, settings))
    failed = [r["check"] for r in rows if not r["passed"]]
    if failed:
        print(f"validation failed: {', '.join(failed)}", file=sys.stderr)
        return EXIT_VALIDATION
    return EXIT_OK


# --- argument parsing ----------------------------------------------------------

def _override_settings(args, settings):
    over = {}
    if getattr(args, "trials", None) is not None:
        over["trials"] = args.trials
    if getattr(args, "seed", None) is not None:
        over["seed"] = args.seed
    if getattr(args, "window_km", None) is not None:
        over["window_radius"] = args.window_km * 1000.0
    if getattr(args, "workers", None) is not None:
        over["workers"] = args.workers
    return replace(settings, **over) if over else settings


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML configuration file (default: $TETHERED_COVERAGE_CONFIG)")
    common.add_argument("--env", choices=("urban", "suburban"), help="preset to start from")
    common.add_argument("-o", "--output", help="output CSV path (default: stdout)")
    common.add_argument("--seed", type=int, help="simulation seed")
    common.add_argument("--trials", type=int, help="Monte Carlo trials")
    common.add_argument("--workers", type=int, help="threads per simulation")
    common.add_argument("--window-km", type=float, help="radius of the evaluation window (km)")

    evals = argparse.ArgumentParser(add_help=False)
    evals.add_argument("--method", choices=("analytic", "simulate", "both"), default="analytic")
    evals.add_argument("--formula", choices=METHODS, default="approximate",
                       help="analytic coverage expression")
    evals.add_argument("--jobs", type=int, default=1, help="parallel sweep points")

    parser = argparse.ArgumentParser(prog="tethered-coverage", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("optimize-placement", parents=[common], help="per-ring optimal tether placement")
    p.add_argument("--reference", action="store_true", help="vertical full-length tethers instead")
    p.set_defaults(func=cmd_optimize_placement)

    p = sub.add_parser("coverage", parents=[common, evals], help="coverage probability")
    p.set_defaults(func=cmd_coverage)

    p = sub.add_parser("sweep", parents=[common, evals], help="one-parameter sweep")
    p.add_argument("--param", required=True, choices=tuple(SWEEP_PARAMS))
    p.add_argument("--values", required=True, help="'a,b,c', 'a..b' or 'a..b:step'")
    p.add_argument("--optimal-delta", action="store_true", help="maximize over delta at every point")
    p.add_argument("--reference", action="store_true", help="add reference-placement rows")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("validate", parents=[common], help="empirical oracles; exit 3 on failure")
    p.add_argument("--samples", type=int, default=100_000, help="samples per distance law")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("reproduce", parents=[common, evals], help="preset sweeps of the figure set")
    p.add_argument("figure", choices=tuple(FIGURES))
    p.set_defaults(func=cmd_reproduce)
    return parser


def run(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    args.argv = ["tethered-coverage"] + argv
    try:
        env, net, settings = load_config(args.config, args.env)
        settings = check_settings(_override_settings(args, settings))
    except (ParameterError, OSError, tomllib.TOMLDecodeError, TypeError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return args.func(args, env, net, settings)
    except ParameterError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
