"""Command-line pipeline: indices | simulate | oracle | asymptotic | bound.

Exit codes: 0 ok, 2 config error, 3 solver failure, 4 resource limit.
All output files carry schema_version and the hash of the resolved config;
JSON is the authoritative format, CSV summaries are plot-ready.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .config import CONFIG_SCHEMA_VERSION, load_config
from .errors import (
    ConfigError,
    InfeasiblePolicy,
    SolverError,
    StateSpaceTooLarge,
    TruncationTooDeep,
    UoiSchedError,
)
from .index_policy import load_table, table_to_doc
from .simulate import asymptotic_sweep
from .solvers import AVERAGE, DISCOUNTED
from .workflows import bound_report, compute_index_tables, prepare, run_oracle, run_simulation

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_RESOURCE = 4


def _write_json(path: Path, doc: dict, config_hash: str) -> None:
    doc = {"schema_version": CONFIG_SCHEMA_VERSION, "config_hash": config_hash, **doc}
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def _write_csv(path: Path, header: list[str], rows: list[list], config_hash: str) -> None:
    lines = [f"# schema_version={CONFIG_SCHEMA_VERSION} config_hash={config_hash}"]
    lines.append(",".join(header))
    for row in rows:
        lines.append(",".join(repr(v) if isinstance(v, float) else str(v) for v in row))
    path.write_text("\n".join(lines) + "\n")


def _out_dir(args, config) -> Path:
    out = args.out or config.outputs or "out"
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _echo_config(config, out: Path) -> str:
    h = config.config_hash()
    _write_json(out / "config_echo.json", {"config": config.resolved}, h)
    return h


def cmd_indices(args) -> int:
    config = load_config(args.config)
    if args.seed is not None:
        config.override_seed(args.seed)
    out = _out_dir(args, config)
    h = _echo_config(config, out)
    prep = prepare(config)
    result = compute_index_tables(prep)

    for table in result.tables:
        _write_json(out / f"indices_{table.bandit_label}.json", table_to_doc(table), h)
    _write_csv(
        out / "gradient_trace.csv",
        ["iteration", "lambda", "derivative"],
        [[k, lam, d] for k, (lam, d) in enumerate(result.trace.iterates)],
        h,
    )
    _write_json(
        out / "truncation_report.json",
        {"bandits": bound_report(prep, lam=result.lambda_star)},
        h,
    )
    _write_json(
        out / "lambda_report.json",
        {
            "lambda_star": result.lambda_star,
            "stop_reason": result.trace.stop_reason,
            "bracket": list(result.trace.bracket),
            "iterations": len(result.trace.iterates),
        },
        h,
    )
    print(f"lambda_star = {result.lambda_star:.6g} ({len(result.trace.iterates)} gradient evaluations)")
    print(f"wrote {len(result.tables)} index tables to {out}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    config = load_config(args.config)
    if args.seed is not None:
        config.override_seed(args.seed)
    out = _out_dir(args, config)
    h = _echo_config(config, out)
    prep = prepare(config)

    tables = None
    if args.policy in ("gain_index", "or_rounded"):
        if not args.tables:
            raise ConfigError(f"policy {args.policy!r} requires --tables with one file per bandit")
        try:
            tables = [load_table(p) for p in args.tables]
        except FileNotFoundError as exc:
            raise ConfigError(f"index table file not found: {exc.filename}") from exc
        by_label = {t.bandit_label: t for t in tables}
        missing = [b.label for b in config.bandits if b.label not in by_label]
        if missing:
            raise ConfigError(f"missing index tables for bandit(s) {missing}")
        tables = [by_label[b.label] for b in config.bandits]

    res = run_simulation(prep, args.policy, tables=tables)
    _write_json(out / f"sim_{args.policy}.json", {"result": res.to_json_dict()}, h)
    _write_csv(
        out / "sim_summary.csv",
        ["policy", "M", "m", "criterion", "mean", "stderr", "runs", "horizon", "seed"],
        [[res.policy, res.n_bandits, res.m, res.criterion, res.mean, res.stderr, res.runs, res.horizon, res.seed]],
        h,
    )
    print(f"{args.policy}: mean = {res.mean:.6g}, stderr = {res.stderr:.3g} ({res.runs} runs)")
    return EXIT_OK


def cmd_oracle(args) -> int:
    config = load_config(args.config)
    out = _out_dir(args, config)
    h = _echo_config(config, out)
    prep = prepare(config)
    res = run_oracle(prep)
    doc = {
        "criterion": config.criterion,
        "value": res.value,
        "n_joint_states": res.joint.n_joint,
        "initial_states": prep.initial_states,
    }
    if args.policy_result:
        with open(args.policy_result) as fh:
            sim_doc = json.load(fh)
        policy_mean = sim_doc["result"]["mean"]
        doc["gap"] = {
            "oracle": res.value,
            "policy": policy_mean,
            "relative_gap": (policy_mean - res.value) / res.value if res.value != 0 else 0.0,
        }
    _write_json(out / "oracle.json", doc, h)
    print(f"oracle {config.criterion} value = {res.value:.8g}")
    if "gap" in doc:
        print(f"relative gap of referenced policy = {doc['gap']['relative_gap']:.4%}")
    return EXIT_OK


def cmd_asymptotic(args) -> int:
    config = load_config(args.config)
    if args.seed is not None:
        config.override_seed(args.seed)
    out = _out_dir(args, config)
    h = _echo_config(config, out)
    try:
        m_list = [int(v) for v in args.m_list.split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigError(f"--m-list: expected comma-separated integers, got {args.m_list!r}") from exc
    if not m_list:
        raise ConfigError("--m-list: at least one population size required")

    prep = prepare(config)
    q = 1.0 / len(config.bandits)
    classes = [(b, q) for b in config.bandits]
    try:
        sweep = asymptotic_sweep(
            classes,
            alpha=args.alpha,
            m_list=m_list,
            runs=config.runs,
            seed=config.seed,
            criterion=config.criterion,
            discount=config.discount,
            truncation_L=prep.l_per_bandit,
            horizon=config.horizon if config.criterion == AVERAGE else None,
            burn_in=config.burn_in,
            gradient_opts={
                "stepsize_c": config.gradient_c,
                "epsilon": config.gradient_epsilon,
                "max_iters": config.gradient_max_iters,
            },
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    _write_json(out / "asymptotic.json", {"sweep": sweep.to_json_dict()}, h)
    _write_csv(
        out / "asymptotic.csv",
        ["M", "m", "per_bandit_cost", "per_bandit_stderr", "per_bandit_bound", "gap"],
        [
            [r.n_bandits, r.m, r.per_bandit_cost, r.per_bandit_stderr, r.per_bandit_bound, r.gap]
            for r in sweep.rows
        ],
        h,
    )
    for r in sweep.rows:
        print(
            f"M={r.n_bandits:4d} m={r.m:3d}: per-bandit cost {r.per_bandit_cost:.6g} "
            f"(± {r.per_bandit_stderr:.2g}), bound {r.per_bandit_bound:.6g}, gap {r.gap:.6g}"
        )
    return EXIT_OK


def cmd_bound(args) -> int:
    config = load_config(args.config)
    prep = prepare(config)
    rows = bound_report(prep)
    for row in rows:
        line = (
            f"{row['label']}: L={row['L']} eta_L={row['eta_L']:.3g} sigma_L={row['sigma_L']:.3g}"
            f" average_bound={row['average_bound']:.3g}"
        )
        if config.criterion == DISCOUNTED:
            line += f" discounted_bound(lambda=0)={row['discounted_bound']:.3g}"
        print(line)
    if args.out:
        out = _out_dir(args, config)
        h = _echo_config(config, out)
        _write_json(out / "bounds.json", {"bandits": rows}, h)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="uoisched",
        description="Gain-index scheduling pipeline for uncertainty-of-information minimization",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, seed=True):
        p.add_argument("--config", required=True, help="experiment config JSON")
        p.add_argument("--out", default=None, help="output directory (default: config outputs or ./out)")
        if seed:
            p.add_argument("--seed", type=int, default=None, help="override simulation.seed")

    p = sub.add_parser("indices", help="compute lambda* and per-bandit gain-index tables")
    add_common(p)
    p.set_defaults(func=cmd_indices)

    p = sub.add_parser("simulate", help="simulate a scheduling policy")
    add_common(p)
    p.add_argument("--policy", required=True, choices=["gain_index", "myopic", "round_robin", "or_rounded"])
    p.add_argument("--tables", nargs="*", default=[], help="index table files (gain_index / or_rounded)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("oracle", help="exact joint solve (small M)")
    add_common(p, seed=False)
    p.add_argument("--policy-result", default=None, help="sim result JSON to report a relative gap for")
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("asymptotic", help="population sweep at fixed channel ratio alpha")
    add_common(p)
    p.add_argument("--alpha", type=float, required=True, help="channel ratio m/M")
    p.add_argument("--m-list", required=True, help="comma-separated population sizes M")
    p.set_defaults(func=cmd_asymptotic)

    p = sub.add_parser("bound", help="print truncation error certificates")
    add_common(p, seed=False)
    p.set_defaults(func=cmd_bound)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (StateSpaceTooLarge, TruncationTooDeep) as exc:
        print(f"resource limit: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except (SolverError, InfeasiblePolicy) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (ConfigError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except UoiSchedError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
