"""Command-line front end: concentration curves, protocol runs, verification.

Subcommands:

* ``curve``  -- success probability vs entanglement table (CSV or JSON)
* ``run``    -- a single protocol configuration, exact and/or sampled (JSON)
* ``verify`` -- cross-checks between the analytic engine and the simulator

Exit codes: 0 success, 1 runtime or check failure, 2 usage error.
Output is deterministic: identical inputs (including the seed) produce
byte-identical bytes.  Floats in CSV are rendered with 10 significant
digits and a ``.`` decimal separator.
"""

from __future__ import annotations

import argparse
import dataclasses
import itertools
import json
import math
import sys

from . import analytic, protocol

SCHEMA_VERSION = 1

DEFAULT_ALPHA_SQ_GRID = [round(0.05 * k, 10) for k in range(1, 20)]
COARSE_ALPHA_SQ_GRID = [0.1, 0.3, 0.5, 0.7, 0.9]
DEFAULT_E_GRID = [round(0.02 * k, 12) for k in range(1, 51)]
COARSE_E_GRID = [0.2, 0.4, 0.6, 0.8, 1.0]


class UsageError(Exception):
    pass


def _fmt_float(x: float) -> str:
    s = f"{x:.10g}"
    if "." not in s and "e" not in s and "E" not in s:
        s += ".0"
    return s


def _parse_rounds_list(text: str) -> list[int]:
    try:
        values = [int(part) for part in text.split(",") if part.strip() != ""]
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid round list {text!r}; expected e.g. 1,2,3")
    if not values:
        raise argparse.ArgumentTypeError("round list must not be empty")
    return values


def _write_output(path: str | None, text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def _e_grid(e_min: float, e_max: float, e_step: float) -> list[float]:
    if not (0.0 < e_min <= e_max <= 1.0):
        raise UsageError("require 0 < e-min <= e-max <= 1")
    if e_step <= 0.0:
        raise UsageError("e-step must be positive")
    count = int(math.floor((e_max - e_min) / e_step + 1e-9)) + 1
    # Snap each point to 12 decimals so binary step noise cannot push the
    # last value past e_max or off a printable grid value.
    return [round(e_min + i * e_step, 12) for i in range(count)]


def cmd_curve(args) -> int:
    rounds = args.rounds
    if any(n < 1 for n in rounds):
        raise UsageError("every entry of --rounds must be >= 1")
    grid = _e_grid(args.e_min, args.e_max, args.e_step)
    table = analytic.curve(grid, rounds)
    if args.format == "csv":
        lines = ["E,n,P_n,P_over_E"]
        for row in table.rows:
            ratio = row.p_success / row.entanglement
            lines.append(
                f"{_fmt_float(row.entanglement)},{row.rounds},"
                f"{_fmt_float(row.p_success)},{_fmt_float(ratio)}"
            )
        _write_output(args.output, "\n".join(lines) + "\n")
    else:
        payload = {
            "schema_version": SCHEMA_VERSION,
            "rows": [
                {
                    "E": row.entanglement,
                    "n": row.rounds,
                    "P_n": row.p_success,
                    "P_over_E": row.p_success / row.entanglement,
                }
                for row in table.rows
            ],
        }
        _write_output(args.output, json.dumps(payload, indent=2, sort_keys=True) + "\n")
    return 0


def _run_config(args) -> protocol.ProtocolConfig:
    if args.alpha_sq is None:
        raise UsageError("--alpha-sq is required (flag or config file)")
    if not (0.0 < args.alpha_sq < 1.0):
        raise UsageError("--alpha-sq must lie strictly between 0 and 1")
    if args.parties < 2:
        raise UsageError("--parties must be >= 2")
    if args.rounds < 1:
        raise UsageError("--rounds must be >= 1")
    if args.mode == "sample" and args.trials < 1:
        raise UsageError("--trials must be >= 1 in sample mode")
    try:
        return protocol.ProtocolConfig(
            alpha=math.sqrt(args.alpha_sq),
            num_parties=args.parties,
            max_rounds=args.rounds,
            variant=protocol.Variant(args.variant),
            mode=protocol.Mode(args.mode),
            trials=args.trials if args.mode == "sample" else 0,
            seed=args.seed,
        )
    except ValueError as err:
        raise UsageError(str(err)) from None


def cmd_run(args) -> int:
    cfg = _run_config(args)
    exact = protocol.enumerate_outcomes(dataclasses.replace(cfg, mode=protocol.Mode.ENUMERATE))
    report = {
        "schema_version": SCHEMA_VERSION,
        "alpha_sq": args.alpha_sq,
        "parties": cfg.num_parties,
        "rounds": cfg.max_rounds,
        "variant": cfg.variant.value,
        "mode": cfg.mode.value,
        "per_round_success": list(exact.per_round_success),
        "cumulative_success": exact.cumulative_success,
        "residual_probability": exact.residual_probability,
        "pruned_probability": exact.pruned_probability,
    }
    if cfg.mode is protocol.Mode.SAMPLE:
        stats = protocol.sample(cfg)
        report.update(
            trials=stats.trials,
            seed=cfg.seed,
            successes_by_round=list(stats.successes_by_round),
            empirical_p=stats.empirical_p,
            stderr=stats.stderr,
        )
    _write_output(args.output, json.dumps(report, indent=2, sort_keys=True) + "\n")
    return 0


def _check_analytic_vs_enumeration(alpha_sq_grid) -> float:
    worst = 0.0
    for alpha_sq, parties in itertools.product(alpha_sq_grid, (2, 3)):
        cfg = protocol.ProtocolConfig(alpha=math.sqrt(alpha_sq), num_parties=parties, max_rounds=5)
        result = protocol.enumerate_outcomes(cfg)
        plans = analytic.round_plan(cfg.ghz_state(), cfg.max_rounds)
        for plan, simulated in zip(plans, result.per_round_success):
            worst = max(worst, abs(plan.p_success_uncond - simulated))
    return worst


def _check_variant_equivalence(alpha_sq_grid) -> float:
    worst = 0.0
    for alpha_sq in alpha_sq_grid:
        cfg = protocol.ProtocolConfig(alpha=math.sqrt(alpha_sq), max_rounds=5)
        worst = max(worst, protocol.variant_equivalence(cfg))
    return worst


def _check_convergence(e_grid) -> float:
    worst = 0.0
    for e in e_grid:
        state = analytic.GhzClassState.from_alpha_sq(e / 2.0)
        p_limit, _ = analytic.asymptotic_limit(state, tol=1e-12)
        worst = max(worst, abs(p_limit - analytic.entanglement(state)))
    return worst


def _check_n_independence(alpha_sq_grid) -> float:
    worst = 0.0
    for alpha_sq in alpha_sq_grid:
        vectors = []
        for parties in range(2, 7):
            cfg = protocol.ProtocolConfig(alpha=math.sqrt(alpha_sq), num_parties=parties, max_rounds=4)
            vectors.append(protocol.enumerate_outcomes(cfg).per_round_success)
        for vec in vectors[1:]:
            worst = max(worst, max(abs(a - b) for a, b in zip(vectors[0], vec)))
    return worst


def cmd_verify(args) -> int:
    coarse = args.grid == "coarse"
    alpha_grid = COARSE_ALPHA_SQ_GRID if coarse else DEFAULT_ALPHA_SQ_GRID
    e_grid = COARSE_E_GRID if coarse else DEFAULT_E_GRID
    checks = [
        ("analytic-vs-enumeration", _check_analytic_vs_enumeration(alpha_grid), args.tol_oracle),
        ("variant-equivalence", _check_variant_equivalence(alpha_grid), args.tol_variant),
        ("convergence-to-entanglement", _check_convergence(e_grid), args.tol_convergence),
        ("n-independence", _check_n_independence(COARSE_ALPHA_SQ_GRID), args.tol_n_indep),
    ]
    lines = [f"{'check':<30} {'deviation':>12} {'tolerance':>12}  result"]
    failures = 0
    for name, deviation, tolerance in checks:
        ok = deviation < tolerance
        failures += 0 if ok else 1
        lines.append(f"{name:<30} {deviation:>12.3e} {tolerance:>12.1e}  {'pass' if ok else 'FAIL'}")
    lines.append(f"verify: {len(checks) - failures}/{len(checks)} checks passed")
    sys.stdout.write("\n".join(lines) + "\n")
    return 0 if failures == 0 else 1


def _read_config_file(path: str) -> dict[str, str]:
    entries: dict[str, str] = {}
    try:
        with open(path, "r", encoding="utf-8") as fh:
            for lineno, raw in enumerate(fh, 1):
                line = raw.strip()
                if not line or line.startswith("#"):
                    continue
                if "=" not in line:
                    raise UsageError(f"{path}:{lineno}: expected key=value, got {line!r}")
                key, value = line.split("=", 1)
                entries[key.strip()] = value.strip()
    except OSError as err:
        raise UsageError(f"cannot read config file: {err}") from None
    return entries


def _config_overrides(sub: argparse.ArgumentParser, entries: dict[str, str]) -> dict[str, object]:
    by_flag = {
        opt.lstrip("-").replace("-", "_"): action
        for action in sub._actions
        for opt in action.option_strings
        if opt.startswith("--")
    }
    overrides: dict[str, object] = {}
    for key, text in entries.items():
        normal = key.replace("-", "_")
        action = by_flag.get(normal)
        if action is None or normal in ("help", "config"):
            raise UsageError(f"config key {key!r} is not a flag of this command")
        value = action.type(text) if action.type is not None else text
        if action.choices is not None and value not in action.choices:
            raise UsageError(f"config value {text!r} not allowed for {key!r}")
        overrides[action.dest] = value
    return overrides


def build_parser() -> tuple[argparse.ArgumentParser, dict[str, argparse.ArgumentParser]]:
    parser = argparse.ArgumentParser(
        prog="ecpsim",
        description="Entanglement concentration of GHZ-class spin registers: "
                    "curves, protocol runs and verification.",
    )
    subs = parser.add_subparsers(dest="command", required=True)
    commands: dict[str, argparse.ArgumentParser] = {}

    curve = subs.add_parser("curve", help="success probability vs entanglement table")
    curve.add_argument("--e-min", type=float, default=0.02)
    curve.add_argument("--e-max", type=float, default=1.0)
    curve.add_argument("--e-step", type=float, default=0.02)
    curve.add_argument("--rounds", type=_parse_rounds_list, default=[1, 2, 3, 4, 5],
                       metavar="N1,N2,...", help="round counts, comma separated")
    curve.add_argument("--format", choices=("csv", "json"), default="csv")
    curve.add_argument("--output", default="-", help="output path, - for stdout")
    curve.add_argument("--config", help="key=value config file; flags take precedence")
    curve.set_defaults(handler=cmd_curve)
    commands["curve"] = curve

    run = subs.add_parser("run", help="run one protocol configuration")
    run.add_argument("--alpha-sq", type=float,
                     help="squared all-up coefficient, strictly in (0, 1); "
                          "required here or in the config file")
    run.add_argument("--parties", type=int, default=2)
    run.add_argument("--rounds", type=int, default=1)
    run.add_argument("--variant", choices=("pcg", "cnot"), default="pcg")
    run.add_argument("--mode", choices=("enumerate", "sample"), default="enumerate")
    run.add_argument("--trials", type=int, default=100000)
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--output", default="-", help="output path, - for stdout")
    run.add_argument("--config", help="key=value config file; flags take precedence")
    run.set_defaults(handler=cmd_run)
    commands["run"] = run

    verify = subs.add_parser("verify", help="cross-check the engines against each other")
    verify.add_argument("--grid", choices=("default", "coarse"), default="default")
    verify.add_argument("--tol-oracle", type=float, default=1e-10)
    verify.add_argument("--tol-variant", type=float, default=1e-12)
    verify.add_argument("--tol-convergence", type=float, default=1e-9)
    verify.add_argument("--tol-n-indep", type=float, default=1e-12)
    verify.add_argument("--config", help="key=value config file; flags take precedence")
    verify.set_defaults(handler=cmd_verify)
    commands["verify"] = verify

    return parser, commands


def main(argv=None) -> int:
    parser, commands = build_parser()
    args = parser.parse_args(argv)
    try:
        if getattr(args, "config", None):
            sub = commands[args.command]
            sub.set_defaults(**_config_overrides(sub, _read_config_file(args.config)))
            args = parser.parse_args(argv)
        return args.handler(args)
    except UsageError as err:
        print(f"ecpsim {args.command}: error: {err}", file=sys.stderr)
        return 2
    except OSError as err:
        print(f"ecpsim {args.command}: I/O error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
