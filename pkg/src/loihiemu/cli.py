"""Batch command-line front end.

Subcommands: ``run`` (simulate a config and write monitor CSVs plus a
manifest), ``weight-table`` (dump the 4096-entry weight codec table),
``validate`` (run the validation suites against their tolerances) and
``validate-rule`` (parse a learning rule and print its normalized form).

Exit codes: 0 success; 1 failed validation metric; 2 config, rule or
network validation error; 3 checked-arithmetic overflow at runtime.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time

from . import __version__
from .configio import (
    ConfigError,
    config_hash,
    definition_from_config,
    load_config,
    resolve_config,
    write_monitor_csv,
    write_stdp_window_csv,
)
from .engine import NetworkValidationError, build
from .fixedpoint import StateOverflowError
from .oracle import run_suite
from .plasticity import RuleError, parse_rule
from .weights import SignMode, weight_table

_OUT_ENV = "LOIHIEMU_OUT"


def _default_out() -> str:
    return os.environ.get(_OUT_ENV, ".")


def _error_listing(kind: str, details) -> None:
    print(json.dumps({"error": kind, "details": details}, indent=2), file=sys.stderr)


def cmd_run(args) -> int:
    try:
        raw = load_config(args.config)
        resolved = resolve_config(
            raw,
            config_dir=os.path.dirname(os.path.abspath(args.config)),
            seed_override=args.seed,
            steps_override=args.steps,
        )
        digest = config_hash(resolved)
        definition, steps, postprocess = definition_from_config(resolved)
    except ConfigError as exc:
        _error_listing("config", [str(exc)])
        return 2

    outdir = args.out
    os.makedirs(outdir, exist_ok=True)
    manifest = {
        "config": os.path.abspath(args.config),
        "config_hash": digest,
        "seed": definition.seed,
        "steps": steps,
        "out": os.path.abspath(outdir),
        "version": __version__,
    }
    with open(os.path.join(outdir, "manifest.json"), "w") as handle:
        json.dump(manifest, handle, indent=2, sort_keys=True)
        handle.write("\n")

    try:
        sim = build(definition)
    except NetworkValidationError as exc:
        _error_listing("validation", exc.errors)
        return 2

    started = time.perf_counter()
    try:
        monitors = sim.run(steps, backend=args.backend)
    except StateOverflowError as exc:
        _error_listing("overflow", [str(exc)])
        return 3
    wall_time = time.perf_counter() - started

    files = []
    for monitor in monitors.values():
        files.append(write_monitor_csv(monitor, outdir))
    try:
        for spec in postprocess:
            files.append(write_stdp_window_csv(spec, monitors, outdir))
    except ConfigError as exc:
        _error_listing("config", [str(exc)])
        return 2

    summary = {
        "config_hash": digest,
        "seed": definition.seed,
        "steps": steps,
        "wall_time_s": wall_time,
        "outputs": [os.path.basename(f) for f in sorted(files)],
    }
    with open(os.path.join(outdir, "summary.json"), "w") as handle:
        json.dump(summary, handle, indent=2, sort_keys=True)
        handle.write("\n")
    print(f"ran {steps} steps in {wall_time:.2f}s; wrote {len(files)} files to {outdir}")
    return 0


def cmd_weight_table(args) -> int:
    sign_mode = SignMode(args.sign_mode)
    rows = weight_table(sign_mode, args.weight_bits)
    lines = ["sign_mode,n_wb,mantissa,exponent,actual_weight"]
    lines.extend(
        f"{sign_mode.value},{args.weight_bits},{mantissa},{exponent},{actual}"
        for mantissa, exponent, actual in rows
    )
    text = "\n".join(lines) + "\n"
    if args.out == "-":
        sys.stdout.write(text)
    else:
        with open(args.out, "w") as handle:
            handle.write(text)
        print(f"wrote {len(rows)} rows to {args.out}")
    return 0


def cmd_validate(args) -> int:
    try:
        reports = run_suite(args.suite, seed=args.seed, fast=args.fast)
    except ValueError as exc:
        _error_listing("config", [str(exc)])
        return 2
    outdir = args.out
    os.makedirs(outdir, exist_ok=True)
    all_passed = True
    for report in reports:
        for line in report.lines():
            print(line)
        all_passed &= report.passed
        slug = report.experiment.replace(" ", "_").replace("=", "")
        with open(os.path.join(outdir, f"report_{slug}.json"), "w") as handle:
            json.dump(report.to_dict(), handle, indent=2, sort_keys=True)
            handle.write("\n")
        for table_name, rows in report.tables.items():
            path = os.path.join(outdir, f"{slug}_{table_name}.csv")
            with open(path, "w") as handle:
                handle.write("\n".join(",".join(repr(c) for c in row) for row in rows) + "\n")
    print("validation:", "PASS" if all_passed else "FAIL")
    return 0 if all_passed else 1


def cmd_validate_rule(args) -> int:
    try:
        rule = parse_rule(args.rule)
    except RuleError as exc:
        _error_listing("rule", [str(exc)])
        return 2
    print(f"canonical: {rule.to_text()}")
    for k, term in enumerate(rule.terms):
        sign = "-" if term.sign < 0 else "+"
        factors = " * ".join(term.factors) if term.factors else "1"
        print(f"term {k}: sign {sign}, scale 2^{term.log2_scale}, factors {factors}")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="loihiemu",
        description="Deterministic emulator of the Loihi chip's computational unit.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="simulate a network config")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--seed", type=int, default=None, help="override the config seed")
    p_run.add_argument("--steps", type=int, default=None, help="override the step count")
    p_run.add_argument("--out", default=_default_out(), help=f"output dir (or ${_OUT_ENV})")
    p_run.add_argument("--backend", choices=("compiled", "python"), default=None)
    p_run.set_defaults(func=cmd_run)

    p_table = sub.add_parser("weight-table", help="dump the 4096-entry weight table")
    p_table.add_argument(
        "--sign-mode", choices=[mode.value for mode in SignMode], default="excitatory"
    )
    p_table.add_argument("--weight-bits", type=int, default=8)
    p_table.add_argument("--out", default="-", help="output file, '-' for stdout")
    p_table.set_defaults(func=cmd_weight_table)

    p_validate = sub.add_parser("validate", help="run validation suites")
    p_validate.add_argument(
        "--suite", choices=("all", "weights", "traces", "stdp", "oracle"), default="all"
    )
    p_validate.add_argument("--seed", type=int, default=0)
    p_validate.add_argument("--out", default=_default_out())
    p_validate.add_argument(
        "--fast", action="store_true", help="reduced sample counts (smoke test only)"
    )
    p_validate.set_defaults(func=cmd_validate)

    p_rule = sub.add_parser("validate-rule", help="parse and normalize a learning rule")
    p_rule.add_argument("rule")
    p_rule.set_defaults(func=cmd_validate_rule)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
