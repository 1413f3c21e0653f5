"""Command-line entry point: ``resman run|validate|compare|trace``."""

from __future__ import annotations

import argparse
import sys
from typing import Optional, Sequence

from .baselines import DecisionModel
from .config import load_config
from .contracts import ContractError
from .harness import (ACCOUNTING, ARCHITECTURES, ComparisonError, compare, run_experiment,
                      simulate, validate_config)
from .plant import ConfigError
from .records import RecordError, read_report, report_csv, report_lines, trace_lines, write_report
from .scenarios import ScriptError, load_script

EXIT_OK, EXIT_INVALID, EXIT_ERROR = 0, 1, 2


def _emit(text: str, out: Optional[str]):
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def cmd_run(args) -> int:
    config = load_config(args.config)
    report = validate_config(config)
    if not report.ok:
        for line in report.failures():
            print(f"invalid: {line}", file=sys.stderr)
        return EXIT_INVALID
    script = load_script(args.scenario)
    result = run_experiment(config, script, args.arch, args.accounting,
                            DecisionModel(args.decision_model))
    if args.out:
        write_report(result, args.out, args.format)
    elif args.format == "csv":
        sys.stdout.write(report_csv(result))
    else:
        sys.stdout.write("\n".join(report_lines(result)) + "\n")
    for d in result.divergences:
        print(f"note: {d.quantity} = {d.value}; {d.basis} gives {d.alternative}",
              file=sys.stderr)
    return EXIT_OK


def cmd_validate(args) -> int:
    config = load_config(args.config)
    report = validate_config(config)
    for check in report.nodes:
        status = "ok" if check.ok else "FAIL"
        if check.children:
            print(f"{status} {' * '.join(check.children)} refines {check.name}")
        else:
            print(f"{status} {check.name} (leaf)")
    for check in report.timing:
        status = "ok" if check.ok else "FAIL"
        print(f"{status} timing at {check.speed.value}: components {check.components} < "
              f"subsystem {check.subsystem} < travel {check.travel}")
    for line in report.failures():
        print(f"  {line}")
    return EXIT_OK if report.ok else EXIT_INVALID


def cmd_compare(args) -> int:
    reports = [read_report(p) for p in args.reports]
    result = compare(reports)
    for line in result.lines():
        print(line)
    return EXIT_OK


def cmd_trace(args) -> int:
    config = load_config(args.config)
    sim = simulate(config, load_script(args.scenario))
    lines = trace_lines(sim.plant.log, sim.hierarchy.messages, sim.hierarchy.decisions)
    _emit("\n".join(lines) + "\n", args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="resman", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="execute a scenario script and write a report")
    run.add_argument("--config", help="JSON configuration file (defaults if omitted)")
    run.add_argument("--scenario", default="canonical", help="script file or 'canonical'")
    run.add_argument("--arch", choices=ARCHITECTURES, default="hierarchical")
    run.add_argument("--accounting", choices=ACCOUNTING, default="scenario-origin")
    run.add_argument("--decision-model", choices=[m.value for m in DecisionModel],
                     default=DecisionModel.MIRROR_HIERARCHICAL.value)
    run.add_argument("--out", help="report path (stdout if omitted)")
    run.add_argument("--format", choices=("structured", "csv"), default="structured")
    run.set_defaults(func=cmd_run)

    val = sub.add_parser("validate", help="check contract hierarchy and plant config")
    val.add_argument("--config")
    val.set_defaults(func=cmd_validate)

    cmp_ = sub.add_parser("compare", help="savings of the hierarchical run vs baselines")
    cmp_.add_argument("reports", nargs="+")
    cmp_.set_defaults(func=cmd_compare)

    tr = sub.add_parser("trace", help="dump event, message and decision logs")
    tr.add_argument("--config")
    tr.add_argument("--scenario", default="canonical")
    tr.add_argument("--out")
    tr.set_defaults(func=cmd_trace)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ScriptError, ContractError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID if args.command == "validate" else EXIT_ERROR
    except (ComparisonError, RecordError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
