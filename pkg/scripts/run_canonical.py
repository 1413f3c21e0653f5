"""Run the canonical fault script under every architecture and print the comparison.

Usage: python scripts/run_canonical.py [--config PATH] [--out DIR]
"""

import argparse
from pathlib import Path

from resman.config import load_config
from resman.harness import compare, run_experiment, simulate
from resman.records import write_report
from resman.scenarios import canonical_script


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--config")
    parser.add_argument("--out", default="reports")
    args = parser.parse_args()

    config = load_config(args.config)
    script = canonical_script()
    sim = simulate(config, script)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    runs = [("hierarchical", "scenario-origin"), ("hierarchical", "physical"),
            ("centralized", "scenario-origin"), ("decentralized", "scenario-origin")]
    reports = {}
    for arch, accounting in runs:
        r = run_experiment(config, script, arch, accounting, simulation=sim)
        write_report(r, out / f"{arch}-{accounting}.jsonl")
        reports[(arch, accounting)] = r
        print(f"{arch:13s} {accounting:15s} faults={r.fault_count} messages={r.messages} "
              f"decisions={r.decisions} time={r.recovery_time_ms} ms")
        for d in r.divergences:
            print(f"{'':29s} note: {d.quantity} {d.value} vs {d.alternative} ({d.basis})")

    print()
    print("per scenario (hierarchical, scenario-origin):")
    for s in reports[("hierarchical", "scenario-origin")].scenarios:
        print(f"  {s.label:6s} faults={s.faults} messages={s.messages} decisions={s.decisions} "
              f"bin={s.bin} speed_after={s.speed_after}")

    print()
    chosen = [r for (arch, acct), r in reports.items() if acct == "scenario-origin"]
    for line in compare(chosen).lines():
        print(line)


if __name__ == "__main__":
    main()
