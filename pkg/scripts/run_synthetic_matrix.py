"""Solve the synthetic instance for every scenario with and without DBLs.

Writes one directory per scenario with the paired report, and prints a
summary of corridor bus use and adoption.
"""

import argparse
from pathlib import Path

from odmts.cli import ExperimentConfig, run_experiment, write_outputs
from odmts.reporting import cost_report
from odmts.scenarios import ScenarioTag
from odmts.synthetic import data_path
import json

SCENARIOS = [ScenarioTag.BASELINE, ScenarioTag.EXPECTED, ScenarioTag.FIFTY_FIFTY, ScenarioTag.PESSIMISTIC]


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", type=Path, default=Path("results/synthetic"))
    ap.add_argument("--sync", action="store_true")
    args = ap.parse_args()
    print(f"{'scenario':12} {'dbl':4} {'corridor':8} {'adopters':>8} {'rate':>6} {'profit/rider':>12}")
    for tag in SCENARIOS:
        config = ExperimentConfig(
            instance=data_path("instance.json"), scenario=tag, qrl=data_path("qrls.csv"),
            queries=data_path("queries.csv"), dbl=data_path("dbl.json"), sync=args.sync,
        )
        outputs, _ = run_experiment(config, "report")
        write_outputs(outputs, args.out / tag.value)
        for run in ("no_dbl", "dbl"):
            doc = json.loads(outputs[f"{run}/solution.json"])
            corridor = any(a.startswith("bus_corridor") for a in doc["design"]["open_arcs"])
            pot = [r for r in doc["trips"].values() if r["rider_class"] == "potential"]
            adopted = sum(r["riders"] for r in pot if r["adopted"])
            rate = adopted / sum(r["riders"] for r in pot)
            profit = cost_report(doc).net_profit_per_rider
            print(f"{tag.value:12} {run == 'dbl'!s:4} {corridor!s:8} {adopted:8d} {rate:6.1%} {profit:12.3f}")


if __name__ == "__main__":
    main()
