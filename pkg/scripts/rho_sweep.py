"""Adoption factor sweep on the synthetic instance.

For each scenario, re-solves the design for every rho and also re-evaluates
the rider choices on the rho=1.5 design, which isolates the choice effect.
"""

import argparse
from pathlib import Path

from odmts.adoption import adoption_rate, reevaluate_choices, sweep_adoption_factor
from odmts.cli import ExperimentConfig, prepare_instance
from odmts.reporting import csv_text
from odmts.scenarios import ScenarioTag
from odmts.synthetic import data_path


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--rho", default="1.3,1.4,1.5,1.6,1.7")
    ap.add_argument("--out", type=Path, default=Path("results/rho_sweep.csv"))
    ap.add_argument("--dbl", action="store_true")
    args = ap.parse_args()
    grid = [float(x) for x in args.rho.split(",")]
    rows = []
    for tag in (ScenarioTag.BASELINE, ScenarioTag.EXPECTED, ScenarioTag.FIFTY_FIFTY, ScenarioTag.PESSIMISTIC):
        config = ExperimentConfig(
            instance=data_path("instance.json"), scenario=tag, qrl=data_path("qrls.csv"),
            queries=data_path("queries.csv"), dbl=data_path("dbl.json") if args.dbl else None,
        )
        inst = prepare_instance(config)
        sols = sweep_adoption_factor(inst, grid + [1.5])
        ref = sols[1.5]
        pot = [t for t in inst.trips if t.is_potential]
        total = sum(t.riders for t in pot)
        for rho in grid:
            fixed = reevaluate_choices(ref, rho)
            rows.append({
                "scenario": tag.value,
                "rho": rho,
                "redesigned_rate": adoption_rate(sols[rho]),
                "fixed_design_rate": sum(t.riders for t in pot if fixed[t.id].adopted) / total,
                "objective": sols[rho].objective,
            })
    args.out.parent.mkdir(parents=True, exist_ok=True)
    text = csv_text(rows, ["scenario", "rho", "redesigned_rate", "fixed_design_rate", "objective"])
    args.out.write_text(text)
    print(text, end="")


if __name__ == "__main__":
    main()
