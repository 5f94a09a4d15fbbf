"""Command-line entry point.

Exit codes: 0 success, 2 invalid input, 3 solver stopped before converging
(outputs are still written), 4 file system errors.  Outputs of a run are
written together at the end; if writing fails, files already written by
the run are removed.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import dataclass
from pathlib import Path

from .adoption import AdoptionLimits, solve_bilevel
from .benders import BendersLimits, FixedDemandInstance, balance_violations, solve_fixed_demand
from .errors import ConfigurationError, ConsistencyError, SolverLimitReached, ValidationError
from .io import instance_to_dict, load_instance
from .model import Instance
from .reporting import (
    ADOPTION_COLUMNS,
    adoption_rows,
    bilevel_document,
    cost_report,
    csv_text,
    design_document,
    mode_rows,
    paired_adoption_rows,
    ratio_rows,
    to_geojson,
)
from .scenarios import (
    ScenarioTag,
    apply_overlay,
    apply_scenario,
    build_scaling_matrix,
    load_matrix,
    load_overlay,
    read_qrls,
    read_query_dump,
)

log = logging.getLogger("odmts")

EXIT_OK, EXIT_INVALID, EXIT_NOT_CONVERGED, EXIT_IO = 0, 2, 3, 4


@dataclass(frozen=True)
class ExperimentConfig:
    instance: Path
    scenario: ScenarioTag = ScenarioTag.BASELINE
    qrl: Path | None = None
    queries: Path | None = None
    matrix: Path | None = None
    dbl: Path | None = None
    rho: tuple[float, ...] = ()
    sync: bool = False
    tolerance: float = 1e-6
    max_rounds: int = 20
    out: Path = Path("out")

    def __post_init__(self):
        for name in ("instance", "qrl", "queries", "matrix", "dbl"):
            p = getattr(self, name)
            if p is not None and not Path(p).is_file():
                raise FileNotFoundError(f"{name} file not found: {p}")
        if self.scenario is not ScenarioTag.BASELINE:
            if self.qrl is None or (self.queries is None and self.matrix is None):
                raise ConfigurationError(f"scenario {self.scenario.value} needs --qrl and --queries or --matrix")
        if self.qrl is not None and self.queries is None and self.matrix is None:
            raise ConfigurationError("--qrl needs --queries or --matrix")
        if any(r < 0 for r in self.rho):
            raise ConfigurationError("--rho values must be >= 0")
        if not self.tolerance > 0:
            raise ConfigurationError("--tolerance must be positive")
        if self.max_rounds < 1:
            raise ConfigurationError("--max-rounds must be >= 1")

    def meta(self, dbl: bool | None = None, rho: float | None = None) -> dict:
        return {
            "instance": Path(self.instance).name,
            "scenario": self.scenario.value,
            "dbl": (self.dbl is not None) if dbl is None else dbl,
            "rho": rho,
            "sync": self.sync,
            "tolerance": self.tolerance,
            "max_rounds": self.max_rounds,
        }


def prepare_instance(config: ExperimentConfig, with_dbl: bool = True, rho: float | None = None) -> Instance:
    """Load the instance and apply scenario scaling, the DBL overlay and overrides."""
    inst = load_instance(config.instance)
    overlay = load_overlay(config.dbl) if (with_dbl and config.dbl is not None) else None
    if config.qrl is not None:
        qrls = read_qrls(config.qrl)
        if config.matrix is not None:
            matrix = load_matrix(config.matrix)
            if matrix.scenario is not config.scenario:
                raise ConfigurationError(
                    f"matrix is for scenario {matrix.scenario.value}, not {config.scenario.value}"
                )
        else:
            matrix = build_scaling_matrix(read_query_dump(config.queries), config.scenario)
        inst = apply_scenario(inst, qrls, matrix, overlay)
    elif overlay is not None:
        inst = inst.replace(network=apply_overlay(inst.network, overlay))
    changes = {}
    if config.sync:
        changes["synchronized"] = True
    if rho is not None:
        changes["adoption_factor"] = float(rho)
    if changes:
        inst = inst.replace(params=inst.params.replace(**changes))
    return inst


def _limits(config: ExperimentConfig) -> AdoptionLimits:
    return AdoptionLimits(max_rounds=config.max_rounds, tolerance=config.tolerance, benders=BendersLimits())


def _json(doc) -> str:
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def _cost_csv(docs: dict[str, dict]) -> str:
    rows = [{"run": name, **vars(cost_report(doc))} for name, doc in docs.items()]
    return csv_text(rows, ["run", "total_cost", "bus_cost", "shuttle_cost", "revenue", "net_profit_per_rider", "ridership"])


def bilevel_outputs(doc: dict) -> dict[str, str]:
    return {
        "solution.json": _json(doc),
        "adoption.csv": csv_text(adoption_rows(doc), ADOPTION_COLUMNS),
        "modes.csv": csv_text(mode_rows(doc), ["locality", "modes", "count"]),
        "costs.csv": _cost_csv({"solution": doc}),
        "ratios.csv": csv_text(ratio_rows(doc), ["trip", "locality", "riders", "ratio", "adopted"]),
        "network.geojson": _json(to_geojson(doc)),
    }


def _check_balance(instance: Instance, design) -> None:
    bad = balance_violations(instance.network, design)
    if bad:
        raise ConsistencyError(f"design violates frequency balance at {bad}")


def run_solve(config: ExperimentConfig, with_dbl: bool = True, rho: float | None = None):
    inst = prepare_instance(config, with_dbl, rho)
    sol = solve_bilevel(inst, _limits(config))
    _check_balance(inst, sol.design)
    doc = bilevel_document(sol, config.meta(dbl=with_dbl and config.dbl is not None, rho=inst.params.adoption_factor))
    return doc, sol.converged


def run_design(config: ExperimentConfig, all_riders: bool = False):
    inst = prepare_instance(config)
    trips = inst.trips if all_riders else inst.existing_trips
    sol = solve_fixed_demand(FixedDemandInstance(inst.network, trips, inst.params), config.tolerance)
    _check_balance(inst, sol.design)
    sub = inst.replace(trips=trips)
    doc = design_document(sol, sub, config.meta())
    outputs = {
        "solution.json": _json(doc),
        "costs.csv": _cost_csv({"solution": doc}),
        "network.geojson": _json(to_geojson(doc)),
    }
    return outputs, sol.converged


def run_experiment(config: ExperimentConfig, verb: str = "solve", **options) -> tuple[dict[str, str], bool]:
    """Run one CLI verb and return ``(file name -> contents, converged)``.

    Nothing touches the disk here; :func:`write_outputs` does that.
    """
    if verb == "design":
        return run_design(config, options.get("all_riders", False))
    if verb == "solve":
        if len(config.rho) > 1:
            raise ConfigurationError("solve takes a single --rho; use sweep for a list")
        doc, ok = run_solve(config, rho=config.rho[0] if config.rho else None)
        return bilevel_outputs(doc), ok
    if verb == "sweep":
        if not config.rho:
            raise ConfigurationError("sweep needs --rho with at least one value")
        outputs, all_ok, summary = {}, True, []
        for rho in config.rho:
            doc, ok = run_solve(config, rho=rho)
            all_ok &= ok
            tag = f"rho_{rho:g}"
            for name, text in bilevel_outputs(doc).items():
                outputs[f"{tag}/{name}"] = text
            for row in adoption_rows(doc):
                summary.append({"rho": rho, "locality": row["locality"], "adoption_count": row["adoption_count"],
                                "adoption_rate": row["adoption_rate"], "objective": doc["objective"]["total"],
                                "converged": doc["loop"]["converged"]})
        outputs["sweep.csv"] = csv_text(
            summary, ["rho", "locality", "adoption_count", "adoption_rate", "objective", "converged"]
        )
        return outputs, all_ok
    if verb == "report":
        pair = options.get("solutions")
        if pair:
            no_dbl, dbl = (json.loads(Path(p).read_text()) for p in pair)
            ok = no_dbl["loop"]["converged"] and dbl["loop"]["converged"]
        else:
            if config.dbl is None:
                raise ConfigurationError("report needs --dbl or --solutions A B")
            rho = config.rho[0] if config.rho else None
            no_dbl, ok1 = run_solve(config, with_dbl=False, rho=rho)
            dbl, ok2 = run_solve(config, with_dbl=True, rho=rho)
            ok = ok1 and ok2
        for d in (no_dbl, dbl):
            if d.get("kind") != "bilevel":
                raise ConfigurationError("report compares bilevel solutions")
        mode_table = [{"run": "no_dbl", **r} for r in mode_rows(no_dbl)] + [{"run": "dbl", **r} for r in mode_rows(dbl)]
        outputs = {
            "adoption.csv": csv_text(paired_adoption_rows(no_dbl, dbl), ADOPTION_COLUMNS),
            "modes.csv": csv_text(mode_table, ["run", "locality", "modes", "count"]),
            "costs.csv": _cost_csv({"no_dbl": no_dbl, "dbl": dbl}),
        }
        if not pair:
            outputs["no_dbl/solution.json"] = _json(no_dbl)
            outputs["dbl/solution.json"] = _json(dbl)
        return outputs, ok
    raise ConfigurationError(f"unknown verb {verb!r}")


def write_outputs(outputs: dict[str, str], out_dir: Path) -> list[Path]:
    """Write every output; on failure remove whatever this call created."""
    written: list[Path] = []
    made_dirs: list[Path] = []
    try:
        for name in sorted(outputs):
            path = Path(out_dir) / name
            for parent in reversed(path.parents):
                if not parent.exists():
                    parent.mkdir()
                    made_dirs.append(parent)
            path.write_text(outputs[name])
            written.append(path)
    except BaseException:
        for p in written:
            p.unlink(missing_ok=True)
        for d in reversed(made_dirs):
            try:
                d.rmdir()
            except OSError:
                pass
        raise
    return written


# --- argument parsing -------------------------------------------------------


def _rho_list(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number or comma-separated list: {text!r}") from None


def _scenario(text: str) -> ScenarioTag:
    try:
        tag = ScenarioTag.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None
    if tag is ScenarioTag.CUSTOM:
        raise argparse.ArgumentTypeError("choose baseline, expected, 50-50 or pessimistic")
    return tag


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--instance", type=Path, help="instance JSON")
    common.add_argument("--scenario", type=_scenario, default=ScenarioTag.BASELINE,
                        help="baseline | expected | 50-50 | pessimistic")
    common.add_argument("--qrl", type=Path, help="QRL CSV (id,lat,lon)")
    common.add_argument("--queries", type=Path, help="QRL travel time CSV")
    common.add_argument("--matrix", type=Path, help="scaling matrix JSON written by 'scale'")
    common.add_argument("--dbl", type=Path, help="dedicated bus lane overlay JSON")
    common.add_argument("--rho", type=_rho_list, default=(), help="adoption factor or comma-separated list")
    common.add_argument("--sync", action="store_true", help="synchronized transfers (no added waits)")
    common.add_argument("--tolerance", type=float, default=1e-6)
    common.add_argument("--max-rounds", type=int, default=20)
    common.add_argument("--out", type=Path, default=Path("out"))
    common.add_argument("-v", "--verbose", action="count", default=0)

    p = _Parser(prog="odmts", description="ODMTS design under congestion scenarios")
    sub = p.add_subparsers(dest="verb", required=True, parser_class=_Parser)
    sub.add_parser("validate", parents=[common], help="check instance and scenario inputs")
    sub.add_parser("scale", parents=[common], help="write the scaling matrix and scaled instance")
    d = sub.add_parser("design", parents=[common], help="fixed-demand design")
    d.add_argument("--all-riders", action="store_true", help="also serve every potential rider")
    sub.add_parser("solve", parents=[common], help="design with latent demand")
    sub.add_parser("sweep", parents=[common], help="solve for each --rho value")
    r = sub.add_parser("report", parents=[common], help="compare runs without and with DBL")
    r.add_argument("--solutions", nargs=2, type=Path, metavar=("NO_DBL", "DBL"),
                   help="use two saved solutions instead of solving")
    g = sub.add_parser("export-geojson", parents=[common], help="GeoJSON of a saved solution")
    g.add_argument("--solution", type=Path, required=True)
    return p


def _config(args) -> ExperimentConfig:
    if args.instance is None:
        raise ConfigurationError("--instance is required")
    return ExperimentConfig(
        instance=args.instance, scenario=args.scenario, qrl=args.qrl, queries=args.queries, matrix=args.matrix,
        dbl=args.dbl, rho=args.rho, sync=args.sync, tolerance=args.tolerance, max_rounds=args.max_rounds,
        out=args.out,
    )


def _dispatch(args) -> int:
    if args.verb == "export-geojson":
        doc = json.loads(Path(args.solution).read_text())
        write_outputs({"network.geojson": _json(to_geojson(doc))}, args.out)
        return EXIT_OK
    if args.verb == "report" and args.solutions:
        outputs, ok = run_experiment(None, "report", solutions=args.solutions)
        write_outputs(outputs, args.out)
        return EXIT_OK if ok else EXIT_NOT_CONVERGED
    config = _config(args)
    if args.verb == "validate":
        inst = prepare_instance(config)
        print(
            f"ok: {len(inst.network.locations)} locations, {len(inst.network.arcs)} arcs "
            f"({len(inst.network.bus_arcs)} bus), {len(inst.existing_trips)} existing and "
            f"{len(inst.potential_trips)} potential trips"
        )
        return EXIT_OK
    if args.verb == "scale":
        outputs = {"instance.json": _json(instance_to_dict(prepare_instance(config)))}
        if config.queries is not None:
            matrix = build_scaling_matrix(read_query_dump(config.queries), config.scenario)
            outputs["matrix.json"] = _json(matrix.to_dict())
        write_outputs(outputs, config.out)
        return EXIT_OK
    outputs, ok = run_experiment(config, args.verb, all_riders=getattr(args, "all_riders", False))
    write_outputs(outputs, config.out)
    if not ok:
        log.warning("solver stopped before convergence; outputs hold the best design found")
        return EXIT_NOT_CONVERGED
    return EXIT_OK


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:  # usage errors and --help
        return exc.code if isinstance(exc.code, int) else EXIT_INVALID
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(name)s: %(message)s")
    try:
        return _dispatch(args)
    except (ValidationError, ConfigurationError, ValueError, KeyError, LookupError) as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except SolverLimitReached as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_NOT_CONVERGED


if __name__ == "__main__":
    sys.exit(main())
