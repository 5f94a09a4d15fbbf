"""Solution documents and the tables derived from them.

Every table here is computed from the JSON solution document alone, so a
report can always be regenerated from a saved solution.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass
from typing import Iterable

from .adoption import BilevelSolution
from .benders import DesignSolution
from .model import Instance, Mode, RiderClass, TransitNetwork
from .router import RoutedPath

MODE_LABELS = {
    frozenset({Mode.BUS}): "Bus",
    frozenset({Mode.BUS, Mode.RAIL}): "Bus and Rail",
    frozenset({Mode.SHUTTLE, Mode.BUS}): "Shuttle and Bus",
    frozenset({Mode.SHUTTLE, Mode.BUS, Mode.RAIL}): "Shuttle, Bus, and Rail",
    frozenset({Mode.SHUTTLE}): "Shuttle only",
    frozenset({Mode.SHUTTLE, Mode.RAIL}): "Shuttle and Rail",
    frozenset({Mode.RAIL}): "Rail only",
}
MODE_ORDER = list(MODE_LABELS.values())


def classify_mode(path: RoutedPath, network: TransitNetwork) -> str:
    modes = frozenset(network.arc_index[a].mode for a in path.arcs)
    return MODE_LABELS[modes]


def _num(x):
    return x if x is not None and math.isfinite(x) else None


def _shuttle_dollars(network: TransitNetwork, path: RoutedPath, riders: int, per_mile: float) -> float:
    total = 0.0
    for aid in path.arcs:
        arc = network.arc_index[aid]
        if arc.mode is Mode.SHUTTLE:
            total += riders * arc.distance * per_mile * arc.cost_scale
    return total


def _network_section(network: TransitNetwork, open_ids, usage) -> dict:
    """Arcs worth drawing: rail, open bus, and shuttle arcs that carry riders."""
    arcs = {}
    for arc in network.arcs:
        if arc.mode is Mode.RAIL or arc.id in open_ids or (arc.mode is Mode.SHUTTLE and usage.get(arc.id)):
            arcs[arc.id] = {
                "tail": arc.tail,
                "head": arc.head,
                "mode": arc.mode.value,
                "frequency": arc.frequency,
                "travel_time": arc.travel_time,
                "riders": usage.get(arc.id, 0),
            }
    used_locs = sorted({e for a in arcs.values() for e in (a["tail"], a["head"])})
    locs = {k: [network.locations[k].lat, network.locations[k].lon] for k in used_locs}
    return {"arcs": arcs, "locations": locs}


def _trip_records(instance: Instance, routes, decisions, served_ids) -> tuple[dict, dict]:
    net, params = instance.network, instance.params
    usage: dict[str, int] = {}
    trips = {}
    for t in instance.trips:
        path = routes.get(t.id)
        dec = decisions.get(t.id)
        served = t.id in served_ids
        rec = {
            "riders": t.riders,
            "rider_class": t.rider_class.value,
            "locality": t.locality.value,
            "car_time": _num(t.car_time),
            "ticket_price": t.ticket_price,
            "served": served,
            "adopted": None if dec is None else dec.adopted,
            "ratio": None if dec is None else _num(dec.ratio),
            "route": None,
        }
        if path is not None:
            rec["route"] = {
                **path.to_dict(),
                "modes": classify_mode(path, net),
                "shuttle_cost": _shuttle_dollars(net, path, t.riders, params.shuttle_cost_per_mile),
            }
            if served:
                for a in path.arcs:
                    usage[a] = usage.get(a, 0) + t.riders
        trips[t.id] = rec
    return trips, usage


def _design_section(network, design, params) -> dict:
    open_ids = design.sorted_open()
    bus_dollars = sum(
        network.arc_index[a].travel_time / 60.0 * network.arc_index[a].frequency * params.bus_cost_per_hour
        for a in open_ids
    )
    return {"open_arcs": open_ids, "flags": dict(design.open), "bus_cost": bus_dollars}


def bilevel_document(solution: BilevelSolution, meta: dict | None = None) -> dict:
    inst = solution.instance
    served = {t.id for t in solution.served()}
    trips, usage = _trip_records(inst, solution.routes, solution.decisions, served)
    p = solution.parts
    return {
        "kind": "bilevel",
        "meta": meta or {},
        "parameters": asdict(inst.params),
        "design": _design_section(inst.network, solution.design, inst.params),
        "objective": {
            "total": solution.objective,
            "bus_fixed_cost": p.bus_fixed_cost,
            "existing_cost": p.existing_cost,
            "adopter_cost": p.adopter_cost,
            "ticket_benefit": p.ticket_benefit,
        },
        "loop": {
            "rounds": solution.rounds,
            "converged": solution.converged,
            "fixed_open_arcs": sorted(solution.fixed_open_arcs),
            "history": [list(h) for h in solution.history],
        },
        "trips": trips,
        "network": _network_section(inst.network, solution.design.open_ids, usage),
    }


def design_document(solution: DesignSolution, instance: Instance, meta: dict | None = None) -> dict:
    served = set(solution.routes)
    trips, usage = _trip_records(instance, solution.routes, {}, served)
    trips = {k: v for k, v in trips.items() if k in served}
    s = solution.split
    return {
        "kind": "fixed_demand",
        "meta": meta or {},
        "parameters": asdict(instance.params),
        "design": _design_section(instance.network, solution.design, instance.params),
        "objective": {
            "total": solution.objective,
            "bus_fixed_cost": s.bus_fixed_cost,
            "shuttle_cost": s.shuttle_cost,
            "inconvenience": s.inconvenience,
        },
        "benders": {
            "lower_bound": solution.lower_bound,
            "upper_bound": solution.upper_bound,
            "gap": solution.gap,
            "iterations": solution.iterations,
            "converged": solution.converged,
            "cuts": len(solution.cuts),
        },
        "trips": trips,
        "network": _network_section(instance.network, solution.design.open_ids, usage),
    }


# --- tables -----------------------------------------------------------------


@dataclass(frozen=True)
class CostReport:
    total_cost: float
    bus_cost: float
    shuttle_cost: float
    revenue: float
    net_profit_per_rider: float
    ridership: int


def cost_report(doc: dict) -> CostReport:
    """Operating cost and fare revenue in dollars for everyone served."""
    bus = doc["design"]["bus_cost"]
    shuttle = revenue = 0.0
    ridership = 0
    for rec in doc["trips"].values():
        if not rec["served"]:
            continue
        shuttle += rec["route"]["shuttle_cost"]
        revenue += rec["riders"] * rec["ticket_price"]
        ridership += rec["riders"]
    total = bus + shuttle
    per_rider = (revenue - total) / ridership if ridership else 0.0
    return CostReport(total, bus, shuttle, revenue, per_rider, ridership)


def _avg(pairs):
    w = sum(n for n, _ in pairs)
    return None if w == 0 else sum(n * x for n, x in pairs) / w


ADOPTION_COLUMNS = [
    "scenario",
    "dbl",
    "locality",
    "existing_count",
    "adoption_count",
    "adoption_rate",
    "pre_dbl",
    "post_dbl",
    "car_existing_min",
    "odmts_existing_min",
    "odmts_adopted_min",
    "odmts_pre_dbl_min",
    "odmts_post_dbl_min",
]


def adoption_rows(doc: dict, pre_dbl_ids=None, post_dbl_ids=None, show_split=False) -> list[dict]:
    """Ridership and average travel times per locality, weighted by riders.

    ``pre_dbl_ids``/``post_dbl_ids`` classify adopters of a paired run; the
    counts are only shown on the DBL row (``show_split``), the travel times
    on both rows.
    """
    meta = doc.get("meta", {})
    rows = []
    by_loc: dict[str, list] = {}
    for tid, rec in sorted(doc["trips"].items()):
        by_loc.setdefault(rec["locality"], []).append((tid, rec))
    for loc in sorted(by_loc):
        recs = by_loc[loc]
        existing = [r for _, r in recs if r["rider_class"] == RiderClass.EXISTING.value]
        potential = [(t, r) for t, r in recs if r["rider_class"] == RiderClass.POTENTIAL.value]
        adopted = [(t, r) for t, r in potential if r["adopted"]]
        n_pot = sum(r["riders"] for _, r in potential)
        n_adopt = sum(r["riders"] for _, r in adopted)
        row = {
            "scenario": meta.get("scenario", ""),
            "dbl": "Yes" if meta.get("dbl") else "No",
            "locality": loc,
            "existing_count": sum(r["riders"] for r in existing),
            "adoption_count": n_adopt,
            "adoption_rate": n_adopt / n_pot if n_pot else None,
            "pre_dbl": None,
            "post_dbl": None,
            "car_existing_min": _avg([(r["riders"], r["car_time"]) for r in existing if r["car_time"] is not None]),
            "odmts_existing_min": _avg([(r["riders"], r["route"]["trip_length"]) for r in existing if r["route"]]),
            "odmts_adopted_min": _avg([(r["riders"], r["route"]["trip_length"]) for _, r in adopted]),
            "odmts_pre_dbl_min": None,
            "odmts_post_dbl_min": None,
        }
        if pre_dbl_ids is not None:
            pre = [r for t, r in potential if t in pre_dbl_ids and r["route"]]
            post = [r for t, r in potential if t in post_dbl_ids and r["route"]]
            row["odmts_pre_dbl_min"] = _avg([(r["riders"], r["route"]["trip_length"]) for r in pre])
            row["odmts_post_dbl_min"] = _avg([(r["riders"], r["route"]["trip_length"]) for r in post])
            if show_split:
                row["pre_dbl"] = sum(r["riders"] for t, r in adopted if t in pre_dbl_ids)
                row["post_dbl"] = sum(r["riders"] for t, r in adopted if t in post_dbl_ids)
        rows.append(row)
    return rows


def paired_adoption_rows(no_dbl: dict, dbl: dict) -> list[dict]:
    """Rows for a no-DBL run and a DBL run of the same scenario.

    A DBL adopter is PreDBL if they also adopt without DBLs, PostDBL otherwise.
    """
    before = {t for t, r in no_dbl["trips"].items() if r["adopted"]}
    after = {t for t, r in dbl["trips"].items() if r["adopted"]}
    pre, post = after & before, after - before
    return adoption_rows(no_dbl, pre, post) + adoption_rows(dbl, pre, post, show_split=True)


def mode_rows(doc: dict) -> list[dict]:
    """Mode combinations used by adopted potential riders, per locality."""
    counts: dict[tuple[str, str], int] = {}
    for rec in doc["trips"].values():
        if rec["rider_class"] == RiderClass.POTENTIAL.value and rec["adopted"]:
            key = (rec["locality"], rec["route"]["modes"])
            counts[key] = counts.get(key, 0) + rec["riders"]
    rows = []
    for loc in sorted({k[0] for k in counts}):
        for label in MODE_ORDER:
            if (loc, label) in counts:
                rows.append({"locality": loc, "modes": label, "count": counts[(loc, label)]})
        rows.append({"locality": loc, "modes": "Total", "count": sum(v for k, v in counts.items() if k[0] == loc)})
    return rows


def ratio_rows(doc: dict) -> list[dict]:
    """ODMTS-to-car travel time ratio of every potential rider, sorted."""
    rows = [
        {"trip": t, "locality": r["locality"], "riders": r["riders"], "ratio": r["ratio"], "adopted": r["adopted"]}
        for t, r in doc["trips"].items()
        if r["rider_class"] == RiderClass.POTENTIAL.value
    ]
    return sorted(rows, key=lambda r: (math.inf if r["ratio"] is None else r["ratio"], r["trip"]))


def to_geojson(doc: dict) -> dict:
    """LineString per drawn arc; ``riders`` is the usage weight for line width."""
    net = doc["network"]
    feats = []
    for aid, a in sorted(net["arcs"].items()):
        t, h = net["locations"][a["tail"]], net["locations"][a["head"]]
        feats.append(
            {
                "type": "Feature",
                "geometry": {"type": "LineString", "coordinates": [[t[1], t[0]], [h[1], h[0]]]},
                "properties": {"id": aid, **a},
            }
        )
    return {"type": "FeatureCollection", "features": feats}


def _fmt(v):
    if v is None:
        return "-"
    if isinstance(v, float):
        return f"{v:.6g}"
    return v


def csv_text(rows: Iterable[dict], columns: list[str] | None = None) -> str:
    rows = list(rows)
    if columns is None:
        columns = list(rows[0]) if rows else []
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: _fmt(r.get(k)) for k in columns})
    return buf.getvalue()
