"""Bundled two-region instance with one congested corridor.

A suburb (hub ``HS``) sends commuters to a city core (hubs ``HM``, ``HC``).
They can ride the corridor bus ``HS -> HM`` or take the feeder bus to the
rail station ``HD`` and continue by rail.  The corridor is the road pair
that congests most under the pessimistic traffic model; a dedicated bus
lane on it restores free-flow bus times.

Everything is generated deterministically; ``write_synthetic`` regenerates
the data files shipped in ``odmts/data/synthetic``.
"""

from __future__ import annotations

import csv
import json
from importlib import resources
from pathlib import Path

from .scenarios import great_circle_miles

ROAD_DETOUR = 1.25
ROAD_MPH = 40.0
SHUTTLE_OVERHEAD_MIN = 2.0

QRLS = {
    "N1": (34.000, -84.100),
    "N2": (33.900, -84.270),
    "C1": (33.765, -84.390),
}

# baseline, expected, pessimistic minutes between QRLs (both directions)
QUERY_MINUTES = {
    ("N1", "N2"): (20, 24, 28),
    ("N1", "C1"): (32, 48, 80),
    ("N2", "C1"): (22, 28, 36),
}

HUBS = {
    "HS": (34.000, -84.100),
    "HD": (33.900, -84.270),
    "HM": (33.780, -84.385),
    "HC": (33.750, -84.390),
}

STOPS = {
    "S1": (34.020, -84.090),
    "S2": (33.985, -84.120),
    "S3": (34.015, -84.125),
    "S4": (33.990, -84.080),
    "D1": (33.910, -84.255),
    "D2": (33.890, -84.290),
    "M1": (33.790, -84.370),
    "M2": (33.775, -84.400),
    "K1": (33.745, -84.380),
    "K2": (33.755, -84.405),
}

REGION = {"S": "suburb", "D": "station", "M": "city", "K": "city"}

# (name, tail, head, frequencies); bus arcs come in both directions
BUS_LINES = [
    ("corridor", "HS", "HM", (2, 4)),
    ("feeder", "HS", "HD", (2, 4)),
    ("crosstown", "HD", "HC", (2,)),
]
RAIL_LINES = [("red", "HD", "HM", 32.0, 8), ("core", "HM", "HC", 4.0, 8)]

# (id prefix, origin, destination, riders, class, locality, car minutes)
TRIPS = [
    ("c1", "S1", "K1", 60, "existing", "non_local", None),
    ("c2", "S2", "M1", 55, "existing", "non_local", None),
    ("c3", "S3", "K2", 50, "existing", "non_local", None),
    ("c4", "S4", "M2", 45, "existing", "non_local", None),
    ("r1", "D1", "K1", 30, "existing", "non_local", None),
    ("r2", "D2", "M2", 25, "existing", "non_local", None),
    ("l1", "S1", "S2", 10, "existing", "local", None),
    ("l2", "K1", "M1", 12, "existing", "local", None),
    ("p1", "S1", "M1", 20, "potential", "non_local", None),
    ("p2", "S2", "K1", 18, "potential", "non_local", None),
    ("p3", "S3", "M2", 16, "potential", "non_local", None),
    ("p4", "S4", "K2", 14, "potential", "non_local", None),
    ("p5", "D2", "K2", 12, "potential", "non_local", None),
    ("p6", "S1", "M2", 15, "potential", "non_local", 22.0),
    ("q1", "S3", "S4", 8, "potential", "local", None),
    ("q2", "K2", "M1", 9, "potential", "local", None),
]

# free-flow minutes per bus mile on a dedicated lane
DBL_MIN_PER_MILE = 60.0 / 45.0


def road_miles(a, b) -> float:
    return ROAD_DETOUR * great_circle_miles(*a, *b)


def drive_minutes(a, b) -> float:
    return 60.0 * road_miles(a, b) / ROAD_MPH


def _r(x: float) -> float:
    return round(x, 2)


def build_instance() -> dict:
    coords = {**HUBS, **STOPS}
    locations = [{"id": h, "lat": c[0], "lon": c[1], "kind": "hub"} for h, c in HUBS.items()]
    locations += [{"id": s, "lat": c[0], "lon": c[1], "kind": "virtual_stop"} for s, c in STOPS.items()]
    arcs = []
    for name, tail, head, freqs in BUS_LINES:
        minutes = _r(drive_minutes(HUBS[tail], HUBS[head]))
        miles = _r(road_miles(HUBS[tail], HUBS[head]))
        for u, v, tag in ((tail, head, "out"), (head, tail, "back")):
            for f in freqs:
                arcs.append(
                    {"id": f"bus_{name}_{tag}_f{f}", "tail": u, "head": v, "mode": "bus",
                     "travel_time": minutes, "distance": miles, "frequency": f}
                )
    for name, a, b, minutes, f in RAIL_LINES:
        miles = _r(road_miles(HUBS[a], HUBS[b]))
        for u, v, tag in ((a, b, "out"), (b, a, "back")):
            arcs.append(
                {"id": f"rail_{name}_{tag}", "tail": u, "head": v, "mode": "rail",
                 "travel_time": minutes, "distance": miles, "frequency": f}
            )
    # shuttles: every stop to and from every hub, plus stop pairs within a region
    for s, sc in STOPS.items():
        for h, hc in HUBS.items():
            for u, v in ((s, h), (h, s)):
                arcs.append(_shuttle(u, v, coords))
    for s in STOPS:
        for t in STOPS:
            if s != t and REGION[s[0]] == REGION[t[0]]:
                arcs.append(_shuttle(s, t, coords))
    trips = []
    for tid, o, d, riders, cls, loc, car in TRIPS:
        rec = {"id": tid, "origin": o, "destination": d, "riders": riders, "rider_class": cls, "locality": loc}
        if cls == "potential":
            rec["car_time"] = _r(car if car is not None else drive_minutes(coords[o], coords[d]))
        trips.append(rec)
    return {
        "locations": locations,
        "arcs": sorted(arcs, key=lambda a: a["id"]),
        "trips": trips,
        "parameters": {"alpha": 0.1078, "bus_cost_per_hour": 72.15, "shuttle_cost_per_mile": 1.0,
                       "adoption_factor": 1.5, "wait_minutes_bus_rail": 5.0},
    }


def _shuttle(u, v, coords) -> dict:
    return {
        "id": f"sh_{u}_{v}", "tail": u, "head": v, "mode": "shuttle",
        "travel_time": _r(SHUTTLE_OVERHEAD_MIN + drive_minutes(coords[u], coords[v])),
        "distance": _r(road_miles(coords[u], coords[v])),
    }


def overlay() -> dict:
    """Dedicated lanes on both corridor directions."""
    ff = {}
    for name, tail, head, freqs in BUS_LINES:
        if name != "corridor":
            continue
        minutes = _r(road_miles(HUBS[tail], HUBS[head]) * DBL_MIN_PER_MILE)
        for tag in ("out", "back"):
            for f in freqs:
                ff[f"bus_{name}_{tag}_f{f}"] = minutes
    return {"arcs": sorted(ff), "freeflow_minutes": ff}


def query_rows() -> list[dict]:
    rows = []
    for i in QRLS:
        for j in QRLS:
            if i == j:
                continue
            key = (i, j) if (i, j) in QUERY_MINUTES else (j, i)
            b, e, p = QUERY_MINUTES[key]
            rows.append({"from_id": i, "to_id": j, "baseline_min": b, "expected_min": e, "pessimistic_min": p})
    return rows


def write_synthetic(directory) -> None:
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    (out / "instance.json").write_text(json.dumps(build_instance(), indent=2) + "\n")
    (out / "dbl.json").write_text(json.dumps(overlay(), indent=2, sort_keys=True) + "\n")
    with open(out / "qrls.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", "lat", "lon"])
        for q, (lat, lon) in QRLS.items():
            w.writerow([q, lat, lon])
    with open(out / "queries.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=["from_id", "to_id", "baseline_min", "expected_min", "pessimistic_min"],
                           lineterminator="\n")
        w.writeheader()
        w.writerows(query_rows())


def data_path(name: str) -> Path:
    """Path of a bundled synthetic data file (``instance.json``, ``qrls.csv``, ...)."""
    return Path(str(resources.files("odmts") / "data" / "synthetic" / name))
