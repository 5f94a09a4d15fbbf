"""Congestion scenarios from region-pair scaling factors.

Travel times between a small set of query reference locations (QRLs) are
known under a baseline and under congested traffic models.  Any OD pair is
scaled by the factor of the QRL pair nearest to its endpoints.  Dedicated
bus lanes replace the scaled time of selected bus arcs by a free-flow time.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Iterable, Mapping

from .errors import ConfigurationError, ValidationError
from .model import Arc, Instance, Mode, TransitNetwork

log = logging.getLogger(__name__)

EARTH_RADIUS_MILES = 3958.8


class ScenarioTag(str, Enum):
    BASELINE = "baseline"
    EXPECTED = "expected"
    FIFTY_FIFTY = "fifty_fifty"
    PESSIMISTIC = "pessimistic"
    CUSTOM = "custom"

    @classmethod
    def parse(cls, value) -> ScenarioTag:
        if isinstance(value, cls):
            return value
        text = str(value).strip().lower().replace("-", "_")
        if text == "50_50":
            return cls.FIFTY_FIFTY
        try:
            return cls(text)
        except ValueError:
            raise ConfigurationError(f"unknown scenario {value!r}") from None


def great_circle_miles(lat1, lon1, lat2, lon2) -> float:
    p1, p2 = math.radians(lat1), math.radians(lat2)
    dp = p2 - p1
    dl = math.radians(lon2 - lon1)
    h = math.sin(dp / 2) ** 2 + math.cos(p1) * math.cos(p2) * math.sin(dl / 2) ** 2
    return 2 * EARTH_RADIUS_MILES * math.asin(min(1.0, math.sqrt(h)))


@dataclass(frozen=True)
class Qrl:
    id: str
    lat: float
    lon: float


@dataclass(frozen=True)
class QrlSet:
    points: tuple[Qrl, ...]

    def __post_init__(self):
        pts = tuple(sorted(self.points, key=lambda q: q.id))
        if len({q.id for q in pts}) != len(pts):
            raise ConfigurationError("QRL ids must be unique")
        if len(pts) < 2:
            raise ConfigurationError("at least two query reference locations are required")
        object.__setattr__(self, "points", pts)

    def nearest(self, lat: float, lon: float, exclude: str | None = None) -> str:
        # points are sorted by id, so strict < keeps the lowest id on ties
        best, best_d = None, math.inf
        for q in self.points:
            if q.id == exclude:
                continue
            d = great_circle_miles(lat, lon, q.lat, q.lon)
            if d < best_d:
                best, best_d = q.id, d
        return best

    def get(self, qid: str) -> Qrl:
        for q in self.points:
            if q.id == qid:
                return q
        raise KeyError(qid)


@dataclass(frozen=True)
class TravelTimeQuery:
    pair: tuple[str, str]
    baseline_minutes: float
    scenario_minutes: Mapping[ScenarioTag, float] = field(default_factory=dict)

    def __post_init__(self):
        if not self.baseline_minutes > 0:
            raise ValidationError("baseline travel time must be > 0", f"{self.pair[0]}->{self.pair[1]}")
        for tag, minutes in self.scenario_minutes.items():
            if not (minutes > 0 and math.isfinite(minutes)):
                raise ValidationError(f"{ScenarioTag(tag).value} travel time must be > 0", f"{self.pair[0]}->{self.pair[1]}")


class MissingPairError(LookupError):
    def __init__(self, pair):
        super().__init__(f"no scaling factor for QRL pair {pair[0]!r} -> {pair[1]!r}")
        self.pair = pair


@dataclass(frozen=True)
class ScalingMatrix:
    scenario: ScenarioTag
    factors: Mapping[tuple[str, str], float]

    def __post_init__(self):
        object.__setattr__(self, "scenario", ScenarioTag.parse(self.scenario))
        for pair, r in self.factors.items():
            if not (r > 0 and math.isfinite(r)):
                raise ValidationError(f"scaling factor must be positive and finite, got {r!r}", f"{pair[0]}->{pair[1]}")
        if self.scenario is ScenarioTag.BASELINE and any(r != 1.0 for r in self.factors.values()):
            raise ValidationError("baseline factors must all equal 1", "matrix")

    def factor(self, i: str, j: str) -> float:
        try:
            return self.factors[(i, j)]
        except KeyError:
            raise MissingPairError((i, j)) from None

    def to_dict(self) -> dict:
        nested: dict[str, dict[str, float]] = {}
        for (i, j), r in sorted(self.factors.items()):
            nested.setdefault(i, {})[j] = r
        return {"scenario": self.scenario.value, "factors": nested}

    @classmethod
    def from_dict(cls, doc: dict) -> ScalingMatrix:
        factors = {(i, j): float(r) for i, row in doc["factors"].items() for j, r in row.items()}
        return cls(ScenarioTag.parse(doc["scenario"]), factors)


@dataclass(frozen=True)
class DblOverlay:
    """Bus arcs running on dedicated lanes, with their free-flow minutes."""

    arcs: frozenset[str]
    freeflow_minutes: Mapping[str, float]

    def __post_init__(self):
        object.__setattr__(self, "arcs", frozenset(self.arcs))
        missing = sorted(self.arcs - set(self.freeflow_minutes))
        if missing:
            raise ConfigurationError(f"overlay arcs without free-flow time: {missing}")
        for aid, minutes in self.freeflow_minutes.items():
            if not (minutes >= 0 and math.isfinite(minutes)):
                raise ValidationError("free-flow minutes must be finite and >= 0", aid)

    @classmethod
    def from_dict(cls, doc: dict) -> DblOverlay:
        ff = {str(k): float(v) for k, v in doc["freeflow_minutes"].items()}
        return cls(frozenset(doc.get("arcs", ff)), ff)

    def to_dict(self) -> dict:
        return {
            "arcs": sorted(self.arcs),
            "freeflow_minutes": {k: self.freeflow_minutes[k] for k in sorted(self.arcs)},
        }


def build_scaling_matrix(queries: Iterable[TravelTimeQuery], scenario) -> ScalingMatrix:
    """Turn queried QRL travel times into per-pair scaling factors.

    The 50-50 scenario averages the expected and pessimistic times.
    """
    tag = ScenarioTag.parse(scenario)
    factors: dict[tuple[str, str], float] = {}
    for q in queries:
        base = q.baseline_minutes
        if tag is ScenarioTag.BASELINE:
            r = 1.0
        elif tag is ScenarioTag.FIFTY_FIFTY:
            exp, pes = _minutes(q, ScenarioTag.EXPECTED), _minutes(q, ScenarioTag.PESSIMISTIC)
            # single division keeps integer inputs correctly rounded
            r = (exp + pes) / (2 * base)
        else:
            r = _minutes(q, tag) / base
        factors[q.pair] = r
    return ScalingMatrix(tag, factors)


def _minutes(q: TravelTimeQuery, tag: ScenarioTag) -> float:
    try:
        return q.scenario_minutes[tag]
    except KeyError:
        raise MissingPairError(q.pair) from None


def od_factor(origin, destination, qrls: QrlSet, matrix: ScalingMatrix) -> float:
    """Scaling factor for an OD pair given as ``(lat, lon)`` tuples."""
    if not qrls.points:
        raise ConfigurationError("empty QRL set")
    i = qrls.nearest(*origin)
    j = qrls.nearest(*destination)
    if i == j:
        q = qrls.get(i)
        j = qrls.nearest(q.lat, q.lon, exclude=i)
    return matrix.factor(i, j)


def scale_od_time(origin, destination, basis_minutes: float, qrls: QrlSet, matrix: ScalingMatrix) -> float:
    if basis_minutes < 0:
        raise ValueError("basis travel time must be >= 0")
    return basis_minutes * od_factor(origin, destination, qrls, matrix)


def _coords(network: TransitNetwork, loc_id: str):
    loc = network.locations[loc_id]
    return (loc.lat, loc.lon)


def apply_overlay(network: TransitNetwork, overlay: DblOverlay) -> TransitNetwork:
    """Give every overlay arc its free-flow travel time.

    Warns when the free-flow time exceeds the arc's current time, which
    usually means the overlay was built for a different basis.
    """
    for aid in sorted(overlay.arcs):
        if aid not in network.arc_index:
            raise ConfigurationError(f"overlay references unknown arc {aid!r}")
        if network.arc_index[aid].mode is not Mode.BUS:
            raise ConfigurationError(f"overlay arc {aid!r} is not a bus arc")
    arcs = []
    for arc in network.arcs:
        if arc.id in overlay.arcs:
            ff = overlay.freeflow_minutes[arc.id]
            if ff > arc.travel_time:
                log.warning("free-flow time %.2f exceeds congested time %.2f on %s", ff, arc.travel_time, arc.id)
            arc = replace(arc, travel_time=ff)
        arcs.append(arc)
    return network.with_arcs(arcs)


def apply_congestion(
    network: TransitNetwork,
    qrls: QrlSet,
    matrix: ScalingMatrix,
    overlay: DblOverlay | None = None,
) -> TransitNetwork:
    """Scale road arcs by their region-pair factor; rail arcs are unaffected.

    Shuttle arcs also have their cost per mile scaled by the same factor.
    """
    if overlay is not None:
        unknown = sorted(overlay.arcs - set(network.arc_index))
        if unknown:
            raise ConfigurationError(f"overlay references unknown arcs {unknown}")
    arcs: list[Arc] = []
    for arc in network.arcs:
        if arc.mode is not Mode.RAIL:
            r = od_factor(_coords(network, arc.tail), _coords(network, arc.head), qrls, matrix)
            changes = {"travel_time": arc.travel_time * r}
            if arc.mode is Mode.SHUTTLE:
                changes["cost_scale"] = arc.cost_scale * r
            arc = replace(arc, **changes)
        arcs.append(arc)
    scaled = network.with_arcs(arcs)
    if overlay is not None:
        scaled = apply_overlay(scaled, overlay)
    return scaled


def apply_scenario(
    instance: Instance,
    qrls: QrlSet,
    matrix: ScalingMatrix,
    overlay: DblOverlay | None = None,
) -> Instance:
    """Congest the network and the car travel times of every trip."""
    network = apply_congestion(instance.network, qrls, matrix, overlay)
    trips = []
    for t in instance.trips:
        if math.isfinite(t.car_time):
            car = scale_od_time(
                _coords(network, t.origin), _coords(network, t.destination), t.car_time, qrls, matrix
            )
            t = replace(t, car_time=car)
        trips.append(t)
    return Instance(network=network, trips=tuple(trips), params=instance.params)


# --- files -----------------------------------------------------------------


def read_qrls(path) -> QrlSet:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return QrlSet(tuple(Qrl(r["id"], float(r["lat"]), float(r["lon"])) for r in rows))


def read_query_dump(path) -> list[TravelTimeQuery]:
    """CSV with columns ``from_id,to_id,baseline_min,expected_min,pessimistic_min``."""
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            pair = (row["from_id"], row["to_id"])
            out.append(
                TravelTimeQuery(
                    pair,
                    float(row["baseline_min"]),
                    {
                        ScenarioTag.EXPECTED: float(row["expected_min"]),
                        ScenarioTag.PESSIMISTIC: float(row["pessimistic_min"]),
                    },
                )
            )
    return out


def load_matrix(path) -> ScalingMatrix:
    return ScalingMatrix.from_dict(json.loads(Path(path).read_text()))


def load_overlay(path) -> DblOverlay:
    return DblOverlay.from_dict(json.loads(Path(path).read_text()))
