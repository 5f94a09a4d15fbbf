"""Instance files: one JSON document with ``locations``, ``arcs``, ``trips``
and ``parameters``.

Trips without a ``ticket_price`` get the fare for their locality from
``parameters.ticket_price_local`` / ``parameters.ticket_price_non_local``
(defaults $3.50 and $5.00).
"""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Any

from .errors import ValidationError
from .model import (
    Arc,
    CostParameters,
    Instance,
    Locality,
    Location,
    LocationKind,
    Mode,
    RiderClass,
    TransitNetwork,
    Trip,
)

DEFAULT_FARES = {Locality.LOCAL: 3.50, Locality.NON_LOCAL: 5.00}

_PARAM_FIELDS = (
    "alpha",
    "bus_cost_per_hour",
    "shuttle_cost_per_mile",
    "transfer_limit",
    "adoption_factor",
    "wait_minutes_bus_rail",
    "synchronized",
)


def _require(record: dict, key: str, rid: str):
    if key not in record:
        raise ValidationError(f"missing field {key!r}", rid)
    return record[key]


def _number(value, name, rid) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ValidationError(f"{name} must be a number, got {value!r}", rid)
    return float(value)


def _integer(value, name, rid) -> int:
    if isinstance(value, bool):
        raise ValidationError(f"{name} must be an integer", rid)
    if isinstance(value, float):
        if not value.is_integer():
            raise ValidationError(f"{name} must be an integer, got fractional {value!r}", rid)
        value = int(value)
    if not isinstance(value, int):
        raise ValidationError(f"{name} must be an integer, got {value!r}", rid)
    return value


def _enum(enum_cls, value, name, rid):
    try:
        return enum_cls(value)
    except ValueError:
        allowed = ", ".join(e.value for e in enum_cls)
        raise ValidationError(f"{name} must be one of {allowed}; got {value!r}", rid) from None


def parse_location(rec: dict) -> Location:
    rid = str(_require(rec, "id", "<location>"))
    return Location(
        id=rid,
        lat=_number(_require(rec, "lat", rid), "lat", rid),
        lon=_number(_require(rec, "lon", rid), "lon", rid),
        kind=_enum(LocationKind, rec.get("kind", "virtual_stop"), "kind", rid),
    )


def parse_arc(rec: dict) -> Arc:
    rid = str(_require(rec, "id", "<arc>"))
    mode = _enum(Mode, _require(rec, "mode", rid), "mode", rid)
    freq = rec.get("frequency")
    return Arc(
        id=rid,
        tail=str(_require(rec, "tail", rid)),
        head=str(_require(rec, "head", rid)),
        mode=mode,
        travel_time=_number(_require(rec, "travel_time", rid), "travel_time", rid),
        distance=_number(rec.get("distance", 0.0), "distance", rid),
        frequency=None if freq is None else _integer(freq, "frequency", rid),
        wait_time=_number(rec.get("wait_time", 0.0), "wait_time", rid),
        cost_scale=_number(rec.get("cost_scale", 1.0), "cost_scale", rid),
    )


def parse_trip(rec: dict, fares: dict) -> Trip:
    rid = str(_require(rec, "id", "<trip>"))
    locality = _enum(Locality, rec.get("locality", "local"), "locality", rid)
    car = rec.get("car_time")
    price = rec.get("ticket_price")
    return Trip(
        id=rid,
        origin=str(_require(rec, "origin", rid)),
        destination=str(_require(rec, "destination", rid)),
        riders=_integer(_require(rec, "riders", rid), "riders", rid),
        rider_class=_enum(RiderClass, rec.get("rider_class", "existing"), "rider_class", rid),
        locality=locality,
        car_time=math.inf if car is None else _number(car, "car_time", rid),
        ticket_price=fares[locality] if price is None else _number(price, "ticket_price", rid),
    )


def parse_parameters(rec: dict) -> tuple[CostParameters, dict]:
    unknown = set(rec) - set(_PARAM_FIELDS) - {"ticket_price_local", "ticket_price_non_local"}
    if unknown:
        raise ValidationError(f"unknown fields {sorted(unknown)}", "parameters")
    kwargs: dict[str, Any] = {}
    for name in _PARAM_FIELDS:
        if name not in rec:
            continue
        value = rec[name]
        if name == "transfer_limit":
            value = None if value is None else _integer(value, name, "parameters")
        elif name == "synchronized":
            value = bool(value)
        else:
            value = _number(value, name, "parameters")
        kwargs[name] = value
    fares = {
        Locality.LOCAL: float(rec.get("ticket_price_local", DEFAULT_FARES[Locality.LOCAL])),
        Locality.NON_LOCAL: float(rec.get("ticket_price_non_local", DEFAULT_FARES[Locality.NON_LOCAL])),
    }
    return CostParameters(**kwargs), fares


def instance_from_dict(doc: dict) -> Instance:
    for key in ("locations", "arcs", "trips"):
        if not isinstance(doc.get(key), list):
            raise ValidationError(f"document needs an array {key!r}", "<instance>")
    params, fares = parse_parameters(doc.get("parameters", {}))
    network = TransitNetwork.build(
        (parse_location(r) for r in doc["locations"]),
        (parse_arc(r) for r in doc["arcs"]),
    )
    trips = tuple(parse_trip(r, fares) for r in doc["trips"])
    return Instance(network=network, trips=trips, params=params)


def load_instance(path) -> Instance:
    with open(path) as fh:
        doc = json.load(fh)
    return instance_from_dict(doc)


def _finite_or_none(x: float):
    return x if math.isfinite(x) else None


def arc_to_dict(arc: Arc) -> dict:
    d = {
        "id": arc.id,
        "tail": arc.tail,
        "head": arc.head,
        "mode": arc.mode.value,
        "travel_time": arc.travel_time,
        "distance": arc.distance,
    }
    if arc.frequency is not None:
        d["frequency"] = arc.frequency
    if arc.wait_time:
        d["wait_time"] = arc.wait_time
    if arc.cost_scale != 1.0:
        d["cost_scale"] = arc.cost_scale
    return d


def instance_to_dict(instance: Instance) -> dict:
    p = instance.params
    return {
        "locations": [
            {"id": l.id, "lat": l.lat, "lon": l.lon, "kind": l.kind.value}
            for l in sorted(instance.network.locations.values(), key=lambda l: l.id)
        ],
        "arcs": [arc_to_dict(a) for a in instance.network.arcs],
        "trips": [
            {
                "id": t.id,
                "origin": t.origin,
                "destination": t.destination,
                "riders": t.riders,
                "rider_class": t.rider_class.value,
                "locality": t.locality.value,
                "car_time": _finite_or_none(t.car_time),
                "ticket_price": t.ticket_price,
            }
            for t in instance.trips
        ],
        "parameters": {name: getattr(p, name) for name in _PARAM_FIELDS},
    }


def dump_json(obj, path) -> None:
    """Write ``obj`` with sorted keys so files diff cleanly between runs."""
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")
