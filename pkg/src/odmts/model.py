"""Network, trips and cost coefficients for ODMTS design.

Units: travel times are minutes, distances are miles, money is dollars.
``alpha`` weighs one minute of rider time against one dollar of system
cost; ``bus_cost_per_hour`` is converted to minutes where it is used.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Iterable, Mapping

from .errors import ValidationError


class Mode(str, Enum):
    SHUTTLE = "shuttle"
    BUS = "bus"
    RAIL = "rail"


class LocationKind(str, Enum):
    HUB = "hub"
    VIRTUAL_STOP = "virtual_stop"


class RiderClass(str, Enum):
    EXISTING = "existing"
    POTENTIAL = "potential"


class Locality(str, Enum):
    LOCAL = "local"
    NON_LOCAL = "non_local"


@dataclass(frozen=True)
class Location:
    id: str
    lat: float
    lon: float
    kind: LocationKind = LocationKind.VIRTUAL_STOP

    @property
    def is_hub(self) -> bool:
        return self.kind is LocationKind.HUB


@dataclass(frozen=True)
class Arc:
    """A potential connection between two locations.

    ``cost_scale`` multiplies the shuttle cost per mile on this arc; it is 1
    on an unscaled network and carries the congestion factor afterwards.
    """

    id: str
    tail: str
    head: str
    mode: Mode
    travel_time: float
    distance: float = 0.0
    frequency: int | None = None
    wait_time: float = 0.0
    cost_scale: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "mode", Mode(self.mode))
        for name in ("travel_time", "distance", "wait_time", "cost_scale"):
            value = getattr(self, name)
            if not math.isfinite(value) or value < 0:
                raise ValidationError(f"{name} must be finite and >= 0, got {value!r}", self.id)
        if self.mode is Mode.SHUTTLE:
            if self.frequency is not None:
                raise ValidationError("shuttle arcs carry no frequency", self.id)
            if self.wait_time != 0:
                raise ValidationError("shuttle arcs have no waiting time", self.id)
        else:
            f = self.frequency
            if isinstance(f, bool) or not isinstance(f, int) or f <= 0:
                raise ValidationError(f"{self.mode.value} arcs need a positive integer frequency", self.id)
        if self.tail == self.head:
            raise ValidationError("self-loop arcs are not allowed", self.id)


@dataclass(frozen=True)
class Trip:
    id: str
    origin: str
    destination: str
    riders: int
    rider_class: RiderClass = RiderClass.EXISTING
    locality: Locality = Locality.LOCAL
    car_time: float = math.inf
    ticket_price: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "rider_class", RiderClass(self.rider_class))
        object.__setattr__(self, "locality", Locality(self.locality))
        if isinstance(self.riders, bool) or not isinstance(self.riders, int) or self.riders <= 0:
            raise ValidationError(f"riders must be a positive integer, got {self.riders!r}", self.id)
        if self.origin == self.destination:
            raise ValidationError("origin equals destination", self.id)
        if self.rider_class is RiderClass.POTENTIAL and not (
            self.car_time > 0 and math.isfinite(self.car_time)
        ):
            raise ValidationError("potential riders need a finite positive car_time", self.id)
        if self.ticket_price < 0:
            raise ValidationError("ticket_price must be >= 0", self.id)

    @property
    def is_potential(self) -> bool:
        return self.rider_class is RiderClass.POTENTIAL


@dataclass(frozen=True)
class CostParameters:
    """Objective weights and behavioural constants.

    ``transfer_limit=None`` means no limit on the number of arcs in a path.
    ``synchronized`` drops the bus/rail waiting time added after routing.
    """

    alpha: float = 0.1078
    bus_cost_per_hour: float = 72.15
    shuttle_cost_per_mile: float = 1.0
    transfer_limit: int | None = None
    adoption_factor: float = 1.5
    wait_minutes_bus_rail: float = 5.0
    synchronized: bool = False

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValidationError(f"alpha must lie in [0, 1], got {self.alpha}", "parameters")
        for name in ("bus_cost_per_hour", "shuttle_cost_per_mile", "wait_minutes_bus_rail"):
            if getattr(self, name) < 0:
                raise ValidationError(f"{name} must be >= 0", "parameters")
        if not self.adoption_factor >= 0:
            raise ValidationError("adoption_factor must be >= 0", "parameters")
        k = self.transfer_limit
        if k is not None and (isinstance(k, bool) or not isinstance(k, int) or k < 1):
            raise ValidationError("transfer_limit must be a positive integer or None", "parameters")

    def replace(self, **changes) -> CostParameters:
        return replace(self, **changes)


def arc_fixed_cost(arc: Arc, params: CostParameters) -> float:
    """Weighted cost of operating bus arc ``arc`` over the planning horizon."""
    if arc.mode is not Mode.BUS:
        raise ValueError(f"fixed cost is only defined for bus arcs, {arc.id} is {arc.mode.value}")
    return (1.0 - params.alpha) * (arc.travel_time / 60.0) * arc.frequency * params.bus_cost_per_hour


def arc_trip_contribution(arc: Arc, trip: Trip, params: CostParameters) -> float:
    return trip.riders * unit_arc_contribution(arc, params)


def unit_arc_contribution(arc: Arc, params: CostParameters) -> float:
    """Contribution of ``arc`` to the routing objective of a single rider."""
    a = params.alpha
    if arc.mode is Mode.SHUTTLE:
        per_mile = params.shuttle_cost_per_mile * arc.cost_scale
        return (1.0 - a) * arc.distance * per_mile + a * arc.travel_time
    return a * (arc.travel_time + arc.wait_time)


def ticket_benefit(trip: Trip, params: CostParameters) -> float:
    if not trip.is_potential:
        # revenue from existing riders is a constant and stays out of the objective
        raise ValueError(f"ticket benefit applies to potential riders only ({trip.id})")
    return (1.0 - params.alpha) * trip.riders * trip.ticket_price


@dataclass(frozen=True, eq=False)
class TransitNetwork:
    """Directed multigraph of locations and mode-tagged arcs.

    Arcs are kept sorted by id; adjacency lists follow that order so every
    traversal is deterministic.
    """

    locations: Mapping[str, Location]
    arcs: tuple[Arc, ...]
    arc_index: Mapping[str, Arc] = field(repr=False)
    out_arcs: Mapping[str, tuple[Arc, ...]] = field(repr=False)
    in_arcs: Mapping[str, tuple[Arc, ...]] = field(repr=False)

    @classmethod
    def build(cls, locations: Iterable[Location], arcs: Iterable[Arc]) -> TransitNetwork:
        locs: dict[str, Location] = {}
        for loc in locations:
            if loc.id in locs:
                raise ValidationError("duplicate location id", loc.id)
            locs[loc.id] = loc
        index: dict[str, Arc] = {}
        for arc in arcs:
            if arc.id in index:
                raise ValidationError("duplicate arc id", arc.id)
            index[arc.id] = arc
        ordered = tuple(index[k] for k in sorted(index))
        out: dict[str, list[Arc]] = {k: [] for k in locs}
        inc: dict[str, list[Arc]] = {k: [] for k in locs}
        for arc in ordered:
            for end in (arc.tail, arc.head):
                if end not in locs:
                    raise ValidationError(f"unknown location {end!r}", arc.id)
            if arc.mode is not Mode.SHUTTLE and not (locs[arc.tail].is_hub and locs[arc.head].is_hub):
                raise ValidationError(f"{arc.mode.value} arcs must connect two hubs", arc.id)
            out[arc.tail].append(arc)
            inc[arc.head].append(arc)
        net = cls(
            locations=locs,
            arcs=ordered,
            arc_index=index,
            out_arcs={k: tuple(v) for k, v in out.items()},
            in_arcs={k: tuple(v) for k, v in inc.items()},
        )
        net._check_parallel_bus_arcs()
        return net

    def _check_parallel_bus_arcs(self):
        for group in self.parallel_bus_groups().values():
            first = group[0]
            seen = {first.frequency}
            for arc in group[1:]:
                if (arc.travel_time, arc.distance, arc.wait_time) != (
                    first.travel_time,
                    first.distance,
                    first.wait_time,
                ):
                    raise ValidationError(
                        f"parallel bus arcs {first.id} and {arc.id} differ in more than frequency", arc.id
                    )
                if arc.frequency in seen:
                    raise ValidationError(f"duplicate frequency {arc.frequency} between the same hubs", arc.id)
                seen.add(arc.frequency)

    @property
    def bus_arcs(self) -> tuple[Arc, ...]:
        return tuple(a for a in self.arcs if a.mode is Mode.BUS)

    @property
    def hubs(self) -> list[str]:
        return sorted(k for k, v in self.locations.items() if v.is_hub)

    def parallel_bus_groups(self) -> dict[tuple[str, str], tuple[Arc, ...]]:
        groups: dict[tuple[str, str], list[Arc]] = {}
        for arc in self.arcs:
            if arc.mode is Mode.BUS:
                groups.setdefault((arc.tail, arc.head), []).append(arc)
        return {k: tuple(v) for k, v in groups.items()}

    def arc(self, arc_id: str) -> Arc:
        try:
            return self.arc_index[arc_id]
        except KeyError:
            raise KeyError(f"unknown arc {arc_id!r}") from None

    def with_arcs(self, arcs: Iterable[Arc]) -> TransitNetwork:
        return TransitNetwork.build(self.locations.values(), arcs)

    def __len__(self):
        return len(self.locations)


@dataclass(frozen=True)
class Instance:
    """A network, its trips and the cost parameters, validated together."""

    network: TransitNetwork
    trips: tuple[Trip, ...]
    params: CostParameters = CostParameters()

    def __post_init__(self):
        trips = tuple(sorted(self.trips, key=lambda t: t.id))
        seen = set()
        for trip in trips:
            if trip.id in seen:
                raise ValidationError("duplicate trip id", trip.id)
            seen.add(trip.id)
            for end in (trip.origin, trip.destination):
                if end not in self.network.locations:
                    raise ValidationError(f"unknown location {end!r}", trip.id)
        object.__setattr__(self, "trips", trips)

    @property
    def existing_trips(self) -> tuple[Trip, ...]:
        return tuple(t for t in self.trips if not t.is_potential)

    @property
    def potential_trips(self) -> tuple[Trip, ...]:
        return tuple(t for t in self.trips if t.is_potential)

    def trip(self, trip_id: str) -> Trip:
        for t in self.trips:
            if t.id == trip_id:
                return t
        raise KeyError(f"unknown trip {trip_id!r}")

    def replace(self, **changes) -> Instance:
        return replace(self, **changes)
