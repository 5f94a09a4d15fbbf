"""Follower routing: best path per trip for a fixed bus design, and the
rider's adoption choice.

Paths minimise ``(primary, length)`` lexicographically, where ``primary``
sums the per-rider-weighted arc contributions and ``length`` sums travel
and waiting minutes.  Remaining ties go to fewer arcs, then to the smallest
arc-id sequence.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping

from .model import Arc, CostParameters, Mode, TransitNetwork, Trip, unit_arc_contribution


@dataclass(frozen=True)
class DesignVector:
    """Open/closed flag for every bus arc; other arcs are always open."""

    open: Mapping[str, bool]
    open_ids: frozenset[str] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "open", dict(sorted(self.open.items())))
        object.__setattr__(self, "open_ids", frozenset(k for k, v in self.open.items() if v))

    @classmethod
    def from_open(cls, network: TransitNetwork, open_ids: Iterable[str] = ()) -> DesignVector:
        open_ids = set(open_ids)
        bus = {a.id for a in network.bus_arcs}
        unknown = open_ids - bus
        if unknown:
            raise ValueError(f"not bus arcs: {sorted(unknown)}")
        return cls({aid: aid in open_ids for aid in bus})

    @classmethod
    def closed(cls, network: TransitNetwork) -> DesignVector:
        return cls.from_open(network)

    @classmethod
    def all_open(cls, network: TransitNetwork) -> DesignVector:
        return cls.from_open(network, (a.id for a in network.bus_arcs))

    def is_open(self, arc: Arc) -> bool:
        return arc.mode is not Mode.BUS or arc.id in self.open_ids

    def check(self, network: TransitNetwork) -> None:
        bus = {a.id for a in network.bus_arcs}
        if set(self.open) != bus:
            raise ValueError("design keys must be exactly the bus arcs of the network")

    def sorted_open(self) -> list[str]:
        return sorted(self.open_ids)


@dataclass(frozen=True)
class RoutedPath:
    trip_id: str
    arcs: tuple[str, ...]
    primary_value: float
    trip_length: float
    hop_count: int
    wait_added: float = 0.0

    def to_dict(self) -> dict:
        return {
            "arcs": list(self.arcs),
            "primary_value": self.primary_value,
            "trip_length": self.trip_length,
            "hop_count": self.hop_count,
            "wait_added": self.wait_added,
        }


@dataclass(frozen=True)
class AdoptionDecision:
    adopted: bool
    ratio: float


class Router:
    """Caches per-arc coefficients of one (network, params) pair.

    Not tied to a design, so a single router serves every Benders iteration.
    """

    def __init__(self, network: TransitNetwork, params: CostParameters):
        self.network = network
        self.params = params
        self.unit_cost = {a.id: unit_arc_contribution(a, params) for a in network.arcs}
        self.minutes = {a.id: a.travel_time + a.wait_time for a in network.arcs}
        self.bus_ids = frozenset(a.id for a in network.bus_arcs)

    @property
    def hop_limit(self) -> int | None:
        return self.params.transfer_limit

    def route(self, trip: Trip, design: DesignVector) -> RoutedPath | None:
        net = self.network
        for end in (trip.origin, trip.destination):
            if end not in net.locations:
                raise ValueError(f"trip {trip.id}: location {end!r} not in network")
        k = self.hop_limit
        if k is None:
            label = self._dijkstra(trip, design)
        else:
            label = self._layered(trip, design, k)
        if label is None:
            return None
        primary, length, hops, arcs = label
        return RoutedPath(trip.id, arcs, primary, length, hops)

    def _arc_open(self, arc: Arc, design: DesignVector) -> bool:
        return arc.id not in self.bus_ids or arc.id in design.open_ids

    def _dijkstra(self, trip: Trip, design: DesignVector):
        # Extending a label strictly increases it (hops grow), so the first
        # pop of a node is its lexicographic optimum.
        p = trip.riders
        heap = [(0.0, 0.0, 0, (), trip.origin)]
        done = set()
        while heap:
            primary, length, hops, arcs, node = heapq.heappop(heap)
            if node in done:
                continue
            if node == trip.destination:
                return primary, length, hops, arcs
            done.add(node)
            for arc in self.network.out_arcs[node]:
                if arc.head in done or not self._arc_open(arc, design):
                    continue
                heapq.heappush(
                    heap,
                    (
                        primary + p * self.unit_cost[arc.id],
                        length + self.minutes[arc.id],
                        hops + 1,
                        arcs + (arc.id,),
                        arc.head,
                    ),
                )
        return None

    def _layered(self, trip: Trip, design: DesignVector, k: int):
        p = trip.riders
        layer = {trip.origin: (0.0, 0.0, 0, ())}
        best = None
        for _ in range(k):
            nxt: dict = {}
            for node, (primary, length, hops, arcs) in layer.items():
                for arc in self.network.out_arcs[node]:
                    if not self._arc_open(arc, design):
                        continue
                    cand = (
                        primary + p * self.unit_cost[arc.id],
                        length + self.minutes[arc.id],
                        hops + 1,
                        arcs + (arc.id,),
                    )
                    cur = nxt.get(arc.head)
                    if cur is None or cand < cur:
                        nxt[arc.head] = cand
            hit = nxt.pop(trip.destination, None)
            if hit is not None and (best is None or hit < best):
                best = hit
            layer = nxt
            if not layer:
                break
        return best


def solve_follower(
    trip: Trip, network: TransitNetwork, design: DesignVector, params: CostParameters
) -> RoutedPath | None:
    """Lexicographically best path for ``trip`` under ``design``.

    Returns ``None`` only when a finite transfer limit leaves the
    destination unreachable.
    """
    design.check(network)
    return Router(network, params).route(trip, design)


def evaluate_choice(path: RoutedPath | None, trip: Trip, params: CostParameters) -> AdoptionDecision:
    if not trip.is_potential:
        raise ValueError(f"trip {trip.id} is not a potential rider")
    if path is None:
        return AdoptionDecision(False, math.inf)
    ratio = path.trip_length / trip.car_time
    return AdoptionDecision(path.trip_length <= params.adoption_factor * trip.car_time, ratio)


def boarding_events(modes: Iterable[Mode]) -> int:
    """Number of maximal runs of bus arcs plus maximal runs of rail arcs."""
    count, prev = 0, None
    for mode in modes:
        if mode is not Mode.SHUTTLE and mode is not prev:
            count += 1
        prev = mode
    return count


def apply_wait_postprocessing(path: RoutedPath, network: TransitNetwork, params: CostParameters) -> RoutedPath:
    """Add the bus/rail waiting time once per boarding; shuttles add none."""
    if params.synchronized:
        return path
    boardings = boarding_events(network.arc_index[a].mode for a in path.arcs)
    wait = boardings * params.wait_minutes_bus_rail
    if wait == 0:
        return path
    return replace(path, trip_length=path.trip_length + wait, wait_added=path.wait_added + wait)
