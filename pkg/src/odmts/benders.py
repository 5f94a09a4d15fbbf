"""Fixed-demand ODMTS design by Benders decomposition.

The master chooses bus arcs; each trip's follower routing yields an
optimality cut ``theta_t >= constant - sum(sigma_a * z_a)``.  Cut
coefficients come from node potentials equal to the cheapest remaining
cost to the destination over open arcs (one potential per hop layer when
the number of arcs is limited).  For every closed bus arc, ``sigma_a`` is
how much opening it could undercut those potentials.  Potentials are
capped at the trip's current value, which keeps them dual feasible and
finite on unreachable states.
"""

from __future__ import annotations

import heapq
import json
import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import SolverLimitReached, ValidationError
from .master import BranchAndBound, MasterBackend, MasterProblem
from .model import CostParameters, Mode, TransitNetwork, Trip, arc_fixed_cost
from .router import DesignVector, RoutedPath, Router

log = logging.getLogger(__name__)

CUT_EPS = 1e-9
AGGREGATE = "*"


@dataclass(frozen=True)
class BendersCut:
    trip: str
    constant: float
    coefficients: Mapping[str, float]

    def evaluate(self, design: DesignVector) -> float:
        return self.constant - sum(s for a, s in self.coefficients.items() if a in design.open_ids)

    def to_dict(self) -> dict:
        return {"trip": self.trip, "constant": self.constant, "coefficients": dict(sorted(self.coefficients.items()))}

    @classmethod
    def from_dict(cls, doc) -> BendersCut:
        return cls(doc["trip"], float(doc["constant"]), {k: float(v) for k, v in doc["coefficients"].items()})


@dataclass
class BendersState:
    cuts: list[BendersCut] = field(default_factory=list)
    lower_bound: float = -math.inf
    upper_bound: float = math.inf
    incumbent: DesignVector | None = None
    iteration: int = 0
    history: list[tuple[int, float, float]] = field(default_factory=list)

    @property
    def gap(self) -> float:
        if not math.isfinite(self.upper_bound):
            return math.inf
        return (self.upper_bound - self.lower_bound) / max(1.0, abs(self.upper_bound))


@dataclass(frozen=True)
class FixedDemandInstance:
    """Leader problem with a frozen rider set; every trip must be served.

    Each trip must reach its destination over shuttle and rail arcs alone
    within the transfer limit, so every design has a feasible routing.
    """

    network: TransitNetwork
    trips: tuple[Trip, ...]
    params: CostParameters
    fixed_open: frozenset[str] = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "trips", tuple(sorted(self.trips, key=lambda t: t.id)))
        object.__setattr__(self, "fixed_open", frozenset(self.fixed_open))
        bus = {a.id for a in self.network.bus_arcs}
        if not self.fixed_open <= bus:
            raise ValidationError(f"fixed arcs are not bus arcs: {sorted(self.fixed_open - bus)}", "fixed_open")
        router = Router(self.network, self.params)
        closed = DesignVector.closed(self.network)
        for trip in self.trips:
            if router.route(trip, closed) is None:
                raise ValidationError("destination unreachable without bus arcs within the transfer limit", trip.id)


@dataclass(frozen=True)
class BendersLimits:
    max_iterations: int = 500
    time_limit: float | None = None


@dataclass(frozen=True)
class ObjectiveSplit:
    bus_fixed_cost: float
    shuttle_cost: float
    inconvenience: float

    @property
    def total(self) -> float:
        return self.bus_fixed_cost + self.shuttle_cost + self.inconvenience


@dataclass
class DesignSolution:
    design: DesignVector
    routes: dict[str, RoutedPath]
    objective: float
    split: ObjectiveSplit
    lower_bound: float
    upper_bound: float
    iterations: int
    converged: bool
    cuts: list[BendersCut] = field(default_factory=list, repr=False)

    @property
    def gap(self) -> float:
        return (self.upper_bound - self.lower_bound) / max(1.0, abs(self.upper_bound))


# --- design feasibility ----------------------------------------------------


def balance_violations(network: TransitNetwork, design: DesignVector) -> list[str]:
    """Hubs whose opened outgoing and incoming bus frequencies differ."""
    net: dict[str, int] = {}
    for arc in network.bus_arcs:
        if arc.id in design.open_ids:
            net[arc.tail] = net.get(arc.tail, 0) + arc.frequency
            net[arc.head] = net.get(arc.head, 0) - arc.frequency
    return sorted(h for h, v in net.items() if v != 0)


def parallel_violations(network: TransitNetwork, design: DesignVector) -> list[tuple[str, str]]:
    return sorted(
        pair
        for pair, group in network.parallel_bus_groups().items()
        if sum(a.id in design.open_ids for a in group) > 1
    )


def is_feasible_design(network: TransitNetwork, design: DesignVector, fixed_open=frozenset()) -> bool:
    return (
        not balance_violations(network, design)
        and not parallel_violations(network, design)
        and set(fixed_open) <= design.open_ids
    )


def bus_fixed_cost(network: TransitNetwork, design: DesignVector, params: CostParameters) -> float:
    return sum(arc_fixed_cost(a, params) for a in network.bus_arcs if a.id in design.open_ids)


# --- cuts -----------------------------------------------------------------


def _potentials(router: Router, trip: Trip, design: DesignVector, cap: float):
    """Cheapest remaining primary cost to the destination, capped at ``cap``.

    Returns one dict per hop layer (``K + 1`` layers), or a single dict when
    the number of arcs is unlimited.
    """
    net = router.network
    p = trip.riders
    dest = trip.destination
    k = router.hop_limit
    if k is None:
        dist = {dest: 0.0}
        heap = [(0.0, dest)]
        done = set()
        while heap:
            d, v = heapq.heappop(heap)
            if v in done:
                continue
            done.add(v)
            for arc in net.in_arcs[v]:
                if not router._arc_open(arc, design):
                    continue
                nd = d + p * router.unit_cost[arc.id]
                if nd < dist.get(arc.tail, math.inf):
                    dist[arc.tail] = nd
                    heapq.heappush(heap, (nd, arc.tail))
        return [{v: min(dist.get(v, math.inf), cap) for v in net.locations}]
    layers = [None] * (k + 1)
    layers[k] = {v: (0.0 if v == dest else cap) for v in net.locations}
    for h in range(k - 1, -1, -1):
        nxt = layers[h + 1]
        cur = {}
        for v in net.locations:
            if v == dest:
                cur[v] = 0.0
                continue
            best = cap
            for arc in net.out_arcs[v]:
                if router._arc_open(arc, design):
                    best = min(best, p * router.unit_cost[arc.id] + nxt[arc.head])
            cur[v] = best
        layers[h] = cur
    return layers


def generate_cut(
    trip: Trip,
    network: TransitNetwork,
    design: DesignVector,
    params: CostParameters,
    router: Router | None = None,
) -> tuple[BendersCut, RoutedPath]:
    """Optimality cut for ``trip`` at ``design`` and the trip's route there.

    The cut is tight at ``design``: its constant is the route's primary value.
    """
    router = router or Router(network, params)
    path = router.route(trip, design)
    if path is None:
        raise ValidationError("no feasible route; shuttle fallback missing", trip.id)
    g = path.primary_value
    layers = _potentials(router, trip, design, cap=g)
    layers[0][trip.origin] = g
    p = trip.riders
    coeffs = {}
    for arc in network.bus_arcs:
        if arc.id in design.open_ids:
            continue
        gamma = p * router.unit_cost[arc.id]
        if len(layers) == 1:
            pi = layers[0]
            s = pi[arc.tail] - gamma - pi[arc.head]
        else:
            s = max(layers[h][arc.tail] - gamma - layers[h + 1][arc.head] for h in range(len(layers) - 1))
        if s > 0:
            coeffs[arc.id] = s
    return BendersCut(trip.id, g, coeffs), path


# --- master ---------------------------------------------------------------


def build_master(
    network: TransitNetwork,
    params: CostParameters,
    floors: Sequence[float],
    fixed_open=frozenset(),
) -> tuple[MasterProblem, list[str]]:
    bus = [a.id for a in network.bus_arcs]
    pos = {aid: i for i, aid in enumerate(bus)}
    costs = np.array([arc_fixed_cost(network.arc(a), params) for a in bus], dtype=float)
    rows: dict[str, dict[int, int]] = {}
    for arc in network.bus_arcs:
        i = pos[arc.id]
        rows.setdefault(arc.tail, {})[i] = rows.get(arc.tail, {}).get(i, 0) + arc.frequency
        rows.setdefault(arc.head, {})[i] = rows.get(arc.head, {}).get(i, 0) - arc.frequency
    balance = [rows[h] for h in sorted(rows)]
    parallel = [[pos[a.id] for a in grp] for _, grp in sorted(network.parallel_bus_groups().items()) if len(grp) > 1]
    problem = MasterProblem(
        costs=costs,
        balance=balance,
        parallel=parallel,
        floors=np.asarray(floors, dtype=float),
        forced_open=frozenset(pos[a] for a in fixed_open),
    )
    return problem, bus


def _sigma(cut: BendersCut, pos: Mapping[str, int], n: int) -> np.ndarray:
    sigma = np.zeros(n)
    for aid, s in cut.coefficients.items():
        sigma[pos[aid]] = s
    return sigma


def solve_master(
    cuts: Sequence[BendersCut],
    network: TransitNetwork,
    params: CostParameters,
    floors: Mapping[str, float],
    fixed_open=frozenset(),
    backend: MasterBackend | None = None,
    aggregate: bool = False,
) -> tuple[DesignVector, float]:
    """Best design against the current cut pool and its master value.

    ``floors`` maps trip id to a valid lower bound on the trip's value; the
    keys also define the set of trips.
    """
    trip_ids = sorted(floors)
    if aggregate:
        problem, bus = build_master(network, params, [sum(floors[t] for t in trip_ids)], fixed_open)
    else:
        problem, bus = build_master(network, params, [floors[t] for t in trip_ids], fixed_open)
    pos = {aid: i for i, aid in enumerate(bus)}
    group = {t: i for i, t in enumerate(trip_ids)}
    for cut in cuts:
        problem.add_cut(0 if aggregate else group[cut.trip], cut.constant, _sigma(cut, pos, len(bus)))
    result = (backend or BranchAndBound()).solve(problem)
    design = DesignVector.from_open(network, (bus[i] for i, v in enumerate(result.z) if v))
    return design, result.value


def aggregate_cuts(cuts: Sequence[BendersCut]) -> BendersCut:
    """Sum of per-trip cuts, bounding the total routing value."""
    coeffs: dict[str, float] = {}
    for cut in cuts:
        for aid, s in cut.coefficients.items():
            coeffs[aid] = coeffs.get(aid, 0.0) + s
    return BendersCut(AGGREGATE, sum(c.constant for c in cuts), coeffs)


# --- main loop --------------------------------------------------------------


def objective_split(
    network: TransitNetwork, design: DesignVector, routes: Mapping[str, RoutedPath], trips, params: CostParameters
) -> ObjectiveSplit:
    a = params.alpha
    shuttle = 0.0
    inconvenience = 0.0
    riders = {t.id: t.riders for t in trips}
    for tid, path in routes.items():
        p = riders[tid]
        for aid in path.arcs:
            arc = network.arc_index[aid]
            if arc.mode is Mode.SHUTTLE:
                shuttle += p * (1.0 - a) * arc.distance * params.shuttle_cost_per_mile * arc.cost_scale
                inconvenience += p * a * arc.travel_time
            else:
                inconvenience += p * a * (arc.travel_time + arc.wait_time)
    return ObjectiveSplit(bus_fixed_cost(network, design, params), shuttle, inconvenience)


def _lex_smaller(a: DesignVector, b: DesignVector) -> bool:
    return a.sorted_open() < b.sorted_open()


def solve_fixed_demand(
    instance: FixedDemandInstance,
    tolerance: float = 1e-6,
    limits: BendersLimits = BendersLimits(),
    backend: MasterBackend | None = None,
    aggregate: bool = False,
    state: BendersState | None = None,
    checkpoint: str | Path | None = None,
) -> DesignSolution:
    """Run Benders iterations until the relative gap is within ``tolerance``.

    On an iteration or time limit the best design found so far is returned
    with ``converged=False``.  Pass a previous ``state`` (for instance from
    :func:`load_checkpoint`) to continue from its cut pool.
    """
    if not tolerance > 0:
        raise ValueError("tolerance must be positive")
    net, params = instance.network, instance.params
    trips = instance.trips
    router = Router(net, params)
    state = state or BendersState()
    start = time.monotonic()

    if not trips:
        design = DesignVector.from_open(net, instance.fixed_open)
        return _finish(instance, design, {}, state, converged=True, cuts=[])

    all_open = DesignVector.all_open(net)
    floors = {t.id: router.route(t, all_open).primary_value for t in trips}

    best_routes: dict[str, RoutedPath] = {}
    if state.incumbent is not None:
        best_routes = {t.id: router.route(t, state.incumbent) for t in trips}
    seen_cuts = {(c.trip, c.constant, tuple(sorted(c.coefficients.items()))) for c in state.cuts}

    converged = False
    while True:
        if state.iteration >= limits.max_iterations:
            log.warning("Benders iteration limit reached, gap %.3g", state.gap)
            break
        if limits.time_limit is not None and time.monotonic() - start > limits.time_limit:
            log.warning("Benders time limit reached, gap %.3g", state.gap)
            break
        try:
            design, lb = solve_master(
                state.cuts, net, params, floors, instance.fixed_open, backend=backend, aggregate=aggregate
            )
        except SolverLimitReached:
            if state.incumbent is None:
                raise
            break
        state.lower_bound = max(state.lower_bound, lb)
        state.iteration += 1

        routes = {}
        ub = bus_fixed_cost(net, design, params)
        new_cuts = []
        for trip in trips:
            cut, path = generate_cut(trip, net, design, params, router)
            routes[trip.id] = path
            ub += path.primary_value
            new_cuts.append(cut)
        if aggregate:
            new_cuts = [aggregate_cuts(new_cuts)]
        for cut in new_cuts:
            key = (cut.trip, cut.constant, tuple(sorted(cut.coefficients.items())))
            if key not in seen_cuts:
                seen_cuts.add(key)
                state.cuts.append(cut)
        tol = CUT_EPS * max(1.0, abs(state.upper_bound)) if math.isfinite(state.upper_bound) else 0.0
        if (
            state.incumbent is None
            or ub < state.upper_bound - tol
            or (ub <= state.upper_bound + tol and _lex_smaller(design, state.incumbent))
        ):
            state.upper_bound = min(ub, state.upper_bound) if state.incumbent is not None else ub
            state.incumbent = design
            best_routes = routes
        state.history.append((state.iteration, state.lower_bound, state.upper_bound))
        log.debug("iter %d  LB %.6f  UB %.6f", state.iteration, state.lower_bound, state.upper_bound)
        if checkpoint is not None:
            save_checkpoint(state, checkpoint)
        if state.gap <= tolerance:
            converged = True
            break

    if state.incumbent is None:
        raise SolverLimitReached("no design found within the limits", state=state)
    return _finish(instance, state.incumbent, best_routes, state, converged, state.cuts)


def _finish(instance, design, routes, state, converged, cuts) -> DesignSolution:
    split = objective_split(instance.network, design, routes, instance.trips, instance.params)
    objective = bus_fixed_cost(instance.network, design, instance.params) + sum(
        r.primary_value for r in routes.values()
    )
    ub = objective if not math.isfinite(state.upper_bound) else state.upper_bound
    lb = state.lower_bound if math.isfinite(state.lower_bound) else objective
    return DesignSolution(
        design=design,
        routes=dict(sorted(routes.items())),
        objective=objective,
        split=split,
        lower_bound=lb,
        upper_bound=ub,
        iterations=state.iteration,
        converged=converged,
        cuts=list(cuts),
    )


# --- checkpoints ----------------------------------------------------------


def save_checkpoint(state: BendersState, path) -> None:
    doc = {
        "cuts": [c.to_dict() for c in state.cuts],
        "incumbent": None if state.incumbent is None else dict(state.incumbent.open),
        "lower_bound": state.lower_bound if math.isfinite(state.lower_bound) else None,
        "upper_bound": state.upper_bound if math.isfinite(state.upper_bound) else None,
        "iteration": state.iteration,
    }
    tmp = Path(str(path) + ".tmp")
    tmp.write_text(json.dumps(doc, indent=2, sort_keys=True))
    tmp.replace(path)


def load_checkpoint(path) -> BendersState:
    doc = json.loads(Path(path).read_text())
    inc = doc.get("incumbent")
    lb, ub = doc.get("lower_bound"), doc.get("upper_bound")
    return BendersState(
        cuts=[BendersCut.from_dict(c) for c in doc["cuts"]],
        lower_bound=-math.inf if lb is None else lb,
        upper_bound=math.inf if ub is None else ub,
        incumbent=None if inc is None else DesignVector(inc),
        iteration=doc.get("iteration", 0),
    )
