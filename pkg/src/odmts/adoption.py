"""Iterative approximation of the bilevel design problem with latent demand.

Round 0 designs for existing riders only.  Every later round routes the
potential riders on the current design, lets them choose, permanently opens
the bus arcs their routes use, and redesigns for existing riders plus the
adopters.  The loop stops once the adopter set equals the previous round's
and returns the best design visited under the full leader objective.
"""

from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass, field
from typing import Iterable, Mapping

from .benders import (
    BendersLimits,
    FixedDemandInstance,
    bus_fixed_cost,
    solve_fixed_demand,
)
from .errors import ConsistencyError
from .master import MasterBackend
from .model import CostParameters, Instance, Mode, TransitNetwork, Trip, ticket_benefit
from .router import (
    AdoptionDecision,
    DesignVector,
    RoutedPath,
    Router,
    apply_wait_postprocessing,
    evaluate_choice,
)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class AdoptionLimits:
    max_rounds: int = 20
    tolerance: float = 1e-6
    benders: BendersLimits = BendersLimits()


@dataclass
class AdoptionState:
    round: int = 0
    active_riders: frozenset[str] = frozenset()
    fixed_open_arcs: frozenset[str] = frozenset()
    design: DesignVector | None = None
    history: list[tuple[int, str, float]] = field(default_factory=list)


@dataclass(frozen=True)
class ObjectiveParts:
    bus_fixed_cost: float
    existing_cost: float
    adopter_cost: float
    ticket_benefit: float

    @property
    def total(self) -> float:
        return self.bus_fixed_cost + self.existing_cost + self.adopter_cost - self.ticket_benefit


@dataclass
class BilevelSolution:
    instance: Instance = field(repr=False)
    design: DesignVector
    routes: dict[str, RoutedPath | None]
    decisions: dict[str, AdoptionDecision]
    objective: float
    parts: ObjectiveParts
    rounds: int
    converged: bool
    fixed_open_arcs: frozenset[str] = frozenset()
    history: list[tuple[int, str, float]] = field(default_factory=list)

    @property
    def adopters(self) -> list[str]:
        return sorted(t for t, d in self.decisions.items() if d.adopted)

    def served(self) -> list[Trip]:
        """Existing riders plus adopters."""
        return [t for t in self.instance.trips if not t.is_potential or self.decisions[t.id].adopted]


def adopter_hash(adopters: Iterable[str]) -> str:
    return hashlib.sha256("\n".join(sorted(adopters)).encode()).hexdigest()[:16]


def route_all(router: Router, trips: Iterable[Trip], design: DesignVector) -> dict[str, RoutedPath | None]:
    """Route every trip and add waiting times for the choice model."""
    out = {}
    for t in trips:
        path = router.route(t, design)
        out[t.id] = None if path is None else apply_wait_postprocessing(path, router.network, router.params)
    return out


def leader_objective_parts(
    network: TransitNetwork,
    design: DesignVector,
    trips: Iterable[Trip],
    routes: Mapping[str, RoutedPath | None],
    decisions: Mapping[str, AdoptionDecision],
    params: CostParameters,
) -> ObjectiveParts:
    existing = adopter = benefit = 0.0
    for t in trips:
        if t.is_potential:
            if not decisions[t.id].adopted:
                continue
        path = routes.get(t.id)
        if path is None:
            raise ConsistencyError(f"no route for active rider {t.id}")
        if t.is_potential:
            adopter += path.primary_value
            benefit += ticket_benefit(t, params)
        else:
            existing += path.primary_value
    return ObjectiveParts(bus_fixed_cost(network, design, params), existing, adopter, benefit)


def leader_objective(network, design, trips, routes, decisions, params) -> float:
    """Fixed bus cost plus existing riders' values plus adopters' values net of tickets."""
    return leader_objective_parts(network, design, trips, routes, decisions, params).total


def evaluate_design(instance: Instance, design: DesignVector, router: Router | None = None):
    """Routes, choices and leader objective induced by ``design``."""
    router = router or Router(instance.network, instance.params)
    routes = route_all(router, instance.trips, design)
    decisions = {
        t.id: evaluate_choice(routes[t.id], t, instance.params) for t in instance.trips if t.is_potential
    }
    parts = leader_objective_parts(instance.network, design, instance.trips, routes, decisions, instance.params)
    return routes, decisions, parts


def flow_carrying_arcs(network: TransitNetwork, routes: Mapping[str, RoutedPath | None], trip_ids) -> set[str]:
    out = set()
    for tid in trip_ids:
        path = routes[tid]
        if path is None:
            continue
        out.update(a for a in path.arcs if network.arc_index[a].mode is Mode.BUS)
    return out


def solve_bilevel(
    instance: Instance,
    limits: AdoptionLimits = AdoptionLimits(),
    backend: MasterBackend | None = None,
) -> BilevelSolution:
    net, params = instance.network, instance.params
    router = Router(net, params)
    existing = instance.existing_trips
    potentials = {t.id: t for t in instance.potential_trips}

    def design_for(active: frozenset[str], fixed: frozenset[str]) -> DesignVector:
        trips = existing + tuple(potentials[t] for t in sorted(active))
        fd = FixedDemandInstance(net, trips, params, fixed)
        sol = solve_fixed_demand(fd, limits.tolerance, limits.benders, backend=backend)
        if not sol.converged:
            log.warning("fixed-demand design stopped with gap %.3g", sol.gap)
        return sol.design

    state = AdoptionState(active_riders=frozenset(t.id for t in existing))
    state.design = design_for(frozenset(), frozenset())
    visited = []  # (objective, round, design, routes, decisions, parts, fixed)
    prev_adopters: frozenset[str] = frozenset()
    seen_states = set()
    converged = False
    while True:
        state.round += 1
        routes, decisions, parts = evaluate_design(instance, state.design, router)
        visited.append((parts.total, state.round, state.design, routes, decisions, parts, state.fixed_open_arcs))
        adopters = frozenset(t for t, d in decisions.items() if d.adopted)
        state.history.append((state.round, adopter_hash(adopters), parts.total))
        log.info("round %d: %d adopters, objective %.4f", state.round, len(adopters), parts.total)
        if adopters == prev_adopters:
            converged = True
            break
        if state.round >= limits.max_rounds:
            break
        fixed = state.fixed_open_arcs | flow_carrying_arcs(net, routes, adopters)
        if (adopters, fixed) in seen_states:
            # the redesign is a deterministic function of this pair: exact cycle
            log.info("adopter sets cycle from round %d", state.round)
            break
        seen_states.add((adopters, fixed))
        state.fixed_open_arcs = fixed
        state.active_riders = frozenset(t.id for t in existing) | adopters
        state.design = design_for(adopters, state.fixed_open_arcs)
        prev_adopters = adopters

    best = min(visited, key=lambda v: (v[0], v[1]))
    objective, _, design, routes, decisions, parts, fixed = best
    return BilevelSolution(
        instance=instance,
        design=design,
        routes=routes,
        decisions=decisions,
        objective=objective,
        parts=parts,
        rounds=state.round,
        converged=converged,
        fixed_open_arcs=fixed,
        history=state.history,
    )


def sweep_adoption_factor(
    instance: Instance, rho_values: Iterable[float], limits: AdoptionLimits = AdoptionLimits(), backend=None
) -> dict[float, BilevelSolution]:
    out = {}
    for rho in rho_values:
        if rho < 0:
            raise ValueError(f"adoption factor must be >= 0, got {rho}")
        inst = instance.replace(params=instance.params.replace(adoption_factor=float(rho)))
        out[float(rho)] = solve_bilevel(inst, limits, backend)
    return out


def adoption_rate(solution: BilevelSolution, trips: Iterable[Trip] | None = None) -> float:
    """Share of potential riders (weighted by rider count) who adopt."""
    trips = [t for t in (trips or solution.instance.trips) if t.is_potential]
    total = sum(t.riders for t in trips)
    if total == 0:
        return 0.0
    return sum(t.riders for t in trips if solution.decisions[t.id].adopted) / total


def reevaluate_choices(solution: BilevelSolution, rho: float) -> dict[str, AdoptionDecision]:
    """Choices of the potential riders on the solution's design at another ``rho``."""
    params = solution.instance.params.replace(adoption_factor=rho)
    return {
        t.id: evaluate_choice(solution.routes[t.id], t, params)
        for t in solution.instance.trips
        if t.is_potential
    }
