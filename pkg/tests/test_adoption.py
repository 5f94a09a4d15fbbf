from dataclasses import replace

import pytest

import odmts.adoption as adoption
from fixtures import random_design_instance
from oracles import bilevel_optimum, bilevel_value
from odmts.adoption import (
    AdoptionLimits,
    adoption_rate,
    leader_objective,
    reevaluate_choices,
    solve_bilevel,
    sweep_adoption_factor,
)
from odmts.benders import FixedDemandInstance, is_feasible_design, solve_fixed_demand
from odmts.errors import ConsistencyError
from odmts.model import Arc, CostParameters, Instance, Location, Mode, RiderClass, TransitNetwork, Trip
from odmts.router import AdoptionDecision, DesignVector, RoutedPath


def instance(seed, potential=3, **kw):
    net, trips, params = random_design_instance(seed, max_bus=6, potential=potential, **kw)
    return Instance(net, trips, params)


def test_no_potential_riders_is_one_design_solve():
    inst = instance(3, potential=0)
    sol = solve_bilevel(inst)
    fd = solve_fixed_demand(FixedDemandInstance(inst.network, inst.trips, inst.params))
    assert sol.converged and sol.rounds == 1
    assert sol.design == fd.design
    assert sol.objective == pytest.approx(fd.objective)


def test_everyone_adopts_with_huge_car_times():
    inst = instance(5)
    inst = inst.replace(trips=tuple(replace(t, car_time=1e9) if t.is_potential else t for t in inst.trips))
    sol = solve_bilevel(inst)
    assert sol.converged and sol.rounds == 2
    assert sol.adopters == sorted(t.id for t in inst.potential_trips)
    assert [h[1] for h in sol.history][0] == [h[1] for h in sol.history][1]


def test_zero_adoption_factor_means_no_adopters():
    inst = instance(2)
    sol = sweep_adoption_factor(inst, [0.0])[0.0]
    assert sol.adopters == []
    assert adoption_rate(sol) == 0.0


@pytest.mark.parametrize("seed", range(20))
def test_matches_bilevel_oracle(seed):
    inst = instance(seed)
    want, _, want_adopters = bilevel_optimum(inst.network, inst.trips, inst.params)
    sol = solve_bilevel(inst)
    assert sol.objective == pytest.approx(want, rel=1e-6, abs=1e-6)
    # a design's leader value is what the oracle computes for it
    value, adopters = bilevel_value(inst.network, inst.trips, inst.params, sol.design.open_ids)
    assert sol.objective == pytest.approx(value, rel=1e-9, abs=1e-9)
    assert set(sol.adopters) == adopters


@pytest.mark.parametrize("seed", range(6))
def test_sweep_matches_oracle_per_rho(seed):
    inst = instance(seed)
    sweep = sweep_adoption_factor(inst, [1.4, 1.5, 1.6])
    for rho, sol in sweep.items():
        params = inst.params.replace(adoption_factor=rho)
        want, _, _ = bilevel_optimum(inst.network, inst.trips, params)
        assert sol.objective == pytest.approx(want, rel=1e-6, abs=1e-6)


@pytest.mark.parametrize("seed", range(10))
def test_larger_rho_adopts_a_superset_on_a_fixed_design(seed):
    sol = solve_bilevel(instance(seed))
    prev = set()
    for rho in (0.0, 0.5, 1.0, 1.5, 2.0, 4.0):
        now = {t for t, d in reevaluate_choices(sol, rho).items() if d.adopted}
        assert prev <= now
        prev = now


@pytest.mark.parametrize("seed", range(10))
def test_objective_recomputes_from_parts(seed):
    sol = solve_bilevel(instance(seed))
    p = sol.parts
    assert sol.objective == pytest.approx(p.bus_fixed_cost + p.existing_cost + p.adopter_cost - p.ticket_benefit, abs=1e-6)
    assert is_feasible_design(sol.instance.network, sol.design, sol.fixed_open_arcs)


@pytest.mark.parametrize("seed", range(10))
def test_fixed_arcs_grow_and_stay_open(seed, monkeypatch):
    calls = []
    real = adoption.solve_fixed_demand

    def spy(fd, *args, **kwargs):
        sol = real(fd, *args, **kwargs)
        calls.append((fd, sol))
        return sol

    monkeypatch.setattr(adoption, "solve_fixed_demand", spy)
    inst = instance(seed)
    solve_bilevel(inst)
    existing = {t.id for t in inst.existing_trips}
    prev = frozenset()
    for fd, sol in calls:
        assert existing <= {t.id for t in fd.trips}
        assert prev <= fd.fixed_open
        assert fd.fixed_open <= sol.design.open_ids
        prev = fd.fixed_open


def test_round_cap_stops_the_loop():
    inst = instance(0)
    sol = solve_bilevel(inst, AdoptionLimits(max_rounds=1))
    assert sol.rounds == 1


# --- leader objective -----------------------------------------------------------


def tiny():
    net = TransitNetwork.build([Location("o", 0, 0), Location("d", 0, 0)], [Arc("s", "o", "d", Mode.SHUTTLE, 1.0, 1.0)])
    existing = Trip("e", "o", "d", 1)
    pot = Trip("p", "o", "d", 1, RiderClass.POTENTIAL, car_time=10.0, ticket_price=3.50)
    return net, existing, pot


def test_leader_objective_with_no_adopters():
    net, existing, pot = tiny()
    routes = {"e": RoutedPath("e", ("s",), 7.0, 1.0, 1), "p": None}
    decisions = {"p": AdoptionDecision(False, float("inf"))}
    value = leader_objective(net, DesignVector.closed(net), [existing, pot], routes, decisions, CostParameters())
    assert value == 7.0


def test_adopter_contributes_value_minus_ticket():
    net, existing, pot = tiny()
    routes = {"e": RoutedPath("e", ("s",), 7.0, 1.0, 1), "p": RoutedPath("p", ("s",), 10.0, 1.0, 1)}
    decisions = {"p": AdoptionDecision(True, 0.1)}
    value = leader_objective(net, DesignVector.closed(net), [existing, pot], routes, decisions, CostParameters())
    assert value - 7.0 == pytest.approx(10.0 - 3.1227)


def test_missing_route_is_an_internal_error():
    net, existing, pot = tiny()
    with pytest.raises(ConsistencyError):
        leader_objective(net, DesignVector.closed(net), [existing], {}, {}, CostParameters())
