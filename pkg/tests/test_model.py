import json
import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from odmts.errors import ValidationError
from odmts.io import instance_from_dict, instance_to_dict, load_instance
from odmts.model import (
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
    arc_fixed_cost,
    arc_trip_contribution,
    ticket_benefit,
)

HUB = LocationKind.HUB
DEFAULTS = CostParameters()


def bus(tau=30.0, f=10, **kw):
    return Arc("b", "h1", "h2", Mode.BUS, tau, 5.0, f, **kw)


def potential(price, riders=1):
    return Trip("t", "a", "b", riders, RiderClass.POTENTIAL, car_time=20.0, ticket_price=price)


# --- frozen values ---------------------------------------------------------


def test_fixed_cost_default_constants():
    assert arc_fixed_cost(bus(), DEFAULTS) == pytest.approx(321.86, abs=0.01)


def test_fixed_cost_vanishes_at_full_time_weight_or_zero_time():
    assert arc_fixed_cost(bus(), DEFAULTS.replace(alpha=1.0)) == 0.0
    assert arc_fixed_cost(bus(tau=0.0), DEFAULTS) == 0.0


def test_fixed_cost_rejects_other_modes():
    shuttle = Arc("s", "a", "b", Mode.SHUTTLE, 5.0, 1.0)
    with pytest.raises(ValueError):
        arc_fixed_cost(shuttle, DEFAULTS)


def test_zero_frequency_rejected():
    with pytest.raises(ValidationError):
        bus(f=0)


def test_shuttle_contribution():
    arc = Arc("s", "a", "b", Mode.SHUTTLE, 6.0, 2.0)
    trip = Trip("t", "a", "b", 1)
    assert arc_trip_contribution(arc, trip, DEFAULTS) == pytest.approx(2.4312, abs=1e-12)


def test_bus_contribution_without_time_weight():
    trip = Trip("t", "h1", "h2", 3)
    assert arc_trip_contribution(bus(wait_time=4.0), trip, DEFAULTS.replace(alpha=0.0)) == 0.0


def test_rail_contribution():
    arc = Arc("r", "h1", "h2", Mode.RAIL, 10.0, 3.0, 4, wait_time=5.0)
    trip = Trip("t", "h1", "h2", 2)
    assert arc_trip_contribution(arc, trip, DEFAULTS.replace(alpha=0.5)) == 15.0


@pytest.mark.parametrize("price,expected", [(3.50, 3.1227), (5.00, 4.461)])
def test_ticket_benefit(price, expected):
    assert ticket_benefit(potential(price), DEFAULTS) == pytest.approx(expected, abs=1e-9)


def test_ticket_benefit_zero_at_full_time_weight():
    assert ticket_benefit(potential(5.0), DEFAULTS.replace(alpha=1.0)) == 0.0


def test_ticket_benefit_rejects_existing_riders():
    with pytest.raises(ValueError):
        ticket_benefit(Trip("t", "a", "b", 1), DEFAULTS)


# --- properties -------------------------------------------------------------

alphas = st.floats(0, 1)
positive = st.floats(0.01, 1e4, allow_nan=False)


@given(alphas, st.floats(0, 600), st.integers(1, 50), positive, st.floats(0.1, 10))
def test_fixed_cost_homogeneous_in_cost_and_frequency(alpha, tau, f, c_bus, k):
    p = DEFAULTS.replace(alpha=alpha, bus_cost_per_hour=c_bus)
    base = arc_fixed_cost(bus(tau, f), p)
    scaled_cost = arc_fixed_cost(bus(tau, f), p.replace(bus_cost_per_hour=c_bus * k))
    assert scaled_cost == pytest.approx(k * base, rel=1e-12, abs=1e-12)
    assert arc_fixed_cost(bus(tau, 2 * f), p) == pytest.approx(2 * base, rel=1e-12, abs=1e-12)


@given(alphas, st.integers(1, 100), st.floats(0, 100), st.floats(0, 50))
def test_contribution_linear_in_riders(alpha, riders, tau, dist):
    arc = Arc("s", "a", "b", Mode.SHUTTLE, tau, dist)
    p = DEFAULTS.replace(alpha=alpha)
    one = arc_trip_contribution(arc, Trip("t", "a", "b", 1), p)
    many = arc_trip_contribution(arc, Trip("t", "a", "b", riders), p)
    assert many == pytest.approx(riders * one, rel=1e-12, abs=1e-12)


# --- validation ------------------------------------------------------------


def test_bus_arc_needs_hub_endpoints():
    locs = [Location("h", 0, 0, HUB), Location("s", 0, 0)]
    with pytest.raises(ValidationError, match="b1"):
        TransitNetwork.build(locs, [Arc("b1", "h", "s", Mode.BUS, 5.0, 1.0, 2)])


def test_parallel_bus_arcs_must_differ_only_in_frequency():
    locs = [Location("h1", 0, 0, HUB), Location("h2", 0, 0, HUB)]
    ok = [Arc("b1", "h1", "h2", Mode.BUS, 5.0, 1.0, 2), Arc("b2", "h1", "h2", Mode.BUS, 5.0, 1.0, 4)]
    TransitNetwork.build(locs, ok)
    with pytest.raises(ValidationError):
        TransitNetwork.build(locs, [ok[0], Arc("b2", "h1", "h2", Mode.BUS, 6.0, 1.0, 4)])
    with pytest.raises(ValidationError):
        TransitNetwork.build(locs, [ok[0], Arc("b2", "h1", "h2", Mode.BUS, 5.0, 1.0, 2)])


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(mode=Mode.SHUTTLE, frequency=3),
        dict(mode=Mode.SHUTTLE, wait_time=2.0),
        dict(mode=Mode.RAIL, frequency=None),
        dict(travel_time=-1.0),
        dict(distance=math.inf),
    ],
)
def test_arc_invariants(kwargs):
    base = dict(id="a", tail="x", head="y", mode=Mode.BUS, travel_time=1.0, distance=1.0, frequency=2)
    base.update(kwargs)
    with pytest.raises(ValidationError):
        Arc(**base)


def test_trip_invariants():
    with pytest.raises(ValidationError):
        Trip("t", "a", "a", 1)
    with pytest.raises(ValidationError):
        Trip("t", "a", "b", 0)
    with pytest.raises(ValidationError):
        Trip("t", "a", "b", 1, RiderClass.POTENTIAL)  # needs a car time


def test_parameter_ranges():
    with pytest.raises(ValidationError):
        CostParameters(alpha=1.5)
    with pytest.raises(ValidationError):
        CostParameters(adoption_factor=-0.1)
    with pytest.raises(ValidationError):
        CostParameters(transfer_limit=0)
    CostParameters(adoption_factor=0.0)


# --- files -----------------------------------------------------------------


def small_doc():
    return {
        "locations": [
            {"id": "a", "lat": 0, "lon": 0},
            {"id": "h1", "lat": 0, "lon": 0.1, "kind": "hub"},
            {"id": "h2", "lat": 0, "lon": 0.2, "kind": "hub"},
        ],
        "arcs": [
            {"id": "s1", "tail": "a", "head": "h1", "mode": "shuttle", "travel_time": 5, "distance": 1},
            {"id": "b1", "tail": "h1", "head": "h2", "mode": "bus", "travel_time": 9, "distance": 4, "frequency": 3},
        ],
        "trips": [
            {"id": "t1", "origin": "a", "destination": "h2", "riders": 4},
            {"id": "t2", "origin": "a", "destination": "h2", "riders": 2, "rider_class": "potential",
             "locality": "non_local", "car_time": 12},
        ],
        "parameters": {"alpha": 0.2, "ticket_price_non_local": 6.0},
    }


def test_instance_round_trip(tmp_path):
    inst = instance_from_dict(small_doc())
    assert inst.trip("t2").ticket_price == 6.0
    assert inst.trip("t1").car_time == math.inf
    assert inst.params.alpha == 0.2
    path = tmp_path / "i.json"
    path.write_text(json.dumps(instance_to_dict(inst)))
    again = load_instance(path)
    assert again.network.arcs == inst.network.arcs
    assert again.trips == inst.trips
    assert again.params == inst.params


def test_fractional_riders_rejected_with_record_id():
    doc = small_doc()
    doc["trips"][0]["riders"] = 2.5
    with pytest.raises(ValidationError, match="t1"):
        instance_from_dict(doc)


def test_unknown_location_rejected():
    doc = small_doc()
    doc["arcs"][0]["tail"] = "nowhere"
    with pytest.raises(ValidationError, match="s1"):
        instance_from_dict(doc)


def test_trip_endpoint_must_exist():
    doc = small_doc()
    doc["trips"][0]["destination"] = "zz"
    with pytest.raises(ValidationError, match="t1"):
        instance_from_dict(doc)


def test_locality_enum():
    inst = instance_from_dict(small_doc())
    assert inst.trip("t2").locality is Locality.NON_LOCAL
    assert isinstance(inst, Instance)
