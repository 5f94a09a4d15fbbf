"""Random and hand-built networks shared by the tests."""

import random

from odmts.model import (
    Arc,
    CostParameters,
    Location,
    LocationKind,
    Mode,
    RiderClass,
    TransitNetwork,
    Trip,
)

HUB = LocationKind.HUB
STOP = LocationKind.VIRTUAL_STOP


def q(rng, lo, hi):
    """Random multiple of 1/4 so that path sums are exact in binary."""
    return rng.randint(lo * 4, hi * 4) / 4


def random_follower_graph(seed, max_nodes=8, max_arcs=20, max_bus=6):
    """Random multigraph for follower checks; a trip may be unreachable."""
    rng = random.Random(seed)
    n = rng.randint(3, max_nodes)
    n_hubs = rng.randint(2, n)
    locs = [Location(f"v{i}", 0.0, 0.0, HUB if i < n_hubs else STOP) for i in range(n)]
    hubs = [l.id for l in locs if l.kind is HUB]
    arcs = []
    n_arcs = rng.randint(n, max_arcs)
    n_bus = 0
    freqs = {}
    for k in range(n_arcs):
        roll = rng.random()
        if roll < 0.35 and n_bus < max_bus:
            i, j = rng.sample(hubs, 2)
            f = freqs.setdefault((i, j), [])
            if f:
                # parallel arcs share time and distance, differ in frequency
                base = next(a for a in arcs if a.mode is Mode.BUS and (a.tail, a.head) == (i, j))
                freq = max(f) + 1
                arcs.append(Arc(f"a{k:02d}", i, j, Mode.BUS, base.travel_time, base.distance, freq))
            else:
                freq = rng.randint(1, 3)
                arcs.append(Arc(f"a{k:02d}", i, j, Mode.BUS, q(rng, 1, 20), q(rng, 1, 10), freq))
            f.append(freq)
            n_bus += 1
        elif roll < 0.5:
            i, j = rng.sample(hubs, 2)
            arcs.append(Arc(f"a{k:02d}", i, j, Mode.RAIL, q(rng, 1, 20), q(rng, 1, 10), 4))
        else:
            i, j = rng.sample([l.id for l in locs], 2)
            arcs.append(Arc(f"a{k:02d}", i, j, Mode.SHUTTLE, q(rng, 1, 30), q(rng, 1, 10)))
    net = TransitNetwork.build(locs, arcs)
    o, d = rng.sample([l.id for l in locs], 2)
    trip = Trip("t0", o, d, rng.randint(1, 3))
    params = CostParameters(alpha=rng.choice([0.0, 0.25, 0.5, 0.75, 1.0]), shuttle_cost_per_mile=rng.choice([0.5, 1.0, 2.0]))
    return net, trip, params


def random_design_instance(seed, n_hubs=4, max_bus=8, max_trips=6, potential=0, transfer_limit=None):
    """Hub network with stops, a bus candidate set, and trips.

    Each trip has a direct shuttle arc, so every design admits a route.
    """
    rng = random.Random(seed)
    hubs = [Location(f"h{i}", 0.0, 0.0, HUB) for i in range(n_hubs)]
    n_stops = rng.randint(2, 4)
    stops = [Location(f"s{i}", 0.0, 0.0, STOP) for i in range(n_stops)]
    arcs = []
    k = 0

    def add(*args):
        nonlocal k
        arcs.append(Arc(f"a{k:02d}", *args))
        k += 1

    # stop <-> hub shuttles
    for s in stops:
        for h in rng.sample(hubs, 2):
            add(s.id, h.id, Mode.SHUTTLE, q(rng, 2, 12), q(rng, 1, 5))
            add(h.id, s.id, Mode.SHUTTLE, q(rng, 2, 12), q(rng, 1, 5))
    # one rail line
    add("h0", "h1", Mode.RAIL, q(rng, 4, 12), q(rng, 2, 8), 6)
    add("h1", "h0", Mode.RAIL, q(rng, 4, 12), q(rng, 2, 8), 6)
    # bus candidates, mostly as two-way pairs so balance is attainable
    n_bus = rng.randint(2, max_bus)
    made = 0
    pairs = [(a.id, b.id) for a in hubs for b in hubs if a.id < b.id]
    while made < n_bus:
        i, j = rng.choice(pairs)
        tt, dist = q(rng, 3, 15), q(rng, 2, 8)
        freq = rng.choice([1, 2])
        existing = [a for a in arcs if a.mode is Mode.BUS and (a.tail, a.head) == (i, j)]
        if existing:
            if made + 1 > n_bus:
                break
            e = existing[0]
            used = {a.frequency for a in existing}
            add(i, j, Mode.BUS, e.travel_time, e.distance, max(used) + 1)
            made += 1
            continue
        add(i, j, Mode.BUS, tt, dist, freq)
        made += 1
        if made < n_bus:
            add(j, i, Mode.BUS, tt, dist, freq)
            made += 1
    n_trips = rng.randint(1, max_trips)
    all_ids = [l.id for l in hubs + stops]
    trips = []
    for t in range(n_trips):
        o, d = rng.sample(all_ids, 2)
        direct = q(rng, 20, 45)
        add(o, d, Mode.SHUTTLE, direct, q(rng, 8, 20))
        is_pot = t < potential
        trips.append(
            Trip(
                f"t{t}",
                o,
                d,
                rng.randint(5, 40),
                RiderClass.POTENTIAL if is_pot else RiderClass.EXISTING,
                car_time=q(rng, 10, 30) if is_pot else float("inf"),
                ticket_price=rng.choice([3.5, 5.0]) if is_pot else 0.0,
            )
        )
    net = TransitNetwork.build(hubs + stops, arcs)
    params = CostParameters(
        alpha=rng.choice([0.1078, 0.25, 0.5]),
        bus_cost_per_hour=rng.choice([4.0, 8.0, 16.0]),
        transfer_limit=transfer_limit,
        adoption_factor=1.5,
    )
    return net, tuple(trips), params


def four_node_fixture():
    """o -> h1 -> h2 -> d with a shuttle bypass and a closed-able bus arc pair."""
    locs = [
        Location("o", 0, 0, STOP),
        Location("h1", 0, 0, HUB),
        Location("h2", 0, 0, HUB),
        Location("d", 0, 0, STOP),
    ]
    arcs = [
        Arc("s_o_h1", "o", "h1", Mode.SHUTTLE, 4.0, 1.0),
        Arc("s_h2_d", "h2", "d", Mode.SHUTTLE, 4.0, 1.0),
        Arc("s_o_d", "o", "d", Mode.SHUTTLE, 30.0, 12.0),
        Arc("s_h1_h2", "h1", "h2", Mode.SHUTTLE, 20.0, 8.0),
        Arc("b_h1_h2", "h1", "h2", Mode.BUS, 10.0, 8.0, 2),
        Arc("b_h2_h1", "h2", "h1", Mode.BUS, 10.0, 8.0, 2),
    ]
    net = TransitNetwork.build(locs, arcs)
    trip = Trip("t", "o", "d", 2)
    return net, trip, CostParameters(alpha=0.25, bus_cost_per_hour=8.0)


def sensitive_bilevel_instance(seed, max_bus=6, max_trips=6, potential=3):
    """Like :func:`random_design_instance`, but potential riders' car times
    sit between their trip length with all buses open and with all closed,
    so adoption depends on the design."""
    from dataclasses import replace

    from oracles import best_path, boardings, simple_paths

    net, trips, params = random_design_instance(seed, max_bus=max_bus, max_trips=max_trips, potential=potential)
    all_bus = frozenset(a.id for a in net.bus_arcs)
    rng = random.Random(seed + 10_000)
    out = []
    for t in trips:
        if t.is_potential:
            lengths = []
            paths = simple_paths(net, t.origin, t.destination, params.transfer_limit)
            for open_ids in (frozenset(), all_bus):
                key = best_path(net, t, open_ids, params, params.transfer_limit, paths)
                arcs = [net.arc(a) for a in key[3]]
                lengths.append(key[1] + params.wait_minutes_bus_rail * boardings(arcs))
            lo, hi = min(lengths), max(lengths)
            if hi > lo:
                target = lo + (hi - lo) * rng.uniform(0.2, 0.8)
                t = replace(t, car_time=round(target / params.adoption_factor * 4) / 4)
        out.append(t)
    return net, tuple(out), params
