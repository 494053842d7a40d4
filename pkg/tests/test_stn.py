from __future__ import annotations

import math
import random
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import mapf
from mapfgen.assets import headon_corridor
from mapfgen.cbs import cbs_solve
from mapfgen.generate import generate_instance
from mapfgen.model import Flavor, InstanceError, Solution, Workspace
from mapfgen.perr import perr_solve_optimal
from mapfgen.stn import (
    X0,
    DelayModel,
    Event,
    InconsistentNetwork,
    Kinematics,
    TemporalConstraint,
    TemporalNetwork,
    build_stn,
    compute_schedule,
    occupancy_intervals,
    schedule_from_json,
    schedule_to_json,
    simulate_execution,
    trace_to_json,
)

UNIT = Kinematics(1.0, 0.0, 0.0)


def _type1(stn):
    return [c for c in stn.constraints if c.kind == "type1"]


def test_chain_constraints(corridor):
    stn = build_stn(Solution([[0, 1, 2]]), corridor, UNIT)
    assert [c.lb for c in _type1(stn)] == [1.0, 1.0]


def test_turn_charge():
    ws = Workspace.grid(2, 2)
    path = [ws.vertex(0, 0), ws.vertex(1, 0), ws.vertex(1, 1)]
    stn = build_stn(Solution([path]), ws, Kinematics(1.0, 0.5, 0.0))
    assert [c.lb for c in _type1(stn)] == [1.0, 1.5]


def test_crossing_separation(plus):
    c = plus.vertex
    # mover 0 crosses the centre at t=2, mover 1 at t=3
    paths = [
        [c(0, 1), c(0, 1), c(1, 1), c(2, 1), c(2, 1)],
        [c(1, 0), c(1, 0), c(1, 0), c(1, 1), c(1, 2)],
    ]
    stn = build_stn(Solution(paths), plus, Kinematics(1.0, 0.0, 0.5))
    t2 = [x for x in stn.constraints if x.kind == "type2"]
    assert len(t2) == 1
    exit_event, entry_event = stn.events[t2[0].src], stn.events[t2[0].dst]
    assert (exit_event.mover, exit_event.vertex) == (0, c(2, 1))
    assert (entry_event.mover, entry_event.vertex) == (1, c(1, 1))
    assert t2[0].lb == 0.5


def test_earliest_chain(corridor):
    sched = compute_schedule(build_stn(Solution([[0, 1, 2]]), corridor, UNIT))
    assert sched.earliest == [0.0, 1.0, 2.0]
    assert all(math.isinf(x) for x in sched.latest + sched.slack)


def test_deadline_slack(corridor):
    sched = compute_schedule(build_stn(Solution([[0, 1, 2]]), corridor, UNIT, deadline=4.0))
    assert sched.latest == [2.0, 3.0, 4.0]
    assert sched.slack == [2.0, 2.0, 2.0]


def test_tight_deadline_cycle(corridor):
    stn = build_stn(Solution([[0, 1, 2]]), corridor, UNIT, deadline=1.0)
    with pytest.raises(InconsistentNetwork) as err:
        compute_schedule(stn)
    cycle = err.value.cycle
    assert X0 in cycle and stn.last[0] in cycle


def test_conflicting_solution_rejected(corridor):
    with pytest.raises(InstanceError):
        build_stn(Solution([[0, 1], [1, 0]]), corridor, UNIT)


def test_exchange_solution_builds():
    inst = headon_corridor(Flavor.PERR)
    sol = perr_solve_optimal(inst)
    sched = compute_schedule(build_stn(sol, inst.workspace, UNIT))
    assert sched.makespan() > 0


def test_bad_kinematics():
    with pytest.raises(ValueError):
        Kinematics(0.0)
    with pytest.raises(ValueError):
        Kinematics(1.0, -1.0)


def _solutions(count, seed):
    out = []
    rng = random.Random(seed)
    while len(out) < count:
        inst = generate_instance(5, 5, 0.15, Flavor.MAPF, rng.randint(2, 4), rng.randrange(10**6))
        sol = cbs_solve(inst)
        if sol is not None:
            out.append((inst, sol))
    return out


SOLUTIONS = _solutions(20, 7)


@pytest.mark.parametrize("k", range(len(SOLUTIONS)))
def test_zero_delay_realizes_earliest(k):
    inst, sol = SOLUTIONS[k]
    stn = build_stn(sol, inst.workspace, Kinematics(1.0, 0.3, 0.4))
    sched = compute_schedule(stn)
    trace = simulate_execution(sched, stn)
    assert max(abs(a - b) for a, b in zip(trace.realized, sched.earliest)) <= 1e-9
    assert not trace.replan_needed


def _overlaps(stn, times, margin):
    bad = 0
    for spans in occupancy_intervals(stn, times).values():
        for (ea, la, ma), (eb, lb, mb) in zip(spans, spans[1:]):
            if ma != mb and eb < la + margin - 1e-9:
                bad += 1
    return bad


@given(st.integers(0, len(SOLUTIONS) - 1), st.integers(0, 10_000), st.sampled_from(["uniform", "exponential"]))
@settings(max_examples=60, deadline=None)
def test_slack_capped_delays_are_safe(k, seed, kind):
    inst, sol = SOLUTIONS[k]
    kin = Kinematics(1.0, 0.2, 0.5)
    probe = compute_schedule(build_stn(sol, inst.workspace, kin))
    stn = build_stn(sol, inst.workspace, kin, deadline=2 * probe.makespan())
    sched = compute_schedule(stn)
    trace = simulate_execution(sched, stn, DelayModel(kind, 1.0, "slack", seed))
    assert not trace.replan_needed
    assert trace.ordering_violations == trace.safety_violations == 0
    assert _overlaps(stn, trace.realized, kin.safety_distance) == 0


@given(st.integers(0, len(SOLUTIONS) - 1), st.integers(0, 10_000))
@settings(max_examples=30, deadline=None)
def test_uncapped_delays_keep_order(k, seed):
    # any delays: still safe, maybe late
    inst, sol = SOLUTIONS[k]
    kin = Kinematics(1.0, 0.0, 0.5)
    stn = build_stn(sol, inst.workspace, kin)
    trace = simulate_execution(compute_schedule(stn), stn, DelayModel("exponential", 3.0, "none", seed))
    assert trace.ordering_violations == trace.safety_violations == 0
    assert _overlaps(stn, trace.realized, kin.safety_distance) == 0


def test_adversarial_delay_flags_replan():
    inst, sol = SOLUTIONS[0]
    kin = Kinematics(1.0, 0.0, 0.5)
    probe = compute_schedule(build_stn(sol, inst.workspace, kin))
    stn = build_stn(sol, inst.workspace, kin, deadline=1.5 * probe.makespan())
    sched = compute_schedule(stn)
    e = stn.first[0] + 1
    trace = simulate_execution(sched, stn, DelayModel(overrides=((e, sched.slack[e] + 1.0),)))
    assert trace.replan_needed and e in trace.late_events
    assert trace.ordering_violations == trace.safety_violations == 0


def _random_network(seed):
    rng = random.Random(seed)
    n = rng.randint(2, 6)
    events = [Event(0, i, i, i) for i in range(n)]
    cons = []
    for _ in range(rng.randint(1, 10)):
        a, b = rng.sample([X0] + list(range(n)), 2)
        lb = rng.randint(-3, 4)
        ub = lb + rng.randint(0, 4) if rng.random() < 0.5 else math.inf
        cons.append(TemporalConstraint(a, b, float(lb), float(ub)))
    for e in range(n):
        cons.append(TemporalConstraint(X0, e, 0.0))
    return TemporalNetwork(events, cons)


def _consistent_by_floyd(stn) -> bool:
    n = len(stn.events) + 1
    node = lambda e: n - 1 if e == X0 else e  # noqa: E731
    d = np.full((n, n), np.inf)
    np.fill_diagonal(d, 0.0)
    for c in stn.constraints:
        a, b = node(c.src), node(c.dst)
        d[a, b] = min(d[a, b], c.ub)
        d[b, a] = min(d[b, a], -c.lb)
    for k in range(n):
        d = np.minimum(d, d[:, k : k + 1] + d[k : k + 1, :])
    return bool((np.diag(d) >= 0).all())


@given(st.integers(0, 100_000))
@settings(max_examples=150, deadline=None)
def test_consistency_iff_no_negative_cycle(seed):
    stn = _random_network(seed)
    expected = _consistent_by_floyd(stn)
    try:
        sched = compute_schedule(stn)
    except InconsistentNetwork as err:
        assert not expected
        assert err.cycle
        return
    assert expected
    for c in stn.constraints:
        ta, tb = (0.0 if e == X0 else sched.earliest[e] for e in (c.src, c.dst))
        assert c.lb - 1e-9 <= tb - ta <= c.ub + 1e-9


@given(st.integers(0, len(SOLUTIONS) - 1), st.integers(0, 10_000), st.floats(0.0, 2.0))
@settings(max_examples=40, deadline=None)
def test_raising_a_bound_never_lowers_earliest(k, seed, bump):
    inst, sol = SOLUTIONS[k]
    stn = build_stn(sol, inst.workspace, Kinematics(1.0, 0.1, 0.3))
    base = compute_schedule(stn).earliest
    i = random.Random(seed).randrange(len(stn.constraints))
    cons = list(stn.constraints)
    cons[i] = replace(cons[i], lb=cons[i].lb + bump)
    bumped = compute_schedule(replace(stn, constraints=cons)).earliest
    assert all(b >= a - 1e-9 for a, b in zip(base, bumped))


def test_schedule_round_trip(plus):
    inst = mapf(plus, [((0, 1), (2, 1)), ((1, 0), (1, 2))])
    stn = build_stn(cbs_solve(inst), plus, Kinematics(1.0, 0.5, 0.5), deadline=10.0)
    sched = compute_schedule(stn)
    text = schedule_to_json(sched, stn, plus)
    again_sched, again_stn = schedule_from_json(text, plus)
    assert schedule_to_json(again_sched, again_stn, plus) == text
    assert again_stn.last == stn.last


def test_unbounded_round_trip(corridor):
    stn = build_stn(Solution([[0, 1, 2]]), corridor, UNIT)
    text = schedule_to_json(compute_schedule(stn), stn)
    assert '"latest_s": null' in text
    assert schedule_to_json(*schedule_from_json(text)) == text


def test_trace_json(corridor):
    stn = build_stn(Solution([[0, 1, 2]]), corridor, UNIT)
    trace = simulate_execution(compute_schedule(stn), stn, DelayModel("uniform", 0.5, seed=3))
    assert trace_to_json(trace) == trace_to_json(
        simulate_execution(compute_schedule(stn), stn, DelayModel("uniform", 0.5, seed=3))
    )
