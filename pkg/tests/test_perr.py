from __future__ import annotations

from collections import Counter

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mapfgen.assets import headon_corridor
from mapfgen.cbs import cbs_solve
from mapfgen.flow import anonymous_solve
from mapfgen.generate import generate_instance
from mapfgen.model import Flavor, Group, Instance, InstanceError, Workspace, mover_paths
from mapfgen.oracle import assignment_enumeration_makespan, oracle_makespan
from mapfgen.perr import kperr_solve, perr_solve_fast, perr_solve_optimal
from mapfgen.validate import iter_conflicts, validate


def _perr(ws, pairs):
    n = len(pairs)
    ids = tuple(f"p{i}" for i in range(n))
    return Instance(ws, Flavor.PERR, ids, tuple(s for s, _ in pairs), tuple(t for _, t in pairs), types=ids)


def test_packages_already_home(corridor):
    inst = _perr(corridor, [(0, 0), (2, 2)])
    assert perr_solve_optimal(inst).makespan() == 0
    assert perr_solve_fast(inst).makespan() == 0


def test_headon_needs_one_exchange():
    inst = headon_corridor(Flavor.PERR)
    sol = perr_solve_optimal(inst)
    assert sol.makespan() == 3 == oracle_makespan(inst)
    assert len(sol.exchanges) == 1
    rep = validate(inst, sol)
    assert rep.ok
    # the physical movers never collide
    assert not list(iter_conflicts(mover_paths(sol)))
    # the same instance as MAPF is infeasible
    assert cbs_solve(headon_corridor()) is None


def test_fast_headon():
    inst = headon_corridor(Flavor.PERR)
    sol = perr_solve_fast(inst)
    assert validate(inst, sol).ok
    assert sol.makespan() >= 3


def test_fast_single_package_shortest_path():
    ws = Workspace.grid(5, 4, [(1, 1), (2, 1), (3, 2)])
    s, g = ws.vertex(0, 0), ws.vertex(4, 3)
    sol = perr_solve_fast(_perr(ws, [(s, g)]))
    assert sol.makespan() == len(ws.shortest_path(s, g)) - 1


def test_fast_ten_packages_8x8():
    inst = generate_instance(8, 8, 0.1, Flavor.PERR, 10, 3)
    stats = {}
    sol = perr_solve_fast(inst, stats=stats)
    assert validate(inst, sol).ok
    assert stats["actions"] == sol.horizon


def test_fast_split_workspace():
    ws = Workspace.grid(3, 1, [(1, 0)])
    assert perr_solve_fast(_perr(ws, [(0, 1)])) is None


def test_wrong_flavor(corridor):
    with pytest.raises(InstanceError):
        perr_solve_optimal(headon_corridor())
    with pytest.raises(InstanceError):
        kperr_solve(headon_corridor())


def test_k_equals_n_is_perr():
    inst = headon_corridor(Flavor.PERR)
    assert kperr_solve(inst).makespan() == perr_solve_optimal(inst).makespan()


@given(st.integers(0, 10_000))
@settings(max_examples=40, deadline=None)
def test_perr_never_worse_than_mapf(seed):
    inst = generate_instance(4, 4, 0.15, Flavor.PERR, 3, seed)
    sol = perr_solve_optimal(inst)
    assert sol is not None and validate(inst, sol).ok
    assert sol.makespan() == oracle_makespan(inst)
    mapf = cbs_solve(inst.as_flavor(Flavor.MAPF))
    if mapf is not None:
        assert sol.makespan() <= mapf.makespan()


@given(st.integers(0, 10_000))
@settings(max_examples=40, deadline=None)
def test_fast_is_valid_and_not_better_than_optimal(seed):
    inst = generate_instance(5, 4, 0.15, Flavor.PERR, 4, seed)
    fast = perr_solve_fast(inst)
    assert validate(inst, fast).ok
    assert fast.makespan() >= oracle_makespan(inst)


@given(st.integers(0, 10_000))
@settings(max_examples=40, deadline=None)
def test_packages_conserved(seed):
    inst = generate_instance(5, 5, 0.1, Flavor.PERR, 6, seed)
    sol = perr_solve_fast(inst)
    for t in range(sol.horizon + 1):
        at = Counter(p[t] for p in sol.paths)
        assert len(at) == inst.n
        assert sum(at.values()) == inst.n
    # every exchange is between two carriers on adjacent cells, and carriers never collide
    ws = inst.workspace
    movers = mover_paths(sol)
    for t, a, b in sol.exchanges:
        assert ws.has_edge(movers[a][t], movers[b][t])
    assert not list(iter_conflicts(movers))


@given(st.integers(0, 10_000))
@settings(max_examples=15, deadline=None)
def test_kperr_two_types_matches_enumeration(seed):
    inst = generate_instance(4, 4, 0.1, Flavor.KPERR, [2, 2], seed)
    sol = kperr_solve(inst)
    assert sol.makespan() == assignment_enumeration_makespan(inst)
    assert validate(inst, sol).ok


@given(st.integers(0, 10_000))
@settings(max_examples=20, deadline=None)
def test_single_type_equals_anonymous(seed):
    inst = generate_instance(4, 4, 0.1, Flavor.KPERR, [3], seed)
    anon = Instance(
        inst.workspace, Flavor.TAPF, inst.mover_ids, inst.starts,
        teams=(Group("t", tuple(range(inst.n)), inst.fixed_targets()),),
    )
    assert kperr_solve(inst).makespan() == anonymous_solve(anon).makespan()
