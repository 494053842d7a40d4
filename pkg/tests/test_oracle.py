from __future__ import annotations

from collections import deque
from itertools import permutations, product

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import mapf
from mapfgen.generate import generate_instance
from mapfgen.model import EXCHANGE, Flavor
from mapfgen.oracle import OracleScaleError, assignment_enumeration_makespan, joint_state_oracle, oracle_makespan
from mapfgen.validate import validate


def naive_makespan(inst, allow_swap):
    """Plain tuple BFS, written independently of the vectorised oracle."""
    ws = inst.workspace
    goals = set()
    for choice in product(*[permutations(g.targets) for g in inst.groups]):
        pos = [None] * inst.n
        for g, perm in zip(inst.groups, choice):
            for m, v in zip(g.members, perm):
                pos[m] = v
        goals.add(tuple(pos))
    start = tuple(inst.starts)
    seen = {start: 0}
    queue = deque([start])
    while queue:
        s = queue.popleft()
        if s in goals:
            return seen[s]
        for nxt in product(*[(v,) + ws.adj[v] for v in s]):
            if len(set(nxt)) < len(nxt):
                continue
            if not allow_swap and any(
                nxt[i] == s[j] and nxt[j] == s[i] and i != j for i in range(len(s)) for j in range(len(s))
            ):
                continue
            if nxt not in seen:
                seen[nxt] = seen[s] + 1
                queue.append(nxt)
    return None


def test_single_agent_corridor(corridor):
    assert oracle_makespan(mapf(corridor, [((0, 0), (2, 0))])) == 2


def test_headon_corridor_infeasible_then_exchange(corridor):
    inst = mapf(corridor, [((0, 0), (2, 0)), ((2, 0), (0, 0))])
    assert joint_state_oracle(inst) is None
    perr = inst.as_flavor(Flavor.PERR)
    sol = joint_state_oracle(perr)
    assert sol.makespan() == 3
    assert validate(perr, sol).ok


def test_guardrail():
    inst = generate_instance(7, 6, 0.0, Flavor.MAPF, 2, 0)
    with pytest.raises(OracleScaleError, match="oracle scale exceeded"):
        joint_state_oracle(inst)
    inst = generate_instance(3, 3, 0.0, Flavor.MAPF, 5, 0)
    with pytest.raises(OracleScaleError):
        joint_state_oracle(inst)


def test_horizon_cap(corridor):
    inst = mapf(corridor, [((0, 0), (2, 0))])
    assert joint_state_oracle(inst, horizon_cap=1) is None


@given(st.integers(0, 10_000), st.sampled_from([Flavor.MAPF, Flavor.PERR, Flavor.TAPF, Flavor.KPERR]))
@settings(max_examples=60, deadline=None)
def test_oracle_matches_naive_search(seed, flavor):
    sizes = [1, 2] if flavor in (Flavor.TAPF, Flavor.KPERR) else 3
    inst = generate_instance(3, 3, 0.15, flavor, sizes, seed)
    sol = joint_state_oracle(inst)
    expected = naive_makespan(inst, inst.semantics.allow_swap)
    if expected is not None and expected > inst.workspace.n + inst.n:
        expected = None  # beyond the default cap
    assert (None if sol is None else sol.makespan()) == expected
    if sol is not None:
        assert validate(inst, sol).ok


@given(st.integers(0, 10_000))
@settings(max_examples=15, deadline=None)
def test_group_oracle_equals_assignment_enumeration(seed):
    inst = generate_instance(3, 3, 0.0, Flavor.TAPF, [2, 1], seed)
    assert oracle_makespan(inst) == assignment_enumeration_makespan(inst)


def test_exchange_semantics_override(corridor):
    inst = mapf(corridor, [((0, 0), (2, 0)), ((2, 0), (0, 0))])
    assert oracle_makespan(inst, semantics=EXCHANGE) == 3
