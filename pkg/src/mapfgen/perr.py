"""Package-exchange robot routing: optimal search, typed packages via CBM, and a fast constructive mode."""

from __future__ import annotations

import time
from collections import deque

from .cbs import Limits, conflict_search
from .flow import cbm_solve
from .model import EXCHANGE, BudgetExhausted, Flavor, Instance, InstanceError, Solution, swap_exchanges

# An exchange occupies one timestep: both packages cross the shared edge between t and t + 1.
EXCHANGE_DURATION = 1


def perr_solve_optimal(inst: Instance, limits: Limits | None = None, stats: dict | None = None) -> Solution | None:
    """Minimum-makespan PERR plan: conflict-based search over packages with swaps legal."""
    if inst.flavor is not Flavor.PERR:
        raise InstanceError("perr_solve_optimal needs a PERR instance")
    return conflict_search(inst, 1.0, EXCHANGE, limits, stats=stats)


def kperr_solve(inst: Instance, limits: Limits | None = None, stats: dict | None = None) -> Solution | None:
    """Minimum-makespan K-PERR plan: each package type is a team planned by min-cost flow, swaps legal."""
    if inst.flavor not in (Flavor.KPERR, Flavor.PERR):
        raise InstanceError("kperr_solve needs a package instance")
    return cbm_solve(inst, limits, anti_swap=False, stats=stats)


def _cut_vertices(adj, alive: set[int]) -> set[int]:
    """Articulation points of the subgraph induced by ``alive`` (iterative Tarjan)."""
    disc: dict[int, int] = {}
    low: dict[int, int] = {}
    cuts: set[int] = set()
    clock = 0
    for root in sorted(alive):
        if root in disc:
            continue
        disc[root] = low[root] = clock
        clock += 1
        children = 0
        stack = [(root, -1, iter(adj[root]))]
        while stack:
            v, parent, it = stack[-1]
            for u in it:
                if u not in alive:
                    continue
                if u not in disc:
                    disc[u] = low[u] = clock
                    clock += 1
                    stack.append((u, v, iter(adj[u])))
                    break
                if u != parent:
                    low[v] = min(low[v], disc[u])
            else:
                stack.pop()
                if parent < 0:
                    continue
                low[parent] = min(low[parent], low[v])
                if parent == root:
                    children += 1
                elif low[v] >= disc[parent]:
                    cuts.add(parent)
        if children > 1:
            cuts.add(root)
    return cuts


def _bfs_path(adj, alive: set[int], start: int, goal_test) -> list[int] | None:
    parent = {start: None}
    queue = deque([start])
    while queue:
        v = queue.popleft()
        if goal_test(v):
            path = [v]
            while parent[path[-1]] is not None:
                path.append(parent[path[-1]])
            return path[::-1]
        for u in adj[v]:
            if u in alive and u not in parent:
                parent[u] = v
                queue.append(u)
    return None


def perr_solve_fast(inst: Instance, limits: Limits | None = None, stats: dict | None = None) -> Solution | None:
    """Feasible PERR plan built one action per timestep.

    Repeatedly picks a vertex whose removal keeps the unlocked region
    connected, preferring the target of a package still to be placed.
    That package walks a shortest path inside the region, exchanging with
    any package in its way, and the vertex is locked. A non-target vertex
    is first emptied by shifting the nearest hole onto it, then locked.
    Every package ends on its target; makespan is not minimised.
    """
    if inst.flavor not in (Flavor.PERR, Flavor.KPERR):
        raise InstanceError("perr_solve_fast needs a package instance")
    ws = inst.workspace
    for u in range(ws.n):
        for v in ws.adj[u]:
            if not ws.has_edge(v, u):
                raise InstanceError("fast mode needs an undirected workspace")
    limits = limits or Limits()
    stats = {} if stats is None else stats
    started = time.perf_counter()
    targets = inst.fixed_targets()
    comp_of = [-1] * ws.n
    comps: list[list[int]] = []
    for v in range(ws.n):
        if comp_of[v] < 0:
            sub = _component(ws, v)
            for u in sub:
                comp_of[u] = len(comps)
            comps.append(sub)
    for s, g in zip(inst.starts, targets):
        if comp_of[s] != comp_of[g]:
            return None

    pos = list(inst.starts)
    occupant = {v: p for p, v in enumerate(pos)}
    history = [list(pos)]
    target_of = {g: p for p, g in enumerate(targets)}

    def step(moves):
        for p, v in moves:
            pos[p] = v
        occupant.clear()
        occupant.update({v: p for p, v in enumerate(pos)})
        history.append(list(pos))
        if limits.max_seconds is not None and time.perf_counter() - started > limits.max_seconds:
            stats["actions"] = len(history) - 1
            raise BudgetExhausted(stats=stats)

    for comp in comps:
        alive = set(comp)
        while alive:
            pending = sorted(v for v in alive if v in target_of)
            others = sorted(v for v in alive if v not in target_of)
            cuts = _cut_vertices(ws.adj, alive)
            x = next((v for v in pending + others if v not in cuts), None)
            if x is None:
                raise AssertionError("connected region without a non-cut vertex")
            if x in target_of:
                p = target_of[x]
                route = _bfs_path(ws.adj, alive, pos[p], lambda v: v == x)
                for v in route[1:]:
                    q = occupant.get(v)
                    step([(p, v)] if q is None else [(p, v), (q, pos[p])])
            else:
                hole = _bfs_path(ws.adj, alive, x, lambda v: v not in occupant)
                # shift packages toward the hole, starting next to it
                for i in range(len(hole) - 1, 0, -1):
                    q = occupant[hole[i - 1]]
                    step([(q, hole[i])])
            alive.discard(x)
    paths = [[h[p] for h in history] for p in range(inst.n)]
    stats["actions"] = len(history) - 1
    return Solution(paths, exchanges=swap_exchanges(paths), stats=stats)


def _component(ws, v: int) -> list[int]:
    seen = {v}
    queue = deque([v])
    while queue:
        a = queue.popleft()
        for b in ws.adj[a]:
            if b not in seen:
                seen.add(b)
                queue.append(b)
    return sorted(seen)
