"""Highways: directed edge sets that bias planning, inflated heuristics, and automatic generation."""

from __future__ import annotations

import heapq
import random
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .cbs import Limits, _check_fixed, conflict_search
from .model import Instance, InstanceError, MotionSemantics, Solution, Workspace, mover_paths

Highway = frozenset  # of directed edges (u, v)


def check_highway(ws: Workspace, hw: Iterable[tuple[int, int]]) -> Highway:
    hw = frozenset(hw)
    for u, v in hw:
        if not (0 <= u < ws.n and ws.has_edge(u, v)):
            raise InstanceError(f"highway edge {u}->{v} is not a workspace edge")
    return hw


@dataclass(frozen=True)
class InflatedHeuristicTable:
    goal: int
    w: float
    values: tuple[float, ...]  # inf where the goal is unreachable

    def __getitem__(self, v: int) -> float:
        return self.values[v]


def build_inflated_heuristic(ws: Workspace, goal: int, hw: Iterable[tuple[int, int]], w: float) -> InflatedHeuristicTable:
    """Cost-to-goal where a highway edge costs 1 and any other edge costs ``w``.

    Every value lies between the true distance and ``w`` times it.
    """
    if w < 1:
        raise ValueError("inflation factor must be >= 1")
    if not 0 <= goal < ws.n:
        raise InstanceError(f"goal {goal} not in workspace")
    hw = frozenset(hw)
    rev = getattr(ws, "_rev", None) or ws._build_rev()
    dist = [float("inf")] * ws.n
    dist[goal] = 0.0
    heap = [(0.0, goal)]
    while heap:
        d, v = heapq.heappop(heap)
        if d > dist[v]:
            continue
        for u in rev[v]:
            nd = d + (1.0 if (u, v) in hw else w)
            if nd < dist[u]:
                dist[u] = nd
                heapq.heappush(heap, (nd, u))
    return InflatedHeuristicTable(goal, w, tuple(dist))


def adherence(paths: Sequence[Sequence[int]], hw: Iterable[tuple[int, int]]) -> float | None:
    """Fraction of traversed directed edges that lie on the highway; None when nothing moves."""
    hw = frozenset(hw)
    moves = on = 0
    for p in paths:
        for u, v in zip(p, p[1:]):
            if u != v:
                moves += 1
                on += (u, v) in hw
    return on / moves if moves else None


def ecbs_highway_solve(
    inst: Instance,
    hw: Iterable[tuple[int, int]],
    w1: float,
    w2: float,
    limits: Limits | None = None,
    semantics: MotionSemantics | None = None,
    stats: dict | None = None,
) -> Solution | None:
    """Focal search whose low level prefers highway edges.

    Low-level searches order candidates by the ``w1``-inflated highway
    heuristic and may arrive up to ``w1 * w2`` times the node lower bound,
    so the makespan stays within ``w1 * w2`` of optimal. The highway
    adherence of the mover paths goes into ``stats["adherence"]``.
    """
    if w1 < 1 or w2 < 1:
        raise ValueError("w1 and w2 must be >= 1")
    _check_fixed(inst)
    ws = inst.workspace
    hw = check_highway(ws, hw)
    stats = {} if stats is None else stats
    tables = {}
    for g in set(inst.fixed_targets()):
        tables[g] = build_inflated_heuristic(ws, g, hw, w1).values
    heuristics = [tables[g] for g in inst.fixed_targets()]
    sol = conflict_search(inst, w1 * w2, semantics, limits, heuristics, stats)
    if sol is not None:
        paths = mover_paths(sol) if sol.exchanges else sol.paths
        stats["adherence"] = adherence(paths, hw)
    return sol


@dataclass(frozen=True)
class HighwayParams:
    """``ratio``: share of traffic the dominant direction needs; ``corridor_degree``: max degree of
    the less connected endpoint; ``penalty``: extra planning cost per opposing traversal already
    routed over an edge; ``samples``: additional seeded random trips added to the instance's;
    ``rounds``: passes in which every trip is re-routed against all other trips' usage."""

    ratio: float = 0.7
    corridor_degree: int = 3
    penalty: float = 2.0
    samples: int = 0
    seed: int = 0
    rounds: int = 1


def _lane_path(ws: Workspace, start: int, goal: int, usage: dict, penalty: float) -> list[int] | None:
    """Cheapest path when each traversal costs 1 plus ``penalty`` per opposite traversal so far."""
    dist = {start: 0.0}
    parent = {start: None}
    heap = [(0.0, start)]
    while heap:
        d, v = heapq.heappop(heap)
        if v == goal:
            break
        if d > dist[v]:
            continue
        for u in ws.adj[v]:
            opposing = usage.get((u, v), 0)
            nd = d + 1.0 + penalty * opposing / (1 + usage.get((v, u), 0))
            if nd < dist.get(u, float("inf")):
                dist[u] = nd
                parent[u] = v
                heapq.heappush(heap, (nd, u))
    if goal not in parent:
        return None
    path = [goal]
    while parent[path[-1]] is not None:
        path.append(parent[path[-1]])
    return path[::-1]


def _instance_trips(inst: Instance) -> list[tuple[int, int]]:
    """Start-goal pairs; team members take a distance-minimizing assignment to their targets."""
    if inst.targets is not None:
        return list(zip(inst.starts, inst.targets))
    ws = inst.workspace
    trips = []
    for g in inst.groups:
        starts = [inst.starts[m] for m in g.members]
        cost = np.array([[ws.distances_to(t)[s] for t in g.targets] for s in starts], dtype=float)
        cost[cost < 0] = ws.n * 10
        rows, cols = linear_sum_assignment(cost)
        trips += [(starts[r], g.targets[c]) for r, c in zip(rows, cols)]
    return trips


def generate_highways(ws: Workspace, inst: Instance | None, params: HighwayParams = HighwayParams()) -> Highway:
    """Direction-histogram highway from the trips of ``inst`` (plus optional random trips).

    Trips are routed one after another; each route pays extra for edges
    already used in the opposite direction, so opposing traffic settles
    into separate lanes. Further rounds re-route each trip against the
    others' current routes. An undirected edge becomes a one-way highway edge
    when one direction carries more than ``params.ratio`` of its traffic
    and its less connected endpoint has degree at most
    ``params.corridor_degree``. With ``penalty`` 0 the routes are plain
    shortest paths.
    """
    trips: list[tuple[int, int]] = []
    if inst is not None:
        if inst.n < 1:
            raise InstanceError("highway generation needs at least one mover")
        trips += _instance_trips(inst)
    if params.samples:
        rng = random.Random(params.seed)
        cells = [v for v in range(ws.n) if ws.adj[v]]
        for _ in range(params.samples):
            trips.append(tuple(rng.sample(cells, 2)))
    usage: dict[tuple[int, int], int] = {}
    routes: list[list[int]] = [[] for _ in trips]

    def tally(path, sign):
        for u, v in zip(path, path[1:]):
            usage[(u, v)] = usage.get((u, v), 0) + sign

    for rnd in range(params.rounds if params.penalty else 1):
        for i, (s, g) in enumerate(trips):
            tally(routes[i], -1)
            if params.penalty:
                routes[i] = _lane_path(ws, s, g, usage, params.penalty) or []
            else:
                routes[i] = ws.shortest_path(s, g) or []
            tally(routes[i], 1)
    usage = {e: c for e, c in usage.items() if c > 0}
    out = set()
    for (u, v), fwd in usage.items():
        back = usage.get((v, u), 0)
        if fwd / (fwd + back) > params.ratio and min(len(ws.adj[u]), len(ws.adj[v])) <= params.corridor_degree:
            out.add((u, v))
    return check_highway(ws, out)
