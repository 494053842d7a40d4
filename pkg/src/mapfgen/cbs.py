"""Conflict-Based Search and its focal (bounded-suboptimal) variant, makespan objective."""

from __future__ import annotations

import heapq
import math
import time
from bisect import bisect_right
from collections import defaultdict
from dataclasses import dataclass, field
from itertools import count, product
from typing import Sequence

from .model import (
    BudgetExhausted,
    Flavor,
    Instance,
    InstanceError,
    MotionSemantics,
    Path,
    Solution,
    Workspace,
    swap_exchanges,
)
from .validate import Conflict, count_conflicting_pairs, first_conflict, iter_conflicts


@dataclass(frozen=True)
class Constraint:
    """Forbids ``mover`` from being at a vertex at ``time``, or from arriving over a directed edge at ``time``."""

    mover: int
    kind: str
    location: int | tuple[int, int]
    time: int

    def __post_init__(self):
        if self.kind not in ("vertex", "edge"):
            raise ValueError(f"unknown constraint kind {self.kind!r}")
        if self.kind == "edge" and self.time < 1:
            raise ValueError("edge constraints need time >= 1")


@dataclass
class Limits:
    """Search budgets and the meta-agent policy.

    Two groups of movers that have conflicted more than ``merge_after``
    times are merged into one meta-agent planned jointly, provided
    ``|V| ** size`` stays within ``max_joint_states``; ``merge_after=None``
    disables merging.
    """

    max_nodes: int = 20_000
    max_seconds: float | None = None
    horizon: int | None = None
    merge_after: int | None = 10
    max_joint_states: int = 50_000

    def horizon_for(self, inst: Instance) -> int:
        return self.horizon if self.horizon is not None else inst.workspace.n + inst.n


class Reservations:
    """Occupancy of other movers' paths, used to count conflicts a candidate path would add.

    A mover stays on its last vertex forever after its path ends.
    """

    def __init__(self, paths: Sequence[Sequence[int]] = (), allow_swap: bool = False):
        self.allow_swap = allow_swap
        self.occ: dict[tuple[int, int], int] = defaultdict(int)
        self.moves: dict[tuple[int, int, int], int] = defaultdict(int)
        self.park: dict[int, list[int]] = defaultdict(list)
        self.times_at: dict[int, list[int]] = defaultdict(list)
        self.horizon = 0
        for p in paths:
            self.add(p)
        for times in self.times_at.values():
            times.sort()

    def add(self, path: Sequence[int]) -> None:
        last = len(path) - 1
        for t in range(last):
            self.occ[(path[t], t)] += 1
            self.times_at[path[t]].append(t)
            if t and path[t - 1] != path[t]:
                self.moves[(path[t - 1], path[t], t)] += 1
        if last and path[last - 1] != path[last]:
            self.moves[(path[last - 1], path[last], last)] += 1
        self.park[path[last]].append(last)
        self.park[path[last]].sort()
        self.horizon = max(self.horizon, last)

    def step(self, u: int, v: int, t: int) -> int:
        """Conflicts created by moving ``u -> v`` and arriving at ``t``."""
        c = self.occ.get((v, t), 0)
        parked = self.park.get(v)
        if parked:
            c += bisect_right(parked, t)
        if not self.allow_swap and u != v:
            c += self.moves.get((v, u, t), 0)
        return c

    def stay(self, v: int, t: int) -> int:
        """Conflicts created by parking on ``v`` from ``t`` onward (beyond the arrival step)."""
        times = self.times_at.get(v, ())
        c = len(times) - bisect_right(times, t)
        parked = self.park.get(v)
        if parked:
            c += len(parked) - bisect_right(parked, t)
        return c


@dataclass
class LowLevelResult:
    path: Path
    lower_bound: int
    expanded: int


class _ConstraintTable:
    def __init__(self, constraints, mover: int | None = None):
        self.vertex: set[tuple[int, int]] = set()
        self.edge: set[tuple[int, int, int]] = set()
        self.last = 0
        for c in constraints:
            if mover is not None and c.mover != mover:
                continue
            if c.kind == "vertex":
                self.vertex.add((c.location, c.time))
            else:
                self.edge.add((c.location[0], c.location[1], c.time))
            self.last = max(self.last, c.time)

    def goal_last(self, goal: int) -> int:
        return max((t for v, t in self.vertex if v == goal), default=-1)

    def blocked(self, u: int, v: int, t: int) -> bool:
        return (v, t) in self.vertex or (u, v, t) in self.edge


def _min_arrival(ws: Workspace, start: int, goal: int, table: _ConstraintTable, horizon: int):
    """Earliest arrival after which the mover can stay on ``goal`` forever; (arrival, expansions)."""
    dist = ws.distances_to(goal)
    if dist[start] < 0 or (start, 0) in table.vertex:
        return None, 0
    goal_last = table.goal_last(goal)
    heap = [(dist[start], 0, start)]
    closed = set()
    expanded = 0
    while heap:
        f, t, v = heapq.heappop(heap)
        if f > horizon:
            return None, expanded
        if (v, t) in closed:
            continue
        closed.add((v, t))
        expanded += 1
        if t >= table.last or (v == goal and t > goal_last):
            return f, expanded
        for nv in (v,) + ws.adj[v]:
            d = dist[nv]
            if d < 0 or t + 1 + d > horizon or table.blocked(v, nv, t + 1):
                continue
            if (nv, t + 1) not in closed:
                heapq.heappush(heap, (t + 1 + d, t + 1, nv))
    return None, expanded


def _bounded_search(
    ws: Workspace,
    start: int,
    goal: int,
    table: _ConstraintTable,
    bound: int,
    heuristic: Sequence[float] | None,
    avoid: Reservations | None,
) -> tuple[Path | None, int]:
    """Among paths arriving by ``bound``, the one with fewest conflicts against ``avoid``.

    Ties go to the smallest ``t + heuristic``, then the earliest arrival, then insertion order.
    """
    dist = ws.distances_to(goal)
    h = heuristic if heuristic is not None else dist
    goal_last = table.goal_last(goal)
    tick = count()
    heap = [(0, h[start], 0, next(tick), start, None)]
    parent: dict[tuple[int, int], tuple[int, int] | None] = {}
    expanded = 0
    while heap:
        c, _, t, _, v, prev = heapq.heappop(heap)
        if prev == "done":
            path = []
            node = (v, t)
            while node is not None:
                path.append(node[0])
                node = parent[node]
            path.reverse()
            return path, expanded
        if (v, t) in parent:
            continue
        parent[(v, t)] = prev
        expanded += 1
        if v == goal and t > goal_last:
            extra = avoid.stay(v, t) if avoid is not None else 0
            heapq.heappush(heap, (c + extra, t, t, next(tick), v, "done"))
        nt = t + 1
        for nv in (v,) + ws.adj[v]:
            d = dist[nv]
            if d < 0 or nt + d > bound or table.blocked(v, nv, nt) or (nv, nt) in parent:
                continue
            nc = c + (avoid.step(v, nv, nt) if avoid is not None else 0)
            heapq.heappush(heap, (nc, nt + h[nv], nt, next(tick), nv, (v, t)))
    return None, expanded


def _plan(ws, start, goal, table, horizon, factor, floor_bound, heuristic, avoid) -> LowLevelResult | None:
    lb, exp1 = _min_arrival(ws, start, goal, table, horizon)
    if lb is None:
        return None
    bound = min(horizon, max(lb, math.floor(factor * max(lb, floor_bound) + 1e-9)))
    path, exp2 = _bounded_search(ws, start, goal, table, bound, heuristic, avoid)
    assert path is not None, "bounded search must find the optimal path"
    return LowLevelResult(path, lb, exp1 + exp2)


def _joint_plan(
    ws: Workspace,
    starts: Sequence[int],
    goals: Sequence[int | Sequence[int]],
    tables: Sequence[_ConstraintTable],
    horizon: int,
    allow_swap: bool,
) -> tuple[list[Path] | None, int]:
    """Minimum-makespan conflict-free paths for a meta-agent, by A* over joint states and time.

    Each entry of ``goals`` is a vertex or a collection of vertices the
    member may finish on. After the last constraint time the problem no
    longer depends on time, so from then on each joint state is expanded
    once. Returns (paths, expansions); paths is None when no joint plan
    reaches the goals within ``horizon``.
    """
    k = len(starts)
    goal_sets = [frozenset((g,)) if isinstance(g, int) else frozenset(g) for g in goals]
    dists = []
    for gs in goal_sets:
        rows = [ws.distances_to(g) for g in gs]
        dists.append([min((r[v] for r in rows if r[v] >= 0), default=-1) for v in range(ws.n)])
    if any(d[s] < 0 for d, s in zip(dists, starts)) or any((s, 0) in tb.vertex for s, tb in zip(starts, tables)):
        return None, 0
    settle = max(tb.last for tb in tables) + 1

    def h(state):
        return max(d[v] for d, v in zip(dists, state))

    def done(state, t):
        return all(v in gs and t > tb.goal_last(v) for v, gs, tb in zip(state, goal_sets, tables))

    start = tuple(starts)
    tick = count()
    heap = [(h(start), 0, next(tick), start)]
    parent: dict[tuple[tuple[int, ...], int], tuple[tuple[int, ...], int] | None] = {(start, 0): None}
    closed: set[tuple[tuple[int, ...], int]] = set()
    expanded = 0
    while heap:
        _, negt, _, state = heapq.heappop(heap)
        t = -negt
        key = (state, min(t, settle))
        if key in closed:
            continue
        closed.add(key)
        if done(state, t):
            paths: list[Path] = [[] for _ in range(k)]
            node = (state, t)
            while node is not None:
                for i in range(k):
                    paths[i].append(node[0][i])
                node = parent[node]
            return [p[::-1] for p in paths], expanded
        expanded += 1
        nt = t + 1
        options = []
        for i, v in enumerate(state):
            d = dists[i]
            options.append([
                u for u in (v,) + ws.adj[v]
                if d[u] >= 0 and nt + d[u] <= horizon and not tables[i].blocked(v, u, nt)
            ])
        for succ in product(*options):
            if len(set(succ)) < k or (succ, min(nt, settle)) in closed:
                continue
            if not allow_swap and any(
                succ[i] == state[j] and succ[j] == state[i] and succ[i] != state[i]
                for i in range(k) for j in range(i + 1, k)
            ):
                continue
            if (succ, nt) not in parent:
                parent[(succ, nt)] = (state, t)
                heapq.heappush(heap, (nt + h(succ), -nt, next(tick), succ))
    return None, expanded


def low_level_search(
    ws: Workspace,
    mover: int,
    start: int,
    goal: int,
    constraints=(),
    heuristic: Sequence[float] | None = None,
    horizon: int | None = None,
    focal_bound: float | None = None,
    avoid: Sequence[Sequence[int]] | None = None,
) -> Path | None:
    """Space-time single-mover search honouring ``mover``'s constraints.

    Returns a minimum-arrival path, or with ``focal_bound`` w a path arriving
    within ``floor(w * minimum)`` that has the fewest conflicts with ``avoid``.
    The mover must be able to stay on ``goal`` forever after arrival.
    """
    horizon = ws.n + 1 if horizon is None else horizon
    table = _ConstraintTable(constraints, mover)
    res = _plan(
        ws, start, goal, table, horizon, focal_bound or 1.0, 0, heuristic,
        Reservations(avoid) if avoid else None,
    )
    return None if res is None else res.path


@dataclass
class _Node:
    constraints: tuple[Constraint, ...]
    paths: list[Path]
    lbs: list[int]
    cost: int
    lb: int
    pairs: int
    conflict: Conflict | None
    nid: int
    expanded: bool = field(default=False)


def _makespan(paths) -> int:
    best = 0
    for p in paths:
        for t in range(len(p) - 1, 0, -1):
            if p[t] != p[t - 1]:
                best = max(best, t)
                break
    return best


def _pad(paths: list[Path]) -> list[Path]:
    horizon = max(len(p) for p in paths)
    return [p + [p[-1]] * (horizon - len(p)) for p in paths]


def conflict_search(
    inst: Instance,
    factor: float = 1.0,
    semantics: MotionSemantics | None = None,
    limits: Limits | None = None,
    heuristics: Sequence[Sequence[float]] | None = None,
    stats: dict | None = None,
) -> Solution | None:
    """Two-level conflict search shared by CBS (factor 1), ECBS and ECBS with highways.

    The high level keeps every unexpanded node in OPEN keyed by its lower
    bound (max over movers of their minimum arrival under the node's
    constraints); FOCAL holds the nodes whose makespan is within ``factor``
    of the best lower bound and is ordered by conflicting pairs, makespan,
    constraint count and insertion order. Each low-level call may use any
    arrival up to ``floor(factor * node lower bound)`` and spends that slack
    on avoiding conflicts. Groups that keep conflicting are merged into a
    meta-agent (see ``Limits``) and the search restarts from a new root;
    meta-agents are planned optimally by joint search, which also lets the
    search prove infeasibility. Returns None when no solution exists within
    the horizon cap. Counters go into ``stats`` when given, also on failure.
    """
    if factor < 1:
        raise ValueError("suboptimality factor must be >= 1")
    semantics = semantics or inst.semantics
    limits = limits or Limits()
    stats = {} if stats is None else stats
    stats.update(hl_expanded=0, hl_generated=0, ll_expanded=0, merges=0)
    for key in ("root_conflict_pairs", "root_swap_conflicts", "lower_bound", "reason"):
        stats.pop(key, None)
    search = _Search(inst, factor, semantics.allow_swap, limits, heuristics or [None] * inst.n, stats)
    groups = [(i,) for i in range(inst.n)]
    while True:
        out = search.run(groups)
        if not isinstance(out, tuple):
            return out
        ga, gb = out
        stats["merges"] += 1
        groups = sorted([g for g in groups if g not in (ga, gb)] + [tuple(sorted(ga + gb))])


class _Search:
    def __init__(self, inst: Instance, factor: float, allow_swap: bool, limits: Limits, hs, stats: dict):
        self.inst = inst
        self.ws = inst.workspace
        self.targets = inst.fixed_targets()
        self.factor = factor
        self.allow_swap = allow_swap
        self.limits = limits
        self.horizon = limits.horizon_for(inst)
        self.hs = hs
        self.stats = stats
        self.started = time.perf_counter()

    def _lower(self, group, constraints):
        """Group lower bound under ``constraints``, and the joint paths for a meta-agent."""
        inst, stats = self.inst, self.stats
        if len(group) == 1:
            i = group[0]
            lb, e = _min_arrival(self.ws, inst.starts[i], self.targets[i], _ConstraintTable(constraints, i), self.horizon)
            stats["ll_expanded"] += e
            return lb, None
        tables = [_ConstraintTable(constraints, i) for i in group]
        paths, e = _joint_plan(
            self.ws, [inst.starts[i] for i in group], [self.targets[i] for i in group], tables,
            self.horizon, self.allow_swap,
        )
        stats["ll_expanded"] += e
        return (None, None) if paths is None else (_makespan(paths), paths)

    def _replan(self, group, constraints, joint, floor_bound, paths) -> None:
        """Write the group's new paths into ``paths`` (a singleton uses the focal low level)."""
        if joint is not None:
            for i, p in zip(group, joint):
                paths[i] = p
            return
        i = group[0]
        others = [p for j, p in enumerate(paths) if j != i and p is not None]
        res = _plan(
            self.ws, self.inst.starts[i], self.targets[i], _ConstraintTable(constraints, i), self.horizon,
            self.factor, floor_bound, self.hs[i], Reservations(others, self.allow_swap) if others else None,
        )
        self.stats["ll_expanded"] += res.expanded
        paths[i] = res.path

    def _mergeable(self, ga, gb) -> bool:
        lim = self.limits
        return lim.merge_after is not None and self.ws.n ** (len(ga) + len(gb)) <= lim.max_joint_states

    def run(self, groups):
        """Solution, None, or a pair of groups to merge before restarting."""
        stats, limits, factor, allow_swap = self.stats, self.limits, self.factor, self.allow_swap
        n = self.inst.n
        group_of = {i: g for g in groups for i in g}
        lbs = [0] * n
        joints = {}
        for g in groups:
            lb, joint = self._lower(g, ())
            if lb is None:
                stats["reason"] = "unreachable" if len(g) == 1 else "no joint plan"
                return None
            for i in g:
                lbs[i] = lb
            joints[g] = joint
        root_lb = max(lbs, default=0)
        paths: list = [None] * n
        for g in groups:
            self._replan(g, (), joints[g], root_lb, paths)
        tick = count()
        root = _make_node((), paths, lbs, allow_swap, next(tick))
        # root statistics describe the first root, before any merge
        stats.setdefault("root_conflict_pairs", root.pairs)
        stats.setdefault("root_swap_conflicts", sum(
            1 for c in iter_conflicts(_pad(root.paths), False) if c.kind == "swap"
        ))
        open_heap = [(root.lb, root.nid, root)]
        pending = [(root.cost, root.nid, root)]
        focal: list = []
        seen = {frozenset()}
        clashes: dict[tuple, int] = defaultdict(int)

        while open_heap:
            while open_heap and open_heap[0][2].expanded:
                heapq.heappop(open_heap)
            if not open_heap:
                break
            lb_min = open_heap[0][0]
            limit = factor * lb_min + 1e-9
            while pending and pending[0][0] <= limit:
                _, _, node = heapq.heappop(pending)
                heapq.heappush(focal, (node.pairs, node.cost, len(node.constraints), node.nid, node))
            _, _, _, _, node = heapq.heappop(focal)
            node.expanded = True
            if node.conflict is None:
                stats["lower_bound"] = lb_min
                paths = _pad(node.paths)
                exchanges = swap_exchanges(paths) if allow_swap else []
                return Solution(paths, exchanges=exchanges, stats=stats)
            stats["hl_expanded"] += 1
            if stats["hl_expanded"] > limits.max_nodes or (
                limits.max_seconds is not None and time.perf_counter() - self.started > limits.max_seconds
            ):
                raise BudgetExhausted(stats=stats)
            ga, gb = sorted((group_of[m] for m in node.conflict.movers))
            clashes[(ga, gb)] += 1
            if clashes[(ga, gb)] > (limits.merge_after or 0) and self._mergeable(ga, gb):
                return ga, gb
            for con in _branch(node.conflict, node.paths):
                cons = node.constraints + (con,)
                key = frozenset(cons)
                if key in seen:
                    continue
                seen.add(key)
                g = group_of[con.mover]
                lb, joint = self._lower(g, cons)
                if lb is None:
                    continue
                child_lbs = list(node.lbs)
                for i in g:
                    child_lbs[i] = lb
                child_paths = list(node.paths)
                self._replan(g, cons, joint, max(child_lbs), child_paths)
                child = _make_node(cons, child_paths, child_lbs, allow_swap, next(tick))
                stats["hl_generated"] += 1
                heapq.heappush(open_heap, (child.lb, child.nid, child))
                heapq.heappush(pending, (child.cost, child.nid, child))
        stats["reason"] = "exhausted"
        return None


def _make_node(constraints, paths, lbs, allow_swap, nid) -> _Node:
    padded = _pad(paths)
    return _Node(
        constraints,
        paths,
        lbs,
        _makespan(padded),
        max(lbs, default=0),
        count_conflicting_pairs(padded, allow_swap),
        first_conflict(padded, allow_swap),
        nid,
    )


def _branch(conflict: Conflict, paths) -> list[Constraint]:
    a, b = conflict.movers
    t = conflict.time
    if conflict.kind == "vertex":
        v = conflict.location
        return [Constraint(a, "vertex", v, t), Constraint(b, "vertex", v, t)]
    u, v = conflict.location
    return [Constraint(a, "edge", (u, v), t), Constraint(b, "edge", (v, u), t)]


def _check_fixed(inst: Instance) -> None:
    if inst.flavor is Flavor.TAPF:
        raise InstanceError("conflict-based search needs fixed per-mover targets")


def cbs_solve(
    inst: Instance, semantics: MotionSemantics | None = None, limits: Limits | None = None, stats: dict | None = None
) -> Solution | None:
    """Makespan-optimal solution, or None if infeasible within the horizon cap."""
    _check_fixed(inst)
    return conflict_search(inst, 1.0, semantics, limits, stats=stats)


def ecbs_solve(
    inst: Instance,
    w: float,
    semantics: MotionSemantics | None = None,
    limits: Limits | None = None,
    stats: dict | None = None,
) -> Solution | None:
    """Solution with makespan at most ``w`` times the optimum."""
    _check_fixed(inst)
    return conflict_search(inst, w, semantics, limits, stats=stats)
