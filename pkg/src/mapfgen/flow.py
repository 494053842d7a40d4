"""Flow-based planning on time-expanded networks: anonymous MAPF and Conflict-Based Min-Cost Flow for teams."""

from __future__ import annotations

import heapq
import time
from collections import defaultdict, deque
from dataclasses import dataclass, field
from itertools import count
from typing import Sequence

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import maximum_bipartite_matching

from .cbs import Limits, _ConstraintTable, _joint_plan
from .model import BudgetExhausted, Flavor, Instance, InstanceError, Path, Solution, Workspace, swap_exchanges
from .validate import iter_conflicts

INF = float("inf")


@dataclass(frozen=True)
class TeamConstraintSet:
    """Occupations a team may not use: ``(v, t)`` vertices and ``(u, v, t)`` moves arriving at ``t``."""

    vertex: frozenset[tuple[int, int]] = frozenset()
    edge: frozenset[tuple[int, int, int]] = frozenset()

    def add_vertex(self, v: int, t: int) -> TeamConstraintSet:
        return TeamConstraintSet(self.vertex | {(v, t)}, self.edge)

    def add_edge(self, u: int, v: int, t: int) -> TeamConstraintSet:
        return TeamConstraintSet(self.vertex, self.edge | {(u, v, t)})

    def __len__(self) -> int:
        return len(self.vertex) + len(self.edge)


NO_CONSTRAINTS = TeamConstraintSet()


class TimeExpandedNetwork:
    """Residual graph over ``(vertex, t)`` copies with unit capacities.

    Each ``(v, t)`` is split into an in-node and an out-node joined by a
    unit arc, so at most one unit occupies a vertex per timestep. With
    ``anti_swap`` each undirected edge gets, per timestep, a gadget whose
    single middle arc is shared by both directions. Arcs are stored in
    pairs: arc ``2k`` is forward, ``2k + 1`` its residual twin.
    """

    SOURCE = 0
    SINK = 1

    def __init__(self, horizon: int, starts: Sequence[int], targets: Sequence[int], anti_swap: bool):
        self.horizon = horizon
        self.starts = tuple(starts)
        self.targets = tuple(targets)
        self.anti_swap = anti_swap
        self.head: list[int] = []
        self.cap: list[int] = []
        self.cost: list[int] = []
        self.out: list[list[int]] = [[], []]
        self.vertex_of: list[int] = [-1, -1]  # vertex of in-nodes, -1 elsewhere
        self.time_of: list[int] = [-1, -1]
        self.inode: dict[tuple[int, int], int] = {}

    def add_node(self, vertex: int = -1, t: int = -1) -> int:
        self.out.append([])
        self.vertex_of.append(vertex)
        self.time_of.append(t)
        return len(self.out) - 1

    def add_arc(self, a: int, b: int, cap: int = 1, cost: int = 0) -> int:
        e = len(self.head)
        self.head += [b, a]
        self.cap += [cap, 0]
        self.cost += [cost, -cost]
        self.out[a].append(e)
        self.out[b].append(e + 1)
        return e

    @property
    def n_nodes(self) -> int:
        return len(self.out)

    def flow(self, e: int) -> int:
        return self.cap[e + 1]

    def arc_flows(self):
        """(tail, head, flow) of every forward arc."""
        tails = [0] * len(self.head)
        for a, arcs in enumerate(self.out):
            for e in arcs:
                tails[e] = a
        return [(tails[e], self.head[e], self.cap[e + 1]) for e in range(0, len(self.head), 2)]


def _multi_bfs(ws: Workspace, sources: Sequence[int], reverse: bool) -> list[int]:
    dist = [-1] * ws.n
    queue = deque()
    for s in sources:
        if dist[s] < 0:
            dist[s] = 0
            queue.append(s)
    nbrs = (getattr(ws, "_rev", None) or ws._build_rev()) if reverse else ws.adj
    while queue:
        v = queue.popleft()
        for u in nbrs[v]:
            if dist[u] < 0:
                dist[u] = dist[v] + 1
                queue.append(u)
    return dist


def build_network(
    ws: Workspace,
    starts: Sequence[int],
    targets: Sequence[int],
    horizon: int,
    anti_swap: bool = True,
    constraints: TeamConstraintSet = NO_CONSTRAINTS,
) -> TimeExpandedNetwork:
    """Network whose integral flows of value ``len(starts)`` are collision-free team plans.

    Only ``(v, t)`` copies reachable from some start by ``t`` and able to
    reach some target by ``horizon`` are materialised. Waiting on a target
    costs 0, every other wait or move costs 1.
    """
    if not starts or not targets:
        raise InstanceError("network needs starts and targets")
    if horizon < 0:
        raise InstanceError("horizon must be non-negative")
    for v in list(starts) + list(targets):
        if not 0 <= v < ws.n:
            raise InstanceError(f"vertex {v} not in workspace")
    net = TimeExpandedNetwork(horizon, starts, targets, anti_swap)
    d_from = _multi_bfs(ws, starts, reverse=False)
    d_to = _multi_bfs(ws, targets, reverse=True)
    target_set = set(targets)
    forbidden_v = constraints.vertex
    forbidden_e = constraints.edge
    live: list[list[int]] = []
    for t in range(horizon + 1):
        layer = []
        for v in range(ws.n):
            if 0 <= d_from[v] <= t and 0 <= d_to[v] <= horizon - t and (v, t) not in forbidden_v:
                i = net.add_node(v, t)
                o = net.add_node()
                net.inode[(v, t)] = i
                net.add_arc(i, o)
                layer.append(v)
        live.append(layer)
    for s in starts:
        if (s, 0) in net.inode:
            net.add_arc(net.SOURCE, net.inode[(s, 0)])
    inode = net.inode
    for t in range(horizon):
        for v in live[t]:
            nxt = inode.get((v, t + 1))
            if nxt is not None:
                net.add_arc(inode[(v, t)] + 1, nxt, 1, 0 if v in target_set else 1)
        if anti_swap:
            done = set()
            for u in live[t]:
                for v in ws.adj[u]:
                    key = (min(u, v), max(u, v))
                    if key not in done:
                        done.add(key)
                        _gadget(net, ws, *key, t, forbidden_e)
        else:
            for u in live[t]:
                for v in ws.adj[u]:
                    nxt = inode.get((v, t + 1))
                    if nxt is not None and (u, v, t + 1) not in forbidden_e:
                        net.add_arc(inode[(u, t)] + 1, nxt, 1, 1)
    for g in sorted(target_set):
        node = inode.get((g, horizon))
        if node is not None:
            net.add_arc(node + 1, net.SINK)
    return net


def _gadget(net: TimeExpandedNetwork, ws: Workspace, u: int, v: int, t: int, forbidden_e) -> None:
    inode = net.inode
    dirs = []
    for a, b in ((u, v), (v, u)):
        if ws.has_edge(a, b) and (a, t) in inode and (b, t + 1) in inode and (a, b, t + 1) not in forbidden_e:
            dirs.append((a, b))
    if not dirs:
        return
    if len(dirs) == 1:
        (a, b), = dirs
        net.add_arc(inode[(a, t)] + 1, inode[(b, t + 1)], 1, 1)
        return
    g1, g2 = net.add_node(), net.add_node()
    net.add_arc(inode[(u, t)] + 1, g1)
    net.add_arc(inode[(v, t)] + 1, g1)
    net.add_arc(g1, g2, 1, 1)
    net.add_arc(g2, inode[(v, t + 1)])
    net.add_arc(g2, inode[(u, t + 1)])


def _decompose(net: TimeExpandedNetwork) -> dict[int, Path]:
    """Unit paths keyed by start vertex, following flow-carrying arcs in insertion order."""
    used = {e: net.cap[e + 1] for a in range(net.n_nodes) for e in net.out[a] if e % 2 == 0 and net.cap[e + 1] > 0}
    paths = {}
    for e0 in net.out[net.SOURCE]:
        if e0 % 2 or used.get(e0, 0) <= 0:
            continue
        used[e0] -= 1
        node = net.head[e0]
        path = []
        while node != net.SINK:
            v = net.vertex_of[node]
            if v >= 0:
                path.append(v)
            for e in net.out[node]:
                if e % 2 == 0 and used.get(e, 0) > 0:
                    used[e] -= 1
                    node = net.head[e]
                    break
            else:
                raise AssertionError("flow conservation violated")
        paths[path[0]] = path
    return paths


@dataclass
class FlowResult:
    value: int
    paths: dict[int, Path]
    cost: int = 0
    stats: dict = field(default_factory=dict)


def max_flow(net: TimeExpandedNetwork) -> FlowResult:
    """Dinic's blocking-flow augmentation; returns value and unit paths keyed by start."""
    head, cap, out = net.head, net.cap, net.out
    s, t = net.SOURCE, net.SINK
    value = 0
    phases = 0
    while True:
        level = [-1] * net.n_nodes
        level[s] = 0
        queue = deque([s])
        while queue:
            a = queue.popleft()
            for e in out[a]:
                b = head[e]
                if cap[e] and level[b] < 0:
                    level[b] = level[a] + 1
                    queue.append(b)
        if level[t] < 0:
            break
        phases += 1
        it = [0] * net.n_nodes
        while True:
            # iterative DFS for one augmenting path in the level graph
            stack = [s]
            arcs: list[int] = []
            while stack:
                a = stack[-1]
                if a == t:
                    break
                lst = out[a]
                while it[a] < len(lst):
                    e = lst[it[a]]
                    b = head[e]
                    if cap[e] and level[b] == level[a] + 1:
                        break
                    it[a] += 1
                if it[a] == len(lst):
                    stack.pop()
                    if arcs:
                        arcs.pop()
                        it[stack[-1]] += 1
                    level[a] = -1
                    continue
                e = lst[it[a]]
                arcs.append(e)
                stack.append(head[e])
            if not stack:
                break
            for e in arcs:
                cap[e] -= 1
                cap[e ^ 1] += 1
            value += 1
    return FlowResult(value, _decompose(net) if value else {}, stats={"phases": phases})


def min_cost_flow(net: TimeExpandedNetwork, demand: int | None = None) -> FlowResult:
    """Successive shortest paths (Dijkstra with potentials), one unit per augmentation.

    Stops at ``demand`` units or when no augmenting path remains. Ties between
    equal-cost paths go to lower node ids, so results are deterministic.
    """
    head, cap, cost, out = net.head, net.cap, net.cost, net.out
    s, t = net.SOURCE, net.SINK
    n = net.n_nodes
    demand = len(net.starts) if demand is None else demand
    pot = [0] * n
    value = total = 0
    while value < demand:
        dist = [INF] * n
        prev = [-1] * n
        dist[s] = 0
        heap = [(0, s)]
        while heap:
            d, a = heapq.heappop(heap)
            if d > dist[a]:
                continue
            pa = pot[a]
            for e in out[a]:
                if cap[e]:
                    b = head[e]
                    nd = d + cost[e] + pa - pot[b]
                    if nd < dist[b]:
                        dist[b] = nd
                        prev[b] = e
                        heapq.heappush(heap, (nd, b))
        if dist[t] == INF:
            break
        for a in range(n):
            if dist[a] < INF:
                pot[a] += dist[a]
        b = t
        while b != s:
            e = prev[b]
            cap[e] -= 1
            cap[e ^ 1] += 1
            total += cost[e]
            b = head[e ^ 1]
        value += 1
    if value < demand:
        return FlowResult(value, {}, total)
    return FlowResult(value, _decompose(net), total)


def bottleneck_bound(ws: Workspace, starts: Sequence[int], targets: Sequence[int]) -> int | None:
    """Smallest d such that starts and targets admit a perfect matching using only distances <= d."""
    dist = np.array([[ws.distances_to(g)[s] for g in targets] for s in starts])
    if (dist < 0).all(axis=1).any():
        return None
    for d in sorted(set(dist[dist >= 0].tolist())):
        ok = (dist >= 0) & (dist <= d)
        match = maximum_bipartite_matching(csr_matrix(ok.astype(np.int8)), perm_type="column")
        if (match >= 0).all():
            return int(d)
    return None


def _team_plan(ws, starts, targets, horizon, anti_swap, constraints, use_cost) -> list[Path] | None:
    net = build_network(ws, starts, targets, horizon, anti_swap, constraints)
    res = min_cost_flow(net) if use_cost else max_flow(net)
    if res.value < len(starts):
        return None
    return [res.paths[s] for s in starts]


def anonymous_solve(inst: Instance, limits: Limits | None = None, stats: dict | None = None) -> Solution | None:
    """Optimal makespan for a single team by scanning horizons upward from the bottleneck bound."""
    groups = inst.groups
    if inst.flavor not in (Flavor.TAPF, Flavor.KPERR) or len(groups) != 1:
        raise InstanceError("anonymous solving needs exactly one team")
    anti_swap = inst.flavor is Flavor.TAPF
    limits = limits or Limits()
    stats = {} if stats is None else stats
    cap = limits.horizon_for(inst)
    starts = [inst.starts[m] for m in groups[0].members]
    lb = bottleneck_bound(inst.workspace, starts, groups[0].targets)
    stats["lower_bound"] = lb
    if lb is None:
        return None
    for horizon in range(lb, cap + 1):
        stats["horizons_tried"] = horizon - lb + 1
        net = build_network(inst.workspace, starts, groups[0].targets, horizon, anti_swap)
        res = max_flow(net)
        if res.value == len(starts):
            paths = [None] * inst.n
            for m, s in zip(groups[0].members, starts):
                paths[m] = res.paths[s]
            stats["horizon"] = horizon
            exchanges = [] if anti_swap else swap_exchanges(paths)
            return Solution(paths, exchanges=exchanges, stats=stats)
    return None


@dataclass
class _CbmNode:
    constraints: tuple[TeamConstraintSet, ...]
    team_paths: list[list[Path]]
    paths: list[Path]
    pairs: int
    conflict: object
    nid: int


def _table(cons: TeamConstraintSet) -> _ConstraintTable:
    table = _ConstraintTable(())
    table.vertex = set(cons.vertex)
    table.edge = set(cons.edge)
    table.last = max([t for _, t in cons.vertex] + [t for *_, t in cons.edge], default=0)
    return table


def cbm_solve(
    inst: Instance, limits: Limits | None = None, anti_swap: bool | None = None, stats: dict | None = None
) -> Solution | None:
    """Conflict-Based Min-Cost Flow over teams (or package types).

    For a global horizon T, a conflict tree over teams is searched: each
    team is planned by min-cost flow on its own network under its
    constraints and every inter-team conflict is split into two children,
    one constraining each team. If the tree at T holds no conflict-free
    node, T grows by one. T starts at the largest single-team optimum, so
    the first conflict-free node has minimum makespan. Teams that keep
    conflicting are merged as in CBS and planned by joint search, which
    lets the tree run dry on instances with no solution.
    """
    if inst.flavor not in (Flavor.TAPF, Flavor.KPERR, Flavor.PERR):
        raise InstanceError("CBM needs teams or package types")
    anti_swap = (inst.flavor is Flavor.TAPF) if anti_swap is None else anti_swap
    allow_swap = not anti_swap
    limits = limits or Limits()
    stats = {} if stats is None else stats
    stats.update(hl_expanded=0, hl_generated=0, flow_calls=0, merges=0)
    ws = inst.workspace
    teams = inst.groups
    started = time.perf_counter()
    cap = limits.horizon_for(inst)
    team_starts = [[inst.starts[m] for m in g.members] for g in teams]
    lb = 0
    for g, starts in zip(teams, team_starts):
        single = bottleneck_bound(ws, starts, g.targets)
        if single is None:
            return None
        for horizon in range(single, cap + 1):
            if max_flow(build_network(ws, starts, g.targets, horizon, anti_swap)).value == len(starts):
                lb = max(lb, horizon)
                break
        else:
            return None
    stats["lower_bound"] = lb

    def plan(grp: tuple[int, ...], horizon: int, cons) -> list[list[Path]] | None:
        """Paths per team of ``grp``; a single team uses flow, a merged group joint search."""
        if len(grp) == 1:
            stats["flow_calls"] += 1
            tp = _team_plan(ws, team_starts[grp[0]], teams[grp[0]].targets, horizon, anti_swap, cons[grp[0]], True)
            return None if tp is None else [tp]
        starts, goals, tables = [], [], []
        for ti in grp:
            starts += team_starts[ti]
            goals += [teams[ti].targets] * len(team_starts[ti])
            tables += [_table(cons[ti])] * len(team_starts[ti])
        joint, _ = _joint_plan(ws, starts, goals, tables, horizon, allow_swap)
        if joint is None:
            return None
        out, i = [], 0
        for ti in grp:
            out.append(joint[i:i + len(team_starts[ti])])
            i += len(team_starts[ti])
        return out

    def make(cons, team_paths, nid):
        paths: list[Path] = [None] * inst.n
        for g, tp in zip(teams, team_paths):
            for m, p in zip(g.members, tp):
                paths[m] = p
        conflicts = list(iter_conflicts(paths, allow_swap))
        return _CbmNode(cons, team_paths, paths, len({c.movers for c in conflicts}), conflicts[0] if conflicts else None, nid)

    def mergeable(ga, gb) -> bool:
        size = sum(len(team_starts[ti]) for ti in ga + gb)
        return limits.merge_after is not None and ws.n ** size <= limits.max_joint_states

    def search(groups, horizon):
        """Solution, None when the tree at ``horizon`` runs dry, or a pair of groups to merge."""
        group_of_team = {ti: g for g in groups for ti in g}
        empty = tuple(NO_CONSTRAINTS for _ in teams)
        team_paths: list = [None] * len(teams)
        for g in groups:
            planned = plan(g, horizon, empty)
            if planned is None:
                return None
            for ti, tp in zip(g, planned):
                team_paths[ti] = tp
        tick = count()
        root = make(empty, team_paths, next(tick))
        heap = [(root.pairs, 0, root.nid, root)]
        seen = {root.constraints}
        clashes: dict[tuple, int] = defaultdict(int)
        while heap:
            *_, node = heapq.heappop(heap)
            if node.conflict is None:
                exchanges = swap_exchanges(node.paths) if allow_swap else []
                return Solution(node.paths, exchanges=exchanges, stats=stats)
            stats["hl_expanded"] += 1
            if stats["hl_expanded"] > limits.max_nodes or (
                limits.max_seconds is not None and time.perf_counter() - started > limits.max_seconds
            ):
                raise BudgetExhausted(stats=stats)
            c = node.conflict
            a, b = c.movers
            ga, gb = sorted((group_of_team[group_of[a]], group_of_team[group_of[b]]))
            if ga == gb:
                raise AssertionError("conflict inside a planned group")
            clashes[(ga, gb)] += 1
            if clashes[(ga, gb)] > (limits.merge_after or 0) and mergeable(ga, gb):
                return ga, gb
            for mover, side in ((a, 0), (b, 1)):
                ti = group_of[mover]
                old = node.constraints[ti]
                if c.kind == "vertex":
                    new = old.add_vertex(c.location, c.time)
                else:
                    u, v = c.location if side == 0 else c.location[::-1]
                    new = old.add_edge(u, v, c.time)
                cons = node.constraints[:ti] + (new,) + node.constraints[ti + 1:]
                if cons in seen:
                    continue
                seen.add(cons)
                g = group_of_team[ti]
                planned = plan(g, horizon, cons)
                if planned is None:
                    continue
                team_paths = list(node.team_paths)
                for tj, tp in zip(g, planned):
                    team_paths[tj] = tp
                child = make(cons, team_paths, next(tick))
                stats["hl_generated"] += 1
                heapq.heappush(heap, (child.pairs, sum(map(len, cons)), child.nid, child))
        return None

    group_of = inst.group_of()
    groups = [(ti,) for ti in range(len(teams))]
    for horizon in range(lb, cap + 1):
        stats["horizon"] = horizon
        while True:
            out = search(groups, horizon)
            if not isinstance(out, tuple):
                break
            ga, gb = out
            stats["merges"] += 1
            groups = sorted([g for g in groups if g not in (ga, gb)] + [tuple(sorted(ga + gb))])
        if out is not None:
            return out
    return None
