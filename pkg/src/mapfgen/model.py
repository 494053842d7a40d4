"""Workspace, instance and solution types shared by every solver."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Sequence

Path = list[int]


class InstanceError(ValueError):
    """An instance violates one of its structural invariants."""


class BudgetExhausted(RuntimeError):
    """A solver ran out of its node or time budget before deciding."""

    def __init__(self, message: str = "budget exhausted", stats: dict | None = None):
        super().__init__(message)
        self.stats = stats or {}


class Workspace:
    """Directed graph with unit-time edges, usually a 4-neighbour grid.

    Vertices are the integers ``0..n-1``. For grids they number the free
    cells in row-major order and ``coords[v]`` is the ``(x, y)`` cell.
    """

    def __init__(
        self,
        n: int,
        edges: Iterable[tuple[int, int]],
        coords: Sequence[tuple[int, int]] | None = None,
        width: int | None = None,
        height: int | None = None,
        blocked: Iterable[tuple[int, int]] = (),
        edge_length: dict[tuple[int, int], float] | None = None,
    ):
        self.n = n
        self.edges = frozenset(edges)
        for u, v in self.edges:
            if not (0 <= u < n and 0 <= v < n):
                raise InstanceError(f"edge ({u}, {v}) has an endpoint outside the vertex set")
            if u == v:
                raise InstanceError(f"self-loop at vertex {u}")
        self.coords = tuple(coords) if coords is not None else None
        self.width = width
        self.height = height
        self.blocked = frozenset(blocked)
        self.edge_length = dict(edge_length or {})
        for e, length in self.edge_length.items():
            if e not in self.edges:
                raise InstanceError(f"length given for missing edge {e}")
            if not length > 0:
                raise InstanceError(f"edge {e} has non-positive length {length}")
        adj: list[list[int]] = [[] for _ in range(n)]
        for u, v in self.edges:
            adj[u].append(v)
        self.adj = tuple(tuple(sorted(a)) for a in adj)
        self._index = {c: i for i, c in enumerate(self.coords)} if self.coords else {}
        self._dist_cache: dict[int, tuple[int, ...]] = {}
        if width is not None and height is not None:
            self._check_grid()

    @classmethod
    def grid(cls, width: int, height: int, blocked: Iterable[tuple[int, int]] = ()) -> Workspace:
        blocked = frozenset(blocked)
        coords = [(x, y) for y in range(height) for x in range(width) if (x, y) not in blocked]
        index = {c: i for i, c in enumerate(coords)}
        edges = []
        for (x, y), i in index.items():
            for dx, dy in ((1, 0), (-1, 0), (0, 1), (0, -1)):
                j = index.get((x + dx, y + dy))
                if j is not None:
                    edges.append((i, j))
        return cls(len(coords), edges, coords, width, height, blocked)

    def _check_grid(self) -> None:
        if self.coords is None:
            raise InstanceError("grid metadata requires coordinates")
        index = self._index
        for (x, y), i in index.items():
            if (x, y) in self.blocked or not (0 <= x < self.width and 0 <= y < self.height):
                raise InstanceError(f"vertex {i} lies on a blocked or out-of-range cell")
        want = set()
        for (x, y), i in index.items():
            for dx, dy in ((1, 0), (-1, 0), (0, 1), (0, -1)):
                j = index.get((x + dx, y + dy))
                if j is not None:
                    want.add((i, j))
        if want != self.edges:
            raise InstanceError("edge set differs from the 4-neighbour adjacency of free cells")

    @property
    def is_grid(self) -> bool:
        return self.width is not None

    def vertex(self, x: int, y: int) -> int:
        try:
            return self._index[(x, y)]
        except KeyError:
            raise InstanceError(f"cell ({x}, {y}) is not a free cell of the workspace") from None

    def length(self, u: int, v: int) -> float:
        return self.edge_length.get((u, v), 1.0)

    def has_edge(self, u: int, v: int) -> bool:
        return (u, v) in self.edges

    def distances_to(self, goal: int) -> tuple[int, ...]:
        """Unit-cost distance from every vertex to ``goal`` (-1 if unreachable)."""
        cached = self._dist_cache.get(goal)
        if cached is not None:
            return cached
        rev: list[list[int]] = getattr(self, "_rev", None) or self._build_rev()
        dist = [-1] * self.n
        dist[goal] = 0
        queue = deque([goal])
        while queue:
            v = queue.popleft()
            for u in rev[v]:
                if dist[u] < 0:
                    dist[u] = dist[v] + 1
                    queue.append(u)
        out = tuple(dist)
        self._dist_cache[goal] = out
        return out

    def _build_rev(self) -> list[list[int]]:
        rev: list[list[int]] = [[] for _ in range(self.n)]
        for u, v in sorted(self.edges):
            rev[v].append(u)
        self._rev = rev
        return rev

    def shortest_path(self, start: int, goal: int) -> Path | None:
        """Lexicographically smallest shortest path, or None."""
        dist = self.distances_to(goal)
        if dist[start] < 0:
            return None
        path = [start]
        v = start
        while v != goal:
            v = next(u for u in self.adj[v] if dist[u] == dist[v] - 1)
            path.append(v)
        return path

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Workspace):
            return NotImplemented
        return (
            self.n == other.n
            and self.edges == other.edges
            and self.coords == other.coords
            and self.width == other.width
            and self.height == other.height
            and self.blocked == other.blocked
            and self.edge_length == other.edge_length
        )

    def __hash__(self) -> int:
        return hash((self.n, self.edges, self.coords))

    def __repr__(self) -> str:
        if self.is_grid:
            return f"Workspace(grid {self.width}x{self.height}, {self.n} vertices)"
        return f"Workspace({self.n} vertices, {len(self.edges)} edges)"


class Flavor(str, Enum):
    MAPF = "MAPF"
    TAPF = "TAPF"
    PERR = "PERR"
    KPERR = "KPERR"


@dataclass(frozen=True)
class MotionSemantics:
    """``allow_swap`` makes opposite traversals of an edge legal (package exchange)."""

    allow_swap: bool = False


STANDARD = MotionSemantics(False)
EXCHANGE = MotionSemantics(True)


@dataclass(frozen=True)
class Group:
    """Movers that share a target set: a team, a package type, or a single mover."""

    label: str
    members: tuple[int, ...]
    targets: tuple[int, ...]


@dataclass(frozen=True)
class Instance:
    """One problem over a workspace.

    ``targets`` holds a per-mover target for MAPF and the listed per-package
    target for PERR/KPERR; ``teams`` is used for TAPF and ``types`` labels
    packages for PERR/KPERR. Movers (and for PERR flavours the packages they
    start with) are indexed by position.
    """

    workspace: Workspace
    flavor: Flavor
    mover_ids: tuple[str, ...]
    starts: tuple[int, ...]
    targets: tuple[int, ...] | None = None
    teams: tuple[Group, ...] = ()
    types: tuple[str, ...] | None = None

    def __post_init__(self):
        ws = self.workspace
        n = len(self.starts)
        if len(self.mover_ids) != n:
            raise InstanceError("mover ids and starts differ in length")
        if len(set(self.mover_ids)) != n:
            raise InstanceError("duplicate mover id")
        for v in self.starts:
            if not 0 <= v < ws.n:
                raise InstanceError(f"start vertex {v} not in workspace")
        if len(set(self.starts)) != n:
            raise InstanceError("duplicate start vertex")
        if self.flavor is Flavor.TAPF:
            seen: list[int] = []
            for team in self.teams:
                if len(team.members) != len(team.targets):
                    raise InstanceError(
                        f"team cardinality mismatch: team {team.label} has "
                        f"{len(team.members)} members and {len(team.targets)} targets"
                    )
                seen.extend(team.members)
            if sorted(seen) != list(range(n)):
                raise InstanceError("teams must partition the movers")
        else:
            if self.targets is None or len(self.targets) != n:
                raise InstanceError("every mover needs a target")
            if self.flavor in (Flavor.PERR, Flavor.KPERR):
                if self.types is None or len(self.types) != n:
                    raise InstanceError("every package needs a type")
        for g in self.groups:
            for v in g.targets:
                if not 0 <= v < ws.n:
                    raise InstanceError(f"target vertex {v} not in workspace")
            if len(set(g.targets)) != len(g.targets):
                raise InstanceError(f"duplicate target within group {g.label}")
        if self.flavor is Flavor.MAPF and len(set(self.targets)) != n:
            raise InstanceError("duplicate target vertex")
        if self.flavor is Flavor.PERR and len(set(self.targets)) != n:
            raise InstanceError("duplicate package target")

    @property
    def n(self) -> int:
        return len(self.starts)

    @property
    def semantics(self) -> MotionSemantics:
        return EXCHANGE if self.flavor in (Flavor.PERR, Flavor.KPERR) else STANDARD

    @property
    def groups(self) -> tuple[Group, ...]:
        """Goal structure: at the end each group's members occupy its targets."""
        if self.flavor is Flavor.TAPF:
            return self.teams
        if self.flavor is Flavor.KPERR:
            order: dict[str, list[int]] = {}
            for i, k in enumerate(self.types):
                order.setdefault(k, []).append(i)
            return tuple(
                Group(k, tuple(m), tuple(self.targets[i] for i in m)) for k, m in order.items()
            )
        return tuple(
            Group(self.mover_ids[i], (i,), (self.targets[i],)) for i in range(self.n)
        )

    def group_of(self) -> list[int]:
        out = [0] * self.n
        for gi, g in enumerate(self.groups):
            for m in g.members:
                out[m] = gi
        return out

    def fixed_targets(self) -> tuple[int, ...]:
        if self.targets is None:
            raise InstanceError("TAPF instances have no fixed per-mover targets")
        return self.targets

    def with_assignment(self, targets: Sequence[int], flavor: Flavor | None = None) -> Instance:
        """Same movers with fixed per-mover targets (MAPF, or ``flavor`` if given)."""
        flavor = flavor or Flavor.MAPF
        types = None
        if flavor in (Flavor.PERR, Flavor.KPERR):
            types = self.types or tuple(self.mover_ids)
            if flavor is Flavor.PERR:
                types = tuple(self.mover_ids)
        return Instance(self.workspace, flavor, self.mover_ids, self.starts, tuple(targets), types=types)

    def as_flavor(self, flavor: Flavor) -> Instance:
        """Reinterpret fixed-target movers as MAPF agents or PERR packages."""
        return self.with_assignment(self.fixed_targets(), flavor)


@dataclass
class Solution:
    """Timestep-indexed paths padded to a common horizon.

    For PERR flavours ``paths`` are package trajectories (package ``i``
    starts on mover ``i``) and ``exchanges`` lists ``(t, a, b)``: carriers
    ``a`` and ``b`` hand their packages over between ``t`` and ``t + 1``.
    """

    paths: list[Path]
    assignment: list[int] | None = None
    exchanges: list[tuple[int, int, int]] = field(default_factory=list)
    stats: dict = field(default_factory=dict)

    def __post_init__(self):
        horizon = max((len(p) for p in self.paths), default=1)
        self.paths = [list(p) + [p[-1]] * (horizon - len(p)) for p in self.paths]
        if self.assignment is None:
            self.assignment = [p[-1] for p in self.paths]

    @property
    def horizon(self) -> int:
        return len(self.paths[0]) - 1 if self.paths else 0

    def makespan(self) -> int:
        return metrics(self)["makespan"]


def last_motion(path: Sequence[int]) -> int:
    for t in range(len(path) - 1, 0, -1):
        if path[t] != path[t - 1]:
            return t
    return 0


def metrics(sol: Solution) -> dict[str, int]:
    """Makespan (time of the last vertex change) and flowtime (sum of per-mover last motions)."""
    times = [last_motion(p) for p in sol.paths]
    return {"makespan": max(times, default=0), "flowtime": sum(times)}


def trim(sol: Solution) -> Solution:
    """Cut the common horizon down to the makespan."""
    ms = metrics(sol)["makespan"]
    return Solution(
        [p[: ms + 1] for p in sol.paths],
        list(sol.assignment),
        [e for e in sol.exchanges if e[0] < ms],
        dict(sol.stats),
    )


def swap_exchanges(paths: Sequence[Sequence[int]]) -> list[tuple[int, int, int]]:
    """Exchange records implied by package swaps, tracking which mover carries what."""
    n = len(paths)
    carrier = list(range(n))
    out = []
    horizon = len(paths[0]) if paths else 0
    for t in range(horizon - 1):
        at = {paths[i][t]: i for i in range(n)}
        for p in range(n):
            u, v = paths[p][t], paths[p][t + 1]
            if u == v:
                continue
            q = at.get(v)
            if q is not None and q > p and paths[q][t + 1] == u:
                a, b = sorted((carrier[p], carrier[q]))
                out.append((t, a, b))
                carrier[p], carrier[q] = carrier[q], carrier[p]
    return out


def mover_paths(sol: Solution) -> list[Path]:
    """Physical mover trajectories for a package-view solution.

    Movers follow the package they carry; during an exchange both carriers
    stay put and the packages cross.
    """
    n = len(sol.paths)
    horizon = sol.horizon
    carried = list(range(n))  # mover -> package
    by_time: dict[int, list[tuple[int, int]]] = {}
    for t, a, b in sol.exchanges:
        by_time.setdefault(t, []).append((a, b))
    out = [[sol.paths[m][0]] for m in range(n)]
    for t in range(horizon):
        for a, b in by_time.get(t, ()):
            carried[a], carried[b] = carried[b], carried[a]
        for m in range(n):
            out[m].append(sol.paths[carried[m]][t + 1])
    return out
