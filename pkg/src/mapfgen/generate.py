"""Seeded random instance generation."""

from __future__ import annotations

import random
from collections import deque
from typing import Sequence

from .model import Flavor, Group, Instance, InstanceError, Workspace


def largest_component(ws: Workspace) -> list[int]:
    seen = [False] * ws.n
    best: list[int] = []
    for s in range(ws.n):
        if seen[s]:
            continue
        comp = [s]
        seen[s] = True
        queue = deque([s])
        while queue:
            v = queue.popleft()
            for u in ws.adj[v]:
                if not seen[u]:
                    seen[u] = True
                    comp.append(u)
                    queue.append(u)
        if len(comp) > len(best):
            best = comp
    return sorted(best)


def random_grid(width: int, height: int, blocked: float, rng: random.Random) -> Workspace:
    if not 0 <= blocked < 1:
        raise InstanceError("blocked fraction must lie in [0, 1)")
    cells = [(x, y) for y in range(height) for x in range(width)]
    k = int(round(blocked * len(cells)))
    return Workspace.grid(width, height, rng.sample(cells, k))


def generate_instance(
    width: int,
    height: int,
    blocked: float = 0.0,
    flavor: Flavor | str = Flavor.MAPF,
    sizes: Sequence[int] | int = 2,
    seed: int = 0,
    workspace: Workspace | None = None,
) -> Instance:
    """Random instance; every start and target lies in the largest free component.

    ``sizes`` is the mover count for MAPF/PERR, or per-team (TAPF) or
    per-type (KPERR) counts.
    """
    flavor = Flavor(flavor)
    rng = random.Random(seed)
    ws = workspace if workspace is not None else random_grid(width, height, blocked, rng)
    sizes = [sizes] if isinstance(sizes, int) else list(sizes)
    if flavor in (Flavor.MAPF, Flavor.PERR) and len(sizes) != 1:
        raise InstanceError(f"{flavor.value} takes a single mover count")
    n = sum(sizes)
    if n < 1:
        raise InstanceError("need at least one mover")
    comp = largest_component(ws)
    if n > len(comp):
        raise InstanceError(f"{n} movers do not fit {len(comp)} connected free cells")
    starts = tuple(rng.sample(comp, n))
    targets = tuple(rng.sample(comp, n))
    if flavor is Flavor.MAPF:
        ids = tuple(f"a{i}" for i in range(n))
        return Instance(ws, flavor, ids, starts, targets)
    if flavor is Flavor.PERR:
        ids = tuple(f"p{i}" for i in range(n))
        return Instance(ws, flavor, ids, starts, targets, types=ids)
    if flavor is Flavor.TAPF:
        teams, ids, k = [], [], 0
        for ti, size in enumerate(sizes):
            members = tuple(range(k, k + size))
            ids += [f"t{ti}.{j}" for j in range(size)]
            teams.append(Group(f"t{ti}", members, targets[k:k + size]))
            k += size
        return Instance(ws, flavor, tuple(ids), starts, teams=tuple(teams))
    types = tuple(f"k{ti}" for ti, size in enumerate(sizes) for _ in range(size))
    ids = tuple(f"p{i}" for i in range(n))
    kind = Flavor.PERR if len(set(types)) == n else Flavor.KPERR
    return Instance(ws, kind, ids, starts, targets, types=types)


def random_suite(
    count: int,
    seed: int,
    max_width: int = 6,
    max_height: int = 6,
    max_movers: int = 3,
    max_blocked: float = 0.2,
    flavor: Flavor | str = Flavor.MAPF,
    min_side: int = 2,
) -> list[Instance]:
    """Deterministic list of small random instances with varying sizes."""
    rng = random.Random(seed)
    out = []
    while len(out) < count:
        w = rng.randint(min_side, max_width)
        h = rng.randint(min_side, max_height)
        blocked = rng.uniform(0, max_blocked)
        n = rng.randint(1, max_movers)
        try:
            out.append(generate_instance(w, h, blocked, flavor, n, rng.randrange(2**31)))
        except InstanceError:
            continue
    return out
