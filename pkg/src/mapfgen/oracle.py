"""Brute-force minimum-makespan oracle: breadth-first search over joint configurations.

Independent of every solver in the package; used to freeze expected values
in tests. Limited to small instances.
"""

from __future__ import annotations

from itertools import permutations, product

import numpy as np

from .model import Instance, MotionSemantics, Solution, swap_exchanges

MAX_MOVERS = 4
MAX_VERTICES = 36


class OracleScaleError(ValueError):
    pass


def _goal_codes(inst: Instance, base: int) -> np.ndarray:
    """Codes of every joint configuration that satisfies all groups."""
    groups = inst.groups
    per_group = [list(permutations(g.targets)) for g in groups]
    codes = []
    for choice in product(*per_group):
        pos = [0] * inst.n
        for g, perm in zip(groups, choice):
            for m, v in zip(g.members, perm):
                pos[m] = v
        codes.append(sum(v * base**i for i, v in enumerate(pos)))
    return np.array(sorted(set(codes)), dtype=np.int64)


def joint_state_oracle(
    inst: Instance, horizon_cap: int | None = None, semantics: MotionSemantics | None = None
) -> Solution | None:
    """Minimum-makespan solution by exhaustive BFS, or None when none exists within ``horizon_cap``.

    Vertex conflicts are always illegal; opposite traversals of one edge are
    illegal unless ``semantics.allow_swap``. Groups (teams, package types)
    are satisfied by any placement of their members on their targets.
    """
    semantics = semantics or inst.semantics
    n, V = inst.n, inst.workspace.n
    if n > MAX_MOVERS or V > MAX_VERTICES:
        raise OracleScaleError(f"oracle scale exceeded ({n} movers, {V} vertices)")
    if horizon_cap is None:
        horizon_cap = V + n
    ws = inst.workspace
    deg = max((len(a) for a in ws.adj), default=0) + 1
    nbr = np.full((V, deg), -1, dtype=np.int64)
    for v in range(V):
        opts = (v,) + ws.adj[v]
        nbr[v, : len(opts)] = opts
    powers = np.array([V**i for i in range(n)], dtype=np.int64)
    size = V**n
    goal = np.zeros(size, dtype=bool)
    goal[_goal_codes(inst, V)] = True
    parent = np.full(size, -1, dtype=np.int64)
    visited = np.zeros(size, dtype=bool)

    start = int(np.dot(np.array(inst.starts, dtype=np.int64), powers))
    visited[start] = True
    found = start if goal[start] else None
    frontier = np.array([start], dtype=np.int64)
    depth = 0
    while found is None and frontier.size and depth < horizon_cap:
        depth += 1
        nxt = []
        for chunk in np.array_split(frontier, max(1, frontier.size // 4096)):
            old = (chunk[:, None] // powers[None, :]) % V  # (F, n)
            new = np.empty((chunk.size, 0), dtype=np.int64)
            src = np.arange(chunk.size)
            for i in range(n):
                cand = nbr[old[src, i]]  # (F', deg)
                k = cand.shape[1]
                src = np.repeat(src, k)
                new = np.repeat(new, k, axis=0)
                col = cand.reshape(-1)
                keep = col >= 0
                for j in range(i):
                    keep &= new[:, j] != col
                    if not semantics.allow_swap:
                        keep &= ~((new[:, j] == old[src, i]) & (col == old[src, j]))
                src, new = src[keep], np.column_stack([new[keep], col[keep]])
            codes = new @ powers
            parents = chunk[src]
            fresh = ~visited[codes]
            codes, parents = codes[fresh], parents[fresh]
            codes, first = np.unique(codes, return_index=True)
            visited[codes] = True
            parent[codes] = parents[first]
            nxt.append(codes)
        frontier = np.concatenate(nxt) if nxt else np.empty(0, dtype=np.int64)
        hits = frontier[goal[frontier]]
        if hits.size:
            found = int(hits.min())
    if found is None:
        return None
    chain = [found]
    while chain[-1] != start:
        chain.append(int(parent[chain[-1]]))
    chain.reverse()
    paths = [[(c // V**i) % V for c in chain] for i in range(n)]
    exchanges = swap_exchanges(paths) if semantics.allow_swap else []
    return Solution(paths, exchanges=exchanges, stats={"oracle_depth": depth})


def oracle_makespan(inst: Instance, horizon_cap: int | None = None, semantics=None) -> int | None:
    sol = joint_state_oracle(inst, horizon_cap, semantics)
    return None if sol is None else sol.makespan()


def assignment_enumeration_makespan(
    inst: Instance, horizon_cap: int | None = None, semantics: MotionSemantics | None = None
) -> int | None:
    """Minimum over every within-group target assignment of the fixed-assignment oracle."""
    semantics = semantics or inst.semantics
    groups = inst.groups
    best = None
    for choice in product(*[list(permutations(g.targets)) for g in groups]):
        targets = [0] * inst.n
        for g, perm in zip(groups, choice):
            for m, v in zip(g.members, perm):
                targets[m] = v
        ms = oracle_makespan(inst.with_assignment(targets), horizon_cap, semantics)
        if ms is not None and (best is None or ms < best):
            best = ms
    return best
