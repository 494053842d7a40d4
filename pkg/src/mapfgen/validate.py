"""Conflict detection and solution validation."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Sequence

from .model import Instance, MotionSemantics, Solution


@dataclass(frozen=True)
class Conflict:
    """``location`` is a vertex, or for swaps the edge ``(u, v)`` walked by ``movers[0]``.

    ``time`` is the timestep at which the movers collide: for a swap the
    arrival timestep ``t + 1`` of the traversal that started at ``t``.
    """

    kind: str
    movers: tuple[int, int]
    time: int
    location: int | tuple[int, int]


def iter_conflicts(
    paths: Sequence[Sequence[int]], allow_swap: bool = False, groups: Sequence[int] | None = None
) -> Iterator[Conflict]:
    """Conflicts by ascending time; vertex conflicts before swaps at the same time.

    With ``groups`` given, conflicts between movers of the same group are skipped.
    """
    n = len(paths)
    horizon = max((len(p) for p in paths), default=0)

    def at(i: int, t: int) -> int:
        p = paths[i]
        return p[t] if t < len(p) else p[-1]

    for t in range(horizon):
        seen: dict[int, int] = {}
        for i in range(n):
            v = at(i, t)
            j = seen.get(v)
            if j is None:
                seen[v] = i
            elif groups is None or groups[i] != groups[j]:
                yield Conflict("vertex", (j, i), t, v)
        if allow_swap or t == 0:
            continue
        prev: dict[tuple[int, int], int] = {}
        for i in range(n):
            u, v = at(i, t - 1), at(i, t)
            if u != v:
                prev[(u, v)] = i
        for (u, v), i in sorted(prev.items(), key=lambda kv: kv[1]):
            j = prev.get((v, u))
            if j is not None and i < j and (groups is None or groups[i] != groups[j]):
                yield Conflict("swap", (i, j), t, (u, v))


def first_conflict(paths, allow_swap=False, groups=None) -> Conflict | None:
    return next(iter_conflicts(paths, allow_swap, groups), None)


def count_conflicting_pairs(paths, allow_swap=False, groups=None) -> int:
    return len({c.movers for c in iter_conflicts(paths, allow_swap, groups)})


@dataclass
class ValidationReport:
    conflicts: list[Conflict] = field(default_factory=list)
    continuity: list[tuple[int, int, int, int]] = field(default_factory=list)
    unmet_targets: list[str] = field(default_factory=list)
    exchange_errors: list[str] = field(default_factory=list)
    other: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not (self.conflicts or self.continuity or self.unmet_targets or self.exchange_errors or self.other)

    def __bool__(self) -> bool:
        # truthy when there are findings, like a non-empty list
        return not self.ok

    def lines(self) -> list[str]:
        out = [f"{c.kind} conflict movers={c.movers} t={c.time} at={c.location}" for c in self.conflicts]
        out += [f"discontinuity mover={m} t={t} {u}->{v}" for m, t, u, v in self.continuity]
        return out + self.unmet_targets + self.exchange_errors + self.other


def validate(inst: Instance, sol: Solution, semantics: MotionSemantics | None = None) -> ValidationReport:
    """Every finding of ``sol`` against ``inst``; an empty report means valid.

    Under exchange semantics an opposite traversal is legal only when the
    solution records the matching exchange of carriers, and package
    carriers are tracked through those exchanges.
    """
    semantics = semantics or inst.semantics
    rep = ValidationReport()
    ws = inst.workspace
    paths = sol.paths
    if len(paths) != inst.n:
        rep.other.append(f"solution has {len(paths)} paths for {inst.n} movers")
        return rep
    horizon = {len(p) for p in paths}
    if len(horizon) != 1:
        rep.other.append("paths do not share a common horizon")
        return rep
    for i, p in enumerate(paths):
        if p[0] != inst.starts[i]:
            rep.other.append(f"mover {inst.mover_ids[i]} does not start at its start vertex")
        for t in range(len(p) - 1):
            u, v = p[t], p[t + 1]
            if u != v and not ws.has_edge(u, v):
                rep.continuity.append((i, t, u, v))
    rep.conflicts = list(iter_conflicts(paths, allow_swap=semantics.allow_swap))

    swaps = _swaps(paths)
    if semantics.allow_swap:
        carrier = list(range(inst.n))
        recorded = {}
        for t, a, b in sol.exchanges:
            recorded.setdefault((t, min(a, b), max(a, b)), 0)
            recorded[(t, min(a, b), max(a, b))] += 1
        for t, p, q in swaps:
            key = (t, min(carrier[p], carrier[q]), max(carrier[p], carrier[q]))
            if recorded.get(key):
                recorded[key] -= 1
                carrier[p], carrier[q] = carrier[q], carrier[p]
            else:
                rep.exchange_errors.append(f"unrecorded exchange of packages {p},{q} at t={t}")
        for key, left in sorted(recorded.items()):
            if left:
                rep.exchange_errors.append(f"exchange {key} matches no package swap")
    elif sol.exchanges:
        rep.exchange_errors.append("exchanges recorded under standard semantics")

    final = [p[-1] for p in paths]
    for g in inst.groups:
        got = sorted(final[m] for m in g.members)
        if got != sorted(g.targets):
            rep.unmet_targets.append(f"group {g.label} ends on {got}, targets {sorted(g.targets)}")
    if sol.assignment is not None and list(sol.assignment) != final:
        rep.other.append("assignment disagrees with final positions")
    return rep


def _swaps(paths: Sequence[Sequence[int]]) -> list[tuple[int, int, int]]:
    """(t, p, q) for every opposite traversal between t and t+1, p < q."""
    out = []
    n = len(paths)
    for t in range(len(paths[0]) - 1 if paths else 0):
        move = {}
        for i in range(n):
            u, v = paths[i][t], paths[i][t + 1]
            if u != v:
                move[(u, v)] = i
        for (u, v), i in move.items():
            j = move.get((v, u))
            if j is not None and i < j:
                out.append((t, i, j))
    out.sort()
    return out
