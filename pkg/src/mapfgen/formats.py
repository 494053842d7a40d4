"""Text formats: grid maps, scenarios, highways and solution JSON."""

from __future__ import annotations

import json
from typing import Iterable

from .model import Flavor, Group, Instance, InstanceError, Solution, Workspace, metrics

SCEN_HEADER = "mapfgen-scen v1"
HWY_HEADER = "mapfgen-hwy v1"
FREE = "."
BLOCKED = "@T"


class ParseError(ValueError):
    def __init__(self, message: str, line: int, column: int | None = None):
        where = f"line {line}" + (f", column {column}" if column is not None else "")
        super().__init__(f"{where}: {message}")
        self.line = line
        self.column = column


def parse_map(text: str) -> Workspace:
    lines = text.splitlines()
    header: dict[str, str] = {}
    i = 0
    while i < len(lines) and lines[i].strip() != "map":
        raw = lines[i].strip()
        if raw:
            parts = raw.split()
            if len(parts) != 2 or parts[0] not in ("type", "height", "width"):
                raise ParseError(f"malformed header line {raw!r}", i + 1)
            header[parts[0]] = parts[1]
        i += 1
    if i == len(lines):
        raise ParseError("missing 'map' line", i)
    for key in ("type", "height", "width"):
        if key not in header:
            raise ParseError(f"missing header field {key!r}", i + 1)
    try:
        height, width = int(header["height"]), int(header["width"])
    except ValueError:
        raise ParseError("height and width must be integers", i) from None
    if height <= 0 or width <= 0:
        raise ParseError("height and width must be positive", i)
    rows = lines[i + 1:]
    while rows and not rows[-1].strip():
        rows.pop()
    if len(rows) != height:
        raise ParseError(f"expected {height} rows, found {len(rows)}", i + 2 + len(rows))
    blocked = []
    for y, row in enumerate(rows):
        lineno = i + 2 + y
        if len(row) != width:
            raise ParseError(f"row has {len(row)} cells, expected {width}", lineno, min(len(row), width) + 1)
        for x, ch in enumerate(row):
            if ch in BLOCKED:
                blocked.append((x, y))
            elif ch != FREE:
                raise ParseError(f"unknown cell character {ch!r}", lineno, x + 1)
    return Workspace.grid(width, height, blocked)


def serialize_map(ws: Workspace) -> str:
    if not ws.is_grid:
        raise ValueError("only grid workspaces have a map serialization")
    out = ["type octile", f"height {ws.height}", f"width {ws.width}", "map"]
    for y in range(ws.height):
        out.append("".join("@" if (x, y) in ws.blocked else FREE for x in range(ws.width)))
    return "\n".join(out) + "\n"


def _cell(ws: Workspace, token: str, lineno: int) -> int:
    try:
        x, y = (int(p) for p in token.split(","))
    except ValueError:
        raise ParseError(f"bad coordinate {token!r}", lineno) from None
    return _xy(ws, x, y, lineno)


def _xy(ws: Workspace, x: int, y: int, lineno: int) -> int:
    try:
        return ws.vertex(x, y)
    except InstanceError:
        raise InstanceError(f"line {lineno}: cell ({x}, {y}) outside the map or blocked") from None


def parse_scenario(text: str, ws: Workspace) -> Instance:
    """Build an instance; a file holds only one record kind.

    Package files become PERR when every package has its own type and
    KPERR otherwise.
    """
    lines = text.splitlines()
    if not lines or lines[0].strip() != SCEN_HEADER:
        raise ParseError(f"expected header {SCEN_HEADER!r}", 1)
    kinds = set()
    ids, starts, targets, types = [], [], [], []
    teams = []
    for lineno, raw in enumerate(lines[1:], start=2):
        parts = raw.split()
        if not parts or parts[0].startswith("#"):
            continue
        kind = parts[0]
        kinds.add(kind)
        try:
            if kind == "agent":
                if len(parts) != 6:
                    raise ParseError("agent record needs 5 fields", lineno)
                sx, sy, tx, ty = (int(p) for p in parts[2:])
                ids.append(parts[1])
                starts.append(_xy(ws, sx, sy, lineno))
                targets.append(_xy(ws, tx, ty, lineno))
            elif kind == "team":
                if len(parts) != 6 or parts[2] != "members" or parts[4] != "targets":
                    raise ParseError("team record must be 'team <id> members <...> targets <...>'", lineno)
                members = [_cell(ws, c, lineno) for c in parts[3].split(";") if c]
                tgts = tuple(_cell(ws, c, lineno) for c in parts[5].split(";") if c)
                idx = []
                for k, v in enumerate(members):
                    idx.append(len(starts))
                    ids.append(f"{parts[1]}.{k}")
                    starts.append(v)
                if len(members) != len(tgts):
                    raise InstanceError(
                        f"line {lineno}: team cardinality mismatch "
                        f"({len(members)} members, {len(tgts)} targets)"
                    )
                teams.append(Group(parts[1], tuple(idx), tgts))
            elif kind == "package":
                if len(parts) != 8 or parts[2] != "type" or parts[4] != "start" or parts[6] != "target":
                    raise ParseError("package record must be 'package <id> type <k> start <x,y> target <x,y>'", lineno)
                ids.append(parts[1])
                types.append(parts[3])
                starts.append(_cell(ws, parts[5], lineno))
                targets.append(_cell(ws, parts[7], lineno))
            else:
                raise ParseError(f"unknown record {kind!r}", lineno, 1)
        except ValueError as exc:
            if isinstance(exc, (ParseError, InstanceError)):
                raise
            raise ParseError(str(exc), lineno) from None
    if len(kinds) > 1:
        raise ParseError(f"mixed record kinds {sorted(kinds)}", 1)
    if not kinds:
        raise ParseError("scenario has no movers", 1)
    kind = kinds.pop()
    if kind == "agent":
        return Instance(ws, Flavor.MAPF, tuple(ids), tuple(starts), tuple(targets))
    if kind == "team":
        return Instance(ws, Flavor.TAPF, tuple(ids), tuple(starts), teams=tuple(teams))
    flavor = Flavor.PERR if len(set(types)) == len(types) else Flavor.KPERR
    return Instance(ws, flavor, tuple(ids), tuple(starts), tuple(targets), types=tuple(types))


def serialize_scenario(inst: Instance) -> str:
    ws = inst.workspace
    c = ws.coords
    out = [SCEN_HEADER]
    if inst.flavor is Flavor.MAPF:
        for i, mid in enumerate(inst.mover_ids):
            (sx, sy), (tx, ty) = c[inst.starts[i]], c[inst.targets[i]]
            out.append(f"agent {mid} {sx} {sy} {tx} {ty}")
    elif inst.flavor is Flavor.TAPF:
        for team in inst.teams:
            members = ";".join("%d,%d" % c[inst.starts[m]] for m in team.members)
            tgts = ";".join("%d,%d" % c[v] for v in team.targets)
            out.append(f"team {team.label} members {members} targets {tgts}")
    else:
        for i, mid in enumerate(inst.mover_ids):
            out.append(
                f"package {mid} type {inst.types[i]} start %d,%d target %d,%d"
                % (c[inst.starts[i]] + c[inst.targets[i]])
            )
    return "\n".join(out) + "\n"


def parse_highway(text: str, ws: Workspace) -> frozenset[tuple[int, int]]:
    lines = text.splitlines()
    if not lines or lines[0].strip() != HWY_HEADER:
        raise ParseError(f"expected header {HWY_HEADER!r}", 1)
    edges = set()
    for lineno, raw in enumerate(lines[1:], start=2):
        parts = raw.split()
        if not parts or parts[0].startswith("#"):
            continue
        if parts[0] != "edge" or len(parts) != 5:
            raise ParseError("highway record must be 'edge x1 y1 x2 y2'", lineno)
        try:
            x1, y1, x2, y2 = (int(p) for p in parts[1:])
        except ValueError:
            raise ParseError("non-integer coordinate", lineno) from None
        u, v = _xy(ws, x1, y1, lineno), _xy(ws, x2, y2, lineno)
        if not ws.has_edge(u, v):
            raise InstanceError(f"line {lineno}: ({x1},{y1})->({x2},{y2}) is not a workspace edge")
        edges.add((u, v))
    return frozenset(edges)


def serialize_highway(hw: Iterable[tuple[int, int]], ws: Workspace) -> str:
    c = ws.coords
    rows = sorted((c[u][1], c[u][0], c[v][1], c[v][0], u, v) for u, v in hw)
    out = [HWY_HEADER]
    for *_, u, v in rows:
        out.append("edge %d %d %d %d" % (c[u] + c[v]))
    return "\n".join(out) + "\n"


def solution_to_dict(sol: Solution, inst: Instance) -> dict:
    c = inst.workspace.coords
    ids = inst.mover_ids
    return {
        "horizon": sol.horizon,
        "paths": {ids[i]: [list(c[v]) for v in p] for i, p in enumerate(sol.paths)},
        "assignment": {ids[i]: list(c[v]) for i, v in enumerate(sol.assignment)},
        "exchanges": [[t, ids[a], ids[b]] for t, a, b in sol.exchanges],
        "metrics": metrics(sol),
    }


def solution_to_json(sol: Solution, inst: Instance) -> str:
    return json.dumps(solution_to_dict(sol, inst), indent=1) + "\n"


def solution_from_json(text: str, inst: Instance) -> Solution:
    data = json.loads(text)
    ws = inst.workspace
    index = {mid: i for i, mid in enumerate(inst.mover_ids)}
    if set(data["paths"]) != set(index):
        raise InstanceError("solution movers do not match the instance")
    paths: list[list[int]] = [[] for _ in index]
    for mid, cells in data["paths"].items():
        paths[index[mid]] = [ws.vertex(x, y) for x, y in cells]
    assignment = [0] * len(index)
    for mid, (x, y) in data["assignment"].items():
        assignment[index[mid]] = ws.vertex(x, y)
    exchanges = [(int(t), index[a], index[b]) for t, a, b in data.get("exchanges", [])]
    return Solution(paths, assignment, exchanges)
