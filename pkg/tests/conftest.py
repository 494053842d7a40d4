from __future__ import annotations

import pytest

from mapfgen.model import Flavor, Group, Instance, Workspace

# acceptance criterion lines collected by tests/test_acceptance.py
CRITERIA: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(CRITERIA):
        terminalreporter.write_line(CRITERIA[k])


@pytest.fixture
def corridor() -> Workspace:
    return Workspace.grid(3, 1)


@pytest.fixture
def plus() -> Workspace:
    """Five cells: the centre of a 3x3 grid and its four neighbours."""
    return Workspace.grid(3, 3, [(0, 0), (2, 0), (0, 2), (2, 2)])


def mapf(ws: Workspace, pairs) -> Instance:
    starts = tuple(ws.vertex(*s) for s, _ in pairs)
    targets = tuple(ws.vertex(*t) for _, t in pairs)
    return Instance(ws, Flavor.MAPF, tuple(f"a{i}" for i in range(len(pairs))), starts, targets)


def tapf(ws: Workspace, teams) -> Instance:
    """``teams``: list of (member starts, targets) coordinate lists."""
    starts, groups, ids, k = [], [], [], 0
    for ti, (members, targets) in enumerate(teams):
        starts += [ws.vertex(*s) for s in members]
        ids += [f"t{ti}.{j}" for j in range(len(members))]
        groups.append(Group(f"t{ti}", tuple(range(k, k + len(members))), tuple(ws.vertex(*t) for t in targets)))
        k += len(members)
    return Instance(ws, Flavor.TAPF, tuple(ids), tuple(starts), teams=tuple(groups))
