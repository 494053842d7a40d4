"""Simple temporal network post-processing: continuous-time schedules with slack, and delayed execution."""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass, field
from typing import Sequence

from .model import InstanceError, Solution, Workspace, mover_paths
from .validate import iter_conflicts

INF = math.inf
EPS = 1e-9
X0 = -1  # id of the global start event


@dataclass(frozen=True)
class Kinematics:
    """``v_max`` in m/s (one value or one per mover), ``rot_time`` in s per 90 degree turn, ``safety_distance`` in m."""

    v_max: float | tuple[float, ...] = 1.0
    rot_time: float = 0.0
    safety_distance: float = 0.0

    def __post_init__(self):
        speeds = self.v_max if isinstance(self.v_max, tuple) else (self.v_max,)
        if any(v <= 0 for v in speeds):
            raise ValueError("v_max must be positive")
        if self.rot_time < 0:
            raise ValueError("rot_time must be non-negative")
        if self.safety_distance < 0:
            raise ValueError("safety_distance must be non-negative")

    def speed(self, mover: int) -> float:
        return self.v_max[mover] if isinstance(self.v_max, tuple) else self.v_max


@dataclass(frozen=True)
class Event:
    """Entry of ``mover`` into its ``index``-th distinct location ``vertex`` at discrete timestep ``step``."""

    mover: int
    index: int
    vertex: int
    step: int


@dataclass(frozen=True)
class TemporalConstraint:
    """``lb <= t(dst) - t(src) <= ub`` between event ids (``X0`` is the start event)."""

    src: int
    dst: int
    lb: float
    ub: float = INF
    kind: str = "type1"


@dataclass
class TemporalNetwork:
    events: list[Event]
    constraints: list[TemporalConstraint]
    deadline: float | None = None
    first: list[int] = field(default_factory=list)  # first event id per mover
    last: list[int] = field(default_factory=list)


class InconsistentNetwork(ValueError):
    """The distance graph has a negative cycle; ``cycle`` lists its event ids in order."""

    def __init__(self, cycle: list[int]):
        super().__init__(f"inconsistent temporal network, negative cycle through events {cycle}")
        self.cycle = cycle


def _turns(ws: Workspace, a: int, b: int, c: int) -> int:
    """Quarter turns between heading a->b and heading b->c on a grid."""
    if ws.coords is None:
        return 0
    (ax, ay), (bx, by), (cx, cy) = ws.coords[a], ws.coords[b], ws.coords[c]
    d1, d2 = (bx - ax, by - ay), (cx - bx, cy - by)
    if d1 == d2:
        return 0
    return 2 if d1 == (-d2[0], -d2[1]) else 1


def build_stn(sol: Solution, ws: Workspace, kin: Kinematics, deadline: float | None = None) -> TemporalNetwork:
    """Temporal network for executing ``sol`` with kinematic limits and a safety margin.

    Waits are collapsed, so each event is the entry into a new location.
    Consecutive events of one mover are separated by at least the travel
    time plus a rotation charge for the heading change on arrival at the
    earlier location. When movers visit the same vertex one after the
    other, the later entry waits for the earlier mover to reach its next
    location plus ``safety_distance / v_max`` of that mover; orderings
    along shared edges follow from those at their endpoints. With a
    ``deadline`` every mover's last event must happen by then.
    Package-view solutions are converted to mover paths first.
    """
    paths = mover_paths(sol) if sol.exchanges else sol.paths
    bad = next(iter_conflicts(paths, allow_swap=False), None)
    if bad is not None:
        raise InstanceError(f"solution has a {bad.kind} conflict at t={bad.time}; cannot order visits")
    events: list[Event] = []
    cons: list[TemporalConstraint] = []
    first, last = [], []
    visits: dict[int, list[tuple[int, int, int]]] = {}
    for m, p in enumerate(paths):
        ids = []
        for t, v in enumerate(p):
            if t == 0 or v != p[t - 1]:
                eid = len(events)
                events.append(Event(m, len(ids), v, t))
                ids.append(eid)
                visits.setdefault(v, []).append((t, m, eid))
        first.append(ids[0])
        last.append(ids[-1])
        cons.append(TemporalConstraint(X0, ids[0], 0.0, INF, "start"))
        for k in range(1, len(ids)):
            a, b = events[ids[k - 1]].vertex, events[ids[k]].vertex
            lb = ws.length(a, b) / kin.speed(m)
            if k >= 2:
                lb += kin.rot_time * _turns(ws, events[ids[k - 2]].vertex, a, b)
            cons.append(TemporalConstraint(ids[k - 1], ids[k], lb, INF, "type1"))
    for v in sorted(visits):
        seq = sorted(visits[v])
        for (ta, ma, ea), (tb, mb, eb) in zip(seq, seq[1:]):
            if ma == mb:
                continue
            nxt = ea + 1
            if nxt >= len(events) or events[nxt].mover != ma:
                raise InstanceError(f"mover {ma} parks on vertex {v} before mover {mb} arrives")
            cons.append(TemporalConstraint(nxt, eb, kin.safety_distance / kin.speed(ma), INF, "type2"))
    if deadline is not None:
        for e in last:
            cons.append(TemporalConstraint(X0, e, 0.0, float(deadline), "deadline"))
    return TemporalNetwork(events, cons, deadline, first, last)


@dataclass
class Schedule:
    events: list[Event]
    earliest: list[float]
    latest: list[float]

    @property
    def slack(self) -> list[float]:
        return [lt - ea for ea, lt in zip(self.earliest, self.latest)]

    def makespan(self) -> float:
        return max(self.earliest, default=0.0)


def _distance_edges(stn: TemporalNetwork) -> list[tuple[int, int, float]]:
    """Distance-graph edges over nodes 0..n (node n is X0)."""
    n = len(stn.events)
    node = lambda e: n if e == X0 else e  # noqa: E731
    out = []
    for c in stn.constraints:
        a, b = node(c.src), node(c.dst)
        if c.ub < INF:
            out.append((a, b, c.ub))
        out.append((b, a, -c.lb))
    return out


def _bellman_ford(n_nodes: int, edges, source: int) -> list[float]:
    dist = [INF] * n_nodes
    pred = [-1] * n_nodes
    dist[source] = 0.0
    changed_at = -1
    for it in range(n_nodes):
        changed_at = -1
        for a, b, w in edges:
            if dist[a] + w < dist[b] - EPS:
                dist[b] = dist[a] + w
                pred[b] = a
                changed_at = b
        if changed_at < 0:
            return dist
    # still relaxing after n rounds: walk back onto the cycle
    v = changed_at
    for _ in range(n_nodes):
        v = pred[v]
    cycle = [v]
    u = pred[v]
    while u != v:
        cycle.append(u)
        u = pred[u]
    cycle.reverse()
    raise InconsistentNetwork(cycle)


def compute_schedule(stn: TemporalNetwork) -> Schedule:
    """Earliest and latest entry times (seconds) from shortest paths in the distance graph.

    Earliest is minus the distance from an event to X0, latest the distance
    from X0 to the event (infinite without a deadline). A negative cycle
    raises ``InconsistentNetwork`` with the cycle's event ids (-1 for X0).
    """
    n = len(stn.events)
    edges = _distance_edges(stn)
    try:
        d_from = _bellman_ford(n + 1, edges, n)
        d_to = _bellman_ford(n + 1, [(b, a, w) for a, b, w in edges], n)
    except InconsistentNetwork as exc:
        raise InconsistentNetwork([X0 if e == n else e for e in exc.cycle]) from None
    earliest = [0.0 if d == 0 else -d for d in d_to[:n]]
    return Schedule(list(stn.events), earliest, d_from[:n])


@dataclass(frozen=True)
class DelayModel:
    """Per-event delays: ``kind`` is none, uniform (on [0, scale]) or exponential (mean ``scale``).

    ``cap="slack"`` clips each delay to the event's remaining slack at
    dispatch (latest minus ready time). ``overrides`` maps event ids to
    fixed delays applied after sampling.
    """

    kind: str = "none"
    scale: float = 0.0
    cap: str = "none"
    seed: int = 0
    overrides: tuple[tuple[int, float], ...] = ()


@dataclass
class ExecutionTrace:
    realized: list[float]
    delays: list[float]
    replan_needed: bool
    late_events: list[int]
    ordering_violations: int
    safety_violations: int
    min_separation: float | None

    def to_dict(self) -> dict:
        return {
            "realized_s": self.realized,
            "delays_s": self.delays,
            "replan_needed": self.replan_needed,
            "late_events": self.late_events,
            "ordering_violations": self.ordering_violations,
            "safety_violations": self.safety_violations,
            "min_separation_s": self.min_separation,
        }


def simulate_execution(
    schedule: Schedule, stn: TemporalNetwork, delays: DelayModel = DelayModel()
) -> ExecutionTrace:
    """Dispatch events in order; each happens at max(earliest, ready + delay).

    ``ready`` is the earliest time all incoming lower bounds are met by the
    realized times of its predecessors. An event later than its latest
    time sets ``replan_needed``. Orderings and safety margins of every
    type-2 constraint are re-checked on the realized times.
    """
    n = len(stn.events)
    rng = random.Random(delays.seed)
    preds: list[list[tuple[int, float]]] = [[] for _ in range(n)]
    indeg = [0] * n
    for c in stn.constraints:
        if c.src != X0:
            preds[c.dst].append((c.src, c.lb))
            indeg[c.dst] += 1
    succ: list[list[int]] = [[] for _ in range(n)]
    for c in stn.constraints:
        if c.src != X0:
            succ[c.src].append(c.dst)
    order = [e for e in range(n) if indeg[e] == 0]
    for e in order:
        for f in succ[e]:
            indeg[f] -= 1
            if indeg[f] == 0:
                order.append(f)
    if len(order) != n:
        raise InconsistentNetwork([])
    overrides = dict(delays.overrides)
    realized = [0.0] * n
    applied = [0.0] * n
    for e in range(n):  # sample in event-id order so traces do not depend on dispatch order
        if delays.kind == "uniform":
            applied[e] = rng.uniform(0.0, delays.scale)
        elif delays.kind == "exponential":
            applied[e] = rng.expovariate(1.0 / delays.scale) if delays.scale > 0 else 0.0
        elif delays.kind != "none":
            raise ValueError(f"unknown delay kind {delays.kind!r}")
    for e, d in overrides.items():
        applied[e] = d
    for e in order:
        ready = max((realized[a] + lb for a, lb in preds[e]), default=0.0)
        d = applied[e]
        if delays.cap == "slack" and e not in overrides:
            d = max(0.0, min(d, schedule.latest[e] - ready))
        applied[e] = d
        realized[e] = max(schedule.earliest[e], ready + d)
    late = [e for e in range(n) if realized[e] > schedule.latest[e] + EPS]
    ordering = safety = 0
    separations = []
    for c in stn.constraints:
        if c.kind != "type2":
            continue
        gap = realized[c.dst] - realized[c.src]
        separations.append(gap)
        ordering += gap < -EPS
        safety += gap < c.lb - EPS
    return ExecutionTrace(
        realized, applied, bool(late), late, ordering, safety, min(separations) if separations else None
    )


def occupancy_intervals(stn: TemporalNetwork, times: Sequence[float]) -> dict[int, list[tuple[float, float, int]]]:
    """Per vertex, the (enter, leave, mover) intervals implied by event times; a parked mover never leaves."""
    out: dict[int, list[tuple[float, float, int]]] = {}
    last = set(stn.last)
    for e, ev in enumerate(stn.events):
        leave = INF if e in last else times[e + 1]
        out.setdefault(ev.vertex, []).append((times[e], leave, ev.mover))
    for v in out:
        out[v].sort()
    return out


def _num(x: float):
    return None if math.isinf(x) else x


def schedule_to_dict(schedule: Schedule, stn: TemporalNetwork, ws: Workspace | None = None) -> dict:
    def where(v):
        return list(ws.coords[v]) if ws is not None and ws.coords is not None else v

    return {
        "deadline_s": stn.deadline,
        "events": [
            {
                "mover": ev.mover,
                "index": ev.index,
                "vertex": where(ev.vertex),
                "step": ev.step,
                "earliest_s": schedule.earliest[i],
                "latest_s": _num(schedule.latest[i]),
                "slack_s": _num(schedule.slack[i]),
            }
            for i, ev in enumerate(stn.events)
        ],
        "constraints": [
            {"from": c.src, "to": c.dst, "lb": c.lb, "ub": _num(c.ub), "kind": c.kind} for c in stn.constraints
        ],
    }


def schedule_to_json(schedule: Schedule, stn: TemporalNetwork, ws: Workspace | None = None) -> str:
    return json.dumps(schedule_to_dict(schedule, stn, ws), indent=1) + "\n"


def schedule_from_json(text: str, ws: Workspace | None = None) -> tuple[Schedule, TemporalNetwork]:
    data = json.loads(text)

    def vertex(v):
        return ws.vertex(*v) if isinstance(v, list) else v

    events = [Event(e["mover"], e["index"], vertex(e["vertex"]), e["step"]) for e in data["events"]]
    inf = lambda x: INF if x is None else x  # noqa: E731
    cons = [TemporalConstraint(c["from"], c["to"], c["lb"], inf(c["ub"]), c["kind"]) for c in data["constraints"]]
    first, last = [], []
    for i, ev in enumerate(events):
        if ev.index == 0:
            first.append(i)
        if i + 1 == len(events) or events[i + 1].mover != ev.mover:
            last.append(i)
    stn = TemporalNetwork(events, cons, data["deadline_s"], first, last)
    sched = Schedule(events, [e["earliest_s"] for e in data["events"]], [inf(e["latest_s"]) for e in data["events"]])
    return sched, stn


def trace_to_json(trace: ExecutionTrace) -> str:
    d = trace.to_dict()
    return json.dumps(d, indent=1) + "\n"
