"""Benchmark harness: runs solver cells over instance suites and aggregates the results."""

from __future__ import annotations

import csv
import io
import json
import statistics
import time
from dataclasses import asdict, dataclass, field, fields
from typing import Callable, Sequence

from .assets import kiva_highway, kiva_map
from .cbs import Limits, cbs_solve, ecbs_solve
from .flow import anonymous_solve, cbm_solve
from .generate import generate_instance
from .highways import ecbs_highway_solve
from .model import BudgetExhausted, Flavor, Instance, InstanceError, metrics
from .perr import kperr_solve, perr_solve_fast, perr_solve_optimal
from .validate import validate

ALGORITHMS = ("cbs", "ecbs", "flow-anon", "cbm", "perr-opt", "perr-fast", "kperr")

COMPATIBLE = {
    "cbs": (Flavor.MAPF, Flavor.PERR),
    "ecbs": (Flavor.MAPF, Flavor.PERR),
    "flow-anon": (Flavor.TAPF,),
    "cbm": (Flavor.TAPF,),
    "perr-opt": (Flavor.PERR,),
    "perr-fast": (Flavor.PERR, Flavor.KPERR),
    "kperr": (Flavor.KPERR, Flavor.PERR),
}


@dataclass(frozen=True)
class RunConfig:
    algorithm: str = "cbs"
    w: float = 1.0
    w1: float | None = None
    w2: float | None = None
    highway: object = None  # a highway edge set, or None
    budget_nodes: int = 20_000
    budget_seconds: float | None = None
    seed: int = 0

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {self.algorithm!r}")
        for name in ("w", "w1", "w2"):
            val = getattr(self, name)
            if val is not None and val < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.budget_nodes <= 0 or (self.budget_seconds is not None and self.budget_seconds <= 0):
            raise ValueError("budgets must be positive")
        if self.highway is not None and self.w1 is None:
            raise ValueError("highway runs need w1")

    @property
    def limits(self) -> Limits:
        return Limits(max_nodes=self.budget_nodes, max_seconds=self.budget_seconds)

    def label(self) -> str:
        if self.algorithm == "ecbs":
            if self.highway is not None:
                return f"ecbs-hwy(w1={self.w1:g},w2={self.w2 or self.w:g})"
            return f"ecbs(w={self.w:g})"
        return self.algorithm


def check_compatible(algorithm: str, inst: Instance) -> None:
    if inst.flavor not in COMPATIBLE[algorithm]:
        raise InstanceError(f"algorithm {algorithm} does not accept {inst.flavor.value} instances")
    if algorithm == "flow-anon" and len(inst.groups) != 1:
        raise InstanceError("flow-anon needs exactly one team")


def run_solver(inst: Instance, cfg: RunConfig, stats: dict):
    """Dispatch one solve; returns a Solution or None, raises BudgetExhausted."""
    check_compatible(cfg.algorithm, inst)
    lim = cfg.limits
    alg = cfg.algorithm
    if alg == "cbs":
        return cbs_solve(inst, limits=lim, stats=stats)
    if alg == "ecbs":
        if cfg.highway is not None:
            return ecbs_highway_solve(inst, cfg.highway, cfg.w1, cfg.w2 or cfg.w, lim, stats=stats)
        return ecbs_solve(inst, cfg.w, limits=lim, stats=stats)
    if alg == "flow-anon":
        return anonymous_solve(inst, lim, stats)
    if alg == "cbm":
        return cbm_solve(inst, lim, stats=stats)
    if alg == "perr-opt":
        return perr_solve_optimal(inst, lim, stats)
    if alg == "perr-fast":
        return perr_solve_fast(inst, lim, stats)
    return kperr_solve(inst, lim, stats)


@dataclass
class BenchRow:
    instance: str
    algorithm: str
    status: str  # solved, infeasible, budget, error
    success: bool
    makespan: int | None
    flowtime: int | None
    runtime_s: float
    hl_nodes: int | None
    ll_expanded: int | None
    adherence: float | None


def run_cell(name: str, inst: Instance, cfg: RunConfig) -> BenchRow:
    """One run; failures become rows, never exceptions."""
    stats: dict = {}
    started = time.perf_counter()
    status, sol = "solved", None
    try:
        sol = run_solver(inst, cfg, stats)
        if sol is None:
            status = "infeasible"
        elif not validate(inst, sol).ok:
            status, sol = "error", None
    except BudgetExhausted:
        status = "budget"
    except (InstanceError, ValueError):
        status = "error"
    runtime = time.perf_counter() - started
    m = metrics(sol) if sol is not None else {"makespan": None, "flowtime": None}
    return BenchRow(
        name, cfg.label(), status, sol is not None, m["makespan"], m["flowtime"], runtime,
        stats.get("hl_expanded"), stats.get("ll_expanded"), stats.get("adherence") if sol is not None else None,
    )


@dataclass
class BenchmarkReport:
    rows: list[BenchRow] = field(default_factory=list)
    pairs: list[tuple[str, str]] = field(default_factory=list)

    def aggregates(self) -> dict:
        out = {}
        for alg in sorted({r.algorithm for r in self.rows}):
            rows = [r for r in self.rows if r.algorithm == alg]
            solved = [r for r in rows if r.success]
            med = lambda xs: statistics.median(xs) if xs else None  # noqa: E731
            out[alg] = {
                "runs": len(rows),
                "solved": len(solved),
                "success_rate": len(solved) / len(rows),
                "median_makespan": med([r.makespan for r in solved]),
                "median_runtime_s": med([r.runtime_s for r in rows]),
                "median_hl_nodes": med([r.hl_nodes for r in rows if r.hl_nodes is not None]),
            }
        return out

    def comparisons(self) -> list[dict]:
        """Paired statistics of algorithm ``a`` against ``b`` over instances both ran on."""
        out = []
        for a, b in self.pairs:
            ra = {r.instance: r for r in self.rows if r.algorithm == a}
            rb = {r.instance: r for r in self.rows if r.algorithm == b}
            common = sorted(set(ra) & set(rb))
            both = [i for i in common if ra[i].success and rb[i].success]
            nodes = [i for i in common if ra[i].hl_nodes is not None and rb[i].hl_nodes is not None]
            out.append({
                "a": a,
                "b": b,
                "instances": len(common),
                "a_solved": sum(ra[i].success for i in common),
                "b_solved": sum(rb[i].success for i in common),
                "both_solved": len(both),
                "a_makespan_le_b": sum(ra[i].makespan <= rb[i].makespan for i in both),
                "a_nodes_le_b": sum(ra[i].hl_nodes <= rb[i].hl_nodes for i in nodes),
                "node_pairs": len(nodes),
            })
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        names = [f.name for f in fields(BenchRow)]
        writer.writerow(names)
        for r in self.rows:
            writer.writerow(["" if getattr(r, n) is None else getattr(r, n) for n in names])
        return buf.getvalue()

    def to_json(self) -> str:
        doc = {
            "rows": [asdict(r) for r in self.rows],
            "aggregates": self.aggregates(),
            "comparisons": self.comparisons(),
        }
        return json.dumps(doc, indent=1) + "\n"


def run_suite(
    cells: Sequence[tuple[str, Instance, RunConfig]],
    pairs: Sequence[tuple[str, str]] = (),
    progress: Callable[[BenchRow], None] | None = None,
) -> BenchmarkReport:
    report = BenchmarkReport(pairs=list(pairs))
    for name, inst, cfg in cells:
        row = run_cell(name, inst, cfg)
        report.rows.append(row)
        if progress:
            progress(row)
    return report


def mapf_perr_suite(count: int, seed: int, width: int = 5, height: int = 5, movers: int = 8,
                    blocked: float = 0.1, budget_nodes: int = 2000):
    """Paired cells: every instance once as MAPF under CBS and once as PERR under the optimal solver."""
    cells = []
    for i in range(count):
        mapf = generate_instance(width, height, blocked, Flavor.MAPF, movers, seed * 100_003 + i)
        name = f"s{seed}-{i}"
        cells.append((name, mapf, RunConfig("cbs", budget_nodes=budget_nodes)))
        cells.append((name, mapf.as_flavor(Flavor.PERR), RunConfig("perr-opt", budget_nodes=budget_nodes)))
    return cells, [("perr-opt", "cbs")]


def highway_suite(seeds: Sequence[int], agents: int = 20, w1: float = 1.5, w2: float = 1.1,
                  budget_nodes: int = 5000):
    """Paired cells on the bundled warehouse: focal search with and without the hand-made highway."""
    ws = kiva_map()
    hw = kiva_highway(ws)
    with_hw = RunConfig("ecbs", w=w2, w1=w1, w2=w2, highway=hw, budget_nodes=budget_nodes)
    without = RunConfig("ecbs", w=w2, budget_nodes=budget_nodes)
    cells = []
    for s in seeds:
        inst = generate_instance(0, 0, 0.0, Flavor.MAPF, agents, s, workspace=ws)
        cells.append((f"kiva-{s}", inst, with_hw))
        cells.append((f"kiva-{s}", inst, without))
    return cells, [(with_hw.label(), without.label())]
