"""Multi-agent path finding: conflict-based search, flow-based team planning, package exchange,
highways, and temporal-network execution schedules."""

from .cbs import Constraint, Limits, cbs_solve, ecbs_solve, low_level_search
from .flow import anonymous_solve, build_network, cbm_solve, max_flow, min_cost_flow
from .formats import parse_highway, parse_map, parse_scenario
from .highways import build_inflated_heuristic, ecbs_highway_solve, generate_highways
from .model import (
    EXCHANGE,
    STANDARD,
    BudgetExhausted,
    Flavor,
    Instance,
    InstanceError,
    MotionSemantics,
    Solution,
    Workspace,
    metrics,
)
from .oracle import joint_state_oracle
from .perr import kperr_solve, perr_solve_fast, perr_solve_optimal
from .stn import Kinematics, build_stn, compute_schedule, simulate_execution
from .validate import validate

__version__ = "0.1.0"
