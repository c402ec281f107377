"""Two-stage stochastic LP for day-ahead bidding of a wind farm with storage."""
from windbid.market.lp import (LpStandardForm, SolverOptions, build_extensive_form,
                               build_scenario_lp, solve_lp)
from windbid.market.solve import solve_full_sp, solve_second_stage
from windbid.market.types import (BatteryContext, BidVector, MarketDay, ScenarioSet,
                                  SecondStageAssignment, SolveReport, Status)

__all__ = [
    "BatteryContext", "BidVector", "LpStandardForm", "MarketDay", "ScenarioSet",
    "SecondStageAssignment", "SolveReport", "SolverOptions", "Status",
    "build_extensive_form", "build_scenario_lp", "solve_full_sp", "solve_lp",
    "solve_second_stage",
]
