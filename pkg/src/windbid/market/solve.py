"""Second-stage and extensive-form solves of the two-stage bidding program."""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

import numpy as np

from windbid.errors import DimensionMismatch, NumericalFailure
from windbid.market import simplex
from windbid.market.lp import (DEFAULT_OPTIONS, RECOURSE_BLOCKS, SolverOptions,
                               build_extensive_form, recourse_matrix, solve_lp)
from windbid.market.types import (BatteryContext, BidVector, MarketDay, ScenarioSet,
                                  SecondStageAssignment, SolveReport, Status, as_bid)


def _recourse_from_columns(xs, T):
    """Stack per-scenario recourse column vectors (length 6T each) into an assignment."""
    blocks = {sym: np.empty((T, len(xs))) for sym in RECOURSE_BLOCKS}
    for w, x in enumerate(xs):
        for k, sym in enumerate(RECOURSE_BLOCKS):
            blocks[sym][:, w] = x[k * T:(k + 1) * T]
    return SecondStageAssignment(**blocks)


def _scenario_arrays(day, battery, scenarios, p_da, cap_shortfall):
    """Per-scenario cost and bound vectors for the shared recourse matrix."""
    T = day.horizon
    S = scenarios.n_scenarios
    zeros = np.zeros((S, T))
    C = np.hstack([scenarios.rt_price.T, -scenarios.up_price.T, -scenarios.op_price.T,
                   zeros, zeros, zeros])
    rhs = scenarios.wind.T - p_da
    dyn = np.zeros((S, T))
    dyn[:, 0] = battery.e_init
    row_lo = np.hstack([rhs, dyn, np.full((S, 1), battery.e_final)])
    row_hi = np.hstack([rhs, dyn, np.full((S, 1), np.inf)])
    inf = np.full((S, T), np.inf)
    up_hi = np.broadcast_to(p_da, (S, T)) if cap_shortfall else inf
    col_lo = np.hstack([zeros, zeros, zeros, zeros, zeros, np.full((S, T), battery.e_min)])
    col_hi = np.hstack([inf, up_hi, inf, np.full((S, T), battery.p_ch_max),
                        np.full((S, T), battery.p_dis_max), np.full((S, T), battery.e_max)])
    return C, row_lo, row_hi, col_lo, col_hi


def _run_batch(A, C, row_lo, row_hi, col_lo, col_hi, options):
    m, n = A.shape
    max_iter = options.max_iter or max(10000, 50 * (m + n))
    try:
        codes, X, iters = simplex.simplex_batch(
            -C, A.indptr.astype(np.int64), A.indices.astype(np.int64), A.data, m, n,
            row_lo, row_hi, col_lo, col_hi, options.feas_tol, options.opt_tol,
            options.piv_tol, max_iter, options.refactor_every)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailure(f"singular basis: {exc}") from exc
    return codes, X, iters


def solve_second_stage(day: MarketDay, battery: BatteryContext, scenarios: ScenarioSet, bid,
                       options: SolverOptions = DEFAULT_OPTIONS, threads: int = 1,
                       cap_shortfall: bool = False) -> SolveReport:
    """Optimal expected revenue with the day-ahead bid held fixed.

    With the bid fixed the scenarios decouple, so each one is solved as its own
    deterministic LP (the one ``build_scenario_lp`` returns) and the results are
    combined by probability weight.  The combination runs in scenario order
    whatever ``threads`` is, so results do not depend on completion order.
    """
    bid = as_bid(bid)
    T = day.horizon
    if len(bid) != T:
        raise DimensionMismatch(f"bid has length {len(bid)}, expected {T}")
    if scenarios.horizon != T:
        raise DimensionMismatch(f"scenario horizon {scenarios.horizon} differs from day horizon {T}")
    A = recourse_matrix(T, battery.eta_ch, battery.discharge_coeff)
    arrays = _scenario_arrays(day, battery, scenarios, bid.p_da, cap_shortfall)
    S = scenarios.n_scenarios
    if threads > 1 and S > 1:
        chunks = np.array_split(np.arange(S), min(threads, S))
        with ThreadPoolExecutor(max_workers=len(chunks)) as pool:
            parts = list(pool.map(
                lambda idx: _run_batch(A, *(np.ascontiguousarray(a[idx]) for a in arrays), options),
                chunks))
        codes = np.concatenate([p[0] for p in parts])
        X = np.vstack([p[1] for p in parts])
        iters = np.concatenate([p[2] for p in parts])
    else:
        codes, X, iters = _run_batch(A, *arrays, options)
    iterations = int(iters.sum())
    for w in range(S):
        code = codes[w]
        if code in (simplex.ITERATION_LIMIT, simplex.SINGULAR):
            raise NumericalFailure("iteration limit reached" if code == simplex.ITERATION_LIMIT
                                   else "basis inverse lost finiteness", scenario=w)
        if code != simplex.OPTIMAL:
            status = Status.INFEASIBLE if code == simplex.INFEASIBLE else Status.UNBOUNDED
            return SolveReport(status, float("nan"), first_stage=bid, iterations=iterations, scenario=w)
    C, row_lo, row_hi, col_lo, col_hi = arrays
    act = (A @ X.T).T
    viol = np.max(np.stack([row_lo - act, act - row_hi]).max(axis=0), axis=1)
    viol = np.maximum(viol, np.max(np.maximum(col_lo - X, X - col_hi), axis=1))
    viol = np.maximum(viol, 0.0)
    worst = int(np.argmax(viol))
    if viol[worst] > options.report_tol:
        raise NumericalFailure(f"solution violates constraints by {viol[worst]:.3g}", scenario=worst)
    values = np.einsum("ij,ij->i", C, X)
    value = float(day.da_price @ bid.p_da)
    for w in range(S):
        value += scenarios.prob[w] * values[w]
    return SolveReport(Status.OPTIMAL, value, first_stage=bid,
                       recourse=_recourse_from_columns(list(X), T),
                       iterations=iterations, max_constraint_violation=float(viol.max()))


def solve_full_sp(day: MarketDay, battery: BatteryContext, scenarios: ScenarioSet,
                  options: SolverOptions = DEFAULT_OPTIONS, cap_shortfall: bool = False) -> SolveReport:
    """Unrestricted optimum of the two-stage program via its extensive form."""
    lp = build_extensive_form(day, battery, scenarios, cap_shortfall)
    report = solve_lp(lp, options)
    if not report.optimal:
        return report
    T = day.horizon
    x = report.x
    per = 6 * T
    xs = [x[T + per * w:T + per * (w + 1)] for w in range(scenarios.n_scenarios)]
    report.first_stage = BidVector(np.maximum(x[:T], 0.0))
    report.recourse = _recourse_from_columns(xs, T)
    return report


def balance_residual(day: MarketDay, scenarios: ScenarioSet, report: SolveReport) -> np.ndarray:
    """|G - (P_DA + P_RT + P_op - P_up + P_ch - P_dis)| per (t, scenario)."""
    r = report.recourse
    b = report.first_stage.p_da[:, None]
    return np.abs(scenarios.wind - (b + r.p_rt + r.p_op - r.p_up + r.p_ch - r.p_dis))


def dynamics_residual(battery: BatteryContext, report: SolveReport) -> np.ndarray:
    r = report.recourse
    prev = np.vstack([np.full((1, r.energy.shape[1]), battery.e_init), r.energy[:-1]])
    return np.abs(r.energy - prev - battery.eta_ch * r.p_ch + battery.discharge_coeff * r.p_dis)
