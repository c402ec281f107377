"""LP construction for the bidding problem and the generic ``solve_lp`` entry point."""
from __future__ import annotations

import functools
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np
import scipy.sparse as sp

from windbid.errors import DimensionMismatch, NumericalFailure
from windbid.market import simplex
from windbid.market.types import (BatteryContext, MarketDay, ScenarioSet, SolveReport, Status,
                                  as_bid)

ROW_KINDS = ("balance", "dynamics", "terminal", "shortfall")
# per-scenario column blocks, in layout order
RECOURSE_BLOCKS = ("p_rt", "p_up", "p_op", "p_ch", "p_dis", "energy")


@dataclass(frozen=True)
class SolverOptions:
    feas_tol: float = 1e-7
    opt_tol: float = 1e-7
    piv_tol: float = 1e-9
    report_tol: float = 1e-6
    refactor_every: int = 50
    max_iter: Optional[int] = None


DEFAULT_OPTIONS = SolverOptions()


@dataclass
class LpStandardForm:
    """``sense`` LP over ``row_lo <= A x <= row_hi`` and ``col_lo <= x <= col_hi``.

    Equality rows have ``row_lo == row_hi``.  Labels are ``(kind, t, scenario)``
    tuples for rows and ``(symbol, t, scenario)`` for columns, with ``t`` and the
    scenario index zero-based; scenario-free entries carry ``None``.
    """

    A: sp.csc_matrix
    row_lo: np.ndarray
    row_hi: np.ndarray
    col_lo: np.ndarray
    col_hi: np.ndarray
    c: np.ndarray
    sense: str = "max"
    row_labels: List[Tuple] = field(default_factory=list)
    col_labels: List[Tuple] = field(default_factory=list)
    # (T, n_scenarios, has_first_stage) for LPs produced by the builders below
    layout: Optional[Tuple[int, int, bool]] = None

    def __post_init__(self):
        self.A = sp.csc_matrix(self.A, dtype=float)
        m, n = self.A.shape
        for name, size in (("row_lo", m), ("row_hi", m), ("col_lo", n), ("col_hi", n), ("c", n)):
            arr = np.asarray(getattr(self, name), dtype=float).reshape(-1)
            if arr.size != size:
                raise DimensionMismatch(f"{name} has {arr.size} entries, expected {size}")
            setattr(self, name, arr)
        if self.sense not in ("max", "min"):
            raise ValueError("sense must be 'max' or 'min'")
        if self.row_labels and len(self.row_labels) != m:
            raise DimensionMismatch("row label count differs from row count")
        if self.col_labels and len(self.col_labels) != n:
            raise DimensionMismatch("column label count differs from column count")

    @property
    def n_rows(self) -> int:
        return self.A.shape[0]

    @property
    def n_cols(self) -> int:
        return self.A.shape[1]

    @classmethod
    def from_dense(cls, c, A_ub=None, b_ub=None, A_eq=None, b_eq=None, bounds=None, sense="max"):
        """Convenience constructor in the familiar ``A_ub x <= b_ub``, ``A_eq x = b_eq`` shape."""
        c = np.asarray(c, dtype=float)
        n = c.size
        blocks, lo, hi = [], [], []
        if A_ub is not None:
            A_ub = np.atleast_2d(np.asarray(A_ub, dtype=float))
            blocks.append(A_ub)
            lo.append(np.full(A_ub.shape[0], -np.inf))
            hi.append(np.asarray(b_ub, dtype=float))
        if A_eq is not None:
            A_eq = np.atleast_2d(np.asarray(A_eq, dtype=float))
            blocks.append(A_eq)
            lo.append(np.asarray(b_eq, dtype=float))
            hi.append(np.asarray(b_eq, dtype=float))
        A = np.vstack(blocks) if blocks else np.zeros((0, n))
        if bounds is None:
            bounds = [(0.0, None)] * n
        col_lo = np.array([-np.inf if b[0] is None else b[0] for b in bounds], dtype=float)
        col_hi = np.array([np.inf if b[1] is None else b[1] for b in bounds], dtype=float)
        return cls(A, np.concatenate(lo) if lo else np.zeros(0),
                   np.concatenate(hi) if hi else np.zeros(0), col_lo, col_hi, c, sense)

    def row_activity(self, x):
        return self.A @ x

    def violation(self, x) -> float:
        """Largest row or bound violation of ``x``."""
        x = np.asarray(x, dtype=float)
        act = self.A @ x
        v = 0.0
        if act.size:
            v = max(v, float(np.max(np.maximum(self.row_lo - act, 0.0))),
                    float(np.max(np.maximum(act - self.row_hi, 0.0))))
        if x.size:
            v = max(v, float(np.max(np.maximum(self.col_lo - x, 0.0))),
                    float(np.max(np.maximum(x - self.col_hi, 0.0))))
        return v

    def dump(self, path) -> None:
        """Write a fixed-width ``row label | coefficients | rhs`` text dump for inspection."""
        A = self.A.tocsr()
        names = [_label_str(l) for l in self.col_labels] or [f"x{j}" for j in range(self.n_cols)]
        rows = [_label_str(l) for l in self.row_labels] or [f"r{i}" for i in range(self.n_rows)]
        with open(path, "w") as fh:
            fh.write(f"{self.sense} " + " ".join(f"{v:+.6g}*{names[j]}"
                                               for j, v in enumerate(self.c) if v != 0) + "\n")
            for i in range(self.n_rows):
                lo, hi = A.indptr[i], A.indptr[i + 1]
                terms = " ".join(f"{v:+.6g}*{names[j]}" for j, v in zip(A.indices[lo:hi], A.data[lo:hi]))
                if self.row_lo[i] == self.row_hi[i]:
                    rhs = f"= {self.row_lo[i]:.6g}"
                elif np.isfinite(self.row_lo[i]) and np.isfinite(self.row_hi[i]):
                    rhs = f"in [{self.row_lo[i]:.6g}, {self.row_hi[i]:.6g}]"
                elif np.isfinite(self.row_lo[i]):
                    rhs = f">= {self.row_lo[i]:.6g}"
                else:
                    rhs = f"<= {self.row_hi[i]:.6g}"
                fh.write(f"{rows[i]:<24s} | {terms} | {rhs}\n")
            for j in range(self.n_cols):
                fh.write(f"{'bound ' + names[j]:<24s} | [{self.col_lo[j]:.6g}, {self.col_hi[j]:.6g}]\n")


def _label_str(label):
    sym, t, w = label
    inner = ",".join(str(v) for v in (t, w) if v is not None)
    return f"{sym}({inner})"


def _check_dims(day: MarketDay, scenarios: ScenarioSet):
    if scenarios.horizon != day.horizon:
        raise DimensionMismatch(
            f"scenario horizon {scenarios.horizon} differs from day horizon {day.horizon}")


@functools.lru_cache(maxsize=128)
def recourse_block(T: int, eta_ch: float, dis_coeff: float):
    """Sparsity pattern of one scenario's recourse rows over its 6T recourse columns.

    Rows are T balance, T dynamics and one terminal row; columns follow
    ``RECOURSE_BLOCKS``.  Returns read-only ``(rows, cols, vals)`` arrays.
    """
    t = np.arange(T)
    rt, up, op, ch, dis, en = (k * T + t for k in range(6))
    bal = t
    dyn = T + t
    term = np.array([2 * T])
    rows = [bal, bal, bal, bal, bal, dyn, dyn, dyn, dyn[1:], term]
    cols = [rt, op, up, ch, dis, en, ch, dis, en[:-1], en[-1:]]
    vals = [np.ones(T), np.ones(T), -np.ones(T), np.ones(T), -np.ones(T),
            np.ones(T), np.full(T, -eta_ch), np.full(T, dis_coeff), -np.ones(T - 1), np.ones(1)]
    out = tuple(np.concatenate(a) for a in (rows, cols, vals))
    for a in out:
        a.flags.writeable = False
    return out


@functools.lru_cache(maxsize=128)
def recourse_matrix(T: int, eta_ch: float, dis_coeff: float) -> sp.csc_matrix:
    rows, cols, vals = recourse_block(T, eta_ch, dis_coeff)
    A = sp.csc_matrix((vals, (rows, cols)), shape=(2 * T + 1, 6 * T))
    A.sort_indices()
    return A


def _assemble(day, battery, scenarios, scen_idx, bid, cap_shortfall):
    """Shared builder. ``bid=None`` keeps P^DA as shared first-stage columns.

    ``cap_shortfall`` adds P_up <= P_DA per (t, scenario): a bound when the bid is
    fixed, a ``shortfall`` row in the extensive form.
    """
    T = day.horizon
    S = len(scen_idx)
    first = bid is None
    n0 = T if first else 0
    per = 6 * T
    rows_per = 2 * T + 1
    n = n0 + per * S
    m = rows_per * S + (T * S if (first and cap_shortfall) else 0)
    b_rows, b_cols, b_vals = recourse_block(T, battery.eta_ch, battery.discharge_coeff)
    rows, cols, vals = [], [], []
    row_lo = np.empty(m)
    row_hi = np.empty(m)
    col_lo = np.zeros(n)
    col_hi = np.full(n, np.inf)
    c = np.zeros(n)
    col_labels = []
    row_labels = []
    t_idx = np.arange(T)
    if first:
        c[:T] = day.da_price
        col_labels += [("p_da", t, None) for t in range(T)]
    for s, w in enumerate(scen_idx):
        prob = scenarios.prob[w] if first else 1.0
        base = n0 + per * s
        r0 = rows_per * s
        rows.append(b_rows + r0)
        cols.append(b_cols + base)
        vals.append(b_vals)
        rt, up, op, ch, dis, en = (base + k * T + t_idx for k in range(6))
        for sym in RECOURSE_BLOCKS:
            col_labels += [(sym, t, int(w)) for t in range(T)]
        c[rt] = prob * scenarios.rt_price[:, w]
        c[up] = -prob * scenarios.up_price[:, w]
        c[op] = -prob * scenarios.op_price[:, w]
        col_hi[ch] = battery.p_ch_max
        col_hi[dis] = battery.p_dis_max
        col_lo[en] = battery.e_min
        col_hi[en] = battery.e_max
        bal = r0 + t_idx
        dyn = r0 + T + t_idx
        term = r0 + 2 * T
        if first:
            rows.append(bal)
            cols.append(t_idx)
            vals.append(np.ones(T))
            rhs = scenarios.wind[:, w]
        else:
            rhs = scenarios.wind[:, w] - bid
            if cap_shortfall:
                col_hi[up] = bid
        row_lo[bal] = rhs
        row_hi[bal] = rhs
        row_lo[dyn] = 0.0
        row_hi[dyn] = 0.0
        row_lo[dyn[0]] = battery.e_init
        row_hi[dyn[0]] = battery.e_init
        row_lo[term] = battery.e_final
        row_hi[term] = np.inf
        row_labels += [("balance", t, int(w)) for t in range(T)]
        row_labels += [("dynamics", t, int(w)) for t in range(T)]
        row_labels.append(("terminal", None, int(w)))
    if first and cap_shortfall:
        for s, w in enumerate(scen_idx):
            up = n0 + per * s + T + t_idx
            cap = rows_per * S + T * s + t_idx
            rows += [cap, cap]
            cols += [up, t_idx]
            vals += [np.ones(T), -np.ones(T)]
            row_lo[cap] = -np.inf
            row_hi[cap] = 0.0
            row_labels += [("shortfall", t, int(w)) for t in range(T)]
    A = sp.csc_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(m, n))
    return LpStandardForm(A, row_lo, row_hi, col_lo, col_hi, c, "max", row_labels, col_labels,
                          layout=(T, S, first))


def build_extensive_form(day: MarketDay, battery: BatteryContext, scenarios: ScenarioSet,
                         cap_shortfall: bool = False) -> LpStandardForm:
    """Extensive form with shared day-ahead columns and per-scenario recourse columns."""
    _check_dims(day, scenarios)
    return _assemble(day, battery, scenarios, range(scenarios.n_scenarios), None, cap_shortfall)


def build_scenario_lp(day: MarketDay, battery: BatteryContext, scenarios: ScenarioSet,
                      scenario: int, bid, cap_shortfall: bool = False) -> LpStandardForm:
    """Deterministic recourse LP of one scenario with the day-ahead bid moved to the rhs.

    The objective is the scenario's unweighted recourse revenue.
    """
    _check_dims(day, scenarios)
    p_da = as_bid(bid).p_da
    if p_da.size != day.horizon:
        raise DimensionMismatch(f"bid has length {p_da.size}, expected {day.horizon}")
    return _assemble(day, battery, scenarios, [scenario], p_da, cap_shortfall)


_CODE_STATUS = {simplex.OPTIMAL: Status.OPTIMAL, simplex.INFEASIBLE: Status.INFEASIBLE,
                simplex.UNBOUNDED: Status.UNBOUNDED}


def solve_lp(lp: LpStandardForm, options: SolverOptions = DEFAULT_OPTIONS) -> SolveReport:
    """Solve ``lp`` with the bundled revised simplex.

    Raises
    ------
    NumericalFailure
        If the basis becomes singular or the iteration limit is reached.
    """
    m, n = lp.A.shape
    A = lp.A
    A.sort_indices()
    sign = -1.0 if lp.sense == "max" else 1.0
    max_iter = options.max_iter or max(10000, 50 * (m + n))
    try:
        code, x, iters, _ = simplex.simplex_kernel(
            sign * lp.c, A.indptr.astype(np.int64), A.indices.astype(np.int64), A.data,
            m, n, lp.row_lo, lp.row_hi, lp.col_lo, lp.col_hi,
            options.feas_tol, options.opt_tol, options.piv_tol, max_iter, options.refactor_every)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailure(f"singular basis: {exc}") from exc
    if code == simplex.ITERATION_LIMIT:
        raise NumericalFailure(f"iteration limit {max_iter} reached")
    if code == simplex.SINGULAR:
        raise NumericalFailure("basis inverse lost finiteness")
    status = _CODE_STATUS[code]
    if status is not Status.OPTIMAL:
        return SolveReport(status, float("nan"), iterations=int(iters))
    viol = lp.violation(x)
    if viol > options.report_tol:
        raise NumericalFailure(f"solution violates constraints by {viol:.3g}")
    return SolveReport(status, float(lp.c @ x), iterations=int(iters),
                       max_constraint_violation=viol, x=x)
