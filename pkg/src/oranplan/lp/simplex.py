"""Bounded-variable revised simplex with dual values and Farkas certificates.

Design notes, kept deliberately explicit because this solve backs every other
module:

* Each row ``a'x (sense) b`` gets one slack column: "<=" slack in [0, inf),
  ">=" slack in (-inf, 0], "=" slack fixed at 0, so the working system is
  always ``A x + s = b`` with box bounds on everything.
* Phase 1 starts from a crash basis (slack basic wherever the slack value is
  inside its bounds, a signed artificial otherwise) and minimizes the total
  artificial mass. A strictly positive phase-1 optimum certifies
  infeasibility and its simplex multipliers are the Farkas ray.
* Pricing is Dantzig (most negative reduced cost, ties broken by lowest
  column index); after a long run of degenerate steps the rule switches to
  Bland's to guarantee termination. All tie-breaking is deterministic, so
  identical models produce bit-identical outcomes.
* The basis inverse is kept explicitly and refactorized on a fixed cadence,
  plus once more before any status is reported.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .linmodel import EQ, GE, LE, BINARY, LinearModel, LpOutcome, LpStatus

_FEAS_TOL = 1e-7          # phase-1 mass above this certifies infeasibility
_PIVOT_TOL = 1e-9
_PIVOT_STRONG = 1e-7      # preferred minimum pivot magnitude in the ratio test
_DJ_TOL = 1e-9
_TIE_TOL = 1e-9
_DEGENERATE_STREAK = 60   # consecutive zero-steps before Bland's rule
_REFACTOR_EVERY = 64

_BASIC, _AT_LB, _AT_UB, _FREE = 0, 1, 2, 3


class LpNumericalError(RuntimeError):
    pass


@dataclass
class _Tableau:
    """Working state of one solve over structural + slack + artificial cols."""

    A: np.ndarray            # structural columns only, m x n
    b: np.ndarray
    lb: np.ndarray           # length n + m + n_art
    ub: np.ndarray
    n: int                   # structural count
    m: int                   # row count
    art_rows: list[int]      # row of each artificial column
    art_signs: np.ndarray    # +1 / -1 per artificial column
    basis: np.ndarray        # length m, column index per row
    status: np.ndarray       # per column
    binv: np.ndarray
    xb: np.ndarray

    @property
    def n_cols(self) -> int:
        return self.n + self.m + len(self.art_rows)

    def column(self, j: int) -> np.ndarray:
        if j < self.n:
            return self.A[:, j]
        col = np.zeros(self.m)
        if j < self.n + self.m:
            col[j - self.n] = 1.0
        else:
            k = j - self.n - self.m
            col[self.art_rows[k]] = self.art_signs[k]
        return col

    def price(self, y: np.ndarray) -> np.ndarray:
        """y' applied to every column at once."""
        out = np.empty(self.n_cols)
        out[: self.n] = y @ self.A
        out[self.n : self.n + self.m] = y
        if self.art_rows:
            out[self.n + self.m :] = y[self.art_rows] * self.art_signs
        return out

    def ftran(self, j: int) -> np.ndarray:
        if j < self.n:
            return self.binv @ self.A[:, j]
        if j < self.n + self.m:
            return self.binv[:, j - self.n].copy()
        k = j - self.n - self.m
        return self.art_signs[k] * self.binv[:, self.art_rows[k]]

    def nonbasic_values(self) -> np.ndarray:
        vals = np.where(self.status == _AT_UB, self.ub, np.where(self.status == _AT_LB, self.lb, 0.0))
        vals[self.status == _BASIC] = 0.0
        return vals

    def refactor(self) -> None:
        B = np.empty((self.m, self.m))
        for i, j in enumerate(self.basis):
            B[:, i] = self.column(j)
        try:
            self.binv = np.linalg.inv(B)
        except np.linalg.LinAlgError as exc:  # basis should never be singular
            raise LpNumericalError("singular basis") from exc
        vals = self.nonbasic_values()
        rhs = self.b - self.A @ vals[: self.n] - vals[self.n : self.n + self.m]
        for k, row in enumerate(self.art_rows):
            rhs[row] -= self.art_signs[k] * vals[self.n + self.m + k]
        self.xb = self.binv @ rhs

    def point(self) -> np.ndarray:
        vals = self.nonbasic_values()
        vals[self.basis] = self.xb
        return vals


def _slack_bounds(sense: str) -> tuple[float, float]:
    if sense == LE:
        return 0.0, math.inf
    if sense == GE:
        return -math.inf, 0.0
    return 0.0, 0.0


def _build_tableau(A: np.ndarray, b: np.ndarray, senses: list[str], lb: np.ndarray, ub: np.ndarray) -> _Tableau:
    m, n = A.shape
    slb = np.array([_slack_bounds(s)[0] for s in senses])
    sub = np.array([_slack_bounds(s)[1] for s in senses])
    full_lb = np.concatenate([lb, slb])
    full_ub = np.concatenate([ub, sub])

    status = np.empty(n + m, dtype=np.int8)
    for j in range(n + m):
        if np.isfinite(full_lb[j]):
            status[j] = _AT_LB
        elif np.isfinite(full_ub[j]):
            status[j] = _AT_UB
        else:
            status[j] = _FREE

    start = np.where(status == _AT_UB, full_ub, np.where(status == _AT_LB, full_lb, 0.0))
    resid = b - A @ start[:n]

    basis = np.empty(m, dtype=np.int64)
    art_rows: list[int] = []
    art_signs: list[float] = []
    xb = np.empty(m)
    for i in range(m):
        if slb[i] - 1e-12 <= resid[i] <= sub[i] + 1e-12:
            basis[i] = n + i
            status[n + i] = _BASIC
            xb[i] = resid[i]
        else:
            # slack pinned at its nearest bound, signed artificial absorbs the rest
            pinned = min(max(resid[i], slb[i]), sub[i])
            status[n + i] = _AT_UB if pinned == sub[i] and np.isfinite(sub[i]) else _AT_LB
            gap = resid[i] - pinned
            art_rows.append(i)
            art_signs.append(1.0 if gap >= 0 else -1.0)
            basis[i] = n + m + len(art_rows) - 1
            xb[i] = abs(gap)

    n_art = len(art_rows)
    # the crash basis is diagonal (slack +1 or signed artificial), so its
    # inverse needs no factorization
    binv = np.eye(m)
    for k, row in enumerate(art_rows):
        binv[row, row] = art_signs[k]
    tab = _Tableau(
        A=A,
        b=b,
        lb=np.concatenate([full_lb, np.zeros(n_art)]),
        ub=np.concatenate([full_ub, np.full(n_art, math.inf)]),
        n=n,
        m=m,
        art_rows=art_rows,
        art_signs=np.array(art_signs),
        basis=basis,
        status=np.concatenate([status, np.full(n_art, _AT_LB, dtype=np.int8)]),
        binv=binv,
        xb=xb,
    )
    for k in range(n_art):
        tab.status[n + m + k] = _BASIC
    return tab


def _iterate(tab: _Tableau, costs: np.ndarray, max_iter: int, phase_one: bool) -> tuple[str, int]:
    """Run simplex iterations until optimal/unbounded/limit for given costs."""
    fixed = tab.lb == tab.ub
    bland = False
    streak = 0
    it = 0
    while True:
        if it and it % _REFACTOR_EVERY == 0:
            tab.refactor()
        y = costs[tab.basis] @ tab.binv
        d = costs - tab.price(y)

        at_lb = (tab.status == _AT_LB) & ~fixed
        at_ub = (tab.status == _AT_UB) & ~fixed
        free = tab.status == _FREE
        can_up = (at_lb | free) & (d < -_DJ_TOL)
        can_dn = (at_ub | free) & (d > _DJ_TOL)
        eligible = can_up | can_dn
        if not phase_one:
            eligible[tab.n + tab.m :] = False
        if not eligible.any():
            return "optimal", it
        if bland:
            j = int(np.flatnonzero(eligible)[0])
        else:
            score = np.where(eligible, -np.abs(d), 0.0)
            j = int(np.argmin(score))  # argmin takes the lowest index on ties
        sigma = 1.0 if d[j] < 0 else -1.0

        w = tab.ftran(j)
        step = sigma * w
        t_own = tab.ub[j] - tab.lb[j] if np.isfinite(tab.ub[j]) and np.isfinite(tab.lb[j]) else math.inf
        lbb = tab.lb[tab.basis]
        ubb = tab.ub[tab.basis]
        t_rows = np.full(tab.m, math.inf)
        # strong pivots first; fall back to small ones only if nothing blocks
        for pivot_floor in (_PIVOT_STRONG, _PIVOT_TOL):
            dn = (step > pivot_floor) & np.isfinite(lbb)
            up = (step < -pivot_floor) & np.isfinite(ubb)
            if dn.any() or up.any():
                t_rows[dn] = (tab.xb[dn] - lbb[dn]) / step[dn]
                t_rows[up] = (ubb[up] - tab.xb[up]) / (-step[up])
                np.maximum(t_rows, 0.0, out=t_rows)
                break
        t_min = t_rows.min() if tab.m else math.inf
        if not np.isfinite(min(t_min, t_own)):
            return "unbounded", it
        if t_min <= t_own:  # a pivot beats a bound flip on ties
            t_best = t_min
            # tie set measured in bound-violation units: stepping t_min may
            # leave a tied row short of its bound by at most _TIE_TOL
            with np.errstate(invalid="ignore"):
                over = (t_rows - t_min) * np.abs(w)
            ties = np.flatnonzero((t_rows < math.inf) & (over <= _TIE_TOL))
            if bland:
                leave = int(ties[np.argmin(tab.basis[ties])])
            else:
                # stability: largest pivot magnitude among ties, then lowest var
                mags = np.abs(w[ties])
                best_mag = mags.max()
                close = ties[mags >= 0.5 * best_mag]
                leave = int(close[np.argmin(tab.basis[close])])
        else:
            leave = -1
            t_best = t_own

        entering_from = tab.lb[j] if tab.status[j] == _AT_LB else (tab.ub[j] if tab.status[j] == _AT_UB else 0.0)
        tab.xb = tab.xb - t_best * step
        if leave < 0:
            tab.status[j] = _AT_UB if tab.status[j] == _AT_LB else _AT_LB
        else:
            out_var = tab.basis[leave]
            if step[leave] > 0:
                tab.status[out_var] = _AT_LB
            else:
                tab.status[out_var] = _AT_UB if np.isfinite(tab.ub[out_var]) else _AT_LB
            tab.basis[leave] = j
            tab.status[j] = _BASIC
            tab.xb[leave] = entering_from + sigma * t_best
            # product-form update of the explicit inverse
            piv = w[leave]
            row = tab.binv[leave] / piv
            w_masked = w.copy()
            w_masked[leave] = 0.0
            tab.binv -= np.outer(w_masked, row)
            tab.binv[leave] = row

        streak = streak + 1 if t_best <= 1e-11 else 0
        if streak > _DEGENERATE_STREAK:
            bland = True
        it += 1
        if it >= max_iter:
            return "iteration_limit", it


def _purge_artificials(tab: _Tableau, feas_tol: float) -> None:
    """Pivot zero-valued basic artificials out where a real column allows it."""
    for i in range(tab.m):
        j = tab.basis[i]
        if j < tab.n + tab.m:
            continue
        if abs(tab.xb[i]) > feas_tol:
            continue
        row = tab.binv[i]
        alphas = np.empty(tab.n + tab.m)
        alphas[: tab.n] = row @ tab.A
        alphas[tab.n :] = row
        for cand in range(tab.n + tab.m):
            if tab.status[cand] == _BASIC or abs(alphas[cand]) <= 1e-7:
                continue
            w = tab.ftran(cand)
            entering_from = tab.lb[cand] if tab.status[cand] == _AT_LB else (
                tab.ub[cand] if tab.status[cand] == _AT_UB else 0.0
            )
            tab.status[j] = _AT_LB
            tab.basis[i] = cand
            tab.status[cand] = _BASIC
            piv = w[i]
            new_row = tab.binv[i] / piv
            w_masked = w.copy()
            w_masked[i] = 0.0
            tab.binv -= np.outer(w_masked, new_row)
            tab.binv[i] = new_row
            tab.xb[i] = entering_from
            break


def _farkas_from_phase1(tab: _Tableau, y: np.ndarray, senses: list[str], b: np.ndarray) -> tuple[np.ndarray, float]:
    """Orient phase-1 multipliers into a per-row certificate and its margin.

    The exported ray has nonnegative weights on inequality rows, each row
    read in its stated direction ("<=" rows enter negated). The margin is
    ray.b_oriented minus the supremum of the aggregated left side over the
    variable box; a strictly positive margin certifies infeasibility.
    """
    ray = y.copy()
    for i, s in enumerate(senses):
        if s == LE:
            ray[i] = -y[i]
    ray[np.abs(ray) < 1e-12] = 0.0
    agg = y @ tab.A  # orientation signs cancel between ray and row negation
    agg[np.abs(agg) < 1e-11] = 0.0
    sup = 0.0
    lb, ub = tab.lb[: tab.n], tab.ub[: tab.n]
    for j in range(tab.n):
        if agg[j] > 0:
            sup += agg[j] * ub[j] if np.isfinite(ub[j]) else math.inf
        elif agg[j] < 0:
            sup += agg[j] * lb[j] if np.isfinite(lb[j]) else math.inf
    margin = float(y @ b - sup)
    return ray, margin


def solve_lp(model: LinearModel, max_iterations: int | None = None) -> LpOutcome:
    """Solve a continuous model; binaries are rejected by contract."""
    if any(v.kind == BINARY for v in model.variables):
        raise ValueError("solve_lp accepts only continuous variables; relax() first")
    if model.n_variables == 0:
        raise ValueError("model has no variables")
    c, A, b, senses, lb, ub = model.dense()
    return solve_lp_arrays(c, A, b, senses, lb, ub, max_iterations)


def solve_lp_arrays(
    c: np.ndarray,
    A: np.ndarray,
    b: np.ndarray,
    senses: list[str],
    lb: np.ndarray,
    ub: np.ndarray,
    max_iterations: int | None = None,
) -> LpOutcome:
    """Array-level entry point (shared with branch and bound node solves)."""
    m, n = A.shape
    if max_iterations is None:
        max_iterations = 20000 + 200 * (m + n)

    tab = _build_tableau(A, b, senses, lb, ub)
    iters = 0

    if tab.art_rows:
        c1 = np.zeros(tab.n_cols)
        c1[tab.n + tab.m :] = 1.0
        verdict, it1 = _iterate(tab, c1, max_iterations, phase_one=True)
        iters += it1
        if verdict != "optimal":
            return LpOutcome(status=LpStatus.ITERATION_LIMIT, iterations=iters)
        tab.refactor()
        mass = float(np.sum(tab.xb[np.flatnonzero(tab.basis >= tab.n + tab.m)]))
        if mass > _FEAS_TOL:
            y = c1[tab.basis] @ tab.binv
            ray, margin = _farkas_from_phase1(tab, y, senses, b)
            if margin < _FEAS_TOL / 10:
                return LpOutcome(status=LpStatus.ITERATION_LIMIT, iterations=iters)
            return LpOutcome(status=LpStatus.INFEASIBLE, farkas=ray, iterations=iters)
        _purge_artificials(tab, _FEAS_TOL)
        tab.lb[tab.n + tab.m :] = 0.0
        tab.ub[tab.n + tab.m :] = 0.0

    c2 = np.zeros(tab.n_cols)
    c2[:n] = c
    verdict, it2 = _iterate(tab, c2, max_iterations, phase_one=False)
    iters += it2
    if verdict == "iteration_limit":
        return LpOutcome(status=LpStatus.ITERATION_LIMIT, iterations=iters)
    if verdict == "unbounded":
        return LpOutcome(status=LpStatus.UNBOUNDED, iterations=iters)

    tab.refactor()
    x_full = tab.point()
    x = x_full[:n]
    y = c2[tab.basis] @ tab.binv
    dj = c - y @ tab.A
    return LpOutcome(
        status=LpStatus.OPTIMAL,
        objective=float(c @ x),
        primal=x,
        duals=y.copy(),
        reduced_costs=dj,
        iterations=iters,
    )
