"""Dense bounded-variable simplex.

Every row ``a.x (rel) b`` gets a slack column ``s`` with ``a.x + s = b``; the
relation is encoded in the slack bounds (``<=``: s >= 0, ``>=``: s <= 0,
``=``: s = 0).  Fresh solves start from the all-slack basis and run a
composite primal phase 1 (sum of infeasibilities) followed by primal phase 2.
:class:`LpState` keeps the basis between solves so that branch-and-cut can
re-optimize with the dual simplex after bound changes and cut additions.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

EPS_FEAS = 1e-7
EPS_PIVOT = 1e-9
EPS_DUAL = 1e-9
EPS_INT = 1e-6

INF = math.inf

_BASIC, _AT_LB, _AT_UB, _FREE = 0, 1, 2, 3


class NumericalBreakdown(RuntimeError):
    """Raised when the simplex cannot find an acceptable pivot."""


class UnknownHandle(KeyError):
    pass


class Relation(str, enum.Enum):
    LE = "<="
    EQ = "="
    GE = ">="


class LpStatus(str, enum.Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    UNBOUNDED = "Unbounded"


@dataclass
class Row:
    coeffs: dict[int, float]
    rel: Relation
    rhs: float

    def activity(self, x: Sequence[float]) -> float:
        return sum(a * x[j] for j, a in self.coeffs.items())

    def violation(self, x: Sequence[float]) -> float:
        """Amount by which ``x`` violates the row (0 when satisfied)."""
        act = self.activity(x)
        if self.rel is Relation.LE:
            return max(0.0, act - self.rhs)
        if self.rel is Relation.GE:
            return max(0.0, self.rhs - act)
        return abs(act - self.rhs)


def make_row(coeffs: Mapping[int, float], rel: Relation | str, rhs: float) -> Row:
    return Row({int(j): float(a) for j, a in coeffs.items() if a != 0.0}, Relation(rel), float(rhs))


@dataclass
class LinearProgram:
    """``min c.x`` over variable bounds and linear rows."""

    num_vars: int
    objective: list[float]
    lower: list[float]
    upper: list[float]
    rows: list[Row] = field(default_factory=list)

    @classmethod
    def nonneg(cls, objective: Sequence[float]) -> "LinearProgram":
        n = len(objective)
        return cls(n, [float(c) for c in objective], [0.0] * n, [INF] * n)

    def add_var(self, cost: float = 0.0, lb: float = 0.0, ub: float = INF) -> int:
        self.objective.append(float(cost))
        self.lower.append(float(lb))
        self.upper.append(float(ub))
        self.num_vars += 1
        return self.num_vars - 1

    def add_row(self, coeffs: Mapping[int, float], rel: Relation | str, rhs: float) -> int:
        self.rows.append(make_row(coeffs, rel, rhs))
        return len(self.rows) - 1

    def validate(self) -> None:
        n = self.num_vars
        if not (len(self.objective) == len(self.lower) == len(self.upper) == n):
            raise ValueError("objective/bounds length does not match num_vars")
        for j in range(n):
            if not math.isfinite(self.objective[j]):
                raise ValueError(f"objective coefficient of x{j} is not finite")
            if self.lower[j] > self.upper[j]:
                raise ValueError(f"lower > upper for x{j}")
        for i, row in enumerate(self.rows):
            for j in row.coeffs:
                if not 0 <= j < n:
                    raise ValueError(f"row {i} references unknown variable {j}")

    def copy(self) -> "LinearProgram":
        return LinearProgram(
            self.num_vars,
            list(self.objective),
            list(self.lower),
            list(self.upper),
            [Row(dict(r.coeffs), r.rel, r.rhs) for r in self.rows],
        )


@dataclass(frozen=True)
class LpSolution:
    status: LpStatus
    primal: np.ndarray
    duals: np.ndarray
    objective_value: float
    iterations: int = 0

    @property
    def optimal(self) -> bool:
        return self.status is LpStatus.OPTIMAL


def _slack_bounds(rel: Relation) -> tuple[float, float]:
    if rel is Relation.LE:
        return 0.0, INF
    if rel is Relation.GE:
        return -INF, 0.0
    return 0.0, 0.0


class _Simplex:
    """Column store plus basis for the bounded simplex.

    Columns ``0..n-1`` are structural, column ``n + i`` is the slack of row
    ``i``.  Rows are stored densely.
    """

    def __init__(self, lp: LinearProgram):
        lp.validate()
        self.n = lp.num_vars
        m = len(lp.rows)
        self.A = np.zeros((m, self.n + m))
        self.b = np.zeros(m)
        self.c = np.zeros(self.n + m)
        self.c[: self.n] = lp.objective
        self.lb = np.empty(self.n + m)
        self.ub = np.empty(self.n + m)
        self.lb[: self.n] = lp.lower
        self.ub[: self.n] = lp.upper
        for i, row in enumerate(lp.rows):
            for j, a in row.coeffs.items():
                self.A[i, j] = a
            self.A[i, self.n + i] = 1.0
            self.b[i] = row.rhs
            self.lb[self.n + i], self.ub[self.n + i] = _slack_bounds(row.rel)
        self.reset_basis()

    @property
    def m(self) -> int:
        return self.A.shape[0]

    # -- basis bookkeeping -------------------------------------------------
    def reset_basis(self) -> None:
        m, ncol = self.A.shape
        self.status = np.empty(ncol, dtype=np.int8)
        self.x = np.zeros(ncol)
        for j in range(self.n):
            self._place_nonbasic(j)
        self.basic = list(range(self.n, self.n + m))
        self.status[self.n :] = _BASIC
        self.Binv = np.eye(m)
        self.pivots_since_factor = 0
        self._compute_basics()

    def _place_nonbasic(self, j: int, prefer_upper: bool = False) -> None:
        lo, hi = self.lb[j], self.ub[j]
        if prefer_upper and hi < INF:
            self.status[j], self.x[j] = _AT_UB, hi
        elif lo > -INF:
            self.status[j], self.x[j] = _AT_LB, lo
        elif hi < INF:
            self.status[j], self.x[j] = _AT_UB, hi
        else:
            self.status[j], self.x[j] = _FREE, 0.0

    def refactor(self) -> None:
        try:
            self.Binv = np.linalg.inv(self.A[:, self.basic])
        except np.linalg.LinAlgError as exc:  # pragma: no cover - defensive
            raise NumericalBreakdown("singular basis") from exc
        if not np.all(np.isfinite(self.Binv)):
            raise NumericalBreakdown("singular basis")
        self.pivots_since_factor = 0

    def _compute_basics(self) -> None:
        xn = self.x.copy()
        xn[self.basic] = 0.0
        self.x[self.basic] = self.Binv @ (self.b - self.A @ xn)

    def _pivot(self, r: int, q: int, alpha_q: np.ndarray) -> None:
        piv = alpha_q[r]
        row_r = self.Binv[r] / piv
        self.Binv -= np.outer(alpha_q, row_r)
        self.Binv[r] = row_r
        self.basic[r] = q
        self.status[q] = _BASIC
        self.pivots_since_factor += 1
        if self.pivots_since_factor >= 64:
            self.refactor()

    def set_bounds(self, j: int, lo: float, hi: float) -> None:
        self.lb[j], self.ub[j] = lo, hi
        if self.status[j] != _BASIC:
            st = self.status[j]
            if st == _AT_UB and hi < INF:
                self.x[j] = hi
            elif st == _AT_LB and lo > -INF:
                self.x[j] = lo
            else:
                self._place_nonbasic(j, prefer_upper=st == _AT_UB)

    # -- row management ----------------------------------------------------
    def append_row(self, coeffs: Mapping[int, float], rel: Relation, rhs: float) -> None:
        m, ncol = self.A.shape
        new_row = np.zeros(ncol + 1)
        for j, a in coeffs.items():
            new_row[j] = a
        new_row[ncol] = 1.0
        self.A = np.vstack([np.hstack([self.A, np.zeros((m, 1))]), new_row])
        self.b = np.append(self.b, rhs)
        self.c = np.append(self.c, 0.0)
        lo, hi = _slack_bounds(rel)
        self.lb = np.append(self.lb, lo)
        self.ub = np.append(self.ub, hi)
        self.status = np.append(self.status, np.int8(_BASIC))
        # slack value makes the row hold with equality; it may violate its bounds
        self.x = np.append(self.x, rhs - float(new_row[:ncol] @ self.x))
        self.basic.append(ncol)
        # B' = [[B, 0], [a_B, 1]]  =>  B'^-1 = [[B^-1, 0], [-a_B B^-1, 1]]
        a_b = new_row[self.basic[:-1]]
        bottom = -(a_b @ self.Binv)
        self.Binv = np.block([[self.Binv, np.zeros((m, 1))], [bottom[None, :], np.ones((1, 1))]])

    def delete_row(self, i: int) -> None:
        """Remove row ``i`` together with its slack column."""
        col = self.n + i
        if self.status[col] != _BASIC:
            # bring the slack into the basis with any pivot on row i's structure
            alpha = self.Binv @ self.A[:, col]
            cand = [r for r in range(self.m) if abs(alpha[r]) > EPS_PIVOT]
            if not cand:
                raise NumericalBreakdown("cannot remove row")
            r = max(cand, key=lambda k: abs(alpha[k]))
            leaving = self.basic[r]
            self._pivot(r, col, alpha)
            self._place_nonbasic_from(leaving)
        keep_rows = [k for k in range(self.m) if k != i]
        keep_cols = [k for k in range(self.A.shape[1]) if k != col]
        old_basic = self.basic
        self.A = self.A[np.ix_(keep_rows, keep_cols)]
        self.b = self.b[keep_rows]
        self.c = self.c[keep_cols]
        self.lb = self.lb[keep_cols]
        self.ub = self.ub[keep_cols]
        self.status = self.status[keep_cols]
        self.x = self.x[keep_cols]
        self.basic = [k if k < col else k - 1 for k in old_basic if k != col]
        self.refactor()
        self._compute_basics()

    def _place_nonbasic_from(self, j: int) -> None:
        # leaving variable keeps its value only if it sits at a bound
        lo, hi = self.lb[j], self.ub[j]
        v = self.x[j]
        if lo > -INF and abs(v - lo) <= abs(v - hi if hi < INF else INF):
            self.status[j], self.x[j] = _AT_LB, lo
        elif hi < INF:
            self.status[j], self.x[j] = _AT_UB, hi
        else:
            self.status[j], self.x[j] = _FREE, 0.0 if lo == -INF else lo

    # -- pricing helpers ---------------------------------------------------
    def _nonbasic_mask(self) -> np.ndarray:
        return self.status != _BASIC

    def _reduced_costs(self, cost: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        y = cost[self.basic] @ self.Binv
        return y, cost - y @ self.A

    # -- primal simplex ----------------------------------------------------
    def primal(self, max_iter: int) -> tuple[LpStatus, int]:
        """Composite primal simplex from the current basis."""
        it = 0
        degenerate = 0
        bland_after = 50 * max(self.m, 1)
        while True:
            if it >= max_iter:
                raise NumericalBreakdown("simplex iteration limit reached")
            xb = self.x[self.basic]
            lo_b = self.lb[self.basic]
            hi_b = self.ub[self.basic]
            tol_b = EPS_FEAS * (1.0 + np.abs(xb))
            below = lo_b - xb > tol_b
            above = xb - hi_b > tol_b
            phase1 = bool(np.any(below | above))
            if phase1:
                cb = np.zeros(self.m)
                cb[below] = -1.0
                cb[above] = 1.0
                y = cb @ self.Binv
                d = -(y @ self.A)
            else:
                y, d = self._reduced_costs(self.c)
            d[~self._nonbasic_mask()] = 0.0
            st = self.status
            fixed = self.lb == self.ub
            improve_up = ((st == _AT_LB) | (st == _FREE)) & (d < -EPS_DUAL) & ~fixed
            improve_dn = ((st == _AT_UB) | (st == _FREE)) & (d > EPS_DUAL) & ~fixed
            cand = np.flatnonzero(improve_up | improve_dn)
            if cand.size == 0:
                if phase1:
                    return LpStatus.INFEASIBLE, it
                return LpStatus.OPTIMAL, it
            use_bland = degenerate >= bland_after
            if use_bland:
                q = int(cand[0])
            else:
                q = int(cand[np.argmax(np.abs(d[cand]))])
            direction = 1.0 if improve_up[q] else -1.0
            alpha = self.Binv @ self.A[:, q]
            rate = direction * alpha  # x_B decreases by t * rate
            t_best = self.ub[q] - self.lb[q]
            r_best = -1
            to_upper = False
            best_piv = 0.0
            for r in np.flatnonzero(np.abs(rate) > EPS_PIVOT):
                rr = rate[r]
                xr = xb[r]
                if rr > 0:
                    # decreasing basic var
                    if above[r]:
                        bound, up = hi_b[r], True
                    elif lo_b[r] > -INF and not below[r]:
                        bound, up = lo_b[r], False
                    else:
                        continue
                    t = (xr - bound) / rr
                else:
                    if below[r]:
                        bound, up = lo_b[r], False
                    elif hi_b[r] < INF and not above[r]:
                        bound, up = hi_b[r], True
                    else:
                        continue
                    t = (bound - xr) / (-rr)
                t = max(t, 0.0)
                if (
                    t < t_best - 1e-12
                    or (r_best >= 0 and abs(t - t_best) <= 1e-12 and (
                        (use_bland and self.basic[r] < self.basic[r_best])
                        or (not use_bland and abs(rr) > best_piv)
                    ))
                ):
                    t_best, r_best, to_upper, best_piv = t, int(r), up, abs(rr)
            if not math.isfinite(t_best):
                if phase1:  # pragma: no cover - phase 1 objective is bounded below
                    raise NumericalBreakdown("unbounded phase 1 ray")
                return LpStatus.UNBOUNDED, it
            degenerate = degenerate + 1 if t_best <= 1e-12 else 0
            step = direction * t_best
            self.x[q] += step
            self.x[self.basic] = xb - t_best * rate
            it += 1
            if r_best < 0:
                # bound flip of the entering variable
                self.status[q] = _AT_UB if direction > 0 else _AT_LB
                self.x[q] = self.ub[q] if direction > 0 else self.lb[q]
                continue
            leaving = self.basic[r_best]
            self._pivot(r_best, q, alpha)
            self.status[leaving] = _AT_UB if to_upper else _AT_LB
            self.x[leaving] = self.ub[leaving] if to_upper else self.lb[leaving]
            if self.pivots_since_factor == 0:
                self._compute_basics()

    # -- dual simplex ------------------------------------------------------
    def align_boxed(self) -> None:
        """Move boxed nonbasic columns to the bound their reduced cost favours."""
        _, d = self._reduced_costs(self.c)
        st = self.status
        boxed = (st != _BASIC) & np.isfinite(self.lb) & np.isfinite(self.ub) & (self.lb < self.ub)
        to_up = boxed & (st == _AT_LB) & (d < -EPS_DUAL)
        to_lo = boxed & (st == _AT_UB) & (d > EPS_DUAL)
        if np.any(to_up) or np.any(to_lo):
            st[to_up] = _AT_UB
            self.x[to_up] = self.ub[to_up]
            st[to_lo] = _AT_LB
            self.x[to_lo] = self.lb[to_lo]

    def dual_feasible(self) -> bool:
        _, d = self._reduced_costs(self.c)
        st = self.status
        fixed = self.lb == self.ub
        bad = (
            ((st == _AT_LB) & (d < -EPS_DUAL * 10))
            | ((st == _AT_UB) & (d > EPS_DUAL * 10))
            | ((st == _FREE) & (np.abs(d) > EPS_DUAL * 10))
        ) & ~fixed
        return not bool(np.any(bad))

    def dual(self, max_iter: int) -> tuple[LpStatus, int]:
        it = 0
        degenerate = 0
        bland_after = 50 * max(self.m, 1)
        _, d = self._reduced_costs(self.c)
        while True:
            if it >= max_iter:
                raise NumericalBreakdown("dual simplex iteration limit reached")
            xb = self.x[self.basic]
            lo_b = self.lb[self.basic]
            hi_b = self.ub[self.basic]
            tol_b = EPS_FEAS * (1.0 + np.abs(xb))
            viol_lo = lo_b - xb
            viol_hi = xb - hi_b
            viol = np.maximum(viol_lo, viol_hi)
            infeasible_rows = np.flatnonzero(viol > tol_b)
            if infeasible_rows.size == 0:
                return LpStatus.OPTIMAL, it
            use_bland = degenerate >= bland_after
            if use_bland:
                r = int(min(infeasible_rows, key=lambda k: self.basic[k]))
            else:
                r = int(infeasible_rows[np.argmax(viol[infeasible_rows])])
            increase = viol_lo[r] > viol_hi[r]
            alpha_r = self.Binv[r] @ self.A
            st = self.status
            movable = (st != _BASIC) & (self.lb != self.ub)
            if increase:
                ok = movable & (
                    (((st == _AT_LB) | (st == _FREE)) & (alpha_r < -EPS_PIVOT))
                    | (((st == _AT_UB) | (st == _FREE)) & (alpha_r > EPS_PIVOT))
                )
            else:
                ok = movable & (
                    (((st == _AT_LB) | (st == _FREE)) & (alpha_r > EPS_PIVOT))
                    | (((st == _AT_UB) | (st == _FREE)) & (alpha_r < -EPS_PIVOT))
                )
            cand = np.flatnonzero(ok)
            if cand.size == 0:
                return LpStatus.INFEASIBLE, it
            ratios = np.abs(d[cand]) / np.abs(alpha_r[cand])
            t_min = float(ratios.min())
            near = cand[ratios <= t_min + 1e-12]
            if use_bland:
                q = int(near.min())
            else:
                q = int(near[np.argmax(np.abs(alpha_r[near]))])
            degenerate = degenerate + 1 if t_min <= 1e-12 else 0
            alpha_q = self.Binv @ self.A[:, q]
            leaving = self.basic[r]
            target = self.lb[leaving] if increase else self.ub[leaving]
            step = (xb[r] - target) / alpha_q[r]
            self.x[self.basic] = xb - step * alpha_q
            self.x[q] += step
            d = d - (d[q] / alpha_r[q]) * alpha_r
            self._pivot(r, q, alpha_q)
            self.status[leaving] = _AT_LB if increase else _AT_UB
            self.x[leaving] = target
            d[q] = 0.0
            if self.pivots_since_factor == 0:
                self._compute_basics()
                _, d = self._reduced_costs(self.c)
            it += 1

    # -- results -----------------------------------------------------------
    def solution(self, status: LpStatus, iterations: int) -> LpSolution:
        x = self.x[: self.n].copy()
        if status is LpStatus.OPTIMAL:
            y = self.c[self.basic] @ self.Binv
            obj = float(self.c[: self.n] @ x)
        else:
            y = np.zeros(self.m)
            obj = INF if status is LpStatus.INFEASIBLE else -INF
        x.setflags(write=False)
        y.setflags(write=False)
        return LpSolution(status, x, y, obj, iterations)


def _max_iter(s: _Simplex) -> int:
    return 2000 + 100 * (s.m + s.A.shape[1])


def solve_lp(lp: LinearProgram) -> LpSolution:
    """Solve ``lp`` from the slack basis."""
    simplex = _Simplex(lp)
    status, it = simplex.primal(_max_iter(simplex))
    return simplex.solution(status, it)


class LpState:
    """A linear program whose rows and bounds can be edited between solves.

    ``solve()`` re-optimizes from scratch by default; ``solve(warm=True)``
    starts from the basis left behind by the previous solve (dual simplex
    when that basis is dual feasible, composite primal otherwise).
    """

    def __init__(self, lp: LinearProgram):
        self._base = lp.copy()
        self._base.validate()
        self._simplex = _Simplex(self._base)
        self._handles: list[int] = list(range(len(lp.rows)))
        self._next_handle = len(lp.rows)
        self._rows: dict[int, Row] = {h: r for h, r in zip(self._handles, self._base.rows)}
        self.last: LpSolution | None = None

    @property
    def num_vars(self) -> int:
        return self._base.num_vars

    @property
    def num_rows(self) -> int:
        return len(self._handles)

    def handles(self) -> list[int]:
        return list(self._handles)

    def row(self, handle: int) -> Row:
        try:
            return self._rows[handle]
        except KeyError:
            raise UnknownHandle(handle) from None

    def add_row(self, row: Row) -> int:
        for j in row.coeffs:
            if not 0 <= j < self.num_vars:
                raise ValueError(f"row references unknown variable {j}")
        h = self._next_handle
        self._next_handle += 1
        self._handles.append(h)
        self._rows[h] = row
        self._simplex.append_row(row.coeffs, row.rel, row.rhs)
        return h

    def remove_row(self, handle: int) -> None:
        if handle not in self._rows:
            raise UnknownHandle(handle)
        i = self._handles.index(handle)
        self._simplex.delete_row(i)
        self._handles.pop(i)
        del self._rows[handle]

    def set_bounds(self, j: int, lo: float, hi: float) -> None:
        if lo > hi:
            raise ValueError("lower bound exceeds upper bound")
        self._simplex.set_bounds(j, float(lo), float(hi))

    def bounds(self, j: int) -> tuple[float, float]:
        return float(self._simplex.lb[j]), float(self._simplex.ub[j])

    def slack(self, handle: int) -> float:
        """Current value of the row's slack column (``rhs - activity``)."""
        i = self._handles.index(handle)
        return float(self._simplex.x[self._simplex.n + i])

    def to_lp(self) -> LinearProgram:
        s = self._simplex
        return LinearProgram(
            s.n,
            list(self._base.objective),
            [float(v) for v in s.lb[: s.n]],
            [float(v) for v in s.ub[: s.n]],
            [Row(dict(self._rows[h].coeffs), self._rows[h].rel, self._rows[h].rhs) for h in self._handles],
        )

    def solve(self, warm: bool = False) -> LpSolution:
        s = self._simplex
        if not warm:
            s.reset_basis()
            status, it = s.primal(_max_iter(s))
        else:
            s.align_boxed()
            s._compute_basics()
            if s.dual_feasible():
                status, it = s.dual(_max_iter(s))
            else:
                status, it = s.primal(_max_iter(s))
        self.last = s.solution(status, it)
        return self.last
