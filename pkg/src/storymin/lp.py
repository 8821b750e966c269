"""LP relaxation backends: a bundled dense revised simplex and a scipy wrapper.

Both backends hold a problem of the form

    minimize c.x   subject to   A x <= b,   l <= x <= u

with incrementally added/removed rows (cutting planes) and adjustable bounds
(branching).  ``solve`` reports status, objective, primal point, row duals,
and row slacks.  Backends agree to 1e-6 on the corpus; the bundled simplex
exists so the package has no hard solver dependency beyond numpy, and the
scipy backend (HiGHS) provides an independent route for cross-checks and a
faster option on large instances.

The bundled simplex is a bounded-variable two-phase revised simplex with an
explicit basis inverse, product-form updates, periodic refactorization, and
Dantzig pricing that falls back to Bland's rule after a run of degenerate
pivots (anti-cycling).  On numerical trouble it restarts once with Bland's
rule from scratch before reporting failure.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Protocol

import numpy as np

__all__ = [
    "OPTIMAL",
    "INFEASIBLE",
    "UNBOUNDED",
    "NUMERICAL",
    "LpResult",
    "RelaxationBackend",
    "SimplexBackend",
    "ScipyBackend",
]

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
NUMERICAL = "numerical"

_FEAS_TOL = 1e-7
_PIVOT_TOL = 1e-9
_REFACTOR_EVERY = 100
_DEGENERATE_LIMIT = 40


@dataclass
class LpResult:
    status: str
    objective: float = float("nan")
    x: np.ndarray | None = None
    duals: dict[int, float] | None = None
    slacks: dict[int, float] | None = None


class RelaxationBackend(Protocol):
    """What the branch-and-cut loop needs from an LP solver."""

    def load(self, costs: Iterable[float], lower: Iterable[float], upper: Iterable[float]) -> None: ...

    def set_bounds(self, var: int, lo: float, hi: float) -> None: ...

    def get_bounds(self, var: int) -> tuple[float, float]: ...

    def add_rows(self, rows: Iterable[tuple[dict[int, float], float]]) -> list[int]: ...

    def remove_rows(self, row_ids: Iterable[int]) -> None: ...

    def row_count(self) -> int: ...

    def solve(self) -> LpResult: ...


@dataclass
class _Rows:
    """Insertion-ordered row store shared by both backends."""

    next_id: int = 0
    rows: dict[int, tuple[dict[int, float], float]] = field(default_factory=dict)

    def add(self, rows: Iterable[tuple[dict[int, float], float]]) -> list[int]:
        ids = []
        for coefs, rhs in rows:
            rid = self.next_id
            self.next_id += 1
            self.rows[rid] = (dict(coefs), float(rhs))
            ids.append(rid)
        return ids

    def remove(self, row_ids: Iterable[int]) -> None:
        for rid in row_ids:
            del self.rows[rid]

    def matrix(self, n: int) -> tuple[list[int], np.ndarray, np.ndarray]:
        ids = list(self.rows)
        a = np.zeros((len(ids), n), dtype=float)
        b = np.empty(len(ids), dtype=float)
        for k, rid in enumerate(ids):
            coefs, rhs = self.rows[rid]
            for j, w in coefs.items():
                a[k, j] = w
            b[k] = rhs
        return ids, a, b


class _BaseBackend:
    def __init__(self) -> None:
        self.c = np.zeros(0)
        self.lo = np.zeros(0)
        self.hi = np.zeros(0)
        self._rows = _Rows()

    def load(self, costs, lower, upper) -> None:
        self.c = np.asarray(list(costs), dtype=float)
        self.lo = np.asarray(list(lower), dtype=float)
        self.hi = np.asarray(list(upper), dtype=float)
        if not (len(self.c) == len(self.lo) == len(self.hi)):
            raise ValueError("costs/lower/upper length mismatch")
        if np.any(self.lo > self.hi):
            raise ValueError("lower bound exceeds upper bound")
        self._rows = _Rows()

    def set_bounds(self, var: int, lo: float, hi: float) -> None:
        if lo > hi:
            raise ValueError(f"bad bounds for var {var}: [{lo}, {hi}]")
        self.lo[var] = lo
        self.hi[var] = hi

    def get_bounds(self, var: int) -> tuple[float, float]:
        return float(self.lo[var]), float(self.hi[var])

    def add_rows(self, rows) -> list[int]:
        n = len(self.c)
        checked = []
        for coefs, rhs in rows:
            for j in coefs:
                if not (0 <= j < n):
                    raise ValueError(f"row references unknown variable {j}")
            checked.append((coefs, rhs))
        return self._rows.add(checked)

    def remove_rows(self, row_ids) -> None:
        self._rows.remove(row_ids)

    def row_count(self) -> int:
        return len(self._rows.rows)


class SimplexBackend(_BaseBackend):
    """Self-contained dense simplex; see module docstring for the algorithm."""

    def __init__(self, max_iterations: int | None = None):
        super().__init__()
        self.max_iterations = max_iterations

    def solve(self) -> LpResult:
        ids, a, b = self._rows.matrix(len(self.c))
        res = _simplex(self.c, a, b, self.lo, self.hi, bland=False,
                       max_iterations=self.max_iterations)
        if res.status == NUMERICAL:
            res = _simplex(self.c, a, b, self.lo, self.hi, bland=True,
                           max_iterations=self.max_iterations)
        if res.status == OPTIMAL and ids:
            activity = a @ res.x
            res.slacks = {rid: float(b[k] - activity[k]) for k, rid in enumerate(ids)}
            res.duals = {rid: res.duals[k] for k, rid in enumerate(ids)}  # type: ignore[index]
        elif res.status == OPTIMAL:
            res.slacks = {}
            res.duals = {}
        return res


class ScipyBackend(_BaseBackend):
    """scipy.optimize.linprog (HiGHS) behind the same interface."""

    def solve(self) -> LpResult:
        from scipy.optimize import linprog

        ids, a, b = self._rows.matrix(len(self.c))
        bounds = list(zip(self.lo, self.hi))
        kwargs = {}
        if len(ids):
            kwargs = {"A_ub": a, "b_ub": b}
        res = linprog(self.c, bounds=bounds, method="highs", **kwargs)
        if res.status == 2:
            return LpResult(INFEASIBLE)
        if res.status == 3:
            return LpResult(UNBOUNDED)
        if res.status != 0 or res.x is None:
            return LpResult(NUMERICAL)
        duals: dict[int, float] = {}
        slacks: dict[int, float] = {}
        if len(ids):
            marginals = res.ineqlin.marginals
            slack = res.slack
            for k, rid in enumerate(ids):
                duals[rid] = float(marginals[k])
                slacks[rid] = float(slack[k])
        return LpResult(OPTIMAL, float(res.fun), np.asarray(res.x, dtype=float), duals, slacks)


# ---------------------------------------------------------------------------
# bundled simplex core
# ---------------------------------------------------------------------------

_AT_LOWER = 0
_AT_UPPER = 1
_BASIC = 2
_FREE = 3


def _simplex(c, a, b, lo, hi, bland: bool, max_iterations: int | None) -> LpResult:
    m, n = a.shape
    if m == 0:
        return _solve_bounds_only(c, lo, hi)

    # variables: n structurals, m slacks, then phase-1 artificials as needed
    y0 = b - a @ _initial_point(c, lo, hi)
    neg = y0 < -_FEAS_TOL
    k = int(np.count_nonzero(neg))
    ntot = n + m + k

    cols = np.zeros((m, ntot), dtype=float)
    cols[:, :n] = a
    cols[:, n:n + m] = np.eye(m)
    art_of_row = {}
    ai = n + m
    for i in np.nonzero(neg)[0]:
        cols[i, ai] = -1.0
        art_of_row[int(i)] = ai
        ai += 1

    full_lo = np.concatenate([lo, np.zeros(m + k)])
    full_hi = np.concatenate([hi, np.full(m + k, np.inf)])
    xval = np.concatenate([_initial_point(c, lo, hi), np.zeros(m + k)])
    stat = np.empty(ntot, dtype=np.int8)
    for j in range(n):
        if np.isfinite(lo[j]):
            stat[j] = _AT_LOWER
        elif np.isfinite(hi[j]):
            stat[j] = _AT_UPPER
        else:
            stat[j] = _FREE
    stat[n:] = _AT_LOWER

    basis = np.empty(m, dtype=np.int64)
    for i in range(m):
        if neg[i]:
            basis[i] = art_of_row[i]
            xval[basis[i]] = -y0[i]
        else:
            basis[i] = n + i
            xval[basis[i]] = y0[i]
    stat[basis] = _BASIC

    if max_iterations is None:
        max_iterations = 200 * (n + m) + 10_000

    state = _SimplexState(cols, b, full_lo, full_hi, xval, stat, basis, bland, max_iterations)

    if k > 0:
        phase1_cost = np.zeros(ntot)
        phase1_cost[n + m:] = 1.0
        status = state.run(phase1_cost)
        if status != OPTIMAL:
            return LpResult(NUMERICAL if status == NUMERICAL else status)
        if phase1_cost @ state.xval > 1e-6:
            return LpResult(INFEASIBLE)
        # pin artificials at zero; they never re-enter (fixed vars are skipped)
        state.lo[n + m:] = 0.0
        state.hi[n + m:] = 0.0
        state.xval[n + m:] = np.where(state.stat[n + m:] == _BASIC, state.xval[n + m:], 0.0)

    cost = np.concatenate([c, np.zeros(m + k)])
    status = state.run(cost)
    if status != OPTIMAL:
        return LpResult(status)

    x = state.xval[:n].copy()
    resid = a @ x - b
    if np.any(resid > 1e-6) or np.any(x < lo - 1e-6) or np.any(x > hi + 1e-6):
        return LpResult(NUMERICAL)
    duals = state.duals(cost)
    return LpResult(OPTIMAL, float(c @ x), x, {i: float(duals[i]) for i in range(m)}, None)


def _initial_point(c, lo, hi) -> np.ndarray:
    x = np.where(np.isfinite(lo), lo, np.where(np.isfinite(hi), hi, 0.0))
    return x.astype(float)


def _solve_bounds_only(c, lo, hi) -> LpResult:
    x = np.where(c > 0, lo, np.where(c < 0, hi, np.where(np.isfinite(lo), lo, 0.0)))
    if np.any(~np.isfinite(x)):
        return LpResult(UNBOUNDED)
    return LpResult(OPTIMAL, float(c @ x), x.astype(float), {}, {})


class _SimplexState:
    def __init__(self, cols, b, lo, hi, xval, stat, basis, bland, max_iterations):
        self.cols = cols
        self.b = b
        self.lo = lo
        self.hi = hi
        self.xval = xval
        self.stat = stat
        self.basis = basis
        self.bland_always = bland
        self.max_iterations = max_iterations
        self.m = len(b)
        self.binv = None
        self.pivots_since_refactor = 0

    def refactor(self) -> bool:
        try:
            self.binv = np.linalg.inv(self.cols[:, self.basis])
        except np.linalg.LinAlgError:
            return False
        self.pivots_since_refactor = 0
        # recompute basic values from the nonbasic point for consistency
        xnb = self.xval.copy()
        xnb[self.basis] = 0.0
        xb = self.binv @ (self.b - self.cols @ xnb)
        self.xval[self.basis] = xb
        return True

    def duals(self, cost) -> np.ndarray:
        return cost[self.basis] @ self.binv

    def run(self, cost) -> str:
        if not self.refactor():
            return NUMERICAL
        bland = self.bland_always
        degenerate_run = 0
        fixed = self.lo == self.hi
        for _ in range(self.max_iterations):
            if self.pivots_since_refactor >= _REFACTOR_EVERY:
                if not self.refactor():
                    return NUMERICAL
            y = cost[self.basis] @ self.binv
            d = cost - y @ self.cols
            cand = np.where(
                ((self.stat == _AT_LOWER) & (d < -_FEAS_TOL))
                | ((self.stat == _AT_UPPER) & (d > _FEAS_TOL))
                | ((self.stat == _FREE) & (np.abs(d) > _FEAS_TOL))
            )[0]
            cand = cand[~fixed[cand]]
            if cand.size == 0:
                return OPTIMAL
            if bland:
                e = int(cand[0])
            else:
                e = int(cand[np.argmax(np.abs(d[cand]))])
            sigma = 1.0 if (self.stat[e] == _AT_LOWER or (self.stat[e] == _FREE and d[e] < 0)) else -1.0

            w = self.binv @ self.cols[:, e]
            deltas = sigma * w
            xb = self.xval[self.basis]
            lo_b = self.lo[self.basis]
            hi_b = self.hi[self.basis]

            t_bound = self.hi[e] - self.lo[e] if self.stat[e] in (_AT_LOWER, _AT_UPPER) else np.inf
            with np.errstate(divide="ignore", invalid="ignore"):
                t_low = np.where(deltas > _PIVOT_TOL, (xb - lo_b) / deltas, np.inf)
                t_hi = np.where(deltas < -_PIVOT_TOL, (hi_b - xb) / (-deltas), np.inf)
            t_rows = np.minimum(np.nan_to_num(t_low, nan=np.inf, posinf=np.inf),
                                np.nan_to_num(t_hi, nan=np.inf, posinf=np.inf))
            t_rows = np.maximum(t_rows, 0.0)
            t_min_rows = float(np.min(t_rows)) if self.m else np.inf
            t = min(t_bound, t_min_rows)
            if not np.isfinite(t):
                return UNBOUNDED

            if t >= t_bound - 1e-12 and t_bound <= t_min_rows:
                # entering variable flips to its other bound; basis unchanged
                self.xval[self.basis] = xb - deltas * t_bound
                self.xval[e] = self.hi[e] if self.stat[e] == _AT_LOWER else self.lo[e]
                self.stat[e] = _AT_UPPER if self.stat[e] == _AT_LOWER else _AT_LOWER
                degenerate_run = degenerate_run + 1 if t_bound < _PIVOT_TOL else 0
            else:
                tied = np.where(t_rows <= t + 1e-12)[0]
                if bland:
                    leave = int(tied[np.argmin(self.basis[tied])])
                else:
                    leave = int(tied[np.argmax(np.abs(deltas[tied]))])
                if abs(w[leave]) < _PIVOT_TOL:
                    if not self.refactor():
                        return NUMERICAL
                    continue
                lv = int(self.basis[leave])
                hit_upper = deltas[leave] < 0
                self.xval[self.basis] = xb - deltas * t
                self.xval[e] = (self.xval[e] if self.stat[e] == _FREE
                                else (self.lo[e] if sigma > 0 else self.hi[e])) + sigma * t
                self.xval[lv] = hi_b[leave] if hit_upper else lo_b[leave]
                self.stat[lv] = _AT_UPPER if hit_upper else _AT_LOWER
                self.basis[leave] = e
                self.stat[e] = _BASIC
                # product-form update of the basis inverse
                piv = w[leave]
                self.binv[leave, :] /= piv
                others = np.arange(self.m) != leave
                self.binv[others, :] -= np.outer(w[others], self.binv[leave, :])
                self.pivots_since_refactor += 1
                degenerate_run = degenerate_run + 1 if t < _PIVOT_TOL else 0

            if not self.bland_always:
                if degenerate_run > _DEGENERATE_LIMIT:
                    bland = True
                elif bland and degenerate_run == 0:
                    bland = False
        return NUMERICAL
