"""Linear programming substrate with dynamic columns and dual extraction.

The builtin engine is a dense bounded-variable primal simplex (two phases,
eta-update basis inverse with periodic refactorization, Bland's rule after a
run of degenerate pivots).  It returns raw row duals ``y`` under the
``reduced cost = cost - y . column`` convention, plus sign-normalized
multipliers (``-y``) which are nonnegative on ``<=`` rows; the restricted
master problems consume the multipliers so their pricing tests read exactly
like the textbook KKT conditions.

Set the environment variable ``CMCF_LP_BACKEND=scipy`` to solve through
scipy's HiGHS interface instead (identical solution contract, no warm
starts).
"""

from __future__ import annotations

import math
import os

import numpy as np

LESS_EQUAL = "<="
EQUAL = "=="

_PIVOT_EPS = 1e-9
_REFACTOR_EVERY = 64
_DEGENERATE_LIMIT = 1000
_MAX_PIVOTS = 200000

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"


class LpError(RuntimeError):
    """Numerical breakdown or malformed program."""


class LpSolution:
    def __init__(self, status, objective=None, x=None, duals=None):
        self.status = status
        self.objective = objective
        self.x = x
        self.duals = duals
        self.multipliers = None if duals is None else [-d for d in duals]

    def __repr__(self):
        return "LpSolution(%s, obj=%r)" % (self.status, self.objective)


class LinearProgram:
    """Minimization LP over bounded columns with ``<=`` and ``==`` rows."""

    def __init__(self):
        self.row_sense = []
        self.row_rhs = []
        self.col_cost = []
        self.col_lb = []
        self.col_ub = []
        self.col_entries = []
        self._warm = None

    @property
    def num_rows(self):
        return len(self.row_rhs)

    @property
    def num_cols(self):
        return len(self.col_cost)

    def add_row(self, sense, rhs):
        if sense not in (LESS_EQUAL, EQUAL):
            raise LpError("unknown row sense %r" % (sense,))
        self.row_sense.append(sense)
        self.row_rhs.append(float(rhs))
        self._warm = None
        return len(self.row_rhs) - 1

    def add_column(self, cost, lb, ub, entries=()):
        if lb > ub:
            raise LpError("column bounds cross: %r > %r" % (lb, ub))
        for row, coef in entries:
            if not (0 <= row < len(self.row_rhs)):
                raise LpError("entry references unknown row %r" % (row,))
        self.col_cost.append(float(cost))
        self.col_lb.append(float(lb))
        self.col_ub.append(float(ub))
        self.col_entries.append([(int(r), float(v)) for r, v in entries])
        return len(self.col_cost) - 1

    def set_bounds(self, col, lb, ub):
        if lb > ub:
            raise LpError("column bounds cross: %r > %r" % (lb, ub))
        self.col_lb[col] = float(lb)
        self.col_ub[col] = float(ub)

    def solve(self, backend=None):
        backend = backend or os.environ.get("CMCF_LP_BACKEND", "builtin")
        if backend == "builtin":
            return _SimplexSolver(self).solve()
        if backend == "scipy":
            return _solve_scipy(self)
        raise LpError("unknown LP backend %r" % (backend,))

    def reduced_costs(self, solution):
        """cost_j - sum_i dual_i * a_ij for every structural column."""
        rc = list(self.col_cost)
        for j, entries in enumerate(self.col_entries):
            for row, coef in entries:
                rc[j] -= solution.duals[row] * coef
        return rc

    def row_activity(self, x):
        act = [0.0] * self.num_rows
        for j, entries in enumerate(self.col_entries):
            xj = x[j]
            if xj == 0.0:
                continue
            for row, coef in entries:
                act[row] += coef * xj
        return act

    def dump(self):
        """Fixed plain-text rendering for diffing programs across runs."""
        out = []
        terms = [[] for _ in range(self.num_rows)]
        obj = []
        for j in range(self.num_cols):
            obj.append("%+.12g x%d" % (self.col_cost[j], j))
            for row, coef in self.col_entries[j]:
                terms[row].append("%+.12g x%d" % (coef, j))
        out.append("min " + (" ".join(obj) if obj else "0"))
        for i in range(self.num_rows):
            lhs = " ".join(terms[i]) if terms[i] else "0"
            out.append("r%d: %s %s %.12g" % (i, lhs, self.row_sense[i], self.row_rhs[i]))
        for j in range(self.num_cols):
            out.append("x%d in [%.12g, %.12g]" % (j, self.col_lb[j], self.col_ub[j]))
        return "\n".join(out) + "\n"


class _SimplexSolver:
    """One solve of the bounded-variable primal simplex.

    Column layout: structural 0..n-1, slack n..n+m-1 (one per row; equality
    slacks are fixed at zero), artificials appended on demand for phase 1.
    """

    def __init__(self, lp):
        self.lp = lp
        n, m = lp.num_cols, lp.num_rows
        self.n = n
        self.m = m
        total = n + m
        self.A = np.zeros((m, total))
        for j, entries in enumerate(lp.col_entries):
            for row, coef in entries:
                self.A[row, j] += coef
        for i in range(m):
            self.A[i, n + i] = 1.0
        self.lb = np.empty(total)
        self.ub = np.empty(total)
        self.lb[:n] = lp.col_lb
        self.ub[:n] = lp.col_ub
        for i, sense in enumerate(lp.row_sense):
            self.lb[n + i] = 0.0
            self.ub[n + i] = math.inf if sense == LESS_EQUAL else 0.0
        self.cost = np.zeros(total)
        self.cost[:n] = lp.col_cost
        self.b = np.asarray(lp.row_rhs, dtype=float)
        self.art_rows = {}
        self.art_cols = {}
        self.values = np.array([self._nearest_bound(j) for j in range(total)])
        self.in_basis = np.zeros(total, dtype=bool)
        self.basis = []

    # -- column bookkeeping -------------------------------------------------

    def _nearest_bound(self, j):
        lo, hi = self.lb[j], self.ub[j]
        if lo > -math.inf:
            return lo if (hi == math.inf or abs(lo) <= abs(hi)) else hi
        if hi < math.inf:
            return hi
        return 0.0

    def _col_tag(self, j):
        if j < self.n:
            return ("x", j)
        if j < self.n + self.m:
            return ("s", j - self.n)
        row, sign = self.art_cols[j]
        return ("a", row, sign)

    def _tag_col(self, tag):
        if tag[0] == "x":
            return tag[1] if tag[1] < self.n else None
        if tag[0] == "s":
            return self.n + tag[1] if tag[1] < self.m else None
        _, row, sign = tag
        return self._ensure_artificial(row, sign)

    def _ensure_artificial(self, row, sign):
        key = (row, sign)
        if key in self.art_rows:
            return self.art_rows[key]
        col = np.zeros((self.m, 1))
        col[row, 0] = sign
        self.A = np.hstack([self.A, col])
        self.lb = np.append(self.lb, 0.0)
        self.ub = np.append(self.ub, 0.0)
        self.cost = np.append(self.cost, 0.0)
        self.values = np.append(self.values, 0.0)
        self.in_basis = np.append(self.in_basis, False)
        j = self.A.shape[1] - 1
        self.art_rows[key] = j
        self.art_cols[j] = (row, sign)
        return j

    def _refactor(self):
        B = self.A[:, self.basis]
        try:
            self.B_inv = np.linalg.inv(B)
        except np.linalg.LinAlgError:
            raise LpError("singular basis during refactorization")
        self._recompute_basics()

    def _recompute_basics(self):
        nonbasic_part = self.A @ self.values - self.A[:, self.basis] @ self.values[self.basis]
        self.values[self.basis] = self.B_inv @ (self.b - nonbasic_part)

    def _basis_feasible(self):
        xb = self.values[self.basis]
        return bool(
            np.all(xb >= self.lb[self.basis] - 1e-7)
            and np.all(xb <= self.ub[self.basis] + 1e-7)
        )

    # -- phases ---------------------------------------------------------------

    def solve(self):
        if self.m == 0:
            return self._solve_unconstrained()
        if not self._try_warm_start():
            self._cold_start()
            if self.status == INFEASIBLE:
                self.lp._warm = None
                return LpSolution(INFEASIBLE)
        status = self._run_phase(self.cost, bounded_below=False)
        if status == UNBOUNDED:
            self.lp._warm = None
            return LpSolution(UNBOUNDED)
        return self._extract()

    def _solve_unconstrained(self):
        x = np.empty(self.n)
        for j in range(self.n):
            c = self.cost[j]
            if c > 0 or (c == 0 and self.lb[j] > -math.inf):
                if self.lb[j] == -math.inf:
                    return LpSolution(UNBOUNDED)
                x[j] = self.lb[j]
            elif c < 0:
                if self.ub[j] == math.inf:
                    return LpSolution(UNBOUNDED)
                x[j] = self.ub[j]
            else:
                x[j] = self._nearest_bound(j)
        return LpSolution(OPTIMAL, float(self.cost[: self.n] @ x), x, [])

    def _try_warm_start(self):
        warm = self.lp._warm
        if warm is None:
            return False
        tags, nonbasic_values = warm
        if len(tags) != self.m:
            return False
        basis = []
        for tag in tags:
            j = self._tag_col(tag)
            if j is None:
                return False
            basis.append(j)
        if len(set(basis)) != self.m:
            return False
        for tag, value in nonbasic_values.items():
            j = self._tag_col(tag)
            if j is not None and j not in basis:
                self.values[j] = min(max(value, self.lb[j]), self.ub[j])
        self.basis = basis
        self.in_basis[:] = False
        self.in_basis[basis] = True
        try:
            self._refactor()
        except LpError:
            return False
        if not self._basis_feasible():
            return False
        self.status = OPTIMAL
        return True

    def _cold_start(self):
        self.basis = list(range(self.n, self.n + self.m))
        self.in_basis[:] = False
        self.in_basis[self.basis] = True
        self.values = np.array(
            [self._nearest_bound(j) for j in range(self.A.shape[1])]
        )
        residual = self.b - self.A[:, : self.n] @ self.values[: self.n]
        need = []
        for i in range(self.m):
            slack = self.n + i
            lo, hi = self.lb[slack], self.ub[slack]
            if lo - 1e-12 <= residual[i] <= hi + 1e-12:
                self.values[slack] = min(max(residual[i], lo), hi)
            else:
                self.values[slack] = 0.0
                need.append((i, residual[i]))
        installed = []
        for i, res in need:
            sign = 1.0 if res >= 0 else -1.0
            j = self._ensure_artificial(i, sign)
            self.ub[j] = math.inf
            self.values[j] = abs(res)
            old = self.basis[i]
            self.in_basis[old] = False
            self.basis[i] = j
            self.in_basis[j] = True
            installed.append(j)
        self._refactor()
        self.status = OPTIMAL
        if installed:
            phase_cost = np.zeros(self.A.shape[1])
            phase_cost[installed] = 1.0
            status = self._run_phase(phase_cost, bounded_below=True)
            if status != OPTIMAL:
                raise LpError("phase one ended %s" % status)
            infeas = float(phase_cost @ self.values)
            if infeas > 1e-7 * (1.0 + float(np.abs(self.b).max())):
                self.status = INFEASIBLE
                return
            for j in self.art_cols:
                self.ub[j] = 0.0
                if not self.in_basis[j]:
                    self.values[j] = 0.0

    def _run_phase(self, cost, bounded_below):
        m = self.m
        degenerate_run = 0
        pivots_since_refactor = 0
        tol_vec = 1e-10 * (1.0 + np.abs(cost))
        for _ in range(_MAX_PIVOTS):
            y = cost[self.basis] @ self.B_inv
            rc = cost - y @ self.A
            can_up = (~self.in_basis) & (self.values < self.ub - 1e-12) & (rc < -tol_vec)
            can_down = (~self.in_basis) & (self.values > self.lb + 1e-12) & (rc > tol_vec)
            candidates = np.flatnonzero(can_up | can_down)
            if candidates.size == 0:
                return OPTIMAL
            bland = degenerate_run > _DEGENERATE_LIMIT
            if bland:
                enter = int(candidates[0])
            else:
                enter = int(candidates[int(np.argmax(np.abs(rc[candidates])))])
            sigma = 1.0 if can_up[enter] else -1.0
            w = self.B_inv @ self.A[:, enter]
            if self.ub[enter] == math.inf or self.lb[enter] == -math.inf:
                t_best = math.inf
            else:
                t_best = self.ub[enter] - self.lb[enter]
            leave_pos = -1
            xb = self.values[self.basis]
            lb_b = self.lb[self.basis]
            ub_b = self.ub[self.basis]
            # x_B moves by delta * t as the entering value moves by sigma * t
            delta = -sigma * w
            for i in range(m):
                d = delta[i]
                if d > _PIVOT_EPS:
                    room = ub_b[i] - xb[i]
                    if room == math.inf:
                        continue
                    t = max(room, 0.0) / d
                elif d < -_PIVOT_EPS:
                    room = xb[i] - lb_b[i]
                    if room == math.inf:
                        continue
                    t = max(room, 0.0) / (-d)
                else:
                    continue
                better = t < t_best - 1e-12
                tie = abs(t - t_best) <= 1e-12 and leave_pos >= 0
                if tie:
                    if bland:
                        better = self.basis[i] < self.basis[leave_pos]
                    else:
                        better = abs(w[i]) > abs(w[leave_pos])
                if better:
                    t_best = max(t, 0.0)
                    leave_pos = i
            if t_best == math.inf:
                if bounded_below:
                    raise LpError("unbounded auxiliary phase")
                return UNBOUNDED
            if t_best < 1e-10:
                degenerate_run += 1
            else:
                degenerate_run = 0
            if leave_pos < 0:
                # bound flip: the entering column jumps to its opposite bound
                self.values[self.basis] = xb + delta * t_best
                self.values[enter] += sigma * t_best
                continue
            leaving = self.basis[leave_pos]
            self.values[self.basis] = xb + delta * t_best
            self.values[enter] += sigma * t_best
            hit_upper = delta[leave_pos] > 0
            self.values[leaving] = ub_b[leave_pos] if hit_upper else lb_b[leave_pos]
            self.basis[leave_pos] = enter
            self.in_basis[leaving] = False
            self.in_basis[enter] = True
            pivot = w[leave_pos]
            if abs(pivot) < 1e-11:
                self._refactor()
                pivots_since_refactor = 0
                continue
            eta = self.B_inv[leave_pos, :] / pivot
            self.B_inv = self.B_inv - np.outer(w, eta)
            self.B_inv[leave_pos, :] = eta
            pivots_since_refactor += 1
            if pivots_since_refactor >= _REFACTOR_EVERY:
                self._refactor()
                pivots_since_refactor = 0
        raise LpError("pivot limit exceeded")

    def _extract(self):
        self._refactor()
        x = self.values[: self.n].copy()
        y = self.cost[self.basis] @ self.B_inv
        duals = [float(v) for v in y]
        obj = float(self.cost[: self.n] @ x)
        tags = [self._col_tag(j) for j in self.basis]
        nb_values = {}
        for j in range(self.n + self.m):
            if not self.in_basis[j]:
                nb_values[self._col_tag(j)] = float(self.values[j])
        self.lp._warm = (tags, nb_values)
        return LpSolution(OPTIMAL, obj, x, duals)


def _solve_scipy(lp):
    from scipy import optimize, sparse

    m, n = lp.num_rows, lp.num_cols
    rows_ub = [i for i in range(m) if lp.row_sense[i] == LESS_EQUAL]
    rows_eq = [i for i in range(m) if lp.row_sense[i] == EQUAL]
    pos_ub = {r: i for i, r in enumerate(rows_ub)}
    pos_eq = {r: i for i, r in enumerate(rows_eq)}

    def build(rows, pos):
        data, ri, ci = [], [], []
        for j, entries in enumerate(lp.col_entries):
            for row, coef in entries:
                if row in pos:
                    data.append(coef)
                    ri.append(pos[row])
                    ci.append(j)
        return sparse.csr_matrix((data, (ri, ci)), shape=(len(rows), n))

    kwargs = {}
    if rows_ub:
        kwargs["A_ub"] = build(rows_ub, pos_ub)
        kwargs["b_ub"] = [lp.row_rhs[i] for i in rows_ub]
    if rows_eq:
        kwargs["A_eq"] = build(rows_eq, pos_eq)
        kwargs["b_eq"] = [lp.row_rhs[i] for i in rows_eq]
    bounds = [
        (None if lp.col_lb[j] == -math.inf else lp.col_lb[j],
         None if lp.col_ub[j] == math.inf else lp.col_ub[j])
        for j in range(n)
    ]
    res = optimize.linprog(lp.col_cost, bounds=bounds, method="highs", **kwargs)
    if res.status == 2:
        return LpSolution(INFEASIBLE)
    if res.status == 3:
        return LpSolution(UNBOUNDED)
    if res.status != 0:
        raise LpError("scipy backend failed: %s" % res.message)
    duals = [0.0] * m
    if rows_ub:
        for r, i in pos_ub.items():
            duals[r] = float(res.ineqlin.marginals[i])
    if rows_eq:
        for r, i in pos_eq.items():
            duals[r] = float(res.eqlin.marginals[i])
    return LpSolution(OPTIMAL, float(res.fun), np.asarray(res.x), duals)
