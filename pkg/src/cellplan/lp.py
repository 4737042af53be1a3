"""Bounded-variable primal simplex on a dense tableau.

Only meant for the small LP relaxations produced by the formulation modules
(a few hundred columns at most).  Every variable carries its own bounds, so
branching never has to add rows: nonbasic variables sit at a finite bound
(or at zero when free) and the ratio test also considers bound flips.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import InputError, ResourceLimitError

PIVOT_TOL = 1e-9
FEAS_TOL = 1e-6
OPT_TOL = 1e-9
PHASE1_TOL = 1e-7
MAX_ITERATIONS = 50_000
BLAND_AFTER = 1000
REFACTOR_EVERY = 100
DUAL_FEAS_TOL = 1e-9
DUAL_BLAND_AFTER = 50
DUAL_PIVOT_TOL = 1e-7
DUAL_PERTURBATION = 1e-6
BFRT_SLACK = 1e-9

INF = math.inf


class Sense(str, enum.Enum):
    MAXIMIZE = "max"
    MINIMIZE = "min"


class Relation(str, enum.Enum):
    LE = "<="
    EQ = "=="
    GE = ">="


class LpStatus(str, enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"


Term = tuple[int, float]


def normalize_terms(terms: Iterable[Term] | dict[int, float], num_vars: int) -> tuple[Term, ...]:
    """Validate a term list and return it as a tuple of (index, coef) pairs."""
    if isinstance(terms, dict):
        terms = terms.items()
    out = []
    seen = set()
    for idx, coef in terms:
        idx = int(idx)
        if not 0 <= idx < num_vars:
            raise InputError(f"variable index {idx} out of range (have {num_vars})")
        if idx in seen:
            raise InputError(f"variable index {idx} repeated within one row")
        coef = float(coef)
        if not math.isfinite(coef):
            raise InputError(f"non-finite coefficient for variable {idx}")
        seen.add(idx)
        out.append((idx, coef))
    return tuple(out)


def check_bounds(lower: float, upper: float, what: str = "variable") -> tuple[float, float]:
    lower, upper = float(lower), float(upper)
    if math.isnan(lower) or math.isnan(upper) or lower == INF or upper == -INF:
        raise InputError(f"{what} has invalid bounds [{lower}, {upper}]")
    if lower > upper:
        raise InputError(f"{what} has inverted bounds: lower {lower} > upper {upper}")
    return lower, upper


@dataclass(frozen=True)
class Row:
    terms: tuple[Term, ...]
    relation: Relation
    rhs: float


@dataclass(frozen=True)
class LpProblem:
    """A linear program over ``num_vars`` bounded variables.

    ``var_bounds`` defaults to ``[0, +inf)`` for every variable.
    """

    num_vars: int
    objective: Sequence[float]
    sense: Sense = Sense.MINIMIZE
    var_bounds: Sequence[tuple[float, float]] | None = None
    rows: Sequence[Row | tuple] = ()

    def __post_init__(self) -> None:
        n = int(self.num_vars)
        if n < 0:
            raise InputError("num_vars must be non-negative")
        obj = tuple(float(v) for v in self.objective)
        if len(obj) != n:
            raise InputError(f"objective has {len(obj)} coefficients, expected {n}")
        if self.var_bounds is None:
            bounds = tuple((0.0, INF) for _ in range(n))
        else:
            bounds = tuple(check_bounds(lo, hi, f"variable {j}") for j, (lo, hi) in enumerate(self.var_bounds))
            if len(bounds) != n:
                raise InputError(f"var_bounds has {len(bounds)} entries, expected {n}")
        rows = []
        for row in self.rows:
            if not isinstance(row, Row):
                terms, relation, rhs = row
                row = Row(tuple(terms), Relation(relation), float(rhs))
            rows.append(Row(normalize_terms(row.terms, n), Relation(row.relation), float(row.rhs)))
        object.__setattr__(self, "num_vars", n)
        object.__setattr__(self, "objective", obj)
        object.__setattr__(self, "sense", Sense(self.sense))
        object.__setattr__(self, "var_bounds", bounds)
        object.__setattr__(self, "rows", tuple(rows))

    def dense(self) -> tuple[np.ndarray, np.ndarray, list[Relation]]:
        A = np.zeros((len(self.rows), self.num_vars))
        b = np.zeros(len(self.rows))
        for i, row in enumerate(self.rows):
            for j, coef in row.terms:
                A[i, j] = coef
            b[i] = row.rhs
        return A, b, [row.relation for row in self.rows]


@dataclass(frozen=True)
class LpOutcome:
    status: LpStatus
    values: tuple[float, ...] | None
    objective: float | None
    iterations: int


def slack_bounds(relations: Sequence[Relation]) -> tuple[np.ndarray, np.ndarray]:
    """Bounds of s in ``A x + s = b`` for each row relation."""
    lo = np.array([-INF if r is Relation.GE else 0.0 for r in relations])
    hi = np.array([INF if r is Relation.LE else 0.0 for r in relations])
    return lo, hi


class _Tableau:
    """Dense tableau ``T = B^-1 [A | I | artificials]`` plus current point and reduced costs."""

    def __init__(self, M: np.ndarray, b: np.ndarray, lo: np.ndarray, hi: np.ndarray,
                 x: np.ndarray, basis: np.ndarray, max_iterations: int) -> None:
        self.M = M
        self.b = b
        self.lo = lo
        self.hi = hi
        self.x = x
        self.basis = basis
        self.max_iterations = max_iterations
        self.iterations = 0
        self.cost = np.zeros(M.shape[1])
        # fixed pseudo-random tie breakers, so solves stay reproducible
        self._jitter = 0.5 + 0.5 * np.random.default_rng(12345).random(M.shape[1])
        self.refactor()

    def refactor(self) -> None:
        M, basis = self.M, self.basis
        if M.shape[0] == 0:
            self.T = np.zeros((0, M.shape[1]))
        else:
            binv = np.linalg.inv(M[:, basis])
            self.T = binv @ M
            nonbasic_x = self.x.copy()
            nonbasic_x[basis] = 0.0
            self.x[basis] = binv @ (self.b - M @ nonbasic_x)
        self.d = self.cost - self.cost[basis] @ self.T
        self.since_refactor = 0

    def set_cost(self, cost: np.ndarray) -> None:
        self.cost = cost
        self.d = cost - cost[self.basis] @ self.T

    def drop_columns(self, keep: np.ndarray) -> None:
        """Remove nonbasic columns that can never re-enter (fixed artificials and slacks)."""
        remap = np.cumsum(keep) - 1
        self.M = self.M[:, keep]
        self.T = self.T[:, keep]
        self.lo, self.hi, self.x = self.lo[keep], self.hi[keep], self.x[keep]
        self.cost, self.d = self.cost[keep], self.d[keep]
        self._jitter = self._jitter[keep]
        self.basis = remap[self.basis]

    def _charge(self) -> None:
        if self.iterations >= self.max_iterations:
            raise ResourceLimitError(f"simplex iteration limit ({self.max_iterations}) exceeded")
        self.iterations += 1

    def run(self, confirm: bool = True) -> bool:
        """Primal simplex to optimality for the current cost; False means unbounded.

        With ``confirm`` the final pricing is repeated on a refactored tableau.
        """
        degenerate = 0
        fresh = True
        while True:
            if self.since_refactor >= REFACTOR_EVERY:
                self.refactor()
                fresh = True
            bland = degenerate >= BLAND_AFTER
            q, direction = self._price(bland)
            if q < 0:
                if fresh or not confirm:
                    return True
                # confirm optimality on a freshly factored tableau
                self.refactor()
                fresh = True
                continue
            self._charge()
            step = self._step(q, direction, bland)
            if step is None:
                return False
            fresh = False
            degenerate = degenerate + 1 if step <= 1e-12 else 0

    def _price(self, bland: bool) -> tuple[int, int]:
        d, x = self.d, self.x
        movable = self.hi > self.lo
        movable[self.basis] = False
        up = movable & (d < -OPT_TOL) & (x < self.hi)
        down = movable & (d > OPT_TOL) & (x > self.lo)
        eligible = up | down
        if not eligible.any():
            return -1, 0
        if bland:
            q = int(np.flatnonzero(eligible)[0])
        else:
            q = int(np.argmax(np.where(eligible, np.abs(d), -1.0)))
        return q, (1 if up[q] else -1)

    def _step(self, q: int, direction: int, bland: bool) -> float | None:
        basis, x = self.basis, self.x
        rate = -direction * self.T[:, q]
        xb = x[basis]
        lob = self.lo[basis]
        hib = self.hi[basis]
        limits = np.full(len(basis), INF)
        with np.errstate(invalid="ignore", divide="ignore"):
            dec = rate < -PIVOT_TOL
            limits[dec] = (xb[dec] - lob[dec]) / -rate[dec]
            inc = rate > PIVOT_TOL
            limits[inc] = (hib[inc] - xb[inc]) / rate[inc]
        limits = np.maximum(limits, 0.0)
        theta_row = limits.min() if len(limits) else INF
        flip = self.hi[q] - self.lo[q]
        theta = min(theta_row, flip)
        if theta == INF:
            return None
        if flip <= theta_row:
            x[basis] = xb + flip * rate
            x[q] = self.hi[q] if direction > 0 else self.lo[q]
            return flip
        ties = np.flatnonzero(limits <= theta_row + 1e-12)
        if bland:
            r = int(ties[np.argmin(basis[ties])])
        else:
            r = int(ties[np.argmax(np.abs(rate[ties]))])
        leaving = basis[r]
        x[basis] = xb + theta * rate
        x[q] += direction * theta
        x[leaving] = lob[r] if rate[r] < 0 else hib[r]
        self._pivot(r, q)
        return theta

    def _pivot(self, r: int, q: int) -> None:
        T = self.T
        T[r] /= T[r, q]
        col = T[:, q].copy()
        col[r] = 0.0
        rows = np.flatnonzero(col)
        T[rows] -= np.outer(col[rows], T[r])
        self.d -= self.d[q] * T[r]
        self.basis[r] = q
        self.since_refactor += 1

    def rebound(self, lower: np.ndarray, upper: np.ndarray) -> bool:
        """Install new structural bounds, keeping the basis dual feasible.

        Returns False when some nonbasic variable would have to sit at an
        infinite bound to stay dual feasible.
        """
        n = len(lower)
        nonbasic = np.ones(len(self.x), dtype=bool)
        nonbasic[self.basis] = False
        nonbasic[n:] = False
        new_x = self.x.copy()
        for j in np.flatnonzero(nonbasic):
            lo, hi, dj = lower[j], upper[j], self.d[j]
            if dj > OPT_TOL and lo > -INF:
                v = lo
            elif dj < -OPT_TOL and hi < INF:
                v = hi
            elif abs(dj) <= OPT_TOL:
                if self.x[j] >= self.hi[j] and hi < INF:
                    v = hi
                else:
                    v = lo if lo > -INF else (hi if hi < INF else 0.0)
            else:
                return False
            new_x[j] = v
        self.lo[:n] = lower
        self.hi[:n] = upper
        delta = new_x - self.x
        moved = np.flatnonzero(delta)
        self.x = new_x
        if len(moved):
            self.x[self.basis] -= self.T[:, moved] @ delta[moved]
        return True

    def _perturb(self) -> None:
        """Shift nonbasic reduced costs away from zero, in their dual-feasible direction.

        Breaks the massive dual degeneracy of time-indexed and assignment
        models; :meth:`unperturb` restores the true reduced costs.
        """
        nonbasic = self.hi > self.lo
        nonbasic[self.basis] = False
        at_lower = nonbasic & (self.x <= self.lo)
        at_upper = nonbasic & ~at_lower & (self.x >= self.hi)
        scale = DUAL_PERTURBATION * (1.0 + np.abs(self.cost)) * self._jitter
        self.d = np.where(at_lower, np.maximum(self.d, 0.0) + scale,
                          np.where(at_upper, np.minimum(self.d, 0.0) - scale, self.d))

    def unperturb(self) -> None:
        self.d = self.cost - self.cost[self.basis] @ self.T

    def _recheck(self) -> bool:
        """Refactor before trusting an infeasibility verdict built on updated values."""
        if self.since_refactor == 0:
            return False
        self.refactor()
        self._perturb()
        return True

    def dual_run(self, limit: int) -> bool | None:
        """Dual simplex until the basic values are within bounds.

        Returns False if the bounds are infeasible and None if ``limit``
        pivots were not enough.
        """
        pivots = 0
        degenerate = 0
        self._perturb()
        while True:
            if self.since_refactor >= REFACTOR_EVERY:
                self.refactor()
                self._perturb()
            basis, x = self.basis, self.x
            xb = x[basis]
            below = self.lo[basis] - xb
            above = xb - self.hi[basis]
            infeas = np.maximum(below, above)
            if not len(infeas) or infeas.max() <= DUAL_FEAS_TOL:
                return True
            if pivots >= limit:
                return None
            bland = degenerate >= DUAL_BLAND_AFTER
            if bland:
                rows = np.flatnonzero(infeas > DUAL_FEAS_TOL)
                r = int(rows[np.argmin(basis[rows])])
            else:
                r = int(np.argmax(infeas))
            raise_value = below[r] > 0
            target = self.lo[basis[r]] if raise_value else self.hi[basis[r]]
            row = self.T[r]
            nonbasic = self.hi > self.lo
            nonbasic[basis] = False
            can_inc = nonbasic & (x < self.hi)
            can_dec = nonbasic & (x > self.lo)
            if raise_value:
                eligible = (can_inc & (row < -DUAL_PIVOT_TOL)) | (can_dec & (row > DUAL_PIVOT_TOL))
            else:
                eligible = (can_inc & (row > DUAL_PIVOT_TOL)) | (can_dec & (row < -DUAL_PIVOT_TOL))
            cand = np.flatnonzero(eligible)
            if not len(cand):
                if self._recheck():
                    continue
                return False
            alpha = np.abs(row[cand])
            ratios = np.abs(self.d[cand]) / alpha
            if bland:
                flips = cand[:0]
                best = ratios.min()
                q = int(cand[np.flatnonzero(ratios <= best + 1e-12)[0]])
            else:
                # bound-flipping ratio test: boxed columns whose breakpoint is passed
                # flip to their opposite bound as long as row r stays infeasible
                order = np.lexsort((-alpha, ratios))
                reach = np.cumsum(alpha[order] * (self.hi[cand] - self.lo[cand])[order])
                # a reach equal to the infeasibility up to roundoff still fixes row r
                k = int(np.searchsorted(reach, infeas[r] - BFRT_SLACK * (1.0 + infeas[r])))
                if k == len(order):
                    if self._recheck():
                        continue
                    return False
                q = int(cand[order[k]])
                flips = cand[order[:k]]
            dual_step = abs(self.d[q]) / abs(row[q])
            degenerate = degenerate + 1 if dual_step <= 1e-12 else 0
            self._charge()
            pivots += 1
            if len(flips):
                new = np.where(x[flips] > self.lo[flips], self.lo[flips], self.hi[flips])
                delta = new - x[flips]
                x[flips] = new
                x[basis] -= self.T[:, flips] @ delta
            step = (x[basis[r]] - target) / row[q]
            leaving = basis[r]
            x[basis] -= self.T[:, q] * step
            x[q] += step
            x[leaving] = target
            self._pivot(r, q)


def _cold_start(A: np.ndarray, b: np.ndarray, relations: Sequence[Relation], c: np.ndarray,
                lower: np.ndarray, upper: np.ndarray,
                max_iterations: int) -> tuple[LpStatus, _Tableau]:
    m, n = A.shape
    slo, shi = slack_bounds(relations)
    x = np.where(np.isfinite(lower), lower, np.where(np.isfinite(upper), upper, 0.0)).astype(float)
    resid = b - A @ x if m else np.zeros(0)
    slack = np.clip(resid, slo, shi)
    art_rows = np.flatnonzero(slack != resid)
    k = len(art_rows)
    signs = np.sign(resid[art_rows] - slack[art_rows])

    E = np.zeros((m, k))
    E[art_rows, np.arange(k)] = signs
    M = np.hstack([A, np.eye(m), E])
    lo = np.concatenate([lower, slo, np.zeros(k)])
    hi = np.concatenate([upper, shi, np.full(k, INF)])
    xfull = np.concatenate([x, slack, np.abs(resid[art_rows] - slack[art_rows])])
    basis = np.arange(n, n + m)
    basis[art_rows] = n + m + np.arange(k)

    tab = _Tableau(M, b.astype(float), lo, hi, xfull, basis, max_iterations)
    if k:
        phase1 = np.zeros(M.shape[1])
        phase1[n + m:] = 1.0
        tab.set_cost(phase1)
        tab.run()
        tab.refactor()
        if tab.x[n + m:].sum() > PHASE1_TOL:
            return LpStatus.INFEASIBLE, tab
        tab.hi[n + m:] = 0.0
        tab.x[n + m:] = np.minimum(tab.x[n + m:], 0.0)
    tab.set_cost(np.concatenate([c, np.zeros(m + k)]))
    if not tab.run():
        return LpStatus.UNBOUNDED, tab
    return LpStatus.OPTIMAL, tab


def solve_dense(A: np.ndarray, b: np.ndarray, relations: Sequence[Relation], c: np.ndarray,
                lower: np.ndarray, upper: np.ndarray,
                max_iterations: int = MAX_ITERATIONS) -> tuple[LpStatus, np.ndarray | None, int]:
    """Minimize ``c @ x`` s.t. ``A x (rel) b`` and ``lower <= x <= upper``.

    Returns (status, x, iterations); x is None unless optimal.
    """
    status, tab = _cold_start(A, b, relations, c, lower, upper, max_iterations)
    if status is not LpStatus.OPTIMAL:
        return status, None, tab.iterations
    return status, np.clip(tab.x[:len(c)], lower, upper), tab.iterations


@dataclass(frozen=True, eq=False)
class BasisState:
    """Basis and point of a solved LP; enough to rebuild its tableau."""

    basis: np.ndarray
    x: np.ndarray
    owner: object


class WarmStartLp:
    """Re-solves one constraint system under changing variable bounds.

    The first solve is a cold two-phase start.  Later solves start from the
    current basis (or one reinstated with :meth:`load`), move nonbasic
    variables onto the new bounds and restore feasibility with dual simplex
    pivots, finishing with a primal pass.  Any trouble on the warm path falls
    back to a cold start.
    """

    def __init__(self, A: np.ndarray, b: np.ndarray, relations: Sequence[Relation], c: np.ndarray,
                 max_iterations: int = MAX_ITERATIONS, dual_limit: int = 5000) -> None:
        self.A = A
        self.b = b
        self.relations = list(relations)
        self.c = c
        self.max_iterations = max_iterations
        self.dual_limit = dual_limit
        self._tab: _Tableau | None = None
        self._at: BasisState | None = None
        self._copy: tuple | None = None
        self._copy_of: BasisState | None = None

    def basis_state(self) -> BasisState:
        """Snapshot of the current (just solved) basis."""
        state = BasisState(self._tab.basis.copy(), self._tab.x.copy(), self._tab)
        self._at = state
        return state

    def load(self, state: BasisState) -> None:
        """Reinstate the tableau of a snapshot taken from this instance."""
        tab = self._tab
        if state.owner is not tab:
            return
        if self._at is not state:
            if self._copy_of is state:
                T, x, d, basis, lo, hi = self._copy
                np.copyto(tab.T, T)
                np.copyto(tab.x, x)
                np.copyto(tab.d, d)
                np.copyto(tab.basis, basis)
                np.copyto(tab.lo, lo)
                np.copyto(tab.hi, hi)
            else:
                tab.basis[:] = state.basis
                tab.x[:] = state.x
                tab.refactor()
            self._at = state
        if self._copy_of is not state:
            self._copy = (tab.T.copy(), tab.x.copy(), tab.d.copy(), tab.basis.copy(), tab.lo.copy(), tab.hi.copy())
            self._copy_of = state

    def solve(self, lower: np.ndarray, upper: np.ndarray) -> tuple[LpStatus, np.ndarray | None, int]:
        n = len(self.c)
        tab = self._tab
        self._at = None
        if tab is not None and tab.rebound(lower, upper):
            tab.iterations = 0
            try:
                done = tab.dual_run(self.dual_limit)
            except np.linalg.LinAlgError:
                done = None
            tab.unperturb()
            if done is False:
                return LpStatus.INFEASIBLE, None, tab.iterations
            if done:
                if not tab.run(confirm=False):  # pragma: no cover - bounds only tighten below a bounded root
                    self._tab = None
                    return LpStatus.UNBOUNDED, None, tab.iterations
                return LpStatus.OPTIMAL, np.clip(tab.x[:n], lower, upper), tab.iterations
        status, tab = _cold_start(self.A, self.b, self.relations, self.c, lower, upper, self.max_iterations)
        if status is LpStatus.OPTIMAL:
            keep = np.ones(len(tab.x), dtype=bool)
            keep[n:] = tab.lo[n:] < tab.hi[n:]
            keep[tab.basis] = True
            if not keep.all():
                tab.drop_columns(keep)
            self._tab = tab
            self._copy_of = None
            return status, np.clip(tab.x[:n], lower, upper), tab.iterations
        return status, None, tab.iterations


def solve_lp(problem: LpProblem, max_iterations: int = MAX_ITERATIONS) -> LpOutcome:
    """Solve ``problem`` with the two-phase bounded simplex."""
    A, b, relations = problem.dense()
    c = np.array(problem.objective, dtype=float)
    sign = -1.0 if problem.sense is Sense.MAXIMIZE else 1.0
    lower = np.array([lo for lo, _ in problem.var_bounds], dtype=float)
    upper = np.array([hi for _, hi in problem.var_bounds], dtype=float)
    status, values, iterations = solve_dense(A, b, relations, sign * c, lower, upper, max_iterations)
    if status is not LpStatus.OPTIMAL:
        return LpOutcome(status, None, None, iterations)
    return LpOutcome(status, tuple(float(v) for v in values), float(c @ values), iterations)
