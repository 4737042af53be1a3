"""MILP model container and a deterministic LP-based branch-and-bound.

Branching rules, in priority order:

* a violated SOS1/SOS2 set (lowest set index first) is split at the
  weighted average of its reference weights;
* otherwise the most fractional integer variable (lowest index on ties).

Open nodes are explored best-bound first; among equal bounds the most
recently created node wins, which gives depth-first dives on plateaus.
"""

from __future__ import annotations

import enum
import heapq
import itertools
import math
import time
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import InputError
from .lp import INF, BasisState, LpStatus, Relation, Row, Sense, Term, WarmStartLp, check_bounds, normalize_terms

INT_TOL = 1e-6


class VarKind(str, enum.Enum):
    CONTINUOUS = "continuous"
    BINARY = "binary"
    INTEGER = "integer"


class SosKind(str, enum.Enum):
    SOS1 = "sos1"
    SOS2 = "sos2"


class MipStatus(str, enum.Enum):
    OPTIMAL = "optimal"
    FEASIBLE = "feasible"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    NO_SOLUTION = "no_solution"


@dataclass(frozen=True)
class Variable:
    name: str
    lower: float
    upper: float
    kind: VarKind

    @property
    def is_integer(self) -> bool:
        return self.kind is not VarKind.CONTINUOUS


@dataclass(frozen=True)
class SosSet:
    kind: SosKind
    members: tuple[tuple[int, float], ...]

    @property
    def indices(self) -> list[int]:
        return [j for j, _ in self.members]


@dataclass
class SolveParams:
    time_limit: float | None = None
    abs_gap: float = 1e-6
    rel_gap: float = 1e-9
    node_limit: int | None = None
    record_tree: bool = False

    def __post_init__(self) -> None:
        for name in ("time_limit", "node_limit"):
            value = getattr(self, name)
            if value is not None and value <= 0:
                raise InputError(f"{name} must be positive")
        if self.abs_gap < 0 or self.rel_gap < 0:
            raise InputError("gaps must be non-negative")


@dataclass(frozen=True)
class NodeRecord:
    node: int
    parent: int | None
    depth: int
    bound: float


@dataclass(frozen=True)
class Solution:
    status: MipStatus
    objective: float | None
    values: tuple[float, ...] | None
    bound: float | None
    nodes: int
    lp_iterations: int
    tree: tuple[NodeRecord, ...] = ()

    @property
    def has_incumbent(self) -> bool:
        return self.values is not None

    @property
    def gap(self) -> float | None:
        if self.objective is None or self.bound is None:
            return None
        return abs(self.objective - self.bound) / max(1.0, abs(self.objective))

    def __getitem__(self, index: int) -> float:
        if self.values is None:
            raise LookupError("solution has no incumbent")
        return self.values[index]


class Model:
    """Variables, linear rows, SOS sets and a linear objective."""

    def __init__(self, sense: Sense | str = Sense.MINIMIZE) -> None:
        self.sense = Sense(sense)
        self.vars: list[Variable] = []
        self.constraints: list[Row] = []
        self.sos_sets: list[SosSet] = []
        self.objective: tuple[Term, ...] = ()
        self.objective_constant = 0.0
        self._names: dict[str, int] = {}

    @property
    def num_vars(self) -> int:
        return len(self.vars)

    def index(self, name: str) -> int:
        return self._names[name]

    def add_variable(self, name: str, lower: float = 0.0, upper: float | None = None,
                     kind: VarKind | str = VarKind.CONTINUOUS) -> int:
        kind = VarKind(kind)
        if name in self._names:
            raise InputError(f"duplicate variable name {name!r}")
        if upper is None:
            upper = 1.0 if kind is VarKind.BINARY else INF
        lower, upper = check_bounds(lower, upper, f"variable {name!r}")
        if kind is VarKind.BINARY and (lower < 0 or upper > 1):
            raise InputError(f"binary variable {name!r} must have bounds within [0, 1]")
        self._names[name] = len(self.vars)
        self.vars.append(Variable(name, lower, upper, kind))
        return len(self.vars) - 1

    def add_constraint(self, terms: Iterable[Term] | dict[int, float], relation: Relation | str,
                       rhs: float) -> int:
        row = Row(normalize_terms(terms, self.num_vars), Relation(relation), float(rhs))
        self.constraints.append(row)
        return len(self.constraints) - 1

    add_linear_constraint = add_constraint

    def add_sos(self, kind: SosKind | str, members: Sequence[tuple[int, float]]) -> int:
        kind = SosKind(kind)
        members = tuple((int(j), float(w)) for j, w in members)
        if len(members) < 2:
            raise InputError("an SOS set needs at least two members")
        idx = [j for j, _ in members]
        if len(set(idx)) != len(idx):
            raise InputError("SOS members must be distinct variables")
        if any(not 0 <= j < self.num_vars for j in idx):
            raise InputError("SOS member index out of range")
        weights = [w for _, w in members]
        if any(b <= a for a, b in zip(weights, weights[1:])):
            raise InputError("SOS reference weights must be strictly increasing")
        self.sos_sets.append(SosSet(kind, members))
        return len(self.sos_sets) - 1

    def set_objective(self, terms: Iterable[Term] | dict[int, float], constant: float = 0.0) -> None:
        self.objective = normalize_terms(terms, self.num_vars)
        self.objective_constant = float(constant)

    def evaluate(self, values: Sequence[float]) -> float:
        return self.objective_constant + sum(c * values[j] for j, c in self.objective)

    def violations(self, values: Sequence[float], tol: float = 1e-6) -> list[str]:
        """Describe every bound, row, integrality or SOS condition ``values`` breaks."""
        out = []
        for j, var in enumerate(self.vars):
            v = values[j]
            if v < var.lower - tol or v > var.upper + tol:
                out.append(f"{var.name}={v} outside [{var.lower}, {var.upper}]")
            if var.is_integer and abs(v - round(v)) > tol:
                out.append(f"{var.name}={v} not integral")
        for i, row in enumerate(self.constraints):
            lhs = sum(c * values[j] for j, c in row.terms)
            if ((row.relation is Relation.LE and lhs > row.rhs + tol)
                    or (row.relation is Relation.GE and lhs < row.rhs - tol)
                    or (row.relation is Relation.EQ and abs(lhs - row.rhs) > tol)):
                out.append(f"row {i}: {lhs} {row.relation.value} {row.rhs}")
        for s, sos in enumerate(self.sos_sets):
            if _sos_violation(sos, values, tol) is not None:
                out.append(f"SOS set {s} violated")
        return out


def new_model(sense: Sense | str = Sense.MINIMIZE) -> Model:
    return Model(sense)


def _sos_violation(sos: SosSet, x: Sequence[float], tol: float = INT_TOL) -> tuple[int, int] | None:
    """Positions (first, last) of the nonzero span if the set condition fails."""
    nz = [p for p, (j, _) in enumerate(sos.members) if abs(x[j]) > tol]
    if not nz:
        return None
    lo, hi = nz[0], nz[-1]
    allowed = 0 if sos.kind is SosKind.SOS1 else 1
    return (lo, hi) if hi - lo > allowed else None


@dataclass(order=True)
class _Node:
    bound: float
    order: int
    lower: np.ndarray = field(compare=False)
    upper: np.ndarray = field(compare=False)
    x: np.ndarray = field(compare=False)
    node_id: int = field(compare=False)
    depth: int = field(compare=False)
    basis: BasisState = field(compare=False)


class _BranchAndBound:
    def __init__(self, model: Model, params: SolveParams) -> None:
        self.model = model
        self.params = params
        n = model.num_vars
        m = len(model.constraints)
        self.A = np.zeros((m, n))
        self.b = np.zeros(m)
        for i, row in enumerate(model.constraints):
            for j, coef in row.terms:
                self.A[i, j] = coef
            self.b[i] = row.rhs
        self.relations = [row.relation for row in model.constraints]
        self.sign = -1.0 if model.sense is Sense.MAXIMIZE else 1.0
        c = np.zeros(n)
        for j, coef in model.objective:
            c[j] = coef
        self.c = self.sign * c
        self.lp = WarmStartLp(self.A, self.b, self.relations, self.c)
        self.int_mask = np.array([v.is_integer for v in model.vars], dtype=bool)
        self.int_idx = np.flatnonzero(self.int_mask)
        # objective takes only integer values (up to the constant) on feasible points
        self.integral_objective = bool(
            np.all(c[~self.int_mask] == 0) and np.all(c[self.int_mask] == np.round(c[self.int_mask]))
        )
        self.lp_iterations = 0
        self.nodes = 0
        self.ids = itertools.count()
        self.order = itertools.count()
        self.records: list[NodeRecord] = []
        self.incumbent: np.ndarray | None = None
        self.incumbent_value = INF
        self.tolerance_pruned = INF

    def _tol(self) -> float:
        if self.incumbent is None:
            return 0.0
        actual = self.sign * self.incumbent_value + self.model.objective_constant
        return max(self.params.abs_gap, self.params.rel_gap * abs(actual))

    def _node_bound(self, value: float) -> float:
        if self.integral_objective:
            return math.ceil(value - INT_TOL)
        return value

    def _evaluate(self, lower: np.ndarray, upper: np.ndarray, parent: int | None,
                  depth: int) -> tuple[LpStatus, _Node | None]:
        """Solve a node LP; registers incumbents and returns the node if it needs branching."""
        if np.any(lower > upper):
            return LpStatus.INFEASIBLE, None
        status, x, its = self.lp.solve(lower, upper)
        self.nodes += 1
        self.lp_iterations += its
        node_id = next(self.ids)
        if status is not LpStatus.OPTIMAL:
            return status, None
        value = float(self.c @ x)
        if self.params.record_tree:
            self.records.append(NodeRecord(node_id, parent, depth, self.sign * value))
        bound = self._node_bound(value)
        if self._branching_choice(x) is None:
            x = x.copy()
            x[self.int_idx] = np.where(np.abs(x[self.int_idx] - np.round(x[self.int_idx])) <= INT_TOL,
                                       np.round(x[self.int_idx]), x[self.int_idx])
            value = float(self.c @ x)
            if value < self.incumbent_value:
                self.incumbent = x
                self.incumbent_value = value
            return status, None
        if bound >= self.incumbent_value - self._tol():
            if bound < self.incumbent_value:
                self.tolerance_pruned = min(self.tolerance_pruned, bound)
            return status, None
        return status, _Node(bound, -next(self.order), lower, upper, x, node_id, depth, self.lp.basis_state())

    def _branching_choice(self, x: np.ndarray):
        for sos in self.model.sos_sets:
            span = _sos_violation(sos, x)
            if span is not None:
                return ("sos", sos, span)
        if len(self.int_idx):
            vals = x[self.int_idx]
            frac = np.abs(vals - np.round(vals))
            k = int(np.argmax(frac))
            if frac[k] > INT_TOL:
                return ("var", int(self.int_idx[k]), float(vals[k]))
        return None

    def _children(self, node: _Node) -> list[tuple[np.ndarray, np.ndarray]]:
        choice = self._branching_choice(node.x)
        if choice[0] == "var":
            _, j, v = choice
            down_hi = node.upper.copy()
            down_hi[j] = math.floor(v)
            up_lo = node.lower.copy()
            up_lo[j] = math.ceil(v)
            return [(node.lower, down_hi), (up_lo, node.upper)]
        _, sos, (first, last) = choice
        idx = sos.indices
        weights = np.array([w for _, w in sos.members])
        mass = np.abs(node.x[idx])
        avg = float(weights @ mass / mass.sum())
        r = int(np.searchsorted(weights, avg, side="right")) - 1
        if sos.kind is SosKind.SOS1:
            r = min(max(r, first), last - 1)
            keep = [range(0, r + 1), range(r + 1, len(idx))]
        else:
            r = min(max(r, first + 1), last - 1)
            keep = [range(0, r + 1), range(r, len(idx))]
        children = []
        for kept in keep:
            lo, hi = node.lower.copy(), node.upper.copy()
            for p, j in enumerate(idx):
                if p not in kept:
                    lo[j] = 0.0 if lo[j] <= 0 else INF  # positive lower bound: empty child
                    hi[j] = 0.0
            children.append((lo, hi))
        return children

    def solve(self) -> Solution:
        params = self.params
        start = time.monotonic()
        lower = np.array([v.lower for v in self.model.vars], dtype=float)
        upper = np.array([v.upper for v in self.model.vars], dtype=float)
        lower[self.int_mask] = np.ceil(lower[self.int_mask] - INT_TOL)
        upper[self.int_mask] = np.floor(upper[self.int_mask] + INT_TOL)

        status, root = self._evaluate(lower, upper, None, 0)
        if status is LpStatus.INFEASIBLE:
            return self._result(MipStatus.INFEASIBLE, [])
        if status is LpStatus.UNBOUNDED:
            return self._result(MipStatus.UNBOUNDED, [])
        heap = [root] if root is not None else []
        limited = False
        while heap:
            if params.node_limit is not None and self.nodes >= params.node_limit:
                limited = True
                break
            if params.time_limit is not None and time.monotonic() - start >= params.time_limit:
                limited = True
                break
            node = heapq.heappop(heap)
            if node.bound >= self.incumbent_value - self._tol():
                # best-first: every remaining node is at least as bad
                if node.bound < self.incumbent_value:
                    self.tolerance_pruned = min(self.tolerance_pruned, node.bound)
                heap = []
                break
            for lo, hi in self._children(node):
                self.lp.load(node.basis)
                _, child = self._evaluate(lo, hi, node.node_id, node.depth + 1)
                if child is not None:
                    heapq.heappush(heap, child)
        if limited:
            status = MipStatus.FEASIBLE if self.incumbent is not None else MipStatus.NO_SOLUTION
        elif self.incumbent is None:
            status = MipStatus.INFEASIBLE
        else:
            status = MipStatus.OPTIMAL
        return self._result(status, heap)

    def _result(self, status: MipStatus, open_nodes: list[_Node]) -> Solution:
        const = self.model.objective_constant
        bound = min([self.incumbent_value, self.tolerance_pruned] + [nd.bound for nd in open_nodes])
        if status in (MipStatus.INFEASIBLE, MipStatus.UNBOUNDED) or bound == INF:
            bound_out = None
        else:
            bound_out = self.sign * bound + const
        if self.incumbent is None:
            objective = values = None
        else:
            values = tuple(float(v) + 0.0 for v in self.incumbent)  # + 0.0 drops negative zeros
            objective = self.model.evaluate(values)
        return Solution(status, objective, values, bound_out, self.nodes, self.lp_iterations,
                        tuple(self.records))


def solve_mip(model: Model, params: SolveParams | None = None) -> Solution:
    """Solve ``model`` to optimality, or until a limit in ``params`` is hit."""
    return _BranchAndBound(model, params or SolveParams()).solve()
