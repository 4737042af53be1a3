"""Closed vehicle route through all production cells (MTZ formulation)."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from .errors import InputError
from .mip import Model, Solution, VarKind


def expand_triangular(tri: Sequence[Sequence[float]]) -> list[list[float]]:
    """Full symmetric matrix from strictly-upper-triangular rows.

    Row ``i`` holds the distances from node ``i`` to nodes ``i+1 .. n-1``, so
    the last row is empty.
    """
    n = len(tri)
    matrix = [[0.0] * n for _ in range(n)]
    for i, row in enumerate(tri):
        if len(row) != n - 1 - i:
            raise InputError(f"triangular row {i} has {len(row)} entries, expected {n - 1 - i}")
        for k, dist in enumerate(row):
            j = i + 1 + k
            matrix[i][j] = matrix[j][i] = float(dist)
    return matrix


@dataclass(frozen=True)
class TspInstance:
    names: tuple[str, ...]
    matrix: tuple[tuple[float, ...], ...]

    def __post_init__(self) -> None:
        n = len(self.names)
        if len(self.matrix) != n or any(len(row) != n for row in self.matrix):
            raise InputError(f"distance matrix must be {n}x{n}")
        for i, row in enumerate(self.matrix):
            for j, dist in enumerate(row):
                if i != j and not (dist >= 0 and math.isfinite(dist)):
                    raise InputError(f"distance {i}->{j} must be finite and non-negative")

    @property
    def n(self) -> int:
        return len(self.names)

    @classmethod
    def from_triangular(cls, names: Sequence[str], tri: Sequence[Sequence[float]]) -> TspInstance:
        if len(names) != len(tri):
            raise InputError(f"{len(names)} names but {len(tri)} triangular rows")
        matrix = expand_triangular(tri)
        return cls(tuple(names), tuple(tuple(row) for row in matrix))

    @classmethod
    def from_dict(cls, data: dict) -> TspInstance:
        try:
            names = [str(s) for s in data["names"]]
            if "tri" in data:
                return cls.from_triangular(names, data["tri"])
            matrix = tuple(tuple(float(v) for v in row) for row in data["matrix"])
        except (KeyError, TypeError, ValueError) as exc:
            raise InputError(f"bad TSP instance: {exc}") from exc
        return cls(tuple(names), matrix)

    def length(self, order: Sequence[int]) -> float:
        return sum(self.matrix[a][b] for a, b in zip(order, order[1:]))


@dataclass(frozen=True)
class Tour:
    order: tuple[int, ...]
    length: float

    def reversed(self) -> Tour:
        return Tour(tuple(reversed(self.order)), self.length)


@dataclass(frozen=True)
class TspVars:
    arcs: dict[tuple[int, int], int]
    order: dict[int, int]


def build_tsp(instance: TspInstance, sos_branching: bool = True) -> tuple[Model, TspVars]:
    """MTZ model: assignment rows plus order variables ``y`` on every node but the depot.

    With ``sos_branching`` the out-arcs and the in-arcs of each node are also
    declared SOS1 sets, ordered by distance, so the search splits near
    neighbours from far ones instead of fixing one arc at a time.
    """
    n = instance.n
    if n < 2:
        raise InputError("a tour needs at least two nodes")
    model = Model("min")
    arcs = {}
    for i in range(n):
        for j in range(n):
            if i != j:
                arcs[i, j] = model.add_variable(f"x[{i},{j}]", kind=VarKind.BINARY)
    order = {i: model.add_variable(f"y[{i}]", 0.0) for i in range(1, n)}

    for i in range(n):
        model.add_constraint([(arcs[i, j], 1.0) for j in range(n) if j != i], "==", 1)
    for j in range(n):
        model.add_constraint([(arcs[i, j], 1.0) for i in range(n) if i != j], "==", 1)
    # y_j >= y_i + 1 - n (1 - x_ij): the depot is exempt, so only one cycle survives
    for i in range(1, n):
        for j in range(1, n):
            if i != j:
                model.add_constraint([(order[i], 1.0), (order[j], -1.0), (arcs[i, j], float(n))], "<=", n - 1)

    if sos_branching and n > 2:
        for i in range(n):
            out = sorted((j for j in range(n) if j != i), key=lambda j: (instance.matrix[i][j], j))
            model.add_sos("sos1", [(arcs[i, j], k) for k, j in enumerate(out)])
            inc = sorted((j for j in range(n) if j != i), key=lambda j: (instance.matrix[j][i], j))
            model.add_sos("sos1", [(arcs[j, i], k) for k, j in enumerate(inc)])

    model.set_objective([(idx, instance.matrix[i][j]) for (i, j), idx in arcs.items()])
    return model, TspVars(arcs, order)


def decode_tour(solution: Solution, tsp_vars: TspVars, instance: TspInstance) -> Tour:
    if not solution.has_incumbent:
        raise InputError("solution has no incumbent tour")
    successor = {}
    for (i, j), idx in tsp_vars.arcs.items():
        if solution[idx] > 0.5:
            if i in successor:
                raise InputError(f"node {i} has more than one outgoing arc")
            successor[i] = j
    order = [0]
    while len(order) <= instance.n:
        nxt = successor.get(order[-1])
        if nxt is None:
            raise InputError(f"node {order[-1]} has no outgoing arc")
        order.append(nxt)
        if nxt == 0:
            break
    if len(order) != instance.n + 1 or order[-1] != 0 or len(set(order[:-1])) != instance.n:
        raise InputError(f"arcs do not form a single Hamiltonian cycle: {order}")
    return Tour(tuple(order), instance.length(order))


def tour_violations(order: Sequence[int], instance: TspInstance) -> list[str]:
    """Check that ``order`` is a closed depot-rooted cycle visiting every node once."""
    order = list(order)
    out = []
    if len(order) != instance.n + 1 or order[0] != 0 or order[-1] != 0:
        out.append(f"tour must start and end at node 0 and have {instance.n + 1} entries")
    if sorted(order[:-1]) != list(range(instance.n)):
        out.append("tour does not visit every node exactly once")
    return out
