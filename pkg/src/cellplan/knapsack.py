"""Filling free machine time with the most profitable set of products."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from .errors import InputError
from .mip import Model, Solution, VarKind


@dataclass(frozen=True)
class KnapsackInstance:
    profits: tuple[float, ...]
    weights: tuple[float, ...]
    capacity: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "profits", tuple(float(p) for p in self.profits))
        object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))
        object.__setattr__(self, "capacity", float(self.capacity))
        if len(self.profits) != len(self.weights) or not self.profits:
            raise InputError("profits and weights must be non-empty and of equal length")
        if any(w < 0 or not math.isfinite(w) for w in self.weights):
            raise InputError("weights must be finite and non-negative")
        if any(not math.isfinite(p) for p in self.profits):
            raise InputError("profits must be finite")
        if self.capacity < 0 or not math.isfinite(self.capacity):
            raise InputError("capacity must be finite and non-negative")

    @property
    def n(self) -> int:
        return len(self.profits)

    @classmethod
    def from_dict(cls, data: dict) -> KnapsackInstance:
        try:
            return cls(tuple(data["profits"]), tuple(data["weights"]), data["capacity"])
        except (KeyError, TypeError, ValueError) as exc:
            raise InputError(f"bad knapsack instance: {exc}") from exc


@dataclass(frozen=True)
class KnapsackPlan:
    chosen: frozenset[int]
    profit: float
    load: float

    @property
    def labels(self) -> list[int]:
        """1-based item labels, as products are numbered on the shop floor."""
        return [i + 1 for i in sorted(self.chosen)]


def build_knapsack(instance: KnapsackInstance) -> tuple[Model, list[int]]:
    model = Model("max")
    items = [model.add_variable(f"x[{i}]", kind=VarKind.BINARY) for i in range(instance.n)]
    model.add_constraint(list(zip(items, instance.weights)), "<=", instance.capacity)
    model.set_objective(list(zip(items, instance.profits)))
    return model, items


def plan_for(chosen: Sequence[int], instance: KnapsackInstance) -> KnapsackPlan:
    chosen = frozenset(chosen)
    return KnapsackPlan(
        chosen,
        sum(instance.profits[i] for i in chosen),
        sum(instance.weights[i] for i in chosen),
    )


def decode_knapsack(solution: Solution, items: Sequence[int], instance: KnapsackInstance) -> KnapsackPlan:
    if not solution.has_incumbent:
        raise InputError("solution has no incumbent")
    return plan_for([i for i, idx in enumerate(items) if solution[idx] > 0.5], instance)
