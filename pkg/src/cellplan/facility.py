"""Plant location with a concave construction cost, linearized through SOS2.

Each site's cost curve is a list of (installed capacity, construction cost)
breakpoints.  The model picks a point on the curve as a convex combination
of at most two neighbouring breakpoints, which SOS2 branching enforces.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from .errors import InputError
from .mip import Model, Solution, VarKind

PLAN_TOL = 1e-6

Curve = tuple[tuple[float, float], ...]


def sqrt_cost_curve(capacity: float, scale: float = 1000.0, pieces: int = 4) -> Curve:
    """Breakpoints at 0, c/pieces, ..., c with cost ``scale * sqrt(z)``."""
    if capacity <= 0 or pieces < 1:
        raise InputError("sqrt_cost_curve needs a positive capacity and at least one piece")
    zs = [capacity * k / pieces for k in range(pieces + 1)]
    return tuple((z, scale * math.sqrt(z)) for z in zs)


def _check_curve(curve: Sequence[Sequence[float]], where: str) -> Curve:
    try:
        points = tuple((float(z), float(cost)) for z, cost in curve)
    except (TypeError, ValueError) as exc:
        raise InputError(f"{where}: cost curve must be a list of [z, cost] pairs") from exc
    if len(points) < 2:
        raise InputError(f"{where}: cost curve needs at least two breakpoints")
    if points[0] != (0.0, 0.0):
        raise InputError(f"{where}: cost curve must start at (0, 0)")
    if any(not (math.isfinite(z) and math.isfinite(c)) for z, c in points):
        raise InputError(f"{where}: cost curve values must be finite")
    if any(b[0] <= a[0] for a, b in zip(points, points[1:])):
        raise InputError(f"{where}: breakpoint capacities must be strictly increasing")
    return points


def _point(item, what: str) -> tuple[float, float]:
    x, y = float(item[0]), float(item[1])
    if not (math.isfinite(x) and math.isfinite(y)):
        raise InputError(f"{what} coordinates must be finite")
    return x, y


@dataclass(frozen=True)
class FacilityInstance:
    """Sites, customers and per-site cost curves.

    ``cost_curves`` holds one curve per site.  ``max_open`` / ``min_open``
    bound the number of open-site binaries; a site only counts as built in
    a plan when it has capacity installed.
    """

    site_ids: tuple[str, ...]
    site_coords: tuple[tuple[float, float], ...]
    site_capacities: tuple[float, ...]
    customer_ids: tuple[str, ...]
    customer_coords: tuple[tuple[float, float], ...]
    demands: tuple[float, ...]
    cost_curves: tuple[Curve, ...]
    max_open: int | None = None
    min_open: int | None = None

    def __post_init__(self) -> None:
        S, C = len(self.site_ids), len(self.customer_ids)
        if len(set(self.site_ids)) != S or len(set(self.customer_ids)) != C:
            raise InputError("site and customer ids must be unique")
        if len(self.site_coords) != S or len(self.site_capacities) != S or len(self.cost_curves) != S:
            raise InputError("every site needs coordinates, a capacity and a cost curve")
        if len(self.customer_coords) != C or len(self.demands) != C:
            raise InputError("every customer needs coordinates and a demand")
        object.__setattr__(self, "site_ids", tuple(str(s) for s in self.site_ids))
        object.__setattr__(self, "customer_ids", tuple(str(c) for c in self.customer_ids))
        object.__setattr__(self, "site_coords", tuple(_point(p, "site") for p in self.site_coords))
        object.__setattr__(self, "customer_coords", tuple(_point(p, "customer") for p in self.customer_coords))
        caps = tuple(float(c) for c in self.site_capacities)
        demands = tuple(float(d) for d in self.demands)
        if any(c < 0 or not math.isfinite(c) for c in caps):
            raise InputError("site capacities must be finite and non-negative")
        if any(d < 0 or not math.isfinite(d) for d in demands):
            raise InputError("demands must be finite and non-negative")
        object.__setattr__(self, "site_capacities", caps)
        object.__setattr__(self, "demands", demands)
        object.__setattr__(self, "cost_curves", tuple(
            _check_curve(curve, f"site {sid}") for sid, curve in zip(self.site_ids, self.cost_curves)))
        for name in ("max_open", "min_open"):
            value = getattr(self, name)
            if value is not None:
                if isinstance(value, bool) or int(value) != value or value < 0:
                    raise InputError(f"{name} must be a non-negative integer")
                object.__setattr__(self, name, int(value))
        if self.max_open is not None and self.min_open is not None and self.min_open > self.max_open:
            raise InputError("min_open exceeds max_open")

    @property
    def num_sites(self) -> int:
        return len(self.site_ids)

    @property
    def num_customers(self) -> int:
        return len(self.customer_ids)

    def curve(self, site: int) -> Curve:
        return self.cost_curves[site]

    def distance(self, site: int, customer: int) -> float:
        return math.dist(self.site_coords[site], self.customer_coords[customer])

    def max_installable(self, site: int) -> float:
        return min(self.site_capacities[site], self.cost_curves[site][-1][0])

    def build_cost(self, site: int, z: float) -> float:
        """Piecewise-linear construction cost of installing ``z`` units."""
        curve = self.cost_curves[site]
        for (z0, c0), (z1, c1) in zip(curve, curve[1:]):
            if z <= z1 + PLAN_TOL:
                return c0 + (c1 - c0) * (z - z0) / (z1 - z0)
        raise InputError(f"capacity {z} lies beyond the cost curve of site {self.site_ids[site]}")

    @classmethod
    def from_dict(cls, data: dict) -> FacilityInstance:
        try:
            sites = data["sites"]
            customers = data["customers"]
            shared = data.get("cost_curve")
            curves = []
            for s in sites:
                curve = s.get("cost_curve", shared)
                if curve is None:
                    raise InputError(f"site {s['id']} has no cost curve and no shared curve is given")
                curves.append(curve)
            return cls(
                tuple(s["id"] for s in sites),
                tuple((s["x"], s["y"]) for s in sites),
                tuple(s["capacity"] for s in sites),
                tuple(c["id"] for c in customers),
                tuple((c["x"], c["y"]) for c in customers),
                tuple(c["demand"] for c in customers),
                tuple(curves),
                data.get("max_open"),
                data.get("min_open"),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise InputError(f"bad facility instance: {exc}") from exc


@dataclass(frozen=True)
class FacilityVars:
    ship: dict[tuple[int, int], int]
    weights: dict[int, list[int]]
    open: dict[int, int]


@dataclass(frozen=True)
class FacilityPlan:
    open_sites: frozenset[int]
    installed_capacity: dict[int, float]
    shipments: dict[tuple[int, int], float]
    transport_cost: float
    build_cost: float

    @property
    def total_cost(self) -> float:
        return self.transport_cost + self.build_cost

    def to_dict(self, instance: FacilityInstance) -> dict:
        return {
            "open_sites": [instance.site_ids[s] for s in sorted(self.open_sites)],
            "installed_capacity": {instance.site_ids[s]: z for s, z in sorted(self.installed_capacity.items())},
            "shipments": [
                {"site": instance.site_ids[s], "customer": instance.customer_ids[c], "units": v}
                for (s, c), v in sorted(self.shipments.items()) if v > 0
            ],
            "transport_cost": self.transport_cost,
            "build_cost": self.build_cost,
            "total_cost": self.total_cost,
        }


def build_facility(instance: FacilityInstance) -> tuple[Model, FacilityVars]:
    S, C = instance.num_sites, instance.num_customers
    model = Model("min")
    ship = {(s, c): model.add_variable(f"ship[{s},{c}]", 0.0) for s in range(S) for c in range(C)}
    weights = {
        s: [model.add_variable(f"lambda[{s},{k}]", 0.0, 1.0) for k in range(len(instance.curve(s)))]
        for s in range(S)
    }
    is_open = {s: model.add_variable(f"open[{s}]", kind=VarKind.BINARY) for s in range(S)}

    for c in range(C):
        model.add_constraint([(ship[s, c], 1.0) for s in range(S)], "==", instance.demands[c])
    for s in range(S):
        curve = instance.curve(s)
        lam = weights[s]
        installed = [(v, z) for v, (z, _) in zip(lam, curve) if z]
        model.add_constraint([(v, 1.0) for v in lam], "==", 1)
        model.add_constraint([(ship[s, c], 1.0) for c in range(C)] + [(v, -z) for v, z in installed], "<=", 0)
        if curve[-1][0] > instance.site_capacities[s]:
            model.add_constraint(installed, "<=", instance.site_capacities[s])
        model.add_constraint(installed + [(is_open[s], -curve[-1][0])], "<=", 0)
        model.add_sos("sos2", [(v, z) for v, (z, _) in zip(lam, curve)])
    if instance.max_open is not None:
        model.add_constraint([(v, 1.0) for v in is_open.values()], "<=", instance.max_open)
    if instance.min_open is not None:
        model.add_constraint([(v, 1.0) for v in is_open.values()], ">=", instance.min_open)

    objective = [(ship[s, c], instance.distance(s, c)) for s in range(S) for c in range(C)]
    for s in range(S):
        objective += [(v, cost) for v, (_, cost) in zip(weights[s], instance.curve(s)) if cost]
    model.set_objective(objective)
    return model, FacilityVars(ship, weights, is_open)


def plan_from(installed: dict[int, float], shipments: dict[tuple[int, int], float],
              instance: FacilityInstance) -> FacilityPlan:
    """Plan with costs recomputed from the instance; sites with capacity installed count as open."""
    open_sites = frozenset(s for s, z in installed.items() if z > PLAN_TOL)
    transport = sum(instance.distance(s, c) * v for (s, c), v in shipments.items())
    build = sum(instance.build_cost(s, z) for s, z in installed.items())
    return FacilityPlan(open_sites, dict(installed), dict(shipments), transport, build)


def decode_facility(solution: Solution, fvars: FacilityVars, instance: FacilityInstance) -> FacilityPlan:
    if not solution.has_incumbent:
        raise InputError("solution has no incumbent plan")
    installed = {}
    for s, lam in fvars.weights.items():
        values = [solution[v] for v in lam]
        nonzero = [k for k, v in enumerate(values) if v > PLAN_TOL]
        if len(nonzero) > 2 or (len(nonzero) == 2 and nonzero[1] != nonzero[0] + 1):
            raise InputError(f"site {instance.site_ids[s]}: breakpoint weights are not SOS2 ({values})")
        installed[s] = sum(v * z for v, (z, _) in zip(values, instance.curve(s)))
    shipments = {key: max(solution[v], 0.0) for key, v in fvars.ship.items()}
    return plan_from(installed, shipments, instance)


def facility_violations(plan: FacilityPlan, instance: FacilityInstance) -> list[str]:
    """Replay demand, capacity and cardinality conditions."""
    out = []
    S, C = instance.num_sites, instance.num_customers
    for (s, c), v in plan.shipments.items():
        if v < -PLAN_TOL:
            out.append(f"negative shipment {instance.site_ids[s]} -> {instance.customer_ids[c]}")
    for c in range(C):
        got = sum(plan.shipments.get((s, c), 0.0) for s in range(S))
        if abs(got - instance.demands[c]) > PLAN_TOL * max(1.0, instance.demands[c]):
            out.append(f"customer {instance.customer_ids[c]} receives {got}, demand {instance.demands[c]}")
    for s in range(S):
        z = plan.installed_capacity.get(s, 0.0)
        sent = sum(plan.shipments.get((s, c), 0.0) for c in range(C))
        slack = PLAN_TOL * max(1.0, z)
        if sent > z + slack:
            out.append(f"site {instance.site_ids[s]} ships {sent} above installed {z}")
        if z > instance.max_installable(s) + slack or z < -slack:
            out.append(f"site {instance.site_ids[s]} installs {z} outside [0, {instance.max_installable(s)}]")
    if instance.max_open is not None and len(plan.open_sites) > instance.max_open:
        out.append(f"{len(plan.open_sites)} sites open, at most {instance.max_open} allowed")
    return out
