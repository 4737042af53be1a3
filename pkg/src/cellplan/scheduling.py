"""Project scheduling under renewable resources, and job-shop sequencing.

Both problems decode into the same :class:`Schedule` shape so that the
replay checks and the Gantt renderer can treat them alike.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field
from graphlib import CycleError, TopologicalSorter
from typing import Hashable, Sequence

from .errors import InputError
from .mip import Model, Solution, VarKind

REPLAY_TOL = 1e-6


@dataclass(frozen=True)
class Task:
    key: Hashable
    lane: int
    start: float
    duration: float
    label: str = ""

    @property
    def end(self) -> float:
        return self.start + self.duration


@dataclass(frozen=True)
class Schedule:
    """Start times of every task; ``tasks`` holds only the ones worth drawing."""

    starts: dict
    tasks: tuple[Task, ...]
    makespan: float
    lanes: tuple[str, ...] = ()
    kind: str = ""

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "makespan": self.makespan,
            "tasks": [
                {"key": list(t.key) if isinstance(t.key, tuple) else t.key, "lane": t.lane,
                 "start": t.start, "duration": t.duration, "label": t.label}
                for t in self.tasks
            ],
        }


def _nonneg_int(value, what: str) -> int:
    if isinstance(value, bool) or float(value) != int(value) or value < 0:
        raise InputError(f"{what} must be a non-negative integer, got {value!r}")
    return int(value)


# --------------------------------------------------------------------- RCPSP

@dataclass(frozen=True)
class RcpspInstance:
    """Real jobs are 1..n; jobs 0 and n+1 are the zero-length start and end markers.

    ``precedence`` pairs may mention the markers; missing marker arcs are
    added so that 0 precedes every source and every sink precedes n+1.
    """

    durations: tuple[int, ...]
    usages: tuple[tuple[int, ...], ...]
    capacities: tuple[int, ...]
    precedence: tuple[tuple[int, int], ...] = ()
    horizon: int | None = None
    arcs: tuple[tuple[int, int], ...] = field(init=False)

    def __post_init__(self) -> None:
        n = len(self.durations)
        durations = tuple(_nonneg_int(p, "duration") for p in self.durations)
        capacities = tuple(_nonneg_int(c, "capacity") for c in self.capacities)
        if len(self.usages) != n:
            raise InputError(f"usages has {len(self.usages)} rows, expected one per job ({n})")
        usages = []
        for j, row in enumerate(self.usages):
            if len(row) != len(capacities):
                raise InputError(f"job {j + 1} lists {len(row)} usages for {len(capacities)} resources")
            usages.append(tuple(_nonneg_int(u, "usage") for u in row))
        end = n + 1
        pairs = set()
        for a, b in self.precedence:
            a, b = int(a), int(b)
            if not (0 <= a <= end and 0 <= b <= end) or a == b:
                raise InputError(f"invalid precedence pair ({a}, {b})")
            if b == 0 or a == end:
                raise InputError("the start marker has no predecessor and the end marker no successor")
            pairs.add((a, b))
        has_pred = {b for _, b in pairs}
        has_succ = {a for a, _ in pairs}
        for j in range(1, end):
            if j not in has_pred:
                pairs.add((0, j))
            if j not in has_succ:
                pairs.add((j, end))
        if n == 0:
            pairs.add((0, end))
        graph = defaultdict(set)
        for a, b in pairs:
            graph[b].add(a)
        try:
            tuple(TopologicalSorter(graph).static_order())
        except CycleError as exc:
            raise InputError(f"precedence graph has a cycle: {exc.args[1]}") from exc
        horizon = None if self.horizon is None else _nonneg_int(self.horizon, "horizon")
        object.__setattr__(self, "durations", durations)
        object.__setattr__(self, "capacities", capacities)
        object.__setattr__(self, "usages", tuple(usages))
        object.__setattr__(self, "precedence", tuple(sorted((int(a), int(b)) for a, b in self.precedence)))
        object.__setattr__(self, "arcs", tuple(sorted(pairs)))
        object.__setattr__(self, "horizon", horizon)

    @property
    def n(self) -> int:
        return len(self.durations)

    @property
    def num_resources(self) -> int:
        return len(self.capacities)

    @property
    def end(self) -> int:
        return self.n + 1

    @property
    def planning_horizon(self) -> int:
        return self.horizon if self.horizon is not None else sum(self.durations)

    def duration(self, job: int) -> int:
        return self.durations[job - 1] if 1 <= job <= self.n else 0

    def usage(self, job: int, resource: int) -> int:
        return self.usages[job - 1][resource] if 1 <= job <= self.n else 0

    def topological_order(self) -> list[int]:
        graph = defaultdict(set)
        for j in range(self.end + 1):
            graph[j]
        for a, b in self.arcs:
            graph[b].add(a)
        ts = TopologicalSorter(graph)
        ts.prepare()
        order = []
        while ts.is_active():
            ready = sorted(ts.get_ready())
            order.extend(ready)
            ts.done(*ready)
        return order

    @classmethod
    def from_dict(cls, data: dict) -> RcpspInstance:
        try:
            return cls(
                tuple(data["durations"]),
                tuple(tuple(row) for row in data["usages"]),
                tuple(data["capacities"]),
                tuple(tuple(pair) for pair in data.get("precedence", ())),
                data.get("horizon"),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise InputError(f"bad RCPSP instance: {exc}") from exc


def build_rcpsp(instance: RcpspInstance, sos_branching: bool = True) -> tuple[Model, dict[tuple[int, int], int]]:
    """Time-indexed model: ``x[j,t] = 1`` iff job j starts at step t.

    With ``sos_branching`` each job's start binaries also form an SOS1 set
    weighted by t, so the search splits "start by r" against "start after r"
    instead of fixing single binaries.
    """
    T = instance.planning_horizon
    jobs = range(instance.end + 1)
    model = Model("min")
    x = {}
    for j in jobs:
        p = instance.duration(j)
        for t in range(T + 1):
            # starting later than T - p would overrun the horizon
            x[j, t] = model.add_variable(f"x[{j},{t}]", 0.0, 1.0 if t + p <= T else 0.0, VarKind.BINARY)

    for j in jobs:
        model.add_constraint([(x[j, t], 1.0) for t in range(T + 1)], "==", 1)
        starts = [t for t in range(T + 1) if t + instance.duration(j) <= T]
        if sos_branching and len(starts) > 1:
            model.add_sos("sos1", [(x[j, t], float(t)) for t in starts])
    for r in range(instance.num_resources):
        for t in range(T):
            terms = []
            for j in jobs:
                u, p = instance.usage(j, r), instance.duration(j)
                if u and p:
                    terms.extend((x[j, t2], float(u)) for t2 in range(max(0, t - p + 1), t + 1))
            if terms:
                model.add_constraint(terms, "<=", instance.capacities[r])
    for j, s in instance.arcs:
        terms = [(x[s, t], float(t)) for t in range(1, T + 1)]
        terms += [(x[j, t], -float(t)) for t in range(1, T + 1)]
        model.add_constraint(terms, ">=", instance.duration(j))

    model.set_objective([(x[instance.end, t], float(t)) for t in range(1, T + 1)])
    return model, x


def decode_rcpsp(solution: Solution, x: dict[tuple[int, int], int], instance: RcpspInstance) -> Schedule:
    if not solution.has_incumbent:
        raise InputError("solution has no incumbent schedule")
    starts = {}
    for (j, t), idx in x.items():
        if solution[idx] > 0.5:
            if j in starts:
                raise InputError(f"job {j} starts more than once")
            starts[j] = t
    missing = [j for j in range(instance.end + 1) if j not in starts]
    if missing:
        raise InputError(f"jobs without a start time: {missing}")
    return rcpsp_schedule(starts, instance)


def rcpsp_schedule(starts: dict[int, int], instance: RcpspInstance) -> Schedule:
    tasks = tuple(
        Task(j, j - 1, float(starts[j]), float(instance.duration(j)), f"{j}")
        for j in range(1, instance.end)
        if instance.duration(j) > 0
    )
    makespan = max((starts[j] + instance.duration(j) for j in starts), default=0)
    lanes = tuple(f"job {j}" for j in range(1, instance.end))
    return Schedule(dict(starts), tasks, float(makespan), lanes, "rcpsp")


def rcpsp_usage_profile(schedule: Schedule, instance: RcpspInstance) -> list[list[int]]:
    """Per-resource usage at each integer step up to the makespan."""
    steps = int(math.ceil(schedule.makespan))
    profile = [[0] * steps for _ in range(instance.num_resources)]
    for j, s in schedule.starts.items():
        for t in range(int(s), int(s) + instance.duration(j)):
            for r in range(instance.num_resources):
                if t < steps:
                    profile[r][t] += instance.usage(j, r)
    return profile


def rcpsp_violations(schedule: Schedule, instance: RcpspInstance) -> list[str]:
    """Replay a schedule against precedence arcs and per-step resource capacities."""
    out = []
    starts = schedule.starts
    for j in range(instance.end + 1):
        if j not in starts:
            out.append(f"job {j} has no start")
        elif starts[j] < 0:
            out.append(f"job {j} starts before 0")
    if out:
        return out
    for j, s in instance.arcs:
        if starts[s] < starts[j] + instance.duration(j) - REPLAY_TOL:
            out.append(f"job {s} starts at {starts[s]} before job {j} ends at {starts[j] + instance.duration(j)}")
    for r, levels in enumerate(rcpsp_usage_profile(schedule, instance)):
        for t, level in enumerate(levels):
            if level > instance.capacities[r]:
                out.append(f"resource {r + 1} uses {level} > {instance.capacities[r]} at step {t}")
    return out


# ------------------------------------------------------------------ job shop

@dataclass(frozen=True)
class JobShopInstance:
    """``times[j][i]`` is job j's processing time on machine i (0-based);
    ``routes[j]`` lists the 0-based machines in job j's visiting order."""

    times: tuple[tuple[float, ...], ...]
    routes: tuple[tuple[int, ...], ...]

    def __post_init__(self) -> None:
        times = tuple(tuple(float(v) for v in row) for row in self.times)
        routes = tuple(tuple(int(i) for i in row) for row in self.routes)
        n = len(times)
        if n == 0 or len(routes) != n:
            raise InputError("times and machines need one row per job")
        m = len(times[0])
        for j in range(n):
            if len(times[j]) != m:
                raise InputError(f"times row {j} has {len(times[j])} entries, expected {m}")
            if sorted(routes[j]) != list(range(m)):
                raise InputError(f"machine order of job {j + 1} is not a permutation of 1..{m}")
            if any(v < 0 or not math.isfinite(v) for v in times[j]):
                raise InputError("processing times must be finite and non-negative")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "routes", routes)

    @property
    def num_jobs(self) -> int:
        return len(self.times)

    @property
    def num_machines(self) -> int:
        return len(self.times[0])

    @classmethod
    def from_one_based(cls, times: Sequence[Sequence[float]], machines: Sequence[Sequence[int]]) -> JobShopInstance:
        return cls(tuple(map(tuple, times)), tuple(tuple(int(i) - 1 for i in row) for row in machines))

    @classmethod
    def from_dict(cls, data: dict) -> JobShopInstance:
        try:
            return cls.from_one_based(data["times"], data["machines"])
        except (KeyError, TypeError, ValueError) as exc:
            raise InputError(f"bad job-shop instance: {exc}") from exc

    def big_m(self) -> float:
        return sum(sum(row) for row in self.times)


@dataclass(frozen=True)
class JobShopVars:
    starts: dict[tuple[int, int], int]
    order: dict[tuple[int, int, int], int]
    makespan: int


def build_jobshop(instance: JobShopInstance) -> tuple[Model, JobShopVars]:
    """Disjunctive model: ``order[i,j,k] = 1`` iff job j precedes job k on machine i."""
    n, m = instance.num_jobs, instance.num_machines
    p = instance.times
    big_m = instance.big_m()
    model = Model("min")
    x = {(i, j): model.add_variable(f"x[{i},{j}]", 0.0) for i in range(m) for j in range(n)}
    y = {
        (i, j, k): model.add_variable(f"y[{i},{j},{k}]", kind=VarKind.BINARY)
        for i in range(m) for j in range(n) for k in range(j + 1, n)
    }
    makespan = model.add_variable("C", 0.0)

    for j, route in enumerate(instance.routes):
        for prev, cur in zip(route, route[1:]):
            model.add_constraint([(x[cur, j], 1.0), (x[prev, j], -1.0)], ">=", p[j][prev])
    for (i, j, k), yv in y.items():
        # y = 0: k runs first on machine i; y = 1: j runs first
        model.add_constraint([(x[i, j], 1.0), (x[i, k], -1.0), (yv, big_m)], ">=", p[k][i])
        model.add_constraint([(x[i, k], 1.0), (x[i, j], -1.0), (yv, -big_m)], ">=", p[j][i] - big_m)
    for j, route in enumerate(instance.routes):
        last = route[-1]
        model.add_constraint([(makespan, 1.0), (x[last, j], -1.0)], ">=", p[j][last])

    model.set_objective([(makespan, 1.0)])
    return model, JobShopVars(x, y, makespan)


def jobshop_schedule(starts: dict[tuple[int, int], float], instance: JobShopInstance) -> Schedule:
    """Schedule keyed by (job, machine), one lane per machine."""
    tasks = tuple(
        Task((j, i), i, float(starts[j, i]), instance.times[j][i], f"J{j + 1}")
        for j in range(instance.num_jobs) for i in instance.routes[j]
    )
    makespan = max((t.end for t in tasks), default=0.0)
    lanes = tuple(f"M{i + 1}" for i in range(instance.num_machines))
    return Schedule(dict(starts), tasks, makespan, lanes, "jobshop")


def decode_jobshop(solution: Solution, js_vars: JobShopVars, instance: JobShopInstance) -> Schedule:
    if not solution.has_incumbent:
        raise InputError("solution has no incumbent schedule")
    starts = {}
    for (i, j), idx in js_vars.starts.items():
        v = solution[idx]
        starts[j, i] = float(round(v)) if abs(v - round(v)) <= REPLAY_TOL else v
    return jobshop_schedule(starts, instance)


def jobshop_violations(schedule: Schedule, instance: JobShopInstance) -> list[str]:
    """Replay machine routes and one-job-at-a-time machine capacity."""
    out = []
    starts = schedule.starts
    p = instance.times
    for j, route in enumerate(instance.routes):
        for i in route:
            if starts[j, i] < -REPLAY_TOL:
                out.append(f"job {j + 1} starts on M{i + 1} before 0")
        for prev, cur in zip(route, route[1:]):
            if starts[j, cur] < starts[j, prev] + p[j][prev] - REPLAY_TOL:
                out.append(f"job {j + 1} enters M{cur + 1} before leaving M{prev + 1}")
    for i in range(instance.num_machines):
        spans = sorted((starts[j, i], starts[j, i] + p[j][i], j) for j in range(instance.num_jobs))
        for (s1, e1, j1), (s2, e2, j2) in zip(spans, spans[1:]):
            if s2 < e1 - REPLAY_TOL:
                out.append(f"jobs {j1 + 1} and {j2 + 1} overlap on M{i + 1}")
    return out
