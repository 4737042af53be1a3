"""Command-line driver: ``cellplan solve|oracle <problem> <instance.json>``.

Exit codes: 0 optimal, 2 infeasible, 3 unbounded, 4 time or node limit hit,
1 usage, parse, IO or replay error.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import asdict, dataclass
from importlib import resources
from pathlib import Path
from typing import Any, Callable

from . import oracles
from .errors import InputError, ResourceLimitError
from .facility import (FacilityInstance, build_facility, decode_facility, facility_violations, plan_from)
from .knapsack import KnapsackInstance, build_knapsack, decode_knapsack, plan_for
from .mip import MipStatus, SolveParams, solve_mip
from .render import render_facility, render_gantt, render_tour
from .scheduling import (JobShopInstance, RcpspInstance, Schedule, Task, build_jobshop, build_rcpsp, decode_jobshop,
                         decode_rcpsp, jobshop_schedule, jobshop_violations, rcpsp_schedule,
                         rcpsp_usage_profile, rcpsp_violations)
from .tsp import Tour, TspInstance, build_tsp, decode_tour, tour_violations

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_INFEASIBLE = 2
EXIT_UNBOUNDED = 3
EXIT_LIMIT = 4

EXIT_CODES = {
    MipStatus.OPTIMAL: EXIT_OK,
    MipStatus.INFEASIBLE: EXIT_INFEASIBLE,
    MipStatus.UNBOUNDED: EXIT_UNBOUNDED,
    MipStatus.FEASIBLE: EXIT_LIMIT,
    MipStatus.NO_SOLUTION: EXIT_LIMIT,
}

VALUE_TOL = 1e-6


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        raise UsageError(f"{self.prog}: {message}")


@dataclass
class RunReport:
    problem: str
    status: str
    objective: float | None
    bound: float | None
    gap: float | None
    nodes: int
    lp_iterations: int
    wall_time: float
    plan: dict | None


@dataclass(frozen=True)
class Problem:
    load: Callable[[dict], Any]
    build: Callable[[Any], tuple]
    decode: Callable[[Any, Any, Any], Any]
    to_dict: Callable[[Any, Any], dict]
    from_dict: Callable[[dict, Any], Any]
    violations: Callable[[Any, Any], list[str]]
    value: Callable[[Any], float]
    describe: Callable[[Any, Any], list[str]]
    svg: Callable[[Any, Any], str]
    oracle: Callable[[Any], Any]


# ------------------------------------------------------------------ knapsack

def _knapsack_violations(plan, inst: KnapsackInstance) -> list[str]:
    if any(not 0 <= i < inst.n for i in plan.chosen):
        return ["item label out of range"]
    if plan.load > inst.capacity + VALUE_TOL:
        return [f"load {plan.load} exceeds capacity {inst.capacity}"]
    return []


def _knapsack_from_dict(data: dict, inst: KnapsackInstance):
    return plan_for([int(i) - 1 for i in data["items"]], inst)


def _knapsack_oracle(inst: KnapsackInstance) -> dict:
    value, chosen = oracles.knapsack_dp(inst)
    return {"value": value, "items": [i + 1 for i in sorted(chosen)]}


def _knapsack_svg(plan, inst: KnapsackInstance) -> str:
    """Chosen items laid end to end on the free machine time."""
    tasks, t = [], 0.0
    for i in sorted(plan.chosen):
        tasks.append(Task(i, 0, t, inst.weights[i], f"item {i + 1}"))
        t += inst.weights[i]
    schedule = Schedule({task.key: task.start for task in tasks}, tuple(tasks), max(t, inst.capacity), ("machine",))
    return render_gantt(schedule, title=f"profit {plan.profit:g}, load {plan.load:g} of {inst.capacity:g}")


KNAPSACK = Problem(
    load=KnapsackInstance.from_dict,
    build=build_knapsack,
    decode=decode_knapsack,
    to_dict=lambda plan, inst: {"items": plan.labels, "profit": plan.profit, "load": plan.load},
    from_dict=_knapsack_from_dict,
    violations=_knapsack_violations,
    value=lambda plan: plan.profit,
    describe=lambda plan, inst: [f"items: {', '.join(map(str, plan.labels)) or '(none)'}",
                                 f"load: {plan.load:g} of {inst.capacity:g}"],
    svg=lambda plan, inst: _knapsack_svg(plan, inst),
    oracle=_knapsack_oracle,
)


# ----------------------------------------------------------------------- TSP

def _tsp_from_dict(data: dict, inst: TspInstance) -> Tour:
    order = tuple(int(i) for i in data["tour"])
    return Tour(order, inst.length(order) if not tour_violations(order, inst) else float("nan"))


TSP = Problem(
    load=TspInstance.from_dict,
    build=build_tsp,
    decode=decode_tour,
    to_dict=lambda tour, inst: {"tour": list(tour.order), "names": [inst.names[i] for i in tour.order],
                                "length": tour.length},
    from_dict=_tsp_from_dict,
    violations=lambda tour, inst: tour_violations(tour.order, inst),
    value=lambda tour: tour.length,
    describe=lambda tour, inst: ["tour: " + " -> ".join(inst.names[i] for i in tour.order),
                                 f"length: {tour.length:g}"],
    svg=lambda tour, inst: render_tour(tour.order, inst.names, title=f"tour length {tour.length:g}"),
    oracle=lambda inst: {"value": oracles.held_karp(inst.matrix)},
)


# --------------------------------------------------------------------- RCPSP

def _rcpsp_from_dict(data: dict, inst: RcpspInstance):
    return rcpsp_schedule({int(j): int(t) for j, t in data["starts"].items()}, inst)


def _rcpsp_to_dict(schedule, inst: RcpspInstance) -> dict:
    out = schedule.to_dict()
    out["starts"] = {str(j): t for j, t in sorted(schedule.starts.items())}
    return out


def _optional(value):
    if value is None:
        raise InputError("no feasible solution exists")
    return {"value": value}


RCPSP = Problem(
    load=RcpspInstance.from_dict,
    build=build_rcpsp,
    decode=decode_rcpsp,
    to_dict=_rcpsp_to_dict,
    from_dict=_rcpsp_from_dict,
    violations=rcpsp_violations,
    value=lambda schedule: schedule.starts[max(schedule.starts)],
    describe=lambda schedule, inst: [f"job {j}: start {schedule.starts[j]:g}, end {schedule.starts[j] + inst.duration(j):g}"
                                     for j in range(1, inst.end)] + [f"makespan: {schedule.makespan:g}"],
    svg=lambda schedule, inst: render_gantt(schedule, rcpsp_usage_profile(schedule, inst), inst.capacities,
                                            title=f"makespan {schedule.makespan:g}"),
    oracle=lambda inst: _optional(oracles.enumerate_rcpsp(inst)),
)


# ------------------------------------------------------------------ job shop

def _jobshop_to_dict(schedule, inst: JobShopInstance) -> dict:
    out = schedule.to_dict()
    out["starts"] = [{"job": j + 1, "machine": i + 1, "start": s} for (j, i), s in sorted(schedule.starts.items())]
    return out


def _jobshop_from_dict(data: dict, inst: JobShopInstance):
    starts = {(int(e["job"]) - 1, int(e["machine"]) - 1): float(e["start"]) for e in data["starts"]}
    expected = {(j, i) for j in range(inst.num_jobs) for i in range(inst.num_machines)}
    if set(starts) != expected:
        raise InputError("starts must list every (job, machine) operation exactly once")
    return jobshop_schedule(starts, inst)


def _jobshop_describe(schedule, inst: JobShopInstance) -> list[str]:
    lines = []
    for i in range(inst.num_machines):
        ops = sorted((schedule.starts[j, i], j) for j in range(inst.num_jobs))
        lines.append(f"M{i + 1}: " + ", ".join(f"J{j + 1}@{s:g}" for s, j in ops))
    return lines + [f"makespan: {schedule.makespan:g}"]


JOBSHOP = Problem(
    load=JobShopInstance.from_dict,
    build=build_jobshop,
    decode=decode_jobshop,
    to_dict=_jobshop_to_dict,
    from_dict=_jobshop_from_dict,
    violations=jobshop_violations,
    value=lambda schedule: schedule.makespan,
    describe=_jobshop_describe,
    svg=lambda schedule, inst: render_gantt(schedule, title=f"makespan {schedule.makespan:g}"),
    oracle=lambda inst: {"value": oracles.enumerate_jobshop(inst)},
)


# ------------------------------------------------------------------ facility

def _facility_from_dict(data: dict, inst: FacilityInstance):
    sites = {sid: s for s, sid in enumerate(inst.site_ids)}
    customers = {cid: c for c, cid in enumerate(inst.customer_ids)}
    installed = {s: 0.0 for s in range(inst.num_sites)}
    for sid, z in data["installed_capacity"].items():
        installed[sites[sid]] = float(z)
    shipments = {}
    for entry in data["shipments"]:
        key = (sites[str(entry["site"])], customers[str(entry["customer"])])
        shipments[key] = shipments.get(key, 0.0) + float(entry["units"])
    return plan_from(installed, shipments, inst)


def _facility_describe(plan, inst: FacilityInstance) -> list[str]:
    lines = [f"site {inst.site_ids[s]}: capacity {plan.installed_capacity[s]:g}, "
             f"ships {sum(v for (t, _), v in plan.shipments.items() if t == s):g}"
             for s in sorted(plan.open_sites)]
    return lines + [f"transport cost: {plan.transport_cost:.4f}", f"build cost: {plan.build_cost:.4f}",
                    f"total cost: {plan.total_cost:.4f}"]


FACILITY = Problem(
    load=FacilityInstance.from_dict,
    build=build_facility,
    decode=decode_facility,
    to_dict=lambda plan, inst: plan.to_dict(inst),
    from_dict=_facility_from_dict,
    violations=facility_violations,
    value=lambda plan: plan.total_cost,
    describe=_facility_describe,
    svg=lambda plan, inst: render_facility(plan, inst, title=f"total cost {plan.total_cost:.2f}"),
    oracle=lambda inst: _optional(oracles.enumerate_facility(inst)),
)

PROBLEMS: dict[str, Problem] = {
    "knapsack": KNAPSACK,
    "tsp": TSP,
    "rcpsp": RCPSP,
    "jobshop": JOBSHOP,
    "facility": FACILITY,
}


# ------------------------------------------------------------------- helpers

def bundled_instances() -> dict[str, Path]:
    folder = resources.files("cellplan") / "instances"
    return {p.name: Path(str(p)) for p in folder.iterdir() if p.name.endswith(".json")}


def resolve_instance(name: str) -> Path:
    """A path on disk, or else the name of a bundled instance file."""
    path = Path(name)
    if path.exists():
        return path
    bundled = bundled_instances()
    if name in bundled:
        return bundled[name]
    raise InputError(f"instance file not found: {name}")


def load_instance(problem: str, name: str):
    path = resolve_instance(name)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, UnicodeDecodeError) as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise InputError(f"{path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise InputError(f"{path}: the instance must be a JSON object")
    return PROBLEMS[problem].load(data)


def validate_report(problem: str, instance, report: dict) -> list[str]:
    """Replay a report's plan against its instance; returns the problems found."""
    handler = PROBLEMS[problem]
    if report.get("plan") is None:
        return []
    try:
        plan = handler.from_dict(report["plan"], instance)
    except (KeyError, TypeError, ValueError, InputError) as exc:
        return [f"plan does not match the instance: {exc}"]
    out = handler.violations(plan, instance)
    objective = report.get("objective")
    value = handler.value(plan)
    if objective is not None and not abs(value - objective) <= VALUE_TOL * max(1.0, abs(objective)):
        out.append(f"plan value {value} differs from reported objective {objective}")
    return out


def solve_instance(problem: str, instance, params: SolveParams) -> tuple[RunReport, Any]:
    handler = PROBLEMS[problem]
    start = time.monotonic()
    model, variables = handler.build(instance)
    solution = solve_mip(model, params)
    plan = handler.decode(solution, variables, instance) if solution.has_incumbent else None
    report = RunReport(
        problem=problem,
        status=solution.status.value,
        objective=solution.objective,
        bound=solution.bound,
        gap=solution.gap,
        nodes=solution.nodes,
        lp_iterations=solution.lp_iterations,
        wall_time=time.monotonic() - start,
        plan=handler.to_dict(plan, instance) if plan is not None else None,
    )
    return report, (solution, plan)


def _fmt(value) -> str:
    return "-" if value is None else f"{value:g}"


def _write(path: str, text: str) -> None:
    try:
        Path(path).write_text(text, encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot write {path}: {exc}") from exc


# ---------------------------------------------------------------------- main

def _parser() -> _Parser:
    parser = _Parser(prog="cellplan", description="Production-planning MILP models on an in-house solver.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    solve = sub.add_parser("solve", help="build and solve a model, print the plan")
    solve.add_argument("problem", choices=sorted(PROBLEMS))
    solve.add_argument("instance", help="instance JSON path, or the name of a bundled instance")
    solve.add_argument("--time-limit", type=float, default=None, metavar="SECONDS")
    solve.add_argument("--gap", type=float, default=None, metavar="REL", help="relative optimality gap")
    solve.add_argument("--output", metavar="FILE.json")
    solve.add_argument("--svg", metavar="FILE.svg")
    oracle = sub.add_parser("oracle", help="solve with the brute-force reference method")
    oracle.add_argument("problem", choices=sorted(PROBLEMS))
    oracle.add_argument("instance")
    sub.add_parser("instances", help="list the bundled instance files")
    return parser


def _solve(args) -> int:
    instance = load_instance(args.problem, args.instance)
    try:
        params = SolveParams(time_limit=args.time_limit,
                             **({} if args.gap is None else {"rel_gap": args.gap}))
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    report, (solution, plan) = solve_instance(args.problem, instance, params)
    data = asdict(report)
    problems = validate_report(args.problem, instance, data)
    if problems:
        raise InputError("decoded plan failed replay: " + "; ".join(problems))

    limit_note = ""
    if solution.status in (MipStatus.FEASIBLE, MipStatus.NO_SOLUTION):
        limit_note = " (limit hit, incumbent kept)" if plan is not None else " (limit hit, no incumbent)"
    print(f"problem: {args.problem}")
    print(f"status: {report.status}{limit_note}")
    print(f"objective: {_fmt(report.objective)}  bound: {_fmt(report.bound)}  gap: {_fmt(report.gap)}")
    print(f"nodes: {report.nodes}  lp iterations: {report.lp_iterations}  time: {report.wall_time:.2f}s")
    if plan is not None:
        for line in PROBLEMS[args.problem].describe(plan, instance):
            print(line)
    if args.output:
        _write(args.output, json.dumps(data, ensure_ascii=False, indent=2))
    if args.svg and plan is not None:
        _write(args.svg, PROBLEMS[args.problem].svg(plan, instance))
    return EXIT_CODES[solution.status]


def _oracle(args) -> int:
    instance = load_instance(args.problem, args.instance)
    try:
        result = PROBLEMS[args.problem].oracle(instance)
    except InputError as exc:
        if "no feasible" in str(exc):
            print(f"problem: {args.problem}\nstatus: infeasible")
            return EXIT_INFEASIBLE
        raise
    print(f"problem: {args.problem}")
    print(f"oracle value: {result['value']:g}")
    if "items" in result:
        print(f"items: {', '.join(map(str, result['items'])) or '(none)'}")
    return EXIT_OK


def run(argv: list[str] | None = None) -> int:
    try:
        args = _parser().parse_args(argv)
        if args.command == "instances":
            for name, path in sorted(bundled_instances().items()):
                print(f"{name}\t{path}")
            return EXIT_OK
        return _solve(args) if args.command == "solve" else _oracle(args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_ERROR
    except (InputError, ResourceLimitError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
