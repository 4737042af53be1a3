"""Acceptance criteria, one test each; every test prints a single PASS/FAIL line."""

import json
import random
import time
import xml.etree.ElementTree as ET
from contextlib import contextmanager

import pytest

from cellplan.cli import EXIT_OK, load_instance, resolve_instance, run, validate_report
from cellplan.facility import FacilityInstance, build_facility, decode_facility, facility_violations, sqrt_cost_curve
from cellplan.knapsack import KnapsackInstance, build_knapsack, decode_knapsack
from cellplan.mip import MipStatus, SolveParams, solve_mip
from cellplan.oracles import enumerate_facility, enumerate_jobshop, enumerate_rcpsp, held_karp, knapsack_dp
from cellplan.scheduling import (JobShopInstance, RcpspInstance, build_jobshop, build_rcpsp, decode_jobshop,
                                 decode_rcpsp, jobshop_violations, rcpsp_violations)
from cellplan.lp import Sense
from cellplan.tsp import TspInstance, build_tsp, decode_tour, tour_violations

BUNDLED = {"knapsack": "knapsack.json", "tsp": "tsp.json", "rcpsp": "rcpsp.json",
           "jobshop": "jobshop.json", "facility": "facility.json"}


@contextmanager
def criterion(log: list, number: int, title: str):
    """Record one PASS/FAIL line, shown in the run's terminal summary."""
    notes: list[str] = []
    try:
        yield notes
    except BaseException as exc:
        reason = str(exc).splitlines()[0] if str(exc) else ""
        log.append(f"criterion {number} FAIL  {title}: {type(exc).__name__} {reason}")
        raise
    log.append(f"criterion {number} PASS  {title}" + (f" ({'; '.join(notes)})" if notes else ""))


def timed(fn, *args):
    start = time.perf_counter()
    out = fn(*args)
    return out, time.perf_counter() - start


# ------------------------------------------------------------ random families

def random_knapsack(rng: random.Random) -> KnapsackInstance:
    n = rng.randint(1, 15)
    weights = [rng.randint(1, 40) for _ in range(n)]
    profits = [rng.randint(0, 40) for _ in range(n)]
    return KnapsackInstance(profits, weights, rng.randint(0, sum(weights)))


def random_tsp(rng: random.Random) -> TspInstance:
    n = rng.randint(4, 8)
    points = [(rng.randint(0, 100), rng.randint(0, 100)) for _ in range(n)]
    matrix = [[0 if a == b else abs(pa[0] - pb[0]) + abs(pa[1] - pb[1]) + rng.randint(0, 9)
               for b, pb in enumerate(points)] for a, pa in enumerate(points)]
    return TspInstance(tuple(f"n{i}" for i in range(n)), matrix)


def random_jobshop(rng: random.Random) -> JobShopInstance:
    n, m = rng.randint(1, 3), rng.randint(1, 3)
    times = [[rng.randint(0, 5) for _ in range(m)] for _ in range(n)]
    routes = [rng.sample(range(m), m) for _ in range(n)]
    return JobShopInstance(times, routes)


def random_rcpsp(rng: random.Random) -> RcpspInstance:
    n = rng.randint(1, 5)
    caps = [rng.randint(1, 6) for _ in range(rng.randint(1, 2))]
    durations = [rng.randint(1, 4) for _ in range(n)]
    usages = [[rng.randint(0, c) for c in caps] for _ in range(n)]
    precedence = [(a, b) for a in range(1, n + 1) for b in range(a + 1, n + 1) if rng.random() < 0.3]
    return RcpspInstance(durations, usages, caps, precedence)


def random_facility(rng: random.Random) -> FacilityInstance:
    S, C = rng.randint(1, 3), rng.randint(1, 4)
    curves = []
    for _ in range(S):
        zs = sorted(rng.sample(range(1, 41), rng.randint(1, 3)))
        costs = [0]
        for _ in zs:
            costs.append(costs[-1] + rng.randint(0, 30))
        curves.append(tuple(zip([0] + zs, costs)))
    return FacilityInstance(
        tuple(f"s{i}" for i in range(S)), tuple((rng.randint(0, 20), rng.randint(0, 20)) for _ in range(S)),
        tuple(rng.randint(0, 40) for _ in range(S)), tuple(f"c{i}" for i in range(C)),
        tuple((rng.randint(0, 20), rng.randint(0, 20)) for _ in range(C)),
        tuple(rng.randint(0, 12) for _ in range(C)), tuple(curves), rng.choice([None, 1, 2]))


# ------------------------------------------------------------------ criteria

def test_1_bundled_knapsack(acceptance_log):
    with criterion(acceptance_log, 1, "bundled knapsack: optimum 41, items 1 and 4, load 46, < 1 s, DP agrees") as notes:
        instance = load_instance("knapsack", BUNDLED["knapsack"])
        model, items = build_knapsack(instance)
        solution, seconds = timed(solve_mip, model)
        plan = decode_knapsack(solution, items, instance)
        assert solution.status is MipStatus.OPTIMAL
        assert solution.objective == 41
        assert plan.labels == [1, 4]
        assert plan.load == 46
        assert seconds < 1.0
        assert knapsack_dp(instance)[0] == solution.objective
        notes.append(f"{seconds:.3f} s, {solution.nodes} nodes")


def test_2_bundled_tsp(acceptance_log):
    with criterion(acceptance_log, 2, "bundled 14-node TSP: Held-Karp confirms 547, MTZ model finds a 547 cycle within 120 s") as notes:
        instance = load_instance("tsp", BUNDLED["tsp"])
        assert instance.n == 14
        assert held_karp(instance.matrix) == 547
        model, tsp_vars = build_tsp(instance)
        solution, seconds = timed(solve_mip, model, SolveParams(time_limit=120))
        assert solution.status is MipStatus.OPTIMAL
        tour = decode_tour(solution, tsp_vars, instance)
        assert tour_violations(tour.order, instance) == []
        assert instance.length(tour.order) == 547 == solution.objective
        assert seconds < 120
        notes.append(f"{seconds:.1f} s, {solution.nodes} nodes")


def test_3_bundled_jobshop(acceptance_log):
    with criterion(acceptance_log, 3, "bundled 3x3 job shop: makespan 7 within 5 s, enumeration agrees") as notes:
        instance = load_instance("jobshop", BUNDLED["jobshop"])
        model, js_vars = build_jobshop(instance)
        solution, seconds = timed(solve_mip, model)
        assert solution.status is MipStatus.OPTIMAL
        assert solution.objective == pytest.approx(7, abs=1e-9)
        assert seconds < 5
        assert enumerate_jobshop(instance) == 7
        schedule = decode_jobshop(solution, js_vars, instance)
        assert jobshop_violations(schedule, instance) == []
        notes.append(f"{seconds:.3f} s")


def test_4_rcpsp_substitute_graph(acceptance_log):
    with criterion(acceptance_log, 4, "RCPSP with table data and substitute precedence: solver equals enumeration, schedule replays") as notes:
        instance = RcpspInstance.from_dict(json.loads(resolve_instance(BUNDLED["rcpsp"]).read_text("utf-8")))
        assert instance.capacities == (6, 8)
        assert instance.durations == (3, 2, 5, 4, 2, 3, 4, 2, 4, 6)
        model, x = build_rcpsp(instance)
        solution, seconds = timed(solve_mip, model)
        assert solution.status is MipStatus.OPTIMAL
        schedule = decode_rcpsp(solution, x, instance)
        assert solution.objective == enumerate_rcpsp(instance)
        assert rcpsp_violations(schedule, instance) == []
        notes.append(f"makespan {solution.objective:g}, {seconds:.1f} s")


def test_5_facility(acceptance_log):
    with criterion(acceptance_log, 5, "facility: at least two sites on bundled data, demands met, SOS2 held, toys match enumeration") as notes:
        instance = load_instance("facility", BUNDLED["facility"])
        assert sum(instance.demands) == 2917 and max(instance.site_capacities) == 1987
        for s in range(instance.num_sites):
            assert instance.curve(s) == sqrt_cost_curve(instance.site_capacities[s])
        model, fvars = build_facility(instance)
        solution = solve_mip(model)
        assert solution.status is MipStatus.OPTIMAL
        plan = decode_facility(solution, fvars, instance)  # raises unless SOS2 adjacency holds
        assert len(plan.open_sites) >= 2
        for c in range(instance.num_customers):
            got = sum(plan.shipments[s, c] for s in range(instance.num_sites))
            assert got == pytest.approx(instance.demands[c], abs=1e-6)
        assert facility_violations(plan, instance) == []

        rng = random.Random(5)
        for _ in range(60):
            toy = random_facility(rng)
            expected = enumerate_facility(toy)
            model, fvars = build_facility(toy)
            toy_solution = solve_mip(model)
            if expected is None:
                assert toy_solution.status is MipStatus.INFEASIBLE
                continue
            assert toy_solution.status is MipStatus.OPTIMAL
            assert abs(toy_solution.objective - expected) <= 1e-6
            toy_plan = decode_facility(toy_solution, fvars, toy)
            assert abs(toy_plan.total_cost - expected) <= 1e-6
        notes.append(f"bundled total {solution.objective:.4f}, sites {sorted(instance.site_ids[s] for s in plan.open_sites)}")


def test_6_oracle_equivalence_suites(acceptance_log):
    with criterion(acceptance_log, 6, "oracle suites: 200 knapsacks, 25 TSPs, 20 job-shops, 20 RCPSPs, all exact") as notes:
        start = time.perf_counter()
        rng = random.Random(6)
        for _ in range(200):
            instance = random_knapsack(rng)
            model, _ = build_knapsack(instance)
            assert solve_mip(model).objective == knapsack_dp(instance)[0]
        for _ in range(25):
            instance = random_tsp(rng)
            model, tsp_vars = build_tsp(instance)
            solution = solve_mip(model)
            assert solution.objective == held_karp(instance.matrix)
            assert tour_violations(decode_tour(solution, tsp_vars, instance).order, instance) == []
        for _ in range(20):
            instance = random_jobshop(rng)
            model, _ = build_jobshop(instance)
            assert solve_mip(model).objective == pytest.approx(enumerate_jobshop(instance), abs=1e-9)
        for _ in range(20):
            instance = random_rcpsp(rng)
            model, x = build_rcpsp(instance)
            solution = solve_mip(model)
            assert solution.objective == enumerate_rcpsp(instance)
            assert rcpsp_violations(decode_rcpsp(solution, x, instance), instance) == []
        elapsed = time.perf_counter() - start
        assert elapsed < 600
        notes.append(f"{elapsed:.1f} s")


def invariant_corpus():
    rng = random.Random(7)
    models = [build_knapsack(load_instance("knapsack", BUNDLED["knapsack"]))[0],
              build_jobshop(load_instance("jobshop", BUNDLED["jobshop"]))[0],
              build_facility(load_instance("facility", BUNDLED["facility"]))[0]]
    for _ in range(10):
        models.append(build_knapsack(random_knapsack(rng))[0])
        models.append(build_tsp(random_tsp(rng))[0])
        models.append(build_jobshop(random_jobshop(rng))[0])
        models.append(build_rcpsp(random_rcpsp(rng))[0])
        models.append(build_facility(random_facility(rng))[0])
    return models


def test_7_solver_invariants(acceptance_log):
    with criterion(acceptance_log, 7, "solver invariants: incumbents replay, bounds monotone on tree paths, runs bitwise identical") as notes:
        checked = edges = 0
        for model in invariant_corpus():
            first = solve_mip(model, SolveParams(record_tree=True))
            second = solve_mip(model, SolveParams(record_tree=True))
            assert first == second
            if first.has_incumbent:
                assert model.violations(first.values, tol=1e-6) == []
                assert abs(model.evaluate(first.values) - first.objective) <= 1e-6 * max(1.0, abs(first.objective))
            by_id = {r.node: r for r in first.tree}
            for record in first.tree:
                if record.parent is None:
                    continue
                parent = by_id[record.parent]
                if model.sense is Sense.MAXIMIZE:
                    assert record.bound <= parent.bound + 1e-6
                else:
                    assert record.bound >= parent.bound - 1e-6
                edges += 1
            checked += 1
        notes.append(f"{checked} models, {edges} tree edges")


def test_8_cli_contract(tmp_path, capsys, acceptance_log):
    with criterion(acceptance_log, 8, "CLI: all five bundled instances exit 0, SVGs parse, output JSON re-validates") as notes:
        for problem, name in BUNDLED.items():
            out, svg = tmp_path / f"{problem}.json", tmp_path / f"{problem}.svg"
            code = run(["solve", problem, name, "--output", str(out), "--svg", str(svg)])
            assert code == EXIT_OK, f"{problem} exited {code}"
            ET.fromstring(svg.read_text(encoding="utf-8"))
            report = json.loads(out.read_text(encoding="utf-8"))
            assert validate_report(problem, load_instance(problem, name), report) == []
            notes.append(f"{problem} {report['objective']:g}")
        capsys.readouterr()
