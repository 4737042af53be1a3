"""Brute-force reference solvers.

These deliberately avoid the branch-and-bound path: dynamic programming,
exhaustive enumeration and (for facility location only) plain LP solves.
They are exponential by design and guard their input sizes.
"""

from __future__ import annotations

import itertools
import math
from typing import Sequence

import numpy as np

from .errors import InputError
from .facility import FacilityInstance
from .knapsack import KnapsackInstance
from .lp import LpProblem, LpStatus, Row, Relation, Sense, solve_lp
from .scheduling import JobShopInstance, RcpspInstance

HELD_KARP_MAX = 16
RCPSP_MAX_JOBS = 10
RCPSP_MAX_HORIZON = 40
JOBSHOP_MAX_JOBS = 4
JOBSHOP_MAX_MACHINES = 3
FACILITY_MAX_SITES = 3
FACILITY_MAX_CUSTOMERS = 5
FACILITY_MAX_BREAKPOINTS = 5


def knapsack_dp(instance: KnapsackInstance) -> tuple[float, frozenset[int]]:
    """Exact 0/1 knapsack by DP over integer capacities."""
    weights = instance.weights
    if any(w != int(w) for w in weights):
        raise InputError("knapsack_dp needs integer weights")
    cap = int(math.floor(instance.capacity))
    n = instance.n
    best = [[0.0] * (cap + 1) for _ in range(n + 1)]
    for i in range(1, n + 1):
        w, p = int(weights[i - 1]), instance.profits[i - 1]
        prev, cur = best[i - 1], best[i]
        for c in range(cap + 1):
            cur[c] = prev[c]
            if w <= c and prev[c - w] + p > cur[c]:
                cur[c] = prev[c - w] + p
    chosen = set()
    c = cap
    for i in range(n, 0, -1):
        if best[i][c] != best[i - 1][c]:
            chosen.add(i - 1)
            c -= int(weights[i - 1])
    return best[n][cap], frozenset(chosen)


def fractional_greedy_knapsack_lp(instance: KnapsackInstance) -> float:
    """Optimum of the knapsack LP relaxation: fill by profit density, last item fractional."""
    value = 0.0
    room = instance.capacity
    items = sorted(range(instance.n), key=lambda i: -instance.profits[i] / instance.weights[i]
                   if instance.weights[i] > 0 else -math.inf)
    for i in items:
        p, w = instance.profits[i], instance.weights[i]
        if p <= 0:
            continue
        if w <= room:
            value += p
            room -= w
        else:
            value += p * room / w
            break
    return value


def held_karp(matrix: Sequence[Sequence[float]]) -> float:
    """Shortest Hamiltonian cycle length by DP over node subsets."""
    n = len(matrix)
    if n > HELD_KARP_MAX:
        raise InputError(f"held_karp supports at most {HELD_KARP_MAX} nodes, got {n}")
    if n < 2:
        raise InputError("a tour needs at least two nodes")
    if n == 2:
        return matrix[0][1] + matrix[1][0]
    d = np.asarray(matrix, dtype=float)
    k = n - 1  # node 0 is fixed as the start
    full = 1 << k
    # cost[S, j]: shortest path 0 -> ... -> j+1 visiting exactly the nodes of S
    cost = np.full((full, k), math.inf)
    for j in range(k):
        cost[1 << j, j] = d[0, j + 1]
    sub = d[1:, 1:]
    for S in range(1, full):
        row = cost[S]
        if not np.isfinite(row).any():
            continue
        for nxt in range(k):
            bit = 1 << nxt
            if S & bit:
                continue
            cand = (row + sub[:, nxt]).min()
            if cand < cost[S | bit, nxt]:
                cost[S | bit, nxt] = cand
    return float((cost[full - 1] + d[1:, 0]).min())


def brute_force_tour(matrix: Sequence[Sequence[float]]) -> float:
    """Shortest cycle by trying every permutation (cross-check for held_karp)."""
    n = len(matrix)
    return min(
        sum(matrix[a][b] for a, b in zip((0,) + perm, perm + (0,)))
        for perm in itertools.permutations(range(1, n))
    )


def enumerate_rcpsp(instance: RcpspInstance) -> float | None:
    """Minimum makespan by depth-first enumeration of integer start times.

    Jobs are fixed in topological order; each job tries every start from its
    precedence release to the latest start that can still beat the best
    makespan found.  Returns None if no schedule fits the horizon.
    """
    if instance.n > RCPSP_MAX_JOBS or instance.planning_horizon > RCPSP_MAX_HORIZON:
        raise InputError(f"enumerate_rcpsp supports <= {RCPSP_MAX_JOBS} jobs and horizon <= {RCPSP_MAX_HORIZON}")
    T = instance.planning_horizon
    order = instance.topological_order()
    preds = {j: [a for a, b in instance.arcs if b == j] for j in order}
    succs = {j: [b for a, b in instance.arcs if a == j] for j in order}
    # tail[j]: longest duration path from the start of j to the end marker
    tail = {}
    for j in reversed(order):
        tail[j] = instance.duration(j) + max((tail[s] for s in succs[j]), default=0)
    R = instance.num_resources
    free = [[instance.capacities[r]] * T for r in range(R)]
    start = {}
    best = [T + 1]

    def fits(j: int, s: int) -> bool:
        return all(free[r][t] >= instance.usage(j, r)
                   for r in range(R) for t in range(s, s + instance.duration(j)))

    def book(j: int, s: int, sign: int) -> None:
        for r in range(R):
            u = instance.usage(j, r)
            if u:
                for t in range(s, s + instance.duration(j)):
                    free[r][t] -= sign * u

    def dfs(pos: int) -> None:
        if pos == len(order):
            best[0] = min(best[0], start[instance.end])
            return
        j = order[pos]
        p = instance.duration(j)
        release = max((start[a] + instance.duration(a) for a in preds[j]), default=0)
        last = min(T - p, best[0] - tail[j])
        if j == instance.end:
            last = min(last, best[0] - 1)
        for s in range(release, last + 1):
            if fits(j, s):
                start[j] = s
                book(j, s, 1)
                dfs(pos + 1)
                book(j, s, -1)
                del start[j]
                if j == instance.end:
                    break

    dfs(0)
    return float(best[0]) if best[0] <= T else None


def _jobshop_makespan(instance: JobShopInstance, sequences: Sequence[Sequence[int]]) -> float | None:
    """Longest-path makespan for fixed machine sequences; None if they deadlock."""
    n, m = instance.num_jobs, instance.num_machines
    preds = {(j, i): [] for j in range(n) for i in range(m)}
    for j, route in enumerate(instance.routes):
        for prev, cur in zip(route, route[1:]):
            preds[j, cur].append((j, prev))
    for i, seq in enumerate(sequences):
        for a, b in zip(seq, seq[1:]):
            preds[b, i].append((a, i))
    finish = {}
    pending = dict(preds)
    while pending:
        ready = [op for op, ps in pending.items() if all(p in finish for p in ps)]
        if not ready:
            return None
        for op in ready:
            j, i = op
            begin = max((finish[p] for p in pending[op]), default=0.0)
            finish[op] = begin + instance.times[j][i]
            del pending[op]
    return max(finish.values(), default=0.0)


def enumerate_jobshop(instance: JobShopInstance) -> float:
    """Minimum makespan over all per-machine job permutations."""
    n, m = instance.num_jobs, instance.num_machines
    if n > JOBSHOP_MAX_JOBS or m > JOBSHOP_MAX_MACHINES:
        raise InputError(f"enumerate_jobshop supports <= {JOBSHOP_MAX_JOBS} jobs and <= {JOBSHOP_MAX_MACHINES} machines")
    perms = list(itertools.permutations(range(n)))
    best = math.inf
    for sequences in itertools.product(perms, repeat=m):
        span = _jobshop_makespan(instance, sequences)
        if span is not None and span < best:
            best = span
    return best


def _segment_cost(curve: Sequence[tuple[float, float]], k: int) -> tuple[float, float, float, float]:
    (z0, c0), (z1, c1) = curve[k], curve[k + 1]
    return z0, z1, c0, (c1 - c0) / (z1 - z0)


def enumerate_facility(instance: FacilityInstance) -> float | None:
    """Minimum total cost over open-site subsets and one cost-curve segment per open site.

    For each combination the remaining transport problem, with construction
    cost linear on the chosen segments, is a plain LP.  Returns None if no
    combination is feasible.
    """
    S, C = instance.num_sites, instance.num_customers
    if S > FACILITY_MAX_SITES or C > FACILITY_MAX_CUSTOMERS or any(
            len(instance.curve(s)) > FACILITY_MAX_BREAKPOINTS for s in range(S)):
        raise InputError(f"enumerate_facility supports <= {FACILITY_MAX_SITES} sites, "
                         f"<= {FACILITY_MAX_CUSTOMERS} customers and <= {FACILITY_MAX_BREAKPOINTS} breakpoints")
    if sum(instance.demands) == 0:
        return 0.0
    best = None
    for size in range(S + 1):
        if instance.max_open is not None and size > instance.max_open:
            break
        if instance.min_open is not None and size < instance.min_open:
            continue
        for open_sites in itertools.combinations(range(S), size):
            segments = [range(len(instance.curve(s)) - 1) for s in open_sites]
            for choice in itertools.product(*segments):
                value = _facility_lp(instance, dict(zip(open_sites, choice)))
                if value is not None and (best is None or value < best):
                    best = value
    return best


def _facility_lp(instance: FacilityInstance, segment: dict[int, int]) -> float | None:
    S, C = instance.num_sites, instance.num_customers
    # variables: shipments (s, c) row-major, then one installed capacity z per open site
    ship = {(s, c): s * C + c for s in range(S) for c in range(C)}
    zvar = {s: S * C + k for k, s in enumerate(sorted(segment))}
    nvar = S * C + len(zvar)
    obj = [0.0] * nvar
    bounds = [(0.0, math.inf)] * nvar
    constant = 0.0
    for (s, c), v in ship.items():
        obj[v] = instance.distance(s, c)
        if s not in segment:
            bounds[v] = (0.0, 0.0)
    for s, v in zvar.items():
        z0, z1, c0, slope = _segment_cost(instance.curve(s), segment[s])
        upper = min(z1, instance.site_capacities[s])
        if z0 > upper:
            return None
        bounds[v] = (z0, upper)
        obj[v] = slope
        constant += c0 - slope * z0
    rows = [Row(tuple((ship[s, c], 1.0) for s in range(S)), Relation.EQ, instance.demands[c]) for c in range(C)]
    for s, v in zvar.items():
        rows.append(Row(tuple((ship[s, c], 1.0) for c in range(C)) + ((v, -1.0),), Relation.LE, 0.0))
    out = solve_lp(LpProblem(nvar, obj, Sense.MINIMIZE, bounds, rows))
    if out.status is not LpStatus.OPTIMAL:
        return None
    return out.objective + constant
