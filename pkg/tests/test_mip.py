import itertools

import pytest
from hypothesis import given, settings, strategies as st

from cellplan.errors import InputError
from cellplan.lp import INF, LpProblem, Row, Relation, Sense, solve_lp
from cellplan.mip import MipStatus, Model, SolveParams, SosKind, VarKind, new_model, solve_mip

P = [10, 13, 18, 31, 7, 15]
W = [11, 15, 20, 35, 10, 33]


def knapsack_model() -> Model:
    model = new_model("max")
    xs = [model.add_variable(f"x{i}", kind="binary") for i in range(6)]
    model.add_linear_constraint(list(zip(xs, W)), "<=", 47)
    model.set_objective(list(zip(xs, P)))
    return model


class TestModelBuilding:
    def test_empty_models(self):
        model = new_model("max")
        assert model.num_vars == 0 and not model.constraints
        assert new_model("min").sense is Sense.MINIMIZE

    def test_empty_model_solves_to_constant(self):
        solution = solve_mip(new_model("max"))
        assert solution.status is MipStatus.OPTIMAL
        assert solution.objective == 0

    def test_sequential_indices(self):
        model = Model()
        assert model.add_variable("x1", 0, 1, VarKind.BINARY) == 0
        assert model.add_variable("C", 0, INF) == 1

    def test_inverted_bounds(self):
        with pytest.raises(InputError):
            Model().add_variable("y", 5, 3, VarKind.INTEGER)

    def test_duplicate_name(self):
        model = Model()
        model.add_variable("x")
        with pytest.raises(InputError):
            model.add_variable("x")

    def test_binary_bounds(self):
        with pytest.raises(InputError):
            Model().add_variable("b", 0, 2, VarKind.BINARY)

    def test_capacity_row(self):
        model = knapsack_model()
        assert len(model.constraints) == 1
        assert len(model.constraints[0].terms) == 6

    def test_constant_infeasible_row(self):
        model = Model()
        model.add_variable("x", 0, 1)
        model.add_linear_constraint([], "<=", -1)
        assert solve_mip(model).status is MipStatus.INFEASIBLE

    def test_bad_index(self):
        model = Model()
        model.add_variable("a")
        model.add_variable("b")
        with pytest.raises(InputError):
            model.add_linear_constraint([(99, 1.0)], "<=", 1)
        with pytest.raises(InputError):
            model.set_objective([(99, 1.0)])

    def test_sos_validation(self):
        model = Model()
        idx = [model.add_variable(f"l{k}", 0, 1) for k in range(4)]
        assert model.add_sos("sos2", list(zip(idx, [0, 600, 1200, 2000]))) == 0
        assert model.add_sos(SosKind.SOS1, list(zip(idx[:2], [1, 2]))) == 1
        with pytest.raises(InputError):
            model.add_sos("sos2", [(idx[0], 0)])
        with pytest.raises(InputError):
            model.add_sos("sos1", [(idx[0], 2), (idx[1], 1)])
        with pytest.raises(InputError):
            model.add_sos("sos1", [(idx[0], 1), (idx[0], 2)])

    def test_objective_replaced_and_constant(self):
        model = Model("max")
        x = model.add_variable("x", 0, 1)
        model.set_objective([(x, 100.0)])
        model.set_objective([], 7)
        solution = solve_mip(model)
        assert solution.objective == 7

    def test_params_validation(self):
        with pytest.raises(InputError):
            SolveParams(time_limit=0)
        with pytest.raises(InputError):
            SolveParams(node_limit=-1)


class TestSolve:
    def test_sample_knapsack(self):
        solution = solve_mip(knapsack_model())
        assert solution.status is MipStatus.OPTIMAL
        assert solution.objective == 41
        assert solution.values == (1.0, 0.0, 0.0, 1.0, 0.0, 0.0)
        assert solution.bound == pytest.approx(41)

    def test_two_binaries(self):
        model = Model("max")
        x = model.add_variable("x", kind="binary")
        y = model.add_variable("y", kind="binary")
        model.add_constraint([(x, 1), (y, 1)], "<=", 1.5)
        model.set_objective([(x, 1), (y, 1)])
        assert solve_mip(model).objective == 1

    def test_continuous_model_equals_lp(self):
        model = Model("max")
        xs = [model.add_variable(f"x{i}", 0, 1) for i in range(6)]
        model.add_constraint(list(zip(xs, W)), "<=", 47)
        model.set_objective(list(zip(xs, P)))
        lp = solve_lp(LpProblem(6, P, Sense.MAXIMIZE, [(0, 1)] * 6,
                                [Row(tuple(enumerate(map(float, W))), Relation.LE, 47)]))
        solution = solve_mip(model)
        assert solution.nodes == 1
        assert solution.objective == pytest.approx(lp.objective, abs=1e-9)

    def test_general_integer(self):
        model = Model("max")
        x = model.add_variable("x", 0, 10, "integer")
        y = model.add_variable("y", 0, 10, "integer")
        model.add_constraint([(x, 2), (y, 2)], "<=", 7)
        model.set_objective([(x, 3), (y, 2)])
        solution = solve_mip(model)
        assert solution.objective == 9
        assert solution.values[:2] == (3.0, 0.0)

    def test_unbounded(self):
        model = Model("max")
        x = model.add_variable("x", 0, INF, "integer")
        model.set_objective([(x, 1)])
        assert solve_mip(model).status is MipStatus.UNBOUNDED

    def test_infeasible_integrality(self):
        model = Model()
        x = model.add_variable("x", 0, 10, "integer")
        model.add_constraint([(x, 2)], "==", 3)
        assert solve_mip(model).status is MipStatus.INFEASIBLE

    def test_node_limit_keeps_incumbent_or_reports_none(self):
        solution = solve_mip(knapsack_model(), SolveParams(node_limit=1))
        assert solution.status in (MipStatus.FEASIBLE, MipStatus.NO_SOLUTION)
        assert solution.has_incumbent == (solution.status is MipStatus.FEASIBLE)
        assert solution.bound >= 41 - 1e-6

    def test_gap_reported(self):
        solution = solve_mip(knapsack_model())
        assert solution.gap == 0


# ------------------------------------------------------------ property tests

@st.composite
def binary_models(draw):
    n = draw(st.integers(1, 12))
    m = draw(st.integers(0, 6))
    ints = st.integers(-9, 9)
    rows = []
    for _ in range(m):
        coefs = [draw(ints) for _ in range(n)]
        rows.append((coefs, draw(st.sampled_from(["<=", ">=", "=="])), draw(st.integers(-5, 15))))
    return n, rows, [draw(ints) for _ in range(n)], draw(st.sampled_from(["min", "max"]))


def build_binary(n, rows, c, sense) -> Model:
    model = Model(sense)
    xs = [model.add_variable(f"x{i}", kind="binary") for i in range(n)]
    for coefs, rel, rhs in rows:
        model.add_constraint([(x, a) for x, a in zip(xs, coefs) if a], rel, rhs)
    model.set_objective(list(zip(xs, c)))
    return model


def enumerate_binary(model: Model):
    best = None
    for point in itertools.product((0.0, 1.0), repeat=model.num_vars):
        if not model.violations(point):
            value = model.evaluate(point)
            if best is None or (value > best if model.sense is Sense.MAXIMIZE else value < best):
                best = value
    return best


@settings(max_examples=120)
@given(binary_models())
def test_pure_binary_matches_enumeration(case):
    model = build_binary(*case)
    solution = solve_mip(model)
    expected = enumerate_binary(model)
    if expected is None:
        assert solution.status is MipStatus.INFEASIBLE
    else:
        assert solution.status is MipStatus.OPTIMAL
        assert solution.objective == pytest.approx(expected, abs=1e-6)
        assert not model.violations(solution.values)
        assert model.evaluate(solution.values) == pytest.approx(solution.objective, abs=1e-6)


@settings(max_examples=60)
@given(binary_models())
def test_solutions_are_deterministic(case):
    first = solve_mip(build_binary(*case), SolveParams(record_tree=True))
    second = solve_mip(build_binary(*case), SolveParams(record_tree=True))
    assert first == second


@settings(max_examples=60)
@given(binary_models())
def test_node_bounds_monotone_along_paths(case):
    model = build_binary(*case)
    solution = solve_mip(model, SolveParams(record_tree=True))
    by_id = {r.node: r for r in solution.tree}
    worse = (lambda child, parent: child <= parent + 1e-6) if model.sense is Sense.MAXIMIZE \
        else (lambda child, parent: child >= parent - 1e-6)
    for record in solution.tree:
        if record.parent is not None:
            parent = by_id[record.parent]
            assert record.depth == parent.depth + 1
            assert worse(record.bound, parent.bound)


@st.composite
def sos2_models(draw):
    k = draw(st.integers(2, 6))
    zs = sorted(draw(st.lists(st.integers(1, 50), min_size=k - 1, max_size=k - 1, unique=True)))
    costs = [0] + [draw(st.integers(0, 60)) for _ in zs]
    demand = draw(st.integers(0, zs[-1]))
    linear = draw(st.integers(-3, 3))
    return [0] + zs, costs, demand, linear


@settings(max_examples=120)
@given(sos2_models())
def test_single_sos2_matches_adjacent_pairs(case):
    zs, costs, demand, linear = case
    model = Model()
    lam = [model.add_variable(f"l{k}", 0, 1) for k in range(len(zs))]
    z = model.add_variable("z", 0, INF)
    model.add_constraint([(v, 1) for v in lam], "==", 1)
    model.add_constraint([(v, w) for v, w in zip(lam, zs)] + [(z, -1)], "==", 0)
    model.add_constraint([(z, 1)], ">=", demand)
    model.add_sos("sos2", list(zip(lam, zs)))
    model.set_objective([(v, cost) for v, cost in zip(lam, costs)] + [(z, linear)])
    solution = solve_mip(model)

    # on segment [z0, z1] the objective is linear, so one of its ends (clipped to demand) is optimal
    best = None
    for k in range(len(zs) - 1):
        z0, z1 = zs[k], zs[k + 1]
        for point in (max(z0, demand), z1):
            if z0 <= point <= z1 and point >= demand:
                cost = costs[k] + (costs[k + 1] - costs[k]) * (point - z0) / (z1 - z0) + linear * point
                best = cost if best is None else min(best, cost)
    assert solution.status is MipStatus.OPTIMAL
    assert solution.objective == pytest.approx(best, abs=1e-6)
    assert not model.violations(solution.values)


@settings(max_examples=80)
@given(st.lists(st.integers(-9, 9), min_size=2, max_size=6), st.integers(1, 3))
def test_sos1_picks_single_member(weights, cap):
    model = Model("max")
    xs = [model.add_variable(f"x{i}", 0, cap) for i in range(len(weights))]
    model.add_constraint([(x, 1) for x in xs], "<=", cap)
    model.add_sos("sos1", [(x, float(i)) for i, x in enumerate(xs)])
    model.set_objective(list(zip(xs, weights)))
    solution = solve_mip(model)
    assert solution.objective == pytest.approx(max(0, max(weights)) * cap)
    assert sum(1 for v in solution.values if abs(v) > 1e-6) <= 1
