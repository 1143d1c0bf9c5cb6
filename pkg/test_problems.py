"""Tests for the hinge, hard-function and max-of-linear oracles."""
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from geometry.projections import FeasibleSet, SetKind, project_array
from geometry.vecmath import DimensionMismatchError, Vector
from problems.base import ProblemError
from problems.hard import HardFunctionProblem, gd_lower_bound
from problems.hinge import HingeLossProblem
from problems.max_linear import MaxOfLinearProblem
from storage.libsvm import make_synthetic_dataset


def single_sample_problem(tau=10.0):
    return HingeLossProblem([(Vector.dense([1.0, 0.0]), 1)], tau)


def test_hinge_value_examples():
    problem = single_sample_problem()
    assert problem.value(Vector.zeros(2)) == 1.0
    assert problem.value(Vector.dense([2.0, 0.0])) == 0.0

    two = HingeLossProblem(
        [(Vector.dense([1.0, 0.0]), 1), (Vector.dense([0.0, 1.0]), -1)], tau=10.0
    )
    assert two.value(Vector.dense([0.5, 0.5])) == pytest.approx(1.0)


def test_hinge_subgradient_examples():
    problem = single_sample_problem()
    assert problem.subgradient(Vector.zeros(2)).to_dense().tolist() == [-1.0, 0.0]
    assert problem.subgradient(Vector.dense([2.0, 0.0])).to_dense().tolist() == [0.0, 0.0]


def test_hinge_kink_at_unit_margin():
    """Margin exactly 1 contributes a zero subgradient."""
    problem = single_sample_problem()
    assert problem.subgradient(Vector.dense([1.0, 0.0])).to_dense().tolist() == [0.0, 0.0]


def test_hinge_feasible_set_is_l1_ball():
    problem = single_sample_problem(tau=3.0)
    assert problem.feasible_set.kind is SetKind.L1_BALL
    assert problem.feasible_set.radius == 3.0


def test_hinge_rejects_bad_input():
    with pytest.raises(ProblemError):
        HingeLossProblem([], tau=1.0)
    with pytest.raises(ProblemError):
        HingeLossProblem([(Vector.dense([1.0]), 2)], tau=1.0)
    with pytest.raises(ProblemError):
        HingeLossProblem([(Vector.dense([1.0]), 1), (Vector.dense([1.0, 0.0]), -1)], tau=1.0)
    with pytest.raises(DimensionMismatchError):
        single_sample_problem().value(Vector.zeros(3))


def test_full_batch_matches_exact_subgradient():
    dataset = make_synthetic_dataset(40, 15, density=0.3, seed=2)
    problem = HingeLossProblem.from_dataset(dataset, tau=5.0)
    w = np.random.default_rng(0).uniform(-0.2, 0.2, size=15)
    rng = np.random.default_rng(1)
    exact = problem.subgradient_array(w)
    batched = problem.stochastic_subgradient_array(w, problem.sample_count, rng)
    np.testing.assert_array_equal(batched, exact)


def test_single_sample_batch_is_one_term():
    dataset = make_synthetic_dataset(30, 10, density=0.5, seed=5)
    problem = HingeLossProblem.from_dataset(dataset, tau=5.0)
    w = np.zeros(10)
    estimate = problem.stochastic_subgradient_array(w, 1, np.random.default_rng(9))
    # At w = 0 every term is active, so the estimate is −yᵢxᵢ for one sample
    candidates = [-label * features.to_dense() for features, label in dataset.samples]
    assert any(np.allclose(estimate, candidate) for candidate in candidates)


def test_batch_out_of_range():
    problem = single_sample_problem()
    rng = np.random.default_rng(0)
    with pytest.raises(ProblemError):
        problem.stochastic_subgradient_array(np.zeros(2), 0, rng)
    with pytest.raises(ProblemError):
        problem.stochastic_subgradient_array(np.zeros(2), 2, rng)


def test_hinge_subgradient_bound_covers_every_batch():
    dataset = make_synthetic_dataset(25, 12, density=0.4, seed=3)
    problem = HingeLossProblem.from_dataset(dataset, tau=2.0)
    rng = np.random.default_rng(4)
    for _ in range(50):
        w = rng.uniform(-0.3, 0.3, size=12)
        g = problem.stochastic_subgradient_array(w, 3, rng)
        assert np.linalg.norm(g) <= problem.subgradient_bound + 1e-12


def test_hard_function_rows_for_two_steps():
    problem = HardFunctionProblem(2, 1.0)
    np.testing.assert_allclose(problem.row(0), [-1.0 / (2.0 * math.sqrt(2.0)), 0.0])
    np.testing.assert_allclose(problem.row(1), [1.0 / 16.0, -0.5])
    np.testing.assert_allclose(problem.row(2), [1.0 / 16.0, 1.0 / 8.0])


def test_hard_function_values():
    problem = HardFunctionProblem(2, 1.0)
    assert problem.value_array(np.zeros(2)) == 0.0
    assert problem.value_array(np.array([1.0, 0.0])) == pytest.approx(1.0 / 16.0)
    assert problem.value_array(np.array([0.0, 1.0])) == pytest.approx(1.0 / 8.0)


def test_hard_function_active_rows_take_smallest_index():
    problem = HardFunctionProblem(2, 1.0)
    assert problem.active_row(np.zeros(2)) == 0
    np.testing.assert_array_equal(problem.subgradient_array(np.zeros(2)), problem.row(0))
    # h₂ and h₃ tie at 1/16
    assert problem.active_row(np.array([1.0, 0.0])) == 1


def test_hard_function_inner_products_match_rows():
    problem = HardFunctionProblem(7, 2.0)
    w = np.random.default_rng(8).standard_normal(7)
    expected = [problem.row(i) @ w for i in range(8)]
    np.testing.assert_allclose(problem.inner_products(w), expected, atol=1e-14)


def test_hard_function_validation():
    with pytest.raises(ProblemError):
        HardFunctionProblem(0)
    with pytest.raises(ProblemError):
        HardFunctionProblem(10, c=0.5)
    with pytest.raises(ProblemError):
        HardFunctionProblem(2).row(3)


def test_gd_lower_bound_examples():
    assert gd_lower_bound(1000, 2.0) == pytest.approx(3.413e-3, rel=1e-3)
    assert gd_lower_bound(100, 1.0) == pytest.approx(1.439e-2, rel=1e-3)
    assert HardFunctionProblem(1000, 2.0).lower_bound() == gd_lower_bound(1000, 2.0)
    with pytest.raises(ProblemError):
        gd_lower_bound(1, 1.0)


def test_max_linear_picks_first_maximiser():
    slopes = np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 0.0]])
    problem = MaxOfLinearProblem(slopes, np.zeros(3), FeasibleSet.box(-1.0, 1.0, dimension=2))
    assert problem.value_array(np.array([0.5, 0.2])) == 0.5
    np.testing.assert_array_equal(problem.subgradient_array(np.array([0.5, 0.2])), [1.0, 0.0])
    assert problem.subgradient_bound == 1.0


def test_linf_distance_has_zero_optimum():
    feasible_set = FeasibleSet.l1_ball(3, 1.0)
    problem = MaxOfLinearProblem.linf_distance(np.array([0.2, -0.1, 0.0]), feasible_set)
    assert problem.value_array(np.array([0.2, -0.1, 0.0])) == pytest.approx(0.0, abs=1e-15)
    assert problem.value_array(np.zeros(3)) == pytest.approx(0.2)
    assert problem.reference_optimum() == 0.0
    with pytest.raises(ProblemError):
        MaxOfLinearProblem.linf_distance(np.array([2.0, 0.0, 0.0]), feasible_set)


@pytest.mark.parametrize(
    "feasible_set",
    [
        FeasibleSet.box(-1.0, 1.0, dimension=4),
        FeasibleSet.l1_ball(4, 1.0),
        FeasibleSet.l2_ball(4, 1.0),
    ],
)
def test_reference_optimum_is_a_lower_envelope(feasible_set):
    """No sampled feasible point beats the solver value by more than rounding."""
    rng = np.random.default_rng(11)
    problem = MaxOfLinearProblem.random(4, 12, rng, feasible_set)
    fstar = problem.reference_optimum()
    samples = rng.uniform(-1.5, 1.5, size=(2000, 4))
    values = [problem.value_array(project_array(feasible_set, w)) for w in samples]
    assert fstar <= min(values) + 1e-7
    assert fstar <= problem.value_array(np.zeros(4))


def test_reference_optimum_needs_bounded_set():
    problem = MaxOfLinearProblem(np.eye(2), np.zeros(2), FeasibleSet.full_space(2))
    with pytest.raises(ProblemError):
        problem.reference_optimum()


def test_hinge_reference_optimum_examples():
    # w = (1, 0) reaches margin 1
    assert single_sample_problem(tau=10.0).reference_optimum() == pytest.approx(0.0, abs=1e-9)
    # Inside ‖w‖₁ ≤ 0.5 the best margin is 0.5
    assert single_sample_problem(tau=0.5).reference_optimum() == pytest.approx(0.5, abs=1e-9)
    assert HardFunctionProblem(10).reference_optimum() is None


def test_hinge_reference_optimum_is_a_lower_envelope():
    problem = HingeLossProblem.from_dataset(make_synthetic_dataset(60, 15, density=0.3, seed=5), tau=2.0)
    fstar = problem.reference_optimum()
    rng = np.random.default_rng(6)
    values = [
        problem.value_array(project_array(problem.feasible_set, rng.normal(scale=1.0, size=15)))
        for _ in range(500)
    ]
    assert fstar <= min(values) + 1e-9


def valley_direction(problem):
    # The steepest piece is the tangent at ρ = reach, with slope −(c/depth)·u
    row = problem.slopes[-1]
    return -row / np.linalg.norm(row)


def test_power_valley_follows_the_power_curve():
    problem = MaxOfLinearProblem.power_valley(10, np.random.default_rng(0), FeasibleSet.l2_ball(10, 1.0))
    u = valley_direction(problem)
    np.testing.assert_allclose(np.abs(u), 1.0 / np.sqrt(10))
    assert problem.reference_optimum() == 0.0
    assert problem.value_array(np.zeros(10)) == pytest.approx(1.0, abs=1e-9)
    assert problem.value_array(0.5 * u) == pytest.approx(0.0, abs=1e-12)
    for rho in (1.1, 0.9, 0.7, 0.3, -0.4):
        w = (1.0 - rho) * 0.5 * u
        # Tangent lines on a 1e-3 grid undershoot |ρ|^16 by at most ~1e-4
        assert problem.value_array(w) == pytest.approx(abs(rho) ** 16, abs=2e-4)
        assert problem.value_array(w) <= abs(rho) ** 16 + 1e-12


def test_power_valley_floor_must_be_feasible():
    with pytest.raises(ProblemError):
        MaxOfLinearProblem.power_valley(4, np.random.default_rng(0), FeasibleSet.l2_ball(4, 0.25))
    with pytest.raises(ProblemError):
        MaxOfLinearProblem.power_valley(4, np.random.default_rng(0), FeasibleSet.l2_ball(4, 1.0), power=1)


CONVEX_ORACLES = {
    "hinge": HingeLossProblem.from_dataset(make_synthetic_dataset(40, 12, density=0.3, seed=1), tau=5.0),
    "hard": HardFunctionProblem(30, 1.0),
    "max_linear": MaxOfLinearProblem.random(
        6, 15, np.random.default_rng(2), FeasibleSet.box(-1.0, 1.0, dimension=6)
    ),
    "valley": MaxOfLinearProblem.power_valley(6, np.random.default_rng(3), FeasibleSet.l2_ball(6, 1.0)),
}


def feasible_points(problem, rng, count):
    raw = rng.normal(scale=1.5, size=(count, problem.dimension))
    return [project_array(problem.feasible_set, x) for x in raw]


@pytest.mark.parametrize("name", sorted(CONVEX_ORACLES))
@settings(max_examples=50, deadline=None)
@given(seed=st.integers(min_value=0, max_value=2**32 - 1))
def test_subgradient_inequality(name, seed):
    """f(y) ≥ f(x) + ⟨g(x), y − x⟩ over 20 pairs per example, 10³ per oracle."""
    problem = CONVEX_ORACLES[name]
    rng = np.random.default_rng(seed)
    xs = feasible_points(problem, rng, 20)
    ys = feasible_points(problem, rng, 20)
    for x, y in zip(xs, ys):
        linear = problem.value_array(x) + float(problem.subgradient_array(x) @ (y - x))
        assert problem.value_array(y) >= linear - 1e-9 * (1.0 + abs(linear))


@settings(max_examples=200, deadline=None)
@given(
    seed=st.integers(min_value=0, max_value=2**32 - 1),
    weight=st.floats(min_value=0.0, max_value=1.0),
)
def test_hinge_is_convex_along_segments(seed, weight):
    problem = CONVEX_ORACLES["hinge"]
    x, y = feasible_points(problem, np.random.default_rng(seed), 2)
    middle = problem.value_array(weight * x + (1.0 - weight) * y)
    assert middle <= weight * problem.value_array(x) + (1.0 - weight) * problem.value_array(y) + 1e-12


class _FixedRows:
    """Generator stand-in whose ``choice`` returns preset rows."""

    def __init__(self, rows):
        self.rows = np.asarray(rows)

    def choice(self, n, size, replace):
        return self.rows


def test_single_row_batches_average_to_the_full_subgradient():
    problem = CONVEX_ORACLES["hinge"]
    w = project_array(problem.feasible_set, np.random.default_rng(8).normal(size=problem.dimension))
    mean = np.mean([
        problem.stochastic_subgradient_array(w, 1, _FixedRows([row]))
        for row in range(problem.sample_count)
    ], axis=0)
    np.testing.assert_allclose(mean, problem.subgradient_array(w), atol=1e-12)


def test_minibatch_subgradient_is_unbiased():
    problem = CONVEX_ORACLES["hinge"]
    rng = np.random.default_rng(9)
    w = project_array(problem.feasible_set, rng.normal(size=problem.dimension))
    draws = np.array([problem.stochastic_subgradient_array(w, 4, rng) for _ in range(4000)])
    standard_error = draws.std(axis=0) / np.sqrt(len(draws))
    assert np.all(np.abs(draws.mean(axis=0) - problem.subgradient_array(w)) <= 5.0 * standard_error + 1e-12)
