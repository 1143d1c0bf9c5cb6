"""Full-size experiments: the gradient-descent floor, rate fits and the hinge benchmark."""
import pytest

from harness.suites import SuiteScale, run_suite
from problems.hard import HardFunctionProblem, gd_lower_bound
from problems.hinge import HingeLossProblem
from solvers.runner import OptimizerKind, run
from solvers.schedules import EmaConfig, Schedule
from storage.libsvm import make_synthetic_dataset

pytestmark = pytest.mark.slow


def test_momentum_beats_the_gradient_descent_floor():
    problem = HardFunctionProblem(1000, 2.0)
    floor = gd_lower_bound(1000, 2.0)
    assert floor == pytest.approx(0.00341302, abs=1e-8)

    psg = run(OptimizerKind.PSG, problem, Schedule.constant_beta(2.0), 1000)
    hb = run(OptimizerKind.HB_TV, problem, Schedule.time_varying(8.0), 1000)
    adahb = run(OptimizerKind.ADAHB_TV, problem, Schedule.time_varying(0.08), 1000,
                ema=EmaConfig(gamma=0.9, delta=1e-8))

    final_psg = psg.trace[-1].f_individual
    assert final_psg >= floor
    assert hb.trace[-1].f_individual < final_psg
    assert adahb.trace[-1].f_individual < final_psg
    assert adahb.min_lemma3_slack >= -1e-9
    assert adahb.min_ema_increment >= -1e-12


def test_rate_suite_at_full_size():
    results = run_suite("rates", 0, SuiteScale())
    names = {result.name for result in results}
    assert {
        "rate_hb_timevarying_individual",
        "rate_hb_constbeta_averaged",
        "rate_adahb_constbeta_averaged",
    } <= names
    failed = [(result.name, result.value, result.detail) for result in results if not result.passed]
    assert failed == []


def test_hinge_runs_stay_above_the_solver_optimum():
    dataset = make_synthetic_dataset(10_000, 300, seed=0)
    problem = HingeLossProblem.from_dataset(dataset, tau=20.0)
    fstar = problem.reference_optimum()

    runs = {
        "psg": (OptimizerKind.PSG, Schedule.constant_beta(1.0), None, "gap_averaged"),
        "hb_tv": (OptimizerKind.HB_TV, Schedule.time_varying(1.0), None, "gap_individual"),
        "adahb_tv": (OptimizerKind.ADAHB_TV, Schedule.time_varying(0.1), EmaConfig(), "gap_individual"),
    }
    for name, (kind, schedule, ema, column) in runs.items():
        result = run(kind, problem, schedule, 10_000, ema=ema, seed=0, batch=16, fstar=fstar)
        lowest = min(min(record.gap_individual, record.gap_averaged) for record in result.trace)
        assert lowest >= -1e-7, name
        early, late = getattr(result.trace[99], column), getattr(result.trace[-1], column)
        assert late < early, name
