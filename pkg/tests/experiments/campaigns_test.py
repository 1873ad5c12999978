import math
from typing import Set

import numpy as np
import pytest

from rshelab.circle.grid import make_grid
from rshelab.circle.rearrange import is_symmetric_nonincreasing
from rshelab.config.run_config import INITIAL_CONDITIONS
from rshelab.errors import ConfigError
from rshelab.experiments.campaigns import (
    DERIVATIVE_SLOPE_MAX,
    DERIVATIVE_SLOPE_MIN,
    add_influence_slope,
    bridge_experiment,
    contraction_experiment,
    convergence_experiment,
    derivative_bound_experiment,
    energy_experiment,
    initial_condition,
    orthogonality_experiment,
    reflection_experiment,
    simulate_experiment,
    smoothing_experiment,
)
from rshelab.experiments.report import ExperimentReport, Status, column
from tests.testing_utils import raises_literal, small_run


def _verdict_names(report: ExperimentReport) -> Set[str]:
    return {v.name for v in report.verdicts}


@pytest.mark.parametrize("kind", INITIAL_CONDITIONS)
def test_initial_conditions(kind: str) -> None:
    grid = make_grid(32)
    x0 = initial_condition(kind, grid)
    assert x0.is_symmetric()
    assert is_symmetric_nonincreasing(x0, 0.0)


def test_unknown_initial_condition() -> None:
    with raises_literal("unknown initial condition 'wave'"):
        initial_condition("wave", make_grid(8))


def test_simulate() -> None:
    run = small_run()
    report = simulate_experiment(run)
    assert report.name == "simulate"
    assert len(report.rows) == 9
    assert len(report.columns) == 4 + 16
    assert report.columns[4] == "x[-7]"
    assert column(report, "t")[0] == 0.0
    assert report.status is Status.PASS
    assert "final_mirror_defect" in report.notes


def test_simulate_without_noise() -> None:
    report = simulate_experiment(small_run(amplitude=0.0, initial="kernel"))
    assert _verdict_names(report) == {"mean_conservation", "zero_noise_heat_flow"}
    assert report.status is Status.PASS


def test_simulate_is_reproducible() -> None:
    a = simulate_experiment(small_run(threads=1))
    b = simulate_experiment(small_run(threads=4))
    assert a.rows == b.rows


def test_contraction() -> None:
    report = contraction_experiment(small_run())
    assert len(report.rows) == 3
    assert report.hard_failures == []
    assert all(float(r) <= 1.0 + 1e-9 for r in column(report, "ratio"))
    assert contraction_experiment(small_run(), pairs=1).rows == report.rows[:1]
    with raises_literal("need at least one pair, got 0"):
        contraction_experiment(small_run(), pairs=0)


def test_contraction_threads_do_not_matter() -> None:
    single = contraction_experiment(small_run(threads=1))
    several = contraction_experiment(small_run(threads=3))
    assert single.rows == several.rows


def test_derivative() -> None:
    report = derivative_bound_experiment(small_run())
    assert column(report, "t") == pytest.approx([0.02, 0.04, 0.08])
    assert report.hard_failures == []
    assert "influence_slope" in report.notes
    assert all(float(v) >= 0.0 for v in column(report, "rough"))
    with raises_literal("experiment.t_grid has no point within scheme.T", ConfigError):
        derivative_bound_experiment(small_run(t_grid=(0.5, 1.0)))


@pytest.mark.parametrize(
    "power,status", [(-1.0, Status.PASS), (-3.0, Status.WARN), (-0.2, Status.WARN)]
)
def test_influence_slope_band(power: float, status: Status) -> None:
    at = [0.02, 0.04, 0.08, 0.16]
    report = ExperimentReport("derivative", {}, ["t"])
    add_influence_slope(report, at, np.asarray(at) ** power)
    assert report.notes["influence_slope"] == pytest.approx(power)
    (verdict,) = report.verdicts
    assert (verdict.low, verdict.high) == (DERIVATIVE_SLOPE_MIN, DERIVATIVE_SLOPE_MAX)
    assert verdict.status is status
    assert report.hard_failures == []


def test_influence_slope_needs_positive_points() -> None:
    report = ExperimentReport("derivative", {}, ["t"])
    add_influence_slope(report, [0.1, 0.2], np.array([0.5, -0.5]))
    assert report.notes["influence_slope"] == "not enough positive points"
    assert report.verdicts == []


def test_smoothing() -> None:
    run = small_run()
    report = smoothing_experiment(run)
    assert len(report.rows) == 3 * 2
    assert "lipschitz_ceiling" in _verdict_names(report)
    assert report.hard_failures == []
    assert report.notes["target_slope"] == pytest.approx(-0.875)
    assert all(float(q) <= run.alpha for q in column(report, "lipschitz"))

    shorter = smoothing_experiment(run, t_grid=(0.03,), probes=1)
    assert len(shorter.rows) == 1


def test_smoothing_needs_rough_noise() -> None:
    with raises_literal("noise.lambda must lie in (0.5, 1)", ConfigError):
        smoothing_experiment(small_run(lam=1.2))


def test_orthogonality() -> None:
    report = orthogonality_experiment(small_run())
    assert column(report, "h") == pytest.approx([0.02, 0.02, 0.01, 0.01])
    assert column(report, "epsilon") == [0.0, 0.01, 0.0, 0.01]
    assert column(report, "negative") == [0, 0, 0, 0]
    assert report.hard_failures == []
    assert math.isfinite(report.notes["plateau"])


def test_convergence_without_noise() -> None:
    report = convergence_experiment(small_run(amplitude=0.0, levels=3))
    assert len(report.rows) == 2
    assert column(report, "h_coarse") == pytest.approx([0.04, 0.02])
    assert report.status is Status.PASS


def test_convergence() -> None:
    report = convergence_experiment(small_run(), levels=3)
    assert len(report.rows) == 2
    assert report.hard_failures == []
    assert all(float(d) >= 0.0 for d in column(report, "difference"))
    with raises_literal("convergence needs at least 2 levels, got 1", ConfigError):
        convergence_experiment(small_run(levels=1))


def test_energy_without_noise() -> None:
    report = energy_experiment(small_run(amplitude=0.0))
    assert report.status is Status.PASS
    np.testing.assert_allclose(column(report, "residual"), 0.0, atol=1e-10)


def test_energy() -> None:
    report = energy_experiment(small_run(), eps_grid=(0.0,), paths=4)
    assert len(report.rows) == 9
    assert _verdict_names(report) == {"residual[eps=0]"}
    assert column(report, "noise_input")[0] == 0.0
    np.testing.assert_allclose(column(report, "midpoint"), 0.0, atol=1e-12)


def test_reflection() -> None:
    report = reflection_experiment(small_run())
    assert len(report.rows) == 3
    assert report.hard_failures == []
    assert _verdict_names(report) >= {
        "monotone_pairing_floor",
        "mean_neutrality",
        "right_endpoint_identity",
        "companion_cross_check",
        "stieltjes_nonnegative",
    }
    assert set(report.notes["sobolev_ratio"]) == {"min", "median", "max"}


def test_bridge() -> None:
    report = bridge_experiment(small_run(), trials=3)
    assert column(report, "case") == [
        "isometry",
        "triangle",
        "uniform_ramps",
        "normal_ingestion",
        "sample_round_trip",
        "sample_round_trip",
        "sample_round_trip",
        "sample_round_trip",
    ]
    assert report.hard_failures == []
    assert column(report, "n")[2] == 2**20
