import dataclasses
import math

import numpy as np
import pytest

from rshelab.circle.grid import basis_function, make_grid
from rshelab.circle.rearrange import random_monotone
from rshelab.contexts import disable_checks
from rshelab.dynamics.noise import NoiseSpec, step_self_dissipation, trace_constant
from rshelab.dynamics.reflection import (
    CrossCheckRule,
    ReflectionPath,
    energy_balance_report,
    energy_terms,
    eta_from_trajectory,
    eta_pairing,
    eta_pairing_from_companion,
    eta_sobolev_ratio,
    half_increment_energy,
    monotone_pairing_floor,
    orthogonality_defect,
    smoothed_noise_rates,
    stieltjes_integral,
)
from rshelab.dynamics.scheme import SchemeConfig, Trajectory, simulate
from rshelab.dynamics.streams import NoiseStream
from rshelab.errors import NumericalError
from tests.testing_utils import raises_literal


def _config(amplitude: float = 1.0, record_every: int = 1) -> SchemeConfig:
    return SchemeConfig(
        make_grid(16), NoiseSpec(0.75, 4, amplitude), 0.01, 0.1, record_every
    )


def _run(seed: int = 3, trajectory: int = 0, amplitude: float = 1.0) -> Trajectory:
    cfg = _config(amplitude)
    return simulate(cfg, basis_function(1, cfg.grid), NoiseStream(seed, trajectory))


@pytest.fixture
def traj() -> Trajectory:
    return _run()


@pytest.fixture
def path(traj: Trajectory) -> ReflectionPath:
    return eta_from_trajectory(traj)


def test_needs_pre_states() -> None:
    cfg = _config()
    bare = simulate(cfg, basis_function(1, cfg.grid), NoiseStream(0), None, False)
    with raises_literal("trajectory carries no pre-states"):
        eta_from_trajectory(bare)
    with raises_literal("energy terms need pre-states"):
        energy_terms(bare)


def test_increments_must_match_pre_states(traj: Trajectory) -> None:
    assert traj.pre_states is not None
    np.testing.assert_array_equal(
        traj.reflection_increments, traj.states[1:] - traj.pre_states
    )
    shifted = traj.reflection_increments.copy()
    shifted[2, 5] += 1e-6
    broken = dataclasses.replace(traj, reflection_increments=shifted)
    with raises_literal(
        "reflection increment 2 differs from X - Z by", NumericalError
    ):
        eta_from_trajectory(broken)
    with disable_checks():
        assert eta_from_trajectory(broken).increments[2, 5] == shifted[2, 5]


def test_path_shape(traj: Trajectory, path: ReflectionPath) -> None:
    assert path.pair_cutoff == 7
    assert eta_from_trajectory(traj, pair_cutoff=3).pair_cutoff == 3
    assert path.plus.shape == (len(traj), 8)
    assert not np.any(path.plus[0])
    assert not np.any(path.minus[0])
    np.testing.assert_allclose(
        path.cumulative(len(traj) - 1).values,
        np.sum(traj.reflection_increments, axis=0),
        atol=1e-15,
    )


def test_mean_neutrality(path: ReflectionPath) -> None:
    total = float(np.sum(np.abs(path.increments))) / path.grid.n
    for row in path.increments:
        assert abs(math.fsum(row.tolist()) / path.grid.n) <= 1e-12 * (1.0 + total)
    np.testing.assert_allclose(path.mode_pairing(0), 0.0, atol=1e-12)


def test_monotone_pairing_floor(path: ReflectionPath) -> None:
    gen = np.random.default_rng(1)
    for _ in range(5):
        u = random_monotone(path.grid, gen, symmetric=True)
        assert np.all(monotone_pairing_floor(path, u) >= -1e-12)
        assert np.all(np.diff(eta_pairing(path, u)) >= -1e-12)


def test_mode_pairing_matches_basis(path: ReflectionPath) -> None:
    for m in (1, 2, 4):
        np.testing.assert_allclose(
            path.mode_pairing(m),
            eta_pairing(path, basis_function(m, path.grid)),
            atol=1e-12,
        )


def test_right_endpoint_identity(traj: Trajectory) -> None:
    left, right = orthogonality_defect(traj, 0.0)
    expected = half_increment_energy(traj)
    assert expected > 0.0
    assert right == pytest.approx(expected, abs=1e-12 * (1.0 + expected))
    assert math.isfinite(left)


def test_midpoint_term_vanishes_without_smoothing(traj: Trajectory) -> None:
    terms = energy_terms(traj, 0.0)
    np.testing.assert_allclose(terms.midpoint, 0.0, atol=1e-12)
    assert terms.right[-1] == pytest.approx(half_increment_energy(traj), abs=1e-12)
    assert terms.energy.shape == (len(traj),)
    assert terms.dissipation[0] == 0.0


@pytest.mark.parametrize("m", [1, 2, 4])
def test_companion_cross_check(
    traj: Trajectory, path: ReflectionPath, m: int
) -> None:
    exact = eta_pairing_from_companion(traj, path, m)
    assert exact.passed, exact.max_abs_error
    left = eta_pairing_from_companion(traj, path, m, "left")
    assert left.passed
    assert left.tolerance >= exact.tolerance


def test_cross_check_rule_names() -> None:
    assert CrossCheckRule("left") is CrossCheckRule.LEFT
    with pytest.raises(ValueError):
        CrossCheckRule("midpoint")


def test_cross_check_needs_every_step() -> None:
    cfg = _config(record_every=2)
    sparse = simulate(cfg, basis_function(1, cfg.grid), NoiseStream(0))
    with raises_literal("the companion cross-check needs every step recorded"):
        eta_pairing_from_companion(sparse, eta_from_trajectory(sparse), 1)
    with raises_literal("orthogonality and energy diagnostics need every step"):
        orthogonality_defect(sparse, 0.0)


@pytest.mark.parametrize("epsilon", [0.0, 0.001, 0.01])
def test_stieltjes_integral(
    traj: Trajectory, path: ReflectionPath, epsilon: float
) -> None:
    result = stieltjes_integral(traj.states, path, epsilon)
    tail = math.exp(-4.0 * math.pi**2 * 64 * epsilon)
    assert result.discrepancy <= (1e-6 + tail) * result.scale + 1e-15
    left, right = orthogonality_defect(traj, epsilon)
    assert result.riemann == pytest.approx(left, abs=1e-12)
    as_functions = [traj.state(r) for r in range(len(traj))]
    at_right = stieltjes_integral(as_functions, path, epsilon, endpoint="right")
    assert at_right.riemann == pytest.approx(right, abs=1e-12)


def test_stieltjes_errors(traj: Trajectory, path: ReflectionPath) -> None:
    with raises_literal("endpoint must be 'left' or 'right', got 'middle'"):
        stieltjes_integral(traj.states, path, 0.0, endpoint="middle")
    with raises_literal("integrand has 10 times but the path has 11"):
        stieltjes_integral(traj.states[:-1], path, 0.0)
    with raises_literal("smoothing time epsilon must be non-negative"):
        stieltjes_integral(traj.states, path, -0.1)
    with raises_literal("mode cutoff must lie in [0, 7], got 9"):
        stieltjes_integral(traj.states, path, 0.0, mode_cutoff=9)


def test_noise_rates_without_smoothing() -> None:
    spec = NoiseSpec(0.75, 6)
    rate, self_dissipation = smoothed_noise_rates(spec, 0.01, 0.0)
    assert rate == pytest.approx(trace_constant(spec), rel=1e-14)
    assert self_dissipation == pytest.approx(
        step_self_dissipation(spec, 0.01), rel=1e-12
    )
    damped, _ = smoothed_noise_rates(spec, 0.01, 0.01)
    assert 1.0 <= damped < rate


def test_energy_balance_without_noise() -> None:
    balance = energy_balance_report([_run(amplitude=0.0)])
    np.testing.assert_allclose(balance.residual, 0.0, atol=1e-10)
    assert not np.any(balance.noise_input)
    assert balance.paths == 1


def test_energy_balance_with_noise() -> None:
    trajs = [_run(seed=17, trajectory=i) for i in range(24)]
    for epsilon in (0.0, 0.01):
        balance = energy_balance_report(trajs, epsilon)
        assert balance.residual[0] == 0.0
        assert abs(balance.residual[-1]) <= 5.0 * balance.residual_se[-1] + 1e-12
        assert balance.paths == 24


def test_energy_balance_errors(traj: Trajectory) -> None:
    with raises_literal("energy balance needs at least one trajectory"):
        energy_balance_report([])
    other_cfg = dataclasses.replace(traj.config, T=0.05)
    other = simulate(other_cfg, basis_function(1, traj.grid), NoiseStream(0))
    with raises_literal("all trajectories must share one scheme configuration"):
        energy_balance_report([traj, other])


def test_sobolev_ratio(traj: Trajectory, path: ReflectionPath) -> None:
    ratio = eta_sobolev_ratio(path, traj)
    assert ratio.shape == (len(traj) - 1,)
    assert np.all(np.isfinite(ratio))
    assert np.all(ratio >= 0.0)
