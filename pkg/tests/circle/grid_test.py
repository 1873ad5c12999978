import math
from typing import List

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rshelab.circle.grid import (
    MAX_GRID_SIZE,
    CircleFunction,
    FourierCoeffs,
    GridSpec,
    basis_function,
    cos_modes,
    derivative,
    difference_quotient,
    from_modes,
    lp_norm,
    make_grid,
    sobolev_norm,
    synthesize_cos,
    to_modes,
)
from rshelab.errors import ConfigError
from tests.testing_utils import raises_literal


def test_grid_points() -> None:
    grid = make_grid(8)
    assert grid.points.tolist() == [-0.375, -0.25, -0.125, 0.0, 0.125, 0.25, 0.375, 0.5]
    assert grid.indices.tolist() == [-3, -2, -1, 0, 1, 2, 3, 4]
    assert grid.zero_index == 3
    assert grid.half == 4
    assert grid.max_cutoff == 3
    assert grid.points[grid.zero_index] == 0.0


def test_mirror_index() -> None:
    grid = make_grid(8)
    mirrored = grid.points[grid.mirror_index]
    expected = np.where(grid.points == 0.5, 0.5, -grid.points)
    np.testing.assert_array_equal(mirrored, expected)
    np.testing.assert_array_equal(
        grid.mirror_index[grid.mirror_index], np.arange(grid.n)
    )


@pytest.mark.parametrize(
    "n,message",
    [
        (5, "grid.n must be even, got 5"),
        (2, f"grid.n must lie in [4, {MAX_GRID_SIZE}], got 2"),
        (2 * MAX_GRID_SIZE, f"grid.n must lie in [4, {MAX_GRID_SIZE}]"),
        (8.0, "grid.n must be an integer, got 8.0"),
        (True, "grid.n must be an integer, got True"),
    ],
)
def test_grid_errors(n: int, message: str) -> None:
    with raises_literal(message, ConfigError):
        GridSpec(n)


def test_check_cutoff() -> None:
    grid = make_grid(16)
    grid.check_cutoff(0)
    grid.check_cutoff(7)
    with raises_literal(
        "modes.cutoff must lie in [0, n/2 - 1] = [0, 7] for n=16, got 8", ConfigError
    ):
        grid.check_cutoff(8)


def test_circle_function_errors() -> None:
    grid = make_grid(4)
    with raises_literal("expected 4 values for grid n=4, got shape (3,)"):
        CircleFunction(grid, [1.0, 2.0, 3.0])
    with raises_literal("CircleFunction values must be finite"):
        CircleFunction(grid, [1.0, math.inf, 3.0, 4.0])
    with raises_literal("grid mismatch: n=4 vs n=8"):
        CircleFunction.zeros(grid) + CircleFunction.zeros(make_grid(8))


def test_circle_function_read_only() -> None:
    f = CircleFunction.constant(make_grid(4), 1.0)
    with pytest.raises(ValueError):
        f.values[0] = 2.0


def test_arithmetic() -> None:
    grid = make_grid(4)
    f = CircleFunction(grid, [1.0, 2.0, 3.0, 4.0])
    g = CircleFunction(grid, [0.5, 0.5, 0.5, 0.5])
    assert (f + g).values.tolist() == [1.5, 2.5, 3.5, 4.5]
    assert (f - 1.0).values.tolist() == [0.0, 1.0, 2.0, 3.0]
    assert (2.0 * f).values.tolist() == [2.0, 4.0, 6.0, 8.0]
    assert (-f).values.tolist() == [-1.0, -2.0, -3.0, -4.0]
    assert f.inner(g) == 1.25
    assert f.mirrored().values.tolist() == [3.0, 2.0, 1.0, 4.0]
    assert not f.is_symmetric()
    assert CircleFunction(grid, [2.0, 1.0, 2.0, 0.0]).is_symmetric()


def test_fourier_coeffs_errors() -> None:
    with raises_literal("sin[0] must be zero, got 1.0"):
        FourierCoeffs(np.ones(3), np.array([1.0, 0.0, 0.0]))
    with raises_literal("cos and sin coefficients must match"):
        FourierCoeffs(np.ones(3), np.zeros(2))
    with raises_literal("cos coefficients must be a non-empty vector"):
        FourierCoeffs(np.ones(0), np.zeros(0))


@pytest.mark.parametrize("n", [8, 16, 64])
def test_basis_orthonormal(n: int) -> None:
    grid = make_grid(n)
    cutoff = grid.max_cutoff
    for m in range(cutoff + 1):
        c = to_modes(basis_function(m, grid), cutoff)
        expected = np.zeros(cutoff + 1)
        expected[m] = 1.0
        np.testing.assert_allclose(c.cos, expected, atol=1e-12)
        assert c.is_symmetric


def test_symmetric_function_has_exact_zero_sin() -> None:
    grid = make_grid(32)
    f = basis_function(3, grid) * 0.7 + basis_function(5, grid)
    assert f.is_symmetric()
    assert not np.any(to_modes(f, grid.max_cutoff).sin)


def test_modes_and_synthesis() -> None:
    grid = make_grid(32)
    c = FourierCoeffs(
        np.array([0.5, -1.0, 0.0, 2.0]), np.array([0.0, 0.25, -0.5, 0.0])
    )
    f = from_modes(c, grid)
    back = to_modes(f, 3)
    np.testing.assert_allclose(back.cos, c.cos, atol=1e-12)
    np.testing.assert_allclose(back.sin, c.sin, atol=1e-12)
    assert lp_norm(f, 2) == pytest.approx(
        math.sqrt(float(np.sum(c.cos**2) + np.sum(c.sin**2))), rel=1e-12
    )


def test_batched_cos_modes() -> None:
    grid = make_grid(16)
    cos = np.array([[1.0, 0.0, 0.5], [0.0, -2.0, 0.0]])
    values = synthesize_cos(grid, cos)
    assert values.shape == (2, 16)
    np.testing.assert_allclose(cos_modes(grid, values, 2), cos, atol=1e-12)


@pytest.mark.parametrize(
    "p,expected",
    [(1.0, 2.5), (2.0, math.sqrt(7.5)), (math.inf, 4.0)],
)
def test_lp_norm(p: float, expected: float) -> None:
    f = CircleFunction(make_grid(4), [1.0, -2.0, 3.0, -4.0])
    assert lp_norm(f, p) == pytest.approx(expected, rel=1e-15)


def test_lp_norm_bad_exponent() -> None:
    with raises_literal("p must be at least 1, got 0.5"):
        lp_norm(CircleFunction.zeros(make_grid(4)), 0.5)


@settings(max_examples=50, deadline=None)
@given(
    st.lists(
        st.floats(min_value=-1e6, max_value=1e6), min_size=8, max_size=8
    ),
    st.permutations(range(8)),
)
def test_lp_norm_depends_only_on_values(values: List[float], perm: List[int]) -> None:
    grid = make_grid(8)
    f = CircleFunction(grid, values)
    g = CircleFunction(grid, np.asarray(values)[perm])
    for p in (1.0, 2.0, 3.0, math.inf):
        assert lp_norm(f, p) == lp_norm(g, p)


def test_sobolev_norm() -> None:
    c = FourierCoeffs.symmetric(np.array([3.0, 1.0, 2.0]))
    assert sobolev_norm(c, 0.0, squared=True) == 14.0
    assert sobolev_norm(c, 1.0, squared=True) == 9.0 + 1.0 + 16.0
    assert sobolev_norm(c, -2.0) == pytest.approx(math.sqrt(9.0 + 1.0 + 4.0 / 16.0))
    with raises_literal("sobolev_norm expects symmetric coefficients"):
        sobolev_norm(FourierCoeffs(np.ones(2), np.array([0.0, 1.0])), 1.0)


def test_derivative_of_cosine() -> None:
    grid = make_grid(64)
    d = derivative(basis_function(2, grid))
    expected = -4.0 * math.pi * math.sqrt(2.0) * np.sin(4.0 * math.pi * grid.points)
    np.testing.assert_allclose(d.values, expected, atol=1e-10)


def test_difference_quotient() -> None:
    grid = make_grid(8)
    assert not np.any(difference_quotient(CircleFunction.constant(grid, 3.0)).values)
    ramp = CircleFunction(grid, grid.indices.astype(np.float64))
    assert difference_quotient(ramp).values.tolist() == [8.0] * 7 + [-56.0]

