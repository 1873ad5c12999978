import math
import pathlib
from typing import List

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rshelab.circle.grid import (
    CircleFunction,
    GridSpec,
    basis_function,
    lp_norm,
    make_grid,
)
from rshelab.circle.rearrange import (
    is_symmetric_nonincreasing,
    mirror_defect,
    random_monotone,
    rearrange,
)
from rshelab.dynamics.noise import NoiseSpec
from rshelab.dynamics.scheme import SchemeConfig, simulate
from rshelab.dynamics.streams import NoiseStream
from rshelab.measure.bridge import (
    QuantileFn,
    empirical_to_ustar,
    load_samples,
    nearest_rank_quantiles,
    quantile_to_ustar,
    sample_measure,
    save_samples,
    ustar_to_quantile,
    w2,
    w2_oracle,
)
from tests.testing_utils import random_function, raises_literal


def test_quantile_of_small_function() -> None:
    f = CircleFunction(make_grid(4), np.array([2.0, 3.0, 2.0, 1.0]))
    q = ustar_to_quantile(f)
    assert q.q.tolist() == [1.0, 2.0, 3.0]
    assert q.u.tolist() == [0.0, 0.5, 1.0]
    assert q.grid == f.grid
    np.testing.assert_array_equal(quantile_to_ustar(q).values, f.values)


@settings(max_examples=30, deadline=None)
@given(st.integers(min_value=2, max_value=64), st.integers(0, 2**32 - 1))
def test_quantile_round_trip(half: int, seed: int) -> None:
    grid = make_grid(2 * half)
    f = random_monotone(grid, np.random.default_rng(seed), symmetric=True)
    q = ustar_to_quantile(f)
    assert np.all(np.diff(q.q) >= 0.0)
    np.testing.assert_array_equal(quantile_to_ustar(q).values, f.values)


def test_quantile_of_simulated_state() -> None:
    grid = make_grid(16)
    cfg = SchemeConfig(grid, NoiseSpec(0.75, 7), 0.01, 0.1)
    traj = simulate(cfg, basis_function(1, grid), NoiseStream(0))
    x = traj.state(len(traj) - 1)
    assert mirror_defect(x) > 0.0

    q = ustar_to_quantile(x, tol=1e-12)
    assert np.all(np.diff(q.q) >= 0.0)
    back = quantile_to_ustar(q)
    assert mirror_defect(back) == 0.0
    assert is_symmetric_nonincreasing(back, 0.0)
    assert math.fsum(back.values) == pytest.approx(math.fsum(x.values), abs=1e-14)
    assert lp_norm(back - x, 2) == pytest.approx(mirror_defect(x) / 2, rel=1e-9)
    np.testing.assert_array_equal(
        quantile_to_ustar(ustar_to_quantile(back)).values, back.values
    )


def test_quantile_rejects_non_monotone() -> None:
    with raises_literal("ustar_to_quantile expects a symmetric non-increasing"):
        ustar_to_quantile(random_function(16, seed=1))


@pytest.mark.parametrize("n", [4, 16, 128])
def test_w2_is_the_l2_distance(n: int) -> None:
    grid = make_grid(n)
    gen = np.random.default_rng(n)
    for _ in range(5):
        f = random_monotone(grid, gen)
        g = random_monotone(grid, gen)
        assert w2(f, g) == pytest.approx(w2_oracle(f.values, g.values), rel=1e-12)


def test_w2_rearranges_inputs() -> None:
    f = random_function(32, seed=2)
    g = random_function(32, seed=3)
    assert w2(f, g) == pytest.approx(w2(rearrange(f), rearrange(g)), rel=1e-14)
    assert w2(f, f) == 0.0
    with raises_literal("grid mismatch: n=32 vs n=16"):
        w2(f, random_function(16))


@pytest.mark.parametrize("n", [8, 64, 1024])
def test_uniform_ramps(n: int) -> None:
    grid = make_grid(n)
    half = grid.half
    ramp = QuantileFn.on_grid(grid, np.linspace(0.0, 1.0, half + 1))
    f = quantile_to_ustar(ramp)
    zero = CircleFunction.zeros(grid)
    expected = math.sqrt(1.0 / 3.0 + 1.0 / (6.0 * half**2))
    assert w2(f, zero) == pytest.approx(expected, rel=1e-12)


def test_uniform_ramp_limit() -> None:
    grid = GridSpec(2**20)
    ramp = QuantileFn.on_grid(grid, np.linspace(0.0, 1.0, grid.half + 1))
    distance = w2(quantile_to_ustar(ramp), CircleFunction.zeros(grid))
    assert abs(distance - 1.0 / math.sqrt(3.0)) <= 1e-10


def test_w2_oracle_errors() -> None:
    assert w2_oracle([3.0, 1.0], [1.0, 3.0]) == 0.0
    assert w2_oracle([0.0, 0.0], [1.0, 1.0]) == 1.0
    with raises_literal("w2_oracle needs equal atom counts"):
        w2_oracle([1.0], [1.0, 2.0])
    with raises_literal("w2_oracle needs at least one atom"):
        w2_oracle([], [])


@pytest.mark.parametrize(
    "u,q,message",
    [
        ([0.0, 1.0], [0.0, 1.0], "must be vectors of equal length >= 3"),
        ([0.0, 0.5, 1.0], [0.0, 1.0], "must be vectors of equal length >= 3"),
        ([0.0, 0.4, 1.0], [0.0, 1.0, 2.0], "quantile grid must be uniform on [0, 1]"),
        ([0.0, 0.5, 1.0], [0.0, math.nan, 2.0], "quantile values must be finite"),
        (
            [0.0, 0.5, 1.0],
            [0.0, 2.0, 1.0],
            "quantile values must be non-decreasing, but q[2] = 1.0",
        ),
    ],
)
def test_quantile_fn_errors(u: List[float], q: List[float], message: str) -> None:
    with raises_literal(message):
        QuantileFn(np.array(u), np.array(q))


def test_nearest_rank() -> None:
    u = np.array([0.0, 0.5, 1.0])
    assert nearest_rank_quantiles(np.array([3.0, 1.0, 2.0]), u).tolist() == [
        1.0,
        2.0,
        3.0,
    ]
    four = np.array([4.0, 1.0, 3.0, 2.0])
    assert nearest_rank_quantiles(four, np.array([0.25, 0.3, 0.75])).tolist() == [
        1.0,
        2.0,
        3.0,
    ]


def test_empirical_to_ustar() -> None:
    grid = make_grid(64)
    samples = np.random.default_rng(4).standard_normal(1000)
    f = empirical_to_ustar(samples, grid)
    assert is_symmetric_nonincreasing(f, 0.0)
    assert f.values[grid.zero_index] == samples.max()
    assert f.values[-1] == samples.min()
    with raises_literal("empirical_to_ustar needs at least one sample"):
        empirical_to_ustar([], grid)
    with raises_literal("samples must be finite"):
        empirical_to_ustar([1.0, math.inf], grid)


def test_sampling_recovers_the_function() -> None:
    grid = make_grid(32)
    gen = np.random.default_rng(5)
    f = random_monotone(grid, gen, symmetric=True)
    draws = sample_measure(f, 200_000, gen)
    assert set(np.unique(draws)) <= set(f.values.tolist())
    assert w2(empirical_to_ustar(draws, grid), f) < 0.1
    assert sample_measure(f, 0, gen).size == 0


def test_sample_measure_errors() -> None:
    gen = np.random.default_rng(0)
    f = random_monotone(make_grid(8), gen)
    with raises_literal("sample count must be non-negative, got -1"):
        sample_measure(f, -1, gen)
    with raises_literal("sample_measure expects a symmetric non-increasing function"):
        sample_measure(random_function(8, seed=3), 5, gen)


def test_sample_files(tmp_path: pathlib.Path) -> None:
    samples = np.random.default_rng(6).standard_normal(50)
    path = tmp_path / "samples.txt"
    save_samples(path, samples)
    np.testing.assert_array_equal(load_samples(path), samples)

    commented = tmp_path / "commented.txt"
    commented.write_text("# header\n1.5\n\n-2\n")
    assert load_samples(commented).tolist() == [1.5, -2.0]

    single = tmp_path / "single.txt"
    single.write_text("7\n")
    assert load_samples(single).tolist() == [7.0]


def test_sample_file_errors(tmp_path: pathlib.Path) -> None:
    empty = tmp_path / "empty.txt"
    empty.write_text("# nothing\n")
    with pytest.warns(UserWarning):
        with raises_literal(f"{empty}: no samples"):
            load_samples(empty)
    wide = tmp_path / "wide.txt"
    wide.write_text("1 2\n3 4\n")
    with raises_literal(f"{wide}: expected one value per line"):
        load_samples(wide)
