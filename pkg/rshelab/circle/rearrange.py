from typing import Tuple

import numpy as np

from rshelab.cache import grid_lru_cache
from rshelab.circle.grid import CircleFunction, GridSpec, lp_norm
from rshelab.types import FloatArray, IntArray


@grid_lru_cache()
def symmetric_order(grid: GridSpec) -> IntArray:
    """Array indices ordered by |x| ascending, +x before -x."""
    z = grid.zero_index
    offsets = np.arange(1, grid.half, dtype=np.int64)
    pairs = np.stack([z + offsets, z - offsets], axis=1).reshape(-1)
    out = np.concatenate([[z], pairs, [grid.n - 1]]).astype(np.int64)
    out.flags.writeable = False
    return out


def rearrange_values(grid: GridSpec, values: FloatArray) -> FloatArray:
    out = np.empty_like(values)
    out[..., symmetric_order(grid)] = np.sort(values, axis=-1)[..., ::-1]
    return out


def rearrange(f: CircleFunction) -> CircleFunction:
    """The symmetric non-increasing rearrangement f*.

    .. doctest::

        >>> from rshelab.circle.grid import CircleFunction, make_grid
        >>> from rshelab.circle.rearrange import rearrange
        >>> f = CircleFunction(make_grid(4), [1.0, 3.0, 0.0, 2.0])
        >>> rearrange(f).values.tolist()
        [1.0, 3.0, 2.0, 0.0]
    """
    return CircleFunction(f.grid, rearrange_values(f.grid, f.values))


def is_symmetric_nonincreasing(f: CircleFunction, tol: float) -> bool:
    """Whether ``||f - f*||_2 <= tol``."""
    return lp_norm(f - rearrange(f), 2) <= tol


def mirror_defect(f: CircleFunction) -> float:
    """``||f - f(-.)||_2``; zero for exactly symmetric functions."""
    return lp_norm(f - f.mirrored(), 2)


def max_sorted_gap(f: CircleFunction) -> float:
    """Largest gap between consecutive sorted values."""
    return float(np.max(np.diff(np.sort(f.values)), initial=0.0))


@grid_lru_cache()
def split_mode(m: int, grid: GridSpec) -> Tuple[CircleFunction, CircleFunction]:
    """Split e_m into two symmetric non-increasing parts, e_m = e_m^+ - e_m^-.

    On [0, 1/2], e_m^+(x) = e_m(0) - (decrease of e_m over [0, x]) and
    e_m^-(x) = -(increase of e_m over [0, x]); both extend to (-1/2, 0] by symmetry.
    The increase/decrease integrals are evaluated exactly: the grid points are merged
    with the extrema k/(2m) of e_m, between which e_m is monotone.
    """
    if m < 0:
        raise ValueError(f"mode index must be non-negative, got {m}")
    if m == 0:
        return CircleFunction.constant(grid, 1.0), CircleFunction.zeros(grid)
    grid.check_cutoff(m)

    half_x = np.arange(grid.half + 1, dtype=np.float64) / grid.n
    extrema = np.arange(m + 1, dtype=np.float64) / (2 * m)
    fine_x = np.union1d(half_x, extrema)
    fine_e = np.sqrt(2.0) * np.cos(2.0 * np.pi * m * fine_x)

    d = np.diff(fine_e)
    up = np.concatenate([[0.0], np.cumsum(np.maximum(d, 0.0))])
    down = np.concatenate([[0.0], np.cumsum(np.maximum(-d, 0.0))])

    pos = np.searchsorted(fine_x, half_x)
    plus_half = np.sqrt(2.0) - down[pos]
    minus_half = -up[pos]

    abs_j = np.abs(grid.indices)
    return (
        CircleFunction(grid, plus_half[abs_j]),
        CircleFunction(grid, minus_half[abs_j]),
    )


def random_monotone(
    grid: GridSpec, generator: np.random.Generator, symmetric: bool = False
) -> CircleFunction:
    if not symmetric:
        return rearrange(CircleFunction(grid, generator.standard_normal(grid.n)))
    levels = np.sort(generator.standard_normal(grid.half + 1))[::-1]
    return CircleFunction(grid, levels[np.abs(grid.indices)])
