from __future__ import annotations

import dataclasses
import logging
import math
import os
from typing import Sequence, Union

import numpy as np

from rshelab.circle.grid import CircleFunction, GridSpec, lp_norm, make_grid
from rshelab.circle.rearrange import is_symmetric_nonincreasing, rearrange
from rshelab.types import FloatArray, IntArray

logger = logging.getLogger(__name__)

# Allowed decrease in a quantile function, relative to its magnitude.
QUANTILE_MONOTONE_RTOL = 1e-12


@dataclasses.dataclass(frozen=True, eq=False)
class QuantileFn:
    """Non-decreasing quantile values ``q`` on the uniform grid ``u`` of [0, 1]."""

    u: FloatArray
    q: FloatArray

    def __post_init__(self) -> None:
        u = np.array(self.u, dtype=np.float64)
        q = np.array(self.q, dtype=np.float64)
        if u.ndim != 1 or u.size < 3 or q.shape != u.shape:
            raise ValueError(
                f"quantile grid and values must be vectors of equal length >= 3, "
                f"got {u.shape} and {q.shape}"
            )
        expected = np.linspace(0.0, 1.0, u.size)
        if not np.allclose(u, expected, rtol=0.0, atol=1e-12):
            raise ValueError(f"quantile grid must be uniform on [0, 1], got {u}")
        if not np.all(np.isfinite(q)):
            raise ValueError("quantile values must be finite")
        slack = QUANTILE_MONOTONE_RTOL * (1.0 + float(np.max(np.abs(q))))
        drops = np.diff(q)
        if np.any(drops < -slack):
            i = int(np.argmin(drops))
            raise ValueError(
                f"quantile values must be non-decreasing, but q[{i + 1}] = {q[i + 1]} "
                f"< q[{i}] = {q[i]}"
            )
        u.flags.writeable = False
        q.flags.writeable = False
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "q", q)

    @property
    def grid(self) -> GridSpec:
        return make_grid(2 * (self.u.size - 1))

    @staticmethod
    def on_grid(grid: GridSpec, q: FloatArray) -> QuantileFn:
        return QuantileFn(np.linspace(0.0, 1.0, grid.half + 1), q)


def _half_indices(grid: GridSpec) -> IntArray:
    # x = 1/2 down to 0, i.e. u = 0 up to 1
    out: IntArray = grid.zero_index + np.arange(grid.half, -1, -1, dtype=np.int64)
    return out


def ustar_to_quantile(f: CircleFunction, tol: float = 0.0) -> QuantileFn:
    """Read the quantile function ``u -> f((1 - u) / 2)`` off the grid.

    ``f(x)`` and ``f(-x)`` share the quantile level ``1 - 2|x|``, so each mirror pair
    contributes its average. Exactly symmetric inputs round trip unchanged; for a
    rearranged state the result is its symmetric part, which has the same mean and
    lies ``mirror_defect(f) / 2`` away in L^2.

    .. doctest::

        >>> from rshelab.circle.grid import CircleFunction, make_grid
        >>> from rshelab.measure.bridge import ustar_to_quantile
        >>> f = CircleFunction(make_grid(4), [2.0, 3.0, 2.0, 1.0])
        >>> ustar_to_quantile(f).q.tolist()
        [1.0, 2.0, 3.0]
        >>> g = CircleFunction(make_grid(4), [1.5, 3.0, 2.5, 1.0])
        >>> ustar_to_quantile(g).q.tolist()
        [1.0, 2.0, 3.0]
    """
    if not is_symmetric_nonincreasing(f, tol):
        raise ValueError(
            "ustar_to_quantile expects a symmetric non-increasing function "
            f"(||f - f*||_2 = {lp_norm(f - rearrange(f), 2)} > {tol})"
        )
    idx = _half_indices(f.grid)
    mirrored = f.grid.mirror_index[idx]
    return QuantileFn.on_grid(f.grid, 0.5 * (f.values[idx] + f.values[mirrored]))


def quantile_to_ustar(q: QuantileFn) -> CircleFunction:
    """The symmetric function ``f(x) = q(1 - 2|x|)`` on the matching grid."""
    grid = q.grid
    u_index = grid.half - np.abs(grid.indices)
    return CircleFunction(grid, q.q[u_index])


def _monotone(f: CircleFunction, which: str) -> CircleFunction:
    if is_symmetric_nonincreasing(f, 0.0):
        return f
    logger.info("w2: %s is not symmetric non-increasing, rearranging it first", which)
    return rearrange(f)


def w2(f: CircleFunction, g: CircleFunction) -> float:
    """``W_2`` between the laws of f and g, i.e. ``||f* - g*||_2``."""
    if f.grid != g.grid:
        raise ValueError(f"grid mismatch: n={f.grid.n} vs n={g.grid.n}")
    return lp_norm(_monotone(f, "f") - _monotone(g, "g"), 2)


def w2_oracle(
    atoms_a: Union[Sequence[float], FloatArray],
    atoms_b: Union[Sequence[float], FloatArray],
) -> float:
    """``W_2`` between two uniform empirical measures by the sorted coupling."""
    a = np.sort(np.asarray(atoms_a, dtype=np.float64))
    b = np.sort(np.asarray(atoms_b, dtype=np.float64))
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError(
            f"w2_oracle needs equal atom counts, got {a.shape} and {b.shape}"
        )
    if a.size == 0:
        raise ValueError("w2_oracle needs at least one atom")
    d = a - b
    return math.sqrt(math.fsum((d * d).tolist()) / a.size)


def nearest_rank_quantiles(samples: FloatArray, u: FloatArray) -> FloatArray:
    """Empirical quantiles ``sorted[max(ceil(u S), 1) - 1]`` of ``S`` samples."""
    s = np.sort(np.asarray(samples, dtype=np.float64))
    idx = np.maximum(np.ceil(u * s.size).astype(np.int64), 1) - 1
    out: FloatArray = s[np.minimum(idx, s.size - 1)]
    return out


def empirical_to_ustar(
    samples: Union[Sequence[float], FloatArray], grid: GridSpec
) -> CircleFunction:
    """Place the empirical law of ``samples`` on the grid by nearest-rank quantiles."""
    s = np.asarray(samples, dtype=np.float64).ravel()
    if s.size == 0:
        raise ValueError("empirical_to_ustar needs at least one sample")
    if not np.all(np.isfinite(s)):
        raise ValueError("samples must be finite")
    u = np.linspace(0.0, 1.0, grid.half + 1)
    return quantile_to_ustar(QuantileFn(u, nearest_rank_quantiles(s, u)))


def sample_measure(
    f: CircleFunction, count: int, generator: np.random.Generator
) -> FloatArray:
    """i.i.d. draws from the law of f: ``f(U)`` with U uniform over the grid points."""
    if count < 0:
        raise ValueError(f"sample count must be non-negative, got {count}")
    if not is_symmetric_nonincreasing(f, 0.0):
        raise ValueError("sample_measure expects a symmetric non-increasing function")
    out: FloatArray = f.values[generator.integers(0, f.grid.n, size=count)]
    return out


def load_samples(path: Union[str, "os.PathLike[str]"]) -> FloatArray:
    """Read a sample file: one real per line, blank lines and ``#`` comments ignored."""
    values = np.loadtxt(path, dtype=np.float64, ndmin=1, comments="#")
    if values.ndim != 1:
        raise ValueError(
            f"{path}: expected one value per line, got shape {values.shape}"
        )
    if values.size == 0:
        raise ValueError(f"{path}: no samples")
    out: FloatArray = values
    return out


def save_samples(
    path: Union[str, "os.PathLike[str]"], samples: Union[Sequence[float], FloatArray]
) -> None:
    with open(path, "w", newline="\n") as fh:
        for x in np.asarray(samples, dtype=np.float64).ravel():
            fh.write(f"{x:.17g}\n")
