from __future__ import annotations

import dataclasses
import math
from typing import Tuple, Union

import numpy as np

from rshelab.cache import grid_lru_cache
from rshelab.contexts import _should_do_checks
from rshelab.errors import ConfigError
from rshelab.types import FloatArray, IntArray

MAX_GRID_SIZE = 2**20


@dataclasses.dataclass(frozen=True)
class GridSpec:
    """A symmetric uniform grid of ``n`` points on the circle."""

    n: int

    def __post_init__(self) -> None:
        if isinstance(self.n, bool) or not isinstance(self.n, (int, np.integer)):
            raise ConfigError(f"grid.n must be an integer, got {self.n!r}")
        if self.n % 2:
            raise ConfigError(f"grid.n must be even, got {self.n}")
        if not 4 <= self.n <= MAX_GRID_SIZE:
            raise ConfigError(
                f"grid.n must lie in [4, {MAX_GRID_SIZE}], got {self.n}"
            )
        object.__setattr__(self, "n", int(self.n))

    @property
    def half(self) -> int:
        return self.n // 2

    @property
    def zero_index(self) -> int:
        return self.half - 1

    @property
    def max_cutoff(self) -> int:
        return self.half - 1

    @property
    def indices(self) -> IntArray:
        return _grid_indices(self)

    @property
    def points(self) -> FloatArray:
        return _grid_points(self)

    @property
    def mirror_index(self) -> IntArray:
        """Array index of -x for every array index of x."""
        return _mirror_index(self)

    def check_cutoff(self, cutoff: int) -> None:
        if cutoff < 0 or cutoff > self.max_cutoff:
            raise ConfigError(
                f"modes.cutoff must lie in [0, n/2 - 1] = [0, {self.max_cutoff}] "
                f"for n={self.n}, got {cutoff}"
            )


def make_grid(n: int) -> GridSpec:
    """Create the symmetric grid with ``n`` points (``n`` even, ``4 <= n <= 2**20``).

    .. doctest::

        >>> from rshelab.circle.grid import make_grid
        >>> make_grid(4).points.tolist()
        [-0.25, 0.0, 0.25, 0.5]
    """
    return GridSpec(n)


# Index i holds x = (i - n/2 + 1) / n.
@grid_lru_cache()
def _grid_indices(grid: GridSpec) -> IntArray:
    out = np.arange(-grid.half + 1, grid.half + 1, dtype=np.int64)
    out.flags.writeable = False
    return out


@grid_lru_cache()
def _grid_points(grid: GridSpec) -> FloatArray:
    out = _grid_indices(grid) / grid.n
    out.flags.writeable = False
    return out


@grid_lru_cache()
def _mirror_index(grid: GridSpec) -> IntArray:
    z = grid.zero_index
    j = _grid_indices(grid)
    mirrored_j = np.where(j == grid.half, j, -j)
    out = (mirrored_j + z).astype(np.int64)
    out.flags.writeable = False
    return out


@dataclasses.dataclass(frozen=True, eq=False)
class CircleFunction:
    """Samples of a real function on a GridSpec. Values are read-only."""

    grid: GridSpec
    values: FloatArray

    def __post_init__(self) -> None:
        values = np.array(self.values, dtype=np.float64)
        if values.shape != (self.grid.n,):
            raise ValueError(
                f"expected {self.grid.n} values for grid n={self.grid.n}, "
                f"got shape {values.shape}"
            )
        if _should_do_checks() and not np.all(np.isfinite(values)):
            raise ValueError("CircleFunction values must be finite")
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    @staticmethod
    def constant(grid: GridSpec, c: float) -> CircleFunction:
        return CircleFunction(grid, np.full(grid.n, float(c)))

    @staticmethod
    def zeros(grid: GridSpec) -> CircleFunction:
        return CircleFunction(grid, np.zeros(grid.n))

    def mirrored(self) -> CircleFunction:
        return CircleFunction(self.grid, self.values[self.grid.mirror_index])

    def is_symmetric(self) -> bool:
        return bool(np.array_equal(self.values, self.values[self.grid.mirror_index]))

    def inner(self, other: CircleFunction) -> float:
        """L^2 inner product under the uniform rule."""
        _check_same_grid(self, other)
        return math.fsum((self.values * other.values).tolist()) / self.grid.n

    def __add__(self, other: Union[CircleFunction, float]) -> CircleFunction:
        if isinstance(other, CircleFunction):
            _check_same_grid(self, other)
            return CircleFunction(self.grid, self.values + other.values)
        return CircleFunction(self.grid, self.values + float(other))

    def __sub__(self, other: Union[CircleFunction, float]) -> CircleFunction:
        if isinstance(other, CircleFunction):
            _check_same_grid(self, other)
            return CircleFunction(self.grid, self.values - other.values)
        return CircleFunction(self.grid, self.values - float(other))

    def __mul__(self, c: float) -> CircleFunction:
        return CircleFunction(self.grid, self.values * float(c))

    __rmul__ = __mul__

    def __neg__(self) -> CircleFunction:
        return CircleFunction(self.grid, -self.values)


def _check_same_grid(f: CircleFunction, g: CircleFunction) -> None:
    if f.grid != g.grid:
        raise ValueError(f"grid mismatch: n={f.grid.n} vs n={g.grid.n}")


@dataclasses.dataclass(frozen=True, eq=False)
class FourierCoeffs:
    """Cosine and sine amplitudes up to a cutoff ``M``.

    ``cos[m]`` pairs with ``e_m`` for ``m = 0..M``; ``sin[m]`` pairs with ``s_m`` for
    ``m = 1..M`` and ``sin[0]`` is always zero.
    """

    cos: FloatArray
    sin: FloatArray

    def __post_init__(self) -> None:
        cos = np.array(self.cos, dtype=np.float64)
        sin = np.array(self.sin, dtype=np.float64)
        if cos.ndim != 1 or cos.size == 0:
            raise ValueError(f"cos coefficients must be a non-empty vector, got {cos}")
        if sin.shape != cos.shape:
            raise ValueError(
                f"cos and sin coefficients must match, got {cos.shape} vs {sin.shape}"
            )
        if sin[0] != 0.0:
            raise ValueError(f"sin[0] must be zero, got {sin[0]}")
        cos.flags.writeable = False
        sin.flags.writeable = False
        object.__setattr__(self, "cos", cos)
        object.__setattr__(self, "sin", sin)

    @staticmethod
    def symmetric(cos: FloatArray) -> FourierCoeffs:
        cos = np.asarray(cos, dtype=np.float64)
        return FourierCoeffs(cos, np.zeros_like(cos))

    @property
    def cutoff(self) -> int:
        return int(self.cos.size - 1)

    @property
    def is_symmetric(self) -> bool:
        return not np.any(self.sin)


@grid_lru_cache()
def _half_bases(grid: GridSpec, cutoff: int) -> Tuple[FloatArray, FloatArray]:
    m = np.arange(cutoff + 1, dtype=np.float64)[:, None]
    x = np.arange(grid.half + 1, dtype=np.float64)[None, :] / grid.n
    cos = math.sqrt(2.0) * np.cos(2.0 * np.pi * m * x)
    sin = math.sqrt(2.0) * np.sin(2.0 * np.pi * m * x)
    cos[0, :] = 1.0
    sin[0, :] = 0.0
    sin[:, 0] = 0.0
    sin[:, -1] = 0.0
    cos.flags.writeable = False
    sin.flags.writeable = False
    return cos, sin


@grid_lru_cache()
def _full_bases(grid: GridSpec, cutoff: int) -> Tuple[FloatArray, FloatArray]:
    half_cos, half_sin = _half_bases(grid, cutoff)
    abs_j = np.abs(_grid_indices(grid))
    sign = np.sign(_grid_indices(grid)).astype(np.float64)
    cos = half_cos[:, abs_j]
    sin = half_sin[:, abs_j] * sign[None, :]
    cos.flags.writeable = False
    sin.flags.writeable = False
    return cos, sin


def _fold(grid: GridSpec, values: FloatArray) -> Tuple[FloatArray, FloatArray]:
    # f(x) + f(-x) and f(x) - f(-x) for j = 0..n/2
    z = grid.zero_index
    h = grid.half
    pos = values[..., z + 1 : z + h]
    neg = values[..., z - 1 :: -1]
    even = np.concatenate(
        [values[..., z : z + 1], pos + neg, values[..., -1:]], axis=-1
    )
    zero = np.zeros(values.shape[:-1] + (1,))
    odd = np.concatenate([zero, pos - neg, zero], axis=-1)
    return even, odd


def cos_modes(grid: GridSpec, values: FloatArray, cutoff: int) -> FloatArray:
    half_cos, _ = _half_bases(grid, cutoff)
    even, _ = _fold(grid, values)
    out: FloatArray = even @ half_cos.T / grid.n
    return out


def synthesize_cos(grid: GridSpec, cos: FloatArray) -> FloatArray:
    full_cos, _ = _full_bases(grid, cos.shape[-1] - 1)
    out: FloatArray = cos @ full_cos
    return out


def to_modes(f: CircleFunction, cutoff: int) -> FourierCoeffs:
    """Fourier amplitudes ``<f, e_m>`` and ``<f, s_m>`` for ``m <= cutoff``.

    .. doctest::

        >>> from rshelab.circle.grid import CircleFunction, make_grid, to_modes
        >>> c = to_modes(CircleFunction.constant(make_grid(8), 2.5), 3)
        >>> c.cos.tolist(), c.sin.tolist()
        ([2.5, 0.0, 0.0, 0.0], [0.0, 0.0, 0.0, 0.0])
    """
    grid = f.grid
    grid.check_cutoff(cutoff)
    half_cos, half_sin = _half_bases(grid, cutoff)
    even, odd = _fold(grid, f.values)
    cos = half_cos @ even / grid.n
    sin = half_sin @ odd / grid.n
    sin[0] = 0.0
    return FourierCoeffs(cos, sin)


def from_modes(c: FourierCoeffs, grid: GridSpec) -> CircleFunction:
    """Pointwise synthesis ``sum_m cos[m] e_m(x_j) + sin[m] s_m(x_j)``."""
    grid.check_cutoff(c.cutoff)
    full_cos, full_sin = _full_bases(grid, c.cutoff)
    values = c.cos @ full_cos
    if not c.is_symmetric:
        values = values + c.sin @ full_sin
    return CircleFunction(grid, values)


def basis_function(m: int, grid: GridSpec) -> CircleFunction:
    """The cosine basis function e_m sampled on the grid."""
    if m < 0:
        raise ValueError(f"mode index must be non-negative, got {m}")
    if m == 0:
        return CircleFunction.constant(grid, 1.0)
    return CircleFunction(
        grid, math.sqrt(2.0) * np.cos(2.0 * np.pi * m * np.abs(grid.points))
    )


def lp_norm(f: CircleFunction, p: float) -> float:
    """``((1/n) sum |f_j|^p)^(1/p)``, or ``max |f_j|`` for ``p = inf``."""
    if not p >= 1:
        raise ValueError(f"p must be at least 1, got {p}")
    a = np.abs(f.values)
    if math.isinf(p):
        return float(np.max(a))
    if p == 1:
        return math.fsum(a.tolist()) / f.grid.n
    if p == 2:
        return math.sqrt(math.fsum((a * a).tolist()) / f.grid.n)
    return float((math.fsum((a**p).tolist()) / f.grid.n) ** (1.0 / p))


def sobolev_norm(c: FourierCoeffs, mu: float, squared: bool = False) -> float:
    """``||f||_{2,mu}`` with ``||f||_{2,mu}^2 = sum_m (m v 1)^(2 mu) c_m^2``.

    Truncated at the cutoff of ``c``; only defined for symmetric coefficients.
    """
    if not c.is_symmetric:
        raise ValueError("sobolev_norm expects symmetric coefficients (zero sin part)")
    weights = np.maximum(np.arange(c.cutoff + 1, dtype=np.float64), 1.0) ** (2 * mu)
    total = math.fsum((weights * c.cos**2).tolist())
    return total if squared else math.sqrt(total)


def derivative(f: CircleFunction) -> CircleFunction:
    """Spectral derivative, exact for functions band-limited at ``n/2 - 1``."""
    grid = f.grid
    c = to_modes(f, grid.max_cutoff)
    k = 2.0 * np.pi * np.arange(c.cutoff + 1, dtype=np.float64)
    return from_modes(FourierCoeffs(k * c.sin, -k * c.cos), grid)


def difference_quotient(f: CircleFunction) -> CircleFunction:
    return CircleFunction(f.grid, f.grid.n * (np.roll(f.values, -1) - f.values))
