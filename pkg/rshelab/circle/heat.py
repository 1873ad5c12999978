import math
from typing import Optional

import numpy as np
import scipy.fft

from rshelab.cache import grid_lru_cache
from rshelab.circle.grid import CircleFunction, FourierCoeffs, GridSpec
from rshelab.types import FloatArray

MAX_KERNEL_IMAGES = 20


@grid_lru_cache(maxsize=512)
def _heat_multipliers(grid: GridSpec, t: float) -> FloatArray:
    k = np.arange(grid.half + 1, dtype=np.float64)
    out = np.exp(-4.0 * np.pi**2 * k**2 * t)
    out.flags.writeable = False
    return out


def _to_wavenumber_order(grid: GridSpec, values: FloatArray) -> FloatArray:
    return np.roll(values, -grid.zero_index, axis=-1)


def _from_wavenumber_order(grid: GridSpec, values: FloatArray) -> FloatArray:
    return np.roll(values, grid.zero_index, axis=-1)


def heat_apply_values(grid: GridSpec, values: FloatArray, t: float) -> FloatArray:
    if t < 0:
        raise ValueError(f"heat time must be non-negative, got {t}")
    if t == 0:
        return np.array(values, dtype=np.float64)
    spectrum = scipy.fft.rfft(_to_wavenumber_order(grid, values), axis=-1)
    spectrum *= _heat_multipliers(grid, float(t))
    out = _from_wavenumber_order(
        grid, scipy.fft.irfft(spectrum, n=grid.n, axis=-1)
    )
    # exactly symmetric rows stay exactly symmetric
    mirror = grid.mirror_index
    if out.ndim == 1:
        if np.array_equal(values, values[mirror]):
            out = 0.5 * (out + out[mirror])
    else:
        symmetric = np.all(values == values[..., mirror], axis=-1)
        out[symmetric] = 0.5 * (out[symmetric] + out[symmetric][:, mirror])
    result: FloatArray = out
    return result


def heat_apply(t: float, f: CircleFunction) -> CircleFunction:
    """Apply the heat semigroup for time ``t >= 0``; ``t = 0`` returns ``f``."""
    if t < 0:
        raise ValueError(f"heat time must be non-negative, got {t}")
    if t == 0:
        return f
    return CircleFunction(f.grid, heat_apply_values(f.grid, f.values, t))


def default_kernel_truncation(t: float, n: int) -> int:
    return min(MAX_KERNEL_IMAGES, 3 + math.ceil(3.0 * math.sqrt(t) * n))


def heat_kernel(t: float, grid: GridSpec, K: Optional[int] = None) -> CircleFunction:
    """Samples of the wrapped Gaussian Gamma(t, x) with images ``|k| <= K``."""
    if t <= 0:
        raise ValueError(f"heat kernel time must be positive, got {t}")
    if K is None:
        K = default_kernel_truncation(t, grid.n)
    if K < 3:
        raise ValueError(f"kernel truncation must be at least 3, got {K}")

    x = np.abs(grid.points)[:, None]
    images = np.arange(-K, K + 1, dtype=np.float64)[None, :]
    terms = np.exp(-((x - images) ** 2) / (4.0 * t))
    values = terms.sum(axis=1) / math.sqrt(4.0 * math.pi * t)
    return CircleFunction(grid, values)


def circular_convolve(g: CircleFunction, f: CircleFunction) -> CircleFunction:
    """``(g * f)(x) = (1/n) sum_y g(x - y) f(y)`` under the uniform rule."""
    if g.grid != f.grid:
        raise ValueError(f"grid mismatch: n={g.grid.n} vs n={f.grid.n}")
    grid = f.grid
    spectrum = scipy.fft.rfft(_to_wavenumber_order(grid, g.values)) * scipy.fft.rfft(
        _to_wavenumber_order(grid, f.values)
    )
    values = scipy.fft.irfft(spectrum, n=grid.n) / grid.n
    return CircleFunction(grid, _from_wavenumber_order(grid, values))


def heat_convolve(
    t: float, f: CircleFunction, K: Optional[int] = None
) -> CircleFunction:
    """e^{t Delta} f by quadrature convolution with Gamma(t, .)."""
    return circular_convolve(heat_kernel(t, f.grid, K), f)


def dirichlet_energy_integral(u: FourierCoeffs, h: float) -> float:
    """Closed form of ``int_0^h ||D e^{s Delta} u||_2^2 ds`` up to the cutoff of u."""
    if h <= 0:
        raise ValueError(f"integration horizon must be positive, got {h}")
    m = np.arange(u.cutoff + 1, dtype=np.float64)
    weights = -np.expm1(-8.0 * np.pi**2 * m**2 * h) / 2.0
    return math.fsum((weights * (u.cos**2 + u.sin**2)).tolist())


def spectral_energies(grid: GridSpec, values: FloatArray) -> FloatArray:
    spectrum = scipy.fft.rfft(_to_wavenumber_order(grid, values), axis=-1)
    power = np.abs(spectrum) ** 2 / grid.n**2
    power[..., 1 : grid.half] *= 2.0
    out: FloatArray = power
    return out


def _dirichlet_weights(grid: GridSpec, h: float) -> FloatArray:
    if h <= 0:
        raise ValueError(f"integration horizon must be positive, got {h}")
    k = np.arange(grid.half + 1, dtype=np.float64)
    out: FloatArray = -np.expm1(-8.0 * np.pi**2 * k**2 * h) / 2.0
    return out


def dirichlet_energy(f: CircleFunction, h: float) -> float:
    """``int_0^h ||D e^{s Delta} f||_2^2 ds`` over the full discrete spectrum.

    Satisfies ``||e^{h Delta} f||^2 = ||f||^2 - 2 dirichlet_energy(f, h)``.
    """
    weights = _dirichlet_weights(f.grid, h)
    return math.fsum((weights * spectral_energies(f.grid, f.values)).tolist())


def dirichlet_energy_values(grid: GridSpec, values: FloatArray, h: float) -> FloatArray:
    out: FloatArray = spectral_energies(grid, values) @ _dirichlet_weights(grid, h)
    return out


def riesz_functional(f: CircleFunction, g: CircleFunction, u: CircleFunction) -> float:
    """``(1/n^2) sum_x sum_y f(x) g(x - y) u(y)``."""
    return f.inner(circular_convolve(g, u))
