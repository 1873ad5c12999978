from __future__ import annotations

import dataclasses
import math
from typing import List, Sequence, Tuple

import numpy as np

from rshelab.errors import ConfigError
from rshelab.types import FloatArray


@dataclasses.dataclass(frozen=True)
class NoiseSpec:
    """Coloured noise; ``amplitude = 0`` switches it off."""

    lam: float
    cutoff: int
    amplitude: float = 1.0

    def __post_init__(self) -> None:
        if not self.lam > 0.5:
            raise ConfigError(f"noise.lambda must exceed 0.5, got {self.lam}")
        if self.cutoff < 0:
            raise ConfigError(f"modes.cutoff must be non-negative, got {self.cutoff}")
        if not self.amplitude >= 0:
            raise ConfigError(
                f"noise.amplitude must be non-negative, got {self.amplitude}"
            )

    def require_smoothing_range(self) -> None:
        if not 0.5 < self.lam < 1.0:
            raise ConfigError(
                f"noise.lambda must lie in (0.5, 1) for smoothing experiments, "
                f"got {self.lam}"
            )

    @property
    def colouring(self) -> FloatArray:
        """lambda_m for m = 0..cutoff (lambda_0 = 1), times the amplitude."""
        m = np.arange(self.cutoff + 1, dtype=np.float64)
        out = np.ones(self.cutoff + 1)
        out[1:] = m[1:] ** (-self.lam)
        return self.amplitude * out


@dataclasses.dataclass(frozen=True, eq=False)
class ConvIncrement:
    """One sample of the stochastic convolution over a step of length ``h``."""

    h: float
    gauss: FloatArray

    def __post_init__(self) -> None:
        if not self.h > 0:
            raise ValueError(f"step length must be positive, got {self.h}")
        gauss = np.array(self.gauss, dtype=np.float64)
        gauss.flags.writeable = False
        object.__setattr__(self, "gauss", gauss)

    @property
    def cutoff(self) -> int:
        return int(self.gauss.size - 1)


def _check_step(h: float) -> None:
    if not h > 0:
        raise ValueError(f"step length must be positive, got {h}")


def conv_variances(spec: NoiseSpec, h: float) -> FloatArray:
    """Closed-form variance of each cosine amplitude over a step of length ``h``."""
    _check_step(h)
    m = np.arange(spec.cutoff + 1, dtype=np.float64)
    rate = 8.0 * np.pi**2 * m**2
    out = np.empty(spec.cutoff + 1)
    out[0] = h
    out[1:] = -np.expm1(-rate[1:] * h) / rate[1:]
    result: FloatArray = spec.colouring**2 * out
    return result


def conv_increment(
    spec: NoiseSpec, h: float, generator: np.random.Generator
) -> ConvIncrement:
    """Sample the stochastic convolution over one step."""
    return ConvIncrement(h, conv_samples(spec, h, generator, 1)[0])


def conv_samples(
    spec: NoiseSpec, h: float, generator: np.random.Generator, count: int
) -> FloatArray:
    std = np.sqrt(conv_variances(spec, h))
    out: FloatArray = std * generator.standard_normal((count, spec.cutoff + 1))
    return out


def zero_increment(spec: NoiseSpec, h: float) -> ConvIncrement:
    return ConvIncrement(h, np.zeros(spec.cutoff + 1))


def trace_constant(spec: NoiseSpec) -> float:
    """Truncated trace of Q per unit time, ``1 + sum_{m=1..M} m^{-2 lambda}``."""
    return math.fsum((spec.colouring**2).tolist())


def expected_step_energy(spec: NoiseSpec, h: float) -> float:
    """``E ||xi||_2^2`` for one step; at most ``trace_constant * h``."""
    return math.fsum(conv_variances(spec, h).tolist())


def step_self_dissipation(spec: NoiseSpec, h: float) -> float:
    """Expected ``int_0^h ||D int_0^s e^{(s-r) Delta} dW_r||^2 ds``."""
    lam2 = spec.colouring**2
    return math.fsum((lam2 * h - conv_variances(spec, h)).tolist()) / 2.0


def _decay(spec: NoiseSpec, h: float) -> FloatArray:
    m = np.arange(spec.cutoff + 1, dtype=np.float64)
    out: FloatArray = np.exp(-4.0 * np.pi**2 * m**2 * h)
    return out


def aggregate(
    fine_a: ConvIncrement, fine_b: ConvIncrement, h_fine: float
) -> ConvIncrement:
    """Compose two consecutive fine increments into one increment over ``2 h_fine``."""
    if fine_a.cutoff != fine_b.cutoff:
        raise ValueError(
            f"increments have different cutoffs: {fine_a.cutoff} vs {fine_b.cutoff}"
        )
    if not (fine_a.h == fine_b.h == h_fine):
        raise ValueError(
            f"increments must both have step {h_fine}, got {fine_a.h} and {fine_b.h}"
        )
    m = np.arange(fine_a.cutoff + 1, dtype=np.float64)
    decay = np.exp(-4.0 * np.pi**2 * m**2 * h_fine)
    return ConvIncrement(2.0 * h_fine, decay * fine_a.gauss + fine_b.gauss)


def aggregated_variances(spec: NoiseSpec, h_fine: float) -> FloatArray:
    decay = _decay(spec, h_fine)
    v = conv_variances(spec, h_fine)
    out: FloatArray = decay**2 * v + v
    return out


def aggregate_sequence(
    increments: Sequence[ConvIncrement], h_fine: float
) -> List[ConvIncrement]:
    if len(increments) % 2:
        raise ValueError(
            f"need an even number of fine increments, got {len(increments)}"
        )
    return [
        aggregate(increments[i], increments[i + 1], h_fine)
        for i in range(0, len(increments), 2)
    ]


def noise_moment_ratio(
    spec: NoiseSpec,
    h: float,
    p: int,
    samples: int,
    generator: np.random.Generator,
) -> Tuple[float, float]:
    """Monte Carlo estimate of ``E ||xi||_2^{2p} / h^p`` and its standard error."""
    if p < 1:
        raise ValueError(f"moment order must be at least 1, got {p}")
    if samples < 2:
        raise ValueError(f"need at least 2 samples, got {samples}")
    draws = conv_samples(spec, h, generator, samples)
    ratios = np.sum(draws**2, axis=1) ** p / h**p
    return float(np.mean(ratios)), float(np.std(ratios, ddof=1) / math.sqrt(samples))
