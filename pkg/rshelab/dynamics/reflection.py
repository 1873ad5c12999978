from __future__ import annotations

import dataclasses
import enum
import logging
import math
from typing import Optional, Sequence, Tuple, Union

import numpy as np

from rshelab.circle.grid import (
    CircleFunction,
    FourierCoeffs,
    GridSpec,
    _full_bases,
    basis_function,
    cos_modes,
    sobolev_norm,
    to_modes,
)
from rshelab.circle.heat import dirichlet_energy_values, heat_apply_values
from rshelab.circle.rearrange import split_mode
from rshelab.contexts import _should_do_checks
from rshelab.dynamics.noise import NoiseSpec, conv_variances
from rshelab.dynamics.scheme import Trajectory
from rshelab.errors import NumericalError
from rshelab.types import FloatArray
from rshelab.utils import mean_and_se

logger = logging.getLogger(__name__)

DEFAULT_PAIR_CUTOFF = 16
# Relative agreement required between the Riemann and the mode-split integrals.
MODE_SPLIT_RTOL = 1e-6


@dataclasses.dataclass(frozen=True, eq=False)
class ReflectionPath:
    """Increments of eta and its cumulative pairings with e_m^+ and e_m^-.

    ``plus[r, m]`` is ``<eta_{t_r}, e_m^+>``; row 0 is zero since eta_0 = 0.
    """

    grid: GridSpec
    times: FloatArray
    increments: FloatArray
    plus: FloatArray
    minus: FloatArray

    def __post_init__(self) -> None:
        r = self.times.size
        if self.increments.shape != (r - 1, self.grid.n):
            raise ValueError(
                f"expected increments of shape {(r - 1, self.grid.n)}, "
                f"got {self.increments.shape}"
            )
        if self.plus.shape != self.minus.shape or self.plus.shape[0] != r:
            raise ValueError(
                f"pairings must have {r} rows, got {self.plus.shape} and "
                f"{self.minus.shape}"
            )

    @property
    def pair_cutoff(self) -> int:
        return int(self.plus.shape[1] - 1)

    def cumulative(self, r: int) -> CircleFunction:
        return CircleFunction(self.grid, self.increments[:r].sum(axis=0))

    def mode_pairing(self, m: int) -> FloatArray:
        """``<eta_t, e_m>`` through the split ``p_m^+ - p_m^-``."""
        out: FloatArray = self.plus[:, m] - self.minus[:, m]
        return out


def _pair_rows(rows: FloatArray, u: FloatArray) -> FloatArray:
    n = rows.shape[-1]
    return np.array([math.fsum((row * u).tolist()) / n for row in rows])


def _with_origin(steps: FloatArray) -> FloatArray:
    out: FloatArray = np.concatenate([np.zeros((1,) + steps.shape[1:]), steps])
    return np.cumsum(out, axis=0)


def _check_increments(traj: Trajectory) -> None:
    if traj.pre_states is None or traj.record_every != 1:
        return
    expected = traj.states[1:] - traj.pre_states
    scale = 1.0 + float(np.max(np.abs(traj.states)))
    for r, (got, want) in enumerate(zip(traj.reflection_increments, expected)):
        err = float(np.max(np.abs(got - want)))
        if err > 1e-12 * scale:
            raise NumericalError(
                f"reflection increment {r} differs from X - Z by {err}"
            )


def eta_from_trajectory(
    traj: Trajectory, pair_cutoff: int = DEFAULT_PAIR_CUTOFF
) -> ReflectionPath:
    """Collect the reflection increments of a trajectory.

    ``pair_cutoff`` is clipped to ``n/2 - 1``. When every step is recorded each
    increment is checked against ``X_{k+1} - Z_{k+1}`` from the pre-states.
    """
    if traj.pre_states is None:
        raise ValueError(
            "trajectory carries no pre-states; simulate with keep_pre_states=True"
        )
    grid = traj.grid
    m_pair = min(pair_cutoff, grid.max_cutoff)
    increments = np.array(traj.reflection_increments)
    if _should_do_checks():
        _check_increments(traj)

    plus_steps = np.empty((increments.shape[0], m_pair + 1))
    minus_steps = np.empty_like(plus_steps)
    for m in range(m_pair + 1):
        e_plus, e_minus = split_mode(m, grid)
        plus_steps[:, m] = _pair_rows(increments, e_plus.values)
        minus_steps[:, m] = _pair_rows(increments, e_minus.values)

    return ReflectionPath(
        grid,
        traj.times,
        increments,
        _with_origin(plus_steps),
        _with_origin(minus_steps),
    )


def step_pairings(path: ReflectionPath, u: CircleFunction) -> FloatArray:
    if u.grid != path.grid:
        raise ValueError(f"grid mismatch: n={u.grid.n} vs n={path.grid.n}")
    return _pair_rows(path.increments, u.values)


def eta_pairing(path: ReflectionPath, u: CircleFunction) -> FloatArray:
    """``<eta_{t_k}, u>`` at every recorded time, starting from 0."""
    return _with_origin(step_pairings(path, u))


def monotone_pairing_floor(path: ReflectionPath, u: CircleFunction) -> FloatArray:
    """``<Delta eta_k, u> / (||u||_2 ||Delta eta_k||_2)``, 0 where eta does not move."""
    pairings = step_pairings(path, u)
    u_norm = math.sqrt(math.fsum((u.values**2).tolist()) / path.grid.n)
    eta_norms = np.sqrt(np.sum(path.increments**2, axis=1) / path.grid.n)
    scale = u_norm * eta_norms
    out: FloatArray = np.divide(
        pairings, scale, out=np.zeros_like(pairings), where=scale > 0
    )
    return out


class CrossCheckRule(enum.Enum):
    # (1 - exp(-a h)) / a, matching the discrete dynamics
    EXPONENTIAL = "exponential"
    LEFT = "left"


@dataclasses.dataclass(frozen=True)
class PairingCrossCheck:
    m: int
    direct: FloatArray
    reconstructed: FloatArray
    tolerance: float

    @property
    def max_abs_error(self) -> float:
        return float(np.max(np.abs(self.direct - self.reconstructed)))

    @property
    def passed(self) -> bool:
        return self.max_abs_error <= self.tolerance


def eta_pairing_from_companion(
    traj: Trajectory,
    path: ReflectionPath,
    m: int,
    rule: Union[CrossCheckRule, str] = CrossCheckRule.EXPONENTIAL,
) -> PairingCrossCheck:
    """Recover ``<eta_t, e_m>`` from ``Y = X - V`` and compare with the direct sum.

    ``<eta_t, e_m> = <Y_t, e_m> + 4 pi^2 m^2 int_0^t <Y_r, e_m> dr``, with the time
    integral taken over left endpoints. The exponential rule weights each step by
    ``(1 - exp(-a h)) / a`` and agrees with the direct sum to rounding; the plain rule
    weights by ``h`` and carries the error bound ``T a^2 h sup|<Y, e_m>| / 2``.
    """
    rule = CrossCheckRule(rule)
    if traj.record_every != 1:
        raise ValueError(
            "the companion cross-check needs every step recorded (record_every = 1)"
        )
    grid = traj.grid
    grid.check_cutoff(m)
    h = traj.config.h
    y = cos_modes(grid, traj.states - traj.companions, m)[:, m]
    a = 4.0 * np.pi**2 * m**2

    if rule is CrossCheckRule.EXPONENTIAL:
        step_weight = -math.expm1(-a * h)
    else:
        step_weight = a * h
    integral = _with_origin(step_weight * y[:-1])
    reconstructed = y - y[0] + integral

    direct = eta_pairing(path, basis_function(m, grid))
    scale = 1.0 + float(np.max(np.abs(direct)))
    if rule is CrossCheckRule.EXPONENTIAL:
        tolerance = 1e-9 * scale
    else:
        sup_y = float(np.max(np.abs(y)))
        tolerance = 0.5 * traj.config.T * a**2 * h * sup_y + 1e-9 * scale
    return PairingCrossCheck(m, direct, reconstructed, tolerance)


@dataclasses.dataclass(frozen=True)
class StieltjesIntegral:
    """Riemann and mode-split evaluations of ``int e^{eps Delta} z . d eta``.

    ``scale`` is ``sum_k ||e^{eps Delta} z_k||_2 ||Delta eta_k||_2``.
    """

    riemann: float
    mode_split: float
    scale: float

    @property
    def discrepancy(self) -> float:
        return abs(self.riemann - self.mode_split)


def _as_rows(
    z: Union[FloatArray, Sequence[CircleFunction]], grid: GridSpec
) -> FloatArray:
    if isinstance(z, np.ndarray):
        rows = np.asarray(z, dtype=np.float64)
    else:
        for f in z:
            if f.grid != grid:
                raise ValueError(f"grid mismatch: n={f.grid.n} vs n={grid.n}")
        rows = np.stack([f.values for f in z])
    if rows.ndim != 2 or rows.shape[1] != grid.n:
        raise ValueError(
            f"integrand must have shape (times, {grid.n}), got {rows.shape}"
        )
    return rows


def _smooth(grid: GridSpec, rows: FloatArray, epsilon: float) -> FloatArray:
    if epsilon < 0:
        raise ValueError(f"smoothing time epsilon must be non-negative, got {epsilon}")
    return heat_apply_values(grid, rows, epsilon)


def stieltjes_integral(
    z: Union[FloatArray, Sequence[CircleFunction]],
    path: ReflectionPath,
    epsilon: float,
    mode_cutoff: Optional[int] = None,
    endpoint: str = "left",
) -> StieltjesIntegral:
    """``sum_k <e^{eps Delta} z_k, Delta eta_k>`` with ``z`` sampled at the path times.

    With checks enabled and ``epsilon > 0`` the Riemann sum must agree with the
    mode-split form up to the heat-damped tail.
    """
    grid = path.grid
    rows = _as_rows(z, grid)
    if rows.shape[0] != path.times.size:
        raise ValueError(
            f"integrand has {rows.shape[0]} times but the path has {path.times.size}"
        )
    if endpoint == "left":
        rows = rows[:-1]
    elif endpoint == "right":
        rows = rows[1:]
    else:
        raise ValueError(f"endpoint must be 'left' or 'right', got {endpoint!r}")
    cutoff = path.pair_cutoff if mode_cutoff is None else mode_cutoff
    if not 0 <= cutoff <= path.pair_cutoff:
        raise ValueError(
            f"mode cutoff must lie in [0, {path.pair_cutoff}], got {cutoff}"
        )

    smoothed = _smooth(grid, rows, epsilon)
    n = grid.n
    per_step = np.array(
        [math.fsum((a * b).tolist()) / n for a, b in zip(smoothed, path.increments)]
    )
    riemann = math.fsum(per_step.tolist())

    full_cos, full_sin = _full_bases(grid, cutoff)
    cos_part = smoothed @ full_cos.T / n
    sin_part = smoothed @ full_sin.T / n
    d_cos = np.diff(path.plus[:, : cutoff + 1] - path.minus[:, : cutoff + 1], axis=0)
    d_sin = path.increments @ full_sin.T / n
    mode_split = math.fsum((cos_part * d_cos).ravel().tolist()) + math.fsum(
        (sin_part * d_sin).ravel().tolist()
    )

    norms_z = np.sqrt(np.sum(smoothed**2, axis=1) / n)
    norms_eta = np.sqrt(np.sum(path.increments**2, axis=1) / n)
    scale = float(np.dot(norms_z, norms_eta))

    result = StieltjesIntegral(riemann, mode_split, scale)
    if _should_do_checks() and epsilon > 0:
        tail = math.exp(-4.0 * math.pi**2 * (cutoff + 1) ** 2 * epsilon)
        if result.discrepancy > (MODE_SPLIT_RTOL + tail) * scale:
            raise NumericalError(
                f"Riemann and mode-split integrals disagree: {riemann} vs "
                f"{mode_split} (scale {scale})"
            )
    return result


def _require_every_step(traj: Trajectory) -> None:
    if traj.record_every != 1:
        raise ValueError(
            "orthogonality and energy diagnostics need every step recorded "
            "(record_every = 1)"
        )


def orthogonality_defect(traj: Trajectory, epsilon: float) -> Tuple[float, float]:
    """Left- and right-endpoint values of ``int e^{eps Delta} X . d eta``.

    At ``epsilon = 0`` the right-endpoint value equals ``sum_k ||Delta eta_k||^2 / 2``.
    """
    _require_every_step(traj)
    grid = traj.grid
    smoothed = _smooth(grid, np.array(traj.states), epsilon)
    eta = traj.reflection_increments
    left = _pair_rows_sum(smoothed[:-1], eta, grid.n)
    right = _pair_rows_sum(smoothed[1:], eta, grid.n)
    return left, right


def _pair_rows_sum(a: FloatArray, b: FloatArray, n: int) -> float:
    return math.fsum((a * b).ravel().tolist()) / n


def half_increment_energy(traj: Trajectory) -> float:
    eta = traj.reflection_increments
    return _pair_rows_sum(eta, eta, traj.grid.n) / 2.0


@dataclasses.dataclass(frozen=True)
class EnergyTerms:
    """Per-path terms of the energy balance at every recorded time.

    ``energy`` is ``||e^{eps Delta} X_t||^2``; ``dissipation``, ``midpoint``, ``left``
    and ``right`` are running sums over the steps before ``t``.
    """

    times: FloatArray
    energy: FloatArray
    dissipation: FloatArray
    midpoint: FloatArray
    left: FloatArray
    right: FloatArray


def energy_terms(traj: Trajectory, epsilon: float = 0.0) -> EnergyTerms:
    """Per-path energy terms; the orthogonality term pairs eta with the step midpoint.

    Every step satisfies
    ``||X'_{k+1}||^2 = ||e^{h Delta} X'_k + xi'||^2 + 2 <e^{2 eps Delta} M_k, d eta_k>``
    where primes denote ``e^{eps Delta}`` and ``M_k = (Z_{k+1} + X_{k+1}) / 2``.
    """
    _require_every_step(traj)
    if traj.pre_states is None:
        raise ValueError("energy terms need pre-states (keep_pre_states=True)")
    grid = traj.grid
    n = grid.n
    h = traj.config.h
    states = np.array(traj.states)
    pre = np.array(traj.pre_states)

    if _should_do_checks():
        for k, (x_next, z) in enumerate(zip(states[1:], pre)):
            if math.fsum((x_next * x_next).tolist()) != math.fsum((z * z).tolist()):
                raise NumericalError(f"||X_{k + 1}|| != ||Z_{k + 1}|| at step {k}")

    smoothed = _smooth(grid, states, epsilon)
    energy = np.sum(smoothed**2, axis=1) / n
    dissipation = _with_origin(dirichlet_energy_values(grid, smoothed[:-1], h))

    midpoints = _smooth(grid, 0.5 * (states[1:] + pre), 2.0 * epsilon)
    eta = traj.reflection_increments
    mid = _with_origin(np.sum(midpoints * eta, axis=1) / n)
    left = _with_origin(np.sum(smoothed[:-1] * eta, axis=1) / n)
    right = _with_origin(np.sum(smoothed[1:] * eta, axis=1) / n)
    return EnergyTerms(traj.times, energy, dissipation, mid, left, right)


def smoothed_noise_rates(
    spec: NoiseSpec, h: float, epsilon: float
) -> Tuple[float, float]:
    """Noise input per unit time and expected self-dissipation per step."""
    m = np.arange(spec.cutoff + 1, dtype=np.float64)
    damp = np.exp(-8.0 * np.pi**2 * m**2 * epsilon)
    lam2 = spec.colouring**2
    rate = math.fsum((damp * lam2).tolist())
    self_dissipation = (
        math.fsum((damp * (lam2 * h - conv_variances(spec, h))).tolist()) / 2.0
    )
    return rate, self_dissipation


@dataclasses.dataclass(frozen=True)
class EnergyBalance:
    """Energy residual R(t) over an ensemble, with Monte Carlo standard errors."""

    times: FloatArray
    residual: FloatArray
    residual_se: FloatArray
    mean_energy: FloatArray
    mean_dissipation: FloatArray
    noise_input: FloatArray
    mean_midpoint: FloatArray
    mean_left: FloatArray
    mean_right: FloatArray
    paths: int


def energy_balance_report(
    trajectories: Sequence[Trajectory], epsilon: float = 0.0
) -> EnergyBalance:
    """``R(t) = E||X'_t||^2 + 2 E[dissip] - E||X'_0||^2 - noise input - 2 E[orth]``.

    Zero in expectation for the discrete dynamics.
    """
    if not trajectories:
        raise ValueError("energy balance needs at least one trajectory")
    cfg = trajectories[0].config
    for traj in trajectories[1:]:
        if traj.config != cfg:
            raise ValueError("all trajectories must share one scheme configuration")
    terms = [energy_terms(traj, epsilon) for traj in trajectories]
    return energy_balance_from_terms(cfg.noise, cfg.h, terms, epsilon)


def energy_balance_from_terms(
    spec: NoiseSpec, h: float, terms: Sequence[EnergyTerms], epsilon: float = 0.0
) -> EnergyBalance:
    if not terms:
        raise ValueError("energy balance needs at least one path")
    times = terms[0].times
    for t in terms[1:]:
        if not np.array_equal(t.times, times):
            raise ValueError("all energy terms must share the same recorded times")
    rate, self_dissipation = smoothed_noise_rates(spec, h, epsilon)
    steps = np.arange(times.size, dtype=np.float64)
    noise_input = rate * times

    residuals = np.stack(
        [
            t.energy
            + 2.0 * (t.dissipation + steps * self_dissipation)
            - t.energy[0]
            - noise_input
            - 2.0 * t.midpoint
            for t in terms
        ]
    )
    stats = [mean_and_se(residuals[:, r]) for r in range(times.size)]

    def mean_of(name: str) -> FloatArray:
        return np.mean(np.stack([getattr(t, name) for t in terms]), axis=0)

    report = EnergyBalance(
        times=times,
        residual=np.array([s[0] for s in stats]),
        residual_se=np.array([s[1] for s in stats]),
        mean_energy=mean_of("energy"),
        mean_dissipation=mean_of("dissipation") + steps * self_dissipation,
        noise_input=noise_input,
        mean_midpoint=mean_of("midpoint"),
        mean_left=mean_of("left"),
        mean_right=mean_of("right"),
        paths=len(terms),
    )
    logger.info(
        "energy balance over %d paths: R(T) = %.3e +- %.3e",
        report.paths,
        report.residual[-1],
        report.residual_se[-1],
    )
    return report


def eta_sobolev_ratio(path: ReflectionPath, traj: Trajectory) -> FloatArray:
    """``||eta_t||_{2,-2} / sup_{r <= t} ||Y_r||_2`` for every recorded ``t > 0``."""
    grid = path.grid
    y = traj.states - traj.companions
    y_norms = np.maximum.accumulate(np.sqrt(np.sum(y**2, axis=1) / grid.n))
    out = np.zeros(path.times.size - 1)
    for r in range(1, path.times.size):
        c = to_modes(path.cumulative(r), grid.max_cutoff)
        amp = FourierCoeffs.symmetric(np.hypot(c.cos, c.sin))
        if y_norms[r] > 0:
            out[r - 1] = sobolev_norm(amp, -2.0) / y_norms[r]
    return out
