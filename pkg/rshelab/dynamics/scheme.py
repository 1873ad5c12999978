from __future__ import annotations

import dataclasses
import logging
import math
from typing import List, Optional, Sequence, Tuple

import numpy as np

from rshelab.circle.grid import CircleFunction, GridSpec, lp_norm, synthesize_cos
from rshelab.circle.heat import heat_apply_values
from rshelab.circle.rearrange import is_symmetric_nonincreasing, rearrange_values
from rshelab.contexts import _should_do_checks
from rshelab.dynamics.noise import ConvIncrement, NoiseSpec, conv_increment
from rshelab.dynamics.streams import NoiseStream
from rshelab.errors import ConfigError, NumericalError
from rshelab.types import FloatArray, IntArray

logger = logging.getLogger(__name__)

# Relative tolerance for T/h being an integer.
_STEP_COUNT_RTOL = 1e-9
INITIAL_MONOTONE_TOL = 1e-9


@dataclasses.dataclass(frozen=True)
class SchemeConfig:
    grid: GridSpec
    noise: NoiseSpec
    h: float
    T: float
    record_every: int = 1

    def __post_init__(self) -> None:
        if not 0.0 < self.h < 1.0:
            raise ConfigError(f"scheme.h must lie in (0, 1), got {self.h}")
        if not self.T > 0.0:
            raise ConfigError(f"scheme.T must be positive, got {self.T}")
        ratio = self.T / self.h
        if abs(ratio - round(ratio)) > _STEP_COUNT_RTOL * max(1.0, ratio):
            raise ConfigError(
                f"scheme.T / scheme.h must be an integer, got "
                f"T={self.T}, h={self.h} (ratio {ratio})"
            )
        if self.record_every < 1:
            raise ConfigError(
                f"scheme.record_every must be at least 1, got {self.record_every}"
            )
        self.grid.check_cutoff(self.noise.cutoff)

    @property
    def n_steps(self) -> int:
        return int(round(self.T / self.h))

    def recorded_steps(self) -> IntArray:
        # the last step is always kept
        steps = np.arange(0, self.n_steps + 1, self.record_every, dtype=np.int64)
        if steps[-1] != self.n_steps:
            steps = np.append(steps, self.n_steps)
        return steps

    def with_step(self, h: float) -> SchemeConfig:
        return dataclasses.replace(self, h=h)


@dataclasses.dataclass(frozen=True, eq=False)
class Trajectory:
    """Recorded states of one scheme run.

    ``states[r]`` and ``companions[r]`` are X and V at step ``steps[r]``.
    ``reflection_increments[r]`` is the sum of the corrections X_{k+1} - Z_{k+1} over
    the steps between record ``r`` and record ``r + 1``; with ``record_every = 1`` it
    is the single-step correction. ``pre_states[r]`` is the pre-state Z whose
    rearrangement produced ``states[r + 1]``.
    """

    config: SchemeConfig
    steps: IntArray
    states: FloatArray
    companions: FloatArray
    reflection_increments: FloatArray
    pre_states: Optional[FloatArray] = None

    def __post_init__(self) -> None:
        r = self.steps.size
        n = self.config.grid.n
        if self.states.shape != (r, n) or self.companions.shape != (r, n):
            raise ValueError(
                f"expected states and companions of shape {(r, n)}, got "
                f"{self.states.shape} and {self.companions.shape}"
            )
        if self.reflection_increments.shape != (r - 1, n):
            raise ValueError(
                f"expected reflection increments of shape {(r - 1, n)}, got "
                f"{self.reflection_increments.shape}"
            )
        if self.pre_states is not None and self.pre_states.shape != (r - 1, n):
            raise ValueError(
                f"expected pre-states of shape {(r - 1, n)}, got "
                f"{self.pre_states.shape}"
            )
        for arr in (
            self.states,
            self.companions,
            self.reflection_increments,
            self.pre_states,
        ):
            if arr is not None:
                arr.flags.writeable = False

    @property
    def grid(self) -> GridSpec:
        return self.config.grid

    @property
    def times(self) -> FloatArray:
        out: FloatArray = self.steps * self.config.h
        return out

    @property
    def record_every(self) -> int:
        return self.config.record_every

    def __len__(self) -> int:
        return int(self.steps.size)

    def state(self, r: int) -> CircleFunction:
        return CircleFunction(self.grid, self.states[r])

    def companion(self, r: int) -> CircleFunction:
        return CircleFunction(self.grid, self.companions[r])

    def pre_state(self, r: int) -> CircleFunction:
        if self.pre_states is None:
            raise ValueError("trajectory was recorded without pre-states")
        return CircleFunction(self.grid, self.pre_states[r])

    @property
    def final(self) -> CircleFunction:
        return self.state(len(self) - 1)


def _check_finite(values: FloatArray, what: str, step_index: int) -> None:
    if not np.all(np.isfinite(values)):
        raise NumericalError(f"non-finite {what} at step {step_index}")


def _check_increment(cfg: SchemeConfig, xi: ConvIncrement) -> None:
    if xi.cutoff != cfg.noise.cutoff:
        raise ValueError(
            f"noise increment cutoff {xi.cutoff} does not match "
            f"modes.cutoff={cfg.noise.cutoff}"
        )
    if not math.isclose(xi.h, cfg.h, rel_tol=1e-12):
        raise ValueError(f"noise increment step {xi.h} does not match scheme.h={cfg.h}")


def _advance(
    cfg: SchemeConfig, xv: FloatArray, xi: ConvIncrement, step_index: int
) -> Tuple[FloatArray, FloatArray, FloatArray]:
    grid = cfg.grid
    _check_increment(cfg, xi)
    noise = synthesize_cos(grid, xi.gauss)
    evolved = heat_apply_values(grid, xv, cfg.h) + noise
    z = evolved[0]
    v_next = evolved[1]
    x_next = rearrange_values(grid, z)

    if _should_do_checks():
        _check_finite(evolved, "scheme state", step_index)
        if math.fsum((x_next * x_next).tolist()) != math.fsum((z * z).tolist()):
            raise NumericalError(
                f"rearrangement changed the L2 norm at step {step_index}"
            )
    return x_next, v_next, z


def step(
    x: CircleFunction, cfg: SchemeConfig, xi: ConvIncrement
) -> Tuple[CircleFunction, CircleFunction]:
    """One scheme step: ``(x_next, z_pre)`` with ``x_next = rearrange(z_pre)``."""
    if x.grid != cfg.grid:
        raise ValueError(f"grid mismatch: n={x.grid.n} vs grid.n={cfg.grid.n}")
    _check_increment(cfg, xi)
    grid = cfg.grid
    z = heat_apply_values(grid, x.values, cfg.h) + synthesize_cos(grid, xi.gauss)
    if _should_do_checks():
        _check_finite(z, "pre-state", 0)
    x_next = CircleFunction(grid, rearrange_values(grid, z))
    z_pre = CircleFunction(grid, z)
    if _should_do_checks() and lp_norm(x_next, 2) != lp_norm(z_pre, 2):
        raise NumericalError("rearrangement changed the L2 norm")
    return x_next, z_pre


def sample_increments(
    cfg: SchemeConfig, stream: NoiseStream, h: Optional[float] = None
) -> List[ConvIncrement]:
    h = cfg.h if h is None else h
    n_steps = int(round(cfg.T / h))
    return [conv_increment(cfg.noise, h, stream.for_step(k)) for k in range(n_steps)]


def _check_initial(cfg: SchemeConfig, x0: CircleFunction) -> None:
    if x0.grid != cfg.grid:
        raise ValueError(f"grid mismatch: n={x0.grid.n} vs grid.n={cfg.grid.n}")
    if not is_symmetric_nonincreasing(x0, INITIAL_MONOTONE_TOL):
        raise ValueError(
            "initial condition must be symmetric non-increasing "
            f"(||x0 - x0*||_2 > {INITIAL_MONOTONE_TOL})"
        )


def simulate(
    cfg: SchemeConfig,
    x0: CircleFunction,
    stream: NoiseStream,
    increments: Optional[Sequence[ConvIncrement]] = None,
    keep_pre_states: bool = True,
) -> Trajectory:
    """Run the scheme for ``cfg.n_steps`` steps from ``x0``.

    Noise for step ``k`` comes from ``stream.for_step(k)`` unless ``increments`` is
    given, in which case those increments are used in order.
    """
    _check_initial(cfg, x0)
    n_steps = cfg.n_steps
    if increments is not None and len(increments) != n_steps:
        raise ValueError(f"expected {n_steps} noise increments, got {len(increments)}")

    recorded = cfg.recorded_steps()
    n = cfg.grid.n
    states = np.empty((recorded.size, n))
    companions = np.empty((recorded.size, n))
    corrections = np.zeros((recorded.size - 1, n))
    pre_states = np.empty((recorded.size - 1, n)) if keep_pre_states else None

    xv = np.stack([x0.values, x0.values])
    states[0] = x0.values
    companions[0] = x0.values
    r = 0
    for k in range(n_steps):
        if increments is None:
            xi = conv_increment(cfg.noise, cfg.h, stream.for_step(k))
        else:
            xi = increments[k]
        x_next, v_next, z = _advance(cfg, xv, xi, k)
        corrections[r] += x_next - z
        xv = np.stack([x_next, v_next])
        if k + 1 == recorded[r + 1]:
            if pre_states is not None:
                pre_states[r] = z
            r += 1
            states[r] = x_next
            companions[r] = v_next

    logger.debug(
        "simulated trajectory %d: %d steps, h=%g, %d records",
        stream.trajectory,
        n_steps,
        cfg.h,
        recorded.size,
    )
    return Trajectory(cfg, recorded, states, companions, corrections, pre_states)


def interpolate(traj: Trajectory, t: float) -> CircleFunction:
    """Linear interpolation between the two recorded states bracketing ``t``."""
    times = traj.times
    if not times[0] <= t <= times[-1]:
        raise ValueError(
            f"time {t} lies outside the recorded range [{times[0]}, {times[-1]}]"
        )
    r = int(np.searchsorted(times, t, side="right")) - 1
    if times[r] == t:
        return traj.state(r)
    w = (t - times[r]) / (times[r + 1] - times[r])
    values = (1.0 - w) * traj.states[r] + w * traj.states[r + 1]
    return CircleFunction(traj.grid, values)


def coupled_simulate(
    cfg: SchemeConfig,
    x0a: CircleFunction,
    x0b: CircleFunction,
    stream: NoiseStream,
    keep_pre_states: bool = False,
) -> Tuple[Trajectory, Trajectory]:
    """Run the scheme from two initial conditions on identical noise."""
    _check_initial(cfg, x0a)
    _check_initial(cfg, x0b)
    increments = sample_increments(cfg, stream)
    a = simulate(cfg, x0a, stream, increments, keep_pre_states)
    b = simulate(cfg, x0b, stream, increments, keep_pre_states)
    return a, b


def coupled_distances(a: Trajectory, b: Trajectory) -> FloatArray:
    if a.grid != b.grid or not np.array_equal(a.steps, b.steps):
        raise ValueError("trajectories are not recorded on the same grid and times")
    diff = a.states - b.states
    return np.array(
        [math.sqrt(math.fsum((d * d).tolist()) / a.grid.n) for d in diff],
        dtype=np.float64,
    )
