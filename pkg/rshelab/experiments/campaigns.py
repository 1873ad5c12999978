import dataclasses
import logging
import math
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.stats

from rshelab.circle.grid import (
    CircleFunction,
    GridSpec,
    basis_function,
    lp_norm,
)
from rshelab.circle.heat import heat_apply, heat_kernel, spectral_energies
from rshelab.circle.rearrange import (
    max_sorted_gap,
    mirror_defect,
    random_monotone,
    split_mode,
)
from rshelab.config.run_config import RunConfig
from rshelab.dynamics.noise import ConvIncrement, aggregate_sequence, trace_constant
from rshelab.dynamics.reflection import (
    EnergyTerms,
    energy_balance_from_terms,
    energy_terms,
    eta_from_trajectory,
    eta_pairing,
    eta_pairing_from_companion,
    eta_sobolev_ratio,
    half_increment_energy,
    monotone_pairing_floor,
    stieltjes_integral,
)
from rshelab.dynamics.scheme import (
    SchemeConfig,
    coupled_distances,
    coupled_simulate,
    interpolate,
    sample_increments,
    simulate,
)
from rshelab.dynamics.streams import NoiseStream
from rshelab.errors import ConfigError
from rshelab.experiments.ensemble import run_ensemble
from rshelab.experiments.report import (
    Estimate,
    ExperimentReport,
    Verdict,
    at_least,
    at_most,
    summarize,
)
from rshelab.measure.bridge import (
    QuantileFn,
    empirical_to_ustar,
    quantile_to_ustar,
    sample_measure,
    ustar_to_quantile,
    w2,
    w2_oracle,
)
from rshelab.types import FloatArray
from rshelab.utils import mean_and_se

logger = logging.getLogger(__name__)

STEP_SLACK = 1e-12
KERNEL_PROBE_TIMES = (0.01, 0.05, 0.1)
MONOTONE_PROBE_MODES = 8
CROSS_CHECK_MODES = 4
STIELTJES_EPSILON = 0.01
DERIVATIVE_SLOPE_MIN = -1.4
DERIVATIVE_SLOPE_MAX = -0.6
SMOOTHING_SLOPE_BAND = (-1.2, -0.55)


def initial_condition(kind: str, grid: GridSpec) -> CircleFunction:
    """Exactly symmetric non-increasing starting states.

    ``e1`` is the first cosine mode, ``two_level`` the indicator of ``|x| < 1/4`` and
    ``kernel`` the heat kernel at time 0.01.
    """
    if kind == "zero":
        return CircleFunction.zeros(grid)
    if kind == "e1":
        return basis_function(1, grid)
    if kind == "two_level":
        return CircleFunction(grid, np.where(np.abs(grid.points) < 0.25, 1.0, 0.0))
    if kind == "kernel":
        return heat_kernel(0.01, grid)
    raise ValueError(f"unknown initial condition {kind!r}")


def _every_step(cfg: SchemeConfig) -> SchemeConfig:
    return dataclasses.replace(cfg, record_every=1)


def _estimates(
    report: ExperimentReport, name: str, samples: FloatArray, times: Sequence[float]
) -> Tuple[FloatArray, FloatArray]:
    means = np.empty(len(times))
    ses = np.empty(len(times))
    for j, t in enumerate(times):
        est = Estimate.from_samples(name, samples[:, j], at=float(t))
        report.add_estimate(est)
        means[j], ses[j] = est.value, est.se
    return means, ses


def _nearest_records(times: FloatArray, targets: Sequence[float]) -> List[int]:
    return [int(np.argmin(np.abs(times - t))) for t in targets]


def simulate_experiment(run: RunConfig) -> ExperimentReport:
    """Dump one trajectory from ``experiment.initial``."""
    cfg = run.scheme_config()
    grid = cfg.grid
    x0 = initial_condition(run.initial, grid)
    columns = ["t", "l2_norm", "mean", "sorted_gap"]
    columns += [f"x[{j}]" for j in grid.indices]
    report = ExperimentReport("simulate", run.snapshot(), columns)
    with report.timed():
        traj = simulate(cfg, x0, run.noise_stream())
        for r, t in enumerate(traj.times):
            x = traj.state(r)
            report.add_row(
                float(t),
                lp_norm(x, 2),
                math.fsum(x.values.tolist()) / grid.n,
                max_sorted_gap(x),
                *x.values.tolist(),
            )
        mean_drift = np.abs(
            np.mean(traj.states, axis=1) - np.mean(traj.companions, axis=1)
        )
        scale = 1.0 + float(np.max(np.abs(traj.states)))
        report.add_verdict(
            at_most("mean_conservation", float(np.max(mean_drift)), 1e-12 * scale)
        )
        if run.amplitude == 0:
            errors = [
                lp_norm(traj.state(r) - heat_apply(float(t), x0), math.inf)
                for r, t in enumerate(traj.times)
            ]
            report.add_verdict(at_most("zero_noise_heat_flow", max(errors), 1e-10))
        report.notes["final_mirror_defect"] = mirror_defect(traj.final)
    return report


def _contraction_task(
    cfg: SchemeConfig, stream: NoiseStream
) -> Tuple[float, float, int, float]:
    grid = cfg.grid
    x0a = random_monotone(grid, stream.for_initial(0))
    x0b = random_monotone(grid, stream.for_initial(1))
    a, b = coupled_simulate(cfg, x0a, x0b, stream)
    d = coupled_distances(a, b)
    growth = np.diff(d)
    violations = int(np.count_nonzero(growth > STEP_SLACK))
    return float(d[0]), float(d[-1]), violations, float(np.max(growth, initial=0.0))


def contraction_experiment(
    run: RunConfig, pairs: Optional[int] = None
) -> ExperimentReport:
    """Coupled runs from random monotone pairs; ``d_{k+1} <= d_k + 1e-12`` per step."""
    pairs = run.pairs if pairs is None else pairs
    if pairs < 1:
        raise ValueError(f"need at least one pair, got {pairs}")
    cfg = _every_step(run.scheme_config())
    master = run.noise_stream()
    columns = ["case", "d0", "dN", "ratio", "violations", "max_step_growth"]
    report = ExperimentReport("contraction", run.snapshot(), columns)
    with report.timed():
        results = run_ensemble(
            lambda i: _contraction_task(cfg, master.child(i)), pairs, run.threads
        )
        ratios = []
        for i, (d0, dn, violations, growth) in enumerate(results):
            ratio = dn / d0 if d0 > 0 else 0.0
            ratios.append(ratio)
            report.add_row(i, d0, dn, ratio, violations, growth)
        total = sum(r[2] for r in results)
        report.add_verdict(at_most("step_violations", total, 0))
        report.add_verdict(at_most("max_ratio", max(ratios), 1.0 + 1e-9))
        report.notes["ratio"] = summarize(ratios)
    logger.info("contraction: %d pairs, %d step violations", pairs, total)
    return report


def _dirichlet_norms(grid: GridSpec, states: FloatArray) -> FloatArray:
    # Nyquist mode excluded
    k = np.arange(grid.half + 1, dtype=np.float64)
    weights = (2.0 * np.pi * k) ** 2
    weights[-1] = 0.0
    out: FloatArray = spectral_energies(grid, states) @ weights
    return out


def _derivative_task(
    cfg: SchemeConfig, x0: CircleFunction, stream: NoiseStream, records: List[int]
) -> Tuple[FloatArray, FloatArray]:
    rough, zero = coupled_simulate(cfg, x0, CircleFunction.zeros(cfg.grid), stream)
    grid = cfg.grid
    return (
        _dirichlet_norms(grid, rough.states[records]),
        _dirichlet_norms(grid, zero.states[records]),
    )


def derivative_bound_experiment(
    run: RunConfig, paths: Optional[int] = None
) -> ExperimentReport:
    """``E ||D X_t||^2`` from a rough (two-level) start and from zero, on shared noise.

    The initial-condition influence (rough minus zero) is fitted against ``t`` on a
    log-log scale; the bound has the shape ``1 / t``.
    """
    paths = run.paths if paths is None else paths
    cfg = run.scheme_config()
    grid = cfg.grid
    times = cfg.recorded_steps() * cfg.h
    targets = [t for t in run.t_grid if t <= cfg.T]
    if not targets:
        raise ConfigError(
            f"experiment.t_grid has no point within scheme.T={cfg.T}: {run.t_grid}"
        )
    records = _nearest_records(times, targets)
    at = [float(times[r]) for r in records]
    x0 = initial_condition("two_level", grid)
    master = run.noise_stream()

    columns = ["t", "rough", "rough_se", "zero", "zero_se", "influence", "influence_se"]
    report = ExperimentReport("derivative", run.snapshot(), columns)
    with report.timed():
        results = run_ensemble(
            lambda i: _derivative_task(cfg, x0, master.child(i), records),
            paths,
            run.threads,
        )
        rough = np.stack([r[0] for r in results])
        zero = np.stack([r[1] for r in results])
        rough_m, rough_se = _estimates(report, "rough", rough, at)
        zero_m, zero_se = _estimates(report, "zero", zero, at)
        infl_m, infl_se = _estimates(report, "influence", rough - zero, at)
        for j, t in enumerate(at):
            report.add_row(
                t, rough_m[j], rough_se[j], zero_m[j], zero_se[j], infl_m[j], infl_se[j]
            )

        report.add_verdict(
            Verdict(
                "rough_decreases",
                float(rough_m[-1] - rough_m[0]),
                high=float(math.hypot(rough_se[0], rough_se[-1])) * 3.0,
                hard=False,
            )
        )
        add_influence_slope(report, at, infl_m)
    return report


def add_influence_slope(
    report: ExperimentReport, at: Sequence[float], influence: FloatArray
) -> None:
    """Soft check that the log-log slope of the influence lies in the slope band."""
    positive = influence > 0
    if np.count_nonzero(positive) < 2:
        report.notes["influence_slope"] = "not enough positive points"
        return
    fit = scipy.stats.linregress(
        np.log(np.asarray(at)[positive]), np.log(influence[positive])
    )
    report.notes["influence_slope"] = float(fit.slope)
    report.notes["influence_slope_stderr"] = float(fit.stderr)
    report.add_verdict(
        Verdict(
            "influence_slope",
            float(fit.slope),
            DERIVATIVE_SLOPE_MIN,
            DERIVATIVE_SLOPE_MAX,
            hard=False,
        )
    )


def _smoothing_task(
    cfg: SchemeConfig,
    x: CircleFunction,
    ys: Sequence[CircleFunction],
    stream: NoiseStream,
    t_grid: Sequence[float],
    alpha: float,
) -> FloatArray:
    e1 = basis_function(1, cfg.grid)
    increments = sample_increments(cfg, stream)
    base = simulate(cfg, x, stream, increments, keep_pre_states=False)

    def functional(f: CircleFunction) -> float:
        return math.tanh(alpha * f.inner(e1))

    base_values = [functional(interpolate(base, t)) for t in t_grid]
    out = np.empty((len(ys), len(t_grid)))
    for p, y in enumerate(ys):
        probe = simulate(cfg, y, stream, increments, keep_pre_states=False)
        for j, t in enumerate(t_grid):
            out[p, j] = base_values[j] - functional(interpolate(probe, t))
    return out


def smoothing_experiment(
    run: RunConfig,
    t_grid: Optional[Sequence[float]] = None,
    probes: Optional[int] = None,
) -> ExperimentReport:
    """Lipschitz quotient of ``x -> E f(X_t^x)`` along low-mode probe directions.

    Probes are ``y = x + delta v`` with ``v = cos(theta) e_0 + sin(theta) e_1`` and
    ``theta`` uniform in ``[0, pi/2]``, so ``y`` stays symmetric non-increasing. The
    log-log slope of the largest quotient is compared with ``-(1 + lambda) / 2``.
    """
    run.noise_spec().require_smoothing_range()
    t_grid = tuple(run.t_grid if t_grid is None else t_grid)
    probes = run.probes if probes is None else probes
    if probes < 1:
        raise ValueError(f"need at least one probe, got {probes}")

    base_cfg = run.scheme_config()
    h = base_cfg.h
    steps = max(1, math.ceil(max(t_grid) / h - 1e-9))
    cfg = dataclasses.replace(base_cfg, T=steps * h)
    grid = cfg.grid
    x = initial_condition(run.initial, grid)
    e1 = basis_function(1, grid)

    master = run.noise_stream()
    thetas = [
        float(master.for_probe(p).uniform(0.0, 0.5 * math.pi)) for p in range(probes)
    ]
    ys = [
        CircleFunction(
            grid, x.values + run.delta * (math.cos(th) + math.sin(th) * e1.values)
        )
        for th in thetas
    ]
    distances = [lp_norm(y - x, 2) for y in ys]

    columns = ["t", "probe", "theta", "lipschitz", "lipschitz_se"]
    report = ExperimentReport("smoothing", run.snapshot(), columns)
    target = -(1.0 + run.lam) / 2.0
    report.notes["target_slope"] = target
    with report.timed():
        results = run_ensemble(
            lambda i: _smoothing_task(cfg, x, ys, master.child(i), t_grid, run.alpha),
            run.paths,
            run.threads,
        )
        diffs = np.stack(results)
        best = np.zeros(len(t_grid))
        best_se = np.zeros(len(t_grid))
        for p in range(probes):
            for j, t in enumerate(t_grid):
                mean, se = mean_and_se(diffs[:, p, j])
                d = distances[p]
                quotient = abs(mean) / d if d > 0 else 0.0
                quotient_se = se / d if d > 0 else 0.0
                report.add_row(t, p, thetas[p], quotient, quotient_se)
                if quotient >= best[j]:
                    best[j], best_se[j] = quotient, quotient_se
        for j, t in enumerate(t_grid):
            report.add_estimate(
                Estimate(
                    "max_lipschitz", float(best[j]), float(best_se[j]), run.paths, t
                )
            )

        report.add_verdict(
            at_most("lipschitz_ceiling", float(np.max(best)), run.alpha * (1 + 1e-9))
        )
        positive = best > 0
        if np.count_nonzero(positive) >= 3:
            logt = np.log(np.asarray(t_grid)[positive])
            fit = scipy.stats.linregress(logt, np.log(best[positive]))
            dof = int(np.count_nonzero(positive)) - 2
            half_width = float(scipy.stats.t.ppf(0.975, dof) * fit.stderr)
            report.notes["slope"] = float(fit.slope)
            report.notes["slope_ci"] = [fit.slope - half_width, fit.slope + half_width]
            low, high = SMOOTHING_SLOPE_BAND
            report.add_verdict(
                Verdict("slope", float(fit.slope), low, high, hard=False)
            )
        else:
            report.notes["slope"] = "not enough positive points"
    logger.info("smoothing: slope %s (target %.3f)", report.notes["slope"], target)
    return report


def _level_configs(run: RunConfig, levels: int) -> List[SchemeConfig]:
    # coarsest first
    base = _every_step(run.scheme_config())
    return [base.with_step(run.h * 2**level) for level in range(levels - 1, -1, -1)]


def _level_increments(
    configs: Sequence[SchemeConfig], stream: NoiseStream
) -> List[List[ConvIncrement]]:
    finest = configs[-1]
    out = [sample_increments(finest, stream)]
    h = finest.h
    for _ in configs[:-1]:
        out.append(aggregate_sequence(out[-1], h))
        h *= 2.0
    return out[::-1]


def _orthogonality_task(
    configs: Sequence[SchemeConfig],
    x0: CircleFunction,
    stream: NoiseStream,
    eps_grid: Sequence[float],
) -> FloatArray:
    out = np.zeros((len(configs), len(eps_grid), 3))
    for level, (cfg, increments) in enumerate(
        zip(configs, _level_increments(configs, stream))
    ):
        traj = simulate(cfg, x0, stream, increments)
        path = eta_from_trajectory(traj)
        for e, eps in enumerate(eps_grid):
            left = stieltjes_integral(traj.states, path, eps, endpoint="left")
            right = stieltjes_integral(traj.states, path, eps, endpoint="right")
            negative = min(
                left.riemann + 1e-10 * left.scale, right.riemann + 1e-10 * right.scale
            )
            out[level, e] = (left.riemann, right.riemann, float(negative < 0))
    return out


def orthogonality_experiment(
    run: RunConfig,
    eps_grid: Optional[Sequence[float]] = None,
    paths: Optional[int] = None,
) -> ExperimentReport:
    """``E int e^{eps Delta} X . d eta`` over step sizes ``h 2^l`` and smoothing times.

    All levels share one noise path through aggregation. Integrals against the
    monotone states must be nonnegative; the right-endpoint value at the smallest
    epsilon should fall as ``h`` halves.
    """
    eps_grid = tuple(run.eps_grid if eps_grid is None else eps_grid)
    paths = run.paths if paths is None else paths
    configs = _level_configs(run, run.levels)
    x0 = initial_condition(run.initial, configs[0].grid)
    master = run.noise_stream()

    columns = ["h", "epsilon", "left", "left_se", "right", "right_se", "negative"]
    report = ExperimentReport("orthogonality", run.snapshot(), columns)
    with report.timed():
        results = np.stack(
            run_ensemble(
                lambda i: _orthogonality_task(configs, x0, master.child(i), eps_grid),
                paths,
                run.threads,
            )
        )
        right_at_floor = []
        for level, cfg in enumerate(configs):
            for e, eps in enumerate(eps_grid):
                left, left_se = mean_and_se(results[:, level, e, 0])
                right, right_se = mean_and_se(results[:, level, e, 1])
                negative = int(np.sum(results[:, level, e, 2]))
                report.add_row(cfg.h, eps, left, left_se, right, right_se, negative)
                report.add_estimate(
                    Estimate(f"right[h={cfg.h:g},eps={eps:g}]", right, right_se, paths)
                )
            e0 = int(np.argmin(eps_grid))
            right_at_floor.append(mean_and_se(results[:, level, e0, 1]))

        report.add_verdict(
            at_most("negative_integrals", int(np.sum(results[..., 2])), 0)
        )
        for (coarse, coarse_se), (fine, fine_se), cfg in zip(
            right_at_floor, right_at_floor[1:], configs[1:]
        ):
            report.add_verdict(
                at_least(
                    f"right_decreases[h={cfg.h:g}]",
                    coarse - fine,
                    math.hypot(coarse_se, fine_se),
                    hard=False,
                )
            )
        report.notes["plateau"] = right_at_floor[-1][0]
    return report


def _convergence_task(
    configs: Sequence[SchemeConfig], x0: CircleFunction, stream: NoiseStream
) -> FloatArray:
    finals = [
        simulate(cfg, x0, stream, increments, keep_pre_states=False).final
        for cfg, increments in zip(configs, _level_increments(configs, stream))
    ]
    return np.array([lp_norm(a - b, 2) for a, b in zip(finals, finals[1:])])


def convergence_experiment(
    run: RunConfig, levels: Optional[int] = None, paths: Optional[int] = None
) -> ExperimentReport:
    """``E ||X^h_T - X^{h/2}_T||_2`` between consecutive dyadic step sizes."""
    levels = run.levels if levels is None else levels
    if levels < 2:
        raise ConfigError(f"convergence needs at least 2 levels, got {levels}")
    paths = run.paths if paths is None else paths
    configs = _level_configs(run, levels)
    x0 = initial_condition(run.initial, configs[0].grid)
    master = run.noise_stream()

    columns = ["h_coarse", "h_fine", "difference", "difference_se"]
    report = ExperimentReport("convergence", run.snapshot(), columns)
    with report.timed():
        diffs = np.stack(
            run_ensemble(
                lambda i: _convergence_task(configs, x0, master.child(i)),
                paths,
                run.threads,
            )
        )
        means = []
        for j, (coarse, fine) in enumerate(zip(configs, configs[1:])):
            mean, se = mean_and_se(diffs[:, j])
            means.append(mean)
            report.add_row(coarse.h, fine.h, mean, se)
            report.add_estimate(
                Estimate(f"difference[h={coarse.h:g}]", mean, se, paths)
            )
        if run.amplitude == 0:
            report.add_verdict(at_most("zero_noise_exact", max(means), 1e-10))
        else:
            for j in range(len(means) - 1):
                report.add_verdict(
                    at_most(
                        f"decreasing[{j}]", means[j + 1] - means[j], 0.0, hard=False
                    )
                )
            positive = [j for j, m in enumerate(means) if m > 0]
            if len(positive) >= 2:
                hs = np.array([configs[j].h for j in positive])
                fit = scipy.stats.linregress(
                    np.log(hs), np.log(np.array(means)[positive])
                )
                report.notes["order"] = float(fit.slope)
                report.notes["order_stderr"] = float(fit.stderr)
    return report


def _energy_task(
    cfg: SchemeConfig,
    x0: CircleFunction,
    stream: NoiseStream,
    eps_grid: Sequence[float],
) -> List[EnergyTerms]:
    traj = simulate(cfg, x0, stream)
    return [energy_terms(traj, eps) for eps in eps_grid]


def energy_experiment(
    run: RunConfig,
    eps_grid: Optional[Sequence[float]] = None,
    paths: Optional[int] = None,
) -> ExperimentReport:
    """Energy residual ``R(t)`` with standard errors for every smoothing time."""
    eps_grid = tuple(run.eps_grid if eps_grid is None else eps_grid)
    paths = run.paths if paths is None else paths
    cfg = _every_step(run.scheme_config())
    x0 = initial_condition(run.initial, cfg.grid)
    master = run.noise_stream()
    slack = 5.0 * cfg.h * trace_constant(cfg.noise) * cfg.T

    columns = [
        "t",
        "epsilon",
        "residual",
        "residual_se",
        "energy",
        "dissipation",
        "noise_input",
        "midpoint",
        "left",
        "right",
    ]
    report = ExperimentReport("energy", run.snapshot(), columns)
    with report.timed():
        per_path = run_ensemble(
            lambda i: _energy_task(cfg, x0, master.child(i), eps_grid),
            paths,
            run.threads,
        )
        for e, eps in enumerate(eps_grid):
            balance = energy_balance_from_terms(
                cfg.noise, cfg.h, [terms[e] for terms in per_path], eps
            )
            for r, t in enumerate(balance.times):
                report.add_row(
                    float(t),
                    eps,
                    balance.residual[r],
                    balance.residual_se[r],
                    balance.mean_energy[r],
                    balance.mean_dissipation[r],
                    balance.noise_input[r],
                    balance.mean_midpoint[r],
                    balance.mean_left[r],
                    balance.mean_right[r],
                )
            final, final_se = balance.residual[-1], balance.residual_se[-1]
            report.add_estimate(
                Estimate(f"residual[eps={eps:g}]", final, final_se, paths, cfg.T)
            )
            report.add_verdict(
                at_most(
                    f"residual[eps={eps:g}]",
                    abs(float(final)),
                    3.0 * float(final_se) + slack,
                )
            )
    return report


def _reflection_task(
    cfg: SchemeConfig, x0: CircleFunction, stream: NoiseStream
) -> Dict[str, float]:
    grid = cfg.grid
    traj = simulate(cfg, x0, stream)
    path = eta_from_trajectory(traj)
    eta_mass = float(np.sum(np.sqrt(np.sum(path.increments**2, axis=1) / grid.n)))

    probes = [heat_kernel(t, grid) for t in KERNEL_PROBE_TIMES]
    for m in range(min(MONOTONE_PROBE_MODES, grid.max_cutoff) + 1):
        probes.extend(split_mode(m, grid))
    floor = min(
        float(np.min(monotone_pairing_floor(path, u), initial=0.0)) for u in probes
    )

    mean_pairing = eta_pairing(path, CircleFunction.constant(grid, 1.0))
    right = stieltjes_integral(traj.states, path, 0.0, endpoint="right")
    identity_err = abs(right.riemann - half_increment_energy(traj))

    cross = [
        eta_pairing_from_companion(traj, path, m)
        for m in range(1, min(CROSS_CHECK_MODES, grid.max_cutoff) + 1)
    ]
    split_err = 0.0
    if path.pair_cutoff >= 2:
        direct = eta_pairing(path, basis_function(2, grid))
        split_err = float(np.max(np.abs(direct - path.mode_pairing(2))))

    smoothed = stieltjes_integral(traj.states, path, STIELTJES_EPSILON)
    ratios = eta_sobolev_ratio(path, traj)
    return {
        "floor": floor,
        "mean_pairing": float(np.max(np.abs(mean_pairing))),
        "identity_err": identity_err,
        "identity_scale": 1.0 + right.scale,
        "cross_excess": max(c.max_abs_error - c.tolerance for c in cross),
        "split_err": split_err,
        "eta_mass": eta_mass,
        "stieltjes": smoothed.riemann,
        "stieltjes_excess": -(smoothed.riemann + 1e-10 * smoothed.scale),
        "sobolev_ratio": float(np.max(ratios, initial=0.0)),
    }


def reflection_experiment(
    run: RunConfig, paths: Optional[int] = None
) -> ExperimentReport:
    """Monotone pairings, mean neutrality and the algebraic identities of eta."""
    paths = run.paths if paths is None else paths
    cfg = _every_step(run.scheme_config())
    x0 = initial_condition(run.initial, cfg.grid)
    master = run.noise_stream()
    keys = [
        "floor",
        "mean_pairing",
        "identity_err",
        "cross_excess",
        "split_err",
        "stieltjes",
        "sobolev_ratio",
    ]
    report = ExperimentReport("reflection", run.snapshot(), ["case"] + keys)
    with report.timed():
        results = run_ensemble(
            lambda i: _reflection_task(cfg, x0, master.child(i)), paths, run.threads
        )
        for i, res in enumerate(results):
            report.add_row(i, *(res[k] for k in keys))

        def worst(key: str) -> float:
            return max(r[key] for r in results)

        report.add_verdict(
            at_least("monotone_pairing_floor", min(r["floor"] for r in results), -1e-12)
        )
        report.add_verdict(
            at_most(
                "mean_neutrality",
                max(r["mean_pairing"] / (1.0 + r["eta_mass"]) for r in results),
                1e-12,
            )
        )
        report.add_verdict(
            at_most(
                "right_endpoint_identity",
                max(r["identity_err"] / r["identity_scale"] for r in results),
                1e-12,
            )
        )
        report.add_verdict(at_most("companion_cross_check", worst("cross_excess"), 0.0))
        report.add_verdict(
            at_most(
                "split_consistency",
                max(r["split_err"] / (1.0 + r["eta_mass"]) for r in results),
                1e-8,
            )
        )
        report.add_verdict(
            at_most("stieltjes_nonnegative", worst("stieltjes_excess"), 0.0)
        )
        report.notes["sobolev_ratio"] = summarize([r["sobolev_ratio"] for r in results])
    return report


def _uniform_ramps(grid: GridSpec) -> Tuple[CircleFunction, CircleFunction]:
    u = np.linspace(0.0, 1.0, grid.half + 1)
    return quantile_to_ustar(QuantileFn.on_grid(grid, u)), quantile_to_ustar(
        QuantileFn.on_grid(grid, 2.0 * u)
    )


BRIDGE_LARGE_GRID = 2**20
NORMAL_GRID = 256
NORMAL_SAMPLES = 100_000


def _normal_quantile_distance(f: CircleFunction) -> float:
    # the normal quantile is infinite at u = 0 and u = 1
    q = ustar_to_quantile(f)
    diff = q.q[1:-1] - scipy.stats.norm.ppf(q.u[1:-1])
    return math.sqrt(2.0 * math.fsum((diff * diff).tolist()) / f.grid.n)


def bridge_experiment(
    run: RunConfig, trials: Optional[int] = None
) -> ExperimentReport:
    """The W2 isometry against the sorted-coupling oracle, and sample ingestion."""
    trials = run.trials if trials is None else trials
    master = run.noise_stream()
    grid = run.grid
    columns = ["case", "n", "trials", "value", "reference", "error"]
    report = ExperimentReport("bridge", run.snapshot(), columns)
    with report.timed():
        gen = master.for_probe(0)
        worst_iso = 0.0
        worst_triangle = -math.inf
        for _ in range(trials):
            f, g, k = (random_monotone(grid, gen) for _ in range(3))
            worst_iso = max(worst_iso, abs(w2(f, g) - w2_oracle(f.values, g.values)))
            worst_triangle = max(worst_triangle, w2(f, k) - w2(f, g) - w2(g, k))
        report.add_row("isometry", grid.n, trials, worst_iso, 0.0, worst_iso)
        report.add_verdict(at_most("isometry", worst_iso, 1e-10))
        report.add_row("triangle", grid.n, trials, worst_triangle, 0.0, worst_triangle)
        report.add_verdict(at_most("triangle", worst_triangle, 1e-12))

        large = GridSpec(BRIDGE_LARGE_GRID)
        a, b = _uniform_ramps(large)
        value = w2(a, b)
        exact = 1.0 / math.sqrt(3.0)
        report.add_row("uniform_ramps", large.n, 1, value, exact, abs(value - exact))
        report.add_verdict(at_most("uniform_ramps", abs(value - exact), 1e-10))

        normal_grid = GridSpec(NORMAL_GRID)
        samples = master.for_probe(1).standard_normal(NORMAL_SAMPLES)
        dist = _normal_quantile_distance(empirical_to_ustar(samples, normal_grid))
        report.add_row(
            "normal_ingestion", normal_grid.n, NORMAL_SAMPLES, dist, 0.0, dist
        )
        report.add_verdict(at_most("normal_ingestion", dist, 0.02))

        f = random_monotone(grid, master.for_probe(2))
        gen = master.for_probe(3)
        for count in (10**2, 10**3, 10**4, 10**5):
            drawn = sample_measure(f, count, gen)
            dist = w2(f, empirical_to_ustar(drawn, grid))
            report.add_row("sample_round_trip", grid.n, count, dist, 0.0, dist)
    return report
