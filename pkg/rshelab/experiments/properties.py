import logging
import math
from typing import Sequence

import numpy as np

from rshelab.circle.grid import (
    CircleFunction,
    GridSpec,
    basis_function,
    difference_quotient,
    lp_norm,
    to_modes,
)
from rshelab.circle.heat import (
    dirichlet_energy_integral,
    heat_apply,
    heat_convolve,
    heat_kernel,
    riesz_functional,
)
from rshelab.circle.rearrange import (
    is_symmetric_nonincreasing,
    random_monotone,
    rearrange,
    rearrange_values,
)
from rshelab.config.run_config import RunConfig
from rshelab.dynamics.noise import (
    NoiseSpec,
    aggregated_variances,
    conv_samples,
    conv_variances,
    noise_moment_ratio,
    trace_constant,
)
from rshelab.experiments.report import (
    VIOLATION_COLUMNS,
    ExperimentReport,
    at_most,
    tally,
)
from rshelab.types import FloatArray

logger = logging.getLogger(__name__)

EXACT_RTOL = 1e-12
LP_EXPONENTS = (1.0, 2.0, 4.0, math.inf)


def _row_norms(values: FloatArray, p: float) -> FloatArray:
    a = np.abs(values)
    if math.isinf(p):
        out: FloatArray = np.max(a, axis=-1)
        return out
    return np.asarray(np.mean(a**p, axis=-1) ** (1.0 / p))


def rearrangement_suite(
    generator: np.random.Generator,
    sizes: Sequence[int] = (4, 16, 64, 256),
    trials: int = 10_000,
) -> ExperimentReport:
    """Cavalieri, L^p preservation, idempotence, Hardy-Littlewood and non-expansion."""
    report = ExperimentReport(
        "rearrangement",
        {"sizes": list(sizes), "trials": trials},
        list(VIOLATION_COLUMNS),
    )
    for n in sizes:
        grid = GridSpec(n)
        f = generator.standard_normal((trials, n))
        g = generator.standard_normal((trials, n))
        fs = rearrange_values(grid, f)
        gs = rearrange_values(grid, g)

        same_multiset = np.all(np.sort(f, axis=1) == np.sort(fs, axis=1), axis=1)
        tally(report, "cavalieri", n, np.where(same_multiset, -1.0, 1.0))

        idempotent = np.all(rearrange_values(grid, fs) == fs, axis=1)
        tally(report, "idempotence", n, np.where(idempotent, -1.0, 1.0))

        for p in LP_EXPONENTS:
            before = _row_norms(f, p)
            after = _row_norms(fs, p)
            tally(
                report,
                f"lp_preservation[p={p:g}]",
                n,
                np.abs(after - before) - EXACT_RTOL * before,
            )

        scale = _row_norms(f, 2) * _row_norms(g, 2)
        lhs = np.mean(f * g, axis=1)
        rhs = np.mean(fs * gs, axis=1)
        tally(report, "hardy_littlewood", n, lhs - rhs - EXACT_RTOL * scale)

        for p in LP_EXPONENTS:
            plain = _row_norms(f - g, p)
            starred = _row_norms(fs - gs, p)
            slack = EXACT_RTOL * (_row_norms(f, p) + _row_norms(g, p))
            tally(report, f"non_expansion[p={p:g}]", n, starred - plain - slack)
    return report


def riesz_polya_szego_suite(
    generator: np.random.Generator,
    sizes: Sequence[int] = (64, 256),
    trials: int = 1000,
) -> ExperimentReport:
    """Riesz and Polya-Szego inequalities with O(1/n) discretisation slack."""
    report = ExperimentReport(
        "riesz_polya_szego",
        {"sizes": list(sizes), "trials": trials},
        list(VIOLATION_COLUMNS),
    )
    for n in sizes:
        grid = GridSpec(n)
        riesz_excess = np.empty(trials)
        polya_excess = {p: np.empty(trials) for p in LP_EXPONENTS}
        for i in range(trials):
            f = CircleFunction(grid, np.abs(generator.standard_normal(n)))
            u = CircleFunction(grid, np.abs(generator.standard_normal(n)))
            g = heat_kernel(float(generator.uniform(0.002, 0.05)), grid)
            lip = lp_norm(difference_quotient(g), math.inf)
            slack = 10.0 * lip / n * lp_norm(f, 2) * lp_norm(u, 2)
            lhs = riesz_functional(f, g, u)
            rhs = riesz_functional(rearrange(f), rearrange(g), rearrange(u))
            riesz_excess[i] = lhs - rhs - slack

            d = difference_quotient(f)
            ds = difference_quotient(rearrange(f))
            for p in LP_EXPONENTS:
                plain = lp_norm(d, p)
                polya_excess[p][i] = lp_norm(ds, p) - plain * (1.0 + 10.0 / n)
        tally(report, "riesz", n, riesz_excess)
        for p in LP_EXPONENTS:
            tally(report, f"polya_szego[p={p:g}]", n, polya_excess[p])
    return report


KEY_INEQUALITY_STEPS = (1e-4, 1e-3, 1e-2, 1e-1)


def key_inequality_suite(
    generator: np.random.Generator, n: int = 64, trials: int = 1000
) -> ExperimentReport:
    report = ExperimentReport(
        "key_inequality", {"n": n, "trials": trials}, list(VIOLATION_COLUMNS)
    )
    grid = GridSpec(n)
    excess = np.empty(trials)
    for i in range(trials):
        u = CircleFunction(grid, generator.standard_normal(n))
        h = KEY_INEQUALITY_STEPS[int(generator.integers(len(KEY_INEQUALITY_STEPS)))]
        before = dirichlet_energy_integral(to_modes(u, grid.max_cutoff), h)
        after = dirichlet_energy_integral(to_modes(rearrange(u), grid.max_cutoff), h)
        excess[i] = after - before - (1e-10 + 10.0 / n * before)
    tally(report, "key_inequality", n, excess)
    return report


HEAT_TIMES = (0.005, 0.01, 0.05, 0.1)


def heat_suite(generator: np.random.Generator, n: int = 128) -> ExperimentReport:
    report = ExperimentReport(
        "heat", {"n": n, "times": list(HEAT_TIMES)}, list(VIOLATION_COLUMNS)
    )
    grid = GridSpec(n)
    e1 = basis_function(1, grid)
    f = CircleFunction(grid, generator.standard_normal(n))
    monotone = random_monotone(grid, generator, symmetric=True)

    spectral_gap = []
    kernel_shape = []
    kernel_mass = []
    preservation = []
    for t in HEAT_TIMES:
        for g in (e1, f):
            diff = heat_apply(t, g) - heat_convolve(t, g)
            spectral_gap.append(lp_norm(diff, math.inf) - 1e-8)
        kernel = heat_kernel(t, grid)
        kernel_shape.append(
            lp_norm(kernel - rearrange(kernel), 2) - 1e-10 * lp_norm(kernel, 2)
        )
        kernel_mass.append(abs(math.fsum(kernel.values.tolist()) / n - 1.0) - 1e-10)
        smoothed = heat_apply(t, monotone)
        if is_symmetric_nonincreasing(smoothed, 1e-8):
            preservation.append(-1.0)
        else:
            preservation.append(lp_norm(smoothed - rearrange(smoothed), 2))

    tally(report, "heat_vs_kernel", n, np.array(spectral_gap))
    tally(report, "kernel_monotone", n, np.array(kernel_shape))
    tally(report, "kernel_mass", n, np.array(kernel_mass))
    tally(report, "u2_preservation", n, np.array(preservation))
    return report


NOISE_LAMBDAS = (0.6, 0.75, 0.9)
NOISE_MODES = 8
NOISE_STEP = 0.01
MOMENT_STEPS = (1e-2, 1e-3, 1e-4)


def _double_factorial(k: int) -> int:
    return math.prod(range(k, 0, -2))


def noise_law_suite(
    generator: np.random.Generator,
    samples: int = 100_000,
    lambdas: Sequence[float] = NOISE_LAMBDAS,
    h: float = NOISE_STEP,
) -> ExperimentReport:
    """Per-mode variances, mode independence, aggregation and moment bounds."""
    report = ExperimentReport(
        "noise_law",
        {"samples": samples, "lambdas": list(lambdas), "h": h},
        list(VIOLATION_COLUMNS),
    )
    for lam in lambdas:
        spec = NoiseSpec(lam, NOISE_MODES)
        draws = conv_samples(spec, h, generator, samples)
        squares = draws**2
        expected = conv_variances(spec, h)
        se = np.std(squares, axis=0, ddof=1) / math.sqrt(samples)
        z = np.abs(np.mean(squares, axis=0) - expected) / se
        case = f"lambda={lam:g}"
        report.add_row(
            f"variance_3se[{case}]",
            NOISE_MODES + 1,
            samples,
            int(np.count_nonzero(z > 3.0)),
            float(np.max(z) - 3.0),
        )
        report.add_verdict(
            at_most(f"variance_3se[{case}]", float(np.max(z)), 3.0, hard=False)
        )
        report.add_verdict(at_most(f"variance_5se[{case}]", float(np.max(z)), 5.0))

        normed = draws / np.sqrt(expected)
        cross = normed.T @ normed / samples
        off = np.abs(cross[~np.eye(NOISE_MODES + 1, dtype=bool)])
        cross_z = float(np.max(off) * math.sqrt(samples))
        report.add_row(
            f"independence[{case}]",
            NOISE_MODES + 1,
            samples,
            int(np.count_nonzero(off * math.sqrt(samples) > 3.0)),
            cross_z - 3.0,
        )
        report.add_verdict(
            at_most(f"independence_3se[{case}]", cross_z, 3.0, hard=False)
        )

        energy = np.sum(squares, axis=1)
        energy_se = float(np.std(energy, ddof=1) / math.sqrt(samples))
        bound = trace_constant(spec) * h
        report.add_verdict(
            at_most(
                f"step_energy[{case}]", float(np.mean(energy)), bound + 3 * energy_se
            )
        )

        rel = np.abs(aggregated_variances(spec, h / 2) - conv_variances(spec, h))
        rel = rel / conv_variances(spec, h)
        tally(report, f"aggregate_variance[{case}]", NOISE_MODES + 1, rel - 1e-14)

        for p in (1, 2):
            ceiling = _double_factorial(2 * p - 1) * trace_constant(spec) ** p
            for step in MOMENT_STEPS:
                ratio, ratio_se = noise_moment_ratio(
                    spec, step, p, max(samples // 10, 2), generator
                )
                report.add_verdict(
                    at_most(
                        f"moment_ratio[{case},p={p},h={step:g}]",
                        ratio,
                        ceiling + 3 * ratio_se,
                    )
                )
    return report


def properties_suite(run: RunConfig) -> ExperimentReport:
    """All invariant suites, with trial counts from ``experiment.trials``."""
    stream = run.noise_stream()
    trials = run.trials
    suites = [
        rearrangement_suite(stream.for_probe(0), trials=10 * trials),
        riesz_polya_szego_suite(stream.for_probe(1), trials=trials),
        key_inequality_suite(stream.for_probe(2), n=run.n, trials=trials),
        heat_suite(stream.for_probe(3)),
        noise_law_suite(stream.for_probe(4), samples=100 * trials),
    ]
    report = ExperimentReport(
        "properties", run.snapshot(), list(VIOLATION_COLUMNS)
    )
    for suite in suites:
        for row in suite.rows:
            report.add_row(f"{suite.name}.{row[0]}", *row[1:])
        report.extend(suite, prefix=f"{suite.name}.")
        report.wall_clock += suite.wall_clock
    logger.info(
        "properties: %d verdicts, %d hard failures",
        len(report.verdicts),
        len(report.hard_failures),
    )
    return report
