"""Self-contained validation checks behind the ``validate`` CLI command.

The oracle suite re-derives the closed-form allocator from an independent
normal CDF (the C library's erfc, not scipy's), checks lattice/closed-form
agreement, calibration residuals, and the deterministic initial-savings
figure.  The stats suite checks the KS threshold, its rejection-rate
calibration, the chi-square survival anchor, and bootstrap interval width.
"""
import math
from dataclasses import dataclass

import numpy as np

from . import ces
from .gbm import CorrelationMatrix, GbmParams, simulate_paths
from .grid import GridEnsemble
from .lattice import calibrate_step_model, dynamic_allocation, moment_residuals
from .scenario import derive_seed
from .stats import bootstrap_ci, ks_critical_value, ks_two_sample
from scipy.stats import chi2 as _chi2


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str


def _independent_cdf(x: float) -> float:
    # deliberately math.erfc, a different implementation from the library Phi
    return 0.5 * math.erfc(-x / math.sqrt(2.0))


def _put_value(p, d, sigma, tau) -> float:
    log_ratio = math.log(d / p)
    half = sigma * sigma * tau / 2.0
    scale = sigma * math.sqrt(tau)
    return d * _independent_cdf((log_ratio + half) / scale) - p * _independent_cdf(
        (log_ratio - half) / scale
    )


def check_ces_closed_form(n_points: int = 1000, seed: int = 2024) -> CheckResult:
    rng = np.random.Generator(np.random.Philox(key=seed))
    worst = 0.0
    for _ in range(n_points):
        d = rng.uniform(5.0, 50.0)
        p = d * rng.uniform(0.5, 2.0)
        sigma = rng.uniform(0.01, 0.1)
        tau = rng.uniform(0.1, 10.0)
        spec = ces.MicrogridSpec(demand=d, gbm=GbmParams(0.0, sigma))
        got = ces.ces_portfolio_value(p, spec, 0.0, tau)
        want = _put_value(p, d, sigma, tau)
        worst = max(worst, abs(got - want) / d)
    return CheckResult(
        "ces_closed_form_vs_independent_cdf",
        worst < 1e-10,
        f"max |error|/D = {worst:.3e} (tolerance 1e-10)",
    )


def _demo_grid() -> GridEnsemble:
    return GridEnsemble(
        params=(GbmParams(0.006, 0.03), GbmParams(0.005, 0.04)),
        corr=CorrelationMatrix.pairwise(0.6),
        demands=np.array([20.0, 25.0]),
        battery_unit_kw=1.0,
    )


def check_lattice_convergence() -> CheckResult:
    spec = ces.MicrogridSpec(demand=20.0, gbm=GbmParams(0.006, 0.03))
    grid = GridEnsemble(
        params=(spec.gbm,),
        corr=CorrelationMatrix.identity(1),
        demands=np.array([20.0]),
        battery_unit_kw=1.0,
    )
    model = calibrate_step_model(grid, dt=5.0 / 200)
    value, _ = dynamic_allocation(
        np.array([20.0]), grid.demands, model, 200, None, 1.0, engine="recombining"
    )
    want = ces.ces_portfolio_value(20.0, spec, 0.0, 5.0)
    rel = abs(value - want) / want
    return CheckResult(
        "lattice_to_closed_form_convergence",
        rel < 0.01,
        f"N=200 relative error {rel:.4%} (tolerance 1%)",
    )


def check_calibration_residuals() -> CheckResult:
    worst = 0.0
    for sigma1 in (0.01, 0.05, 0.1):
        grid1 = GridEnsemble(
            params=(GbmParams(0.0, sigma1),),
            corr=CorrelationMatrix.identity(1),
            demands=np.array([1.0]),
            battery_unit_kw=1.0,
        )
        model = calibrate_step_model(grid1, dt=1.0)
        worst = max(worst, np.max(np.abs(moment_residuals(model, grid1))))
        for sigma2 in (0.01, 0.1):
            for rho in (-0.9, -0.3, 0.0, 0.3, 0.9):
                grid2 = GridEnsemble(
                    params=(GbmParams(0.0, sigma1), GbmParams(0.0, sigma2)),
                    corr=CorrelationMatrix.pairwise(rho),
                    demands=np.array([1.0, 1.0]),
                    battery_unit_kw=1.0,
                )
                model = calibrate_step_model(grid2, dt=1.0)
                worst = max(worst, np.max(np.abs(moment_residuals(model, grid2))))
                if np.any(model.branch_probs < 0) or np.any(model.branch_probs > 1):
                    return CheckResult(
                        "calibration_moment_residuals", False, "probability outside [0,1]"
                    )
    return CheckResult(
        "calibration_moment_residuals",
        worst < 1e-10,
        f"max residual {worst:.3e} (tolerance 1e-10)",
    )


def initial_savings() -> float:
    """Deterministic pooling savings (%) at t=0 for the two-grid demo.

    Reference point for the bundled case studies; see the README note on the
    published comparison table.
    """
    grid = _demo_grid()
    model = calibrate_step_model(grid, dt=1.0)
    _, alloc = dynamic_allocation(
        np.array([20.0, 25.0]), grid.demands, model, 5, None, 1.0
    )
    b_ces = sum(
        ces.ces_allocation(p, ces.MicrogridSpec(demand=d, gbm=g), 0.0, 5.0, 1.0).b_hat
        for p, d, g in zip((20.0, 25.0), grid.demands, grid.params)
    )
    return float(100.0 * (1.0 - alloc.b / b_ces))


def check_tes_mc_agreement(seed: int = 31) -> CheckResult:
    """Lattice root value against the transformed-measure Monte Carlo oracle."""
    from .lattice import tes_value_mc

    grid = _demo_grid()
    model = calibrate_step_model(grid, dt=1.0)
    value5, _ = dynamic_allocation(
        np.array([20.0, 25.0]), grid.demands, model, 5, None, 1.0
    )
    fine_model = calibrate_step_model(grid, dt=5.0 / 80)
    value80, _ = dynamic_allocation(
        np.array([20.0, 25.0]), grid.demands, fine_model, 80, None, 1.0
    )
    estimate, stderr = tes_value_mc(grid, np.array([20.0, 25.0]), 0.0, 5.0, 200_000, seed)
    margin = 3 * stderr + abs(value5 - value80) + 0.01 * estimate
    ok = abs(value5 - estimate) <= margin
    return CheckResult(
        "tes_lattice_vs_monte_carlo",
        ok,
        f"|{value5:.4f} - {estimate:.4f}| <= {margin:.4f}",
    )


def check_ks_critical() -> CheckResult:
    value = ks_critical_value(10_000, 10_000, 0.05)
    return CheckResult(
        "ks_critical_value",
        abs(value - 0.0192) <= 1e-4,
        f"c(1e4,1e4,5%) = {value:.5f} (target 0.0192 +/- 1e-4)",
    )


def check_ks_calibration(n_trials: int = 500, seed: int = 501) -> CheckResult:
    critical = ks_critical_value(10_000, 10_000, 0.05)
    params = GbmParams(0.006, 0.03)
    rejections = 0
    for trial in range(n_trials):
        ens = simulate_paths(
            [params],
            CorrelationMatrix.identity(1),
            np.array([20.0]),
            horizon=5.0,
            n_steps=1,
            n_paths=20_000,
            seed=derive_seed(seed, "ks", trial),
        )
        terminal = ens.values[:, -1, 0]
        if ks_two_sample(terminal[:10_000], terminal[10_000:]) > critical:
            rejections += 1
    rate = rejections / n_trials
    return CheckResult(
        "ks_same_distribution_rejection_rate",
        0.04 <= rate <= 0.06,
        f"rejection rate {rate:.3f} over {n_trials} trials (target 0.04-0.06)",
    )


def check_chi_square_anchor() -> CheckResult:
    p = float(_chi2.sf(18.86, 13))
    return CheckResult(
        "chi_square_survival_anchor",
        abs(p - 0.128) <= 0.002,
        f"sf(18.86, 13) = {p:.4f} (target 0.128 +/- 0.002)",
    )


def check_bootstrap_width(seed: int = 99) -> CheckResult:
    rng = np.random.Generator(np.random.Philox(key=seed))
    sample = rng.standard_normal(10_000)
    interval = bootstrap_ci(sample, n_resamples=2_000, level=0.95, seed=seed)
    width = interval.hi - interval.lo
    want = 2.0 * 1.96 / 100.0
    ok = abs(width - want) / want < 0.10
    return CheckResult(
        "bootstrap_interval_width",
        ok,
        f"width {width:.5f} vs CLT {want:.5f} (tolerance 10%)",
    )


ORACLE_CHECKS = (
    check_ces_closed_form,
    check_lattice_convergence,
    check_calibration_residuals,
    check_tes_mc_agreement,
)
STATS_CHECKS = (
    check_ks_critical,
    check_ks_calibration,
    check_chi_square_anchor,
    check_bootstrap_width,
)


def run_suite(suite: str, inject_phi_fault: bool = False):
    """Run a named suite; optionally perturb the allocator's normal CDF.

    The fault injection rebinds the module-level CDF seam used by the
    closed-form allocator, which a healthy oracle check must detect.
    """
    checks = {
        "oracle": ORACLE_CHECKS,
        "stats": STATS_CHECKS,
        "all": ORACLE_CHECKS + STATS_CHECKS,
    }[suite]
    results = []
    original = ces._normal_cdf
    try:
        if inject_phi_fault:
            ces._normal_cdf = lambda x: original(x) + 5e-7
        for check in checks:
            results.append(check())
    finally:
        ces._normal_cdf = original
    return results
