"""Correlated geometric Brownian motion: simulation and estimation.

Generation of each microgrid follows dP = mu*P*dt + sigma*P*dW with
correlated Wiener increments (dW_i dW_j = rho_ij dt).  Paths can be drawn
under the physical measure or under the drift-removed transformed measure
in which every generation process is a martingale.
"""
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import chi2 as _chi2
from typing import NamedTuple

from .errors import (
    DegenerateVolatility,
    DegenerateVolatilityWarning,
    EmptySample,
    InvalidHorizon,
    NonPositiveSample,
    NotPositiveDefinite,
    SeriesTooShort,
    TooFewBins,
)
from .normal import normal_ppf

MEASURES = ("physical", "transformed")


@dataclass(frozen=True)
class GbmParams:
    """Drift (per hour) and volatility (per sqrt-hour) of one generator.

    ``sigma == 0`` is representable so that estimation of a constant series
    can report its degenerate fit; simulation and allocation reject it.
    """

    mu: float
    sigma: float

    def __post_init__(self):
        if not np.isfinite(self.mu):
            raise ValueError(f"mu must be finite, got {self.mu}")
        if not np.isfinite(self.sigma) or self.sigma < 0:
            raise ValueError(f"sigma must be finite and >= 0, got {self.sigma}")


@dataclass(frozen=True)
class CorrelationMatrix:
    """Symmetric unit-diagonal correlation matrix of the Wiener drivers."""

    rho: np.ndarray

    def __post_init__(self):
        rho = np.atleast_2d(np.asarray(self.rho, dtype=float))
        if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
            raise ValueError(f"correlation matrix must be square, got {rho.shape}")
        if not np.allclose(rho, rho.T, atol=1e-12):
            raise ValueError("correlation matrix must be symmetric")
        if not np.allclose(np.diag(rho), 1.0, atol=1e-12):
            raise ValueError("correlation matrix must have unit diagonal")
        object.__setattr__(self, "rho", rho)

    @property
    def n(self) -> int:
        return self.rho.shape[0]

    @classmethod
    def identity(cls, n: int) -> "CorrelationMatrix":
        return cls(np.eye(n))

    @classmethod
    def pairwise(cls, coefficient: float, n: int = 2) -> "CorrelationMatrix":
        """Uniform off-diagonal coefficient (the two-grid case of the demos)."""
        rho = np.full((n, n), float(coefficient))
        np.fill_diagonal(rho, 1.0)
        return cls(rho)


@dataclass(frozen=True)
class PathEnsemble:
    """Simulated generation paths, kW, shape (n_paths, n_steps + 1, n_assets)."""

    values: np.ndarray
    dt: float
    measure: str
    seed: int
    initial: np.ndarray = field(repr=False)

    @property
    def n_paths(self) -> int:
        return self.values.shape[0]

    @property
    def n_steps(self) -> int:
        return self.values.shape[1] - 1

    @property
    def n_assets(self) -> int:
        return self.values.shape[2]

    def log_increments(self) -> np.ndarray:
        return np.diff(np.log(self.values), axis=1)


def cholesky_factor(corr: CorrelationMatrix) -> np.ndarray:
    """Lower-triangular L with L @ L.T == rho.

    Raises NotPositiveDefinite when the factorization hits a pivot <= 0,
    which is exactly the failure mode of an invalid correlation matrix.
    """
    try:
        return np.linalg.cholesky(corr.rho)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite(
            "correlation matrix is not positive definite (Cholesky failed)"
        ) from exc


def _path_normals(seed: int, n_paths: int, n_steps: int, n_assets: int) -> np.ndarray:
    """Counter-based standard normals for the whole ensemble.

    A single Philox stream keyed by the seed is consumed in path-major
    order in one array draw, so identical (seed, shape) give bit-identical
    ensembles on every platform, independent of any internal chunking.
    """
    gen = np.random.Generator(np.random.Philox(key=seed))
    return gen.standard_normal((n_paths, n_steps, n_assets))


def simulate_paths(
    params,
    corr: CorrelationMatrix,
    initial,
    horizon: float,
    n_steps: int,
    n_paths: int,
    seed: int,
    measure: str = "physical",
) -> PathEnsemble:
    """Exact log-space discretization of correlated GBM.

    Per-step log-increments are jointly Gaussian with mean
    (mu - sigma^2/2)*dt under the physical measure, -sigma^2*dt/2 under the
    transformed (driftless) measure, and covariance sigma_i*sigma_j*rho_ij*dt.
    Marginals are therefore exactly lognormal at any step size.
    """
    params = list(params)
    initial = np.asarray(initial, dtype=float)
    if measure not in MEASURES:
        raise ValueError(f"measure must be one of {MEASURES}, got {measure!r}")
    if horizon <= 0:
        raise InvalidHorizon(f"horizon must be > 0, got {horizon}")
    if n_steps < 1 or n_paths < 1:
        raise ValueError("n_steps and n_paths must be >= 1")
    if initial.shape != (len(params),):
        raise ValueError("initial must supply one value per process")
    if np.any(initial <= 0):
        raise ValueError("initial generation must be strictly positive")
    if corr.n != len(params):
        raise ValueError("correlation dimension does not match params")
    sigma = np.array([p.sigma for p in params])
    mu = np.array([p.mu for p in params])
    if np.any(sigma == 0):
        raise DegenerateVolatility("simulation requires sigma > 0 for every process")

    dt = horizon / n_steps
    lower = cholesky_factor(corr)
    if measure == "physical":
        drift = (mu - sigma**2 / 2.0) * dt
    else:
        drift = -(sigma**2) * dt / 2.0

    z = _path_normals(seed, n_paths, n_steps, len(params))
    increments = drift + (z @ lower.T) * sigma * np.sqrt(dt)
    log_paths = np.cumsum(increments, axis=1) + np.log(initial)
    values = np.empty((n_paths, n_steps + 1, len(params)))
    values[:, 0, :] = initial
    values[:, 1:, :] = np.exp(log_paths)
    return PathEnsemble(values=values, dt=dt, measure=measure, seed=seed, initial=initial)


def gbm_mle_from_returns(log_returns, dt: float) -> GbmParams:
    """Maximum-likelihood GBM fit from log-returns sampled at interval dt.

    Uses the MLE variance divisor n (not n-1), so sigma^2 carries the usual
    small-sample downward bias of order 1/n.
    """
    x = np.asarray(log_returns, dtype=float)
    if x.size < 2:
        raise SeriesTooShort(f"need at least 2 log-returns, got {x.size}")
    if dt <= 0:
        raise ValueError(f"dt must be > 0, got {dt}")
    sigma_sq = x.var(ddof=0) / dt
    mu = x.mean() / dt + sigma_sq / 2.0
    if sigma_sq == 0.0:
        warnings.warn(
            "log-returns are constant; fitted volatility is zero",
            DegenerateVolatilityWarning,
            stacklevel=2,
        )
    return GbmParams(mu=float(mu), sigma=float(np.sqrt(sigma_sq)))


def estimate_gbm_mle(series, dt: float):
    """Fit (mu, sigma) to a positive, uniformly sampled kW series.

    Returns the fitted parameters together with the log-return sample the
    fit was computed from (handy for the goodness-of-fit test).
    """
    values = np.asarray(series, dtype=float)
    if values.size < 3:
        raise SeriesTooShort(f"need at least 3 observations, got {values.size}")
    if np.any(values <= 0):
        bad = int(np.argmax(values <= 0))
        raise NonPositiveSample(f"series value at index {bad} is not positive")
    log_returns = np.diff(np.log(values))
    return gbm_mle_from_returns(log_returns, dt), log_returns


class GofResult(NamedTuple):
    statistic: float
    dof: int
    p_value: float


def chi_square_gof(
    log_returns, params: GbmParams, dt: float, n_bins: int, n_estimated: int = 2
) -> GofResult:
    """Equal-probability-bin chi-square test of the fitted log-return law.

    Bins are equiprobable under N((mu - sigma^2/2) dt, sigma^2 dt); the
    degrees of freedom are n_bins - 1 - n_estimated, defaulting to the two
    parameters fitted by ``estimate_gbm_mle``.
    """
    x = np.asarray(log_returns, dtype=float)
    if x.size == 0:
        raise EmptySample("no log-returns supplied")
    if n_bins < 4 or n_bins - 1 - n_estimated < 1:
        raise TooFewBins(f"n_bins={n_bins} leaves dof < 1")
    if params.sigma == 0:
        raise DegenerateVolatility("cannot bin against a zero-volatility law")
    mean = (params.mu - params.sigma**2 / 2.0) * dt
    scale = params.sigma * np.sqrt(dt)
    edges = mean + scale * normal_ppf(np.arange(1, n_bins) / n_bins)
    observed = np.bincount(np.searchsorted(edges, x), minlength=n_bins)
    expected = x.size / n_bins
    statistic = float(np.sum((observed - expected) ** 2) / expected)
    dof = n_bins - 1 - n_estimated
    return GofResult(statistic, dof, float(_chi2.sf(statistic, dof)))
