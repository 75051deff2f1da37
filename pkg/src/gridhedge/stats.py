"""Validation statistics: two-sample KS test and bootstrap intervals."""
from dataclasses import dataclass

import numpy as np

from .errors import EmptySample, InvalidAlpha


@dataclass(frozen=True)
class KsResult:
    statistic: float
    n: int
    m: int
    alpha: float
    critical_value: float

    @property
    def reject(self) -> bool:
        return self.statistic > self.critical_value


@dataclass(frozen=True)
class BootstrapCi:
    mean: float
    lo: float
    hi: float
    level: float
    n_resamples: int
    seed: int


def ks_two_sample(a, b) -> float:
    """sup-norm distance between the two empirical CDFs.

    Evaluated over the pooled sorted support, which is where the supremum of
    a difference of step functions is attained.
    """
    a = np.sort(np.asarray(a, dtype=float))
    b = np.sort(np.asarray(b, dtype=float))
    if a.size == 0 or b.size == 0:
        raise EmptySample("both samples must be nonempty")
    pooled = np.concatenate([a, b])
    cdf_a = np.searchsorted(a, pooled, side="right") / a.size
    cdf_b = np.searchsorted(b, pooled, side="right") / b.size
    return float(np.max(np.abs(cdf_a - cdf_b)))


def ks_critical_value(n: int, m: int, alpha: float) -> float:
    """Asymptotic two-sample threshold c(alpha) * sqrt((n + m) / (n * m)).

    c(alpha) = sqrt(-ln(alpha / 2) / 2), e.g. 1.3581 at the 5% level.  The
    asymptotic form is accurate in the 10^4-sample regime this package
    targets; no exact small-sample tables are attempted.
    """
    if n < 1 or m < 1:
        raise ValueError("sample sizes must be >= 1")
    if not 0.0 < alpha < 1.0:
        raise InvalidAlpha(f"alpha must be in (0, 1), got {alpha}")
    coefficient = np.sqrt(-np.log(alpha / 2.0) / 2.0)
    return float(coefficient * np.sqrt((n + m) / (n * m)))


def ks_test(a, b, alpha: float = 0.05) -> KsResult:
    """Convenience wrapper bundling the statistic with its threshold."""
    statistic = ks_two_sample(a, b)
    a = np.asarray(a)
    b = np.asarray(b)
    return KsResult(
        statistic=statistic,
        n=a.size,
        m=b.size,
        alpha=alpha,
        critical_value=ks_critical_value(a.size, b.size, alpha),
    )


def bootstrap_ci(
    sample, n_resamples: int = 10_000, level: float = 0.95, seed: int = 0
) -> BootstrapCi:
    """Percentile bootstrap interval for the mean, deterministic per seed.

    Quantiles of any level are read from the same resampled-mean array, so
    widening the level can never narrow the interval.
    """
    x = np.asarray(sample, dtype=float)
    if x.size == 0:
        raise EmptySample("sample must be nonempty")
    if n_resamples < 100:
        raise ValueError(f"n_resamples must be >= 100, got {n_resamples}")
    if not 0.0 < level < 1.0:
        raise InvalidAlpha(f"level must be in (0, 1), got {level}")
    rng = np.random.Generator(np.random.Philox(key=seed))
    means = np.empty(n_resamples)
    chunk = max(1, min(n_resamples, int(2e7 // max(x.size, 1)) or 1))
    done = 0
    while done < n_resamples:
        take = min(chunk, n_resamples - done)
        idx = rng.integers(0, x.size, size=(take, x.size))
        means[done : done + take] = x[idx].mean(axis=1)
        done += take
    tail = (1.0 - level) / 2.0
    lo, hi = np.quantile(means, [tail, 1.0 - tail])
    return BootstrapCi(
        mean=float(x.mean()),
        lo=float(lo),
        hi=float(hi),
        level=level,
        n_resamples=n_resamples,
        seed=seed,
    )
