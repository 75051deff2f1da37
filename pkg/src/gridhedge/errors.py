"""Exception and warning types shared across the package."""


class GridHedgeError(Exception):
    """Base class for all package-specific errors."""


class NotPositiveDefinite(GridHedgeError):
    """Correlation matrix admits no Cholesky factorization (a pivot <= 0)."""


class InvalidHorizon(GridHedgeError):
    """Simulation horizon must be positive."""


class DegenerateVolatility(GridHedgeError):
    """An operation requiring sigma > 0 received a zero-volatility process."""


class NonPositiveSample(GridHedgeError):
    """A power time series contained a value <= 0."""


class SeriesTooShort(GridHedgeError):
    """Too few observations to estimate drift and volatility."""


class TooFewBins(GridHedgeError):
    """Chi-square binning needs at least 4 bins (dof >= 1)."""


class EmptySample(GridHedgeError):
    """A statistical routine received an empty sample."""


class InvalidAlpha(GridHedgeError):
    """Significance level must lie strictly inside (0, 1)."""


class NonPositiveGeneration(GridHedgeError):
    """Generation state must be strictly positive."""


class TimeOutOfRange(GridHedgeError):
    """Evaluation time lies outside the allocation horizon."""


class LengthMismatch(GridHedgeError):
    """Vector arguments have inconsistent lengths."""


class InfeasibleCalibration(GridHedgeError):
    """Lattice calibration produced a branch probability outside [0, 1].

    Carries the offending branch index; shrinking the time step restores
    feasibility because branch probabilities approach 2**-n_assets.
    """

    def __init__(self, branch, probability, dt):
        self.branch = branch
        self.probability = probability
        self.dt = dt
        super().__init__(
            f"branch {branch} probability {probability:.6g} outside [0, 1]; "
            f"retry with a time step smaller than dt={dt:g} h"
        )


class TreeTooLarge(GridHedgeError):
    """Forward propagation would exceed the configured node budget."""


class MalformedTree(GridHedgeError):
    """Leaves do not form a complete tree produced by forward propagation."""


class MalformedSeries(GridHedgeError):
    """Time-series CSV violates the ingestion contract (bad row identified)."""


class InsufficientPaths(GridHedgeError):
    """No simulated path satisfied the requested terminal case filter."""


class DegenerateVolatilityWarning(UserWarning):
    """Estimated volatility is exactly zero (constant input series)."""


class RankDeficientWarning(UserWarning):
    """Replication design matrix is rank deficient; solution is minimum-norm."""
