"""Container describing the fleet of microgrids an operator manages."""
from dataclasses import dataclass

import numpy as np

from .gbm import CorrelationMatrix, GbmParams


@dataclass(frozen=True)
class GridEnsemble:
    """Per-microgrid GBM parameters, their correlation, demands and P_b."""

    params: "tuple[GbmParams, ...]"
    corr: CorrelationMatrix
    demands: np.ndarray          # kW, one per microgrid
    battery_unit_kw: float       # P_b

    def __post_init__(self):
        demands = np.asarray(self.demands, dtype=float)
        object.__setattr__(self, "demands", demands)
        object.__setattr__(self, "params", tuple(self.params))
        if self.corr.n != len(self.params) or demands.shape != (len(self.params),):
            raise ValueError("params, correlation and demands sizes disagree")
        if np.any(demands <= 0):
            raise ValueError("demands must be strictly positive")
        if self.battery_unit_kw <= 0:
            raise ValueError("battery_unit_kw must be > 0")

    @property
    def n_microgrids(self) -> int:
        return len(self.params)

    @property
    def sigmas(self) -> np.ndarray:
        return np.array([p.sigma for p in self.params])

    @property
    def mus(self) -> np.ndarray:
        return np.array([p.mu for p in self.params])
