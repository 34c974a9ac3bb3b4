"""Rate-gap MSE objective and the absorption/adaption/recovery resilience metric.

Per-user ratios are capped at 1 before averaging: delivering more than the
demand does not count as extra functionality, so a fully served network
scores exactly 1.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, UsageError
from .model import DemandProfile
from .rsma import RateAllocation


@dataclass(frozen=True)
class ResilienceWeights:
    """Non-negative weights (absorption, adaption, recovery) summing to 1."""

    lam1: float
    lam2: float
    lam3: float

    def __post_init__(self):
        lam = (self.lam1, self.lam2, self.lam3)
        if any(v < 0 for v in lam):
            raise ConfigurationError(f"weights must be non-negative, got {lam}")
        if abs(sum(lam) - 1.0) > 1e-9:
            raise ConfigurationError(f"weights must sum to 1, got {sum(lam)}")


@dataclass
class ResilienceReport:
    """Per-event metric capture: absorption plus per-mechanism adaption/recovery."""

    e_abs: float
    t_0: float
    T_0: float
    e_ada: dict = field(default_factory=dict)    # mechanism n -> value
    e_rec: dict = field(default_factory=dict)
    e_total: dict = field(default_factory=dict)
    t_n: dict = field(default_factory=dict)

    def record_mechanism(self, n: int, e_ada: float, t_n: float,
                         weights: ResilienceWeights) -> None:
        self.e_ada[n] = e_ada
        self.t_n[n] = t_n
        self.e_rec[n] = recovery(self.t_0, t_n, self.T_0)
        self.e_total[n] = resilience(weights, self.e_abs, self.e_ada[n], self.e_rec[n])


def mse_gap(rates: RateAllocation, demand: DemandProfile) -> float:
    """Mean squared deviation of total allocated rates from the targets, (bit/s)^2."""
    gap = rates.total() - demand.r_des
    return float(np.mean(np.abs(gap) ** 2))


def mse_gap_db(psi: float, ref: float = 1e12) -> float:
    """MSE in dB relative to 1 (Mbps)^2."""
    return float(10.0 * np.log10(max(psi, 1e-300) / ref))


def _capped_ratio_mean(rates_total: np.ndarray, demand: DemandProfile) -> float:
    ratios = np.minimum(rates_total / demand.r_des, 1.0)
    return float(np.mean(ratios))


def absorption(rates_at_t0: np.ndarray, demand: DemandProfile) -> float:
    """Mean capped fraction of demand retained at the time of failure."""
    return _capped_ratio_mean(np.asarray(rates_at_t0, dtype=float), demand)


def adaption(rates_at_tn: np.ndarray, demand: DemandProfile) -> float:
    """Mean capped fraction of demand after a remediation mechanism finished."""
    return _capped_ratio_mean(np.asarray(rates_at_tn, dtype=float), demand)


def recovery(t_0: float, t_n: float, T_0: float) -> float:
    """1 when recovery finished within the target T_0, else T_0 / elapsed."""
    if T_0 <= 0:
        raise ConfigurationError("T_0 must be positive")
    if t_n < t_0:
        raise UsageError("recovery time precedes the failure time")
    elapsed = t_n - t_0
    return 1.0 if elapsed <= T_0 else float(T_0 / elapsed)


def resilience(weights: ResilienceWeights, e_abs: float, e_ada: float,
               e_rec: float) -> float:
    """Linear combination of the three components."""
    return float(weights.lam1 * e_abs + weights.lam2 * e_ada + weights.lam3 * e_rec)
