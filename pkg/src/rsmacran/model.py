"""Topology, channel, demand, and outage generators.

All generators are pure functions of (seed, params): identical inputs give
bit-identical outputs. Distances enter the path-loss law in kilometers with
a 1 m clamp to avoid the log singularity at coincident positions.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError

# 3GPP-style macro path loss, d in km
PATHLOSS_FIXED_DB = 128.1
PATHLOSS_SLOPE_DB = 37.6
SHADOWING_STD_DB = 8.0
MIN_DISTANCE_M = 1.0

CRITICALITY_LEVELS = ("HI", "ME", "LO")


@dataclass(frozen=True)
class Topology:
    """Static network geometry and per-BS resource budgets (SI units)."""

    area_side: float                 # m
    bs_positions: np.ndarray         # (B, 2) m
    user_positions: np.ndarray       # (K, 2) m
    antennas_per_bs: int             # L
    p_max: np.ndarray                # (B,) W
    c_max: np.ndarray                # (B,) bit/s
    bandwidth: float                 # Hz
    noise_psd: float                 # W/Hz

    def __post_init__(self):
        if self.num_bs < 1 or self.num_users < 1 or self.antennas_per_bs < 1:
            raise ConfigurationError("B, K, and L must all be >= 1")
        if self.area_side <= 0 or self.bandwidth <= 0 or self.noise_psd <= 0:
            raise ConfigurationError("area_side, bandwidth, noise_psd must be positive")
        if np.any(self.p_max <= 0) or np.any(self.c_max <= 0):
            raise ConfigurationError("p_max and c_max must be positive for every BS")
        for pos in (self.bs_positions, self.user_positions):
            if np.any(pos < 0) or np.any(pos > self.area_side):
                raise ConfigurationError("positions must lie inside [0, area_side]^2")

    @property
    def num_bs(self) -> int:
        return self.bs_positions.shape[0]

    @property
    def num_users(self) -> int:
        return self.user_positions.shape[0]

    @property
    def noise_power(self) -> float:
        """sigma^2 = noise_psd * bandwidth (W)."""
        return float(self.noise_psd * self.bandwidth)

    def distances(self) -> np.ndarray:
        """Pairwise BS-user distances in meters, shape (B, K)."""
        diff = self.bs_positions[:, None, :] - self.user_positions[None, :, :]
        return np.linalg.norm(diff, axis=-1)


@dataclass
class ChannelState:
    """Per-link fading vectors h[b, k] in C^L plus the outage mask.

    noise_power and bandwidth are copied from the generating topology so
    rate computations can run from a ChannelState alone. An outaged link
    has its vector set exactly to zero (hard blockage).
    """

    h: np.ndarray                    # (B, K, L) complex
    outage_mask: np.ndarray          # (B, K) bool, True = outaged
    noise_power: float               # W
    bandwidth: float                 # Hz

    @property
    def num_bs(self) -> int:
        return self.h.shape[0]

    @property
    def num_users(self) -> int:
        return self.h.shape[1]

    @property
    def antennas_per_bs(self) -> int:
        return self.h.shape[2]

    def aggregate(self, k: int) -> np.ndarray:
        """Stacked channel [h_{1,k}; ...; h_{B,k}] of length L*B."""
        return self.h[:, k, :].reshape(-1)

    def aggregate_all(self) -> np.ndarray:
        """All aggregate vectors as a (K, L*B) array."""
        return np.swapaxes(self.h, 0, 1).reshape(self.num_users, -1)

    def user_is_dead(self, k: int) -> bool:
        """True when every link toward user k is zero."""
        return not np.any(self.h[:, k, :])


@dataclass(frozen=True)
class DemandProfile:
    """Per-user target rates (bit/s) and criticality labels."""

    r_des: np.ndarray                # (K,) bit/s
    criticality: tuple = field(default=())   # (K,) labels from CRITICALITY_LEVELS

    def __post_init__(self):
        if np.any(self.r_des <= 0):
            raise ConfigurationError("every desired rate must be positive")
        if self.criticality and len(self.criticality) != len(self.r_des):
            raise ConfigurationError("criticality labels must match user count")

    @property
    def num_users(self) -> int:
        return len(self.r_des)


def generate_topology(seed: int, *, B: int, K: int, L: int, area_side: float,
                      p_max: float, c_max: float, tau: float,
                      noise_psd: float) -> Topology:
    """Drop B base stations and K users uniformly over the square."""
    if B < 1 or K < 1 or L < 1:
        raise ConfigurationError(f"B={B}, K={K}, L={L}: all must be >= 1")
    if p_max <= 0 or c_max <= 0 or tau <= 0 or noise_psd <= 0:
        raise ConfigurationError("p_max, c_max, tau, noise_psd must be positive")
    rng = np.random.default_rng(seed)
    bs_pos = rng.uniform(0.0, area_side, size=(B, 2))
    user_pos = rng.uniform(0.0, area_side, size=(K, 2))
    return Topology(
        area_side=float(area_side),
        bs_positions=bs_pos,
        user_positions=user_pos,
        antennas_per_bs=int(L),
        p_max=np.full(B, float(p_max)),
        c_max=np.full(B, float(c_max)),
        bandwidth=float(tau),
        noise_psd=float(noise_psd),
    )


def pathloss_db(distances_m: np.ndarray) -> np.ndarray:
    """128.1 + 37.6 log10(d) with d in km, clamped at 1 m."""
    d_km = np.maximum(distances_m, MIN_DISTANCE_M) / 1000.0
    return PATHLOSS_FIXED_DB + PATHLOSS_SLOPE_DB * np.log10(d_km)


def generate_channels(topology: Topology, seed: int,
                      shadowing_std_db: float = SHADOWING_STD_DB) -> ChannelState:
    """Draw one block-fading realization.

    Per link: log-normal shadowing on top of the distance path loss, then
    i.i.d. unit-variance circularly-symmetric Gaussian fading per antenna.
    """
    rng = np.random.default_rng(seed)
    B, K, L = topology.num_bs, topology.num_users, topology.antennas_per_bs
    pl_db = pathloss_db(topology.distances())
    shadow_db = rng.normal(0.0, shadowing_std_db, size=(B, K))
    gain = 10.0 ** (-(pl_db + shadow_db) / 10.0)          # linear power gain
    fading = (rng.standard_normal((B, K, L)) + 1j * rng.standard_normal((B, K, L))) / np.sqrt(2.0)
    h = np.sqrt(gain)[:, :, None] * fading
    return ChannelState(
        h=h,
        outage_mask=np.zeros((B, K), dtype=bool),
        noise_power=topology.noise_power,
        bandwidth=topology.bandwidth,
    )


def apply_outage(channels: ChannelState, p: float, seed: int) -> ChannelState:
    """Mark each (b, k) link outaged independently with probability p.

    Outaged links are zeroed; the fading of surviving links is untouched.
    Interference-only links are subject to outage like any other link.
    """
    if not 0.0 <= p <= 1.0:
        raise ConfigurationError(f"outage probability must be in [0, 1], got {p}")
    rng = np.random.default_rng(seed)
    mask = rng.random((channels.num_bs, channels.num_users)) < p
    h = channels.h.copy()
    h[mask] = 0.0
    return ChannelState(
        h=h,
        outage_mask=channels.outage_mask | mask,
        noise_power=channels.noise_power,
        bandwidth=channels.bandwidth,
    )


def assign_criticality(K: int, counts: dict, seed: int) -> tuple:
    """Randomly assign HI/ME/LO labels with the given counts (summing to K)."""
    total = sum(counts.get(lv, 0) for lv in CRITICALITY_LEVELS)
    if total != K:
        raise ConfigurationError(f"criticality counts {counts} do not sum to K={K}")
    labels = []
    for lv in CRITICALITY_LEVELS:
        labels.extend([lv] * counts.get(lv, 0))
    rng = np.random.default_rng(seed)
    order = rng.permutation(K)
    out = [None] * K
    for slot, lab in zip(order, labels):
        out[slot] = lab
    return tuple(out)


def default_criticality_counts(K: int) -> dict:
    """Even HI/ME/LO split; the remainder goes to HI then ME."""
    base = K // 3
    rem = K - 3 * base
    return {
        "HI": base + (1 if rem >= 1 else 0),
        "ME": base + (1 if rem >= 2 else 0),
        "LO": base,
    }


def build_demand(K: int, qos_bps: dict, counts: dict | None = None,
                 seed: int = 0) -> DemandProfile:
    """Demand profile from per-level target rates (bit/s) and user counts."""
    counts = counts if counts is not None else default_criticality_counts(K)
    labels = assign_criticality(K, counts, seed)
    r_des = np.array([qos_bps[lab] for lab in labels], dtype=float)
    return DemandProfile(r_des=r_des, criticality=labels)
