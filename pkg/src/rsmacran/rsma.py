"""RSMA decoding structure, SINR/rate evaluation, and constraint accounting.

Conventions
-----------
* A user's total rate is r_k = r_k^p + r_k^c.
* decoders[i] (the set M_i) lists the users that decode user i's common
  message; decodes[k] (the set I_k) is its inverse.
* order[k] is the successive-decoding order at user k, first-decoded first.
  While decoding message i at user k, the still-undecoded common messages
  (those after i in order[k]) plus the never-decoded ones (outside I_k)
  and all private streams count as interference.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import UsageError
from .model import ChannelState


@dataclass
class Clustering:
    """Binary BS-to-message assignment nu: serves_o[b, k] == (k in K_b^o)."""

    serves_p: np.ndarray             # (B, K) bool
    serves_c: np.ndarray             # (B, K) bool
    degenerate: bool = False         # some user left without a private server

    @property
    def num_bs(self) -> int:
        return self.serves_p.shape[0]

    @property
    def num_users(self) -> int:
        return self.serves_p.shape[1]

    def served_private(self, b: int) -> np.ndarray:
        return np.flatnonzero(self.serves_p[b])

    def served_common(self, b: int) -> np.ndarray:
        return np.flatnonzero(self.serves_c[b])

    def serving_bs(self, k: int, kind: str) -> np.ndarray:
        m = self.serves_p if kind == "p" else self.serves_c
        return np.flatnonzero(m[:, k])


@dataclass
class DecodingStructure:
    """RSMA sets M_k / I_k / I'_{i,k} and per-user decoding orders."""

    decoders: list                   # decoders[i] = tuple M_i
    order: list                      # order[k] = tuple, permutation of I_k, first decoded first
    decodes: list = field(init=False)

    def __post_init__(self):
        K = len(self.decoders)
        self.decodes = [tuple(sorted(i for i in range(K) if k in self.decoders[i]))
                        for k in range(K)]
        for k in range(K):
            if set(self.order[k]) != set(self.decodes[k]):
                raise UsageError(f"order at user {k} is not a permutation of I_{k}")

    @property
    def num_users(self) -> int:
        return len(self.decoders)

    def has_common_stream(self, i: int) -> bool:
        return len(self.decoders[i]) > 0

    def decoded_after(self, i: int, k: int) -> tuple:
        """I'_{i,k}: common messages decoded at k strictly after message i."""
        pos = self.order[k].index(i)
        return self.order[k][pos + 1:]

    def common_interferers(self, i: int, k: int) -> tuple:
        """Common messages still interfering when k decodes message i."""
        outside = tuple(l for l in range(self.num_users) if l not in self.decodes[k])
        return outside + self.decoded_after(i, k)


@dataclass
class Beamformers:
    """Per-stream beamforming blocks; w_o[k, b] in C^L, zero outside clusters."""

    w_p: np.ndarray                  # (K, B, L) complex
    w_c: np.ndarray                  # (K, B, L) complex

    @property
    def num_users(self) -> int:
        return self.w_p.shape[0]

    def aggregate(self, k: int, kind: str) -> np.ndarray:
        w = self.w_p if kind == "p" else self.w_c
        return w[k].reshape(-1)

    def aggregate_all(self, kind: str) -> np.ndarray:
        w = self.w_p if kind == "p" else self.w_c
        return w.reshape(w.shape[0], -1)

    def copy(self) -> "Beamformers":
        return Beamformers(self.w_p.copy(), self.w_c.copy())


@dataclass
class RateAllocation:
    """Allocated stream rates in bit/s; r_c[i] = 0 when user i has no common stream."""

    r_p: np.ndarray                  # (K,)
    r_c: np.ndarray                  # (K,)

    def total(self) -> np.ndarray:
        return self.r_p + self.r_c

    def copy(self) -> "RateAllocation":
        return RateAllocation(self.r_p.copy(), self.r_c.copy())


def mrt_beamformers(channels: ChannelState, clustering: Clustering,
                    p_max: np.ndarray) -> Beamformers:
    """Maximum-ratio blocks on cluster links, equal per-message power split per BS.

    Blocks whose link is zeroed stay zero; each BS then spends at most its
    budget, so the result is always power feasible.
    """
    B, K, L = channels.num_bs, channels.num_users, channels.antennas_per_bs
    w_p = np.zeros((K, B, L), dtype=complex)
    w_c = np.zeros((K, B, L), dtype=complex)
    for b in range(B):
        streams = [(k, "p") for k in clustering.served_private(b)]
        streams += [(k, "c") for k in clustering.served_common(b)]
        if not streams:
            continue
        share = p_max[b] / len(streams)
        for k, kind in streams:
            h = channels.h[b, k]
            nrm = np.linalg.norm(h)
            if nrm == 0.0:
                continue
            block = np.sqrt(share) * h / nrm
            if kind == "p":
                w_p[k, b] = block
            else:
                w_c[k, b] = block
    return Beamformers(w_p, w_c)


def build_decoding_structure(channels: ChannelState, clustering: Clustering,
                             mode: str, q: int = 2,
                             p_max: np.ndarray | None = None) -> DecodingStructure:
    """Construct M_k / I_k / pi_k for the given interference-management mode.

    RSMA: user k's common message is decoded by k itself plus the q users
    whose private decoding suffers the strongest interference from that
    stream at maximum-ratio initial beamformers. Decoding orders sort by
    descending received common power, ties by user index.
    SCM: one super-common stream, carried as user 0's common message and
    decoded by everybody. TIN: no common streams at all.
    """
    K = channels.num_users
    if mode == "TIN":
        return DecodingStructure(decoders=[() for _ in range(K)],
                                 order=[() for _ in range(K)])
    if mode == "SCM":
        decoders = [tuple(range(K))] + [() for _ in range(K - 1)]
        return DecodingStructure(decoders=decoders, order=[(0,) for _ in range(K)])
    if mode != "RSMA":
        raise UsageError(f"unknown decoding mode {mode!r}")

    if p_max is None:
        p_max = np.ones(channels.num_bs)
    w0 = mrt_beamformers(channels, clustering, np.asarray(p_max, dtype=float))
    H = channels.aggregate_all()                       # (K, B*L)
    Wc = w0.aggregate_all("c")                         # (K, B*L)
    cross = np.abs(H.conj() @ Wc.T) ** 2               # cross[j, i] = |h_j^H w_i^c|^2

    decoders = []
    for k in range(K):
        gains = cross[:, k].copy()
        gains[k] = 0.0
        cand = [int(j) for j in np.argsort(-gains, kind="stable") if gains[j] > 0.0]
        decoders.append(tuple(sorted({k, *cand[:q]})))

    ds = DecodingStructure(decoders=decoders,
                           order=[tuple(sorted(i for i in range(K) if k in decoders[i]))
                                  for k in range(K)])
    order = []
    for k in range(K):
        members = list(ds.decodes[k])
        members.sort(key=lambda i: (-cross[k, i], i))
        order.append(tuple(members))
    return DecodingStructure(decoders=decoders, order=order)


def stream_gains(w: Beamformers, channels: ChannelState) -> tuple:
    """(Gp, Gc) with Gp[k, j] = |h_k^H w_j^p|^2 and Gc[k, l] = |h_k^H w_l^c|^2."""
    H = channels.aggregate_all()
    Gp = np.abs(H.conj() @ w.aggregate_all("p").T) ** 2
    Gc = np.abs(H.conj() @ w.aggregate_all("c").T) ** 2
    return Gp, Gc


def sinr_private(k: int, w: Beamformers, channels: ChannelState,
                 ds: DecodingStructure) -> float:
    """SINR of user k decoding its private message after all common decodes."""
    Gp, Gc = stream_gains(w, channels)
    return _sinr_private_from_gains(k, Gp, Gc, channels.noise_power, ds)


def _sinr_private_from_gains(k, Gp, Gc, sigma2, ds):
    K = Gp.shape[0]
    interf = Gp[k].sum() - Gp[k, k]
    interf += sum(Gc[k, l] for l in range(K) if l not in ds.decodes[k])
    return float(Gp[k, k] / (interf + sigma2))


def sinr_common(i: int, k: int, w: Beamformers, channels: ChannelState,
                ds: DecodingStructure) -> float:
    """SINR of user k decoding user i's common message at its SIC stage."""
    if i not in ds.decodes[k]:
        raise UsageError(f"user {k} does not decode common message {i}")
    Gp, Gc = stream_gains(w, channels)
    return _sinr_common_from_gains(i, k, Gp, Gc, channels.noise_power, ds)


def _sinr_common_from_gains(i, k, Gp, Gc, sigma2, ds):
    interf = Gp[k].sum()
    interf += sum(Gc[k, l] for l in ds.common_interferers(i, k))
    return float(Gc[k, i] / (interf + sigma2))


def achievable_rates(w: Beamformers, channels: ChannelState, ds: DecodingStructure,
                     drop_dead_decoders: bool = False) -> RateAllocation:
    """Shannon rates under the current beamformers and decoding structure.

    The common rate of stream i is limited by its weakest decoder. With
    drop_dead_decoders, users whose whole channel vector is zero are
    excluded from that minimum (they cannot decode anything and their own
    streams are zero anyway); a stream with no surviving decoder gets 0.
    """
    K = channels.num_users
    tau = channels.bandwidth
    sigma2 = channels.noise_power
    Gp, Gc = stream_gains(w, channels)

    r_p = np.zeros(K)
    for k in range(K):
        r_p[k] = tau * np.log2(1.0 + _sinr_private_from_gains(k, Gp, Gc, sigma2, ds))

    r_c = np.zeros(K)
    for i in range(K):
        if not ds.has_common_stream(i):
            continue
        if drop_dead_decoders and channels.user_is_dead(i):
            continue                      # the owner cannot receive its own data
        rates = []
        for k in ds.decoders[i]:
            if drop_dead_decoders and channels.user_is_dead(k):
                continue
            g = _sinr_common_from_gains(i, k, Gp, Gc, sigma2, ds)
            rates.append(tau * np.log2(1.0 + g))
        r_c[i] = min(rates) if rates else 0.0
    return RateAllocation(r_p=r_p, r_c=r_c)


def fronthaul_usage(b: int, clustering: Clustering, rates: RateAllocation) -> float:
    """Sum rate the cloud forwards to BS b (bit/s)."""
    return float(rates.r_p[clustering.serves_p[b]].sum()
                 + rates.r_c[clustering.serves_c[b]].sum())


def power_usage(b: int, w: Beamformers) -> float:
    """Transmit power of BS b: sum of squared block norms (W)."""
    return float(np.sum(np.abs(w.w_p[:, b, :]) ** 2)
                 + np.sum(np.abs(w.w_c[:, b, :]) ** 2))


def realized_clustering(w: Beamformers, delta_zero: float) -> Clustering:
    """Clusters read back from the beamformers: nu = [||w_{b,k}^o||^2 > delta_zero]."""
    pow_p = np.sum(np.abs(w.w_p) ** 2, axis=2).T      # (B, K)
    pow_c = np.sum(np.abs(w.w_c) ** 2, axis=2).T
    return Clustering(serves_p=pow_p > delta_zero, serves_c=pow_c > delta_zero)
