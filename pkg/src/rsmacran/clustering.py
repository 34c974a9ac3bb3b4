"""BS-user assignment as an integer program, solved exactly at desk scale.

The assignment maximizes summed channel-quality benefits subject to a cap
on serving BSs per message, a cap on messages per BS, and the rule that no
BS serves both the private and the common message of the same user. The
search is branch-and-bound with LP-relaxation bounds; exploration order is
deterministic (lexicographic (b, k, o), 1-branch first), so ties always
resolve the same way.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from .errors import UsageError
from .model import ChannelState
from .rsma import Clustering, DecodingStructure, build_decoding_structure

_PRUNE_REL = 1e-12
_INT_TOL = 1e-7


@dataclass
class GapInstance:
    """Benefits and cardinality limits of one assignment problem."""

    benefit_p: np.ndarray            # (B, K) private benefits ||h_{b,k}||^2
    benefit_c: np.ndarray            # (B, K) common benefits, summed over decoders
    common_active: np.ndarray        # (K,) bool, user has a common stream
    max_bs_per_message: int          # B_k^max
    max_messages_per_bs: int         # I_b^max

    def __post_init__(self):
        if self.max_bs_per_message < 1 or self.max_messages_per_bs < 0:
            raise UsageError("assignment limits must be positive")

    @property
    def num_bs(self) -> int:
        return self.benefit_p.shape[0]

    @property
    def num_users(self) -> int:
        return self.benefit_p.shape[1]


def build_gap(channels: ChannelState, ds: DecodingStructure,
              max_bs_per_message: int, max_messages_per_bs: int) -> GapInstance:
    """Benefits from the current (possibly outaged) channels.

    The common benefit of user k at BS b pools the channel strength of every
    user that decodes k's common message; streams nobody decodes are inactive.
    """
    norms = np.sum(np.abs(channels.h) ** 2, axis=2)       # (B, K)
    K = channels.num_users
    benefit_c = np.zeros_like(norms)
    common_active = np.zeros(K, dtype=bool)
    for k in range(K):
        if ds.has_common_stream(k):
            common_active[k] = True
            benefit_c[:, k] = norms[:, list(ds.decoders[k])].sum(axis=1)
    return GapInstance(
        benefit_p=norms,
        benefit_c=benefit_c,
        common_active=common_active,
        max_bs_per_message=int(max_bs_per_message),
        max_messages_per_bs=int(max_messages_per_bs),
    )


def _assemble_ilp(inst: GapInstance):
    """Variable list (lexicographic (b, k, o)) and constraint matrix A x <= rhs.

    Zero-benefit links and inactive common streams are fixed to 0 up front:
    they can never increase the objective and dropping them keeps the
    outaged-BS case clean.
    """
    B, K = inst.num_bs, inst.num_users
    variables = []
    for b in range(B):
        for k in range(K):
            if inst.benefit_p[b, k] > 0.0:
                variables.append((b, k, "p"))
            if inst.common_active[k] and inst.benefit_c[b, k] > 0.0:
                variables.append((b, k, "c"))
    n = len(variables)
    benefits = np.array([inst.benefit_p[b, k] if o == "p" else inst.benefit_c[b, k]
                         for b, k, o in variables])

    rows, rhs = [], []
    for k in range(K):
        for o in ("p", "c"):
            idx = [j for j, (b2, k2, o2) in enumerate(variables) if k2 == k and o2 == o]
            if idx:
                row = np.zeros(n)
                row[idx] = 1.0
                rows.append(row)
                rhs.append(inst.max_bs_per_message)
    for b in range(B):
        idx = [j for j, (b2, _, _) in enumerate(variables) if b2 == b]
        if idx:
            row = np.zeros(n)
            row[idx] = 1.0
            rows.append(row)
            rhs.append(inst.max_messages_per_bs)
    for b in range(B):
        for k in range(K):
            idx = [j for j, (b2, k2, _) in enumerate(variables) if b2 == b and k2 == k]
            if len(idx) == 2:
                row = np.zeros(n)
                row[idx] = 1.0
                rows.append(row)
                rhs.append(1.0)
    A = np.array(rows) if rows else np.zeros((0, n))
    return variables, benefits, A, np.array(rhs, dtype=float)


def solve_gap(instance: GapInstance) -> Clustering:
    """Exact maximizer of the assignment benefit, as a Clustering.

    Depth-first branch-and-bound; nodes are pruned against the incumbent
    with an LP upper bound. A user left without a private server (dead
    links or binding limits) flags the result degenerate.
    """
    B, K = instance.num_bs, instance.num_users
    variables, benefits, A, rhs = _assemble_ilp(instance)
    n = len(variables)
    serves_p = np.zeros((B, K), dtype=bool)
    serves_c = np.zeros((B, K), dtype=bool)

    if n > 0:
        scale = benefits.max()
        c = benefits / scale
        best_val, best_x = -np.inf, None
        # stack entries: (lower bounds, upper bounds) on the binaries
        stack = [(np.zeros(n), np.ones(n))]
        while stack:
            lb, ub = stack.pop()
            res = linprog(-c, A_ub=A, b_ub=rhs, bounds=list(zip(lb, ub)),
                          method="highs")
            if not res.success:
                continue
            bound = -res.fun
            if bound <= best_val + _PRUNE_REL * max(1.0, abs(best_val)):
                continue
            x = res.x
            frac = np.where(np.abs(x - np.round(x)) > _INT_TOL)[0]
            if frac.size == 0:
                xi = np.round(x)
                val = float(c @ xi)
                if val > best_val:
                    best_val, best_x = val, xi
                continue
            j = int(frac[0])
            lb1, ub0 = lb.copy(), ub.copy()
            lb1[j] = 1.0
            ub0[j] = 0.0
            stack.append((lb, ub0))      # popped second
            stack.append((lb1, ub))      # popped first: prefer serving
        if best_x is not None:
            for j, (b, k, o) in enumerate(variables):
                if best_x[j] > 0.5:
                    (serves_p if o == "p" else serves_c)[b, k] = True

    degenerate = bool(np.any(serves_p.sum(axis=0) == 0))
    return Clustering(serves_p=serves_p, serves_c=serves_c, degenerate=degenerate)


def gap_objective(instance: GapInstance, clustering: Clustering) -> float:
    """Benefit value of an assignment (same summation as the solver)."""
    return float(np.sum(instance.benefit_p[clustering.serves_p])
                 + np.sum(instance.benefit_c[clustering.serves_c]))


def nearest_bs_clustering(channels: ChannelState) -> Clustering:
    """Bootstrap assignment by channel strength: private at the strongest BS,
    common at the second strongest (same BS only when there is just one)."""
    norms = np.sum(np.abs(channels.h) ** 2, axis=2)       # (B, K)
    B, K = norms.shape
    serves_p = np.zeros((B, K), dtype=bool)
    serves_c = np.zeros((B, K), dtype=bool)
    for k in range(K):
        order = np.argsort(-norms[:, k], kind="stable")
        if norms[order[0], k] > 0.0:
            serves_p[order[0], k] = True
        if B > 1 and norms[order[1], k] > 0.0:
            serves_c[order[1], k] = True
        elif B == 1 and norms[order[0], k] > 0.0:
            serves_c[order[0], k] = True
    return Clustering(serves_p=serves_p, serves_c=serves_c)


def cluster_and_structure(channels: ChannelState, mode: str, p_max: np.ndarray,
                          max_bs_per_message: int, max_messages_per_bs: int,
                          q: int = 2) -> tuple:
    """Bootstrap decoding sets, solve the assignment, rebuild the structure once.

    The decoder sets feed the common benefits, but building them needs an
    assignment; a strongest-BS bootstrap breaks the cycle.
    """
    boot = nearest_bs_clustering(channels)
    ds0 = build_decoding_structure(channels, boot, mode, q=q, p_max=p_max)
    inst = build_gap(channels, ds0, max_bs_per_message, max_messages_per_bs)
    clustering = solve_gap(inst)
    ds = build_decoding_structure(channels, clustering, mode, q=q, p_max=p_max)
    return clustering, ds
