"""Rate-gap minimization: iterative convexification and the conic solves.

The outer loop alternates closed-form updates of the fractional-programming
auxiliaries (chi), the sparsity reweighting (beta), and the bilinear
operating point (u~, r~) with one interior-point solve of the convexified
subproblem. A candidate iterate is accepted only if it does not increase
the objective, which keeps the recorded trace nonincreasing; the loop stops
when the objective change falls below eps_conv * (1 + |psi|).

With the difference-of-convex fronthaul ("dc" mode) the cap is pre-tightened
by delta_zero/(delta + delta_zero) so that the counted-support fronthaul is
exactly feasible at the end; a final support-restricted phase with the plain
linear fronthaul then removes the slack conservatism. Mechanisms that keep
the clustering fixed call the "linear" mode directly.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from ..errors import SolverError, UsageError
from ..model import ChannelState, DemandProfile
from ..rsma import (Beamformers, Clustering, DecodingStructure, RateAllocation,
                    mrt_beamformers, realized_clustering, stream_gains)
from ._barrier import solve_barrier
from ._problem import RATE_SCALE, Structure, Subproblem, linearized_fronthaul_terms

__all__ = [
    "SolverState", "init_beamformers", "compute_chi", "compute_beta",
    "update_chi", "update_beta", "qt_gap_private", "qt_gap_common",
    "build_subproblem", "solve_subproblem", "rate_gap_minimization",
    "linearized_fronthaul_terms", "RATE_SCALE",
]

DELTA_FACTOR = 1e-8          # l0 regularizer, relative to the power budget
DELTA_ZERO_FACTOR = 1e-6     # block-counting threshold, relative to the budget
EPS_CONV = 1e-5
MAX_ITERS = 100
_ACCEPT_SLACK = 1e-10
_GAP_REL = 1e-8


@dataclass
class SolverState:
    """Solution bundle in SI units, plus the iteration bookkeeping."""

    w: Beamformers
    rates: RateAllocation
    gamma_p: np.ndarray                  # (K,)
    gamma_c: dict                        # (i, k) -> value
    u: dict                              # (b, k, o) -> slack value
    chi_p: np.ndarray                    # (K,) complex
    chi_c: dict                          # (i, k) -> complex
    beta: dict                           # (b, k, o) -> weight
    u_tilde: dict                        # (b, k, o) -> operating point
    r_tilde: dict                        # (k, o) -> operating point
    delta: float
    delta_zero: float
    psi: float                           # (bit/s)^2
    psi_trace: np.ndarray                # accepted objective values, (bit/s)^2
    converged: bool
    iterations: int
    subsolves: list = field(default_factory=list)   # per-solve stats dicts
    violations: list = field(default_factory=list)  # max relative violation per iterate
    clustering: Clustering | None = None
    ds: DecodingStructure | None = None

    def solver_cost(self) -> float:
        """Sum over subproblem solves of n_variables^3.5 (interior-point proxy)."""
        return float(sum(s["n_vars"] ** 3.5 for s in self.subsolves))


# ---------------------------------------------------------------------------
# closed-form auxiliary updates (SI units, public)
# ---------------------------------------------------------------------------

def compute_chi(w: Beamformers, channels: ChannelState, ds: DecodingStructure):
    """Optimal quadratic-transform auxiliaries for the current beamformers.

    chi_p[k] = (w_k^p)^H h_k / (sigma^2 + private interference + undecoded
    common power); chi_c[(i, k)] likewise with the successive-decoding
    interference set of message i at user k.
    """
    K = channels.num_users
    sigma2 = channels.noise_power
    H = channels.aggregate_all()
    Ap = H.conj() @ w.aggregate_all("p").T       # [k, j] = h_k^H w_j^p
    Ac = H.conj() @ w.aggregate_all("c").T
    Gp, Gc = np.abs(Ap) ** 2, np.abs(Ac) ** 2
    chi_p = np.zeros(K, dtype=complex)
    for k in range(K):
        den = sigma2 + Gp[k].sum() - Gp[k, k]
        den += sum(Gc[k, l] for l in range(K) if l not in ds.decodes[k])
        chi_p[k] = np.conj(Ap[k, k]) / den
    chi_c = {}
    for i in range(K):
        for k in ds.decoders[i]:
            den = sigma2 + Gp[k].sum()
            den += sum(Gc[k, l] for l in ds.common_interferers(i, k))
            chi_c[(i, k)] = np.conj(Ac[k, i]) / den
    return chi_p, chi_c


def qt_gap_private(k: int, w: Beamformers, gamma: float, chi: complex,
                   channels: ChannelState, ds: DecodingStructure) -> float:
    """g^p = gamma - 2 Re{chi a} + |chi|^2 (sigma^2 + interference)."""
    H = channels.aggregate_all()
    a = np.vdot(H[k], w.aggregate_all("p")[k])
    Gp, Gc = stream_gains(w, channels)
    den = channels.noise_power + Gp[k].sum() - Gp[k, k]
    den += sum(Gc[k, l] for l in range(channels.num_users)
               if l not in ds.decodes[k])
    return float(gamma - 2.0 * np.real(chi * a) + abs(chi) ** 2 * den)


def qt_gap_common(i: int, k: int, w: Beamformers, gamma: float, chi: complex,
                  channels: ChannelState, ds: DecodingStructure) -> float:
    """g^c analog of qt_gap_private for common message i decoded at user k."""
    if i not in ds.decodes[k]:
        raise UsageError(f"user {k} does not decode common message {i}")
    H = channels.aggregate_all()
    a = np.vdot(H[k], w.aggregate_all("c")[i])
    Gp, Gc = stream_gains(w, channels)
    den = channels.noise_power + Gp[k].sum()
    den += sum(Gc[k, l] for l in ds.common_interferers(i, k))
    return float(gamma - 2.0 * np.real(chi * a) + abs(chi) ** 2 * den)


def compute_beta(w: Beamformers, delta: float) -> dict:
    """Reweighting factors 1 / (delta + ||w_{b,k}^o||^2) for every block."""
    K, B = w.num_users, w.w_p.shape[1]
    beta = {}
    for b in range(B):
        for k in range(K):
            beta[(b, k, "p")] = 1.0 / (delta + float(np.sum(np.abs(w.w_p[k, b]) ** 2)))
            beta[(b, k, "c")] = 1.0 / (delta + float(np.sum(np.abs(w.w_c[k, b]) ** 2)))
    return beta


def update_chi(state: SolverState, channels: ChannelState,
               ds: DecodingStructure) -> SolverState:
    chi_p, chi_c = compute_chi(state.w, channels, ds)
    return replace(state, chi_p=chi_p, chi_c=chi_c)


def update_beta(state: SolverState) -> SolverState:
    return replace(state, beta=compute_beta(state.w, state.delta))


def init_beamformers(channels: ChannelState, clustering: Clustering,
                     strategy: str, p_max: np.ndarray, seed: int = 0) -> Beamformers:
    """Power-feasible starting beamformers (maximum ratio or seeded random)."""
    p_max = np.asarray(p_max, dtype=float)
    if strategy == "MRT":
        return mrt_beamformers(channels, clustering, p_max)
    if strategy != "random":
        raise UsageError(f"unknown init strategy {strategy!r}")
    rng = np.random.default_rng(seed)
    B, K, L = channels.num_bs, channels.num_users, channels.antennas_per_bs
    w_p = np.zeros((K, B, L), complex)
    w_c = np.zeros((K, B, L), complex)
    for b in range(B):
        streams = [(k, "p") for k in clustering.served_private(b)]
        streams += [(k, "c") for k in clustering.served_common(b)]
        if not streams:
            continue
        share = p_max[b] / len(streams)
        for k, kind in streams:
            v = rng.standard_normal(L) + 1j * rng.standard_normal(L)
            v *= np.sqrt(share) / np.linalg.norm(v)
            (w_p if kind == "p" else w_c)[k, b] = v
    return Beamformers(w_p, w_c)


# ---------------------------------------------------------------------------
# engine helpers (internal scaled representation)
# ---------------------------------------------------------------------------

def _chi_scaled(struct: Structure, xw: np.ndarray) -> np.ndarray:
    """Closed-form chi per QT row: conj(a) / D in noise-normalized units."""
    x = np.zeros(struct.n)
    x[:struct.nw] = xw
    v = struct.R @ xw
    vre, vim = v[0::2], v[1::2]
    pw = vre ** 2 + vim ** 2
    a = vre[struct.qt_num_pair] + 1j * vim[struct.qt_num_pair]
    D = 1.0 + struct.qt_mask @ pw
    return np.conj(a) / D


def _beta_blocks(struct: Structure, xw: np.ndarray) -> np.ndarray:
    x = np.zeros(struct.n)
    x[:struct.nw] = xw
    return 1.0 / (struct.delta + struct.block_power(x))


def _make_start(sp: Subproblem, xw: np.ndarray, r_hint: np.ndarray,
                u_floor: np.ndarray | None = None):
    """Strictly feasible start (and, in dc mode, the matching operating point).

    Returns (x0, u_tilde, r_tilde); the caller must construct the Subproblem
    with exactly these operating points so the start lies at the touching
    point of the linearized fronthaul.
    """
    st = sp.s
    x = np.zeros(st.n)
    x[:st.nw] = xw
    # strict power interior
    for b in st.bs_active:
        idx = st.bs_w_idx[b]
        pw = float(np.sum(x[idx] ** 2))
        if pw >= st.p_max[b] * (1.0 - 1e-9):
            x[idx] *= np.sqrt(st.p_max[b] * (1.0 - 1e-8) / pw)
    sur = sp.surrogate(x)
    if np.any(sur <= 0.0):
        raise SolverError("operating point gives a nonpositive surrogate",
                          iterate=x)
    gam = sur * (1.0 - 1e-6)
    x[st.ng_offset:] = gam
    # rate caps per QT row; a stream's start rate obeys all its decoders
    cap_rows = st.tau * np.log1p(gam) / np.log(2.0)
    cap = np.full(st.nr, np.inf)
    np.minimum.at(cap, st.qt_rate_cols - st.nw, cap_rows)
    des_s = st.des[[s.owner for s in st.streams]] if st.nr else np.zeros(0)
    r0 = np.minimum(np.minimum(r_hint, des_s), (1.0 - 1e-7) * cap)
    r0 = np.maximum(r0, 1e-12 * np.maximum(cap, 1e-9))
    if st.mode == "dc":
        bp = st.block_power(x)
        u0 = sp.beta * bp * (1.0 + 1e-9) + 1e-15
        if u_floor is not None:
            u0 = np.maximum(u0, u_floor)
        # touching point: fronthaul LHS is sum(u0 * r0) per BS; scale r down
        scale = 1.0
        for i, b in enumerate(st.fthl_bs):
            ids = st.bs_blocks[b]
            lhs = float(np.sum(u0[ids] * r0[st.block_stream[ids]]))
            if lhs > sp.c_cap[b] * (1.0 - 1e-9):
                scale = min(scale, sp.c_cap[b] * (1.0 - 1e-8) / lhs)
        r0 = r0 * scale
        x[st.block_u_idx] = u0
        u_tilde, r_tilde = u0.copy(), r0.copy()
    else:
        scale = 1.0
        for i, b in enumerate(st.fthl_bs):
            members = np.unique(st.block_stream[st.bs_blocks[b]])
            lhs = float(np.sum(r0[members]))
            if lhs > sp.c_cap[b] * (1.0 - 1e-9):
                scale = min(scale, sp.c_cap[b] * (1.0 - 1e-8) / lhs)
        r0 = r0 * scale
        u_tilde = r_tilde = None
    x[st.nw:st.nw + st.nr] = r0
    return x, u_tilde, r_tilde


def _true_rate_violation(sp: Subproblem, x: np.ndarray) -> float:
    """Max relative excess of allocated rates over the true achievable rates."""
    st = sp.s
    vre, vim, pw = sp._pairs(x)
    D = 1.0 + st.qt_mask @ pw
    gamma_true = pw[st.qt_num_pair] / D
    ach = st.tau * np.log1p(gamma_true) / np.log(2.0)
    r_rows = x[st.qt_rate_cols]
    return float(np.max((r_rows - ach) / np.maximum(ach, 1e-12), initial=0.0))


def _counted_fronthaul_violation(st: Structure, x: np.ndarray) -> float:
    bp = st.block_power(x)
    worst = 0.0
    for b in st.fthl_bs:
        ids = st.bs_blocks[b]
        counted = ids[bp[ids] > st.delta_zero]
        usage = float(np.sum(x[st.nw + st.block_stream[counted]]))
        worst = max(worst, (usage - st.c_max[b]) / st.c_max[b])
    return worst


def _power_violation(st: Structure, x: np.ndarray) -> float:
    worst = 0.0
    for b in st.bs_active:
        pw = float(np.sum(x[st.bs_w_idx[b]] ** 2))
        worst = max(worst, (pw - st.p_max[b]) / st.p_max[b])
    return worst


def _solve_phase(struct, x_w, r_cur, trace, subsolves, violations, psi_inc,
                 eps_conv, iter_budget, u_prev=None, accept_first=False):
    """Run chi/beta/operating-point updates + subproblem solves on one
    structure until convergence, a rejected candidate, or the budget is hit.

    In dc mode, convergence additionally requires the counted-support
    fronthaul to be consistent: the reweighting weights lag the beamformers
    by one iteration, so the objective can stall while blocks are still
    being squeezed out, and stopping there would leave a support pattern
    whose exact fronthaul usage overshoots the cap.

    With accept_first, the first candidate is accepted even if it increases
    the objective; the support-restricted refine uses this because its
    feasible set contains every rate-trim of the incumbent, so this step is
    never worse than the cheapest way of restoring exact feasibility.

    Returns (x_best, psi_inc, iters_used, converged).
    """
    st = struct
    x_best = None
    converged = False
    iters = 0
    delta_psi = None
    gap = _GAP_REL * max(1.0, st.psi_scale)
    while iters < iter_budget:
        iters += 1
        chi = _chi_scaled(st, x_w)
        if st.mode == "dc":
            beta = _beta_blocks(st, x_w)
            q = st.delta_zero / (st.delta + st.delta_zero)
            sp = Subproblem(st, chi, beta=beta, u_tilde=np.zeros(st.n_blocks),
                            r_tilde=np.zeros(st.nr), c_cap=st.c_max * q)
        else:
            sp = Subproblem(st, chi)
        try:
            x0, u_t, r_t = _make_start(sp, x_w, r_cur, u_floor=u_prev)
        except SolverError:
            break
        if st.mode == "dc":
            sp = Subproblem(st, chi, beta=beta, u_tilde=u_t, r_tilde=r_t,
                            c_cap=st.c_max * q)
        if psi_inc is None:
            psi_inc = sp.psi(x0)
            trace.append(psi_inc)
        # warm starts: once iterates barely move, begin the barrier near its end
        t0 = None
        if delta_psi is not None:
            m = sp.num_constraints
            t0 = min(max(1.0, m / max(4.0 * delta_psi, 10.0 * gap)), m / gap)
        xs, stats = solve_barrier(sp, x0, gap, t0=t0)
        psi_cand = sp.psi(xs)
        subsolves.append({"phase": st.mode, "n_vars": st.n,
                          "n_constraints": sp.num_constraints,
                          "newton_steps": stats["newton_steps"]})
        unconditional = accept_first and iters == 1
        if (psi_cand > psi_inc + _ACCEPT_SLACK * max(1.0, abs(psi_inc))
                and not unconditional):
            break                      # no further certified descent
        delta_psi = abs(psi_inc - psi_cand)
        psi_inc = psi_cand
        x_best = xs
        x_w = xs[:st.nw].copy()
        r_cur = st.rates_from(xs)
        if st.mode == "dc":
            u_prev = xs[st.block_u_idx].copy()
        trace.append(psi_inc)
        counted_viol = _counted_fronthaul_violation(st, xs)
        violations.append(max(_power_violation(st, xs), counted_viol,
                              _true_rate_violation(sp, xs)))
        if delta_psi < eps_conv * (1.0 + abs(psi_inc)):
            if st.mode != "dc" or counted_viol <= 1e-6:
                converged = True
                break
    return x_best, psi_inc, iters, converged


def _state_from_solution(struct, x, channels, demand, trace, subsolves,
                         violations, converged, iterations, clustering, ds,
                         delta, delta_zero):
    st = struct
    K, B = st.K, st.B
    sigma2 = channels.noise_power
    if x is None:
        x = np.zeros(st.n)
    w_p, w_c = st.unpack_w(x)
    w = Beamformers(w_p, w_c)
    r_int = st.rates_from(x)
    r_p, r_c = np.zeros(K), np.zeros(K)
    for j, s in enumerate(st.streams):
        (r_p if s.kind == "p" else r_c)[s.owner] = r_int[j] * RATE_SCALE
    # clamp at the demand: exceeding a target only wastes resources
    total = r_p + r_c
    over = total > demand.r_des
    if np.any(over):
        shrink = np.where(over, demand.r_des / np.maximum(total, 1e-300), 1.0)
        r_p, r_c = r_p * shrink, r_c * shrink
    rates = RateAllocation(r_p=r_p, r_c=r_c)

    gamma_p = np.zeros(K)
    gamma_c, chi_c_d = {}, {}
    chi_p = np.zeros(K, complex)
    chi_rows = _chi_scaled(st, x[:st.nw]) / np.sqrt(sigma2)
    gam_rows = x[st.ng_offset:]
    for row, (j, k) in enumerate(st.qt_list):
        s = st.streams[j]
        if s.kind == "p":
            gamma_p[s.owner] = gam_rows[row]
            chi_p[s.owner] = chi_rows[row]
        else:
            gamma_c[(s.owner, k)] = float(gam_rows[row])
            chi_c_d[(s.owner, k)] = complex(chi_rows[row])
    u_d, ut_d, rt_d = {}, {}, {}
    if st.mode == "dc" and st.n_blocks:
        for i in range(st.n_blocks):
            s = st.streams[st.block_stream[i]]
            u_d[(int(st.block_bs[i]), s.owner, s.kind)] = float(x[st.block_u_idx[i]])
    for j, s in enumerate(st.streams):
        rt_d[(s.owner, s.kind)] = float(r_int[j] * RATE_SCALE)
    psi = float(np.mean((rates.total() - demand.r_des) ** 2))
    return SolverState(
        w=w, rates=rates, gamma_p=gamma_p, gamma_c=gamma_c, u=u_d,
        chi_p=chi_p, chi_c=chi_c_d, beta=compute_beta(w, delta),
        u_tilde=ut_d, r_tilde=rt_d, delta=delta, delta_zero=delta_zero,
        psi=psi, psi_trace=np.array(trace) * RATE_SCALE ** 2,
        converged=converged, iterations=iterations, subsolves=subsolves,
        violations=violations, clustering=clustering, ds=ds,
    )


def rate_gap_minimization(channels: ChannelState, ds: DecodingStructure,
                          clustering: Clustering, demand: DemandProfile,
                          init: Beamformers, *, p_max, c_max,
                          fronthaul: str = "dc", rate_hint: RateAllocation | None = None,
                          eps_conv: float = EPS_CONV, max_iters: int = MAX_ITERS,
                          delta: float | None = None,
                          delta_zero: float | None = None) -> SolverState:
    """Iterative rate-gap minimization from a power-feasible starting point.

    fronthaul="dc" runs the sparsity-reweighted difference-of-convex phase
    and then refines on the realized support with the exact per-BS fronthaul;
    "linear" keeps the given clustering fixed (mechanism-2 style solves).
    """
    p_ref = float(np.max(p_max))
    delta = DELTA_FACTOR * p_ref if delta is None else delta
    delta_zero = DELTA_ZERO_FACTOR * p_ref if delta_zero is None else delta_zero

    trace, subsolves, violations = [], [], []
    struct = Structure(channels, ds, clustering, demand, p_max, c_max,
                       "dc" if fronthaul == "dc" else "linear", delta, delta_zero)
    if struct.n_streams == 0:
        psi0 = struct.psi_of_rates(np.zeros(0))
        return _state_from_solution(struct, None, channels, demand,
                                    [psi0], subsolves, violations, True, 0,
                                    clustering, ds, delta, delta_zero)

    x_w = struct.pack_w(init)
    x_w = _ensure_live_numerators(struct, x_w, channels, clustering, p_max)
    owners = np.array([s.owner for s in struct.streams], int)
    if rate_hint is not None:
        r_cur = np.array([(rate_hint.r_p if s.kind == "p" else rate_hint.r_c)[s.owner]
                          for s in struct.streams]) / RATE_SCALE
    else:
        r_cur = struct.des[owners].copy()

    x_best, psi_inc, it1, conv = _solve_phase(
        struct, x_w, r_cur, trace, subsolves, violations, None, eps_conv,
        max_iters)
    iterations = it1
    final_struct, final_x = struct, x_best

    if fronthaul == "dc" and x_best is not None:
        # restrict to the realized support and drop the slack machinery
        w_p, w_c = struct.unpack_w(x_best)
        support = realized_clustering(Beamformers(w_p, w_c), delta_zero)
        support.serves_p &= clustering.serves_p
        support.serves_c &= clustering.serves_c
        struct2 = Structure(channels, ds, support, demand, p_max, c_max,
                            "linear", delta, delta_zero)
        if struct2.n_streams:
            x_w2 = struct2.pack_w(Beamformers(w_p, w_c))
            r_map = {(s.owner, s.kind): struct.rates_from(x_best)[j]
                     for j, s in enumerate(struct.streams)}
            r_cur2 = np.array([r_map.get((s.owner, s.kind), 0.0)
                               for s in struct2.streams])
            x_best2, psi_inc, it2, conv2 = _solve_phase(
                struct2, x_w2, r_cur2, trace, subsolves, violations, psi_inc,
                eps_conv, max(1, max_iters - iterations), accept_first=True)
            iterations += it2
            if x_best2 is not None:
                final_struct, final_x = struct2, x_best2
                conv = conv2 or conv

    return _state_from_solution(final_struct, final_x, channels, demand, trace,
                                subsolves, violations, conv, iterations,
                                clustering, ds, delta, delta_zero)


def _ensure_live_numerators(struct: Structure, x_w: np.ndarray, channels,
                            clustering, p_max) -> np.ndarray:
    """Blend in a maximum-ratio component when some live stream has a (near)
    zero signal at its own decoder, which would make the QT surrogate vanish."""
    x_probe = np.zeros(struct.n)
    x_probe[:struct.nw] = x_w
    v = struct.R @ x_w
    pw = v[0::2] ** 2 + v[1::2] ** 2
    num = pw[struct.qt_num_pair]
    if np.all(num > 1e-18):
        return x_w
    w_p, w_c = struct.unpack_w(x_probe)
    mrt = mrt_beamformers(channels, clustering, np.asarray(p_max, float))
    blend = Beamformers(0.9 * w_p + 0.1 * mrt.w_p, 0.9 * w_c + 0.1 * mrt.w_c)
    return struct.pack_w(blend)


# ---------------------------------------------------------------------------
# single-subproblem entry points
# ---------------------------------------------------------------------------

@dataclass
class ConvexSubproblem:
    """One assembled convex subproblem plus its strictly feasible start."""

    sp: Subproblem
    x0: np.ndarray
    channels: ChannelState
    demand: DemandProfile

    @property
    def num_variables(self) -> int:
        return self.sp.num_variables


def build_subproblem(state: SolverState, channels: ChannelState,
                     ds: DecodingStructure, clustering: Clustering,
                     demand: DemandProfile, *, p_max, c_max,
                     fronthaul: str = "dc") -> ConvexSubproblem:
    """Assemble the convex program around the state's beamformers.

    chi, beta, and the operating point are refreshed from the state's
    beamformers (their closed-form/feasible values), matching one iteration
    of the outer loop.
    """
    delta, delta_zero = state.delta, state.delta_zero
    struct = Structure(channels, ds, clustering, demand, p_max, c_max,
                       "dc" if fronthaul == "dc" else "linear", delta, delta_zero)
    if struct.n_streams == 0:
        raise SolverError("no live streams: nothing to optimize")
    x_w = struct.pack_w(state.w)
    chi = _chi_scaled(struct, x_w)
    r_hint = np.array([(state.rates.r_p if s.kind == "p" else state.rates.r_c)[s.owner]
                       for s in struct.streams]) / RATE_SCALE
    if struct.mode == "dc":
        beta = _beta_blocks(struct, x_w)
        q = struct.delta_zero / (struct.delta + struct.delta_zero)
        sp = Subproblem(struct, chi, beta=beta, u_tilde=np.zeros(struct.n_blocks),
                        r_tilde=np.zeros(struct.nr), c_cap=struct.c_max * q)
        x0, u_t, r_t = _make_start(sp, x_w, r_hint)
        sp = Subproblem(struct, chi, beta=beta, u_tilde=u_t, r_tilde=r_t,
                        c_cap=struct.c_max * q)
    else:
        sp = Subproblem(struct, chi)
        x0, _, _ = _make_start(sp, x_w, r_hint)
    return ConvexSubproblem(sp=sp, x0=x0, channels=channels, demand=demand)


def solve_subproblem(csp: ConvexSubproblem):
    """Solve one assembled subproblem; returns (w, rates, u, gamma, psi_SI)."""
    sp, st = csp.sp, csp.sp.s
    gap = _GAP_REL * max(1.0, st.psi_scale)
    x, _ = solve_barrier(sp, csp.x0, gap)
    w_p, w_c = st.unpack_w(x)
    w = Beamformers(w_p, w_c)
    K = st.K
    r_p, r_c = np.zeros(K), np.zeros(K)
    r_int = st.rates_from(x)
    for j, s in enumerate(st.streams):
        (r_p if s.kind == "p" else r_c)[s.owner] = r_int[j] * RATE_SCALE
    u = {}
    if st.mode == "dc":
        for i in range(st.n_blocks):
            s = st.streams[st.block_stream[i]]
            u[(int(st.block_bs[i]), s.owner, s.kind)] = float(x[st.block_u_idx[i]])
    gamma = {}
    gam_rows = x[st.ng_offset:]
    for row, (j, k) in enumerate(st.qt_list):
        s = st.streams[j]
        key = s.owner if s.kind == "p" else (s.owner, k)
        gamma[key] = float(gam_rows[row])
    psi = sp.psi(x) * RATE_SCALE ** 2
    return w, RateAllocation(r_p=r_p, r_c=r_c), u, gamma, psi
