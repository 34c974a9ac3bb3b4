"""Outage detection and the four recovery mechanisms, run by the event loop.

The mechanisms escalate in effort and recovery quality:
  1 rate adaption        -- keep the beamformers, re-fit the allocated rates
  2 beamformer adaption  -- re-optimize beamformers on the frozen clustering
  3 cluster adaption     -- re-assign BSs from the post-outage channels, then
                            proceed like mechanism 2
  4 comprehensive        -- cold restart of the whole pipeline

Completion times are cumulative along the chain, so the recovery component
of the resilience metric is nonincreasing in the mechanism index. By default
times come from a deterministic interior-point complexity proxy
(coeff * sum(iterations * n_vars^3.5)) so runs are machine independent;
timing="measured" uses wall-clock seconds instead.
"""
from __future__ import annotations

import csv
import time
from dataclasses import dataclass, field

import numpy as np

from .clustering import cluster_and_structure
from .errors import ConfigurationError
from .metrics import (ResilienceReport, ResilienceWeights, absorption,
                      adaption, mse_gap)
from .model import ChannelState, DemandProfile, apply_outage
from .optimizer import SolverState, init_beamformers, rate_gap_minimization
from .rsma import (Beamformers, Clustering, DecodingStructure, RateAllocation,
                   achievable_rates, realized_clustering)

DEFAULT_PROXY_COEFF = 1e-9     # seconds per n_vars^3.5 unit
TRACE_COLUMNS = ("time_s", "event", "psi", "throughput_bps", "e_abs", "e_ada",
                 "e_rec", "e_total", "mechanism_id")


@dataclass
class TraceRecord:
    time_s: float
    event: str
    psi: float
    throughput_bps: float
    e_abs: float
    e_ada: float
    e_rec: float
    e_total: float
    mechanism_id: int
    rates: np.ndarray = None


@dataclass
class EventTrace:
    records: list = field(default_factory=list)

    def add(self, rec: TraceRecord):
        if self.records and rec.time_s <= self.records[-1].time_s:
            rec.time_s = np.nextafter(self.records[-1].time_s, np.inf)
        self.records.append(rec)

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(TRACE_COLUMNS)
            for r in self.records:
                wr.writerow([repr(r.time_s), r.event, repr(r.psi),
                             repr(r.throughput_bps), repr(r.e_abs),
                             repr(r.e_ada), repr(r.e_rec), repr(r.e_total),
                             r.mechanism_id])


@dataclass
class Network:
    """Everything the mechanisms need besides the evolving solution."""

    demand: DemandProfile
    mode: str
    p_max: np.ndarray
    c_max: np.ndarray
    max_bs_per_message: int = 2
    max_messages_per_bs: int = 0       # 0 -> defaults to 2K
    q_decoders: int = 2

    def messages_cap(self, K: int) -> int:
        return self.max_messages_per_bs or 2 * K


def initial_solve(channels: ChannelState, net: Network) -> SolverState:
    """Cold-start pipeline: decoding sets, assignment, then the full solver."""
    clustering, ds = cluster_and_structure(
        channels, net.mode, net.p_max, net.max_bs_per_message,
        net.messages_cap(channels.num_users), q=net.q_decoders)
    w0 = init_beamformers(channels, clustering, "MRT", net.p_max)
    state = rate_gap_minimization(channels, ds, clustering, net.demand, w0,
                                  p_max=net.p_max, c_max=net.c_max)
    state.clustering, state.ds = clustering, ds
    return state


def detect_outage(solution: SolverState, channels_post: ChannelState,
                  ds: DecodingStructure, eps: float) -> list:
    """Users whose post-failure achievable total drops more than eps below
    their allocated total."""
    ach = achievable_rates(solution.w, channels_post, ds,
                           drop_dead_decoders=True)
    gap = solution.rates.total() - ach.total()
    return [int(k) for k in np.flatnonzero(gap > eps)]


def mech1_rate_adaption(solution: SolverState, channels_post: ChannelState,
                        ds: DecodingStructure) -> RateAllocation:
    """Clamp every allocated stream rate at its new achievable value.

    Beamformers stay fixed. Fully outaged decoders are dropped from the
    common-rate minimum (they cannot decode anything and their own streams
    are zero); allocations already below the new achievable rate are kept,
    never raised.
    """
    ach = achievable_rates(solution.w, channels_post, ds,
                           drop_dead_decoders=True)
    dead = [channels_post.user_is_dead(k) for k in range(channels_post.num_users)]
    r_p = np.minimum(solution.rates.r_p, ach.r_p)
    r_c = np.minimum(solution.rates.r_c, ach.r_c)
    r_p[dead] = 0.0
    r_c[dead] = 0.0
    return RateAllocation(r_p=r_p, r_c=r_c)


def _project_onto(w: Beamformers, clustering: Clustering) -> Beamformers:
    out = w.copy()
    out.w_p[~clustering.serves_p.T] = 0.0
    out.w_c[~clustering.serves_c.T] = 0.0
    return out


def mech2_beamformer_adaption(solution: SolverState, channels_post: ChannelState,
                              ds: DecodingStructure, clustering: Clustering,
                              demand: DemandProfile, *, p_max, c_max,
                              rate_hint: RateAllocation | None = None) -> SolverState:
    """Re-optimize the beamformers with the clustering frozen.

    The clustering is pinned to the support the previous solution actually
    used, the fronthaul becomes a plain per-BS rate sum (no slack machinery),
    and the solve warm-starts from the previously feasible solution.
    """
    support = realized_clustering(solution.w, solution.delta_zero)
    support.serves_p &= clustering.serves_p
    support.serves_c &= clustering.serves_c
    w_warm = _project_onto(solution.w, support)
    state = rate_gap_minimization(
        channels_post, ds, support, demand, w_warm, p_max=p_max, c_max=c_max,
        fronthaul="linear",
        rate_hint=rate_hint if rate_hint is not None else solution.rates)
    state.clustering, state.ds = support, ds
    return state


def mech3_cluster_adaption(solution: SolverState, channels_post: ChannelState,
                           demand: DemandProfile, *, mode: str, p_max, c_max,
                           max_bs_per_message: int, max_messages_per_bs: int,
                           q_decoders: int = 2) -> SolverState:
    """Redo the BS-user assignment from the updated channels, then re-optimize.

    Runs the same bootstrap -> assignment -> rebuild pipeline as the initial
    solve (so unchanged channels reproduce the initial clustering exactly),
    then proceeds like mechanism 2: a warm-started solve with the clustering
    frozen and the plain per-BS fronthaul.
    """
    clustering, ds = cluster_and_structure(channels_post, mode, p_max,
                                           max_bs_per_message,
                                           max_messages_per_bs, q=q_decoders)
    w_warm = _project_onto(solution.w, clustering)
    if not np.any(np.abs(w_warm.w_p)) and not np.any(np.abs(w_warm.w_c)):
        w_warm = init_beamformers(channels_post, clustering, "MRT", p_max)
    state = rate_gap_minimization(channels_post, ds, clustering, demand,
                                  w_warm, p_max=p_max, c_max=c_max,
                                  fronthaul="linear")
    state.clustering, state.ds = clustering, ds
    return state


def mech4_comprehensive(channels_post: ChannelState, demand: DemandProfile, *,
                        mode: str, p_max, c_max, max_bs_per_message: int,
                        max_messages_per_bs: int, q_decoders: int = 2) -> SolverState:
    """Full cold restart on the post-outage channels."""
    net = Network(demand=demand, mode=mode, p_max=np.asarray(p_max, float),
                  c_max=np.asarray(c_max, float),
                  max_bs_per_message=max_bs_per_message,
                  max_messages_per_bs=max_messages_per_bs,
                  q_decoders=q_decoders)
    return initial_solve(channels_post, net)


def _throughput(rates: RateAllocation, ach: RateAllocation) -> float:
    return float(np.sum(np.minimum(rates.total(), ach.total())))


def _gap_cost(K: int, B: int) -> float:
    return float((K * B) ** 3.5)


def validate_schedule(schedule) -> list:
    out = []
    last = -np.inf
    for entry in schedule:
        t, p = float(entry[0]), float(entry[1])
        if t <= last:
            raise ConfigurationError(
                "outage schedule times must be strictly increasing "
                "(recovery of one event must finish before the next)")
        if not 0.0 <= p <= 1.0:
            raise ConfigurationError(f"outage probability {p} outside [0, 1]")
        last = t
        out.append((t, p))
    return out


def rates_at_failure(solution: SolverState, channels_post: ChannelState,
                     ds: DecodingStructure) -> RateAllocation:
    """Stream rates still decodable right after the failure, before any
    adaption: each allocated stream rate counts only up to what the new
    channels support (no decoder dropping; nothing has adapted yet)."""
    ach = achievable_rates(solution.w, channels_post, ds)
    return RateAllocation(r_p=np.minimum(solution.rates.r_p, ach.r_p),
                          r_c=np.minimum(solution.rates.r_c, ach.r_c))


def run_event_loop(channels: ChannelState, net: Network, schedule,
                   weights: ResilienceWeights, T_0: float, *,
                   eps: float | None = None, timing: str = "proxy",
                   proxy_coeff: float = DEFAULT_PROXY_COEFF,
                   outage_seed: int = 0, upto: int = 4,
                   early_stop: bool = True):
    """Initial solve plus the detect/remediate cycle over the outage schedule.

    Each event draws a fresh outage mask (with its own severity) on the base
    block-fading channels; recoveries are processed serially. With early_stop
    the chain ends as soon as a mechanism brings every user within eps of its
    demand (the algorithmic behavior); mechanism-comparison experiments pass
    early_stop=False so each mechanism's own result is observed. Returns
    (EventTrace, [ResilienceReport per event], final SolverState).
    """
    schedule = validate_schedule(schedule)
    if eps is None:
        eps = 1e-3 * float(np.min(net.demand.r_des))
    if upto not in (1, 2, 3, 4):
        raise ConfigurationError("upto must select mechanisms 1..4")

    state = initial_solve(channels, net)
    trace = EventTrace()
    ach0 = achievable_rates(state.w, channels, state.ds)
    trace.add(TraceRecord(0.0, "init", state.psi, _throughput(state.rates, ach0),
                          1.0, 1.0, 1.0, 1.0, 0, rates=state.rates.total()))
    reports = []
    demand = net.demand
    K, B = channels.num_users, channels.num_bs

    for j, (t_ev, p) in enumerate(schedule):
        ch_post = apply_outage(channels, p, seed=outage_seed + 7919 * (j + 1))
        usable = rates_at_failure(state, ch_post, state.ds)
        e_abs = absorption(usable.total(), demand)
        report = ResilienceReport(e_abs=e_abs, t_0=t_ev, T_0=T_0)
        trace.add(TraceRecord(t_ev, "outage", mse_gap(usable, demand),
                              float(np.sum(usable.total())), e_abs, e_abs, 1.0,
                              float(weights.lam1 * e_abs + weights.lam2 * e_abs
                                    + weights.lam3), 0, rates=usable.total()))
        affected = detect_outage(state, ch_post, state.ds, eps)
        t_now = t_ev
        if affected:
            for n in range(1, upto + 1):
                wall = time.perf_counter()
                if n == 1:
                    rates = mech1_rate_adaption(state, ch_post, state.ds)
                    state.rates = rates
                    cost = 2.0 * K
                elif n == 2:
                    state = mech2_beamformer_adaption(
                        state, ch_post, state.ds, state.clustering, demand,
                        p_max=net.p_max, c_max=net.c_max, rate_hint=state.rates)
                    cost = state.solver_cost()
                elif n == 3:
                    state = mech3_cluster_adaption(
                        state, ch_post, demand, mode=net.mode, p_max=net.p_max,
                        c_max=net.c_max,
                        max_bs_per_message=net.max_bs_per_message,
                        max_messages_per_bs=net.messages_cap(K),
                        q_decoders=net.q_decoders)
                    cost = state.solver_cost() + _gap_cost(K, B)
                else:
                    state = mech4_comprehensive(
                        ch_post, demand, mode=net.mode, p_max=net.p_max,
                        c_max=net.c_max,
                        max_bs_per_message=net.max_bs_per_message,
                        max_messages_per_bs=net.messages_cap(K),
                        q_decoders=net.q_decoders)
                    cost = state.solver_cost() + _gap_cost(K, B)
                dt = (time.perf_counter() - wall if timing == "measured"
                      else proxy_coeff * cost)
                t_now += dt
                e_ada = adaption(state.rates.total(), demand)
                report.record_mechanism(n, e_ada, t_now, weights)
                trace.add(TraceRecord(
                    t_now, f"mech{n}_done", mse_gap(state.rates, demand),
                    float(np.sum(state.rates.total())), e_abs, e_ada,
                    report.e_rec[n], report.e_total[n], n,
                    rates=state.rates.total()))
                if early_stop and np.all(state.rates.total() >= demand.r_des - eps):
                    break
        # a stopped (or skipped) chain leaves later mechanisms at the last
        # reached state: they would not have run
        last_n = max(report.e_ada, default=0)
        for n in range(last_n + 1, upto + 1):
            e_ada = adaption(state.rates.total(), demand)
            report.record_mechanism(n, e_ada, t_now, weights)
        reports.append(report)
        # base fading stays fixed within the block: the next event draws its
        # own mask (at its own severity) on the unmasked channels
    return trace, reports, state
