"""Scenario configuration, Monte-Carlo sweeps, and plot-data emission.

A sweep runs grid point x series x trial, where a series is an interference
mode (RSMA / TIN / SCM) or a criticality scheme (mixed / FixHI / FixME /
FixLO). Each trial drops a fresh topology and fading block, solves the
initial allocation, applies one outage event, and runs the recovery chain
with every mechanism evaluated. Aggregates are plain means with normal
95% confidence bands. All randomness derives from the scenario seed, trial
index, and a purpose tag, so a manifest rerun is bit-identical.
"""
from __future__ import annotations

import csv
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import __version__
from .errors import ConfigurationError
from .metrics import ResilienceWeights, mse_gap_db
from .model import (build_demand, default_criticality_counts,
                    generate_channels, generate_topology)
from .resilience import Network, run_event_loop

SWEEP_AXES = ("outage_p", "fronthaul_mbps", "qos_lo_mbps")
CRITICALITY_SCHEMES = ("mixed", "FixHI", "FixME", "FixLO")


def dbm_to_watt(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


@dataclass
class Scenario:
    """One experiment description; field names mirror the config-file keys."""

    B: int = 6
    K: int = 14
    L: int = 2
    area_side_m: float = 800.0
    p_max_dbm: float = 28.0
    c_max_mbps: float = 50.0
    tau_mhz: float = 10.0
    noise_psd_dbm_hz: float = -168.0
    qos_mbps: dict = field(default_factory=lambda: {"HI": 12.0, "ME": 8.0, "LO": 4.0})
    qos_counts: dict | None = None
    mode: str = "RSMA"
    modes: list | None = None                 # sweep series; defaults to [mode]
    criticality_schemes: list | None = None   # defaults to ["mixed"]
    max_bs_per_message: int = 2
    max_messages_per_bs: int = 0              # 0 -> 2K
    q_decoders: int = 2
    weights: tuple = (0.2, 0.4, 0.4)
    T_0_s: float = 20.0
    epsilon_bps: float | None = None
    timing: str = "proxy"
    proxy_coeff: float = 1e-9
    trials: int = 50
    seed: int = 0
    sweep_axis: str = "outage_p"
    sweep_grid: list = field(default_factory=lambda: [0.0, 0.1, 0.2, 0.3, 0.4, 0.5])
    event_p: float = 0.25
    event_time_s: float = 1.0
    mechanisms_upto: int = 4
    workers: int = 1
    outdir: str = "out"

    def __post_init__(self):
        if self.trials < 1:
            raise ConfigurationError("trials must be >= 1")
        if self.sweep_axis not in SWEEP_AXES:
            raise ConfigurationError(f"sweep_axis must be one of {SWEEP_AXES}")
        if not self.sweep_grid:
            raise ConfigurationError("sweep grid must be nonempty")
        counts = self.qos_counts or default_criticality_counts(self.K)
        if sum(counts.values()) != self.K:
            raise ConfigurationError("criticality user counts must sum to K")
        for s in self.criticality_schemes or ["mixed"]:
            if s not in CRITICALITY_SCHEMES:
                raise ConfigurationError(f"unknown criticality scheme {s}")

    # -- unit conversions ---------------------------------------------------

    @property
    def p_max_w(self) -> float:
        return dbm_to_watt(self.p_max_dbm)

    @property
    def tau_hz(self) -> float:
        return self.tau_mhz * 1e6

    @property
    def noise_psd_w(self) -> float:
        return dbm_to_watt(self.noise_psd_dbm_hz)

    def resilience_weights(self) -> ResilienceWeights:
        return ResilienceWeights(*self.weights)

    def manifest(self) -> dict:
        d = asdict(self)
        d["package_version"] = __version__
        d["psi_db_reference"] = "1 (Mbit/s)^2"
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "Scenario":
        data = dict(data)
        data.pop("package_version", None)
        data.pop("psi_db_reference", None)
        data.pop("schedule", None)
        fields = {f for f in cls.__dataclass_fields__}
        unknown = set(data) - fields
        if unknown:
            raise ConfigurationError(f"unknown scenario keys: {sorted(unknown)}")
        sc = cls(**data)
        if sc.weights is not None:
            sc.weights = tuple(sc.weights)
        return sc

    @classmethod
    def from_json(cls, path) -> "Scenario":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def trial_seed(base: int, trial: int, purpose: int) -> int:
    """Deterministic, decorrelated per-trial seeds."""
    return int(np.random.SeedSequence([base, trial, purpose]).generate_state(1)[0])


def scheme_qos(scenario: Scenario, scheme: str, qos_mbps: dict) -> tuple:
    """(per-level rates, counts) for a criticality scheme."""
    counts = scenario.qos_counts or default_criticality_counts(scenario.K)
    if scheme == "mixed":
        return qos_mbps, counts
    level = {"FixHI": "HI", "FixME": "ME", "FixLO": "LO"}[scheme]
    fixed = {lv: qos_mbps[level] for lv in ("HI", "ME", "LO")}
    return fixed, counts


def _grid_parameters(scenario: Scenario, x: float):
    """(outage probability, fronthaul bit/s, qos dict in Mbps) at grid point x."""
    if scenario.sweep_axis == "outage_p":
        return float(x), scenario.c_max_mbps * 1e6, dict(scenario.qos_mbps)
    if scenario.sweep_axis == "fronthaul_mbps":
        return scenario.event_p, float(x) * 1e6, dict(scenario.qos_mbps)
    # qos_lo_mbps: LO = x, ME = 2x, HI = 3x
    return scenario.event_p, scenario.c_max_mbps * 1e6, \
        {"HI": 3.0 * x, "ME": 2.0 * x, "LO": float(x)}


def run_trial(scenario: Scenario, x: float, mode: str, scheme: str,
              trial: int) -> dict:
    """One grid point x series x trial: build, solve, one outage, all mechanisms."""
    p_out, c_bps, qos_mbps = _grid_parameters(scenario, x)
    qos, counts = scheme_qos(scenario, scheme, qos_mbps)
    topo = generate_topology(trial_seed(scenario.seed, trial, 1),
                             B=scenario.B, K=scenario.K, L=scenario.L,
                             area_side=scenario.area_side_m,
                             p_max=scenario.p_max_w, c_max=c_bps,
                             tau=scenario.tau_hz, noise_psd=scenario.noise_psd_w)
    channels = generate_channels(topo, trial_seed(scenario.seed, trial, 2))
    demand = build_demand(scenario.K, {k: v * 1e6 for k, v in qos.items()},
                          counts, seed=trial_seed(scenario.seed, trial, 3))
    net = Network(demand=demand, mode=mode, p_max=topo.p_max, c_max=topo.c_max,
                  max_bs_per_message=scenario.max_bs_per_message,
                  max_messages_per_bs=scenario.max_messages_per_bs,
                  q_decoders=scenario.q_decoders)
    trace, reports, _ = run_event_loop(
        channels, net, [(scenario.event_time_s, p_out)],
        scenario.resilience_weights(), scenario.T_0_s,
        eps=scenario.epsilon_bps, timing=scenario.timing,
        proxy_coeff=scenario.proxy_coeff,
        outage_seed=trial_seed(scenario.seed, trial, 4), early_stop=False,
        upto=scenario.mechanisms_upto)
    rep = reports[0]
    psi_by_mech = {r.mechanism_id: r.psi for r in trace.records
                   if r.event.startswith("mech")}
    row = {
        "x": float(x), "mode": mode, "scheme": scheme, "trial": trial,
        "sum_qos_mbps": float(np.sum(demand.r_des)) / 1e6,
        "psi_init": trace.records[0].psi,
        "throughput_init_bps": trace.records[0].throughput_bps,
        "e_abs": rep.e_abs,
    }
    last_psi = trace.records[0].psi
    for n in range(1, scenario.mechanisms_upto + 1):
        row[f"e_ada_{n}"] = rep.e_ada.get(n, np.nan)
        row[f"e_rec_{n}"] = rep.e_rec.get(n, np.nan)
        row[f"e_total_{n}"] = rep.e_total.get(n, np.nan)
        last_psi = psi_by_mech.get(n, last_psi)
        row[f"psi_{n}"] = last_psi
    return row


def _trial_star(args):
    return run_trial(*args)


def run_sweep(scenario: Scenario) -> dict:
    """All trials of a sweep; returns {'rows': raw per-trial rows,
    'aggregates': long-format aggregate rows, 'manifest': dict}."""
    modes = scenario.modes or [scenario.mode]
    schemes = scenario.criticality_schemes or ["mixed"]
    jobs = [(scenario, x, mode, scheme, t)
            for x in scenario.sweep_grid
            for mode in modes
            for scheme in schemes
            for t in range(scenario.trials)]
    if scenario.workers > 1:
        with ProcessPoolExecutor(max_workers=scenario.workers) as ex:
            rows = list(ex.map(_trial_star, jobs, chunksize=1))
    else:
        rows = [run_trial(*j) for j in jobs]
    rows.sort(key=lambda r: (r["x"], r["mode"], r["scheme"], r["trial"]))
    return {"rows": rows, "aggregates": aggregate(rows),
            "manifest": scenario.manifest()}


def _series_label(row: dict) -> str:
    parts = [row["mode"]]
    if row["scheme"] != "mixed":
        parts.append(row["scheme"])
    return "/".join(parts)


def aggregate(rows: list) -> list:
    """Long-format (x, series, metric, mean, ci95, n) aggregation over trials."""
    metrics = ["psi_init", "e_abs"]
    metrics += [f"{m}_{n}" for m in ("e_total", "e_ada", "e_rec", "psi")
                for n in range(1, 5)]
    groups = {}
    for row in rows:
        key = (row["x"], _series_label(row))
        groups.setdefault(key, []).append(row)
    out = []
    for (x, series), grp in sorted(groups.items()):
        for metric in metrics:
            vals = np.array([g.get(metric, np.nan) for g in grp], dtype=float)
            vals = vals[~np.isnan(vals)]
            if vals.size == 0:
                continue
            mean = float(np.mean(vals))
            ci = float(1.96 * np.std(vals, ddof=1) / np.sqrt(vals.size)) \
                if vals.size > 1 else 0.0
            entry = {"x": x, "series": series, "metric": metric,
                     "mean": mean, "ci95": ci, "n": int(vals.size)}
            if metric.startswith("psi"):
                entry["mean_db"] = mse_gap_db(mean)
            out.append(entry)
    return out


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(header)
        for row in rows:
            wr.writerow([repr(v) if isinstance(v, float) else v
                         for v in (row[h] for h in header)])


def emit_plot_data(tables: dict, outdir) -> list:
    """Write raw rows, per-figure long-format aggregates, and the manifest.

    Returns the list of files written. Aggregate files carry one row per
    (x, series); empty tables still produce a header-only file.
    """
    os.makedirs(outdir, exist_ok=True)
    written = []

    path = os.path.join(outdir, "raw_trials.csv")
    rows = tables["rows"]
    header = list(rows[0].keys()) if rows else ["x", "mode", "scheme", "trial"]
    _write_csv(path, header, rows)
    written.append(path)

    agg = tables["aggregates"]
    for fig, metrics in (("resilience", [f"e_total_{n}" for n in range(1, 5)]),
                         ("mse_db", ["psi_init"] + [f"psi_{n}" for n in range(1, 5)]),
                         ("components", ["e_abs"] + [f"e_ada_{n}" for n in range(1, 5)]
                          + [f"e_rec_{n}" for n in range(1, 5)])):
        path = os.path.join(outdir, f"fig_{fig}.csv")
        sel = [a for a in agg if a["metric"] in metrics]
        out_rows = [{"x": a["x"], "series": f"{a['series']}:{a['metric']}",
                     "mean": a["mean"], "ci95": a["ci95"]} for a in sel]
        _write_csv(path, ["x", "series", "mean", "ci95"], out_rows)
        written.append(path)

    manifest_path = os.path.join(outdir, "manifest.json")
    with open(manifest_path, "w") as fh:
        json.dump(tables["manifest"], fh, indent=2, sort_keys=True)
        fh.write("\n")
    written.append(manifest_path)
    return written


def write_solver_trace(state, path):
    """Per-iteration solver trace: iteration, objective, worst violation."""
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["iteration", "psi", "max_violation"])
        viol = [0.0] + list(state.violations)
        for i, psi in enumerate(state.psi_trace):
            v = viol[i] if i < len(viol) else viol[-1]
            wr.writerow([i, repr(float(psi)), repr(float(v))])


def escalating_schedule(start_p: float = 0.1, step: float = 0.1,
                        stop_p: float = 0.9, spacing_s: float = 1000.0) -> list:
    """The rising-severity protocol: one event per step, widely spaced."""
    out = []
    p = start_p
    t = spacing_s
    while p <= stop_p + 1e-12:
        out.append((t, round(p, 10)))
        p += step
        t += spacing_s
    return out


def run_escalating_trial(scenario: Scenario, run_idx: int) -> list:
    """One full escalating-severity run; returns one summary row per event.

    Each row carries the event severity, the throughput retained at the
    failure, after the chain reached mechanism <= 3, and after the chain
    finished (with early stopping, later mechanisms may not have run)."""
    topo = generate_topology(trial_seed(scenario.seed, run_idx, 1),
                             B=scenario.B, K=scenario.K, L=scenario.L,
                             area_side=scenario.area_side_m,
                             p_max=scenario.p_max_w,
                             c_max=scenario.c_max_mbps * 1e6,
                             tau=scenario.tau_hz,
                             noise_psd=scenario.noise_psd_w)
    channels = generate_channels(topo, trial_seed(scenario.seed, run_idx, 2))
    demand = build_demand(scenario.K,
                          {k: v * 1e6 for k, v in scenario.qos_mbps.items()},
                          scenario.qos_counts,
                          seed=trial_seed(scenario.seed, run_idx, 3))
    net = Network(demand=demand, mode=scenario.mode, p_max=topo.p_max,
                  c_max=topo.c_max,
                  max_bs_per_message=scenario.max_bs_per_message,
                  max_messages_per_bs=scenario.max_messages_per_bs,
                  q_decoders=scenario.q_decoders)
    schedule = escalating_schedule()
    trace, reports, _ = run_event_loop(
        channels, net, schedule, scenario.resilience_weights(), scenario.T_0_s,
        eps=scenario.epsilon_bps, timing=scenario.timing,
        proxy_coeff=scenario.proxy_coeff,
        outage_seed=trial_seed(scenario.seed, run_idx, 5), early_stop=True)
    rows = []
    sum_qos = float(np.sum(demand.r_des))
    event_idx = -1
    for rec in trace.records:
        if rec.event == "outage":
            event_idx += 1
            rows.append({"run": run_idx, "event": event_idx,
                         "p": schedule[event_idx][1], "sum_qos_bps": sum_qos,
                         "throughput_t0_bps": rec.throughput_bps,
                         "throughput_m3_bps": rec.throughput_bps,
                         "throughput_final_bps": rec.throughput_bps,
                         "e_final": rec.e_total})
        elif rec.event.startswith("mech"):
            rows[-1]["throughput_final_bps"] = rec.throughput_bps
            rows[-1]["e_final"] = rec.e_total
            if rec.mechanism_id <= 3:
                rows[-1]["throughput_m3_bps"] = rec.throughput_bps
    return rows


def _escalating_star(args):
    return run_escalating_trial(*args)


def run_escalating(scenario: Scenario, runs: int) -> list:
    """Summary rows over several seeded escalating runs (Monte-Carlo)."""
    jobs = [(scenario, r) for r in range(runs)]
    if scenario.workers > 1:
        with ProcessPoolExecutor(max_workers=scenario.workers) as ex:
            chunks = list(ex.map(_escalating_star, jobs, chunksize=1))
    else:
        chunks = [run_escalating_trial(*j) for j in jobs]
    rows = [row for chunk in chunks for row in chunk]
    rows.sort(key=lambda r: (r["run"], r["event"]))
    return rows
