"""Batch command-line front end.

Subcommands: solve (single instance), events (recovery chain over an outage
schedule), sweep (grid x trials Monte-Carlo), oracle (brute-force
verification suites). Flags mirror Scenario fields; values from --config
override flags.
"""
from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from .errors import ConfigurationError
from .harness import (Scenario, emit_plot_data, escalating_schedule, run_sweep,
                      run_trial, trial_seed, write_solver_trace)
from .model import build_demand, generate_channels, generate_topology
from .resilience import Network, initial_solve, run_event_loop
from .rsma import fronthaul_usage, power_usage, realized_clustering


def _add_scenario_flags(p: argparse.ArgumentParser):
    p.add_argument("--config", help="JSON scenario file; overrides flags")
    p.add_argument("--B", type=int)
    p.add_argument("--K", type=int)
    p.add_argument("--L", type=int)
    p.add_argument("--area-side-m", dest="area_side_m", type=float)
    p.add_argument("--p-max-dbm", dest="p_max_dbm", type=float)
    p.add_argument("--c-max-mbps", dest="c_max_mbps", type=float)
    p.add_argument("--tau-mhz", dest="tau_mhz", type=float)
    p.add_argument("--noise-psd-dbm-hz", dest="noise_psd_dbm_hz", type=float)
    p.add_argument("--mode", choices=["RSMA", "TIN", "SCM"])
    p.add_argument("--modes", nargs="+")
    p.add_argument("--schemes", dest="criticality_schemes", nargs="+")
    p.add_argument("--qos-mbps", dest="qos_mbps",
                   help="HI:ME:LO rates, e.g. 12:8:4")
    p.add_argument("--weights", help="lambda1:lambda2:lambda3")
    p.add_argument("--T0-s", dest="T_0_s", type=float)
    p.add_argument("--epsilon-bps", dest="epsilon_bps", type=float)
    p.add_argument("--timing", choices=["proxy", "measured"])
    p.add_argument("--trials", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--axis", dest="sweep_axis",
                   choices=["outage_p", "fronthaul_mbps", "qos_lo_mbps"])
    p.add_argument("--grid", dest="sweep_grid", nargs="+", type=float)
    p.add_argument("--event-p", dest="event_p", type=float)
    p.add_argument("--workers", type=int)
    p.add_argument("--outdir")


def _scenario_from(args) -> Scenario:
    overrides = {}
    for key in Scenario.__dataclass_fields__:
        val = getattr(args, key, None)
        if val is not None:
            overrides[key] = val
    if isinstance(overrides.get("qos_mbps"), str):
        hi, me, lo = (float(v) for v in overrides["qos_mbps"].split(":"))
        overrides["qos_mbps"] = {"HI": hi, "ME": me, "LO": lo}
    if isinstance(overrides.get("weights"), str):
        overrides["weights"] = tuple(float(v) for v in
                                     overrides["weights"].split(":"))
    if args.config:
        with open(args.config) as fh:
            overrides.update(json.load(fh))
    return Scenario.from_dict(overrides)


def cmd_solve(args) -> int:
    sc = _scenario_from(args)
    topo = generate_topology(trial_seed(sc.seed, 0, 1), B=sc.B, K=sc.K, L=sc.L,
                             area_side=sc.area_side_m, p_max=sc.p_max_w,
                             c_max=sc.c_max_mbps * 1e6, tau=sc.tau_hz,
                             noise_psd=sc.noise_psd_w)
    channels = generate_channels(topo, trial_seed(sc.seed, 0, 2))
    demand = build_demand(sc.K, {k: v * 1e6 for k, v in sc.qos_mbps.items()},
                          sc.qos_counts, seed=trial_seed(sc.seed, 0, 3))
    net = Network(demand=demand, mode=sc.mode, p_max=topo.p_max,
                  c_max=topo.c_max, max_bs_per_message=sc.max_bs_per_message,
                  max_messages_per_bs=sc.max_messages_per_bs,
                  q_decoders=sc.q_decoders)
    state = initial_solve(channels, net)
    print(f"psi = {state.psi:.6e} (bit/s)^2  "
          f"[{10*np.log10(max(state.psi,1e-300)/1e12):+.2f} dB rel (Mbps)^2]")
    print(f"converged = {state.converged} after {state.iterations} iterations")
    for k in range(sc.K):
        print(f"  user {k:2d} [{demand.criticality[k]}]: "
              f"rate {state.rates.total()[k]/1e6:7.3f} / "
              f"{demand.r_des[k]/1e6:6.2f} Mbps")
    nu = realized_clustering(state.w, state.delta_zero)
    for b in range(sc.B):
        print(f"  BS {b}: power {power_usage(b, state.w)*1e3:7.2f} mW / "
              f"{topo.p_max[b]*1e3:.1f} mW, fronthaul "
              f"{fronthaul_usage(b, nu, state.rates)/1e6:6.2f} / "
              f"{topo.c_max[b]/1e6:.1f} Mbps")
    if args.trace_csv:
        write_solver_trace(state, args.trace_csv)
        print(f"solver trace -> {args.trace_csv}")
    return 0


def cmd_events(args) -> int:
    sc = _scenario_from(args)
    if args.schedule:
        schedule = [(float(t), float(p)) for t, p in
                    (item.split(":") for item in args.schedule.split(","))]
    else:
        schedule = escalating_schedule()
    topo = generate_topology(trial_seed(sc.seed, 0, 1), B=sc.B, K=sc.K, L=sc.L,
                             area_side=sc.area_side_m, p_max=sc.p_max_w,
                             c_max=sc.c_max_mbps * 1e6, tau=sc.tau_hz,
                             noise_psd=sc.noise_psd_w)
    channels = generate_channels(topo, trial_seed(sc.seed, 0, 2))
    demand = build_demand(sc.K, {k: v * 1e6 for k, v in sc.qos_mbps.items()},
                          sc.qos_counts, seed=trial_seed(sc.seed, 0, 3))
    net = Network(demand=demand, mode=sc.mode, p_max=topo.p_max,
                  c_max=topo.c_max, max_bs_per_message=sc.max_bs_per_message,
                  max_messages_per_bs=sc.max_messages_per_bs,
                  q_decoders=sc.q_decoders)
    trace, reports, _ = run_event_loop(
        channels, net, schedule, sc.resilience_weights(), sc.T_0_s,
        eps=sc.epsilon_bps, timing=sc.timing, proxy_coeff=sc.proxy_coeff,
        outage_seed=trial_seed(sc.seed, 0, 4))
    os.makedirs(sc.outdir, exist_ok=True)
    trace_path = os.path.join(sc.outdir, "event_trace.csv")
    trace.write_csv(trace_path)
    with open(os.path.join(sc.outdir, "manifest.json"), "w") as fh:
        json.dump({**sc.manifest(), "schedule": schedule}, fh, indent=2,
                  sort_keys=True)
        fh.write("\n")
    print(f"{len(schedule)} events, trace -> {trace_path}")
    for j, rep in enumerate(reports):
        etot = {n: round(rep.e_total[n], 4) for n in sorted(rep.e_total)}
        print(f"  event {j+1} (p={schedule[j][1]:.1f}): e_abs={rep.e_abs:.4f} "
              f"e={etot}")
    return 0


def cmd_sweep(args) -> int:
    sc = _scenario_from(args)
    if getattr(args, "seed", None) is None and not args.config:
        raise ConfigurationError("--seed is mandatory for sweep")
    tables = run_sweep(sc)
    files = emit_plot_data(tables, sc.outdir)
    for f in files:
        print(f"wrote {f}")
    return 0


def cmd_oracle(args) -> int:
    from . import oracles
    results = oracles.run_all(seed=args.seed if args.seed is not None else 0)
    failed = 0
    for name, ok, detail in results:
        print(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
        failed += 0 if ok else 1
    return 1 if failed else 0


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(
        prog="rsmacran",
        description="Resilient mixed-criticality RSMA resource management")
    sub = ap.add_subparsers(dest="command", required=True)

    p_solve = sub.add_parser("solve", help="solve one scenario instance")
    _add_scenario_flags(p_solve)
    p_solve.add_argument("--trace-csv", help="write per-iteration solver trace")
    p_solve.set_defaults(fn=cmd_solve)

    p_events = sub.add_parser("events", help="run the outage-recovery loop")
    _add_scenario_flags(p_events)
    p_events.add_argument("--schedule",
                          help="comma list of time:probability pairs")
    p_events.set_defaults(fn=cmd_events)

    p_sweep = sub.add_parser("sweep", help="Monte-Carlo sweep")
    _add_scenario_flags(p_sweep)
    p_sweep.set_defaults(fn=cmd_sweep)

    p_oracle = sub.add_parser("oracle", help="run brute-force verification")
    p_oracle.add_argument("--seed", type=int)
    p_oracle.set_defaults(fn=cmd_oracle)

    args = ap.parse_args(argv)
    try:
        return args.fn(args)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
