"""Small Monte-Carlo sweep comparing interference-management baselines.

A scaled-down version of the batch experiments: outage severities on the
x-axis, rate splitting vs treating interference as noise as series, a
handful of trials. Writes the same plot-ready CSVs the CLI produces.
"""
import numpy as np

from rsmacran.harness import Scenario, emit_plot_data, run_sweep

scenario = Scenario(B=4, K=8, trials=4, seed=11,
                    sweep_axis="outage_p", sweep_grid=[0.0, 0.25, 0.5],
                    modes=["RSMA", "TIN"], workers=2,
                    outdir="demo_sweep_out")
tables = run_sweep(scenario)
files = emit_plot_data(tables, scenario.outdir)
print("wrote:", *files, sep="\n  ")

print("\nmean rate-gap MSE in dB rel 1 (Mbps)^2 after mechanism 3:")
print(f"{'outage p':>9} {'RSMA':>8} {'TIN':>8}")
for x in scenario.sweep_grid:
    row = {}
    for a in tables["aggregates"]:
        if a["x"] == x and a["metric"] == "psi_3":
            row[a["series"]] = a.get("mean_db", float("nan"))
    print(f"{x:9.2f} {row.get('RSMA', float('nan')):8.1f} "
          f"{row.get('TIN', float('nan')):8.1f}")

print("\nmean combined resilience per mechanism (RSMA):")
for n in range(1, 5):
    vals = [a["mean"] for a in tables["aggregates"]
            if a["series"] == "RSMA" and a["metric"] == f"e_total_{n}"]
    print(f"  mechanism {n}: " + "  ".join(f"{v:.3f}" for v in vals))

print("\nre-running the emitted manifest reproduces these files byte for "
      "byte; see the acceptance suite.")
