"""Sweep the cooperation degree, antenna count, and pilot length.

Reproduces the qualitative trends at desk scale: error rate falls as APs
cooperate with more neighbors, as antennas accumulate better covariance
estimates, and as pilots grow longer.  Writes plot-ready CSVs per axis.

Run: python3 demos/05_sweeps.py [out_dir]     (several minutes)
"""

import sys

from coopdetect.harness import desk_fixture, run_experiment

out_dir = sys.argv[1] if len(sys.argv) > 1 else "sweep_results"
SWEEPS = {
    "coop_degree": (1, 2, 3, 4),
    "M": (8, 16, 32),
    "L": (12, 24, 48),
}

for axis, values in SWEEPS.items():
    cfg = desk_fixture(
        master_seed=271828,
        modes=("cmd",),
        sweep_axis=axis,
        sweep_values=values,
        trials=10,            # demo-sized
        workers=4,
        out_dir=f"{out_dir}/{axis}",
    )
    artifact = run_experiment(cfg)
    print(f"\n=== AER vs {axis} ===")
    for agg in artifact.aggregates:
        bar = "#" * max(1, round(60 * agg["mean_aer"]))
        print(f"  {axis}={agg['axis_value']!s:>4}: {agg['mean_aer']:.3f} "
              f"± {agg['stderr']:.3f}  {bar}")
    print(f"  wrote {out_dir}/{axis}/aer_vs_{axis}.csv")
