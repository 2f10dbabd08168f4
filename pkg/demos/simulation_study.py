"""A small replicated simulation study.

Simulates data from the three-level, 86-leaf hierarchy, trains the
embedding network, reduces the hierarchy at SI* = 0.7 and compares GLMs on
the original and reduced groupings. The default is a quick run; pass a
larger replicate count or sample size on the command line for a fuller
picture, e.g. ``python demos/simulation_study.py h_only-poisson 10 200``.
"""
import sys
import time

from hiercat.experiment import ExperimentConfig, run_experiment
from hiercat.simgen import SimConfig, truth_for


def main(name="h_only-gaussian", replicates=3, per_leaf=200):
    sim = SimConfig.from_name(name, per_leaf=per_leaf, seed=2024)
    print(f"scenario {sim.name}: {replicates} datasets x {per_leaf} observations per leaf")
    print(f"true reduced sizes: {truth_for(sim).sizes}")

    start = time.perf_counter()
    report = run_experiment(ExperimentConfig(sim, replicates=replicates, si_star=0.7))
    for run in report.runs:
        print(f"  replicate {run.replicate}: sizes {run.sizes}, retrieved={run.retrieved}, "
              f"AIC {run.aic_h:.1f} -> {run.aic_reduced:.1f}, epochs {run.epochs}")

    s = report.summary()
    print(f"\nretrieval {s['retrieval_pct']:.0f}%, distinct structures {s['structure_count']}, "
          f"AIC wins {s['aic_win_pct']:.0f}%, BIC wins {s['bic_win_pct']:.0f}%, "
          f"RMSE wins {s['rmse_win_pct']:.0f}%  ({time.perf_counter() - start:.0f}s)")


if __name__ == "__main__":
    args = sys.argv[1:]
    main(args[0] if args else "h_only-gaussian",
         int(args[1]) if len(args) > 1 else 3,
         int(args[2]) if len(args) > 2 else 200)
