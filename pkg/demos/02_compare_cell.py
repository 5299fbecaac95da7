"""A small estimator-comparison study on one grid cell.

Writes reports.csv and summary.csv to ``demo_out/compare``. Raise
``replications`` to 100 or more for stable t-statistics.
"""
from icereg.experiments import ExperimentConfig, run_compare

config = ExperimentConfig(grid=[(5, 2, 500)], replications=20, base_seed=7, out_dir="demo_out/compare")
_, summaries = run_compare(config)

print(f"{'estimator':>9}  {'mean delta':>11}  {'t':>7}  R")
for s in summaries:
    t = "n/a" if s.t_stat is None else f"{s.t_stat:7.2f}"
    print(f"{s.estimator:>9}  {s.mean_delta:+11.3e}  {t:>7}  {s.r_effective}")
