"""Entropy error against the truth as the training set grows.

Each problem keeps its truth and test set; only the training sample changes.
"""
from icereg.experiments import ExperimentConfig, run_converge

config = ExperimentConfig(study="converge", grid=[(10, 4, 500)], problems=5,
                          train_sizes=(500, 2000, 10_000), out_dir="demo_out/converge")
for row in run_converge(config):
    print(f"n={row['n']:>6}  mle {row['delta_mle']:.2e}  l2 {row['delta_l2']:.2e}  ice {row['delta_ice']:.2e}")
