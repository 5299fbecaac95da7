"""Spread of the ICE estimate relative to the MLE at a fixed truth.

Prints the ratio of covariance traces with a bootstrap interval next to
the reference constant 1/9.
"""
from icereg.experiments import ExperimentConfig, run_variance_ratio

config = ExperimentConfig(study="variance-ratio", grid=[(5, 2, 2000)], replications=100, bootstrap=500,
                          out_dir="demo_out/variance_ratio")
report = run_variance_ratio(config)
print(f"trace ratio {report['trace_ratio']:.4f}  95% CI [{report['ci_low']:.4f}, {report['ci_high']:.4f}]  "
      f"reference {report['reference_c']:.4f}")
