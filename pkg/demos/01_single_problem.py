"""Fit every estimator on one synthetic problem and compare held-out entropy.

    python demos/01_single_problem.py
"""
import numpy as np

from icereg import LogisticModel, ProblemSpec, aic, entropy_estimate, make_problem, tic
from icereg.experiments import ESTIMATORS, fit_estimator

model = LogisticModel()
problem = make_problem(ProblemSpec(p=10, m=4, n_train=500, seed=1))
print(f"truth: {np.round(problem.theta0, 3)}")
print(f"discarded draws before acceptance: {problem.discarded_attempts}")

h0 = entropy_estimate(model, problem.test, problem.theta0)
print(f"\nentropy of the truth on {problem.test.n} test rows: {h0:.5f}\n")

fits = {name: fit_estimator(name, model, problem.train, seed=1) for name in ESTIMATORS}
h_mle = entropy_estimate(model, problem.test, fits["mle"].theta)
print(f"{'estimator':>9}  {'H_test':>9}  {'vs MLE':>10}  {'lambda':>8}  iters")
for name, fit in fits.items():
    h = entropy_estimate(model, problem.test, fit.theta)
    lam = "" if fit.lambda_ is None else f"{fit.lambda_:.1e}"
    print(f"{name:>9}  {h:9.5f}  {h - h_mle:+10.2e}  {lam:>8}  {fit.iters}")

# at the MLE the trace correction sits near p when the model is right
mle = fits["mle"].theta
a, t = aic(model, problem.train, mle), tic(model, problem.train, mle)
print(f"\nAIC correction {a.correction:.3f}, TIC correction {t.correction:.3f}")
