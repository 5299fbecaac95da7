"""Trace-penalised maximum likelihood (ICE), information criteria and
the synthetic logistic-regression experiments used to evaluate them."""

from .baselines import CvConfig, MleConfig, SeparationError, cross_validate, fit_l1, fit_l2, fit_mle, fit_penalized
from .criteria import CriterionReport, aic, cross_entropy_and_kl, ric, tic
from .ice import FitConfig, fit_ice, ice_gradient, ice_objective
from .info import (InfoMatrices, PenaltyFunction, QuadraticPenalty, SingularInformationError, empirical_i,
                   empirical_j, information_matrices, penalized_matrices, trace_i_jinv)
from .model import Dataset, LogisticModel, ModelContract, entropy_estimate, predict_prob, sample_log_likelihood, score
from .results import FitResult
from .synthetic import Problem, ProblemSpec, make_problem

__version__ = "0.1.0"
