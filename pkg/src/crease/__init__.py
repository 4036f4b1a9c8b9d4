"""Bayesian career trajectories for Test batsmen: censored hazard model,
Gaussian-process ability prior and a nested-sampling fitter."""

__version__ = "0.1.0"
