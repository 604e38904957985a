"""moldline: soft-sensor toolkit for injection-molding width prediction.

Pipeline: synthetic (or on-disk) cycle records -> descriptor extraction
(order statistics, wavelet peak statistics, texture features) -> feature
selection -> classical regressors and from-scratch neural predictors, all
scored with MSE and R^2 under a seeded, leakage-guarded harness.
"""

__version__ = "0.1.0"
