"""Architecture-level power, area, and performance prediction for
out-of-order CPU designs.

The package combines per-component analytical resource functions with
per-component boosted-tree regressors: each component's regressor learns
power divided by its resource amount, and predictions multiply the two
back together. Alongside the core model it ships pure-ML and analytical
baselines, rotating and leave-domain-out evaluation protocols, a
cross-technology power transfer model, area and cycle-count predictors, a
design-space explorer, and a synthetic data generator used as ground truth
in tests.
"""

__version__ = "0.1.0"
