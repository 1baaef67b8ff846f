"""Simulation and verification lab for random walks in dynamic random
environments: environment families with regeneration fields, coupled
walks, regeneration-block limit estimators, renormalization diagnostics,
and the statistical batteries that verify the model's checkable
hypotheses."""

__version__ = "0.1.0"
