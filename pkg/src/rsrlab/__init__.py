"""Robust subspace recovery lab: planted scale-mixture models, low-degree bounds and detectors."""

__version__ = "0.1.0"
