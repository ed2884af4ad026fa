"""Behavioural aircraft-category classification from surveillance state vectors.

The package ingests state-vector CSV dumps, segments them into flights,
builds quantile-binned behavioural feature vectors, analyses feature
quality, trains four classifier families, and labels unknown aircraft with
calibrated confidence. See the README for the CLI walkthrough.
"""

__version__ = "0.1.0"
