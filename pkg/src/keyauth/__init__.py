"""Keystroke-dynamics toolkit: anomaly detectors, classifiers, evaluation, live service."""

__version__ = "0.1.0"
