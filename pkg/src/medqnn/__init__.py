"""Simulators, models and experiment harness for small hybrid
quantum-classical image classifiers (continuous-variable Gaussian,
discrete-variable qubit, and a same-size classical control)."""

__version__ = "0.1.0"
