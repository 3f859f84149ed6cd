"""Numerical laboratory for the noise-induced exit through an unstable
periodic orbit: closed-form cycling profiles, large-deviation minimizers,
Monte Carlo first-exit sampling, and spectral analysis of random Poincare
maps."""

__version__ = "0.1.0"
