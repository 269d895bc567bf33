"""Distributions of Haar-random expectation values, noisy brickwork
circuit sampling over POVM sets, and effective global-depolarizing fits."""

__version__ = "0.1.0"
