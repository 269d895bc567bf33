"""Shared generators for the test suite."""

from fractions import Fraction

from haardist.spectra import Spectrum


def random_rational_spectrum(rng, max_dim=6, max_distinct=4, denominator=12):
    """Random spectrum on the grid k/denominator in [0, 1] with dimension <= max_dim."""
    distinct = int(rng.integers(1, min(max_distinct, max_dim) + 1))
    values = rng.choice(denominator + 1, size=distinct, replace=False)
    mults = [1] * distinct
    for i in range(distinct):
        if sum(mults) < max_dim and rng.random() < 0.5:
            mults[i] += 1
    return Spectrum((Fraction(int(v), denominator), m) for v, m in zip(values, mults))
