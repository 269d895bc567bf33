import math
from fractions import Fraction

import numpy as np
import pytest

from haardist import analytic
from haardist.analytic import (
    AffineDistribution,
    beta_density,
    beta_moment,
    build_distribution,
    cdf,
    density,
    integrate_density,
    moments_closed_form,
    moments_newton,
    moments_permutation_oracle,
    partition_sum,
    shifted_scaled_density,
)
from haardist.errors import DomainError, OracleTooLarge
from haardist.spectra import Spectrum
from helpers import random_rational_spectrum

TENT = Spectrum([(0, 1), ("1/2", 1), (1, 1)])


class TestBeta:
    def test_uniform(self):
        assert beta_density(0.3, 1, 2, 1) == pytest.approx(1.0, abs=1e-14)

    def test_porter_thomas_at_zero(self):
        assert beta_density(0.0, 1, 5, 1) == pytest.approx(4.0, rel=1e-14)

    def test_mode(self):
        x = np.linspace(0, 1, 100001)
        assert x[np.argmax(beta_density(x, 1, 4, 3))] == pytest.approx(0.2, abs=1e-4)

    def test_domain(self):
        with pytest.raises(DomainError):
            beta_density(1.5, 1, 2)
        with pytest.raises(DomainError):
            beta_density(0.5, 0, 2)

    def test_moments(self):
        assert beta_moment(0, 1, 4) == 1
        assert beta_moment(1, 3, 8, 2) == Fraction(3, 8)
        assert beta_moment(2, 1, 2, 1) == Fraction(1, 3)

    def test_real_s_moment_matches_integer(self):
        assert beta_moment(3, 2, 5, 2.0000000001) == pytest.approx(float(beta_moment(3, 2, 5, 2)), rel=1e-8)


class TestCoefficients:
    def test_tent(self):
        dist = build_distribution(TENT, 1)
        assert [c.value for c in dist.coefficients] == [2, -4, 2]
        assert all(c.l == 0 for c in dist.coefficients)

    @pytest.mark.parametrize("seed", range(8))
    def test_series_matches_partition_sum(self, seed):
        rng = np.random.default_rng(seed)
        spec = random_rational_spectrum(rng)
        if spec.num_distinct < 3:
            spec = Spectrum(list(spec.entries) + [(Fraction(7, 5), 1), (Fraction(-1, 3), 1)])
        s = int(rng.integers(1, 3))
        dist = build_distribution(spec, s)
        values = list(spec.eigenvalues)
        weights = [m * s for m in spec.multiplicities]
        total = sum(weights)
        for c in dist.coefficients:
            j = values.index(c.eigenvalue)
            a = weights[j]
            inner = partition_sum(values, weights, j, c.l, lambda z, l: 1)
            expected = (
                Fraction((-1) ** c.l, 2)
                * Fraction(math.factorial(total - 1), math.factorial(a - c.l - 1) * math.factorial(c.power - 1))
                * inner
            )
            assert c.value == expected


class TestDistribution:
    def test_tent_values(self):
        dist = build_distribution(TENT, 1)
        assert density(dist, 0.5) == pytest.approx(2.0, abs=1e-12)
        assert density(dist, 0.25) == pytest.approx(1.0, abs=1e-12)
        assert cdf(dist, 0.5) == pytest.approx(0.5, abs=1e-12)
        assert cdf(dist, 0.25) == pytest.approx(0.125, abs=1e-12)
        assert dist.exact_density(Fraction(1, 4)) == pytest.approx(1.0, abs=1e-15)

    def test_endpoints(self):
        dist = build_distribution(TENT, 2)
        assert cdf(dist, 0) == 0
        assert cdf(dist, 1) == 1
        with pytest.raises(DomainError):
            density(dist, 1.5)

    def test_zero_at_lower_edge(self):
        dist = build_distribution(Spectrum([(0, 2), (1, 2)]), 1, method="poly")
        assert density(dist, 0.0) == pytest.approx(0.0, abs=1e-12)

    def test_delta(self):
        dist = build_distribution(Spectrum([(Fraction(1, 3), 4)]), 2)
        assert dist.kind == "delta"
        assert density(dist, 1 / 3) == math.inf
        assert cdf(dist, 1 / 3) == 1

    @pytest.mark.parametrize("l, d, s", [(1, 4, 1), (2, 8, 3), (3, 4, 2)])
    def test_poly_path_matches_beta(self, l, d, s):
        spec = Spectrum.projector(l, d)
        poly = build_distribution(spec, s, method="poly")
        x = np.linspace(0, 1, 257)
        np.testing.assert_allclose(poly.pdf(x), beta_density(x, l, d, s), atol=1e-9)
        beta = build_distribution(spec, s)
        np.testing.assert_allclose(poly.cdf(x), beta.cdf(x), atol=1e-9)

    def test_real_s_needs_two_eigenvalues(self):
        assert build_distribution(Spectrum.projector(1, 4), 1.7).kind == "beta"
        with pytest.raises(DomainError):
            build_distribution(TENT, 1.5)

    @pytest.mark.parametrize("seed", range(6))
    def test_normalization_and_monotone_cdf(self, seed):
        rng = np.random.default_rng(100 + seed)
        spec = random_rational_spectrum(rng, max_dim=8)
        dist = build_distribution(spec, int(rng.integers(1, 4)))
        if dist.kind == "delta":
            return
        assert integrate_density(dist) == pytest.approx(1.0, abs=1e-6)
        x = np.linspace(*dist.domain, 2001)
        f = dist.cdf(x)
        assert np.all(np.diff(f) >= -1e-12)
        assert np.all(dist.pdf(x) >= -1e-9)

    def test_float_spectrum(self):
        dist = build_distribution(Spectrum.from_eigenvalues([0.1, 0.35, 0.35, 0.9]), 2)
        assert dist.precision >= analytic.DEFAULT_PRECISION
        assert integrate_density(dist) == pytest.approx(1.0, abs=1e-8)

    def test_quadrature_moments(self):
        spec = Spectrum([(0, 2), ("1/3", 1), ("3/4", 2)])
        dist = build_distribution(spec, 2)
        newton = moments_newton(spec, 2, 6)
        for t in range(1, 7):
            got = integrate_density(dist, lambda x, t=t: x**t)
            assert got == pytest.approx(float(newton[t]), rel=1e-6)

    def test_large_d_exponential_limit(self):
        d = 256
        x = np.linspace(0, 3 / d, 50)
        got = build_distribution(Spectrum.projector(1, d), 1).pdf(x)
        np.testing.assert_allclose(got, d * np.exp(-d * x), rtol=0.05)

    def test_to_json(self):
        payload = build_distribution(TENT, 1).to_json()
        assert payload["kind"] == "poly"
        assert len(payload["coefficients"]) == 3


class TestShiftScale:
    def test_identity(self):
        dist = build_distribution(TENT, 1)
        assert shifted_scaled_density(dist, 0.3, 0, 1) == pytest.approx(density(dist, 0.3))

    def test_uniform_half_noise(self):
        base = build_distribution(Spectrum.projector(1, 2), 1)
        noisy = AffineDistribution.depolarized(base, 0.5)
        assert noisy.domain == (0.25, 0.75)
        np.testing.assert_allclose(noisy.pdf([0.3, 0.5, 0.7]), 2.0)
        np.testing.assert_allclose(noisy.pdf([0.2, 0.8]), 0.0)
        assert shifted_scaled_density(base, 0.5, 0.25, 0.5) == pytest.approx(2.0)

    def test_concentrates(self):
        base = build_distribution(Spectrum.projector(1, 4), 1)
        noisy = AffineDistribution.depolarized(base, 1 - 1e-3)
        lo, hi = noisy.domain
        assert hi - lo == pytest.approx(1e-3)
        assert lo <= 0.25 <= hi

    def test_outside(self):
        base = build_distribution(Spectrum.projector(1, 2), 1)
        with pytest.raises(DomainError):
            shifted_scaled_density(base, 0.9, 0.25, 0.5)


class TestMoments:
    def test_identity_spectrum(self):
        spec = Spectrum([(1, 3)])
        assert list(moments_newton(spec, 2, 4).values) == [1, 1, 1, 1]
        assert list(moments_closed_form(spec, 2, 4).values) == [1, 1, 1, 1]
        assert moments_permutation_oracle(spec, 2, 2) == 1

    def test_projector_matches_beta(self):
        spec = Spectrum.projector(2, 5)
        mc = moments_closed_form(spec, 3, 6)
        for t in range(1, 7):
            assert mc[t] == beta_moment(t, 2, 5, 3)

    def test_mean(self):
        spec = Spectrum([(0, 2), ("1/3", 1), ("3/4", 2)])
        assert moments_newton(spec, 1, 1)[1] == spec.mean()
        assert moments_permutation_oracle(spec, 2, 1) == spec.mean()

    def test_newton_small(self):
        assert moments_newton(Spectrum.projector(1, 2), 1, 2)[2] == Fraction(1, 3)
        assert moments_newton(Spectrum.projector(1, 2), 1, 2)[0] == 1

    def test_oracle_limit(self):
        with pytest.raises(OracleTooLarge):
            moments_permutation_oracle(TENT, 1, 9)

    @pytest.mark.parametrize("seed", range(10))
    def test_three_way_agreement(self, seed):
        rng = np.random.default_rng(seed)
        spec = random_rational_spectrum(rng)
        s = int(rng.integers(1, 4))
        newton = moments_newton(spec, s, 6)
        closed = moments_closed_form(spec, s, 6)
        for t in range(1, 7):
            assert closed[t] == newton[t]
            assert moments_permutation_oracle(spec, s, t) == newton[t]

    def test_float_spectrum_agreement(self):
        spec = Spectrum.from_eigenvalues([0.1, 0.45, 0.45, 0.8])
        newton = moments_newton(spec, 2, 6).as_floats()
        closed = moments_closed_form(spec, 2, 6).as_floats()
        np.testing.assert_allclose(closed, newton, rtol=1e-12)

    def test_real_s_newton(self):
        spec = Spectrum.projector(1, 4)
        got = moments_newton(spec, 2.5, 3).as_floats()
        expected = [beta_moment(t, 1, 4, 2.5) for t in (1, 2, 3)]
        np.testing.assert_allclose(got, expected, rtol=1e-12)

    def test_monotone_for_effects(self):
        spec = Spectrum([(0, 2), ("1/3", 1), ("3/4", 2)])
        vals = [moments_newton(spec, 2, 6)[t] for t in range(7)]
        assert all(a >= b for a, b in zip(vals, vals[1:]))
