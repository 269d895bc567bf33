import numpy as np
import pytest

from haardist import fit
from haardist.analytic import beta_density
from haardist.empirics import bin_samples, log_bins
from haardist.errors import DimensionMismatch, DomainError, FitFailed
from haardist.qsim import sample_expectations
from haardist.spectra import Spectrum

SIC4 = Spectrum([(0, 15), ("1/16", 1)])


def model_histogram(spec, gamma, s, m, seed, bins=None):
    rng = np.random.default_rng(seed)
    x = sample_expectations(spec, s, m, rng)
    x = (1 - gamma) * x + gamma * float(spec.mean())
    return bin_samples(x, bins if bins is not None else log_bins())


class TestEffectiveDensity:
    def test_no_noise_reduction(self):
        x = np.linspace(0, 1, 33)
        got = fit.effective_density(x, Spectrum.projector(1, 4), 4, 0.0, 1.0)
        np.testing.assert_allclose(got, beta_density(x, 1, 4, 1), rtol=1e-12)

    def test_uniform_half_noise(self):
        spec = Spectrum.projector(1, 2)
        np.testing.assert_allclose(fit.effective_density([0.3, 0.6], spec, 2, 0.5, 1.0), 2.0)
        np.testing.assert_allclose(fit.effective_density([0.1, 0.9], spec, 2, 0.5, 1.0), 0.0)

    def test_real_s(self):
        got = fit.effective_density(0.2, Spectrum.projector(1, 4), 4, 0.0, 2.5)
        assert got == pytest.approx(beta_density(0.2, 1, 4, 2.5))

    def test_many_eigenvalues_round_s(self):
        spec = Spectrum([(0, 1), ("1/2", 1), (1, 1)])
        a = fit.effective_density(0.4, spec, 3, 0.1, 2.2)
        b = fit.effective_density(0.4, spec, 3, 0.1, 2.0)
        assert a == b

    def test_validation(self):
        spec = Spectrum.projector(1, 4)
        with pytest.raises(DimensionMismatch):
            fit.effective_density(0.1, spec, 8, 0.0, 1.0)
        with pytest.raises(DomainError):
            fit.effective_density(0.1, spec, 4, 1.0, 1.0)
        with pytest.raises(DomainError):
            fit.effective_density(0.1, spec, 4, 0.0, 0.5)


class TestStartGrid:
    def test_clamped_and_unique(self):
        grid = fit.start_grid(2)
        s_values = sorted({s for _, s in grid})
        assert s_values == [1.0, 2.0, 4.0]
        assert len(grid) == 7 * 3

    def test_default(self):
        assert len(fit.start_grid(16)) == 7 * 6


class TestFit:
    def test_round_trip(self):
        hist = model_histogram(SIC4, 0.3, 2, 10**5, seed=1)
        result = fit.fit_effective(hist, SIC4, 16)
        assert result.gamma_eff == pytest.approx(0.3, abs=0.02)
        assert result.s_eff == pytest.approx(2.0, abs=0.2)
        assert result.converged
        assert 0 <= result.objective

    def test_bounds_respected(self):
        hist = model_histogram(SIC4, 0.1, 1, 2000, seed=2)
        result = fit.fit_effective(hist, SIC4, 16, starts=[(0.5, 3.0)])
        (g_lo, g_hi), (s_lo, s_hi) = result.bounds
        assert g_lo <= result.gamma_eff <= g_hi == fit.GAMMA_MAX
        assert s_lo <= result.s_eff <= s_hi == 256

    def test_improves_on_starts(self):
        hist = model_histogram(SIC4, 0.1, 1, 5000, seed=3)
        starts = [(0.0, 1.0), (0.6, 8.0)]
        result = fit.fit_effective(hist, SIC4, 16, starts=starts)
        objective = fit._Objective(hist, SIC4, 16)
        assert all(result.objective <= objective(st) for st in starts)

    def test_scale_free(self):
        hist = model_histogram(SIC4, 0.2, 1, 5000, seed=4)
        doubled = type(hist)(hist.edges, 2 * hist.counts, 2 * hist.underflow, 2 * hist.overflow, 2 * hist.zeros)
        a = fit.fit_effective(hist, SIC4, 16, starts=[(0.1, 2.0)])
        b = fit.fit_effective(doubled, SIC4, 16, starts=[(0.1, 2.0)])
        assert a.gamma_eff == pytest.approx(b.gamma_eff, abs=1e-10)
        assert a.objective == pytest.approx(b.objective, rel=1e-10)

    def test_deterministic(self):
        hist = model_histogram(SIC4, 0.1, 1, 3000, seed=5)
        starts = fit.start_grid(16)[:6]
        assert fit.fit_effective(hist, SIC4, 16, starts=starts) == fit.fit_effective(
            hist, SIC4, 16, starts=starts, workers=3
        )

    def test_point_mass_pushes_noise_up(self):
        hist = bin_samples(np.full(1000, 1 / 256), log_bins())
        result = fit.fit_effective(hist, SIC4, 16)
        assert result.gamma_eff > 0.9

    def test_empty_range(self):
        hist = bin_samples([0.0, 0.0], log_bins())
        with pytest.raises(DomainError):
            fit.fit_effective(hist, SIC4, 16)

    def test_budget_exhaustion_reports_best(self, monkeypatch):
        monkeypatch.setattr(fit, "MAX_EVALUATIONS", 5)
        hist = model_histogram(SIC4, 0.1, 1, 2000, seed=6)
        with pytest.raises(FitFailed) as info:
            fit.fit_effective(hist, SIC4, 16, starts=[(0.5, 5.0)])
        assert info.value.fit.evaluations >= 5
        assert not info.value.fit.converged

    def test_json(self):
        hist = model_histogram(SIC4, 0.1, 1, 2000, seed=7)
        payload = fit.fit_effective(hist, SIC4, 16, starts=[(0.1, 1.0)]).to_json()
        assert {"gamma_eff", "s_eff", "objective", "evaluations", "converged", "start_point", "bounds"} <= set(payload)
