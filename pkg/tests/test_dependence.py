import numpy as np
import pytest

from maxidspatial.basis import ExpCovParams, GaussianDensityBasisSpec, eval_gaussian_basis
from maxidspatial.dependence import (
    chi_u_analytic,
    chi_u_montecarlo,
    chibar_u_analytic,
    empirical_chi,
    extremal_coefficient,
)
from maxidspatial.distributions import HougaardParams
from maxidspatial.errors import DomainError

EQUAL_PAIR = np.full((2, 2), 0.5)
DISJOINT_PAIR = np.array([[1.0, 0.0], [0.0, 1.0]])


def fig2_gaussian_pair(tau=1.0 / 6.0, s1=0.0, s2=0.25, n_knots=25):
    """The one-dimensional 25-knot configuration at sites 0 and 1/4."""
    knots = np.column_stack([np.linspace(0.0, 1.0, n_knots), np.zeros(n_knots)])
    sites = np.array([[s1, 0.0], [s2, 0.0]])
    return eval_gaussian_basis(sites, GaussianDensityBasisSpec(knots, tau)).weights


class TestChiAnalytic:
    def test_nugget_bounds_chi_below_one(self):
        assert chi_u_analytic(0.9, EQUAL_PAIR, HougaardParams(0.7, 0.0)) < 1.0

    def test_tilted_chi_decays_to_zero(self):
        dep = HougaardParams(0.3, 0.1)
        w = fig2_gaussian_pair()
        assert chi_u_analytic(0.9999, w, dep) < chi_u_analytic(0.99, w, dep)
        assert chi_u_analytic(1.0 - 1e-6, w, dep) < 0.05

    def test_untilted_level_invariance(self):
        # the level form is exactly invariant for the max-stable family
        dep = HougaardParams(0.7, 0.0)
        a = chi_u_analytic(0.9, EQUAL_PAIR, dep, form="level")
        b = chi_u_analytic(0.99, EQUAL_PAIR, dep, form="level")
        c = chi_u_analytic(0.999, EQUAL_PAIR, dep, form="level")
        assert abs(a - b) < 1e-8 and abs(a - c) < 1e-8

    def test_exceedance_form_converges_to_level_form(self):
        dep = HougaardParams(0.7, 0.0)
        lvl = chi_u_analytic(0.9, EQUAL_PAIR, dep, form="level")
        exc = chi_u_analytic(1.0 - 1e-8, EQUAL_PAIR, dep, form="exceedance")
        assert exc == pytest.approx(lvl, abs=1e-6)

    def test_degenerate_u_raises(self):
        with pytest.raises(DomainError):
            chi_u_analytic(1.0 - 1e-13, EQUAL_PAIR, HougaardParams(0.5, 0.0))


class TestChibar:
    def test_exact_independence_is_zero(self):
        val = chibar_u_analytic(0.9, DISJOINT_PAIR, HougaardParams(0.5, 0.0))
        assert val == pytest.approx(0.0, abs=1e-12)

    def test_perfect_dependence_limit(self):
        # comonotone survival: 1 - 2u + min(u,u) = 1 - u, so the ratio is 1
        u = 0.97
        val = 2.0 * np.log(1.0 - u) / np.log(1.0 - 2.0 * u + u) - 1.0
        assert val == pytest.approx(1.0, rel=1e-12)

    def test_untilted_gaussian_config_tends_to_one(self):
        # chibar -> 1 logarithmically for the asymptotically dependent family:
        # 2*log(1-u)/(log chi + log(1-u)) - 1 needs u ~ 1-1e-6 to pass 0.9
        w = fig2_gaussian_pair()
        dep = HougaardParams(0.3, 0.0)
        vals = [chibar_u_analytic(u, w, dep) for u in (0.99, 0.9999, 1.0 - 1e-6)]
        assert np.all(np.diff(vals) > 0.0)
        assert vals[-1] > 0.9

    def test_range(self):
        for u in (0.5, 0.9, 0.99):
            v = chibar_u_analytic(u, EQUAL_PAIR, HougaardParams(0.4, 0.3))
            assert -1.0 <= v <= 1.0


class TestChiMonteCarlo:
    def test_degenerate_basis_prior_matches_analytic(self, rng):
        dep = HougaardParams(0.4, 0.0)
        coords = np.array([[0.0, 0.0], [0.25, 0.0]])
        mc, se = chi_u_montecarlo(
            0.95, coords, dep, ExpCovParams(1e-10, 0.75), 4, 120, rng
        )
        exact = chi_u_analytic(0.95, np.full((2, 4), 0.25), dep)
        assert abs(mc - exact) < max(2.0 * se, 1e-6)

    def test_tilt_ordering_fig2_config(self, rng):
        coords = np.array([[0.0, 0.0], [0.25, 0.0]])
        prior = ExpCovParams(25.0, 0.75)
        mc0, se0 = chi_u_montecarlo(
            0.99, coords, HougaardParams(0.3, 0.0), prior, 15, 1000, rng
        )
        mc1, se1 = chi_u_montecarlo(
            0.99, coords, HougaardParams(0.3, 1.0), prior, 15, 1000, rng
        )
        assert mc0 > mc1 + 2.0 * np.hypot(se0, se1)

    def test_se_scaling_with_draws(self, rng):
        coords = np.array([[0.0, 0.0], [0.25, 0.0]])
        dep = HougaardParams(0.3, 0.1)
        prior = ExpCovParams(25.0, 0.75)
        ratios = []
        for _ in range(3):
            _, se1 = chi_u_montecarlo(0.95, coords, dep, prior, 8, 400, rng)
            _, se2 = chi_u_montecarlo(0.95, coords, dep, prior, 8, 800, rng)
            ratios.append(se2 / se1)
        assert 0.6 < np.mean(ratios) < 0.85

    def test_field_estimator_agrees(self, rng):
        coords = np.array([[0.0, 0.0], [0.25, 0.0]])
        dep = HougaardParams(0.3, 0.0)
        prior = ExpCovParams(25.0, 0.75)
        mc_b, se_b = chi_u_montecarlo(0.95, coords, dep, prior, 15, 400, rng)
        mc_f, se_f = chi_u_montecarlo(
            0.95, coords, dep, prior, 15, 400, rng, method="field", n_field_reps=200_000
        )
        assert abs(mc_b - mc_f) < 3.0 * np.hypot(se_b, se_f) + 0.02


class TestExtremalCoefficient:
    def test_identical_rows(self):
        assert extremal_coefficient(EQUAL_PAIR, 0.5) == pytest.approx(np.sqrt(2.0), rel=1e-12)
        assert extremal_coefficient(EQUAL_PAIR, 0.25) == pytest.approx(2.0**0.25, rel=1e-12)

    def test_disjoint_supports_independent(self):
        assert extremal_coefficient(DISJOINT_PAIR, 0.5) == pytest.approx(2.0, rel=1e-12)

    def test_bounds(self, rng):
        for _ in range(50):
            d = rng.integers(2, 6)
            w = rng.dirichlet(np.ones(4), size=d)
            a = rng.uniform(0.05, 0.95)
            v = extremal_coefficient(w, a)
            assert 1.0 - 1e-12 <= v <= d + 1e-12

    def test_relation_to_chi_limit(self, rng):
        # chi = 2 - theta_2 for the untilted model
        for _ in range(5):
            w = rng.dirichlet(np.ones(3), size=2)
            a = rng.uniform(0.2, 0.8)
            chi_lim = chi_u_analytic(1.0 - 1e-8, w, HougaardParams(a, 0.0))
            assert abs((2.0 - extremal_coefficient(w, a)) - chi_lim) < 1e-4


class TestEmpiricalChi:
    def test_comonotone_data(self, rng):
        t = rng.uniform(size=(60, 1))
        x = np.tile(t, (1, 6))
        coords = rng.uniform(size=(6, 2))
        curve = empirical_chi(x, coords, 0.8, n_bins=3, n_boot=20, rng=rng)
        assert np.allclose(curve.values[np.isfinite(curve.values)], 1.0)

    def test_independent_uniforms(self, rng):
        x = rng.uniform(size=(400, 8))
        coords = rng.uniform(size=(8, 2))
        curve = empirical_chi(x, coords, 0.5, n_bins=4, n_boot=50, rng=rng)
        # under independence chi_u = 1 - u = 0.5
        se = np.nanmax(curve.se)
        assert np.nanmax(np.abs(curve.values - 0.5)) < max(4.0 * se, 0.05)

    def test_model_band_covers_simulated_truth(self, rng):
        # Fig-5-style calibration: simulate from a fixed model; bands from
        # repeated simulation should cover the one observed curve
        from maxidspatial.process import simulate_field
        from test_process import make_model

        w = rng.dirichlet(np.ones(4) * 2.0, size=10)
        coords = rng.uniform(size=(10, 2))
        model = make_model(w, 0.3, 0.05, coords=coords)
        n_bins = 4
        data = simulate_field(model, 50, rng)
        ranks = np.argsort(np.argsort(data.values, axis=0), axis=0)
        obs_curve = empirical_chi(
            (ranks + 0.5) / 50, coords, 0.8, n_bins=n_bins, n_boot=10, rng=rng
        )
        sims = []
        for _ in range(60):
            rep = simulate_field(model, 50, rng)
            rr = np.argsort(np.argsort(rep.values, axis=0), axis=0)
            sims.append(
                empirical_chi((rr + 0.5) / 50, coords, 0.8, n_bins=n_bins, n_boot=1, rng=rng).values
            )
        sims = np.array(sims)
        lo = np.nanpercentile(sims, 2.5, axis=0)
        hi = np.nanpercentile(sims, 97.5, axis=0)
        cover = np.mean((obs_curve.values >= lo) & (obs_curve.values <= hi))
        assert cover >= 0.8
