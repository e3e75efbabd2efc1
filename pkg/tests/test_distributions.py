import numpy as np
import pytest
from scipy.integrate import quad
from scipy.stats import kstest

from maxidspatial.distributions import (
    GevParams,
    HougaardParams,
    StableParams,
    frechet_cdf,
    frechet_logpdf,
    gev_cdf,
    gev_density,
    gev_quantile,
    hougaard_density,
    hougaard_sample,
    hougaard_sample_info,
    laplace_hougaard,
    ps_density,
    ps_sample,
)
from maxidspatial.errors import DomainError


def levy_half_logpdf(x):
    # PS(1/2) is the Levy law with c = 1/2
    return -np.log(2.0 * np.sqrt(np.pi)) - 1.5 * np.log(x) - 1.0 / (4.0 * x)


class TestPositiveStable:
    def test_density_at_one_matches_levy(self):
        expect = np.exp(levy_half_logpdf(1.0))  # ~0.219696
        assert ps_density(1.0, StableParams(0.5)) == pytest.approx(expect, rel=1e-8)

    def test_density_vanishes_at_origin(self):
        assert ps_density(1e-4, StableParams(0.5)) < 1e-300

    def test_levy_closed_form_grid(self):
        x = np.linspace(0.05, 50.0, 400)
        got = ps_density(x, StableParams(0.5))
        assert np.max(np.abs(got - np.exp(levy_half_logpdf(x)))) < 1e-6

    @pytest.mark.parametrize("alpha", [0.1, 0.25, 0.7])
    def test_integrates_to_one(self, alpha):
        f = lambda t: ps_density(t, StableParams(alpha))  # noqa: E731
        body, _ = quad(f, 0.0, 1.0, limit=300)
        # tail via x = t^(-1/alpha), which regularizes the x^(-1-alpha) decay
        tail, _ = quad(
            lambda t: f(t ** (-1.0 / alpha)) * t ** (-1.0 / alpha - 1.0) / alpha,
            1e-280,
            1.0,
            limit=300,
        )
        assert body + tail == pytest.approx(1.0, abs=1e-6)

    def test_domain_error(self):
        with pytest.raises(DomainError):
            ps_density(-1.0, StableParams(0.5))
        with pytest.raises(DomainError):
            StableParams(1.0)

    def test_sampler_ks_against_levy_cdf(self, rng):
        from scipy.special import erfc

        draws = ps_sample(StableParams(0.5), 100_000, rng)
        # Levy(c=1/2) distribution function
        cdf = lambda x: erfc(np.sqrt(1.0 / (2.0 * x)) / np.sqrt(2.0))  # noqa: E731
        assert kstest(draws, cdf).statistic < 0.01

    def test_sampler_ks_against_quadrature_cdf(self, rng):
        draws = ps_sample(StableParams(0.5), 20_000, rng)
        grid = np.quantile(draws, np.linspace(0.02, 0.98, 25))
        cdf_vals = np.array(
            [quad(lambda t: ps_density(t, StableParams(0.5)), 0, g, limit=200)[0] for g in grid]
        )
        emp = np.searchsorted(np.sort(draws), grid, side="right") / draws.shape[0]
        assert np.max(np.abs(emp - cdf_vals)) < 0.01

    def test_sampler_laplace_transform(self, rng):
        draws = ps_sample(StableParams(0.7), 100_000, rng)
        v = np.exp(-draws)
        se = v.std(ddof=1) / np.sqrt(v.shape[0])
        assert abs(v.mean() - np.exp(-1.0)) < 3.0 * se

    def test_concentration_near_one_as_alpha_grows(self, rng):
        draws = ps_sample(StableParams(0.99), 20_000, rng)
        assert 0.5 < np.median(draws) < 2.0

    def test_reproducible(self):
        a = ps_sample(StableParams(0.3), 100, np.random.default_rng(7))
        b = ps_sample(StableParams(0.3), 100, np.random.default_rng(7))
        assert np.array_equal(a, b)


class TestHougaard:
    def test_theta_zero_identical_code_path(self):
        x = np.geomspace(0.1, 20.0, 50)
        a = hougaard_density(x, HougaardParams(0.6, 0.0))
        b = ps_density(x, StableParams(0.6))
        assert np.array_equal(a, b)

    def test_integrates_to_one_tilted(self):
        p = HougaardParams(0.7, 0.1)
        f = lambda t: hougaard_density(t, p)  # noqa: E731
        body, _ = quad(f, 0.0, 1.0, limit=300)
        tail, _ = quad(lambda u: f(1.0 / u) / u**2, 1e-12, 1.0, limit=300)
        assert body + tail == pytest.approx(1.0, abs=1e-6)

    def test_tilting_factor_cancels_at_x1_theta1(self):
        # theta^alpha = 1 at theta = 1, so exp(-theta x + theta^alpha) = 1 at x = 1
        got = hougaard_density(1.0, HougaardParams(0.5, 1.0))
        assert got == pytest.approx(ps_density(1.0, StableParams(0.5)), rel=1e-12)

    def test_laplace_values(self):
        p = HougaardParams(0.5, 0.1)
        assert laplace_hougaard(0.0, p) == 1.0
        assert laplace_hougaard(1.0, HougaardParams(0.5, 0.0)) == pytest.approx(
            np.exp(-1.0), rel=1e-12
        )
        assert laplace_hougaard(1.0, p) == pytest.approx(
            np.exp(-(1.1**0.5 - 0.1**0.5)), rel=1e-12
        )

    def test_rejection_theta_zero_single_pass(self, rng):
        draws, total = hougaard_sample_info(HougaardParams(0.4, 0.0), 5000, rng)
        assert total == 5000
        v = np.exp(-draws)
        se = v.std(ddof=1) / np.sqrt(v.shape[0])
        assert abs(v.mean() - np.exp(-1.0)) < 4.0 * se

    def test_rejection_iteration_count(self, rng):
        n = 10_000
        _, total = hougaard_sample_info(HougaardParams(0.7, 0.1), n, rng)
        expect = np.exp(0.1**0.7)
        # iterations per draw are geometric with mean exp(theta^alpha)
        se = np.sqrt(expect * (expect - 1.0) / n)
        assert abs(total / n - expect) < 3.0 * se

    def test_sampler_matches_laplace_sim6_setting(self, rng):
        p = HougaardParams(0.25, 0.1)
        draws = hougaard_sample(p, 100_000, rng)
        for s in (0.5, 1.0, 2.0):
            v = np.exp(-s * draws)
            se = v.std(ddof=1) / np.sqrt(v.shape[0])
            assert abs(v.mean() - laplace_hougaard(s, p)) < 3.0 * se

    @pytest.mark.parametrize(
        "alpha,theta",
        [(0.1, 0.0), (0.25, 0.0), (0.1, 1e-4), (0.25, 1e-4), (0.1, 0.1), (0.25, 0.1)],
    )
    def test_sampler_laplace_grid(self, alpha, theta, rng):
        p = HougaardParams(alpha, theta)
        draws = hougaard_sample(p, 100_000, rng)
        with np.errstate(over="ignore"):
            for s in (0.25, 0.5, 1.0, 2.0, 4.0):
                v = np.exp(-s * np.minimum(draws, 1e300))
                se = v.std(ddof=1) / np.sqrt(v.shape[0])
                assert abs(v.mean() - laplace_hougaard(s, p)) < 3.0 * se


class TestGev:
    def test_gumbel_median(self):
        assert gev_quantile(0.5, GevParams(0, 1, 0)) == pytest.approx(
            -np.log(np.log(2.0)), rel=1e-12
        )

    @pytest.mark.parametrize("xi", [0.0, 0.4, -0.4, 1e-12])
    def test_quantile_cdf_roundtrip(self, xi):
        p = GevParams(1.3, 0.7, xi)
        u = np.linspace(0.01, 0.99, 99)
        assert np.max(np.abs(gev_cdf(gev_quantile(u, p), p) - u)) < 1e-12

    def test_unit_frechet_special_case(self):
        p = GevParams(1.0, 1.0, 1.0)
        assert gev_cdf(1.0, p) == pytest.approx(np.exp(-1.0), rel=1e-12)
        z = np.array([0.5, 2.0, 7.0])
        assert np.allclose(gev_cdf(z, p), np.exp(-1.0 / z), rtol=1e-12)

    def test_outside_support(self):
        p = GevParams(0.0, 1.0, 0.5)  # support z > -2
        assert gev_cdf(-3.0, p) == 0.0
        assert gev_density(-3.0, p) == 0.0
        neg = GevParams(0.0, 1.0, -0.5)  # support z < 2
        assert gev_cdf(3.0, neg) == 1.0

    def test_density_matches_fd(self):
        p = GevParams(0.5, 2.0, 0.2)
        z = np.linspace(-2.0, 10.0, 40)
        h = 1e-6
        fd = (gev_cdf(z + h, p) - gev_cdf(z - h, p)) / (2 * h)
        ok = fd > 1e-12
        assert np.max(np.abs(gev_density(z, p)[ok] / fd[ok] - 1.0)) < 1e-6


class TestFrechet:
    def test_cdf_at_scale_point(self):
        for shape in (0.5, 1.0, 4.0):
            assert frechet_cdf(3.0, 3.0, shape) == pytest.approx(np.exp(-1.0), rel=1e-12)

    def test_simple_value(self):
        assert frechet_cdf(2.0, 1.0, 1.0) == pytest.approx(np.exp(-0.5), rel=1e-12)

    def test_pdf_matches_fd(self):
        z = np.geomspace(0.3, 8.0, 30)
        h = 1e-6
        fd = (frechet_cdf(z + h, 1.3, 2.0) - frechet_cdf(z - h, 1.3, 2.0)) / (2 * h)
        got = np.exp(frechet_logpdf(z, 1.3, 2.0))
        assert np.max(np.abs(got / fd - 1.0)) < 1e-6

    def test_nonpositive_argument(self):
        assert frechet_cdf(-1.0, 1.0, 2.0) == 0.0
        assert frechet_logpdf(0.0, 1.0, 2.0) == -np.inf
