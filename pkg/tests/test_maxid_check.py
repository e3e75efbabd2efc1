import numpy as np
import pytest
from scipy.stats import kstest

from maxidspatial.distributions import HougaardParams
from maxidspatial.errors import DomainError
from maxidspatial.maxid_check import (
    delta_stat,
    rectangle_experiment,
    reference_table,
    sample_bilogistic,
    sample_binormal,
)
from maxidspatial.process import joint_cdf


class TestDeltaStat:
    def test_independence_copula_is_zero(self, rng):
        for _ in range(100):
            a = np.sort(rng.uniform(size=2))
            b = np.sort(rng.uniform(size=2))
            d = delta_stat(lambda x, y: x * y, (a[0], a[1], b[0], b[1]))
            assert abs(d) < 1e-15

    def test_comonotone_rectangle(self):
        assert delta_stat(lambda x, y: min(x, y), (0.2, 0.8, 0.4, 0.6)) == pytest.approx(
            0.04, abs=1e-12
        )

    def test_model_cdf_is_max_id(self, rng):
        w = rng.dirichlet(np.ones(3), size=2)
        dep = HougaardParams(0.3, 0.25)
        cdf = lambda x, y: joint_cdf([x, y], dep, w)  # noqa: E731
        worst = 0.0
        for _ in range(10_000):
            a = np.sort(rng.uniform(0.05, 5.0, size=2))
            b = np.sort(rng.uniform(0.05, 5.0, size=2))
            worst = min(worst, delta_stat(cdf, (a[0], a[1], b[0], b[1])))
        assert worst >= -1e-12

    def test_unordered_rectangle_rejected(self):
        with pytest.raises(DomainError):
            delta_stat(lambda x, y: x * y, (0.8, 0.2, 0.4, 0.6))


class TestRectangleExperiment:
    def test_comonotone_sample(self, rng):
        t = rng.uniform(size=55)
        sample = np.column_stack([t, t])
        p_pos, d_min = rectangle_experiment(sample, 1000, rng)
        assert p_pos >= 0.9
        assert d_min >= -2.0 / 55

    def test_degenerate_sample_rejected(self, rng):
        with pytest.raises(DomainError):
            rectangle_experiment(np.ones((20, 2)), 100, rng)

    def test_independence_band(self, rng):
        # independent margins: the proportion distribution matches the
        # reference-family independence rows (2.5% quantile around 0.37-0.40)
        p = np.array(
            [rectangle_experiment(rng.uniform(size=(55, 2)), 1000, rng)[0] for _ in range(150)]
        )
        q = np.quantile(p, 0.025)
        assert 0.30 < q < 0.48

    def test_reproducible(self):
        s = sample_bilogistic(0.4, 55, np.random.default_rng(5))
        a = rectangle_experiment(s, 500, np.random.default_rng(9))
        b = rectangle_experiment(s, 500, np.random.default_rng(9))
        assert a == b


class TestBilogistic:
    def test_independence_case(self, rng):
        s = sample_bilogistic(1.0, 100_000, rng)
        u1 = (np.argsort(np.argsort(s[:, 0])) + 0.5) / 1e5
        u2 = (np.argsort(np.argsort(s[:, 1])) + 0.5) / 1e5
        chi = np.mean((u1 > 0.95) & (u2 > 0.95)) / np.mean(u2 > 0.95)
        se = np.sqrt(0.05 * 0.95 / (1e5 * 0.05))
        assert abs(chi - 0.05) < 3.0 * se

    def test_near_comonotone_case(self, rng):
        s = sample_bilogistic(0.05, 100_000, rng)
        u1 = (np.argsort(np.argsort(s[:, 0])) + 0.5) / 1e5
        u2 = (np.argsort(np.argsort(s[:, 1])) + 0.5) / 1e5
        chi = np.mean((u1 > 0.95) & (u2 > 0.95)) / np.mean(u2 > 0.95)
        assert chi > 0.9
        # analytic limit chi = 2 - 2^alpha
        assert chi == pytest.approx(2.0 - 2.0**0.05, abs=0.02)

    def test_unit_frechet_margins(self, rng):
        s = sample_bilogistic(0.3, 10_000, rng)
        for j in range(2):
            ks = kstest(s[:, j], lambda z: np.exp(-1.0 / z)).statistic
            assert ks < 0.02

    def test_binormal_correlation(self, rng):
        s = sample_binormal(-0.7, 50_000, rng)
        assert np.corrcoef(s[:, 0], s[:, 1])[0, 1] == pytest.approx(-0.7, abs=0.02)


class TestReferenceTable:
    def test_logistic_strong_dependence_column(self):
        rng = np.random.default_rng(7)
        rows = reference_table("logistic", [0.05], 55, 1000, 120, rng)
        assert abs(rows[0]["p_pos_q025"] - 0.99) < 0.03
        assert rows[0]["d_min_q05"] > -0.01

    def test_gaussian_negative_dependence_column(self):
        rng = np.random.default_rng(7)
        rows = reference_table("gaussian", [-0.9], 55, 1000, 120, rng)
        assert abs(rows[0]["p_pos_q025"] - 0.48) < 0.05
