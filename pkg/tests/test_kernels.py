"""Backend agreement: the numba kernels and the numpy fallback must produce
the same numbers on shared inputs (up to reduction order)."""
import numpy as np
import pytest

from maxidspatial.kernels import BACKEND, _numpy_impl as NP

nb = pytest.importorskip("numba")
from maxidspatial.kernels import _numba_impl as NB  # noqa: E402


@pytest.fixture(scope="module")
def shared(rng_seed=99):
    r = np.random.default_rng(rng_seed)
    logk = np.log(r.dirichlet(np.ones(5), size=7))
    return {
        "logk": logk,
        "logz": r.normal(size=60),
        "sidx": r.integers(0, 7, size=60).astype(np.int64),
        "w": np.exp(r.normal(size=60)),
        "log_a": r.normal(size=(9, 5)),
        "logZ": r.normal(size=(20, 7)),
        "x": r.normal(size=40),
        "mu": r.normal(size=40),
        "sigma": np.exp(r.normal(size=40)),
    }


def test_backend_selected():
    assert BACKEND in ("numba", "numpy")


def test_ps_logpdf_agrees(shared):
    x = np.geomspace(1e-5, 1e8, 200)
    for alpha in (0.1, 0.35, 0.5, 0.9):
        a = NB.ps_logpdf(x, alpha)
        b = NP.ps_logpdf(x, alpha)
        # deep-underflow log densities agree relatively, the rest absolutely
        assert np.allclose(a, b, rtol=1e-12, atol=1e-10)


def test_kanter_transform_agrees(shared):
    r = np.random.default_rng(0)
    u, e = r.uniform(size=100), r.exponential(size=100)
    for alpha in (0.2, 0.7):
        assert np.allclose(
            NB.kanter_log_transform(u, e, alpha),
            NP.kanter_log_transform(u, e, alpha),
            rtol=1e-13,
        )


@pytest.mark.parametrize("theta", [0.0, 0.1, 2.0])
def test_marginal_cells_agree(shared, theta):
    s = shared
    for fn in ("marginal_nlog_cdf_cells", "marginal_logpdf_cells"):
        a = getattr(NB, fn)(s["logz"], s["sidx"], s["logk"], 0.3, theta)
        b = getattr(NP, fn)(s["logz"], s["sidx"], s["logk"], 0.3, theta)
        assert np.allclose(a, b, rtol=1e-12, atol=1e-12)


@pytest.mark.parametrize("theta", [0.0, 0.1, 2.0])
def test_quantile_and_inversion_agree(shared, theta):
    s = shared
    a = NB.marginal_quantile_cells(s["w"], s["sidx"], s["logk"], 0.3, theta)
    b = NP.marginal_quantile_cells(s["w"], s["sidx"], s["logk"], 0.3, theta)
    assert np.allclose(a, b, rtol=1e-10, atol=1e-10)
    t0 = np.full(s["w"].shape, np.nan)
    za, ma = NB.invert_cells(s["w"], s["sidx"], s["logk"], 0.3, theta, t0)
    zb, mb = NP.invert_cells(s["w"], s["sidx"], s["logk"], 0.3, theta, t0)
    assert np.allclose(za, zb, rtol=1e-10, atol=1e-10)
    assert np.allclose(ma, mb, rtol=1e-9, atol=1e-9)


def test_joint_and_mixture_agree(shared):
    s = shared
    for theta in (0.0, 0.4):
        assert np.allclose(
            NB.joint_nlog_cdf_many(s["logZ"], s["logk"], 0.3, theta),
            NP.joint_nlog_cdf_many(s["logZ"], s["logk"], 0.3, theta),
            rtol=1e-12,
        )
    assert np.allclose(
        NB.log_mix_scale(s["log_a"], s["logk"], 0.3),
        NP.log_mix_scale(s["log_a"], s["logk"], 0.3),
        rtol=1e-12,
    )


@pytest.mark.parametrize("xi", [0.0, 0.3, -0.3])
def test_gev_cells_agree(shared, xi):
    s = shared
    wa = NB.gev_nlog_cdf_cells(s["x"], s["mu"], s["sigma"], xi)
    wb = NP.gev_nlog_cdf_cells(s["x"], s["mu"], s["sigma"], xi)
    assert np.array_equal(np.isfinite(wa), np.isfinite(wb))
    ok = np.isfinite(wa)
    assert np.allclose(wa[ok], wb[ok], rtol=1e-13)
    da = NB.gev_logpdf_cells(s["x"], s["mu"], s["sigma"], xi)
    db = NP.gev_logpdf_cells(s["x"], s["mu"], s["sigma"], xi)
    both = np.isfinite(da)
    assert np.array_equal(both, np.isfinite(db))
    assert np.allclose(da[both], db[both], rtol=1e-12)
    qa = NB.gev_quantile_from_nlog_cells(s["w"][:40], s["mu"], s["sigma"], xi)
    qb = NP.gev_quantile_from_nlog_cells(s["w"][:40], s["mu"], s["sigma"], xi)
    assert np.allclose(qa, qb, rtol=1e-12)


def test_frechet_cells_agree(shared):
    s = shared
    a = NB.frechet_logpdf_cells(s["x"], s["mu"], 0.4)
    b = NP.frechet_logpdf_cells(s["x"], s["mu"], 0.4)
    assert np.allclose(a, b, rtol=1e-13)


def test_env_var_selection(tmp_path):
    import subprocess
    import sys

    code = (
        "import maxidspatial.kernels as k; print(k.BACKEND)"
    )
    for want in ("numpy", "numba"):
        out = subprocess.run(
            [sys.executable, "-c", code],
            env={"MAXIDSPATIAL_BACKEND": want, "PATH": "/usr/bin:/bin"},
            capture_output=True,
            text=True,
        )
        assert out.stdout.strip() == want
