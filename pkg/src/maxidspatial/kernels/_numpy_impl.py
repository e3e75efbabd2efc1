"""Pure-numpy kernel implementations (vectorized fallback path).

Every function here has a loop-based twin in ``_numba_impl`` with the same
name, signature, and semantics. Keep the two files in sync; the agreement
test in the suite compares them on shared inputs.

Conventions: all heavy quantities are carried in log space. ``logk`` is the
matrix of log basis weights with shape (n_sites, L); ``sidx`` maps each cell
to its site row. The "nlog CDF" of a distribution is w(z) = -log F(z), which
is the numerically safe representation of both tails.
"""
import numpy as np

from ._quad import GL_NODES, GL_WEIGHTS, N_LEVELS, TAIL_CUTOFF

_XI_GUMBEL = 1e-10  # |xi| below this uses the Gumbel branch


# ---------------------------------------------------------------------------
# positive-stable density: Kanter auxiliary function and panel quadrature
# ---------------------------------------------------------------------------

def log_kanter_a(v, alpha):
    """log a(v) with a(v) = {sin(av)/sin(v)}^{1/(1-a)} sin((1-a)v)/sin(av), v in (0, pi)."""
    v = np.asarray(v, dtype=np.float64)
    one_m = 1.0 - alpha
    return (
        (alpha / one_m) * np.log(np.sin(alpha * v))
        - (1.0 / one_m) * np.log(np.sin(v))
        + np.log(np.sin(one_m * v))
    )


def log_a_table(alpha):
    """Monotone lookup table (u, log a(pi*u) - log a(0)) for panel placement.

    Built once per alpha and shared across a whole vector of density
    evaluations. Below the table's left edge the quadratic expansion
    log a(pi*u) = log a(0) + (alpha/2) (pi*u)^2 + O(u^4) takes over, so the
    inverse is available at every scale. Panel edges only need to be
    approximately right, hence linear interpolation.
    """
    one_m = 1.0 - alpha
    la0 = (alpha / one_m) * np.log(alpha) + np.log(one_m)
    u_tab = np.unique(
        np.concatenate(
            [
                np.geomspace(1e-4, 0.5, 400),
                1.0 - np.geomspace(0.5, 1e-17, 800),
            ]
        )
    )
    dla_tab = np.maximum.accumulate(log_kanter_a(np.pi * u_tab, alpha) - la0)
    return u_tab, dla_tab


def _invert_log_a(delta, alpha, u_tab, dla_tab):
    """Approximate u with log a(pi*u) - log a(0) = delta (>= 0 where solvable)."""
    delta = np.asarray(delta, dtype=np.float64)
    u_small = np.sqrt(np.maximum(delta, 0.0) * (2.0 / alpha)) / np.pi
    d = np.clip(delta, dla_tab[0], dla_tab[-1])
    idx = np.clip(np.searchsorted(dla_tab, d), 1, dla_tab.shape[0] - 1)
    d0 = dla_tab[idx - 1]
    d1 = dla_tab[idx]
    gap = d1 - d0
    frac = np.where(gap > 0.0, (d - d0) / np.where(gap > 0.0, gap, 1.0), 0.0)
    u_interp = u_tab[idx - 1] + frac * (u_tab[idx] - u_tab[idx - 1])
    return np.where(u_small < u_tab[0], u_small, u_interp)


# Geometric ladder of integrand levels g = 2^m for the rising flank and an
# additive ladder for the exponential decay past the peak.
_RISE_LEVELS = np.arange(-45, 1, dtype=np.float64) * np.log(2.0)
_DECAY_STEPS = np.array([0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0, TAIL_CUTOFF])


def _ps_breakpoints(logc, alpha, u_tab, dla_tab):
    """Panel breakpoints in u for integrating a(pi u) exp{-c a(pi u)} over (0,1).

    In g = c*a(pi*u) the integrand is g*exp(-g): it rises over geometric
    scales of g up to the peak at g = 1 and then decays on an additive scale.
    Breakpoints track both regimes; out-of-range levels collapse to
    zero-width panels. Returns (n, n_break), nondecreasing along axis 1.
    """
    logc = np.atleast_1d(np.asarray(logc, dtype=np.float64))
    n = logc.shape[0]
    one_m = 1.0 - alpha
    log_a0 = (alpha / one_m) * np.log(alpha) + np.log(one_m)
    log_g0 = logc + log_a0
    g0 = np.exp(np.minimum(log_g0, 700.0))

    # offsets delta = log a(pi*u) - log a(0) at the target g-levels
    rise_delta = _RISE_LEVELS[None, :] - log_g0[:, None]
    decay_delta = np.where(
        g0[:, None] > 1.0,
        np.log1p(_DECAY_STEPS[None, :] / g0[:, None]),
        np.log1p(_DECAY_STEPS[None, :]) - log_g0[:, None],
    )

    breaks = np.empty((n, 1 + _RISE_LEVELS.shape[0] + _DECAY_STEPS.shape[0]))
    breaks[:, 0] = 0.0
    breaks[:, 1 : 1 + _RISE_LEVELS.shape[0]] = _invert_log_a(
        rise_delta, alpha, u_tab, dla_tab
    )
    breaks[:, 1 + _RISE_LEVELS.shape[0] :] = _invert_log_a(
        decay_delta, alpha, u_tab, dla_tab
    )
    return np.maximum.accumulate(breaks, axis=1)


def _ps_logpdf_series(logx, alpha):
    """Asymptotic tail series; accurate once x^(-alpha) is small.

    f(x) = (1/pi) sum_k (-1)^(k+1) Gamma(k*alpha+1)/k! sin(k*pi*alpha) x^(-k*alpha-1)
    """
    from math import lgamma

    logx = np.atleast_1d(logx)
    lead = np.log(alpha) - lgamma(1.0 - alpha) - (1.0 + alpha) * logx
    corr = np.ones_like(logx)
    log_t1 = lgamma(alpha + 1.0) + np.log(np.sin(np.pi * alpha))
    for k in range(2, 13):
        log_tk = lgamma(k * alpha + 1.0) - lgamma(k + 1.0)
        sk = np.sin(k * np.pi * alpha)
        ratio = np.exp(log_tk - log_t1 - (k - 1.0) * alpha * logx)
        corr += (-1.0) ** (k + 1) * sk * ratio
    return lead + np.log(corr)


# beyond this value of alpha*log(x) the u-grid cannot resolve the integrand
# and the tail series is already at full precision
_SERIES_SWITCH = 4.0 * np.log(10.0)


def ps_logpdf_tab(x, alpha, u_tab, la_tab):
    """``ps_logpdf`` with a precomputed ``log_a_table`` (hot-path form)."""
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    one_m = 1.0 - alpha
    logx = np.log(x)
    in_tail = alpha * logx > _SERIES_SWITCH
    if np.any(in_tail):
        out = np.empty_like(logx)
        out[in_tail] = _ps_logpdf_series(logx[in_tail], alpha)
        if np.any(~in_tail):
            out[~in_tail] = ps_logpdf_tab(x[~in_tail], alpha, u_tab, la_tab)
        return out
    logc = -(alpha / one_m) * logx

    breaks = _ps_breakpoints(logc, alpha, u_tab, la_tab)
    mid = 0.5 * (breaks[:, 1:] + breaks[:, :-1])
    half = 0.5 * (breaks[:, 1:] - breaks[:, :-1])
    # nodes: (n, n_panel, n_gl); clip away from 0/1 so log sin stays finite
    # (zero-width panels drop out through a -inf log weight)
    u = np.clip(
        mid[:, :, None] + half[:, :, None] * GL_NODES[None, None, :], 1e-14, 1.0 - 1e-17
    )
    la = log_kanter_a(np.pi * u, alpha)
    expo = logc[:, None, None] + la
    g = np.exp(np.minimum(expo, 700.0))
    with np.errstate(divide="ignore"):
        logw = np.log(half[:, :, None] * GL_WEIGHTS[None, None, :])
    terms = logw + la - g
    m = np.max(terms, axis=(1, 2))
    log_int = m + np.log(np.sum(np.exp(terms - m[:, None, None]), axis=(1, 2)))
    return np.log(alpha / one_m) - logx / one_m + log_int


def ps_logpdf(x, alpha):
    """Log density of the positive-stable law PS(alpha) (Laplace exp(-s^alpha)).

    Evaluates the single-integral representation of the density by panelled
    Gauss-Legendre quadrature in log space, so extreme tails neither under-
    nor overflow.
    """
    u_tab, la_tab = log_a_table(alpha)
    return ps_logpdf_tab(x, alpha, u_tab, la_tab)


def kanter_log_transform(u, e, alpha):
    """Log of a PS(alpha) draw from a uniform u and a unit exponential e."""
    u = np.asarray(u, dtype=np.float64)
    e = np.asarray(e, dtype=np.float64)
    return ((1.0 - alpha) / alpha) * (log_kanter_a(np.pi * u, alpha) - np.log(e))


# ---------------------------------------------------------------------------
# latent-process marginal / joint distribution pieces
# ---------------------------------------------------------------------------

def _tilted_power_sum(log_s, alpha, theta):
    """(theta + exp(log_s))^alpha - theta^alpha, stable for all magnitudes."""
    if theta == 0.0:
        return np.exp(alpha * log_s)
    logtheta = np.log(theta)
    return theta**alpha * np.expm1(alpha * (np.logaddexp(logtheta, log_s) - logtheta))


def marginal_nlog_cdf_cells(logz, sidx, logk, alpha, theta):
    """w(z) = -log G_s(z) per cell, G_s the one-site latent CDF."""
    lx = (logk[sidx, :] - logz[:, None]) / alpha
    return np.sum(_tilted_power_sum(lx, alpha, theta), axis=1)


def marginal_logpdf_cells(logz, sidx, logk, alpha, theta):
    """Log density of the one-site latent marginal, cellwise."""
    lk = logk[sidx, :]
    lx = (lk - logz[:, None]) / alpha
    w = np.sum(_tilted_power_sum(lx, alpha, theta), axis=1)
    if theta == 0.0:
        log_tx = (alpha - 1.0) * lx
    else:
        log_tx = (alpha - 1.0) * np.logaddexp(np.log(theta), lx)
    terms = log_tx + lk / alpha
    m = np.max(terms, axis=1)
    log_deriv_sum = m + np.log(np.sum(np.exp(terms - m[:, None]), axis=1))
    return -w + log_deriv_sum - (1.0 + 1.0 / alpha) * logz


def marginal_quantile_cells(w, sidx, logk, alpha, theta):
    """Invert w = -log G_s(z) for log z, cellwise.

    Closed form when theta = 0; otherwise a bracketed Newton iteration on
    log z started from the untilted solution.
    """
    w = np.asarray(w, dtype=np.float64)
    if theta == 0.0:
        # w = sum_l K_l / z  =>  log z = log(sum K) - log w
        m = np.max(logk[sidx, :], axis=1)
        logsum = m + np.log(np.sum(np.exp(logk[sidx, :] - m[:, None]), axis=1))
        return logsum - np.log(w)

    t = -np.log(w)  # untilted initial guess
    tlo = t - 2.0
    thi = t + 2.0
    # expand the bracket until it straddles the root (w decreasing in t)
    for _ in range(200):
        need_lo = marginal_nlog_cdf_cells(tlo, sidx, logk, alpha, theta) < w
        need_hi = marginal_nlog_cdf_cells(thi, sidx, logk, alpha, theta) > w
        if not (np.any(need_lo) or np.any(need_hi)):
            break
        tlo = np.where(need_lo, tlo - 4.0, tlo)
        thi = np.where(need_hi, thi + 4.0, thi)

    t = np.clip(t, tlo, thi)
    for _ in range(60):
        lx = (logk[sidx, :] - t[:, None]) / alpha
        wt = np.sum(_tilted_power_sum(lx, alpha, theta), axis=1)
        done = np.abs(wt - w) <= 1e-13 * w
        if np.all(done):
            break
        tlo = np.where(wt > w, np.maximum(tlo, t), tlo)
        thi = np.where(wt < w, np.minimum(thi, t), thi)
        # dw/dt = -sum_l x_l (theta + x_l)^(alpha-1)
        dwdt = -np.sum(
            np.exp(lx + (alpha - 1.0) * np.logaddexp(np.log(theta), lx)), axis=1
        )
        step = (wt - w) / dwdt
        t_new = t - step
        bad = (t_new <= tlo) | (t_new >= thi) | ~np.isfinite(t_new)
        t_new = np.where(bad, 0.5 * (tlo + thi), t_new)
        t = np.where(done, t, t_new)
    return t


def invert_cells(w, sidx, logk, alpha, theta, t0):
    """Fused quantile inversion + marginal log density at the solution.

    Starts the Newton iteration from t0 (e.g. cached values from the
    previous sampler state). Uses log g(z) = log|dw/dt| - t - w(t), the
    chain-rule identity at the root, so the density costs nothing extra.
    Returns (log z, marginal log pdf).
    """
    w = np.asarray(w, dtype=np.float64)
    if theta == 0.0:
        m = np.max(logk[sidx, :], axis=1)
        logsum = m + np.log(np.sum(np.exp(logk[sidx, :] - m[:, None]), axis=1))
        t = logsum - np.log(w)
        return t, np.log(w) - t - w

    t = np.where(np.isfinite(t0), t0, -np.log(w))
    tlo = t - 1.0
    thi = t + 1.0
    span = 2.0
    for _ in range(200):
        need_lo = marginal_nlog_cdf_cells(tlo, sidx, logk, alpha, theta) < w
        need_hi = marginal_nlog_cdf_cells(thi, sidx, logk, alpha, theta) > w
        if not (np.any(need_lo) or np.any(need_hi)):
            break
        tlo = np.where(need_lo, tlo - span, tlo)
        thi = np.where(need_hi, thi + span, thi)
        span *= 2.0

    t = np.clip(t, tlo, thi)
    logtheta = np.log(theta)
    wt = np.full(w.shape, np.nan)
    dwdt = np.full(w.shape, -1.0)
    for _ in range(60):
        lx = (logk[sidx, :] - t[:, None]) / alpha
        wt = np.sum(_tilted_power_sum(lx, alpha, theta), axis=1)
        dwdt = -np.sum(
            np.exp(lx + (alpha - 1.0) * np.logaddexp(logtheta, lx)), axis=1
        )
        done = np.abs(wt - w) <= 1e-13 * w
        if np.all(done):
            break
        tlo = np.where((wt > w) & (t > tlo) & ~done, t, tlo)
        thi = np.where((wt < w) & (t < thi) & ~done, t, thi)
        t_new = t - (wt - w) / dwdt
        bad = (t_new <= tlo) | (t_new >= thi) | ~np.isfinite(t_new)
        t_new = np.where(bad, 0.5 * (tlo + thi), t_new)
        t = np.where(done, t, t_new)
    return t, np.log(-dwdt) - t - wt


def joint_nlog_cdf_many(logz, logk, alpha, theta):
    """w(z) = -log of the joint latent CDF for a batch of points.

    logz has shape (n, D); logk has shape (D, L). Returns (n,).
    """
    logz = np.asarray(logz, dtype=np.float64)
    if logz.ndim == 1:
        logz = logz[None, :]
    # lx: (n, D, L)
    lx = (logk[None, :, :] - logz[:, :, None]) / alpha
    m = np.max(lx, axis=1)
    log_s = m + np.log(np.sum(np.exp(lx - m[:, None, :]), axis=1))
    return np.sum(_tilted_power_sum(log_s, alpha, theta), axis=1)


def log_mix_scale(log_a, logk, alpha):
    """log Y with Y_{t,i} = {sum_l A_{t,l} K_{i,l}^{1/alpha}}^alpha, shape (T, D)."""
    # (T, 1, L) + (1, D, L)
    terms = log_a[:, None, :] + logk[None, :, :] / alpha
    m = np.max(terms, axis=2)
    return alpha * (m + np.log(np.sum(np.exp(terms - m[:, :, None]), axis=2)))


# ---------------------------------------------------------------------------
# GEV / Frechet pieces
# ---------------------------------------------------------------------------

def gev_nlog_cdf_cells(x, mu, sigma, xi):
    """w = -log GEV CDF, cellwise; +inf below and 0 above a bounded support."""
    s = (np.asarray(x, dtype=np.float64) - mu) / sigma
    if abs(xi) < _XI_GUMBEL:
        return np.exp(-s)
    b = 1.0 + xi * s
    w = np.full(s.shape, np.inf if xi > 0 else 0.0)
    ok = b > 0.0
    w[ok] = np.exp(-np.log(b[ok]) / xi)
    return w


def gev_logpdf_cells(x, mu, sigma, xi):
    """GEV log density, cellwise; -inf outside the support."""
    x = np.asarray(x, dtype=np.float64)
    s = (x - mu) / sigma
    if abs(xi) < _XI_GUMBEL:
        return -np.log(sigma) - s - np.exp(-s)
    b = 1.0 + xi * s
    out = np.full(s.shape, -np.inf)
    ok = b > 0.0
    lb = np.log(b[ok])
    out[ok] = -np.log(np.broadcast_to(sigma, s.shape)[ok]) - (1.0 + 1.0 / xi) * lb - np.exp(-lb / xi)
    return out


def gev_quantile_from_nlog_cells(w, mu, sigma, xi):
    """GEV quantile from w = -log u; exact in both tails."""
    w = np.asarray(w, dtype=np.float64)
    if abs(xi) < _XI_GUMBEL:
        return mu - sigma * np.log(w)
    return mu + sigma * np.expm1(-xi * np.log(w)) / xi


def frechet_logpdf_cells(logz, log_scale, alpha):
    """Frechet(scale, 1/alpha) log density from log arguments, cellwise."""
    k = 1.0 / alpha
    r = k * (log_scale - logz)
    return np.log(k) + r - logz - np.exp(r)
