"""Numba-compiled kernel implementations (hot path).

Loop-based twins of the vectorized functions in ``_numpy_impl`` — same
names, signatures, panel layouts, and tolerances. Keep the two files in
sync; the backend agreement test compares them on shared inputs.
"""
import math

import numpy as np
from numba import njit

from ._quad import GL_NODES, GL_WEIGHTS, TAIL_CUTOFF

_XI_GUMBEL = 1e-10

_RISE_LEVELS = np.arange(-45, 1, dtype=np.float64) * np.log(2.0)
_DECAY_STEPS = np.array([0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0, TAIL_CUTOFF])
_N_RISE = _RISE_LEVELS.shape[0]
_N_DECAY = _DECAY_STEPS.shape[0]
_N_BREAK = 1 + _N_RISE + _N_DECAY


@njit(cache=True)
def _log_a_scalar(v, alpha):
    one_m = 1.0 - alpha
    return (
        (alpha / one_m) * np.log(np.sin(alpha * v))
        - (1.0 / one_m) * np.log(np.sin(v))
        + np.log(np.sin(one_m * v))
    )


@njit(cache=True)
def log_kanter_a(v, alpha):
    """log a(v) with a(v) = {sin(av)/sin(v)}^{1/(1-a)} sin((1-a)v)/sin(av), v in (0, pi)."""
    out = np.empty(v.shape[0])
    for i in range(v.shape[0]):
        out[i] = _log_a_scalar(v[i], alpha)
    return out


@njit(cache=True)
def log_a_table(alpha):
    """Monotone lookup table (u, log a(pi*u) - log a(0)) for panel placement.

    Built once per alpha and shared across a whole vector of density
    evaluations; below the left edge the quadratic expansion
    log a(pi*u) = log a(0) + (alpha/2) (pi*u)^2 takes over.
    """
    one_m = 1.0 - alpha
    la0 = (alpha / one_m) * np.log(alpha) + np.log(one_m)

    n1 = 400
    n2 = 800
    u_tab = np.empty(n1 + n2)
    llo = np.log(1e-4)
    lhi = np.log(0.5)
    for i in range(n1):
        u_tab[i] = np.exp(llo + (lhi - llo) * i / (n1 - 1.0))
    glo = np.log(0.5)
    ghi = np.log(1e-17)
    for i in range(n2):
        u_tab[n1 + i] = 1.0 - np.exp(glo + (ghi - glo) * i / (n2 - 1.0))
    u_tab = np.sort(u_tab)

    dla_tab = np.empty(u_tab.shape[0])
    run = -np.inf
    for i in range(u_tab.shape[0]):
        val = _log_a_scalar(np.pi * u_tab[i], alpha) - la0
        if val > run:
            run = val
        dla_tab[i] = run
    return u_tab, dla_tab


@njit(cache=True)
def _invert_log_a_scalar(delta, alpha, u_tab, dla_tab):
    u_small = np.sqrt(max(delta, 0.0) * (2.0 / alpha)) / np.pi
    if u_small < u_tab[0]:
        return u_small
    d = delta
    if d < dla_tab[0]:
        d = dla_tab[0]
    elif d > dla_tab[-1]:
        d = dla_tab[-1]
    idx = np.searchsorted(dla_tab, d)
    if idx < 1:
        idx = 1
    elif idx > dla_tab.shape[0] - 1:
        idx = dla_tab.shape[0] - 1
    gap = dla_tab[idx] - dla_tab[idx - 1]
    frac = (d - dla_tab[idx - 1]) / gap if gap > 0.0 else 0.0
    return u_tab[idx - 1] + frac * (u_tab[idx] - u_tab[idx - 1])


@njit(cache=True)
def _ps_logpdf_series_scalar(logx, alpha):
    # f(x) = (1/pi) sum_k (-1)^(k+1) Gamma(k*alpha+1)/k! sin(k*pi*alpha) x^(-k*alpha-1)
    lead = np.log(alpha) - math.lgamma(1.0 - alpha) - (1.0 + alpha) * logx
    log_t1 = math.lgamma(alpha + 1.0) + np.log(np.sin(np.pi * alpha))
    corr = 1.0
    for k in range(2, 13):
        log_tk = math.lgamma(k * alpha + 1.0) - math.lgamma(k + 1.0)
        sk = np.sin(k * np.pi * alpha)
        ratio = np.exp(log_tk - log_t1 - (k - 1.0) * alpha * logx)
        corr += (-1.0) ** (k + 1) * sk * ratio
    return lead + np.log(corr)


# beyond this value of alpha*log(x) the u-grid cannot resolve the integrand
# and the tail series is already at full precision
_SERIES_SWITCH = 4.0 * np.log(10.0)


@njit(cache=True)
def ps_logpdf_tab(x, alpha, u_tab, dla_tab):
    """``ps_logpdf`` with a precomputed ``log_a_table`` (hot-path form)."""
    one_m = 1.0 - alpha
    la0 = (alpha / one_m) * np.log(alpha) + np.log(one_m)
    n = x.shape[0]
    out = np.empty(n)
    breaks = np.empty(_N_BREAK)
    n_terms = (_N_BREAK - 1) * GL_NODES.shape[0]
    terms = np.empty(n_terms)

    for i in range(n):
        logx = np.log(x[i])
        if alpha * logx > _SERIES_SWITCH:
            out[i] = _ps_logpdf_series_scalar(logx, alpha)
            continue
        logc = -(alpha / one_m) * logx
        log_g0 = logc + la0
        g0 = np.exp(min(log_g0, 700.0))

        breaks[0] = 0.0
        for m in range(_N_RISE):
            breaks[1 + m] = _invert_log_a_scalar(
                _RISE_LEVELS[m] - log_g0, alpha, u_tab, dla_tab
            )
        for j in range(_N_DECAY):
            if g0 > 1.0:
                delta = np.log1p(_DECAY_STEPS[j] / g0)
            else:
                delta = np.log1p(_DECAY_STEPS[j]) - log_g0
            breaks[1 + _N_RISE + j] = _invert_log_a_scalar(
                delta, alpha, u_tab, dla_tab
            )
        for b in range(1, _N_BREAK):
            if breaks[b] < breaks[b - 1]:
                breaks[b] = breaks[b - 1]

        mx = -np.inf
        k = 0
        for b in range(_N_BREAK - 1):
            mid = 0.5 * (breaks[b + 1] + breaks[b])
            half = 0.5 * (breaks[b + 1] - breaks[b])
            if half <= 0.0:  # collapsed level, nothing to integrate
                for q in range(GL_NODES.shape[0]):
                    terms[k] = -np.inf
                    k += 1
                continue
            for q in range(GL_NODES.shape[0]):
                u = mid + half * GL_NODES[q]
                if u < 1e-14:
                    u = 1e-14
                elif u > 1.0 - 1e-17:
                    u = 1.0 - 1e-17
                la = _log_a_scalar(np.pi * u, alpha)
                g = np.exp(min(logc + la, 700.0))
                t = np.log(half * GL_WEIGHTS[q]) + la - g
                terms[k] = t
                if t > mx:
                    mx = t
                k += 1
        s = 0.0
        for k2 in range(n_terms):
            s += np.exp(terms[k2] - mx)
        out[i] = np.log(alpha / one_m) - logx / one_m + mx + np.log(s)
    return out


@njit(cache=True)
def ps_logpdf(x, alpha):
    """Log density of the positive-stable law PS(alpha) (Laplace exp(-s^alpha))."""
    u_tab, dla_tab = log_a_table(alpha)
    return ps_logpdf_tab(x, alpha, u_tab, dla_tab)


@njit(cache=True)
def kanter_log_transform(u, e, alpha):
    """Log of a PS(alpha) draw from a uniform u and a unit exponential e."""
    out = np.empty(u.shape[0])
    r = (1.0 - alpha) / alpha
    for i in range(u.shape[0]):
        out[i] = r * (_log_a_scalar(np.pi * u[i], alpha) - np.log(e[i]))
    return out


# ---------------------------------------------------------------------------
# latent-process marginal / joint distribution pieces
# ---------------------------------------------------------------------------

@njit(cache=True, inline="always")
def _tilted_power_sum_scalar(log_s, alpha, theta, logtheta):
    # (theta + exp(log_s))^alpha - theta^alpha without over/underflow
    if theta == 0.0:
        return np.exp(alpha * log_s)
    return theta**alpha * np.expm1(alpha * (np.logaddexp(logtheta, log_s) - logtheta))


@njit(cache=True)
def marginal_nlog_cdf_cells(logz, sidx, logk, alpha, theta):
    """w(z) = -log G_s(z) per cell, G_s the one-site latent CDF."""
    n = logz.shape[0]
    L = logk.shape[1]
    logtheta = np.log(theta) if theta > 0.0 else -np.inf
    out = np.empty(n)
    for c in range(n):
        i = sidx[c]
        acc = 0.0
        for l in range(L):
            lx = (logk[i, l] - logz[c]) / alpha
            acc += _tilted_power_sum_scalar(lx, alpha, theta, logtheta)
        out[c] = acc
    return out


@njit(cache=True)
def marginal_logpdf_cells(logz, sidx, logk, alpha, theta):
    """Log density of the one-site latent marginal, cellwise."""
    n = logz.shape[0]
    L = logk.shape[1]
    logtheta = np.log(theta) if theta > 0.0 else -np.inf
    out = np.empty(n)
    for c in range(n):
        i = sidx[c]
        w = 0.0
        mx = -np.inf
        for l in range(L):
            lx = (logk[i, l] - logz[c]) / alpha
            w += _tilted_power_sum_scalar(lx, alpha, theta, logtheta)
            if theta == 0.0:
                t = (alpha - 1.0) * lx + logk[i, l] / alpha
            else:
                t = (alpha - 1.0) * np.logaddexp(logtheta, lx) + logk[i, l] / alpha
            if t > mx:
                mx = t
        s = 0.0
        for l in range(L):
            lx = (logk[i, l] - logz[c]) / alpha
            if theta == 0.0:
                t = (alpha - 1.0) * lx + logk[i, l] / alpha
            else:
                t = (alpha - 1.0) * np.logaddexp(logtheta, lx) + logk[i, l] / alpha
            s += np.exp(t - mx)
        out[c] = -w + mx + np.log(s) - (1.0 + 1.0 / alpha) * logz[c]
    return out


@njit(cache=True)
def marginal_quantile_cells(w, sidx, logk, alpha, theta):
    """Invert w = -log G_s(z) for log z, cellwise.

    Closed form when theta = 0; otherwise a bracketed Newton iteration on
    log z started from the untilted solution.
    """
    n = w.shape[0]
    L = logk.shape[1]
    out = np.empty(n)
    if theta == 0.0:
        for c in range(n):
            i = sidx[c]
            mx = -np.inf
            for l in range(L):
                if logk[i, l] > mx:
                    mx = logk[i, l]
            s = 0.0
            for l in range(L):
                s += np.exp(logk[i, l] - mx)
            out[c] = mx + np.log(s) - np.log(w[c])
        return out

    logtheta = np.log(theta)
    for c in range(n):
        i = sidx[c]
        wc = w[c]
        t = -np.log(wc)
        tlo = t - 2.0
        thi = t + 2.0
        for _ in range(200):
            wlo = 0.0
            whi = 0.0
            for l in range(L):
                wlo += _tilted_power_sum_scalar(
                    (logk[i, l] - tlo) / alpha, alpha, theta, logtheta
                )
                whi += _tilted_power_sum_scalar(
                    (logk[i, l] - thi) / alpha, alpha, theta, logtheta
                )
            moved = False
            if wlo < wc:
                tlo -= 4.0
                moved = True
            if whi > wc:
                thi += 4.0
                moved = True
            if not moved:
                break
        if t < tlo:
            t = tlo
        elif t > thi:
            t = thi
        for _ in range(60):
            wt = 0.0
            dwdt = 0.0
            for l in range(L):
                lx = (logk[i, l] - t) / alpha
                wt += _tilted_power_sum_scalar(lx, alpha, theta, logtheta)
                dwdt -= np.exp(lx + (alpha - 1.0) * np.logaddexp(logtheta, lx))
            if abs(wt - wc) <= 1e-13 * wc:
                break
            if wt > wc and t > tlo:
                tlo = t
            elif wt < wc and t < thi:
                thi = t
            t_new = t - (wt - wc) / dwdt
            if not np.isfinite(t_new) or t_new <= tlo or t_new >= thi:
                t_new = 0.5 * (tlo + thi)
            t = t_new
        out[c] = t
    return out


@njit(cache=True)
def invert_cells(w, sidx, logk, alpha, theta, t0):
    """Fused quantile inversion + marginal log density at the solution.

    Starts the Newton iteration from t0 (e.g. cached values from the
    previous sampler state). Uses log g(z) = log|dw/dt| - t - w(t), the
    chain-rule identity at the root, so the density costs nothing extra.
    Returns (log z, marginal log pdf).
    """
    n = w.shape[0]
    L = logk.shape[1]
    logz = np.empty(n)
    mll = np.empty(n)
    if theta == 0.0:
        for c in range(n):
            i = sidx[c]
            mx = -np.inf
            for l in range(L):
                if logk[i, l] > mx:
                    mx = logk[i, l]
            s = 0.0
            for l in range(L):
                s += np.exp(logk[i, l] - mx)
            t = mx + np.log(s) - np.log(w[c])
            logz[c] = t
            # dw/dt = -w exactly in the untilted case
            mll[c] = np.log(w[c]) - t - w[c]
        return logz, mll

    logtheta = np.log(theta)
    for c in range(n):
        wc = w[c]
        i = sidx[c]
        t = t0[c]
        if not np.isfinite(t):
            t = -np.log(wc)
        tlo = t - 1.0
        thi = t + 1.0
        span = 2.0
        for _ in range(200):
            wlo = 0.0
            whi = 0.0
            for l in range(L):
                wlo += _tilted_power_sum_scalar(
                    (logk[i, l] - tlo) / alpha, alpha, theta, logtheta
                )
                whi += _tilted_power_sum_scalar(
                    (logk[i, l] - thi) / alpha, alpha, theta, logtheta
                )
            moved = False
            if wlo < wc:
                tlo -= span
                moved = True
            if whi > wc:
                thi += span
                moved = True
            if not moved:
                break
            span *= 2.0
        if t < tlo:
            t = tlo
        elif t > thi:
            t = thi
        wt = wc
        dwdt = -wc
        for _ in range(60):
            wt = 0.0
            dwdt = 0.0
            for l in range(L):
                lx = (logk[i, l] - t) / alpha
                wt += _tilted_power_sum_scalar(lx, alpha, theta, logtheta)
                dwdt -= np.exp(lx + (alpha - 1.0) * np.logaddexp(logtheta, lx))
            if abs(wt - wc) <= 1e-13 * wc:
                break
            if wt > wc and t > tlo:
                tlo = t
            elif wt < wc and t < thi:
                thi = t
            t_new = t - (wt - wc) / dwdt
            if not np.isfinite(t_new) or t_new <= tlo or t_new >= thi:
                t_new = 0.5 * (tlo + thi)
            t = t_new
        logz[c] = t
        mll[c] = np.log(-dwdt) - t - wt
    return logz, mll


@njit(cache=True)
def joint_nlog_cdf_many(logz, logk, alpha, theta):
    """w(z) = -log joint latent CDF for a batch of points; logz is (n, D)."""
    n = logz.shape[0]
    D = logz.shape[1]
    L = logk.shape[1]
    logtheta = np.log(theta) if theta > 0.0 else -np.inf
    out = np.empty(n)
    for c in range(n):
        acc = 0.0
        for l in range(L):
            mx = -np.inf
            for j in range(D):
                lx = (logk[j, l] - logz[c, j]) / alpha
                if lx > mx:
                    mx = lx
            s = 0.0
            for j in range(D):
                s += np.exp((logk[j, l] - logz[c, j]) / alpha - mx)
            acc += _tilted_power_sum_scalar(mx + np.log(s), alpha, theta, logtheta)
        out[c] = acc
    return out


@njit(cache=True)
def log_mix_scale(log_a, logk, alpha):
    """log Y with Y_{t,i} = {sum_l A_{t,l} K_{i,l}^{1/alpha}}^alpha, shape (T, D)."""
    T = log_a.shape[0]
    L = log_a.shape[1]
    D = logk.shape[0]
    out = np.empty((T, D))
    for t in range(T):
        for i in range(D):
            mx = -np.inf
            for l in range(L):
                v = log_a[t, l] + logk[i, l] / alpha
                if v > mx:
                    mx = v
            s = 0.0
            for l in range(L):
                s += np.exp(log_a[t, l] + logk[i, l] / alpha - mx)
            out[t, i] = alpha * (mx + np.log(s))
    return out


# ---------------------------------------------------------------------------
# GEV / Frechet pieces
# ---------------------------------------------------------------------------

@njit(cache=True)
def gev_nlog_cdf_cells(x, mu, sigma, xi):
    """w = -log GEV CDF, cellwise; +inf below and 0 above a bounded support."""
    n = x.shape[0]
    out = np.empty(n)
    for c in range(n):
        s = (x[c] - mu[c]) / sigma[c]
        if abs(xi) < _XI_GUMBEL:
            out[c] = np.exp(-s)
        else:
            b = 1.0 + xi * s
            if b <= 0.0:
                out[c] = np.inf if xi > 0 else 0.0
            else:
                out[c] = np.exp(-np.log(b) / xi)
    return out


@njit(cache=True)
def gev_logpdf_cells(x, mu, sigma, xi):
    """GEV log density, cellwise; -inf outside the support."""
    n = x.shape[0]
    out = np.empty(n)
    for c in range(n):
        s = (x[c] - mu[c]) / sigma[c]
        if abs(xi) < _XI_GUMBEL:
            out[c] = -np.log(sigma[c]) - s - np.exp(-s)
        else:
            b = 1.0 + xi * s
            if b <= 0.0:
                out[c] = -np.inf
            else:
                lb = np.log(b)
                out[c] = -np.log(sigma[c]) - (1.0 + 1.0 / xi) * lb - np.exp(-lb / xi)
    return out


@njit(cache=True)
def gev_quantile_from_nlog_cells(w, mu, sigma, xi):
    """GEV quantile from w = -log u; exact in both tails."""
    n = w.shape[0]
    out = np.empty(n)
    for c in range(n):
        if abs(xi) < _XI_GUMBEL:
            out[c] = mu[c] - sigma[c] * np.log(w[c])
        else:
            out[c] = mu[c] + sigma[c] * np.expm1(-xi * np.log(w[c])) / xi
    return out


@njit(cache=True)
def frechet_logpdf_cells(logz, log_scale, alpha):
    """Frechet(scale, 1/alpha) log density from log arguments, cellwise."""
    n = logz.shape[0]
    k = 1.0 / alpha
    out = np.empty(n)
    for c in range(n):
        r = k * (log_scale[c] - logz[c])
        out[c] = np.log(k) + r - logz[c] - np.exp(r)
    return out
