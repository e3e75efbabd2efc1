"""Effective sample size via the initial monotone positive sequence."""
from __future__ import annotations

import numpy as np

__all__ = ["effective_sample_size"]


def effective_sample_size(x: np.ndarray) -> float:
    """ESS of a scalar chain from its truncated autocovariance sum.

    Pairs successive autocovariances, truncates at the first nonpositive
    pair, enforces monotonicity, and returns n * gamma_0 / sigma^2.
    """
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[0]
    if n < 4:
        return float(n)
    x = x - x.mean()
    var0 = float(np.dot(x, x) / n)
    if var0 <= 0.0 or not np.isfinite(var0):
        return float(n)

    nfft = int(2 ** np.ceil(np.log2(2 * n)))
    f = np.fft.rfft(x, nfft)
    acov = np.fft.irfft(f * np.conj(f), nfft)[:n].real / n

    pair_sums = []
    m = 0
    while 2 * m + 1 < n:
        g = acov[2 * m] + acov[2 * m + 1]
        if g <= 0.0:
            break
        pair_sums.append(g)
        m += 1
    if not pair_sums:
        return float(n)
    pair_sums = np.minimum.accumulate(np.array(pair_sums))
    sigma2 = -acov[0] + 2.0 * pair_sums.sum()
    if sigma2 <= 0.0:
        return float(n)
    return float(np.clip(n * var0 / sigma2, 1.0, n))
