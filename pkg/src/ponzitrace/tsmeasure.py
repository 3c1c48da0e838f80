"""Twelve summary measures that compress a length-N series to a fixed vector.

Every measure is total: degenerate inputs (constant series, very short
series) map to fixed conventional values, so a feature block never holds
NaN or infinities. Variances are population variances throughout.
"""

from __future__ import annotations

import numpy as np

from .tsbuild import SERIES_NAMES, TimeSeriesPanel

MEASURES = (
    "mean",
    "var",
    "acf1",
    "linearity",
    "curvature",
    "trend",
    "season",
    "entropy",
    "lumpiness",
    "spikiness",
    "fspots",
    "cpoints",
)

TS_FEATURE_NAMES = tuple(f"{s}__{m}" for s in SERIES_NAMES for m in MEASURES)

# variance ratios below this are rounding noise, not signal
_NEGLIGIBLE_VAR = 1e-20


def _as_series(x) -> np.ndarray:
    return np.asarray(x, dtype=float).ravel()


def _is_constant(x: np.ndarray) -> bool:
    return x.size == 0 or bool(np.all(x == x[0]))


def seasonal_period(T_hours: int) -> int:
    """Number of intervals per week rounded up, at least 2."""
    return max(2, -(-(7 * 24) // T_hours))


def mean_var(x) -> tuple[float, float]:
    x = _as_series(x)
    if _is_constant(x):
        return float(x[0]) if x.size else 0.0, 0.0
    return float(np.mean(x)), float(np.var(x))


def acf1(x) -> float:
    """Lag-one autocorrelation; 0 for constant series or N < 2."""
    x = _as_series(x)
    if x.size < 2 or _is_constant(x):
        return 0.0
    d = x - x.mean()
    den = np.dot(d, d)
    if den == 0:
        return 0.0
    return float(np.clip(np.dot(d[:-1], d[1:]) / den, -1.0, 1.0))


def _orthonormal_poly_basis(n: int) -> tuple[np.ndarray, np.ndarray]:
    # Gram-Schmidt on {1, t, t^2}; scaling t first keeps t^2 well conditioned
    u = (np.arange(1, n + 1) - (n + 1) / 2) / n
    b0 = np.full(n, 1 / np.sqrt(n))
    basis = [b0]
    for v in (u, u * u):
        w = v.copy()
        for _ in range(2):
            for b in basis:
                w -= np.dot(w, b) * b
        basis.append(w / np.linalg.norm(w))
    return basis[1], basis[2]


def linearity_curvature(x) -> tuple[float, float]:
    """Coefficients of the orthonormal degree-1 and degree-2 polynomials."""
    x = _as_series(x)
    if x.size < 3 or _is_constant(x):
        return 0.0, 0.0
    b1, b2 = _orthonormal_poly_basis(x.size)
    return float(np.dot(x, b1)), float(np.dot(x, b2))


def _symmetric_ma(x: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Centered weighted moving average.

    Near the ends the window shrinks symmetrically to ``2k + 1`` points with
    uniform weights, so a straight line is reproduced exactly.
    """
    n, h = x.size, weights.size // 2
    out = np.empty(n)
    if n > 2 * h:
        out[h : n - h] = np.convolve(x, weights[::-1], mode="valid")
    for t in range(n):
        k = min(h, t, n - 1 - t)
        if k < h:
            out[t] = x[t - k : t + k + 1].mean()
    return out


def _extrapolated_ma(x: np.ndarray, weights: np.ndarray, span: int) -> np.ndarray:
    """Centered moving average with linearly extrapolated ends.

    The ``h`` points at each end the window cannot cover are filled from a
    least-squares line through the nearest ``span`` interior values.
    Needs ``len(x) >= 2 * h + 2``.
    """
    n, h = x.size, weights.size // 2
    inner = np.convolve(x, weights[::-1], mode="valid")
    out = np.empty(n)
    out[h : n - h] = inner
    if h:
        k = min(span, inner.size)
        t = np.arange(h, h + k)
        slope, icpt = np.polyfit(t, inner[:k], 1)
        out[:h] = icpt + slope * np.arange(h)
        t = np.arange(n - h - k, n - h)
        slope, icpt = np.polyfit(t, inner[-k:], 1)
        out[n - h :] = icpt + slope * np.arange(n - h, n)
    return out


def _period_weights(period: int) -> np.ndarray:
    if period % 2:
        return np.full(period, 1 / period)
    w = np.full(period + 1, 1 / period)
    w[0] = w[-1] = 0.5 / period
    return w


def decompose(x, period: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Split ``x`` into trend, seasonal and remainder components.

    With at least two full periods the trend is a centered moving average
    over one period (2 x period for even periods), extended linearly over the
    ends, and the seasonal component is the mean detrended value at each
    phase, centered to sum to zero.
    Otherwise there is no seasonal part and the trend is a centered moving
    average of ``min(N, 2 * period + 1)`` points, made odd.
    """
    x = _as_series(x)
    n = x.size
    if n >= 2 * period and period >= 2:
        trend = _extrapolated_ma(x, _period_weights(period), period)
        phase = np.arange(n) % period
        detrended = x - trend
        idx = np.bincount(phase, weights=detrended, minlength=period)
        idx /= np.bincount(phase, minlength=period)
        idx -= idx.mean()
        seasonal = idx[phase]
    else:
        width = min(n, 2 * period + 1)
        if width % 2 == 0:
            width -= 1
        trend = _symmetric_ma(x, np.full(max(width, 1), 1 / max(width, 1)))
        seasonal = np.zeros(n)
    return trend, seasonal, x - trend - seasonal


def _strength(remainder: np.ndarray, component: np.ndarray, scale: float) -> float:
    total = np.var(component + remainder)
    if total <= _NEGLIGIBLE_VAR * scale:
        return 0.0
    return float(np.clip(1 - np.var(remainder) / total, 0.0, 1.0))


def stl_strengths(x, period: int) -> tuple[float, float]:
    """Strength of trend and of seasonality, each in [0, 1]."""
    x = _as_series(x)
    if x.size < 3 or _is_constant(x):
        return 0.0, 0.0
    trend, seasonal, rem = decompose(x, period)
    scale = np.var(x)
    return _strength(rem, trend, scale), _strength(rem, seasonal, scale)


def spectral_entropy(x) -> float:
    """Normalized Shannon entropy of the periodogram, DC bin excluded.

    A single non-DC bin gives 0; a constant series gives 1.
    """
    x = _as_series(x)
    if x.size < 2 or _is_constant(x):
        return 1.0
    nbins = x.size // 2
    if nbins == 1:
        return 0.0
    power = np.abs(np.fft.rfft(x - x.mean())[1:]) ** 2
    total = power.sum()
    if total <= 0:
        return 1.0
    p = power[power > 0] / total
    h = -np.sum(p * np.log(p)) / np.log(nbins)
    return float(np.clip(h, 0.0, 1.0))


def lumpiness(x, width: int = 10) -> float:
    """Variance of per-window variances of the standardized series."""
    x = _as_series(x)
    if x.size < 2 or _is_constant(x):
        return 0.0
    sd = np.std(x)
    if sd == 0:
        return 0.0
    nwin = x.size // width
    if nwin < 2:
        return 0.0
    z = (x - x.mean()) / sd
    return float(np.var(z[: nwin * width].reshape(nwin, width).var(axis=1)))


def leave_one_out_variance_spread(r) -> float:
    """Variance over j of the variance of ``r`` with element j removed."""
    r = _as_series(r)
    n = r.size
    if n < 4:
        return 0.0
    c = r - r.mean()
    s1, s2 = c.sum(), np.dot(c, c)
    m = n - 1
    loo = (s2 - c * c - (s1 - c) ** 2 / m) / m
    return float(np.var(loo))


def spikiness(x, period: int) -> float:
    x = _as_series(x)
    if x.size < 4 or _is_constant(x):
        return 0.0
    return leave_one_out_variance_spread(decompose(x, period)[2])


def flat_spots(x, nbins: int = 10) -> int:
    """Longest run of consecutive values falling in the same equal-width bin."""
    x = _as_series(x)
    if _is_constant(x):
        return int(x.size)
    lo, hi = x.min(), x.max()
    bins = np.minimum(np.floor((x - lo) / (hi - lo) * nbins), nbins - 1)
    edges = np.flatnonzero(np.diff(bins) != 0)
    bounds = np.concatenate(([-1], edges, [x.size - 1]))
    return int(np.max(np.diff(bounds)))


def crossing_points(x) -> int:
    """Times the series crosses its mean; points on the mean keep the prior side."""
    x = _as_series(x)
    if x.size < 2:
        return 0
    s = np.sign(x - x.mean())
    s = s[s != 0]
    return int(np.count_nonzero(s[1:] != s[:-1]))


def measure_series(x, period: int, lump_width: int = 10) -> np.ndarray:
    """All twelve measures of one series, in :data:`MEASURES` order."""
    x = _as_series(x)
    mean, var = mean_var(x)
    lin, curv = linearity_curvature(x)
    if x.size < 3 or _is_constant(x):
        trend = season = lump = spike = 0.0
    else:
        t, s, rem = decompose(x, period)
        scale = np.var(x)
        trend, season = _strength(rem, t, scale), _strength(rem, s, scale)
        noisy = np.var(rem) > _NEGLIGIBLE_VAR * scale
        lump = lumpiness(rem, lump_width) if noisy else 0.0
        spike = leave_one_out_variance_spread(rem)
    return np.array(
        [
            mean,
            var,
            acf1(x),
            lin,
            curv,
            trend,
            season,
            spectral_entropy(x),
            lump,
            spike,
            flat_spots(x),
            crossing_points(x),
        ]
    )


def compress_panel(
    panel: TimeSeriesPanel, period: int | None = None, lump_width: int = 10
) -> np.ndarray:
    """Flatten a panel to 43 x 12 = 516 values, series-major."""
    if period is None:
        period = seasonal_period(panel.spec.T_hours)
    block = np.concatenate(
        [measure_series(col, period, lump_width) for col in panel.values.T]
    )
    if not np.all(np.isfinite(block)):
        raise FloatingPointError(f"non-finite time-series feature for {panel.address}")
    return block
