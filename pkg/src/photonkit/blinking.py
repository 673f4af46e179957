"""Blinking analysis: thresholding, dwell times, power-law statistics.

An intensity trace is split into ON and OFF runs against a count-rate
threshold (default 50 counts/ms for the usual 1 ms binning). Dwell-time
distributions are then characterized two ways: a maximum-likelihood
power-law exponent on the raw durations, and a log-log histogram slope as
a cross-check. A likelihood comparison against an exponential dwell model
decides which family describes each state.

Durations are in milliseconds throughout; the power-law exponent alpha
follows the survival-function convention P(t > T) ~ T^-alpha, so the
probability density falls as T^-(1+alpha).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import (
    BlinkingResult,
    IntensityTrace,
    Measurement,
    Segment,
    _ArrayRecord,
    _freeze,
)

__all__ = [
    "DwellDensity",
    "DwellModelComparison",
    "segment_trace",
    "dwell_histogram",
    "fit_power_law_mle",
    "fit_exponential_dwell",
    "fit_power_law_slope",
    "compare_dwell_models",
    "alpha_distribution",
    "analyze_blinking",
]


@dataclass(frozen=True, eq=False)
class DwellDensity(_ArrayRecord):
    """Probability density of dwell durations on logarithmic bins.

    ``density[i]`` is counts[i] / (n_total * bin_width_ms[i]), so the
    integral over all bins is 1 and a power law appears as a straight line
    in log-log coordinates.
    """

    edges_ms: np.ndarray
    counts: np.ndarray
    density: np.ndarray

    def __post_init__(self):
        object.__setattr__(
            self, "edges_ms",
            _freeze(np.asarray(self.edges_ms, dtype=np.float64)))
        object.__setattr__(
            self, "counts", _freeze(np.asarray(self.counts, dtype=np.int64)))
        object.__setattr__(
            self, "density",
            _freeze(np.asarray(self.density, dtype=np.float64)))

    @property
    def n_total(self) -> int:
        return int(self.counts.sum())

    @property
    def centers_ms(self) -> np.ndarray:
        """Geometric bin centers, natural for log-spaced bins."""
        return np.sqrt(self.edges_ms[:-1] * self.edges_ms[1:])


@dataclass(frozen=True)
class DwellModelComparison:
    """Power-law versus exponential dwell model, same data, same support."""

    alpha: Measurement
    rate_per_ms: Measurement
    log_likelihood_power: float
    log_likelihood_exponential: float
    n: int

    @property
    def log_ratio(self) -> float:
        """Positive favors the power law."""
        return self.log_likelihood_power - self.log_likelihood_exponential

    @property
    def verdict(self) -> str:
        return "power_law" if self.log_ratio >= 0 else "exponential"


def segment_trace(trace: IntensityTrace, threshold_per_ms: float) -> list[Segment]:
    """Split a trace into maximal ON/OFF runs against a rate threshold.

    A bin is ON when its rate is at or above ``threshold_per_ms``. The
    returned segments tile [0, n_bins * bin_width) exactly, alternate in
    state, and are half-open in ps.
    """
    if threshold_per_ms < 0:
        raise ValueError(
            f"threshold must be non-negative, got {threshold_per_ms}")
    on = trace.rates_per_ms >= threshold_per_ms
    n = on.size
    if n == 0:
        return []
    change = np.nonzero(on[1:] != on[:-1])[0]
    starts = np.concatenate(([0], change + 1))
    ends = np.concatenate((change + 1, [n]))
    bw = trace.bin_width
    return [Segment(bool(on[s]), int(s) * bw, int(e) * bw)
            for s, e in zip(starts, ends)]


def _positive_durations(durations_ms) -> np.ndarray:
    d = np.asarray(durations_ms, dtype=np.float64)
    if d.ndim != 1:
        raise ValueError(f"durations must be one-dimensional, got {d.ndim}D")
    if d.size and (not np.all(np.isfinite(d)) or np.any(d <= 0)):
        raise ValueError("durations must be finite and positive")
    return d


def dwell_histogram(durations_ms, n_bins: int = 30) -> DwellDensity:
    """Histogram dwell durations on log-spaced bins, normalized to density."""
    d = _positive_durations(durations_ms)
    if d.size < 2:
        raise ValueError(f"need at least 2 durations, got {d.size}")
    if n_bins < 1:
        raise ValueError(f"n_bins must be >= 1, got {n_bins}")
    lo, hi = float(d.min()), float(d.max())
    if lo == hi:
        lo, hi = lo / 2.0, hi * 2.0
    edges = np.geomspace(lo, hi, n_bins + 1)
    counts, _ = np.histogram(d, bins=edges)
    widths = np.diff(edges)
    density = counts / (d.size * widths)
    return DwellDensity(edges, counts, density)


def fit_power_law_mle(durations_ms, tau_min_ms: float | None = None) -> Measurement:
    """Maximum-likelihood power-law exponent of dwell durations.

    For density p(t) = alpha * tau_min^alpha * t^-(1+alpha) on
    [tau_min, inf) the estimator is alpha = n / sum(ln(t_i / tau_min)) with
    standard error alpha / sqrt(n). Durations below ``tau_min_ms`` are
    excluded; when it is omitted the sample minimum is used, which biases
    alpha slightly high for small samples.
    """
    d = _positive_durations(durations_ms)
    if tau_min_ms is None:
        if d.size == 0:
            raise ValueError("cannot fit an empty duration sample")
        tau_min_ms = float(d.min())
    elif tau_min_ms <= 0:
        raise ValueError(f"tau_min_ms must be positive, got {tau_min_ms}")
    d = d[d >= tau_min_ms]
    n = d.size
    if n < 2:
        raise ValueError(f"need at least 2 durations above tau_min, got {n}")
    s = float(np.log(d / tau_min_ms).sum())
    if s <= 0:
        raise ValueError("durations have no spread above tau_min")
    alpha = n / s
    return Measurement(alpha, alpha / math.sqrt(n))


def fit_exponential_dwell(durations_ms) -> Measurement:
    """Maximum-likelihood exponential dwell rate, in 1/ms.

    The estimate is 1/mean with standard error rate / sqrt(n).
    """
    d = _positive_durations(durations_ms)
    if d.size < 2:
        raise ValueError(f"need at least 2 durations, got {d.size}")
    rate = 1.0 / float(d.mean())
    return Measurement(rate, rate / math.sqrt(d.size))


def fit_power_law_slope(density: DwellDensity) -> Measurement:
    """Power-law exponent from a straight-line fit in log-log coordinates.

    Regresses ln(density) on ln(duration) over occupied bins and maps the
    slope m to alpha = -m - 1. This histogram-based estimator is noisier
    than the likelihood one and serves as an independent cross-check.
    """
    sel = density.counts > 0
    if int(sel.sum()) < 3:
        raise ValueError(
            f"need at least 3 occupied bins, got {int(sel.sum())}")
    x = np.log(density.centers_ms[sel])
    y = np.log(density.density[sel])
    n = x.size
    xc = x - x.mean()
    sxx = float(xc @ xc)
    slope = float(xc @ y) / sxx
    resid = y - (y.mean() + slope * xc)
    var_slope = float(resid @ resid) / (n - 2) / sxx
    return Measurement(-slope - 1.0, math.sqrt(max(var_slope, 0.0)))


def compare_dwell_models(durations_ms,
                         tau_min_ms: float | None = None) -> DwellModelComparison:
    """Fit power-law and exponential dwell models and compare likelihoods.

    Both likelihoods are evaluated on the same durations (those at or
    above ``tau_min_ms``). The power-law density is
    alpha * tau_min^alpha * t^-(1+alpha); the exponential is
    lambda * exp(-lambda t).
    """
    d = _positive_durations(durations_ms)
    if tau_min_ms is None:
        if d.size == 0:
            raise ValueError("cannot compare models on an empty sample")
        tau_min_ms = float(d.min())
    d = d[d >= tau_min_ms]
    alpha = fit_power_law_mle(d, tau_min_ms)
    rate = fit_exponential_dwell(d)
    n = d.size
    log_sum = float(np.log(d).sum())
    llp = (n * math.log(alpha.value) + n * alpha.value * math.log(tau_min_ms)
           - (1.0 + alpha.value) * log_sum)
    lle = n * math.log(rate.value) - rate.value * float(d.sum())
    return DwellModelComparison(alpha, rate, llp, lle, n)


def alpha_distribution(durations_ms, n_boot: int = 200, seed: int = 0,
                       tau_min_ms: float | None = None) -> np.ndarray:
    """Bootstrap distribution of the power-law exponent estimate.

    Resamples the durations with replacement ``n_boot`` times and runs the
    likelihood estimator on each. The spread of the result checks the
    analytic alpha / sqrt(n) error in a model-free way.
    """
    d = _positive_durations(durations_ms)
    if d.size < 2:
        raise ValueError(f"need at least 2 durations, got {d.size}")
    if n_boot < 1:
        raise ValueError(f"n_boot must be >= 1, got {n_boot}")
    rng = np.random.Generator(np.random.PCG64(seed))
    out = np.empty(n_boot)
    for i in range(n_boot):
        sample = rng.choice(d, size=d.size, replace=True)
        out[i] = fit_power_law_mle(sample, tau_min_ms).value
    return out


def analyze_blinking(trace: IntensityTrace, threshold_per_ms: float = 50.0,
                     min_dwell_ms: float = 0.0,
                     tau_min_ms: float | None = None,
                     min_fit_segments: int = 8) -> BlinkingResult:
    """Full blinking characterization of an intensity trace.

    The trace is thresholded into segments; the first and last segment of
    each state are dropped from the dwell statistics because the trace
    boundaries truncate them. Dwells shorter than ``min_dwell_ms`` are
    also dropped, which suppresses the bias from single-bin quantization
    near the threshold. Each state with at least ``min_fit_segments``
    surviving dwells gets a power-law exponent and a model verdict;
    sparser states report None.

    Mean ON/OFF rates are computed over all bins of that state, not just
    the surviving segments.
    """
    segments = segment_trace(trace, threshold_per_ms)
    rates = trace.rates_per_ms
    on_bins = rates >= threshold_per_ms
    bw_ms = trace.bin_width_ms

    def mean_rate(mask) -> float:
        n = int(mask.sum())
        if n == 0:
            return 0.0
        return float(trace.counts[mask].sum()) / (n * bw_ms)

    interior = segments[1:-1] if len(segments) >= 3 else []
    on_d = np.array([s.duration_ms for s in interior
                     if s.on and s.duration_ms >= min_dwell_ms])
    off_d = np.array([s.duration_ms for s in interior
                      if not s.on and s.duration_ms >= min_dwell_ms])

    def characterize(durations):
        if durations.size < max(min_fit_segments, 2):
            return None, None
        comp = compare_dwell_models(durations, tau_min_ms)
        return comp.alpha, comp.verdict

    alpha_on, model_on = characterize(on_d)
    alpha_off, model_off = characterize(off_d)
    return BlinkingResult(
        threshold=float(threshold_per_ms),
        on_durations_ms=on_d,
        off_durations_ms=off_d,
        alpha_on=alpha_on,
        alpha_off=alpha_off,
        model_on=model_on,
        model_off=model_off,
        mean_on_rate_per_ms=mean_rate(on_bins),
        mean_off_rate_per_ms=mean_rate(~on_bins),
    )
