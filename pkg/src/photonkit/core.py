"""Shared domain types and unit conventions.

Time is integer picoseconds wherever data is stored or exchanged between
components; curve fitting works internally in floating-point nanoseconds.
Channels 0 and 1 are the two detector arms of the beam-splitter setup,
channel 255 carries laser synchronization pulses.

Arrays held by the dataclasses below are made read-only on construction so
instances can be shared freely between analysis stages.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "PS_PER_NS",
    "PS_PER_MS",
    "PS_PER_S",
    "CHANNEL_A",
    "CHANNEL_B",
    "SYNC_CHANNEL",
    "ps_to_ns",
    "ns_to_ps",
    "Measurement",
    "Verdict",
    "TimestampStream",
    "ValidationReport",
    "validate_stream",
    "CoincidenceHistogram",
    "DecayHistogram",
    "IntensityTrace",
    "Segment",
    "G2CwParams",
    "G2PwParams",
    "MultiExpParams",
    "FitResult",
    "BlinkingResult",
]

PS_PER_NS = 1_000
PS_PER_MS = 1_000_000_000
PS_PER_S = 1_000_000_000_000

CHANNEL_A = 0
CHANNEL_B = 1
SYNC_CHANNEL = 255


def ps_to_ns(t):
    """Convert picoseconds (int or int array) to float nanoseconds."""
    if isinstance(t, np.ndarray):
        return t.astype(np.float64) / PS_PER_NS
    return float(t) / PS_PER_NS


def ns_to_ps(t_ns):
    """Convert float nanoseconds back to integer picoseconds (nearest).

    Round-trips exactly with :func:`ps_to_ns` for magnitudes up to
    2**42 * 1000 ps (about 73 minutes); past that the two float
    roundings can compound to a full picosecond.  Only relative
    quantities (delays, windows, lifetimes, offsets) ever pass through
    here, and those sit far below the bound.  Absolute event times stay
    integer picoseconds end to end and are never converted.
    """
    if isinstance(t_ns, np.ndarray):
        return np.rint(t_ns * PS_PER_NS).astype(np.int64)
    return int(round(t_ns * PS_PER_NS))


def _freeze(a: np.ndarray) -> np.ndarray:
    out = np.ascontiguousarray(a)
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class Measurement:
    """A value with its one-sigma uncertainty."""

    value: float
    sigma: float

    def __str__(self) -> str:
        return f"{self.value:.4g} +/- {self.sigma:.3g}"


class Verdict(enum.Enum):
    """Single-photon classification from a normalized g2 at the dip."""

    SINGLE_PHOTON = "single_photon"
    NOT_SINGLE = "not_single"
    INCONCLUSIVE = "inconclusive"


class _ArrayRecord:
    """Mixin giving value-based equality to dataclasses that hold arrays."""

    def __eq__(self, other):
        if other.__class__ is not self.__class__:
            return NotImplemented
        for name in self.__dataclass_fields__:  # type: ignore[attr-defined]
            a = getattr(self, name)
            b = getattr(other, name)
            if isinstance(a, np.ndarray):
                if not (b.shape == a.shape and np.array_equal(a, b)):
                    return False
            elif a != b:
                return False
        return True

    __hash__ = None  # type: ignore[assignment]


@dataclass(frozen=True, eq=False)
class TimestampStream(_ArrayRecord):
    """Sorted photon arrival times on one channel.

    Parameters
    ----------
    channel : int
        Channel id. 0 and 1 are detector arms, 255 is the sync channel.
    events : ndarray of int64
        Arrival times in ps, non-decreasing, all within [0, duration].
    duration : int
        Observation span in ps.
    """

    channel: int
    events: np.ndarray
    duration: int

    def __post_init__(self):
        ev = np.asarray(self.events, dtype=np.int64)
        object.__setattr__(self, "events", _freeze(ev))
        object.__setattr__(self, "duration", int(self.duration))

    def __len__(self) -> int:
        return self.events.size

    @property
    def rate_per_ms(self) -> float:
        """Mean detected rate in counts per millisecond."""
        if self.duration <= 0:
            return 0.0
        return self.events.size / (self.duration / PS_PER_MS)


@dataclass(frozen=True, eq=False)
class ValidationReport(_ArrayRecord):
    """Outcome of :func:`validate_stream`. Reports, never raises."""

    n_events: int
    order_violations: np.ndarray  # indices i where events[i] < events[i-1]
    n_duplicates: int             # events sharing a timestamp with a neighbor
    n_negative: int
    n_past_duration: int

    def __post_init__(self):
        object.__setattr__(
            self, "order_violations",
            _freeze(np.asarray(self.order_violations, dtype=np.int64)))

    @property
    def ok(self) -> bool:
        """True when the stream is sorted and inside [0, duration].

        Duplicate timestamps are reported but are not a failure; they are
        legal whenever detector dead time is zero.
        """
        return (self.order_violations.size == 0
                and self.n_negative == 0
                and self.n_past_duration == 0)


def validate_stream(stream: TimestampStream) -> ValidationReport:
    """Check ordering and range invariants of a stream, report-only.

    Returns
    -------
    ValidationReport
        Indices of sortedness violations, duplicate-time count, and counts
        of events outside [0, duration].
    """
    ev = stream.events
    if ev.size == 0:
        return ValidationReport(0, np.empty(0, np.int64), 0, 0, 0)
    d = np.diff(ev)
    violations = np.nonzero(d < 0)[0] + 1
    duplicates = int(np.count_nonzero(d == 0))
    negative = int(np.count_nonzero(ev < 0))
    past = int(np.count_nonzero(ev > stream.duration))
    return ValidationReport(int(ev.size), violations, duplicates, negative, past)


def _n_bins(span: int, bin_width: int) -> int:
    return -(-int(span) // int(bin_width))


@dataclass(frozen=True, eq=False)
class CoincidenceHistogram(_ArrayRecord):
    """Cross-correlation histogram of inter-channel delays.

    Delay bins are half-open [lo, hi) of width ``bin_width`` covering
    [-window, +window); a pair landing exactly at +window is discarded.

    Parameters
    ----------
    bin_width : int
        Bin width in ps.
    window : int
        Half-window in ps; delays run from -window to +window.
    counts : ndarray of int64
        Pair counts per bin, ceil(2*window / bin_width) bins.
    center_offset : int or None
        Fitted dip/peak position tau0 in ps, filled by the fit stage.
    normalization : float or None
        Divisor mapping raw counts onto the normalized g2 scale, filled
        by the normalization stage.
    """

    bin_width: int
    window: int
    counts: np.ndarray
    center_offset: int | None = None
    normalization: float | None = None

    def __post_init__(self):
        bw = int(self.bin_width)
        w = int(self.window)
        if bw <= 0:
            raise ValueError(f"bin_width must be positive, got {bw}")
        if w < bw:
            raise ValueError(f"window ({w}) must be >= bin_width ({bw})")
        c = np.asarray(self.counts, dtype=np.int64)
        expected = _n_bins(2 * w, bw)
        if c.size != expected:
            raise ValueError(
                f"expected {expected} bins for window {w} and bin width {bw}, "
                f"got {c.size}")
        if np.any(c < 0):
            raise ValueError("histogram counts must be non-negative")
        object.__setattr__(self, "bin_width", bw)
        object.__setattr__(self, "window", w)
        object.__setattr__(self, "counts", _freeze(c))
        if self.normalization is not None and not self.normalization > 0:
            raise ValueError(
                f"normalization must be positive, got {self.normalization}")

    @property
    def n_bins(self) -> int:
        return self.counts.size

    @property
    def tau_centers_ps(self) -> np.ndarray:
        return -self.window + (np.arange(self.n_bins) + 0.5) * self.bin_width

    @property
    def tau_centers_ns(self) -> np.ndarray:
        return self.tau_centers_ps / PS_PER_NS

    @property
    def normalized(self) -> np.ndarray:
        """Counts divided by the normalization constant."""
        if self.normalization is None:
            raise ValueError("histogram has no normalization set")
        return self.counts / self.normalization

    @property
    def normalized_sigma(self) -> np.ndarray:
        """Per-bin Poisson sigma on the normalized scale."""
        if self.normalization is None:
            raise ValueError("histogram has no normalization set")
        return np.sqrt(self.counts) / self.normalization


@dataclass(frozen=True, eq=False)
class DecayHistogram(_ArrayRecord):
    """Fluorescence decay histogram: photon delay since the preceding sync.

    Delays live in [0, period); bins are half-open of width ``bin_width``.
    ``discarded`` counts photons that could not be assigned (before the
    first sync pulse, or with a delay past the last bin edge).
    """

    bin_width: int
    period: int
    counts: np.ndarray
    discarded: int = 0

    def __post_init__(self):
        bw = int(self.bin_width)
        t = int(self.period)
        if bw <= 0:
            raise ValueError(f"bin_width must be positive, got {bw}")
        if bw > t:
            raise ValueError(f"bin_width ({bw}) must not exceed period ({t})")
        c = np.asarray(self.counts, dtype=np.int64)
        expected = _n_bins(t, bw)
        if c.size != expected:
            raise ValueError(
                f"expected {expected} bins for period {t} and bin width {bw}, "
                f"got {c.size}")
        if np.any(c < 0):
            raise ValueError("histogram counts must be non-negative")
        object.__setattr__(self, "bin_width", bw)
        object.__setattr__(self, "period", t)
        object.__setattr__(self, "counts", _freeze(c))
        object.__setattr__(self, "discarded", int(self.discarded))

    @property
    def n_bins(self) -> int:
        return self.counts.size

    @property
    def delay_centers_ps(self) -> np.ndarray:
        return (np.arange(self.n_bins) + 0.5) * self.bin_width

    @property
    def delay_centers_ns(self) -> np.ndarray:
        return self.delay_centers_ps / PS_PER_NS


@dataclass(frozen=True, eq=False)
class IntensityTrace(_ArrayRecord):
    """Binned count rate versus time, the raw material of blinking analysis.

    The default bin width of 1e9 ps (1 ms) matches the usual blinking
    threshold units of counts per millisecond.
    """

    counts: np.ndarray
    bin_width: int = PS_PER_MS
    duration: int = 0

    def __post_init__(self):
        bw = int(self.bin_width)
        if bw <= 0:
            raise ValueError(f"bin_width must be positive, got {bw}")
        c = np.asarray(self.counts, dtype=np.int64)
        if np.any(c < 0):
            raise ValueError("trace counts must be non-negative")
        dur = int(self.duration) if self.duration else c.size * bw
        if _n_bins(dur, bw) != c.size:
            raise ValueError(
                f"expected {_n_bins(dur, bw)} bins for duration {dur} and "
                f"bin width {bw}, got {c.size}")
        object.__setattr__(self, "bin_width", bw)
        object.__setattr__(self, "counts", _freeze(c))
        object.__setattr__(self, "duration", dur)

    @property
    def n_bins(self) -> int:
        return self.counts.size

    @property
    def span(self) -> int:
        """Full span covered by the bins in ps (>= duration)."""
        return self.counts.size * self.bin_width

    @property
    def bin_width_ms(self) -> float:
        return self.bin_width / PS_PER_MS

    @property
    def rates_per_ms(self) -> np.ndarray:
        """Counts per bin expressed in counts per millisecond."""
        return self.counts / self.bin_width_ms


@dataclass(frozen=True)
class Segment:
    """One maximal ON or OFF run of an intensity trace, half-open in ps."""

    on: bool
    start: int
    end: int

    @property
    def duration_ps(self) -> int:
        return self.end - self.start

    @property
    def duration_ms(self) -> float:
        return (self.end - self.start) / PS_PER_MS


@dataclass(frozen=True)
class G2CwParams:
    """Parameters of the CW antibunching model a*(1 - b*exp(-|t-tau0|/tauX)).

    ``plateau`` is the raw uncorrelated-coincidence level `a`, ``dip_depth``
    the fractional dip `b` (1 for an ideal single emitter), ``tau0_ns`` the
    dip position from cable/electronic offsets, ``tau_x_ns`` the emitter
    lifetime constant.
    """

    plateau: float
    dip_depth: float
    tau0_ns: float
    tau_x_ns: float

    names = ("plateau", "dip_depth", "tau0_ns", "tau_x_ns")

    def to_vector(self) -> np.ndarray:
        return np.array(
            [self.plateau, self.dip_depth, self.tau0_ns, self.tau_x_ns])

    @classmethod
    def from_vector(cls, v) -> "G2CwParams":
        return cls(float(v[0]), float(v[1]), float(v[2]), float(v[3]))


@dataclass(frozen=True, eq=False)
class G2PwParams(_ArrayRecord):
    """Parameters of the pulsed g2 comb model.

    The model is
    ``a + b0*E0 + sum_{n != 0} b_n * En * (1 - E0)`` with
    ``E0 = exp(-|t - tau0|/tauX)`` and ``En = exp(-|t - tau0 - n*T|/tauX)``.

    ``peak_heights`` holds b_n for n = -n_side .. +n_side in order, so the
    center coefficient b0 sits at index n_side. ``period_ns`` (T) is a fixed
    input (laser hardware), not a fitted parameter.
    """

    background: float
    peak_heights: np.ndarray
    tau0_ns: float
    tau_x_ns: float
    period_ns: float

    def __post_init__(self):
        h = np.asarray(self.peak_heights, dtype=np.float64)
        if h.size % 2 != 1 or h.size < 3:
            raise ValueError(
                f"peak_heights must have odd length >= 3, got {h.size}")
        object.__setattr__(self, "peak_heights", _freeze(h))

    @property
    def n_side(self) -> int:
        return (self.peak_heights.size - 1) // 2

    @property
    def center_height(self) -> float:
        """b0, the same-pulse peak coefficient."""
        return float(self.peak_heights[self.n_side])

    @property
    def side_mean(self) -> float:
        """Mean of the side-peak coefficients b_n, n != 0."""
        h = self.peak_heights
        return float((h.sum() - h[self.n_side]) / (h.size - 1))

    @property
    def names(self) -> tuple[str, ...]:
        n = self.n_side
        return (("background",)
                + tuple(f"b[{i}]" for i in range(-n, n + 1))
                + ("tau0_ns", "tau_x_ns"))

    def to_vector(self) -> np.ndarray:
        return np.concatenate((
            [self.background], self.peak_heights,
            [self.tau0_ns, self.tau_x_ns]))

    @classmethod
    def from_vector(cls, v, period_ns: float) -> "G2PwParams":
        v = np.asarray(v, dtype=np.float64)
        return cls(float(v[0]), v[1:-2].copy(), float(v[-2]), float(v[-1]),
                   float(period_ns))


@dataclass(frozen=True, eq=False)
class MultiExpParams(_ArrayRecord):
    """Parameters of A + sum_i B_i * exp(-(t - tau0)/tau_i), t >= tau0.

    Components are kept sorted by ascending lifetime. ``tau0_ns`` is the
    histogram peak position, held fixed during fitting.
    """

    floor: float
    amplitudes: np.ndarray
    lifetimes_ns: np.ndarray
    tau0_ns: float

    def __post_init__(self):
        b = np.asarray(self.amplitudes, dtype=np.float64)
        t = np.asarray(self.lifetimes_ns, dtype=np.float64)
        if b.size != t.size or b.size == 0:
            raise ValueError(
                f"amplitudes ({b.size}) and lifetimes ({t.size}) must have "
                "equal nonzero length")
        if np.any(np.diff(t) < 0):
            raise ValueError("lifetimes must be sorted ascending")
        object.__setattr__(self, "amplitudes", _freeze(b))
        object.__setattr__(self, "lifetimes_ns", _freeze(t))

    @property
    def n_components(self) -> int:
        return self.amplitudes.size

    @property
    def names(self) -> tuple[str, ...]:
        out = ["floor"]
        for i in range(1, self.n_components + 1):
            out += [f"B{i}", f"tau{i}_ns"]
        return tuple(out)

    def to_vector(self) -> np.ndarray:
        v = [self.floor]
        for b, t in zip(self.amplitudes, self.lifetimes_ns):
            v += [b, t]
        return np.array(v)

    @classmethod
    def from_vector(cls, v, tau0_ns: float) -> "MultiExpParams":
        v = np.asarray(v, dtype=np.float64)
        return cls(float(v[0]), v[1::2].copy(), v[2::2].copy(), float(tau0_ns))


@dataclass(frozen=True, eq=False)
class FitResult(_ArrayRecord):
    """Outcome of a model fit.

    ``sigma`` and ``covariance`` are aligned with ``names`` (the free
    parameter vector in its packing order); ``sigma[i]`` equals
    ``sqrt(covariance[i, i])``. ``flags`` carries non-fatal conditions such
    as "singular_covariance" or "degenerate_component".
    """

    params: object
    names: tuple[str, ...]
    sigma: np.ndarray
    covariance: np.ndarray
    chi2_reduced: float
    converged: bool
    iterations: int
    flags: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(
            self, "sigma", _freeze(np.asarray(self.sigma, dtype=np.float64)))
        object.__setattr__(
            self, "covariance",
            _freeze(np.asarray(self.covariance, dtype=np.float64)))

    def value_of(self, name: str) -> Measurement:
        """Look up one fitted parameter with its uncertainty by name."""
        vec = self.params.to_vector()
        i = self.names.index(name)
        return Measurement(float(vec[i]), float(self.sigma[i]))

    def as_dict(self) -> dict:
        vec = self.params.to_vector()
        return {
            name: {"value": float(vec[i]), "sigma": float(self.sigma[i])}
            for i, name in enumerate(self.names)
        }


@dataclass(frozen=True, eq=False)
class BlinkingResult(_ArrayRecord):
    """Full blinking characterization of an intensity trace.

    Dwell durations are in milliseconds. ``alpha_on``/``alpha_off`` are the
    power-law exponents of the dwell distributions with one-sigma errors;
    ``model_on``/``model_off`` name the better dwell model ("power_law" or
    "exponential") per state.
    """

    threshold: float
    on_durations_ms: np.ndarray
    off_durations_ms: np.ndarray
    alpha_on: Measurement | None
    alpha_off: Measurement | None
    model_on: str | None
    model_off: str | None
    mean_on_rate_per_ms: float
    mean_off_rate_per_ms: float

    def __post_init__(self):
        object.__setattr__(
            self, "on_durations_ms",
            _freeze(np.asarray(self.on_durations_ms, dtype=np.float64)))
        object.__setattr__(
            self, "off_durations_ms",
            _freeze(np.asarray(self.off_durations_ms, dtype=np.float64)))
