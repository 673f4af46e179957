"""On-disk formats: binary timestamp files, CSV histograms, JSON reports.

Timestamp files ("PTST") are a 19-byte little-endian header followed by
fixed 16-byte records:

    header: magic "PTST" | version u16 | channel count u8 |
            resolution u32 (ps per tick) | record count u64
    record: timestamp u64 (ticks) | channel u8 | 7 reserved bytes

Records are sorted by timestamp with channel as tie-break, so a rewrite of
the same streams is byte-identical. The file does not store the
observation duration; readers infer it from the last timestamp unless the
caller overrides it.
"""

from __future__ import annotations

import hashlib
import io
import json
import struct
from dataclasses import dataclass, field
from datetime import datetime, timezone

import numpy as np

from .core import (
    CoincidenceHistogram,
    DecayHistogram,
    Measurement,
    TimestampStream,
    Verdict,
    validate_stream,
)

try:
    from importlib.metadata import PackageNotFoundError, version
    TOOL_VERSION = version("photonkit")
except PackageNotFoundError:  # running from a source tree
    TOOL_VERSION = "0.1.0"

__all__ = [
    "MAGIC",
    "FORMAT_VERSION",
    "RECORD_DTYPE",
    "TimestampFileError",
    "BadMagicError",
    "UnsupportedVersionError",
    "TruncatedFileError",
    "UnsortedRecordsError",
    "write_timestamps",
    "read_timestamps",
    "export_histogram_csv",
    "read_histogram_csv",
    "file_digest",
    "ReportDocument",
]

MAGIC = b"PTST"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sHBIQ")
RECORD_DTYPE = np.dtype([("t", "<u8"), ("ch", "u1"), ("pad", "V7")])


class TimestampFileError(Exception):
    """Base error for malformed timestamp files."""

    code = "timestamp_file_error"


class BadMagicError(TimestampFileError):
    code = "bad_magic"


class UnsupportedVersionError(TimestampFileError):
    code = "unsupported_version"


class TruncatedFileError(TimestampFileError):
    code = "truncated"


class UnsortedRecordsError(TimestampFileError):
    code = "unsorted_records"


def write_timestamps(streams, path, resolution: int = 1) -> int:
    """Write streams to one merged binary file; returns the record count.

    Events from all streams are interleaved in time order (channel id as
    tie-break), which makes the output byte-identical for identical input.
    With ``resolution`` > 1 timestamps are stored in coarser ticks by
    integer division, which is lossy.
    """
    resolution = int(resolution)
    if resolution < 1:
        raise ValueError(f"resolution must be >= 1, got {resolution}")
    streams = list(streams)
    if len(streams) > 255:
        raise ValueError(f"at most 255 channels per file, got {len(streams)}")
    parts_t, parts_ch = [], []
    for s in streams:
        if not 0 <= s.channel <= 255:
            raise ValueError(f"channel {s.channel} does not fit in one byte")
        if s.events.size and s.events.min() < 0:
            raise ValueError(
                f"channel {s.channel} has negative timestamps")
        parts_t.append(s.events.astype(np.uint64) // resolution)
        parts_ch.append(np.full(s.events.size, s.channel, dtype=np.uint8))
    t = np.concatenate(parts_t) if parts_t else np.empty(0, np.uint64)
    ch = np.concatenate(parts_ch) if parts_ch else np.empty(0, np.uint8)
    order = np.lexsort((ch, t))
    records = np.zeros(t.size, dtype=RECORD_DTYPE)
    records["t"] = t[order]
    records["ch"] = ch[order]
    with open(path, "wb") as f:
        f.write(_HEADER.pack(MAGIC, FORMAT_VERSION, len(streams),
                             resolution, t.size))
        records.tofile(f)
    return int(t.size)


def read_timestamps(path, duration: int | None = None) -> dict[int, TimestampStream]:
    """Read a binary timestamp file into streams keyed by channel id.

    Channels written with zero events do not reappear. The duration
    defaults to the last timestamp in the file; pass ``duration`` to set
    the true observation span when it is known.

    Raises
    ------
    BadMagicError, UnsupportedVersionError, TruncatedFileError,
    UnsortedRecordsError
        On the corresponding structural defect. Each carries a stable
        ``code`` attribute for machine handling.
    """
    with open(path, "rb") as f:
        head = f.read(_HEADER.size)
        if len(head) < _HEADER.size:
            raise TruncatedFileError(
                f"file ends inside the {_HEADER.size}-byte header")
        magic, fmt_version, _n_channels, resolution, n_records = \
            _HEADER.unpack(head)
        if magic != MAGIC:
            raise BadMagicError(f"expected magic {MAGIC!r}, found {magic!r}")
        if fmt_version != FORMAT_VERSION:
            raise UnsupportedVersionError(
                f"format version {fmt_version} not supported "
                f"(expected {FORMAT_VERSION})")
        if resolution == 0:
            raise TimestampFileError("resolution field is zero")
        records = np.fromfile(f, dtype=RECORD_DTYPE, count=n_records)
        if records.size < n_records:
            raise TruncatedFileError(
                f"header promises {n_records} records, file holds "
                f"{records.size}")
        if f.read(1):
            raise TimestampFileError(
                f"trailing data after {n_records} records")

    t = records["t"]
    if t.size and not bool(np.all(t[1:] >= t[:-1])):
        bad = int(np.nonzero(t[1:] < t[:-1])[0][0]) + 1
        raise UnsortedRecordsError(
            f"record {bad} goes backwards in time")
    if t.size and int(t[-1]) * resolution > np.iinfo(np.int64).max:
        raise TimestampFileError(
            "timestamps overflow the signed 64-bit ps range")
    times = t.astype(np.int64) * resolution
    if duration is None:
        duration = int(times[-1]) if times.size else 0
    else:
        duration = int(duration)
        if times.size and duration < int(times[-1]):
            raise ValueError(
                f"duration {duration} is before the last event {times[-1]}")
    ch = records["ch"]
    out = {}
    for c in np.unique(ch):
        stream = TimestampStream(int(c), times[ch == c], duration)
        report = validate_stream(stream)
        if not report.ok:
            raise UnsortedRecordsError(
                f"channel {c} fails validation: "
                f"{report.order_violations.size} order violations, "
                f"{report.n_negative} negative, "
                f"{report.n_past_duration} past duration")
        out[int(c)] = stream
    return out


# ---------------------------------------------------------------------------
# CSV histograms

def export_histogram_csv(histogram, path) -> None:
    """Write a histogram as CSV.

    Raw histograms get columns ``bin_center_ns,count``; a normalized
    coincidence histogram gets ``bin_center_ns,g2,sigma`` instead.
    """
    if isinstance(histogram, CoincidenceHistogram):
        centers = histogram.tau_centers_ns
        if histogram.normalization is not None:
            header = "bin_center_ns,g2,sigma"
            table = np.column_stack(
                (centers, histogram.normalized, histogram.normalized_sigma))
            fmt = ["%.3f", "%.9g", "%.9g"]
        else:
            header = "bin_center_ns,count"
            table = np.column_stack((centers, histogram.counts))
            fmt = ["%.3f", "%d"]
    elif isinstance(histogram, DecayHistogram):
        header = "bin_center_ns,count"
        table = np.column_stack((histogram.delay_centers_ns, histogram.counts))
        fmt = ["%.3f", "%d"]
    else:
        raise TypeError(
            f"cannot export a {type(histogram).__name__} as a histogram CSV")
    with open(path, "w", newline="") as f:
        np.savetxt(f, table, fmt=fmt, delimiter=",", header=header,
                   comments="")


def read_histogram_csv(path) -> dict[str, np.ndarray]:
    """Read a histogram CSV back as {column name: array}.

    Count columns come back as int64, everything else as float64.
    """
    with open(path, "r", newline="") as f:
        names = f.readline().strip().split(",")
        body = f.read()
    if not names or names == [""]:
        raise ValueError("histogram CSV has no header line")
    if body.strip():
        data = np.loadtxt(io.StringIO(body), delimiter=",", ndmin=2)
        if data.shape[1] != len(names):
            raise ValueError(
                f"header names {len(names)} columns, rows have "
                f"{data.shape[1]}")
    else:
        data = np.empty((0, len(names)))
    out = {}
    for j, name in enumerate(names):
        col = data[:, j]
        out[name] = col.astype(np.int64) if name == "count" else col
    return out


# ---------------------------------------------------------------------------
# JSON report

def file_digest(path) -> str:
    """SHA-256 hex digest of a file, streamed in 1 MiB chunks."""
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _jsonify(obj):
    if obj is None or isinstance(obj, (bool, int, float, str)):
        return obj
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return [_jsonify(v) for v in obj.tolist()]
    if isinstance(obj, Measurement):
        return {"value": obj.value, "sigma": obj.sigma}
    if isinstance(obj, Verdict):
        return obj.value
    if isinstance(obj, dict):
        return {str(k): _jsonify(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonify(v) for v in obj]
    as_dict = getattr(obj, "as_dict", None)
    if callable(as_dict):
        return _jsonify(as_dict())
    raise TypeError(f"cannot serialize {type(obj).__name__} into a report")


def _now_iso() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


@dataclass(frozen=True)
class ReportDocument:
    """Machine-readable analysis report.

    Serializes with sorted keys and a fixed schema version so reports are
    diffable; ``created`` is the only field that varies between identical
    runs.
    """

    config: dict
    results: dict
    errors: list = field(default_factory=list)
    input: dict | None = None
    created: str = field(default_factory=_now_iso)
    schema_version: str = "1"
    tool_name: str = "photonkit"
    tool_version: str = TOOL_VERSION

    def to_dict(self) -> dict:
        doc = {
            "schema_version": self.schema_version,
            "created": self.created,
            "tool": {"name": self.tool_name, "version": self.tool_version},
            "config": self.config,
            "results": self.results,
            "errors": list(self.errors),
        }
        if self.input is not None:
            doc["input"] = self.input
        return _jsonify(doc)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def write(self, path) -> None:
        with open(path, "w") as f:
            f.write(self.to_json())

    @property
    def ok(self) -> bool:
        return not self.errors
