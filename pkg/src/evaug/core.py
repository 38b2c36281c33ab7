"""Core domain types and file formats for sparse event streams.

An event is a single polarity change at a pixel: ``(x, y, p, t)`` with
``p`` in {-1, +1} and ``t`` an unsigned microsecond timestamp.  Streams
are stored column-wise (struct-of-arrays) so that every downstream
operation can run vectorised over millions of events.

File formats
------------

Text stream (UTF-8):
    line 1:   ``# <width> <height>``
    then one event per line: ``<t> <x> <y> <p>`` (whitespace-separated
    decimal, ``p`` in {-1, 1}).  Lines starting with ``#`` after the
    header are comments and ignored; blank lines are ignored.

Binary stream (little-endian), extension ``.evst``:
    magic ``EVST`` (4 bytes), version u16 = 1, width u16, height u16,
    reserved u16 = 0, event count N u64; then N 16-byte records of
    ``{t: u64, x: u16, y: u16, p: i8, pad: 3 x u8 = 0}``.

Binary frame tensor (little-endian), extension ``.evfr``:
    magic ``EVFR`` (4 bytes), version u16 = 1, T u32, C u32 = 2, H u32,
    W u32; then T*2*H*W counts as u32 in C order (slice, channel, row,
    column).  Channel 0 holds negative-polarity counts, channel 1
    positive.

Writers emit a canonical encoding; parsers reject anything a writer
could not have produced (nonzero padding, trailing bytes, bad counts),
so encode/decode round-trips are bit-exact in both directions.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import Iterable, Iterator, NamedTuple

import numpy as np

from .errors import FormatError, ValidationError

MAX_DIM = 0xFFFF            # width/height are u16 on the wire
MAX_TIMESTAMP = 0xFFFFFFFFFFFFFFFF
MAX_COUNT = 0xFFFFFFFF      # frame cells are u32 on the wire

STREAM_MAGIC = b"EVST"
FRAME_MAGIC = b"EVFR"
FORMAT_VERSION = 1

_STREAM_HEADER = struct.Struct("<4sHHHHQ")   # magic, version, W, H, reserved, N
_FRAME_HEADER = struct.Struct("<4sHIIII")    # magic, version, T, C, H, W
_RECORD_DTYPE = np.dtype(
    [("t", "<u8"), ("x", "<u2"), ("y", "<u2"), ("p", "<i1"), ("pad", "<u1", (3,))]
)
assert _RECORD_DTYPE.itemsize == 16

# Polarity encodings accepted by the text parser.  The canonical
# in-memory and on-disk representation is always -1/+1.
POLARITY_PM1 = "neg-one/one"
POLARITY_01 = "zero/one"
POLARITY_ENCODINGS = (POLARITY_PM1, POLARITY_01)


class Event(NamedTuple):
    """One polarity change: pixel column, pixel row, polarity, timestamp (us)."""

    x: int
    y: int
    p: int
    t: int


def _as_column(values, dtype: str, name: str, upper: int) -> np.ndarray:
    """Coerce to an unsigned column, rejecting out-of-range values.

    Range checks run on the raw input: casting first would silently wrap
    negatives and oversized values.
    """
    arr = np.asarray(values)
    if arr.dtype.kind == "O":
        # Object arrays appear when Python ints exceed 64 bits.
        try:
            arr = arr.astype(np.uint64)
        except (OverflowError, ValueError, TypeError):
            raise ValidationError(f"{name} values out of representable range")
    if arr.dtype.kind not in "iu":
        raise ValidationError(f"{name} values must be integers")
    if arr.size:
        if arr.dtype.kind == "i" and int(arr.min()) < 0:
            raise ValidationError(f"{name} values must be non-negative")
        if int(arr.max()) > upper:
            raise ValidationError(f"{name} value {int(arr.max())} exceeds {upper}")
    return arr.astype(dtype)


@dataclass(frozen=True, eq=False)
class EventStream:
    """A timestamp-sorted event sequence plus its sensor geometry.

    Columns are numpy arrays of equal length: ``t`` (u64 microseconds),
    ``x``/``y`` (u16 pixel coordinates), ``p`` (i8, -1 or +1).  Events
    arriving out of order are repaired by a stable sort on ``t``, so
    equal-timestamp runs keep their input order.  Instances are
    immutable after construction and safe to share across threads.
    """

    width: int
    height: int
    t: np.ndarray
    x: np.ndarray
    y: np.ndarray
    p: np.ndarray

    def __post_init__(self) -> None:
        w, h = self.width, self.height
        if not isinstance(w, int) or not isinstance(h, int):
            raise ValidationError("width/height must be integers")
        if not (1 <= w <= MAX_DIM and 1 <= h <= MAX_DIM):
            raise ValidationError(f"geometry {w}x{h} outside [1, {MAX_DIM}]")

        t = _as_column(self.t, "<u8", "timestamp", MAX_TIMESTAMP)
        x = _as_column(self.x, "<u2", "x", MAX_DIM)
        y = _as_column(self.y, "<u2", "y", MAX_DIM)
        p = np.asarray(self.p)
        if p.dtype.kind not in "iu":
            raise ValidationError("polarity values must be integers")
        # Membership is checked before the i8 cast so oversized values
        # cannot wrap into a legal -1/+1.
        if p.size and not np.isin(p, (-1, 1)).all():
            raise ValidationError("polarity must be -1 or +1")
        p = p.astype("<i1")

        n = len(t)
        if not (len(x) == len(y) == len(p) == n):
            raise ValidationError("event columns have mismatched lengths")
        if n:
            if int(x.max()) >= w:
                raise ValidationError(f"x coordinate {int(x.max())} out of range for width {w}")
            if int(y.max()) >= h:
                raise ValidationError(f"y coordinate {int(y.max())} out of range for height {h}")
            if not bool(np.all(t[1:] >= t[:-1])):
                order = np.argsort(t, kind="stable")
                t, x, y, p = t[order], x[order], y[order], p[order]

        for name, arr in (("t", t), ("x", x), ("y", y), ("p", p)):
            arr = np.ascontiguousarray(arr)
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    @classmethod
    def empty(cls, width: int, height: int) -> "EventStream":
        return cls(width, height, np.empty(0, "<u8"), np.empty(0, "<u2"),
                   np.empty(0, "<u2"), np.empty(0, "<i1"))

    @classmethod
    def from_events(cls, width: int, height: int,
                    events: Iterable[tuple[int, int, int, int]]) -> "EventStream":
        """Build a stream from (x, y, p, t) tuples."""
        ev = list(events)
        if not ev:
            return cls.empty(width, height)
        xs, ys, ps, ts = zip(*ev)
        return cls(width, height, np.array(ts), np.array(xs), np.array(ys),
                   np.array(ps, dtype=np.int64))

    def __len__(self) -> int:
        return len(self.t)

    def __getitem__(self, i: int) -> Event:
        return Event(int(self.x[i]), int(self.y[i]), int(self.p[i]), int(self.t[i]))

    def __iter__(self) -> Iterator[Event]:
        for i in range(len(self)):
            yield self[i]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, EventStream):
            return NotImplemented
        return (self.width == other.width and self.height == other.height
                and np.array_equal(self.t, other.t) and np.array_equal(self.x, other.x)
                and np.array_equal(self.y, other.y) and np.array_equal(self.p, other.p))

    def __repr__(self) -> str:
        return f"EventStream({self.width}x{self.height}, {len(self)} events)"

    def channels(self) -> np.ndarray:
        """Per-event frame channel: 0 for p == -1, 1 for p == +1."""
        return (self.p == 1).astype(np.int64)

    def select(self, keep: np.ndarray) -> "EventStream":
        """New stream with the events where ``keep`` is True, order preserved."""
        return EventStream(self.width, self.height, self.t[keep], self.x[keep],
                           self.y[keep], self.p[keep])


@dataclass(frozen=True, eq=False)
class FrameTensor:
    """Integrated event counts, shape [T slices, 2 polarity channels, H, W].

    Cells are u32; values that cannot fit the on-disk format are rejected
    at construction rather than truncated at write time.
    """

    counts: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.counts)
        if arr.ndim != 4:
            raise ValidationError(f"counts must be 4-dimensional, got shape {arr.shape}")
        t, c, h, w = arr.shape
        if c != 2:
            raise ValidationError(f"counts must have 2 polarity channels, got {c}")
        if t < 1 or h < 1 or w < 1:
            raise ValidationError(f"degenerate tensor shape {arr.shape}")
        if arr.dtype.kind == "O" or arr.dtype.kind == "f":
            try:
                arr = arr.astype(np.int64)
            except (OverflowError, ValueError, TypeError):
                raise ValidationError("counts out of representable range")
        if arr.dtype.kind not in "iu":
            raise ValidationError("counts must be integers")
        if arr.size:
            if arr.dtype.kind == "i" and int(arr.min()) < 0:
                raise ValidationError("counts must be non-negative")
            if int(arr.max()) > MAX_COUNT:
                raise ValidationError(f"count {int(arr.max())} exceeds u32 range")
        arr = np.ascontiguousarray(arr.astype("<u4"))
        arr.flags.writeable = False
        object.__setattr__(self, "counts", arr)

    @property
    def num_slices(self) -> int:
        return self.counts.shape[0]

    @property
    def height(self) -> int:
        return self.counts.shape[2]

    @property
    def width(self) -> int:
        return self.counts.shape[3]

    def slice_sums(self) -> np.ndarray:
        """Total events integrated into each slice."""
        return self.counts.sum(axis=(1, 2, 3), dtype=np.uint64)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, FrameTensor):
            return NotImplemented
        return np.array_equal(self.counts, other.counts)

    def __repr__(self) -> str:
        t, _, h, w = self.counts.shape
        return f"FrameTensor(T={t}, H={h}, W={w})"


# ---------------------------------------------------------------------------
# Text stream format
# ---------------------------------------------------------------------------

def parse_text_stream(data: bytes | str,
                      polarity_encoding: str = POLARITY_PM1) -> EventStream:
    """Parse the text stream format.

    ``polarity_encoding`` selects how the p column is interpreted:
    ``"neg-one/one"`` (native) or ``"zero/one"`` (0 mapped to -1, 1 to +1).
    Malformed input raises FormatError naming the offending line.
    """
    if polarity_encoding not in POLARITY_ENCODINGS:
        raise ValidationError(f"unknown polarity encoding {polarity_encoding!r}")
    if isinstance(data, bytes):
        try:
            text = data.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise FormatError(f"stream text is not valid UTF-8: {exc}") from exc
    else:
        text = data

    lines = text.splitlines()
    if not lines:
        raise FormatError("malformed header: empty input")
    header = lines[0].strip()
    if not header.startswith("#"):
        raise FormatError("malformed header at line 1: expected '# <width> <height>'")
    fields = header[1:].split()
    if len(fields) != 2:
        raise FormatError("malformed header at line 1: expected '# <width> <height>'")
    try:
        width, height = int(fields[0]), int(fields[1])
    except ValueError:
        raise FormatError("malformed header at line 1: non-numeric geometry")
    if not (1 <= width <= MAX_DIM and 1 <= height <= MAX_DIM):
        raise FormatError(f"malformed header at line 1: geometry {width}x{height} out of range")

    ts: list[int] = []
    xs: list[int] = []
    ys: list[int] = []
    ps: list[int] = []
    zero_one = polarity_encoding == POLARITY_01
    for lineno, raw in enumerate(lines[1:], start=2):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 4:
            raise FormatError(f"expected 4 fields at line {lineno}, got {len(parts)}")
        try:
            t, x, y, p = (int(v) for v in parts)
        except ValueError:
            raise FormatError(f"non-numeric field at line {lineno}: {line!r}")
        if not (0 <= t <= MAX_TIMESTAMP):
            raise FormatError(f"timestamp out of range at line {lineno}")
        if not (0 <= x < width) or not (0 <= y < height):
            raise FormatError(f"coordinate out of range at line {lineno}: ({x}, {y})")
        if zero_one:
            if p not in (0, 1):
                raise FormatError(f"invalid polarity at line {lineno}: {p}")
            p = -1 if p == 0 else 1
        elif p not in (-1, 1):
            raise FormatError(f"invalid polarity at line {lineno}: {p}")
        ts.append(t)
        xs.append(x)
        ys.append(y)
        ps.append(p)

    return EventStream(width, height,
                       np.array(ts, dtype="<u8"), np.array(xs, dtype="<u2"),
                       np.array(ys, dtype="<u2"), np.array(ps, dtype="<i1"))


def write_text_stream(stream: EventStream) -> bytes:
    """Serialize to the canonical text form (single spaces, -1/+1 polarity)."""
    out = [f"# {stream.width} {stream.height}"]
    t, x, y, p = stream.t, stream.x, stream.y, stream.p
    for i in range(len(stream)):
        out.append(f"{t[i]} {x[i]} {y[i]} {p[i]}")
    out.append("")
    return "\n".join(out).encode("utf-8")


# ---------------------------------------------------------------------------
# Binary stream format
# ---------------------------------------------------------------------------

def parse_binary_stream(data: bytes) -> EventStream:
    if len(data) < _STREAM_HEADER.size:
        raise FormatError(f"truncated header: {len(data)} bytes, need {_STREAM_HEADER.size}")
    magic, version, width, height, reserved, count = _STREAM_HEADER.unpack_from(data)
    if magic != STREAM_MAGIC:
        raise FormatError(f"bad magic {magic!r}, expected {STREAM_MAGIC!r}")
    if version != FORMAT_VERSION:
        raise FormatError(f"unsupported stream format version {version}")
    if reserved != 0:
        raise FormatError(f"nonzero reserved field {reserved}")
    if not (1 <= width <= MAX_DIM and 1 <= height <= MAX_DIM):
        raise FormatError(f"invalid geometry {width}x{height} in header")
    payload = len(data) - _STREAM_HEADER.size
    expected = count * _RECORD_DTYPE.itemsize
    if payload < expected:
        raise FormatError(f"truncated records: header declares {count} events "
                          f"({expected} bytes), found {payload}")
    if payload > expected:
        raise FormatError(f"declared-count mismatch: {payload - expected} trailing bytes "
                          f"after {count} declared events")
    rec = np.frombuffer(data, _RECORD_DTYPE, count=count, offset=_STREAM_HEADER.size)
    if count and rec["pad"].any():
        raise FormatError("nonzero padding bytes in event records")
    if count and not np.isin(rec["p"], (-1, 1)).all():
        bad = rec["p"][~np.isin(rec["p"], (-1, 1))][0]
        raise FormatError(f"invalid polarity {int(bad)} in event records")
    if count:
        if int(rec["x"].max()) >= width:
            raise FormatError(f"x coordinate {int(rec['x'].max())} out of range "
                              f"for width {width}")
        if int(rec["y"].max()) >= height:
            raise FormatError(f"y coordinate {int(rec['y'].max())} out of range "
                              f"for height {height}")
    return EventStream(width, height, rec["t"].copy(), rec["x"].copy(),
                       rec["y"].copy(), rec["p"].copy())


def write_binary_stream(stream: EventStream) -> bytes:
    n = len(stream)
    rec = np.zeros(n, dtype=_RECORD_DTYPE)
    rec["t"] = stream.t
    rec["x"] = stream.x
    rec["y"] = stream.y
    rec["p"] = stream.p
    header = _STREAM_HEADER.pack(STREAM_MAGIC, FORMAT_VERSION, stream.width,
                                 stream.height, 0, n)
    return header + rec.tobytes()


# ---------------------------------------------------------------------------
# Binary frame format
# ---------------------------------------------------------------------------

def write_frame_tensor(frames: FrameTensor) -> bytes:
    t, _, h, w = frames.counts.shape
    header = _FRAME_HEADER.pack(FRAME_MAGIC, FORMAT_VERSION, t, 2, h, w)
    return header + frames.counts.tobytes()


def read_frame_tensor(data: bytes) -> FrameTensor:
    if len(data) < _FRAME_HEADER.size:
        raise FormatError(f"truncated header: {len(data)} bytes, need {_FRAME_HEADER.size}")
    magic, version, t, c, h, w = _FRAME_HEADER.unpack_from(data)
    if magic != FRAME_MAGIC:
        raise FormatError(f"bad magic {magic!r}, expected {FRAME_MAGIC!r}")
    if version != FORMAT_VERSION:
        raise FormatError(f"unsupported frame format version {version}")
    if c != 2:
        raise FormatError(f"unsupported channel count {c}, expected 2")
    if t < 1 or h < 1 or w < 1:
        raise FormatError(f"degenerate tensor dimensions T={t} H={h} W={w}")
    cells = t * 2 * h * w          # Python ints: no overflow on the product
    expected = cells * 4
    payload = len(data) - _FRAME_HEADER.size
    if payload < expected:
        raise FormatError(f"truncated payload: dimensions T={t} H={h} W={w} require "
                          f"{expected} bytes, found {payload}")
    if payload > expected:
        raise FormatError(f"payload size mismatch: {payload - expected} trailing bytes")
    counts = np.frombuffer(data, "<u4", count=cells, offset=_FRAME_HEADER.size)
    return FrameTensor(counts.reshape(t, 2, h, w).copy())
