"""Count-based stream slicing and frame integration.

A stream of N events is divided into T slices of exactly ``N // T``
events each; the trailing ``N mod T`` events belong to no slice and are
dropped by integration.  This is deliberate: slicing is by event count,
not wall-clock time, so every produced frame carries the same number of
events regardless of how bursty the stream is.  A time-based mode is
intentionally not provided.

Integration counts events per (slice, polarity channel, y, x) cell,
giving a [T, 2, H, W] tensor.  ``msti_variants`` produces the same
stream at three temporal scales: slices shortened n-fold, the base
scale, and slices lengthened m-fold.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .core import EventStream, FrameTensor
from .errors import ValidationError


@dataclass(frozen=True)
class SlicePlan:
    """Half-open [start, end) index ranges into an event array, one per slice.

    ``slice_stream`` produces uniform contiguous plans; unequal plans can
    be constructed directly (e.g. from wall-clock boundaries) and every
    consumer accepts them.  Ranges must be sorted and non-overlapping.
    """

    num_slices: int
    boundaries: tuple[tuple[int, int], ...]

    def __post_init__(self) -> None:
        if self.num_slices < 1:
            raise ValidationError("slice count must be >= 1")
        if len(self.boundaries) != self.num_slices:
            raise ValidationError(f"{self.num_slices} slices declared but "
                                  f"{len(self.boundaries)} boundaries given")
        prev_end = 0
        for j, (start, end) in enumerate(self.boundaries):
            if start < 0 or end < start:
                raise ValidationError(f"slice {j} has invalid range [{start}, {end})")
            if start < prev_end:
                raise ValidationError(f"slice {j} overlaps its predecessor")
            prev_end = end

    def starts(self) -> np.ndarray:
        return np.array([s for s, _ in self.boundaries], dtype=np.int64)

    def ends(self) -> np.ndarray:
        return np.array([e for _, e in self.boundaries], dtype=np.int64)

    def sizes(self) -> np.ndarray:
        return self.ends() - self.starts()

    def max_index(self) -> int:
        return max((e for _, e in self.boundaries), default=0)


def slice_stream(stream: EventStream, num_slices: int) -> SlicePlan:
    """Uniform count-based plan: slice j covers [w*j, w*(j+1)) with w = N // T.

    Rejects T = 0 and, for non-empty streams, T > N (which would yield
    all-empty slices and poison every density-based consumer downstream).
    """
    if num_slices < 1:
        raise ValidationError("slice count must be >= 1")
    n = len(stream)
    if n > 0 and num_slices > n:
        raise ValidationError(f"T exceeds event count (T={num_slices}, N={n})")
    w = n // num_slices
    bounds = tuple((w * j, w * (j + 1)) for j in range(num_slices))
    return SlicePlan(num_slices, bounds)


def event_slice_ids(plan: SlicePlan, num_events: int) -> np.ndarray:
    """Slice id per event index, -1 for events outside every slice."""
    if plan.max_index() > num_events:
        raise ValidationError(f"plan boundary {plan.max_index()} exceeds "
                              f"event count {num_events}")
    ids = np.full(num_events, -1, dtype=np.int64)
    for j, (start, end) in enumerate(plan.boundaries):
        ids[start:end] = j
    return ids


def integrate(stream: EventStream, plan: SlicePlan) -> FrameTensor:
    """Count events per (slice, polarity channel, y, x).

    Channel 0 holds p = -1 counts, channel 1 holds p = +1.  Per-slice
    totals equal the plan's slice sizes exactly.
    """
    h, w = stream.height, stream.width
    t_slices = plan.num_slices
    ids = event_slice_ids(plan, len(stream))
    keep = ids >= 0
    cells = t_slices * 2 * h * w
    if not keep.any():
        return FrameTensor(np.zeros((t_slices, 2, h, w), dtype=np.uint32))
    sid = ids[keep]
    chan = stream.channels()[keep]
    ys = stream.y[keep].astype(np.int64)
    xs = stream.x[keep].astype(np.int64)
    flat = ((sid * 2 + chan) * h + ys) * w + xs
    counts = np.bincount(flat, minlength=cells)
    return FrameTensor(counts.reshape(t_slices, 2, h, w))


@dataclass(frozen=True)
class MstiSpec:
    """Multi-scale integration factors.

    ``n`` shortens the integration window n-fold (more slices), ``m``
    lengthens it m-fold (fewer slices).  n = m = 2 (half and double
    scale) works well without tuning and is the default.
    """

    base_T: int
    n: int = 2
    m: int = 2

    def __post_init__(self) -> None:
        if self.base_T < 1:
            raise ValidationError("base_T must be >= 1")
        if self.n < 1 or self.m < 1:
            raise ValidationError("scale factors n and m must be >= 1")
        if self.base_T < self.m:
            raise ValidationError(f"base_T ({self.base_T}) must be >= m ({self.m}) "
                                  "so the long-term variant has at least one slice")

    @property
    def short_T(self) -> int:
        return self.n * self.base_T

    @property
    def long_T(self) -> int:
        # Ceiling keeps at least one slice when m does not divide base_T.
        return -(-self.base_T // self.m)


class MstiResult(NamedTuple):
    short_term: FrameTensor
    base: FrameTensor
    long_term: FrameTensor


def msti_variants(stream: EventStream, spec: MstiSpec) -> MstiResult:
    """Integrate the stream at 1/n, base, and m-fold temporal scale."""
    n_events = len(stream)
    if spec.short_T > n_events:
        raise ValidationError(f"short-term slice count {spec.short_T} exceeds "
                              f"event count {n_events}")
    return MstiResult(
        short_term=integrate(stream, slice_stream(stream, spec.short_T)),
        base=integrate(stream, slice_stream(stream, spec.base_T)),
        long_term=integrate(stream, slice_stream(stream, spec.long_T)),
    )
