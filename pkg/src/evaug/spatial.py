"""Patch-level spatial saliency and the spatial-salient event mask.

Event density per patch is a cheap, training-free stand-in for object
salience: because event data is sparse, busy patches are where things
happen.  The mask zeroes the densest patches: rank patches by density,
take the density of the rank-floor(k*r) patch as threshold epsilon, and
mask every patch strictly denser than epsilon.  Strictness means ties at
the threshold survive, so the realized mask rate can undershoot r.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import EventStream, FrameTensor
from .errors import ValidationError
from .integrator import SlicePlan
from .ranking import SaliencyRanking, rank_by_density

DEFAULT_PATCH_SIZE = 16


@dataclass(frozen=True)
class PatchGrid:
    """Square-patch partition of a W x H sensor.

    Pixel (x, y) belongs to patch ``(y // patch_size) * cols + (x // patch_size)``
    (row-major).  Boundary patches are smaller when the geometry is not a
    multiple of patch_size; their raw counts are used as-is, with no
    density normalization.
    """

    width: int
    height: int
    patch_size: int = DEFAULT_PATCH_SIZE

    def __post_init__(self) -> None:
        if self.patch_size < 1:
            raise ValidationError("patch_size must be >= 1")
        if self.width < 1 or self.height < 1:
            raise ValidationError("grid geometry must be positive")

    @property
    def cols(self) -> int:
        return -(-self.width // self.patch_size)

    @property
    def rows(self) -> int:
        return -(-self.height // self.patch_size)

    @property
    def num_patches(self) -> int:
        return self.rows * self.cols

    def patch_ids(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        px = x.astype(np.int64) // self.patch_size
        py = y.astype(np.int64) // self.patch_size
        return py * self.cols + px

    def matches(self, width: int, height: int) -> bool:
        return self.width == width and self.height == height


def _check_geometry(grid: PatchGrid, width: int, height: int, what: str) -> None:
    if not grid.matches(width, height):
        raise ValidationError(f"grid geometry {grid.width}x{grid.height} does not "
                              f"match {what} geometry {width}x{height}")


def spatial_saliency(stream: EventStream, grid: PatchGrid) -> SaliencyRanking:
    """Per-patch event counts over the whole stream, ranked descending."""
    _check_geometry(grid, stream.width, stream.height, "stream")
    if len(stream) == 0:
        return rank_by_density(np.zeros(grid.num_patches, dtype=np.int64))
    ids = grid.patch_ids(stream.x, stream.y)
    return rank_by_density(np.bincount(ids, minlength=grid.num_patches))


@dataclass(frozen=True, eq=False)
class SpatialMask:
    """Boolean per-patch mask plus the density threshold that produced it.

    ``masked[i]`` is True exactly when the patch's density strictly
    exceeds ``epsilon``.  The pixel view is a {0, 1} image with 0 on
    masked patches, suitable for multiplying into frame tensors.
    """

    grid: PatchGrid
    masked: np.ndarray
    epsilon: float

    def __post_init__(self) -> None:
        masked = np.asarray(self.masked, dtype=bool)
        if masked.shape != (self.grid.num_patches,):
            raise ValidationError(f"mask length {masked.shape} does not match "
                                  f"patch count {self.grid.num_patches}")
        masked = np.ascontiguousarray(masked)
        masked.flags.writeable = False
        object.__setattr__(self, "masked", masked)

    def num_masked(self) -> int:
        return int(self.masked.sum())

    def pixel_view(self) -> np.ndarray:
        """{0, 1} image of shape (H, W): 0 on masked patches, 1 elsewhere."""
        g = self.grid
        keep = (~self.masked).reshape(g.rows, g.cols).astype(np.uint32)
        full = np.repeat(np.repeat(keep, g.patch_size, axis=0), g.patch_size, axis=1)
        return full[: g.height, : g.width]


def ssem_mask(ranking: SaliencyRanking, r: float, grid: PatchGrid) -> SpatialMask:
    """Build the spatial mask for target mask rate r in [0, 1].

    The threshold is the density of the rank-floor(k*r) patch (1-indexed);
    patches strictly denser are masked.  floor(k*r) = 0 masks nothing
    (threshold +inf).  At most floor(k*r) patches end up masked, and
    fewer whenever densities tie at the threshold.
    """
    if not (0.0 <= r <= 1.0):
        raise ValidationError(f"mask rate r={r} outside [0, 1]")
    k = len(ranking)
    if k != grid.num_patches:
        raise ValidationError(f"ranking covers {k} units but grid has "
                              f"{grid.num_patches} patches")
    if k < 1:
        raise ValidationError("cannot mask an empty ranking")
    cut = math.floor(k * r)
    if cut < 1:
        epsilon = math.inf
    else:
        epsilon = float(ranking.densities[ranking.order[cut - 1]])
    masked = ranking.densities > epsilon
    return SpatialMask(grid, masked, epsilon)


def apply_frame_mask(frames: FrameTensor, mask: SpatialMask) -> FrameTensor:
    """Zero the masked patches in every slice and channel (elementwise product)."""
    _check_geometry(mask.grid, frames.width, frames.height, "frame")
    pixel = mask.pixel_view()
    return FrameTensor(frames.counts * pixel[None, None, :, :])


def ssem_filter_events(stream: EventStream, mask: SpatialMask) -> EventStream:
    """Remove every event that falls in a masked patch, order preserved."""
    _check_geometry(mask.grid, stream.width, stream.height, "stream")
    if len(stream) == 0 or not mask.masked.any():
        return stream
    ids = mask.grid.patch_ids(stream.x, stream.y)
    return stream.select(~mask.masked[ids])


def ssem_filter_events_per_frame(stream: EventStream, plan: SlicePlan,
                                 grid: PatchGrid, r: float) -> EventStream:
    """Per-frame variant: rank and mask each slice independently.

    Each slice gets its own density ranking and threshold; events outside
    every slice are kept.  The stream-level ``ssem_filter_events`` is the
    default, this is the alternative reading where salience is judged
    frame by frame.
    """
    _check_geometry(grid, stream.width, stream.height, "stream")
    if plan.max_index() > len(stream):
        raise ValidationError(f"plan boundary {plan.max_index()} exceeds "
                              f"event count {len(stream)}")
    keep = np.ones(len(stream), dtype=bool)
    ids = grid.patch_ids(stream.x, stream.y) if len(stream) else None
    for start, end in plan.boundaries:
        if end <= start:
            continue
        slice_ids = ids[start:end]
        ranking = rank_by_density(np.bincount(slice_ids, minlength=grid.num_patches))
        mask = ssem_mask(ranking, r, grid)
        keep[start:end] = ~mask.masked[slice_ids]
    return stream.select(keep)
