"""Throughput benchmark for the augmentation ops.

Reports wall time and events/second per op over repeated runs.  No
pass/fail thresholds: the point is to measure, not to judge.
"""

from __future__ import annotations

import statistics
import time
from typing import Callable

import numpy as np

from . import core
from .core import EventStream
from .errors import ValidationError
from .integrator import MstiSpec, integrate, msti_variants, slice_stream
from .spatial import PatchGrid, spatial_saliency, ssem_filter_events, ssem_mask
from .temporal import build_drop_plan, temporal_saliency, tsem_filter_events

BENCH_SLICES = 10
BENCH_PATCH = 16
BENCH_MASK_RATE = 0.25
BENCH_DROP_RATE = 0.1
BENCH_SEED = 0


def synth_stream(num_events: int, width: int = 128, height: int = 128,
                 seed: int = 0) -> EventStream:
    """Uniform random events with sorted random timestamps."""
    rng = np.random.default_rng(seed)
    t = np.sort(rng.integers(0, 10_000_000, size=num_events, dtype=np.uint64))
    x = rng.integers(0, width, size=num_events, dtype=np.uint16)
    y = rng.integers(0, height, size=num_events, dtype=np.uint16)
    p = rng.choice(np.array([-1, 1], dtype=np.int8), size=num_events)
    return EventStream(width, height, t, x, y, p)


def _op_runners(stream: EventStream) -> dict[str, Callable[[], object]]:
    grid = PatchGrid(stream.width, stream.height, BENCH_PATCH)

    def run_integrate():
        return integrate(stream, slice_stream(stream, BENCH_SLICES))

    def run_msti():
        return msti_variants(stream, MstiSpec(BENCH_SLICES, 2, 2))

    def run_spatial_saliency():
        return spatial_saliency(stream, grid)

    def run_ssem():
        mask = ssem_mask(spatial_saliency(stream, grid), BENCH_MASK_RATE, grid)
        return ssem_filter_events(stream, mask)

    def run_temporal_saliency():
        return temporal_saliency(stream, slice_stream(stream, BENCH_SLICES))

    def run_tsem():
        plan = slice_stream(stream, BENCH_SLICES)
        drop = build_drop_plan(temporal_saliency(stream, plan), BENCH_DROP_RATE)
        return tsem_filter_events(stream, plan, drop, BENCH_SEED)

    def run_serialize():
        core.parse_binary_stream(core.write_binary_stream(stream))

    return {
        "integrate": run_integrate,
        "msti": run_msti,
        "spatial_saliency": run_spatial_saliency,
        "ssem": run_ssem,
        "temporal_saliency": run_temporal_saliency,
        "tsem": run_tsem,
        "serialize": run_serialize,
    }


def available_ops() -> tuple[str, ...]:
    return ("integrate", "msti", "spatial_saliency", "ssem",
            "temporal_saliency", "tsem", "serialize")


def run_bench(stream: EventStream, ops: list[str], repeat: int = 3) -> dict:
    """Time each requested op `repeat` times; returns a JSON-ready report."""
    if repeat < 1:
        raise ValidationError("repeat must be >= 1")
    runners = _op_runners(stream)
    unknown = [op for op in ops if op not in runners]
    if unknown:
        raise ValidationError(f"unknown bench ops: {', '.join(unknown)} "
                              f"(available: {', '.join(available_ops())})")
    n = len(stream)
    sections = []
    for op in ops:
        runs = []
        for _ in range(repeat):
            start = time.perf_counter()
            runners[op]()
            runs.append(time.perf_counter() - start)
        median = statistics.median(runs)
        sections.append({
            "op": op,
            "runs_s": runs,
            "median_s": median,
            "events_per_sec": (n / median) if median > 0 else None,
        })
    return {
        "events": n,
        "width": stream.width,
        "height": stream.height,
        "peak_events": n,
        "peak_stream_bytes": 20 + 16 * n,
        "repeat": repeat,
        "ops": sections,
    }
