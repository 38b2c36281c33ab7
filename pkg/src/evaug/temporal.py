"""Per-slice temporal saliency and density-adaptive event dropping.

Each slice's drop probability scales with its density relative to the
sparsest in-scope slice: ``rate[i] = min(1, d[i] / d_min * p)``, so the
sparsest slice drops at exactly the base rate p and denser slices drop
proportionally more.  The raw product exceeds 1 whenever a slice is more
than 1/p times denser than the minimum, so rates are clamped.

Note that under uniform count-based slicing all slice densities equal
N // T, which makes every rate exactly p; the adaptivity only shows with
unequal plans (e.g. built from wall-clock boundaries) or a restricted
scope.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import MAX_TIMESTAMP, EventStream
from .errors import ValidationError
from .integrator import SlicePlan
from .ranking import SaliencyRanking, rank_by_density

SCOPE_ALL = "all"
SCOPE_TOP = "top"
SCOPES = (SCOPE_ALL, SCOPE_TOP)


def temporal_saliency(stream: EventStream, plan: SlicePlan) -> SaliencyRanking:
    """Per-slice event counts, ranked descending (ties by ascending slice index)."""
    if plan.max_index() > len(stream):
        raise ValidationError(f"plan boundary {plan.max_index()} exceeds "
                              f"event count {len(stream)}")
    return rank_by_density(plan.sizes())


@dataclass(frozen=True, eq=False)
class TemporalDropPlan:
    """Per-slice drop probabilities derived from a density ranking.

    ``min_density`` is the minimum over in-scope slices (None when the
    scope is empty and nothing is dropped).  Out-of-scope slices always
    get rate 0.
    """

    num_slices: int
    densities: np.ndarray
    min_density: int | None
    base_rate: float
    per_slice_rates: np.ndarray
    in_scope: np.ndarray

    def __post_init__(self) -> None:
        dens = np.asarray(self.densities, dtype=np.int64)
        rates = np.asarray(self.per_slice_rates, dtype=np.float64)
        scope = np.asarray(self.in_scope, dtype=bool)
        if not (len(dens) == len(rates) == len(scope) == self.num_slices):
            raise ValidationError("drop plan arrays must all have length T")
        if rates.size and (rates.min() < 0.0 or rates.max() > 1.0):
            raise ValidationError("per-slice rates must lie in [0, 1]")
        for name, arr in (("densities", dens), ("per_slice_rates", rates),
                          ("in_scope", scope)):
            arr = np.ascontiguousarray(arr)
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)


def build_drop_plan(ranking: SaliencyRanking, p: float, scope: str = SCOPE_ALL,
                    top_fraction: float | None = None) -> TemporalDropPlan:
    """Compute per-slice drop rates from a temporal density ranking.

    ``scope="all"`` drops in every slice; ``scope="top"`` restricts
    dropping to the floor(T * top_fraction) most salient slices.  Any
    in-scope slice with zero density is a hard error: the rate formula
    divides by the minimum in-scope density.
    """
    if not (0.0 <= p <= 1.0):
        raise ValidationError(f"base rate p={p} outside [0, 1]")
    if scope not in SCOPES:
        raise ValidationError(f"unknown scope {scope!r}, expected one of {SCOPES}")
    t = len(ranking)
    dens = ranking.densities
    in_scope = np.zeros(t, dtype=bool)
    if scope == SCOPE_ALL:
        in_scope[:] = True
    else:
        if top_fraction is None or not (0.0 <= top_fraction <= 1.0):
            raise ValidationError("scope 'top' requires top_fraction in [0, 1]")
        in_scope[ranking.order[: math.floor(t * top_fraction)]] = True

    if not in_scope.any():
        return TemporalDropPlan(t, dens, None, p, np.zeros(t), in_scope)

    min_density = int(dens[in_scope].min())
    if min_density == 0:
        raise ValidationError("min density is zero; drop plan undefined "
                              "(reduce T or narrow the scope)")
    rates = np.where(in_scope, np.minimum(1.0, dens / min_density * p), 0.0)
    return TemporalDropPlan(t, dens, min_density, p, rates, in_scope)


def slice_rng(seed: int, slice_index: int) -> np.random.Generator:
    """Generator for one slice, a pure function of (master seed, slice index).

    Slices can therefore be processed in any order or in parallel without
    changing which events are dropped.
    """
    return np.random.default_rng(np.random.SeedSequence([seed, slice_index]))


def tsem_filter_events(stream: EventStream, slice_plan: SlicePlan,
                       drop_plan: TemporalDropPlan, seed: int) -> EventStream:
    """Drop each event in slice i independently with probability rate[i].

    Events outside every slice (the count-based remainder) are always
    kept.  Output preserves the input event order, and a fixed
    (stream, plans, seed) triple reproduces the output bit-for-bit.
    """
    if not (0 <= seed <= MAX_TIMESTAMP):
        raise ValidationError("seed must fit in 64 unsigned bits")
    if drop_plan.num_slices != slice_plan.num_slices:
        raise ValidationError(f"drop plan covers {drop_plan.num_slices} slices, "
                              f"slice plan has {slice_plan.num_slices}")
    if slice_plan.max_index() > len(stream):
        raise ValidationError(f"plan boundary {slice_plan.max_index()} exceeds "
                              f"event count {len(stream)}")
    if not np.array_equal(drop_plan.densities, slice_plan.sizes()):
        raise ValidationError("drop plan densities do not match slice plan sizes")

    keep = np.ones(len(stream), dtype=bool)
    for i, (start, end) in enumerate(slice_plan.boundaries):
        rate = float(drop_plan.per_slice_rates[i])
        if rate <= 0.0 or end <= start:
            continue
        draws = slice_rng(seed, i).random(end - start)
        keep[start:end] = draws >= rate
    return stream.select(keep)
