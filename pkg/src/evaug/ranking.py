"""Density rankings shared by the spatial and temporal saliency passes."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError


@dataclass(frozen=True, eq=False)
class SaliencyRanking:
    """Per-unit event densities plus a density-descending index permutation.

    Units are spatial patches or temporal slices.  ``order[0]`` is the
    densest unit; ties are broken by ascending unit index so the ranking
    is deterministic.
    """

    densities: np.ndarray
    order: np.ndarray

    def __post_init__(self) -> None:
        dens = np.asarray(self.densities, dtype=np.int64)
        order = np.asarray(self.order, dtype=np.int64)
        if dens.ndim != 1 or order.shape != dens.shape:
            raise ValidationError("densities and order must be 1-d arrays of equal length")
        if dens.size and int(dens.min()) < 0:
            raise ValidationError("densities must be non-negative")
        seen = np.zeros(len(order), dtype=bool)
        if len(order) and (order.min() < 0 or order.max() >= len(order)):
            raise ValidationError("order is not a permutation")
        seen[order] = True
        if not seen.all():
            raise ValidationError("order is not a permutation")
        ranked = dens[order]
        if ranked.size and bool(np.any(ranked[1:] > ranked[:-1])):
            raise ValidationError("order is not density-descending")
        dens = np.ascontiguousarray(dens)
        order = np.ascontiguousarray(order)
        dens.flags.writeable = False
        order.flags.writeable = False
        object.__setattr__(self, "densities", dens)
        object.__setattr__(self, "order", order)

    def __len__(self) -> int:
        return len(self.densities)

    def ranks(self) -> np.ndarray:
        """Inverse permutation: ranks()[i] is the rank of unit i (0 = densest)."""
        inv = np.empty(len(self.order), dtype=np.int64)
        inv[self.order] = np.arange(len(self.order))
        return inv


def rank_by_density(densities: np.ndarray) -> SaliencyRanking:
    """Rank units by event density, descending, ties by ascending index."""
    dens = np.asarray(densities, dtype=np.int64)
    order = np.argsort(-dens, kind="stable")
    return SaliencyRanking(dens, order)
