"""Capability transfer: per-class model rankings moved through the bridge plan.

Class-level zero-shot accuracies become per-class rankings (1 = best, ties
averaged); each model's source-class rank row is pushed through the transport
plan unscaled and averaged over target classes. Smaller aggregate values mean
a better predicted model.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata

from .core import ValidationError
from .transport import TransportPlan

logger = logging.getLogger("swab.capability")

MASS_FLOOR = 1e-9


@dataclass(frozen=True)
class RankTable:
    """M x k rank values; every column is a tied ranking of 1..M."""

    model_ids: tuple[str, ...]
    ranks: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "model_ids", tuple(self.model_ids))
        r = np.ascontiguousarray(np.asarray(self.ranks, dtype=np.float64))
        if r.ndim != 2 or r.shape[0] != len(self.model_ids):
            raise ValidationError("rank matrix must be M x k")
        m = r.shape[0]
        expected = m * (m + 1) / 2
        sums = r.sum(axis=0)
        if np.any(np.abs(sums - expected) > 1e-9):
            raise ValidationError("rank columns must sum to M(M+1)/2")
        r.setflags(write=False)
        object.__setattr__(self, "ranks", r)

    @property
    def class_count(self) -> int:
        return self.ranks.shape[1]


def class_rankings(
    accuracies: np.ndarray, model_ids: tuple[str, ...] | list[str]
) -> RankTable:
    """Rank models per class by accuracy, 1 = best, equal values share the
    average of their positional ranks."""
    acc = np.asarray(accuracies, dtype=np.float64)
    if acc.ndim != 2:
        raise ValidationError("accuracies must be M x k")
    if acc.shape[0] < 2:
        raise ValidationError("need at least two models to rank")
    if not np.all(np.isfinite(acc)):
        raise ValidationError("accuracies contain NaN/Inf")
    ranks = np.empty_like(acc)
    for j in range(acc.shape[1]):
        ranks[:, j] = rankdata(-acc[:, j], method="average")
    return RankTable(tuple(model_ids), ranks)


def transfer_rankings(ranks: RankTable, plan: TransportPlan) -> np.ndarray:
    """Row m of the result is r_m^S @ gamma, unscaled."""
    if plan.gamma.shape[0] != ranks.class_count:
        raise ValidationError(
            f"plan rows {plan.gamma.shape[0]} != rank columns {ranks.class_count}"
        )
    return ranks.ranks @ plan.gamma


def aggregate_target_rank(
    transferred: np.ndarray,
    column_mass: np.ndarray | None = None,
    mass_floor: float = MASS_FLOOR,
) -> np.ndarray:
    """Mean transferred rank per model; smaller = predicted better.

    When column masses are supplied (partial plans), columns that received
    less than mass_floor are excluded from the mean and counted in the log.
    """
    t = np.asarray(transferred, dtype=np.float64)
    if t.ndim != 2 or t.shape[1] < 1:
        raise ValidationError("transferred ranks must be M x k_T with k_T >= 1")
    if column_mass is None:
        return t.mean(axis=1)
    mask = np.asarray(column_mass) >= mass_floor
    dropped = int((~mask).sum())
    if dropped:
        logger.info("aggregate_target_rank: excluding %d near-empty column(s)", dropped)
    if not mask.any():
        raise ValidationError("every target column is below the mass floor")
    return t[:, mask].mean(axis=1)


def uniform_plan(k_s: int, k_t: int) -> TransportPlan:
    """The average-rank baseline: every source class weighs the same."""
    gamma = np.full((k_s, k_t), 1.0 / (k_s * k_t))
    return TransportPlan(
        gamma=gamma,
        row_marginal=np.full(k_s, 1.0 / k_s),
        col_marginal=np.full(k_t, 1.0 / k_t),
        total_mass=1.0,
        solver_tag="uniform",
        objective=0.0,
    )
