"""The four uncertainty-injection strategies.

Two axes: *how* the factor is produced (DIU uses the latest epoch conflict,
AIU the running mean K') and *where* it lands (Product scales the whole loss,
Deep only the classification term). Epoch 1 always trains with w = 1 because
no validation conflict exists yet.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

from .errors import EmptyHistoryError, NonPositiveFactorError, OutOfRangeError
from .scorecard import ScoreCard, lookup

LOSS_SUM_TOL = 1e-9


class How(enum.Enum):
    DIU = "diu"
    AIU = "aiu"


class Where(enum.Enum):
    PRODUCT = "product"
    DEEP = "deep"


@dataclass(frozen=True)
class UncertaintyState:
    """Per-run history of epoch conflict values, oldest first."""

    history: tuple[float, ...] = ()

    @property
    def n(self) -> int:
        return len(self.history)


@dataclass(frozen=True)
class LossBreakdown:
    """Classification loss, localization loss, and their sum."""

    classification: float
    localization: float
    total: float

    def __post_init__(self):
        if self.classification < 0.0 or self.localization < 0.0:
            raise OutOfRangeError("loss terms must be non-negative")
        if abs(self.total - (self.classification + self.localization)) > LOSS_SUM_TOL:
            raise OutOfRangeError(
                f"total {self.total!r} != classification + localization"
            )

    @classmethod
    def of(cls, classification: float, localization: float) -> "LossBreakdown":
        return cls(classification, localization, classification + localization)


@dataclass(frozen=True)
class InjectionConfig:
    """One choice per axis plus the scorecard producing w(K).

    ``window`` limits how many trailing epochs AIU averages over;
    None means the whole history (the default).
    """

    how: How
    where: Where
    card: ScoreCard
    window: int | None = None


def record_epoch_uncertainty(state: UncertaintyState, k: float) -> UncertaintyState:
    """Append one epoch conflict value, returning the extended state."""
    if not 0.0 <= k <= 1.0:
        raise OutOfRangeError(f"K must lie in [0, 1], got {k!r}")
    return UncertaintyState(state.history + (float(k),))


def diu_factor(state: UncertaintyState, card: ScoreCard) -> float:
    """Factor from the latest recorded conflict only."""
    if not state.history:
        raise EmptyHistoryError("no conflict recorded yet")
    return lookup(card, state.history[-1])


def aiu_mean(state: UncertaintyState, window: int | None = None) -> float:
    """The running mean K' over the history (or its trailing window)."""
    if not state.history:
        raise EmptyHistoryError("no conflict recorded yet")
    values = state.history if window is None else state.history[-window:]
    # fsum keeps the mean correctly rounded; a naive sum can push a K sitting
    # exactly on a band boundary into the neighbouring band
    return math.fsum(values) / len(values)


def aiu_factor(
    state: UncertaintyState, card: ScoreCard, window: int | None = None
) -> float:
    """Factor from the running mean K' of the recorded history.

    ``window`` restricts the mean to the most recent entries; by default the
    whole history counts.
    """
    return lookup(card, aiu_mean(state, window))


def injection_factor(state: UncertaintyState, config: InjectionConfig) -> float:
    """The factor a training epoch should apply; 1.0 before any validation."""
    if not state.history:
        return 1.0
    if config.how is How.DIU:
        return diu_factor(state, config.card)
    return aiu_factor(state, config.card, config.window)


def apply_product_injection(loss: LossBreakdown, w: float) -> LossBreakdown:
    """Scale the total loss: both terms are multiplied by w."""
    if w <= 0.0:
        raise NonPositiveFactorError(f"factor must be positive, got {w!r}")
    return LossBreakdown(
        w * loss.classification, w * loss.localization, w * loss.total
    )


def apply_deep_injection(loss: LossBreakdown, w: float) -> LossBreakdown:
    """Scale only the classification loss; localization stays untouched."""
    if w <= 0.0:
        raise NonPositiveFactorError(f"factor must be positive, got {w!r}")
    scaled = w * loss.classification
    return LossBreakdown(scaled, loss.localization, scaled + loss.localization)
