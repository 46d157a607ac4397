"""Iteration-decayed mean conditioning and acquisition jitter."""

from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass(frozen=True)
class AdaptiveSchedule:
    """Decay laws for the conditioning offset and the EI jitter.

    offset(i) = constant_value / (1 + conditioning_decay * i)
    jitter(i) = jitter_base / (1 + jitter_decay * i)

    A decay of 0 freezes the corresponding schedule at its base value.
    """

    constant_value: float = 0.1
    conditioning_decay: float = 0.1
    jitter_base: float = 0.01
    jitter_decay: float = 0.1

    def __post_init__(self):
        for name in ("constant_value", "conditioning_decay", "jitter_base", "jitter_decay"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        if self.conditioning_decay < 0 or self.jitter_decay < 0:
            raise ValueError("decay rates must be non-negative")
        if self.jitter_base <= 0:
            raise ValueError(f"jitter_base must be > 0, got {self.jitter_base}")


def _check_iteration(iteration: int) -> None:
    if iteration < 0:
        raise ValueError(f"iteration must be >= 0, got {iteration}")


def conditioning_offset(s: AdaptiveSchedule, iteration: int) -> float:
    _check_iteration(iteration)
    return s.constant_value / (1.0 + s.conditioning_decay * iteration)


def acquisition_jitter(s: AdaptiveSchedule, iteration: int) -> float:
    _check_iteration(iteration)
    return s.jitter_base / (1.0 + s.jitter_decay * iteration)


def condition_mean(mu, offset: float):
    """Shift a posterior mean (scalar or array) by the conditioning offset."""
    return mu + offset


def combined_value(conditioned_mean: float, observed: float) -> float:
    """Conditioned mean plus observed value; a reporting quantity only."""
    return conditioned_mean + observed
