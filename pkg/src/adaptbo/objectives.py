"""Stochastic newsvendor-style benchmark objectives.

Demand is drawn as ``Normal(x, demand_sd)``; the profit is the negated mean
overage above a threshold and the robust objective subtracts a weighted
mean underage. All randomness flows through an explicit
:class:`numpy.random.Generator` (PCG64 bit generator, ziggurat normals), so
every value is a pure function of ``(x, spec, seed)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

SeededRng = np.random.Generator


def make_rng(seed: int) -> SeededRng:
    """PCG64 generator for a non-negative 64-bit seed."""
    seed = int(seed)
    if not 0 <= seed < 2**64:
        raise ValueError(f"seed must be an unsigned 64-bit integer, got {seed}")
    return np.random.Generator(np.random.PCG64(seed))


@dataclass(frozen=True)
class ObjectiveSpec:
    threshold: float = 2.0
    penalty_weight: float = 0.1
    sample_count: int = 1000
    demand_sd: float = 1.0
    bounds: tuple[tuple[float, float], ...] = ((-5.0, 5.0),)

    def __post_init__(self):
        if int(self.sample_count) != self.sample_count or self.sample_count < 1:
            raise ValueError(f"sample_count must be a positive integer, got {self.sample_count}")
        if not self.demand_sd > 0:
            raise ValueError(f"demand_sd must be > 0, got {self.demand_sd}")
        if not self.penalty_weight >= 0:
            raise ValueError(f"penalty_weight must be >= 0, got {self.penalty_weight}")
        if not math.isfinite(self.threshold):
            raise ValueError("threshold must be finite")
        bounds = tuple((float(lo), float(hi)) for lo, hi in self.bounds)
        if not bounds or any(not lo < hi for lo, hi in bounds):
            raise ValueError(f"every bound needs lower < upper, got {self.bounds}")
        object.__setattr__(self, "bounds", bounds)


def _scalar(x) -> float:
    x = float(np.asarray(x, dtype=float).reshape(-1)[0])
    if not math.isfinite(x):
        raise ValueError(f"x must be finite, got {x}")
    return x


def demand_samples(x, spec: ObjectiveSpec, rng: SeededRng) -> np.ndarray:
    return rng.normal(loc=_scalar(x), scale=spec.demand_sd, size=spec.sample_count)


def _overage(samples: np.ndarray, spec: ObjectiveSpec) -> float:
    return float(np.mean(np.maximum(samples - spec.threshold, 0.0)))


def _underage(samples: np.ndarray, spec: ObjectiveSpec) -> float:
    return float(np.mean(np.maximum(spec.threshold - samples, 0.0)))


def stochastic_profit(x, spec: ObjectiveSpec, rng: SeededRng) -> float:
    return -_overage(demand_samples(x, spec, rng), spec)


def penalty_term(x, spec: ObjectiveSpec, rng: SeededRng) -> float:
    return spec.penalty_weight * _underage(demand_samples(x, spec, rng), spec)


def robust_objective(x, spec: ObjectiveSpec, rng: SeededRng) -> float:
    """Profit minus the underage penalty, both from one draw of demand."""
    samples = demand_samples(x, spec, rng)
    return -_overage(samples, spec) - spec.penalty_weight * _underage(samples, spec)


def multiobjective_components(x, spec: ObjectiveSpec, rng: SeededRng) -> tuple[float, float]:
    """(overage, underage) on one shared sample set; both are minimized.

    ``-(f1 + penalty_weight * f2)`` reproduces :func:`robust_objective`.
    """
    samples = demand_samples(x, spec, rng)
    return _overage(samples, spec), _underage(samples, spec)


def _phi(a: float) -> float:
    return math.exp(-0.5 * a * a) / math.sqrt(2.0 * math.pi)


def expected_overage(x: float, spec: ObjectiveSpec) -> float:
    s = spec.demand_sd
    a = (_scalar(x) - spec.threshold) / s
    return s * (_phi(a) + a * float(ndtr(a)))


def expected_underage(x: float, spec: ObjectiveSpec) -> float:
    s = spec.demand_sd
    a = (_scalar(x) - spec.threshold) / s
    return s * (_phi(a) - a * float(ndtr(-a)))


def analytic_expected_robust(x, spec: ObjectiveSpec) -> float:
    """Exact expectation of :func:`robust_objective` over the demand draw."""
    return -expected_overage(x, spec) - spec.penalty_weight * expected_underage(x, spec)


# Loss callables used by the optimizer: ``loss(x, rng) -> float``, minimized.
# Module-level classes so that they pickle into worker processes.


@dataclass(frozen=True)
class RobustLoss:
    """Negated robust objective."""

    spec: ObjectiveSpec

    def __call__(self, x, rng: SeededRng) -> float:
        return -robust_objective(x, self.spec, rng)


@dataclass(frozen=True)
class CombinedMultiLoss:
    """Weighted sum ``f1 + penalty_weight * f2`` of the two components."""

    spec: ObjectiveSpec

    def __call__(self, x, rng: SeededRng) -> float:
        f1, f2 = multiobjective_components(x, self.spec, rng)
        return f1 + self.spec.penalty_weight * f2


def quadratic_loss(x, rng: SeededRng | None = None) -> float:
    """Deterministic ``sum((x - 1)^2)``; ``rng`` is ignored."""
    x = np.asarray(x, dtype=float).reshape(-1)
    return float(np.sum((x - 1.0) ** 2))
