"""Expected improvement (minimization) and its maximization over a box."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import simpson
from scipy.special import ndtr

from .adaptive import AdaptiveSchedule, acquisition_jitter, condition_mean, conditioning_offset

VARIANTS = ("original", "adaptive")

INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)
GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class AcquisitionQuery:
    mu: float
    sigma: float
    f_min: float
    jitter: float = 0.0

    def __post_init__(self):
        for name in ("mu", "sigma", "f_min", "jitter"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite, got {getattr(self, name)!r}")
        if self.sigma < 0:
            raise ValueError(f"sigma must be >= 0, got {self.sigma}")
        if self.jitter < 0:
            raise ValueError(f"jitter must be >= 0, got {self.jitter}")


def ei_array(mu, sigma, f_min: float, jitter: float) -> np.ndarray:
    """Vectorized EI: ``d Phi(d/s) + s phi(d/s)`` with ``d = f_min - mu - jitter``."""
    mu = np.asarray(mu, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    d = f_min - mu - jitter
    pos = sigma > 0
    safe = np.where(pos, sigma, 1.0)
    with np.errstate(over="ignore"):  # subnormal sigma sends z to +-inf, handled below
        z = d / safe
    # the density term is 0 to double precision beyond |z| = 40
    zc = np.clip(z, -40.0, 40.0)
    ei = d * ndtr(z) + safe * INV_SQRT_2PI * np.exp(-0.5 * zc * zc)
    ei = np.where(pos, ei, np.maximum(d, 0.0))
    # the closed form can dip a few ulps below zero deep in the lower tail
    return np.maximum(ei, 0.0)


def expected_improvement(q: AcquisitionQuery) -> float:
    return float(ei_array(q.mu, q.sigma, q.f_min, q.jitter))


def expected_improvement_numeric(q: AcquisitionQuery, grid_points: int = 4001) -> float:
    """EI by Simpson quadrature of ``(f_min - jitter - f)^+`` against the
    Gaussian posterior density, over ``[mu - 8 sigma, f_min - jitter]``.

    Test oracle for :func:`expected_improvement`.
    """
    if q.sigma <= 0:
        raise ValueError("numeric EI needs sigma > 0")
    if grid_points < 3:
        raise ValueError("grid_points must be >= 3")
    upper = q.f_min - q.jitter
    lower = q.mu - 8.0 * q.sigma
    if upper <= lower:
        return 0.0
    f = np.linspace(lower, upper, grid_points)
    z = (f - q.mu) / q.sigma
    density = INV_SQRT_2PI * np.exp(-0.5 * z * z) / q.sigma
    return float(simpson((upper - f) * density, x=f))


def acquisition_terms(variant: str, schedule: AdaptiveSchedule, iteration: int) -> tuple[float, float]:
    """(conditioning offset, jitter) used by ``variant`` at ``iteration``.

    The original variant keeps the undecayed base jitter and no offset.
    """
    if variant == "adaptive":
        return conditioning_offset(schedule, iteration), acquisition_jitter(schedule, iteration)
    if variant == "original":
        return 0.0, schedule.jitter_base
    raise ValueError(f"unknown variant {variant!r}; expected one of {VARIANTS}")


def _golden_refine(score, starts, lower, upper, half_width, iters):
    """Coordinate-wise golden-section ascent, all starts at once.

    ``score`` maps an (m, d) array to (m,) values. Each coordinate is
    searched on ``[x_j - h_j, x_j + h_j]`` clipped to the bounds; a move is
    kept only if it does not lower the score.
    """
    x = starts.copy()
    best = score(x)
    for j in range(x.shape[1]):
        a = np.maximum(x[:, j] - half_width[j], lower[j])
        b = np.minimum(x[:, j] + half_width[j], upper[j])
        c = b - GOLDEN * (b - a)
        e = a + GOLDEN * (b - a)
        xc = x.copy()
        xe = x.copy()
        xc[:, j] = c
        xe[:, j] = e
        fc, fe = score(xc), score(xe)
        for _ in range(iters):
            left = fc >= fe
            # keep [a, e] where the left probe wins, else [c, b]
            b = np.where(left, e, b)
            a = np.where(left, a, c)
            new_c = b - GOLDEN * (b - a)
            new_e = a + GOLDEN * (b - a)
            c_next = np.where(left, new_c, e)
            e_next = np.where(left, c, new_e)
            c, e = c_next, e_next
            xc[:, j] = c
            xe[:, j] = e
            # re-scoring both probes costs one predict call per side for all starts
            fc, fe = score(xc), score(xe)
        mid = x.copy()
        mid[:, j] = 0.5 * (a + b)
        fm = score(mid)
        take = fm >= best
        x = np.where(take[:, None], mid, x)
        best = np.where(take, fm, best)
    return x, best


def propose_next(
    model,
    bounds,
    iteration: int,
    variant: str,
    schedule: AdaptiveSchedule,
    f_min: float,
    rng: np.random.Generator,
    n_candidates: int = 2048,
    n_refine: int = 5,
    refine_iters: int = 20,
    candidates=None,
) -> np.ndarray:
    """Maximize EI over the box ``bounds``.

    ``model`` is anything with ``predict(X) -> (mu, sigma)``. Candidates are
    ``n_candidates`` uniform draws from ``rng`` (or the given array); the best
    ``n_refine`` are polished by golden-section search. Ties resolve to the
    lowest candidate index.
    """
    bounds = np.asarray(bounds, dtype=float).reshape(-1, 2)
    lower, upper = bounds[:, 0], bounds[:, 1]
    if np.any(~(lower < upper)):
        raise ValueError(f"degenerate bounds {bounds.tolist()}")
    offset, jitter = acquisition_terms(variant, schedule, iteration)

    def score(X):
        mu, sigma = model.predict(X)
        if variant == "adaptive":
            mu = condition_mean(mu, offset)
        return ei_array(mu, sigma, f_min, jitter)

    if candidates is None:
        u = rng.random((n_candidates, bounds.shape[0]))
        candidates = lower + u * (upper - lower)
    else:
        candidates = np.asarray(candidates, dtype=float).reshape(-1, bounds.shape[0])
    values = score(candidates)
    k = min(n_refine, candidates.shape[0])
    if k > 0 and refine_iters > 0:
        # stable sort keeps index order among equal scores
        top = np.argsort(-values, kind="stable")[:k]
        spacing = (upper - lower) * candidates.shape[0] ** (-1.0 / bounds.shape[0])
        refined, refined_values = _golden_refine(
            score, candidates[top], lower, upper, 2.0 * spacing, refine_iters
        )
        candidates = candidates.copy()
        values = values.copy()
        candidates[top] = refined
        values[top] = refined_values
    return candidates[int(np.argmax(values))].copy()
