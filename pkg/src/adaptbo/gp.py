"""Gaussian process regression with a Matern 5/2 kernel.

Exact inference through a Cholesky factor of ``K + (noise + jitter) I``.
The posterior standard deviation describes the latent function only; the
observation noise is not added back to it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.linalg import solve_triangular

SQRT5 = math.sqrt(5.0)

# escalation ceiling for Cholesky retries
MAX_DIAG_JITTER = 1e-4


class CholeskyError(np.linalg.LinAlgError):
    """Gram matrix was not positive definite after adding jitter.

    Recoverable: callers usually retry with a larger ``diag_jitter``
    (see :func:`fit_with_escalation`).
    """

    def __init__(self, message: str, diag_jitter: float):
        super().__init__(message)
        self.diag_jitter = diag_jitter


@dataclass(frozen=True)
class KernelParams:
    variance: float = 1.0
    lengthscale: float = 1.0
    noise_variance: float = 0.0
    diag_jitter: float = 1e-10

    def __post_init__(self):
        for name in ("variance", "lengthscale", "noise_variance", "diag_jitter"):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise ValueError(f"{name} must be finite, got {value!r}")
        if self.variance <= 0:
            raise ValueError(f"variance must be > 0, got {self.variance}")
        if self.lengthscale <= 0:
            raise ValueError(f"lengthscale must be > 0, got {self.lengthscale}")
        if self.noise_variance < 0:
            raise ValueError(f"noise_variance must be >= 0, got {self.noise_variance}")
        if self.diag_jitter < 0:
            raise ValueError(f"diag_jitter must be >= 0, got {self.diag_jitter}")


def as_points(points) -> np.ndarray:
    """Coerce to a float array of shape (n, d); a flat sequence is n points in 1-D."""
    arr = np.asarray(points, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    elif arr.ndim != 2:
        raise ValueError(f"points must be at most 2-D, got shape {arr.shape}")
    return arr


def _readonly(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, dtype=float, copy=True)
    arr.setflags(write=False)
    return arr


def _matern52_unchecked(r: np.ndarray, params: KernelParams) -> np.ndarray:
    s = SQRT5 * r / params.lengthscale
    k = params.variance * (1.0 + s + s * s / 3.0) * np.exp(-s)
    # rounding can exceed the variance by an ulp at tiny r
    return np.minimum(k, params.variance)


def matern52(r: float, params: KernelParams) -> float:
    """Matern 5/2 covariance at distance ``r``.

    ``variance * (1 + sqrt(5) r / l + 5 r^2 / (3 l^2)) * exp(-sqrt(5) r / l)``
    """
    r = float(r)
    if not math.isfinite(r):
        raise ValueError(f"distance must be finite, got {r!r}")
    if r < 0:
        raise ValueError(f"distance must be non-negative, got {r}")
    return float(_matern52_unchecked(np.float64(r), params))


def pairwise_distances(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    diff = A[:, None, :] - B[None, :, :]
    return np.sqrt(np.sum(diff * diff, axis=-1))


def kernel_matrix(A, B, params: KernelParams) -> np.ndarray:
    A = as_points(A)
    B = as_points(B)
    if A.shape[1] != B.shape[1]:
        raise ValueError(f"dimension mismatch: {A.shape[1]} vs {B.shape[1]}")
    if not (np.all(np.isfinite(A)) and np.all(np.isfinite(B))):
        raise ValueError("points must be finite")
    K = _matern52_unchecked(pairwise_distances(A, B), params)
    if A is B or (A.shape == B.shape and np.array_equal(A, B)):
        # the distance computation is already symmetric; pin it bitwise anyway
        K = np.triu(K) + np.triu(K, 1).T
    return K


@dataclass(frozen=True)
class Dataset:
    points: np.ndarray
    targets: np.ndarray

    def __post_init__(self):
        points = as_points(self.points)
        targets = np.asarray(self.targets, dtype=float).reshape(-1)
        if points.shape[0] != targets.shape[0]:
            raise ValueError(
                f"{points.shape[0]} points but {targets.shape[0]} targets"
            )
        object.__setattr__(self, "points", _readonly(points))
        object.__setattr__(self, "targets", _readonly(targets))

    def __len__(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]


@dataclass(frozen=True)
class FittedGp:
    """Trained surrogate. Build with :func:`fit`; never mutated afterwards."""

    dataset: Dataset
    params: KernelParams
    mean_constant: float
    chol: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)

    @property
    def dim(self) -> int:
        return self.dataset.dim

    def predict(self, X) -> tuple[np.ndarray, np.ndarray]:
        """Posterior mean and latent standard deviation at each row of ``X``."""
        X = as_points(X)
        if X.shape[1] != self.dim:
            raise ValueError(f"query has dimension {X.shape[1]}, model has {self.dim}")
        Ks = kernel_matrix(self.dataset.points, X, self.params)  # (n, m)
        mu = self.mean_constant + Ks.T @ self.weights
        V = solve_triangular(self.chol, Ks, lower=True, check_finite=False)
        var = self.params.variance - np.sum(V * V, axis=0)
        return mu, np.sqrt(np.maximum(var, 0.0))


def fit(data: Dataset, params: KernelParams, mean_constant: float = 0.0) -> FittedGp:
    """Factor the Gram matrix and precompute the posterior weights.

    Raises
    ------
    CholeskyError
        If ``K + (noise_variance + diag_jitter) I`` is not numerically
        positive definite.
    """
    if len(data) == 0:
        raise ValueError("cannot fit a GP to an empty dataset")
    if not np.all(np.isfinite(data.targets)):
        raise ValueError("targets must be finite")
    K = kernel_matrix(data.points, data.points, params)
    K[np.diag_indices_from(K)] += params.noise_variance + params.diag_jitter
    try:
        L = np.linalg.cholesky(K)
    except np.linalg.LinAlgError as exc:
        raise CholeskyError(
            f"Gram matrix not positive definite with diag_jitter={params.diag_jitter:g}",
            params.diag_jitter,
        ) from exc
    if not np.all(np.diag(L) > 0):
        raise CholeskyError("Cholesky factor has a non-positive diagonal", params.diag_jitter)
    resid = data.targets - mean_constant
    z = solve_triangular(L, resid, lower=True, check_finite=False)
    w = solve_triangular(L.T, z, lower=False, check_finite=False)
    return FittedGp(data, params, float(mean_constant), _readonly(L), _readonly(w))


def fit_with_escalation(
    data: Dataset,
    params: KernelParams,
    mean_constant: float = 0.0,
    max_jitter: float = MAX_DIAG_JITTER,
) -> FittedGp:
    """:func:`fit`, retrying with ``diag_jitter`` multiplied by 10 up to ``max_jitter``."""
    jitter = params.diag_jitter
    while True:
        try:
            return fit(data, replace(params, diag_jitter=jitter), mean_constant)
        except CholeskyError:
            nxt = jitter * 10.0 if jitter > 0 else 1e-10
            if nxt > max_jitter * (1 + 1e-12):
                raise
            jitter = nxt


def posterior(model: FittedGp, x) -> tuple[float, float]:
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.shape[0] != model.dim:
        raise ValueError(f"query has dimension {x.shape[0]}, model has {model.dim}")
    mu, sigma = model.predict(x.reshape(1, -1))
    return float(mu[0]), float(sigma[0])
