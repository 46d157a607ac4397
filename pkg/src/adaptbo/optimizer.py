"""Optimization loops.

* :func:`run` -- sequential BayesOpt (original or adaptive variant) on a
  scalar loss.
* :func:`run_decoupled` -- one GP per objective component, one component
  evaluated per iteration.
* :func:`run_batch` -- independent runs with derived seeds, optionally in
  worker processes.
* :func:`tune_kernel_hyperparameters` -- BayesOpt over (variance,
  lengthscale) scored by inner runs.

Everything minimizes. A run with seed ``s`` draws its initial design, its
acquisition candidates and its objective noise from three independent
streams spawned from ``SeedSequence(s)``.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .acquisition import VARIANTS, acquisition_terms, propose_next
from .adaptive import AdaptiveSchedule, combined_value, condition_mean
from .gp import CholeskyError, Dataset, FittedGp, KernelParams, fit_with_escalation, posterior
from .objectives import CombinedMultiLoss, ObjectiveSpec, RobustLoss, multiobjective_components

MODES = ("single", "combined_multi", "decoupled_multi")

# noise handed to the GP for Monte-Carlo objectives vs deterministic ones
STOCHASTIC_NOISE_VARIANCE = 1e-2
DETERMINISTIC_NOISE_VARIANCE = 1e-8

TUNING_BOX = ((0.01, 10.0), (0.01, 10.0))

Loss = Callable[[np.ndarray, np.random.Generator], float]


class ConfigError(ValueError):
    pass


class OptimizationError(RuntimeError):
    """A run could not continue; ``iteration`` is the loop index (-1 during design)."""

    def __init__(self, message: str, iteration: int):
        super().__init__(f"iteration {iteration}: {message}")
        self.iteration = iteration


def _check_bounds(bounds) -> tuple[tuple[float, float], ...]:
    try:
        out = tuple((float(lo), float(hi)) for lo, hi in bounds)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bounds must be (lower, upper) pairs, got {bounds!r}") from exc
    if not out:
        raise ConfigError("bounds must have at least one dimension")
    for lo, hi in out:
        if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
            raise ConfigError(f"degenerate or non-finite interval [{lo}, {hi}]")
    return out


@dataclass(frozen=True)
class OptimizationConfig:
    bounds: tuple[tuple[float, float], ...] = ((-5.0, 5.0),)
    iterations: int = 30
    initial_design_size: int = 5
    variant: str = "adaptive"
    mode: str = "single"
    kernel: KernelParams = KernelParams(noise_variance=STOCHASTIC_NOISE_VARIANCE)
    schedule: AdaptiveSchedule = AdaptiveSchedule()
    seed: int = 0
    mean_constant: float = 0.0
    n_candidates: int = 2048
    n_refine: int = 5
    refine_iters: int = 20

    def __post_init__(self):
        object.__setattr__(self, "bounds", _check_bounds(self.bounds))
        if self.iterations < 1:
            raise ConfigError(f"iterations must be >= 1, got {self.iterations}")
        if self.initial_design_size < 1:
            raise ConfigError(f"initial_design_size must be >= 1, got {self.initial_design_size}")
        if self.variant not in VARIANTS:
            raise ConfigError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if not 0 <= self.seed < 2**64:
            raise ConfigError(f"seed must be an unsigned 64-bit integer, got {self.seed}")
        if self.n_candidates < 1 or self.n_refine < 0 or self.refine_iters < 0:
            raise ConfigError("n_candidates >= 1, n_refine >= 0 and refine_iters >= 0 required")

    @property
    def dim(self) -> int:
        return len(self.bounds)


@dataclass(frozen=True)
class TraceRecord:
    """One objective evaluation.

    ``iteration`` is the acquisition iteration; design points carry negative
    indices. ``offset``, ``jitter`` and ``combined_value`` are NaN on design
    rows. ``component`` is ``scalar`` for single/combined runs and ``both``,
    ``f1`` or ``f2`` for decoupled runs.
    """

    iteration: int
    x: tuple[float, ...]
    y: float
    best_so_far: float
    offset: float
    jitter: float
    combined_value: float
    component: str = "scalar"


@dataclass(frozen=True)
class RunTrace:
    records: tuple[TraceRecord, ...]
    best_x: tuple[float, ...]
    best_y: float
    seed: int
    variant: str
    mode: str
    evaluations: dict = field(default_factory=dict)

    @property
    def ys(self) -> np.ndarray:
        return np.array([r.y for r in self.records])

    @property
    def best_values(self) -> np.ndarray:
        return np.array([r.best_so_far for r in self.records])


@dataclass(frozen=True)
class RunFailure:
    seed: int
    message: str
    iteration: int


def _streams(seed: int) -> tuple[np.random.Generator, ...]:
    children = np.random.SeedSequence(int(seed)).spawn(3)
    return tuple(np.random.Generator(np.random.PCG64(c)) for c in children)


def initial_design(bounds, n: int, rng: np.random.Generator) -> np.ndarray:
    """``n`` points uniform in the box, shape (n, d)."""
    bounds = np.asarray(_check_bounds(bounds))
    if n < 1:
        raise ConfigError(f"design size must be >= 1, got {n}")
    u = rng.random((n, bounds.shape[0]))
    return bounds[:, 0] + u * (bounds[:, 1] - bounds[:, 0])


def resolve_loss(objective, mode: str) -> Loss:
    if isinstance(objective, ObjectiveSpec):
        if mode == "single":
            return RobustLoss(objective)
        if mode == "combined_multi":
            return CombinedMultiLoss(objective)
        raise ConfigError(f"mode {mode!r} has no scalar loss; use run_decoupled")
    if callable(objective):
        return objective
    raise ConfigError(f"objective must be an ObjectiveSpec or a callable, got {type(objective).__name__}")


def _evaluate(loss: Loss, x: np.ndarray, rng, iteration: int) -> float:
    y = float(loss(x, rng))
    if not math.isfinite(y):
        raise OptimizationError(f"objective returned {y} at x={x.tolist()}", iteration)
    return y


def _fit(data: Dataset, config: OptimizationConfig, iteration: int) -> FittedGp:
    try:
        return fit_with_escalation(data, config.kernel, config.mean_constant)
    except CholeskyError as exc:
        raise OptimizationError(f"GP fit failed after jitter escalation: {exc}", iteration) from exc


def _propose(model, config: OptimizationConfig, iteration: int, f_min: float, rng) -> np.ndarray:
    return propose_next(
        model,
        config.bounds,
        iteration,
        config.variant,
        config.schedule,
        f_min,
        rng,
        n_candidates=config.n_candidates,
        n_refine=config.n_refine,
        refine_iters=config.refine_iters,
    )


def _optimize(loss: Loss, config: OptimizationConfig, iterations: int) -> RunTrace:
    design_rng, acq_rng, obj_rng = _streams(config.seed)
    n0 = config.initial_design_size
    X = list(initial_design(config.bounds, n0, design_rng))
    ys: list[float] = []
    records = []
    best = math.inf
    nan = math.nan
    for k, x in enumerate(X):
        y = _evaluate(loss, x, obj_rng, -1)
        ys.append(y)
        best = min(best, y)
        records.append(TraceRecord(k - n0, tuple(x.tolist()), y, best, nan, nan, nan))

    for it in range(iterations):
        model = _fit(Dataset(np.array(X), np.array(ys)), config, it)
        f_min = min(ys)
        offset, jitter = acquisition_terms(config.variant, config.schedule, it)
        x = _propose(model, config, it, f_min, acq_rng)
        mu, _ = posterior(model, x)
        y = _evaluate(loss, x, obj_rng, it)
        X.append(x)
        ys.append(y)
        best = min(best, y)
        records.append(
            TraceRecord(
                it, tuple(x.tolist()), y, best, offset, jitter,
                combined_value(condition_mean(mu, offset), y),
            )
        )

    i_best = int(np.argmin(ys))
    return RunTrace(
        tuple(records), tuple(X[i_best].tolist()), ys[i_best], config.seed,
        config.variant, config.mode, {"scalar": len(ys)},
    )


def run(config: OptimizationConfig, objective) -> RunTrace:
    """One BayesOpt run of ``config.iterations`` acquisitions after the design.

    ``objective`` is an :class:`ObjectiveSpec` (negated robust objective for
    ``single``, overage + weighted underage for ``combined_multi``) or any
    callable ``loss(x, rng)``.
    """
    if config.mode == "decoupled_multi":
        raise ConfigError("decoupled_multi runs go through run_decoupled")
    return _optimize(resolve_loss(objective, config.mode), config, config.iterations)


class ScalarizedPosterior:
    """Posterior of ``f1 + w f2`` for independent component GPs."""

    def __init__(self, m1: FittedGp, m2: FittedGp, weight: float):
        self.m1, self.m2, self.weight = m1, m2, weight

    def predict(self, X):
        mu1, s1 = self.m1.predict(X)
        mu2, s2 = self.m2.predict(X)
        w = self.weight
        return mu1 + w * mu2, np.sqrt(s1 * s1 + (w * s2) ** 2)


@dataclass
class DecoupledState:
    """Mutable bookkeeping of one decoupled run (local to that run)."""

    X: list = field(default_factory=lambda: [[], []])
    Y: list = field(default_factory=lambda: [[], []])
    models: list = field(default_factory=lambda: [None, None])
    weights: tuple[float, float] = (1.0, 0.1)

    @property
    def counts(self) -> dict:
        return {"f1": len(self.Y[0]), "f2": len(self.Y[1])}

    def refit(self, config: OptimizationConfig, iteration: int) -> ScalarizedPosterior:
        for c in (0, 1):
            targets = np.array(self.Y[c])
            data = Dataset(np.array(self.X[c]), targets)
            # unobserved regions revert to the component's own level, not to 0
            self.models[c] = _fit(data, replace(config, mean_constant=float(targets.mean())), iteration)
        return ScalarizedPosterior(self.models[0], self.models[1], self.weights[1])

    def visited(self) -> np.ndarray:
        return np.unique(np.array(self.X[0] + self.X[1]), axis=0)


def run_decoupled(config: OptimizationConfig, objective: ObjectiveSpec) -> RunTrace:
    """Decoupled multi-objective BayesOpt on (overage, underage).

    Design points evaluate both components. Each iteration maximizes EI of
    the scalarized posterior, then evaluates only the component whose
    weighted posterior standard deviation at the proposal is larger (f1 on
    ties). The incumbent is the smallest scalarized posterior mean over
    visited points; ``y`` on acquisition rows is the scalarized posterior
    mean at the new point after the update.
    """
    if config.mode != "decoupled_multi":
        raise ConfigError(f"run_decoupled needs mode decoupled_multi, got {config.mode!r}")
    if not isinstance(objective, ObjectiveSpec):
        raise ConfigError("run_decoupled needs an ObjectiveSpec")
    w = objective.penalty_weight
    design_rng, acq_rng, obj_rng = _streams(config.seed)
    n0 = config.initial_design_size
    state = DecoupledState(weights=(1.0, w))
    records = []
    best = math.inf
    best_x = None
    nan = math.nan

    for k, x in enumerate(initial_design(config.bounds, n0, design_rng)):
        f1, f2 = multiobjective_components(x, objective, obj_rng)
        for c, v in ((0, f1), (1, f2)):
            state.X[c].append(x)
            state.Y[c].append(v)
        y = f1 + w * f2
        if y < best:
            best, best_x = y, tuple(x.tolist())
        records.append(TraceRecord(k - n0, tuple(x.tolist()), y, best, nan, nan, nan, "both"))

    scalar = state.refit(config, 0)
    for it in range(config.iterations):
        visited = state.visited()
        f_min = float(np.min(scalar.predict(visited)[0]))
        offset, jitter = acquisition_terms(config.variant, config.schedule, it)
        x = _propose(scalar, config, it, f_min, acq_rng)
        mu_before, _ = scalar.predict(x.reshape(1, -1))
        _, s1 = posterior(state.models[0], x)
        _, s2 = posterior(state.models[1], x)
        c = 0 if s1 >= w * s2 else 1
        values = multiobjective_components(x, objective, obj_rng)
        state.X[c].append(x)
        state.Y[c].append(values[c])

        scalar = state.refit(config, it)
        visited = state.visited()
        means = scalar.predict(visited)[0]
        j = int(np.argmin(means))
        if means[j] < best:
            best, best_x = float(means[j]), tuple(visited[j].tolist())
        y = float(scalar.predict(x.reshape(1, -1))[0][0])
        records.append(
            TraceRecord(
                it, tuple(x.tolist()), y, best, offset, jitter,
                combined_value(condition_mean(float(mu_before[0]), offset), y),
                ("f1", "f2")[c],
            )
        )

    return RunTrace(
        tuple(records), best_x, best, config.seed, config.variant, config.mode, state.counts
    )


def execute(config: OptimizationConfig, objective) -> RunTrace:
    """Dispatch on ``config.mode``."""
    if config.mode == "decoupled_multi":
        return run_decoupled(config, objective)
    return run(config, objective)


def _batch_worker(args) -> RunTrace | RunFailure:
    config, objective = args
    try:
        return execute(config, objective)
    except OptimizationError as exc:
        return RunFailure(config.seed, str(exc), exc.iteration)


def batch_configs(config: OptimizationConfig, n_runs: int, first_seed: int | None = None):
    start = config.seed if first_seed is None else first_seed
    if start + n_runs > 2**64:
        raise ConfigError("derived seeds overflow 64 bits")
    return [replace(config, seed=start + i) for i in range(n_runs)]


def run_batch(
    config: OptimizationConfig,
    objective,
    n_runs: int,
    jobs: int = 1,
    first_seed: int | None = None,
) -> list[RunTrace | RunFailure]:
    """``n_runs`` independent runs with seeds ``first_seed + i`` (default ``config.seed``).

    Results come back in seed order whatever ``jobs`` is. A run that fails
    yields a :class:`RunFailure` in its slot instead of aborting the batch.
    """
    if n_runs < 1:
        raise ConfigError(f"n_runs must be >= 1, got {n_runs}")
    tasks = [(c, objective) for c in batch_configs(config, n_runs, first_seed)]
    if jobs <= 1 or n_runs == 1:
        return [_batch_worker(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=min(jobs, n_runs)) as pool:
        return list(pool.map(_batch_worker, tasks))


@dataclass(frozen=True)
class TuningResult:
    variance: float
    lengthscale: float
    score: float
    # (variance, lengthscale, score, inner seed) per outer evaluation
    history: tuple[tuple[float, float, float, int], ...] = ()

    def __iter__(self):
        return iter((self.variance, self.lengthscale, self.score))


def tune_kernel_hyperparameters(
    outer_iterations: int,
    inner_config: OptimizationConfig,
    objective,
    outer_design_size: int = 5,
) -> TuningResult:
    """Pick (variance, lengthscale) in ``[0.01, 10]^2`` by BayesOpt over inner runs.

    Each outer evaluation runs the original variant with the candidate
    kernel and seed ``inner_config.seed + k``; its score is the inner run's
    best loss. ``outer_iterations`` counts outer evaluations, the first
    ``min(outer_design_size, outer_iterations)`` of which are random. A
    failed inner run scores ``inf`` (the outer surrogate sees the worst
    finite score so far instead).
    """
    if outer_iterations < 1:
        raise ConfigError(f"outer_iterations must be >= 1, got {outer_iterations}")
    history: list[tuple[float, float, float, int]] = []

    def meta_loss(theta, _rng) -> float:
        variance, lengthscale = (float(v) for v in theta)
        seed = (inner_config.seed + len(history)) % 2**64
        cfg = replace(
            inner_config,
            variant="original",
            seed=seed,
            kernel=replace(inner_config.kernel, variance=variance, lengthscale=lengthscale),
        )
        try:
            score = execute(cfg, objective).best_y
        except OptimizationError:
            score = math.inf
        history.append((variance, lengthscale, score, seed))
        if math.isfinite(score):
            return score
        finite = [h[2] for h in history if math.isfinite(h[2])]
        return max(finite) if finite else 0.0

    n0 = min(outer_design_size, outer_iterations)
    outer = OptimizationConfig(
        bounds=TUNING_BOX,
        iterations=max(outer_iterations - n0, 1),
        initial_design_size=n0,
        variant="original",
        mode="single",
        kernel=KernelParams(variance=1.0, lengthscale=2.0, noise_variance=STOCHASTIC_NOISE_VARIANCE),
        schedule=inner_config.schedule,
        seed=(inner_config.seed + 0x9E3779B97F4A7C15) % 2**64,
        n_candidates=inner_config.n_candidates,
        n_refine=inner_config.n_refine,
        refine_iters=inner_config.refine_iters,
    )
    _optimize(meta_loss, outer, outer_iterations - n0)
    i = min(range(len(history)), key=lambda k: (history[k][2], k))
    v, l, s, _ = history[i]
    return TuningResult(v, l, s, tuple(history))


def final_best_values(results: Sequence[RunTrace | RunFailure]) -> list[float]:
    return [r.best_y for r in results if isinstance(r, RunTrace)]
