"""Flat ``key = value`` experiment configuration.

Blank lines and ``#`` comments are ignored. Unknown or repeated keys are
errors. :func:`dump_config` writes every key in a fixed order, so
``dump_config(parse_config(text))`` is a fixed point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields, replace

from .adaptive import AdaptiveSchedule
from .gp import KernelParams
from .objectives import ObjectiveSpec, quadratic_loss
from .optimizer import (
    DETERMINISTIC_NOISE_VARIANCE,
    STOCHASTIC_NOISE_VARIANCE,
    ConfigError,
    OptimizationConfig,
)
from .acquisition import VARIANTS

PROBLEMS = {
    # name: (optimizer mode, deterministic?)
    "robust_1d": ("single", False),
    "multi_combined": ("combined_multi", False),
    "multi_decoupled": ("decoupled_multi", False),
    "quadratic_test": ("single", True),
}


@dataclass(frozen=True)
class ExperimentConfig:
    problem: str = "robust_1d"
    variants: tuple[str, ...] = ("original", "adaptive")
    iterations: int = 30
    initial_design_size: int = 5
    runs: int = 10
    base_seed: int = 0
    # GP
    kernel_variance: float = 1.0
    kernel_lengthscale: float = 1.0
    noise_variance: float | None = None  # None: 1e-2 stochastic, 1e-8 deterministic
    diag_jitter: float = 1e-10
    mean_constant: float = 0.0
    # adaptive schedule
    constant_value: float = 0.1
    conditioning_decay: float = 0.1
    jitter_base: float = 0.01
    jitter_decay: float = 0.1
    # objective
    threshold: float = 2.0
    penalty_weight: float = 0.1
    sample_count: int = 1000
    demand_sd: float = 1.0
    lower: float = -5.0
    upper: float = 5.0
    dims: int = 1
    # acquisition maximizer
    n_candidates: int = 2048
    n_refine: int = 5
    refine_iters: int = 20
    # stability / tuning
    run_counts: tuple[int, ...] = (10, 30, 50, 100)
    outer_iterations: int = 30
    out_dir: str = "out"

    def __post_init__(self):
        self.validate()

    # -- derived objects ----------------------------------------------------

    @property
    def mode(self) -> str:
        return PROBLEMS[self.problem][0]

    @property
    def bounds(self) -> tuple[tuple[float, float], ...]:
        return ((self.lower, self.upper),) * self.dims

    def kernel(self) -> KernelParams:
        noise = self.noise_variance
        if noise is None:
            noise = DETERMINISTIC_NOISE_VARIANCE if PROBLEMS[self.problem][1] else STOCHASTIC_NOISE_VARIANCE
        return KernelParams(self.kernel_variance, self.kernel_lengthscale, noise, self.diag_jitter)

    def schedule(self) -> AdaptiveSchedule:
        return AdaptiveSchedule(
            self.constant_value, self.conditioning_decay, self.jitter_base, self.jitter_decay
        )

    def objective_spec(self) -> ObjectiveSpec:
        return ObjectiveSpec(
            self.threshold, self.penalty_weight, self.sample_count, self.demand_sd, self.bounds
        )

    def objective(self):
        """What :func:`adaptbo.optimizer.execute` expects for this problem."""
        if self.problem == "quadratic_test":
            return quadratic_loss
        return self.objective_spec()

    def optimization_config(self, variant: str, seed: int | None = None) -> OptimizationConfig:
        return OptimizationConfig(
            bounds=self.bounds,
            iterations=self.iterations,
            initial_design_size=self.initial_design_size,
            variant=variant,
            mode=self.mode,
            kernel=self.kernel(),
            schedule=self.schedule(),
            seed=self.base_seed if seed is None else seed,
            mean_constant=self.mean_constant,
            n_candidates=self.n_candidates,
            n_refine=self.n_refine,
            refine_iters=self.refine_iters,
        )

    def validate(self) -> None:
        if self.problem not in PROBLEMS:
            raise ConfigError(f"problem: expected one of {sorted(PROBLEMS)}, got {self.problem!r}")
        if not self.variants:
            raise ConfigError("variants: at least one variant is required")
        for v in self.variants:
            if v not in VARIANTS:
                raise ConfigError(f"variants: unknown variant {v!r}")
        if self.runs < 1:
            raise ConfigError(f"runs: must be >= 1, got {self.runs}")
        if self.dims < 1:
            raise ConfigError(f"dims: must be >= 1, got {self.dims}")
        if self.dims > 1 and self.problem != "quadratic_test":
            raise ConfigError(f"dims: problem {self.problem} is one-dimensional")
        if any(n < 2 for n in self.run_counts) or not self.run_counts:
            raise ConfigError(f"run_counts: every count must be >= 2, got {list(self.run_counts)}")
        if self.outer_iterations < 1:
            raise ConfigError(f"outer_iterations: must be >= 1, got {self.outer_iterations}")
        if not self.out_dir:
            raise ConfigError("out_dir: must not be empty")
        try:
            self.objective_spec()
            for v in self.variants:
                self.optimization_config(v)
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc


# ---------------------------------------------------------------------------
# text format
# ---------------------------------------------------------------------------


def _parse_float(text: str) -> float:
    value = float(text)
    if not math.isfinite(value):
        raise ValueError(f"{text!r} is not finite")
    return value


def _parse_optional_float(text: str):
    return None if text.lower() == "auto" else _parse_float(text)


def _parse_str_list(text: str) -> tuple[str, ...]:
    return tuple(part.strip() for part in text.split(",") if part.strip())


def _parse_int_list(text: str) -> tuple[int, ...]:
    return tuple(int(part) for part in _parse_str_list(text))


def _parse_seed(text: str) -> int:
    value = int(text)
    if not 0 <= value < 2**64:
        raise ValueError(f"{value} is not an unsigned 64-bit integer")
    return value


_PARSERS = {
    str: str,
    int: int,
    float: _parse_float,
    "float | None": _parse_optional_float,
    "tuple[str, ...]": _parse_str_list,
    "tuple[int, ...]": _parse_int_list,
}


def _parser_for(name: str, annotation):
    if name == "base_seed":
        return _parse_seed
    key = {"str": str, "int": int, "float": float}.get(annotation, annotation)
    return _PARSERS[key]


def _format(value) -> str:
    if value is None:
        return "auto"
    if isinstance(value, tuple):
        return ",".join(str(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


CONFIG_KEYS = tuple(f.name for f in fields(ExperimentConfig))


def parse_config(text: str, source: str = "<config>") -> ExperimentConfig:
    """Parse the ``key = value`` format; errors name the line and key."""
    annotations = {f.name: f.type for f in fields(ExperimentConfig)}
    values = {}
    seen_at = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in annotations:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        if key in seen_at:
            raise ConfigError(f"{source}:{lineno}: key {key!r} already set on line {seen_at[key]}")
        seen_at[key] = lineno
        try:
            values[key] = _parser_for(key, annotations[key])(value)
        except ValueError as exc:
            raise ConfigError(f"{source}:{lineno}: bad value for {key!r}: {exc}") from exc
    try:
        return ExperimentConfig(**values)
    except ConfigError as exc:
        key = str(exc).split(":", 1)[0]
        where = f"{source}:{seen_at[key]}" if key in seen_at else source
        raise ConfigError(f"{where}: {exc}") from exc


def dump_config(config: ExperimentConfig) -> str:
    return "".join(f"{name} = {_format(getattr(config, name))}\n" for name in CONFIG_KEYS)


def with_overrides(config: ExperimentConfig, **overrides) -> ExperimentConfig:
    """``replace`` that skips ``None`` overrides (unset CLI flags)."""
    overrides = {k: v for k, v in overrides.items() if v is not None}
    return replace(config, **overrides) if overrides else config
