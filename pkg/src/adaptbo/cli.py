"""Command-line harness: ``adaptbo run | compare | stability | tune | defaults``.

Exit codes: 0 success, 1 configuration error, 2 runtime or numerical failure.
All files are written after the computation finishes.
"""

from __future__ import annotations

import argparse
import io
import json
import math
import os
import sys
from pathlib import Path

from .config import ExperimentConfig, dump_config, parse_config, with_overrides
from .optimizer import (
    ConfigError,
    OptimizationError,
    RunFailure,
    RunTrace,
    run_batch,
    tune_kernel_hyperparameters,
)
from .stats import (
    StatisticError,
    cliffs_delta,
    compare,
    cumulative_distribution,
    improvement_rate,
    stability_check,
)

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2

TRACE_COLUMNS = ("iteration", "x", "y", "best_so_far", "offset", "jitter", "combined_value", "component")


def fmt(value: float) -> str:
    """CSV number: 9 significant digits, '.' decimal, no grouping."""
    value = float(value)
    if math.isnan(value):
        return "nan"
    return format(value, ".9g")


def _csv(rows) -> str:
    buf = io.StringIO()
    for row in rows:
        buf.write(",".join(row) + "\n")
    return buf.getvalue()


def trace_csv(trace: RunTrace) -> str:
    rows = [TRACE_COLUMNS]
    for r in trace.records:
        rows.append((
            str(r.iteration), ";".join(fmt(v) for v in r.x), fmt(r.y), fmt(r.best_so_far),
            fmt(r.offset), fmt(r.jitter), fmt(r.combined_value), r.component,
        ))
    return _csv(rows)


def summary_rows(variant: str, trace: RunTrace):
    # rates come from the emitted digits so the column is recomputable from the CSV
    best = [float(fmt(r.best_so_far)) for r in trace.records]
    rates = improvement_rate(best) if len(best) > 1 else []
    cdf = cumulative_distribution(len(best))
    for i, b in enumerate(best):
        rate = fmt(rates[i - 1]) if i > 0 else ""
        yield (variant, str(trace.seed), str(i), fmt(b), rate, fmt(cdf[i]))


def _trace_name(problem: str, variant: str, seed: int) -> str:
    return f"{problem}_{variant}_seed{seed}.csv"


def _run_variant(cfg: ExperimentConfig, variant: str, jobs: int):
    return run_batch(cfg.optimization_config(variant), cfg.objective(), cfg.runs, jobs=jobs)


def _report_failures(failures) -> None:
    for f in failures:
        print(f"run with seed {f.seed} failed: {f.message}", file=sys.stderr)


def _write_files(out: Path, files: dict[str, str]) -> None:
    for rel, content in files.items():
        path = out / rel
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="\n", encoding="utf-8") as fh:
            fh.write(content)


def cmd_run(cfg: ExperimentConfig, jobs: int = 1) -> tuple[dict[str, str], list[RunFailure]]:
    """Trace CSV per run plus ``summary.csv`` (best-so-far, rate, cumulative share)."""
    files = {}
    failures = []
    summary = [("variant", "seed", "index", "best_so_far", "improvement_rate", "cumulative_distribution")]
    for variant in dict.fromkeys(cfg.variants):
        for result in _run_variant(cfg, variant, jobs):
            if isinstance(result, RunFailure):
                failures.append(result)
                continue
            files[f"traces/{_trace_name(cfg.problem, variant, result.seed)}"] = trace_csv(result)
            summary.extend(summary_rows(variant, result))
    files["summary.csv"] = _csv(summary)
    return files, failures


def cmd_compare(cfg: ExperimentConfig, jobs: int = 1) -> tuple[dict[str, str], list[RunFailure]]:
    """Paired-seed comparison of exactly two variants, as ``compare.json``.

    Statistics are computed on scores ``-best_y`` (higher is better), so a
    positive Cliff's delta favors ``label_a``.
    """
    if len(cfg.variants) != 2:
        raise ConfigError(f"variants: compare needs exactly two, got {list(cfg.variants)}")
    label_a, label_b = cfg.variants
    results = [_run_variant(cfg, v, jobs) for v in cfg.variants]
    failures = [r for rs in results for r in rs if isinstance(r, RunFailure)]
    failed_seeds = {f.seed for f in failures}
    # keep only seeds that succeeded under both variants so the pairs stay aligned
    paired = [
        [r for r in rs if r.seed not in failed_seeds] for rs in results
    ]
    best_a, best_b = ([r.best_y for r in rs] for rs in paired)
    score_a, score_b = ([-v for v in best] for best in (best_a, best_b))
    report = {
        "problem": cfg.problem,
        "label_a": label_a,
        "label_b": label_b,
        "n_runs": len(best_a),
        "seeds": [r.seed for r in paired[0]],
        "score_convention": "score = -best_y; positive effect sizes favor label_a",
        "t_stat": None,
        "p_value": None,
        "cohens_d": None,
        "hedges_g": None,
        "hedges_d": None,
        "cliffs_delta": None,
        "final_best_a": best_a,
        "final_best_b": best_b,
        "scores_a": score_a,
        "scores_b": score_b,
        "favors": None,
        "error": None,
    }
    try:
        stats = compare(score_a, score_b, label_a, label_b).to_dict()
        for key in ("t_stat", "p_value", "cohens_d", "hedges_g", "hedges_d", "cliffs_delta"):
            report[key] = stats[key]
    except StatisticError as exc:
        report["error"] = str(exc)
        try:
            report["cliffs_delta"] = cliffs_delta(score_a, score_b)
        except StatisticError:
            pass
    delta = report["cliffs_delta"]
    if delta is not None:
        report["favors"] = label_a if delta > 0 else label_b if delta < 0 else "neither"
    return {"compare.json": json.dumps(report, indent=2) + "\n"}, failures


def cmd_stability(cfg: ExperimentConfig, jobs: int = 1) -> tuple[dict[str, str], list[RunFailure]]:
    rows = [("variant", "mode", "run_count", "t_stat", "p_value")]
    for variant in dict.fromkeys(cfg.variants):
        table = stability_check(cfg.optimization_config(variant), cfg.objective(), cfg.run_counts, jobs=jobs)
        for row in table.rows:
            rows.append((row.variant, row.mode, str(row.run_count), fmt(row.t_stat), fmt(row.p_value)))
    return {"stability.csv": _csv(rows)}, []


def cmd_tune(cfg: ExperimentConfig, jobs: int = 1) -> tuple[dict[str, str], list[RunFailure]]:
    result = tune_kernel_hyperparameters(
        cfg.outer_iterations, cfg.optimization_config("original"), cfg.objective()
    )
    payload = {
        "problem": cfg.problem,
        "variance": result.variance,
        "lengthscale": result.lengthscale,
        "score": result.score,
        "outer_iterations": cfg.outer_iterations,
        "history": [
            {"variance": v, "lengthscale": l, "score": s if math.isfinite(s) else None, "inner_seed": seed}
            for v, l, s, seed in result.history
        ],
    }
    return {"tune.json": json.dumps(payload, indent=2) + "\n"}, []


COMMANDS = {"run": cmd_run, "compare": cmd_compare, "stability": cmd_stability, "tune": cmd_tune}


class _Parser(argparse.ArgumentParser):
    # usage mistakes are configuration errors, not argparse's default status 2
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="adaptbo", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", type=Path, help="key = value config file")
        p.add_argument("--out", help="output directory (overrides out_dir)")
        p.add_argument("--seed", type=int, help="base seed (overrides base_seed)")
        p.add_argument("--runs", type=int)
        p.add_argument("--iters", type=int, help="acquisition iterations per run")
        p.add_argument("--variant", action="append", help="repeat or comma-separate")
        p.add_argument("--problem")
        p.add_argument("--jobs", type=int, default=1, help="worker processes for batches")
    sub.add_parser("defaults", help="print the default config")
    return parser


def load_config(args) -> ExperimentConfig:
    if args.config is not None:
        try:
            text = args.config.read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"{args.config}: {exc.strerror}") from exc
        cfg = parse_config(text, str(args.config))
    else:
        cfg = ExperimentConfig()
    variants = None
    if args.variant:
        variants = tuple(v.strip() for item in args.variant for v in item.split(",") if v.strip())
    try:
        return with_overrides(
            cfg, out_dir=args.out, base_seed=args.seed, runs=args.runs,
            iterations=args.iters, variants=variants, problem=args.problem,
        )
    except ConfigError as exc:
        raise ConfigError(f"command line: {exc}") from exc


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "defaults":
        sys.stdout.write(dump_config(ExperimentConfig()))
        return EXIT_OK
    try:
        cfg = load_config(args)
        if args.jobs < 1:
            raise ConfigError("--jobs must be >= 1")
        files, failures = COMMANDS[args.command](cfg, jobs=args.jobs)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OptimizationError, StatisticError, ArithmeticError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    try:
        out = Path(cfg.out_dir)
        _write_files(out, files)
    except OSError as exc:
        print(f"cannot write output under {cfg.out_dir}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    _report_failures(failures)
    print(f"{args.command}: wrote {len(files)} file(s) under {os.fspath(out)}")
    return EXIT_RUNTIME if failures else EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
