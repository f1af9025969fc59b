"""Grid search over model parameters minimizing the K-S statistic.

Parameter values live on an integer lattice (1e-7 units), so grids and
refinement windows are exact and reproducible.  Each grid point derives
its batch seed from (search seed, point coordinates); K-S values are
compared in exact rational arithmetic with ties broken toward smaller
alpha, then smaller lambda, so re-running a search reproduces every
evaluation and the same winner bit-for-bit.

For the compound model the alpha^k property table is built once per alpha
and shared across all lambda values of that column; at lambda = 0 the
table's own size marginal is the evaluated distribution, which makes the
lambda = 0 column identical to the plain alpha^k evaluation at the same
seed.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

from .compound import (
    DEFAULT_ROUND_CAP,
    DivergenceError,
    PropertyTable,
    run_compound_batch,
)
from .diffusion import DEFAULT_MAX_ROUNDS, ModelParams, run_batch
from .graphs import Graph
from .rng import derive_seed
from .stats import Cdf, SizeHistogram, _atomic_write, ks_statistic, to_cdf

_KEY_SCALE = 10**7

FIT_MODELS = ("cgm", "alpha", "alpha_k", "multi_exact", "compound")


def _to_key(value: float) -> int:
    return round(value * _KEY_SCALE)


def _from_key(key: int) -> float:
    return key / _KEY_SCALE


@dataclass
class GridSpec:
    """Search space: alpha in [alpha_lo, alpha_hi] at ``step`` resolution,
    optionally crossed with lambda in [lambda_lo, lambda_hi].

    refinement_levels > 0 enables multi-resolution search: a coarse pass at
    step * 10**levels, then each level narrows to the incumbent's
    neighborhood at 10x finer steps until ``step`` is reached.  0 runs the
    flat sweep at ``step`` directly (the paper-faithful mode).
    """

    alpha_lo: float
    alpha_hi: float
    step: float
    lambda_lo: float | None = None
    lambda_hi: float | None = None
    runs_per_point: int = 1_000_000
    refinement_levels: int = 0

    def __post_init__(self):
        if not 0.0 <= self.alpha_lo <= self.alpha_hi <= 1.0:
            raise ValueError("alpha range must satisfy 0 <= lo <= hi <= 1")
        if self.step <= 0:
            raise ValueError("step must be positive")
        if _to_key(self.step) < 1:
            raise ValueError("step below 1e-7 resolution")
        if (self.lambda_lo is None) != (self.lambda_hi is None):
            raise ValueError("lambda_lo and lambda_hi must be given together")
        if self.lambda_lo is not None and not 0.0 <= self.lambda_lo <= self.lambda_hi:
            raise ValueError("lambda range must satisfy 0 <= lo <= hi")
        if self.runs_per_point < 1:
            raise ValueError("runs_per_point must be >= 1")
        if self.refinement_levels < 0:
            raise ValueError("refinement_levels must be >= 0")

    @property
    def two_dim(self) -> bool:
        return self.lambda_lo is not None


@dataclass
class GridEval:
    """One evaluated grid point; ``skipped`` marks divergent points."""

    alpha: float | None
    lambda_: float | None
    ks: float | None
    runs: int
    diverged: int = 0
    skipped: bool = False
    # exact K-S value for reproducible comparisons
    ks_num: int = 0
    ks_den: int = 1


@dataclass
class FitResult:
    best_alpha: float | None
    best_lambda: float | None
    best_ks: float
    evaluations: list[GridEval] = field(default_factory=list)


@dataclass
class ValidationReport:
    alpha: float | None
    lambda_: float | None
    train_ks: float
    test_ks: float
    difference: float


@dataclass
class _SearchContext:
    source: Graph | PropertyTable
    model: str
    target_cdf: Cdf
    spec: GridSpec
    seed: int
    workers: int
    max_rounds: int
    size_cap: int | None
    round_cap: int
    table_cache: dict[int, PropertyTable] = field(default_factory=dict)


def _alpha_table(ctx: _SearchContext, alpha_key: int) -> PropertyTable:
    table = ctx.table_cache.get(alpha_key)
    if table is None:
        params = ModelParams(
            _from_key(alpha_key), max_rounds=ctx.max_rounds, size_cap=ctx.size_cap
        )
        _, table = run_batch(
            ctx.source,
            "alpha_k",
            params,
            ctx.spec.runs_per_point,
            seed=derive_seed(ctx.seed, alpha_key),
            workers=ctx.workers,
        )
        ctx.table_cache[alpha_key] = table
    return table


def _evaluate_point(ctx: _SearchContext, alpha_key: int | None, lambda_key: int | None) -> GridEval:
    alpha = _from_key(alpha_key) if alpha_key is not None else None
    lam = _from_key(lambda_key) if lambda_key is not None else None

    if ctx.model == "compound":
        if isinstance(ctx.source, PropertyTable):
            table = ctx.source
            seed_parts = (ctx.seed, -1, lambda_key, 1)
        else:
            table = _alpha_table(ctx, alpha_key)
            seed_parts = (ctx.seed, alpha_key, lambda_key, 1)
        if lambda_key == 0:
            hist = table.size_marginal()
        else:
            try:
                hist = run_compound_batch(
                    table,
                    lam,
                    ctx.spec.runs_per_point,
                    seed=derive_seed(*seed_parts),
                    workers=ctx.workers,
                    round_cap=ctx.round_cap,
                )
            except DivergenceError:
                return GridEval(
                    alpha, lam, None, ctx.spec.runs_per_point,
                    diverged=ctx.spec.runs_per_point, skipped=True,
                )
            if hist.diverged:
                return GridEval(
                    alpha, lam, None, hist.runs, diverged=hist.diverged, skipped=True
                )
    else:
        params = ModelParams(alpha, max_rounds=ctx.max_rounds, size_cap=ctx.size_cap)
        if ctx.model == "multi_exact":
            seed = derive_seed(ctx.seed, alpha_key, lambda_key, 2)
        else:
            seed = derive_seed(ctx.seed, alpha_key)
        hist, _ = run_batch(
            ctx.source,
            ctx.model,
            params,
            ctx.spec.runs_per_point,
            seed=seed,
            lambda_=lam or 0.0,
            workers=ctx.workers,
        )

    ks = ks_statistic(to_cdf(hist), ctx.target_cdf)
    return GridEval(
        alpha, lam, ks.statistic, hist.runs,
        diverged=hist.diverged, ks_num=ks.numerator, ks_den=ks.denominator,
    )


def _lattice(lo_key: int, hi_key: int, step_key: int) -> list[int]:
    if lo_key > hi_key:
        return []
    return list(range(lo_key, hi_key + 1, step_key))


def _better(cand: tuple[int, int, int, int], best: tuple[int, int, int, int] | None) -> bool:
    # entries: (num, den, alpha_key, lambda_key); exact fraction compare,
    # ties toward smaller alpha then smaller lambda
    if best is None:
        return True
    cn, cd, ca, cl = cand
    bn, bd, ba, bl = best
    lhs = cn * bd
    rhs = bn * cd
    if lhs != rhs:
        return lhs < rhs
    return (ca, cl) < (ba, bl)


def grid_search(
    source: Graph | PropertyTable,
    model: str,
    target: SizeHistogram,
    spec: GridSpec,
    seed: int,
    workers: int = 1,
    max_rounds: int = DEFAULT_MAX_ROUNDS,
    size_cap: int | None = None,
    round_cap: int = DEFAULT_ROUND_CAP,
) -> FitResult:
    """Minimize K-S(model distribution, target) over the parameter grid.

    A PropertyTable source fixes the cascade distribution and searches
    lambda only (model must be "compound"); a Graph source simulates per
    grid point.  Divergent compound points are recorded and skipped.
    """
    if model not in FIT_MODELS:
        raise ValueError(f"unknown model {model!r}; expected one of {FIT_MODELS}")
    if isinstance(source, PropertyTable) and model != "compound":
        raise ValueError("a PropertyTable source requires the compound model")
    if model == "compound" and not spec.two_dim:
        raise ValueError("the compound model needs a lambda range")
    if not target.counts:
        raise ValueError("target histogram is empty")

    ctx = _SearchContext(
        source, model, to_cdf(target), spec, seed, workers, max_rounds, size_cap, round_cap
    )
    table_source = isinstance(source, PropertyTable)

    step_key = _to_key(spec.step)
    alpha_keys_full = (
        [None] if table_source else (_to_key(spec.alpha_lo), _to_key(spec.alpha_hi))
    )
    lambda_full = (
        (_to_key(spec.lambda_lo), _to_key(spec.lambda_hi)) if spec.two_dim else None
    )

    cache: dict[tuple[int | None, int | None], GridEval] = {}
    evaluations: list[GridEval] = []
    best: tuple[int, int, int, int] | None = None
    best_point: tuple[int | None, int | None] | None = None

    alpha_window = None if table_source else alpha_keys_full
    lambda_window = lambda_full

    for level in range(spec.refinement_levels, -1, -1):
        level_step = step_key * 10**level
        if table_source:
            alpha_values: list[int | None] = [None]
        else:
            alpha_values = _lattice(alpha_window[0], alpha_window[1], level_step)
        if spec.two_dim:
            lambda_values: list[int | None] = _lattice(
                lambda_window[0], lambda_window[1], level_step
            )
        else:
            lambda_values = [None]
        if not alpha_values or not lambda_values:
            raise ValueError("empty parameter grid")

        for a_key in alpha_values:
            for l_key in lambda_values:
                point = (a_key, l_key)
                ev = cache.get(point)
                if ev is None:
                    ev = _evaluate_point(ctx, a_key, l_key)
                    cache[point] = ev
                    evaluations.append(ev)
                if ev.skipped:
                    continue
                cand = (
                    ev.ks_num,
                    ev.ks_den,
                    a_key if a_key is not None else 0,
                    l_key if l_key is not None else 0,
                )
                if _better(cand, best):
                    best = cand
                    best_point = point

        if best_point is None:
            raise DivergenceError("every grid point diverged; nothing to refine")

        if level > 0:
            # narrow to the incumbent's +- one coarse step, clipped to the range
            a_best, l_best = best_point
            if not table_source:
                alpha_window = (
                    max(alpha_keys_full[0], a_best - level_step),
                    min(alpha_keys_full[1], a_best + level_step),
                )
            if spec.two_dim:
                lambda_window = (
                    max(lambda_full[0], l_best - level_step),
                    min(lambda_full[1], l_best + level_step),
                )

    a_best, l_best = best_point
    return FitResult(
        best_alpha=_from_key(a_best) if a_best is not None else None,
        best_lambda=_from_key(l_best) if l_best is not None else None,
        best_ks=best[0] / best[1],
        evaluations=evaluations,
    )


def validate(
    source: Graph | PropertyTable,
    model: str,
    fit_result: FitResult,
    test_target: SizeHistogram,
    runs: int,
    seed: int,
    workers: int = 1,
    max_rounds: int = DEFAULT_MAX_ROUNDS,
    size_cap: int | None = None,
    round_cap: int = DEFAULT_ROUND_CAP,
) -> ValidationReport:
    """Re-simulate at the fitted parameters against a held-out target.

    Reports the training K-S, the test K-S and their absolute difference
    (the overfitting criterion).
    """
    if not test_target.counts:
        raise ValueError("test target histogram is empty")
    alpha = fit_result.best_alpha
    lam = fit_result.best_lambda
    if model == "compound":
        if isinstance(source, PropertyTable):
            table = source
        else:
            params = ModelParams(alpha, max_rounds=max_rounds, size_cap=size_cap)
            _, table = run_batch(
                source, "alpha_k", params, runs,
                seed=derive_seed(seed, 101), workers=workers,
            )
        if lam == 0:
            hist = table.size_marginal()
        else:
            hist = run_compound_batch(
                table, lam, runs, seed=derive_seed(seed, 102),
                workers=workers, round_cap=round_cap,
            )
    else:
        params = ModelParams(alpha, max_rounds=max_rounds, size_cap=size_cap)
        hist, _ = run_batch(
            source, model, params, runs,
            seed=derive_seed(seed, 103), lambda_=lam or 0.0, workers=workers,
        )
    test_ks = ks_statistic(to_cdf(hist), to_cdf(test_target)).statistic
    return ValidationReport(
        alpha=alpha,
        lambda_=lam,
        train_ks=fit_result.best_ks,
        test_ks=test_ks,
        difference=abs(fit_result.best_ks - test_ks),
    )


# ---- report TSV -------------------------------------------------------------


def summary_line(result: FitResult) -> str:
    alpha = f"{result.best_alpha:.7g}" if result.best_alpha is not None else "-"
    lam = f"{result.best_lambda:.7g}" if result.best_lambda is not None else "-"
    return f"best alpha={alpha} lambda={lam} ks={result.best_ks:.6f}"


def format_fit_report(result: FitResult) -> str:
    lines = ["# alpha\tlambda\tks\truns\tdiverged"]
    for ev in result.evaluations:
        alpha = f"{ev.alpha:.7g}" if ev.alpha is not None else "-"
        lam = f"{ev.lambda_:.7g}" if ev.lambda_ is not None else "-"
        ks = f"{ev.ks:.6f}" if ev.ks is not None else "-"
        lines.append(f"{alpha}\t{lam}\t{ks}\t{ev.runs}\t{ev.diverged}")
    lines.append(f"# {summary_line(result)}")
    return "\n".join(lines) + "\n"


def write_fit_report(result: FitResult, path: str | os.PathLike) -> None:
    _atomic_write(path, format_fit_report(result))
