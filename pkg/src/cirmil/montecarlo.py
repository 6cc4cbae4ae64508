"""Ensemble moment estimators and convergence-order ladders.

Weak ladders compare a sampled (or closed-form) moment at the horizon
against the exact CIR moment; strong ladders couple every rung to a fine
reference trajectory through shared Brownian increments and average the
terminal gap |X_ref(T) - X_dt(T)|.

All reductions are block-deterministic: paths are processed in fixed-size
blocks (a pure function of the step count, never of the thread count),
per-block sums use NumPy's pairwise summation, and blocks are combined
with exact fsum accumulation. Results are therefore bit-identical for any
degree of parallelism. Confidence intervals are 95% normal intervals,
sample_std * 1.96 / sqrt(n_paths).
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from . import _kernels, model
from .constants import CONFIDENCE_Z
from .model import CirParams
from .scheme import DomainViolation, Safety, SchemeConfig
from .stochastic import gaussian_block

__all__ = [
    "MomentTrace",
    "ErrorLadder",
    "InsufficientPaths",
    "DegenerateFit",
    "sample_moments",
    "weak_error_ladder",
    "analytic_error_ladder",
    "strong_error_ladder",
    "fit_loglog_slope",
]

# Block-size policy: bounded noise memory (~128 MiB of increments), fixed
# given the step count so partitioning never depends on thread count.
_MAX_BLOCK_PATHS = 16384
_MAX_BLOCK_ELEMENTS = 1 << 24


class InsufficientPaths(RuntimeError):
    """Monte Carlo noise swamps the estimated error at every rung."""


class DegenerateFit(ValueError):
    """Log-log regression impossible: fewer than two distinct abscissae or a zero error."""


@dataclass(frozen=True)
class MomentTrace:
    """Sampled first/second moments over a time grid with 95% half-widths."""

    times: np.ndarray
    sample_mean: np.ndarray
    sample_second_moment: np.ndarray
    n_paths: int
    half_widths: np.ndarray
    m2_half_widths: np.ndarray


@dataclass(frozen=True)
class ErrorLadder:
    """Per-step-size errors with confidence half-widths and the fitted log-log slope."""

    dts: np.ndarray
    errors: np.ndarray
    half_widths: np.ndarray
    slope: float
    intercept: float


def fit_loglog_slope(rows: Sequence[tuple[float, float]]) -> tuple[float, float]:
    """Ordinary least squares of log(error) on log(dt); returns (slope, intercept)."""
    if len(rows) < 2:
        raise DegenerateFit(f"need at least two rungs, got {len(rows)}")
    dts = np.array([float(dt) for dt, _ in rows])
    errors = np.array([float(err) for _, err in rows])
    if np.any(errors <= 0.0):
        raise DegenerateFit("every error must be positive to fit a log-log slope")
    if np.all(dts == dts[0]):
        raise DegenerateFit("all step sizes are equal; slope is undefined")
    x = np.log(dts)
    y = np.log(errors)
    dx = x - x.mean()
    slope = float(np.dot(dx, y - y.mean()) / np.dot(dx, dx))
    return slope, float(y.mean() - slope * x.mean())


def _blocks(n_paths: int, n_steps: int) -> list[tuple[int, int]]:
    size = max(128, min(_MAX_BLOCK_PATHS, _MAX_BLOCK_ELEMENTS // max(1, n_steps)))
    return [(start, min(size, n_paths - start)) for start in range(0, n_paths, size)]


def _map_blocks(worker: Callable, blocks: list[tuple[int, int]], threads: int) -> list:
    """Apply worker to each block; results come back in block order regardless of scheduling."""
    if threads <= 1 or len(blocks) <= 1:
        return [worker(block) for block in blocks]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(worker, blocks))


def _fsum_parts(parts: list, index: int) -> np.ndarray:
    """Exact sum of one vector component across per-block results."""
    width = np.size(parts[0][index])
    return np.array(
        [math.fsum(float(np.ravel(part[index])[i]) for part in parts) for i in range(width)]
    )


def _moment_stats(center: float, total: float, total_sq: float, n: int) -> tuple[float, float]:
    """Sample mean and its 95% half-width from center-shifted sums.

    total and total_sq accumulate (v - center) and (v - center)^2; shifting
    by a natural center (the start value, or zero for pathwise gaps) keeps
    the variance free of cancellation, so a constant sample yields an
    exactly zero half-width.
    """
    shift = total / n
    var = max(0.0, (total_sq - n * shift * shift) / (n - 1))
    return center + shift, CONFIDENCE_Z * math.sqrt(var / n)


def _times_to_steps(record_times: Sequence[float], dt: float, n_steps: int) -> np.ndarray:
    steps = []
    for t in record_times:
        k = t / dt
        rounded = round(k)
        if abs(k - rounded) > 1e-9 * max(1.0, abs(k)):
            raise ValueError(f"record time {t} is not a multiple of dt = {dt}")
        if rounded < 0 or rounded > n_steps:
            raise ValueError(f"record time {t} outside the simulated horizon")
        steps.append(int(rounded))
    arr = np.array(steps, dtype=np.int64)
    if arr.size == 0 or np.any(np.diff(arr) <= 0):
        raise ValueError("record times must be non-empty and strictly increasing")
    return arr


def sample_moments(
    p: CirParams,
    cfg: SchemeConfig,
    n_paths: int,
    record_times: Sequence[float],
    *,
    master_seed: int,
    threads: int = 1,
) -> MomentTrace:
    """Ensemble first and second moments at the requested grid times."""
    if n_paths < 2:
        raise ValueError(f"n_paths must be at least 2, got {n_paths}")
    cfg.validate_for(p)
    steps = _times_to_steps(record_times, cfg.dt, cfg.n_steps)

    # accumulate around the deterministic start so the degenerate
    # zero-step trace comes out with exactly zero spread
    c1 = p.x0
    c2 = p.x0 * p.x0

    def worker(block: tuple[int, int]):
        start, count = block
        dw = gaussian_block(master_seed, start, count, cfg.n_steps, cfg.dt)
        if cfg.safety is Safety.RESEARCH:
            # outside the guaranteed regime states can go negative and the
            # next sqrt turns them into NaN; surface that instead of
            # propagating garbage (checked at the record grid)
            with np.errstate(invalid="ignore"):
                states = _kernels.record_batch(
                    p.alpha, p.mu, p.sigma, cfg.theta, cfg.dt, p.x0, dw, steps
                )
            if not np.all(np.isfinite(states)) or np.any(states < 0.0):
                raise DomainViolation(
                    "research-mode ensemble left the state domain "
                    f"(theta = {cfg.theta}, 4 alpha mu - sigma^2 = "
                    f"{4 * p.alpha * p.mu - p.sigma**2})"
                )
        else:
            states = _kernels.record_batch(
                p.alpha, p.mu, p.sigma, cfg.theta, cfg.dt, p.x0, dw, steps
            )
        d1 = states - c1
        d2 = states * states - c2
        return d1.sum(axis=0), (d1 * d1).sum(axis=0), d2.sum(axis=0), (d2 * d2).sum(axis=0)

    parts = _map_blocks(worker, _blocks(n_paths, cfg.n_steps), threads)
    sums = [_fsum_parts(parts, i) for i in range(4)]

    mean = np.empty(steps.size)
    second = np.empty(steps.size)
    hw_mean = np.empty(steps.size)
    hw_m2 = np.empty(steps.size)
    for i in range(steps.size):
        mean[i], hw_mean[i] = _moment_stats(c1, sums[0][i], sums[1][i], n_paths)
        second[i], hw_m2[i] = _moment_stats(c2, sums[2][i], sums[3][i], n_paths)
    return MomentTrace(
        times=steps * cfg.dt,
        sample_mean=mean,
        sample_second_moment=second,
        n_paths=n_paths,
        half_widths=hw_mean,
        m2_half_widths=hw_m2,
    )


def _checked_steps(dts: Sequence[float], horizon: float) -> list[int]:
    if not dts:
        raise ValueError("need at least one step size")
    counts = []
    for dt in dts:
        if not dt > 0.0:
            raise ValueError(f"step sizes must be positive, got {dt}")
        n = horizon / dt
        if abs(n - round(n)) > 1e-9 * max(1.0, abs(n)):
            raise ValueError(f"horizon {horizon} is not an integer multiple of dt = {dt}")
        counts.append(int(round(n)))
    return counts


def _moment_value(moment: int):
    if moment not in (1, 2):
        raise ValueError(f"moment must be 1 or 2, got {moment}")


def weak_error_ladder(
    p: CirParams,
    theta: float,
    dts: Sequence[float],
    n_paths: int,
    horizon: float,
    moment: int = 1,
    *,
    master_seed: int,
    threads: int = 1,
) -> ErrorLadder:
    """Sampled weak errors |sample moment - exact moment| at the horizon, per step size.

    Raises InsufficientPaths when the confidence half-width exceeds the
    measured error at every rung (the ladder would be pure noise).
    """
    _moment_value(moment)
    if n_paths < 2:
        raise ValueError(f"n_paths must be at least 2, got {n_paths}")
    step_counts = _checked_steps(dts, horizon)
    if moment == 1:
        exact = model.exact_mean(p, horizon)
    else:
        exact = model.exact_second_moment(p, horizon)

    center = p.x0 if moment == 1 else p.x0 * p.x0
    errors = np.empty(len(dts))
    half_widths = np.empty(len(dts))
    for i, (dt, n_steps) in enumerate(zip(dts, step_counts)):
        cfg = SchemeConfig(theta=theta, dt=dt, n_steps=n_steps)
        cfg.validate_for(p)

        def worker(block: tuple[int, int], dt=dt, n_steps=n_steps, cfg=cfg):
            start, count = block
            dw = gaussian_block(master_seed, start, count, n_steps, dt)
            x, _ = _kernels.terminal_batch(
                p.alpha, p.mu, p.sigma, cfg.theta, dt, p.x0, dw
            )
            v = (x if moment == 1 else x * x) - center
            return v.sum(), (v * v).sum()

        parts = _map_blocks(worker, _blocks(n_paths, n_steps), threads)
        total = math.fsum(part[0] for part in parts)
        total_sq = math.fsum(part[1] for part in parts)
        sampled, half_widths[i] = _moment_stats(center, total, total_sq, n_paths)
        errors[i] = abs(sampled - exact)

    if np.all(half_widths > errors):
        raise InsufficientPaths(
            "confidence half-width exceeds the measured error at every rung; "
            f"the ladder is pure noise at n_paths = {n_paths}"
        )
    slope, intercept = fit_loglog_slope(list(zip(dts, errors)))
    return ErrorLadder(np.asarray(dts, dtype=float), errors, half_widths, slope, intercept)


def analytic_error_ladder(
    p: CirParams,
    theta: float,
    dts: Sequence[float],
    horizon: float,
    moment: int = 1,
) -> ErrorLadder:
    """Noise-free weak-error ladder from the closed-form moment recurrences."""
    _moment_value(moment)
    step_counts = _checked_steps(dts, horizon)
    errors = np.empty(len(dts))
    for i, (dt, n_steps) in enumerate(zip(dts, step_counts)):
        if moment == 1:
            errors[i] = abs(model.mean_error(p, theta, dt, n_steps))
        else:
            errors[i] = abs(model.second_moment_error(p, theta, dt, n_steps))
    slope, intercept = fit_loglog_slope(list(zip(dts, errors)))
    return ErrorLadder(
        np.asarray(dts, dtype=float), errors, np.zeros(len(dts)), slope, intercept
    )


def strong_error_ladder(
    p: CirParams,
    theta: float,
    dts: Sequence[float],
    fine_factor_to_ref: int,
    n_paths: int,
    horizon: float,
    *,
    master_seed: int,
    threads: int = 1,
) -> ErrorLadder:
    """Pathwise errors E|X_ref(T) - X_dt(T)| against a shared fine reference.

    The reference runs the same scheme at dt_ref = min(dts) / fine_factor_to_ref
    on each path's fine increments; every rung consumes block sums of the
    same increments, so all trajectories share one Brownian path.
    """
    if n_paths < 2:
        raise ValueError(f"n_paths must be at least 2, got {n_paths}")
    factor = int(fine_factor_to_ref)
    if factor < 1 or (factor & (factor - 1)) != 0:
        raise ValueError(f"fine_factor_to_ref must be a power of two, got {fine_factor_to_ref}")
    step_counts = _checked_steps(dts, horizon)
    dt_ref = min(dts) / factor
    n_fine = int(round(horizon / dt_ref))
    ratios = []
    for dt in dts:
        ratio = dt / dt_ref
        if abs(ratio - round(ratio)) > 1e-9:
            raise ValueError(f"dt = {dt} is not an integer multiple of dt_ref = {dt_ref}")
        ratios.append(int(round(ratio)))
    cfg_ref = SchemeConfig(theta=theta, dt=dt_ref, n_steps=n_fine)
    cfg_ref.validate_for(p)

    def worker(block: tuple[int, int]):
        start, count = block
        dw_fine = gaussian_block(master_seed, start, count, n_fine, dt_ref)
        ref, _ = _kernels.terminal_batch(
            p.alpha, p.mu, p.sigma, theta, dt_ref, p.x0, dw_fine
        )
        sums = np.empty(len(dts))
        sums_sq = np.empty(len(dts))
        for i, (dt, n_steps, ratio) in enumerate(zip(dts, step_counts, ratios)):
            dw = dw_fine.reshape(count, n_steps, ratio).sum(axis=2)
            x, _ = _kernels.terminal_batch(p.alpha, p.mu, p.sigma, theta, dt, p.x0, dw)
            gap = np.abs(ref - x)
            sums[i] = gap.sum()
            sums_sq[i] = (gap * gap).sum()
        return sums, sums_sq

    parts = _map_blocks(worker, _blocks(n_paths, n_fine), threads)
    errors = np.empty(len(dts))
    half_widths = np.empty(len(dts))
    for i in range(len(dts)):
        total = math.fsum(float(part[0][i]) for part in parts)
        total_sq = math.fsum(float(part[1][i]) for part in parts)
        errors[i], half_widths[i] = _moment_stats(0.0, total, total_sq, n_paths)

    if np.all(half_widths > errors):
        raise InsufficientPaths(
            "confidence half-width exceeds the measured error at every rung; "
            f"the ladder is pure noise at n_paths = {n_paths}"
        )
    slope, intercept = fit_loglog_slope(list(zip(dts, errors)))
    return ErrorLadder(np.asarray(dts, dtype=float), errors, half_widths, slope, intercept)
