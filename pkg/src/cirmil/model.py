"""Closed-form moment analysis for the CIR model and its implicit Milstein schemes.

The Cox-Ingersoll-Ross process

    dX = alpha (mu - X) dt + sigma sqrt(X) dW,     alpha, mu, sigma > 0,

has first and second moments known in closed form at every horizon, with
long-term limits mu and mu^2 + sigma^2 mu / (2 alpha). Discretizing with a
drift-implicit (theta-weighted) Milstein step turns both moments into
linear recurrences

    E[X_{n+1}]   = A E[X_n] + B
    E[X_{n+1}^2] = A^2 E[X_n^2] + D E[X_n] + E

whose coefficients, fixed points and asymptotic biases are themselves
closed forms in (alpha, mu, sigma, theta, dt). This module holds the
parameter container, the validity conditions, and all of those formulas;
the Monte Carlo layers use them as noise-free oracles.

Everything here is a pure function of value types and safe to call
concurrently.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

__all__ = [
    "CirParams",
    "ConditionReport",
    "ThetaAnalysis",
    "ParameterDomain",
    "MomentDomain",
    "UnsupportedTheta",
    "PAR1",
    "PAR2",
    "PRESETS",
    "check_conditions",
    "exact_mean",
    "exact_second_moment",
    "theta_coefficients",
    "numerical_mean",
    "numerical_second_moment",
    "iterate_moments",
    "mean_error",
    "second_moment_error",
    "second_moment_bias_sweep",
]


class ParameterDomain(ValueError):
    """A model parameter violates its domain (positivity / non-negativity)."""


class MomentDomain(ValueError):
    """An impossible moment pair was supplied (second moment below squared mean)."""


class UnsupportedTheta(ValueError):
    """theta < 1 requested outside research mode; no structural guarantee holds there."""


@dataclass(frozen=True)
class CirParams:
    """CIR coefficients and start value.

    alpha: mean-reversion speed (1/time); mu: long-term mean; sigma:
    volatility; x0: initial value. alpha, mu, sigma must be positive and
    x0 non-negative.
    """

    alpha: float
    mu: float
    sigma: float
    x0: float

    def __post_init__(self):
        for name in ("alpha", "mu", "sigma"):
            value = getattr(self, name)
            if not math.isfinite(value) or value <= 0.0:
                raise ParameterDomain(f"{name} must be a positive real, got {value}")
        if not math.isfinite(self.x0) or self.x0 < 0.0:
            raise ParameterDomain(f"x0 must be non-negative, got {self.x0}")

    def milstein_condition(self) -> bool:
        """True when 4 alpha mu >= sigma^2, so the implicit Milstein step stays non-negative."""
        return 4.0 * self.alpha * self.mu >= self.sigma * self.sigma

    def feller_condition(self) -> bool:
        """True when 2 alpha mu >= sigma^2, so the exact solution stays strictly positive."""
        return 2.0 * self.alpha * self.mu >= self.sigma * self.sigma

    @property
    def long_term_mean(self) -> float:
        return self.mu

    @property
    def long_term_variance(self) -> float:
        return self.sigma * self.sigma * self.mu / (2.0 * self.alpha)

    @property
    def long_term_second_moment(self) -> float:
        return self.mu * self.mu + self.long_term_variance


# Benchmark parameter sets: par1 is a calibrated low-volatility short-rate
# model (strictly inside both conditions); par2 sits exactly on the
# non-negativity boundary sigma^2 = 4 alpha mu and violates Feller.
PAR1 = CirParams(alpha=0.43, mu=0.06, sigma=0.15, x0=0.057)
PAR2 = CirParams(alpha=0.5, mu=0.5, sigma=1.0, x0=0.525)
PRESETS = {"par1": PAR1, "par2": PAR2}


@dataclass(frozen=True)
class ConditionReport:
    """Validity flags plus the long-term moment limits of the exact process."""

    feller: bool
    milstein_nonneg: bool
    long_term_mean: float
    long_term_second_moment: float
    long_term_variance: float


def check_conditions(p: CirParams) -> ConditionReport:
    """Evaluate the Feller and Milstein non-negativity conditions and the long-term limits."""
    return ConditionReport(
        feller=p.feller_condition(),
        milstein_nonneg=p.milstein_condition(),
        long_term_mean=p.long_term_mean,
        long_term_second_moment=p.long_term_second_moment,
        long_term_variance=p.long_term_variance,
    )


def _start_moments(p: CirParams, e0: float | None, e0_sq: float | None) -> tuple[float, float]:
    """Resolve optional start moments; a deterministic start X0 = x0 is the default."""
    if e0 is None:
        e0 = p.x0
    if e0_sq is None:
        e0_sq = e0 * e0
    if e0_sq < e0 * e0:
        raise MomentDomain(f"E[X0^2] = {e0_sq} is below E[X0]^2 = {e0 * e0}")
    return e0, e0_sq


def exact_mean(p: CirParams, t: float, e0: float | None = None) -> float:
    """E[X(t)] = exp(-alpha t) (E[X0] - mu) + mu."""
    if t < 0.0:
        raise ValueError(f"t must be non-negative, got {t}")
    if e0 is None:
        e0 = p.x0
    return math.exp(-p.alpha * t) * (e0 - p.mu) + p.mu


def exact_second_moment(
    p: CirParams, t: float, e0: float | None = None, e0_sq: float | None = None
) -> float:
    """E[X(t)^2] of the exact process.

    Three-term form: the long-term limit mu^2 + sigma^2 mu / (2 alpha),
    plus transients decaying like exp(-2 alpha t) and exp(-alpha t).
    """
    if t < 0.0:
        raise ValueError(f"t must be non-negative, got {t}")
    e0, e0_sq = _start_moments(p, e0, e0_sq)
    a, mu, s2 = p.alpha, p.mu, p.sigma * p.sigma
    c = 2.0 * mu + s2 / a
    return (
        mu * mu
        + s2 * mu / (2.0 * a)
        + math.exp(-2.0 * a * t) * (e0_sq + c * (0.5 * mu - e0))
        + math.exp(-a * t) * c * (e0 - mu)
    )


@dataclass(frozen=True)
class ThetaAnalysis:
    """Coefficients of the scheme's moment recurrences at one (theta, dt).

    A and B drive the mean recurrence, D and E the second-moment one.
    one_minus_A carries 1 - A in its cancellation-free form
    alpha dt / (1 + alpha theta dt); use it wherever 1 - A would lose
    precision for small steps. second_moment_limit is the recurrence fixed
    point (D mu + E) / (1 - A^2), which equals the exact long-term second
    moment plus second_moment_bias; the bias vanishes iff theta equals
    theta_star = (sigma^2 + 4 mu alpha) / (8 mu alpha) and is <= 0 on
    theta >= 1 whenever 4 alpha mu >= sigma^2.
    """

    theta: float
    dt: float
    A: float
    B: float
    D: float
    E: float
    one_minus_A: float
    theta_star: float
    second_moment_bias: float
    second_moment_limit: float


def _require_theta(theta: float, research: bool):
    if not math.isfinite(theta):
        raise UnsupportedTheta(f"theta must be finite, got {theta}")
    if theta < 1.0:
        if not research:
            raise UnsupportedTheta(
                f"theta = {theta} < 1: non-negativity and moment guarantees need "
                "theta >= 1 (pass research=True to proceed anyway)"
            )
        warnings.warn(
            f"theta = {theta} < 1: structural guarantees are void", RuntimeWarning, stacklevel=3
        )


def theta_coefficients(
    p: CirParams, theta: float, dt: float, research: bool = False
) -> ThetaAnalysis:
    """Recurrence coefficients and long-term bias for one (theta, dt).

    Raises UnsupportedTheta for theta < 1 unless research=True (then warns).
    """
    _require_theta(theta, research)
    if not dt > 0.0 or not math.isfinite(dt):
        raise ValueError(f"dt must be positive, got {dt}")
    a, mu, s2 = p.alpha, p.mu, p.sigma * p.sigma
    denom = 1.0 + a * theta * dt
    one_minus_a = a * dt / denom
    A = 1.0 - one_minus_a
    # B as mu (1 - A) keeps the fixed point B / (1 - A) at mu to the ulp
    B = mu * one_minus_a
    D = (s2 + 2.0 * a * mu * (1.0 + a * dt * (theta - 1.0))) * dt / (denom * denom)
    E = (8.0 * a * a * mu * mu + s2 * s2) * dt * dt / (8.0 * denom * denom)
    bias = s2 * (4.0 * mu * a * (1.0 - 2.0 * theta) + s2) * dt / (
        8.0 * a * (2.0 + a * dt * (2.0 * theta - 1.0))
    )
    return ThetaAnalysis(
        theta=theta,
        dt=dt,
        A=A,
        B=B,
        D=D,
        E=E,
        one_minus_A=one_minus_a,
        theta_star=(s2 + 4.0 * mu * a) / (8.0 * mu * a),
        second_moment_bias=bias,
        second_moment_limit=p.long_term_second_moment + bias,
    )


def _require_step_count(n: int) -> int:
    if n != int(n) or n < 0:
        raise ValueError(f"n must be a non-negative integer, got {n}")
    return int(n)


def numerical_mean(
    p: CirParams,
    theta: float,
    dt: float,
    n: int,
    e0: float | None = None,
    research: bool = False,
) -> float:
    """Closed form of the scheme mean after n steps: A^n (E[X0] - mu) + mu."""
    n = _require_step_count(n)
    coeff = theta_coefficients(p, theta, dt, research)
    if e0 is None:
        e0 = p.x0
    return coeff.A**n * (e0 - p.mu) + p.mu


def iterate_moments(
    p: CirParams,
    theta: float,
    dt: float,
    n: int,
    e0: float | None = None,
    e0_sq: float | None = None,
    research: bool = False,
) -> tuple[np.ndarray, np.ndarray]:
    """Step the mean and second-moment recurrences jointly.

    Returns arrays of length n + 1; index k holds the moments after k steps.
    """
    n = _require_step_count(n)
    coeff = theta_coefficients(p, theta, dt, research)
    e0, e0_sq = _start_moments(p, e0, e0_sq)
    means = np.empty(n + 1)
    seconds = np.empty(n + 1)
    mean, second = e0, e0_sq
    means[0], seconds[0] = mean, second
    a2 = coeff.A * coeff.A
    for k in range(1, n + 1):
        second = a2 * second + coeff.D * mean + coeff.E
        mean = coeff.A * mean + coeff.B
        means[k], seconds[k] = mean, second
    return means, seconds


def numerical_second_moment(
    p: CirParams,
    theta: float,
    dt: float,
    n: int,
    e0: float | None = None,
    e0_sq: float | None = None,
    research: bool = False,
) -> float:
    """Scheme second moment after n steps of the coupled recurrences."""
    _, seconds = iterate_moments(p, theta, dt, n, e0, e0_sq, research)
    return float(seconds[-1])


def mean_error(
    p: CirParams,
    theta: float,
    dt: float,
    n: int,
    e0: float | None = None,
    research: bool = False,
) -> float:
    """Signed mean error of the scheme at t = n dt: (A^n - exp(-alpha dt n)) (E[X0] - mu).

    Its magnitude is minimized over theta >= 1 at theta = 1, for every n.
    """
    n = _require_step_count(n)
    coeff = theta_coefficients(p, theta, dt, research)
    if e0 is None:
        e0 = p.x0
    return (coeff.A**n - math.exp(-p.alpha * dt * n)) * (e0 - p.mu)


def second_moment_error(
    p: CirParams,
    theta: float,
    dt: float,
    n: int,
    e0: float | None = None,
    e0_sq: float | None = None,
    research: bool = False,
) -> float:
    """Signed second-moment error of the scheme at t = n dt."""
    num = numerical_second_moment(p, theta, dt, n, e0, e0_sq, research)
    e0r = p.x0 if e0 is None else e0
    return num - exact_second_moment(p, n * dt, e0r, e0_sq)


def second_moment_bias_sweep(
    p: CirParams, thetas: list[float], dt: float, research: bool = False
) -> list[tuple[float, float]]:
    """Long-term second-moment bias for each theta; <= 0 and non-increasing on theta >= 1."""
    return [
        (theta, theta_coefficients(p, theta, dt, research).second_moment_bias)
        for theta in thetas
    ]
