"""One-step implicit Milstein map for the CIR equation and single-path drivers.

The CIR drift is affine, so the theta-weighted implicit Milstein update
solves in closed form; grouping its noise terms as a perfect square gives

    X_{n+1} = [ (theta - 1) a dt X_n + (a mu - sigma^2/4) dt
                + (sqrt(X_n) + sigma dW / 2)^2 ] / (1 + a theta dt).

For theta >= 1 and 4 a mu >= sigma^2 every term is non-negative, so the
step cannot go below zero for any dW, in exact and in floating-point
arithmetic alike; the worst case is the vertex dW = -2 sqrt(X_n) / sigma
where the square vanishes. The compiled kernels evaluate exactly this
expression; ensemble drivers live in `montecarlo`.

Steppers are pure functions; a path simulation owns its noise stream.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable, Iterable

from .constants import CLAMP_ABS_TOL
from .model import CirParams, ParameterDomain, UnsupportedTheta
from .stochastic import CoupledIncrements, NoiseStream

__all__ = [
    "Safety",
    "SchemeConfig",
    "PathState",
    "PathRun",
    "DomainViolation",
    "milstein_step",
    "simulate_path",
    "simulate_coupled",
    "OneStepMap",
    "theta_milstein_map",
    "simulate_with",
]


class DomainViolation(ArithmeticError):
    """A step left the state domain (possible only for theta < 1 or 4 alpha mu < sigma^2)."""


class Safety(enum.Enum):
    """Strict mode enforces the guarantees; research mode trades them for runtime checks."""

    STRICT = "strict"
    RESEARCH = "research"


@dataclass(frozen=True)
class SchemeConfig:
    """Discretization choice: implicitness weight, step size, horizon, safety policy."""

    theta: float
    dt: float
    n_steps: int
    safety: Safety = Safety.STRICT

    def __post_init__(self):
        if not math.isfinite(self.theta):
            raise UnsupportedTheta(f"theta must be finite, got {self.theta}")
        if self.safety is Safety.STRICT and self.theta < 1.0:
            raise UnsupportedTheta(
                f"theta = {self.theta} < 1 requires research mode (guarantees are void)"
            )
        if not self.dt > 0.0 or not math.isfinite(self.dt):
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.n_steps < 0 or self.n_steps != int(self.n_steps):
            raise ValueError(f"n_steps must be a non-negative integer, got {self.n_steps}")

    @property
    def horizon(self) -> float:
        return self.n_steps * self.dt

    def validate_for(self, p: CirParams):
        """Strict mode additionally requires the model's non-negativity condition."""
        if self.safety is Safety.STRICT and not p.milstein_condition():
            raise ParameterDomain(
                f"4 alpha mu = {4 * p.alpha * p.mu} < sigma^2 = {p.sigma**2}: "
                "non-negativity is not guaranteed; use research mode to simulate anyway"
            )


@dataclass(frozen=True)
class PathState:
    """One recorded sample: state value after `step` steps."""

    step: int
    value: float


@dataclass(frozen=True)
class PathRun:
    """Terminal value of a simulated path plus any recorded intermediate states."""

    terminal: float
    states: tuple[PathState, ...] = ()


def milstein_step(p: CirParams, cfg: SchemeConfig, x: float, dw: float) -> float:
    """Advance one state by one step of the implicit Milstein scheme."""
    if x < 0.0:
        raise DomainViolation(f"state must be non-negative, got {x}")
    c_lin = (cfg.theta - 1.0) * p.alpha * cfg.dt
    c_const = (p.alpha * p.mu - 0.25 * p.sigma * p.sigma) * cfg.dt
    inv = 1.0 / (1.0 + p.alpha * cfg.theta * cfg.dt)
    r = math.sqrt(x) + 0.5 * p.sigma * dw
    out = (c_lin * x + c_const + r * r) * inv
    if out < 0.0:
        # reachable only when c_lin or c_const is negative, i.e. outside
        # the guaranteed regime; apart from vertex-level cancellation dust
        if out > -CLAMP_ABS_TOL:
            return 0.0
        raise DomainViolation(
            f"step produced {out} < 0 (theta = {cfg.theta}, "
            f"4 alpha mu - sigma^2 = {4 * p.alpha * p.mu - p.sigma**2})"
        )
    return out


def simulate_path(
    p: CirParams,
    cfg: SchemeConfig,
    noise: NoiseStream,
    record_every: int | None = None,
) -> PathRun:
    """Run n_steps of the scheme on one noise stream.

    With record_every = k, the initial state and every k-th state are kept;
    the terminal value is returned in all modes.
    """
    cfg.validate_for(p)
    if record_every is not None and record_every < 1:
        raise ValueError(f"record_every must be >= 1, got {record_every}")
    x = p.x0
    states: list[PathState] = []
    if record_every is not None:
        states.append(PathState(0, x))
    for k in range(1, cfg.n_steps + 1):
        x = milstein_step(p, cfg, x, noise.next_increment())
        if record_every is not None and k % record_every == 0:
            states.append(PathState(k, x))
    return PathRun(terminal=x, states=tuple(states))


def simulate_coupled(
    p: CirParams,
    cfg_coarse: SchemeConfig,
    fine_factor: int,
    noise: CoupledIncrements,
) -> tuple[float, float]:
    """Coarse and fine trajectories driven by one Brownian path.

    The fine grid uses dt_coarse / fine_factor and consumes the raw
    increments; the coarse grid consumes their block sums. Returns the two
    terminal values (coarse, fine).
    """
    cfg_coarse.validate_for(p)
    if noise.coarsening_factor != fine_factor:
        raise ValueError(
            f"noise is coupled at factor {noise.coarsening_factor}, expected {fine_factor}"
        )
    if not math.isclose(noise.fine_dt * fine_factor, cfg_coarse.dt, rel_tol=1e-12):
        raise ValueError(
            f"fine dt {noise.fine_dt} x {fine_factor} does not match coarse dt {cfg_coarse.dt}"
        )
    cfg_fine = SchemeConfig(
        theta=cfg_coarse.theta,
        dt=noise.fine_dt,
        n_steps=cfg_coarse.n_steps * fine_factor,
        safety=cfg_coarse.safety,
    )
    x_coarse = x_fine = p.x0
    for _ in range(cfg_coarse.n_steps):
        block = noise.next_fine_block()
        for dw in block:
            x_fine = milstein_step(p, cfg_fine, x_fine, float(dw))
        x_coarse = milstein_step(p, cfg_coarse, x_coarse, float(block.sum()))
    return x_coarse, x_fine


# Seam for plugging in other one-step schemes: anything mapping
# (state, dW) -> state can be driven over a stream of increments.
OneStepMap = Callable[[float, float], float]


def theta_milstein_map(p: CirParams, cfg: SchemeConfig) -> OneStepMap:
    """The scheme's one-step map bound to fixed parameters."""
    cfg.validate_for(p)

    def step(x: float, dw: float) -> float:
        return milstein_step(p, cfg, x, dw)

    return step


def simulate_with(step: OneStepMap, x0: float, increments: Iterable[float]) -> float:
    """Drive an arbitrary one-step map over given increments; returns the terminal value."""
    x = x0
    for dw in increments:
        x = step(x, float(dw))
    return x
