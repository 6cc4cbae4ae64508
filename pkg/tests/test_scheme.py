"""One-step map and single-path driver tests.

The non-negativity and lower-bound checks sweep dW over a grid that
includes the parabola vertex -2 sqrt(x) / sigma (the exact worst case) and
+-10 sqrt(dt) tails, plus hypothesis-driven values in between.
"""

import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from cirmil import (
    PAR1,
    PAR2,
    CirParams,
    CoupledIncrements,
    DomainViolation,
    NoiseStream,
    ParameterDomain,
    Safety,
    SchemeConfig,
    UnsupportedTheta,
    milstein_step,
    simulate_coupled,
    simulate_path,
    simulate_with,
    theta_coefficients,
    theta_milstein_map,
)
from cirmil import _kernels
from cirmil.stochastic import gaussian_block

# sigma^2 > 4 alpha mu: outside the guaranteed regime, research mode only
BAD = CirParams(alpha=0.1, mu=0.1, sigma=10.0, x0=0.05)

states = st.floats(min_value=0.0, max_value=10.0, allow_nan=False)
shocks = st.floats(min_value=-12.0, max_value=12.0, allow_nan=False)


def _dw_grid(x: float, sigma: float, dt: float):
    vertex = -2.0 * math.sqrt(x) / sigma
    tail = 10.0 * math.sqrt(dt)
    return [vertex, -tail, tail, 0.0, vertex / 2, 2 * vertex, -3.3, 3.3]


class TestMilsteinStep:
    def test_vertex_is_exactly_zero_for_par2(self):
        # at sigma^2 = 4 alpha mu and theta = 1 the whole numerator
        # degenerates to the squared term, which vanishes at the vertex
        cfg = SchemeConfig(theta=1.0, dt=0.125, n_steps=1)
        for x in (0.525, 1.0, 0.03, 7.5):
            dw = -2.0 * math.sqrt(x) / PAR2.sigma
            assert milstein_step(PAR2, cfg, x, dw) == 0.0

    def test_from_zero_state_with_zero_shock(self):
        # (alpha mu - sigma^2/4) dt / (1 + alpha dt), evaluated directly
        cfg = SchemeConfig(theta=1.0, dt=0.125, n_steps=1)
        expected = (0.43 * 0.06 - 0.15**2 / 4) * 0.125 / (1 + 0.43 * 0.125)
        value = milstein_step(PAR1, cfg, 0.0, 0.0)
        assert value == pytest.approx(expected, rel=1e-13)
        assert value == pytest.approx(2.39324e-3, rel=1e-5)

    def test_zero_noise_reduces_to_implicit_theta_euler(self):
        p = CirParams(alpha=0.8, mu=0.4, sigma=1e-9, x0=0.3)
        for theta in (1.0, 2.0):
            cfg = SchemeConfig(theta=theta, dt=0.25, n_steps=1)
            euler = ((1 - 0.8 * 0.25 + 0.8 * theta * 0.25) * 0.3 + 0.8 * 0.4 * 0.25) / (
                1 + 0.8 * theta * 0.25
            )
            assert milstein_step(p, cfg, 0.3, 0.0) == pytest.approx(euler, rel=1e-12)

    @pytest.mark.parametrize("p", [PAR1, PAR2], ids=["par1", "par2"])
    @pytest.mark.parametrize("theta", [1.0, 1.5, 3.0])
    @given(x=states, dw=shocks)
    def test_never_negative_in_strict_regime(self, p, theta, x, dw):
        cfg = SchemeConfig(theta=theta, dt=0.125, n_steps=1)
        assert milstein_step(p, cfg, x, dw) >= 0.0
        for grid_dw in _dw_grid(x, p.sigma, cfg.dt):
            assert milstein_step(p, cfg, x, grid_dw) >= 0.0

    @pytest.mark.parametrize("p", [PAR1, PAR2], ids=["par1", "par2"])
    @given(x=states, dw=shocks)
    def test_lower_bound_attained_only_at_vertex(self, p, x, dw):
        theta, dt = 1.5, 0.125
        cfg = SchemeConfig(theta=theta, dt=dt, n_steps=1)
        bound = ((theta - 1) * p.alpha * dt * x + (p.alpha * p.mu - p.sigma**2 / 4) * dt) / (
            1 + p.alpha * theta * dt
        )
        # slack of a few ulps: the bound is evaluated with a different
        # association than the step's numerator
        slack = 1e-14 * max(1.0, x)
        assert milstein_step(p, cfg, x, dw) >= bound - slack
        vertex = -2.0 * math.sqrt(x) / p.sigma
        assert milstein_step(p, cfg, x, vertex) - bound <= slack

    def test_negative_state_rejected(self):
        cfg = SchemeConfig(theta=1.0, dt=0.125, n_steps=1)
        with pytest.raises(DomainViolation):
            milstein_step(PAR1, cfg, -0.01, 0.0)

    def test_research_mode_flags_negative_results(self):
        cfg = SchemeConfig(theta=1.0, dt=0.125, n_steps=1, safety=Safety.RESEARCH)
        # c_const < 0 for BAD, so the zero state with zero shock goes negative
        with pytest.raises(DomainViolation):
            milstein_step(BAD, cfg, 0.0, 0.0)

    def test_strict_mode_rejects_bad_condition(self):
        cfg = SchemeConfig(theta=1.0, dt=0.125, n_steps=4)
        with pytest.raises(ParameterDomain):
            simulate_path(BAD, cfg, NoiseStream(0, 0, 0.125))

    def test_strict_config_rejects_theta_below_one(self):
        with pytest.raises(UnsupportedTheta):
            SchemeConfig(theta=0.5, dt=0.125, n_steps=4)
        cfg = SchemeConfig(theta=0.5, dt=0.125, n_steps=4, safety=Safety.RESEARCH)
        assert cfg.theta == 0.5


class TestConditionalMoments:
    def test_one_step_mean_matches_A_x_plus_B(self):
        # ensemble mean over 10^6 shocks at a fixed state, 4-sigma band
        x, dt, theta = 0.06, 0.125, 1.0
        draws = NoiseStream(31, 0, dt).increments(1_000_000)
        out, _ = _kernels.terminal_batch(
            PAR1.alpha, PAR1.mu, PAR1.sigma, theta, dt, x, draws.reshape(-1, 1)
        )
        coeff = theta_coefficients(PAR1, theta, dt)
        band = 4.0 * out.std() / math.sqrt(out.size)
        assert abs(out.mean() - (coeff.A * x + coeff.B)) <= band

    def test_one_step_second_moment_matches_recurrence(self):
        x, dt, theta = 0.06, 0.125, 1.5
        draws = NoiseStream(32, 0, dt).increments(1_000_000)
        out, _ = _kernels.terminal_batch(
            PAR1.alpha, PAR1.mu, PAR1.sigma, theta, dt, x, draws.reshape(-1, 1)
        )
        sq = out * out
        coeff = theta_coefficients(PAR1, theta, dt)
        expected = coeff.A**2 * x * x + coeff.D * x + coeff.E
        band = 4.0 * sq.std() / math.sqrt(sq.size)
        assert abs(sq.mean() - expected) <= band


class TestSimulatePath:
    def test_zero_steps_returns_start(self):
        cfg = SchemeConfig(theta=1.0, dt=0.125, n_steps=0)
        run = simulate_path(PAR1, cfg, NoiseStream(0, 0, 0.125))
        assert run.terminal == PAR1.x0
        assert run.states == ()

    def test_recording_every_other_step(self):
        cfg = SchemeConfig(theta=1.0, dt=0.125, n_steps=6)
        run = simulate_path(PAR1, cfg, NoiseStream(3, 0, 0.125), record_every=2)
        assert [s.step for s in run.states] == [0, 2, 4, 6]
        assert run.states[0].value == PAR1.x0
        assert run.states[-1].value == run.terminal
        assert all(s.value >= 0.0 for s in run.states)

    def test_bitwise_reproducible(self):
        cfg = SchemeConfig(theta=1.5, dt=0.125, n_steps=40)
        a = simulate_path(PAR2, cfg, NoiseStream(5, 9, 0.125))
        b = simulate_path(PAR2, cfg, NoiseStream(5, 9, 0.125))
        assert a.terminal == b.terminal

    def test_matches_kernel_row(self):
        cfg = SchemeConfig(theta=1.0, dt=0.125, n_steps=32)
        run = simulate_path(PAR1, cfg, NoiseStream(7, 11, 0.125))
        dw = gaussian_block(7, 11, 1, 32, 0.125)
        for name in _kernels.available_backends():
            kernels = _kernels.get_backend(name)
            x, x_min = kernels.terminal_batch(
                PAR1.alpha, PAR1.mu, PAR1.sigma, 1.0, 0.125, PAR1.x0, dw
            )
            assert x[0] == run.terminal
            assert x_min[0] >= 0.0


class TestSimulateCoupled:
    def test_factor_one_is_bitwise_identity(self):
        cfg = SchemeConfig(theta=1.0, dt=0.125, n_steps=16)
        coupled = CoupledIncrements(NoiseStream(21, 0, 0.125), 1, 16)
        coarse, fine = simulate_coupled(PAR1, cfg, 1, coupled)
        assert coarse == fine

    def test_coarse_leg_consumes_block_sums(self):
        cfg = SchemeConfig(theta=1.0, dt=0.5, n_steps=4)
        coupled = CoupledIncrements(NoiseStream(22, 0, 0.125), 4, 4)
        coarse, fine = simulate_coupled(PAR1, cfg, 4, coupled)
        replay = NoiseStream(22, 0, 0.125)
        sums = [replay.increments(4).sum() for _ in range(4)]
        step = theta_milstein_map(PAR1, cfg)
        assert simulate_with(step, PAR1.x0, sums) == coarse
        fine_cfg = SchemeConfig(theta=1.0, dt=0.125, n_steps=16)
        fine_replay = NoiseStream(22, 0, 0.125)
        assert (
            simulate_with(theta_milstein_map(PAR1, fine_cfg), PAR1.x0, fine_replay.increments(16))
            == fine
        )

    def test_factor_mismatch_rejected(self):
        cfg = SchemeConfig(theta=1.0, dt=0.5, n_steps=4)
        coupled = CoupledIncrements(NoiseStream(0, 0, 0.125), 2, 4)
        with pytest.raises(ValueError):
            simulate_coupled(PAR1, cfg, 4, coupled)


class TestKernelBackends:
    @pytest.mark.skipif(
        len(_kernels.available_backends()) < 2, reason="compiled backend not built"
    )
    def test_backends_bitwise_identical(self):
        dw = gaussian_block(3, 0, 300, 50, 0.125)
        results = []
        for name in _kernels.available_backends():
            kernels = _kernels.get_backend(name)
            x, x_min = kernels.terminal_batch(
                PAR2.alpha, PAR2.mu, PAR2.sigma, 1.5, 0.125, PAR2.x0, dw
            )
            rec = kernels.record_batch(
                PAR2.alpha, PAR2.mu, PAR2.sigma, 1.5, 0.125, PAR2.x0, dw,
                np.array([0, 25, 50]),
            )
            results.append((x, x_min, rec))
        for got in results[1:]:
            for a, b in zip(results[0], got):
                assert np.array_equal(a, b)

    def test_record_steps_validation(self):
        dw = gaussian_block(3, 0, 4, 10, 0.125)
        for name in _kernels.available_backends():
            kernels = _kernels.get_backend(name)
            with pytest.raises(ValueError):
                kernels.record_batch(
                    PAR1.alpha, PAR1.mu, PAR1.sigma, 1.0, 0.125, PAR1.x0, dw,
                    np.array([0, 11]),
                )
            with pytest.raises(ValueError):
                kernels.record_batch(
                    PAR1.alpha, PAR1.mu, PAR1.sigma, 1.0, 0.125, PAR1.x0, dw,
                    np.array([5, 5]),
                )
