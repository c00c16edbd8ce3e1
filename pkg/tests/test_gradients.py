import numpy as np
import pytest

from starbeam import (
    BeamformingState,
    ChannelSet,
    SystemConfig,
    evaluate_wsr,
    finite_diff_gradient,
    grad_wsr_amplitudes,
    grad_wsr_phases,
    grad_wsr_precoder,
    normalize_power,
    wsr_gradients,
)
from starbeam.experiments import (
    GRAD_CHECK_STEP,
    gradient_errors,
    random_gradient_instance,
)
from starbeam.gradients import state_from_vector, state_to_vector
from starbeam.model import REFLECTION

from conftest import make_instance


class TestPrecoderGradient:
    def test_zero_channel_gives_zero_gradient(self):
        cfg, _, state = make_instance(0)
        ch = ChannelSet(np.zeros((cfg.N, cfg.M)), np.zeros((cfg.K, cfg.N)))
        assert np.allclose(grad_wsr_precoder(cfg, ch, state), 0.0)

    def test_matches_central_differences_at_1e6(self):
        # One modest instance checked coordinate-wise at the library's
        # default step; the precoder coordinates are large enough that the
        # difference noise floor stays well under the tolerance.
        cfg, ch, state = make_instance(42, M=4, N=8, K=2)
        analytic = grad_wsr_precoder(cfg, ch, state)
        fd = finite_diff_gradient(
            lambda st: evaluate_wsr(cfg, ch, st), state, step=1e-6
        ).grad_w
        rel = np.abs(analytic - fd) / np.abs(fd)
        assert rel.max() < 1e-6

    def test_linear_in_weights(self):
        cfg, ch, state = make_instance(8, K=1)
        doubled = SystemConfig(M=cfg.M, N=cfg.N, K=1, p_max=cfg.p_max,
                               noise_power=cfg.noise_power,
                               weights=2 * cfg.weights)
        assert np.allclose(grad_wsr_precoder(doubled, ch, state),
                           2 * grad_wsr_precoder(cfg, ch, state), rtol=1e-12)

    def test_directional_derivative_convention(self):
        cfg, ch, state = make_instance(9)
        g = grad_wsr_precoder(cfg, ch, state)
        rng = np.random.default_rng(1)
        D = rng.standard_normal(state.W.shape) + 1j * rng.standard_normal(state.W.shape)
        eps = 1e-7
        up = evaluate_wsr(cfg, ch, BeamformingState(
            state.W + eps * D, state.beta_t, state.beta_r,
            state.theta_t, state.theta_r))
        dn = evaluate_wsr(cfg, ch, BeamformingState(
            state.W - eps * D, state.beta_t, state.beta_r,
            state.theta_t, state.theta_r))
        fd_dir = (up - dn) / (2 * eps)
        assert fd_dir == pytest.approx(2 * np.vdot(g, D).real, rel=1e-5)

    def test_ascent_improves_rate(self):
        cfg, ch, state = make_instance(10)
        tiny = BeamformingState(
            normalize_power(state.W, 1e-6), state.beta_t, state.beta_r,
            state.theta_t, state.theta_r)
        g = grad_wsr_precoder(cfg, ch, tiny)
        stepped = BeamformingState(
            tiny.W + 1e-4 * g, tiny.beta_t, tiny.beta_r,
            tiny.theta_t, tiny.theta_r)
        assert evaluate_wsr(cfg, ch, stepped) > evaluate_wsr(cfg, ch, tiny)


class TestAmplitudeGradient:
    def test_reflection_only_users_decouple_t_half(self):
        cfg, ch, state = make_instance(11, K=2)
        cfg_r = SystemConfig(M=cfg.M, N=cfg.N, K=2, p_max=cfg.p_max,
                             noise_power=cfg.noise_power,
                             user_sides=(REFLECTION, REFLECTION))
        g = grad_wsr_amplitudes(cfg_r, ch, state)
        assert np.allclose(g[:cfg.N], 0.0)
        assert not np.allclose(g[cfg.N:], 0.0)

    def test_vanishes_with_huge_noise(self):
        cfg, ch, state = make_instance(12, noise=1e12)
        assert np.linalg.norm(grad_wsr_amplitudes(cfg, ch, state)) < 1e-9


class TestPhaseGradient:
    def test_dead_element_has_zero_phase_gradient(self):
        cfg, ch, state = make_instance(13)
        bt = state.beta_t.copy()
        bt[2] = 0.0
        dead = BeamformingState(state.W, bt, state.beta_r,
                                state.theta_t, state.theta_r)
        assert grad_wsr_phases(cfg, ch, dead)[2] == 0.0

    def test_periodic_in_each_phase(self):
        cfg, ch, state = make_instance(14)
        tt = state.theta_t.copy()
        tt[1] += 2 * np.pi
        shifted = BeamformingState(state.W, state.beta_t, state.beta_r,
                                   tt, state.theta_r)
        assert np.allclose(grad_wsr_phases(cfg, ch, shifted),
                           grad_wsr_phases(cfg, ch, state), rtol=1e-9,
                           atol=1e-12)


class TestFiniteDifferenceOracle:
    def test_exact_on_quadratic(self):
        cfg, ch, state = make_instance(15)
        x0 = state_to_vector(state)
        coeffs = np.arange(1.0, x0.size + 1)

        def quadratic(st):
            x = state_to_vector(st)
            return float(coeffs @ (x - 0.5) ** 2)

        # central differences have zero truncation error on quadratics, so
        # a generous step leaves only negligible roundoff
        bundle = finite_diff_gradient(quadratic, state, step=1e-2)
        expected = 2 * coeffs * (x0 - 0.5)
        got = np.concatenate([
            2 * bundle.grad_w.real.ravel(), 2 * bundle.grad_w.imag.ravel(),
            bundle.grad_beta, bundle.grad_theta,
        ])
        assert np.allclose(got, expected, rtol=1e-9, atol=1e-9)

    def test_second_order_convergence(self):
        cfg, ch, state = make_instance(16, M=2, N=2, K=1)

        def smooth(st):
            x = state_to_vector(st)
            return float(np.sum(np.sin(x) ** 3))

        exact = 3 * np.sin(state_to_vector(state)) ** 2 \
            * np.cos(state_to_vector(state))

        def err(step):
            b = finite_diff_gradient(smooth, state, step=step)
            got = np.concatenate([
                2 * b.grad_w.real.ravel(), 2 * b.grad_w.imag.ravel(),
                b.grad_beta, b.grad_theta,
            ])
            return np.max(np.abs(got - exact))

        ratio = err(2e-3) / err(1e-3)
        assert 3.0 < ratio < 5.0

    def test_step_must_be_positive(self):
        cfg, ch, state = make_instance(17)
        with pytest.raises(ValueError):
            finite_diff_gradient(lambda st: 0.0, state, step=0.0)

    def test_vector_round_trip(self):
        _, _, state = make_instance(18)
        vec = state_to_vector(state)
        back = state_from_vector(vec, state.W.shape[0], state.beta_t.size,
                                 state.W.shape[1])
        assert np.array_equal(back.W, state.W)
        assert np.array_equal(back.theta_r, state.theta_r)


class TestOracleSuite:
    def test_ten_instances_full_bundle(self):
        # Shortened version of the 50-instance acceptance battery.
        for i in range(10):
            cfg, ch, state = random_gradient_instance(1000 + i)
            analytic = wsr_gradients(cfg, ch, state)
            fd = finite_diff_gradient(
                lambda st: evaluate_wsr(cfg, ch, st), state,
                step=GRAD_CHECK_STEP,
            )
            rel, ab = gradient_errors(analytic, fd)
            assert rel < 1e-6, f"instance {i}: rel {rel:.2e}"
            assert ab < 1e-9, f"instance {i}: abs {ab:.2e}"

    def test_sign_flip_is_caught(self):
        # Mutation check: a corrupted analytic gradient must fail the
        # comparison that the genuine one passes.
        cfg, ch, state = random_gradient_instance(1000)
        analytic = wsr_gradients(cfg, ch, state)
        fd = finite_diff_gradient(
            lambda st: evaluate_wsr(cfg, ch, st), state, step=GRAD_CHECK_STEP
        )
        corrupted = type(analytic)(
            grad_w=-analytic.grad_w,
            grad_beta=analytic.grad_beta,
            grad_theta=analytic.grad_theta,
        )
        rel_good, _ = gradient_errors(analytic, fd)
        rel_bad, _ = gradient_errors(corrupted, fd)
        assert rel_good < 1e-6 < rel_bad
