import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate

from delayfilt import (
    BotModel,
    BotParams,
    DomainError,
    GrowthModel,
    GrowthModelParams,
    RngStream,
    bot_mean,
    bot_measure,
    bot_propagate,
    bot_transition_matrix,
    generate_platform_track,
    growth_mean,
    growth_measure,
    growth_propagate,
    wrap_angle,
)
from conftest import ScriptedRng


class TestGrowthTransition:
    @pytest.mark.parametrize("k", [0, 1, 7, 40])
    def test_zero_state_leaves_only_forcing(self, k):
        assert growth_mean(0.0, k) == pytest.approx(8 * math.cos(1.2 * k), abs=1e-14)

    def test_hand_value(self):
        assert growth_mean(1.0, 0) == pytest.approx(21.0, abs=1e-12)

    @pytest.mark.parametrize("x", [0.5, 1.0, 3.7, 12.0])
    @pytest.mark.parametrize("k", [0, 3])
    def test_state_terms_odd(self, x, k):
        forcing = 8 * math.cos(1.2 * k)
        assert growth_mean(-x, k) - forcing == pytest.approx(
            -(growth_mean(x, k) - forcing), abs=1e-12
        )

    def test_propagate_adds_configured_noise(self):
        rng = RngStream(21)
        draws = growth_propagate(np.zeros(10**5), 0, rng) - 8.0
        assert abs(draws.mean()) < 0.05
        assert abs(draws.var() - 10.0) < 0.2

    def test_propagate_scripted(self):
        assert growth_propagate(1.0, 0, ScriptedRng(normals=[0.0])) == pytest.approx(21.0)


class TestGrowthMeasurement:
    def test_values(self):
        assert growth_measure(0.0) == 0.0
        assert growth_measure(20.0) == 20.0

    @pytest.mark.parametrize("x", [0.1, 1.0, 5.0, 33.3])
    def test_even_function(self, x):
        assert growth_measure(x) == growth_measure(-x)


class TestBotTransition:
    def test_standard_matrix_preserves_velocity(self):
        params = BotParams(sampling_time=0.2)
        out = bot_mean(np.array([80.0, 1.0]), params)
        assert np.allclose(out, [80.2, 1.0], atol=1e-12)

    def test_paper_literal_matrix_decays_velocity(self):
        params = BotParams(sampling_time=0.2, paper_literal_f=True)
        out = bot_mean(np.array([80.0, 1.0]), params)
        assert np.allclose(out, [80.2, 0.2], atol=1e-12)

    def test_transition_matrix_shapes(self):
        f = bot_transition_matrix(0.5)
        assert np.array_equal(f, [[1.0, 0.5], [0.0, 1.0]])
        f_lit = bot_transition_matrix(0.5, paper_literal=True)
        assert np.array_equal(f_lit, [[1.0, 0.5], [0.0, 0.5]])

    def test_noise_gain_scales_quadratically_in_position(self):
        out_t = bot_propagate(np.zeros(2), BotParams(sampling_time=0.2), ScriptedRng(normals=[1.0]))
        out_2t = bot_propagate(np.zeros(2), BotParams(sampling_time=0.4), ScriptedRng(normals=[1.0]))
        gain_t = out_t / math.sqrt(0.01)
        gain_2t = out_2t / math.sqrt(0.01)
        assert gain_2t[0] == pytest.approx(4 * gain_t[0], rel=1e-12)  # position: T^2/2
        assert gain_2t[1] == pytest.approx(2 * gain_t[1], rel=1e-12)  # velocity: T


class TestBotMeasurement:
    def test_target_directly_above(self):
        assert bot_measure(10.0 + 1e-12, (10.0, 20.0)) == pytest.approx(math.pi / 2)

    def test_forty_five_degrees(self):
        assert bot_measure(30.0, (10.0, 20.0)) == pytest.approx(math.pi / 4)

    def test_behind_platform(self):
        assert bot_measure(-10.0, (10.0, 20.0)) == pytest.approx(3 * math.pi / 4)

    def test_undefined_bearing_raises(self):
        with pytest.raises(DomainError):
            bot_measure(10.0, (10.0, 0.0))

    def test_range_excludes_negative_pi(self):
        assert bot_measure(np.array([-1.0]), (0.0, np.array([-0.0])))[0] == pytest.approx(math.pi)

    @pytest.mark.parametrize("x1,xtp,ytp", [(5, 1, 20), (-8, 3, 2), (0, 9, -4)])
    def test_within_principal_range(self, x1, xtp, ytp):
        theta = bot_measure(float(x1), (float(xtp), float(ytp)))
        assert -math.pi < theta <= math.pi


class TestPlatformTrack:
    def test_mean_coordinates(self):
        params = BotParams(sampling_time=0.2)
        track = generate_platform_track(params, 100, RngStream(22))
        assert track.x_mean[0] == 0.0
        assert track.x_mean[100] == pytest.approx(80.0)
        assert np.all(track.y_mean == 20.0)
        assert len(track) == 101

    def test_noise_variance(self):
        params = BotParams(sampling_time=0.2)
        rng = RngStream(23)
        samples = np.array(
            [generate_platform_track(params, 2, rng).x[1] for _ in range(30000)]
        )
        assert abs(samples.var() - 1.0) < 0.05
        assert samples.mean() == pytest.approx(0.8, abs=0.02)

    def test_rejects_zero_steps(self):
        with pytest.raises(DomainError):
            generate_platform_track(BotParams(), 0, RngStream(24))


class TestWrapAngle:
    def test_principal_values_unchanged(self):
        assert wrap_angle(0.5) == pytest.approx(0.5)
        assert wrap_angle(math.pi) == pytest.approx(math.pi)

    def test_wraps_large_angles(self):
        assert wrap_angle(2 * math.pi + 0.3) == pytest.approx(0.3)
        assert wrap_angle(-math.pi) == pytest.approx(math.pi)

    @given(st.floats(min_value=-100.0, max_value=100.0))
    def test_range_property(self, theta):
        w = wrap_angle(theta)
        assert -math.pi < w <= math.pi
        # equivalent angle modulo 2*pi
        assert math.cos(w) == pytest.approx(math.cos(theta), abs=1e-9)
        assert math.sin(w) == pytest.approx(math.sin(theta), abs=1e-9)


class TestSystemModelContract:
    def test_growth_shapes_and_prior(self):
        model = GrowthModel()
        rng = RngStream(25)
        x0 = model.prior_sample(rng, 50)
        assert x0.shape == (50, 1)
        x1 = model.propagate(x0, 1, rng)
        assert x1.shape == (50, 1)
        z = model.measure_clean(x1, 1)
        assert z.shape == (50,)
        assert np.allclose(z, x1[:, 0] ** 2 / 20)

    def test_growth_density_mode_at_clean_measurement(self):
        model = GrowthModel()
        assert model.meas_noise_pdf(np.array([0.0]), 1)[0] == pytest.approx(
            0.3989422804014327, abs=1e-15
        )

    @pytest.mark.parametrize(
        "make_model,sigma",
        [
            (lambda: GrowthModel(), 1.0),
            (lambda: BotModel(BotParams(sampling_time=0.2)), math.radians(3.0)),
        ],
    )
    def test_noise_pdf_integrates_to_one(self, make_model, sigma):
        model = make_model()
        total, _ = integrate.quad(
            lambda r: float(model.meas_noise_pdf(np.array([r]), 3)[0]),
            -10 * sigma,
            10 * sigma,
            limit=200,
        )
        assert total == pytest.approx(1.0, abs=1e-6)

    def test_bot_initial_truth_is_exact(self):
        model = BotModel(BotParams(sampling_time=0.2))
        assert np.array_equal(model.initial_truth(RngStream(26)), [80.0, 1.0])

    def test_bot_prior_moments(self):
        model = BotModel(BotParams(sampling_time=0.2))
        draws = model.prior_sample(RngStream(27), 200000)
        assert np.allclose(draws.mean(axis=0), [80.0, 1.0], atol=0.02)
        assert np.allclose(draws.var(axis=0), [1.0, 0.1], rtol=0.05)

    def test_bot_residual_wrapping(self):
        model = BotModel(BotParams(sampling_time=0.2))
        r = 0.01
        assert model.meas_noise_pdf(np.array([r + 2 * math.pi]), 1)[0] == pytest.approx(
            model.meas_noise_pdf(np.array([r]), 1)[0], rel=1e-12
        )

    def test_bot_measure_clean_uses_mean_platform(self):
        params = BotParams(sampling_time=0.2)
        model = BotModel(params)
        x = np.array([[80.0, 1.0]])
        k = 10
        expected = math.atan2(20.0, 80.0 - 4 * k * 0.2)
        assert model.measure_clean(x, k)[0] == pytest.approx(expected, abs=1e-12)

    def test_degrees_to_radians_once(self):
        params = BotParams(sampling_time=0.2, bearing_noise_deg=3.0)
        assert params.meas_var == pytest.approx(math.radians(3.0) ** 2, rel=1e-15)


class TestParamValidation:
    def test_growth_rejects_bad_variance(self):
        with pytest.raises(DomainError):
            GrowthModelParams(process_var=0.0)

    def test_bot_rejects_bad_sampling_time(self):
        with pytest.raises(DomainError):
            BotParams(sampling_time=0.0)
