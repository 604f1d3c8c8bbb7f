import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from vecdrive.foc import (FocConfig, FocState, SpeedPI, advance_angle, current_refs, foc_step,
                          hysteresis_current_regulator, inverse_park_abc, oriented_torque,
                          slip_speed, speed_pi)
from vecdrive.inverter import SwitchState
from vecdrive.machine import MotorParams, clarke

P = MotorParams()


def test_speed_pi_zero_error_outputs_integral():
    pi = SpeedPI(0.5, 5.0, 40.0, integral=3.0)
    assert speed_pi(100.0, 100.0, pi, 50e-6) == 3.0
    pi = SpeedPI(0.5, 5.0, 40.0, integral=60.0)
    assert speed_pi(100.0, 100.0, pi, 50e-6) == 40.0


def test_speed_pi_saturates():
    pi = SpeedPI(0.5, 5.0, 40.0)
    assert speed_pi(1000.0, 0.0, pi, 50e-6) == 40.0
    assert speed_pi(-1000.0, 0.0, SpeedPI(0.5, 5.0, 40.0), 50e-6) == -40.0


@given(st.lists(st.floats(-500, 500), min_size=1, max_size=200))
def test_speed_pi_anti_windup(errors):
    pi = SpeedPI(0.5, 50.0, 40.0)
    for e in errors:
        out = speed_pi(e, 0.0, pi, 1e-2)
        assert -40.0 <= out <= 40.0
        assert -40.0 <= pi.integral <= 40.0


def test_speed_pi_stops_integrating_into_saturation():
    pi = SpeedPI(0.5, 5.0, 40.0, integral=30.0)
    speed_pi(100.0, 0.0, pi, 1e-3)  # Kp*e + I = 80 > T_max with positive error
    assert pi.integral == 30.0
    speed_pi(-100.0, 0.0, pi, 1e-3)  # negative error unwinds even when saturated low
    assert pi.integral < 30.0


def test_current_refs_examples():
    assert current_refs(0.0, 0.88, P)[0] == 0.0
    assert current_refs(5.0, 0.88, P)[1] == pytest.approx(2.0)
    with pytest.raises(ValueError):
        current_refs(1.0, 0.0, P)


@given(st.floats(-80, 80), st.floats(0.1, 1.5))
def test_current_refs_invert_oriented_torque(T_ref, lam):
    i_qs, _ = current_refs(T_ref, lam, P)
    assert oriented_torque(i_qs, lam, P) == pytest.approx(T_ref, rel=1e-12, abs=1e-12)


def test_pole_count_interpretation_doubles_q_current():
    pairs = current_refs(10.0, 0.8, P, "pairs")[0]
    count = current_refs(10.0, 0.8, P, "count")[0]
    assert count == pytest.approx(2 * pairs)


def test_slip_speed():
    assert slip_speed(0.0, 0.88, P) == 0.0
    assert slip_speed(2.0, 0.88, P) == pytest.approx(0.44 * 4.2 / (0.462 * 0.88) * 2)
    assert slip_speed(2.0, 0.88, P) == pytest.approx(9.090909090909, rel=1e-12)


def test_advance_angle():
    assert advance_angle(1.0, 0.0, 0.0, 2, 1e-3) == 1.0
    dt = 1e-3
    rate = 2 * math.pi / (4 * dt)
    theta = 0.0
    for _ in range(4):
        theta = advance_angle(theta, 0.0, rate, 2, dt)
    assert min(theta, 2 * math.pi - theta) == pytest.approx(0.0, abs=1e-12)
    theta = 0.0
    for n in range(1, 50):
        theta = advance_angle(theta, 10.0, 3.0, 2, 1e-4)
        assert theta == pytest.approx(23.0 * n * 1e-4, rel=1e-12)


@given(st.floats(0, 2 * math.pi), st.floats(-100, 100), st.floats(-100, 100), st.floats(1e-6, 1e-3))
def test_advance_angle_additive(theta, w_m, w_sl, dt):
    twice = advance_angle(advance_angle(theta, w_m, w_sl, 2, dt), w_m, w_sl, 2, dt)
    once = advance_angle(theta, w_m, w_sl, 2, 2 * dt)
    diff = abs(twice - once)
    assert min(diff, 2 * math.pi - diff) < 1e-9


def test_inverse_park_examples():
    assert inverse_park_abc(1, 0, 0, 0.0) == pytest.approx((1, -0.5, -0.5))
    assert inverse_park_abc(0, 1, 0, 0.0) == pytest.approx((0, -math.sqrt(3) / 2, math.sqrt(3) / 2))
    abc = inverse_park_abc(3.0, -1.2, 0.0, 2.1)
    assert sum(abc) == pytest.approx(0.0, abs=1e-12)


def test_inverse_park_preserves_magnitude():
    rng = np.random.default_rng(11)
    for _ in range(1000):
        i_q, i_d = rng.uniform(-50, 50, size=2)
        theta = rng.uniform(0, 2 * math.pi)
        a, b = clarke(*inverse_park_abc(i_q, i_d, 0.0, theta))
        assert math.hypot(a, b) == pytest.approx(math.hypot(i_q, i_d), rel=1e-12)


def test_hysteresis_regulator():
    band = 0.35
    prev = SwitchState(0, 1, 0)
    assert hysteresis_current_regulator((1, 1, 1), (0.9, 1.2, 1.0), band, prev) == prev
    assert hysteresis_current_regulator((1, 1, 1), (1 - 2 * band, 1.0, 1.0), band, prev) == (1, 1, 0)
    assert hysteresis_current_regulator((0, 0, 0), (0.0, 2 * band, -2 * band), band, prev) == (0, 0, 1)


def test_foc_step_at_standstill_magnetizes():
    cfg = FocConfig()
    state = FocState.initial(cfg)
    sw = foc_step(0.0, 0.0, (0.0, 0.0, 0.0), cfg, state, P)
    assert state.T_ref == 0.0 and state.i_qs_ref == 0.0
    assert state.i_ds_ref == pytest.approx(cfg.lambda_r_ref / P.L_m)
    assert state.omega_sl == 0.0
    # theta stays at 0: phase a reference is zero, b negative, c positive
    assert sw == SwitchState(0, 0, 1)


def test_foc_config_validation():
    with pytest.raises(ValueError):
        FocConfig(i_band=-1)
    with pytest.raises(ValueError):
        FocConfig(eq1_pole_interpretation="poles")
