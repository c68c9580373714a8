import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import solve_ivp

from fhigs.lti import (ImproperTransferFunction, StateSpace, TransferFunction, freq_response,
                       lti_derivative_output, notch, tf_to_ss)

W_LP = 2 * math.pi * 10


def lowpass(w=W_LP):
    return TransferFunction((w,), (1.0, w))


def test_identity_has_no_states():
    ss = tf_to_ss(TransferFunction((1.0,), (1.0,)))
    assert ss.n == 0
    assert ss.D == 1.0


def test_lowpass_corner():
    ss = tf_to_ss(lowpass())
    assert ss.n == 1
    fr = freq_response(ss, W_LP)
    assert fr.gain == pytest.approx(1 / math.sqrt(2), rel=1e-14)
    assert fr.phase == pytest.approx(-math.pi / 4, rel=1e-14)


def test_lifting_notch_peak_gain():
    ss = tf_to_ss(notch(2 * math.pi, 0.2, 0.02))
    assert ss.n == 2
    assert freq_response(ss, 2 * math.pi).gain == pytest.approx(10.0, rel=1e-12)


def test_attenuating_notch_is_inverse_of_its_swap():
    n = notch(20 * math.pi, 0.02, 0.2)
    assert freq_response(tf_to_ss(n), 20 * math.pi).gain == pytest.approx(0.1, rel=1e-12)


def test_equal_damping_notch_is_unity():
    ss = tf_to_ss(notch(3.0, 0.4, 0.4))
    for w in np.logspace(-2, 3, 20):
        fr = freq_response(ss, w)
        assert fr.gain == pytest.approx(1.0, abs=1e-12)
        assert fr.phase == pytest.approx(0.0, abs=1e-12)


def test_unity_response():
    fr = freq_response(StateSpace.gain(1.0), 7.0)
    assert (fr.gain, fr.phase) == (1.0, 0.0)


def test_lead_filter_limits(lead_tf):
    ss = tf_to_ss(lead_tf)
    assert freq_response(ss, 1e-6).gain == pytest.approx(1.0, rel=1e-9)
    assert freq_response(ss, 1e9).gain == pytest.approx(9 / 4, rel=1e-6)
    assert ss.D == pytest.approx(9 / 4)


def test_lead_filter_at_four_hz(lead_tf):
    # direct complex evaluation of 3(3s + 2w_f) / (2(2s + 3w_f)) at s = 8 pi j
    fr = freq_response(tf_to_ss(lead_tf), 8 * math.pi)
    assert fr.gain == pytest.approx(1.1268138903867244, rel=1e-13)
    assert fr.phase == pytest.approx(0.2798171085232432, rel=1e-13)


def test_improper_rejected():
    with pytest.raises(ImproperTransferFunction):
        tf_to_ss(TransferFunction((1.0, 0.0), (1.0,)))


def test_zero_denominator_rejected():
    with pytest.raises(ValueError):
        TransferFunction((1.0,), (0.0, 0.0))


def test_inconsistent_dimensions_rejected():
    with pytest.raises(ValueError, match="inconsistent"):
        StateSpace(np.eye(2), np.ones(3), np.ones(2))


def test_notch_rejects_nonpositive():
    with pytest.raises(ValueError, match="beta2"):
        notch(1.0, 0.1, 0.0)


def test_passthrough_derivative():
    assert lti_derivative_output(StateSpace.gain(1.0), np.zeros(0), 0.3, -2.0) == (0.3, -2.0)


def test_lowpass_derivative_at_rest():
    y, y_dot = lti_derivative_output(tf_to_ss(lowpass()), np.zeros(1), 1.0, 0.0)
    assert y == 0.0
    assert y_dot == pytest.approx(W_LP, rel=1e-15)


def test_notch_derivative_matches_finite_difference(rng):
    ss = tf_to_ss(notch(20 * math.pi, 0.02, 0.2))
    h = 1e-7
    for _ in range(10):
        x = rng.normal(size=ss.n)
        u, u_dot = rng.normal(size=2)
        y, y_dot = lti_derivative_output(ss, x, u, u_dot)
        # one explicit Euler step of state and input is exact to O(h)
        x_next = x + h * ss.derivative(x, u)
        y_next = ss.output(x_next, u + h * u_dot)
        assert (y_next - y) / h == pytest.approx(y_dot, rel=1e-5, abs=1e-5)


coeff = st.floats(0.1, 10.0)


@st.composite
def stable_tfs(draw):
    order = draw(st.integers(0, 4))
    poles = [-draw(st.floats(0.1, 500.0)) for _ in range(order)]
    den = np.poly(poles) if poles else np.array([1.0])
    num_deg = draw(st.integers(0, order))
    num = [draw(coeff) * (1 if draw(st.booleans()) else -1) for _ in range(num_deg + 1)]
    return TransferFunction(num, den * draw(coeff))


@given(stable_tfs())
def test_realization_round_trip(tf):
    ss = tf_to_ss(tf)
    assert ss.n == tf.order
    for w in np.logspace(-2, 4, 50):
        direct = tf(1j * w)
        assert abs(freq_response(ss, w).value - direct) <= 1e-10 * max(1.0, abs(direct))


@given(stable_tfs(), st.floats(0.5, 50.0))
def test_derivative_consistency(tf, w):
    # drive with u = sin(w t) from rest and compare y' against a centered difference
    ss = tf_to_ss(tf)
    if ss.n == 0:
        return
    sol = solve_ivp(lambda t, x: ss.derivative(x, math.sin(w * t)), (0, 0.3), np.zeros(ss.n),
                    method="DOP853", rtol=1e-12, atol=1e-14, dense_output=True)
    t, h = 0.2, 1e-4
    y = [ss.output(sol.sol(s), math.sin(w * s)) for s in (t - h, t + h)]
    _, y_dot = lti_derivative_output(ss, sol.sol(t), math.sin(w * t), w * math.cos(w * t))
    scale = max(1.0, abs(y_dot))
    assert (y[1] - y[0]) / (2 * h) == pytest.approx(y_dot, abs=1e-4 * scale)


@given(st.floats(0.1, 100.0), st.floats(0.01, 1.0), st.floats(0.01, 1.0), st.floats(1e-3, 1e4))
def test_notch_swap_is_reciprocal(wn, b1, b2, w):
    a = freq_response(tf_to_ss(notch(wn, b1, b2)), w).gain
    b = freq_response(tf_to_ss(notch(wn, b2, b1)), w).gain
    assert a * b == pytest.approx(1.0, rel=1e-10)
