import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import signal

from cdoblab.cdob import design_q, nominal_channels
from cdoblab.errors import ImproperResult, ImproperTf, NonMinimumPhase
from cdoblab.signals import (
    DelayLine,
    DiscreteFilter,
    LtiModel,
    RationalTf,
    delay_samples,
    discretize_bilinear,
    poles_zeros,
    proper_inverse_product,
    tf_from_state_space,
)
from cdoblab.vehicle import build_tracking_model


@pytest.fixture(scope="module")
def plant(params):
    return build_tracking_model(params, 10.0, 5.0)


def test_lti_model_rejects_bad_shapes():
    with pytest.raises(ValueError):
        LtiModel(np.zeros((2, 3)), np.zeros((2, 1)), np.zeros((1, 2)), np.zeros((1, 1)))
    with pytest.raises(ValueError):
        LtiModel(np.eye(2), np.zeros((2, 1)), np.zeros((1, 2)), np.zeros((2, 1)))
    with pytest.raises(ValueError):
        LtiModel([[np.nan]], [[1.0]], [[1.0]], [[0.0]])


def test_integrator_channel():
    tf = tf_from_state_space(LtiModel([[0.0]], [[1.0]], [[1.0]], [[0.0]]))
    np.testing.assert_allclose(tf.num, [1.0])
    np.testing.assert_allclose(tf.den, [1.0, 0.0])


def test_steer_to_ey_relative_degree(plant):
    gn = tf_from_state_space(plant, 0, 0)
    assert gn.relative_degree == 2


def test_channels_match_scipy(plant):
    # independent conversion through scipy's ss2tf
    for inp in range(3):
        num, den = signal.ss2tf(plant.A, plant.B, plant.C, plant.D, input=inp)
        ref = RationalTf(num[0], den)
        got = tf_from_state_space(plant, inp, 0)
        w = np.logspace(-1, 2, 15)
        np.testing.assert_allclose(got.freqresp(w), ref.freqresp(w), rtol=1e-9)


def test_yaw_rate_dc_gain_matches_matrix_inverse(plant):
    # 2-state lateral submodel is invertible, so the r channel has a finite DC gain
    A2 = plant.A[:2, :2]
    b = plant.B[:2, 0]
    sub = LtiModel(A2, b[:, None], [[0.0, 1.0]], [[0.0]])
    tf = tf_from_state_space(sub)
    direct = float(np.array([0.0, 1.0]) @ np.linalg.solve(-A2, b))
    assert tf.dc_gain() == pytest.approx(direct, rel=1e-9)


def test_poles_zeros_examples():
    p, z = poles_zeros(RationalTf([1.0], [1.0, 1.0]))
    np.testing.assert_allclose(p, [-1.0])
    assert len(z) == 0
    p, z = poles_zeros(RationalTf([1.0, 2.0], [1.0, 3.0, 2.0]))
    np.testing.assert_allclose(sorted(p.real), [-2.0, -1.0])
    np.testing.assert_allclose(z, [-2.0])


def test_q_pole_damping():
    p, _ = poles_zeros(design_q().tf)
    zeta = -p.real / np.abs(p)
    np.testing.assert_allclose(zeta, 0.7071, atol=1e-3)


def test_roots_residual(plant):
    gn = tf_from_state_space(plant)
    p, z = poles_zeros(gn)
    for r in z:
        assert abs(np.polyval(gn.num / gn.num[0], r)) < 1e-6
    for r in p:
        assert abs(np.polyval(gn.den, r)) < 1e-6


def test_bilinear_integrator_is_trapezoid():
    dt = 0.01
    f = discretize_bilinear(RationalTf([1.0], [1.0, 0.0]), dt)
    y = f.run(np.ones(50))
    n = np.arange(1, 51)
    assert np.all(np.abs(y - n * dt) <= dt / 2 + 1e-15)


def test_bilinear_rejects_improper():
    with pytest.raises(ImproperTf):
        discretize_bilinear(RationalTf([1.0, 0.0], [1.0]), 1e-3)


def test_bilinear_stable_poles_inside_unit_circle(plant):
    for tf in (design_q().tf, RationalTf([1.0], [1.0, 3.0, 2.0]), RationalTf([1.0], [1.0, 0.1, 100.0])):
        assert np.all(np.abs(discretize_bilinear(tf, 1e-3).poles()) < 1.0)


def test_q_discrete_dc_gain_is_one():
    f = discretize_bilinear(design_q().tf, 1e-3)
    assert abs(f.dc_gain() - 1.0) < 1e-12


def test_filter_trivial_cases():
    f = discretize_bilinear(RationalTf([1.0], [1.0, 1.0]), 1e-3)
    assert f.step(0.0) == 0.0
    g = discretize_bilinear(RationalTf([1.0], [1.0]), 1e-3)
    assert [g.step(u) for u in (0.5, -2.0, 3.0)] == [0.5, -2.0, 3.0]


def test_first_order_impulse_sums_to_dc_gain():
    dt = 1e-3
    f = discretize_bilinear(RationalTf([1.0], [1.0, 1.0]), dt)
    imp = np.zeros(20000)
    imp[0] = 1.0
    assert f.run(imp).sum() == pytest.approx(1.0, rel=0.01)


def test_filter_reset_and_determinism():
    f = discretize_bilinear(design_q().tf, 1e-3)
    u = np.sin(np.arange(200) * 0.05)
    a = f.run(u)
    f.reset()
    np.testing.assert_array_equal(f.run(u), a)


def test_filter_matches_lfilter():
    b, a = [0.2, 0.1, 0.05], [1.0, -0.5, 0.1]
    u = np.random.default_rng(3).normal(size=300)
    np.testing.assert_allclose(DiscreteFilter(b, a, 1.0).run(u), signal.lfilter(b, a, u), atol=1e-13)


def test_frequency_response_consistency(plant):
    dt = 1e-3
    gn, grho = nominal_channels(plant)
    q = design_q().tf
    tfs = [q, proper_inverse_product(q, gn), gn, grho]
    for tf in tfs:
        f = discretize_bilinear(tf, dt)
        w = np.logspace(-1, math.log10(0.1 / dt) - 1e-9, 10)
        c, d = tf.freqresp(w), f.freqresp(w)
        np.testing.assert_allclose(np.abs(d), np.abs(c), rtol=0.01)
        assert np.max(np.abs(np.degrees(np.angle(d / c)))) < 2.0


def test_cascade_identity(plant):
    dt = 1e-3
    gn, _ = nominal_channels(plant)
    q = design_q().tf
    u = np.random.default_rng(0).normal(size=1000)
    via_plant = discretize_bilinear(proper_inverse_product(q, gn), dt).run(discretize_bilinear(gn, dt).run(u))
    direct = discretize_bilinear(q, dt).run(u)
    skip = 5 * gn.order
    err = via_plant[skip:] - direct[skip:]
    assert np.sqrt(np.mean(err**2)) < 1e-3


def test_delay_line_examples():
    d0 = DelayLine(0.0, 1e-3)
    assert [d0.push(v) for v in (1.0, 2.0)] == [1.0, 2.0]
    d = DelayLine(0.1, 1e-3)
    assert d.n == 100
    out = [d.push(float(k)) for k in range(250)]
    assert out[:100] == [0.0] * 100
    assert out[100:] == [float(k) for k in range(150)]
    assert delay_samples(0.0005, 1e-3) == 1
    assert delay_samples(0.3, 1e-3) == 300


def test_delay_line_rejects_negative():
    with pytest.raises(ValueError):
        DelayLine(-0.1, 1e-3)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 40), st.integers(0, 40), st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=120))
def test_delay_composition(k1, k2, xs):
    dt = 1e-3
    a, b, c = DelayLine(k1 * dt, dt), DelayLine(k2 * dt, dt), DelayLine((k1 + k2) * dt, dt)
    assert [b.push(a.push(x)) for x in xs] == [c.push(x) for x in xs]


def test_proper_inverse_first_order():
    w = 50.0
    out = proper_inverse_product(RationalTf([1.0], [1 / w, 1.0]), RationalTf([1.0], [1.0, 1.0]))
    assert out.is_proper() and out.relative_degree == 0
    s = np.array([0.3j, 2.0 + 1j])
    np.testing.assert_allclose(out(s), (s + 1) / (s / w + 1))


def test_proper_inverse_plant_is_biproper(plant):
    gn = tf_from_state_space(plant)
    out = proper_inverse_product(design_q().tf, gn)
    assert len(out.num) == len(out.den)


def test_proper_inverse_errors():
    with pytest.raises(NonMinimumPhase) as exc:
        proper_inverse_product(RationalTf([1.0], [1.0, 1.0]), RationalTf([1.0, -1.0], [1.0, 2.0, 1.0]))
    assert exc.value.zeros[0] == pytest.approx(1.0)
    with pytest.raises(ImproperResult):
        proper_inverse_product(RationalTf([1.0], [1.0, 1.0]), RationalTf([1.0], [1.0, 2.0, 1.0]))


def test_rational_tf_normalizes_denominator():
    tf = RationalTf([2.0, 4.0], [2.0, 6.0, 8.0])
    np.testing.assert_allclose(tf.den, [1.0, 3.0, 4.0])
    np.testing.assert_allclose(tf.num, [1.0, 2.0])
