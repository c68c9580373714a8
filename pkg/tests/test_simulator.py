import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fhigs.checks import (incremental_fixture, lowpass_filter, phase_lead_filter, random_element,
                          random_input, random_pair)
from fhigs.describing_function import Case, SimplifiedFhigs, steady_state_analytic
from fhigs.element import ElementState, FhigsElement, FhigsParams, Mode
from fhigs.lti import StateSpace, TransferFunction, freq_response, tf_to_ss
from fhigs.simulator import (ClosedLoop, HypothesisViolation, SimConfig, Sine, Step, Zero,
                             incremental_gap, sector_products, simulate_closed_loop,
                             simulate_epds, simulate_open_loop, steady_state_period)

UNIT = StateSpace.gain(1.0)
W4 = 2 * math.pi * 4
HIGS = FhigsElement(FhigsParams(0.0, 1.0, 100.0), UNIT, UNIT)
LEAD = FhigsElement(FhigsParams(0.0, 1.0, 100.0), UNIT, tf_to_ss(phase_lead_filter()))


@pytest.fixture(scope="module")
def higs_run():
    return simulate_open_loop(HIGS, Sine(1.0, W4), SimConfig.periodic(W4, 30))


@pytest.fixture(scope="module")
def lead_run():
    return simulate_open_loop(LEAD, Sine(1.0, W4), SimConfig.periodic(W4, 30))


def test_zero_input_stays_at_rest():
    traj = simulate_open_loop(LEAD, Zero(), SimConfig(total_time=0.05))
    assert not traj.states.any()
    assert (traj.mode == Mode.INTEGRATOR).all()


def test_higs_alternates_integrator_and_upper_gain(higs_run):
    period = 2 * math.pi / W4
    seq = higs_run.mode_sequence(25 * period, 27 * period)
    # zero lower gain: the k1 segment after each zero crossing has zero length
    assert seq == [Mode.INTEGRATOR, Mode.GAIN_K2] * 4


def test_lead_mode_cycle(lead_run):
    period = 2 * math.pi / W4
    seq = lead_run.mode_sequence(25 * period, 27 * period)
    assert seq == [Mode.INTEGRATOR, Mode.GAIN_K2, Mode.GAIN_K1] * 4


def test_higs_settles(higs_run):
    per = steady_state_period(higs_run, W4, settle_periods=20)
    assert per.diagnostics["settle_gap"] <= 1e-8


@pytest.mark.parametrize("run, tf", [("higs_run", None), ("lead_run", phase_lead_filter())])
def test_matches_analytic_steady_state(run, tf, request):
    per = steady_state_period(request.getfixturevalue(run), W4, settle_periods=20)
    resp = steady_state_analytic(SimplifiedFhigs.from_tf(0.0, 1.0, 100.0, tf), W4)
    assert np.max(np.abs(per.x_h - resp(per.t))) <= 1e-6


def test_lag_filter_matches_analytic_steady_state():
    w = 2 * math.pi * 10
    tf = lowpass_filter(2 * math.pi * 10)
    element = FhigsElement(FhigsParams(0.0, 1.0, 100.0), UNIT, tf_to_ss(tf))
    traj = simulate_open_loop(element, Sine(1.0, w), SimConfig.periodic(w, 25))
    per = steady_state_period(traj, w, settle_periods=20)
    resp = steady_state_analytic(SimplifiedFhigs.from_tf(0.0, 1.0, 100.0, tf), w)
    assert resp.case is Case.LAG_K1
    assert np.max(np.abs(per.x_h - resp(per.t))) <= 1e-6


def test_degenerate_sector_is_a_gain():
    f2 = tf_to_ss(phase_lead_filter())
    element = FhigsElement(FhigsParams(0.5, 0.5, 100.0, degenerate=True), UNIT, f2)
    traj = simulate_open_loop(element, Sine(1.0, W4), SimConfig.periodic(W4, 25))
    per = steady_state_period(traj, W4, settle_periods=20)
    fr = freq_response(f2, W4)
    expected = 0.5 * fr.gain * np.sin(W4 * per.t + fr.phase)
    assert np.max(np.abs(per.x_h - expected)) <= 1e-9


def test_short_trajectory_rejected(higs_run):
    with pytest.raises(ValueError, match="need more than"):
        steady_state_period(higs_run, W4, settle_periods=40)


def test_epds_matches_pwl(lead_run):
    epds = simulate_epds(LEAD, Sine(1.0, W4), SimConfig.periodic(W4, 30))
    assert np.max(np.abs(epds.states - lead_run.states)) <= 1e-6


def test_epds_interior_is_plain_integrator():
    w, wh = 10.0, 10.0
    element = FhigsElement(FhigsParams(-1.0, 1.0, wh), UNIT, UNIT)
    traj = simulate_epds(element, Sine(1.0, w, math.pi / 2), SimConfig(total_time=0.2))
    # x_h = (wh / w) sin(w t) until it meets cos(w t)
    hit = math.atan(w / wh) / w
    sel = traj.t < hit
    assert sel.sum() > 1000
    np.testing.assert_allclose(traj.x_h[sel], wh / w * np.sin(w * traj.t[sel]), atol=1e-12)


def test_epds_sliding_stays_on_line():
    traj = simulate_epds(LEAD, Sine(1.0, W4), SimConfig.periodic(W4, 5))
    on_k2 = traj.mode == Mode.GAIN_K2
    assert on_k2.any()
    drift = np.abs(traj.x_h - traj.k2 * traj.v2)[on_k2]
    assert drift.max() <= 1e-6


def test_x_h_continuous_across_events(lead_run):
    t, x_h = lead_run.t, lead_run.x_h
    dt = np.diff(t)
    v2_rate = np.abs(np.diff(lead_run.v2)) / dt
    rate = 100.0 * np.max(np.abs(lead_run.v1)) + np.max(v2_rate)
    assert np.all(np.abs(np.diff(x_h)) <= 1.01 * dt * rate)
    assert lead_run.event_t.size > 0


def test_runs_are_deterministic():
    cfg = SimConfig(total_time=0.3)
    a = simulate_open_loop(LEAD, Sine(1.0, W4) + Sine(0.3, 70.0), cfg)
    b = simulate_open_loop(LEAD, Sine(1.0, W4) + Sine(0.3, 70.0), cfg)
    assert np.array_equal(a.states, b.states)
    assert np.array_equal(a.event_t, b.event_t)


def test_initial_state_clamped_into_sector():
    traj = simulate_open_loop(HIGS, Sine(1.0, W4, math.pi / 2), SimConfig(total_time=1e-3),
                              ElementState(5.0, [], []))
    assert traj.x_h[0] == 1.0


def test_step_input_is_smooth():
    traj = simulate_open_loop(HIGS, Step(1.0, rise=1e-3), SimConfig(total_time=2e-3))
    assert traj.e[-1] == pytest.approx(1.0)
    assert np.all(np.diff(traj.e) >= 0)


def plant():
    return tf_to_ss(TransferFunction((1.0,), (20.0, 0.0, -5000.0)))


def test_closed_loop_at_rest():
    loop = ClosedLoop(HIGS, plant(), Zero())
    traj = simulate_closed_loop(loop, SimConfig(total_time=0.01))
    assert not traj.states.any()


def test_closed_loop_rejects_relative_degree_one():
    with pytest.raises(ValueError, match="relative degree"):
        ClosedLoop(HIGS, tf_to_ss(TransferFunction((1.0,), (1.0, 1.0))), Zero())


@settings(max_examples=12)
@given(st.integers(0, 2**32 - 1))
def test_sector_invariance_both_simulators(seed):
    rng = np.random.default_rng(seed)
    element, inp = random_element(rng), random_input(rng)
    cfg = SimConfig(total_time=0.3)
    for run in (simulate_open_loop, simulate_epds):
        traj = run(element, inp, cfg)
        assert np.max(sector_products(traj)) <= 1e-9


@settings(max_examples=8)
@given(st.integers(0, 2**32 - 1))
def test_random_equivalence(seed):
    rng = np.random.default_rng(seed)
    element, inp = random_element(rng), random_input(rng)
    cfg = SimConfig(total_time=0.5)
    a = simulate_open_loop(element, inp, cfg)
    b = simulate_epds(element, inp, cfg)
    scale = max(1.0, np.max(np.abs(a.states)))
    assert np.max(np.abs(a.states - b.states)) <= 1e-5 * scale


# incremental attractivity ---------------------------------------------------

def test_identical_initial_states_have_zero_gap():
    element = incremental_fixture()
    init = ElementState(0.0, [], [0.5])
    res = incremental_gap(element, Sine(1.0, 1.0), SimConfig(h=1e-3, total_time=5.0), init, init)
    assert not res.gap.any()


def test_positive_lower_gain_violates_hypotheses():
    element = incremental_fixture(k1=0.2)
    init = ElementState(0.0, [], [0.0])
    with pytest.raises(HypothesisViolation, match="k1"):
        incremental_gap(element, Sine(1.0, 1.0), SimConfig(total_time=1.0), init, init)


def test_unstable_filter_violates_hypotheses():
    element = FhigsElement(FhigsParams(0.0, 1.0, 1.0), UNIT,
                           tf_to_ss(TransferFunction((1.0,), (1.0, -1.0))))
    init = ElementState(0.0, [], [0.0])
    with pytest.raises(HypothesisViolation, match="Hurwitz"):
        incremental_gap(element, Sine(1.0, 1.0), SimConfig(total_time=1.0), init, init)


def test_gap_contracts(rng):
    element = incremental_fixture()
    a, b = random_pair(rng, element)
    res = incremental_gap(element, Sine(1.0, 1.0), SimConfig(h=2e-3, total_time=200.0), a, b)
    assert res.gap[0] == pytest.approx(1.0)
    assert res.ratio <= 1e-3


def test_leaky_decay_rate(rng):
    # filter pole at -1, leakage 2: slowest rate min(2, 1) / 2, allowed a factor 2 below
    element = incremental_fixture(2.0)
    a, b = random_pair(rng, element)
    res = incremental_gap(element, Sine(1.0, 1.0), SimConfig(h=1e-3, total_time=20.0), a, b)
    assert res.decay_rate() >= 0.25


@settings(max_examples=10)
@given(st.integers(0, 2**32 - 1))
def test_box_shrinks(seed):
    rng = np.random.default_rng(seed)
    element = incremental_fixture()
    a, b = random_pair(rng, element)
    res = incremental_gap(element, Sine(1.0, 1.0), SimConfig(h=2e-3, total_time=40.0), a, b)
    dxh = np.abs(res.dx_h)
    # once |dx_v| is below rho, |dx_h| never exceeds its value then or the box k_h sup|dv|
    for rho in (1e-1, 1e-2, 1e-3):
        below = np.flatnonzero(res.dx_v < rho)
        if below.size == 0:
            continue
        i = below[0]
        cap = max(dxh[i], res.box_bound[i])
        assert dxh[i:].max() <= cap * (1 + 1e-9) + 1e-12
