"""Acceptance gate: the eleven criteria at their pinned tolerances.

Each test appends one PASS/FAIL line to the terminal summary.  Runtime
limits are measured after the simulation kernels are compiled.
"""

import time

import numpy as np
import pytest

from conftest import CONFIGS
from fhigs import checks
from fhigs.config import load_config
from fhigs.element import FhigsElement, FhigsParams, Mode
from fhigs.experiments import run_gainloss, run_step
from fhigs.lti import StateSpace, TransferFunction, tf_to_ss
from fhigs.simulator import (ClosedLoop, SimConfig, Sine, Step, simulate_closed_loop, simulate_epds,
                             simulate_open_loop)

SEED = 0

EQUIVALENCE_TOL = 1e-5          # 1: L-infinity, unit-scale signals, 2 s
EQUIVALENCE_SECONDS = 60.0
HIGS_PHASE_DEG = -38.1          # 2: at 100 omega_h
HIGS_PHASE_TOL_DEG = 0.5
HIGS_PHASE_SECONDS = 1.0
HF_RATIO_TOL = 0.05             # 3: |D1 FHIGS| / |D1 HIGS| at 1e4 rad/s
LEAD_SECONDS = 10.0
RESIDUAL_TOL = 1e-10            # 4: times omega_h
GAP_TOL_S = 1e-11
SWITCHING_SECONDS = 5.0
FUNDAMENTAL_TOL = 1e-9          # 5: relative
FUNDAMENTAL_SECONDS = 5.0
EVEN_TOL = 1e-10                # 6
HALF_WAVE_TOL = 1e-12           # 6: times the amplitude
DF_SIM_TOL = 1e-4               # 7: relative, 20 settle periods
DF_SIM_SECONDS = 60.0
INCREMENTAL_TOL = 1e-3          # 8: gap ratio at T = 200 s
ENVELOPE_SLACK = 1e-9           # 8: relative to |dx_h| at excursion start
INCREMENTAL_SECONDS = 120.0
RMS_RATIO_MAX = 0.1             # 9
CORRELATION_MIN = 0.9
GAINLOSS_SECONDS = 30.0
OVERSHOOT_MAX_PCT = 0.1         # 10
STEP_SECONDS = 30.0
SECTOR_TOL = 1e-9               # 11: times scale^2

_sectors: dict[str, float] = {}


def record(log, number: int, passed: bool, text: str) -> None:
    log.append(f"{'PASS' if passed else 'FAIL'} criterion {number:2d}: {text}")


def timed(fn, *args, **kwargs):
    start = time.perf_counter()
    out = fn(*args, **kwargs)
    return out, time.perf_counter() - start


@pytest.fixture(scope="module", autouse=True)
def compiled_kernels():
    unit = StateSpace.gain(1.0)
    element = FhigsElement(FhigsParams(0.0, 1.0, 10.0), unit,
                           tf_to_ss(TransferFunction((1.0,), (1.0, 1.0))))
    cfg = SimConfig(h=1e-3, total_time=0.01)
    simulate_open_loop(element, Sine(1.0, 1.0), cfg)
    simulate_epds(element, Sine(1.0, 1.0), cfg)
    plant = tf_to_ss(TransferFunction((1.0,), (1.0, 0.0, 1.0)))
    for locked in (None, Mode.GAIN_K2):
        simulate_closed_loop(ClosedLoop(element, plant, Step(1.0), locked=locked), cfg)


def test_criterion_01_pwl_epds_equivalence(criterion_log):
    r, dt = timed(checks.check_equivalence, np.random.default_rng(SEED), n=20, total_time=2.0,
                  h=1e-5, tol=EQUIVALENCE_TOL)
    _sectors["1"] = r.sector
    ok = r.passed and dt <= EQUIVALENCE_SECONDS
    record(criterion_log, 1, ok, f"max L-inf distance {r.measured:.3g} <= {EQUIVALENCE_TOL:g} "
           f"over 20 configs, {dt:.1f} s <= {EQUIVALENCE_SECONDS:g} s")
    assert r.measured <= EQUIVALENCE_TOL
    assert dt <= EQUIVALENCE_SECONDS


def test_criterion_02_higs_phase(criterion_log):
    r, dt = timed(checks.check_higs_phase, tol_deg=HIGS_PHASE_TOL_DEG)
    ok = r.passed and dt < HIGS_PHASE_SECONDS
    record(criterion_log, 2, ok, f"phase {r.measured:.3f} deg, target {HIGS_PHASE_DEG} "
           f"+/- {HIGS_PHASE_TOL_DEG} deg, {dt:.3f} s")
    assert r.passed, r.line()
    assert dt < HIGS_PHASE_SECONDS


def test_criterion_03_fhigs_lead(criterion_log):
    (lead, hf), dt = timed(checks.check_fhigs_lead, mag_tol=HF_RATIO_TOL)
    ok = lead.passed and hf.passed and dt < LEAD_SECONDS
    record(criterion_log, 3, ok, f"max phase {lead.measured:.3f} deg > 0, "
           f"|ratio - 1| = {hf.measured:.2e} <= {HF_RATIO_TOL:g}, {dt:.2f} s")
    assert lead.measured > 0
    assert hf.measured <= HF_RATIO_TOL
    assert dt < LEAD_SECONDS


def test_criterion_04_switching_closed_forms(criterion_log):
    (res, gap), dt = timed(checks.check_switching_closed_forms, np.random.default_rng(SEED),
                           n=100, residual_tol=RESIDUAL_TOL, gap_tol=GAP_TOL_S)
    ok = res.passed and gap.passed and dt < SWITCHING_SECONDS
    record(criterion_log, 4, ok, f"residual {res.measured:.2e} omega_h <= {RESIDUAL_TOL:g}, "
           f"gap {gap.measured:.2e} s <= {GAP_TOL_S:g} s ({res.detail}), {dt:.2f} s")
    assert res.passed, res.line()
    assert gap.passed, gap.line()
    assert dt < SWITCHING_SECONDS


def test_criterion_05_fundamental_closed_form(criterion_log):
    r, dt = timed(checks.check_fundamental_closed_form, np.random.default_rng(SEED), n=50,
                  tol=FUNDAMENTAL_TOL)
    ok = r.passed and dt < FUNDAMENTAL_SECONDS
    record(criterion_log, 5, ok, f"closed form vs quadrature {r.measured:.2e} <= "
           f"{FUNDAMENTAL_TOL:g} at 50 lead frequencies, {dt:.2f} s")
    assert r.measured <= FUNDAMENTAL_TOL
    assert dt < FUNDAMENTAL_SECONDS


def test_criterion_06_symmetry(criterion_log):
    even, half = checks.check_symmetry(np.random.default_rng(SEED), n=60, even_tol=EVEN_TOL,
                                       half_wave_tol=HALF_WAVE_TOL)
    record(criterion_log, 6, even.passed and half.passed,
           f"|D_2,4,6| {even.measured:.2e} <= {EVEN_TOL:g}, half-wave {half.measured:.2e} "
           f"<= {HALF_WAVE_TOL:g} A ({even.detail})")
    assert even.measured <= EVEN_TOL
    assert half.measured <= HALF_WAVE_TOL


def test_criterion_07_df_vs_simulation(criterion_log):
    r, dt = timed(checks.check_df_vs_simulation, settle_periods=20, tol=DF_SIM_TOL)
    _sectors["7"] = r.sector
    ok = r.passed and dt < DF_SIM_SECONDS
    record(criterion_log, 7, ok, f"max relative D1 error {r.measured:.2e} <= {DF_SIM_TOL:g} "
           f"({r.detail}), {dt:.1f} s")
    assert "lead" in r.detail and "lag_k1" in r.detail and "lag_nok1" in r.detail
    assert r.measured <= DF_SIM_TOL
    assert dt < DF_SIM_SECONDS


def test_criterion_08_incremental_attractivity(criterion_log):
    rng = np.random.default_rng(SEED)
    start = time.perf_counter()
    gap = checks.check_incremental(rng, pairs=100, total_time=200.0, tol=INCREMENTAL_TOL)
    env = checks.check_decay_envelope(rng, alpha_h=2.0, pairs=100, slack=ENVELOPE_SLACK)
    dt = time.perf_counter() - start
    _sectors["8"] = max(gap.sector, env.sector)
    record(criterion_log, 8, gap.passed and env.passed and dt <= INCREMENTAL_SECONDS,
           f"gap ratio {gap.measured:.2e} <= {INCREMENTAL_TOL:g} (100 pairs, T = 200 s), "
           f"envelope excess {env.measured:.2e} <= {ENVELOPE_SLACK:g} ({env.detail}), {dt:.1f} s")
    assert gap.measured <= INCREMENTAL_TOL
    assert env.measured <= ENVELOPE_SLACK
    assert dt <= INCREMENTAL_SECONDS


def test_criterion_09_gain_loss(criterion_log):
    report, dt = timed(run_gainloss, load_config(CONFIGS / "gainloss.ini"))
    _sectors["9"] = report.max_sector_product
    mixed, lifted, fhigs = (report.row(n) for n in ("higs_mixed", "higs_lifted", "fhigs_mixed"))
    a = mixed.rms_ratio < RMS_RATIO_MAX
    b = fhigs.correlation > CORRELATION_MIN
    c = lifted.correlation < fhigs.correlation
    record(criterion_log, 9, a and b and c and dt < GAINLOSS_SECONDS,
           f"HIGS mixed RMS ratio {mixed.rms_ratio:.4f} < {RMS_RATIO_MAX:g} [{'ok' if a else 'no'}], "
           f"FHIGS correlation {fhigs.correlation:.4f} > {CORRELATION_MIN:g} [{'ok' if b else 'no'}], "
           f"lifted {lifted.correlation:.4f} < FHIGS [{'ok' if c else 'no'}], {dt:.1f} s")
    assert fhigs.correlation > CORRELATION_MIN
    assert lifted.correlation < fhigs.correlation
    assert dt < GAINLOSS_SECONDS
    assert mixed.rms_ratio < RMS_RATIO_MAX


def test_criterion_10_step_response(criterion_log):
    report, dt = timed(run_step, load_config(CONFIGS / "step.ini"))
    _sectors["10"] = report.max_sector_product
    lin = report.row("linear")
    rows = [report.row(n) for n in ("higs", "fhigs")]
    ok = (lin.overshoot_pct > 0 and all(r.overshoot_pct <= OVERSHOOT_MAX_PCT for r in rows)
          and all(r.settling_time < lin.settling_time for r in rows) and dt < STEP_SECONDS)
    record(criterion_log, 10, ok,
           f"linear overshoot {lin.overshoot_pct:.3f}% > 0, "
           + ", ".join(f"{r.name} {r.overshoot_pct:.4f}% <= {OVERSHOOT_MAX_PCT:g}% settling "
                       f"{r.settling_time * 1e3:.2f} ms < {lin.settling_time * 1e3:.1f} ms"
                       for r in rows) + f", {dt:.1f} s")
    assert all(r.status == "ok" for r in report.rows)
    assert lin.overshoot_pct > 0
    for r in rows:
        assert r.overshoot_pct <= OVERSHOOT_MAX_PCT
        assert r.settling_time < lin.settling_time
    assert dt < STEP_SECONDS


def test_criterion_11_sector_invariance(criterion_log):
    missing = {"1", "7", "8", "9", "10"} - _sectors.keys()
    if missing:
        pytest.skip(f"needs the simulations of criteria {sorted(missing)} in the same session")
    worst = max(_sectors.values())
    record(criterion_log, 11, worst <= SECTOR_TOL,
           f"worst normalised sector product {worst:.2e} <= {SECTOR_TOL:g} over criteria 1, 7-10")
    assert worst <= SECTOR_TOL
