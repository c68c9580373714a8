"""Oracle and invariant checks behind ``fhigs verify``.

Every check returns a :class:`CheckResult` carrying the measured value, the
tolerance it was held to and the worst normalised sector product seen in the
simulations it ran (NaN when it ran none).  Randomised checks draw from a
``numpy.random.Generator`` so a seed reproduces them exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from .describing_function import (Case, PiecewiseResponse, SimplifiedFhigs, df_point,
                                  epsilon_closed_form, epsilon_residual, epsilon_root,
                                  fourier_quadrature, gamma_closed_form, gamma_residual,
                                  gamma_root, lead_fundamental_closed_form, operating_point,
                                  select_case, steady_state_analytic)
from .element import ElementState, FhigsElement, FhigsParams, PwlRealization
from .lti import StateSpace, TransferFunction, tf_to_ss
from .simulator import (GapResult, HypothesisViolation, InputSignal, IntegrationError, SimConfig, Sine, SumOfSines,
                        Trajectory, incremental_gap, sampled_fourier, sector_products,
                        simulate_epds, simulate_open_loop, steady_state_period)

__all__ = [
    "CheckResult",
    "random_filter",
    "random_element",
    "random_input",
    "phase_lead_filter",
    "lowpass_filter",
    "incremental_fixture",
    "random_pair",
    "check_equivalence",
    "check_higs_phase",
    "check_fhigs_lead",
    "check_switching_closed_forms",
    "check_fundamental_closed_form",
    "check_symmetry",
    "check_df_vs_simulation",
    "check_incremental",
    "check_decay_envelope",
    "check_sector",
    "corrupt_a2",
]


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    measured: float
    tolerance: float
    detail: str = ""
    sector: float = math.nan

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        text = f"{tag} {self.name} measured={self.measured:.6g} tolerance={self.tolerance:.6g}"
        return f"{text} {self.detail}".rstrip()


def _sector(trajs) -> float:
    worst = -math.inf
    for tr in trajs:
        worst = max(worst, float(np.max(sector_products(tr))))
    return worst


# fixtures ------------------------------------------------------------------

def phase_lead_filter(omega_f: float = 20 * math.pi) -> TransferFunction:
    """``3(3s + 2 w_f) / (2(2s + 3 w_f))``: unit DC gain, 9/4 at high frequency."""
    return TransferFunction((9.0, 6.0 * omega_f), (4.0, 6.0 * omega_f))


def lowpass_filter(omega_lp: float = 20 * math.pi) -> TransferFunction:
    return TransferFunction((omega_lp,), (1.0, omega_lp))


def random_filter(rng: np.random.Generator, max_order: int = 3) -> StateSpace:
    """Stable filter of random order with unit DC gain; corner frequencies
    between 5 and 300 rad/s."""
    n = int(rng.integers(0, max_order + 1))
    den = np.array([1.0])
    while den.size - 1 < n:
        if n - (den.size - 1) >= 2 and rng.random() < 0.5:
            wn = 10 ** rng.uniform(math.log10(5), math.log10(300))
            zeta = rng.uniform(0.3, 1.0)
            den = np.polymul(den, [1.0, 2 * zeta * wn, wn * wn])
        else:
            den = np.polymul(den, [1.0, 10 ** rng.uniform(math.log10(5), math.log10(300))])
    m = int(rng.integers(0, n + 1))
    num = np.array([1.0])
    for _ in range(m):
        num = np.polymul(num, [1.0, 10 ** rng.uniform(math.log10(5), math.log10(300))])
    num = num * (den[-1] / num[-1])
    return tf_to_ss(TransferFunction(tuple(num), tuple(den)))


def random_element(rng: np.random.Generator, max_order: int = 3) -> FhigsElement:
    k1 = rng.uniform(-1.0, 0.5)
    k2 = k1 + rng.uniform(0.2, 2.0)
    omega_h = 10 ** rng.uniform(1, math.log10(300))
    alpha_h = 0.0 if rng.random() < 0.5 else rng.uniform(0.0, 5.0)
    return FhigsElement(FhigsParams(k1, k2, omega_h, alpha_h),
                        random_filter(rng, max_order), random_filter(rng, max_order))


def random_input(rng: np.random.Generator) -> InputSignal:
    n = int(rng.integers(1, 4))
    amps = rng.uniform(0.2, 1.0, n) / n
    omegas = 10 ** rng.uniform(math.log10(2), 2, n)
    phases = rng.uniform(0, 2 * math.pi, n)
    return SumOfSines(amps, omegas, phases)


# equivalence of the two simulators -------------------------------------------

def check_equivalence(rng: np.random.Generator, *, n: int = 20, total_time: float = 2.0,
                      h: float = 1e-5, tol: float = 1e-5,
                      corrupt: Callable[[PwlRealization], PwlRealization] | None = None
                      ) -> CheckResult:
    """Largest L-infinity distance between the mode-switching simulation and
    the projected-vector-field simulation over ``n`` random configurations.

    ``corrupt`` alters the mode matrices handed to the switching simulator
    (negative control).
    """
    sim = SimConfig(h=h, total_time=total_time)
    worst = 0.0
    trajs = []
    for _ in range(n):
        element = random_element(rng)
        inp = random_input(rng)
        pwl = element.pwl() if corrupt is None else corrupt(element.pwl())
        try:
            a = simulate_open_loop(element, inp, sim, pwl=pwl)
            b = simulate_epds(element, inp, sim)
        except IntegrationError as exc:
            return CheckResult("pwl_vs_epds", False, math.inf, tol, f"integration failed: {exc}",
                               sector=_sector(trajs))
        scale = max(1.0, float(np.max(np.abs(b.states))))
        worst = max(worst, float(np.max(np.abs(a.states - b.states))) / scale)
        trajs += [a, b]
    return CheckResult("pwl_vs_epds", worst <= tol, worst, tol, f"configs={n}",
                       sector=_sector(trajs))


# describing-function landmarks -----------------------------------------------

def check_higs_phase(*, omega_h: float = 100.0, target_deg: float = -38.1,
                     tol_deg: float = 0.5) -> CheckResult:
    """Phase of the HIGS first harmonic far above ``omega_h``."""
    p = df_point(SimplifiedFhigs.from_tf(0.0, 1.0, omega_h), 100 * omega_h)
    err = abs(p.phase_deg - target_deg)
    return CheckResult("higs_phase_100x", err <= tol_deg, p.phase_deg, tol_deg,
                       f"target={target_deg}")


def check_fhigs_lead(*, omega_h: float = 100.0, omega_f: float = 20 * math.pi,
                     grid: tuple[float, float, int] = (1.0, 1e4, 200),
                     omega_hf: float = 1e4, mag_tol: float = 0.05) -> list[CheckResult]:
    """Positive phase somewhere on the grid, unchanged high-frequency gain."""
    fhigs = SimplifiedFhigs.from_tf(0.0, 1.0, omega_h, phase_lead_filter(omega_f))
    higs = SimplifiedFhigs.from_tf(0.0, 1.0, omega_h)
    lo, hi, n = grid
    phases = [df_point(fhigs, w).phase_deg for w in np.geomspace(lo, hi, n)]
    best = max(phases)
    ratio = df_point(fhigs, omega_hf).magnitude / df_point(higs, omega_hf).magnitude
    return [
        CheckResult("fhigs_max_phase_deg", best > 0.0, best, 0.0, f"grid={n} points"),
        CheckResult("fhigs_hf_magnitude_ratio", abs(ratio - 1) <= mag_tol, abs(ratio - 1), mag_tol,
                    f"ratio={ratio:.6f} at {omega_hf:g} rad/s"),
    ]


def _random_simplified(rng: np.random.Generator) -> SimplifiedFhigs:
    k1 = rng.uniform(0.0, 0.5)
    k2 = k1 + rng.uniform(0.2, 2.0)
    omega_h = 10 ** rng.uniform(1, math.log10(300))
    z, p = 10 ** rng.uniform(math.log10(5), math.log10(500), 2)
    tf = TransferFunction((1.0 / z, 1.0), (1.0 / p, 1.0))
    return SimplifiedFhigs.from_tf(k1, k2, omega_h, tf)


def _draw_case(rng: np.random.Generator, case: Case, *, lead_filter: bool = False
               ) -> tuple[SimplifiedFhigs, float]:
    while True:
        elem = _random_simplified(rng)
        omega = 10 ** rng.uniform(0, 4)
        if select_case(elem, omega) is case and (not lead_filter or elem.gain_phase(omega)[1] >= 0):
            return elem, omega


def _stratified(rng: np.random.Generator, n: int, cases=tuple(Case)):
    return [_draw_case(rng, cases[i % len(cases)]) for i in range(n)]


def check_switching_closed_forms(rng: np.random.Generator, *, n: int = 100,
                                 residual_tol: float = 1e-10, gap_tol: float = 1e-11
                                 ) -> list[CheckResult]:
    """Closed-form switching angles against the bracketing root finder.

    Residuals are in units of ``omega_h`` (tolerance ``residual_tol * omega_h``);
    gaps are converted to seconds.
    """
    worst_res = 0.0
    worst_gap = 0.0
    missing = 0
    for elem, omega in _stratified(rng, n):
        op = operating_point(elem, omega)
        case = select_case(elem, omega)
        th_e = epsilon_root(op, case)
        th_g = gamma_root(op, case, th_e)
        cf_e = epsilon_closed_form(op, case)
        cf_g = gamma_closed_form(op, case, th_e)
        if cf_e is None or cf_g is None:
            missing += 1
            continue
        res = max(abs(epsilon_residual(op, None, cf_e, case)),
                  abs(gamma_residual(op, None, th_e, cf_g, case)))
        worst_res = max(worst_res, res / elem.omega_h)
        worst_gap = max(worst_gap, abs(cf_e - th_e) / omega, abs(cf_g - th_g) / omega)
    detail = f"draws={n} closed_form_unavailable={missing}"
    return [
        CheckResult("switching_residual", worst_res <= residual_tol and missing == 0, worst_res,
                    residual_tol, detail),
        CheckResult("switching_closed_vs_root_s", worst_gap <= gap_tol and missing == 0,
                    worst_gap, gap_tol, detail),
    ]


def check_fundamental_closed_form(rng: np.random.Generator, *, n: int = 50,
                                  tol: float = 1e-9) -> CheckResult:
    """Closed-form first harmonic against per-segment quadrature, lead case."""
    worst = 0.0
    for _ in range(n):
        elem, omega = _draw_case(rng, Case.LEAD, lead_filter=True)
        resp = steady_state_analytic(elem, omega)
        a, b = lead_fundamental_closed_form(resp)
        aq, bq = fourier_quadrature(resp, 1)
        worst = max(worst, abs(complex(b - bq, a - aq)) / abs(complex(bq, aq)))
    return CheckResult("fundamental_closed_vs_quadrature", worst <= tol, worst, tol,
                       f"frequencies={n}")


def check_symmetry(rng: np.random.Generator, *, n: int = 60, even_tol: float = 1e-10,
                   half_wave_tol: float = 1e-12, amplitude: float = 1.0) -> list[CheckResult]:
    """Even harmonics vanish and ``x_h(t + T/2) = -x_h(t)`` for analytic responses."""
    worst_even = 0.0
    worst_half = 0.0
    for elem, omega in _stratified(rng, n):
        resp: PiecewiseResponse = steady_state_analytic(elem, omega, amplitude)
        for k in (2, 4, 6):
            a, b = fourier_quadrature(resp, k)
            worst_even = max(worst_even, math.hypot(a, b) / amplitude)
        t = np.linspace(0.0, resp.period / 2, 2001)
        gap = np.max(np.abs(resp(t + resp.period / 2) + resp(t)))
        worst_half = max(worst_half, float(gap) / amplitude)
    return [
        CheckResult("even_harmonics", worst_even <= even_tol, worst_even, even_tol,
                    f"responses={n} k=2,4,6"),
        CheckResult("half_wave_symmetry", worst_half <= half_wave_tol, worst_half,
                    half_wave_tol, f"responses={n}"),
    ]


# analytic versus simulated steady state --------------------------------------

# the slow low-pass (corner below omega_h) releases from the k2 line before
# the apex at every frequency, the fast one never does
DF_SPOTS: tuple[tuple[str, float], ...] = (
    ("higs", 3.0), ("higs", 25.1327), ("higs", 300.0),
    ("phase_lead", 3.0), ("phase_lead", 25.1327), ("phase_lead", 300.0),
    ("lowpass", 5.0), ("lowpass", 62.8319),
    ("lowpass_fast", 25.1327), ("lowpass_fast", 300.0),
)


def _spot_filter(name: str) -> TransferFunction:
    if name == "higs":
        return TransferFunction((1.0,), (1.0,))
    if name == "phase_lead":
        return phase_lead_filter()
    if name == "lowpass":
        return lowpass_filter()
    if name == "lowpass_fast":
        return lowpass_filter(200 * math.pi)
    raise ValueError(name)


def check_df_vs_simulation(*, spots=DF_SPOTS, omega_h: float = 100.0, settle_periods: int = 20,
                           tol: float = 1e-4) -> CheckResult:
    """Analytic first harmonic against the Fourier coefficient of the
    simulated steady state (element with ``F1 = 1`` and ``F2 = F``)."""
    worst = 0.0
    cases = set()
    trajs = []
    for name, omega in spots:
        tf = _spot_filter(name)
        elem = SimplifiedFhigs.from_tf(0.0, 1.0, omega_h, tf)
        point = df_point(elem, omega)
        cases.add(point.case)
        element = FhigsElement(elem.params, tf_to_ss(TransferFunction((1.0,), (1.0,))),
                               tf_to_ss(tf))
        h_max = 1e-5 if omega > 10 else 1e-4
        tr = simulate_open_loop(element, Sine(1.0, omega),
                                SimConfig.periodic(omega, settle_periods + 2, h_max=h_max))
        period = steady_state_period(tr, omega, settle_periods, threshold=1e-6)
        a, b = sampled_fourier(period, omega, 1)
        worst = max(worst, abs(complex(b, a) - point.value) / point.magnitude)
        trajs.append(tr)
    covered = cases == set(Case)
    detail = f"spots={len(spots)} cases={'/'.join(sorted(c.value for c in cases))}"
    return CheckResult("df_vs_simulation", worst <= tol and covered, worst, tol, detail,
                       sector=_sector(trajs))


# incremental stability -------------------------------------------------------

def incremental_fixture(alpha_h: float = 0.0, *, k1: float = 0.0, k2: float = 1.0,
                        omega_h: float = 1.0, omega_lp: float = 1.0) -> FhigsElement:
    """``F1 = 1`` and a first-order low-pass ``F2``."""
    return FhigsElement(FhigsParams(k1, k2, omega_h, alpha_h),
                        tf_to_ss(TransferFunction((1.0,), (1.0,))),
                        tf_to_ss(lowpass_filter(omega_lp)))


def random_pair(rng: np.random.Generator, element: FhigsElement
                 ) -> tuple[ElementState, ElementState]:
    """Two initial states ``||dx_c(0)|| = 1`` apart, both inside the sector."""
    n1 = element.f1.n
    p = element.params
    while True:
        base = rng.normal(size=element.nc)
        d = rng.normal(size=element.nc)
        d /= np.linalg.norm(d)
        pair = []
        for x in (base, base + d):
            v2 = element.f2.output(x[1 + n1:], 0.0)
            lo, hi = sorted((p.k1 * v2, p.k2 * v2))
            pair.append(lo <= x[0] <= hi)
        if all(pair):
            return ElementState.from_vector(base, n1), ElementState.from_vector(base + d, n1)


def check_incremental(rng: np.random.Generator, element: FhigsElement | None = None, *,
                      pairs: int = 100, total_time: float = 200.0, h: float = 2e-3,
                      tol: float = 1e-3, amplitude: float = 1.0, omega: float = 1.0
                      ) -> CheckResult:
    """Gap between two responses to the same sinusoid, from random initial
    pairs, must shrink by ``tol`` over ``total_time``."""
    element = incremental_fixture() if element is None else element
    sim = SimConfig(h=h, total_time=total_time, decimation=max(1, int(round(0.1 / h))))
    inp = Sine(amplitude, omega)
    worst = 0.0
    trajs: list[Trajectory] = []
    try:
        for _ in range(pairs):
            a, b = random_pair(rng, element)
            res: GapResult = incremental_gap(element, inp, sim, a, b)
            worst = max(worst, res.ratio)
            trajs += list(res.runs)
    except HypothesisViolation as exc:
        return CheckResult("incremental_attractivity", False, math.nan, tol,
                           f"hypothesis violated: {exc}")
    return CheckResult("incremental_attractivity", worst <= tol, worst, tol,
                       f"pairs={pairs} T={total_time:g}s", sector=_sector(trajs))


def _excursions(mask: np.ndarray) -> list[tuple[int, int]]:
    """Maximal runs ``[i, j)`` where ``mask`` holds."""
    edges = np.diff(np.concatenate([[0], mask.astype(np.int8), [0]]))
    return list(zip(np.flatnonzero(edges == 1), np.flatnonzero(edges == -1)))


def check_decay_envelope(rng: np.random.Generator, *, alpha_h: float = 2.0, pairs: int = 100,
                         total_time: float = 20.0, h: float = 1e-3, slack: float = 1e-9
                         ) -> CheckResult:
    """With leakage, ``|dx_h|`` decays at least like ``exp(-alpha_h t / 2)``
    while the pair stays outside the sector-difference region.

    Each excursion outside the region is measured from its own first logged
    sample; the first one starts at ``t = 0`` for pairs that begin outside.
    """
    element = incremental_fixture(alpha_h)
    sim = SimConfig(h=h, total_time=total_time)
    inp = Sine(1.0, 1.0)
    worst = 0.0
    n_exc = 0
    trajs: list[Trajectory] = []
    for _ in range(pairs):
        a, b = random_pair(rng, element)
        res = incremental_gap(element, inp, sim, a, b)
        trajs += list(res.runs)
        for i, j in _excursions(~res.in_sector_region):
            d0 = abs(res.dx_h[i])
            if d0 == 0.0:
                continue
            n_exc += 1
            bound = np.exp(-0.5 * alpha_h * (res.t[i:j] - res.t[i])) * d0
            worst = max(worst, float(np.max(np.abs(res.dx_h[i:j]) - bound)) / d0)
    return CheckResult("leakage_envelope", worst <= slack, worst, slack,
                       f"pairs={pairs} excursions={n_exc} alpha_h={alpha_h:g}",
                       sector=_sector(trajs))


def check_sector(results: list[CheckResult], *, tol: float = 1e-9) -> CheckResult:
    """Worst sector product over every simulation the other checks ran."""
    seen = [r.sector for r in results if not math.isnan(r.sector)]
    worst = max(seen) if seen else -math.inf
    return CheckResult("sector_invariance", worst <= tol, worst, tol,
                       f"checks_with_simulations={len(seen)}")


def corrupt_a2(pwl: PwlRealization, delta: float = 0.5) -> PwlRealization:
    """Negative control: perturb the x_h row of the k2-gain mode matrix."""
    A = [a.copy() for a in pwl.A]
    A[2][0, 0] += delta * max(1.0, float(np.max(np.abs(A[2]))))
    return replace(pwl, A=tuple(A))
