"""Analytic sinusoidal steady state and describing functions of the
simplified FHIGS (single filter ``F`` in front of the sector check, no
leakage).

Everything is computed in the phase variable ``theta = omega * t``; the
public types report times in seconds. With ``r = omega_h / omega`` and input
``A sin(theta)``, the integrator mode gives ``x_h/A = C - r cos(theta)`` and
the gain modes give ``x_h/A = k G sin(theta + phi)``.

The response over one period is built from a half-cycle template on
``[-phi, pi - phi]`` (where ``v >= 0``) and its odd mirror:

* ``Lead``       k1-gain, integrator until the k2 line, k2-gain
* ``LagWithK1``  k2-gain (continued from the previous half), integrator until
                 the k1 line, k1-gain
* ``LagNoK1``    integrator from the apex, k2-gain
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy.optimize import brentq

from .element import FhigsParams, Mode
from .lti import StateSpace, TransferFunction, freq_response, tf_to_ss

__all__ = [
    "Case",
    "OperatingPoint",
    "operating_point",
    "SimplifiedFhigs",
    "SwitchingInstants",
    "Segment",
    "PiecewiseResponse",
    "DfPoint",
    "DfDomainError",
    "CaseInconsistency",
    "select_case",
    "solve_epsilon",
    "solve_gamma",
    "switching_instants",
    "epsilon_residual",
    "gamma_residual",
    "epsilon_closed_form",
    "gamma_closed_form",
    "epsilon_root",
    "gamma_root",
    "steady_state_analytic",
    "fourier_coefficients",
    "fourier_quadrature",
    "lead_fundamental_closed_form",
    "df_point",
    "df_sweep",
    "reduce_filters",
]

log = logging.getLogger(__name__)

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(64)
_SCAN = 2048


class Case(enum.Enum):
    LEAD = "lead"
    LAG_K1 = "lag_k1"
    LAG_NOK1 = "lag_nok1"


class DfDomainError(ValueError):
    """Parameters outside the range where the piecewise construction holds."""


class CaseInconsistency(RuntimeError):
    """A switching equation has no root where the selected case needs one."""


@dataclass(frozen=True, eq=False)
class SimplifiedFhigs:
    """Sector gains, integrator frequency and the single filter ``F``.

    The analytic construction covers ``0 <= k1 < k2`` without leakage.
    """

    params: FhigsParams
    filter: StateSpace

    def __post_init__(self):
        p = self.params
        if p.alpha_h != 0.0:
            raise DfDomainError("the analytic response requires alpha_h = 0")
        if p.degenerate or not p.k2 > p.k1:
            raise DfDomainError("the analytic response requires k2 > k1")
        if p.k1 < 0:
            raise DfDomainError(f"the analytic response requires k1 >= 0 (k1 = {p.k1})")

    @classmethod
    def from_tf(cls, k1: float, k2: float, omega_h: float,
                tf: TransferFunction | None = None) -> "SimplifiedFhigs":
        tf = TransferFunction((1.0,), (1.0,)) if tf is None else tf
        return cls(FhigsParams(k1, k2, omega_h), tf_to_ss(tf))

    @property
    def k1(self) -> float:
        return self.params.k1

    @property
    def k2(self) -> float:
        return self.params.k2

    @property
    def omega_h(self) -> float:
        return self.params.omega_h

    def gain_phase(self, omega: float) -> tuple[float, float]:
        fr = freq_response(self.filter, omega)
        return fr.gain, fr.phase


def reduce_filters(f1: TransferFunction, f2: TransferFunction) -> TransferFunction:
    """``F = F1^-1 F2`` for a biproper, invertible ``F1``."""
    return f1.inverse() * f2


@dataclass(frozen=True)
class SwitchingInstants:
    """Release from the first gain line (``epsilon``) and arrival at the
    other line (``gamma``), in seconds from the start of the period."""

    epsilon: float
    gamma: float
    case: Case
    omega: float
    closed_form_gap: float = math.nan

    @property
    def theta_epsilon(self) -> float:
        return self.epsilon * self.omega

    @property
    def theta_gamma(self) -> float:
        return self.gamma * self.omega


# switching equations -------------------------------------------------------

@dataclass(frozen=True)
class OperatingPoint:
    """Operating point: filter gain/phase and ``r = omega_h / omega``."""

    omega: float
    G: float
    phi: float
    k1: float
    k2: float
    omega_h: float

    @property
    def r(self) -> float:
        return self.omega_h / self.omega


def operating_point(elem: SimplifiedFhigs, omega: float) -> OperatingPoint:
    if not omega > 0:
        raise ValueError(f"frequency must be positive, got {omega}")
    G, phi = elem.gain_phase(omega)
    return OperatingPoint(omega, G, phi, elem.k1, elem.k2, elem.omega_h)


def _scale(op: OperatingPoint) -> float:
    return max(op.omega_h, op.k2 * op.G * op.omega)


def _release_gain(op: OperatingPoint, case: Case) -> float:
    return op.k2 if case is Case.LAG_K1 else op.k1


def _arrival_gain(op: OperatingPoint, case: Case) -> float:
    return op.k1 if case is Case.LAG_K1 else op.k2


def _select(op: OperatingPoint) -> Case:
    if op.phi >= 0:
        return Case.LEAD
    # release from the k2 line inside [0, -phi]: k2 G w cos(th + phi) - w_h sin(th)
    # is positive at 0 (|phi| < pi/2) and must reach zero by -phi
    push = op.r * math.sin(-op.phi)
    if push >= op.k2 * op.G:
        return Case.LAG_K1
    if push > op.k1 * op.G:
        return Case.LAG_NOK1
    # the k1 line holds past the apex, so the half cycle has the lead ordering
    return Case.LEAD


def select_case(elem: SimplifiedFhigs, omega: float) -> Case:
    return _select(operating_point(elem, omega))


def _eps_fun(op: OperatingPoint, k: float):
    # positive while the gain mode with gain k holds, in units of omega_h
    return lambda th: k * op.G * op.omega * math.cos(th + op.phi) - op.omega_h * math.sin(th)


def epsilon_residual(op_or_elem, omega: float | None, theta: float, case: Case) -> float:
    """Release equation at angle ``theta``, in units of ``omega_h``."""
    op = op_or_elem if isinstance(op_or_elem, OperatingPoint) else operating_point(op_or_elem, omega)
    if case is Case.LAG_NOK1:
        return theta + op.phi
    return _eps_fun(op, _release_gain(op, case))(theta)


def _gamma_fun(op: OperatingPoint, case: Case, th_eps: float):
    # omega * (k_arrive v - x_h) / A: positive before the arrival line is reached
    ka, kr = _arrival_gain(op, case), _release_gain(op, case)
    w = op.omega
    if case is Case.LAG_NOK1:
        q = op.omega_h * math.cos(th_eps)
    else:
        q = kr * op.G * w * math.sin(th_eps + op.phi) + op.omega_h * math.cos(th_eps)
    return lambda th: ka * op.G * w * math.sin(th + op.phi) + op.omega_h * math.cos(th) - q


def gamma_residual(op_or_elem, omega: float | None, theta_eps: float, theta: float,
                   case: Case) -> float:
    """Arrival equation at angle ``theta`` after release at ``theta_eps``."""
    op = op_or_elem if isinstance(op_or_elem, OperatingPoint) else operating_point(op_or_elem, omega)
    return _gamma_fun(op, case, theta_eps)(theta)


def _first_root(fun: Callable[[float], float], lo: float, hi: float,
                scale: float = 1.0, zoom: int = 4) -> float:
    """First point in ``(lo, hi]`` where ``fun`` goes from > 0 to <= 0.

    A start value within rounding of zero (the release point touching the
    arrival line at the apex) is skipped rather than reported as the root.
    If the scan then lands on a negative value, the first interval is
    rescanned ``zoom`` times over in case a short positive excursion hides
    inside it.
    """
    grid = np.linspace(lo, hi, _SCAN + 1)
    vals = [fun(x) for x in grid]
    i = 0
    if vals[0] <= 0.0:
        if vals[0] < -1e-12 * scale:
            raise CaseInconsistency(f"switching function negative at the bracket start {lo:.6g}")
        while i < _SCAN and vals[i] <= 0.0 and vals[i] >= -1e-12 * scale:
            i += 1
        if vals[i] <= 0.0:
            if zoom > 0 and i > 0:
                return _first_root(fun, lo, float(grid[i]), scale, zoom - 1)
            return float(lo)
    for j in range(i + 1, _SCAN + 1):
        if vals[j] <= 0.0:
            if vals[j] == 0.0:
                return float(grid[j])
            a, b = grid[j - 1], grid[j]
            if fun(a) <= 0.0:
                a = lo
            return float(brentq(fun, a, b, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200))
    raise CaseInconsistency(f"no sign change on [{lo:.6g}, {hi:.6g}]")


def _eps_bracket(op: OperatingPoint, case: Case) -> tuple[float, float]:
    if case is Case.LAG_K1:
        return 0.0, -op.phi
    return -op.phi, math.pi - op.phi


def epsilon_root(op: OperatingPoint, case: Case) -> float:
    if case is Case.LAG_NOK1:
        return -op.phi
    lo, hi = _eps_bracket(op, case)
    return _first_root(_eps_fun(op, _release_gain(op, case)), lo, hi, _scale(op))


def epsilon_closed_form(op: OperatingPoint, case: Case) -> float | None:
    """Arccos form of the release angle, or None where it does not apply."""
    if case is Case.LAG_NOK1:
        return -op.phi
    p = _release_gain(op, case) * op.G * op.omega
    wh, s, c = op.omega_h, math.sin(op.phi), math.cos(op.phi)
    if p * c < 0:
        return None
    den = math.sqrt(p * p + 2 * p * wh * s + wh * wh)
    arg = (p * s + wh) / den
    if abs(arg) > 1 + 1e-12:
        log.info("release arccos argument %.17g outside [-1, 1], using the root finder", arg)
        return None
    return math.acos(min(1.0, max(-1.0, arg)))


def _gamma_bracket(op: OperatingPoint, case: Case, th_eps: float) -> tuple[float, float]:
    if case is Case.LAG_K1:
        return th_eps, -op.phi
    return th_eps, math.pi - op.phi


def gamma_root(op: OperatingPoint, case: Case, th_eps: float) -> float:
    lo, hi = _gamma_bracket(op, case, th_eps)
    return _first_root(_gamma_fun(op, case, th_eps), lo, hi, _scale(op))


def _hk(op: OperatingPoint, case: Case, th_eps: float) -> tuple[float, float, float]:
    """``(H, K, denominator)`` of the arccos form of the arrival angle."""
    G, w, wh, phi = op.G, op.omega, op.omega_h, op.phi
    ka, kr = _arrival_gain(op, case), _release_gain(op, case)
    se, ce, sep = math.sin(th_eps), math.cos(th_eps), math.sin(th_eps + phi)
    sp, cp = math.sin(phi), math.cos(phi)
    H = (G * G * ka * ka * w * w * cp * cp
         * (G * G * ka * ka * w * w - G * G * kr * kr * w * w * sep * sep
            - 2 * G * kr * w * wh * ce * sep + 2 * G * ka * w * wh * sp + wh * wh * se * se))
    K = G * kr * w * sep * (G * ka * w * sp + wh) + G * ka * w * wh * ce * sp + wh * wh * ce
    den = G * G * ka * ka * w * w + 2 * G * ka * w * wh * sp + wh * wh
    return H, K, den


def gamma_closed_form(op: OperatingPoint, case: Case, th_eps: float) -> float | None:
    """Closed-form arrival angle, or None where the formula does not apply.

    The arrival equation is ``a cos(theta) + b sin(theta) = q``; its two
    solutions have ``cos(theta) = (K +- sqrt(H)) / den`` with the matching
    ``sin(theta) = (b q -+ a sqrt(D)) / den``, ``D = den - q^2``.  Taking
    ``atan2`` of the pair instead of ``arccos`` of the cosine avoids the
    spurious roots of squaring, reaches angles beyond ``pi`` and stays
    accurate near ``cos(theta) = +-1``.  The first solution after the release
    angle is returned.  In LagNoK1 the release is at the apex, where
    ``sin(th_eps + phi) = 0``, so the same expressions apply.
    """
    H, K, den = _hk(op, case, th_eps)
    if H < -1e-12 * max(1.0, den * den):
        log.info("arrival discriminant H = %.3g < 0, using the root finder", H)
        return None
    ka, kr = _arrival_gain(op, case), _release_gain(op, case)
    w = op.omega
    a = ka * op.G * w * math.sin(op.phi) + op.omega_h
    b = ka * op.G * w * math.cos(op.phi)
    q = kr * op.G * w * math.sin(th_eps + op.phi) + op.omega_h * math.cos(th_eps)
    root_d = math.sqrt(max(den - q * q, 0.0))
    lo, hi = _gamma_bracket(op, case, th_eps)
    margin = 1e-12 * max(1.0, abs(lo))
    cands = []
    for sign in (1.0, -1.0):
        th = math.atan2(b * q - sign * a * root_d, a * q + sign * b * root_d)
        while th <= lo + margin:
            th += 2 * math.pi
        if th <= hi + margin:
            cands.append(th)
    return min(cands) if cands else None


def _agree(closed: float | None, root: float, omega: float, what: str, validate: bool) -> float:
    if closed is None:
        return root
    gap = abs(closed - root) / omega
    if validate and gap > 1e-11:
        log.info("%s closed form differs from the root finder by %.3g s, using the root", what, gap)
        return root
    return closed


def solve_epsilon(elem: SimplifiedFhigs, omega: float, case: Case | None = None, *,
                  validate: bool = True) -> float:
    """Release instant in seconds."""
    op = operating_point(elem, omega)
    case = _select(op) if case is None else case
    return _solve_eps(op, case, validate) / omega


def _solve_eps(op: OperatingPoint, case: Case, validate: bool) -> float:
    closed = epsilon_closed_form(op, case)
    if closed is not None and not validate:
        return closed
    return _agree(closed, epsilon_root(op, case), op.omega, "release", validate)


def _solve_gamma(op: OperatingPoint, case: Case, th_eps: float, validate: bool) -> float:
    closed = gamma_closed_form(op, case, th_eps)
    if closed is not None and not validate:
        return closed
    return _agree(closed, gamma_root(op, case, th_eps), op.omega, "arrival", validate)


def solve_gamma(elem: SimplifiedFhigs, omega: float, epsilon: float,
                case: Case | None = None, *, validate: bool = True) -> float:
    """Arrival instant in seconds for a given release instant ``epsilon``."""
    op = operating_point(elem, omega)
    case = _select(op) if case is None else case
    return _solve_gamma(op, case, epsilon * omega, validate) / omega


def switching_instants(elem: SimplifiedFhigs, omega: float, *,
                       validate: bool = True) -> SwitchingInstants:
    op = operating_point(elem, omega)
    return _instants(op, _select(op), validate)


def _instants(op: OperatingPoint, case: Case, validate: bool) -> SwitchingInstants:
    th_e = _solve_eps(op, case, validate)
    th_g = _solve_gamma(op, case, th_e, validate)
    return SwitchingInstants(th_e / op.omega, th_g / op.omega, case, op.omega)


# piecewise response --------------------------------------------------------

@dataclass(frozen=True)
class Segment:
    """``x_h/A`` on ``[theta_start, theta_end]``: ``k G sin(theta + phi)`` in a
    gain mode, ``const - r cos(theta)`` in the integrator mode."""

    theta_start: float
    theta_end: float
    mode: Mode
    const: float = 0.0


@dataclass(frozen=True, eq=False)
class PiecewiseResponse:
    """One steady-state period of ``x_h`` for input ``A sin(omega t)``."""

    omega: float
    amplitude: float
    G: float
    phi: float
    r: float
    k1: float
    k2: float
    segments: tuple[Segment, ...]
    instants: SwitchingInstants

    @property
    def period(self) -> float:
        return 2 * math.pi / self.omega

    @property
    def case(self) -> Case:
        return self.instants.case

    def _unit(self, seg: Segment, th):
        if seg.mode is Mode.INTEGRATOR:
            return seg.const - self.r * np.cos(th)
        k = self.k1 if seg.mode is Mode.GAIN_K1 else self.k2
        return k * self.G * np.sin(th + self.phi)

    def segment_times(self) -> list[tuple[float, float, Mode]]:
        return [(s.theta_start / self.omega, s.theta_end / self.omega, s.mode)
                for s in self.segments]

    def mode_at(self, t) -> np.ndarray:
        th = np.mod(np.asarray(t, dtype=float) * self.omega, 2 * math.pi)
        starts = np.array([s.theta_start for s in self.segments])
        idx = np.clip(np.searchsorted(starts, th, side="right") - 1, 0, len(self.segments) - 1)
        return np.array([int(self.segments[i].mode) for i in np.atleast_1d(idx)])

    def __call__(self, t):
        """``x_h(t)`` (periodic extension)."""
        th = np.mod(np.asarray(t, dtype=float) * self.omega, 2 * math.pi)
        out = np.empty_like(th)
        starts = np.array([s.theta_start for s in self.segments])
        idx = np.clip(np.searchsorted(starts, th, side="right") - 1, 0, len(self.segments) - 1)
        for i, seg in enumerate(self.segments):
            sel = idx == i
            out[sel] = self._unit(seg, th[sel])
        return self.amplitude * out

    def v(self, t):
        """Filtered input ``A G sin(omega t + phi)``."""
        return self.amplitude * self.G * np.sin(np.asarray(t, dtype=float) * self.omega + self.phi)

    def junction_gaps(self) -> np.ndarray:
        """|x_h| jumps at every internal junction and across the period end,
        relative to the amplitude."""
        gaps = []
        segs = self.segments
        for a, b in zip(segs, segs[1:] + segs[:1]):
            end = a.theta_end
            start = b.theta_start if b is not segs[0] else b.theta_start + 2 * math.pi
            if abs(end - start) > 1e-12:
                raise AssertionError("segments do not tile the period")
            gaps.append(abs(self._unit(a, end) - self._unit(b, start)))
        return np.array(gaps)


def _half_template(op: OperatingPoint, case: Case, th_e: float, th_g: float) -> list[Segment]:
    """Segments on ``[-phi, pi - phi]``."""
    G, phi, r, k1, k2 = op.G, op.phi, op.r, op.k1, op.k2
    a, b = -phi, math.pi - phi
    if case is Case.LEAD:
        c = k1 * G * math.sin(th_e + phi) + r * math.cos(th_e)
        return [Segment(a, th_e, Mode.GAIN_K1), Segment(th_e, th_g, Mode.INTEGRATOR, c),
                Segment(th_g, b, Mode.GAIN_K2)]
    if case is Case.LAG_K1:
        # release from k2 happens at pi + eps within this half (mirror of eps)
        e2, g2 = th_e + math.pi, th_g + math.pi
        c = k2 * G * math.sin(e2 + phi) + r * math.cos(e2)
        return [Segment(a, e2, Mode.GAIN_K2), Segment(e2, g2, Mode.INTEGRATOR, c),
                Segment(g2, b, Mode.GAIN_K1)]
    c = r * math.cos(a)
    return [Segment(a, th_g, Mode.INTEGRATOR, c), Segment(th_g, b, Mode.GAIN_K2)]


def _wrap(segs: list[Segment]) -> tuple[Segment, ...]:
    two_pi = 2 * math.pi
    out = []
    for s in segs:
        lo, hi = s.theta_start, s.theta_end
        if hi - lo <= 0.0:
            continue
        shift = -two_pi * math.floor(lo / two_pi)
        lo, hi = lo + shift, hi + shift
        # integrator constants and gain evaluators are 2*pi periodic in theta
        if hi <= two_pi:
            out.append(Segment(lo, hi, s.mode, s.const))
        else:
            out.append(Segment(lo, two_pi, s.mode, s.const))
            out.append(Segment(0.0, hi - two_pi, s.mode, s.const))
    out.sort(key=lambda s: s.theta_start)
    # snap tiny tiling gaps produced by the 2*pi shift
    fixed = []
    for i, s in enumerate(out):
        start = 0.0 if i == 0 else fixed[-1].theta_end
        fixed.append(Segment(start, s.theta_end if i < len(out) - 1 else two_pi, s.mode, s.const))
    return tuple(fixed)


def _build(op: OperatingPoint, amplitude: float, inst: SwitchingInstants) -> PiecewiseResponse:
    th_e, th_g = inst.theta_epsilon, inst.theta_gamma
    half = _half_template(op, inst.case, th_e, th_g)
    mirror = [Segment(s.theta_start + math.pi, s.theta_end + math.pi, s.mode, -s.const)
              for s in half]
    segs = _wrap(half + mirror)
    return PiecewiseResponse(op.omega, float(amplitude), op.G, op.phi, op.r, op.k1, op.k2,
                             segs, inst)


def _check_consistency(resp: PiecewiseResponse, n: int = 4096) -> None:
    """Sample the response and confirm it stays in the sector."""
    t = (np.arange(n) + 0.5) / n * resp.period
    x = resp(t) / resp.amplitude
    v = resp.v(t) / resp.amplitude
    prod = (x - resp.k1 * v) * (x - resp.k2 * v)
    scale = np.maximum(1.0, np.maximum(np.abs(x), np.abs(v))) ** 2
    worst = float(np.max(prod / scale))
    if worst > 1e-9:
        raise DfDomainError(
            f"piecewise construction leaves the sector (normalised product {worst:.3g}) at "
            f"omega = {resp.omega:.6g}, phi = {math.degrees(resp.phi):.3f} deg")


def steady_state_analytic(elem: SimplifiedFhigs, omega: float, amplitude: float = 1.0, *,
                          validate: bool = True) -> PiecewiseResponse:
    if not amplitude > 0:
        raise ValueError(f"amplitude must be positive, got {amplitude}")
    op = operating_point(elem, omega)
    if abs(op.phi) >= math.pi / 2:
        raise DfDomainError(
            f"filter phase {math.degrees(op.phi):.3f} deg outside (-90, 90) deg at omega = {omega:.6g}")
    inst = _instants(op, _select(op), validate)
    resp = _build(op, amplitude, inst)
    if validate:
        _check_consistency(resp)
    return resp


# Fourier coefficients ------------------------------------------------------

def fourier_quadrature(resp: PiecewiseResponse, k: int) -> tuple[float, float]:
    """``(a_k, b_k)`` per unit amplitude by 64-point Gauss-Legendre on every
    segment."""
    a = b = 0.0
    for seg in resp.segments:
        half = 0.5 * (seg.theta_end - seg.theta_start)
        if half <= 0:
            continue
        th = seg.theta_start + half * (_GL_NODES + 1.0)
        x = resp._unit(seg, th)
        a += half * float(np.dot(_GL_WEIGHTS, x * np.cos(k * th)))
        b += half * float(np.dot(_GL_WEIGHTS, x * np.sin(k * th)))
    return a / math.pi, b / math.pi


def lead_fundamental_closed_form(resp: PiecewiseResponse) -> tuple[float, float]:
    """Closed-form ``(a_1, b_1)`` for the lead ordering with ``phi >= 0``."""
    if resp.case is not Case.LEAD or resp.phi < 0:
        raise ValueError("closed-form fundamental applies to the lead case with phi >= 0")
    G, k1, k2, phi, w = resp.G, resp.k1, resp.k2, resp.phi, resp.omega
    wh = resp.r * w
    E, Gm = resp.instants.theta_epsilon, resp.instants.theta_gamma
    s, c = math.sin, math.cos
    A = (G * k1 * w * (2 * c(Gm - E - phi) - 2 * c(Gm + E + phi) + 2 * E * s(phi)
                       + c(2 * E + phi) + 2 * phi * s(phi) - c(phi))
         + G * k2 * w * (2 * (-Gm - phi + math.pi) * s(phi) + c(2 * Gm + phi) - c(phi))
         - 2 * wh * (c(E) * (s(E) - 2 * s(Gm)) + Gm + s(Gm) * c(Gm) - E))
    B = (G * k1 * w * ((c(E) - 2 * c(Gm)) * s(E + phi) + (E + phi) * c(phi))
         + G * k2 * w * ((-Gm - phi + math.pi) * c(phi) + c(Gm) * s(Gm + phi))
         + wh * (c(Gm) - c(E)) ** 2)
    return A / (2 * math.pi * w), B / (math.pi * w)


def fourier_coefficients(resp: PiecewiseResponse, k: int, *,
                         validate: bool = True) -> tuple[float, float]:
    """``(a_k, b_k)`` per unit amplitude.

    Even harmonics vanish by half-wave symmetry and return zeros. The lead
    fundamental uses the closed form, checked against quadrature when
    ``validate`` is set.
    """
    if k < 1:
        raise ValueError(f"harmonic index must be >= 1, got {k}")
    if k % 2 == 0:
        return 0.0, 0.0
    if k == 1 and resp.case is Case.LEAD and resp.phi >= 0:
        a, b = lead_fundamental_closed_form(resp)
        if validate:
            aq, bq = fourier_quadrature(resp, 1)
            scale = max(math.hypot(aq, bq), 1e-300)
            if max(abs(a - aq), abs(b - bq)) > 1e-9 * scale:
                raise AssertionError(
                    f"closed-form fundamental ({a:.17g}, {b:.17g}) disagrees with "
                    f"quadrature ({aq:.17g}, {bq:.17g})")
        return a, b
    return fourier_quadrature(resp, k)


# describing function -------------------------------------------------------

@dataclass(frozen=True)
class DfPoint:
    omega: float
    k: int
    a_k: float
    b_k: float
    case: Case | None
    phase_rad: float = math.nan
    error: str | None = None

    def __post_init__(self):
        if math.isnan(self.phase_rad) and self.error is None:
            object.__setattr__(self, "phase_rad", math.atan2(self.a_k, self.b_k))

    @property
    def value(self) -> complex:
        return complex(self.b_k, self.a_k)

    @property
    def magnitude(self) -> float:
        return math.hypot(self.a_k, self.b_k)

    @property
    def mag_db(self) -> float:
        m = self.magnitude
        return 20 * math.log10(m) if m > 0 else -math.inf

    @property
    def phase_deg(self) -> float:
        return math.degrees(self.phase_rad)


def df_point(elem: SimplifiedFhigs, omega: float, k: int = 1, *,
             validate: bool = True) -> DfPoint:
    resp = steady_state_analytic(elem, omega, 1.0, validate=validate)
    a, b = fourier_coefficients(resp, k, validate=validate)
    return DfPoint(omega, k, a, b, resp.case)


def df_sweep(elem: SimplifiedFhigs, omegas: Sequence[float], harmonics: Iterable[int] = (1,),
             *, validate: bool = True, map_fn: Callable = map) -> list[DfPoint]:
    """DF over a sorted frequency grid, phase unwrapped along the grid per
    harmonic.

    Points are independent, so ``map_fn`` may be any parallel map (for example
    ``executor.map``). A failing point is returned with NaN coefficients and
    its error message instead of aborting the sweep.
    """
    omegas = [float(w) for w in omegas]
    harmonics = [int(k) for k in harmonics]
    if any(b < a for a, b in zip(omegas, omegas[1:])):
        raise ValueError("frequency grid must be sorted ascending")
    if not harmonics or not omegas:
        return []

    def one(w):
        try:
            resp = steady_state_analytic(elem, w, 1.0, validate=validate)
        except (DfDomainError, CaseInconsistency, ValueError) as exc:
            return [DfPoint(w, k, math.nan, math.nan, None, math.nan, str(exc)) for k in harmonics]
        return [DfPoint(w, k, *fourier_coefficients(resp, k, validate=validate), resp.case)
                for k in harmonics]

    rows = list(map_fn(one, omegas))
    out: list[DfPoint] = []
    for j, k in enumerate(harmonics):
        col = [row[j] for row in rows]
        ok = [i for i, p in enumerate(col) if p.error is None and p.magnitude > 0]
        phases = np.array([col[i].phase_rad for i in ok])
        unwrapped = np.unwrap(phases) if phases.size else phases
        fixed = list(col)
        for i, ph in zip(ok, unwrapped):
            p = col[i]
            fixed[i] = DfPoint(p.omega, p.k, p.a_k, p.b_k, p.case, float(ph))
        out.extend(fixed)
    out.sort(key=lambda p: (p.k, p.omega))
    return out
