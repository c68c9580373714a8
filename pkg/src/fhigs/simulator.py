"""Fixed-step hybrid simulation of the FHIGS element in open and closed loop,
steady-state extraction and the incremental-attractivity harness.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import _kernels as K
from .element import (ElementState, FhigsElement, Mode, PwlRealization,
                      mode_core, violation_core)
from .lti import StateSpace

__all__ = [
    "InputSignal",
    "Sine",
    "SumOfSines",
    "Step",
    "Zero",
    "SimConfig",
    "ClosedLoop",
    "Trajectory",
    "IntegrationError",
    "NotSettled",
    "HypothesisViolation",
    "GapResult",
    "simulate_open_loop",
    "simulate_epds",
    "simulate_closed_loop",
    "steady_state_period",
    "incremental_gap",
    "sector_products",
    "sampled_fourier",
]

log = logging.getLogger(__name__)


class IntegrationError(RuntimeError):
    def __init__(self, message: str, t: float):
        super().__init__(f"{message} at t = {t:.9g} s")
        self.t = t


class NotSettled(RuntimeError):
    """The last two periods of a run differ by more than the threshold."""


class HypothesisViolation(ValueError):
    """A precondition of the incremental-attractivity result does not hold."""


# inputs --------------------------------------------------------------------

@dataclass(frozen=True)
class InputSignal:
    """Differentiable scalar signal: a sum of sinusoids plus an optional
    smoothed step."""

    amplitudes: tuple[float, ...] = ()
    omegas: tuple[float, ...] = ()
    phases: tuple[float, ...] = ()
    step_height: float = 0.0
    step_time: float = 0.0
    step_rise: float = 1e-4

    def __post_init__(self):
        if not len(self.amplitudes) == len(self.omegas) == len(self.phases):
            raise ValueError("amplitudes, omegas and phases must have equal length")
        # centered differences: truncation h^2 * max|e'''| / 6, rounding eps * max|e| / h
        rise = max(self.step_rise, 1e-12)
        size = sum(abs(a) for a in self.amplitudes) + abs(self.step_height)
        d3 = (sum(abs(a) * w**3 for a, w in zip(self.amplitudes, self.omegas))
              + abs(self.step_height) * 0.5 * (math.pi / rise) ** 3)
        h = min(1e-6, 1e-3 * rise)
        for t in (0.1234567, 1.0 / 3.0, self.step_time + 0.5 * self.step_rise):
            fd = (self.value(t + h) - self.value(t - h)) / (2 * h)
            tol = h * h * d3 + 1e-15 * (1 + size) / h
            if abs(fd - self.derivative(t)) > 10 * tol:
                raise ValueError("derivative inconsistent with value")

    def kernel_args(self):
        return (np.asarray(self.amplitudes, dtype=float), np.asarray(self.omegas, dtype=float),
                np.asarray(self.phases, dtype=float), float(self.step_height),
                float(self.step_time), float(self.step_rise))

    def value(self, t: float) -> float:
        return K.input_eval(float(t), *self.kernel_args())[0]

    def derivative(self, t: float) -> float:
        return K.input_eval(float(t), *self.kernel_args())[1]

    def __add__(self, other: "InputSignal") -> "InputSignal":
        if self.step_height and other.step_height:
            raise ValueError("at most one step component is supported")
        step = self if self.step_height else other
        return InputSignal(self.amplitudes + other.amplitudes, self.omegas + other.omegas,
                           self.phases + other.phases, step.step_height, step.step_time,
                           step.step_rise)


def Sine(amplitude: float, omega: float, phase: float = 0.0) -> InputSignal:
    return InputSignal((float(amplitude),), (float(omega),), (float(phase),))


def SumOfSines(amplitudes, omegas, phases=None) -> InputSignal:
    amplitudes = tuple(float(a) for a in amplitudes)
    phases = (0.0,) * len(amplitudes) if phases is None else tuple(float(p) for p in phases)
    return InputSignal(amplitudes, tuple(float(w) for w in omegas), phases)


def Step(height: float, time: float = 0.0, rise: float = 1e-4) -> InputSignal:
    """Step smoothed by a half-cosine ramp of duration ``rise``."""
    return InputSignal(step_height=float(height), step_time=float(time), step_rise=float(rise))


def Zero() -> InputSignal:
    return InputSignal()


# configuration and results -------------------------------------------------

@dataclass(frozen=True)
class SimConfig:
    h: float = 1e-5
    total_time: float = 1.0
    event_tol: float = 1e-10
    decimation: int = 1
    max_events: int = 2_000_000
    diverge_limit: float = 1e6

    def __post_init__(self):
        if not self.h > 0:
            raise ValueError("step size must be positive")
        if not self.event_tol < self.h:
            raise ValueError("event tolerance must be smaller than the step size")
        if self.decimation < 1:
            raise ValueError("decimation must be >= 1")

    @property
    def n_steps(self) -> int:
        return int(round(self.total_time / self.h))

    @classmethod
    def periodic(cls, omega: float, periods: int, h_max: float = 1e-5, **kw) -> "SimConfig":
        """Step size dividing the period ``2*pi/omega`` exactly, so periods
        can be compared sample by sample."""
        period = 2 * math.pi / omega
        n = math.ceil(period / h_max)
        return cls(h=period / n, total_time=periods * period, **kw)


@dataclass(frozen=True, eq=False)
class ClosedLoop:
    """FHIGS driving the plant ``F3*G`` (strictly proper, ``C_p B_p = 0``)
    with ``e = r - y``.

    ``feedthrough`` adds a linear path from ``e`` to the plant input, which
    becomes ``x_h + M e``.  A float is a static gain; a proper
    :class:`StateSpace` gives a dynamic path whose states follow the plant's
    in the state vector.  ``locked`` holds the element in one mode, which
    turns the controller into an LTI one (integrator mode: the element is a
    plain integrator; a gain mode: the element is a static gain).
    """

    element: FhigsElement
    plant: StateSpace
    reference: InputSignal
    feedthrough: float | StateSpace = 0.0
    locked: Mode | None = None

    def __post_init__(self):
        p = self.plant
        if p.n == 0:
            raise ValueError("plant must have at least one state")
        if p.D != 0.0:
            raise ValueError("plant must be strictly proper (D = 0)")
        cb = float(p.C @ p.B)
        if abs(cb) > 1e-12 * max(1.0, float(np.abs(p.C).max() * np.abs(p.B).max())):
            raise ValueError(f"C_p B_p = {cb:.3g}; the plant needs relative degree >= 2")
        if not isinstance(self.feedthrough, StateSpace):
            object.__setattr__(self, "feedthrough", StateSpace.gain(float(self.feedthrough)))

    @property
    def n_states(self) -> int:
        return self.element.nc + self.plant.n + self.feedthrough.n


@dataclass(eq=False)
class Trajectory:
    t: np.ndarray
    e: np.ndarray
    edot: np.ndarray
    v1: np.ndarray
    v2: np.ndarray
    x_h: np.ndarray
    mode: np.ndarray
    y: np.ndarray
    states: np.ndarray
    event_t: np.ndarray
    event_from: np.ndarray
    event_to: np.ndarray
    k1: float
    k2: float
    diagnostics: dict = field(default_factory=dict)

    def __len__(self):
        return self.t.size

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "e", "edot", "v1", "v2", "x_h", "mode", "y"])
            for row in zip(self.t, self.e, self.edot, self.v1, self.v2, self.x_h, self.mode, self.y):
                w.writerow([f"{v:.17g}" for v in row[:6]] + [int(row[6]), f"{row[7]:.17g}"])

    def events_to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t_event", "from", "to"])
            for t, a, b in zip(self.event_t, self.event_from, self.event_to):
                w.writerow([f"{t:.17g}", int(a), int(b)])

    def mode_sequence(self, t0: float = -math.inf, t1: float = math.inf) -> list[Mode]:
        """Modes entered by events in ``[t0, t1)``, consecutive duplicates merged."""
        sel = (self.event_t >= t0) & (self.event_t < t1)
        seq: list[Mode] = []
        for m in self.event_to[sel]:
            if not seq or seq[-1] != m:
                seq.append(Mode(int(m)))
        return seq


def sector_products(traj: Trajectory) -> np.ndarray:
    """Sector product normalised by ``max(1, |x_h|, |v2|)**2`` (<= 0 inside)."""
    prod = (traj.x_h - traj.k1 * traj.v2) * (traj.x_h - traj.k2 * traj.v2)
    scale = np.maximum(1.0, np.maximum(np.abs(traj.x_h), np.abs(traj.v2)))
    return prod / scale**2


# kernel plumbing -----------------------------------------------------------

def _mat(a, shape):
    return np.ascontiguousarray(np.asarray(a, dtype=float).reshape(shape))


def _pack(element: FhigsElement, pwl: PwlRealization | None, plant: StateSpace | None,
          parallel: StateSpace | None):
    p, f1, f2 = element.params, element.f1, element.f2
    pwl = element.pwl() if pwl is None else pwl
    nc = element.nc
    Am = np.ascontiguousarray(np.stack([_mat(a, (nc, nc)) for a in pwl.A]))
    Bm = np.ascontiguousarray(np.stack([_mat(b, (nc, 2)) for b in pwl.B]))
    if plant is None:
        Ap, Bp, Cp, npl = np.zeros((0, 0)), np.zeros(0), np.zeros(0), 0
    else:
        Ap, Bp, Cp, npl = _mat(plant.A, (plant.n, plant.n)), _mat(plant.B, plant.n), \
            _mat(plant.C, plant.n), plant.n
    par = StateSpace.gain(0.0) if parallel is None else parallel
    return (f1.n, f2.n, npl, float(p.k1), float(p.k2), float(p.omega_h), float(p.alpha_h), par.n,
            _mat(f1.A, (f1.n, f1.n)), _mat(f1.B, f1.n), _mat(f1.C, f1.n), float(f1.D),
            _mat(f2.A, (f2.n, f2.n)), _mat(f2.B, f2.n), _mat(f2.C, f2.n), float(f2.D),
            Ap, Bp, Cp, Am, Bm,
            _mat(par.A, (par.n, par.n)), _mat(par.B, par.n), _mat(par.C, par.n), float(par.D))


_STATUS = {
    K.CHATTERING: "chattering: more than 10 events per step at the smallest sub-step",
    K.SECTOR: "sector violation beyond tolerance",
    K.DIVERGED: "state diverged",
    K.EVENT_OVERFLOW: "event log overflow",
}


def _clamp_init(element: FhigsElement, x_c: np.ndarray, e0: float) -> np.ndarray:
    k1, k2 = element.params.k1, element.params.k2
    v2 = element.f2.output(x_c[1 + element.f1.n:], e0)
    lo, hi = sorted((k1 * v2, k2 * v2))
    if not lo <= x_c[0] <= hi:
        log.info("initial x_h = %g outside the sector, clamped into [%g, %g]", x_c[0], lo, hi)
        x_c = x_c.copy()
        x_c[0] = min(max(x_c[0], lo), hi)
    return x_c


def _run(kind, element, inp, config, z0, sysv, t0=0.0, raise_on_error=True,
         mode0: int | None = None) -> Trajectory:
    inp_args = inp.kernel_args()
    e, ed, v1, v2, v2d, f_h, y = K.signals(z0, t0, sysv, inp_args)
    p = element.params
    if mode0 is None:
        mode0 = int(mode_core(z0[0], v2, v2d, f_h, p.k1, p.k2))
    (t, sig, mode, states, ev_t, ev_from, ev_to, status, fail_t, renorm, max_sector,
     last_mode) = K.simulate(kind, z0, float(t0), float(config.h), config.n_steps,
                             int(config.decimation), float(config.event_tol), mode0, sysv,
                             inp_args, int(config.max_events), float(config.diverge_limit))
    traj = Trajectory(t, sig[:, 0], sig[:, 1], sig[:, 2], sig[:, 3], sig[:, 4], mode,
                      sig[:, 5], states, ev_t, ev_from, ev_to, p.k1, p.k2,
                      {"status": int(status), "max_renorm": float(renorm),
                       "max_sector_product": float(max_sector), "n_events": int(ev_t.size),
                       "final_mode": int(last_mode)})
    if status != K.OK:
        traj.diagnostics["failure_time"] = float(fail_t)
        if raise_on_error:
            err = IntegrationError(_STATUS[status], float(fail_t))
            err.trajectory = traj
            raise err
    return traj


def _initial(element: FhigsElement, init, inp: InputSignal) -> np.ndarray:
    if init is None:
        init = element.zero_state()
    x_c = init.vector() if isinstance(init, ElementState) else np.asarray(init, dtype=float)
    if x_c.shape != (element.nc,):
        raise ValueError(f"initial state has shape {x_c.shape}, expected ({element.nc},)")
    return _clamp_init(element, x_c, inp.value(0.0))


def simulate_open_loop(element: FhigsElement, inp: InputSignal, config: SimConfig,
                       init: ElementState | None = None, *,
                       pwl: PwlRealization | None = None) -> Trajectory:
    """Integrate the three-mode linear system with located mode switches.

    ``pwl`` overrides the matrices built from ``element`` (used by the
    negative-control checks).  A degenerate element (``k1 == k2``) is a pure
    gain and runs in its gain mode without switching.
    """
    z0 = _initial(element, init, inp)
    sysv = _pack(element, pwl, None, None)
    if element.params.k1 == element.params.k2:
        return _run(K.LINEAR, element, inp, config, z0, sysv, mode0=int(Mode.GAIN_K2))
    return _run(K.PWL, element, inp, config, z0, sysv)


def simulate_epds(element: FhigsElement, inp: InputSignal, config: SimConfig,
                  init: ElementState | None = None) -> Trajectory:
    """Integrate the projected vector field directly (no mode bookkeeping)."""
    z0 = _initial(element, init, inp)
    return _run(K.EPDS, element, inp, config, z0, _pack(element, None, None, None))


def simulate_closed_loop(loop: ClosedLoop, config: SimConfig,
                         init_controller: ElementState | None = None,
                         init_plant=None, *, raise_on_error: bool = True) -> Trajectory:
    element = loop.element
    x_c = _initial(element, init_controller, Zero())
    n_lin = loop.plant.n + loop.feedthrough.n
    x_p = np.zeros(n_lin) if init_plant is None else np.asarray(init_plant, dtype=float)
    if x_p.shape != (n_lin,):
        raise ValueError(f"plant state has shape {x_p.shape}, expected ({n_lin},)")
    z0 = np.concatenate([x_c, x_p])
    sysv = _pack(element, None, loop.plant, loop.feedthrough)
    if loop.locked is not None:
        if loop.locked != Mode.INTEGRATOR:
            k = element.params.k1 if loop.locked == Mode.GAIN_K1 else element.params.k2
            z0[0] = k * K.signals(z0, 0.0, sysv, loop.reference.kernel_args())[3]
        return _run(K.LINEAR, element, loop.reference, config, z0, sysv,
                    raise_on_error=raise_on_error, mode0=int(loop.locked))
    return _run(K.PWL, element, loop.reference, config, z0, sysv, raise_on_error=raise_on_error)


# steady state --------------------------------------------------------------

_COLUMNS = ("e", "edot", "v1", "v2", "x_h", "y")


def steady_state_period(traj: Trajectory, omega: float, settle_periods: int = 20,
                        threshold: float = 1e-6) -> Trajectory:
    """Final full period of ``traj`` re-based to ``t in [0, 2*pi/omega)``.

    The L-infinity gap between the last two periods of ``x_h`` (relative to
    its amplitude) is stored in ``diagnostics['settle_gap']``;
    :class:`NotSettled` is raised when it exceeds ``threshold``.
    """
    period = 2 * math.pi / omega
    t_end = traj.t[-1]
    if t_end - traj.t[0] <= (settle_periods + 1) * period * (1 - 1e-12):
        raise ValueError(
            f"trajectory spans {t_end - traj.t[0]:.6g} s, need more than "
            f"{(settle_periods + 1) * period:.6g} s")
    dt = float(np.median(np.diff(traj.t)))
    n = max(int(round(period / dt)), 8)
    grid = np.arange(n) * (period / n)
    start = t_end - period
    if abs(period / dt - n) < 1e-6:
        start = traj.t[-1 - n]
    cols = {c: np.interp(start + grid, traj.t, getattr(traj, c)) for c in _COLUMNS}
    prev = np.interp(start - period + grid, traj.t, traj.x_h)
    amp = max(float(np.max(np.abs(cols["x_h"]))), 1e-300)
    gap = float(np.max(np.abs(cols["x_h"] - prev))) / amp
    idx = np.clip(np.searchsorted(traj.t, start + grid, side="right") - 1, 0, traj.t.size - 1)
    states = np.array([np.interp(start + grid, traj.t, traj.states[:, j])
                       for j in range(traj.states.shape[1])]).T
    sel = (traj.event_t >= start) & (traj.event_t < start + period)
    out = Trajectory(grid, cols["e"], cols["edot"], cols["v1"], cols["v2"], cols["x_h"],
                     traj.mode[idx], cols["y"], states, traj.event_t[sel] - start,
                     traj.event_from[sel], traj.event_to[sel], traj.k1, traj.k2,
                     {"settle_gap": gap, "t_start": float(start)})
    if gap > threshold:
        raise NotSettled(f"last two periods differ by {gap:.3g} (relative), threshold {threshold:.3g}")
    return out


def sampled_fourier(period: Trajectory, omega: float, k: int,
                    column: str = "x_h") -> tuple[float, float]:
    """``(a_k, b_k)`` of one uniformly sampled period (rectangle rule, exact
    for trigonometric polynomials below the Nyquist limit)."""
    x = getattr(period, column)
    th = omega * period.t
    n = x.size
    return (2.0 / n * float(np.dot(x, np.cos(k * th))),
            2.0 / n * float(np.dot(x, np.sin(k * th))))


# incremental attractivity --------------------------------------------------

@dataclass(eq=False)
class GapResult:
    """Difference between two runs driven by the same input.

    ``box_bound`` is ``k_h * sup_{s >= t} |dv(s)|``, the size of the shrinking
    box that ``|dx_h|`` is driven into; ``in_sector_region`` flags samples with
    ``(dx_h - k1|dv|)(dx_h - k2|dv|) <= 0`` after labelling the pair so that
    ``dv >= 0`` (equivalently ``(dx_h - k1 dv)(dx_h - k2 dv) <= 0``).
    """

    t: np.ndarray
    gap: np.ndarray
    dx_h: np.ndarray
    dx_v: np.ndarray
    dv: np.ndarray
    box_bound: np.ndarray
    in_sector_region: np.ndarray
    k_h: float
    runs: tuple[Trajectory, Trajectory]

    @property
    def ratio(self) -> float:
        return float(self.gap[-1] / self.gap[0]) if self.gap[0] > 0 else 0.0

    def decay_rate(self, t_from: float = 0.0, floor: float = 1e-10) -> float:
        """Least-squares slope of ``-log(gap)`` over samples above ``floor``."""
        sel = (self.t >= t_from) & (self.gap > floor * self.gap[0])
        if sel.sum() < 3:
            return math.inf
        # fit the running-max envelope so oscillation inside a period is ignored
        env = np.maximum.accumulate(self.gap[sel][::-1])[::-1]
        slope = np.polyfit(self.t[sel], np.log(env), 1)[0]
        return float(-slope)


def incremental_gap(element: FhigsElement, inp: InputSignal, config: SimConfig,
                    init_a: ElementState, init_b: ElementState) -> GapResult:
    p = element.params
    if not p.alpha_h >= 0:
        raise HypothesisViolation("alpha_h >= 0 violated")
    if not p.k2 > 0:
        raise HypothesisViolation(f"k2 > 0 violated (k2 = {p.k2})")
    if not p.k1 <= 0:
        raise HypothesisViolation(f"0 >= k1 violated (k1 = {p.k1})")
    for name, f in (("F1", element.f1), ("F2", element.f2)):
        if not f.is_hurwitz():
            raise HypothesisViolation(f"filter {name} A-matrix is not Hurwitz")
    ra = simulate_open_loop(element, inp, config, init_a)
    rb = simulate_open_loop(element, inp, config, init_b)
    dz = ra.states - rb.states
    gap = np.linalg.norm(dz, axis=1)
    dxh = dz[:, 0]
    dxv = np.linalg.norm(dz[:, 1:], axis=1)
    dv = np.abs(ra.v2 - rb.v2)
    k_h = max(abs(p.k1), abs(p.k2))
    box = k_h * np.maximum.accumulate(dv[::-1])[::-1]
    # label the pair so that dv >= 0: (sign(dv) dx_h, |dv|) in the sector region
    dvs = ra.v2 - rb.v2
    in_region = (dxh - p.k1 * dvs) * (dxh - p.k2 * dvs) <= 0
    return GapResult(ra.t, gap, dxh, dxv, dv, box, in_region, k_h, (ra, rb))
