"""The filtered HIGS element: sector set, projection of the integrator
velocity, mode classification and the three-mode piecewise-linear matrices.

State ordering everywhere is ``x_c = [x_h, x_v1, x_v2]``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from ._jit import njit
from .lti import StateSpace

__all__ = [
    "FhigsParams",
    "FhigsElement",
    "Mode",
    "ElementState",
    "PwlRealization",
    "SectorViolation",
    "filter_signals",
    "sector_violation",
    "unprojected_dynamics",
    "classify_mode",
    "build_pwl",
    "project_velocity",
    "projection_line",
]


class SectorViolation(RuntimeError):
    """State lies outside the sector set beyond the boundary tolerance."""


class Mode(enum.IntEnum):
    INTEGRATOR = 0
    GAIN_K1 = 1
    GAIN_K2 = 2


@dataclass(frozen=True)
class FhigsParams:
    """Sector gains ``k1 < k2``, integrator frequency ``omega_h`` [rad/s] and
    leakage ``alpha_h`` [1/s].

    ``degenerate=True`` admits ``k1 == k2`` (a pure gain); only the projection
    handles that case.
    """

    k1: float
    k2: float
    omega_h: float
    alpha_h: float = 0.0
    degenerate: bool = False

    def __post_init__(self):
        if self.degenerate:
            if self.k2 < self.k1:
                raise ValueError(f"need k2 >= k1, got k1={self.k1}, k2={self.k2}")
        elif not self.k2 > self.k1:
            raise ValueError(f"need k2 > k1, got k1={self.k1}, k2={self.k2}")
        if not self.omega_h > 0:
            raise ValueError(f"omega_h must be positive, got {self.omega_h}")
        if not self.alpha_h >= 0:
            raise ValueError(f"alpha_h must be non-negative, got {self.alpha_h}")


@dataclass
class ElementState:
    x_h: float
    x_v1: np.ndarray
    x_v2: np.ndarray

    def __post_init__(self):
        self.x_h = float(self.x_h)
        self.x_v1 = np.atleast_1d(np.asarray(self.x_v1, dtype=float)).reshape(-1)
        self.x_v2 = np.atleast_1d(np.asarray(self.x_v2, dtype=float)).reshape(-1)

    @classmethod
    def zeros(cls, f1: StateSpace, f2: StateSpace) -> "ElementState":
        return cls(0.0, np.zeros(f1.n), np.zeros(f2.n))

    @classmethod
    def from_vector(cls, x_c, n1: int) -> "ElementState":
        x_c = np.asarray(x_c, dtype=float)
        return cls(x_c[0], x_c[1:1 + n1], x_c[1 + n1:])

    def vector(self) -> np.ndarray:
        return np.concatenate([[self.x_h], self.x_v1, self.x_v2])


@dataclass(frozen=True, eq=False)
class PwlRealization:
    """Matrices of the three linear modes, indexed by :class:`Mode`."""

    A: tuple[np.ndarray, np.ndarray, np.ndarray]
    B: tuple[np.ndarray, np.ndarray, np.ndarray]
    n1: int
    n2: int

    def flow(self, mode: Mode, x_c, e: float, e_dot: float) -> np.ndarray:
        return self.A[mode] @ np.asarray(x_c, dtype=float) + self.B[mode] @ np.array([e, e_dot])


@dataclass(frozen=True, eq=False)
class FhigsElement:
    """Parameters plus the two filters: ``f1`` drives the integrator, ``f2``
    produces the switching signal ``v2``."""

    params: FhigsParams
    f1: StateSpace
    f2: StateSpace

    @property
    def nc(self) -> int:
        return 1 + self.f1.n + self.f2.n

    def zero_state(self) -> ElementState:
        return ElementState.zeros(self.f1, self.f2)

    def pwl(self) -> PwlRealization:
        return build_pwl(self.params, self.f1, self.f2)


# scalar cores shared with the simulation kernels ---------------------------

@njit(cache=True)
def boundary_tol(x_h, kv2):
    return 1e-9 * max(1.0, abs(x_h), abs(kv2))


@njit(cache=True)
def violation_core(x_h, v2, k1, k2):
    """Distance from (x_h, v2) to the sector set along the x_h axis."""
    g1 = x_h - k1 * v2
    g2 = x_h - k2 * v2
    if g1 * g2 <= 0.0:
        return 0.0
    return min(abs(g1), abs(g2))


@njit(cache=True)
def active_lines(x_h, v2, k1, k2):
    """Which sector lines the point sits on, within tolerance.

    A point outside the set is attributed to the nearer line so that stage
    evaluations of an explicit integrator, which may leave the set by a
    rounding-level amount, still see the constraint.
    """
    g1 = x_h - k1 * v2
    g2 = x_h - k2 * v2
    on1 = abs(g1) <= boundary_tol(x_h, k1 * v2)
    on2 = abs(g2) <= boundary_tol(x_h, k2 * v2)
    if g1 * g2 > 0.0:
        if abs(g1) <= abs(g2):
            on1 = True
        else:
            on2 = True
    return on1, on2


@njit(cache=True)
def line_conditions(x_h, v2, v2_dot, f_h, k1, k2):
    """Strict region conditions for the k1 and k2 gain modes."""
    on1, on2 = active_lines(x_h, v2, k1, k2)
    c1 = on1 and v2 * (k1 * v2_dot - f_h) > 0.0
    c2 = on2 and v2 * (k2 * v2_dot - f_h) < 0.0
    return c1, c2


@njit(cache=True)
def mode_core(x_h, v2, v2_dot, f_h, k1, k2):
    c1, c2 = line_conditions(x_h, v2, v2_dot, f_h, k1, k2)
    if c1 and not c2:
        return 1
    if c2 and not c1:
        return 2
    # both strict conditions at once only happen inside the tolerance band
    # around the apex; the closed region defaults to the integrator
    return 0


@njit(cache=True)
def project_on_line(f_h, v2_dot, k, sigma):
    """KKT solution on one sector line with inward orientation ``sigma``.

    The feasibility row is ``sigma * (xdot_h - k v2_dot) >= 0``; when the
    unprojected rate violates it the multiplier
    ``lam = -sigma * (f_h - k v2_dot)`` is positive and the admissible
    correction along x_h gives ``xdot_h = f_h + sigma * lam = k v2_dot``,
    returned in that form so a second projection is a no-op.
    """
    lam = -sigma * (f_h - k * v2_dot)
    if lam <= 0.0:
        return f_h
    return k * v2_dot


@njit(cache=True)
def inward(line, v2):
    """Inward orientation of sector line 1 or 2 for the sign of v2."""
    s = 1.0 if v2 > 0.0 else -1.0
    return s if line == 1 else -s


@njit(cache=True)
def project_rate_core(x_h, v2, v2_dot, f_h, k1, k2):
    """Projected x_h velocity and the line used (0 when unprojected)."""
    c1, c2 = line_conditions(x_h, v2, v2_dot, f_h, k1, k2)
    if c1 == c2:
        return f_h, 0
    line = 1 if c1 else 2
    k = k1 if c1 else k2
    return project_on_line(f_h, v2_dot, k, inward(line, v2)), line


@njit(cache=True)
def apex_mode_core(v2_dot, f_h, k1, k2):
    """Mode entered when leaving the apex x_h = v2 = 0.

    At the apex the tangent cone is the sector itself, so the admissible
    x_h rates are those between k1*v2_dot and k2*v2_dot.
    """
    r1 = k1 * v2_dot
    r2 = k2 * v2_dot
    if f_h > max(r1, r2):
        return 1 if r1 >= r2 else 2
    if f_h < min(r1, r2):
        return 1 if r1 <= r2 else 2
    return 0


# public API ----------------------------------------------------------------

def filter_signals(f1: StateSpace, f2: StateSpace, state: ElementState,
                   e: float, e_dot: float) -> tuple[float, float, float]:
    """Return ``(v1, v2, v2_dot)``."""
    _check_dims(f1, f2, state)
    v1 = f1.output(state.x_v1, e)
    v2 = f2.output(state.x_v2, e)
    v2_dot = float(f2.C @ (f2.A @ state.x_v2 + f2.B * e) + f2.D * e_dot)
    return v1, v2, v2_dot


def _check_dims(f1, f2, state):
    if state.x_v1.shape != (f1.n,) or state.x_v2.shape != (f2.n,):
        raise ValueError(
            f"state dimensions ({state.x_v1.size}, {state.x_v2.size}) do not match "
            f"filter orders ({f1.n}, {f2.n})")


def sector_violation(params: FhigsParams, x_h: float, v2: float) -> float:
    return float(violation_core(x_h, v2, params.k1, params.k2))


def unprojected_dynamics(params: FhigsParams, f1: StateSpace, f2: StateSpace,
                         state: ElementState, e: float) -> np.ndarray:
    _check_dims(f1, f2, state)
    v1 = f1.output(state.x_v1, e)
    xh_dot = -params.alpha_h * state.x_h + params.omega_h * v1
    return np.concatenate([[xh_dot], f1.derivative(state.x_v1, e), f2.derivative(state.x_v2, e)])


def _rate_inputs(params, f1, f2, state, e, e_dot):
    v1, v2, v2_dot = filter_signals(f1, f2, state, e, e_dot)
    f_h = -params.alpha_h * state.x_h + params.omega_h * v1
    return v2, v2_dot, f_h


def classify_mode(params: FhigsParams, f1: StateSpace, f2: StateSpace,
                  state: ElementState, e: float, e_dot: float) -> Mode:
    """Region of the piecewise-linear system containing ``(x_c, e, e_dot)``.

    The release test compares the line velocity with the unprojected
    integrator velocity ``-alpha_h x_h + omega_h v1``.
    """
    if params.degenerate and params.k1 == params.k2:
        raise ValueError("degenerate k1 == k2 has no region structure; use project_velocity")
    v2, v2_dot, f_h = _rate_inputs(params, f1, f2, state, e, e_dot)
    viol = sector_violation(params, state.x_h, v2)
    if viol > boundary_tol(state.x_h, max(abs(params.k1), abs(params.k2)) * v2):
        raise SectorViolation(
            f"(x_h, v2) = ({state.x_h:.6g}, {v2:.6g}) lies {viol:.3g} outside the sector")
    return Mode(int(mode_core(state.x_h, v2, v2_dot, f_h, params.k1, params.k2)))


def build_pwl(params: FhigsParams, f1: StateSpace, f2: StateSpace) -> PwlRealization:
    n1, n2 = f1.n, f2.n
    n = 1 + n1 + n2
    s1 = slice(1, 1 + n1)
    s2 = slice(1 + n1, n)

    A0 = np.zeros((n, n))
    B0 = np.zeros((n, 2))
    A0[0, 0] = -params.alpha_h
    A0[0, s1] = params.omega_h * f1.C
    A0[s1, s1] = f1.A
    A0[s2, s2] = f2.A
    B0[0, 0] = params.omega_h * f1.D
    B0[s1, 0] = f1.B
    B0[s2, 0] = f2.B

    def gain_mode(k):
        A = A0.copy()
        B = B0.copy()
        A[0, :] = 0.0
        A[0, s2] = k * (f2.C @ f2.A)
        B[0, 0] = k * float(f2.C @ f2.B)
        B[0, 1] = k * f2.D
        return A, B

    A1, B1 = gain_mode(params.k1)
    A2, B2 = gain_mode(params.k2)
    return PwlRealization((A0, A1, A2), (B0, B1, B2), n1, n2)


def projection_line(params: FhigsParams, f2: StateSpace, state: ElementState,
                    e: float, e_dot: float, unprojected) -> int:
    """Sector line (1 or 2) the projection acts on, 0 if it is inactive."""
    v2 = f2.output(state.x_v2, e)
    v2_dot = float(f2.C @ (f2.A @ state.x_v2 + f2.B * e) + f2.D * e_dot)
    return int(project_rate_core(state.x_h, v2, v2_dot, float(unprojected[0]),
                                 params.k1, params.k2)[1])


def project_velocity(params: FhigsParams, f2: StateSpace, state: ElementState,
                     e: float, e_dot: float, unprojected) -> np.ndarray:
    """Project the unprojected velocity onto the tangent cone of the sector set.

    Only the x_h entry can change (the admissible direction is the x_h axis).
    """
    out = np.array(unprojected, dtype=float)
    v2 = f2.output(state.x_v2, e)
    v2_dot = float(f2.C @ (f2.A @ state.x_v2 + f2.B * e) + f2.D * e_dot)
    if params.k1 == params.k2:
        # degenerate sector: the set is the single line x_h = k v2
        out[0] = params.k1 * v2_dot
        return out
    out[0] = project_rate_core(state.x_h, v2, v2_dot, out[0], params.k1, params.k2)[0]
    return out
