"""SISO linear time-invariant blocks: transfer functions, state-space
realizations, frequency responses and the notch filters used for lifting.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "TransferFunction",
    "StateSpace",
    "FrequencyResponse",
    "ImproperTransferFunction",
    "tf_to_ss",
    "freq_response",
    "notch",
    "lti_derivative_output",
    "identity",
    "series",
]


class ImproperTransferFunction(ValueError):
    """Raised when a transfer function has more zeros than poles."""


def _trim(coeffs) -> tuple[float, ...]:
    arr = np.atleast_1d(np.asarray(coeffs, dtype=float))
    nz = np.flatnonzero(arr)
    if nz.size == 0:
        return (0.0,)
    return tuple(float(c) for c in arr[nz[0]:])


@dataclass(frozen=True)
class TransferFunction:
    """Rational transfer function num(s)/den(s).

    Coefficients are given in descending powers of s. Leading zeros are
    stripped, so ``TransferFunction([0, 1], [1, 2])`` is ``1/(s + 2)``.
    """

    num: tuple[float, ...]
    den: tuple[float, ...]

    def __post_init__(self):
        num, den = _trim(self.num), _trim(self.den)
        if den == (0.0,):
            raise ValueError("denominator is identically zero")
        object.__setattr__(self, "num", num)
        object.__setattr__(self, "den", den)

    @property
    def order(self) -> int:
        return len(self.den) - 1

    @property
    def is_proper(self) -> bool:
        return self.num == (0.0,) or len(self.num) <= len(self.den)

    def __call__(self, s):
        return np.polyval(self.num, s) / np.polyval(self.den, s)

    def __mul__(self, other: "TransferFunction") -> "TransferFunction":
        return TransferFunction(np.polymul(self.num, other.num),
                                np.polymul(self.den, other.den))

    def inverse(self) -> "TransferFunction":
        """Swap numerator and denominator (requires a biproper filter)."""
        if len(self.num) != len(self.den):
            raise ImproperTransferFunction(
                f"only biproper filters can be inverted (num degree "
                f"{len(self.num) - 1}, den degree {len(self.den) - 1})")
        return TransferFunction(self.den, self.num)


def identity() -> TransferFunction:
    return TransferFunction((1.0,), (1.0,))


def series(*tfs: TransferFunction) -> TransferFunction:
    """Cascade of transfer functions (product)."""
    out = identity()
    for tf in tfs:
        out = out * tf
    return out


def _frozen(a, shape) -> np.ndarray:
    arr = np.array(a, dtype=float).reshape(shape)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class StateSpace:
    """Single-input single-output realization (A, B, C, D).

    ``n == 0`` is allowed and denotes a static gain ``D``.
    """

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: float = 0.0
    _n: int = field(init=False, repr=False)

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float)) if np.size(self.A) else np.zeros((0, 0))
        n = A.shape[0]
        if A.shape != (n, n):
            raise ValueError(f"A must be square, got shape {A.shape}")
        if np.size(self.B) != n or np.size(self.C) != n:
            raise ValueError(
                f"inconsistent dimensions: A is {n}x{n}, B has {np.size(self.B)} "
                f"entries, C has {np.size(self.C)} entries")
        object.__setattr__(self, "A", _frozen(A, (n, n)))
        object.__setattr__(self, "B", _frozen(self.B, (n,)))
        object.__setattr__(self, "C", _frozen(self.C, (n,)))
        object.__setattr__(self, "D", float(self.D))
        object.__setattr__(self, "_n", n)

    @property
    def n(self) -> int:
        return self._n

    @classmethod
    def gain(cls, d: float) -> "StateSpace":
        return cls(np.zeros((0, 0)), np.zeros(0), np.zeros(0), d)

    def output(self, x, u: float) -> float:
        return float(self.C @ np.asarray(x, dtype=float) + self.D * u)

    def derivative(self, x, u: float) -> np.ndarray:
        return self.A @ np.asarray(x, dtype=float) + self.B * u

    def evaluate(self, s: complex) -> complex:
        """Transfer function value C (sI - A)^-1 B + D at complex ``s``."""
        if self.n == 0:
            return complex(self.D)
        x = np.linalg.solve(s * np.eye(self.n) - self.A, self.B.astype(complex))
        return complex(self.C @ x + self.D)

    def is_hurwitz(self) -> bool:
        return self.n == 0 or bool(np.all(np.linalg.eigvals(self.A).real < 0))


@dataclass(frozen=True)
class FrequencyResponse:
    omega: float
    gain: float
    phase: float

    @property
    def value(self) -> complex:
        return self.gain * complex(math.cos(self.phase), math.sin(self.phase))


def tf_to_ss(tf: TransferFunction) -> StateSpace:
    """Controllable canonical realization with a monic denominator."""
    if not tf.is_proper:
        raise ImproperTransferFunction(
            f"transfer function is improper: numerator degree {len(tf.num) - 1} "
            f"exceeds denominator degree {len(tf.den) - 1}")
    lead = tf.den[0]
    a = np.asarray(tf.den) / lead
    b = np.asarray(tf.num) / lead
    n = len(a) - 1
    b = np.concatenate([np.zeros(n + 1 - len(b)), b])
    if n == 0:
        return StateSpace.gain(b[0])
    A = np.zeros((n, n))
    A[:-1, 1:] = np.eye(n - 1)
    A[-1, :] = -a[1:][::-1]
    B = np.zeros(n)
    B[-1] = 1.0
    C = (b[1:] - b[0] * a[1:])[::-1]
    return StateSpace(A, B, C, b[0])


def _wrap(phase: float) -> float:
    # np.angle lands in [-pi, pi]; map the closed end onto +pi
    return math.pi if phase <= -math.pi else phase


def freq_response(ss: StateSpace, omega: float) -> FrequencyResponse:
    if omega <= 0:
        raise ValueError(f"frequency must be positive, got {omega}")
    if ss.n:
        eig = np.linalg.eigvals(ss.A)
        if np.any(np.abs(eig - 1j * omega) <= 1e-12 * max(1.0, omega)):
            raise ValueError(f"pole on the imaginary axis at omega = {omega}")
    val = ss.evaluate(1j * omega)
    return FrequencyResponse(omega, abs(val), _wrap(float(np.angle(val))))


def notch(omega_n: float, beta1: float, beta2: float) -> TransferFunction:
    """Second-order notch (beta1 < beta2) or inverted notch (beta1 > beta2).

    The gain at ``omega_n`` equals ``beta1 / beta2``; DC and high-frequency
    gains are 1.
    """
    for name, val in (("omega_n", omega_n), ("beta1", beta1), ("beta2", beta2)):
        if not val > 0:
            raise ValueError(f"{name} must be positive, got {val}")
    w2 = omega_n * omega_n
    num = (1.0 / w2, 2.0 * beta1 / omega_n, 1.0)
    den = (1.0 / w2, 2.0 * beta2 / omega_n, 1.0)
    return TransferFunction(num, den)


def lti_derivative_output(ss: StateSpace, x, u: float, u_dot: float) -> tuple[float, float]:
    """Output and its time derivative: ``y = Cx + Du``, ``y' = C(Ax + Bu) + D u'``."""
    x = np.asarray(x, dtype=float)
    if x.shape != (ss.n,):
        raise ValueError(f"state has shape {x.shape}, expected ({ss.n},)")
    y = float(ss.C @ x + ss.D * u)
    y_dot = float(ss.C @ (ss.A @ x + ss.B * u) + ss.D * u_dot)
    return y, y_dot
