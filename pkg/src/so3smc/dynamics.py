"""Continuous-time plants.

Rigid-body attitude and its tracking error on SO(3) x R^3, the
quaternion-parametrized body, the reduced-order flow along the sliding
surface, and the single-axis body on the cylinder S^1 x R.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import NamedTuple

import numpy as np

from .group import GroupElement
from .so3 import exp_so3, hat, log_so3, pa, vee_pa

TWO_PI = 2.0 * math.pi


class Inertia:
    """Symmetric positive-definite inertia matrix in kg m^2.

    Caches the inverse, the spectral norm and the largest eigenvalue.
    """

    def __init__(self, J):
        J = np.array(J, dtype=float)
        if J.shape != (3, 3) or not np.all(np.isfinite(J)):
            raise ValueError("inertia must be a finite 3x3 matrix")
        if np.max(np.abs(J - J.T)) > 1e-12:
            raise ValueError("inertia must be symmetric")
        eig = np.linalg.eigvalsh(J)
        if eig[0] <= 0.0:
            raise ValueError("inertia must be positive definite")
        self.J = J
        self.J_inv = np.linalg.inv(J)
        self.lambda_max = float(eig[-1])
        self.norm2 = float(np.linalg.norm(J, 2))

    @classmethod
    def diag(cls, *moments: float) -> "Inertia":
        return cls(np.diag(moments))

    def __repr__(self):
        return f"Inertia({self.J.tolist()!r})"


BENCHMARK_INERTIA = (3.0, 4.0, 5.0)


@dataclass(frozen=True, eq=False)
class BodyState:
    R: np.ndarray
    omega: np.ndarray


class ErrorState(GroupElement):
    """Tracking error ``(R_e, omega_e)``; a point of the group SO(3) x R^3."""


@dataclass(frozen=True, eq=False)
class QuatState:
    q: np.ndarray
    omega: np.ndarray


@dataclass(frozen=True)
class CylinderState:
    theta: float
    omega: float

    def __post_init__(self):
        object.__setattr__(self, "theta", wrap_angle(self.theta))


def wrap_angle(theta: float) -> float:
    """Map ``theta`` to [0, 2 pi)."""
    w = math.fmod(theta, TWO_PI)
    if w < 0.0:
        w += TWO_PI
    # fmod of a tiny negative number can round up to exactly 2 pi
    return 0.0 if w >= TWO_PI else w


class Reference:
    """Desired angular velocity ``offset + amplitude * sin(freq * t + phase)``.

    All four parameters are channelwise 3-vectors. The desired attitude is
    not stored; simulators integrate ``dR_d/dt = R_d hat(omega_d)`` from
    ``R_d0`` alongside the plant.
    """

    def __init__(self, offset=(0.0, 0.0, 0.0), amplitude=(0.0, 0.0, 0.0),
                 freq=(0.0, 0.0, 0.0), phase=(0.0, 0.0, 0.0), R_d0=None):
        self.offset = np.asarray(offset, dtype=float)
        self.amplitude = np.asarray(amplitude, dtype=float)
        self.freq = np.asarray(freq, dtype=float)
        self.phase = np.asarray(phase, dtype=float)
        self.R_d0 = np.eye(3) if R_d0 is None else np.asarray(R_d0, dtype=float)
        for name in ("offset", "amplitude", "freq", "phase"):
            if getattr(self, name).shape != (3,):
                raise ValueError(f"reference {name} must have 3 entries")
        self.check_derivative()

    def omega_d(self, t: float) -> np.ndarray:
        return self.offset + self.amplitude * np.sin(self.freq * t + self.phase)

    def omega_d_dot(self, t: float) -> np.ndarray:
        return self.amplitude * self.freq * np.cos(self.freq * t + self.phase)

    @property
    def is_static(self) -> bool:
        return not (np.any(self.offset) or np.any(self.amplitude))

    def check_derivative(self, samples=None, h: float = 1e-5, tol: float = 1e-4):
        """Compare ``omega_d_dot`` against central differences of ``omega_d``."""
        ts = np.linspace(0.0, 10.0, 21) if samples is None else samples
        for t in ts:
            fd = (self.omega_d(t + h) - self.omega_d(t - h)) / (2 * h)
            if np.max(np.abs(fd - self.omega_d_dot(t))) > tol:
                raise ValueError(f"reference derivative inconsistent at t={t:g}")

    @classmethod
    def regulation(cls, R_d=None) -> "Reference":
        return cls(R_d0=R_d)


def body_deriv(s: BodyState, J: Inertia, u, d):
    """``(R hat(omega), J^-1((J omega) x omega + u + d))``."""
    w = s.omega
    return s.R @ hat(w), euler_rate(w, J, u, d)


def euler_rate(w, J: Inertia, u, d) -> np.ndarray:
    return J.J_inv @ (np.cross(J.J @ w, w) + u + d)


def error_state(s: BodyState, ref_R, ref_omega) -> ErrorState:
    R_e = ref_R.T @ s.R
    return ErrorState(R_e, s.omega - R_e.T @ ref_omega)


def body_from_error(e: ErrorState, ref_R, ref_omega) -> BodyState:
    return BodyState(ref_R @ e.R, e.omega + e.R.T @ ref_omega)


def error_deriv(e: ErrorState, omega, J: Inertia, v, d):
    """Error dynamics after feedforward; ``omega`` is the full body rate."""
    return e.R @ hat(e.omega), euler_rate(np.asarray(omega, dtype=float), J, v, d)


def feedforward(e: ErrorState, ref_omega, ref_omega_dot, J: Inertia, v) -> np.ndarray:
    """Body torque ``u`` turning the error dynamics into ``J dw_e = (Jw) x w + v + d``."""
    Rw = e.R @ e.omega
    return -J.J @ (e.R.T @ (np.cross(Rw, ref_omega) - ref_omega_dot)) + v


def reduced_deriv(R_e) -> np.ndarray:
    """Reduced-order flow ``-R_e pa(R_e)`` along the sliding surface."""
    return -R_e @ pa(R_e)


def reduced_step(R_e, dt: float) -> np.ndarray:
    """One step of the reduced flow as ``R_e exp(dt * w_bar)``.

    ``w_bar`` is the RK4 combination of the body rates ``-vee(pa(R))`` at
    the stages; the rotation axis is preserved by the flow, so this matches
    classical RK4 on the angle. ``R_e`` may be a stack ``(N, 3, 3)``.
    """
    R_e = np.asarray(R_e, dtype=float)
    k1 = -vee_pa(R_e)
    k2 = -vee_pa(R_e @ exp_so3(0.5 * dt * k1))
    k3 = -vee_pa(R_e @ exp_so3(0.5 * dt * k2))
    k4 = -vee_pa(R_e @ exp_so3(dt * k3))
    return R_e @ exp_so3(dt * (k1 + 2 * k2 + 2 * k3 + k4) / 6.0)


def integrate_reduced(R0, T: float, dt: float, stride: int = 1):
    """Integrate the reduced flow; returns sample times and rotations.

    With a stack of ``N`` initial rotations the result has shape
    ``(n_samples, N, 3, 3)``.
    """
    n = int(round(T / dt))
    R = np.asarray(R0, dtype=float)
    ts, Rs = [0.0], [R]
    for k in range(1, n + 1):
        R = reduced_step(R, dt)
        if k % stride == 0 or k == n:
            ts.append(k * dt)
            Rs.append(R)
    return np.array(ts), np.array(Rs)


def quat_deriv(s: QuatState, J: Inertia, u, d):
    """Returns ``(dq0, dq_v, domega)`` of the quaternion-parametrized body."""
    q0, qv, w = s.q[0], s.q[1:], s.omega
    dq0 = -0.5 * float(qv @ w)
    dqv = 0.5 * (q0 * w + np.cross(qv, w))
    return dq0, dqv, euler_rate(w, J, u, d)


def cylinder_deriv(s: CylinderState, u: float):
    return s.omega, u


class EquilibriumKind(Enum):
    IDENTITY = "identity"
    HALF_TURN = "half_turn"
    NOT_EQUILIBRIUM = "not_equilibrium"


class Equilibrium(NamedTuple):
    kind: EquilibriumKind
    axis: np.ndarray | None = None


def classify_reduced_equilibrium(R_e, tol: float = 1e-9) -> Equilibrium:
    """Classify ``R_e`` against the equilibria ``{I} U {-I + 2 eta eta^T}``."""
    R_e = np.asarray(R_e, dtype=float)
    if np.linalg.norm(R_e - np.eye(3)) <= tol:
        return Equilibrium(EquilibriumKind.IDENTITY)
    if np.trace(R_e) <= -1.0 + tol:
        return Equilibrium(EquilibriumKind.HALF_TURN, log_so3(R_e).axis)
    return Equilibrium(EquilibriumKind.NOT_EQUILIBRIUM)


def attitude_lyapunov(R_e) -> float:
    """``tr(I - R_e) / 2``, evaluated as ``|R_e - I|_F^2 / 4``.

    The two agree on SO(3); the squared-norm form keeps relative accuracy
    when ``R_e`` is close to the identity.
    """
    D = np.asarray(R_e) - np.eye(3)
    V = 0.25 * np.sum(D * D, axis=(-2, -1))
    return float(V) if V.ndim == 0 else V
