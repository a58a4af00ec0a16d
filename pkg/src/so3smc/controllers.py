"""Sliding-mode control laws and Lyapunov diagnostics."""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import NamedTuple

import numpy as np

from .dynamics import ErrorState, Inertia, attitude_lyapunov
from .group import sigma

# |sigma| at or below this counts as zero in the S^1 switching law, so
# that rounding residue such as sin(pi) = 1.2e-16 does not switch.
SIGN_DEADZONE = 1e-12

# slack on the gain inequalities; absorbs rounding in e.g. 1.8 - sqrt(3)
_GAIN_SLACK = 1e-12


class GainError(ValueError):
    """Gain settings that violate the reaching condition."""


@dataclass(frozen=True)
class SmcConfig:
    """Gains of ``K = c_w2 |w|^2 + c_we |w_e| + k_0`` for the SO(3) reaching law.

    ``delta`` is the reaching margin and ``d_bar`` the disturbance bound.
    ``check_inertia`` must be called against the plant before use; the
    simulators do so.
    """

    delta: float
    d_bar: float
    c_omega2: float
    c_omega_e: float
    k_0: float
    eps_layer: float = 1e-3

    def __post_init__(self):
        if not self.delta > 0.0:
            raise GainError("delta must be > 0")
        if not self.d_bar >= 0.0:
            raise GainError("d_bar must be >= 0")
        if not self.eps_layer >= 0.0:
            raise GainError("eps_layer must be >= 0")
        if self.c_omega_e < 1.0 - _GAIN_SLACK:
            raise GainError(f"gain violates c_omega_e >= 1 (c_omega_e = {self.c_omega_e})")
        if self.k_0 < self.d_bar + self.delta - _GAIN_SLACK:
            raise GainError(
                f"gain violates k_0 >= d_bar + delta ({self.k_0} < {self.d_bar} + {self.delta})"
            )

    def check_inertia(self, J: Inertia) -> None:
        if self.c_omega2 < J.norm2 - _GAIN_SLACK:
            raise GainError(
                f"gain violates c_omega2 >= ||J||_2 ({self.c_omega2} < {J.norm2})"
            )

    @classmethod
    def benchmark(cls, d_bar: float = math.sqrt(3.0), eps_layer: float = 1e-3) -> "SmcConfig":
        """``K = 7 |w|^2 + 2 |w_e| + 1.8`` with the margin left by ``d_bar``."""
        return cls(
            delta=1.8 - d_bar, d_bar=d_bar, c_omega2=7.0, c_omega_e=2.0, k_0=1.8,
            eps_layer=eps_layer,
        )


@dataclass(frozen=True)
class QuatSmcConfig:
    k_q: float = 5.0
    eps_layer: float = 1e-3

    def __post_init__(self):
        if not self.k_q > 0.0:
            raise GainError("k_q must be > 0")
        if not self.eps_layer >= 0.0:
            raise GainError("eps_layer must be >= 0")


class LyapunovReadout(NamedTuple):
    V_R: float
    V_sigma: float


def unit_switch(s: np.ndarray, gain: float, eps_layer: float) -> np.ndarray:
    """``-gain * s / |s|`` outside the layer, ``-gain * s / eps`` inside.

    With ``eps_layer == 0`` the zero vector is returned at ``s == 0``.
    """
    n = math.sqrt(float(s @ s))
    if n > eps_layer:
        return (-gain / n) * s
    if eps_layer == 0.0:
        return np.zeros(3)
    return (-gain / eps_layer) * s


def gain_k(omega, omega_e, cfg: SmcConfig) -> float:
    return (
        cfg.c_omega2 * float(omega @ omega)
        + cfg.c_omega_e * math.sqrt(float(omega_e @ omega_e))
        + cfg.k_0
    )


def smc_so3(e: ErrorState, omega, cfg: SmcConfig) -> np.ndarray:
    """Reaching law ``v = -K(w_e, w) sigma / |sigma|`` on the SO(3) error."""
    omega = np.asarray(omega, dtype=float)
    return unit_switch(sigma(e), gain_k(omega, e.omega, cfg), cfg.eps_layer)


def quat_sigma(q, omega) -> np.ndarray:
    return np.asarray(q[1:], dtype=float) + omega


def smc_quat(q, omega, cfg: QuatSmcConfig) -> np.ndarray:
    """Quaternion baseline ``u = -k_q s / |s|`` with ``s = q_v + w``."""
    return unit_switch(quat_sigma(q, np.asarray(omega, dtype=float)), cfg.k_q, cfg.eps_layer)


class S1Variant(str, Enum):
    STANDARD = "standard"
    WRAPPED = "wrapped"
    SMOOTH = "smooth"


def s1_sigma(theta: float, omega: float, variant: S1Variant) -> float:
    """Sliding variable on the cylinder.

    ``standard``: ``w + theta``; ``wrapped``: ``w - pi + (theta - pi) mod 2pi``
    (jumps by 2 pi at ``theta = pi``); ``smooth``: ``w + pi sin(theta)``.
    """
    variant = S1Variant(variant)
    if variant is S1Variant.STANDARD:
        return omega + theta
    if variant is S1Variant.WRAPPED:
        return omega - math.pi + (theta - math.pi) % (2.0 * math.pi)
    return omega + math.pi * math.sin(theta)


def sgn(x: float, deadzone: float = SIGN_DEADZONE) -> float:
    if abs(x) <= deadzone:
        return 0.0
    return 1.0 if x > 0 else -1.0


def s1_control(theta: float, omega: float, variant: S1Variant) -> float:
    """``u = -(|w| + 1) sgn(sigma)`` with ``sgn(0) = 0``."""
    return -(abs(omega) + 1.0) * sgn(s1_sigma(theta, omega, variant))


def lyapunov_readout(e: ErrorState, J: Inertia) -> LyapunovReadout:
    s = sigma(e)
    return LyapunovReadout(attitude_lyapunov(e.R), 0.5 * float(s @ J.J @ s))


def reach_time_bound(V_sigma0: float, J: Inertia, delta: float) -> float:
    """Time at which ``dV/dt = -delta sqrt(V / lambda_max)`` reaches zero from ``V_sigma0``."""
    if not delta > 0.0:
        raise ValueError("delta must be > 0")
    return 2.0 * math.sqrt(J.lambda_max * V_sigma0) / delta
