"""Lie group structure on SO(3) x R^3 and the sliding subgroup.

The product of ``(R1, w1)`` and ``(R2, w2)`` is ``(R1 R2, w3)`` with

    hat(w3) = pa(R1 hat(w2) + R2^T hat(w1) - [R1, R2^T] / 2)

and the sliding variable ``sigma(R, w) = w + vee(pa(R))`` vanishes on a
subgroup of this product.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .so3 import DomainError, bracket, hat, vee_pa, random_rotation

ALGEBRAIC_SIGMA_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class GroupElement:
    """Pair ``(R, omega)`` in SO(3) x R^3."""

    R: np.ndarray
    omega: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "R", np.asarray(self.R, dtype=float))
        object.__setattr__(self, "omega", np.asarray(self.omega, dtype=float))


@dataclass(frozen=True)
class SlidingTolerance:
    eps_sigma: float = ALGEBRAIC_SIGMA_TOL

    def __post_init__(self):
        if not self.eps_sigma >= 0.0:
            raise ValueError("eps_sigma must be nonnegative")


def identity() -> GroupElement:
    return GroupElement(np.eye(3), np.zeros(3))


def group_mul(a: GroupElement, b: GroupElement) -> GroupElement:
    R1, R2 = a.R, b.R
    M = R1 @ hat(b.omega) + R2.T @ hat(a.omega) - 0.5 * bracket(R1, R2.T)
    return GroupElement(R1 @ R2, vee_pa(M))


def group_inv(a: GroupElement) -> GroupElement:
    return GroupElement(a.R.T.copy(), -a.omega)


def sigma(e: GroupElement) -> np.ndarray:
    """Sliding variable ``omega + vee(pa(R))``."""
    return e.omega + vee_pa(e.R)


def on_sliding_surface(e: GroupElement, tol: SlidingTolerance = SlidingTolerance()) -> bool:
    return bool(np.linalg.norm(sigma(e)) <= tol.eps_sigma)


def sl_closure_check(a: GroupElement, b: GroupElement) -> np.ndarray:
    """Sliding variable of ``a * b`` for ``a`` and ``b`` on the sliding surface.

    Returns the residual vector so callers can report its size; it is zero
    in exact arithmetic.

    Raises
    ------
    DomainError
        If either factor is off the surface by more than 1e-9.
    """
    for name, g in (("a", a), ("b", b)):
        if np.linalg.norm(sigma(g)) > ALGEBRAIC_SIGMA_TOL:
            raise DomainError(f"sl_closure_check: {name} is not on the sliding surface")
    return sigma(group_mul(a, b))


def on_surface_element(R: np.ndarray) -> GroupElement:
    """The unique point of the sliding surface above the rotation ``R``."""
    return GroupElement(R, -vee_pa(R))


def random_element(rng: np.random.Generator, omega_max: float = 2.0) -> GroupElement:
    return GroupElement(random_rotation(rng), rng.uniform(-omega_max, omega_max, 3))


def associativity_defect(a: GroupElement, b: GroupElement, c: GroupElement) -> float:
    """Largest entry-wise gap between ``(ab)c`` and ``a(bc)``."""
    left = group_mul(group_mul(a, b), c)
    right = group_mul(a, group_mul(b, c))
    return float(
        max(np.max(np.abs(left.R - right.R)), np.max(np.abs(left.omega - right.omega)))
    )
