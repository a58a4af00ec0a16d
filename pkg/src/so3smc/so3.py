"""Matrix algebra on SO(3).

Vectors are ``(3,)`` float arrays, matrices ``(3, 3)`` float arrays and unit
quaternions ``(4,)`` arrays in scalar-first order ``(q0, q1, q2, q3)``.
"""

from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np

SKEW_TOL = 1e-9
ROTATION_TOL = 1e-9


class DomainError(ValueError):
    """Input lies outside the domain of an operator."""


class AxisAngle(NamedTuple):
    """Rotation by ``angle`` in [0, pi] about the unit vector ``axis``."""

    axis: np.ndarray
    angle: float


def hat(v) -> np.ndarray:
    """Skew-symmetric matrix ``v^x`` such that ``hat(v) @ w == cross(v, w)``.

    Accepts a single vector or a stack of shape ``(..., 3)``.
    """
    v = np.asarray(v, dtype=float)
    X = np.zeros(v.shape[:-1] + (3, 3))
    X[..., 0, 1] = -v[..., 2]
    X[..., 0, 2] = v[..., 1]
    X[..., 1, 0] = v[..., 2]
    X[..., 1, 2] = -v[..., 0]
    X[..., 2, 0] = -v[..., 1]
    X[..., 2, 1] = v[..., 0]
    return X


def vee(X: np.ndarray, tol: float = SKEW_TOL) -> np.ndarray:
    """Inverse of :func:`hat`.

    Raises
    ------
    DomainError
        If ``X`` is not skew-symmetric within ``tol`` (Frobenius).
    """
    X = np.asarray(X, dtype=float)
    if np.linalg.norm(X + X.T) > tol:
        raise DomainError("vee: matrix is not skew-symmetric")
    return np.array([X[2, 1], X[0, 2], X[1, 0]])


def pa(A: np.ndarray) -> np.ndarray:
    """Antisymmetric part ``(A - A^T) / 2``."""
    return 0.5 * (A - A.T)


def ps(A: np.ndarray) -> np.ndarray:
    """Symmetric part ``(A + A^T) / 2``."""
    return 0.5 * (A + A.T)


def vee_pa(A: np.ndarray) -> np.ndarray:
    """``vee(pa(A))`` without the skew check; works on stacks ``(..., 3, 3)``."""
    return 0.5 * np.stack(
        (A[..., 2, 1] - A[..., 1, 2], A[..., 0, 2] - A[..., 2, 0], A[..., 1, 0] - A[..., 0, 1]),
        axis=-1,
    )


def inner(A: np.ndarray, B: np.ndarray) -> float:
    """Trace inner product ``tr(A^T B)``."""
    return float(np.sum(A * B))


def bracket(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Matrix commutator ``AB - BA``."""
    return A @ B - B @ A


def rodrigues(axis, angle: float) -> np.ndarray:
    """Rotation matrix for a rotation of ``angle`` radians about unit ``axis``."""
    K = hat(axis)
    return np.eye(3) + math.sin(angle) * K + (1.0 - math.cos(angle)) * (K @ K)


def exp_so3(phi) -> np.ndarray:
    """Exponential of ``hat(phi)``; identity for a zero vector.

    A stack ``(..., 3)`` of rotation vectors gives a stack of rotations.
    """
    phi = np.asarray(phi, dtype=float)
    if phi.ndim == 1:
        angle = math.sqrt(float(phi @ phi))
        if angle == 0.0:
            return np.eye(3)
        return rodrigues(phi / angle, angle)
    angle = np.linalg.norm(phi, axis=-1)[..., None, None]
    safe = np.where(angle > 0.0, angle, 1.0)
    a = np.where(angle > 0.0, np.sin(safe) / safe, 1.0)
    b = np.where(angle > 0.0, (1.0 - np.cos(safe)) / safe**2, 0.5)
    K = hat(phi)
    return np.eye(3) + a * K + b * (K @ K)


def _first_nonzero_positive(v: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    for c in v:
        if abs(c) > tol:
            return v if c > 0 else -v
    return v


def log_so3(R: np.ndarray) -> AxisAngle:
    """Axis-angle of a rotation with the angle in [0, pi].

    The identity maps to axis ``(1, 0, 0)``. Near a half turn the axis is
    read off the symmetric part ``(R + I) / 2 = eta eta^T`` and its sign is
    fixed so the first nonzero component is positive.
    """
    R = np.asarray(R, dtype=float)
    c = min(1.0, max(-1.0, 0.5 * (np.trace(R) - 1.0)))
    w = vee_pa(R)  # sin(angle) * axis
    s = float(np.linalg.norm(w))
    angle = math.atan2(s, c)
    if angle < 1e-12:
        return AxisAngle(np.array([1.0, 0.0, 0.0]), 0.0)
    if c > -0.5:
        return AxisAngle(w / s, angle)
    # sin(angle) is small; use the symmetric part instead
    B = 0.5 * (R + R.T) - c * np.eye(3)  # (1 - c) eta eta^T
    col = B[:, int(np.argmax(np.diag(B)))]
    axis = col / np.linalg.norm(col)
    if s > 1e-12:
        axis = axis if axis @ w >= 0 else -axis
    else:
        axis = _first_nonzero_positive(axis)
    return AxisAngle(axis, angle)


def quat_to_rot(q) -> np.ndarray:
    """Rotation matrix of the unit quaternion ``(q0, q1, q2, q3)``.

    Invariant under ``q -> -q``.
    """
    q0, q1, q2, q3 = q
    return np.array(
        [
            [1 - 2 * (q2 * q2 + q3 * q3), 2 * (q1 * q2 - q0 * q3), 2 * (q1 * q3 + q0 * q2)],
            [2 * (q1 * q2 + q0 * q3), 1 - 2 * (q1 * q1 + q3 * q3), 2 * (q2 * q3 - q0 * q1)],
            [2 * (q1 * q3 - q0 * q2), 2 * (q2 * q3 + q0 * q1), 1 - 2 * (q1 * q1 + q2 * q2)],
        ]
    )


def rot_to_quat(R: np.ndarray) -> np.ndarray:
    """Unit quaternion of ``R`` with ``q0 >= 0``.

    When ``q0 == 0`` the first nonzero vector component is made positive.
    Uses the largest-diagonal branch (Shepperd) for stability.
    """
    R = np.asarray(R, dtype=float)
    tr = np.trace(R)
    diag = (tr, R[0, 0], R[1, 1], R[2, 2])
    k = int(np.argmax(diag))
    if k == 0:
        s = 2.0 * math.sqrt(max(0.0, 1.0 + tr))
        q = np.array([0.25 * s, (R[2, 1] - R[1, 2]) / s, (R[0, 2] - R[2, 0]) / s, (R[1, 0] - R[0, 1]) / s])
    elif k == 1:
        s = 2.0 * math.sqrt(max(0.0, 1.0 + R[0, 0] - R[1, 1] - R[2, 2]))
        q = np.array([(R[2, 1] - R[1, 2]) / s, 0.25 * s, (R[0, 1] + R[1, 0]) / s, (R[0, 2] + R[2, 0]) / s])
    elif k == 2:
        s = 2.0 * math.sqrt(max(0.0, 1.0 - R[0, 0] + R[1, 1] - R[2, 2]))
        q = np.array([(R[0, 2] - R[2, 0]) / s, (R[0, 1] + R[1, 0]) / s, 0.25 * s, (R[1, 2] + R[2, 1]) / s])
    else:
        s = 2.0 * math.sqrt(max(0.0, 1.0 - R[0, 0] - R[1, 1] + R[2, 2]))
        q = np.array([(R[1, 0] - R[0, 1]) / s, (R[0, 2] + R[2, 0]) / s, (R[1, 2] + R[2, 1]) / s, 0.25 * s])
    q /= np.linalg.norm(q)
    if q[0] < 0.0:
        q = -q
    elif q[0] == 0.0:
        q[1:] = _first_nonzero_positive(q[1:], tol=0.0)
    return q


def is_rotation(R: np.ndarray, tol: float = ROTATION_TOL) -> bool:
    R = np.asarray(R, dtype=float)
    if R.shape != (3, 3) or not np.all(np.isfinite(R)):
        return False
    return bool(
        np.linalg.norm(R @ R.T - np.eye(3)) <= tol and abs(np.linalg.det(R) - 1.0) <= tol
    )


def project_to_so3(A: np.ndarray) -> np.ndarray:
    """Nearest rotation to ``A`` in Frobenius norm (orthogonal polar factor).

    Raises
    ------
    DomainError
        If ``A`` is singular or has a non-positive determinant.
    """
    A = np.asarray(A, dtype=float)
    if not np.all(np.isfinite(A)) or np.linalg.det(A) <= 0.0:
        raise DomainError("project_to_so3: input must have positive determinant")
    U, s, Vt = np.linalg.svd(A)
    if s[-1] <= 1e-12 * s[0]:
        raise DomainError("project_to_so3: input is numerically singular")
    return U @ Vt


def random_rotation(rng: np.random.Generator) -> np.ndarray:
    """Uniformly distributed rotation from a normalized Gaussian quaternion."""
    q = rng.standard_normal(4)
    return quat_to_rot(q / np.linalg.norm(q))
