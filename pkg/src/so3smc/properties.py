"""Batch checks of the algebraic and dynamical invariants.

Each suite returns the largest residual it saw together with the tolerance
it is held to. Informational suites report a number without a verdict.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .dynamics import (
    BENCHMARK_INERTIA,
    Inertia,
    attitude_lyapunov,
    euler_rate,
    integrate_reduced,
)
from .group import (
    GroupElement,
    associativity_defect,
    group_inv,
    group_mul,
    identity,
    on_surface_element,
    random_element,
    sigma,
    sl_closure_check,
)
from .so3 import hat, inner, ps, random_rotation, rodrigues, vee_pa


@dataclass
class SuiteResult:
    name: str
    samples: int
    max_residual: float
    tolerance: float | None
    passed: bool | None

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "SuiteResult":
        return cls(**d)


def _result(name, n, residuals, tol):
    worst = float(max(residuals)) if len(residuals) else 0.0
    return SuiteResult(name, n, worst, tol, None if tol is None else worst <= tol)


def _elem_gap(a: GroupElement, b: GroupElement) -> float:
    return float(max(np.max(np.abs(a.R - b.R)), np.max(np.abs(a.omega - b.omega))))


def group_identity_suite(rng, n: int) -> SuiteResult:
    e = identity()
    res = []
    for _ in range(n):
        a = random_element(rng)
        res.append(max(_elem_gap(group_mul(e, a), a), _elem_gap(group_mul(a, e), a)))
    return _result("group_identity", n, res, 1e-12)


def group_inverse_suite(rng, n: int) -> SuiteResult:
    e = identity()
    res = []
    for _ in range(n):
        a = random_element(rng)
        ai = group_inv(a)
        res.append(max(_elem_gap(group_mul(ai, a), e), _elem_gap(group_mul(a, ai), e)))
    return _result("group_inverse", n, res, 1e-9)


def sl_closure_suite(rng, n: int) -> SuiteResult:
    res = []
    for _ in range(n):
        a = on_surface_element(random_rotation(rng))
        b = on_surface_element(random_rotation(rng))
        res.append(float(np.linalg.norm(sl_closure_check(a, b))))
    return _result("sl_closure_product", n, res, 1e-8)


def sl_inverse_suite(rng, n: int) -> SuiteResult:
    res = []
    for _ in range(n):
        a = on_surface_element(random_rotation(rng))
        res.append(float(np.linalg.norm(sigma(group_inv(a)))))
    return _result("sl_closure_inverse", n, res, 1e-12)


def sigma_inversion_suite(rng, n: int) -> SuiteResult:
    res = []
    for _ in range(n):
        a = random_element(rng)
        res.append(float(np.max(np.abs(sigma(group_inv(a)) + sigma(a)))))
    return _result("sigma_inversion", n, res, 1e-12)


def associativity_suite(rng, n: int) -> SuiteResult:
    """Informational: the product is not assumed associative."""
    res = [
        associativity_defect(random_element(rng), random_element(rng), random_element(rng))
        for _ in range(n)
    ]
    return _result("associativity_defect", n, res, None)


def kernel_identity_suite(rng, n: int) -> SuiteResult:
    """Conjugation of ``hat``, the 1/2 inner-product identity, orthogonality
    of symmetric and skew matrices, and the trace of Rodrigues' formula."""
    res = []
    for _ in range(n):
        R = random_rotation(rng)
        v, w = rng.uniform(-2.0, 2.0, 3), rng.uniform(-2.0, 2.0, 3)
        A = ps(rng.standard_normal((3, 3)))
        axis = rng.standard_normal(3)
        axis /= np.linalg.norm(axis)
        theta = rng.uniform(0.0, math.pi)
        res.append(
            max(
                float(np.max(np.abs(hat(R @ v) - R @ hat(v) @ R.T))),
                abs(float(v @ w) - 0.5 * inner(hat(v), hat(w))),
                abs(inner(A, hat(v))),
                abs(float(np.trace(rodrigues(axis, theta))) - (1.0 + 2.0 * math.cos(theta))),
            )
        )
    return _result("kernel_identities", n, res, 1e-12)


def reaching_bounds_suite(rng, n: int, J: Inertia | None = None) -> SuiteResult:
    """``|(Jw) x w| <= |J|_2 |w|^2`` and ``|vee(pa(R hat(w)))| <= |w|``.

    The second vector equals ``(tr(R) I - R^T) w / 2``, checked as well. Its
    norm reaches ``|w|`` only at ``R = I``, so only the bound is asserted.
    """
    J = J or Inertia.diag(*BENCHMARK_INERTIA)
    res = []
    for _ in range(n):
        w = rng.uniform(-2.0, 2.0, 3)
        R = random_rotation(rng)
        x = vee_pa(R @ hat(w))
        closed = 0.5 * (np.trace(R) * w - R.T @ w)
        res.append(
            max(
                float(np.linalg.norm(np.cross(J.J @ w, w))) - J.norm2 * float(w @ w),
                float(np.linalg.norm(x)) - float(np.linalg.norm(w)),
                float(np.max(np.abs(x - closed))),
                0.0,
            )
        )
    return _result("reaching_bounds", n, res, 1e-12)


def random_flow_starts(rng, n: int, trace_floor: float = -1.0 + 1e-6) -> np.ndarray:
    """``n`` uniform rotations, skipping those within the half-turn band."""
    out = []
    while len(out) < n:
        R = random_rotation(rng)
        if np.trace(R) > trace_floor:
            out.append(R)
    return np.array(out).reshape(n, 3, 3)


def lyapunov_suites(rng, n: int, T: float = 20.0, dt: float = 1e-3) -> tuple:
    """Reduced flow from ``n`` random starts.

    Returns two results: the largest increase of ``V_R`` between output
    samples (held to 0) and the largest ``V_R`` at time ``T`` (held to 1e-4).
    """
    if n == 0:
        return (
            SuiteResult("lyapunov_monotone", 0, 0.0, 0.0, True),
            SuiteResult("lyapunov_terminal", 0, 0.0, 1e-4, True),
        )
    _, Rs = integrate_reduced(random_flow_starts(rng, n), T, dt, stride=10)
    V = attitude_lyapunov(Rs)  # (samples, n)
    increase = max(float(np.max(np.diff(V, axis=0))), 0.0)
    return (
        SuiteResult("lyapunov_monotone", n, increase, 0.0, increase <= 0.0),
        _result("lyapunov_terminal", n, V[-1], 1e-4),
    )


def free_body_trajectory(w0, J: Inertia, T: float, dt: float) -> np.ndarray:
    """RK4 on torque-free Euler equations; returns the rate history."""
    n = int(round(T / dt))
    zero = np.zeros(3)
    w = np.asarray(w0, dtype=float)
    out = [w]
    for _ in range(n):
        k1 = euler_rate(w, J, zero, zero)
        k2 = euler_rate(w + 0.5 * dt * k1, J, zero, zero)
        k3 = euler_rate(w + 0.5 * dt * k2, J, zero, zero)
        k4 = euler_rate(w + dt * k3, J, zero, zero)
        w = w + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        out.append(w)
    return np.array(out)


def conservation_suite(rng, n: int, J: Inertia | None = None, T: float = 10.0, dt: float = 1e-3) -> SuiteResult:
    """Relative drift of kinetic energy and of ``|J w|`` for the free body."""
    J = J or Inertia.diag(*BENCHMARK_INERTIA)
    res = []
    for _ in range(n):
        ws = free_body_trajectory(rng.uniform(-2.0, 2.0, 3), J, T, dt)
        energy = 0.5 * np.einsum("ni,ij,nj->n", ws, J.J, ws)
        momentum = np.linalg.norm(ws @ J.J, axis=1)
        res.append(max(
            float(np.max(np.abs(energy - energy[0]))) / energy[0],
            float(np.max(np.abs(momentum - momentum[0]))) / momentum[0],
        ))
    return _result("free_body_conservation", n, res, 1e-6)


def run_all(seed: int, samples: int, flow_samples: int = 20, flow_T: float = 20.0,
            flow_dt: float = 1e-3) -> list:
    """Every suite with its own generator derived from ``seed``."""
    if samples == 0:
        return []
    seeds = np.random.SeedSequence(seed).spawn(10)
    rngs = [np.random.default_rng(s) for s in seeds]
    n_dyn = max(1, samples // 100)
    return [
        group_identity_suite(rngs[0], samples),
        group_inverse_suite(rngs[1], samples),
        sl_closure_suite(rngs[2], samples),
        sl_inverse_suite(rngs[3], samples),
        sigma_inversion_suite(rngs[4], samples),
        associativity_suite(rngs[5], samples),
        kernel_identity_suite(rngs[6], samples),
        reaching_bounds_suite(rngs[7], samples),
        *lyapunov_suites(rngs[8], flow_samples, flow_T, flow_dt),
        conservation_suite(rngs[9], n_dyn),
    ]
