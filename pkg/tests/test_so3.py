import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from so3smc.so3 import (
    DomainError,
    hat,
    inner,
    is_rotation,
    log_so3,
    pa,
    project_to_so3,
    ps,
    quat_to_rot,
    random_rotation,
    rodrigues,
    rot_to_quat,
    vee,
    exp_so3,
)

from conftest import rotations, vec3

E1, E2, E3 = np.eye(3)


def test_hat_examples():
    assert np.array_equal(hat([0, 0, 0]), np.zeros((3, 3)))
    assert np.array_equal(hat([0, 0, 1]), [[0, -1, 0], [1, 0, 0], [0, 0, 0]])
    assert np.array_equal(hat([1, 2, 3]), [[0, -3, 2], [3, 0, -1], [-2, 1, 0]])


def test_hat_is_cross_product():
    v, w = np.array([1.0, -2.0, 0.5]), np.array([0.3, 0.7, -1.1])
    np.testing.assert_allclose(hat(v) @ w, np.cross(v, w), atol=1e-15)


def test_hat_batch():
    vs = np.arange(12.0).reshape(4, 3)
    H = hat(vs)
    assert H.shape == (4, 3, 3)
    for v, X in zip(vs, H):
        assert np.array_equal(X, hat(v))


def test_vee_examples():
    assert np.array_equal(vee(hat([1, 2, 3])), [1, 2, 3])
    assert np.array_equal(vee(np.zeros((3, 3))), [0, 0, 0])
    assert np.array_equal(vee(hat([-4, 0, 5])), [-4, 0, 5])


def test_vee_rejects_non_skew():
    with pytest.raises(DomainError):
        vee(np.eye(3))
    # just inside tolerance is accepted
    X = hat([1, 2, 3])
    X[0, 1] += 1e-10
    vee(X)


@given(vec3)
def test_vee_hat_exact(v):
    assert np.array_equal(vee(hat(v)), v)


def test_projector_examples():
    I = np.eye(3)
    assert np.array_equal(pa(I), np.zeros((3, 3)))
    assert np.array_equal(ps(I), I)
    X = hat([1.0, -2.0, 3.0])
    assert np.array_equal(pa(X), X)
    assert np.array_equal(ps(X), np.zeros((3, 3)))
    A = np.array([[1.0, 2, 0], [0, 1, 0], [0, 0, 1]])
    assert np.array_equal(pa(A), [[0, 1, 0], [-1, 0, 0], [0, 0, 0]])
    np.testing.assert_array_equal(pa(A) + ps(A), A)


def test_inner_examples(rng):
    assert inner(np.eye(3), np.eye(3)) == 3.0
    assert inner(hat(E1), hat(E1)) == 2.0
    A = ps(rng.standard_normal((3, 3)))
    assert abs(inner(A, hat(rng.standard_normal(3)))) <= 1e-12


@settings(max_examples=200)
@given(rotations(), vec3, vec3)
def test_kernel_identities(R, v, w):
    np.testing.assert_allclose(hat(R @ v), R @ hat(v) @ R.T, atol=1e-12 * (1 + np.abs(v).max()))
    assert abs(inner(hat(v), hat(w)) - 2.0 * (v @ w)) <= 1e-12 * (1 + np.abs(v).max() * np.abs(w).max())


def test_rodrigues_examples():
    for axis in (E1, E2, np.array([0.6, 0.0, 0.8])):
        np.testing.assert_array_equal(rodrigues(axis, 0.0), np.eye(3))
    np.testing.assert_allclose(
        rodrigues(E3, math.pi / 2), [[0, -1, 0], [1, 0, 0], [0, 0, 1]], atol=1e-15
    )
    H = rodrigues(E1, math.pi)
    np.testing.assert_allclose(H, np.diag([1.0, -1.0, -1.0]), atol=1e-15)
    assert abs(np.trace(H) + 1.0) < 1e-15


@given(st.floats(0.0, math.pi), rotations())
def test_rodrigues_trace_and_skew_part(theta, R0):
    axis = R0[:, 0]
    R = rodrigues(axis, theta)
    assert is_rotation(R)
    assert abs(np.trace(R) - (1 + 2 * math.cos(theta))) <= 1e-12
    np.testing.assert_allclose(pa(R), math.sin(theta) * hat(axis), atol=1e-12)


def test_exp_matches_rodrigues_and_batches(rng):
    phis = rng.normal(size=(5, 3))
    batch = exp_so3(phis)
    for phi, R in zip(phis, batch):
        np.testing.assert_allclose(R, exp_so3(phi), atol=1e-14)
    np.testing.assert_array_equal(exp_so3(np.zeros(3)), np.eye(3))
    np.testing.assert_array_equal(exp_so3(np.zeros((2, 3))), np.stack([np.eye(3)] * 2))


def test_log_examples():
    aa = log_so3(np.eye(3))
    assert aa.angle == 0.0 and np.array_equal(aa.axis, E1)
    aa = log_so3(rodrigues(E3, 0.3))
    np.testing.assert_allclose(aa.axis, E3, atol=1e-15)
    assert abs(aa.angle - 0.3) < 1e-15
    aa = log_so3(np.diag([1.0, -1.0, -1.0]))
    assert aa.angle == math.pi
    np.testing.assert_array_equal(aa.axis, E1)


def test_log_half_turn_sign_rule():
    eta = np.array([-1.0, 2.0, -2.0]) / 3.0
    aa = log_so3(-np.eye(3) + 2 * np.outer(eta, eta))
    np.testing.assert_allclose(aa.axis, -eta, atol=1e-15)
    assert aa.angle == pytest.approx(math.pi)


@settings(max_examples=300)
@given(rotations())
def test_log_round_trip(R):
    aa = log_so3(R)
    assert 0.0 <= aa.angle <= math.pi
    assert abs(np.linalg.norm(aa.axis) - 1.0) <= 1e-12
    assert np.linalg.norm(rodrigues(aa.axis, aa.angle) - R) <= 1e-8


def test_log_near_half_turn():
    for d in (1e-4, 1e-8, 1e-12):
        R = rodrigues(np.array([0.0, 0.6, 0.8]), math.pi - d)
        aa = log_so3(R)
        assert np.linalg.norm(rodrigues(aa.axis, aa.angle) - R) <= 1e-8


def test_quaternion_examples():
    np.testing.assert_array_equal(quat_to_rot([1, 0, 0, 0]), np.eye(3))
    np.testing.assert_array_equal(quat_to_rot([-1, 0, 0, 0]), np.eye(3))
    c = math.cos(math.pi / 4)
    np.testing.assert_allclose(quat_to_rot([c, 0, 0, c]), rodrigues(E3, math.pi / 2), atol=1e-15)


@settings(max_examples=300)
@given(rotations())
def test_quaternion_round_trip(R):
    q = rot_to_quat(R)
    assert q[0] >= 0.0
    assert abs(q @ q - 1.0) <= 1e-12
    np.testing.assert_allclose(quat_to_rot(q), R, atol=1e-9)
    np.testing.assert_array_equal(quat_to_rot(q), quat_to_rot(-q))


def test_rot_to_quat_tie_rule():
    q = rot_to_quat(np.diag([-1.0, -1.0, 1.0]))  # half turn about z
    np.testing.assert_allclose(q, [0, 0, 0, 1], atol=1e-15)
    eta = np.array([0.0, -0.6, 0.8])
    q = rot_to_quat(-np.eye(3) + 2 * np.outer(eta, eta))
    np.testing.assert_allclose(q, [0, 0, 0.6, -0.8], atol=1e-15)


def test_project_examples(rng):
    R = random_rotation(rng)
    np.testing.assert_allclose(project_to_so3(R), R, atol=1e-15)
    np.testing.assert_allclose(project_to_so3(1.001 * R), R, atol=1e-9)
    P = project_to_so3(R + 1e-6 * rng.standard_normal((3, 3)))
    assert is_rotation(P)
    assert np.linalg.norm(P - R) <= 1e-5


def test_project_matches_gram_schmidt_oracle(rng):
    R = random_rotation(rng)
    A = R + 1e-7 * rng.standard_normal((3, 3))
    Q, Rq = np.linalg.qr(A)
    Q = Q * np.sign(np.diag(Rq))
    assert np.linalg.norm(project_to_so3(A) - Q) <= 1e-6


def test_project_rejects_reflections_and_singular():
    with pytest.raises(DomainError):
        project_to_so3(np.diag([1.0, 1.0, -1.0]))
    with pytest.raises(DomainError):
        project_to_so3(np.zeros((3, 3)))
    with pytest.raises(DomainError):
        project_to_so3(np.diag([1.0, 1.0, 1e-14]))


def test_is_rotation():
    assert is_rotation(np.eye(3))
    assert not is_rotation(np.diag([1.0, 1.0, -1.0]))
    assert not is_rotation(np.full((3, 3), np.nan))
    assert not is_rotation(np.eye(2))


def test_random_rotation_is_uniformish():
    rng = np.random.default_rng(0)
    traces = np.array([np.trace(random_rotation(rng)) for _ in range(4000)])
    # Haar measure: E[tr R] = 0 and E[tr R^2] = 1
    assert abs(traces.mean()) < 0.05
    assert abs((traces**2).mean() - 1.0) < 0.1
