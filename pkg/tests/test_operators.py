from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from numpy.testing import assert_allclose

from conftest import random_unitary
from hfc.errors import BranchCutViolation, NonCommutingTuple, NotSimultaneouslyDiagonalizable, SingularResolvent
from hfc.operators import (CommutingTuple, adjoint_tuple, commutation_defect, ergodic_split, fractional_sqrt,
                           joint_spectral_decompose, resolvent, resolvent_stack, sectorial_profile)
from hfc.spaces import SpaceModel, operator_norm


def test_commutation_defect_diagonal_and_polynomial(rng):
    assert commutation_defect([np.diag([1.0, 2.0]), np.diag([3.0, 4.0])]) == 0.0
    A = rng.standard_normal((4, 4))
    assert commutation_defect([A, A @ A]) < 1e-14


def test_commutation_defect_shift_pair():
    E, F = np.array([[0.0, 1.0], [0.0, 0.0]]), np.array([[0.0, 0.0], [1.0, 0.0]])
    expected = np.linalg.norm(E @ F - F @ E, 2) / (np.linalg.norm(E, 2) * np.linalg.norm(F, 2))
    assert_allclose(commutation_defect([E, F]), expected)
    with pytest.raises(NonCommutingTuple):
        CommutingTuple((E, F))


def test_resolvent_examples():
    assert_allclose(resolvent(np.array([[1.0]]), -1.0), [[-0.5]])
    assert_allclose(resolvent(np.diag([1.0, 2.0]), 3.0), np.diag([0.5, 1.0]))
    assert_allclose(resolvent(np.array([[1.0, 1.0], [0.0, 1.0]]), 0.0), [[-1.0, 1.0], [0.0, -1.0]], atol=1e-14)
    with pytest.raises(SingularResolvent):
        resolvent(np.diag([1.0, 2.0]), 2.0)
    with pytest.raises(SingularResolvent):
        resolvent(np.array([[1.0, 1.0], [0.0, 1.0]]) + 0.3 * np.eye(2), 1.3)


def test_resolvent_tiny_z_next_to_rounding_level_kernel(rng):
    U = random_unitary(rng, 3)
    A = U @ np.diag([0.0, 1.0, 2.0]) @ U.conj().T
    z = np.array([1e-30 * np.exp(2j)])
    R = resolvent_stack(A, z)[0]
    P0 = np.outer(U[:, 0], U[:, 0].conj())
    # on the kernel the resolvent is 1/z, far beyond the rounding level of A
    assert_allclose(P0 @ R @ P0, P0 / z[0], rtol=1e-6)


@given(st.integers(0, 2 ** 31 - 1))
def test_resolvent_identity(seed):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
    z, w = 10 * np.exp(1j * rng.uniform(0, 2 * np.pi, 2))
    Rz, Rw = resolvent(A, z), resolvent(A, w)
    lhs = Rz - Rw
    assert_allclose(lhs, (w - z) * Rz @ Rw, atol=1e-9 * np.abs(lhs).max())
    assert_allclose((z * np.eye(4) - A) @ Rz, np.eye(4), atol=1e-10)


def _ray_sup(lam, phi):
    """sup_r |z| / |z - lam| on the ray z = r e^{i phi}: 1/sin(delta) below a right angle, else 1."""
    delta = abs(np.angle(np.exp(1j * (phi - np.angle(lam)))))
    return 1.0 / np.sin(delta) if delta < np.pi / 2 else 1.0


def test_sectorial_profile_identity():
    angles = [np.pi / 6, np.pi / 3, np.pi / 2]
    prof = sectorial_profile(np.eye(2), angle_grid=angles)
    assert_allclose(prof.constants, [1 / np.sin(a) for a in angles], rtol=1e-3)
    prof2 = sectorial_profile(np.diag([1.0, 2.0]), angle_grid=angles)
    assert_allclose(prof2.constants, prof.constants, rtol=1e-3)


def test_sectorial_profile_rotated_eigenvalue():
    prof = sectorial_profile(np.diag([np.exp(1j * np.pi / 4)]), angle_grid=[3 * np.pi / 4])
    assert abs(prof.constants[0] - 1.0) <= 0.05


@given(st.integers(0, 2 ** 31 - 1))
def test_sectorial_profile_normal_matches_scalar_oracle(seed):
    rng = np.random.default_rng(seed)
    lam = 10 ** rng.uniform(-1, 1, 3) * np.exp(1j * rng.uniform(-0.6, 0.6, 3))
    U = random_unitary(rng, 3)
    A = U @ np.diag(lam) @ U.conj().T
    angles = np.array([0.8, 1.4, 2.2, 2.8])
    prof = sectorial_profile(A, angle_grid=angles)
    assert np.all(np.diff(prof.constants) <= 1e-12)
    # for a normal matrix the sup over the complement sits on the boundary rays
    oracle = [max(_ray_sup(l, s * a) for l in lam for s in (1, -1)) for a in angles]
    assert_allclose(prof.constants, oracle, rtol=0.05)


def test_joint_spectral_decompose_examples(rng):
    js = joint_spectral_decompose([np.diag([1.0, 2.0]), np.diag([3.0, 4.0])])
    pairs = sorted(map(tuple, np.round(js.eigenvalues.real, 12)))
    assert pairs == [(1.0, 3.0), (2.0, 4.0)]
    A = rng.standard_normal((3, 3))
    js = joint_spectral_decompose([A, np.eye(3)])
    assert_allclose(js.eigenvalues[:, 1], 1.0, atol=1e-12)
    S = np.eye(4) + 0.3 * rng.standard_normal((4, 4))
    lam = rng.standard_normal((4, 2)) + 2
    ops = [S @ np.diag(lam[:, k]) @ np.linalg.inv(S) for k in range(2)]
    js = joint_spectral_decompose(CommutingTuple(tuple(ops), tolerance=1e-8))
    got = sorted(map(tuple, np.round(js.eigenvalues.real, 8)))
    assert got == sorted(map(tuple, np.round(lam, 8)))
    for k in range(2):
        assert_allclose(js.reconstruct(k), ops[k], atol=1e-8 * np.abs(ops[k]).max())


def test_joint_spectral_decompose_defective():
    with pytest.raises(NotSimultaneouslyDiagonalizable):
        joint_spectral_decompose([np.array([[2.0, 1.0], [0.0, 2.0]])])


def test_fractional_sqrt_examples():
    assert_allclose(fractional_sqrt(np.diag([4.0, 9.0])), np.diag([2.0, 3.0]), atol=1e-14)
    assert_allclose(fractional_sqrt(np.diag([1j])), [[np.exp(1j * np.pi / 4)]], atol=1e-14)
    J = np.array([[2.0, 1.0], [0.0, 2.0]])
    R = fractional_sqrt(J)
    assert_allclose(R @ R, J, atol=1e-10)
    with pytest.raises(BranchCutViolation):
        fractional_sqrt(np.diag([1.0, -1.0]))


def test_ergodic_split_examples():
    split = ergodic_split(CommutingTuple((np.diag([2.0, 3.0]),)))
    assert_allclose(split[{0}], np.eye(2))
    assert_allclose(split[set()], 0)
    split = ergodic_split(CommutingTuple((np.diag([0.0, 1.0]),)))
    assert_allclose(split[{0}], np.diag([0.0, 1.0]), atol=1e-14)
    assert_allclose(split[set()], np.diag([1.0, 0.0]), atol=1e-14)
    split = ergodic_split(CommutingTuple((np.diag([0.0, 1.0, 1.0]), np.diag([1.0, 0.0, 1.0]))))
    assert_allclose(split[{1}], np.diag([1.0, 0, 0]), atol=1e-14)
    assert_allclose(split[{0}], np.diag([0, 1.0, 0]), atol=1e-14)
    assert_allclose(split[{0, 1}], np.diag([0, 0, 1.0]), atol=1e-14)
    assert_allclose(split[set()], 0, atol=1e-14)


@given(st.integers(0, 2 ** 31 - 1))
def test_ergodic_split_resolves_identity_and_commutes(seed):
    rng = np.random.default_rng(seed)
    S = np.eye(4) + 0.3 * rng.standard_normal((4, 4))
    Si = np.linalg.inv(S)
    lam = (rng.standard_normal((4, 2)) + 2) * (rng.random((4, 2)) > 0.4)
    t = CommutingTuple(tuple(S @ np.diag(lam[:, k]) @ Si for k in range(2)), tolerance=1e-8)
    split = ergodic_split(t)
    Ps = list(split.projections.values())
    assert_allclose(sum(Ps), np.eye(4), atol=1e-10)
    for i, P in enumerate(Ps):
        for Q in Ps[i + 1:]:
            assert np.abs(P @ Q).max() < 1e-9
        for A in t.operators:
            assert np.abs(P @ A - A @ P).max() < 1e-9 * max(1.0, np.abs(A).max())
    # adjoints of the projections are the projections of the adjoint tuple
    adj = ergodic_split(adjoint_tuple(t))
    for key, P in split.projections.items():
        assert_allclose(adj[key], P.conj().T, atol=1e-9)


def test_adjoint_tuple_examples():
    t = CommutingTuple((np.diag([1 + 1j]),))
    assert_allclose(adjoint_tuple(t)[0], np.diag([1 - 1j]))
    H = np.array([[2.0, 1j], [-1j, 3.0]])
    assert_allclose(adjoint_tuple(CommutingTuple((H,)))[0], H)
    t = CommutingTuple((np.array([[1.0, 2.0], [0.0, 1.0]]),), SpaceModel.lp(3.0, 2))
    back = adjoint_tuple(adjoint_tuple(t))
    assert back.space == t.space
    assert_allclose(back[0], t[0])
    assert adjoint_tuple(t).space == SpaceModel.lp(1.5, 2)


def test_operator_norm_examples():
    for space in (SpaceModel.euclidean(3), SpaceModel.lp(1.5, 3), SpaceModel.lp(math.inf, 3)):
        assert_allclose(operator_norm(np.eye(3), space), 1.0, rtol=1e-10)
    assert_allclose(operator_norm(np.diag([3.0, -4.0]), SpaceModel.euclidean(2)), 4.0, rtol=1e-12)
    assert_allclose(operator_norm(np.array([[0.0, 2.0], [0.0, 0.0]]), SpaceModel.euclidean(2)), 2.0, rtol=1e-12)


@given(st.integers(0, 2 ** 31 - 1), st.sampled_from([1.0, 1.5, 3.0, math.inf]))
def test_operator_norm_adjoint_duality(seed, p):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((3, 3))
    sp = SpaceModel.lp(p, 3)
    a = operator_norm(A, sp, seed=1)
    b = operator_norm(A.conj().T, sp.dual(), seed=1)
    assert abs(a - b) <= 0.01 * max(a, b)


def test_tuple_json_round_trip(rng):
    A = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
    t = CommutingTuple((A, A @ A), SpaceModel.lp(3.0, 2), 1e-9)
    back = CommutingTuple.from_json(t.to_json())
    assert back.space == t.space and back.tolerance == t.tolerance
    for k in range(2):
        assert_allclose(back[k], t[k], rtol=0, atol=0)
