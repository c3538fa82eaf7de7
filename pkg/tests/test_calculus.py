from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from numpy.testing import assert_allclose

from conftest import random_unitary
from hfc.calculus import (ContourQuadrature, RayRule, angle_dependence_profile, build_quadrature, cauchy_self_test, contour_fc,
                          fc_constant_estimate, function_ensemble, integral_identity_check,
                          phi_approximation_check, quad_profile, random_h01, spectral_oracle_fc)
from hfc.errors import AngleOrderViolation, QuadratureSelfTestError
from hfc.functions import (H01Form, SectorDomain, conjugate_reflect, constant, phi_m, phi_m_tensor, power,
                           sqrt_exp)
from hfc.operators import CommutingTuple, adjoint_tuple


def _phi1(z):
    return z / (1 + z) ** 2


def test_contour_examples():
    A = np.diag([1.0, 2.0])
    res = contour_fc(phi_m(1), CommutingTuple((A,)))
    assert_allclose(res.value, np.diag([0.25, 2 / 9]), atol=1e-8)
    assert res.tail_estimate < 1e-8
    t2 = CommutingTuple((np.diag([1.0, 2.0]), np.diag([3.0, 4.0])))
    res = contour_fc(phi_m_tensor(1, 2), t2)
    assert_allclose(res.value, np.diag([0.25 * 3 / 16, 2 / 9 * 4 / 25]), atol=1e-8)
    assert_allclose(spectral_oracle_fc(phi_m_tensor(1, 2), t2), res.value, atol=1e-8)
    c = contour_fc(constant(2 - 3j, 2), t2).value
    assert np.array_equal(c, (2 - 3j) * np.eye(2))


def test_oracle_examples(rng):
    S = np.eye(3) + 0.3 * rng.standard_normal((3, 3))
    A = S @ np.diag([0.5, 1.0, 3.0]) @ np.linalg.inv(S)
    t = CommutingTuple((A,))
    z = power(1.0, angle=2.0)
    assert_allclose(spectral_oracle_fc(z, t), A, atol=1e-10)
    f = phi_m(1)
    assert_allclose(spectral_oracle_fc(f * f, t), spectral_oracle_fc(f, t) @ spectral_oracle_fc(f, t), atol=1e-10)


def test_cauchy_self_test_and_rule():
    assert cauchy_self_test(math.pi / 2, 16) < 1e-8
    rule = RayRule.build(math.pi / 2, 1e-6, 1e6, 16, 1.0)
    assert rule.r_min < 1 < rule.r_max
    with pytest.raises(QuadratureSelfTestError):
        ContourQuadrature([RayRule.build(math.pi / 2, 1e-1, 1e1, 4, 1.0)])


def test_angle_order_violation():
    t = CommutingTuple((np.diag([np.exp(1j * 1.2)]),))
    with pytest.raises(AngleOrderViolation):
        contour_fc(sqrt_exp(1.0), t)
    t = CommutingTuple((np.diag([1.0]),))
    with pytest.raises(AngleOrderViolation):
        contour_fc(phi_m(1, 2.0), t, nu=2.5)


def _random_tuple(rng, d, n, normal):
    G = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    S = random_unitary(rng, n) if normal else np.eye(n) + 0.2 * G / math.sqrt(n)
    Si = S.conj().T if normal else np.linalg.inv(S)
    ops = []
    for _ in range(d):
        lam = 10 ** rng.uniform(-1, 1, n) * np.exp(1j * rng.uniform(-1.0, 1.0, n))
        ops.append(S @ np.diag(lam) @ Si)
    return CommutingTuple(tuple(ops), tolerance=1e-8)


@given(st.integers(0, 2 ** 31 - 1), st.integers(1, 3), st.integers(1, 5), st.booleans())
def test_oracle_equivalence_homomorphism_and_angle_independence(seed, d, n, normal):
    rng = np.random.default_rng(seed)
    t = _random_tuple(rng, d, n, normal)
    f, g = [random_h01(rng, d, [0.45 * math.pi] * d, max_atoms=3) for _ in range(2)]
    res = contour_fc(f, t)
    oracle = spectral_oracle_fc(f, t)
    scale = np.linalg.norm(oracle, 2)
    assert np.linalg.norm(res.value - oracle, 2) <= res.tail_estimate + 1e-7 * scale
    fg = contour_fc(f * g, t).value
    assert np.linalg.norm(fg - res.value @ contour_fc(g, t).value, 2) <= 1e-7 * max(np.linalg.norm(fg, 2), 1e-300)
    omega = t.types()
    nu1 = [w + 0.25 * (0.45 * math.pi - w) for w in omega]
    nu2 = [w + 0.75 * (0.45 * math.pi - w) for w in omega]
    a, b = contour_fc(f, t, nu=nu1).value, contour_fc(f, t, nu=nu2).value
    assert np.linalg.norm(a - b, 2) <= 1e-7 * scale


def test_lambda_additivity(rng):
    t = _random_tuple(rng, 2, 4, False)
    form = random_h01(rng, 2, [0.45 * math.pi] * 2, max_atoms=6)
    quad = build_quadrature(form, t)
    total = contour_fc(form, t, quad=quad).value
    parts = sum(contour_fc(H01Form({k: f}, 2), t, quad=quad).value for k, f in form.components.items())
    assert_allclose(total, parts, rtol=0, atol=1e-14 * np.abs(total).max())
    assert np.linalg.norm(total - spectral_oracle_fc(form, t), 2) <= 1e-7 * np.linalg.norm(total, 2)


@given(st.integers(0, 2 ** 31 - 1))
def test_adjoint_identity(seed):
    rng = np.random.default_rng(seed)
    t = _random_tuple(rng, 2, 3, False)
    f = random_h01(rng, 2, [0.45 * math.pi] * 2, max_atoms=3)
    reflected = H01Form({k: conjugate_reflect(c) for k, c in f.components.items()}, 2)
    lhs = contour_fc(reflected, adjoint_tuple(t)).value
    rhs = contour_fc(f, t).value.conj().T
    assert np.linalg.norm(lhs - rhs, 2) <= 1e-8 * max(np.linalg.norm(rhs, 2), 1.0)


def test_dense_range_reduction(rng):
    # on invertible tuples f (Phi_m tensor)(A) -> f(A), the defect decaying like 1/m
    t = _random_tuple(rng, 2, 3, True)
    f = random_h01(rng, 2, [0.75 * math.pi] * 2, max_atoms=4, kinds=("phi",))
    ref = spectral_oracle_fc(f, t)
    defects = []
    for m in (1e2, 1e4, 1e6, 1e8):
        approx = contour_fc(f * phi_m_tensor(m, 2, 0.75 * math.pi), t).value
        defects.append(np.linalg.norm(approx - ref, 2) / np.linalg.norm(ref, 2))
    assert defects[-1] <= 1e-6
    assert all(b < a for a, b in zip(defects, defects[1:]))


def test_fc_constant_normal_is_at_most_one(rng):
    t = _random_tuple(rng, 2, 4, True)
    est = fc_constant_estimate(t, SectorDomain((0.45 * math.pi,) * 2), ensemble_size=8, seed=3)
    assert 1 - 1e-9 <= est.value <= 1.02


def test_fc_constant_grows_with_nonnormality():
    vals = []
    for M in (0.0, 1.0, 10.0, 100.0, 1000.0):
        A = np.array([[1.0, M], [0.0, 1.0]])
        est = fc_constant_estimate(CommutingTuple((A,)), SectorDomain((0.45 * math.pi,)), ensemble_size=8, seed=5)
        vals.append(est.value)
    # small M is dominated by the constant function, the M f'(1) term takes over later
    assert all(b >= a - 1e-9 for a, b in zip(vals, vals[1:]))
    assert vals[2] > 1.1 and vals[4] > 5 * vals[3] > 25 * vals[2]


def test_fc_constant_diagonal_restriction(rng):
    # f(A, A) = g(A) with g(z) = f(z, z); the ensemble ratio of the pair is bounded by the d=1 family
    t1 = _random_tuple(rng, 1, 3, True)
    pair = CommutingTuple((t1[0], t1[0]))
    e1 = fc_constant_estimate(t1, SectorDomain((0.45 * math.pi,)), ensemble_size=8, seed=1)
    e2 = fc_constant_estimate(pair, SectorDomain((0.45 * math.pi,) * 2), ensemble_size=8, seed=1)
    assert abs(e1.value - e2.value) <= 0.02


def test_fc_constant_oracle_and_contour_agree(rng):
    t = _random_tuple(rng, 1, 3, False)
    dom = SectorDomain((0.45 * math.pi,))
    a = fc_constant_estimate(t, dom, ensemble_size=6, seed=2, method="contour")
    b = fc_constant_estimate(t, dom, ensemble_size=6, seed=2, method="oracle")
    assert_allclose(a.ratios, b.ratios, rtol=1e-7)


def test_function_ensemble_shape():
    assert function_ensemble(2, [1.0, 1.0], 0, seed=1) == []
    ens = function_ensemble(2, [1.0, 1.0], 3, seed=1)
    assert len(ens) == 4 and ens[0].constant_value == 1
    again = function_ensemble(2, [1.0, 1.0], 3, seed=1)
    z = [np.array([0.3 + 0.1j]), np.array([2.0 - 0.5j])]
    for a, b in zip(ens, again):
        assert_allclose(a.raw(z), b.raw(z), rtol=0, atol=0)


def test_angle_profile_normal_flat_and_nonnormal_finite(rng):
    t = _random_tuple(rng, 2, 3, True)
    omega = max(t.types())
    ladder = np.linspace(omega + 0.2, 0.9 * math.pi, 4)
    prof = angle_dependence_profile(t, ladder, ensemble_size=6, seed=4)
    est = np.array(prof.estimates)
    assert est.max() / est.min() - 1 <= 0.05
    A = np.array([[1.0, 3.0], [0.0, 1.5]])
    prof = angle_dependence_profile(CommutingTuple((A,)), [0.3, 0.8, 1.6, 2.6], ensemble_size=6, seed=4)
    assert np.all(np.isfinite(prof.estimates))
    assert np.all(np.diff(prof.estimates) <= 1e-12)
    assert angle_dependence_profile(CommutingTuple((A,)), [0.5], ensemble_size=0).estimates == []
    with pytest.raises(AngleOrderViolation):
        angle_dependence_profile(CommutingTuple((np.diag([np.exp(0.5j)]),)), [0.4], ensemble_size=2)


def test_phi_approximation_examples():
    x = np.array([1.0, -2.0])
    rep = phi_approximation_check(np.eye(2), x, [1, 2, 4, 8])
    expected = [abs(1 - m * m / (m + 1) ** 2) * np.linalg.norm(x) for m in (1, 2, 4, 8)]
    assert_allclose(rep.errors, expected, rtol=1e-9)
    rep = phi_approximation_check(np.diag([0.0, 1.0]), np.array([1.0, 0.0]), [1, 10, 100])
    assert not rep.precondition_ok
    assert_allclose(rep.errors, 1.0, rtol=1e-9)
    rep = phi_approximation_check(np.diag([0.3, 4.0]), np.array([1.0, 1.0]), [2.0 ** k for k in range(4, 14)])
    assert rep.precondition_ok and abs(rep.fitted_exponent - 1) < 0.05
    assert rep.monotone_from is not None


def test_integral_identity_examples():
    assert integral_identity_check(np.array([[1.0]]), 1).defect < 1e-8
    assert integral_identity_check(np.diag([1.0, 2.0]), 2).defect <= 1e-6
    rep = integral_identity_check(np.diag([np.exp(1j * 2 * math.pi / 3)]), 1)
    assert not rep.precondition_ok
    coarse = integral_identity_check(np.diag([1.0, 30.0]), 4, nodes=60).defect
    fine = integral_identity_check(np.diag([1.0, 30.0]), 4, nodes=240).defect
    assert fine < coarse


def test_quad_profiles(monkeypatch):
    monkeypatch.setenv("HFC_QUAD_PROFILE", "strict")
    assert quad_profile()["nodes_per_decade"] == 32
    monkeypatch.setenv("HFC_QUAD_PROFILE", "nonsense")
    with pytest.raises(ValueError):
        quad_profile()
