from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from numpy.testing import assert_allclose

from hfc.errors import DomainViolation
from hfc.functions import (DecayCertificate, H01Form, SectorDomain, SectorFunction, boundary_sup, conjugate_reflect,
                           constant, decay_check, exp_neg, phi_m, phi_m_tensor, power, shift_recip, sigma_k,
                           sqrt_exp, sqrt_exp_tensor, sup_norm_estimate)


def test_named_values():
    assert_allclose(phi_m(1)(1.0), 0.25)
    assert_allclose(phi_m(2)(1.0), 4 / 9)
    assert_allclose(phi_m(10)(1.0), 100 / 121)
    assert_allclose(exp_neg()(1.0), math.exp(-1))
    assert_allclose(sqrt_exp_tensor(2)(1.0, 1.0), math.exp(-2))
    assert_allclose(phi_m_tensor(1, 2)(1.0, 1.0), 1 / 16)
    assert_allclose(phi_m_tensor(3, 1)(0.7), phi_m(3)(0.7))


def test_sigma_k_values():
    v = sigma_k(0, 2.0, math.pi / 2, math.pi / 4)(1.0)
    assert_allclose(v, 1 / (np.exp(1j * math.pi / 4) - 1), rtol=1e-13)
    assert_allclose(abs(v), 1 / (2 * math.sin(math.pi / 8)), rtol=1e-13)
    f = sigma_k(0, 2.0, math.pi / 2, math.pi / 4)
    small = np.array([1e-8, 1e-12])
    # modulus behaves like |z|^{1/4} at the origin
    assert_allclose(np.abs(f(small)) / small ** 0.25, 1 / abs(np.exp(1j * math.pi / 4)), rtol=1e-3)
    with pytest.raises(DomainViolation):
        f(np.exp(1j * 1.0))


def test_domain_violation_and_branch_cut():
    with pytest.raises(DomainViolation):
        phi_m(1, angle=math.pi / 2)(-1.0 + 0.1j)
    with pytest.raises(DomainViolation):
        power(0.5)(-2.0)


@given(st.integers(0, 2 ** 31 - 1))
def test_algebra_respected_by_evaluation(seed):
    rng = np.random.default_rng(seed)
    z = 10 ** rng.uniform(-2, 2, 8) * np.exp(1j * rng.uniform(-0.7, 0.7, 8))
    f = phi_m(2.0).dilate(0.3) * complex(*rng.standard_normal(2))
    g = sqrt_exp(1.2) + shift_recip(1.5, angle=1.2)
    assert_allclose((f * g)(z), f(z) * g(z), rtol=1e-12)
    assert_allclose((f + g)(z), f(z) + g(z), rtol=1e-12, atol=1e-300)
    assert_allclose((f - 2.0)(z), f(z) - 2.0, rtol=1e-12)


@given(st.integers(0, 2 ** 31 - 1))
def test_tensor_coherence(seed):
    rng = np.random.default_rng(seed)
    z1, z2 = 10 ** rng.uniform(-2, 2, (2, 6)) * np.exp(1j * rng.uniform(-0.7, 0.7, (2, 6)))
    f, g = phi_m(3.0), sqrt_exp(1.0)
    assert_allclose(f.tensor(g)(z1, z2), f(z1) * g(z2), rtol=1e-13)


def test_holomorphy_cauchy_riemann_probe(rng):
    fns = [phi_m(2.0), sqrt_exp(1.2), sigma_k(1, 2.0, math.pi / 2, math.pi / 4), shift_recip(2 + 1j, angle=2.0)]
    for f in fns:
        z = 10 ** rng.uniform(-1, 1, 20) * np.exp(1j * rng.uniform(-0.6, 0.6, 20))
        h = 1e-5 * np.abs(z)
        dx = (f.raw([z + h]) - f.raw([z - h])) / (2 * h)
        dy = (f.raw([z + 1j * h]) - f.raw([z - 1j * h])) / (2 * h)
        # for holomorphic f, df/dy = i df/dx
        resid = np.abs(dy - 1j * dx) / np.maximum(np.abs(dx), 1e-12)
        assert resid.max() < 1e-6


def test_decay_check_examples():
    assert decay_check(phi_m(1)).passed
    assert decay_check(sqrt_exp(math.pi / 4)).passed
    assert decay_check(sigma_k(2, 2.0, math.pi / 2, math.pi / 4)).passed
    one = constant(1.0)
    assert not decay_check(one, DecayCertificate(((0, 0.5),), 1.0)).passed


def test_phi1_unit_constant_is_sharp_only_on_the_axis():
    # |1 + z| < 1 + |z| off the positive axis, so C = 1 is too small on any open sector;
    # the worst ratio is 1/cos^2(theta/2), attained at |z| = 1 on the boundary rays
    theta = 0.75 * math.pi
    rep = decay_check(phi_m(1, theta), DecayCertificate(((0, 1.0),), 1.0))
    assert not rep.passed
    assert_allclose(rep.worst_ratio, 1 / math.cos(theta / 2) ** 2, rtol=1e-6)
    assert_allclose(phi_m(1, theta).certificate.C, 1 / math.cos(theta / 2) ** 2)


def test_sup_norm_examples():
    assert_allclose(sup_norm_estimate(constant(2 - 1j)), abs(2 - 1j))
    f = phi_m(1, angle=math.pi / 2)
    assert_allclose(sup_norm_estimate(f), 0.5, rtol=1e-9)
    e = exp_neg(angle=math.pi / 3)
    assert_allclose(sup_norm_estimate(e), 1.0, rtol=1e-5)


def test_phi_tensor_sup_uniform_in_m():
    sups = [sup_norm_estimate(phi_m_tensor(m, 2, 0.75 * math.pi), per_decade=16) for m in (1, 4, 16, 64)]
    assert max(sups) < 2 * min(sups)


@given(st.integers(0, 2 ** 31 - 1))
def test_conjugate_reflect_involution_and_sup(seed):
    rng = np.random.default_rng(seed)
    a = complex(*rng.uniform(0.2, 2, 2))
    f = (shift_recip(a, angle=2.0) * phi_m(2.0, 2.0)) * complex(*rng.standard_normal(2))
    g = conjugate_reflect(f)
    z = 10 ** rng.uniform(-2, 2, 8) * np.exp(1j * rng.uniform(-1.5, 1.5, 8))
    assert_allclose(g(z), np.conj(f(np.conj(z))), rtol=1e-13)
    assert_allclose(conjugate_reflect(g)(z), f(z), rtol=1e-14)
    assert sup_norm_estimate(g) == sup_norm_estimate(f)


def test_conjugate_reflect_examples():
    f = phi_m(3.0)
    z = np.array([0.5 + 0.2j, 2 - 1j])
    assert_allclose(conjugate_reflect(f)(z), f(z), rtol=1e-14)
    iz = power(1.0) * 1j
    assert_allclose(conjugate_reflect(iz)(z), -1j * z)


def test_h01_form_sum_matches_pointwise(rng):
    d = 2
    parts = [constant(0.5, d), phi_m(1).embed(d, [0]), sqrt_exp(1.0).embed(d, [1]) * 2j,
             phi_m(2).tensor(sqrt_exp(1.0))]
    form = H01Form.from_terms(parts, d)
    assert set(form.components) == {frozenset(), frozenset({0}), frozenset({1}), frozenset({0, 1})}
    z1, z2 = 10 ** rng.uniform(-1, 1, (2, 5)) * np.exp(1j * rng.uniform(-0.5, 0.5, (2, 5)))
    expected = sum(p(z1, z2) for p in parts)
    assert_allclose(form(z1, z2), expected, rtol=1e-12)


def test_h01_form_rejects_uncertified_component():
    f = SectorFunction(phi_m(1).expr, SectorDomain((2.0,)), None)
    with pytest.raises(ValueError):
        H01Form({frozenset({0}): f}, 1)


def test_json_round_trip(rng):
    f = (phi_m(2.0).dilate(0.5) * sqrt_exp(1.0)) + shift_recip(1 + 1j, angle=1.0) * phi_m(1, 1.0)
    back = SectorFunction.from_json(f.to_json())
    z = 10 ** rng.uniform(-1, 1, 5) * np.exp(1j * rng.uniform(-0.5, 0.5, 5))
    assert_allclose(back(z), f(z), rtol=0, atol=0)
    assert back.certificate == f.certificate
    assert back.domain == f.domain


def test_boundary_sup_conjugation_symmetric_grid():
    mod = lambda zs: np.abs(zs[0] / (1 + zs[0]) ** 2 * (1 + 0.5j * zs[0]))
    a = boundary_sup(mod, [2.0])
    b = boundary_sup(lambda zs: mod([np.conj(zs[0])]), [2.0])
    assert a.value == b.value
