from __future__ import annotations

import math

import numpy as np
import pytest
import scipy.integrate
from numpy.testing import assert_allclose

from hfc.decomposition import (UnitTriple, dyadic_h, dyadic_surrogate, ray_integrals, sector_samples, sigma_band,
                               sigma_ray_integrals, unit_decomposition_check)
from hfc.errors import DomainViolation


def _sigma0(z, rho=2.0, gamma=math.pi / 2):
    return z ** 0.25 / (np.exp(0.5j * gamma) - np.sqrt(z))


def test_surrogate_meets_the_three_properties():
    rep = unit_decomposition_check(dyadic_surrogate(64, math.pi / 4), math.pi / 8)
    assert rep.passed and rep.defect <= 1e-3
    assert rep.sum_psi <= rep.C and rep.sum_psi_tilde <= rep.C and rep.delta_sup <= rep.C
    assert np.all(rep.ray_integrals <= rep.K)
    assert np.all(np.isfinite(rep.weighted_psi_sup))


def test_surrogate_defect_matches_tail_formula():
    # sum_i psi_i^2 is h truncated to |j| <= N/2 shifted by one, so the defect is |h_J - h_partial| / |h_J|
    N, J = 16, 32
    z = sector_samples(math.pi / 4, (2.0 ** -3, 2.0 ** 3), per_octave=8, rays=5)
    partial = sum(2.0 ** j * z / (1 + 2.0 ** j * z) ** 2 for j in range(1 - N // 2, N // 2 + 1))
    full = sum(2.0 ** j * z / (1 + 2.0 ** j * z) ** 2 for j in range(-J, J + 1))
    expected = np.abs(1 - partial / full).max()
    rep = unit_decomposition_check(dyadic_surrogate(N, math.pi / 4, J=J), math.pi / 8, samples=z)
    assert_allclose(rep.defect, expected, rtol=1e-9)


def test_ray_integral_matches_adaptive_quadrature():
    inv_h = lambda z: 1.0 / dyadic_h(z, 40)
    nu = math.pi / 8
    ours = ray_integrals([inv_h], nu, (0.25, 4.0))[0]
    ref = sum(scipy.integrate.quad(lambda u: abs(inv_h(np.exp(u + sgn * 1j * nu))), math.log(0.25), math.log(4.0),
                                   limit=200)[0] for sgn in (1, -1))
    assert_allclose(ours, ref, rtol=1e-5)


def test_single_pair_is_not_a_unit_decomposition():
    phi = lambda z: z / (1 + z) ** 2
    one = lambda z: np.ones_like(z)
    triple = UnitTriple((one,), (phi,), (phi,), math.pi / 4, "single")
    rep = unit_decomposition_check(triple, math.pi / 8, r_range=(2.0 ** -8, 2.0 ** 20))
    assert rep.defect > 0.99 and not rep.passed


def test_surrogate_validation(monkeypatch):
    with pytest.raises(ValueError):
        dyadic_surrogate(7)
    with pytest.raises(ValueError):
        unit_decomposition_check(dyadic_surrogate(8), math.pi / 2)
    # the dyadic sum stays away from zero on every sector, so the guard is exercised with a stand-in
    import hfc.decomposition as dec
    monkeypatch.setattr(dec, "dyadic_h", lambda z, J: 1e-6 * np.ones_like(z))
    with pytest.raises(DomainViolation):
        dec.dyadic_surrogate(8)


def test_sigma_band_exists():
    band = sigma_band(2.0, math.pi / 2, math.pi / 4)
    assert 0 < band.c1 <= band.c2 and band.ratio <= 50
    rng = np.random.default_rng(0)
    for _ in range(50):
        k, n = rng.integers(-8, 9, size=2)
        z = 2.0 ** (n + rng.random()) * np.exp(1j * rng.uniform(-math.pi / 4, math.pi / 4))
        val = abs(2.0 ** (k / 4) * z ** 0.25 / ((2.0 ** k * 1j) ** 0.5 - np.sqrt(z))) * 2.0 ** (abs(k - n) / 4)
        assert band.c1 * 0.95 <= val <= band.c2 * 1.05


def test_sigma_ray_integrals_uniform_in_k():
    vals = sigma_ray_integrals(range(-6, 7))
    assert_allclose(vals, vals[0], rtol=1e-6)
    nu = math.pi / 8
    ref = sum(scipy.integrate.quad(lambda u: abs(_sigma0(np.exp(u + sgn * 1j * nu))), -40 * math.log(10),
                                   40 * math.log(10), limit=400, points=[0.0])[0] for sgn in (1, -1))
    assert_allclose(vals[0], ref, rtol=1e-4)
