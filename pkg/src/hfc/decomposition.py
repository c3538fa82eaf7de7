"""Dyadic unit decompositions on a sector and the two-sided sigma_k band."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import DomainViolation
from .functions import sigma_k

log = logging.getLogger(__name__)

Fn = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class UnitTriple:
    """Families (delta_i, psi_i, psi_tilde_i), i = 1..N, as vectorized callables."""

    delta: tuple
    psi: tuple
    psi_tilde: tuple
    mu: float
    label: str = "custom"

    def __post_init__(self):
        if not (len(self.delta) == len(self.psi) == len(self.psi_tilde)):
            raise ValueError("families must have equal length")

    @property
    def N(self) -> int:
        return len(self.psi)


def _sqrt_ratio(a: float) -> Fn:
    return lambda z: np.sqrt(a * z) / (1 + a * z)


def dyadic_h(z: np.ndarray, J: int) -> np.ndarray:
    """sum_{|j| <= J} 2^j z / (1 + 2^j z)^2."""
    z = np.asarray(z, dtype=complex)
    out = np.zeros_like(z)
    for j in range(-J, J + 1):
        w = 2.0 ** j * z
        out += w / (1 + w) ** 2
    return out


def dyadic_surrogate(N: int = 64, mu: float = math.pi / 4, J: int | None = None,
                     check_points: int = 2001) -> UnitTriple:
    """psi_i = psi_tilde_i = (2^{i-N/2} z)^{1/2} / (1 + 2^{i-N/2} z), delta_i = 1/h.

    h is the dyadic sum truncated at |j| <= J (default 2N). Raises DomainViolation if
    h comes close to zero on sampled rays of the closed sector of half-angle mu.
    """
    if N < 2 or N % 2:
        raise ValueError("N must be an even integer >= 2")
    if not 0 < mu < math.pi:
        raise ValueError("mu must lie in (0, pi)")
    J = 2 * N if J is None else int(J)
    # h is 1-periodic in log2|z| up to truncation, so one period of rays suffices
    r = 2.0 ** np.linspace(-1.0, 1.0, check_points)
    th = np.linspace(-mu, mu, 33)
    zs = (r[None, :] * np.exp(1j * th[:, None])).ravel()
    hmin = float(np.abs(dyadic_h(zs, J)).min())
    if not hmin > 1e-3:
        raise DomainViolation(f"dyadic sum nearly vanishes on the sector (min |h| = {hmin:.3g})")
    log.debug("dyadic surrogate N=%d J=%d min|h|=%.6g", N, J, hmin)
    inv_h: Fn = lambda z: 1.0 / dyadic_h(z, J)
    psi = tuple(_sqrt_ratio(2.0 ** (i - N // 2)) for i in range(1, N + 1))
    return UnitTriple((inv_h,) * N, psi, psi, mu, label=f"dyadic(N={N},J={J})")


def sector_samples(mu: float, r_range=(2.0 ** -8, 2.0 ** 8), per_octave: int = 32,
                   rays: int = 9) -> np.ndarray:
    """Log-spaced radii on evenly spaced rays of the closed sector, boundary included."""
    lo, hi = np.log2(r_range[0]), np.log2(r_range[1])
    r = 2.0 ** np.linspace(lo, hi, int(round((hi - lo) * per_octave)) + 1)
    th = np.linspace(-mu, mu, rays)
    return (r[None, :] * np.exp(1j * th[:, None])).ravel()


def ray_integrals(fns: Sequence[Fn], nu: float, r_range=(2.0 ** -8, 2.0 ** 8),
                  per_octave: int = 64) -> np.ndarray:
    """int over both boundary rays of the sector nu of |f(z)| |dz/z|, trapezoid in log r."""
    lo, hi = math.log(r_range[0]), math.log(r_range[1])
    u = np.linspace(lo, hi, int(round((hi - lo) / math.log(2) * per_octave)) + 1)
    r = np.exp(u)
    cache: dict = {}
    out = []
    for f in fns:
        if id(f) not in cache:
            cache[id(f)] = sum(float(np.trapezoid(np.abs(f(r * np.exp(sgn * 1j * nu))), u))
                               for sgn in (1, -1))
        out.append(cache[id(f)])
    return np.array(out)


@dataclass
class UnitDecompositionReport:
    C: float
    K: float
    defect: float
    sum_psi: float
    sum_psi_tilde: float
    delta_sup: float
    ray_integrals: np.ndarray
    weighted_psi_sup: np.ndarray
    r_range: tuple
    passed: bool = field(default=False)

    def to_json(self) -> dict:
        return {
            "C": self.C, "K": self.K, "defect": self.defect,
            "sum_psi": self.sum_psi, "sum_psi_tilde": self.sum_psi_tilde,
            "delta_sup": self.delta_sup, "ray_integral_max": float(self.ray_integrals.max()),
            "weighted_psi_sup_max": float(self.weighted_psi_sup.max()),
            "r_range": list(self.r_range), "passed": self.passed,
        }


def unit_decomposition_check(triple: UnitTriple, nu: float, samples: np.ndarray | None = None,
                             r_range=(2.0 ** -8, 2.0 ** 8), defect_tol: float = 1e-3
                             ) -> UnitDecompositionReport:
    """Sample the three unit-decomposition properties and return (C, K, defect).

    C bounds sum|psi_i|, sum|psi_tilde_i| and max|delta_i| on the samples; K is the largest
    boundary-ray integral of |delta_i| over r_range; defect is max|1 - sum delta_i psi_i psi_tilde_i|.
    Also records sup |psi_i(z) ((1+z^2)/z)^{1/2}| per i.
    """
    if not 0 < nu < triple.mu:
        raise ValueError("need 0 < nu < mu")
    z = sector_samples(triple.mu, r_range) if samples is None else np.asarray(samples, dtype=complex)
    sum_psi = np.zeros(z.shape)
    sum_pt = np.zeros(z.shape)
    recon = np.zeros(z.shape, dtype=complex)
    dsup = 0.0
    weight = np.sqrt((1 + z * z) / z)
    wsup = np.empty(triple.N)
    cache: dict = {}
    for i, (dl, ps, pt) in enumerate(zip(triple.delta, triple.psi, triple.psi_tilde)):
        # shared callables (the surrogate reuses one delta) are evaluated once
        dv = cache.get(id(dl))
        if dv is None:
            dv = cache[id(dl)] = dl(z)
        p = ps(z)
        q = p if pt is ps else pt(z)
        sum_psi += np.abs(p)
        sum_pt += np.abs(q)
        dsup = max(dsup, float(np.abs(dv).max()))
        recon += dv * p * q
        wsup[i] = float(np.abs(p * weight).max())
    K = ray_integrals(triple.delta, nu, r_range)
    s1, s2 = float(sum_psi.max()), float(sum_pt.max())
    C = max(s1, s2, dsup)
    defect = float(np.abs(1 - recon).max())
    rep = UnitDecompositionReport(C, float(K.max()), defect, s1, s2, dsup, K, wsup, tuple(r_range))
    rep.passed = bool(np.isfinite(C) and np.isfinite(rep.K) and defect <= defect_tol
                      and np.all(np.isfinite(wsup)))
    log.info("unit decomposition %s: C=%.4g K=%.4g defect=%.3g", triple.label, C, rep.K, defect)
    return rep


@dataclass(frozen=True)
class SigmaBand:
    c1: float
    c2: float
    ratio: float
    rho: float
    ks: tuple
    ns: tuple


def sigma_band(rho: float = 2.0, gamma: float = math.pi / 2, mu: float = math.pi / 4,
               kmax: int = 8, per_shell: int = 16, rays: int = 9) -> SigmaBand:
    """Range of |sigma_k(z)| rho^{|k-n|/4} over rho^n <= |z| <= rho^{n+1}, |k|, |n| <= kmax."""
    ks = tuple(range(-kmax, kmax + 1))
    th = np.linspace(-mu, mu, rays)
    lo, hi = math.inf, 0.0
    for k in ks:
        f = sigma_k(k, rho, gamma, mu)
        for n in ks:
            r = rho ** np.linspace(n, n + 1, per_shell)
            z = (r[None, :] * np.exp(1j * th[:, None])).ravel()
            v = np.abs(f.raw([z])) * rho ** (abs(k - n) / 4.0)
            lo, hi = min(lo, float(v.min())), max(hi, float(v.max()))
    return SigmaBand(lo, hi, hi / lo, rho, ks, ks)


def sigma_ray_integrals(ks: Sequence[int], rho: float = 2.0, gamma: float = math.pi / 2,
                        mu: float = math.pi / 4, nu: float = math.pi / 8,
                        decades: float = 40.0) -> np.ndarray:
    """Boundary-ray integrals of |sigma_k| |dz/z| on the sector nu, centred at rho^k."""
    out = []
    for k in ks:
        f = sigma_k(k, rho, gamma, mu)
        c = rho ** k
        out.append(ray_integrals([lambda z, f=f: f.raw([z])], nu,
                                 (c * 10.0 ** -decades, c * 10.0 ** decades))[0])
    return np.array(out)
