"""Sectorial contour quadrature for f(A_1, ..., A_d), the spectral oracle, and
functional-calculus constant estimates."""

from __future__ import annotations

import contextlib
import contextvars
import logging
import math
import os
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.linalg
import scipy.special

from .errors import AngleOrderViolation, DomainViolation, QuadratureSelfTestError
from .functions import (
    DecayCertificate,
    Expr,
    H01Form,
    SectorDomain,
    SectorFunction,
    arity,
    boundary_sup,
    check_domain,
    constant,
    evaluate,
    phi_m,
    sqrt_exp,
)
from .operators import (
    CommutingTuple,
    ZERO_THRESHOLD,
    ergodic_split,
    joint_spectral_decompose,
    resolvent_stack,
    spectral_angle,
)
from .spaces import SpaceModel, operator_norm

log = logging.getLogger(__name__)

QUAD_PROFILES = {
    "fast": {"nodes_per_decade": 8, "tail_tol": 1e-8},
    "default": {"nodes_per_decade": 16, "tail_tol": 1e-10},
    "strict": {"nodes_per_decade": 32, "tail_tol": 1e-12},
}
MAX_SEPARABLE_TERMS = 4096


_OVERRIDES: contextvars.ContextVar = contextvars.ContextVar("hfc_quadrature_overrides", default={})


@contextlib.contextmanager
def quadrature_overrides(nu=None, nodes_per_decade=None, r_min=None, r_max=None):
    """Defaults for contour quadrature used when a caller passes no explicit value."""
    given = {"nu": nu, "nodes_per_decade": nodes_per_decade, "r_min": r_min, "r_max": r_max}
    if r_min is not None and r_max is not None and not 0 < r_min < r_max:
        raise ValueError("need 0 < r_min < r_max")
    token = _OVERRIDES.set({k: v for k, v in given.items() if v is not None})
    try:
        yield
    finally:
        _OVERRIDES.reset(token)


def current_overrides() -> dict:
    return dict(_OVERRIDES.get())


def quad_profile(name: str | None = None) -> dict:
    name = name or os.environ.get("HFC_QUAD_PROFILE", "default")
    if name not in QUAD_PROFILES:
        raise ValueError(f"unknown quadrature profile {name!r}; choose from {sorted(QUAD_PROFILES)}")
    return dict(QUAD_PROFILES[name], name=name)


# ------------------------------------------------------------ ray rules


@dataclass(frozen=True)
class RayRule:
    """Nodes and weights with sum_j w_j g(z_j) ~ (1/2 pi i) int_{dSigma_nu} g(z) dz.

    The lower ray r e^{-i nu} runs outward and the upper ray r e^{i nu} inward,
    so the sector lies to the left of the path.
    """

    nu: float
    r_min: float
    r_max: float
    nodes_per_decade: int
    panel_width: float
    z: np.ndarray
    w: np.ndarray

    @classmethod
    def build(cls, nu: float, r_min: float, r_max: float, nodes_per_decade: int = 16,
              clearance: float | None = None) -> "RayRule":
        if not 0 < nu < math.pi:
            raise ValueError("contour angle must lie in (0, pi)")
        if not (0 < r_min < 1 < r_max):
            raise ValueError("need r_min < 1 < r_max")
        if nodes_per_decade < 4:
            raise ValueError("nodes_per_decade must be at least 4")
        lo, hi = math.log(r_min), math.log(r_max)
        width = math.log(10.0)
        if clearance is not None:
            width = min(width, 1.5 * clearance)
        panels = max(1, int(math.ceil((hi - lo) / width)))
        edges = np.linspace(lo, hi, panels + 1)
        x, gw = np.polynomial.legendre.leggauss(nodes_per_decade)
        half = 0.5 * (edges[1:] - edges[:-1])
        mid = 0.5 * (edges[1:] + edges[:-1])
        u = (mid[:, None] + half[:, None] * x[None, :]).reshape(-1)
        wu = (half[:, None] * gw[None, :]).reshape(-1)
        r = np.exp(u)
        c, s = math.cos(nu), math.sin(nu)
        lower = r * c - 1j * (r * s)
        upper = r * c + 1j * (r * s)
        z = np.concatenate([lower, upper])
        w = np.concatenate([lower * wu, -upper * wu]) / (2j * math.pi)
        return cls(nu, r_min, r_max, nodes_per_decade, (hi - lo) / panels, z, w)

    @property
    def size(self) -> int:
        return self.z.size

    def meta(self) -> dict:
        return {"nu": self.nu, "r_min": self.r_min, "r_max": self.r_max,
                "nodes_per_decade": self.nodes_per_decade, "panel_width": self.panel_width, "nodes": int(self.size)}


def cauchy_self_test(nu: float, nodes_per_decade: int, clearance: float | None = None, tol: float = 1e-8) -> float:
    """(1/2 pi i) int Phi_1(z)/(z - 1) dz must reproduce Phi_1(1) = 1/4."""
    rule = RayRule.build(nu, 1e-12, 1e12, nodes_per_decade, clearance)
    z = rule.z
    val = np.sum(rule.w * (z / (1 + z) ** 2) / (z - 1.0))
    err = abs(val - 0.25)
    if not err <= tol:
        raise QuadratureSelfTestError(f"Cauchy self-test error {err:.2e} at nu={nu:.4f}")
    return float(err)


class ContourQuadrature:
    """Per-coordinate ray rules plus a resolvent cache."""

    def __init__(self, rules: Sequence[RayRule | None], self_test: bool = True):
        self.rules = list(rules)
        self._cache: dict = {}
        self.self_test_error = None
        if self_test:
            errs = [cauchy_self_test(r.nu, r.nodes_per_decade, r.panel_width / 1.5 if r.panel_width < math.log(10) else None)
                    for r in self.rules if r is not None]
            self.self_test_error = max(errs) if errs else 0.0

    @property
    def d(self) -> int:
        return len(self.rules)

    def resolvents(self, k: int, A: np.ndarray) -> np.ndarray:
        A = np.asarray(A, dtype=complex)
        key = (k, A.shape, A.tobytes())
        if key not in self._cache:
            self._cache[key] = resolvent_stack(A, self.rules[k].z)
        return self._cache[key]

    def meta(self) -> dict:
        return {"coordinates": [None if r is None else r.meta() for r in self.rules],
                "self_test_error": self.self_test_error}


# ---------------------------------------------------------- term expansion


def _merge(a: dict, b: dict) -> dict:
    out = {k: list(v) for k, v in a.items()}
    for k, v in b.items():
        out.setdefault(k, []).extend(v)
    return out


def separable_terms(e: Expr, offset: int = 0, limit: int = MAX_SEPARABLE_TERMS) -> list | None:
    """Expand into sum_i c_i prod_k g_{ik}(z_k); factors are single-coordinate trees on coordinate 0.

    Returns None when the expansion would exceed ``limit`` terms.
    """
    op = e.op
    if op == "const":
        return [(e.a, {})]
    if op in ("pow", "exp", "shift_recip"):
        return [(1.0 + 0j, {e.coord + offset: [Expr(op, coord=0, s=e.s, a=e.a)]})]
    if op == "dilate":
        inner = separable_terms(e.args[0], offset, limit)
        if inner is None:
            return None
        k = e.coord + offset
        out = []
        for c, fac in inner:
            fac = dict(fac)
            if k in fac:
                fac[k] = [Expr("dilate", (Expr("mul", tuple(fac[k])),), 0, t=e.t)]
            out.append((c, fac))
        return out
    if op == "add":
        out = []
        for a in e.args:
            part = separable_terms(a, offset, limit)
            if part is None:
                return None
            out.extend(part)
            if len(out) > limit:
                return None
        return out
    if op == "mul":
        out = [(1.0 + 0j, {})]
        for a in e.args:
            part = separable_terms(a, offset, limit)
            if part is None or len(out) * len(part) > limit:
                return None
            out = [(c1 * c2, _merge(f1, f2)) for c1, f1 in out for c2, f2 in part]
        return out
    out, off = [(1.0 + 0j, {})], offset
    for a in e.args:
        part = separable_terms(a, off, limit)
        if part is None or len(out) * len(part) > limit:
            return None
        out = [(c1 * c2, _merge(f1, f2)) for c1, f1 in out for c2, f2 in part]
        off += arity(a)
    return out


def _factor_values(factors: list, z: np.ndarray) -> np.ndarray:
    out = np.ones_like(z)
    for g in factors:
        out = out * evaluate(g, [z])
    return out


# ----------------------------------------------------------------- results


@dataclass
class FCResult:
    value: np.ndarray
    tail_estimate: float
    meta: dict = field(default_factory=dict)


def _form_angles(form: H01Form) -> list:
    """Per coordinate, the smallest domain angle among components that use it."""
    angles = [math.pi] * form.d
    for key, f in form.components.items():
        for k in key:
            angles[k] = min(angles[k], f.domain.angles[k])
    return angles


def _resolve_nu(form: H01Form, tuple_: CommutingTuple, nu) -> tuple[list, list, list]:
    theta = _form_angles(form)
    omega = list(tuple_.types())
    used = set().union(*form.components.keys()) if form.components else set()
    if nu is None:
        nu = [None] * form.d
    elif np.isscalar(nu):
        nu = [float(nu)] * form.d
    nu = list(nu)
    if len(nu) != form.d:
        raise ValueError("need one contour angle per coordinate")
    for k in range(form.d):
        if k not in used:
            continue
        if not omega[k] < theta[k]:
            raise AngleOrderViolation(
                f"coordinate {k}: spectral angle {omega[k]:.6g} is not below the function angle {theta[k]:.6g}")
        if nu[k] is None:
            nu[k] = 0.5 * (omega[k] + min(theta[k], math.pi))
        if not omega[k] < nu[k] < theta[k]:
            raise AngleOrderViolation(
                f"coordinate {k}: need {omega[k]:.6g} < nu = {nu[k]:.6g} < {theta[k]:.6g}")
    return nu, omega, theta


def build_quadrature(form: H01Form, tuple_: CommutingTuple, nu=None, nodes_per_decade: int = 16,
                     tail_tol: float = 1e-10, self_test: bool = True, r_min: float | None = None,
                     r_max: float | None = None) -> ContourQuadrature:
    """Choose per-coordinate radial ranges from the certificates so the certified tails are below tail_tol.

    r_min / r_max replace the chosen range ends; the reported tail bound follows the range used.
    """
    nu, omega, theta = _resolve_nu(form, tuple_, nu)
    rules: list = [None] * form.d
    for k in range(form.d):
        comps = [f for key, f in form.components.items() if k in key]
        if not comps:
            continue
        lo_exp = 0.0
        for f in comps:
            cert = f.certificate
            s = cert.s(k)
            r = (tail_tol * s / max(cert.C, 1.0)) ** (1.0 / s)
            lo_exp = min(lo_exp, math.floor(math.log10(max(r, 1e-300))))
        lam = np.abs(np.linalg.eigvals(tuple_[k]))
        nz = lam[lam > ZERO_THRESHOLD * max(lam.max(), 1e-300)]
        if nz.size:
            lo_exp = min(lo_exp, math.floor(math.log10(nz.min())) - 3)
            hi_exp = max(-lo_exp, math.ceil(math.log10(nz.max())) + 3)
        else:
            hi_exp = -lo_exp
        clearance = min(nu[k] - omega[k], theta[k] - nu[k])
        lo = 10.0 ** lo_exp if r_min is None else float(r_min)
        hi = 10.0 ** hi_exp if r_max is None else float(r_max)
        if not lo < hi:
            raise ValueError(f"empty radial range [{lo:.3g}, {hi:.3g}]")
        rules[k] = RayRule.build(nu[k], lo, hi, nodes_per_decade, clearance)
    return ContourQuadrature(rules, self_test=self_test)


def _sectorial_bound(quad: ContourQuadrature, k: int, A: np.ndarray) -> float:
    R = quad.resolvents(k, A)
    z = quad.rules[k].z
    return float(np.max(np.linalg.norm(z[:, None, None] * R, ord=2, axis=(1, 2))))


def _tail_bound(cert: DecayCertificate, quad: ContourQuadrature, cnu: dict) -> float:
    """C * [prod full_k - prod (full_k - tail_k)] <= C sum_k tail_k prod_{j != k} full_j."""
    full, tail = {}, {}
    for k, s in cert.exponents:
        rule = quad.rules[k]
        full[k] = cnu[k] / math.pi * scipy.special.beta(s, s)
        tail[k] = cnu[k] / math.pi * (rule.r_min ** s + rule.r_max ** (-s)) / s
    total = 0.0
    for k in full:
        prod = tail[k]
        for j in full:
            if j != k:
                prod *= full[j]
        total += prod
    return cert.C * total


def _component_value(f: SectorFunction, key: frozenset, tuple_: CommutingTuple, quad: ContourQuadrature) -> np.ndarray:
    n = tuple_.n
    coords = sorted(key)
    terms = separable_terms(f.expr)
    if terms is not None:
        out = np.zeros((n, n), complex)
        stacks = {k: quad.resolvents(k, tuple_[k]) for k in coords}
        cache: dict = {}
        for c, fac in terms:
            if c == 0:
                continue
            M = c * np.eye(n, dtype=complex)
            for k in coords:
                facs = fac.get(k, [])
                tag = (k, tuple(facs))
                if tag not in cache:
                    rule = quad.rules[k]
                    g = _factor_values(facs, rule.z)
                    cache[tag] = np.tensordot(rule.w * g, stacks[k], axes=(0, 0))
                M = M @ cache[tag]
            out += M
        return out
    if len(coords) > 2:
        raise ValueError("expression too large to expand and more than two active coordinates")
    log.debug("dense tensor-grid evaluation for component %s", coords)
    if len(coords) == 1:
        k = coords[0]
        rule = quad.rules[k]
        zs = [np.complex128(1.0)] * f.d
        zs[k] = rule.z
        g = np.broadcast_to(f.raw(zs), rule.z.shape)
        return np.tensordot(rule.w * g, quad.resolvents(k, tuple_[k]), axes=(0, 0))
    k1, k2 = coords
    r1, r2 = quad.rules[k1], quad.rules[k2]
    zs = [np.complex128(1.0)] * f.d
    zs[k1] = r1.z[:, None]
    zs[k2] = r2.z[None, :]
    F = np.broadcast_to(f.raw(zs), (r1.size, r2.size)) * r1.w[:, None] * r2.w[None, :]
    R1, R2 = quad.resolvents(k1, tuple_[k1]), quad.resolvents(k2, tuple_[k2])
    inner = np.tensordot(F, R2, axes=(1, 0))  # (N1, n, n)
    return np.einsum("jab,jbc->ac", R1, inner)


def contour_fc(f, tuple_: CommutingTuple, nu=None, quad: ContourQuadrature | None = None,
               nodes_per_decade: int | None = None, tail_tol: float | None = None) -> FCResult:
    """f(A_1, ..., A_d) by quadrature of the resolvent integral over each H01 component."""
    form = H01Form.of(f, tuple_.d)
    if form.d != tuple_.d:
        raise ValueError(f"function has {form.d} variables but the tuple has {tuple_.d} operators")
    prof = quad_profile()
    ov = _OVERRIDES.get()
    npd = nodes_per_decade or ov.get("nodes_per_decade") or prof["nodes_per_decade"]
    tol = tail_tol if tail_tol is not None else prof["tail_tol"]
    if nu is None:
        nu = ov.get("nu")
    nu_used, omega, theta = _resolve_nu(form, tuple_, nu if quad is None else
                                        [None if r is None else r.nu for r in quad.rules])
    if quad is None:
        quad = build_quadrature(form, tuple_, nu_used, npd, tol, r_min=ov.get("r_min"), r_max=ov.get("r_max"))
    n = tuple_.n
    value = form.constant_value * np.eye(n, dtype=complex)
    tail = 0.0
    cnu: dict = {}
    for key, comp in sorted(form.components.items(), key=lambda kv: sorted(kv[0])):
        if not key:
            continue
        for k in key:
            if quad.rules[k] is None:
                raise ValueError(f"quadrature has no rule for coordinate {k}")
            if k not in cnu:
                cnu[k] = _sectorial_bound(quad, k, tuple_[k])
        value = value + _component_value(comp, key, tuple_, quad)
        tail += _tail_bound(comp.certificate, quad, cnu)
    meta = {"nu": [None if r is None else r.nu for r in quad.rules], "omega": omega, "theta": theta,
            "quadrature": quad.meta(), "sectorial_bounds": {str(k): v for k, v in sorted(cnu.items())}}
    return FCResult(value, float(tail), meta)


# ----------------------------------------------------------------- oracle


def spectral_oracle_fc(f, tuple_: CommutingTuple, seed: int = 0) -> np.ndarray:
    """S diag(f(lambda)) S^{-1}; components vanish on joint eigenvectors with a zero active coordinate.

    An uncertified SectorFunction is evaluated pointwise at the joint eigenvalues.
    """
    js = joint_spectral_decompose(tuple_, seed=seed)
    lam = js.eigenvalues
    if isinstance(f, SectorFunction) and not f.is_constant() and f.certificate is None:
        zs = [lam[:, k] for k in range(tuple_.d)]
        check_domain(zs, f.domain.angles, f.used)
        return js.apply(np.broadcast_to(f.raw(zs), (tuple_.n,)).astype(complex))
    form = H01Form.of(f, tuple_.d)
    scale = np.abs(lam).max(axis=0)
    zero = np.abs(lam) < ZERO_THRESHOLD * np.where(scale > 0, scale, 1.0)
    values = np.full(tuple_.n, form.constant_value, dtype=complex)
    for key, comp in form.components.items():
        if not key:
            continue
        keep = ~np.any(zero[:, sorted(key)], axis=1)
        if not keep.any():
            continue
        zs = [lam[keep, k] if k in key else np.ones(keep.sum(), complex) for k in range(tuple_.d)]
        check_domain(zs, comp.domain.angles, comp.used)
        values[keep] += np.broadcast_to(comp.raw(zs), (int(keep.sum()),))
    return js.apply(values)


# -------------------------------------------------------------- ensembles


def _embed_atom(base: SectorFunction, t: float, k: int, d: int) -> SectorFunction:
    return base.dilate(t).embed(d, [k])


def random_h01(rng: np.random.Generator, d: int, angles: Sequence[float], max_atoms: int = 8,
               kinds: Sequence[str] = ("phi", "sqrt_exp")) -> H01Form:
    """Seeded random H01 function: unit-disc coefficients times tensor products of dilated atoms."""
    def disc():
        r, a = math.sqrt(rng.random()), 2 * math.pi * rng.random()
        return complex(r * math.cos(a), r * math.sin(a))

    terms = [constant(disc(), d)]
    for _ in range(int(rng.integers(1, max_atoms + 1))):
        size = int(rng.integers(1, d + 1))
        subset = sorted(rng.choice(d, size=size, replace=False).tolist())
        term = None
        for k in subset:
            allowed = [c for c in kinds if c != "sqrt_exp" or angles[k] < math.pi / 2]
            kind = allowed[int(rng.integers(len(allowed)))]
            t = 10.0 ** rng.uniform(-3, 3)
            base = phi_m(1.0, angles[k]) if kind == "phi" else sqrt_exp(angles[k])
            atom = _embed_atom(base, t, k, d)
            term = atom if term is None else term * atom
        terms.append(disc() * term)
    return H01Form.from_terms(terms, d)


def function_ensemble(d: int, angles: Sequence[float], size: int, seed: int, max_atoms: int = 8,
                      kinds: Sequence[str] = ("phi", "sqrt_exp")) -> list:
    """The constant 1 followed by ``size`` seeded random H01 functions (empty when size == 0)."""
    if size <= 0:
        return []
    rng = np.random.default_rng(seed)
    out = [H01Form.of(constant(1.0, d))]
    out += [random_h01(rng, d, angles, max_atoms, kinds) for _ in range(size)]
    return out


def form_sup(form: H01Form, angles: Sequence[float], per_decade: int = 64) -> float:
    coords = sorted(set().union(*form.components.keys())) if form.components else []
    return boundary_sup(form.raw, angles, coords, per_decade=per_decade).value


@dataclass
class FCConstantEstimate:
    value: float
    argmax: int
    ratios: list
    norms: list
    sups: list
    angles: list

    @property
    def witness(self) -> int:
        return self.argmax


def _shared_quadrature(forms: list, tuple_: CommutingTuple, nu, npd: int, tol: float) -> ContourQuadrature | None:
    combined = [f for form in forms for f in form.components.values() if not f.is_constant()]
    if not combined:
        return None
    merged: dict = {}
    for f in combined:
        key = f.certificate.active
        # keep the most demanding certificate per active set for range selection
        prev = merged.get(key)
        if prev is None or f.certificate.C > prev.certificate.C or min(s for _, s in f.certificate.exponents) < min(
                s for _, s in prev.certificate.exponents):
            merged[key] = f
    probe = H01Form(merged, tuple_.d)
    rules = []
    for k in range(tuple_.d):
        ov = _OVERRIDES.get()
        rule_sets = [build_quadrature(H01Form({key: f}, tuple_.d), tuple_, nu, npd, tol, self_test=False,
                                      r_min=ov.get("r_min"), r_max=ov.get("r_max")).rules[k]
                     for key, f in merged.items() if k in key]
        if not rule_sets:
            rules.append(None)
            continue
        lo = min(r.r_min for r in rule_sets)
        hi = max(r.r_max for r in rule_sets)
        base = rule_sets[0]
        _, omega, theta = _resolve_nu(probe, tuple_, nu)
        clearance = min(base.nu - omega[k], theta[k] - base.nu)
        rules.append(RayRule.build(base.nu, lo, hi, npd, clearance))
    return ContourQuadrature(rules)


def fc_constant_estimate(tuple_: CommutingTuple, domain: SectorDomain, ensemble_size: int = 16, seed: int = 0,
                         method: str = "contour", ensemble: list | None = None, nu=None,
                         nodes_per_decade: int | None = None, tail_tol: float | None = None) -> FCConstantEstimate:
    """Lower bound on the calculus constant: max over a seeded ensemble of ||f(A)|| / sup|f|."""
    angles = list(domain.angles)
    if ensemble is None:
        ensemble = function_ensemble(tuple_.d, angles, ensemble_size, seed)
    if not ensemble:
        return FCConstantEstimate(0.0, -1, [], [], [], angles)
    prof = quad_profile()
    ov = _OVERRIDES.get()
    npd = nodes_per_decade or ov.get("nodes_per_decade") or prof["nodes_per_decade"]
    tol = tail_tol if tail_tol is not None else prof["tail_tol"]
    nu = ov.get("nu") if nu is None else nu
    quad = _shared_quadrature(ensemble, tuple_, nu, npd, tol) if method == "contour" else None
    norms, sups = [], []
    for form in ensemble:
        if method == "oracle":
            M = spectral_oracle_fc(form, tuple_)
        elif quad is None or not form.components.keys() - {frozenset()}:
            M = form.constant_value * np.eye(tuple_.n, dtype=complex)
        else:
            M = contour_fc(form, tuple_, quad=quad).value
        norms.append(operator_norm(M, tuple_.space))
        sups.append(form_sup(form, angles))
    ratios = [nv / sv if sv > 0 else 0.0 for nv, sv in zip(norms, sups)]
    j = int(np.argmax(ratios))
    return FCConstantEstimate(float(ratios[j]), j, ratios, norms, sups, angles)


@dataclass
class AngleProfile:
    angles: list
    estimates: list
    raw: list
    flagged: list
    flag_multiple: float


def angle_dependence_profile(tuple_: CommutingTuple, ladder: Sequence[float], ensemble_size: int = 12,
                             seed: int = 0, method: str = "contour", flag_multiple: float = 10.0) -> AngleProfile:
    """fc_constant_estimate along a ladder of sector angles with one shared ensemble recipe.

    f(A) is computed once (it does not depend on the declared angle). A lower
    bound at a larger angle is also a lower bound at every smaller angle, so the
    reported profile takes the running maximum from the top rung down.
    """
    ladder = sorted(float(a) for a in ladder)
    if not ladder or ensemble_size <= 0:
        return AngleProfile(ladder, [], [], [], flag_multiple)
    omega = max(tuple_.types())
    for a in ladder:
        if not a > omega:
            raise AngleOrderViolation(f"ladder angle {a:.6g} is not above the spectral angle {omega:.6g}")
    kinds = ("phi",) if ladder[-1] >= math.pi / 2 else ("phi", "sqrt_exp")
    lowest = [ladder[0]] * tuple_.d
    ensemble = function_ensemble(tuple_.d, lowest, ensemble_size, seed, kinds=kinds)
    ov = _OVERRIDES.get()
    quad = _shared_quadrature(ensemble, tuple_, ov.get("nu"),
                              ov.get("nodes_per_decade") or quad_profile()["nodes_per_decade"],
                              quad_profile()["tail_tol"]) if method == "contour" else None
    norms = []
    for form in ensemble:
        if method == "oracle":
            M = spectral_oracle_fc(form, tuple_)
        elif quad is None or not form.components.keys() - {frozenset()}:
            M = form.constant_value * np.eye(tuple_.n, dtype=complex)
        else:
            M = contour_fc(form, tuple_, quad=quad).value
        norms.append(operator_norm(M, tuple_.space))
    raw = []
    for a in ladder:
        angles = [a] * tuple_.d
        sups = [form_sup(form, angles) for form in ensemble]
        raw.append(max(nv / sv if sv > 0 else 0.0 for nv, sv in zip(norms, sups)))
    est = list(np.maximum.accumulate(np.array(raw)[::-1])[::-1])
    top = est[-1]
    flagged = [a for a, v in zip(ladder, est) if v > flag_multiple * top]
    return AngleProfile(ladder, [float(v) for v in est], [float(v) for v in raw], flagged, flag_multiple)


# --------------------------------------------------------- Phi_m checks


@dataclass
class PhiApproximation:
    m: list
    errors: list
    precondition_ok: bool
    kernel_fraction: float
    monotone_from: int | None
    fitted_exponent: float | None


def phi_approximation_check(A, x, m_ladder: Sequence[float], space: SpaceModel | None = None,
                            angle: float | None = None, tail_tol: float = 1e-12) -> PhiApproximation:
    """||Phi_m(A) x - x|| along the ladder, with Phi_m(A) from the contour integral."""
    tuple_ = CommutingTuple((A,), space)
    space = tuple_.space
    x = np.asarray(x, dtype=complex).reshape(-1)
    split = ergodic_split(tuple_)
    nx = space.norm(x)
    kern = float(space.norm(split[frozenset()] @ x) / nx) if nx > 0 else 0.0
    ok = kern <= 1e-10
    omega = spectral_angle(tuple_[0])
    theta = angle if angle is not None else max(0.75 * math.pi, 0.5 * (omega + math.pi))
    errors = []
    for m in m_ladder:
        M = contour_fc(phi_m(m, theta), tuple_, tail_tol=tail_tol).value
        errors.append(float(space.norm(M @ x - x)))
    errs = np.array(errors)
    mono = None
    for i in range(len(errs)):
        if np.all(np.diff(errs[i:]) <= 1e-12 * max(errs.max(), 1e-300)):
            mono = i
            break
    exponent = None
    ms = np.asarray(m_ladder, dtype=float)
    tail = slice(len(ms) // 2, None)
    good = errs[tail] > 0
    if good.sum() >= 2:
        slope = np.polyfit(np.log(ms[tail][good]), np.log(errs[tail][good]), 1)[0]
        exponent = float(-slope)
    return PhiApproximation([float(m) for m in m_ladder], errors, ok, kern, mono, exponent)


def phi_m_matrix(A, m: float) -> np.ndarray:
    """Rational evaluation m^2 A (m + A)^{-1} (1 + m A)^{-1}."""
    A = np.asarray(A, dtype=complex)
    eye = np.eye(A.shape[0])
    return m * m * A @ np.linalg.solve(m * eye + A, np.linalg.solve(eye + m * A, eye))


@dataclass
class IntegralIdentity:
    defect: float
    precondition_ok: bool
    nodes: int
    s_range: tuple


def integral_identity_check(A, m: float, nodes: int = 400, s_range: tuple = (1e-6, 1e3)) -> IntegralIdentity:
    """int_0^inf A e^{-sA} Phi_m(A) ds against Phi_m(A).

    Trapezoid in log s over the log-spaced nodes (the integrand times s is smooth
    and decays at both ends in that variable) plus one linear panel on [0, s_min].
    """
    A = np.asarray(A, dtype=complex)
    if spectral_angle(A) >= math.pi / 2:
        return IntegralIdentity(float("nan"), False, nodes, tuple(s_range))
    target = phi_m_matrix(A, m)
    s = np.logspace(math.log10(s_range[0]), math.log10(s_range[1]), nodes)
    vals = np.array([A @ scipy.linalg.expm(-si * A) @ target for si in s])
    du = math.log(s[-1] / s[0]) / (nodes - 1)
    w = du * s
    w[0] *= 0.5
    w[-1] *= 0.5
    integral = np.tensordot(w, vals, axes=(0, 0)) + 0.5 * s[0] * (A @ target + vals[0])
    defect = float(np.linalg.norm(integral - target, 2))
    return IntegralIdentity(defect, True, nodes, tuple(s_range))
