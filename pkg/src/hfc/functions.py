"""Holomorphic functions on products of sectors as immutable expression trees.

Primitives act on a single coordinate (0-based): constants, principal powers
z_k^s, shifted reciprocals (a + z_k)^{-1}, e^{-z_k}; dilation z_k -> t z_k
rewrites a subtree. Trees combine by sum, product and tensor product (the
latter places its arguments on consecutive coordinate blocks).

A ``DecayCertificate`` records |f(z)| <= C prod_{k in active} x_k^{s_k}/(1+x_k)^{2 s_k}
with x_k = |z_k|. Named constructors declare certificates valid on their
declared sector; sums, products, tensors and dilations propagate them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import DomainViolation

OPS = ("const", "pow", "exp", "shift_recip", "dilate", "add", "mul", "tensor")


# ----------------------------------------------------------------- domains


@dataclass(frozen=True)
class SectorDomain:
    angles: tuple

    def __post_init__(self):
        angles = tuple(float(a) for a in self.angles)
        if not angles:
            raise ValueError("a domain needs at least one coordinate")
        if any(not (0.0 < a <= math.pi) for a in angles):
            raise ValueError("sector angles must lie in (0, pi]")
        object.__setattr__(self, "angles", angles)

    @classmethod
    def uniform(cls, d: int, theta: float) -> "SectorDomain":
        return cls((theta,) * d)

    @property
    def d(self) -> int:
        return len(self.angles)

    def intersect(self, other: "SectorDomain") -> "SectorDomain":
        if other.d != self.d:
            raise ValueError("domains of different dimension")
        return SectorDomain(tuple(min(a, b) for a, b in zip(self.angles, other.angles)))

    def concat(self, other: "SectorDomain") -> "SectorDomain":
        return SectorDomain(self.angles + other.angles)


# -------------------------------------------------------------- expressions


@dataclass(frozen=True)
class Expr:
    op: str
    args: tuple = ()
    coord: int = 0
    s: float = 0.0
    a: complex = 0j
    t: float = 1.0

    def __post_init__(self):
        if self.op not in OPS:
            raise ValueError(f"unknown op {self.op!r}")
        object.__setattr__(self, "a", complex(self.a))
        object.__setattr__(self, "s", float(self.s))
        object.__setattr__(self, "t", float(self.t))
        object.__setattr__(self, "coord", int(self.coord))
        if self.op in ("pow", "exp", "shift_recip", "dilate") and self.coord < 0:
            raise ValueError("coordinates are 0-based and nonnegative")
        if self.op == "dilate" and not self.t > 0:
            raise ValueError("dilation factor must be positive")
        if self.op == "dilate" and len(self.args) != 1:
            raise ValueError("dilate takes exactly one argument")
        if self.op in ("add", "mul", "tensor") and not self.args:
            raise ValueError(f"{self.op} needs arguments")


def const_expr(a: complex) -> Expr:
    return Expr("const", a=a)


def arity(e: Expr) -> int:
    op = e.op
    if op == "const":
        return 0
    if op in ("pow", "exp", "shift_recip"):
        return e.coord + 1
    if op == "dilate":
        return max(arity(e.args[0]), e.coord + 1)
    if op == "tensor":
        return sum(arity(a) for a in e.args)
    return max(arity(a) for a in e.args)


def used_coords(e: Expr, offset: int = 0) -> frozenset:
    op = e.op
    if op == "const":
        return frozenset()
    if op in ("pow", "exp", "shift_recip"):
        return frozenset({e.coord + offset})
    if op == "dilate":
        return used_coords(e.args[0], offset)
    if op == "tensor":
        out, off = set(), offset
        for a in e.args:
            out |= used_coords(a, off)
            off += arity(a)
        return frozenset(out)
    return frozenset().union(*(used_coords(a, offset) for a in e.args))


def _principal_pow(z, s: float):
    if s == 1.0:
        return z
    return np.exp(s * np.log(z))


def evaluate(e: Expr, zs: Sequence) -> np.ndarray:
    """Evaluate without domain checks; ``zs`` holds one broadcastable array per coordinate."""
    op = e.op
    if op == "const":
        return np.complex128(e.a)
    if op == "pow":
        return _principal_pow(zs[e.coord], e.s)
    if op == "exp":
        return np.exp(-zs[e.coord])
    if op == "shift_recip":
        return 1.0 / (e.a + zs[e.coord])
    if op == "dilate":
        moved = list(zs)
        moved[e.coord] = e.t * zs[e.coord]
        return evaluate(e.args[0], moved)
    if op == "add":
        out = evaluate(e.args[0], zs)
        for a in e.args[1:]:
            out = out + evaluate(a, zs)
        return out
    if op == "mul":
        out = evaluate(e.args[0], zs)
        for a in e.args[1:]:
            out = out * evaluate(a, zs)
        return out
    out, off = np.complex128(1.0), 0
    for a in e.args:
        n = arity(a)
        out = out * evaluate(a, zs[off:off + n])
        off += n
    return out


def reflect_expr(e: Expr) -> Expr:
    """Tree of z -> conj(f(conj z)): conjugate every complex constant."""
    if e.op in ("const", "shift_recip"):
        return Expr(e.op, coord=e.coord, a=e.a.conjugate())
    if e.op in ("pow", "exp"):
        return e
    return Expr(e.op, tuple(reflect_expr(a) for a in e.args), e.coord, e.s, e.a, e.t)


def shift_expr(e: Expr, offset: int) -> Expr:
    """Move every coordinate of the tree by ``offset``."""
    if offset == 0 or e.op == "const":
        return e
    if e.op in ("pow", "exp", "shift_recip"):
        return Expr(e.op, coord=e.coord + offset, s=e.s, a=e.a)
    if e.op == "dilate":
        return Expr("dilate", (shift_expr(e.args[0], offset),), e.coord + offset, t=e.t)
    if e.op == "tensor":
        return Expr("tensor", (shift_expr(e.args[0], offset),) + e.args[1:])
    return Expr(e.op, tuple(shift_expr(a, offset) for a in e.args))


def expr_to_json(e: Expr) -> dict:
    out: dict = {"op": e.op}
    if e.op in ("add", "mul", "tensor", "dilate"):
        out["args"] = [expr_to_json(a) for a in e.args]
    if e.op in ("pow", "exp", "shift_recip", "dilate"):
        out["coord"] = e.coord
    if e.op == "pow":
        out["s"] = e.s
    if e.op in ("const", "shift_recip"):
        out["a"] = [e.a.real, e.a.imag]
    if e.op == "dilate":
        out["t"] = e.t
    return out


def expr_from_json(obj: dict) -> Expr:
    op = obj["op"]
    args = tuple(expr_from_json(a) for a in obj.get("args", []))
    a = obj.get("a", [0.0, 0.0])
    a = complex(a[0], a[1]) if isinstance(a, (list, tuple)) else complex(a)
    return Expr(op, args, int(obj.get("coord", 0)), float(obj.get("s", 0.0)), a, float(obj.get("t", 1.0)))


# ------------------------------------------------------------ certificates


@dataclass(frozen=True)
class DecayCertificate:
    exponents: tuple  # sorted ((coord, s_k), ...)
    C: float

    def __post_init__(self):
        ex = tuple(sorted((int(k), float(s)) for k, s in dict(self.exponents).items()))
        if any(s <= 0 for _, s in ex):
            raise ValueError("decay exponents must be positive")
        if not self.C >= 0:
            raise ValueError("certificate constant must be nonnegative")
        object.__setattr__(self, "exponents", ex)
        object.__setattr__(self, "C", float(self.C))

    @classmethod
    def make(cls, exps: dict, C: float) -> "DecayCertificate":
        return cls(tuple(exps.items()), C)

    @property
    def active(self) -> frozenset:
        return frozenset(k for k, _ in self.exponents)

    def s(self, k: int) -> float:
        return dict(self.exponents)[k]

    def bound(self, zs: Sequence) -> np.ndarray:
        out = np.float64(self.C)
        for k, s in self.exponents:
            x = np.abs(zs[k])
            out = out * (x / (1.0 + x) ** 2) ** s
        return out

    def to_json(self) -> dict:
        return {"active": [k for k, _ in self.exponents], "s": [s for _, s in self.exponents], "C": self.C}

    @classmethod
    def from_json(cls, obj: dict) -> "DecayCertificate":
        if len(obj["active"]) != len(obj["s"]):
            raise ValueError("certificate active set and exponents differ in length")
        return cls(tuple(zip(obj["active"], obj["s"])), float(obj["C"]))


def _cert_mul(a: DecayCertificate | None, b: DecayCertificate | None) -> DecayCertificate | None:
    if a is None or b is None:
        return None
    ex = dict(a.exponents)
    for k, s in b.exponents:
        ex[k] = ex.get(k, 0.0) + s
    return DecayCertificate.make(ex, a.C * b.C)


def _cert_add(a: DecayCertificate | None, b: DecayCertificate | None) -> DecayCertificate | None:
    if a is None or b is None or a.active != b.active:
        return None
    # x/(1+x)^2 <= 1/4 < 1, so the smaller exponent dominates both bounds
    ex = {k: min(a.s(k), b.s(k)) for k in a.active}
    return DecayCertificate.make(ex, a.C + b.C)


def _cert_shift(c: DecayCertificate | None, offset: int) -> DecayCertificate | None:
    if c is None:
        return None
    return DecayCertificate.make({k + offset: s for k, s in c.exponents}, c.C)


def _cert_dilate(c: DecayCertificate | None, k: int, t: float) -> DecayCertificate | None:
    if c is None:
        return None
    if k not in c.active:
        return c
    return DecayCertificate.make(dict(c.exponents), c.C * max(t, 1.0 / t) ** c.s(k))


# --------------------------------------------------------- sector functions


def _as_arrays(z, d: int) -> list:
    if d == 1 and np.ndim(z) <= 1 and not isinstance(z, (list, tuple)):
        return [np.asarray(z, dtype=complex)]
    zs = [np.asarray(v, dtype=complex) for v in z]
    if len(zs) != d:
        raise ValueError(f"expected {d} coordinates, got {len(zs)}")
    return zs


def check_domain(zs: Sequence, angles: Sequence[float], coords: Iterable[int]) -> None:
    for k in coords:
        z = np.asarray(zs[k])
        bad = ~np.isfinite(z) | (z == 0) | (np.abs(np.angle(z)) >= angles[k])
        if np.any(bad):
            raise DomainViolation(f"coordinate {k} leaves the open sector of half-angle {angles[k]:.6g}")


class SectorFunction:
    """Expression tree + declared domain + optional decay certificate."""

    __slots__ = ("expr", "domain", "certificate")

    def __init__(self, expr: Expr, domain: SectorDomain, certificate: DecayCertificate | None = None):
        if arity(expr) > domain.d:
            raise ValueError(f"expression uses {arity(expr)} coordinates but domain has {domain.d}")
        if certificate is not None and not certificate.active <= frozenset(range(domain.d)):
            raise ValueError("certificate refers to coordinates outside the domain")
        self.expr = expr
        self.domain = domain
        self.certificate = certificate

    @property
    def d(self) -> int:
        return self.domain.d

    @property
    def used(self) -> frozenset:
        return used_coords(self.expr)

    def is_constant(self) -> bool:
        return not self.used

    def __call__(self, *z):
        zs = _as_arrays(z[0] if len(z) == 1 else z, self.d)
        check_domain(zs, self.domain.angles, self.used)
        out = evaluate(self.expr, zs)
        shape = np.broadcast_shapes(*(np.shape(v) for v in zs))
        out = np.broadcast_to(out, shape)
        return complex(out) if out.ndim == 0 else np.array(out)

    def raw(self, zs: Sequence) -> np.ndarray:
        return evaluate(self.expr, zs)

    def __repr__(self) -> str:
        return f"SectorFunction(d={self.d}, op={self.expr.op}, cert={self.certificate})"

    # algebra
    def _coerce(self, other) -> "SectorFunction":
        if isinstance(other, SectorFunction):
            if other.d != self.d:
                raise ValueError("functions of different arity; use tensor()")
            return other
        if np.isscalar(other):
            return constant(complex(other), self.d)
        return NotImplemented

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return SectorFunction(Expr("add", (self.expr, other.expr)), self.domain.intersect(other.domain),
                              _cert_add(self.certificate, other.certificate))

    __radd__ = __add__

    def __mul__(self, other):
        if np.isscalar(other):
            c = complex(other)
            cert = None if self.certificate is None else DecayCertificate(self.certificate.exponents, abs(c) * self.certificate.C)
            return SectorFunction(Expr("mul", (const_expr(c), self.expr)), self.domain, cert)
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return SectorFunction(Expr("mul", (self.expr, other.expr)), self.domain.intersect(other.domain),
                              _cert_mul(self.certificate, other.certificate))

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0

    def __sub__(self, other):
        return self + (-1.0) * (other if isinstance(other, SectorFunction) else constant(complex(other), self.d))

    def tensor(self, other: "SectorFunction") -> "SectorFunction":
        return SectorFunction(
            Expr("tensor", (self.expr, other.expr)),
            self.domain.concat(other.domain),
            _cert_mul(self.certificate, _cert_shift(other.certificate, self.d)),
        )

    def dilate(self, t: float, coord: int = 0) -> "SectorFunction":
        return SectorFunction(Expr("dilate", (self.expr,), coord, t=t), self.domain,
                              _cert_dilate(self.certificate, coord, t))

    def embed(self, d: int, coords: Sequence[int]) -> "SectorFunction":
        """View this function of self.d variables as a function of d variables at ``coords``."""
        coords = list(coords)
        if len(coords) != self.d or len(set(coords)) != len(coords):
            raise ValueError("need one distinct target coordinate per variable")
        e = _remap(self.expr, coords)
        angles = [math.pi] * d
        for k, c in enumerate(coords):
            angles[c] = self.domain.angles[k]
        cert = None
        if self.certificate is not None:
            cert = DecayCertificate.make({coords[k]: s for k, s in self.certificate.exponents}, self.certificate.C)
        return SectorFunction(e, SectorDomain(tuple(angles)), cert)

    def with_certificate(self, cert: DecayCertificate | None) -> "SectorFunction":
        return SectorFunction(self.expr, self.domain, cert)

    def with_domain(self, domain: SectorDomain) -> "SectorFunction":
        return SectorFunction(self.expr, domain, self.certificate)

    def to_json(self) -> dict:
        out = {"ast": expr_to_json(self.expr), "domain": list(self.domain.angles)}
        if self.certificate is not None:
            out["certificate"] = self.certificate.to_json()
        return out

    @classmethod
    def from_json(cls, obj: dict) -> "SectorFunction":
        e = expr_from_json(obj["ast"])
        angles = obj.get("domain")
        if angles is None:
            angles = [math.pi] * max(arity(e), 1)
        cert = DecayCertificate.from_json(obj["certificate"]) if obj.get("certificate") else None
        return cls(e, SectorDomain(tuple(angles)), cert)


def _remap(e: Expr, coords: list) -> Expr:
    """Rename coordinate k to coords[k]; tensors are flattened into products."""
    if e.op == "const":
        return e
    if e.op in ("pow", "exp", "shift_recip"):
        return Expr(e.op, coord=coords[e.coord], s=e.s, a=e.a)
    if e.op == "dilate":
        return Expr("dilate", (_remap(e.args[0], coords),), coords[e.coord], t=e.t)
    if e.op == "tensor":
        parts, off = [], 0
        for a in e.args:
            n = arity(a)
            parts.append(_remap(a, coords[off:off + n]))
            off += n
        return Expr("mul", tuple(parts))
    return Expr(e.op, tuple(_remap(a, coords) for a in e.args))


def conjugate_reflect(f):
    """f~(z) = conj(f(conj z)); works on SectorFunction and H01Form."""
    if isinstance(f, H01Form):
        return H01Form({k: conjugate_reflect(v) for k, v in f.components.items()}, f.d)
    return SectorFunction(reflect_expr(f.expr), f.domain, f.certificate)


# ------------------------------------------------------------ constructors


def constant(c: complex, d: int = 1) -> SectorFunction:
    return SectorFunction(const_expr(c), SectorDomain.uniform(d, math.pi), DecayCertificate((), abs(c)))


def power(s: float, coord: int = 0, d: int = 1, angle: float = math.pi) -> SectorFunction:
    return SectorFunction(Expr("pow", coord=coord, s=s), SectorDomain.uniform(d, angle))


def exp_neg(coord: int = 0, d: int = 1, angle: float = math.pi / 2) -> SectorFunction:
    return SectorFunction(Expr("exp", coord=coord), SectorDomain.uniform(d, angle))


def shift_recip(a: complex, coord: int = 0, d: int = 1, angle: float = math.pi) -> SectorFunction:
    return SectorFunction(Expr("shift_recip", coord=coord, a=a), SectorDomain.uniform(d, angle))


DEFAULT_PHI_ANGLE = 0.75 * math.pi


def phi_m(m: float, angle: float = DEFAULT_PHI_ANGLE) -> SectorFunction:
    """m^2 z / ((m + z)(1 + m z)), certified with s = 1 on the sector of half-angle ``angle``.

    On that sector |m + z| >= cos(angle/2)(m + |z|), and on the positive axis
    m^2 (1+x)^2 <= m (m + x)(1 + m x); together C = m / cos^2(angle/2).
    """
    if not m > 0:
        raise ValueError("m must be positive")
    if not 0 < angle < math.pi:
        raise ValueError("angle must lie in (0, pi)")
    m = float(m)
    e = Expr("mul", (const_expr(m), Expr("pow", coord=0, s=1.0),
                     Expr("shift_recip", coord=0, a=m), Expr("shift_recip", coord=0, a=1.0 / m)))
    C = m / math.cos(angle / 2) ** 2
    return SectorFunction(e, SectorDomain((angle,)), DecayCertificate(((0, 1.0),), C))


def phi_m_tensor(m: float, d: int, angle: float = DEFAULT_PHI_ANGLE) -> SectorFunction:
    f = phi_m(m, angle)
    out = f
    for _ in range(d - 1):
        out = out.tensor(f)
    return out


def sqrt_exp(angle: float = math.pi / 4) -> SectorFunction:
    """z^{1/2} e^{-z} on a sector of half-angle < pi/2, certified with s = 1/2.

    |z^{1/2} e^{-z}| (1+|z|)/|z|^{1/2} <= (1+x) e^{-x cos(angle)}, maximal at
    x = 1/c - 1 with value e^{c-1}/c, c = cos(angle).
    """
    if not 0 < angle < math.pi / 2:
        raise ValueError("z^{1/2} e^{-z} is bounded only on sectors of half-angle < pi/2")
    c = math.cos(angle)
    e = Expr("mul", (Expr("pow", coord=0, s=0.5), Expr("exp", coord=0)))
    return SectorFunction(e, SectorDomain((angle,)), DecayCertificate(((0, 0.5),), math.exp(c - 1.0) / c))


def sqrt_exp_tensor(d: int, angle: float = math.pi / 4) -> SectorFunction:
    f = sqrt_exp(angle)
    out = f
    for _ in range(d - 1):
        out = out.tensor(f)
    return out


def sigma_k(k: int, rho: float, gamma: float, mu: float) -> SectorFunction:
    """rho^{k/4} z^{1/4} / ((rho^k e^{i gamma})^{1/2} - z^{1/2}) on the sector of half-angle mu.

    Rationalised as -rho^{k/4} (b z^{1/4} + z^{3/4}) / (z - b^2) with
    b = rho^{k/2} e^{i gamma/2}, so the tree only needs the shifted reciprocal.
    The certificate (s = 1/4) bounds the holomorphic function
    sigma (1+z)^{1/2} z^{-1/4} on the boundary rays and converts with
    |1 + z| >= cos(mu/2)(1 + |z|).
    """
    if not rho > 1:
        raise ValueError("rho must exceed 1")
    if not 0 < mu < gamma < math.pi:
        raise ValueError("need 0 < mu < gamma < pi")
    b = rho ** (k / 2.0) * complex(math.cos(gamma / 2), math.sin(gamma / 2))
    e = Expr("mul", (
        const_expr(-(rho ** (k / 4.0))),
        Expr("add", (Expr("mul", (const_expr(b), Expr("pow", coord=0, s=0.25))), Expr("pow", coord=0, s=0.75))),
        Expr("shift_recip", coord=0, a=-(b * b)),
    ))
    dom = SectorDomain((mu,))
    r = rho ** k * np.logspace(-8, 8, 3201)
    zs = np.concatenate([r * math.cos(mu) + 1j * r * math.sin(mu), r * math.cos(mu) - 1j * r * math.sin(mu)])
    H = np.abs(evaluate(e, [zs])) * np.sqrt(np.abs(1 + zs)) / np.abs(zs) ** 0.25
    C = 1.02 * float(H.max()) / math.sqrt(math.cos(mu / 2))
    return SectorFunction(e, dom, DecayCertificate(((0, 0.25),), C))


# ------------------------------------------------------------------ H01Form


class H01Form:
    """Finite sum over subsets Lambda of certified functions active exactly on Lambda."""

    def __init__(self, components: dict, d: int):
        comps = {}
        for key, f in components.items():
            key = frozenset(key)
            if f.d != d:
                raise ValueError("component arity differs from the form's")
            if not key:
                if not f.is_constant():
                    raise ValueError("the empty-set component must be a constant")
                if f.certificate is None:
                    f = f.with_certificate(DecayCertificate((), abs(evaluate(f.expr, [1.0] * d))))
            else:
                if f.certificate is None:
                    raise ValueError(f"component {sorted(key)} lacks a decay certificate")
                if f.certificate.active != key:
                    raise ValueError(f"component {sorted(key)} certified on {sorted(f.certificate.active)}")
                if not f.used <= key:
                    raise ValueError(f"component {sorted(key)} depends on other variables")
            comps[key] = f
        self.components = comps
        self.d = d

    @classmethod
    def from_terms(cls, terms: Iterable[SectorFunction], d: int | None = None) -> "H01Form":
        groups: dict = {}
        for f in terms:
            d = f.d if d is None else d
            if f.is_constant():
                key = frozenset()
            elif f.certificate is None:
                raise ValueError("every non-constant term needs a certificate")
            else:
                key = f.certificate.active
            groups[key] = groups[key] + f if key in groups else f
        return cls(groups, d)

    @classmethod
    def of(cls, f: "SectorFunction | H01Form | complex", d: int | None = None) -> "H01Form":
        if isinstance(f, H01Form):
            return f
        if isinstance(f, SectorFunction):
            return cls.from_terms([f])
        return cls({frozenset(): constant(complex(f), d or 1)}, d or 1)

    @property
    def constant_value(self) -> complex:
        f = self.components.get(frozenset())
        return 0j if f is None else complex(evaluate(f.expr, [1.0] * self.d))

    @property
    def domain(self) -> SectorDomain:
        angles = [math.pi] * self.d
        for f in self.components.values():
            for k in f.used:
                angles[k] = min(angles[k], f.domain.angles[k])
        return SectorDomain(tuple(angles))

    def raw(self, zs: Sequence) -> np.ndarray:
        out = np.complex128(0.0)
        for f in self.components.values():
            out = out + f.raw(zs)
        return out

    def __call__(self, *z):
        zs = _as_arrays(z[0] if len(z) == 1 else z, self.d)
        for f in self.components.values():
            check_domain(zs, f.domain.angles, f.used)
        out = np.broadcast_to(self.raw(zs), np.broadcast_shapes(*(np.shape(v) for v in zs)))
        return complex(out) if out.ndim == 0 else np.array(out)

    def __add__(self, other):
        other = H01Form.of(other, self.d)
        return H01Form.from_terms(list(self.components.values()) + list(other.components.values()), self.d)

    __radd__ = __add__

    def __mul__(self, other):
        other = H01Form.of(other, self.d)
        terms = [f * g for f in self.components.values() for g in other.components.values()]
        return H01Form.from_terms(terms, self.d)

    __rmul__ = __mul__

    def to_json(self) -> list:
        return [f.to_json() for _, f in sorted(self.components.items(), key=lambda kv: sorted(kv[0]))]


def certificate_of(f) -> DecayCertificate | None:
    return f.certificate if isinstance(f, SectorFunction) else None


# ----------------------------------------------------- boundary sampling


def _ray_points(logr: np.ndarray, theta: float, sign: np.ndarray) -> np.ndarray:
    r = np.exp(logr)
    return r * math.cos(theta) + 1j * (sign * r * math.sin(theta))


@dataclass(frozen=True)
class BoundarySup:
    value: float
    point: tuple
    per_decade: int
    r_range: tuple
    rounds: int


def boundary_sup(
    modulus: Callable[[list], np.ndarray],
    angles: Sequence[float],
    coords: Sequence[int] | None = None,
    per_decade: int = 64,
    r_range: tuple = (1e-6, 1e6),
    rounds: int = 3,
    budget: int = 2_000_000,
) -> BoundarySup:
    """Max of ``modulus(zs)`` over a log grid on the distinguished boundary.

    ``modulus`` receives one broadcastable array per coordinate; coordinates
    outside ``coords`` are pinned at 1. The grid is symmetric under complex
    conjugation and each refinement round visits the current best point and
    its conjugate, so reflected functions see the same sample set.
    """
    d = len(angles)
    coords = list(range(d)) if coords is None else list(coords)
    m = len(coords)
    lo, hi = math.log(r_range[0]), math.log(r_range[1])
    decades = (hi - lo) / math.log(10)
    npd = per_decade
    while m and npd > 4 and (2 * (decades * npd + 1)) ** m > budget:
        npd = max(4, npd // 2)
    count = int(round(decades * npd)) + 1
    u = np.linspace(lo, hi, count)
    step = u[1] - u[0] if count > 1 else 1.0

    def mesh(points_per_coord):
        zs = [np.complex128(1.0)] * d
        for axis, k in enumerate(coords):
            logr, sgn = points_per_coord[axis]
            shape = [1] * m
            shape[axis] = -1
            zs[k] = _ray_points(logr, angles[k], sgn).reshape(shape)
        vals = np.broadcast_to(np.abs(modulus(zs)), (tuple(len(p[0]) for p in points_per_coord) if m else ()))
        return vals

    if m == 0:
        v = float(np.abs(modulus([np.complex128(1.0)] * d)))
        return BoundarySup(v, (), npd, tuple(r_range), 0)
    full_u = np.concatenate([u, u])
    full_s = np.concatenate([np.ones(count), -np.ones(count)])
    vals = mesh([(full_u, full_s)] * m)
    flat = int(np.nanargmax(vals))
    idx = np.unravel_index(flat, vals.shape)
    best = float(vals[idx])
    centre = [(full_u[i], full_s[i]) for i in idx]
    offsets = np.array([-1.0, 0.0, 1.0])
    for _ in range(rounds):
        step /= 3.0
        candidates = []
        for flip in (1.0, -1.0):
            pts = [(np.clip(c[0] + offsets * step, lo, hi), np.full(3, c[1] * flip)) for c in centre]
            vals = mesh(pts)
            j = np.unravel_index(int(np.nanargmax(vals)), vals.shape)
            candidates.append((float(vals[j]), [(pts[a][0][j[a]], pts[a][1][0]) for a in range(m)]))
        val, pt = max(candidates, key=lambda c: c[0])
        if val > best:
            best, centre = val, pt
    point = tuple((float(np.exp(c[0])), int(c[1])) for c in centre)
    return BoundarySup(best, point, npd, tuple(r_range), rounds)


def sup_norm_estimate(f, domain: SectorDomain | None = None, per_decade: int = 64,
                      r_range: tuple = (1e-6, 1e6), rounds: int = 3) -> float:
    """Lower bound for sup |f| over the product of sectors (sampled on the distinguished boundary)."""
    return sup_norm_report(f, domain, per_decade, r_range, rounds).value


def sup_norm_report(f, domain=None, per_decade=64, r_range=(1e-6, 1e6), rounds=3) -> BoundarySup:
    domain = domain or f.domain
    coords = sorted(used_coords(f.expr)) if isinstance(f, SectorFunction) else sorted(
        set().union(*(g.used for g in f.components.values())) if f.components else set())
    return boundary_sup(lambda zs: f.raw(zs), domain.angles, coords, per_decade, r_range, rounds)


# -------------------------------------------------------------- decay check


@dataclass(frozen=True)
class DecayReport:
    passed: bool
    worst_ratio: float
    worst_point: tuple
    active_matches: bool
    samples: int


def decay_check(f: SectorFunction, cert: DecayCertificate | None = None, per_decade: int = 16,
                r_range: tuple = (1e-6, 1e6), slack: float = 1e-9, budget: int = 1_500_000) -> DecayReport:
    """Verify |f| <= certified bound on boundary and interior rays (ratio <= 1 + slack)."""
    cert = cert or f.certificate
    if cert is None:
        raise ValueError("no certificate to check")
    used = sorted(f.used | cert.active)
    m = len(used)
    lo, hi = math.log10(r_range[0]), math.log10(r_range[1])
    npd = per_decade
    fracs = (1.0, 0.5, 0.0, -0.5, -1.0)
    while m and npd > 2 and (len(fracs) * ((hi - lo) * npd + 1)) ** m > budget:
        npd //= 2
    r = np.logspace(lo, hi, int(round((hi - lo) * npd)) + 1)
    zs = [np.complex128(1.0)] * f.d
    for axis, k in enumerate(used):
        theta = f.domain.angles[k]
        theta = theta * (1 - 1e-12) if theta >= math.pi else theta
        pts = np.concatenate([r * math.cos(a * theta) + 1j * r * math.sin(a * theta) for a in fracs])
        shape = [1] * m
        shape[axis] = -1
        zs[k] = pts.reshape(shape)
    val = np.abs(f.raw(zs))
    bnd = cert.bound(zs)
    ratio = np.broadcast_to(val / bnd, np.broadcast_shapes(np.shape(val), np.shape(bnd)))
    j = np.unravel_index(int(np.nanargmax(ratio)), ratio.shape) if ratio.ndim else ()
    worst = float(ratio[j]) if ratio.ndim else float(ratio)
    point = tuple(complex(np.asarray(zs[k]).reshape(-1)[j[a]]) for a, k in enumerate(used)) if ratio.ndim else ()
    matches = f.used <= cert.active
    return DecayReport(bool(worst <= 1.0 + slack and matches), worst, point, matches, int(ratio.size))
