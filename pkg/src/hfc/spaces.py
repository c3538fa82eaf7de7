"""Finite-dimensional normed models: euclidean, l^p_n and Schatten S^p_n.

Vectors of a Schatten model are n x n matrices flattened row-major, so an
operator on S^p_n is an (n*n) x (n*n) matrix acting on that flattening.
All pairings are sesquilinear, <x, y> = sum x_i conj(y_i), which makes the
dual of a model the same kind with the conjugate exponent and the Banach
adjoint of a matrix its conjugate transpose.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

KINDS = ("euclidean", "lp", "schatten")


def conjugate_exponent(p: float) -> float:
    if p == 1.0:
        return math.inf
    if math.isinf(p):
        return 1.0
    return p / (p - 1.0)


@dataclass(frozen=True)
class SpaceModel:
    kind: str
    dim: int
    p: float = 2.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown space kind {self.kind!r}")
        if int(self.dim) != self.dim or self.dim < 1:
            raise ValueError("dim must be a positive integer")
        p = float(self.p)
        if self.kind == "euclidean":
            p = 2.0
        if not (p >= 1.0):
            raise ValueError("p must lie in [1, inf]")
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "dim", int(self.dim))

    @classmethod
    def euclidean(cls, dim: int) -> "SpaceModel":
        return cls("euclidean", dim)

    @classmethod
    def lp(cls, p: float, dim: int) -> "SpaceModel":
        return cls("lp", dim, p)

    @classmethod
    def schatten(cls, p: float, dim: int) -> "SpaceModel":
        return cls("schatten", dim, p)

    @property
    def size(self) -> int:
        """Length of the coordinate vector representing an element."""
        return self.dim * self.dim if self.kind == "schatten" else self.dim

    @property
    def is_hilbert(self) -> bool:
        return self.kind == "euclidean" or self.p == 2.0

    def dual(self) -> "SpaceModel":
        if self.kind == "euclidean":
            return self
        return SpaceModel(self.kind, self.dim, conjugate_exponent(self.p))

    def norm(self, x) -> np.ndarray | float:
        """Norm of one vector or of a stack of vectors along the last axis."""
        x = np.asarray(x)
        if x.shape[-1] != self.size:
            raise ValueError(f"vector length {x.shape[-1]} does not match model size {self.size}")
        if self.kind == "schatten":
            mats = x.reshape(x.shape[:-1] + (self.dim, self.dim))
            sv = np.linalg.svd(mats, compute_uv=False)
            return _pnorm(sv, self.p)
        return _pnorm(np.abs(x), self.p)

    def to_json(self) -> dict:
        p = self.p
        return {"kind": self.kind, "p": "inf" if math.isinf(p) else p, "dim": self.dim}

    @classmethod
    def from_json(cls, obj: dict) -> "SpaceModel":
        p = obj.get("p", 2.0)
        if isinstance(p, str):
            p = math.inf if p.lower() in ("inf", "infinity") else float(p)
        return cls(obj["kind"], int(obj["dim"]), float(p))


def _pnorm(a: np.ndarray, p: float):
    a = np.abs(a)
    if math.isinf(p):
        out = a.max(axis=-1)
    elif p == 2.0:
        out = np.sqrt(np.sum(a * a, axis=-1))
    elif p == 1.0:
        out = a.sum(axis=-1)
    else:
        scale = a.max(axis=-1, keepdims=True)
        safe = np.where(scale > 0, scale, 1.0)
        out = (safe[..., 0]) * np.sum((a / safe) ** p, axis=-1) ** (1.0 / p)
        out = np.where(scale[..., 0] > 0, out, 0.0)
    return out if np.ndim(out) else float(out)


def norming_functional(y: np.ndarray, space: SpaceModel) -> np.ndarray:
    """Return z in the dual model with dual norm 1 and <y, z> = norm(y).

    For p in {1, inf} the choice is a subgradient; zero maps to zero.
    """
    y = np.asarray(y, dtype=complex)
    ny = space.norm(y)
    if ny == 0:
        return np.zeros_like(y)
    p = space.p
    if space.kind == "schatten":
        n = space.dim
        u, s, vh = np.linalg.svd(y.reshape(n, n))
        if math.isinf(p):
            k = s >= s[0] * (1 - 1e-12)
            w = k.astype(float) / k.sum()
        elif p == 1.0:
            w = (s > s[0] * 1e-14).astype(float)
        else:
            w = (s / ny) ** (p - 1.0)
        return ((u * w) @ vh).reshape(-1)
    a = np.abs(y)
    phase = np.where(a > 0, y / np.where(a > 0, a, 1.0), 0.0)
    if math.isinf(p):
        z = np.zeros_like(y)
        i = int(np.argmax(a))
        z[i] = phase[i]
        return z
    if p == 1.0:
        return phase
    return phase * (a / ny) ** (p - 1.0)


def operator_norm_witness(
    A: np.ndarray,
    space: SpaceModel,
    *,
    restarts: int = 32,
    seed: int = 0,
    max_iter: int = 100,
    rtol: float = 1e-12,
    initial=None,
) -> tuple[float, np.ndarray]:
    """Operator norm of A on the model together with a (near) attaining unit vector.

    Hilbert models use the largest singular value. l^1 and l^inf use the exact
    column/row-sum formulas. Everything else runs a dual-map power iteration
    from ``restarts`` seeded random starts plus any ``initial`` vectors; each
    run is monotone, so the result is a lower bound that improves with starts.
    """
    A = np.asarray(A, dtype=complex)
    n = space.size
    if A.shape != (n, n):
        raise ValueError(f"operator shape {A.shape} does not match model size {n}")
    if not np.any(A):
        e = np.zeros(n, complex)
        e[0] = 1.0
        return 0.0, e / space.norm(e)
    if space.is_hilbert:
        u, s, vh = np.linalg.svd(A)
        return float(s[0]), vh[0].conj()
    if space.kind == "lp" and space.p == 1.0:
        col = np.abs(A).sum(axis=0)
        j = int(np.argmax(col))
        e = np.zeros(n, complex)
        e[j] = 1.0
        return float(col[j]), e
    if space.kind == "lp" and math.isinf(space.p):
        row = np.abs(A).sum(axis=1)
        i = int(np.argmax(row))
        r = A[i]
        x = np.where(np.abs(r) > 0, r.conj() / np.where(np.abs(r) > 0, np.abs(r), 1.0), 1.0)
        return float(row[i]), x

    dual = space.dual()
    AH = A.conj().T
    rng = np.random.default_rng(seed)
    starts = [np.asarray(v, dtype=complex) for v in (initial or [])]
    # a singular-vector start is cheap and usually lands near the optimum
    starts.append(np.linalg.svd(A)[2][0].conj())
    for _ in range(restarts):
        starts.append(rng.standard_normal(n) + 1j * rng.standard_normal(n))

    best, best_x = -1.0, None
    for x in starts:
        nx = space.norm(x)
        if nx == 0:
            continue
        x = x / nx
        val = space.norm(A @ x)
        for _ in range(max_iter):
            z = norming_functional(A @ x, space)
            w = AH @ z
            if not np.any(w):
                break
            x_new = norming_functional(w, dual)
            x_new = x_new / space.norm(x_new)
            new_val = space.norm(A @ x_new)
            if new_val <= val * (1.0 + rtol):
                if new_val > val:
                    x, val = x_new, new_val
                break
            x, val = x_new, new_val
        if val > best:
            best, best_x = float(val), x
    return best, best_x


def operator_norm(A, space: SpaceModel, **kwargs) -> float:
    return operator_norm_witness(A, space, **kwargs)[0]
