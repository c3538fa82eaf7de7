"""Commuting tuples of matrices: resolvents, sectorial profiles, joint spectra,
square roots, ergodic splitting and adjoints."""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.linalg

from .errors import (
    BranchCutViolation,
    NonCommutingTuple,
    NotSimultaneouslyDiagonalizable,
    SingularResolvent,
)
from .spaces import SpaceModel, operator_norm

log = logging.getLogger(__name__)

COND_CEILING = 1e12
DEFAULT_TOLERANCE = 1e-10
ZERO_THRESHOLD = 1e-10


def as_matrix(A) -> np.ndarray:
    M = np.array(A, dtype=complex)
    if M.ndim != 2 or M.shape[0] != M.shape[1] or M.shape[0] < 1:
        raise ValueError("expected a non-empty square matrix")
    if not np.all(np.isfinite(M)):
        raise ValueError("matrix has non-finite entries")
    M.setflags(write=False)
    return M


def _pair_defect(A: np.ndarray, B: np.ndarray) -> float:
    na, nb = np.linalg.norm(A, 2), np.linalg.norm(B, 2)
    c = np.linalg.norm(A @ B - B @ A, 2)
    if c == 0.0:
        return 0.0
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(c / (na * nb))


def commutation_defect(tuple_or_ops) -> float:
    """Largest relative commutator over all pairs, in the spectral norm.

    The spectral norm is used for every model; on finite-dimensional spaces
    it is equivalent to the model norm and keeps the guard cheap.
    """
    ops = tuple_or_ops.operators if isinstance(tuple_or_ops, CommutingTuple) else [as_matrix(a) for a in tuple_or_ops]
    worst = 0.0
    for A, B in itertools.combinations(ops, 2):
        worst = max(worst, _pair_defect(A, B))
    return worst


@dataclass(frozen=True)
class CommutingTuple:
    operators: tuple
    space: SpaceModel | None = None
    tolerance: float = DEFAULT_TOLERANCE

    def __post_init__(self):
        ops = tuple(as_matrix(a) for a in self.operators)
        if not ops:
            raise ValueError("a tuple needs at least one operator")
        n = ops[0].shape[0]
        if any(a.shape != (n, n) for a in ops):
            raise ValueError("operators must share one dimension")
        space = self.space or SpaceModel.euclidean(n)
        if space.size != n:
            raise ValueError(f"space size {space.size} does not match operator dimension {n}")
        object.__setattr__(self, "operators", ops)
        object.__setattr__(self, "space", space)
        defect = commutation_defect(ops)
        if defect > self.tolerance:
            raise NonCommutingTuple(f"commutation defect {defect:.3e} exceeds tolerance {self.tolerance:.1e}")

    @property
    def d(self) -> int:
        return len(self.operators)

    @property
    def n(self) -> int:
        return self.operators[0].shape[0]

    def __getitem__(self, k: int) -> np.ndarray:
        return self.operators[k]

    def types(self) -> tuple[float, ...]:
        """Estimated sectoriality type of each operator (largest |arg| of nonzero eigenvalues)."""
        return tuple(spectral_angle(A) for A in self.operators)

    def to_json(self) -> dict:
        from .serialize import matrix_to_json

        return {
            "space": self.space.to_json(),
            "operators": [matrix_to_json(a) for a in self.operators],
            "tolerance": self.tolerance,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "CommutingTuple":
        from .serialize import matrix_from_json

        ops = [matrix_from_json(m) for m in obj["operators"]]
        space = SpaceModel.from_json(obj["space"]) if "space" in obj else None
        return cls(tuple(ops), space, float(obj.get("tolerance", DEFAULT_TOLERANCE)))


def spectral_angle(A: np.ndarray, threshold: float = ZERO_THRESHOLD) -> float:
    lam = np.linalg.eigvals(np.asarray(A, dtype=complex))
    scale = np.abs(lam).max()
    if scale == 0:
        return 0.0
    nz = lam[np.abs(lam) >= threshold * scale]
    return float(np.abs(np.angle(nz)).max())


# ---------------------------------------------------------------- resolvents


def resolvent(A, z: complex, cond_ceiling: float = COND_CEILING) -> np.ndarray:
    A = as_matrix(A)
    return resolvent_stack(A, np.array([z], dtype=complex), cond_ceiling)[0]


def resolvent_stack(A: np.ndarray, zs: np.ndarray, cond_ceiling: float = COND_CEILING) -> np.ndarray:
    """(z I - A)^{-1} for every z in ``zs``; shape (len(zs), n, n)."""
    A = np.asarray(A, dtype=complex)
    zs = np.asarray(zs, dtype=complex).reshape(-1)
    n = A.shape[0]
    eye = np.eye(n)
    if np.count_nonzero(A - np.diag(np.diagonal(A))) == 0:
        diff = zs[:, None] - np.diagonal(A)[None, :]
        scale = np.maximum(np.abs(zs)[:, None], np.abs(np.diagonal(A))[None, :])
        if np.any(np.abs(diff) <= scale / cond_ceiling):
            bad = zs[np.any(np.abs(diff) <= scale / cond_ceiling, axis=1)][0]
            raise SingularResolvent(f"z = {bad} hits the spectrum")
        out = np.zeros((len(zs), n, n), dtype=complex)
        idx = np.arange(n)
        out[:, idx, idx] = 1.0 / diff
        return out
    # eigenvalues at rounding level are set to exactly zero in the Schur form, so contour
    # nodes far below the rounding level of ||A|| still see the kernel as 1/z
    T, Z = scipy.linalg.schur(A, output="complex")
    tiny = np.abs(np.diagonal(T)) <= ZERO_THRESHOLD * max(float(np.abs(T).max()), 1e-300)
    if np.any(tiny):
        T = T.copy()
        T[np.diag_indices(n)] = np.where(tiny, 0.0, np.diagonal(T))
        base = T
    else:
        base = A
    M = zs[:, None, None] * eye - base
    try:
        R = np.linalg.solve(M, np.broadcast_to(eye, M.shape))
    except np.linalg.LinAlgError as exc:
        raise SingularResolvent("zI - A is exactly singular") from exc
    rnorm = np.abs(R).sum(axis=1).max(axis=1)
    cond = np.abs(M).sum(axis=1).max(axis=1) * rnorm
    # distance to the spectrum is judged relative to max(|z|, |lambda|), as in the diagonal path,
    # so tiny z next to a zero eigenvalue is accepted
    bad = ~np.isfinite(cond) | ((cond > cond_ceiling) & (np.abs(zs) * rnorm > cond_ceiling))
    if np.any(bad):
        i = int(np.argmax(bad))
        raise SingularResolvent(f"z = {zs[i]} is within tolerance of the spectrum (cond ~ {cond[i]:.2e})")
    if base is not A:
        R = Z @ R @ Z.conj().T
    return R


# ------------------------------------------------------------ sectoriality


@dataclass(frozen=True)
class SectorialProfile:
    angles: np.ndarray
    constants: np.ndarray
    threshold: float
    inferred_type: float | None


def _boundary_radii(A: np.ndarray, per_decade: int, span: float) -> np.ndarray:
    lam = np.abs(np.linalg.eigvals(A))
    nz = lam[lam > ZERO_THRESHOLD * max(float(lam.max()), 1.0)]
    lo = nz.min() if nz.size else 1.0
    hi = nz.max() if nz.size else 1.0
    a, b = np.log10(lo) - span, np.log10(hi) + span
    count = int(np.ceil((b - a) * per_decade)) + 1
    return np.logspace(a, b, count)


def _zr_norms(A: np.ndarray, zs: np.ndarray, space: SpaceModel, restarts: int) -> np.ndarray:
    ZR = zs[:, None, None] * resolvent_stack(A, zs)
    if space.is_hilbert:
        return np.linalg.svd(ZR, compute_uv=False)[:, 0]
    return np.array([operator_norm(M, space, restarts=restarts, seed=i) for i, M in enumerate(ZR)])


def sectorial_profile(
    A,
    space: SpaceModel | None = None,
    angle_grid: Sequence[float] | None = None,
    samples_per_decade: int = 32,
    span_decades: float = 3.0,
    threshold: float = 1e6,
    restarts: int = 4,
) -> SectorialProfile:
    """Estimate C_theta = sup ||z R(z,A)|| over z outside the closed sector of half-angle theta.

    Every sampled ray at an angle >= theta (and the negative axis) lies in the
    complement of the sector, so the reported constant at theta is the maximum
    over those rays; this makes the profile nonincreasing by construction.
    """
    A = as_matrix(A)
    space = space or SpaceModel.euclidean(A.shape[0])
    if angle_grid is None:
        angle_grid = np.linspace(np.pi / 16, 15 * np.pi / 16, 15)
    angles = np.sort(np.asarray(angle_grid, dtype=float))
    if np.any(angles <= 0) or np.any(angles >= np.pi):
        raise ValueError("profile angles must lie in (0, pi)")
    r = _boundary_radii(A, samples_per_decade, span_decades)
    ray_sup = []
    for phi in list(angles) + [np.pi]:
        zs = np.concatenate([r * np.exp(1j * phi), r * np.exp(-1j * phi)]) if phi < np.pi else -r
        ray_sup.append(_zr_norms(A, zs, space, restarts).max())
    ray_sup = np.array(ray_sup)
    constants = np.maximum.accumulate(ray_sup[::-1])[::-1][:-1]
    below = np.nonzero(constants < threshold)[0]
    inferred = float(angles[below[0]]) if below.size else None
    return SectorialProfile(angles, constants, threshold, inferred)


# ---------------------------------------------------------- joint spectrum


@dataclass(frozen=True)
class JointSpectrum:
    S: np.ndarray
    S_inv: np.ndarray
    eigenvalues: np.ndarray  # shape (n, d): row i is the joint eigenvalue of column i

    def reconstruct(self, k: int) -> np.ndarray:
        return (self.S * self.eigenvalues[:, k]) @ self.S_inv

    def apply(self, values: np.ndarray) -> np.ndarray:
        """S diag(values) S^{-1}."""
        return (self.S * values) @ self.S_inv


def _cluster(values: np.ndarray, tol: float) -> list[list[int]]:
    order = np.argsort(values.real)
    groups: list[list[int]] = []
    used = np.zeros(len(values), bool)
    for i in order:
        if used[i]:
            continue
        close = np.nonzero((~used) & (np.abs(values - values[i]) <= tol))[0]
        used[close] = True
        groups.append(sorted(int(c) for c in close))
    return groups


def _try_decompose(ops: Sequence[np.ndarray], coeffs: np.ndarray) -> JointSpectrum | None:
    n = ops[0].shape[0]
    C = sum(c * A for c, A in zip(coeffs, ops))
    scale = max(np.linalg.norm(C, 2), 1e-300)
    mu, V = np.linalg.eig(C)
    cols = []
    for group in _cluster(mu, 1e-7 * scale):
        if len(group) == 1:
            cols.append(V[:, group[0]])
            continue
        m = len(group)
        centre = mu[group].mean()
        _, s, vh = np.linalg.svd(C - centre * np.eye(n))
        if s[n - m] > 1e-6 * scale:
            return None
        cols.extend(vh[n - m:].conj())
    S = np.column_stack(cols)
    S = S / np.linalg.norm(S, axis=0)
    if np.linalg.cond(S) > COND_CEILING:
        return None
    S_inv = np.linalg.inv(S)
    eig = np.empty((n, len(ops)), dtype=complex)
    for k, A in enumerate(ops):
        D = S_inv @ A @ S
        eig[:, k] = np.diagonal(D)
        recon = (S * eig[:, k]) @ S_inv
        if np.linalg.norm(recon - A, 2) > 1e-8 * max(np.linalg.norm(A, 2), 1e-300):
            return None
    return JointSpectrum(S, S_inv, eig)


def joint_spectral_decompose(tuple_or_ops, seed: int = 0, attempts: int = 4) -> JointSpectrum:
    """Common eigenbasis of a commuting family via a random generic combination."""
    if isinstance(tuple_or_ops, CommutingTuple):
        ops = tuple_or_ops.operators
        tol = tuple_or_ops.tolerance
    else:
        ops = tuple(as_matrix(a) for a in tuple_or_ops)
        tol = DEFAULT_TOLERANCE
    if commutation_defect(ops) > tol:
        raise NotSimultaneouslyDiagonalizable("operators do not commute within tolerance")
    rng = np.random.default_rng(seed)
    for _ in range(attempts):
        coeffs = rng.standard_normal(len(ops)) + 1j * rng.standard_normal(len(ops))
        js = _try_decompose(ops, coeffs)
        if js is not None:
            return js
    raise NotSimultaneouslyDiagonalizable("no common eigenbasis within tolerance (defective input?)")


# ------------------------------------------------------------ square root


def fractional_sqrt(A, allow_zero: bool = False) -> np.ndarray:
    """Principal square root; eigenvalues on (-inf, 0] are rejected (0 only if allowed)."""
    A = as_matrix(A)
    lam = np.linalg.eigvals(A)
    scale = max(np.abs(lam).max(), 1e-300)
    on_cut = (np.abs(lam.imag) <= 1e-12 * scale) & (lam.real <= 0)
    if allow_zero:
        on_cut &= np.abs(lam) > ZERO_THRESHOLD * scale
    if np.any(on_cut):
        raise BranchCutViolation(f"eigenvalue {lam[on_cut][0]} lies on the branch cut (-inf, 0]")
    R = scipy.linalg.sqrtm(A)
    R = np.asarray(R, dtype=complex)
    resid = np.linalg.norm(R @ R - A, 2) / max(np.linalg.norm(A, 2), 1e-300)
    if resid > 1e-8:
        raise ArithmeticError(f"square root residual {resid:.2e} too large")
    return R


# ----------------------------------------------------------- ergodic split


@dataclass(frozen=True)
class ErgodicSplit:
    d: int
    projections: dict = field(default_factory=dict)  # frozenset -> matrix

    def __getitem__(self, lam) -> np.ndarray:
        return self.projections[frozenset(lam)]

    def nonzero(self) -> list[frozenset]:
        return [k for k, P in self.projections.items() if np.any(np.abs(P) > 0)]


def all_subsets(d: int) -> list[frozenset]:
    return [frozenset(c) for r in range(d + 1) for c in itertools.combinations(range(d), r)]


def ergodic_split(tuple_: CommutingTuple, threshold: float = ZERO_THRESHOLD, seed: int = 0) -> ErgodicSplit:
    """Projections onto X_Lambda: joint eigenvectors with lambda_k != 0 exactly for k in Lambda.

    Coordinates are 0-based, so Lambda ranges over subsets of {0, ..., d-1}.
    """
    js = joint_spectral_decompose(tuple_, seed=seed)
    mags = np.abs(js.eigenvalues)
    scale = mags.max(axis=0)
    active = mags >= threshold * np.where(scale > 0, scale, 1.0)
    active &= scale > 0
    projections = {}
    for lam in all_subsets(tuple_.d):
        mask = np.ones(tuple_.n, bool)
        for k in range(tuple_.d):
            mask &= active[:, k] if k in lam else ~active[:, k]
        projections[lam] = (js.S[:, mask] @ js.S_inv[mask, :]) if mask.any() else np.zeros((tuple_.n, tuple_.n), complex)
    return ErgodicSplit(tuple_.d, projections)


# ---------------------------------------------------------------- adjoint


def adjoint_tuple(tuple_: CommutingTuple) -> CommutingTuple:
    return CommutingTuple(tuple(A.conj().T for A in tuple_.operators), tuple_.space.dual(), tuple_.tolerance)
