"""Rademacher and Gaussian averages, R-bound estimates, log grids and gamma-norms."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.stats

from .operators import as_matrix, resolvent_stack, _boundary_radii
from .spaces import SpaceModel, operator_norm_witness

log = logging.getLogger(__name__)

MC_SAMPLES = 4096
MC_BATCHES = 16
EXACT_LIMIT = 20


@dataclass(frozen=True)
class Estimate:
    value: float
    ci_low: float
    ci_high: float
    stderr: float
    mode: str
    seed: int | None

    def to_json(self) -> dict:
        return {"estimate": self.value, "ci_low": self.ci_low, "ci_high": self.ci_high,
                "stderr": self.stderr, "mode": self.mode, "seed": self.seed}

    def __float__(self) -> float:
        return self.value


def _exact(value: float, mode: str) -> Estimate:
    return Estimate(float(value), float(value), float(value), 0.0, mode, None)


def _family(vectors, space: SpaceModel) -> np.ndarray:
    X = np.asarray(vectors, dtype=complex)
    if X.ndim == 1:
        X = X[None, :]
    if X.size == 0:
        return np.zeros((0, space.size), complex)
    if X.shape[-1] != space.size:
        raise ValueError(f"vectors of length {X.shape[-1]} do not fit a model of size {space.size}")
    return X


def _batch_estimate(sq_norm_batches: list, mode: str, seed: int) -> Estimate:
    """Square root of the mean of E||Y||^2 with a t-interval over batch means."""
    means = np.array([b.mean() for b in sq_norm_batches])
    k = len(means)
    m = float(means.mean())
    se = float(means.std(ddof=1) / math.sqrt(k)) if k > 1 else 0.0
    q = float(scipy.stats.t.ppf(0.975, k - 1)) if k > 1 else 0.0
    lo, hi = max(m - q * se, 0.0), m + q * se
    value = math.sqrt(max(m, 0.0))
    stderr = se / (2 * value) if value > 0 else 0.0
    return Estimate(value, math.sqrt(lo), math.sqrt(hi), stderr, mode, seed)


def _sign_patterns(J: int, start: int, stop: int) -> np.ndarray:
    ints = np.arange(start, stop)
    bits = (ints[:, None] >> np.arange(J - 1)[None, :]) & 1
    return np.hstack([np.ones((len(ints), 1)), 1.0 - 2.0 * bits])


def rademacher_average(vectors, space: SpaceModel, mode: str = "auto", seed: int = 0,
                       samples: int = MC_SAMPLES, batches: int = MC_BATCHES) -> Estimate:
    """(E || sum_j eps_j x_j ||^2)^{1/2} over independent signs."""
    X = _family(vectors, space)
    J = X.shape[0]
    if J == 0:
        return _exact(0.0, "exact")
    if mode == "auto":
        mode = "exact" if J <= EXACT_LIMIT else "montecarlo"
    if mode == "exact":
        if J > EXACT_LIMIT:
            raise ValueError(f"exact enumeration supports at most {EXACT_LIMIT} vectors")
        total, count = 0.0, 2 ** (J - 1)
        chunk = 1 << 15
        for start in range(0, count, chunk):
            eps = _sign_patterns(J, start, min(count, start + chunk))
            norms = np.asarray(space.norm(eps @ X))
            total += float(np.sum(norms ** 2))
        return _exact(math.sqrt(total / count), "exact")
    if mode != "montecarlo":
        raise ValueError(f"unknown mode {mode!r}")
    per = max(1, samples // batches)
    out = []
    for b in range(batches):
        rng = np.random.default_rng([seed, b])
        eps = rng.choice([-1.0, 1.0], size=(per, J))
        out.append(np.asarray(space.norm(eps @ X)) ** 2)
    return _batch_estimate(out, "montecarlo", seed)


def _covariance_factor(X: np.ndarray) -> np.ndarray:
    """L with L L^H = sum_j x_j x_j^H, so L w (w standard complex Gaussian) has the law of sum g_j x_j."""
    C = X.T @ X.conj()
    lam, V = np.linalg.eigh(C)
    keep = lam > lam.max() * 1e-15 if lam.max() > 0 else np.zeros_like(lam, bool)
    return V[:, keep] * np.sqrt(lam[keep])


def complex_gaussians(rng: np.random.Generator, shape) -> np.ndarray:
    """Standard complex Gaussians with E|g|^2 = 1."""
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / math.sqrt(2.0)


def gaussian_average(vectors, space: SpaceModel, mode: str = "auto", seed: int = 0,
                     samples: int = MC_SAMPLES, batches: int = MC_BATCHES) -> Estimate:
    """(E || sum_j g_j x_j ||^2)^{1/2} over independent standard complex Gaussians."""
    X = _family(vectors, space)
    if X.shape[0] == 0:
        return _exact(0.0, "exact")
    if mode == "auto":
        mode = "exact-hilbert" if space.is_hilbert else "montecarlo"
    if mode == "exact-hilbert":
        if not space.is_hilbert:
            raise ValueError("exact-hilbert mode needs a Hilbert model")
        return _exact(math.sqrt(float(np.sum(np.asarray(space.norm(X)) ** 2))), "exact-hilbert")
    if mode != "montecarlo":
        raise ValueError(f"unknown mode {mode!r}")
    L = _covariance_factor(X)
    if L.shape[1] == 0:
        return _exact(0.0, "montecarlo")
    per = max(1, samples // batches)
    out = []
    for b in range(batches):
        rng = np.random.default_rng([seed, b])
        Y = complex_gaussians(rng, (per, L.shape[1])) @ L.T
        out.append(np.asarray(space.norm(Y)) ** 2)
    return _batch_estimate(out, "montecarlo", seed)


# ------------------------------------------------------------- R-bounds


@dataclass
class RBoundEstimate:
    value: float
    indices: list
    vectors: np.ndarray

    def to_json(self) -> dict:
        return {"estimate": self.value, "witness": {"indices": self.indices}}


def r_bound_estimate(operators: Sequence, space: SpaceModel, probe_budget: int = 64, seed: int = 0,
                     max_family: int = 8, restarts: int = 8) -> RBoundEstimate:
    """Lower bound on the R-bound of a finite family by probing.

    Singletons use norm-attaining vectors (so the estimate is at least the
    largest operator norm); the rest of the budget draws random families of
    size <= max_family, with repetition, evaluated by exact sign enumeration.
    """
    ops = [as_matrix(T) for T in operators]
    if not ops:
        return RBoundEstimate(0.0, [], np.zeros((0, space.size), complex))
    best, best_idx, best_vec = -1.0, [], None
    witnesses = []
    for j, T in enumerate(ops):
        nrm, x = operator_norm_witness(T, space, restarts=restarts, seed=seed + j)
        witnesses.append(x)
        if nrm > best:
            best, best_idx, best_vec = nrm, [j], x[None, :]
    if space.is_hilbert:
        return RBoundEstimate(float(best), best_idx, best_vec)
    rng = np.random.default_rng(seed)
    for _ in range(probe_budget):
        k = int(rng.integers(2, max_family + 1))
        idx = rng.integers(0, len(ops), size=k)
        xs = np.array([witnesses[i] if rng.random() < 0.5 else
                       rng.standard_normal(space.size) + 1j * rng.standard_normal(space.size) for i in idx])
        den = rademacher_average(xs, space, mode="exact").value
        if den == 0:
            continue
        num = rademacher_average(np.array([ops[i] @ x for i, x in zip(idx, xs)]), space, mode="exact").value
        if num / den > best:
            best, best_idx, best_vec = num / den, [int(i) for i in idx], xs
    return RBoundEstimate(float(best), best_idx, best_vec)


@dataclass
class RProfile:
    angles: np.ndarray
    constants: np.ndarray


def r_sectoriality_profile(A, space: SpaceModel | None = None, angle_grid: Sequence[float] | None = None,
                           samples_per_decade: int = 32, span_decades: float = 3.0, probe_budget: int = 16,
                           seed: int = 0) -> RProfile:
    """R-bound lower bounds for {z R(z, A)} on the rays at angles >= theta.

    Uses the same ray samples as sectorial_profile; per-ray estimates are
    combined by a running maximum from the negative axis inward (the R-bound of
    a union dominates that of each part).
    """
    A = as_matrix(A)
    space = space or SpaceModel.euclidean(A.shape[0])
    if angle_grid is None:
        angle_grid = np.linspace(np.pi / 16, 15 * np.pi / 16, 15)
    angles = np.sort(np.asarray(angle_grid, dtype=float))
    r = _boundary_radii(A, samples_per_decade, span_decades)
    per_ray = []
    for i, phi in enumerate(list(angles) + [np.pi]):
        zs = np.concatenate([r * np.exp(1j * phi), r * np.exp(-1j * phi)]) if phi < np.pi else -r
        family = zs[:, None, None] * resolvent_stack(A, zs)
        per_ray.append(r_bound_estimate(family, space, probe_budget, seed + i, restarts=2).value)
    per_ray = np.array(per_ray)
    return RProfile(angles, np.maximum.accumulate(per_ray[::-1])[::-1][:-1])


# ---------------------------------------------------------------- grids


@dataclass(frozen=True)
class LogGrid:
    """Log-spaced nodes per coordinate with trapezoid weights for dt/t."""

    d: int = 1
    t_min: float = 1e-8
    t_max: float = 1e8
    per_decade: int = 32

    def __post_init__(self):
        if self.d < 1 or not (0 < self.t_min < self.t_max) or self.per_decade < 1:
            raise ValueError("invalid log grid")

    @property
    def count(self) -> int:
        return int(round(math.log10(self.t_max / self.t_min) * self.per_decade)) + 1

    def nodes_1d(self) -> np.ndarray:
        return np.logspace(math.log10(self.t_min), math.log10(self.t_max), self.count)

    def weights_1d(self) -> np.ndarray:
        h = math.log(self.t_max / self.t_min) / (self.count - 1)
        w = np.full(self.count, h)
        w[0] = w[-1] = h / 2
        return w

    def nodes(self) -> list:
        """Per-coordinate node arrays shaped for broadcasting over the product grid."""
        t = self.nodes_1d()
        out = []
        for k in range(self.d):
            shape = [1] * self.d
            shape[k] = -1
            out.append(t.reshape(shape))
        return out

    def weights(self) -> np.ndarray:
        w = self.weights_1d()
        out = np.ones(())
        for _ in range(self.d):
            out = np.multiply.outer(out, w)
        return out

    def refine(self) -> "LogGrid":
        return LogGrid(self.d, self.t_min, self.t_max, self.per_decade * 2)

    def integrate(self, values: np.ndarray) -> complex:
        return complex(np.sum(values * self.weights()))

    def to_json(self) -> dict:
        return {"d": self.d, "t_min": self.t_min, "t_max": self.t_max, "per_decade": self.per_decade}

    @classmethod
    def from_json(cls, obj: dict) -> "LogGrid":
        return cls(int(obj.get("d", 1)), float(obj.get("t_min", 1e-8)), float(obj.get("t_max", 1e8)),
                   int(obj.get("per_decade", 32)))


# --------------------------------------------------------------- gamma


@dataclass
class GammaElement:
    """Finite-rank map: row i is the image of the i-th orthonormal basis vector of the index space."""

    space: SpaceModel
    matrix: np.ndarray
    grid: LogGrid | None = None

    def __post_init__(self):
        M = np.asarray(self.matrix, dtype=complex)
        if M.ndim == 1:
            M = M[None, :]
        if M.shape[-1] != self.space.size:
            raise ValueError("gamma element rows must be vectors of the model")
        self.matrix = M

    @property
    def rank_dim(self) -> int:
        return self.matrix.shape[0]

    @classmethod
    def from_samples(cls, space: SpaceModel, values: np.ndarray, weights: np.ndarray,
                     grid: LogGrid | None = None) -> "GammaElement":
        """Rows sqrt(w_i) zeta(t_i) from samples ``values`` (..., size) and weights (...)."""
        vals = np.asarray(values, dtype=complex).reshape(-1, space.size)
        w = np.asarray(weights, dtype=float).reshape(-1)
        return cls(space, np.sqrt(w)[:, None] * vals, grid)


def gamma_norm(u: GammaElement, mode: str = "auto", seed: int = 0, samples: int = MC_SAMPLES) -> Estimate:
    """Hilbert-Schmidt norm on Hilbert models, Gaussian average of the rows otherwise."""
    if not np.any(u.matrix):
        return _exact(0.0, "exact")
    if mode == "auto":
        mode = "exact-hilbert" if u.space.is_hilbert else "montecarlo"
    return gaussian_average(u.matrix, u.space, mode=mode, seed=seed, samples=samples)


def tensor_extend(S, u: GammaElement) -> GammaElement:
    """The element u o S^T: rows mixed by S."""
    S = np.asarray(S, dtype=complex)
    if S.shape[1] != u.rank_dim:
        raise ValueError("operator dimension does not match the index space")
    grid = u.grid if S.shape[0] == u.rank_dim else None
    return GammaElement(u.space, S @ u.matrix, grid)


@dataclass
class GammaComparison:
    iterated: Estimate
    flat: Estimate
    ratio: float
    ratio_ci: tuple

    def to_json(self) -> dict:
        return {"iterated": self.iterated.to_json(), "flat": self.flat.to_json(), "ratio": self.ratio,
                "ratio_ci": list(self.ratio_ci)}


def iterated_gamma_compare(tensor, space: SpaceModel, seed: int = 0, samples: int = MC_SAMPLES,
                           batches: int = MC_BATCHES) -> GammaComparison:
    """Two-level Gaussian norm (E_g E_g' ||sum g_i g'_j x_ij||^2)^{1/2} against the one-level norm."""
    X = np.asarray(tensor, dtype=complex)
    if X.ndim != 3 or X.shape[-1] != space.size:
        raise ValueError("expected an (m1, m2, size) array")
    m1, m2, _ = X.shape
    per = max(1, samples // batches)
    out = []
    for b in range(batches):
        rng = np.random.default_rng([seed, 1, b])
        g = complex_gaussians(rng, (per, m1))
        h = complex_gaussians(rng, (per, m2))
        Y = np.einsum("pi,pj,ijs->ps", g, h, X)
        out.append(np.asarray(space.norm(Y)) ** 2)
    it = _batch_estimate(out, "montecarlo", seed)
    flat = gaussian_average(X.reshape(m1 * m2, -1), space, mode="montecarlo", seed=seed, samples=samples,
                            batches=batches)
    if flat.value == 0:
        return GammaComparison(it, flat, float("nan"), (float("nan"), float("nan")))
    lo = it.ci_low / flat.ci_high if flat.ci_high > 0 else float("nan")
    hi = it.ci_high / flat.ci_low if flat.ci_low > 0 else float("inf")
    return GammaComparison(it, flat, it.value / flat.value, (lo, hi))
