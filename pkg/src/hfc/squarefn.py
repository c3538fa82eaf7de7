"""Discretized square-function norms, square-function-estimate constants, the
quadratic Rademacher inequality and the calibrated reproducing formula."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .calculus import contour_fc, form_sup, function_ensemble, spectral_oracle_fc
from .errors import DegenerateCalibration, NotSimultaneouslyDiagonalizable
from .functions import H01Form, SectorFunction, boundary_sup, check_domain, conjugate_reflect
from .operators import ZERO_THRESHOLD, CommutingTuple, JointSpectrum, joint_spectral_decompose
from .spaces import SpaceModel, operator_norm_witness
from .stochastic import Estimate, GammaElement, LogGrid, gamma_norm, rademacher_average

log = logging.getLogger(__name__)

CALIBRATION_FLOOR = 1e-12
CONTOUR_NODE_CAP = 20000


@dataclass
class SquareFunctionJob:
    tuple: CommutingTuple
    F: SectorFunction
    grid: LogGrid
    x: np.ndarray

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=complex).reshape(-1)
        if self.x.size != self.tuple.n:
            raise ValueError("vector length does not match the tuple")
        if self.F.d != self.tuple.d or self.grid.d != self.tuple.d:
            raise ValueError("function, grid and tuple must share the number of variables")
        if self.F.certificate is None:
            raise ValueError("the square-function generator needs a decay certificate")


def default_square_grid(d: int) -> LogGrid:
    """[1e-6, 1e6] at 32 nodes per decade per coordinate (8 from d = 3 on)."""
    return LogGrid(d, 1e-6, 1e6, 32 if d < 3 else 8)


def tail_closed_weights(F: SectorFunction, grid: LogGrid) -> np.ndarray:
    """Product weights for dM with both log-grid tails closed by the certified power law.

    |F(t lambda) x|^2 behaves like t^{2s} below t_min and t^{-2s} above t_max on an
    active coordinate, so each end node carries an extra 1/(2s) of dt/t mass.
    """
    base = grid.weights_1d()
    out = np.ones(())
    for k in range(grid.d):
        w = base.copy()
        if F.certificate is not None and k in F.certificate.active:
            extra = 1.0 / (2.0 * F.certificate.s(k))
            w[0] += extra
            w[-1] += extra
        out = np.multiply.outer(out, w)
    return out


def _joint_values(F, js: JointSpectrum, nodes: list, d: int) -> np.ndarray:
    """F(t_1 lambda_1, ..., t_d lambda_d) for every grid node and joint eigenvalue; shape grid + (n,)."""
    lam = js.eigenvalues
    scale = np.abs(lam).max(axis=0)
    zero = np.abs(lam) < ZERO_THRESHOLD * np.where(scale > 0, scale, 1.0)
    used = F.used if isinstance(F, SectorFunction) else set().union(*F.components.keys())
    keep = ~np.any(zero[:, sorted(used)], axis=1) if used else np.ones(lam.shape[0], bool)
    grid_shape = np.broadcast_shapes(*(np.shape(t) for t in nodes))
    out = np.zeros(grid_shape + (lam.shape[0],), complex)
    if not keep.any():
        return out
    lk = lam[keep]
    if isinstance(F, SectorFunction):
        check_domain([lk[:, k] for k in range(d)], F.domain.angles, F.used)
    zs = [np.asarray(nodes[k])[..., None] * lk[:, k] for k in range(d)]
    out[..., keep] = np.broadcast_to(F.raw(zs), grid_shape + (int(keep.sum()),))
    return out


def _try_spectrum(tuple_: CommutingTuple, seed: int = 0) -> JointSpectrum | None:
    try:
        return joint_spectral_decompose(tuple_, seed=seed)
    except NotSimultaneouslyDiagonalizable:
        return None


def sample_zeta(job: SquareFunctionJob, method: str = "auto") -> GammaElement:
    """Rows sqrt(w_t) F(t_1 A_1, ..., t_d A_d) x over the product log grid, tails closed."""
    T, grid = job.tuple, job.grid
    weights = tail_closed_weights(job.F, grid)
    if not np.any(job.x):
        return GammaElement(T.space, np.zeros((weights.size, T.space.size), complex), grid)
    js = _try_spectrum(T) if method in ("auto", "oracle") else None
    if js is not None:
        c = js.S_inv @ job.x
        Fv = _joint_values(job.F, js, grid.nodes(), T.d)
        Z = (Fv * c) @ js.S.T
        return GammaElement.from_samples(T.space, Z, weights, grid)
    if method == "oracle":
        raise NotSimultaneouslyDiagonalizable("oracle sampling needs a diagonalizable tuple")
    if weights.size > CONTOUR_NODE_CAP:
        raise ValueError(f"contour sampling limited to {CONTOUR_NODE_CAP} grid nodes")
    t1 = grid.nodes_1d()
    rows = []
    for idx in np.ndindex(*weights.shape):
        f = job.F
        for k in range(T.d):
            f = f.dilate(float(t1[idx[k]]), k)
        rows.append(contour_fc(f, T).value @ job.x)
    return GammaElement.from_samples(T.space, np.array(rows), weights, grid)


@dataclass
class SFEReport:
    norm_F: float
    refinement_curve: list
    converged: bool
    grids: list = field(default_factory=list)
    estimates: list = field(default_factory=list)


def square_function_norm(job: SquareFunctionJob, refinements: int = 2, seed: int = 0, method: str = "auto",
                         shrink: float = 2.0, atol: float = 1e-12) -> SFEReport:
    """||x||_F at the job grid and ``refinements`` successive doublings of the node density."""
    grid = job.grid
    curve, grids, ests = [], [], []
    for _ in range(refinements + 1):
        sub = SquareFunctionJob(job.tuple, job.F, grid, job.x)
        est = gamma_norm(sample_zeta(sub, method), seed=seed)
        curve.append(est.value)
        ests.append(est)
        grids.append(grid.to_json())
        grid = grid.refine()
    diffs = np.abs(np.diff(curve))
    scale = max(max(curve), 1e-300)
    converged = True
    for a, b in zip(diffs[:-1], diffs[1:]):
        if b > atol * scale and b * shrink > a:
            converged = False
    if not ests[-1].mode.startswith("exact"):
        converged = converged or bool(diffs.size and diffs[-1] <= 2 * ests[-1].stderr + atol * scale)
    return SFEReport(curve[-1], curve, converged, grids, ests)


@dataclass
class SFEConstant:
    value: float
    argmax: int
    probe_values: list
    quadratic_form_max: float | None


def _probe_set(tuple_: CommutingTuple, js: JointSpectrum | None, count: int, seed: int) -> np.ndarray:
    space = tuple_.space
    probes = []
    if js is not None:
        for j in range(js.S.shape[1]):
            v = js.S[:, j]
            probes.append(v / space.norm(v))
    rng = np.random.default_rng(seed)
    while len(probes) < count:
        v = rng.standard_normal(tuple_.n) + 1j * rng.standard_normal(tuple_.n)
        probes.append(v / space.norm(v))
    return np.array(probes[:count]) if count > 0 else np.zeros((0, tuple_.n), complex)


def sfe_constant(tuple_: CommutingTuple, F: SectorFunction, grid: LogGrid | None = None, probes: int = 64,
                 seed: int = 0, probe_vectors=None) -> SFEConstant:
    """max over probes of ||x||_F / ||x|| (a lower bound on the best constant)."""
    grid = grid or default_square_grid(tuple_.d)
    js = _try_spectrum(tuple_)
    P = np.asarray(probe_vectors, dtype=complex) if probe_vectors is not None else _probe_set(tuple_, js, probes, seed)
    if P.shape[0] == 0:
        return SFEConstant(0.0, -1, [], None)
    if js is not None and tuple_.space.kind == "euclidean":
        Fv = _joint_values(F, js, grid.nodes(), tuple_.d).reshape(-1, tuple_.n)
        w = tail_closed_weights(F, grid).reshape(-1)
        K = (Fv.conj() * w[:, None]).T @ Fv
        G = js.S.conj().T @ js.S
        M = js.S_inv.conj().T @ (K * G) @ js.S_inv
        M = 0.5 * (M + M.conj().T)
        vals = np.sqrt(np.maximum(np.einsum("pi,ij,pj->p", P.conj(), M, P).real, 0.0))
        vals = vals / np.asarray(tuple_.space.norm(P))
        qmax = math.sqrt(max(float(np.linalg.eigvalsh(M).max()), 0.0))
    else:
        vals = []
        for v in P:
            rep = square_function_norm(SquareFunctionJob(tuple_, F, grid, v), refinements=0, seed=seed)
            vals.append(rep.norm_F / tuple_.space.norm(v))
        vals = np.array(vals)
        qmax = None
    j = int(np.argmax(vals))
    return SFEConstant(float(vals[j]), j, [float(v) for v in vals], qmax)


def closed_form_sfe_sqrt_exp(tuple_: CommutingTuple) -> float:
    """max over joint eigenvalues of prod_k (2 cos arg lambda_k)^{-1/2} for F = tensor z^{1/2} e^{-z}."""
    js = joint_spectral_decompose(tuple_)
    lam = js.eigenvalues
    scale = np.abs(lam).max(axis=0)
    zero = np.any(np.abs(lam) < ZERO_THRESHOLD * np.where(scale > 0, scale, 1.0), axis=1)
    safe = np.where(zero[:, None], 1.0, lam)
    vals = np.prod(1.0 / np.sqrt(2.0 * np.cos(np.angle(safe))), axis=1)
    vals[zero] = 0.0
    return float(vals.max())


# ------------------------------------------------------ quadratic inequality


@dataclass
class QuadReport:
    lhs: float
    rhs: float
    ratio: float
    sup_factor: float


def _apply(f, tuple_: CommutingTuple, method: str) -> np.ndarray:
    if method in ("auto", "oracle"):
        try:
            return spectral_oracle_fc(f, tuple_)
        except NotSimultaneouslyDiagonalizable:
            if method == "oracle":
                raise
    return contour_fc(f, tuple_).value


def quad_inequality_check(tuple_: CommutingTuple, functions: Sequence, x, seed: int = 0,
                          method: str = "auto", angles: Sequence[float] | None = None) -> QuadReport:
    """Rademacher average of {F_j(A) x} against sup (sum |F_j|^2)^{1/2} * ||x||."""
    x = np.asarray(x, dtype=complex).reshape(-1)
    forms = [H01Form.of(f, tuple_.d) for f in functions]
    if angles is None:
        angles = [min(f.domain.angles[k] for f in forms) for k in range(tuple_.d)]
    images = np.array([_apply(f, tuple_, method) @ x for f in forms]) if forms else np.zeros((0, tuple_.n))
    lhs = rademacher_average(images, tuple_.space, seed=seed).value if forms else 0.0

    def modulus(zs):
        total = 0.0
        for f in forms:
            total = total + np.abs(f.raw(zs)) ** 2
        return np.sqrt(total)

    coords = sorted(set().union(*(set().union(*f.components.keys()) for f in forms))) if forms else []
    sup = boundary_sup(modulus, angles, coords).value if forms else 0.0
    rhs = sup * float(tuple_.space.norm(x))
    ratio = lhs / rhs if rhs > 0 else 0.0
    return QuadReport(float(lhs), float(rhs), float(ratio), float(sup))


# ----------------------------------------------------- reproducing formula


def _diagonal_values(f, grid: LogGrid) -> np.ndarray:
    nodes = [t.astype(complex) for t in grid.nodes()]
    return np.broadcast_to(f.raw(nodes), grid.weights().shape)


def calibrate_resolution(psi, F1, F2_tilde, grid: LogGrid) -> complex:
    """c with c * int psi F1 F2~ dM = 1, the integral taken over the positive diagonal of the grid."""
    vals = _diagonal_values(psi, grid) * _diagonal_values(F1, grid) * _diagonal_values(F2_tilde, grid)
    total = grid.integrate(vals)
    if not abs(total) > CALIBRATION_FLOOR:
        raise DegenerateCalibration(f"calibration integral {abs(total):.3e} is below {CALIBRATION_FLOOR:.0e}")
    return 1.0 / total


@dataclass
class ReproducingReport:
    defect: float
    calibration: complex
    curve: list
    grids: list
    reduction_factors: list


def reproducing_formula_check(tuple_: CommutingTuple, f, psi, F1, F2, grid: LogGrid | None = None,
                              refinements: int = 0) -> ReproducingReport:
    """|| c int f(A) psi(tA) F1(tA) F2~(tA) dM(t) - f(A) || at the grid and its refinements."""
    grid = grid or LogGrid(tuple_.d, 1e-6, 1e6, 64)
    F2t = conjugate_reflect(F2)
    js = joint_spectral_decompose(tuple_)
    form = H01Form.of(f, tuple_.d)
    target = spectral_oracle_fc(form, tuple_)
    curve, grids, c0 = [], [], None
    g = grid
    for _ in range(refinements + 1):
        c = calibrate_resolution(psi, F1, F2t, g)
        c0 = c if c0 is None else c0
        prod = (_joint_values(psi, js, g.nodes(), tuple_.d) * _joint_values(F1, js, g.nodes(), tuple_.d)
                * _joint_values(F2t, js, g.nodes(), tuple_.d))
        w = g.weights()[..., None]
        integral = c * np.sum((prod * w).reshape(-1, tuple_.n), axis=0)
        result = target @ js.apply(integral)
        curve.append(float(np.linalg.norm(result - target, 2)))
        grids.append(g.to_json())
        g = g.refine()
    factors = [a / b if b > 0 else float("inf") for a, b in zip(curve[:-1], curve[1:])]
    return ReproducingReport(curve[0], c0, curve, grids, factors)


# ---------------------------------------------------------- Schatten pair


@dataclass
class SchattenGrowth:
    p: float
    n: list
    K: list
    expected: str


def left_right_pair(p: float, n: int) -> CommutingTuple:
    """x -> c x and x -> x c on S^p_n with c = diag(2^{-k}), on row-major flattened matrices."""
    c = 2.0 ** -np.arange(n)
    one = np.ones(n)
    space = SpaceModel.schatten(p, n)
    return CommutingTuple((np.diag(np.kron(c, one)), np.diag(np.kron(one, c))), space)


def schatten_growth_experiment(p: float, n_ladder: Sequence[int] = (2, 4, 8, 16), seed: int = 0,
                               ensemble_size: int = 16, angle: float = math.pi / 4,
                               restarts: int = 8) -> SchattenGrowth:
    """K(n) = max over a fixed ensemble of ||f(L_c, R_c)||_{B(S^p_n)} / sup|f|.

    f(L_c, R_c) is the Schur multiplier [f(c_i, c_j)]; the multiplier for n is a
    compression of the one for any larger n, so norm witnesses are padded with
    zeros and reused as starting points up the ladder.
    """
    ladder = sorted(int(n) for n in n_ladder)
    ensemble = function_ensemble(2, [angle, angle], ensemble_size, seed)
    sups = [form_sup(f, [angle, angle]) for f in ensemble]
    witnesses: list = [None] * len(ensemble)
    K = []
    prev_n = None
    for n in ladder:
        space = SpaceModel.schatten(p, n)
        c = 2.0 ** -np.arange(n)
        best = 0.0
        for i, form in enumerate(ensemble):
            V = np.broadcast_to(form.raw([c[:, None].astype(complex), c[None, :].astype(complex)]), (n, n))
            M = np.diag(V.reshape(-1))
            init = []
            if witnesses[i] is not None:
                W = np.zeros((n, n), complex)
                W[:prev_n, :prev_n] = witnesses[i].reshape(prev_n, prev_n)
                init.append(W.reshape(-1))
            val, wit = operator_norm_witness(M, space, restarts=restarts, seed=seed + i, initial=init)
            witnesses[i] = wit
            if sups[i] > 0:
                best = max(best, val / sups[i])
        K.append(float(best))
        prev_n = n
    expected = ("bounded near 1 (Hilbert-Schmidt model)" if p == 2 else
                "nondecreasing in n; unbounded growth is expected in the limit but not asserted")
    return SchattenGrowth(float(p), ladder, K, expected)
