"""Grid dilation of commuting analytic semigroups into shift groups, the
transfer inequality, Fourier multipliers of groups, Laplace transforms and
Yosida regularization."""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.linalg

from .calculus import contour_fc, fc_constant_estimate, spectral_oracle_fc
from .errors import AngleOrderViolation, BranchCutViolation, SingularResolvent, TypeTooLarge
from .functions import H01Form, SectorDomain, boundary_sup
from .operators import (
    COND_CEILING,
    CommutingTuple,
    ZERO_THRESHOLD,
    adjoint_tuple,
    as_matrix,
    ergodic_split,
    fractional_sqrt,
    spectral_angle,
)
from .spaces import SpaceModel, operator_norm

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class LineGrid:
    """Uniform grid {-S, ..., -h, 0, h, ..., S} per coordinate with weight h per node."""

    d: int
    h: float
    S: float

    def __post_init__(self):
        if self.d < 1 or not self.h > 0 or not self.S > 0:
            raise ValueError("invalid line grid")
        ratio = self.S / self.h
        if abs(ratio - round(ratio)) > 1e-9 * ratio or round(ratio) < 1:
            raise ValueError("S/h must be a positive integer")

    @property
    def N(self) -> int:
        return int(round(self.S / self.h))

    @property
    def positive_nodes(self) -> np.ndarray:
        """s_j = j h for j = 1..N (the open positive half-line)."""
        return self.h * np.arange(1, self.N + 1)

    def steps(self, t: float) -> int:
        m = t / self.h
        if abs(m - round(m)) > 1e-9 * max(1.0, abs(m)):
            raise ValueError(f"time {t} is not a multiple of the grid step {self.h}")
        return int(round(m))

    def to_json(self) -> dict:
        return {"d": self.d, "h": self.h, "S": self.S}


def _restricted_sqrt(A: np.ndarray, P: np.ndarray) -> np.ndarray:
    """Principal square root of A on the range of P, extended by the identity on the complement."""
    n = A.shape[0]
    return fractional_sqrt(A @ P + (np.eye(n) - P))


@dataclass
class _Component:
    key: frozenset
    P: np.ndarray
    P_adj: np.ndarray
    sqrt: dict  # k -> A_k^{1/2} on X_Lambda
    sqrt_adj: dict


class DilationSystem:
    """J, Q and the shift groups for a commuting tuple of type < pi/2.

    The dilation space is the direct sum over nonzero ergodic components
    Lambda of grid_Lambda (x) X: coordinates outside Lambda are absent there
    and their shift groups act as the identity. On the Lambda-summand

        (J x)(s)  = h^{|Lambda|/2} prod_{k in Lambda} A_k^{1/2} e^{-s_k A_k} P_Lambda x   (s_k > 0)
        Q         = 2^{|Lambda|} J~^*,  J~ built the same way from the adjoint tuple,

    and (U^k_t g)(s) = g(s + t e_k) with zero fill.
    """

    def __init__(self, tuple_: CommutingTuple, grid: LineGrid, threshold: float = ZERO_THRESHOLD):
        if grid.d != tuple_.d:
            raise ValueError("grid dimension must match the tuple")
        for k, A in enumerate(tuple_.operators):
            w = spectral_angle(A, threshold)
            if w >= math.pi / 2:
                raise TypeTooLarge(f"operator {k} has spectral angle {w:.6g} >= pi/2")
        self.tuple = tuple_
        self.grid = grid
        self.split = ergodic_split(tuple_, threshold)
        adj = adjoint_tuple(tuple_)
        self.components = []
        for key in sorted(self.split.nonzero(), key=lambda s: (len(s), sorted(s))):
            P = self.split[key]
            Pa = P.conj().T
            sq = {k: _restricted_sqrt(tuple_[k], P) for k in key}
            sqa = {k: _restricted_sqrt(adj[k], Pa) for k in key}
            self.components.append(_Component(key, P, Pa, sq, sqa))
        self._decay_cache: dict = {}

    # ---- per-coordinate factors

    def _decays(self, k: int, adjoint: bool = False) -> np.ndarray:
        """e^{-s_j A_k} for the positive nodes, stacked; computed by repeated multiplication."""
        key = (k, adjoint)
        if key not in self._decay_cache:
            A = self.tuple[k].conj().T if adjoint else self.tuple[k]
            step = scipy.linalg.expm(-self.grid.h * A)
            out = np.empty((self.grid.N, A.shape[0], A.shape[0]), complex)
            cur = step
            for j in range(self.grid.N):
                out[j] = cur
                cur = cur @ step
            self._decay_cache[key] = out
        return self._decay_cache[key]

    def pairing_factor(self, comp: _Component, k: int, steps: int) -> np.ndarray:
        """2h sum_j (A~^{1/2} e^{-s_j A~})^H A^{1/2} e^{-(s_j + t) A} over nodes with s_j + t inside the grid."""
        N = self.grid.N
        E = self._decays(k)
        Ea = self._decays(k, adjoint=True)
        if steps >= N:
            return np.zeros_like(E[0])
        left = np.einsum("jba->jab", Ea[: N - steps].conj()) @ comp.sqrt_adj[k].conj().T
        right = comp.sqrt[k] @ E[steps:]
        return 2.0 * self.grid.h * np.sum(left @ right, axis=0)

    def compressed_group(self, times: Sequence[float]) -> np.ndarray:
        """Q U^1_{t_1} ... U^d_{t_d} J as an n x n matrix."""
        steps = [self.grid.steps(t) for t in times]
        n = self.tuple.n
        out = np.zeros((n, n), complex)
        for comp in self.components:
            M = comp.P.copy()
            for k in sorted(comp.key):
                M = self.pairing_factor(comp, k, steps[k]) @ M
            out += comp.P @ M
        return out

    def semigroup(self, times: Sequence[float]) -> np.ndarray:
        n = self.tuple.n
        T = np.eye(n, dtype=complex)
        for k, t in enumerate(times):
            T = scipy.linalg.expm(-t * self.tuple[k]) @ T
        return T

    # ---- norms

    def _gram(self, comp: _Component, adjoint: bool) -> np.ndarray:
        """sum_s phi(s)^H phi(s) by nesting coordinate sums."""
        h = self.grid.h
        P = comp.P_adj if adjoint else comp.P
        G = None
        for k in sorted(comp.key, reverse=True):
            R = comp.sqrt_adj[k] if adjoint else comp.sqrt[k]
            F = R @ self._decays(k, adjoint)  # (N, n, n)
            inner = np.eye(F.shape[1]) if G is None else G
            G = h * np.einsum("jba,bc,jcd->ad", F.conj(), inner, F)
        if G is None:
            return P.conj().T @ P
        return P.conj().T @ G @ P

    def norm_J(self) -> float:
        G = sum(self._gram(c, False) for c in self.components)
        return math.sqrt(max(float(np.linalg.eigvalsh(0.5 * (G + G.conj().T)).max()), 0.0))

    def norm_Q(self) -> float:
        # Q^* restricted to each summand is 2^{|Lambda|} J~; summands are orthogonal in the dilation space
        G = sum((4.0 ** len(c.key)) * self._gram(c, True) for c in self.components)
        return math.sqrt(max(float(np.linalg.eigvalsh(0.5 * (G + G.conj().T)).max()), 0.0))

    # ---- materialization (small grids only)

    def layout(self) -> list:
        L = 2 * self.grid.N + 1
        return [{"subset": sorted(c.key), "shape": [L] * len(c.key) + [self.tuple.n]} for c in self.components]

    def materialize(self, max_rows: int = 200_000) -> tuple[np.ndarray, np.ndarray]:
        """Dense J (rows = dilation space) and Q on the full [-S, S] grid."""
        n, N, h = self.tuple.n, self.grid.N, self.grid.h
        L = 2 * N + 1
        rows = sum(L ** len(c.key) * n for c in self.components)
        if rows > max_rows:
            raise ValueError(f"dilation space of dimension {rows} is too large to materialize")
        J_blocks, Q_blocks = [], []
        for comp in self.components:
            keys = sorted(comp.key)
            Jc = np.zeros((L,) * len(keys) + (n, n), complex)
            Jt = np.zeros_like(Jc)
            for idx in itertools.product(range(1, N + 1), repeat=len(keys)):
                M = comp.P.copy()
                Ma = comp.P_adj.copy()
                for axis, k in enumerate(keys):
                    j = idx[axis] - 1
                    M = comp.sqrt[k] @ self._decays(k)[j] @ M
                    Ma = comp.sqrt_adj[k] @ self._decays(k, True)[j] @ Ma
                pos = tuple(N + i for i in idx)
                Jc[pos] = h ** (len(keys) / 2) * M
                Jt[pos] = h ** (len(keys) / 2) * Ma
            J_blocks.append(Jc.reshape(-1, n))
            Q_blocks.append((2.0 ** len(keys)) * Jt.reshape(-1, n).conj().T)
        return np.vstack(J_blocks), np.hstack(Q_blocks)

    def shift_matrix(self, k: int, steps: int) -> np.ndarray:
        """U^k at ``steps`` grid steps on the materialized dilation space."""
        n, N = self.tuple.n, self.grid.N
        L = 2 * N + 1
        blocks = []
        for comp in self.components:
            keys = sorted(comp.key)
            m = len(keys)
            size = L ** m * n
            if k not in comp.key:
                blocks.append(np.eye(size))
                continue
            axis = keys.index(k)
            S1 = np.eye(L, k=steps)  # (S1 g)[i] = g[i + steps]
            mats = [np.eye(L)] * m
            mats[axis] = S1
            M = np.eye(1)
            for mat in mats:
                M = np.kron(M, mat)
            blocks.append(np.kron(M, np.eye(n)))
        return scipy.linalg.block_diag(*blocks)

    def to_json(self) -> dict:
        from .serialize import matrix_to_json

        J, Q = self.materialize()
        return {"grid": {"h": self.grid.h, "S": self.grid.S}, "J": matrix_to_json(J), "Q": matrix_to_json(Q),
                "shift": "index", "layout": self.layout()}


def default_line_grid(tuple_: CommutingTuple, h: float = 1e-2, S: float = 30.0) -> LineGrid:
    """h = 1e-2, S = 30, with S stretched by 0.5/sigma when the smallest nonzero real part sigma is below 0.5."""
    sigma = math.inf
    for A in tuple_.operators:
        lam = np.linalg.eigvals(A)
        scale = np.abs(lam).max()
        nz = lam[np.abs(lam) > ZERO_THRESHOLD * scale] if scale > 0 else lam[:0]
        if nz.size:
            sigma = min(sigma, float(nz.real.min()))
    if sigma < 0.5:
        S = S * 0.5 / sigma
    S = h * math.ceil(S / h)
    return LineGrid(tuple_.d, h, S)


def build_dilation(tuple_: CommutingTuple, grid: LineGrid | None = None) -> DilationSystem:
    return DilationSystem(tuple_, grid or default_line_grid(tuple_))


def verify_factorization(system: DilationSystem, times: Sequence[float]) -> float:
    """|| T_{t_1} ... T_{t_d} - Q U_{t_1} ... U_{t_d} J || in the spectral norm."""
    times = list(times)
    if len(times) != system.tuple.d:
        raise ValueError("need one time per coordinate")
    for t in times:
        if t < 0 or t > system.grid.S / 2 + 1e-12:
            raise ValueError("times must lie in [0, S/2]")
    return float(np.linalg.norm(system.semigroup(times) - system.compressed_group(times), 2))


# ----------------------------------------------------------------- groups


@dataclass
class GroupTuple:
    """Commuting invertible unit-step matrices U_k = U^k_h, with U^k_{m h} = U_k^m."""

    unit_steps: tuple
    h: float = 1.0
    space: SpaceModel | None = None

    def __post_init__(self):
        ops = tuple(as_matrix(U) for U in self.unit_steps)
        CommutingTuple(ops, self.space, tolerance=1e-8)
        for U in ops:
            if np.linalg.cond(U) > COND_CEILING:
                raise SingularResolvent("group step is not invertible")
        self.unit_steps = ops
        self.space = self.space or SpaceModel.euclidean(ops[0].shape[0])

    @property
    def d(self) -> int:
        return len(self.unit_steps)

    def power(self, k: int, m: int) -> np.ndarray:
        U = self.unit_steps[k]
        return np.linalg.matrix_power(U if m >= 0 else np.linalg.inv(U), abs(m))

    def element(self, steps: Sequence[int]) -> np.ndarray:
        n = self.unit_steps[0].shape[0]
        out = np.eye(n, dtype=complex)
        for k, m in enumerate(steps):
            out = self.power(k, int(m)) @ out
        return out

    def generators(self) -> CommutingTuple:
        """B_k = -log(U_k)/h on the principal branch."""
        gens = []
        for k, U in enumerate(self.unit_steps):
            lam = np.linalg.eigvals(U)
            scale = np.abs(lam).max()
            if np.any((np.abs(lam.imag) <= 1e-12 * scale) & (lam.real < 0)):
                raise BranchCutViolation(f"unit step {k} has an eigenvalue on (-inf, 0]")
            gens.append(-scipy.linalg.logm(U) / self.h)
        return CommutingTuple(tuple(gens), self.space, tolerance=1e-8)


def cyclic_shift_group(d: int, L: int, h: float = 1.0) -> GroupTuple:
    """Cyclic index shifts on an L^d torus (L odd keeps -1 out of the spectrum)."""
    if L % 2 == 0:
        raise ValueError("use an odd torus length so the principal logarithm exists")
    C = np.roll(np.eye(L), 1, axis=1)  # (C g)[i] = g[i + 1]
    ops = []
    for k in range(d):
        mats = [np.eye(L)] * d
        mats[k] = C
        M = np.eye(1)
        for m in mats:
            M = np.kron(M, m)
        ops.append(M)
    return GroupTuple(tuple(ops), h)


def group_power_bound(group, M: int) -> float:
    """sup over |m| <= M and coordinates k of ||U_k^m||."""
    if isinstance(group, DilationSystem):
        # zero-filled index shifts are partial isometries and the zeroth power is the identity
        return 1.0
    best = 0.0
    for k in range(group.d):
        U, Ui = group.unit_steps[k], np.linalg.inv(group.unit_steps[k])
        P = np.eye(U.shape[0], dtype=complex)
        Pi = P.copy()
        best = max(best, operator_norm(P, group.space))
        for _ in range(M):
            P, Pi = U @ P, Ui @ Pi
            best = max(best, operator_norm(P, group.space), operator_norm(Pi, group.space))
    return float(best)


# --------------------------------------------------------------- transfer


@dataclass
class TransferReport:
    norm_fA: float
    norm_fB: float
    norm_Q: float
    norm_J: float
    slack: float
    defect: float
    holds: bool

    @property
    def margin(self) -> float:
        return self.norm_Q * self.norm_J * self.norm_fB + self.slack - self.norm_fA


def _shift_symbol_norm(form: H01Form, components: list) -> float:
    """||f(B)|| for the shift generators: on each summand the sup over imaginary axes of the
    components supported inside it."""
    best = 0.0
    for key in components:
        parts = [f for k, f in form.components.items() if k <= key]
        coords = sorted(key)

        def modulus(zs, parts=parts):
            out = np.complex128(0.0)
            for f in parts:
                out = out + f.raw(zs)
            return np.abs(out)

        angles = [math.pi / 2] * form.d
        best = max(best, boundary_sup(modulus, angles, coords).value)
    return float(best)


def transfer_fc(f, tuple_: CommutingTuple, system, J=None, Q=None, times_probe: Sequence[float] | None = None,
                method: str = "contour") -> TransferReport:
    """Check ||f(A)|| <= ||Q|| ||J|| ||f(B)|| + slack on a dilation.

    The slack is the largest factorization defect over probe times multiplied
    by sup|f|; it absorbs the grid error of the discrete dilation.
    """
    form = H01Form.of(f, tuple_.d)
    for key, comp in form.components.items():
        for k in key:
            if not comp.domain.angles[k] > math.pi / 2:
                raise AngleOrderViolation("the group side needs function angles above pi/2")
    if method == "oracle":
        fA = spectral_oracle_fc(form, tuple_)
    else:
        fA = contour_fc(form, tuple_).value
    norm_fA = operator_norm(fA, tuple_.space)
    sup_f = boundary_sup(form.raw, list(form.domain.angles),
                         sorted(set().union(*form.components.keys())) if form.components else []).value
    if isinstance(system, DilationSystem):
        nQ, nJ = system.norm_Q(), system.norm_J()
        fB = _shift_symbol_norm(form, [c.key for c in system.components])
        if times_probe is None:
            times_probe = [0.0, system.grid.h * max(1, system.grid.N // 8)]
        defect = max(verify_factorization(system, [t] * tuple_.d) for t in times_probe)
    else:
        gens = system.generators()
        fB = operator_norm(contour_fc(form, gens).value, system.space)
        n = tuple_.n
        Jm = np.eye(n) if J is None else np.asarray(J, dtype=complex)
        Qm = np.eye(n) if Q is None else np.asarray(Q, dtype=complex)
        nQ = float(np.linalg.norm(Qm, 2))
        nJ = float(np.linalg.norm(Jm, 2))
        defect = 0.0
        for m in range(0, 4):
            T = np.eye(n, dtype=complex)
            for k in range(tuple_.d):
                T = scipy.linalg.expm(-m * system.h * tuple_[k]) @ T
            defect = max(defect, float(np.linalg.norm(T - Qm @ system.element([m] * tuple_.d) @ Jm, 2)))
    slack = defect * sup_f
    holds = norm_fA <= nQ * nJ * fB + slack + 1e-12 * max(norm_fA, 1.0)
    return TransferReport(float(norm_fA), float(fB), float(nQ), float(nJ), float(slack), float(defect), bool(holds))


# ------------------------------------------------------------ multipliers


@dataclass
class SampledKernel:
    """Values b(t) on the grid points (i - origin) * h, one array axis per coordinate."""

    values: np.ndarray
    h: float
    origin: tuple

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=complex)
        self.origin = tuple(int(o) for o in self.origin)
        if len(self.origin) != self.values.ndim:
            raise ValueError("origin needs one index per kernel axis")

    @property
    def d(self) -> int:
        return self.values.ndim

    def offsets(self) -> list:
        """(integer step vector, value) for every nonzero sample."""
        out = []
        for idx in zip(*np.nonzero(self.values)):
            out.append((tuple(int(i) - o for i, o in zip(idx, self.origin)), self.values[idx]))
        return out

    def to_json(self) -> dict:
        from .serialize import vector_to_json

        return {"shape": list(self.values.shape), "values": vector_to_json(self.values), "h": self.h,
                "origin": list(self.origin)}

    @classmethod
    def from_json(cls, obj: dict) -> "SampledKernel":
        from .serialize import vector_from_json

        return cls(vector_from_json(obj["values"]).reshape(obj["shape"]), float(obj["h"]), tuple(obj["origin"]))

    @classmethod
    def unit_mass(cls, d: int, h: float) -> "SampledKernel":
        return cls(np.ones((1,) * d), h, (0,) * d)


@dataclass
class MultiplierReport:
    operator_norm: float
    symbol_sup: float
    discrepancy: float
    mode: str


def _shift_1d(L: int, m: int, cyclic: bool) -> np.ndarray:
    if cyclic:
        return np.roll(np.eye(L), m, axis=1)
    return np.eye(L, k=m)


def _assemble(kernel: SampledKernel, L: int, cyclic: bool) -> np.ndarray:
    d = kernel.d
    T = np.zeros((L ** d, L ** d), complex)
    scale = kernel.h ** d
    for steps, b in kernel.offsets():
        M = np.eye(1)
        for m in steps:
            M = np.kron(M, _shift_1d(L, m, cyclic))
        T += b * scale * M
    return T


def _symbol_grid(kernel: SampledKernel, size: int) -> np.ndarray:
    """|b^| on the DFT frequency grid of the given size per axis."""
    pad = np.zeros((size,) * kernel.d, complex)
    for steps, b in kernel.offsets():
        pad[tuple(m % size for m in steps)] += b
    return np.abs(np.fft.fftn(pad)) * kernel.h ** kernel.d


def multiplier_norm(kernel: SampledKernel, L: int, mode: str = "circulant", oversample: int = 4) -> MultiplierReport:
    """Operator norm of sum_t b(t) h^d U_t on an L^d grid against the sup of the symbol.

    Circulant mode uses cyclic shifts and the L-point DFT grid, where the two
    sides coincide. Zero-pad mode uses truncated shifts and an oversampled DFT
    grid for the symbol.
    """
    if mode not in ("circulant", "zeropad"):
        raise ValueError("mode must be circulant or zeropad")
    if any(abs(m) >= L for steps, _ in kernel.offsets() for m in steps):
        raise ValueError("kernel support exceeds the grid")
    cyclic = mode == "circulant"
    T = _assemble(kernel, L, cyclic)
    op = float(np.linalg.svd(T, compute_uv=False)[0]) if T.size else 0.0
    sym = float(_symbol_grid(kernel, L if cyclic else oversample * L).max())
    return MultiplierReport(op, sym, abs(op - sym), mode)


def group_multiplier(kernel: SampledKernel, group: GroupTuple) -> np.ndarray:
    """sum_t b(t) h^d U^1_{t_1} ... U^d_{t_d} for a matrix group."""
    n = group.unit_steps[0].shape[0]
    out = np.zeros((n, n), complex)
    for steps, b in kernel.offsets():
        out += b * kernel.h ** kernel.d * group.element(steps)
    return out


def symbol_sup(kernel: SampledKernel, size: int = 4096) -> float:
    """sup over a fine frequency grid of |sum_t b(t) h^d e^{-i xi t}|."""
    per_axis = max(8, int(round(size ** (1.0 / kernel.d))))
    span = max(max(abs(m) for steps, _ in kernel.offsets() for m in steps) * 2 + 1, 1)
    return float(_symbol_grid(kernel, max(per_axis, 4 * span)).max())


# ---------------------------------------------------------------- Laplace


def laplace_transform(beta: SampledKernel, z: Sequence[complex]) -> complex:
    """sum_t beta(t) h^d prod_k e^{-z_k t_k} over a kernel sampled on the positive orthant."""
    z = [complex(v) for v in z]
    if len(z) != beta.d:
        raise ValueError("need one z per kernel axis")
    if any(v.real < 0 for v in z):
        raise ValueError("Laplace transform requires Re z >= 0")
    total = 0j
    for steps, b in beta.offsets():
        t = [m * beta.h for m in steps]
        if any(tk < 0 for tk in t):
            raise ValueError("kernel must be supported in the positive orthant")
        total += b * math.prod(np.exp(-zk * tk) for zk, tk in zip(z, t))
    return complex(total * beta.h ** beta.d)


def laplace_operator(beta: SampledKernel, tuple_: CommutingTuple) -> np.ndarray:
    """sum_t beta(t) h^d prod_k e^{-t_k B_k}, with semigroup steps by repeated multiplication."""
    n = tuple_.n
    steps = [scipy.linalg.expm(-beta.h * B) for B in tuple_.operators]
    out = np.zeros((n, n), complex)
    for idx, b in beta.offsets():
        M = np.eye(n, dtype=complex)
        for k, m in enumerate(idx):
            if m < 0:
                raise ValueError("kernel must be supported in the positive orthant")
            M = np.linalg.matrix_power(steps[k], m) @ M
        out += b * M
    return out * beta.h ** beta.d


def yosida_regularize(B, eps: float) -> np.ndarray:
    """eps I + B (I + eps B)^{-1}."""
    if not eps > 0:
        raise ValueError("eps must be positive")
    B = as_matrix(B)
    n = B.shape[0]
    M = np.eye(n) + eps * B
    if np.linalg.cond(M) > COND_CEILING:
        raise SingularResolvent(f"-1/eps = {-1 / eps:.6g} is (numerically) an eigenvalue")
    return eps * np.eye(n) + B @ np.linalg.solve(M, np.eye(n))


def yosida_scalar(z, eps: float):
    return eps + z / (1 + eps * z)


# ------------------------------------------------------ group equivalence


@dataclass
class GroupEquivalence:
    K_multiplier: float
    K_fc: float
    ratio: float
    multiplier_ratios: list
    power_bound: float


def random_kernels(d: int, h: float, count: int, seed: int, radius: int = 3) -> list:
    """The unit mass followed by ``count`` seeded kernels on {-radius..radius}^d."""
    rng = np.random.default_rng(seed)
    out = [SampledKernel.unit_mass(d, h)]
    for _ in range(count):
        shape = (2 * radius + 1,) * d
        vals = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
        vals *= rng.random(shape) < 0.5
        if not np.any(vals):
            vals.flat[0] = 1.0
        out.append(SampledKernel(vals, h, (radius,) * d))
    return out


def group_calculus_equivalence_check(group: GroupTuple, kernels: Sequence[SampledKernel] | None = None,
                                     ensemble_size: int = 8, seed: int = 0, delta: float = 0.25,
                                     power_range: int = 8) -> GroupEquivalence:
    """Multiplier constant max ||sum b U|| / sup|b^| against the calculus constant of the generators
    on sectors of half-angle pi/2 + delta."""
    if kernels is None:
        kernels = random_kernels(group.d, group.h, 6, seed)
    if not any(np.array_equal(k.values, np.ones((1,) * group.d)) for k in kernels):
        kernels = [SampledKernel.unit_mass(group.d, group.h)] + list(kernels)
    ratios = []
    for kern in kernels:
        op = operator_norm(group_multiplier(kern, group), group.space)
        sym = symbol_sup(kern)
        ratios.append(op / sym if sym > 0 else 0.0)
    K_mult = float(max(ratios))
    gens = group.generators()
    angle = math.pi / 2 + delta
    est = fc_constant_estimate(gens, SectorDomain((angle,) * group.d), ensemble_size, seed)
    bound = group_power_bound(group, power_range)
    return GroupEquivalence(K_mult, est.value, K_mult / est.value if est.value > 0 else float("nan"), ratios, bound)
