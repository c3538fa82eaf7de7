"""Problem-file ingestion, check suites and report emission."""
from __future__ import annotations

import csv
import io
import json
import logging
import math
import platform
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Callable

import jsonschema
import numpy as np
import scipy
import scipy.linalg

from . import __version__
from .calculus import (angle_dependence_profile, contour_fc, fc_constant_estimate, function_ensemble,
                       integral_identity_check, phi_approximation_check, quad_profile, quadrature_overrides,
                       spectral_oracle_fc)
from .dilation import (build_dilation, cyclic_shift_group, default_line_grid,
                       group_calculus_equivalence_check, multiplier_norm, random_kernels, transfer_fc,
                       verify_factorization)
from .errors import HfcError, SchemaError
from .functions import H01Form, SectorDomain, SectorFunction, phi_m_tensor, sqrt_exp_tensor
from .operators import CommutingTuple, ergodic_split, sectorial_profile
from .serialize import canonical_dumps, digest, vector_from_json
from .squarefn import (SquareFunctionJob, closed_form_sfe_sqrt_exp, quad_inequality_check,
                       reproducing_formula_check, schatten_growth_experiment, sfe_constant,
                       square_function_norm)
from .stochastic import LogGrid

log = logging.getLogger(__name__)

VERBS = ("analyze", "fc", "fc-constant", "angle-profile", "phi-check", "integral-check", "sqfn",
         "quad-check", "reproduce", "schatten", "dilate", "transfer", "multiplier", "group-equiv")
ALL_VERBS = VERBS + ("verify-all",)
# verbs whose checks draw random ensembles, probes or corpora and so need an explicit seed
RANDOMIZED = frozenset({"fc", "fc-constant", "angle-profile", "sqfn", "quad-check", "schatten",
                        "transfer", "multiplier", "group-equiv", "verify-all"})

DEFAULT_TOLERANCES = {
    "analyze.commutation": 1e-10,
    "analyze.ergodic": 1e-8,
    "fc.oracle": 1e-6,
    "fc.homomorphism": 1e-7,
    "fc.ladder": 1e-7,
    "fc-constant.lower": 1e-9,
    "fc-constant.normal": 1e-3,
    "angle-profile.flatness": 0.05,
    "phi-check.spectral": 1e-9,
    "phi-check.exponent": 0.1,
    "phi-check.kernel": 1e-10,
    "integral-check.defect": 1e-6,
    "sqfn.norm": 1e-6,
    "sqfn.constant": 0.02,
    "sqfn.kernel": 1e-12,
    "quad-check.normal": 1e-6,
    "reproduce.defect": 1e-6,
    "reproduce.refinement": 1e-9,
    "schatten.monotone": 0.05,
    "schatten.control": 0.05,
    "dilate.defect": 5e-3,
    "transfer.margin": 0.0,
    "multiplier.circulant": 1e-10,
    "multiplier.zeropad": 0.02,
    "group-equiv.ratio": 4.0,
}


# ------------------------------------------------------------------ schema


def load_schema() -> dict:
    return json.loads(resources.files("hfc").joinpath("schema/problem.json").read_text())


def validate_problem(obj) -> None:
    try:
        jsonschema.validate(obj, load_schema())
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise SchemaError(f"{where}: {exc.message}") from None


def read_problem(path) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise SchemaError(f"cannot read problem file: {exc}") from None
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"malformed JSON: {exc}") from None
    validate_problem(obj)
    return obj


def demo_problem(name: str = "demo") -> dict:
    return json.loads(resources.files("hfc").joinpath(f"problems/{name}.json").read_text())


# ------------------------------------------------------------------ corpus


def _sub_seed(seed: int, *labels: int) -> int:
    return int(np.random.SeedSequence([seed, *labels]).generate_state(1)[0])


def random_commuting_tuple(rng: np.random.Generator, d: int, n: int, kind: str = "normal",
                           max_angle: float = 0.35 * math.pi) -> CommutingTuple:
    """d commuting n x n matrices with joint eigenvalues in the sector of half-angle max_angle.

    normal: conjugation by a random unitary; diagonalizable: by I + 0.3 G with G complex Gaussian.
    """
    G = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    if kind == "normal":
        S, _ = np.linalg.qr(G)
        S_inv = S.conj().T
    elif kind == "diagonalizable":
        S = np.eye(n) + 0.3 * G / math.sqrt(2 * n)
        S_inv = np.linalg.inv(S)
    else:
        raise ValueError(f"unknown corpus kind {kind!r}")
    ops = []
    for _ in range(d):
        lam = 10.0 ** rng.uniform(-1, 1, n) * np.exp(1j * rng.uniform(-max_angle, max_angle, n))
        ops.append(S @ np.diag(lam) @ S_inv)
    return CommutingTuple(tuple(ops), tolerance=1e-8)


def tuple_corpus(cfg: dict, seed: int) -> list:
    rng = np.random.default_rng(_sub_seed(seed, 0xC0))
    ds = cfg.get("d", [1, 2, 3])
    n_max = int(cfg.get("n_max", 6))
    out = []
    for i in range(int(cfg["count"])):
        d = int(ds[i % len(ds)])
        n = int(rng.integers(1, n_max + 1))
        out.append(random_commuting_tuple(rng, d, n, cfg.get("kind", "normal"),
                                          float(cfg.get("max_angle", 0.35 * math.pi))))
    return out


def is_normal_euclidean(t: CommutingTuple, tol: float = 1e-10) -> bool:
    if t.space.kind != "euclidean":
        return False
    for A in t.operators:
        scale = max(float(np.linalg.norm(A, 2)) ** 2, 1e-300)
        if np.linalg.norm(A @ A.conj().T - A.conj().T @ A, 2) > tol * scale:
            return False
    return True


def unitary_joint_eigenbasis(t: CommutingTuple, seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """(Z, lam) with Z unitary and lam[j, k] the eigenvalue of A_k on column j, for normal tuples.

    A generic combination of the operators is normal with the joint eigenspaces as its
    eigenspaces, so its complex Schur form is diagonal.
    """
    rng = np.random.default_rng(seed)
    coeffs = rng.standard_normal(t.d) + 1j * rng.standard_normal(t.d)
    M = sum(c * A for c, A in zip(coeffs, t.operators))
    _, Z = scipy.linalg.schur(M, output="complex")
    lam = np.array([[np.vdot(Z[:, j], A @ Z[:, j]) for A in t.operators] for j in range(t.n)])
    return Z, lam


# ------------------------------------------------------------------ records


@dataclass
class Check:
    name: str
    value: float | None
    target: float | None
    tolerance: float | None
    passed: bool
    error: str | None = None

    def to_json(self) -> dict:
        out = {"name": self.name, "value": self.value, "target": self.target,
               "tolerance": self.tolerance, "pass": self.passed}
        if self.error is not None:
            out["error"] = self.error
        return out


@dataclass
class Outcome:
    checks: list = field(default_factory=list)
    series: dict = field(default_factory=dict)

    def add(self, name, value, target, tolerance, passed) -> None:
        value = None if value is None else float(value)
        self.checks.append(Check(name, value, None if target is None else float(target),
                                 None if tolerance is None else float(tolerance), bool(passed)))

    def curve(self, name, x_label, y_label, x, y) -> None:
        self.series[name] = {"x_label": x_label, "y_label": y_label,
                             "x": [float(v) for v in x], "y": [float(v) for v in y]}


@dataclass
class Problem:
    raw: dict
    seed: int | None
    tuples: list
    labels: list
    functions: list
    tolerances: dict

    def tol(self, key: str) -> float:
        return float(self.tolerances.get(key, DEFAULT_TOLERANCES[key]))

    def opt(self, key: str, default=None):
        return self.raw.get(key, default)

    def seed_for(self, *labels: int) -> int:
        return _sub_seed(self.seed if self.seed is not None else 0, *labels)


def _function_entry(obj) -> H01Form:
    if isinstance(obj, list):
        return H01Form.from_terms([SectorFunction.from_json(o) for o in obj])
    return H01Form.of(SectorFunction.from_json(obj))


def build_problem(raw: dict, seed: int | None = None) -> Problem:
    validate_problem(raw)
    seed = raw.get("seed") if seed is None else int(seed)
    tuples, labels = [], []
    try:
        if "tuple" in raw:
            tuples.append(CommutingTuple.from_json(raw["tuple"]))
            labels.append("main")
        if "corpus" in raw:
            if seed is None:
                raise SchemaError("a tuple corpus needs a seed")
            for i, t in enumerate(tuple_corpus(raw["corpus"], seed)):
                tuples.append(t)
                labels.append(f"c{i:02d}")
        functions = [_function_entry(f) for f in raw.get("functions", [])]
    except SchemaError:
        raise
    except (HfcError, ValueError, KeyError, TypeError) as exc:
        raise SchemaError(f"invalid problem content: {exc}") from None
    unknown = set(raw.get("tolerances", {})) - set(DEFAULT_TOLERANCES)
    if unknown:
        raise SchemaError(f"unknown tolerance keys: {sorted(unknown)}")
    return Problem(raw, seed, tuples, labels, functions, dict(raw.get("tolerances", {})))


# ------------------------------------------------------------------ helpers


def _default_angles(t: CommutingTuple, raw_angles=None) -> list:
    if raw_angles:
        return [float(raw_angles[k % len(raw_angles)]) for k in range(t.d)]
    return [0.45 * math.pi if w < 0.3 * math.pi else 0.5 * (w + math.pi) for w in t.types()]


def _functions_for(p: Problem, t: CommutingTuple, idx: int, size: int = 10) -> list:
    given = [f for f in p.functions if f.d == t.d]
    if given:
        return given
    return function_ensemble(t.d, _default_angles(t, p.opt("angles")), size, p.seed_for(idx, 1))


def _rel(a: np.ndarray, b: np.ndarray) -> float:
    scale = max(float(np.linalg.norm(b, 2)), 1e-300)
    return float(np.linalg.norm(a - b, 2)) / scale


def _probe_vector(p: Problem, t: CommutingTuple) -> np.ndarray:
    if "x" in p.raw and len(p.raw["x"]) == t.n:
        return vector_from_json(p.raw["x"])
    return np.ones(t.n, dtype=complex) / math.sqrt(t.n)


# ------------------------------------------------------------------ verbs


def run_analyze(p: Problem, t: CommutingTuple, idx: int, label: str) -> Outcome:
    out = Outcome()
    from .operators import commutation_defect

    tol = p.tol("analyze.commutation")
    out.add(f"analyze.commutation/{label}", commutation_defect(t), 0.0, tol, commutation_defect(t) <= tol)
    for k, w in enumerate(t.types()):
        out.add(f"analyze.type/{label}/{k}", w, math.pi, None, w < math.pi)
        prof = sectorial_profile(t[k], t.space)
        above = prof.angles > w
        top = float(prof.constants[above][0]) if np.any(above) else float("inf")
        out.add(f"analyze.sectorial/{label}/{k}", top, None, None, math.isfinite(top))
        out.curve(f"sectorial/{label}/{k}", "angle", "C_theta", prof.angles, prof.constants)
    split = ergodic_split(t)
    total = sum(split.projections.values())
    resid = float(np.linalg.norm(total - np.eye(t.n), 2))
    tol = p.tol("analyze.ergodic")
    out.add(f"analyze.ergodic/{label}", resid, 0.0, tol, resid <= tol)
    return out


def run_fc(p: Problem, t: CommutingTuple, idx: int, label: str) -> Outcome:
    out = Outcome()
    forms = _functions_for(p, t, idx)
    omega = list(t.types())
    for j, f in enumerate(forms):
        res = contour_fc(f, t)
        oracle = spectral_oracle_fc(f, t)
        scale = max(float(np.linalg.norm(oracle, 2)), 1e-300)
        tol = p.tol("fc.oracle") + res.tail_estimate / scale
        err = _rel(res.value, oracle)
        out.add(f"fc.oracle/{label}/{j:02d}", err, 0.0, tol, err <= tol)
        g = forms[(j + 1) % len(forms)]
        prod = contour_fc(f * g, t).value
        sep = res.value @ contour_fc(g, t).value
        err = _rel(prod, sep)
        tol = p.tol("fc.homomorphism")
        out.add(f"fc.homomorphism/{label}/{j:02d}", err, 0.0, tol, err <= tol)
        theta = list(f.domain.angles)
        nu1 = [w + 0.3 * (min(a, math.pi) - w) for w, a in zip(omega, theta)]
        nu2 = [w + 0.7 * (min(a, math.pi) - w) for w, a in zip(omega, theta)]
        err = _rel(contour_fc(f, t, nu=nu1).value, contour_fc(f, t, nu=nu2).value)
        tol = p.tol("fc.ladder")
        out.add(f"fc.ladder/{label}/{j:02d}", err, 0.0, tol, err <= tol)
    return out


def run_fc_constant(p: Problem, t: CommutingTuple, idx: int, label: str) -> Outcome:
    out = Outcome()
    angles = _default_angles(t, p.opt("angles"))
    est = fc_constant_estimate(t, SectorDomain(tuple(angles)), int(p.opt("ensemble_size", 12)), p.seed_for(idx, 2))
    tol = p.tol("fc-constant.lower")
    out.add(f"fc-constant.lower/{label}", est.value, 1.0, tol, math.isfinite(est.value) and est.value >= 1 - tol)
    if is_normal_euclidean(t):
        tol = p.tol("fc-constant.normal")
        out.add(f"fc-constant.normal/{label}", est.value, 1.0, tol, abs(est.value - 1) <= tol)
    out.curve(f"fc-constant/{label}", "member", "ratio", range(len(est.ratios)), est.ratios)
    return out


def _default_ladder(t: CommutingTuple) -> list:
    w = max(t.types())
    lo = w + 0.1 * (math.pi - w)
    return list(np.linspace(lo, 0.9 * math.pi, 5))


def run_angle_profile(p: Problem, t: CommutingTuple, idx: int, label: str) -> Outcome:
    out = Outcome()
    ladder = p.opt("ladder") or _default_ladder(t)
    prof = angle_dependence_profile(t, ladder, int(p.opt("ensemble_size", 12)), p.seed_for(idx, 3))
    est = np.array(prof.estimates)
    finite = bool(est.size and np.all(np.isfinite(est)))
    out.add(f"angle-profile.finite/{label}", float(est.max()) if est.size else None, None, None, finite)
    if is_normal_euclidean(t) and finite:
        spread = float(est.max() / est.min() - 1.0)
        tol = p.tol("angle-profile.flatness")
        out.add(f"angle-profile.flatness/{label}", spread, 0.0, tol, spread <= tol)
    out.curve(f"angle-profile/{label}", "angle", "K_estimate", prof.angles, prof.estimates)
    return out


def _phi_scalar(lam: np.ndarray, m: float) -> np.ndarray:
    return m * m * lam / ((m + lam) * (1 + m * lam))


def run_phi_check(p: Problem, t: CommutingTuple, idx: int, label: str) -> Outcome:
    out = Outcome()
    m_ladder = [float(m) for m in p.opt("m_ladder", [2.0 ** k for k in range(0, 11)])]
    x0 = _probe_vector(p, t)
    for k in range(t.d):
        A = t[k]
        # the approximation only converges on the closure of the range, so drop the kernel part
        x = x0 - ergodic_split(CommutingTuple((A,), t.space))[frozenset()] @ x0
        if not np.linalg.norm(x) > 0:
            continue
        rep = phi_approximation_check(A, x, m_ladder, t.space)
        tol = p.tol("phi-check.kernel")
        out.add(f"phi-check.kernel/{label}/{k}", rep.kernel_fraction, 0.0, tol, rep.precondition_ok)
        if not rep.precondition_ok:
            continue
        if is_normal_euclidean(CommutingTuple((A,), t.space)):
            T, Z = scipy.linalg.schur(A, output="complex")
            lam, c = np.diag(T), Z.conj().T @ x
            nx = float(np.linalg.norm(x))
            worst = max(abs(e - float(np.linalg.norm((1 - _phi_scalar(lam, m)) * c))) / nx
                        for m, e in zip(m_ladder, rep.errors))
            tol = p.tol("phi-check.spectral")
            out.add(f"phi-check.spectral/{label}/{k}", worst, 0.0, tol, worst <= tol)
        tol = p.tol("phi-check.exponent")
        ex = rep.fitted_exponent
        out.add(f"phi-check.exponent/{label}/{k}", ex, 1.0, tol, ex is not None and abs(ex - 1) <= tol)
        out.curve(f"phi-check/{label}/{k}", "m", "error", m_ladder, rep.errors)
    return out


def run_integral_check(p: Problem, t: CommutingTuple, idx: int, label: str) -> Outcome:
    out = Outcome()
    for k in range(t.d):
        if not t.types()[k] < math.pi / 2:
            continue
        tol = p.tol("integral-check.defect")
        for m in (1.0, 4.0, 16.0):
            rep = integral_identity_check(t[k], m)
            out.add(f"integral-check.defect/{label}/{k}/m{int(m)}", rep.defect, 0.0, tol,
                    rep.precondition_ok and rep.defect <= tol)
    return out


def _sqfn_oracle(t: CommutingTuple, x: np.ndarray) -> float:
    """||x||_F for F = z^{1/2} e^{-z} on a normal tuple: int_0^inf |t lam| e^{-2 t Re lam} dt/t = |lam|/(2 Re lam)."""
    Z, lam = unitary_joint_eigenbasis(t)
    c = Z.conj().T @ x
    safe = np.where(np.abs(lam) > 1e-12, lam, 1.0)
    factor = np.where(np.abs(lam) > 1e-12, np.abs(safe) / (2 * safe.real), 0.0)
    return float(math.sqrt(np.sum(np.abs(c) ** 2 * np.prod(factor, axis=1))))


def run_sqfn(p: Problem, t: CommutingTuple, idx: int, label: str) -> Outcome:
    out = Outcome()
    w = max(t.types())
    if not w < math.pi / 2:
        return out
    F = sqrt_exp_tensor(t.d, 0.5 * (w + math.pi / 2))
    x = _probe_vector(p, t)
    g = p.opt("grid", {})
    grid = LogGrid(t.d, g.get("t_min", 1e-6), g.get("t_max", 1e6), g.get("per_decade", 32 if t.d < 3 else 8))
    rep = square_function_norm(SquareFunctionJob(t, F, grid, x), refinements=int(g.get("refinements", 1)),
                               seed=p.seed_for(idx, 4))
    out.curve(f"sqfn/{label}", "refinement", "norm_F", range(len(rep.refinement_curve)), rep.refinement_curve)
    if is_normal_euclidean(t):
        ref = _sqfn_oracle(t, x)
        err = abs(rep.norm_F - ref) / max(ref, 1e-300)
        tol = p.tol("sqfn.norm")
        out.add(f"sqfn.norm/{label}", err, 0.0, tol, err <= tol)
        if t.d <= 2:
            est = sfe_constant(t, F, seed=p.seed_for(idx, 5)).value
            ref = closed_form_sfe_sqrt_exp(t)
            err = abs(est - ref) / max(ref, 1e-300)
            tol = p.tol("sqfn.constant")
            out.add(f"sqfn.constant/{label}", err, 0.0, tol, err <= tol)
    else:
        out.add(f"sqfn.norm/{label}", rep.norm_F, None, None, math.isfinite(rep.norm_F))
    split = ergodic_split(t)
    for key, P in split.projections.items():
        if len(key) == t.d or not np.any(np.abs(P) > 0):
            continue
        xk = P @ x
        if np.linalg.norm(xk) == 0:
            continue
        val = square_function_norm(SquareFunctionJob(t, F, grid, xk), refinements=0).norm_F
        tol = p.tol("sqfn.kernel")
        name = "-".join(str(i) for i in sorted(key)) or "none"
        out.add(f"sqfn.kernel/{label}/{name}", val, 0.0, tol, val <= tol)
    return out


def run_quad_check(p: Problem, t: CommutingTuple, idx: int, label: str) -> Outcome:
    out = Outcome()
    w = max(t.types())
    angle = 0.5 * (w + math.pi)
    fns = [phi_m_tensor(2.0 ** j, t.d, angle) for j in range(-3, 4)]
    rep = quad_inequality_check(t, fns, _probe_vector(p, t), seed=p.seed_for(idx, 6))
    if is_normal_euclidean(t):
        tol = p.tol("quad-check.normal")
        out.add(f"quad-check.normal/{label}", rep.ratio, 1.0, tol, rep.ratio <= 1 + tol)
    else:
        out.add(f"quad-check.finite/{label}", rep.ratio, None, None, math.isfinite(rep.ratio))
    return out


def run_reproduce(p: Problem, t: CommutingTuple, idx: int, label: str) -> Outcome:
    out = Outcome()
    if t.d > 2 or not max(t.types()) < math.pi / 2:
        return out
    angle = 0.5 * (max(t.types()) + math.pi / 2)
    f = phi_m_tensor(1.0, t.d, 0.75 * math.pi)
    psi = phi_m_tensor(1.0, t.d, 0.75 * math.pi)
    F = sqrt_exp_tensor(t.d, angle)
    per = 64 if t.d == 1 else 16
    rep = reproducing_formula_check(t, f, psi, F, F, LogGrid(t.d, 1e-6, 1e6, per), refinements=2)
    tol = p.tol("reproduce.defect")
    out.add(f"reproduce.defect/{label}", rep.curve[-1], 0.0, tol, rep.curve[-1] <= tol)
    # refinement must not make the defect grow beyond the truncation floor
    growth = max((b - a for a, b in zip(rep.curve[:-1], rep.curve[1:])), default=0.0)
    tol = p.tol("reproduce.refinement")
    out.add(f"reproduce.refinement/{label}", growth, 0.0, tol, growth <= tol)
    out.curve(f"reproduce/{label}", "refinement", "defect", range(len(rep.curve)), rep.curve)
    return out


def run_schatten(p: Problem) -> Outcome:
    out = Outcome()
    opts = p.opt("schatten", {})
    pp = float(opts.get("p", 4.0))
    ladder = [int(n) for n in opts.get("n_ladder", [2, 4, 8])]
    size = int(opts.get("ensemble_size", 8))
    rep = schatten_growth_experiment(pp, ladder, seed=p.seed_for(7), ensemble_size=size)
    K = np.array(rep.K)
    worst = float(np.min(K[1:] / K[:-1] - 1.0))
    tol = p.tol("schatten.monotone")
    out.add("schatten.monotone", worst, 0.0, tol, worst >= -tol)
    ctl = schatten_growth_experiment(2.0, ladder, seed=p.seed_for(8), ensemble_size=size)
    dev = float(np.max(np.abs(np.array(ctl.K) - 1.0)))
    tol = p.tol("schatten.control")
    out.add("schatten.control", dev, 0.0, tol, dev <= tol)
    out.curve("schatten/p", "n", "K", ladder, rep.K)
    out.curve("schatten/control", "n", "K", ladder, ctl.K)
    return out


def _dilation_ladder(p: Problem, t: CommutingTuple) -> list:
    opts = p.opt("dilation", {})
    hs = sorted((float(h) for h in opts.get("h", [4e-3, 2e-3])), reverse=True)
    S = float(opts.get("S", 20.0))
    return [default_line_grid(t, h, S) for h in hs]


def run_dilate(p: Problem, t: CommutingTuple, idx: int, label: str) -> Outcome:
    out = Outcome()
    if t.d > 2 or not max(t.types()) < math.pi / 2:
        return out
    times = [float(s) for s in p.opt("dilation", {}).get("times", [0.5, 1.0])]
    grids = _dilation_ladder(p, t)
    defects = []
    for g in grids:
        system = build_dilation(t, g)
        defects.append(max(verify_factorization(system, [s] * t.d) for s in times))
    tol = p.tol("dilate.defect")
    out.add(f"dilate.defect/{label}", defects[-1], 0.0, tol, defects[-1] <= tol)
    if len(defects) > 1:
        worst = max(b / a for a, b in zip(defects[:-1], defects[1:]))
        out.add(f"dilate.monotone/{label}", worst, 1.0, None, worst < 1.0)
    out.curve(f"dilate/{label}", "h", "defect", [g.h for g in grids], defects)
    return out


def run_transfer(p: Problem, t: CommutingTuple, idx: int, label: str) -> Outcome:
    out = Outcome()
    if t.d > 2 or not max(t.types()) < math.pi / 2:
        return out
    system = build_dilation(t, _dilation_ladder(p, t)[-1])
    forms = function_ensemble(t.d, [0.75 * math.pi] * t.d, 3, p.seed_for(idx, 9), kinds=("phi",))
    for j, f in enumerate(forms):
        rep = transfer_fc(f, t, system)
        out.add(f"transfer.margin/{label}/{j:02d}", rep.margin, 0.0, p.tol("transfer.margin"), rep.holds)
    return out


def run_multiplier(p: Problem) -> Outcome:
    out = Outcome()
    opts = p.opt("multiplier", {})
    L = int(opts.get("L", 32))
    h = float(opts.get("h", 0.5))
    count = int(opts.get("kernels", 4))
    radius = int(opts.get("radius", min(3, L // 4 - 1)))
    over = int(opts.get("oversample", 4))
    kernels = random_kernels(1, h, count, p.seed_for(10), radius=radius)
    for j, ker in enumerate(kernels):
        rep = multiplier_norm(ker, L, "circulant")
        tol = p.tol("multiplier.circulant")
        out.add(f"multiplier.circulant/{j:02d}", rep.discrepancy, 0.0, tol, rep.discrepancy <= tol)
        rep = multiplier_norm(ker, L, "zeropad", over)
        rel = rep.discrepancy / max(rep.symbol_sup, 1e-300)
        tol = p.tol("multiplier.zeropad")
        out.add(f"multiplier.zeropad/{j:02d}", rel, 0.0, tol, rel <= tol)
    return out


def run_group_equiv(p: Problem) -> Outcome:
    out = Outcome()
    opts = p.opt("group", {})
    d, L, h = int(opts.get("d", 1)), int(opts.get("L", 15)), float(opts.get("h", 0.5))
    rep = group_calculus_equivalence_check(cyclic_shift_group(d, L, h), ensemble_size=6, seed=p.seed_for(11))
    bound = p.tol("group-equiv.ratio")
    out.add("group-equiv.ratio", rep.ratio, 1.0, bound, 1.0 / bound <= rep.ratio <= bound)
    return out


PER_TUPLE: dict[str, Callable] = {
    "analyze": run_analyze,
    "fc": run_fc,
    "fc-constant": run_fc_constant,
    "angle-profile": run_angle_profile,
    "phi-check": run_phi_check,
    "integral-check": run_integral_check,
    "sqfn": run_sqfn,
    "quad-check": run_quad_check,
    "reproduce": run_reproduce,
    "dilate": run_dilate,
    "transfer": run_transfer,
}
GLOBAL: dict[str, Callable] = {
    "schatten": run_schatten,
    "multiplier": run_multiplier,
    "group-equiv": run_group_equiv,
}


# ------------------------------------------------------------------ suite


def _units(verb: str, p: Problem) -> list:
    verbs = VERBS if verb == "verify-all" else (verb,)
    units = []
    for v in verbs:
        if v in GLOBAL:
            units.append((v, None, GLOBAL[v], ()))
        else:
            for i, (t, label) in enumerate(zip(p.tuples, p.labels)):
                units.append((v, label, PER_TUPLE[v], (t, i, label)))
    return units


def _run_unit(p: Problem, unit, quadrature: dict) -> Outcome:
    verb, label, fn, args = unit
    try:
        # set per unit: worker threads do not inherit context variables
        with quadrature_overrides(**quadrature):
            return fn(p, *args)
    except (HfcError, ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
        name = verb if label is None else f"{verb}/{label}"
        log.warning("check %s failed with %s: %s", name, type(exc).__name__, exc)
        return Outcome([Check(f"{name}/error", None, None, None, False, f"{type(exc).__name__}: {exc}")])


def environment() -> dict:
    return {
        "hfc": __version__,
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "python": platform.python_version(),
        "quad_profile": quad_profile()["name"],
    }


def run_suite(raw: dict, verb: str = "verify-all", seed: int | None = None, jobs: int = 1,
              quadrature: dict | None = None) -> dict:
    """Validate, dispatch and assemble a report; module errors become failed records.

    ``quadrature`` (nu, nodes_per_decade, r_min, r_max) overrides the problem file's
    quadrature block for every contour evaluation that does not fix its own values.
    """
    if verb not in ALL_VERBS:
        raise SchemaError(f"unknown verb {verb!r}")
    p = build_problem(raw, seed)
    quad = dict(raw.get("quadrature", {}))
    quad.update({k: v for k, v in (quadrature or {}).items() if v is not None})
    unknown = set(quad) - {"nu", "nodes_per_decade", "r_min", "r_max"}
    if unknown:
        raise SchemaError(f"unknown quadrature settings: {sorted(unknown)}")
    if "r_min" in quad and "r_max" in quad and not 0 < quad["r_min"] < quad["r_max"]:
        raise SchemaError("quadrature needs 0 < r_min < r_max")
    if verb in RANDOMIZED and p.seed is None:
        raise SchemaError(f"verb {verb!r} is randomized and needs a seed in the problem file or --seed")
    units = _units(verb, p)
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(lambda u: _run_unit(p, u, quad), units))
    else:
        outcomes = [_run_unit(p, u, quad) for u in units]
    checks = [c for o in outcomes for c in o.checks]
    series = {k: v for o in outcomes for k, v in o.series.items()}
    wanted = raw.get("checks")
    if wanted:
        checks = [c for c in checks if any(c.name.startswith(w) for w in wanted)]
    checks.sort(key=lambda c: c.name)
    return {
        "suite": raw.get("suite", "unnamed"),
        "verb": verb,
        "inputs_digest": digest(raw),
        "seed": p.seed,
        "quadrature": {k: quad[k] for k in sorted(quad)},
        "environment": environment(),
        "checks": [c.to_json() for c in checks],
        "series": {k: series[k] for k in sorted(series)},
        "passed": all(c.passed for c in checks),
    }


# ------------------------------------------------------------------ emit


def emit_json(report: dict) -> str:
    return canonical_dumps(report) + "\n"


def emit_csv(report: dict) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["name", "value", "target", "tolerance", "pass"])
    for c in report.get("checks", []):
        w.writerow([c["name"]] + ["" if c[k] is None else format(c[k], ".17g") for k in ("value", "target", "tolerance")]
                   + ["true" if c["pass"] else "false"])
    return buf.getvalue()


def emit_plotdata(report: dict) -> dict:
    """One tab-separated text per series, keyed by a file-safe name."""
    files = {}
    for name, s in report.get("series", {}).items():
        lines = [f"# series: {name}", f"# {s['x_label']}\t{s['y_label']}"]
        lines += [f"{x:.17g}\t{y:.17g}" for x, y in zip(s["x"], s["y"])]
        files[name.replace("/", "__") + ".tsv"] = "\n".join(lines) + "\n"
    return files


def write_report(report: dict, fmt: str, out_dir) -> list:
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        if fmt == "json":
            files = {"report.json": emit_json(report)}
        elif fmt == "csv":
            files = {"report.csv": emit_csv(report)}
        elif fmt == "plotdata":
            files = emit_plotdata(report) or {"empty.tsv": "# series: none\n"}
        else:
            raise ValueError(f"unknown format {fmt!r}")
        written = []
        for name, text in files.items():
            (out / name).write_text(text)
            written.append(out / name)
        return written
    except OSError as exc:
        raise IOError(f"cannot write report: {exc}") from exc
