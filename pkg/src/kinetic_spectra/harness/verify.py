"""One-shot invariant suite over a seeded instance set.

Each check returns ``(ok, detail)``; the suite prints one status line per
check. Rate observations are reported as ``WARN`` and never fail the run.
"""

from __future__ import annotations

import json
import tempfile
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
import scipy.linalg
from scipy.optimize import linear_sum_assignment

from ..assembly import (
    assemble_P,
    assemble_Ptilde,
    assemble_Q0,
    assemble_X,
    projections,
    q0_norm_bound,
    resolve_kmax_policy,
)
from ..blocks import BlockSpec, gegenbauer_basis, hyperbolic_block, sphere_block, torus_block
from ..grushin import NewtonFailure, grushin_blocks, schur_residuals, solve_effective
from ..spectra import dense_eigvals, perp_resolvent_norm, stable_in_disc
from .config import SweepConfig
from .sweep import fit_rate, lambda_grid_2d, effective_error, nonincreasing, run_sweep

GAMMA_GRID = (10.0, 30.0, 100.0, 300.0)
C0 = 10.0


@dataclass
class CheckResult:
    module: str
    name: str
    status: str  # PASS, FAIL or WARN
    detail: str

    @property
    def line(self) -> str:
        return f"{self.status:4s}  {self.module}.{self.name}  {self.detail}"


@dataclass
class Instances:
    """Blocks, gammas and spectral points used by every check."""

    seed: int
    blocks: list[BlockSpec]
    samples: list[tuple[BlockSpec, float, complex]]
    sweep_blocks: list[BlockSpec] = field(default_factory=list)


def standard_blocks() -> list[BlockSpec]:
    return (
        [sphere_block(ell) for ell in range(5)]
        + [torus_block(np.sqrt(x), n) for n in (2, 3) for x in (1, 2, 4, 5)]
        + [hyperbolic_block(s) for s in (0.5, 1.0, 2.0)]
    )


def make_instances(seed: int = 0, fault: float | None = None, n_samples: int = 100) -> Instances:
    rng = np.random.default_rng(seed)
    blocks = standard_blocks()
    blocks += [torus_block(float(rng.uniform(0, 3)), int(rng.integers(2, 6))) for _ in range(3)]
    blocks += [hyperbolic_block(float(rng.uniform(0, 2.5))) for _ in range(2)]
    blocks += [torus_block(0.0, 2)]
    if fault is not None:
        blocks = [b.corrupted(0, fault) if b.zero_layer_sum() > 0 else b for b in blocks]
    samples = []
    for _ in range(n_samples):
        b = blocks[int(rng.integers(len(blocks)))]
        g = float(np.exp(rng.uniform(np.log(2.0), np.log(300.0))))
        r, th = C0 * np.sqrt(rng.uniform()), rng.uniform(0, 2 * np.pi)
        samples.append((b, g, complex(r * np.cos(th), r * np.sin(th))))
    sweep_blocks = [b for b in blocks[: len(standard_blocks())] if b.mu <= 20]
    return Instances(seed, blocks, samples, sweep_blocks)


def _K(b: BlockSpec):
    return resolve_kmax_policy(b, None, C0)


# ---------------------------------------------------------------- block_models


def check_sphere_endpoints(inst):
    worst = 0.0
    for ell in range(8):
        b = sphere_block(ell)
        raw = [(ell * (ell + 1) - m * (m + 1)) / 4.0 for m in (ell, -ell - 1)]
        outside = b.coupling_sq(np.array([ell, -ell - 1, ell + 3, -ell - 4]))
        worst = max(worst, *map(abs, raw), *np.abs(outside))
    return worst == 0.0, f"max endpoint |c|^2 = {worst:.1e}"


def check_zero_layer_identity(inst):
    worst = 0.0
    for b in inst.blocks:
        err = abs(b.n * b.zero_layer_sum() - b.mu) / max(b.mu, 1.0)
        worst = max(worst, err)
    return worst <= 1e-12, f"max relative defect {worst:.2e}"


def gegenbauer_gram(n: int, count: int = 20, nodes: int = 200) -> np.ndarray:
    """Gram matrix of the zonal basis under ``sin^{n-2}`` by Gauss-Legendre in theta."""
    t, w = np.polynomial.legendre.leggauss(nodes)
    theta = 0.5 * np.pi * (t + 1.0)
    w = 0.5 * np.pi * w * np.sin(theta) ** (n - 2)
    w = w / w.sum()
    p = gegenbauer_basis(np.cos(theta), n, count - 1)
    return (p * w) @ p.T


def check_gegenbauer_orthonormality(inst):
    worst = max(np.abs(gegenbauer_gram(n) - np.eye(20)).max() for n in (3, 4, 5, 6))
    return worst <= 1e-10, f"max |G - I| = {worst:.2e}"


def check_monotone_vertical(inst):
    ok = True
    for b in inst.blocks:
        k = np.arange(0, 60)
        v = b.vertical_eigenvalue(k)
        ok &= v[0] == 0 and bool(np.all(np.diff(v) > 0))
        if b.indexing.value == "signed":
            ok &= bool(np.all(b.vertical_eigenvalue(-k) == v))
    return ok, "vertical eigenvalues strictly increasing in |index|"


def check_gauge_invariance(inst):
    rng = np.random.default_rng(inst.seed + 1)
    worst = 0.0
    for b in inst.blocks[:: max(1, len(inst.blocks) // 8)]:
        phases = rng.uniform(0, 2 * np.pi, 4001)
        bg = b.with_gauge(lambda m, ph=phases: ph[m + 2000])
        for g in (1.0, 30.0):
            K = _K(b)
            a, c = dense_eigvals(b, g, K), dense_eigvals(bg, g, K)
            cost = np.abs(a[:, None] - c[None, :])
            r, s = linear_sum_assignment(cost)
            scale = np.linalg.norm(assemble_P(b, g, K).to_dense(), 2)
            worst = max(worst, cost[r, s].max() / max(scale, 1.0))
    return worst <= 1e-12, f"max spectral shift / ||P|| = {worst:.2e}"


# ------------------------------------------------------------ operator_assembly


def check_tridiagonal(inst):
    ok = True
    for b, g, lam in inst.samples[:30]:
        K = _K(b)
        for op in (assemble_P(b, g, K), assemble_Q0(b, 1 / g, lam, K), assemble_X(b, K)):
            A = op.to_dense()
            ok &= not np.any(np.triu(A, 2)) and not np.any(np.tril(A, -2))
    return ok, "no entries outside the three diagonals"


def check_exact_rescaling(inst):
    ok = True
    for b, g, _ in inst.samples[:30]:
        K = _K(b)
        ok &= np.array_equal(assemble_P(b, g, K).to_dense(), g * g * assemble_Ptilde(b, 1.0 / g, K).to_dense())
    return bool(ok), "P_gamma == gamma^2 Ptilde_{1/gamma} bitwise"


def check_anti_self_adjoint(inst):
    ok = True
    for b, g, _ in inst.samples[:30]:
        K = _K(b)
        P = assemble_P(b, g, K)
        A = P.to_dense()
        ok &= not np.any(A + A.conj().T - 2 * np.diag(P.vertical))
        X = assemble_X(b, K).to_dense()
        ok &= not np.any(X + X.conj().T)
    return bool(ok), "P + P^H - 2 c_n gamma^2 Delta_V == 0 exactly"


def check_nonnegative_real_parts(inst):
    worst = np.inf
    for b in inst.blocks:
        for g in (1.0,) + GAMMA_GRID:
            ev = dense_eigvals(b, g, _K(b))
            worst = min(worst, float(np.min(ev.real + 1e-10 * (1 + np.abs(ev)))))
    return worst >= 0, f"min Re(lam) + 1e-10 (1 + |lam|) = {worst:.3e}"


def conjugation_defect(ev: np.ndarray) -> float:
    cost = np.abs(ev[:, None] - np.conj(ev)[None, :])
    r, c = linear_sum_assignment(cost)
    return float(np.max(cost[r, c] / (1 + np.abs(ev[r]))))


def check_conjugation_symmetry(inst):
    worst = 0.0
    for b in inst.blocks:
        for g in (1.0,) + GAMMA_GRID:
            worst = max(worst, conjugation_defect(dense_eigvals(b, g, _K(b))))
    return worst <= 1e-10, f"max |lam - conj pair| / (1 + |lam|) = {worst:.2e}"


def check_truncation_stability(inst):
    bad = []
    for b in inst.blocks:
        if b.is_finite:
            continue
        K = _K(b)
        for g in (1.0,) + GAMMA_GRID:
            if not stable_in_disc(dense_eigvals(b, g, K), dense_eigvals(b, g, K + 5), C0):
                bad.append(f"{b.label}@{g:g}")
    return not bad, "K_max -> K_max + 5 moves |lam| <= C0 spectrum < 1e-8" + (f"; unstable: {bad}" if bad else "")


def check_projection_partition(inst):
    ok = True
    for b in inst.blocks:
        pr = projections(b, _K(b))
        rows = np.sort(np.concatenate(list(pr.layers.values())))
        ok &= np.array_equal(rows, np.arange(len(pr.index_map))) and len(pr.layer(0)) == 1
    return bool(ok), "layers partition rows; zero layer is one row"


def q0_inverse_norm(b: BlockSpec, h: float, lam: complex, K=None) -> float:
    A = assemble_Q0(b, h, lam, K).to_dense()
    return float(1.0 / scipy.linalg.svdvals(A).min())


def check_q0_bound(inst):
    worst, count = 0.0, 0
    for b, g, lam in inst.samples:
        h = 1.0 / g
        if b.mu == 0 and b.is_finite:
            continue
        if not (abs(lam) <= C0 and 2 * C0 * h * h <= float(b.c_n)):
            continue
        count += 1
        worst = max(worst, q0_inverse_norm(b, h, lam, _K(b)) / q0_norm_bound(b))
    return worst <= 1 + 1e-8 and count > 0, f"max ||Q0^-1|| / (2/c_n) = {worst:.4f} over {count} instances"


# ---------------------------------------------------------------------- grushin


def check_schur_identities(inst):
    worst = 0.0
    for b, g, lam in inst.samples:
        d = grushin_blocks(b, g, lam, _K(b))
        worst = max(worst, *schur_residuals(d, b, _K(b)))
    return worst <= 1e-10, f"max relative residual {worst:.2e} over {len(inst.samples)} instances"


def newton_vs_dense(b: BlockSpec, g: float):
    """Distance between the Newton root and the dense eigenvalue nearest mu (None if Newton fails)."""
    K = _K(b)
    try:
        root = solve_effective(b, g, K_max=K)
    except NewtonFailure:
        return None
    ev = dense_eigvals(b, g, K)
    return abs(root.lam - ev[np.argmin(np.abs(ev - b.mu))])


def check_newton_equivalence(inst):
    worst, skipped = 0.0, 0
    for b in inst.sweep_blocks:
        for g in GAMMA_GRID:
            d = newton_vs_dense(b, g)
            if d is None:
                skipped += 1
                continue
            worst = max(worst, d)
    return worst <= 1e-6, f"max |lam* - lam_dense| = {worst:.2e} ({skipped} Newton failures skipped)"


def check_locally_uniform_limit(inst):
    lams = lambda_grid_2d(C0)
    bad = []
    for b in inst.sweep_blocks:
        errs = [effective_error(b, g, lams, _K(b)) for g in GAMMA_GRID]
        if not nonincreasing(errs):
            bad.append(b.label)
    return not bad, "grid error of effective operator decreasing in gamma" + (f"; violations {bad}" if bad else "")


def check_rate_observation(inst):
    lams = lambda_grid_2d(C0)
    slopes = []
    for ell in (1, 2):
        b = sphere_block(ell)
        slopes.append(fit_rate(GAMMA_GRID, [effective_error(b, g, lams) for g in GAMMA_GRID]))
    ok = all(1.7 <= s <= 2.3 for s in slopes)
    return ("PASS" if ok else "WARN"), "effective-operator error slopes " + ", ".join(f"{s:.3f}" for s in slopes)


# ---------------------------------------------------------------------- spectra


def check_dense_vs_grushin(inst):
    return check_newton_equivalence(inst)


def check_resolvent_bound(inst):
    worst, count = 0.0, 0
    for b, g, lam in inst.samples:
        if not (abs(lam) <= C0 and 2 * C0 / g**2 <= float(b.c_n)) or (b.is_finite and b.mu == 0):
            continue
        count += 1
        bound = 2.0 / (float(b.c_n) * g * g)
        worst = max(worst, perp_resolvent_norm(b, g, lam, _K(b)) / bound)
    return worst <= 1 + 1e-8, f"max ||(P - lam)^-1 Pi^perp|| / (2 / (c_n gamma^2)) = {worst:.4f} over {count}"


def check_windowed_convergence(inst):
    cfg = SweepConfig.from_dict({
        "families": [
            {"geometry": "sphere", "parameters": [0, 1, 2, 3, 4], "replicate": True},
            {"geometry": "torus", "parameters": [1.0, 2.0 ** 0.5, 2.0, 5.0 ** 0.5]},
            {"geometry": "hyperbolic", "parameters": [0.5, 1.0, 2.0]},
        ],
        "gamma_grid": list(GAMMA_GRID),
        "window": [-0.5, 21.0, -1.0, 1.0],
    })
    fams = run_sweep(cfg, write=False).families
    bad = [f["geometry"] for f in fams if not f["monotone"]]
    final = max(f["per_gamma"][-1]["max_matched_distance"] for f in fams)
    return not bad, f"family matched distance nonincreasing in gamma; final {final:.2e}" + (f"; violations {bad}" if bad else "")


# ---------------------------------------------------------------------- harness


def _tiny_config() -> SweepConfig:
    return SweepConfig.from_dict({
        "families": [{"geometry": "sphere", "parameters": [1, 2]}, {"geometry": "torus", "parameters": [1.0]}],
        "gamma_grid": [10, 30, 100],
    })


def check_config_round_trip(inst):
    cfg = _tiny_config()
    again = SweepConfig.from_dict(json.loads(cfg.dumps()))
    return again == cfg, "parse -> serialize -> parse is identity"


def check_determinism(inst):
    cfg = _tiny_config()
    outs = []
    with tempfile.TemporaryDirectory() as tmp:
        for i in range(2):
            d = Path(tmp) / str(i)
            run_sweep(cfg, d)
            outs.append(((d / "sweep.csv").read_bytes(), (d / "summary.json").read_bytes()))
    return outs[0] == outs[1], "identical CSV/JSON bytes across runs"


CHECKS: list[tuple[str, str, Callable]] = [
    ("block_models", "sphere_endpoints", check_sphere_endpoints),
    ("block_models", "zero_layer_identity", check_zero_layer_identity),
    ("block_models", "gegenbauer_orthonormality", check_gegenbauer_orthonormality),
    ("block_models", "monotone_vertical", check_monotone_vertical),
    ("block_models", "gauge_invariance", check_gauge_invariance),
    ("operator_assembly", "tridiagonal", check_tridiagonal),
    ("operator_assembly", "exact_rescaling", check_exact_rescaling),
    ("operator_assembly", "anti_self_adjoint", check_anti_self_adjoint),
    ("operator_assembly", "nonnegative_real_parts", check_nonnegative_real_parts),
    ("operator_assembly", "conjugation_symmetry", check_conjugation_symmetry),
    ("operator_assembly", "truncation_stability", check_truncation_stability),
    ("operator_assembly", "projection_partition", check_projection_partition),
    ("operator_assembly", "q0_bound", check_q0_bound),
    ("grushin", "schur_identities", check_schur_identities),
    ("grushin", "newton_equivalence", check_newton_equivalence),
    ("grushin", "locally_uniform_limit", check_locally_uniform_limit),
    ("grushin", "rate_observation", check_rate_observation),
    ("spectra", "dense_vs_grushin", check_dense_vs_grushin),
    ("spectra", "resolvent_bound", check_resolvent_bound),
    ("spectra", "windowed_convergence", check_windowed_convergence),
    ("harness", "config_round_trip", check_config_round_trip),
    ("harness", "determinism", check_determinism),
]


def run_verify(seed: int = 0, only: Sequence[str] | None = None, fault: float | None = None) -> list[CheckResult]:
    """Run the selected checks; ``only`` filters by module or check name."""
    inst = make_instances(seed, fault)
    results = []
    for module, name, fn in CHECKS:
        if only and module not in only and name not in only:
            continue
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                ok, detail = fn(inst)
        except Exception as exc:
            ok, detail = False, f"raised {type(exc).__name__}: {exc}"
        status = ok if isinstance(ok, str) else ("PASS" if ok else "FAIL")
        results.append(CheckResult(module, name, status, detail))
    return results


def failed(results: Sequence[CheckResult]) -> bool:
    return any(r.status == "FAIL" for r in results)
