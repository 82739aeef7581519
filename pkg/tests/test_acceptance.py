"""Acceptance criteria, one test per criterion.

Each test prints a single ``ACCEPT <id> PASS|FAIL|WARN ...`` line; the lines
are repeated in the pytest terminal summary. Run this file directly to get
only those lines.
"""

import time
import warnings

import numpy as np
import pytest
import scipy.linalg

from kinetic_spectra import (
    assemble_Q0,
    grushin_blocks,
    hyperbolic_block,
    schur_residuals,
    sphere_block,
    torus_block,
)
from kinetic_spectra.grushin import NewtonFailure, augmented_matrix, solve_effective
from kinetic_spectra.harness.config import SweepConfig
from kinetic_spectra.harness.sweep import effective_error, fit_rate, lambda_grid_2d, run_sweep
from kinetic_spectra.harness.verify import run_verify
from kinetic_spectra.spectra import adaptive_kmax, dense_eigvals, eta_emptiness_scan

try:
    from conftest import ACCEPTANCE_LINES
except ImportError:  # direct execution
    ACCEPTANCE_LINES = []

GAMMAS = [10.0, 30.0, 100.0, 300.0]
WINDOW = [-0.5, 21.0, -1.0, 1.0]
C0 = 10.0
SEED = 20240611

SPHERE_FAMILY = {"geometry": "sphere", "parameters": [0, 1, 2, 3, 4], "replicate": True}
TORUS_PARAMS = [1.0, 2.0**0.5, 2.0, 5.0**0.5]
OTHER_FAMILIES = [
    {"geometry": "torus", "n": 2, "parameters": TORUS_PARAMS},
    {"geometry": "torus", "n": 3, "parameters": TORUS_PARAMS},
    {"geometry": "hyperbolic", "parameters": [0.5, 1.0, 2.0]},
]


def report(cid: str, ok: bool, detail: str, warn_only: bool = False) -> None:
    status = "PASS" if ok else ("WARN" if warn_only else "FAIL")
    line = f"ACCEPT {cid:<28s} {status}  {detail}"
    print(line)
    ACCEPTANCE_LINES.append(line)


def nonincreasing(v, rel=1e-9):
    return all(b <= a * (1 + rel) for a, b in zip(v, v[1:]))


@pytest.fixture(scope="module")
def sphere_sweep():
    cfg = SweepConfig.from_dict({"families": [SPHERE_FAMILY], "gamma_grid": GAMMAS, "window": WINDOW, "C0": C0})
    t0 = time.perf_counter()
    rep = run_sweep(cfg, write=False)
    return rep, time.perf_counter() - t0


@pytest.fixture(scope="module")
def other_sweep():
    cfg = SweepConfig.from_dict({"families": OTHER_FAMILIES, "gamma_grid": GAMMAS, "window": WINDOW, "C0": C0})
    return run_sweep(cfg, write=False)


def test_c1_sphere_spectral_convergence(sphere_sweep):
    rep, seconds = sphere_sweep
    fam = rep.families[0]
    dists = [p["max_matched_distance"] for p in fam["per_gamma"]]
    last = fam["per_gamma"][-1]
    ok = nonincreasing(dists) and dists[-1] <= 1e-2 and last["unmatched_target"] == 0 and seconds < 60
    report(
        "1 sphere convergence", ok,
        "matched distance " + " -> ".join(f"{d:.3g}" for d in dists)
        + f"; unmatched targets at 300: {last['unmatched_target']}; {seconds:.2f}s",
    )
    assert ok


def test_c2_torus_hyperbolic_convergence(other_sweep):
    finals, ok = [], True
    for fam in other_sweep.families:
        last = fam["per_gamma"][-1]
        finals.append(f"{fam['geometry']}(n={fam['n']}) {last['max_matched_distance']:.2e}")
        ok &= last["max_matched_distance"] <= 5e-2 and last["unmatched_target"] == 0
    report("2 torus/hyperbolic", ok, "distance at 300: " + ", ".join(finals))
    assert ok


def test_c3_resolvent_convergence(sphere_sweep, other_sweep):
    blocks = sphere_sweep[0].blocks + other_sweep.blocks
    bad = [f"{b['model']} {b['parameter']:g}" for b in blocks if not (b["resolvent_monotone"] and b["final_resolvent_diff"] <= 1e-2)]
    worst = max(b["final_resolvent_diff"] for b in blocks)
    report("3 resolvent convergence", not bad, f"{len(blocks)} blocks, max gap at 300 {worst:.2e}" + (f"; failing {bad}" if bad else ""))
    assert not bad


def random_instances(rng, count):
    pool = (
        [sphere_block(ell) for ell in range(1, 6)]
        + [torus_block(x, n) for n in (2, 3, 4) for x in (0.7, 1.5, 2.5)]
        + [hyperbolic_block(s) for s in (0.0, 0.6, 1.9)]
    )
    out = []
    while len(out) < count:
        b = pool[rng.integers(len(pool))]
        g = float(np.exp(rng.uniform(np.log(2), np.log(300))))
        lam = complex(*rng.uniform(-C0, C0, 2))
        K = None if b.is_finite else 40
        if np.min(np.abs(dense_eigvals(b, g, K) - lam)) > 1e-6:
            out.append((b, g, lam, K))
    return out


def test_c4_grushin_exactness():
    rng = np.random.default_rng(SEED)
    worst_schur = worst_aug = 0.0
    for b, g, lam, K in random_instances(rng, 100):
        d = grushin_blocks(b, g, lam, K)
        worst_schur = max(worst_schur, *schur_residuals(d, b, K))
        A = augmented_matrix(b, g, lam, K)
        dense = scipy.linalg.solve(A, np.eye(len(A)))
        worst_aug = max(worst_aug, np.linalg.norm(dense - d.inverse_augmented(), 2) / np.linalg.norm(dense, 2))
    blocks = [sphere_block(ell) for ell in range(5)] + [torus_block(x, n) for n in (2, 3) for x in TORUS_PARAMS]
    blocks += [hyperbolic_block(s) for s in (0.5, 1.0, 2.0)]
    worst_newton, converged, total = 0.0, 0, 0
    for b in blocks:
        for g in GAMMAS:
            total += 1
            K = adaptive_kmax(b, g, C0)
            try:
                root = solve_effective(b, g, K_max=K)
            except NewtonFailure:
                continue
            converged += 1
            ev = dense_eigvals(b, g, K)
            worst_newton = max(worst_newton, float(np.min(np.abs(ev - root.lam))))
    ok = worst_schur <= 1e-10 and worst_aug <= 1e-10 and worst_newton <= 1e-6
    report(
        "4 Grushin exactness", ok,
        f"Schur {worst_schur:.1e}, augmented inverse {worst_aug:.1e} (100 instances); "
        f"Newton vs dense {worst_newton:.1e} ({converged}/{total} converged)",
    )
    assert ok


def test_c5_q0_bound():
    rng = np.random.default_rng(SEED + 5)
    pool = [sphere_block(ell) for ell in range(1, 7)] + [torus_block(x) for x in (0.0, 0.5, 1.0, 2.0, 3.0)]
    pool += [hyperbolic_block(s) for s in (0.0, 0.5, 1.0, 2.0, 3.0)]
    worst, count = 0.0, 0
    for _ in range(300):
        b = pool[rng.integers(len(pool))]
        g = float(np.exp(rng.uniform(np.log(np.sqrt(4 * C0)), np.log(1000))))
        lam = C0 * np.sqrt(rng.uniform()) * np.exp(2j * np.pi * rng.uniform())
        assert abs(lam) <= C0 and 2 * C0 / g**2 <= 0.5
        Q = assemble_Q0(b, 1 / g, lam, None if b.is_finite else 80).to_dense()
        worst = max(worst, 1 / scipy.linalg.svdvals(Q).min())
        count += 1
    ok = worst <= 4 * (1 + 1e-8)
    report("5 Q0 bound", ok, f"max ||Q0^-1|| = {worst:.6f} <= 4 over {count} instances (n = 2)")
    assert ok


STRUCTURAL = [
    "anti_self_adjoint", "tridiagonal", "zero_layer_identity", "nonnegative_real_parts",
    "conjugation_symmetry", "gauge_invariance", "truncation_stability",
]


def test_c6_structural_suite():
    results = run_verify(seed=0, only=STRUCTURAL)
    bad = [r.name for r in results if r.status != "PASS"]
    ok = not bad and len(results) == len(STRUCTURAL)
    report("6 structural suite", ok, f"{len(results) - len(bad)}/{len(STRUCTURAL)} checks pass" + (f"; failing {bad}" if bad else ""))
    assert ok


def test_c7_eta_emptiness():
    family = [torus_block(float(np.sqrt(k))) for k in range(1, 101)]
    (scan,) = eta_emptiness_scan(family, 300.0, C0)
    offending = [eta for eta, ne in zip(scan.etas, scan.nonempty) if ne and eta >= 20 - 1e-9]
    ok = not offending
    report("7 eta emptiness", ok, f"gamma=300, C0=10: empirical threshold eta = {scan.threshold:.6g}; nonempty blocks with mu >= 20: {len(offending)}")
    assert ok


def test_c8_rate_observation():
    lams = lambda_grid_2d(C0)
    slopes = {ell: fit_rate(GAMMAS, [effective_error(sphere_block(ell), g, lams) for g in GAMMAS]) for ell in (1, 2)}
    ok = all(1.7 <= s <= 2.3 for s in slopes.values())
    report("8 rate observation", ok, ", ".join(f"l={ell} slope {s:.3f}" for ell, s in slopes.items()), warn_only=True)
    if not ok:
        warnings.warn(f"effective-operator error slopes {slopes} outside [1.7, 2.3]")


if __name__ == "__main__":
    import sys

    sys.exit(pytest.main([__file__, "-q", "-s", "-p", "no:cacheprovider"]))
