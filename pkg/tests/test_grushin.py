import numpy as np
import pytest
import scipy.linalg
from hypothesis import given
from hypothesis import strategies as st

from kinetic_spectra import (
    NewtonFailure,
    effective_operator,
    grushin_blocks,
    hyperbolic_block,
    schur_residuals,
    solve_effective,
    sphere_block,
    torus_block,
)
from kinetic_spectra.assembly import assemble_P, assemble_Q0, projections
from kinetic_spectra.grushin import IllConditionedError, augmented_matrix
from kinetic_spectra.spectra import dense_eigvals


def test_zero_mode_emp_is_scaled_lambda():
    for lam in (0.3, -2 + 1j):
        d = grushin_blocks(torus_block(0.0), 4.0, lam, 6)
        assert d.E_minusplus == pytest.approx(lam / 16, abs=1e-16)
        assert effective_operator(torus_block(0.0), 4.0, lam, 6) == lam


def test_schur_identities_sphere_ell2():
    d = grushin_blocks(sphere_block(2), 5.0, 1 + 1j)
    r1, r2 = schur_residuals(d, sphere_block(2))
    assert r1 <= 1e-10 and r2 <= 1e-10


def test_augmented_inverse_hyperbolic():
    b = hyperbolic_block(0.7)
    d = grushin_blocks(b, 12.0, -2.0, 20)
    A = augmented_matrix(b, 12.0, -2.0, 20)
    assert np.abs(A @ d.inverse_augmented() - np.eye(A.shape[0])).max() <= 1e-10


def test_augmented_inverse_against_dense_solve():
    b = torus_block(1.4, 3)
    A = augmented_matrix(b, 6.0, 0.5 + 0.5j, 15)
    d = grushin_blocks(b, 6.0, 0.5 + 0.5j, 15)
    dense = scipy.linalg.solve(A, np.eye(A.shape[0]))
    assert np.abs(dense - d.inverse_augmented()).max() <= 1e-10 * np.abs(dense).max()


def test_effective_operator_sphere_ell1():
    assert effective_operator(sphere_block(1), 100.0, 0) == pytest.approx(-2, abs=1e-2)


@pytest.mark.parametrize("b", [torus_block(1.0), torus_block(1.0, 3), torus_block(2.0, 5), hyperbolic_block(1.0)])
def test_effective_operator_small_h_limit(b):
    # on layer 1 the inverse of c_n Delta_V is n, so lam + Pi X Q0^-1 X Pi -> lam - mu
    Q = assemble_Q0(b, 1e-9, 0, 30)
    pr = projections(b, 30)
    layer1 = np.isin(Q.index_map, b.indices(30)[pr.layer(1)])
    inv = np.linalg.inv(Q.to_dense())[np.ix_(layer1, layer1)]
    assert np.allclose(inv, b.n * np.eye(int(layer1.sum())), rtol=1e-6)
    lam = 0.5 - 0.25j
    assert effective_operator(b, 1e6, lam, 30) == pytest.approx(lam - b.mu, abs=1e-8)


def test_effective_error_shrinks_with_gamma():
    b = hyperbolic_block(1.0)
    errs = [abs(effective_operator(b, g, 1j, 40) - (1j - b.mu)) for g in (10, 30, 100, 300)]
    assert all(a > c for a, c in zip(errs, errs[1:]))


def test_solve_effective_zero_mode():
    r = solve_effective(torus_block(0.0), 10.0, lambda_init=0.3, K_max=5)
    assert abs(r.lam) <= 1e-10


def test_solve_effective_sphere_ell1():
    r = solve_effective(sphere_block(1), 100.0, lambda_init=2)
    ev = dense_eigvals(sphere_block(1), 100.0, None)
    assert abs(r.lam - ev[np.argmin(np.abs(ev - 2))]) <= 1e-8
    assert abs(r.lam - 2) <= 1e-3


def test_solve_effective_hyperbolic():
    b = hyperbolic_block(1.0)
    r = solve_effective(b, 100.0, lambda_init=1.25, K_max=60)
    ev = dense_eigvals(b, 100.0, 60)
    assert abs(r.lam - ev[np.argmin(np.abs(ev - 1.25))]) <= 1e-8
    assert abs(r.lam - 1.25) <= 1e-2


def test_solve_effective_reports_failure():
    # at gamma = 10 the ell = 4 block has no eigenvalue near 20
    with pytest.raises(NewtonFailure) as exc:
        solve_effective(sphere_block(4), 10.0)
    assert exc.value.residual > 1e-10


def test_solve_effective_rejects_bad_tol():
    with pytest.raises(ValueError):
        solve_effective(sphere_block(1), 10.0, tol=0)


def test_singular_q0_detected():
    # Q0 of the zero mode at gamma = 1, lam = c_n: row m = 1 vanishes
    with pytest.raises(IllConditionedError):
        grushin_blocks(torus_block(0.0), 1.0, 0.5, 4)


def test_to_json_shapes():
    d = grushin_blocks(sphere_block(2), 3.0, -1)
    js = d.to_json()
    assert len(js["E"]["re"]) == 5 and len(js["E_plus"]["im"]) == 5


BLOCKS = [sphere_block(2), sphere_block(3), torus_block(1.0), torus_block(np.sqrt(5), 3), hyperbolic_block(0.5), hyperbolic_block(2.0)]


@given(
    st.sampled_from(BLOCKS),
    st.floats(2, 300),
    st.floats(-10, 10),
    st.floats(-10, 10),
)
def test_schur_identities_random(b, gamma, re, im):
    K = None if b.is_finite else 40
    lam = complex(re, im)
    ev = dense_eigvals(b, gamma, K)
    if np.min(np.abs(ev - lam)) < 1e-6:
        return
    d = grushin_blocks(b, gamma, lam, K)
    r1, r2 = schur_residuals(d, b, K)
    assert r1 <= 1e-10 and r2 <= 1e-10
    # E_-+^-1 equals -gamma^2 times the zero-layer entry of (P - lam)^-1
    P = assemble_P(b, gamma, K).to_dense()
    Rzz = np.linalg.inv(P - lam * np.eye(len(P)))[d.zero_row, d.zero_row]
    assert 1 / d.E_minusplus == pytest.approx(-gamma**2 * Rzz, rel=1e-9)


@given(st.sampled_from(BLOCKS), st.sampled_from([30.0, 100.0, 300.0]))
def test_newton_root_is_an_eigenvalue(b, gamma):
    K = None if b.is_finite else 40
    try:
        r = solve_effective(b, gamma, K_max=K)
    except NewtonFailure:
        return
    ev = dense_eigvals(b, gamma, K)
    assert np.min(np.abs(ev - r.lam)) <= 1e-6
