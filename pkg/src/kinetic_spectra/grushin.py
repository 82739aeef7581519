"""Schur-complement (Grushin) reduction of ``P_gamma - lam`` to the zero layer.

The augmented operator

    [[P_gamma - lam, gamma i0],
     [gamma Pi,      0       ]]

is inverted in closed form using ``Q0 = Pi^perp (Ptilde_h - h^2 lam) Pi^perp``
(``h = 1/gamma``). Its lower-right block ``E_-+`` is a scalar on every
implemented block, and ``lam`` is an eigenvalue of the block exactly when it
vanishes.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .assembly import assemble_P, assemble_Q0, assemble_X, projections, resolve_kmax_policy
from .blocks import BlockSpec

logger = logging.getLogger(__name__)

COND_LIMIT = 1e12


class IllConditionedError(RuntimeError):
    def __init__(self, cond: float):
        super().__init__(f"Q0 is numerically singular (condition number ~ {cond:.3e})")
        self.cond = cond


class NewtonFailure(RuntimeError):
    def __init__(self, lam: complex, residual: float, iterations: int):
        super().__init__(f"Newton did not converge after {iterations} iterations: lam={lam}, |residual|={residual:.3e}")
        self.lam = lam
        self.residual = residual
        self.iterations = iterations


@dataclass(frozen=True)
class GrushinData:
    """Inverse of the augmented operator, written in the block basis.

    ``E`` is ``N x N`` (zero on the zero-layer row and column), ``E_plus`` is the
    column ``V_{eta,0} -> V_eta``, ``E_minus`` the row ``V_eta -> V_{eta,0}``.
    """

    E: np.ndarray
    E_plus: np.ndarray
    E_minus: np.ndarray
    E_minusplus: complex
    lam: complex
    gamma: float
    zero_row: int
    cond_Q0: float

    def inverse_augmented(self) -> np.ndarray:
        N = self.E.shape[0]
        out = np.empty((N + 1, N + 1), dtype=complex)
        out[:N, :N] = self.E
        out[:N, N] = self.E_plus
        out[N, :N] = self.E_minus
        out[N, N] = self.E_minusplus
        return out

    def to_json(self) -> dict:
        def enc(a):
            a = np.asarray(a)
            return {"re": a.real.tolist(), "im": a.imag.tolist()}

        return {
            "gamma": self.gamma,
            "lambda": [self.lam.real, self.lam.imag],
            "cond_Q0": self.cond_Q0,
            "E_minusplus": [self.E_minusplus.real, self.E_minusplus.imag],
            "E": enc(self.E),
            "E_plus": enc(self.E_plus),
            "E_minus": enc(self.E_minus),
        }


def _zero_coupling(block: BlockSpec, K):
    """Column ``Pi^perp X Pi`` and row ``Pi X Pi^perp`` restricted to Q0 rows."""
    X = assemble_X(block, K).to_dense()
    pr = projections(block, K)
    perp = pr.perp
    return X[perp, pr.zero_layer], X[pr.zero_layer, perp], pr


def _q0_factor(block, gamma, lam, K, check=True):
    Q0 = assemble_Q0(block, 1.0 / gamma, lam, K)
    if Q0.size == 0:
        return Q0, 1.0
    cond = np.linalg.cond(Q0.to_dense()) if check else float("nan")
    if check and not cond < COND_LIMIT:
        raise IllConditionedError(cond)
    return Q0, cond


def _q0_solve(Q0, rhs):
    if Q0.size == 0:
        return np.zeros_like(rhs, dtype=complex)
    return scipy.linalg.solve_banded((1, 1), Q0.banded(), rhs)


def augmented_matrix(block: BlockSpec, gamma: float, lam: complex, K_max: int | None = None) -> np.ndarray:
    K = resolve_kmax_policy(block, K_max)
    P = assemble_P(block, gamma, K).to_dense()
    N = P.shape[0]
    z = projections(block, K).zero_layer
    A = np.zeros((N + 1, N + 1), dtype=complex)
    A[:N, :N] = P - lam * np.eye(N)
    A[z, N] = gamma
    A[N, z] = gamma
    return A


def grushin_blocks(block: BlockSpec, gamma: float, lam: complex, K_max: int | None = None) -> GrushinData:
    K = resolve_kmax_policy(block, K_max)
    lam = complex(lam)
    Q0, cond = _q0_factor(block, gamma, lam, K)
    x_col, x_row, pr = _zero_coupling(block, K)
    N, z, perp = len(pr.index_map), pr.zero_layer, pr.perp
    g2 = gamma**-2

    # (Pi^perp (P_gamma - lam) Pi^perp)^{-1} = gamma^-2 Q0^{-1}
    Rperp = g2 * _q0_solve(Q0, np.eye(len(perp), dtype=complex))
    E = np.zeros((N, N), dtype=complex)
    E[np.ix_(perp, perp)] = Rperp
    E_plus = np.zeros(N, dtype=complex)
    E_plus[perp] = Rperp @ x_col
    E_plus[z] += 1.0 / gamma
    E_minus = np.zeros(N, dtype=complex)
    E_minus[perp] = x_row @ Rperp
    E_minus[z] += 1.0 / gamma
    Emp = g2 * (lam + x_row @ _q0_solve(Q0, x_col))
    return GrushinData(E, E_plus, E_minus, complex(Emp), lam, float(gamma), z, float(cond))


def schur_residuals(data: GrushinData, block: BlockSpec, K_max: int | None = None) -> tuple[float, float]:
    """Relative residuals of both Schur identities.

    ``P^-1 = E - E_+ E_-+^-1 E_-`` and ``E_-+^-1 = R_+- - R_+ P^-1 R_-`` with
    ``R_+- = 0``, ``R_+ = gamma Pi``, ``R_- = gamma i0``; here ``P`` stands for
    ``P_gamma - lam`` and its inverse comes from a dense solve.
    """
    K = resolve_kmax_policy(block, K_max)
    P = assemble_P(block, data.gamma, K).to_dense()
    N = P.shape[0]
    Pinv = np.linalg.solve(P - data.lam * np.eye(N), np.eye(N))
    recon = data.E - np.outer(data.E_plus, data.E_minus) / data.E_minusplus
    r1 = np.linalg.norm(recon - Pinv, 2) / np.linalg.norm(Pinv, 2)
    z = data.zero_row
    inv_emp = -data.gamma**2 * Pinv[z, z]
    r2 = abs(1.0 / data.E_minusplus - inv_emp) / abs(inv_emp)
    return float(r1), float(r2)


def effective_operator(block: BlockSpec, gamma: float, lam: complex, K_max: int | None = None, check: bool = True) -> complex:
    """``gamma**2 E_-+ = lam + Pi X Q0^{-1} X Pi`` on the zero layer."""
    K = resolve_kmax_policy(block, K_max)
    lam = complex(lam)
    Q0, _ = _q0_factor(block, gamma, lam, K, check=check)
    x_col, x_row, _ = _zero_coupling(block, K)
    return complex(lam + x_row @ _q0_solve(Q0, x_col))


@dataclass(frozen=True)
class EffectiveRoot:
    lam: complex
    residual: float
    iterations: int


def solve_effective(
    block: BlockSpec,
    gamma: float,
    lambda_init: complex | None = None,
    tol: float = 1e-10,
    K_max: int | None = None,
    max_iter: int = 50,
) -> EffectiveRoot:
    """Damped Newton iteration for ``effective_operator(lam) = 0``.

    The derivative is a central difference with step ``1e-6 (1 + |lam|)``; a
    step that increases the residual is halved until it does not.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    K = resolve_kmax_policy(block, K_max)
    lam = complex(block.mu if lambda_init is None else lambda_init)

    def f(z):
        return effective_operator(block, gamma, z, K, check=False)

    fz = f(lam)
    for it in range(1, max_iter + 1):
        if abs(fz) <= tol:
            return EffectiveRoot(lam, abs(fz), it - 1)
        d = 1e-6 * (1.0 + abs(lam))
        deriv = (f(lam + d) - f(lam - d)) / (2 * d)
        if deriv == 0:
            break
        step = -fz / deriv
        for _ in range(30):
            trial = lam + step
            ft = f(trial)
            if np.isfinite(ft) and abs(ft) < abs(fz):
                break
            step *= 0.5
        else:
            logger.debug("line search stalled at lam=%s", lam)
            break
        lam, fz = trial, ft
    if abs(fz) <= tol:
        return EffectiveRoot(lam, abs(fz), max_iter)
    raise NewtonFailure(lam, abs(fz), max_iter)
