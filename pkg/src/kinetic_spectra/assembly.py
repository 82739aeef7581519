"""Truncated tridiagonal matrices of the kinetic operator on one block.

Rows are ordered by increasing fiber index. All assemblies go through the
semiclassical form ``Ptilde_h - h**2 lam = c_n Delta_V - h X - h**2 lam``;
the kinetic operator itself is ``P_gamma = gamma**2 * Ptilde_{1/gamma}``,
scaled entrywise so that the rescaling identity holds bit for bit.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
import scipy.io
import scipy.sparse

from .blocks import BlockSpec, Indexing, kmax_default


@dataclass(frozen=True)
class OperatorMeta:
    kind: str
    c_n: Fraction
    K_max: int | None
    gamma: float | None = None
    h: float | None = None
    lambda_shift: complex = 0j


@dataclass(frozen=True)
class TridiagonalOperator:
    """Complex tridiagonal matrix with the fiber index of every row.

    ``sub[j]`` is entry ``(j+1, j)`` and ``sup[j]`` is entry ``(j, j+1)``.
    ``vertical`` holds the Delta_V contribution to ``diag`` (already scaled),
    so the anti-self-adjointness of X can be checked exactly.
    """

    index_map: np.ndarray
    diag: np.ndarray
    sup: np.ndarray
    sub: np.ndarray
    meta: OperatorMeta
    vertical: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        for name in ("index_map", "diag", "sup", "sub", "vertical"):
            arr = getattr(self, name)
            if arr is not None:
                arr.setflags(write=False)
        if len(self.sup) != max(self.size - 1, 0) or len(self.sub) != max(self.size - 1, 0):
            raise ValueError("off-diagonals must have length size - 1")

    @property
    def size(self) -> int:
        return len(self.diag)

    def to_dense(self) -> np.ndarray:
        A = np.diag(self.diag.astype(complex))
        if self.size > 1:
            A += np.diag(self.sup, 1) + np.diag(self.sub, -1)
        return A

    def to_sparse(self) -> scipy.sparse.csr_matrix:
        return scipy.sparse.diags([self.sub, self.diag, self.sup], [-1, 0, 1], format="csr")

    def banded(self) -> np.ndarray:
        """Layout expected by :func:`scipy.linalg.solve_banded` with ``(1, 1)``."""
        ab = np.zeros((3, self.size), dtype=complex)
        ab[0, 1:] = self.sup
        ab[1] = self.diag
        ab[2, :-1] = self.sub
        return ab

    def row_of(self, idx: int) -> int:
        rows = np.flatnonzero(self.index_map == idx)
        if len(rows) != 1:
            raise KeyError(idx)
        return int(rows[0])

    def write_matrix_market(self, path) -> None:
        scipy.io.mmwrite(str(path), self.to_sparse().tocoo(), comment=f"{self.meta.kind} K_max={self.meta.K_max}")


@dataclass(frozen=True)
class ProjectionSet:
    """Row partition of a truncated block into fiber layers ``|index| = k``."""

    index_map: np.ndarray
    zero_layer: int
    layers: dict[int, np.ndarray]

    def layer(self, k: int) -> np.ndarray:
        return self.layers.get(k, np.array([], dtype=int))

    @property
    def perp(self) -> np.ndarray:
        return np.flatnonzero(np.arange(len(self.index_map)) != self.zero_layer)


def _resolve_kmax(block: BlockSpec, K_max: int | None) -> int | None:
    if block.is_finite:
        if K_max is not None:
            warnings.warn(f"{block.label} is a finite chain; K_max={K_max} ignored", stacklevel=3)
        return None
    if K_max is None:
        raise ValueError(f"{block.label} is an infinite chain and needs K_max")
    if K_max < 2:
        raise ValueError(f"K_max must be >= 2 (layers 0, 1, 2 are needed), got {K_max}")
    return int(K_max)


def _x_offdiag(block: BlockSpec, idx: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    c = block.ladder_coefficient(idx[:-1]) if len(idx) > 1 else np.zeros(0, complex)
    # rows must be consecutive fiber indices for a coupling to exist
    c = np.where(np.diff(idx) == 1, c, 0)
    return -np.conj(c), c


def assemble_X(block: BlockSpec, K_max: int | None = None) -> TridiagonalOperator:
    """Matrix of the geodesic vector field on the truncated block."""
    K = _resolve_kmax(block, K_max)
    idx = block.indices(K)
    sup, sub = _x_offdiag(block, idx)
    meta = OperatorMeta("X", block.c_n, K)
    return TridiagonalOperator(idx, np.zeros(len(idx), complex), sup, sub, meta, np.zeros(len(idx)))


def _semiclassical(block: BlockSpec, h: float, lam: complex, K: int | None, scale: float, idx=None):
    if idx is None:
        idx = block.indices(K)
    cn = float(block.c_n)
    xsup, xsub = _x_offdiag(block, idx)
    vert = cn * block.vertical_eigenvalue(idx)
    diag = vert - h * h * lam + 0j
    sup = -h * xsup
    sub = -h * xsub
    if scale != 1.0:
        vert, diag, sup, sub = scale * vert, scale * diag, scale * sup, scale * sub
    return idx, diag, sup, sub, vert


def assemble_Ptilde(block: BlockSpec, h: float, K_max: int | None = None, lam: complex = 0j) -> TridiagonalOperator:
    """``c_n Delta_V - h X - h**2 lam`` on the truncated block."""
    if not h > 0:
        raise ValueError(f"h must be positive, got {h}")
    K = _resolve_kmax(block, K_max)
    idx, diag, sup, sub, vert = _semiclassical(block, h, lam, K, 1.0)
    meta = OperatorMeta("Ptilde", block.c_n, K, h=h, lambda_shift=complex(lam))
    return TridiagonalOperator(idx, diag, sup, sub, meta, vert)


def assemble_P(block: BlockSpec, gamma: float, K_max: int | None = None) -> TridiagonalOperator:
    """``-gamma X + c_n gamma**2 Delta_V`` on the truncated block."""
    if not gamma > 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    K = _resolve_kmax(block, K_max)
    h = 1.0 / gamma
    idx, diag, sup, sub, vert = _semiclassical(block, h, 0j, K, gamma * gamma)
    meta = OperatorMeta("P", block.c_n, K, gamma=gamma, h=h)
    return TridiagonalOperator(idx, diag, sup, sub, meta, vert)


def assemble_Q0(block: BlockSpec, h: float, lam: complex, K_max: int | None = None) -> TridiagonalOperator:
    """``Ptilde_h - h**2 lam`` compressed to the complement of the zero layer.

    For signed chains the result is two decoupled half-chains; the coupling
    between indices -1 and 1 is structurally zero.
    """
    if not h > 0:
        raise ValueError(f"h must be positive, got {h}")
    K = _resolve_kmax(block, K_max)
    idx = block.indices(K)
    idx = idx[idx != 0]
    idx, diag, sup, sub, vert = _semiclassical(block, h, complex(lam), K, 1.0, idx=idx)
    meta = OperatorMeta("Q0", block.c_n, K, h=h, lambda_shift=complex(lam))
    return TridiagonalOperator(idx, diag, sup, sub, meta, vert)


def projections(block: BlockSpec, K_max: int | None = None) -> ProjectionSet:
    K = _resolve_kmax(block, K_max)
    idx = block.indices(K)
    layer_of = np.abs(idx)
    layers = {int(k): np.flatnonzero(layer_of == k) for k in np.unique(layer_of)}
    zero = layers[0]
    if len(zero) != 1:
        raise AssertionError("zero layer must be one-dimensional")
    return ProjectionSet(idx, int(zero[0]), layers)


def vertical_floor(block: BlockSpec) -> float:
    """Smallest Delta_V eigenvalue off the zero layer."""
    return 1.0 if block.indexing is Indexing.SIGNED else float(block.n - 1)


def q0_norm_bound(block: BlockSpec) -> float:
    """Coercivity bound ``2 / c_n`` on the inverse of Q0."""
    return 2.0 / float(block.c_n)


def q0_bound_applies(block: BlockSpec, h: float, lam: complex, C0: float) -> bool:
    return abs(lam) <= C0 and 2.0 * C0 * h * h <= float(block.c_n)


def resolve_kmax_policy(block: BlockSpec, K_max: int | None, C0: float = 10.0) -> int | None:
    """Finite chains get ``None``; infinite chains default to the initial radius."""
    if block.is_finite:
        return None
    return K_max if K_max is not None else kmax_default(block, C0)
