"""Casimir-block models of the geodesic vector field on unit tangent bundles.

Each block is a single Casimir eigenspace written in a fiber-harmonic basis
that diagonalizes the vertical Laplacian. In that basis the geodesic vector
field is tridiagonal (a ladder operator), so a block is fully described by
the vertical eigenvalue of each fiber index and the coupling coefficient
between neighbouring indices.

Three model geometries are provided:

* flat torus Fourier modes ``e^{i<xi, x>}`` (any base dimension ``n >= 2``),
* round-sphere blocks of degree ``ell`` (``n = 2``, fiber is a circle),
* principal-series blocks of hyperbolic surfaces (``n = 2``).

Coupling coefficients are stored in the gauge ``c = i * a`` with ``a >= 0``.
"""

from __future__ import annotations

import dataclasses
import enum
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Mapping

import numpy as np


class Geometry(str, enum.Enum):
    TORUS = "torus"
    SPHERE = "sphere"
    HYPERBOLIC = "hyperbolic"


class Indexing(str, enum.Enum):
    """Fiber indexing of a ladder chain.

    ``SIGNED`` uses ``m`` in Z (circle fibers, vertical eigenvalue ``m**2``);
    ``ZONAL`` uses ``k`` in N (Gegenbauer chain, eigenvalue ``k(k+n-2)``).
    """

    SIGNED = "signed"
    ZONAL = "zonal"


def c_n(n: int) -> Fraction:
    """Diffusion constant ``1 / (n (n - 1))`` of the kinetic operator."""
    return Fraction(1, n * (n - 1))


def gegenbauer_ladder(k, n: int):
    """Orthonormal three-term recurrence coefficient of ``cos(theta)``.

    For the weight ``sin(theta)**(n-2)`` on ``[0, pi]`` the orthonormal
    polynomials ``p_k(cos theta)`` satisfy
    ``cos(theta) p_k = b_k p_{k+1} + b_{k-1} p_{k-1}``; this returns ``b_k``.
    """
    k = np.asarray(k, dtype=float)
    alpha = 0.5 * (n - 2)
    return 0.5 * np.sqrt((k + 1) * (k + 2 * alpha) / ((k + alpha) * (k + alpha + 1)))


def gegenbauer_basis(x, n: int, kmax: int) -> np.ndarray:
    """Evaluate the orthonormal zonal basis ``p_0..p_kmax`` at ``x = cos(theta)``.

    Normalized so that ``int_0^pi p_j p_k sin^{n-2} dtheta / int_0^pi sin^{n-2} dtheta
    = delta_jk``, i.e. orthonormal for the uniform probability on the sphere.
    Built from the same recurrence coefficients used for the ladder, which is
    what makes a quadrature Gram check a test of those coefficients.
    """
    if n < 3:
        raise ValueError("zonal basis needs n >= 3")
    x = np.asarray(x, dtype=float)
    out = np.zeros((kmax + 1,) + x.shape)
    out[0] = 1.0
    b = gegenbauer_ladder(np.arange(kmax + 1), n)
    if kmax >= 1:
        out[1] = x * out[0] / b[0]
    for k in range(1, kmax):
        out[k + 1] = (x * out[k] - b[k - 1] * out[k - 1]) / b[k]
    return out


@dataclass(frozen=True)
class BlockSpec:
    """One Casimir eigenspace ``V_eta`` of a model geometry.

    Parameters
    ----------
    geometry : Geometry
    n : int
        Base dimension.
    parameter : float
        ``|xi|`` for the torus, ``ell`` for the sphere, ``s`` for hyperbolic blocks.
    indexing : Indexing
    mu : float
        Eigenvalue of the base Laplacian on the index-0 vector.
    eta : float
        Casimir eigenvalue; equal to ``mu`` for every implemented model.
    finite_range : (int, int) or None
        Extreme fiber indices of a finite chain.
    gauge : callable, optional
        Maps a fiber index to a phase angle applied to its coupling.
    overrides : tuple of (int, complex)
        Explicit coupling values by index (fault injection and diagnostics).
    """

    geometry: Geometry
    n: int
    parameter: float
    indexing: Indexing
    mu: float
    eta: float
    finite_range: tuple[int, int] | None = None
    gauge: Callable[[int], float] | None = field(default=None, compare=False, repr=False)
    overrides: tuple[tuple[int, complex], ...] = ()

    @property
    def c_n(self) -> Fraction:
        return c_n(self.n)

    @property
    def is_finite(self) -> bool:
        return self.finite_range is not None

    @property
    def label(self) -> str:
        return f"{self.geometry.value}(n={self.n}, p={self.parameter:g})"

    def vertical_eigenvalue(self, idx):
        idx = np.asarray(idx)
        if self.indexing is Indexing.SIGNED:
            return (idx * idx).astype(float)
        return (idx * (idx + self.n - 2)).astype(float)

    def coupling_sq(self, idx):
        """``|c_idx|**2`` for the coupling ``idx <-> idx + 1``."""
        m = np.asarray(idx, dtype=float)
        if self.geometry is Geometry.TORUS:
            if self.indexing is Indexing.SIGNED:
                return np.full_like(m, self.parameter**2 / 4.0)
            return np.where(m >= 0, self.parameter**2 * gegenbauer_ladder(np.maximum(m, 0), self.n) ** 2, 0.0)
        if self.geometry is Geometry.SPHERE:
            ell = self.parameter
            inside = (m >= -ell) & (m <= ell - 1)
            return np.where(inside, (ell * (ell + 1) - m * (m + 1)) / 4.0, 0.0)
        s = self.parameter
        return (s * s + (m + 0.5) ** 2) / 4.0

    def ladder_coefficient(self, idx) -> np.ndarray:
        """Complex coupling ``c_idx``: the ``(idx+1, idx)`` entry of X."""
        idx = np.atleast_1d(np.asarray(idx, dtype=int))
        c = 1j * np.sqrt(self.coupling_sq(idx))
        if self.gauge is not None:
            c = c * np.exp(1j * np.array([self.gauge(int(i)) for i in idx]))
        for i, val in self.overrides:
            c = np.where(idx == i, complex(val), c)
        return c

    def indices(self, kmax: int | None = None) -> np.ndarray:
        """Fiber indices retained at truncation radius ``kmax``."""
        if self.finite_range is not None:
            lo, hi = self.finite_range
            return np.arange(lo, hi + 1)
        if kmax is None:
            raise ValueError("infinite chain needs a truncation radius")
        if self.indexing is Indexing.SIGNED:
            return np.arange(-kmax, kmax + 1)
        return np.arange(0, kmax + 1)

    def zero_layer_sum(self) -> float:
        """Sum of ``|c|**2`` over the couplings adjacent to index 0."""
        c = self.ladder_coefficient([-1, 0] if self.indexing is Indexing.SIGNED else [0])
        return float(np.sum(np.abs(c) ** 2))

    def with_gauge(self, gauge: Callable[[int], float]) -> "BlockSpec":
        return dataclasses.replace(self, gauge=gauge)

    def corrupted(self, idx: int, rel: float) -> "BlockSpec":
        """Copy with coupling ``idx`` scaled by ``1 + rel``."""
        c = complex(self.ladder_coefficient(idx)[0]) * (1.0 + rel)
        kept = tuple((i, v) for i, v in self.overrides if i != idx)
        return dataclasses.replace(self, overrides=kept + ((idx, c),))

    def to_record(self) -> dict:
        return {
            "geometry": self.geometry.value,
            "n": self.n,
            "parameter": self.parameter,
            "mu": self.mu,
            "eta": self.eta,
        }

    @classmethod
    def from_record(cls, rec: Mapping) -> "BlockSpec":
        return make_block(rec["geometry"], rec["parameter"], n=rec.get("n", 2))


def torus_block(xi_norm: float, n: int = 2) -> BlockSpec:
    """Fourier mode of frequency ``|xi|`` on a flat torus of dimension ``n``.

    For ``n >= 3`` only the zonal chain (the one containing the constant
    fiber function) is built.
    """
    if n < 2:
        raise ValueError(f"base dimension must be >= 2, got {n}")
    if xi_norm < 0:
        raise ValueError(f"xi_norm must be nonnegative, got {xi_norm}")
    xi_norm = float(xi_norm)
    mu = xi_norm**2
    indexing = Indexing.SIGNED if n == 2 else Indexing.ZONAL
    return BlockSpec(Geometry.TORUS, n, xi_norm, indexing, mu, mu)


def sphere_block(ell: int) -> BlockSpec:
    """Degree-``ell`` block on the round 2-sphere: finite chain ``-ell..ell``."""
    if int(ell) != ell or ell < 0:
        raise ValueError(f"ell must be a nonnegative integer, got {ell}")
    ell = int(ell)
    mu = float(ell * (ell + 1))
    return BlockSpec(Geometry.SPHERE, 2, ell, Indexing.SIGNED, mu, mu, finite_range=(-ell, ell))


def hyperbolic_block(s: float) -> BlockSpec:
    """Principal-series block with spectral parameter ``s`` (``mu = s**2 + 1/4``)."""
    if s < 0:
        raise ValueError(f"s must be nonnegative, got {s}")
    s = float(s)
    mu = s * s + 0.25
    return BlockSpec(Geometry.HYPERBOLIC, 2, s, Indexing.SIGNED, mu, mu)


def make_block(geometry: str | Geometry, parameter: float, n: int = 2) -> BlockSpec:
    geometry = Geometry(geometry)
    if geometry is Geometry.TORUS:
        return torus_block(parameter, n)
    if n != 2:
        raise ValueError(f"{geometry.value} blocks exist only for n = 2, got n = {n}")
    if geometry is Geometry.SPHERE:
        return sphere_block(parameter)
    return hyperbolic_block(parameter)


def base_eigenvalue(block: BlockSpec) -> float:
    return block.mu


def replicated_sphere_family(ell_max: int) -> list[BlockSpec]:
    """Sphere blocks ``0..ell_max``, each repeated ``2 ell + 1`` times."""
    return [sphere_block(ell) for ell in range(ell_max + 1) for _ in range(2 * ell + 1)]


def kmax_default(block: BlockSpec, C0: float = 10.0) -> int:
    """Initial truncation radius before adaptive refinement."""
    return max(8, math.ceil(4.0 * math.sqrt(C0 + block.mu) / math.sqrt(float(block.c_n))) + 10)
