"""Eigenvalues, windowed matching and resolvent comparisons on truncated blocks."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Iterable, Sequence

import numpy as np
import scipy.linalg
from scipy.optimize import linear_sum_assignment

from .assembly import assemble_P, resolve_kmax_policy
from .blocks import BlockSpec

CLUSTER_TOL = 1e-8
WINDOW_MARGIN = 1e-9
STABILITY_TOL = 1e-8


@dataclass(frozen=True)
class Window:
    """Closed rectangle ``[re_min, re_max] x [im_min, im_max]`` in C."""

    re_min: float
    re_max: float
    im_min: float
    im_max: float

    def __post_init__(self):
        if not (self.re_min <= self.re_max and self.im_min <= self.im_max):
            raise ValueError(f"empty window {self}")
        if not all(np.isfinite([self.re_min, self.re_max, self.im_min, self.im_max])):
            raise ValueError("window must be bounded")

    def contains(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        m = WINDOW_MARGIN
        return (
            (z.real >= self.re_min - m)
            & (z.real <= self.re_max + m)
            & (z.imag >= self.im_min - m)
            & (z.imag <= self.im_max + m)
        )

    def as_list(self) -> list[float]:
        return [self.re_min, self.re_max, self.im_min, self.im_max]


def default_window(C0: float = 10.0) -> Window:
    return Window(-0.5, C0, -1.0, 1.0)


def _sorted(z) -> np.ndarray:
    z = np.asarray(z, dtype=complex).ravel()
    return z[np.lexsort((z.imag, z.real))]


@dataclass(frozen=True)
class SpectrumReport:
    eigenvalues: np.ndarray
    window: Window | None = None
    blocks: tuple[BlockSpec, ...] = ()
    gamma: float | None = None
    K_max: int | None = None
    stable: bool = True

    def __len__(self):
        return len(self.eigenvalues)

    def clustered(self, tol: float = CLUSTER_TOL) -> list[tuple[complex, int]]:
        """Distinct eigenvalues with multiplicities (chain clustering at ``tol``)."""
        out: list[list] = []
        for z in _sorted(self.eigenvalues):
            if out and abs(z - out[-1][0]) < tol:
                out[-1][1] += 1
            else:
                out.append([z, 1])
        return [(complex(z), c) for z, c in out]

    def to_json(self) -> dict:
        return {
            "blocks": [b.to_record() for b in self.blocks],
            "gamma": self.gamma,
            "K_max": self.K_max,
            "stable": self.stable,
            "window": None if self.window is None else self.window.as_list(),
            "eigenvalues": [[z.real, z.imag] for z in self.eigenvalues],
        }


def dense_eigvals(block: BlockSpec, gamma: float, K) -> np.ndarray:
    return scipy.linalg.eigvals(assemble_P(block, gamma, K).to_dense(), check_finite=True)


def stable_in_disc(a, b, C0: float, tol: float = STABILITY_TOL) -> bool:
    """Whether the eigenvalues with ``|z| <= C0`` agree between two truncations."""
    a = np.asarray(a)[np.abs(a) <= C0]
    b = np.asarray(b)[np.abs(b) <= C0]
    if len(a) != len(b):
        return False
    if len(a) == 0:
        return True
    cost = np.abs(a[:, None] - b[None, :])
    r, c = linear_sum_assignment(cost)
    return bool(cost[r, c].max() < tol)


def eig_block(block: BlockSpec, gamma: float, K_max: int | None = None, C0: float = 10.0) -> SpectrumReport:
    """All eigenvalues of the truncated block, with a ``K_max + 5`` stability check."""
    K = resolve_kmax_policy(block, K_max, C0)
    ev = _sorted(dense_eigvals(block, gamma, K))
    stable = True
    if K is not None:
        stable = stable_in_disc(ev, dense_eigvals(block, gamma, K + 5), C0)
    return SpectrumReport(ev, None, (block,), float(gamma), K, stable)


def adaptive_kmax(block: BlockSpec, gamma: float, C0: float = 10.0, K_start: int | None = None, K_limit: int = 4096) -> int | None:
    """Double the truncation radius until the ``|z| <= C0`` spectrum is stable."""
    K = resolve_kmax_policy(block, K_start, C0)
    if K is None:
        return None
    while K <= K_limit:
        if stable_in_disc(dense_eigvals(block, gamma, K), dense_eigvals(block, gamma, K + 5), C0):
            return K
        K *= 2
    raise RuntimeError(f"{block.label}: no stable truncation up to K_max={K_limit} at gamma={gamma}")


def window(report: SpectrumReport, U: Window) -> SpectrumReport:
    keep = report.eigenvalues[U.contains(report.eigenvalues)]
    return replace(report, eigenvalues=keep, window=U)


def merge(reports: Iterable[SpectrumReport]) -> SpectrumReport:
    """Pool several block spectra (the direct sum of blocks)."""
    reports = list(reports)
    ev = _sorted(np.concatenate([r.eigenvalues for r in reports])) if reports else np.zeros(0, complex)
    blocks = tuple(b for r in reports for b in r.blocks)
    gammas = {r.gamma for r in reports}
    windows = {r.window for r in reports}
    return SpectrumReport(
        ev,
        windows.pop() if len(windows) == 1 else None,
        blocks,
        gammas.pop() if len(gammas) == 1 else None,
        None,
        all(r.stable for r in reports),
    )


@dataclass(frozen=True)
class MatchReport:
    pairs: list[tuple[complex, float, float]]
    unmatched_computed: list[complex]
    unmatched_target: list[float]

    @property
    def max_matched_distance(self) -> float:
        return max((d for _, _, d in self.pairs), default=0.0)

    @property
    def complete(self) -> bool:
        return not self.unmatched_computed and not self.unmatched_target

    def to_json(self) -> dict:
        return {
            "pairs": [[z.real, z.imag, mu, d] for z, mu, d in self.pairs],
            "unmatched_computed": [[z.real, z.imag] for z in self.unmatched_computed],
            "unmatched_target": list(self.unmatched_target),
            "max_matched_distance": self.max_matched_distance,
        }


def match_spectra(computed: SpectrumReport | Sequence[complex], targets: Sequence[float], U: Window) -> MatchReport:
    """Minimum-cost assignment between computed eigenvalues and target values in ``U``.

    ``targets`` is a multiset (repeat a value for multiplicity). Inputs are
    sorted lexicographically by (Re, Im) first so ties resolve deterministically.
    """
    z = computed.eigenvalues if isinstance(computed, SpectrumReport) else np.asarray(computed, dtype=complex)
    z = _sorted(z[U.contains(z)])
    t = np.sort(np.asarray(targets, dtype=float))
    t = t[U.contains(t)]
    if len(z) == 0 or len(t) == 0:
        return MatchReport([], [complex(v) for v in z], [float(v) for v in t])
    cost = np.abs(z[:, None] - t[None, :])
    rows, cols = linear_sum_assignment(cost)
    pairs = [(complex(z[i]), float(t[j]), float(cost[i, j])) for i, j in zip(rows, cols)]
    left_z = sorted(set(range(len(z))) - set(rows.tolist()))
    left_t = sorted(set(range(len(t))) - set(cols.tolist()))
    return MatchReport(pairs, [complex(z[i]) for i in left_z], [float(t[j]) for j in left_t])


class SpectrumProximityError(ValueError):
    pass


def resolvent_diff_norm(block: BlockSpec, gamma: float, lam: complex, K_max: int | None = None, C0: float = 10.0) -> float:
    """``|| (P_gamma - lam)^{-1} - (Delta_M - lam)^{-1} Pi ||_2`` on the truncated block.

    The base resolvent acts only on the zero-layer row, as ``1 / (mu - lam)``.
    """
    K = resolve_kmax_policy(block, K_max, C0)
    lam = complex(lam)
    P = assemble_P(block, gamma, K).to_dense()
    N = P.shape[0]
    ev = scipy.linalg.eigvals(P)
    if abs(block.mu - lam) < 1e-6 or np.min(np.abs(ev - lam)) < 1e-6:
        raise SpectrumProximityError(f"lam={lam} is within 1e-6 of the spectrum of {block.label}")
    R = scipy.linalg.solve(P - lam * np.eye(N), np.eye(N))
    z = int(np.flatnonzero(assemble_P(block, gamma, K).index_map == 0)[0])
    R[z, z] -= 1.0 / (block.mu - lam)
    return float(np.linalg.norm(R, 2))


def perp_resolvent_norm(block: BlockSpec, gamma: float, lam: complex, K_max: int | None = None) -> float:
    """``|| (P_gamma - lam)^{-1} ||_2`` with the zero layer removed."""
    K = resolve_kmax_policy(block, K_max)
    op = assemble_P(block, gamma, K)
    keep = op.index_map != 0
    A = op.to_dense()[np.ix_(keep, keep)] - complex(lam) * np.eye(int(keep.sum()))
    return float(1.0 / scipy.linalg.svdvals(A).min())


@dataclass(frozen=True)
class EmptinessScan:
    gamma: float
    C0: float
    etas: list[float]
    nonempty: list[bool]
    counts: list[int]

    @property
    def threshold(self) -> float | None:
        """Least scanned eta from which every block has an empty ``|z| <= C0`` window."""
        last = max((i for i, ne in enumerate(self.nonempty) if ne), default=-1)
        if last + 1 >= len(self.etas):
            return None
        return self.etas[last + 1]

    @property
    def monotone(self) -> bool:
        """Nonempty blocks form a prefix of the eta-ordered family."""
        seen_empty = False
        for ne in self.nonempty:
            if ne and seen_empty:
                return False
            seen_empty |= not ne
        return True

    def to_json(self) -> dict:
        return {
            "gamma": self.gamma,
            "C0": self.C0,
            "threshold": self.threshold,
            "monotone": self.monotone,
            "blocks": [{"eta": e, "nonempty": ne, "count": c} for e, ne, c in zip(self.etas, self.nonempty, self.counts)],
        }


def eta_emptiness_scan(family: Sequence[BlockSpec], gammas: Sequence[float] | float, C0: float) -> list[EmptinessScan]:
    """For each gamma, which blocks keep spectrum in the disc ``|z| <= C0``."""
    fam = sorted(family, key=lambda b: b.eta)
    out = []
    for g in np.atleast_1d(gammas):
        counts = []
        for b in fam:
            K = adaptive_kmax(b, float(g), C0)
            counts.append(int(np.sum(np.abs(dense_eigvals(b, float(g), K)) <= C0 + WINDOW_MARGIN)))
        out.append(EmptinessScan(float(g), float(C0), [b.eta for b in fam], [c > 0 for c in counts], counts))
    return out
