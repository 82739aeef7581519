"""Spectra of kinetic Brownian motion generators, one Casimir block at a time.

On each block the generator ``P_gamma = -gamma X + c_n gamma^2 Delta_V`` is a
tridiagonal ladder matrix; its spectrum near the origin converges to the base
Laplace eigenvalue as ``gamma -> infinity``.
"""

from .assembly import (
    OperatorMeta,
    ProjectionSet,
    TridiagonalOperator,
    assemble_P,
    assemble_Ptilde,
    assemble_Q0,
    assemble_X,
    projections,
)
from .blocks import (
    BlockSpec,
    Geometry,
    base_eigenvalue,
    c_n,
    hyperbolic_block,
    make_block,
    replicated_sphere_family,
    sphere_block,
    torus_block,
)
from .grushin import (
    GrushinData,
    IllConditionedError,
    NewtonFailure,
    effective_operator,
    grushin_blocks,
    schur_residuals,
    solve_effective,
)
from .spectra import (
    MatchReport,
    SpectrumReport,
    Window,
    eig_block,
    eta_emptiness_scan,
    match_spectra,
    merge,
    resolvent_diff_norm,
    window,
)

__all__ = [
    "BlockSpec", "Geometry", "base_eigenvalue", "c_n", "hyperbolic_block", "make_block",
    "replicated_sphere_family", "sphere_block", "torus_block",
    "OperatorMeta", "ProjectionSet", "TridiagonalOperator", "assemble_P", "assemble_Ptilde",
    "assemble_Q0", "assemble_X", "projections",
    "GrushinData", "IllConditionedError", "NewtonFailure", "effective_operator", "grushin_blocks",
    "schur_residuals", "solve_effective",
    "MatchReport", "SpectrumReport", "Window", "eig_block", "eta_emptiness_scan", "match_spectra",
    "merge", "resolvent_diff_norm", "window",
]
__version__ = "0.1.0"
