"""Topological invariants of static and periodically driven band structures."""

from __future__ import annotations

from . import gerbe
from .errors import (
    AnchorDegenerate,
    BranchCut,
    ConvergenceError,
    InputError,
    LiftInvalid,
    MeshTooCoarse,
    NoGap,
    Obstruction,
    ObstructionError,
    RefineGrid,
    ToposcopeError,
)
from .model import (
    AntiUnitary,
    CrystalModel,
    DriveProtocol,
    chain_model,
    cubic_ti_model,
    haldane_model,
    kane_mele_model,
    layered_3d_model,
)
from .static_invariants import (
    ChernResult,
    HamiltonianField,
    Z2Result,
    Z2Result3d,
    as_field,
    chern_number,
    kane_mele_2d,
    kane_mele_3d,
    lattice_z2,
    smooth_trivialization,
)

__version__ = "0.1.0"

__all__ = [
    "AnchorDegenerate",
    "AntiUnitary",
    "BranchCut",
    "ChernResult",
    "ConvergenceError",
    "CrystalModel",
    "DriveProtocol",
    "HamiltonianField",
    "InputError",
    "LiftInvalid",
    "MeshTooCoarse",
    "NoGap",
    "Obstruction",
    "ObstructionError",
    "RefineGrid",
    "ToposcopeError",
    "Z2Result",
    "Z2Result3d",
    "as_field",
    "chain_model",
    "chern_number",
    "cubic_ti_model",
    "gerbe",
    "haldane_model",
    "kane_mele_2d",
    "kane_mele_3d",
    "kane_mele_model",
    "lattice_z2",
    "layered_3d_model",
    "smooth_trivialization",
    "__version__",
]
