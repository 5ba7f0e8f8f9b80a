"""Discrete holonomy of the basic gerbe over U(N) and derived Z2 invariants.

The public surface:

* :class:`SurfaceMesh`, :class:`VolumeMesh`, :class:`GerbeLift` — meshes and
  branch lifts;
* :func:`curving_integral`, :func:`edge_transport`, :func:`build_surface_lift`
  — the local ingredients;
* :func:`surface_holonomy` — gerbe holonomy of a unitary map of the 2-torus;
* :func:`sqrt_holonomy_equivariant` — its square root for inversion-equivariant
  maps with a time-reversal squaring to -1;
* :func:`wz_density_integral` — the 3d winding-density integral;
* :func:`index3d`, :class:`Index3dResult` — the Z2 index of an equivariant map
  of the 3-torus;
* :class:`LineElement` — transported determinant-line coefficients.
"""

from __future__ import annotations

from .holonomy import (
    GerbeLift,
    Index3dResult,
    build_surface_lift,
    curving_integral,
    edge_transport,
    index3d,
    sqrt_holonomy_equivariant,
    surface_holonomy,
    wz_density_integral,
)
from .lines import LineElement
from .mesh import SurfaceMesh, VolumeMesh

__all__ = [
    "GerbeLift",
    "Index3dResult",
    "LineElement",
    "SurfaceMesh",
    "VolumeMesh",
    "build_surface_lift",
    "curving_integral",
    "edge_transport",
    "index3d",
    "sqrt_holonomy_equivariant",
    "surface_holonomy",
    "wz_density_integral",
]
