"""Structured meshes for surface and volume holonomy computations.

A :class:`SurfaceMesh` is a tensor-product cell decomposition of a 2-torus
``[0, L0) x [0, L1)``: per-axis breakpoint lists (not necessarily uniform, so
offending rows/columns can be split during lift refinement without creating
hanging vertices). Vertices are indexed ``(i, j)`` with periodic wrap-around;
the face ``(i, j)`` spans ``[x_i, x_{i+1}] x [y_j, y_{j+1}]``.

Orientation conventions, used consistently by the holonomy assembly:

* faces are oriented by ``dx ^ dy`` (the coordinate orientation);
* the boundary of face ``(i, j)`` is the counterclockwise edge cycle
  ``e1(i, j) + e2(i+1, j) - e1(i, j+1) - e2(i, j)``, where ``e1(i, j)`` runs from
  vertex ``(i, j)`` along axis 0 and ``e2(i, j)`` from ``(i, j)`` along axis 1;
* every interior edge is owned by exactly one of its two faces: ``e1(i, j)`` by
  the face above it (``(i, j)``), ``e2(i, j)`` by the face to its left
  (``(i-1, j)``).

The momentum inversion ``theta: x -> -x (mod L)`` maps vertex ``(i, j)`` to
``(-i mod n0, -j mod n1)`` whenever the breakpoint sets are inversion-symmetric;
meshes produced by :meth:`SurfaceMesh.torus` are, and refinement mirrors its
splits to keep them so.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import InputError

Array = np.ndarray

TWO_PI = 2.0 * np.pi

_BREAK_TOL = 1e-9


def _as_breaks(values, length: float, axis: int) -> Array:
    b = np.asarray(values, dtype=float)
    if b.ndim != 1 or b.size < 3:
        raise InputError(f"axis {axis} needs at least 2 cells")
    if abs(b[0]) > _BREAK_TOL or abs(b[-1] - length) > _BREAK_TOL:
        raise InputError(f"axis {axis} breakpoints must run from 0 to {length}")
    if np.any(np.diff(b) <= _BREAK_TOL):
        raise InputError(f"axis {axis} breakpoints must be strictly increasing")
    b = b.copy()
    b[0] = 0.0
    b[-1] = length
    b.setflags(write=False)
    return b


def _is_symmetric(breaks: Array, length: float) -> bool:
    mirrored = np.sort(length - breaks)
    return bool(np.max(np.abs(mirrored - breaks)) < 10 * _BREAK_TOL)


@dataclass(frozen=True)
class SurfaceMesh:
    """Tensor-product mesh on the 2-torus ``[0, L0) x [0, L1)``."""

    breaks0: Array
    breaks1: Array
    lengths: tuple[float, float] = (TWO_PI, TWO_PI)

    def __post_init__(self) -> None:
        object.__setattr__(
            self, "breaks0", _as_breaks(self.breaks0, self.lengths[0], 0)
        )
        object.__setattr__(
            self, "breaks1", _as_breaks(self.breaks1, self.lengths[1], 1)
        )

    @staticmethod
    def torus(
        n0: int, n1: int | None = None, lengths: tuple[float, float] = (TWO_PI, TWO_PI)
    ) -> "SurfaceMesh":
        """Uniform ``n0 x n1`` mesh (``n1`` defaults to ``n0``)."""
        if n1 is None:
            n1 = n0
        if n0 < 2 or n1 < 2:
            raise InputError("mesh needs at least 2 cells per axis")
        return SurfaceMesh(
            np.linspace(0.0, lengths[0], n0 + 1),
            np.linspace(0.0, lengths[1], n1 + 1),
            (float(lengths[0]), float(lengths[1])),
        )

    def breaks(self, axis: int) -> Array:
        return self.breaks0 if axis == 0 else self.breaks1

    @property
    def shape(self) -> tuple[int, int]:
        return (self.breaks0.size - 1, self.breaks1.size - 1)

    @property
    def symmetric(self) -> bool:
        """True when both breakpoint sets are invariant under ``x -> -x (mod L)``."""
        return _is_symmetric(self.breaks0, self.lengths[0]) and _is_symmetric(
            self.breaks1, self.lengths[1]
        )

    def vertex_point(self, i: int, j: int) -> tuple[float, float]:
        n0, n1 = self.shape
        return (float(self.breaks0[i % n0]), float(self.breaks1[j % n1]))

    def vertex_points(self) -> Array:
        """All vertex coordinates, shape ``(n0, n1, 2)``."""
        x, y = np.meshgrid(self.breaks0[:-1], self.breaks1[:-1], indexing="ij")
        return np.stack([x, y], axis=-1)

    def face_rect(self, i: int, j: int) -> tuple[tuple[float, float], tuple[float, float]]:
        return (
            (float(self.breaks0[i]), float(self.breaks0[i + 1])),
            (float(self.breaks1[j]), float(self.breaks1[j + 1])),
        )

    def theta_vertex(self, i: int, j: int) -> tuple[int, int]:
        """Index of the inversion image of vertex ``(i, j)``; needs a symmetric mesh."""
        if not self.symmetric:
            raise InputError("mesh breakpoints are not inversion-symmetric")
        n0, n1 = self.shape
        return ((-i) % n0, (-j) % n1)

    def theta_face(self, i: int, j: int) -> tuple[int, int]:
        """Index of the inversion image of face ``(i, j)``; needs a symmetric mesh."""
        if not self.symmetric:
            raise InputError("mesh breakpoints are not inversion-symmetric")
        n0, n1 = self.shape
        return (n0 - 1 - i, n1 - 1 - j)

    def fixed_vertices(self) -> list[tuple[int, int]]:
        """Vertices with ``x = -x (mod L)``: the four inversion fixed points."""
        out = []
        half0 = self.half_index(0)
        half1 = self.half_index(1)
        for i in (0, half0):
            for j in (0, half1):
                out.append((i, j))
        return out

    def half_index(self, axis: int) -> int:
        """Breakpoint index of ``L/2`` along ``axis``; needs the midpoint present."""
        b = self.breaks(axis)
        target = 0.5 * self.lengths[axis]
        idx = int(np.argmin(np.abs(b - target)))
        if abs(b[idx] - target) > 10 * _BREAK_TOL:
            raise InputError(f"axis {axis} has no breakpoint at half period")
        return idx

    def refined(
        self, splits: dict[int, set[int]], *, mirrored: bool = False
    ) -> "SurfaceMesh":
        """Split the listed cells (per axis) in half; optionally mirror the splits.

        ``splits[axis]`` is a set of cell indices along that axis whose interval is
        halved. With ``mirrored`` the inversion partner of every listed interval is
        split as well, preserving mesh symmetry.
        """
        new = []
        for axis in (0, 1):
            b = list(self.breaks(axis))
            n = len(b) - 1
            todo = set(splits.get(axis, set()))
            if mirrored:
                todo |= {n - 1 - i for i in todo}
            mids = [0.5 * (b[i] + b[i + 1]) for i in sorted(todo)]
            new.append(np.sort(np.concatenate([b, mids])))
        return SurfaceMesh(new[0], new[1], self.lengths)

    def half(self, axis: int, *, ell_upper: bool = False) -> "HalfDomain":
        return HalfDomain(self, axis, ell_upper)


@dataclass(frozen=True)
class BoundaryCircle:
    """One boundary circle of a fundamental half-domain.

    ``row`` is the vertex index along the halved axis (0 or the half index),
    ``direction`` is +1/-1 according to whether the induced boundary orientation
    runs along +/- the free axis, and ``ell_edges`` lists the cell indices along
    the free axis whose edges belong to the chosen arc ``l`` (the inversion
    images form the mirrored arc). ``v_init``/``v_final`` are the fixed vertices
    at which the ``l``-arc begins and ends when traversed with the boundary
    orientation.
    """

    row: int
    direction: int
    ell_edges: tuple[int, ...]
    mirror_edges: tuple[int, ...]
    v_init: tuple[int, int]
    v_final: tuple[int, int]


class HalfDomain:
    """Fundamental domain ``0 <= x_axis <= L/2`` of an inversion-symmetric mesh."""

    def __init__(self, mesh: SurfaceMesh, axis: int, ell_upper: bool) -> None:
        if axis not in (0, 1):
            raise InputError("half axis must be 0 or 1")
        if not mesh.symmetric:
            raise InputError("equivariant half-domain needs a symmetric mesh")
        n_free = mesh.shape[1 - axis]
        if n_free % 2:
            raise InputError("free axis must have an even cell count")
        self.mesh = mesh
        self.axis = axis
        self.ell_upper = ell_upper
        self.m = mesh.half_index(axis)
        self.n_free = n_free
        half_free = mesh.half_index(1 - axis)
        if half_free != n_free // 2:
            raise InputError("free axis breakpoints are not symmetric")
        self.half_free = half_free
        # Induced boundary orientation: the half-domain is oriented by dx0 ^ dx1;
        # contracting with the outward normal at x_axis = L/2 gives +dx1 for
        # axis 0 and -dx0 for axis 1 (and the opposite signs at x_axis = 0).
        upper_dir = 1 if axis == 0 else -1
        self.circles = tuple(
            self._circle(row, direction)
            for row, direction in ((0, -upper_dir), (self.m, upper_dir))
        )

    def _vertex(self, row: int, j: int) -> tuple[int, int]:
        j = j % self.n_free
        return (row, j) if self.axis == 0 else (j, row)

    def _circle(self, row: int, direction: int) -> BoundaryCircle:
        lower = tuple(range(0, self.half_free))
        upper = tuple(range(self.half_free, self.n_free))
        ell = upper if self.ell_upper else lower
        mirror = lower if self.ell_upper else upper
        # The l-arc spans the free coordinate between two fixed vertices; with the
        # boundary orientation it is entered at one of them and left at the other.
        ends = (0, self.half_free) if not self.ell_upper else (self.half_free, 0)
        arc_lo, arc_hi = ends  # traversing +x_free runs arc_lo -> arc_hi
        if direction > 0:
            v_init, v_final = self._vertex(row, arc_lo), self._vertex(row, arc_hi)
        else:
            v_init, v_final = self._vertex(row, arc_hi), self._vertex(row, arc_lo)
        return BoundaryCircle(row, direction, ell, mirror, v_init, v_final)

    def faces(self) -> list[tuple[int, int]]:
        n0, n1 = self.mesh.shape
        if self.axis == 0:
            return [(i, j) for i in range(self.m) for j in range(n1)]
        return [(i, j) for i in range(n0) for j in range(self.m)]

    def face_in_domain(self, i: int, j: int) -> bool:
        idx = i if self.axis == 0 else j
        return 0 <= idx < self.m

    def mirror_edge(self, j: int) -> int:
        """Free-axis index of the inversion partner of boundary edge ``j``."""
        return (self.n_free - 1 - j) % self.n_free

    def fixed_vertices(self) -> list[tuple[int, int]]:
        out = []
        for c in self.circles:
            for v in (c.v_init, c.v_final):
                if v not in out:
                    out.append(v)
        return out


@dataclass(frozen=True)
class VolumeMesh:
    """Uniform sampling grid for 3d winding-density integrals and the 3d index.

    ``periodic`` axes sample ``[0, L)`` with wrap-around; interval axes sample
    ``[0, L]`` inclusively. The inversion ``rho(x) = -x (mod L)`` acts on grid
    indices whenever the per-axis cell counts are even.
    """

    shape: tuple[int, int, int]
    lengths: tuple[float, float, float] = (TWO_PI, TWO_PI, TWO_PI)
    periodic: tuple[bool, bool, bool] = (True, True, True)

    @staticmethod
    def torus3d(
        n0: int, n1: int | None = None, n2: int | None = None,
        lengths: tuple[float, float, float] = (TWO_PI, TWO_PI, TWO_PI),
    ) -> "VolumeMesh":
        n1 = n0 if n1 is None else n1
        n2 = n0 if n2 is None else n2
        return VolumeMesh((n0, n1, n2), lengths, (True, True, True))

    @staticmethod
    def cylinder(nt: int, nk: int | None = None, t_length: float = 1.0) -> "VolumeMesh":
        """Periodized-evolution domain ``[0, t_length] x T^2``.

        The time axis is stored as a short periodic axis: fields fed to the 3d
        index close up at the endpoints (``V(0) = V(t_length) = 1``), so the
        domain is a 3-torus with one axis of length ``t_length``.
        """
        nk = nt if nk is None else nk
        return VolumeMesh((nt, nk, nk), (float(t_length), TWO_PI, TWO_PI), (True, True, True))

    def axis_samples(self, axis: int) -> Array:
        n = self.shape[axis]
        length = self.lengths[axis]
        if self.periodic[axis]:
            return np.arange(n) * (length / n)
        return np.arange(n + 1) * (length / n)

    def slice_axes(self, axis: int) -> tuple[int, int]:
        """The two remaining axes in cyclic order (orienting the upper slice +)."""
        return ((axis + 1) % 3, (axis + 2) % 3)
