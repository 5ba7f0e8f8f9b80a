"""Discrete basic-gerbe holonomy over U(N), its equivariant square root, and
the 3d inversion-symmetric index.

Geometry and conventions
------------------------
A unitary-valued field ``phi`` on a 2-torus is lifted face by face: each mesh
face gets a branch angle ``eps`` whose cut avoids the spectrum of ``phi``
everywhere on the face. The holonomy is assembled from three kinds of local
data:

* per face, the *curving* integral
  ``B = -(i / 4*pi) * int_0^1 tr(H [M1, M2]) dt`` with ``H`` the branch
  logarithm for the face angle and ``M_mu`` the right logarithmic derivative of
  ``exp(-1j*t*H)`` along momentum direction ``mu`` (evaluated in the eigenbasis
  of ``H`` through the first dexp coefficient ``phi_1(z) = (e^z - 1)/z``);
* per edge, a parallel transport in the determinant line of the spectral arc
  between the two branch angles meeting at the edge, with connection one-form
  ``A = -(1/4) tr(H dP)`` on top of the spectral-frame overlap part: the
  transported coefficient is the product of conjugated polar-overlap
  determinants times ``exp(+1j * int A)``;
* per vertex, gluing determinants contracting the transported line slots
  (:func:`toposcope.gerbe.lines.fold_vertex`).

Each interior edge is owned by one adjacent face (:mod:`toposcope.gerbe.mesh`);
it carries the line of the ordered pair (non-owner angle, owner angle) and is
traversed with the orientation induced by the non-owner face, so the owner's
own factor is trivial. All vertex slot cycles then close exactly, which is
asserted. The result has unit modulus and is independent of the choice of
valid lift.

The equivariant square root restricts to the fundamental half-domain of the
inversion ``x -> -x``, gives each boundary edge on the arc ``l`` its own angle
in ``(-pi, 0)`` (the mirrored arc gets the partner ``-eps - 2*pi``), and closes
the residual line slots at the four inversion-fixed vertices with Pfaffian
anchors ``sigma * pf(<u_i | theta u_j>)``. The branch ``sigma in {1, 1j}`` is
fixed by the parity of the winding of ``det(phi)`` along half of the domain
boundary, tracked through a continuous branch of ``sqrt(det phi)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from ..errors import InputError, LiftInvalid, MeshTooCoarse
from ..model import AntiUnitary
from . import lines
from ._batch import unitary_eig_batched
from .lines import VertexData
from .mesh import SurfaceMesh, VolumeMesh

Array = np.ndarray

TWO_PI = 2.0 * np.pi

GAP_TOL = 1e-6
UNITARY_TOL = 1e-8
EQUIV_TOL = 1e-8
# Face and boundary-edge lifts are accepted only with this much angular
# clearance; the margin covers the finite-difference stencil and spectral
# drift between validation samples.
CLEARANCE_FLOOR = 1e-4
MOVEMENT_MAX = 0.5 * np.pi


@lru_cache(maxsize=None)
def _gauss(order: int) -> tuple[Array, Array]:
    """Gauss-Legendre nodes and weights on ``[0, 1]``."""
    if order < 1:
        raise InputError("quadrature order must be >= 1")
    x, w = np.polynomial.legendre.leggauss(int(order))
    nodes = 0.5 * (x + 1.0)
    weights = 0.5 * w
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


def _eval_unitary(phi, pts: Array, tol: float = UNITARY_TOL) -> Array:
    v = np.asarray(phi(np.asarray(pts, dtype=float)), dtype=complex)
    n = v.shape[-1]
    dev = float(np.max(np.abs(np.swapaxes(v, -1, -2).conj() @ v - np.eye(n))))
    if dev > tol:
        raise InputError(f"field values are not unitary (deviation {dev:.3e})")
    return v


def _branch_coords(lam: Array) -> Array:
    """Branch coordinates ``beta in [-2*pi, 0)`` of unit-modulus eigenvalues."""
    return np.mod(-np.angle(lam), TWO_PI) - TWO_PI


def _vertex_data(phi, pts: Array) -> list[VertexData]:
    v = _eval_unitary(phi, pts)
    lam, q = unitary_eig_batched(v)
    return [VertexData.from_eig(lam[k], q[k]) for k in range(lam.shape[0])]


# -- lift selection -------------------------------------------------------------------


def _arc_center(
    betas: Array, *, window: tuple[float, float] | None = None
) -> tuple[float, float]:
    """Best branch angle for a pooled set of branch coordinates.

    Without a window: midpoint of the widest spectral arc, ties toward the
    smallest ``|eps|``, nudged off the excluded angles 0 and ``-2*pi`` (the
    same semantics as :func:`toposcope.numeric.gap_center`). With a window
    ``(w0, w1)``: the angle inside it maximizing the angular clearance to the
    pooled spectrum. Returns ``(eps, clearance)``; a clearance of ``-1`` means
    no valid angle exists in the window.
    """
    b = np.sort(np.mod(np.asarray(betas, dtype=float).ravel(), TWO_PI) - TWO_PI)
    widths = np.diff(np.concatenate([b, [b[0] + TWO_PI]]))
    if window is None:
        top = float(np.max(widths))
        candidates = []
        for i in np.nonzero(widths >= top - 1e-12)[0]:
            w = float(widths[i])
            lo = float(b[i])
            eps = lo + 0.5 * w
            while eps <= -TWO_PI:
                eps += TWO_PI
            while eps >= 0.0:
                eps -= TWO_PI
            if abs(eps) < 1e-15 or eps <= -TWO_PI + 1e-15:
                eps = -0.25 * w
            # clearance of the chosen angle within the arc, whichever period
            # shift places the angle inside it
            clear = max(
                min(eps - lo, lo + w - eps),
                min(eps + TWO_PI - lo, lo + w - eps - TWO_PI),
            )
            candidates.append((float(eps), float(clear)))
        return min(candidates, key=lambda t: (abs(t[0]), t[0]))
    best_eps, best_clear = float("nan"), -1.0
    for i in range(b.size):
        a0 = float(b[i])
        w = float(widths[i])
        if w <= 0.0:
            continue
        for shift in (0.0, -TWO_PI, TWO_PI):
            lo = a0 + shift
            hi = a0 + w + shift
            u = max(lo, window[0])
            v = min(hi, window[1])
            if v <= u:
                continue
            c = min(max(0.5 * (lo + hi), u), v)
            clear = min(c - lo, hi - c)
            if clear > best_clear:
                best_eps, best_clear = c, clear
    return best_eps, best_clear


def _spectral_movement(b1: Array, b2: Array) -> Array:
    """Circular Hausdorff distance between two angle multisets (leading dims batch)."""
    d = np.abs(b1[..., :, None] - b2[..., None, :])
    d = np.mod(d, TWO_PI)
    d = np.minimum(d, TWO_PI - d)
    return np.maximum(d.min(axis=-2).max(axis=-1), d.min(axis=-1).max(axis=-1))


def _face_sample_points(
    mesh: SurfaceMesh, faces: list[tuple[int, int]], k_order: int
) -> Array:
    nodes, _ = _gauss(k_order)
    pts = np.empty((len(faces), 4 + k_order * k_order, 2))
    for f, (i, j) in enumerate(faces):
        (x0, x1), (y0, y1) = mesh.face_rect(i, j)
        gx = x0 + (x1 - x0) * nodes
        gy = y0 + (y1 - y0) * nodes
        pts[f, :4] = [(x0, y0), (x1, y0), (x0, y1), (x1, y1)]
        pts[f, 4:] = np.stack(
            np.meshgrid(gx, gy, indexing="ij"), axis=-1
        ).reshape(-1, 2)
    return pts


@dataclass(frozen=True)
class GerbeLift:
    """Per-face branch angles validating a surface mesh, plus their clearances."""

    face_eps: Array
    clearance: Array
    gap_tol: float

    def eps(self, i: int, j: int) -> float:
        value = float(self.face_eps[i, j])
        if not np.isfinite(value):
            raise LiftInvalid(f"face ({i}, {j}) carries no valid branch angle")
        return value


def build_surface_lift(
    phi,
    mesh: SurfaceMesh,
    *,
    gap_tol: float = GAP_TOL,
    max_refine: int = 4,
    k_order: int = 3,
    domain_axis: int | None = None,
    ell_upper: bool = False,
) -> tuple[SurfaceMesh, GerbeLift, dict[tuple[int, int], float]]:
    """Choose branch angles for every face (and boundary edge, on a half-domain).

    Faces (or boundary edges) whose pooled spectrum leaves less clearance than
    ``max(gap_tol, 1e-4)`` trigger a split of the offending mesh rows and
    columns (mirrored when a half-domain must keep the mesh
    inversion-symmetric), up to ``max_refine`` rounds; persistent failure
    raises :class:`LiftInvalid`.

    Returns the (possibly refined) mesh, the face lift (``nan`` outside the
    requested half-domain), and the boundary-edge angles
    ``{(row, free_index): eps}`` for the arc ``l`` (empty for a full torus).
    """
    floor = max(gap_tol, CLEARANCE_FLOOR)
    for round_ in range(max_refine + 1):
        domain = (
            mesh.half(domain_axis, ell_upper=ell_upper)
            if domain_axis is not None
            else None
        )
        if domain is not None:
            faces = domain.faces()
        else:
            faces = [(i, j) for i in range(mesh.shape[0]) for j in range(mesh.shape[1])]
        pts = _face_sample_points(mesh, faces, k_order)
        lam, _ = unitary_eig_batched(_eval_unitary(phi, pts.reshape(-1, 2)))
        nsamp = 4 + k_order * k_order
        beta = _branch_coords(lam).reshape(len(faces), nsamp, -1)
        # Sampling can only certify a lift when the spectrum moves slowly across
        # the face: bound the movement between neighbouring sample points.
        corners = beta[:, :4]
        grid = beta[:, 4:].reshape(len(faces), k_order, k_order, -1)
        moves = [
            _spectral_movement(grid[:, :-1], grid[:, 1:]).reshape(len(faces), -1),
            _spectral_movement(grid[:, :, :-1], grid[:, :, 1:]).reshape(len(faces), -1),
            _spectral_movement(corners[:, 0], grid[:, 0, 0])[:, None],
            _spectral_movement(corners[:, 1], grid[:, -1, 0])[:, None],
            _spectral_movement(corners[:, 2], grid[:, 0, -1])[:, None],
            _spectral_movement(corners[:, 3], grid[:, -1, -1])[:, None],
        ]
        movement = np.concatenate(moves, axis=1).max(axis=1)

        n0, n1 = mesh.shape
        face_eps = np.full((n0, n1), np.nan)
        clearance = np.full((n0, n1), np.nan)
        bad_faces: list[tuple[int, int]] = []
        for f, (i, j) in enumerate(faces):
            eps, clear = _arc_center(beta[f])
            face_eps[i, j] = eps
            clearance[i, j] = clear
            if clear < floor or movement[f] > MOVEMENT_MAX:
                bad_faces.append((i, j))

        edge_eps: dict[tuple[int, int], float] = {}
        bad_edges: list[int] = []
        if domain is not None:
            edge_eps, bad_edges = _boundary_lifts(phi, mesh, domain, floor)
        if not bad_faces and not bad_edges:
            for f in _validate_edges(phi, mesh, domain, face_eps, edge_eps, floor):
                if f not in bad_faces:
                    bad_faces.append(f)

        if not bad_faces and not bad_edges:
            return mesh, GerbeLift(face_eps, clearance, gap_tol), edge_eps
        if round_ == max_refine:
            where = bad_faces[0] if bad_faces else ("boundary edge", bad_edges[0])
            raise LiftInvalid(
                f"no valid branch lift after {max_refine} refinement rounds "
                f"(first failure at {where})"
            )
        splits: dict[int, set[int]] = {0: set(), 1: set()}
        for i, j in bad_faces:
            splits[0].add(i)
            splits[1].add(j)
        if domain_axis is not None:
            for j in bad_edges:
                splits[1 - domain_axis].add(j)
        mesh = mesh.refined(splits, mirrored=domain_axis is not None)
    raise AssertionError("unreachable")


def _validate_edges(
    phi,
    mesh: SurfaceMesh,
    domain,
    face_eps: Array,
    edge_eps: dict[tuple[int, int], float],
    floor: float,
    samples: int = 9,
) -> list[tuple[int, int]]:
    """Check every transported edge against the branch cuts on its two sides.

    Along each mesh edge the spectral arc between the two adjacent cut angles
    must keep a constant rank and stay clear of both cuts, or the parallel
    transports are undefined there; offending edges return their adjacent
    faces for splitting.
    """
    n0, n1 = mesh.shape
    segs: list[tuple[Array, Array, tuple[float, float] | None, list[tuple[int, int]]]] = []

    def seg(p0, p1, cuts, faces_adj):
        good = [c for c in cuts if c is not None]
        pair = (min(good), max(good)) if len(good) == 2 else None
        segs.append((np.asarray(p0, float), np.asarray(p1, float), pair, faces_adj))

    if domain is None:
        b0, b1 = mesh.breaks(0), mesh.breaks(1)

        def fcut(i: int, j: int) -> tuple[float, tuple[int, int]]:
            i %= n0
            j %= n1
            return float(face_eps[i, j]), (i, j)

        for i in range(n0):
            for j in range(n1):
                p0 = (b0[i], b1[j])
                e0, f0 = fcut(i, j - 1)
                e1, f1 = fcut(i, j)
                seg(p0, (b0[i + 1], b1[j]), (e0, e1), [f0, f1])
                e0, f0 = fcut(i - 1, j)
                e1, f1 = fcut(i, j)
                seg(p0, (b0[i], b1[j + 1]), (e0, e1), [f0, f1])
    else:
        ax, m, nf = domain.axis, domain.m, domain.n_free
        ba, bf = mesh.breaks(ax), mesh.breaks(1 - ax)

        def vp(row: int, j: int) -> tuple[float, float]:
            out = [0.0, 0.0]
            out[ax] = float(ba[row])
            out[1 - ax] = float(bf[j])
            return (out[0], out[1])

        def fcut_d(r: int, j: int) -> tuple[float, tuple[int, int]]:
            j %= nf
            key = (r, j) if ax == 0 else (j, r)
            return float(face_eps[key]), key

        def blift(row: int, j: int) -> float | None:
            j %= nf
            if (row, j) in edge_eps:
                return float(edge_eps[(row, j)])
            pj = domain.mirror_edge(j)
            if (row, pj) in edge_eps:
                return -float(edge_eps[(row, pj)]) - TWO_PI
            return None

        for row in range(m):
            for j in range(nf):
                e0, f0 = fcut_d(row, j - 1)
                e1, f1 = fcut_d(row, j)
                seg(vp(row, j), vp(row + 1, j), (e0, e1), [f0, f1])
        for row in range(1, m):
            for j in range(nf):
                e0, f0 = fcut_d(row - 1, j)
                e1, f1 = fcut_d(row, j)
                seg(vp(row, j), vp(row, j + 1), (e0, e1), [f0, f1])
        for row, frow in ((0, 0), (m, m - 1)):
            for j in range(nf):
                ef, ff = fcut_d(frow, j)
                seg(vp(row, j), vp(row, j + 1), (ef, blift(row, j)), [ff])

    if not segs:
        return []
    pts = np.concatenate(
        [np.linspace(p0, p1, samples) for p0, p1, _, _ in segs]
    )
    lam, _ = unitary_eig_batched(_eval_unitary(phi, pts))
    beta = _branch_coords(lam).reshape(len(segs), samples, -1)
    bad: list[tuple[int, int]] = []
    for s, (_, _, pair, faces_adj) in enumerate(segs):
        if pair is None:
            continue
        lo, hi = pair
        clear = min(
            float(np.min(lines.circular_distance(beta[s], lo))),
            float(np.min(lines.circular_distance(beta[s], hi))),
        )
        ranks = np.count_nonzero((beta[s] > lo) & (beta[s] < hi), axis=-1)
        if clear < floor or int(ranks.min()) != int(ranks.max()):
            bad.extend(faces_adj)
    return bad


def _boundary_lifts(
    phi, mesh: SurfaceMesh, domain, floor: float, samples: int = 9
) -> tuple[dict[tuple[int, int], float], list[int]]:
    """Window-constrained branch angles for the l-arc edges of both circles."""
    free_breaks = mesh.breaks(1 - domain.axis)
    window = (-np.pi + floor, -floor)
    edge_eps: dict[tuple[int, int], float] = {}
    bad: set[int] = set()
    for circle in domain.circles:
        x_fixed = float(mesh.breaks(domain.axis)[circle.row])
        for j in circle.ell_edges:
            t = np.linspace(free_breaks[j], free_breaks[j + 1], samples)
            pts = np.empty((samples, 2))
            pts[:, domain.axis] = x_fixed
            pts[:, 1 - domain.axis] = t
            lam, _ = unitary_eig_batched(_eval_unitary(phi, pts))
            b = _branch_coords(lam)
            eps, clear = _arc_center(b, window=window)
            move = float(np.max(_spectral_movement(b[:-1], b[1:])))
            if clear < floor or move > MOVEMENT_MAX:
                bad.add(j)
            else:
                edge_eps[(circle.row, j)] = eps
    return edge_eps, sorted(bad)


# -- curving --------------------------------------------------------------------------


def _phi1(z: Array) -> Array:
    """First dexp coefficient ``(e^z - 1)/z``, stable near ``z = 0``."""
    small = np.abs(z) < 1e-6
    safe = np.where(small, 1.0, z)
    return np.where(small, 1.0 + z / 2.0 + z * z / 6.0, (np.exp(safe) - 1.0) / safe)


def _curving_faces(
    phi,
    rects: Array,
    eps: Array,
    *,
    t_order: int,
    k_order: int,
    fd_step: float,
    gap_tol: float,
) -> Array:
    """Curving integrals of a batch of faces; ``rects`` has shape ``(F, 2, 2)``."""
    rects = np.asarray(rects, dtype=float)
    eps = np.asarray(eps, dtype=float)
    nf = rects.shape[0]
    nodes, weights = _gauss(k_order)

    gx = rects[:, 0, 0, None] + (rects[:, 0, 1] - rects[:, 0, 0])[:, None] * nodes
    gy = rects[:, 1, 0, None] + (rects[:, 1, 1] - rects[:, 1, 0])[:, None] * nodes
    base = np.stack(
        np.broadcast_arrays(gx[:, :, None], gy[:, None, :]), axis=-1
    ).reshape(nf, -1, 2)
    npts = base.shape[1]
    stencil = np.array(
        [[0.0, 0.0], [fd_step, 0.0], [-fd_step, 0.0], [0.0, fd_step], [0.0, -fd_step]]
    )
    pts = base[:, :, None, :] + stencil[None, None, :, :]

    v = _eval_unitary(phi, pts.reshape(-1, 2))
    n = v.shape[-1]
    lam, q = unitary_eig_batched(v)
    beta = _branch_coords(lam).reshape(nf, npts, 5, n)
    q = q.reshape(nf, npts, 5, n, n)

    eb = eps[:, None, None, None]
    dist = np.mod(beta - eb, TWO_PI)
    worst = float(np.min(np.minimum(dist, TWO_PI - dist)))
    if worst < gap_tol:
        raise LiftInvalid(
            f"an eigenvalue comes within {worst:.3e} of a face branch cut"
        )
    lifted = np.where(beta > eb, beta, beta + TWO_PI)
    h_mats = np.einsum("fpsij,fpsj,fpskj->fpsik", q, lifted, q.conj())

    h0 = lifted[:, :, 0, :]
    q0 = q[:, :, 0]
    dh1 = (h_mats[:, :, 1] - h_mats[:, :, 2]) / (2.0 * fd_step)
    dh2 = (h_mats[:, :, 3] - h_mats[:, :, 4]) / (2.0 * fd_step)
    g1 = np.einsum("fpji,fpjk,fpkl->fpil", q0.conj(), dh1, q0)
    g2 = np.einsum("fpji,fpjk,fpkl->fpil", q0.conj(), dh2, q0)
    delta = h0[:, :, :, None] - h0[:, :, None, :]

    t_nodes, t_weights = _gauss(t_order)
    kernel = _phi1(-1j * t_nodes[:, None, None, None, None] * delta[None])
    w1 = g1[None] * kernel
    w2 = g2[None] * kernel
    comm = w1 @ w2 - w2 @ w1
    tr_h_comm = np.einsum("fpa,tfpaa->tfp", h0, comm)
    b_vals = (1j / (4.0 * np.pi)) * np.einsum(
        "t,t,tfp->fp", t_weights, t_nodes**2, tr_h_comm
    )
    if float(np.max(np.abs(b_vals.imag))) > 1e-7:
        raise AssertionError("curving density is not real")

    w2d = (weights[:, None] * weights[None, :]).reshape(-1)
    area = (rects[:, 0, 1] - rects[:, 0, 0]) * (rects[:, 1, 1] - rects[:, 1, 0])
    return np.einsum("p,fp->f", w2d, b_vals.real) * area


def curving_integral(
    phi,
    face: tuple[tuple[float, float], tuple[float, float]],
    eps: float,
    *,
    t_order: int = 8,
    k_order: int = 3,
    fd_step: float = 1e-5,
    gap_tol: float = GAP_TOL,
) -> float:
    """Integral of the curving two-form over one rectangular face.

    ``face`` is ``((x0, x1), (y0, y1))`` and ``eps`` the branch angle of the
    face lift, which must stay valid throughout the face (otherwise
    :class:`LiftInvalid`). Gauss-Legendre quadrature of order ``k_order`` per
    momentum axis and ``t_order`` along the interpolation time; momentum
    derivatives by central differences of step ``fd_step``.
    """
    out = _curving_faces(
        phi,
        np.asarray([face], dtype=float),
        np.asarray([float(eps)]),
        t_order=t_order,
        k_order=k_order,
        fd_step=fd_step,
        gap_tol=gap_tol,
    )
    return float(out[0])


# -- edge transport -------------------------------------------------------------------


def _transport_chain(
    chain: list[VertexData], lo: float, hi: float, gap_tol: float
) -> tuple[complex, int]:
    """Transport coefficient along a sampled path for the sorted pair ``lo < hi``."""
    frames = [vd.frame(lo, hi, gap_tol) for vd in chain]
    ranks = {f.shape[1] for f in frames}
    if len(ranks) > 1:
        raise LiftInvalid(
            f"spectral arc rank changes along an edge (ranks {sorted(ranks)}); "
            "the branch lift is invalid there"
        )
    rank = ranks.pop()
    if rank == 0:
        return 1.0 + 0.0j, 0
    berry = 1.0 + 0.0j
    a_int = 0.0
    h_prev: Array | None = None
    p_prev: Array | None = None
    for k, vd in enumerate(chain):
        f = frames[k]
        p = f @ f.conj().T
        lifted = np.where(vd.beta > lo, vd.beta, vd.beta + TWO_PI)
        h = (vd.q * lifted[None, :]) @ vd.q.conj().T
        if k:
            u, s, vh = np.linalg.svd(frames[k - 1].conj().T @ f)
            if float(np.min(s)) < 0.2:
                raise MeshTooCoarse(
                    "edge subdivision too coarse: consecutive arc frames are "
                    f"nearly orthogonal (smallest overlap {float(np.min(s)):.3f})"
                )
            berry *= np.conj(np.linalg.det(u @ vh))
            a_int += -0.25 * float(np.trace(0.5 * (h_prev + h) @ (p - p_prev)).real)
        h_prev, p_prev = h, p
    return berry * np.exp(1j * a_int), rank


def edge_transport(
    phi,
    edge: tuple,
    eps_from: float,
    eps_to: float,
    *,
    subdivisions: int = 8,
    gap_tol: float = GAP_TOL,
) -> lines.LineElement:
    """Parallel transport in the determinant line of the arc between two angles.

    ``edge = (p0, p1)`` holds the endpoint coordinates; the path is the
    straight coordinate segment, sampled at ``subdivisions + 1`` points. The
    coefficient is relative to the canonical arc frames at the endpoints; the
    pair order names the line (``eps_from > eps_to`` names the dual line, whose
    coefficient is the conjugate). A change of arc rank along the edge raises
    :class:`LiftInvalid`.
    """
    if subdivisions < 1:
        raise InputError("subdivisions must be >= 1")
    p0 = np.asarray(edge[0], dtype=float)
    p1 = np.asarray(edge[1], dtype=float)
    taus = np.linspace(0.0, 1.0, int(subdivisions) + 1)
    chain = _vertex_data(phi, p0[None, :] + taus[:, None] * (p1 - p0)[None, :])
    lo, hi = sorted((float(eps_from), float(eps_to)))
    value, rank = _transport_chain(chain, lo, hi, gap_tol)
    if eps_from > eps_to:
        value = np.conj(value)
    return lines.LineElement(
        complex(value), (float(eps_from), float(eps_to)), rank, tuple(p0), tuple(p1)
    )


# -- holonomy assembly ----------------------------------------------------------------


class _Assembly:
    """Accumulates curving, transports, and vertex line slots over a face set."""

    def __init__(self, phi, mesh: SurfaceMesh, gap_tol: float, subdivisions: int) -> None:
        self.phi = phi
        self.mesh = mesh
        self.gap_tol = gap_tol
        self.subdivisions = max(int(subdivisions), 1)
        self.factor = 1.0 + 0.0j
        self.curving = 0.0
        self.arrows: dict[tuple[int, int], list[tuple[float, float]]] = {}
        self.vertex_data: dict[tuple[int, int], VertexData] = {}
        self.n_transports = 0

    def load_vertices(self, keys: list[tuple[int, int]]) -> None:
        pts = np.array([self.mesh.vertex_point(i, j) for i, j in keys])
        self.vertex_data.update(dict(zip(keys, _vertex_data(self.phi, pts))))

    def add_curving(
        self,
        faces: list[tuple[int, int]],
        lift: GerbeLift,
        *,
        t_order: int,
        k_order: int,
        fd_step: float,
    ) -> None:
        rects = np.array([self.mesh.face_rect(i, j) for i, j in faces])
        eps = np.array([lift.eps(i, j) for i, j in faces])
        vals = _curving_faces(
            self.phi, rects, eps,
            t_order=t_order, k_order=k_order, fd_step=fd_step, gap_tol=self.gap_tol,
        )
        self.curving += float(np.sum(vals))

    def add_transport(
        self,
        start: tuple[int, int],
        end: tuple[int, int],
        start_pt: tuple[float, float],
        end_pt: tuple[float, float],
        pair: tuple[float, float],
    ) -> None:
        """Transport the ordered-pair line along the directed segment start -> end.

        Leaves the arrow ``pair[0] -> pair[1]`` at ``end``, the reversed arrow
        at ``start``, and multiplies the accumulated coefficient. Equal angles
        name the trivial line; nothing is recorded then.
        """
        p, q = pair
        if p == q:
            return
        a = np.asarray(start_pt, dtype=float)
        b = np.asarray(end_pt, dtype=float)
        taus = np.linspace(0.0, 1.0, self.subdivisions + 1)[1:-1]
        chain = [self.vertex_data[start]]
        chain.extend(_vertex_data(self.phi, a[None, :] + taus[:, None] * (b - a)[None, :]))
        chain.append(self.vertex_data[end])
        lo, hi = sorted((p, q))
        value, rank = _transport_chain(chain, lo, hi, self.gap_tol)
        if p > q:
            value = np.conj(value)
        self.factor *= value
        self.arrows.setdefault(end, []).append((p, q))
        self.arrows.setdefault(start, []).append((q, p))
        if rank:
            self.n_transports += 1

    def fold(self, key: tuple[int, int]) -> tuple[float, float] | None:
        arrows = self.arrows.pop(key, [])
        if not arrows:
            return None
        fac, residual = lines.fold_vertex(self.vertex_data[key], arrows, self.gap_tol)
        self.factor *= fac
        return residual

    def same_class(self, key: tuple[int, int], x: float, y: float) -> bool:
        """Gap-equivalence of two branch angles at one vertex."""
        lo, hi = (x, y) if x <= y else (y, x)
        return self.vertex_data[key].rank(lo, hi) == 0


def surface_holonomy(
    phi,
    mesh: SurfaceMesh | None = None,
    lift: GerbeLift | None = None,
    *,
    n: int = 24,
    lengths: tuple[float, float] = (TWO_PI, TWO_PI),
    gap_tol: float = GAP_TOL,
    subdivisions: int = 8,
    t_order: int = 8,
    k_order: int = 3,
    fd_step: float = 1e-5,
    max_refine: int = 4,
    debug: dict | None = None,
) -> complex:
    """Holonomy of the basic gerbe along a unitary map of the 2-torus.

    ``phi`` maps point batches of shape ``(M, 2)`` (coordinates in
    ``[0, L0) x [0, L1)``) to unitaries ``(M, N, N)`` and must be periodic.
    Without an explicit mesh a uniform ``n x n`` mesh is used; without an
    explicit lift, face angles are chosen automatically (widest spectral arc
    per face) with up to ``max_refine`` rounds of refinement. The result has
    unit modulus; it is independent of the lift choice and, up to quadrature
    error, of the mesh.
    """
    if mesh is None:
        if lift is not None:
            raise InputError("an explicit lift needs an explicit mesh")
        mesh = SurfaceMesh.torus(n, n, lengths)
    if lift is None:
        mesh, lift, _ = build_surface_lift(
            phi, mesh, gap_tol=gap_tol, max_refine=max_refine, k_order=k_order
        )
    n0, n1 = mesh.shape
    asm = _Assembly(phi, mesh, gap_tol, subdivisions)
    keys = [(i, j) for i in range(n0) for j in range(n1)]
    asm.load_vertices(keys)
    asm.add_curving(keys, lift, t_order=t_order, k_order=k_order, fd_step=fd_step)

    b0, b1 = mesh.breaks0, mesh.breaks1
    for i in range(n0):
        for j in range(n1):
            # e1(i, j): from (i, j) to (i+1, j); owned by face (i, j) above it,
            # traversed against its coordinate direction (non-owner below).
            asm.add_transport(
                ((i + 1) % n0, j), (i, j),
                (float(b0[i + 1]), float(b1[j])), (float(b0[i]), float(b1[j])),
                (lift.eps(i, (j - 1) % n1), lift.eps(i, j)),
            )
            # e2(i, j): from (i, j) to (i, j+1); owned by face (i-1, j) to its
            # left, traversed against its coordinate direction (non-owner right).
            asm.add_transport(
                (i, (j + 1) % n1), (i, j),
                (float(b0[i]), float(b1[j + 1])), (float(b0[i]), float(b1[j])),
                (lift.eps(i, j), lift.eps((i - 1) % n0, j)),
            )
    for key in keys:
        residual = asm.fold(key)
        if residual is not None:
            raise AssertionError(
                f"uncancelled line slot {residual} at interior vertex {key}"
            )
    result = complex(np.exp(1j * asm.curving) * asm.factor)
    if abs(abs(result) - 1.0) > 1e-6:
        raise AssertionError(f"holonomy modulus drifted to {abs(result):.9f}")
    if debug is not None:
        debug.update(
            mesh=mesh, lift=lift, curving=asm.curving, transports=asm.n_transports
        )
    return result


# -- equivariant square root ------------------------------------------------------------


def _check_equivariance(phi, theta: AntiUnitary, lengths, tol: float, grid: int = 8) -> None:
    axes = [np.arange(grid) * (float(l) / grid) for l in lengths]
    pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, len(axes))
    v = _eval_unitary(phi, pts)
    v_inv = _eval_unitary(phi, np.mod(-pts, np.asarray(lengths, dtype=float)[None, :]))
    dev = float(np.max(np.abs(v_inv - theta.conjugate(v))))
    if dev > tol:
        raise InputError(
            f"field is not inversion-equivariant: deviation {dev:.3e} exceeds {tol:.1e}"
        )


def _half_phase_parity(phi, p0: Array, p1: Array, *, init: int = 32) -> int:
    """Parity of the winding of ``det(phi)`` along the straight segment p0 -> p1.

    Both endpoints must be inversion-fixed points, where ``det = 1``; the total
    tracked phase change is then a multiple of ``2*pi`` and its parity flips
    the square-root branch. Sampling is doubled until consecutive increments
    stay below ``pi/2``.
    """
    m = int(init)
    for _ in range(14):
        taus = np.linspace(0.0, 1.0, m + 1)
        pts = p0[None, :] + taus[:, None] * (p1 - p0)[None, :]
        dets = np.linalg.det(np.asarray(phi(pts), dtype=complex))
        steps = np.angle(dets[1:] / dets[:-1])
        if float(np.max(np.abs(steps))) < 0.5 * np.pi:
            total = float(np.sum(steps))
            wind = total / TWO_PI
            if abs(wind - round(wind)) > 1e-2:
                raise AssertionError(
                    f"determinant winding {wind:.4f} along a branch-tracking path "
                    "is not an integer; its endpoints are not determinant-1 points"
                )
            return int(round(wind)) % 2
        m *= 2
    raise MeshTooCoarse("determinant phase varies too fast to track its square root")


def sqrt_holonomy_equivariant(
    phi,
    theta: AntiUnitary,
    mesh: SurfaceMesh | None = None,
    *,
    n: int = 24,
    lengths: tuple[float, float] = (TWO_PI, TWO_PI),
    half_axis: int = 0,
    ell_upper: bool = False,
    gap_tol: float = GAP_TOL,
    subdivisions: int = 8,
    t_order: int = 8,
    k_order: int = 3,
    fd_step: float = 1e-5,
    max_refine: int = 4,
    equiv_tol: float = EQUIV_TOL,
    debug: dict | None = None,
) -> complex:
    """Square root of the gerbe holonomy of an inversion-equivariant field.

    Requires ``phi(-x) = theta phi(x) theta^{-1}`` with ``theta^2 = -1``. The
    assembly runs over the half-domain ``0 <= x_{half_axis} <= L/2``: curving
    and interior transports as in :func:`surface_holonomy`, per-edge boundary
    lifts in ``(-pi, 0)`` along the arc ``l`` of each boundary circle (the
    mirrored arc uses the partner angles ``-eps - 2*pi``), junction residuals
    between unequal neighbouring boundary lifts dropped at factor one, and
    Pfaffian anchors at the four inversion-fixed vertices with the
    time-reversal branch ``sigma in {1, 1j}`` fixed by determinant-winding
    parities. The square of the result is the full-torus holonomy; for a band
    flattening ``1 - 2P`` of a time-reversal-symmetric occupied projector it
    equals the Kane-Mele sign.
    """
    if theta.squares_to != -1:
        raise InputError("the equivariant square root needs theta^2 = -1")
    if mesh is None:
        mesh = SurfaceMesh.torus(n, n, lengths)
    if not mesh.symmetric:
        raise InputError("the equivariant square root needs an inversion-symmetric mesh")
    _check_equivariance(phi, theta, mesh.lengths, equiv_tol)
    mesh, lift, edge_eps = build_surface_lift(
        phi, mesh, gap_tol=gap_tol, max_refine=max_refine, k_order=k_order,
        domain_axis=half_axis, ell_upper=ell_upper,
    )
    hd = mesh.half(half_axis, ell_upper=ell_upper)
    axis, free = half_axis, 1 - half_axis
    ba = mesh.breaks(axis)
    bf = mesh.breaks(free)
    m = hd.m
    nf = hd.n_free

    def vkey(row: int, j: int) -> tuple[int, int]:
        return hd._vertex(row, j)

    def vpt(row: int, j: int) -> tuple[float, float]:
        out = [0.0, 0.0]
        out[axis] = float(ba[row])
        out[free] = float(bf[j])
        return (out[0], out[1])

    def face_key(row_cell: int, j_cell: int) -> tuple[int, int]:
        j_cell = j_cell % nf
        return (row_cell, j_cell) if axis == 0 else (j_cell, row_cell)

    def face_eps(row_cell: int, j_cell: int) -> float:
        i, j = face_key(row_cell, j_cell)
        return lift.eps(i, j)

    asm = _Assembly(phi, mesh, gap_tol, subdivisions)
    keys = sorted({vkey(r, j) for r in range(m + 1) for j in range(nf)})
    asm.load_vertices(keys)
    asm.add_curving(hd.faces(), lift, t_order=t_order, k_order=k_order, fd_step=fd_step)

    # Interior edges along the halved axis (vertex rows 0..m-1 -> 1..m). The
    # owner face sits on the +free side for half_axis 0 and on the -free side
    # for half_axis 1 (the mesh owner rules expressed in (row, free) indices);
    # traversal always runs against the coordinate direction (non-owner side).
    for row in range(m):
        for j in range(nf):
            e_plus = face_eps(row, j)
            e_minus = face_eps(row, (j - 1) % nf)
            own, non = (e_plus, e_minus) if axis == 0 else (e_minus, e_plus)
            asm.add_transport(
                vkey(row + 1, j), vkey(row, j),
                vpt(row + 1, j), vpt(row, j),
                (non, own),
            )
    # Interior edges along the free axis at interior rows 1..m-1. The owner
    # face sits on the -halved side for half_axis 0 and on the +halved side
    # for half_axis 1.
    for row in range(1, m):
        for j in range(nf):
            e_plus = face_eps(row, j)
            e_minus = face_eps(row - 1, j)
            own, non = (e_minus, e_plus) if axis == 0 else (e_plus, e_minus)
            asm.add_transport(
                vkey(row, (j + 1) % nf), vkey(row, j),
                vpt(row, j + 1), vpt(row, j),
                (non, own),
            )

    # Boundary edges: each l-edge carries its window lift, the mirrored arc
    # the equivariant partner angles. Every boundary edge is traversed with
    # the orientation induced by its unique adjacent face in the domain and
    # carries the ordered pair (face angle, edge angle).
    boundary_lift: dict[tuple[int, int], float] = {}
    for circle in hd.circles:
        for j in range(nf):
            if j in circle.ell_edges:
                boundary_lift[(circle.row, j)] = edge_eps[(circle.row, j)]
            else:
                partner = edge_eps[(circle.row, hd.mirror_edge(j))]
                boundary_lift[(circle.row, j)] = -partner - TWO_PI
    for circle in hd.circles:
        row = circle.row
        face_row = 0 if row == 0 else m - 1
        for j in range(nf):
            pair = (face_eps(face_row, j), boundary_lift[(row, j)])
            if circle.direction < 0:
                start, end = vkey(row, j + 1), vkey(row, j)
                spt, ept = vpt(row, j + 1), vpt(row, j)
            else:
                start, end = vkey(row, j), vkey(row, j + 1)
                spt, ept = vpt(row, j), vpt(row, j + 1)
            asm.add_transport(start, end, spt, ept, pair)

    # Anchor pairs at the fixed vertices: the incident l-edge angle and its
    # equivariant partner, ordered (lower, upper).
    anchor_pair: dict[tuple[int, int], tuple[float, float]] = {}
    is_final: dict[tuple[int, int], bool] = {}
    for circle in hd.circles:
        for v, final in ((circle.v_init, False), (circle.v_final, True)):
            jv = v[free]
            ell = [
                (circle.row, e)
                for e in {jv % nf, (jv - 1) % nf}
                if e in circle.ell_edges
            ]
            if len(ell) != 1:
                raise AssertionError("a fixed vertex is not an endpoint of the l-arc")
            eps_l = edge_eps[ell[0]]
            anchor_pair[v] = (-eps_l - TWO_PI, eps_l)
            is_final[v] = final

    # Square-root branch of det(phi): +1 at the origin, propagated to the
    # other fixed vertices along the halved axis and along each half circle.
    zsign: dict[tuple[int, int], int] = {vkey(0, 0): 1}
    parity = _half_phase_parity(phi, np.asarray(vpt(0, 0)), np.asarray(vpt(m, 0)))
    zsign[vkey(m, 0)] = -1 if parity else 1
    for circle in hd.circles:
        p_from = np.asarray(vpt(circle.row, 0))
        p_to = np.asarray(vpt(circle.row, nf // 2))
        parity = _half_phase_parity(phi, p_from, p_to)
        z0 = zsign[vkey(circle.row, 0)]
        zsign[vkey(circle.row, nf // 2)] = -z0 if parity else z0

    interior_rows = set(range(1, m))
    anchors_debug: dict[tuple[int, int], tuple[int, complex, int]] = {}
    junctions_debug: list[tuple[tuple[int, int], tuple[float, float]]] = []
    junction_res: dict[tuple[int, int], tuple[float, float]] = {}
    for key in keys:
        residual = asm.fold(key)
        if key in anchor_pair:
            lo, hi = anchor_pair[key]
            if residual is None:
                # all incident transports were label-trivial or closed; the
                # anchor slot orientation comes from the traversal direction
                power = 1 if is_final[key] else -1
            elif asm.same_class(key, residual[0], lo) and asm.same_class(
                key, residual[1], hi
            ):
                power = 1
            elif asm.same_class(key, residual[0], hi) and asm.same_class(
                key, residual[1], lo
            ):
                power = -1
            else:
                raise AssertionError(
                    f"residual slot {residual} at fixed vertex {key} does not "
                    f"match the anchor pair {(lo, hi)}"
                )
            if residual is not None and power != (1 if is_final[key] else -1):
                raise AssertionError(
                    f"anchor slot orientation at {key} contradicts the boundary "
                    "traversal direction"
                )
            frame = asm.vertex_data[key].frame(lo, hi, gap_tol)
            pf = lines.pfaffian_anchor(frame, theta)
            sigma = 1.0 + 0.0j if zsign[key] == 1 else 1.0j
            anchor = sigma * complex(pf)
            asm.factor *= 1.0 / anchor if power == 1 else anchor
            anchors_debug[key] = (zsign[key], complex(pf), power)
        elif residual is not None:
            if key[axis] in interior_rows:
                raise AssertionError(
                    f"uncancelled line slot {residual} at interior vertex {key}"
                )
            # Junction between two boundary edges with different angles; its
            # line slot is contracted against the mirror vertex's slot below.
            jv = key[free]
            allowed = (
                boundary_lift[(key[axis], jv % nf)],
                boundary_lift[(key[axis], (jv - 1) % nf)],
            )
            for label in residual:
                if not any(asm.same_class(key, label, b) for b in allowed):
                    raise AssertionError(
                        f"residual slot {residual} at boundary vertex {key} does "
                        f"not match its edge lifts {allowed}"
                    )
            junction_res[key] = residual
            junctions_debug.append((key, residual))

    # Contract junction slots in mirror pairs: the equivariant identification
    # sends the canonical element u_1 ^ ... ^ u_k of the slot at the l-side
    # vertex to the dual of (theta u_k) ^ ... ^ (theta u_1) at the mirror
    # vertex, so each pair contributes the determinant pairing of the two
    # canonical frames.
    paired: set[tuple[int, int]] = set()
    for key, res in junction_res.items():
        jv = key[free]
        circle = next(c for c in hd.circles if c.row == key[axis])
        if jv % nf not in circle.ell_edges or (jv - 1) % nf not in circle.ell_edges:
            continue  # mirror-side member; handled from its l-side partner
        mkey = vkey(key[axis], (nf - jv) % nf)
        if mkey == key or mkey in anchor_pair or mkey not in junction_res:
            raise AssertionError(
                f"junction residual at {key} has no mirror partner at {mkey}"
            )
        mres = junction_res[mkey]
        ascending = res[0] < res[1]
        if ascending != (mres[0] < mres[1]):
            raise AssertionError(
                f"junction slots at {key}/{mkey} have incompatible orientations "
                f"{res}/{mres}"
            )
        paired.add(key)
        paired.add(mkey)
        lo, hi = sorted(res)
        mlo, mhi = sorted(mres)
        u = asm.vertex_data[key].frame(lo, hi, gap_tol)
        w = asm.vertex_data[mkey].frame(mlo, mhi, gap_tol)
        if u.shape[1] == 0 or u.shape[1] != w.shape[1]:
            raise AssertionError(
                f"junction slots at {key}/{mkey} have mismatched ranks "
                f"{u.shape[1]}/{w.shape[1]}"
            )
        theta_u = theta.matrix @ np.conj(u[:, ::-1])
        base = complex(np.linalg.det(theta_u.conj().T @ w))
        if abs(abs(base) - 1.0) > 1e-6:
            raise AssertionError(
                f"junction pairing at {key}/{mkey} is not unitary: |{base}|"
            )
        asm.factor *= base if ascending else np.conj(base)
    if paired != set(junction_res):
        raise AssertionError(
            f"unpaired junction residuals at {sorted(set(junction_res) - paired)}"
        )
    result = complex(np.exp(1j * asm.curving) * asm.factor)
    if abs(abs(result) - 1.0) > 1e-6:
        raise AssertionError(
            f"square-root holonomy modulus drifted to {abs(result):.9f}"
        )
    if debug is not None:
        debug.update(
            mesh=mesh, lift=lift, boundary_lift=boundary_lift, curving=asm.curving,
            transports=asm.n_transports, anchors=anchors_debug, zsign=zsign,
            junctions=junctions_debug,
        )
    return result


# -- winding density --------------------------------------------------------------------


def _pair_average(e: Array, axis: int, periodic: bool) -> Array:
    if periodic:
        return 0.5 * (e + np.roll(e, -1, axis=axis))
    lo = [slice(None)] * e.ndim
    hi = [slice(None)] * e.ndim
    lo[axis] = slice(0, -1)
    hi[axis] = slice(1, None)
    return 0.5 * (e[tuple(lo)] + e[tuple(hi)])


def wz_density_integral(
    field,
    shape,
    periodic,
    *,
    lengths=None,
    half_axis: int | None = None,
    unitary_tol: float = UNITARY_TOL,
    levels: int = 1,
) -> float:
    """Integral of the unitary winding density over a 3d box.

    ``field`` maps point batches ``(M, 3)`` to unitaries; each periodic axis is
    sampled on ``[0, L)`` with wrap-around (default ``L = 2*pi``), each
    interval axis on ``[0, L]`` inclusively (default ``L = 1``). Per grid cell
    the density is ``tr(E0 [E1, E2]) / (4*pi)`` built from the four-edge
    averages of the principal logarithms of nearest-neighbour transition
    unitaries along the axes in their given (right-handed) order; for a closed
    loop map the total is ``2*pi`` times its degree. Raises
    :class:`MeshTooCoarse` when a transition leaves the principal-branch disk
    (``|V^+ V' - 1| >= 1``).

    With ``half_axis`` the sum runs over the cells in the lower half of that
    axis only (the cell count along it must be even). ``levels > 1`` runs
    Richardson extrapolation in the squared cell size over the nested grids
    ``shape / 2**i``, removing one error order per extra level at ~14% extra
    cost; the cell counts must support the halvings.
    """
    shape = tuple(int(s) for s in shape)
    periodic = tuple(bool(p) for p in periodic)
    if len(shape) != 3 or len(periodic) != 3:
        raise InputError("the winding density needs a 3d shape and periodicity flags")
    if min(shape) < 2:
        raise InputError("the winding density needs at least 2 cells per axis")
    if lengths is None:
        lengths = tuple(TWO_PI if p else 1.0 for p in periodic)
    lengths = tuple(float(l) for l in lengths)
    if half_axis is not None and shape[half_axis] % 2:
        raise InputError("the half-axis cell count must be even")
    if levels < 1:
        raise InputError("levels must be >= 1")
    if levels > 1:
        sums = []
        sub = shape
        for lev in range(levels):
            sums.append(
                wz_density_integral(
                    field, sub, periodic, lengths=lengths, half_axis=half_axis,
                    unitary_tol=unitary_tol, levels=1,
                )
            )
            if lev < levels - 1:
                if any(s % 2 or s < 4 for s in sub) or (
                    half_axis is not None and sub[half_axis] % 4
                ):
                    raise InputError(
                        f"cell counts {sub} cannot be halved for Richardson "
                        f"level {lev + 2}"
                    )
                sub = tuple(s // 2 for s in sub)
        for col in range(1, levels):
            f = 4.0 ** col
            sums = [
                (f * sums[i] - sums[i + 1]) / (f - 1.0)
                for i in range(levels - col)
            ]
        return float(sums[0])

    axes = [
        np.arange(shape[a] + (0 if periodic[a] else 1)) * (lengths[a] / shape[a])
        for a in range(3)
    ]
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    v = _eval_unitary(field, grid.reshape(-1, 3), tol=unitary_tol)
    nmat = v.shape[-1]
    v = v.reshape(grid.shape[:3] + (nmat, nmat))

    e_logs = []
    for a in range(3):
        if periodic[a]:
            v_cur = v
            v_next = np.roll(v, -1, axis=a)
        else:
            lo = [slice(None)] * 3
            hi = [slice(None)] * 3
            lo[a] = slice(0, -1)
            hi[a] = slice(1, None)
            v_cur = v[tuple(lo)]
            v_next = v[tuple(hi)]
        w = np.swapaxes(v_cur, -1, -2).conj() @ v_next
        lam, q = unitary_eig_batched(w)
        ang = np.angle(lam)
        reach = float(np.max(2.0 * np.abs(np.sin(0.5 * ang))))
        if reach >= 1.0:
            raise MeshTooCoarse(
                f"transitions along axis {a} reach distance {reach:.3f} from the "
                "identity; the principal logarithm needs a finer grid"
            )
        e_logs.append(np.einsum("...ij,...j,...kj->...ik", q, 1j * ang, q.conj()))

    cell = []
    for a in range(3):
        e = e_logs[a]
        for b in range(3):
            if b != a:
                e = _pair_average(e, b, periodic[b])
        cell.append(e)
    # Orientation: right-handed (x0, x1, x2) cells, normalised so that the
    # occupied-band pump t -> exp(2*pi*1j*t*P(k)) integrates to +2*pi times
    # the first Chern number of P.
    dens = np.trace(
        cell[0] @ (cell[2] @ cell[1] - cell[1] @ cell[2]), axis1=-2, axis2=-1
    )
    scale = max(1.0, float(np.max(np.abs(dens.real))))
    if float(np.max(np.abs(dens.imag))) > 1e-7 * scale:
        raise AssertionError("the winding density has a nonvanishing imaginary part")
    dens = dens.real / (4.0 * np.pi)
    if half_axis is not None:
        sl = [slice(None)] * 3
        sl[half_axis] = slice(0, shape[half_axis] // 2)
        dens = dens[tuple(sl)]
    return float(np.sum(dens))


# -- 3d index ----------------------------------------------------------------------------


@dataclass(frozen=True)
class Index3dResult:
    """Sign-valued 3d index with its rounding residual and raw complex value."""

    value: int
    residual: float
    raw: complex
    half_axis: int


def index3d(
    field,
    theta: AntiUnitary,
    mesh: VolumeMesh | None = None,
    *,
    shape: tuple[int, int, int] = (24, 24, 24),
    lengths: tuple[float, float, float] = (TWO_PI, TWO_PI, TWO_PI),
    half_axis: int = 0,
    gap_tol: float = GAP_TOL,
    subdivisions: int = 8,
    t_order: int = 8,
    k_order: int = 3,
    max_refine: int = 4,
    equiv_tol: float = EQUIV_TOL,
    debug: dict | None = None,
) -> Index3dResult:
    """Z2-valued index of an inversion-equivariant unitary field on a 3-torus.

    Requires ``field(-x) = theta field(x) theta^{-1}`` (coordinates modulo the
    axis lengths) with ``theta^2 = -1``. Computed over the half-domain along
    ``half_axis``: the winding-density integral over the half-volume combines
    with the square-root holonomies of the two inversion-invariant boundary
    slices (the upper slice enters directly, the lower one inverted; the slice
    axes are taken in cyclic order, so both slices carry the induced
    orientation). The raw complex value rounds to ``+-1``; ``residual`` is the
    distance to that sign.
    """
    if mesh is None:
        mesh = VolumeMesh(
            tuple(int(s) for s in shape), tuple(float(l) for l in lengths)
        )
    if theta.squares_to != -1:
        raise InputError("the 3d index needs theta^2 = -1")
    for a in range(3):
        if mesh.shape[a] % 2:
            raise InputError("the 3d index needs even cell counts")
        if not mesh.periodic[a]:
            raise InputError("the 3d index is defined on closed (periodic) domains")
    _check_equivariance(field, theta, mesh.lengths, equiv_tol, grid=6)

    wz_half = wz_density_integral(
        field, mesh.shape, mesh.periodic, lengths=mesh.lengths, half_axis=half_axis
    )
    axis_b, axis_c = mesh.slice_axes(half_axis)

    def slice_phi(value: float):
        def fun(pts: Array) -> Array:
            pts = np.asarray(pts, dtype=float)
            full = np.empty(pts.shape[:-1] + (3,))
            full[..., half_axis] = value
            full[..., axis_b] = pts[..., 0]
            full[..., axis_c] = pts[..., 1]
            return field(full)

        return fun

    smesh = SurfaceMesh.torus(
        mesh.shape[axis_b], mesh.shape[axis_c],
        (mesh.lengths[axis_b], mesh.lengths[axis_c]),
    )
    common = dict(
        gap_tol=gap_tol, subdivisions=subdivisions, t_order=t_order,
        k_order=k_order, max_refine=max_refine, equiv_tol=equiv_tol,
    )
    dbg_up: dict | None = {} if debug is not None else None
    dbg_lo: dict | None = {} if debug is not None else None
    sq_upper = sqrt_holonomy_equivariant(
        slice_phi(0.5 * mesh.lengths[half_axis]), theta, smesh, debug=dbg_up, **common
    )
    sq_lower = sqrt_holonomy_equivariant(
        slice_phi(0.0), theta, smesh, debug=dbg_lo, **common
    )
    raw = complex(np.exp(0.5j * wz_half) * sq_upper * np.conj(sq_lower))
    value = 1 if raw.real > 0 else -1
    residual = abs(raw - value)
    if debug is not None:
        debug.update(
            wz_half=wz_half, sqrt_upper=sq_upper, sqrt_lower=sq_lower,
            upper=dbg_up, lower=dbg_lo,
        )
    return Index3dResult(value, float(residual), raw, half_axis)
