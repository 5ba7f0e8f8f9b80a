"""Topological invariants of static band structures.

Chern numbers come from the plaquette field-strength method (integer by
construction, cross-checked against a direct curvature discretization). The
Kane-Mele invariants are computed from the pfaffian/sqrt-det formula evaluated in
a smooth global gauge built by :func:`smooth_trivialization`; an independent
Wannier-center-flow count over Wilson-loop spectra (:func:`lattice_z2`) serves as
a second route and is what ``--oracle`` exposes.

All grids are square ``n x n`` over ``[0, 2*pi)^d`` with ``n`` even, so the four
(2d) or eight (3d) time-reversal invariant momenta are grid points.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from . import numeric
from .errors import InputError, MeshTooCoarse, NoGap, Obstruction
from .model import AntiUnitary, CrystalModel

Array = np.ndarray

TWO_PI = 2.0 * np.pi

ENERGY_GAP_TOL = 1e-8


# -- fields -----------------------------------------------------------------------


@dataclass
class HamiltonianField:
    """Batched Bloch-Hamiltonian sampler ``(M, dim) -> (M, N, N)`` with metadata."""

    fun: Callable[[Array], Array]
    dim: int
    n: int
    n_occ: int
    theta: AntiUnitary | None = None

    def __call__(self, pts: Array) -> Array:
        return np.asarray(self.fun(np.asarray(pts, dtype=float)), dtype=complex)

    def frames(self, pts: Array) -> Array:
        """Valence frames (lowest ``n_occ`` eigenvectors), shape (M, N, n_occ)."""
        w, v = np.linalg.eigh(self(pts))
        gap = np.min(w[..., self.n_occ] - w[..., self.n_occ - 1])
        if gap < ENERGY_GAP_TOL:
            raise NoGap(f"valence gap {gap:.3e} below tolerance on sampled grid")
        return v[..., : self.n_occ]

    def projector(self, pts: Array) -> Array:
        f = self.frames(pts)
        return f @ np.swapaxes(f, -1, -2).conj()


def as_field(system, n_occ: int | None = None) -> HamiltonianField:
    if isinstance(system, HamiltonianField):
        return system
    if isinstance(system, CrystalModel):
        occ = system.n_orbitals // 2 if n_occ is None else n_occ
        if not 0 < occ < system.n_orbitals:
            raise InputError(f"occupied band count {occ} out of range")
        return HamiltonianField(
            system.bloch, system.dimension, system.n_orbitals, occ, system.time_reversal
        )
    raise InputError(f"cannot interpret {type(system).__name__} as a Bloch field")


def slice_field(field: HamiltonianField, axis: int, value: float) -> HamiltonianField:
    """Restrict a 3d field to the 2d torus ``k[axis] = value`` (remaining axes in order)."""
    if field.dim != 3:
        raise InputError("slice_field expects a 3d field")

    def fun(pts: Array) -> Array:
        pts = np.asarray(pts, dtype=float)
        full = np.insert(pts, axis, value, axis=-1)
        return field.fun(full)

    return HamiltonianField(fun, 2, field.n, field.n_occ, field.theta)


def _check_grid(grid: int) -> int:
    if grid < 8 or grid % 2:
        raise InputError(f"grid must be even and >= 8, got {grid}")
    return int(grid)


def _grid_points(n: int, dim: int) -> Array:
    axes = [np.arange(n) * (TWO_PI / n)] * dim
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=-1)


# -- Chern number -----------------------------------------------------------------


@dataclass(frozen=True)
class ChernResult:
    value: int
    residual: float
    estimate: float
    grid: int


def chern_number(system, grid: int = 24, n_occ: int | None = None) -> ChernResult:
    """First Chern number of the valence bundle on a 2d Brillouin zone.

    Primary route: plaquette field strength from overlap-determinant link
    variables — the lattice sum is an exact integer whenever every plaquette
    holds less than pi of curvature. Second route: the curvature trace
    ``i tr(P [dP, dP]) / 2*pi`` by central differences on the same grid; its
    distance to the integer is reported as the residual.
    """
    field = as_field(system, n_occ)
    if field.dim != 2:
        raise InputError("chern_number expects a 2d system")
    n = _check_grid(grid)
    frames = field.frames(_grid_points(n, 2)).reshape(n, n, field.n, field.n_occ)

    roll1 = np.roll(frames, -1, axis=0)
    roll2 = np.roll(frames, -1, axis=1)
    l1 = np.linalg.det(np.swapaxes(frames, -1, -2).conj() @ roll1)
    l2 = np.linalg.det(np.swapaxes(frames, -1, -2).conj() @ roll2)
    plaq = l1 * np.roll(l2, -1, axis=0) * np.conj(np.roll(l1, -1, axis=1)) * np.conj(l2)
    # the plaquette phases accumulate -h^2 * curvature, hence the overall sign
    total = -float(np.sum(np.angle(plaq))) / TWO_PI
    value = round(total)
    if abs(total - value) > 1e-8:
        raise MeshTooCoarse(
            f"plaquette Chern sum {total:.6f} is not an integer; refine the grid"
        )

    proj = frames @ np.swapaxes(frames, -1, -2).conj()
    h = TWO_PI / n

    def diff4(p, axis):
        return (
            -np.roll(p, -2, axis=axis)
            + 8 * np.roll(p, -1, axis=axis)
            - 8 * np.roll(p, 1, axis=axis)
            + np.roll(p, 2, axis=axis)
        ) / (12 * h)

    d1 = diff4(proj, 0)
    d2 = diff4(proj, 1)
    comm = d1 @ d2 - d2 @ d1
    dens = 1j * np.trace(proj @ comm, axis1=-2, axis2=-1)
    estimate = float(np.sum(dens.real)) * h * h / TWO_PI
    return ChernResult(int(value), abs(estimate - value), estimate, n)


def degree_of_loop_map(field, shape: Sequence[int], periodic: Sequence[bool]) -> tuple[int, float]:
    """Degree of a map into U(N) from a 3d domain, via the winding-density integral.

    ``field`` takes points of the (possibly non-periodic) box ``[0, 2*pi)`` per
    periodic axis / ``[0, 1]`` per interval axis, as produced by the volume mesh
    in :mod:`toposcope.gerbe`. Returns the rounded degree and the raw residual.
    """
    from . import gerbe

    total = gerbe.wz_density_integral(field, shape, periodic)
    deg = total / TWO_PI
    return round(deg), float(abs(deg - round(deg)))


# -- smooth trivialization ---------------------------------------------------------


@dataclass
class Frame:
    """Globally smooth periodic valence frame on an ``n x n`` grid.

    ``values[i, j]`` is an ``(N, n_occ)`` orthonormal frame at ``k = 2*pi*(i, j)/n``;
    periodicity is by index wrap-around (the stored field IS the torus field).
    """

    values: Array
    grid: int

    def overlap_phase_bound(self) -> float:
        worst = 0.0
        for axis in (0, 1):
            nxt = np.roll(self.values, -1, axis=axis)
            ov = np.swapaxes(self.values, -1, -2).conj() @ nxt
            worst = max(worst, float(np.max(np.abs(np.angle(np.linalg.det(ov))))))
        return worst


def _polar(a: Array) -> Array:
    """Unitary polar factor of full-column-rank matrices (batched)."""
    u, _, vh = np.linalg.svd(a, full_matrices=False)
    return u @ vh


def _transport(proj_next: Array, frame: Array) -> Array:
    return _polar(proj_next @ frame)


def _principal_log_unitary(w: Array) -> Array:
    lam, q = numeric.unitary_eig(w)
    ang = np.angle(lam)
    return (q * (1j * ang)[None, :]) @ q.conj().T


def _slerp(v: Array, r: Array, tau: float) -> Array:
    """Great-circle interpolation on the unit sphere of C^m viewed as R^(2m)."""
    c = np.clip(np.sum((v.conj() * r).real, axis=-1), -1.0, 1.0)
    chi = np.arccos(c)[..., None]
    small = chi[..., 0] < 1e-7
    denom = np.where(small[..., None], 1.0, np.sin(chi))
    out = (np.sin((1.0 - tau) * chi) * v + np.sin(tau * chi) * r) / denom
    out = np.where(small[..., None], (1.0 - tau) * v + tau * r, out)
    return out / np.linalg.norm(out, axis=-1, keepdims=True)


def _rotation_between(a: Array, b: Array) -> Array:
    """Unitary moving ``a`` to ``b``, identity on their complement (batched rows).

    Only safe for nearby endpoints (callers substep along geodesics); the
    two-plane block is ``[[c, -s], [s, conj(c)]]`` with ``c = <a, b>``.
    """
    m = a.shape[-1]
    c = np.sum(a.conj() * b, axis=-1)
    resid = b - c[..., None] * a
    s = np.linalg.norm(resid, axis=-1)
    eye = np.broadcast_to(np.eye(m, dtype=complex), a.shape[:-1] + (m, m)).copy()
    tiny = s < 1e-12
    p = np.where(tiny[..., None], 0.0, resid / np.where(tiny, 1.0, s)[..., None])
    aa = a[..., :, None] * a.conj()[..., None, :]
    pp = p[..., :, None] * p.conj()[..., None, :]
    pa = p[..., :, None] * a.conj()[..., None, :]
    ap = a[..., :, None] * p.conj()[..., None, :]
    cc = c[..., None, None]
    ss = s[..., None, None]
    return eye + (cc - 1.0) * aa + (cc.conj() - 1.0) * pp + ss * pa - ss * ap


def _arc_rotation(v: Array, r: Array, tau: float, substeps: int = 8) -> Array:
    """Rotation carrying ``v`` to ``slerp(v, r, tau)`` as a product of short steps."""
    out = None
    prev = v
    for s in range(1, substeps + 1):
        nxt = _slerp(v, r, tau * s / substeps)
        step = _rotation_between(prev, nxt)
        out = step if out is None else step @ out
        prev = nxt
    return out


class _LoopContraction:
    """Explicit null-homotopy of a det-winding-free loop in U(m).

    The loop is contracted column by column: slerp the leading column to a
    generic fixed target, rotate the target onto the basis vector by a fixed
    rotation, recurse on the unitary complement. Sampling the reversed
    contraction gives ``g(u)`` with ``g(0) = 1`` and ``g(1) = loop``.
    """

    def __init__(self, loop: Array) -> None:
        nj, m, _ = loop.shape
        self.loop = loop
        self.m = m
        self.stages: list[tuple] = []
        cumulative = [np.broadcast_to(np.eye(m, dtype=complex), loop.shape).copy()]
        current = loop.copy()
        for off in range(m - 1):
            sub = current[:, off:, off]
            v = sub / np.linalg.norm(sub, axis=-1, keepdims=True)
            r = self._generic_target(v)
            self.stages.append(("perj", off, v, r))
            rot = self._embed(_arc_rotation(v, np.broadcast_to(r, v.shape), 1.0), off)
            current = rot @ current
            cumulative.append(rot @ cumulative[-1])
            e1 = np.zeros(m - off, dtype=complex)
            e1[0] = 1.0
            self.stages.append(("fixed", off, r, e1))
            rot2 = self._embed(
                _arc_rotation(r[None, :], e1[None, :], 1.0), off, broadcast=nj
            )
            current = rot2 @ current
            cumulative.append(rot2 @ cumulative[-1])
            current = _polar(current)
        self.cumulative = cumulative
        self.residual = float(np.max(np.abs(cumulative[-1] @ loop - np.eye(m))))

    def _embed(self, block: Array, off: int, broadcast: int | None = None) -> Array:
        if broadcast is not None and block.shape[0] == 1:
            block = np.broadcast_to(block, (broadcast,) + block.shape[1:])
        nj = block.shape[0]
        out = np.broadcast_to(np.eye(self.m, dtype=complex), (nj, self.m, self.m)).copy()
        out[:, off:, off:] = block
        return out

    @staticmethod
    def _generic_target(v: Array) -> Array:
        mdim = v.shape[-1]
        for attempt in range(64):
            gen = np.random.default_rng(977 + attempt)
            r = gen.normal(size=mdim) + 1j * gen.normal(size=mdim)
            if mdim == 1:
                r = np.array([1.0 + 0j])
            elif attempt < 4:
                r[0] += 2.0  # prefer landing near the basis vector the stage ends on
            r = r / np.linalg.norm(r)
            real_inner = np.sum((v.conj() * r).real, axis=-1)
            cplx_inner = np.abs(np.sum(v.conj() * r, axis=-1))
            if np.min(real_inner) > -0.8 and np.max(cplx_inner) < 0.97 or mdim == 1:
                return r
        raise MeshTooCoarse("could not pick a generic contraction target")

    def sample(self, u: float) -> Array:
        """Contraction operator M(u): M(0) = 1, ``M(1) @ loop ~ 1``."""
        nstage = len(self.stages)
        if nstage == 0:
            return self.cumulative[0]
        pos = min(max(u, 0.0), 1.0) * nstage
        idx = min(int(pos), nstage - 1)
        frac = pos - idx
        kind, off, a, b = self.stages[idx]
        if kind == "perj":
            partial = self._embed(_arc_rotation(a, np.broadcast_to(b, a.shape), frac), off)
        else:
            partial = self._embed(
                _arc_rotation(a[None, :], b[None, :], frac), off, broadcast=self.loop.shape[0]
            )
        return partial @ self.cumulative[idx]

    def path(self, u: float) -> Array:
        """g(u) with g(0) = identity and g(1) = loop (both up to ~1e-13)."""
        return self.sample(1.0 - u) @ self.loop


def smooth_trivialization(system, grid: int = 48, n_occ: int | None = None) -> Frame:
    """Globally smooth, exactly periodic valence frame field on the 2d torus.

    Parallel transport builds the frames column-by-column and row-by-row; the
    residual row seam — a loop of unitaries whose determinant winding is the
    Chern number — is then spread over the torus using an explicit
    null-homotopy. Raises :class:`Obstruction` when the winding (the Chern
    number) is nonzero, and :class:`MeshTooCoarse` when a single grid step
    rotates the determinant by pi/2 or more.
    """
    field = as_field(system, n_occ)
    if field.dim != 2:
        raise InputError("smooth_trivialization expects a 2d system")
    n = _check_grid(grid)
    frames = field.frames(_grid_points(n, 2)).reshape(n, n, field.n, field.n_occ)
    proj = frames @ np.swapaxes(frames, -1, -2).conj()
    m = field.n_occ

    # 1. seed column k1 = 0: transport along k2, spread the closing defect
    col = [frames[0, 0]]
    for j in range(1, n):
        col.append(_transport(proj[0, j], col[-1]))
    w_close = col[0].conj().T @ _transport(proj[0, 0], col[-1])
    logw = _principal_log_unitary(w_close)
    for j in range(n):
        col[j] = col[j] @ _expm(-(j / n) * logw)

    # 2. rows: transport along k1 from the seeded column
    full = np.empty_like(frames)
    for j in range(n):
        full[0, j] = col[j]
    for i in range(1, n):
        full[i] = _transport(proj[i], full[i - 1])

    # 3. row seams V(j) and their determinant phase alpha(j)
    seam = np.empty((n, m, m), dtype=complex)
    for j in range(n):
        seam[j] = full[0, j].conj().T @ _transport(proj[0, j], full[n - 1, j])
    dets = np.linalg.det(seam)
    steps = np.angle(dets / np.roll(dets, 1))
    if np.max(np.abs(steps)) > 0.5 * np.pi:
        raise MeshTooCoarse(
            f"seam determinant steps up to {np.max(np.abs(steps)):.3f} rad; refine"
        )
    alpha = np.angle(dets[0]) + np.concatenate([[0.0], np.cumsum(steps[1:])])
    winding = np.sum(steps) / TWO_PI
    if abs(winding - round(winding)) > 1e-6:
        raise MeshTooCoarse("seam determinant winding is not an integer")
    if round(winding) != 0:
        raise Obstruction(
            f"valence bundle has Chern number {-round(winding):+d}; "
            "no global smooth frame exists"
        )

    su_loop = seam * np.exp(-1j * alpha / m)[:, None, None]
    contraction = _LoopContraction(np.linalg.inv(su_loop))
    if contraction.residual > 1e-8:
        raise MeshTooCoarse(
            f"seam contraction residual {contraction.residual:.3e}"
        )
    for i in range(n):
        tau = i / n
        g = contraction.path(tau) * np.exp(-1j * tau * alpha / m)[:, None, None]
        full[i] = full[i] @ g

    frame = Frame(full, n)
    bound = frame.overlap_phase_bound()
    if bound >= 0.5 * np.pi:
        raise MeshTooCoarse(f"frame overlap phase {bound:.3f} rad; refine the grid")
    return frame


def _expm(x: Array) -> Array:
    """Matrix exponential of small anti-Hermitian matrices via eigh of -1j*x."""
    return numeric.expm_i_hermitian(1j * x)


# -- sewing matrix and Kane-Mele invariants ---------------------------------------


def sewing_matrix(frame: Frame, theta: AntiUnitary) -> Array:
    """Overlaps ``w_ab(k) = <psi_a(-k) | theta psi_b(k)>`` on the frame's grid."""
    vals = frame.values
    n = frame.grid
    idx = (-np.arange(n)) % n
    at_minus = vals[np.ix_(idx, idx)]
    th = np.einsum("ab,ijbc->ijac", theta.matrix, vals.conj())
    return np.swapaxes(at_minus, -1, -2).conj() @ th


@dataclass(frozen=True)
class Z2Result:
    value: int
    deltas: tuple[float, ...]
    residual: float
    grid: int


def _km_from_sewing(w: Array, n: int) -> Z2Result:
    half = n // 2
    trims = [(0, 0), (half, 0), (0, half), (half, half)]
    pf = {}
    for t in trims:
        wt = w[t]
        asym = float(np.max(np.abs(wt + wt.T)))
        if asym > 1e-8:
            raise MeshTooCoarse(
                f"sewing matrix not antisymmetric at TRIM {t} (residual {asym:.3e})"
            )
        pf[t] = numeric.pfaffian(0.5 * (wt - wt.T))

    dets = np.linalg.det(w)

    def track(path: list[tuple[int, int]], start_value: complex) -> complex:
        s = start_value
        for a, b in zip(path[:-1], path[1:]):
            step = np.angle(dets[b] / dets[a])
            if abs(step) > 0.5 * np.pi:
                raise MeshTooCoarse(
                    f"sqrt(det w) step {step:.3f} rad between {a} and {b}"
                )
            s = s * np.exp(0.5j * step)
        return s

    def seg(a, b):
        (i0, j0), (i1, j1) = a, b
        if i0 == i1:
            return [(i0, j) for j in range(min(j0, j1), max(j0, j1) + 1)]
        return [(i, j0) for i in range(min(i0, i1), max(i0, i1) + 1)]

    root = trims[0]
    s_root = pf[root]
    sqrt_at = {root: s_root}
    sqrt_at[trims[1]] = track(seg(root, trims[1]), s_root)
    sqrt_at[trims[2]] = track(seg(root, trims[2]), s_root)
    sqrt_at[trims[3]] = track(seg(trims[1], trims[3]), sqrt_at[trims[1]])

    deltas = []
    residual = 0.0
    negatives = 0
    for t in trims:
        d = pf[t] / sqrt_at[t]
        res = abs(abs(d) - 1.0)
        dist_plus = abs(d - 1.0)
        dist_minus = abs(d + 1.0)
        residual = max(residual, res, min(dist_plus, dist_minus))
        deltas.append(float(np.sign(1.0 if dist_plus < dist_minus else -1.0)))
        if dist_minus < dist_plus:
            negatives += 1
    if residual > 1e-6:
        raise MeshTooCoarse(f"Kane-Mele deltas off the unit points by {residual:.3e}")
    return Z2Result(negatives % 2, tuple(deltas), residual, n)


def kane_mele_2d(system, grid: int = 48, n_occ: int | None = None, rounds: int = 3) -> Z2Result:
    """Kane-Mele Z2 index from the pfaffian / tracked-sqrt-det formula.

    Needs a time-reversal operator with square -1. Retries on a doubled grid
    (up to ``rounds`` times) when a tracking step exceeds pi/2.
    """
    field = as_field(system, n_occ)
    if field.theta is None or field.theta.squares_to != -1:
        raise InputError("kane_mele_2d needs time reversal with theta^2 = -1")
    n = _check_grid(grid)
    last: Exception | None = None
    for _ in range(rounds + 1):
        try:
            frame = smooth_trivialization(field, n)
            w = sewing_matrix(frame, field.theta)
            return _km_from_sewing(w, n)
        except MeshTooCoarse as exc:
            last = exc
            n *= 2
    raise MeshTooCoarse(f"kane_mele_2d did not converge: {last}")


@dataclass(frozen=True)
class Z2Result3d:
    strong: int
    weak: tuple[int, int, int]
    slices: dict
    consistent: bool


def kane_mele_3d(system, grid: int = 24, n_occ: int | None = None) -> Z2Result3d:
    """Strong and weak Kane-Mele indices from the six TRIM-plane slices."""
    field = as_field(system, n_occ)
    if field.dim != 3:
        raise InputError("kane_mele_3d expects a 3d system")
    slices: dict[tuple[int, float], int] = {}
    for axis in range(3):
        for val in (0.0, np.pi):
            sub = slice_field(field, axis, val)
            slices[(axis, val)] = kane_mele_2d(sub, grid).value
    diffs = [(slices[(a, 0.0)] + slices[(a, np.pi)]) % 2 for a in range(3)]
    return Z2Result3d(
        strong=diffs[0],
        weak=tuple(slices[(a, np.pi)] for a in range(3)),
        slices=slices,
        consistent=(diffs[0] == diffs[1] == diffs[2]),
    )


# -- independent lattice Z2 (oracle route) ------------------------------------------


def _wilson_matrix(field: HamiltonianField, k2: float, n_k1: int) -> Array:
    """Discrete valence Wilson loop around the k1 circle at fixed k2.

    Path-ordered product of polar-normalized neighbour overlaps,
    ``W = M_0 M_1 ... M_{n-1}`` with ``M_i = polar(F_i^+ F_{i+1})``; this
    ordering telescopes the arbitrary per-point eigenvector gauges away, so
    the spectrum equals that of the projector string ``F_0^+ (prod P_i) F_0``
    up to normalization.
    """
    pts = np.stack([np.arange(n_k1) * (TWO_PI / n_k1), np.full(n_k1, k2)], axis=-1)
    frames = field.frames(pts)
    w = np.eye(field.n_occ, dtype=complex)
    for i in range(n_k1):
        ov = frames[i].conj().T @ frames[(i + 1) % n_k1]
        w = w @ _polar(ov)
    return w


def wilson_loop_phases(field: HamiltonianField, k2: float, n_k1: int) -> tuple[Array, Array]:
    """Eigenphases and eigenvectors of the valence Wilson loop around the k1 circle.

    The spectrum is gauge invariant (Wannier centers of the effective 1d
    system at this ``k2``, times ``2 pi``); the eigenvectors carry the raw
    per-point gauge and are only useful for diagnostics.
    """
    lam, vec = numeric.unitary_eig(_wilson_matrix(field, k2, n_k1))
    return np.angle(lam), vec


def _largest_gap(phases: Array) -> tuple[float, float]:
    """Center and width of the largest cyclic gap in a set of phases."""
    s = np.sort(np.angle(np.exp(1j * phases)))
    gaps = np.diff(np.concatenate([s, s[:1] + TWO_PI]))
    j = int(np.argmax(gaps))
    center = float(np.angle(np.exp(1j * (s[j] + 0.5 * gaps[j]))))
    return center, float(gaps[j])


def _count_in_arc(phases: Array, lo: float, hi: float) -> int:
    """Phases inside the open cyclic arc from ``lo`` counterclockwise to ``hi``."""
    span = (hi - lo) % TWO_PI
    rel = (np.asarray(phases) - lo) % TWO_PI
    return int(np.sum((rel > 0.0) & (rel < span)))


def lattice_z2(system, grid: int = 24, n_occ: int | None = None, rounds: int = 3) -> tuple[int, float]:
    """Z2 index from Wannier-center flow over the half zone ``k2 in [0, pi]``.

    Tracks the Wilson-loop eigenphases (Wannier centers) between the two
    time-reversal-invariant circles and counts, mod 2, how many of them pass
    through a reference marker that rides the middle of the largest spectral
    gap. Because the marker moves with the gap it never collides with a
    center, and because the number of centers is even the count parity does
    not depend on the direction the arc between consecutive markers is
    traversed. A step is trusted only when all neighbouring-line centers keep
    a clearance of at least half the gap radius from the current marker;
    otherwise the ``k2`` line density is doubled, up to ``rounds`` times.
    Entirely independent of the smooth-gauge/pfaffian route above.
    """
    field = as_field(system, n_occ)
    if field.theta is None or field.theta.squares_to != -1:
        raise InputError("lattice_z2 needs time reversal with theta^2 = -1")
    if field.dim != 2:
        raise InputError("lattice_z2 expects a 2d system")
    if field.n_occ % 2:
        raise InputError("Kramers pairing needs an even number of valence bands")
    n = _check_grid(grid)

    n_steps = max(n // 2, 8)
    worst = 0.0
    for _ in range(rounds + 1):
        k2s = np.linspace(0.0, np.pi, n_steps + 1)
        phases = [np.angle(np.linalg.eigvals(_wilson_matrix(field, k2, n))) for k2 in k2s]
        markers = [_largest_gap(p) for p in phases]
        worst = np.inf
        total = 0
        for i in range(n_steps):
            g_here, width_here = markers[i]
            g_next, width_next = markers[i + 1]
            ahead = np.min(np.abs(np.angle(np.exp(1j * (phases[i + 1] - g_here)))))
            behind = np.min(np.abs(np.angle(np.exp(1j * (phases[i] - g_next)))))
            worst = min(worst, ahead / (0.5 * width_here), behind / (0.5 * width_next))
            total += _count_in_arc(phases[i + 1], g_here, g_next)
        if worst >= 0.5:
            return total % 2, float(worst)
        n_steps *= 2
    raise MeshTooCoarse(
        f"Wannier centers crowd the moving gap marker (clearance {worst:.3f} of gap radius)"
    )
