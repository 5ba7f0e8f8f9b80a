"""Spectral primitives for unitary and Hermitian matrices.

Everything downstream rests on four operations: branch logarithms of unitaries with a
chosen cut, spectral projectors onto arcs of the unit circle, Pfaffians of
skew-symmetric matrices, and time-ordered exponentials. Branch cuts are parametrized
by an angle ``eps`` in the open interval ``(-2*pi, 0)``; the cut sits at ``exp(-1j*eps)``
and the resulting logarithm has spectrum in ``(eps, eps + 2*pi)``.

A unitary eigenvalue ``lam`` is written ``lam = exp(-1j*beta)`` with the branch
coordinate ``beta`` in ``[-2*pi, 0)``; the arc selected by an ordered pair
``eps1 <= eps2`` is ``beta in (eps1, eps2)``, i.e. the clockwise arc on the circle
from ``exp(-1j*eps1)`` to ``exp(-1j*eps2)``.
"""

from __future__ import annotations

from typing import Callable

import numpy as np
import scipy.linalg as _sla

from .errors import BranchCut, NoGap

HERMITICITY_TOL = 1e-10
UNITARITY_TOL = 1e-9
GAP_TOL = 1e-6

TWO_PI = 2.0 * np.pi

Array = np.ndarray


def check_branch_angle(eps: float) -> float:
    if not (-TWO_PI < eps < 0.0):
        raise ValueError(f"branch angle must lie in (-2*pi, 0), got {eps}")
    return float(eps)


def eigh(h: Array, *, tol: float = HERMITICITY_TOL) -> tuple[Array, Array]:
    """Eigendecomposition of a Hermitian matrix, ascending eigenvalues.

    Wraps LAPACK but first checks Hermiticity against ``tol`` (relative to the
    largest entry), since silent symmetrization hides model-construction bugs.
    """
    scale = max(1.0, float(np.max(np.abs(h))))
    dev = float(np.max(np.abs(h - np.swapaxes(h, -1, -2).conj())))
    if dev > tol * scale:
        raise ValueError(f"matrix is not Hermitian: deviation {dev:.3e}")
    return np.linalg.eigh(h)


def unitary_eig(v: Array, *, tol: float = UNITARITY_TOL) -> tuple[Array, Array]:
    """Eigenvalues and orthonormal eigenvectors of a unitary matrix.

    Uses the complex Schur form, which is diagonal for normal matrices; this keeps
    the eigenvector frame orthonormal even through eigenvalue near-degeneracies,
    where the general nonsymmetric solver can return an ill-conditioned basis.
    Eigenvalues are normalized onto the unit circle.
    """
    v = np.asarray(v, dtype=complex)
    n = v.shape[-1]
    dev = float(np.max(np.abs(v.conj().T @ v - np.eye(n))))
    if dev > tol:
        raise ValueError(f"matrix is not unitary: deviation {dev:.3e}")
    t, q = _sla.schur(v, output="complex")
    lam = np.diag(t).copy()
    lam /= np.abs(lam)
    return lam, q


def branch_coordinates(lam: Array) -> Array:
    """Map unit-circle eigenvalues to branch coordinates in ``[-2*pi, 0)``."""
    beta = -np.angle(lam)
    return np.where(beta >= 0.0, beta - TWO_PI, beta)


def cut_distance(lam: Array, eps: float) -> float:
    """Smallest angular distance from any eigenvalue to the cut at exp(-1j*eps)."""
    d = np.mod(-np.angle(lam) - eps, TWO_PI)
    return float(np.min(np.minimum(d, TWO_PI - d)))


def _require_off_cut(lam: Array, eps: float, gap_tol: float) -> None:
    d = np.mod(-np.angle(lam) - eps, TWO_PI)
    d = np.minimum(d, TWO_PI - d)
    worst = int(np.argmin(d))
    if d[worst] < gap_tol:
        bad = lam[worst]
        raise BranchCut(
            f"eigenvalue {bad.real:+.12g}{bad.imag:+.12g}j lies within "
            f"{d[worst]:.3e} of the branch cut at exp(-1j*{eps:.12g})"
        )


def branch_log(v: Array, eps: float, *, gap_tol: float = GAP_TOL) -> Array:
    """Hermitian ``H`` with ``exp(-1j*H) = v`` and spectrum in ``(eps, eps + 2*pi)``.

    Raises :class:`BranchCut` (naming the offending eigenvalue) if the spectrum
    touches the cut within ``gap_tol``.
    """
    check_branch_angle(eps)
    lam, q = unitary_eig(v)
    _require_off_cut(lam, eps, gap_tol)
    beta = branch_coordinates(lam)
    h = np.where(beta > eps, beta, beta + TWO_PI)
    out = (q * h[None, :]) @ q.conj().T
    return 0.5 * (out + out.conj().T)


def spectral_projector(
    v: Array, eps1: float, eps2: float, *, gap_tol: float = GAP_TOL
) -> Array:
    """Orthogonal projector onto eigenvalues of ``v`` in the arc ``(eps1, eps2)``.

    The arc is the clockwise one from ``exp(-1j*eps1)`` to ``exp(-1j*eps2)``;
    equivalently, eigenvectors with branch coordinate strictly between the two
    angles are kept. ``eps1 == eps2`` gives the zero projector. Satisfies
    ``branch_log(v, eps2) - branch_log(v, eps1) = 2*pi * P`` for ``eps1 <= eps2``.
    """
    check_branch_angle(eps1)
    check_branch_angle(eps2)
    if eps1 > eps2:
        raise ValueError(f"need eps1 <= eps2, got ({eps1}, {eps2})")
    lam, q = unitary_eig(v)
    _require_off_cut(lam, eps1, gap_tol)
    _require_off_cut(lam, eps2, gap_tol)
    beta = branch_coordinates(lam)
    sel = (beta > eps1) & (beta < eps2)
    if not np.any(sel):
        return np.zeros_like(v, dtype=complex)
    qs = q[:, sel]
    p = qs @ qs.conj().T
    return 0.5 * (p + p.conj().T)


def arc_basis(
    v: Array, eps1: float, eps2: float, *, gap_tol: float = GAP_TOL
) -> Array:
    """Orthonormal basis (columns) of the spectral subspace for the arc ``(eps1, eps2)``.

    Deterministic for a fixed input: eigenvectors come from the Schur form and are
    ordered by ascending branch coordinate. The basis itself is gauge — only
    exterior-power expressions built from it are meaningful.
    """
    check_branch_angle(eps1)
    check_branch_angle(eps2)
    if eps1 > eps2:
        raise ValueError(f"need eps1 <= eps2, got ({eps1}, {eps2})")
    lam, q = unitary_eig(v)
    _require_off_cut(lam, eps1, gap_tol)
    _require_off_cut(lam, eps2, gap_tol)
    beta = branch_coordinates(lam)
    sel = np.nonzero((beta > eps1) & (beta < eps2))[0]
    order = sel[np.argsort(beta[sel], kind="stable")]
    return q[:, order]


def gap_center(v: Array, *, gap_tol: float = GAP_TOL) -> float:
    """Branch angle at the midpoint of the widest spectral gap of a unitary.

    Ties in arc width (within 1e-12) are broken toward the candidate with the
    smallest ``|eps|``. If the widest gap is centered exactly on the excluded
    angle 0 the center is nudged a quarter arc-width into the interior, keeping
    the returned angle inside ``(-2*pi, 0)`` and inside the gap. Raises
    :class:`NoGap` when no arc is wider than ``gap_tol``.
    """
    lam, _ = unitary_eig(v)
    phi = np.sort(np.unique(np.angle(lam)))
    widths = np.diff(np.concatenate([phi, [phi[0] + TWO_PI]]))
    best = float(np.max(widths))
    if best < gap_tol:
        raise NoGap(f"no spectral gap wider than {gap_tol:.3e}")
    candidates = []
    for i in np.nonzero(widths >= best - 1e-12)[0]:
        mid = phi[i] + 0.5 * widths[i]
        eps = -mid
        while eps <= -TWO_PI:
            eps += TWO_PI
        while eps >= 0.0:
            eps -= TWO_PI
        if eps == 0.0 or eps <= -TWO_PI + 1e-15 or abs(eps) < 1e-15:
            eps = -0.25 * widths[i]
        candidates.append(float(eps))
    return min(candidates, key=lambda e: (abs(e), e))


def expm_i_hermitian(h: Array, scale: float = 1.0) -> Array:
    """``exp(-1j * scale * h)`` for Hermitian ``h`` (batched over leading axes)."""
    w, q = np.linalg.eigh(h)
    phase = np.exp(-1j * scale * w)
    return np.einsum("...ij,...j,...kj->...ik", q, phase, q.conj())


def evolve(
    h_of_t: Callable[[float], Array], total_time: float, steps: int
) -> Array:
    """Time-ordered exponential ``U(total_time)`` of ``-1j * H(t)``.

    Midpoint-rule product of exponentials: each step applies
    ``exp(-1j * H(t_mid) * dt)``, a second-order scheme whose error shrinks by
    ~4x per doubling of ``steps``. Deterministic for fixed inputs. ``h_of_t``
    may return a batch ``(..., N, N)``; the evolution is carried along the batch.
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    dt = total_time / steps
    u = expm_i_hermitian(np.asarray(h_of_t(0.5 * dt), dtype=complex), dt)
    for s in range(1, steps):
        u = expm_i_hermitian(np.asarray(h_of_t((s + 0.5) * dt), dtype=complex), dt) @ u
    return u


def pfaffian(a: Array, *, tol: float = 1e-12) -> complex:
    """Pfaffian of an even-dimensional skew-symmetric matrix.

    Parlett-Reid pair elimination with complete pivoting and explicit sign
    tracking: at each even step the largest remaining entry is permuted into the
    ``(k, k+1)`` pivot slot (each transposition flips the sign), the column below
    the pivot row is eliminated by a unit congruence, and the Pfaffian is the
    signed product of the pair pivots. ``pf([[0, a], [-a, 0]]) = a``.
    """
    a = np.array(a, dtype=complex)
    n = a.shape[0]
    if a.shape != (n, n):
        raise ValueError("matrix must be square")
    scale = max(1.0, float(np.max(np.abs(a))))
    if float(np.max(np.abs(a + a.T))) > 100 * tol * scale:
        raise ValueError("matrix is not skew-symmetric")
    if n % 2 == 1:
        return 0.0 + 0.0j
    if n == 0:
        return 1.0 + 0.0j
    a = 0.5 * (a - a.T)
    sign = 1.0
    result = 1.0 + 0.0j
    for k in range(0, n - 1, 2):
        sub = np.abs(a[k:, k:])
        flat = int(np.argmax(np.triu(sub, 1)))
        p, q = divmod(flat, n - k)
        p += k
        q += k
        if sub[p - k, q - k] == 0.0:
            return 0.0 + 0.0j
        if p != k:
            a[[k, p], :] = a[[p, k], :]
            a[:, [k, p]] = a[:, [p, k]]
            sign = -sign
            if q == k:
                q = p
        if q != k + 1:
            a[[k + 1, q], :] = a[[q, k + 1], :]
            a[:, [k + 1, q]] = a[:, [q, k + 1]]
            sign = -sign
        pivot = a[k + 1, k]
        result *= a[k, k + 1]
        if k + 2 < n:
            m = -a[k + 2 :, k] / pivot
            a[k + 2 :, :] += m[:, None] * a[k + 1, :][None, :]
            a[:, k + 2 :] += a[:, k + 1][:, None] * m[None, :]
            block = a[k + 2 :, k + 2 :]
            a[k + 2 :, k + 2 :] = 0.5 * (block - block.T)
    return complex(sign * result)
