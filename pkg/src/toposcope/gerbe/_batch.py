"""Batched eigendecomposition of unitary matrices.

Holonomy assembly eigendecomposes tens of thousands of small unitaries per call;
the per-matrix Schur route in :mod:`toposcope.numeric` is accurate but slow at
that volume. A unitary ``V`` is normal, so it shares an eigenbasis with the
Hermitian pencil ``Re V + gamma * Im V``; a batched ``eigh`` of that pencil
recovers the eigenvectors in one LAPACK call unless the pencil accidentally
degenerates eigenvalues that ``V`` distinguishes. Three fixed generic values of
``gamma`` are tried; matrices that still fail the diagonalization residual fall
back to per-matrix Schur. Genuine degeneracies of ``V`` itself (Kramers pairs)
are harmless: any orthonormal basis of the eigenspace is a valid frame.
"""

from __future__ import annotations

import numpy as np

from .. import numeric

Array = np.ndarray

_GAMMAS = (0.7013911, -1.3100417, 5.6442093)
_RESIDUAL_TOL = 1e-10


def unitary_eig_batched(v: Array, *, tol: float = 1e-8) -> tuple[Array, Array]:
    """Eigenvalues and orthonormal eigenvectors of a batch of unitaries.

    Parameters
    ----------
    v : ndarray, shape (..., n, n)
        Batch of unitary matrices.
    tol : float
        Unitarity tolerance (largest entry of ``V^+ V - 1`` over the batch).

    Returns
    -------
    lam : ndarray, shape (..., n)
        Unit-modulus eigenvalues (unordered, but deterministic).
    q : ndarray, shape (..., n, n)
        Matching orthonormal eigenvector columns.
    """
    v = np.asarray(v, dtype=complex)
    n = v.shape[-1]
    lead = v.shape[:-2]
    flat = v.reshape((-1, n, n))
    ident = np.eye(n)
    dev = float(np.max(np.abs(np.swapaxes(flat, -1, -2).conj() @ flat - ident)))
    if dev > tol:
        raise ValueError(f"batch is not unitary: deviation {dev:.3e}")

    c = 0.5 * (flat + np.swapaxes(flat, -1, -2).conj())
    s = (flat - np.swapaxes(flat, -1, -2).conj()) / 2j
    q = np.empty_like(flat)
    lam = np.empty(flat.shape[:2], dtype=complex)
    pending = np.ones(flat.shape[0], dtype=bool)
    for gamma in _GAMMAS:
        if not np.any(pending):
            break
        idx = np.nonzero(pending)[0]
        _, vecs = np.linalg.eigh(c[idx] + gamma * s[idx])
        r = np.swapaxes(vecs, -1, -2).conj() @ flat[idx] @ vecs
        diag = np.einsum("...ii->...i", r)
        off = np.abs(r - diag[..., None] * ident)
        good = np.max(off, axis=(-1, -2)) <= _RESIDUAL_TOL * n
        ok = idx[good]
        q[ok] = vecs[good]
        lam[ok] = diag[good]
        pending[ok] = False
    for i in np.nonzero(pending)[0]:
        lam[i], q[i] = numeric.unitary_eig(flat[i])
    lam = lam / np.abs(lam)
    return lam.reshape(lead + (n,)), q.reshape(lead + (n, n))
