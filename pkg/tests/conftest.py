"""Shared helpers: seeded random matrix generators used across the test suite."""

from __future__ import annotations

import numpy as np


def rng(seed: int) -> np.random.Generator:
    return np.random.default_rng(seed)


def random_hermitian(gen: np.random.Generator, n: int, scale: float = 1.0) -> np.ndarray:
    z = gen.normal(size=(n, n)) + 1j * gen.normal(size=(n, n))
    return scale * 0.5 * (z + z.conj().T)


def random_unitary(gen: np.random.Generator, n: int) -> np.ndarray:
    z = gen.normal(size=(n, n)) + 1j * gen.normal(size=(n, n))
    q, r = np.linalg.qr(z)
    d = np.diagonal(r)
    return q * (d / np.abs(d))[None, :]


def random_skew(gen: np.random.Generator, n: int) -> np.ndarray:
    z = gen.normal(size=(n, n)) + 1j * gen.normal(size=(n, n))
    return z - z.T


def random_projector(gen: np.random.Generator, n: int, rank: int) -> np.ndarray:
    u = random_unitary(gen, n)[:, :rank]
    return u @ u.conj().T


# -- random Bloch fields ------------------------------------------------------------

_OFFSETS = [(1, 0), (0, 1), (1, 1), (1, -1)]


def _trig_matrix_fun(mats0, mats, offsets):
    """k-batch -> Hermitian matrix batch, H = C0 + sum_v (C_v e^{i k.v} + h.c.)."""

    def fun(pts):
        pts = np.asarray(pts, dtype=float)
        out = np.broadcast_to(mats0, pts.shape[:-1] + mats0.shape).copy()
        for v, c in zip(offsets, mats):
            phase = np.exp(1j * (pts @ np.asarray(v, dtype=float)))
            out = out + phase[..., None, None] * c
            out = out + phase.conj()[..., None, None] * c.conj().swapaxes(-1, -2)
        return out

    return fun


def _direct_gap(fun, n_occ, grid=20):
    axes = [np.arange(grid) * (2 * np.pi / grid)] * 2
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=-1)
    w = np.linalg.eigvalsh(fun(pts))
    return float(np.min(w[:, n_occ] - w[:, n_occ - 1]))


def random_two_band_field(seed: int, min_gap: float = 1.0):
    """Random gapped 2-band model H = d(k).sigma; returns (field, d_sampler).

    The gap floor keeps the normalized d-field resolvable on a 24x24 grid.
    """
    from toposcope.static_invariants import HamiltonianField

    sx = np.array([[0, 1], [1, 0]], dtype=complex)
    sy = np.array([[0, -1j], [1j, 0]], dtype=complex)
    sz = np.array([[1, 0], [0, -1]], dtype=complex)

    for attempt in range(60):
        gen = rng(100000 + 97 * seed + attempt)
        const = gen.normal(size=3) * 0.6
        coeff_c = gen.normal(size=(len(_OFFSETS), 3)) + 1j * gen.normal(size=(len(_OFFSETS), 3))
        coeff_c *= 0.45

        def d_fun(pts, const=const, coeff_c=coeff_c):
            pts = np.asarray(pts, dtype=float)
            out = np.broadcast_to(const, pts.shape[:-1] + (3,)).copy()
            for v, c in zip(_OFFSETS, coeff_c):
                phase = np.exp(1j * (pts @ np.asarray(v, dtype=float)))
                out = out + 2.0 * (phase[..., None] * c).real
            return out

        def fun(pts, d_fun=d_fun):
            d = d_fun(pts)
            return (
                d[..., 0, None, None] * sx
                + d[..., 1, None, None] * sy
                + d[..., 2, None, None] * sz
            )

        if _direct_gap(fun, 1, 24) >= min_gap:
            return HamiltonianField(fun, 2, 2, 1, None), d_fun
    raise RuntimeError(f"no gapped two-band sample found for seed {seed}")


def qwz_field(m: float):
    """d = (sin k1, sin k2, m + cos k1 + cos k2): degree flips sign with m in (-2, 2)."""
    from toposcope.static_invariants import HamiltonianField

    sx = np.array([[0, 1], [1, 0]], dtype=complex)
    sy = np.array([[0, -1j], [1j, 0]], dtype=complex)
    sz = np.array([[1, 0], [0, -1]], dtype=complex)

    def d_fun(pts):
        pts = np.asarray(pts, dtype=float)
        return np.stack(
            [
                np.sin(pts[..., 0]),
                np.sin(pts[..., 1]),
                m + np.cos(pts[..., 0]) + np.cos(pts[..., 1]),
            ],
            axis=-1,
        )

    def fun(pts):
        d = d_fun(pts)
        return (
            d[..., 0, None, None] * sx
            + d[..., 1, None, None] * sy
            + d[..., 2, None, None] * sz
        )

    return HamiltonianField(fun, 2, 2, 1, None), d_fun


def random_trs_field(
    seed: int,
    n: int = 4,
    min_gap: float = 0.5,
    scale: float = 0.8,
    admix: float = 0.0,
):
    """Random gapped half-filled field with theta H(k) theta^-1 = H(-k), theta^2 = -1.

    ``admix`` adds that multiple of a topological Kane-Mele Bloch matrix to the
    random part (same orbital order and theta), which puts a nontrivial Z2
    class within reach of the ensemble; pure random fields are almost always
    trivial.
    """
    from toposcope.model import AntiUnitary, kane_mele_model
    from toposcope.static_invariants import HamiltonianField

    sy = np.array([[0, -1j], [1j, 0]], dtype=complex)
    theta = AntiUnitary(np.kron(np.eye(n // 2), 1j * sy), squares_to=-1)
    km = None
    if admix:
        if n != 4:
            raise ValueError("admixture backbone is a 4-orbital model")
        km = kane_mele_model(lam_so=0.3, m=0.0)

    for attempt in range(400):
        gen = rng(200000 + 100003 * seed + attempt)
        c0 = random_hermitian(gen, n, scale)
        cs = [
            scale * (gen.normal(size=(n, n)) + 1j * gen.normal(size=(n, n))) * 0.5
            for _ in _OFFSETS
        ]
        base = _trig_matrix_fun(c0, cs, _OFFSETS)

        def fun(pts, base=base, theta=theta):
            pts = np.asarray(pts, dtype=float)
            h = 0.5 * (base(pts) + theta.conjugate(base(-pts)))
            if km is not None:
                h = h + admix * km.bloch(pts)
            return h

        if _direct_gap(fun, n // 2, 20) >= min_gap:
            return HamiltonianField(fun, 2, n, n // 2, theta)
    raise RuntimeError(f"no gapped TRS sample found for seed {seed}")
