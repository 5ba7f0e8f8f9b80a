"""Spectral primitives: branch logs, arc projectors, Pfaffians, evolution.

The Pfaffian is checked against a combinatorial sum over pair partitions (written
before the production routine and kept frozen); branch logs and projectors are
checked against each other through the 2*pi-shift identity and against direct
eigenvalue counting.
"""

from __future__ import annotations

import numpy as np
import pytest

from conftest import random_hermitian, random_projector, random_skew, random_unitary, rng
from toposcope import numeric
from toposcope.errors import BranchCut, NoGap

TWO_PI = 2.0 * np.pi


# --- independent oracle: Pfaffian as a signed sum over pair partitions ---


def _pairings(items):
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for i in range(len(rest)):
        for tail in _pairings(rest[:i] + rest[i + 1 :]):
            yield [(first, rest[i])] + tail


def _permutation_sign(seq):
    seq = list(seq)
    sign = 1
    for i in range(len(seq)):
        while seq[i] != i:
            j = seq[i]
            seq[i], seq[j] = seq[j], seq[i]
            sign = -sign
    return sign


def pfaffian_by_pairings(a: np.ndarray) -> complex:
    n = a.shape[0]
    if n == 0:
        return 1.0 + 0.0j
    if n % 2 == 1:
        return 0.0 + 0.0j
    total = 0.0 + 0.0j
    for pairing in _pairings(list(range(n))):
        term = complex(_permutation_sign([x for pair in pairing for x in pair]))
        for i, j in pairing:
            term *= a[i, j]
        total += term
    return total


def test_pfaffian_two_by_two():
    a = 0.37 - 1.2j
    m = np.array([[0.0, a], [-a, 0.0]])
    assert numeric.pfaffian(m) == pytest.approx(a)


def test_pfaffian_odd_dimension_is_zero():
    m = random_skew(rng(1), 5)
    assert numeric.pfaffian(m) == 0.0


@pytest.mark.parametrize("n", [2, 4, 6, 8])
def test_pfaffian_matches_pairing_sum(n):
    for seed in range(4):
        a = random_skew(rng(100 + seed), n)
        expected = pfaffian_by_pairings(a)
        got = numeric.pfaffian(a)
        assert got == pytest.approx(expected, rel=1e-10, abs=1e-12)


def test_pfaffian_real_skew_matches_pairing_sum():
    gen = rng(7)
    z = gen.normal(size=(6, 6))
    a = z - z.T
    assert numeric.pfaffian(a) == pytest.approx(pfaffian_by_pairings(a), rel=1e-10)


@pytest.mark.parametrize("n", [2, 4, 6, 8])
def test_pfaffian_congruence_identity(n):
    gen = rng(40 + n)
    a = random_skew(gen, n)
    b = gen.normal(size=(n, n)) + 1j * gen.normal(size=(n, n))
    lhs = numeric.pfaffian(b.T @ a @ b)
    rhs = np.linalg.det(b) * numeric.pfaffian(a)
    assert lhs == pytest.approx(rhs, rel=1e-7)


def test_pfaffian_squares_to_determinant():
    a = random_skew(rng(9), 6)
    assert numeric.pfaffian(a) ** 2 == pytest.approx(np.linalg.det(a), rel=1e-9)


def test_pfaffian_rejects_non_skew():
    with pytest.raises(ValueError):
        numeric.pfaffian(np.eye(4))


# --- branch logarithm ---


def test_branch_log_minus_identity():
    # spectrum of the result must lie in (-3*pi/2, pi/2), which forces -pi
    h = numeric.branch_log(-np.eye(2), -1.5 * np.pi)
    assert np.allclose(h, -np.pi * np.eye(2), atol=1e-12)


def test_branch_log_involution_field_value():
    p = np.diag([1.0, 0.0, 0.0]).astype(complex)
    h = numeric.branch_log(np.eye(3) - 2 * p, -1.5 * np.pi)
    assert np.allclose(h, -np.pi * p, atol=1e-12)
    h2 = numeric.branch_log(np.eye(3) - 2 * p, -0.5 * np.pi)
    assert np.allclose(h2, np.pi * p, atol=1e-12)


@pytest.mark.parametrize("eps", [-1.5 * np.pi, -0.5 * np.pi, -0.3])
def test_branch_log_roundtrip_and_window(eps):
    for seed in range(8):
        v = random_unitary(rng(200 + seed), 4)
        h = numeric.branch_log(v, eps)
        assert np.allclose(h, h.conj().T, atol=1e-12)
        w = np.linalg.eigvalsh(h)
        assert np.all(w > eps) and np.all(w < eps + TWO_PI)
        assert np.allclose(numeric.expm_i_hermitian(h), v, atol=1e-9)


def test_branch_log_names_offending_eigenvalue():
    # the cut for eps sits at exp(-1j*eps); put an eigenvalue right on it
    v = np.diag([1.0, np.exp(0.5j * np.pi)])
    with pytest.raises(BranchCut, match="branch cut"):
        numeric.branch_log(v, -0.5 * np.pi)


def test_branch_log_rejects_out_of_range_angle():
    with pytest.raises(ValueError):
        numeric.branch_log(np.eye(2), 0.5)


# --- spectral projector ---


def test_projector_example_off_arc_is_zero():
    v = np.diag([np.exp(-0.25j * np.pi), np.exp(-1.75j * np.pi)])
    p = numeric.spectral_projector(v, -1.5 * np.pi, -0.5 * np.pi)
    assert np.allclose(p, 0.0, atol=1e-12)


def test_projector_example_on_arc():
    v = np.diag([np.exp(-0.75j * np.pi), np.exp(-1.75j * np.pi)])
    p = numeric.spectral_projector(v, -1.5 * np.pi, -0.5 * np.pi)
    assert np.allclose(p, np.diag([1.0, 0.0]), atol=1e-12)


def test_projector_empty_pair_is_zero():
    v = random_unitary(rng(3), 4)
    assert np.allclose(numeric.spectral_projector(v, -1.0, -1.0), 0.0)


def test_projector_rank_counts_arc_eigenvalues():
    for seed in range(10):
        v = random_unitary(rng(300 + seed), 5)
        lam = np.linalg.eigvals(v)
        beta = numeric.branch_coordinates(lam / np.abs(lam))
        eps1, eps2 = -4.0, -1.2
        expected = int(np.sum((beta > eps1) & (beta < eps2)))
        p = numeric.spectral_projector(v, eps1, eps2)
        assert np.allclose(p @ p, p, atol=1e-10)
        assert round(float(np.trace(p).real)) == expected


def test_branch_log_shift_identity():
    # H_eps2 - H_eps1 = 2*pi * P_(eps1, eps2)
    for seed in range(10):
        gen = rng(400 + seed)
        v = random_unitary(gen, 5)
        eps1, eps2 = sorted(-TWO_PI * gen.uniform(0.05, 0.95, size=2))
        lhs = numeric.branch_log(v, eps2) - numeric.branch_log(v, eps1)
        rhs = TWO_PI * numeric.spectral_projector(v, eps1, eps2)
        assert np.max(np.abs(lhs - rhs)) < 1e-8


def test_arc_basis_spans_projector():
    v = random_unitary(rng(11), 6)
    u = numeric.arc_basis(v, -4.5, -0.7)
    p = numeric.spectral_projector(v, -4.5, -0.7)
    assert np.allclose(u.conj().T @ u, np.eye(u.shape[1]), atol=1e-12)
    assert np.allclose(u @ u.conj().T, p, atol=1e-10)


# --- gap center ---


def test_gap_center_identity_matrix():
    assert numeric.gap_center(np.eye(3)) == pytest.approx(-np.pi)


def test_gap_center_tie_break_prefers_small_angle():
    assert numeric.gap_center(np.diag([1.0, -1.0])) == pytest.approx(-0.5 * np.pi)


def test_gap_center_maximizes_cut_distance():
    for seed in range(8):
        v = random_unitary(rng(500 + seed), 4)
        lam = np.linalg.eigvals(v)
        lam = lam / np.abs(lam)
        eps = numeric.gap_center(v)
        phi = np.sort(np.angle(lam))
        widths = np.diff(np.concatenate([phi, [phi[0] + TWO_PI]]))
        assert numeric.cut_distance(lam, eps) == pytest.approx(
            0.5 * float(np.max(widths)), abs=1e-9
        )


def test_gap_center_no_gap():
    v = np.diag(np.exp(-1j * TWO_PI * np.arange(8) / 8))
    with pytest.raises(NoGap):
        numeric.gap_center(v, gap_tol=1.0)


# --- time-ordered exponential ---


def _drive(t):
    a = np.array([[1.0, 0.2], [0.2, -1.0]], dtype=complex)
    b = np.array([[0.0, -0.7j], [0.7j, 0.3]], dtype=complex)
    return a + np.sin(2.1 * t) * b


def test_evolve_is_unitary():
    u = numeric.evolve(_drive, 1.7, 64)
    assert np.allclose(u.conj().T @ u, np.eye(2), atol=1e-12)


def test_evolve_second_order_richardson():
    ref = numeric.evolve(_drive, 1.7, 4096)
    e1 = np.max(np.abs(numeric.evolve(_drive, 1.7, 64) - ref))
    e2 = np.max(np.abs(numeric.evolve(_drive, 1.7, 128) - ref))
    assert e1 / e2 == pytest.approx(4.0, rel=0.2)


def test_evolve_deterministic_bitwise():
    first = numeric.evolve(_drive, 1.3, 200)
    second = numeric.evolve(_drive, 1.3, 200)
    assert np.array_equal(first, second)


def test_evolve_batched_matches_loop():
    gen = rng(21)
    h0 = random_hermitian(gen, 3)
    h1 = random_hermitian(gen, 3)

    def batched(t):
        return np.stack([h0 + t * h1, h0 - t * h1])

    u = numeric.evolve(batched, 0.9, 50)
    u0 = numeric.evolve(lambda t: h0 + t * h1, 0.9, 50)
    u1 = numeric.evolve(lambda t: h0 - t * h1, 0.9, 50)
    assert np.allclose(u[0], u0, atol=1e-13)
    assert np.allclose(u[1], u1, atol=1e-13)


def test_expm_matches_projector_rotation():
    p = random_projector(rng(31), 4, 2)
    u = numeric.expm_i_hermitian(np.pi * p)
    assert np.allclose(u, np.eye(4) - 2 * p, atol=1e-12)
