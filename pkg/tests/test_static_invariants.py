"""Chern and Kane-Mele invariants: frozen oracles, anchors, cross-route agreement.

The Chern tests are anchored by a signed-solid-angle degree oracle for 2-band
fields (written first, never revised to follow the implementation), and the
Wannier-flow Z2 route is anchored by an exact-diagonalization computation of
the projected position operator on a ring — a discretization with no code in
common with the Wilson-loop product it checks.
"""

from __future__ import annotations

import numpy as np
import pytest

from conftest import qwz_field, random_trs_field, random_two_band_field

from toposcope.errors import InputError, NoGap, Obstruction
from toposcope.model import (
    cubic_ti_model,
    haldane_model,
    kane_mele_model,
    layered_3d_model,
)
from toposcope.static_invariants import (
    as_field,
    chern_number,
    kane_mele_2d,
    kane_mele_3d,
    lattice_z2,
    sewing_matrix,
    slice_field,
    smooth_trivialization,
    wilson_loop_phases,
)

TWO_PI = 2.0 * np.pi


# -- degree oracle (frozen) ----------------------------------------------------------


def solid_angle(a, b, c):
    """Signed solid angle of the spherical triangle (a, b, c), unit rows."""
    num = np.einsum("...i,...i->...", a, np.cross(b, c))
    den = (
        1.0
        + np.einsum("...i,...i->...", a, b)
        + np.einsum("...i,...i->...", b, c)
        + np.einsum("...i,...i->...", c, a)
    )
    return 2.0 * np.arctan2(num, den)


def sphere_degree(d_fun, n=48):
    """Degree of the normalized d-field as a map from the torus to the sphere.

    Each grid cell is split into two spherical triangles whose signed solid
    angles are summed; the total is 4*pi times the degree for any gapped field
    resolved by the grid.
    """
    axes = np.arange(n) * (TWO_PI / n)
    mesh = np.meshgrid(axes, axes, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=-1)
    d = np.asarray(d_fun(pts), dtype=float).reshape(n, n, 3)
    d = d / np.linalg.norm(d, axis=-1, keepdims=True)
    v00 = d
    v10 = np.roll(d, -1, axis=0)
    v01 = np.roll(d, -1, axis=1)
    v11 = np.roll(v10, -1, axis=1)
    total = np.sum(solid_angle(v00, v10, v11)) + np.sum(solid_angle(v00, v11, v01))
    deg = total / (4.0 * np.pi)
    assert abs(deg - round(deg)) < 1e-6
    return int(round(deg))


def pauli_vector(bloch):
    """d-field of a 2-band Bloch function H = d0 + d . sigma."""

    def d_fun(pts):
        h = np.asarray(bloch(np.asarray(pts, dtype=float)))
        return np.stack(
            [
                h[..., 0, 1].real,
                -h[..., 0, 1].imag,
                0.5 * (h[..., 0, 0] - h[..., 1, 1]).real,
            ],
            axis=-1,
        )

    return d_fun


def test_degree_oracle_anchors():
    assert sphere_degree(qwz_field(1.0)[1]) == -1
    assert sphere_degree(qwz_field(-1.0)[1]) == 1
    assert sphere_degree(qwz_field(3.0)[1]) == 0
    assert sphere_degree(lambda pts: np.broadcast_to([0.0, 0.3, 1.0], pts.shape[:-1] + (3,))) == 0


# -- Chern numbers -------------------------------------------------------------------


@pytest.mark.parametrize("seed", range(10))
def test_chern_matches_degree_oracle(seed):
    field, d_fun = random_two_band_field(seed)
    result = chern_number(field, grid=24)
    assert result.value == sphere_degree(d_fun)
    assert result.residual < 0.5


def test_chern_ensemble_is_not_all_trivial():
    degrees = {sphere_degree(random_two_band_field(s)[1]) for s in range(10)}
    assert any(d != 0 for d in degrees)


@pytest.mark.parametrize(
    "m, expected", [(1.0, -1), (-1.0, 1), (3.0, 0), (-3.0, 0)]
)
def test_chern_half_bz_model_signs(m, expected):
    field, d_fun = qwz_field(m)
    assert chern_number(field).value == expected == sphere_degree(d_fun)


@pytest.mark.parametrize(
    "phi, m, expected",
    [(np.pi / 2, 0.0, 1), (-np.pi / 2, 0.0, -1), (np.pi / 2, 2.5, 0), (np.pi / 2, -2.5, 0)],
)
def test_chern_haldane_lobes(phi, m, expected):
    model = haldane_model(phi=phi, m=m)
    result = chern_number(model, n_occ=1)
    assert result.value == expected
    assert result.value == sphere_degree(pauli_vector(model.bloch))
    assert result.residual < 0.5


@pytest.mark.parametrize("seed", range(10))
def test_chern_vanishes_under_time_reversal(seed):
    assert chern_number(random_trs_field(seed)).value == 0


@pytest.mark.parametrize("seed", range(3))
def test_chern_grid_stable(seed):
    field, _ = random_two_band_field(seed)
    assert chern_number(field, grid=12).value == chern_number(field, grid=48).value


def test_chern_rejects_gap_closing():
    # the gap of the m = 2 field closes at (pi, pi), a grid point of any even grid
    with pytest.raises(NoGap):
        chern_number(qwz_field(2.0)[0])


def test_chern_input_validation():
    field, _ = qwz_field(1.0)
    with pytest.raises(InputError):
        chern_number(field, grid=25)
    with pytest.raises(InputError):
        chern_number(field, grid=6)
    with pytest.raises(InputError):
        chern_number(layered_3d_model())


# -- smooth trivialization -----------------------------------------------------------


@pytest.mark.parametrize(
    "field, grid",
    [(as_field(kane_mele_model()), 24), (random_trs_field(3), 48)],
    ids=["kane-mele", "random-trs"],
)
def test_trivialization_postconditions(field, grid):
    frame = smooth_trivialization(field, grid=grid)
    vals = frame.values
    gram = np.swapaxes(vals, -1, -2).conj() @ vals
    assert np.max(np.abs(gram - np.eye(field.n_occ))) < 1e-9

    axes = np.arange(grid) * (TWO_PI / grid)
    mesh = np.meshgrid(axes, axes, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=-1)
    proj = field.projector(pts).reshape(grid, grid, field.n, field.n)
    assert np.max(np.abs(proj @ vals - vals)) < 1e-9

    # smoothness across every link, including the wrap-around ones
    assert frame.overlap_phase_bound() < np.pi / 2


def test_trivialization_obstructed_by_chern_number():
    with pytest.raises(Obstruction, match=r"\+1"):
        smooth_trivialization(as_field(haldane_model(), n_occ=1), grid=24)
    with pytest.raises(Obstruction):
        smooth_trivialization(qwz_field(1.0)[0], grid=24)


def test_sewing_matrix_properties():
    field = as_field(kane_mele_model(lam_r=0.2, m=0.5))
    frame = smooth_trivialization(field, grid=24)
    w = sewing_matrix(frame, field.theta)
    eye = np.eye(field.n_occ)
    assert np.max(np.abs(np.swapaxes(w, -1, -2).conj() @ w - eye)) < 1e-9
    # w(-k) = -w(k)^T is an exact identity, not a smoothness statement
    idx = (-np.arange(frame.grid)) % frame.grid
    w_minus = w[np.ix_(idx, idx)]
    assert np.max(np.abs(w_minus + np.swapaxes(w, -1, -2))) < 1e-12


# -- Kane-Mele 2d --------------------------------------------------------------------

# lam_so = 0.3 puts the band inversion of the m-sweep at m = 3*sqrt(3)*0.3 ~ 1.56
KM_REGIMES = [
    (dict(lam_so=0.3, m=0.0), 1),
    (dict(lam_so=0.3, m=3.0), 0),
    (dict(lam_so=0.3, m=0.5, lam_r=0.25), 1),
    (dict(lam_so=0.3, m=1.3), 1),
    (dict(lam_so=0.3, m=1.8), 0),
]


@pytest.mark.parametrize("kwargs, expected", KM_REGIMES)
def test_kane_mele_regimes(kwargs, expected):
    result = kane_mele_2d(kane_mele_model(**kwargs))
    assert result.value == expected
    assert result.residual < 1e-6
    for delta in result.deltas:
        assert abs(abs(delta) - 1.0) < 1e-6


def test_kane_mele_requires_kramers_time_reversal():
    with pytest.raises(InputError):
        kane_mele_2d(haldane_model())
    with pytest.raises(InputError):
        kane_mele_2d(random_two_band_field(0)[0])


# -- Wannier-flow route --------------------------------------------------------------


@pytest.mark.parametrize("m", [0.0, 3.0])
@pytest.mark.parametrize("k2", [0.0, np.pi])
def test_wilson_spectrum_kramers_degenerate_at_trs_circles(m, k2):
    field = as_field(kane_mele_model(lam_so=0.3, m=m))
    phases = wilson_loop_phases(field, k2, 48)[0]
    assert np.abs(np.angle(np.exp(1j * (phases[1] - phases[0])))) < 1e-8


def test_wilson_phases_match_ring_position_spectrum():
    # Independent route: exact diagonalization of an L-cell ring. The Wannier
    # centers of the projected position operator exp(2*pi*i*x/L) must sit on
    # the Wilson eigenphases, -mu_ring * L = phi_wilson (mod 2*pi); the loop
    # transports toward increasing k, so centers enter with a conjugate phase.
    L = 48
    field = as_field(kane_mele_model(lam_so=0.3, m=3.0))
    k1 = np.arange(L) * (TWO_PI / L)
    pts = np.stack([k1, np.zeros(L)], axis=-1)
    hop = np.fft.ifft(field(pts), axis=0)
    idx = (np.arange(L)[:, None] - np.arange(L)[None, :]) % L
    ring = hop[idx].transpose(0, 2, 1, 3).reshape(4 * L, 4 * L)
    assert np.max(np.abs(ring - ring.conj().T)) < 1e-12

    _, vec = np.linalg.eigh(ring)
    occ = vec[:, : 2 * L]
    x_op = np.kron(np.diag(np.exp(2j * np.pi * np.arange(L) / L)), np.eye(4))
    mu = np.angle(np.linalg.eigvals(occ.conj().T @ x_op @ occ))

    wilson = wilson_loop_phases(field, 0.0, L)[0]
    dist = np.abs(np.angle(np.exp(1j * (-L * mu[:, None] - wilson[None, :]))))
    assert np.max(np.min(dist, axis=1)) < 1e-8


@pytest.mark.parametrize("kwargs, expected", KM_REGIMES)
def test_wannier_flow_regimes(kwargs, expected):
    value, clearance = lattice_z2(kane_mele_model(**kwargs))
    assert value == expected
    assert clearance >= 0.5


@pytest.mark.parametrize(
    "seed, admix",
    [(s, 0.0) for s in range(8)] + [(s, 1.0) for s in range(4)],
)
def test_z2_routes_agree_on_random_fields(seed, admix):
    field = random_trs_field(seed, admix=admix)
    assert kane_mele_2d(field).value == lattice_z2(field)[0]


def test_wannier_flow_input_validation():
    with pytest.raises(InputError):
        lattice_z2(haldane_model())
    with pytest.raises(InputError):
        lattice_z2(random_two_band_field(0)[0])


# -- Kane-Mele 3d --------------------------------------------------------------------


def test_weak_stack_indices():
    result = kane_mele_3d(layered_3d_model())
    assert result.strong == 0
    assert result.weak == (0, 0, 1)
    assert result.consistent


def test_strong_phase_indices():
    result = kane_mele_3d(cubic_ti_model(m=2.0))
    assert result.strong == 1
    assert result.weak == (0, 0, 0)
    assert result.consistent


def test_slice_field_matches_plane_restriction():
    field = as_field(cubic_ti_model())
    sub = slice_field(field, 1, np.pi)
    pts2 = np.array([[0.3, 1.2], [2.0, 0.1]])
    pts3 = np.array([[0.3, np.pi, 1.2], [2.0, np.pi, 0.1]])
    assert np.allclose(sub(pts2), field(pts3), atol=1e-14)


def test_kane_mele_3d_rejects_2d_input():
    with pytest.raises(InputError):
        kane_mele_3d(kane_mele_model())
