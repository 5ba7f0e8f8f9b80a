"""Crystal models: Bloch convention, Hermiticity, TRS, built-ins, JSON round trips."""

from __future__ import annotations

import numpy as np
import pytest

from toposcope import model as tm
from toposcope.errors import InputError

TWO_PI = 2.0 * np.pi


def _k_grid(dim, n=8):
    axes = [np.linspace(0.0, TWO_PI, n, endpoint=False)] * dim
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=-1)


def test_chain_dispersion():
    chain = tm.chain_model(t=0.7)
    k = np.array([[0.3], [1.1], [np.pi]])
    h = chain.bloch(k)
    assert np.allclose(h[:, 0, 0], 2 * 0.7 * np.cos(k[:, 0]), atol=1e-14)


def test_bloch_is_hermitian_everywhere():
    for m in (tm.haldane_model(m=0.4), tm.kane_mele_model(lam_r=0.25), tm.cubic_ti_model()):
        h = m.bloch(_k_grid(m.dimension))
        assert np.max(np.abs(h - np.swapaxes(h, -1, -2).conj())) < 1e-13


def test_bloch_convention_is_exactly_periodic():
    m = tm.kane_mele_model(lam_r=0.25, m=0.3)
    k = _k_grid(2, 5)
    for axis in range(2):
        shift = np.zeros(2)
        shift[axis] = TWO_PI
        assert np.max(np.abs(m.bloch(k + shift) - m.bloch(k))) < 1e-12


def test_haldane_gamma_point_matches_d_vector():
    t = 1.3
    m = tm.haldane_model(t=t, t2=0.0, phi=0.0, m=0.0)
    h = m.bloch(np.zeros(2))
    assert h[0, 1] == pytest.approx(3 * t)


def test_haldane_d_vector_formula():
    t, t2, phi, mass = 1.0, 1.0 / 3.0, 0.8, 0.45
    mdl = tm.haldane_model(t=t, t2=t2, phi=phi, m=mass)
    gen = np.random.default_rng(5)
    for k in gen.uniform(0, TWO_PI, size=(20, 2)):
        h = mdl.bloch(k)
        k1, k2 = k
        dx = t * (1 + np.cos(k1) + np.cos(k2))
        dy = t * (np.sin(k1) + np.sin(k2))
        dz = mass + 2 * t2 * np.sin(phi) * (
            np.sin(k1) - np.sin(k1 - k2) - np.sin(k2)
        )
        assert h[0, 1] == pytest.approx(dx - 1j * dy, abs=1e-12)
        assert 0.5 * (h[0, 0] - h[1, 1]) == pytest.approx(dz, abs=1e-12)


def _min_gap(mdl, n=120):
    w = np.linalg.eigvalsh(mdl.bloch(_k_grid(2, n)))
    nv = w.shape[-1] // 2
    return float(np.min(w[:, nv] - w[:, nv - 1]))


def test_haldane_gap_closes_on_critical_line():
    t2, phi = 1.0 / 3.0, 0.9
    m_crit = 3 * np.sqrt(3.0) * t2 * np.sin(phi)
    assert _min_gap(tm.haldane_model(t2=t2, phi=phi, m=m_crit)) < 0.05
    assert _min_gap(tm.haldane_model(t2=t2, phi=phi, m=0.6 * m_crit)) > 0.2
    assert _min_gap(tm.haldane_model(t2=t2, phi=phi, m=1.4 * m_crit)) > 0.2


def test_kane_mele_time_reversal_exact():
    for lam_r in (0.0, 0.25):
        mdl = tm.kane_mele_model(lam_so=0.3, lam_r=lam_r, m=0.7)
        assert tm.check_trs(mdl) < 1e-12


def test_kane_mele_decoupled_spin_blocks_are_haldane():
    lam_so, mass = 0.3, 0.5
    km = tm.kane_mele_model(t=1.0, lam_so=lam_so, lam_r=0.0, m=mass)
    hald_up = tm.haldane_model(t=1.0, t2=lam_so, phi=0.5 * np.pi, m=mass)
    hald_dn = tm.haldane_model(t=1.0, t2=lam_so, phi=-0.5 * np.pi, m=mass)
    gen = np.random.default_rng(6)
    for k in gen.uniform(0, TWO_PI, size=(12, 2)):
        h = km.bloch(k)
        up = h[np.ix_([0, 2], [0, 2])]
        dn = h[np.ix_([1, 3], [1, 3])]
        assert np.allclose(up, hald_up.bloch(k), atol=1e-12)
        assert np.allclose(dn, hald_dn.bloch(k), atol=1e-12)
        assert np.allclose(h[np.ix_([0, 2], [1, 3])], 0.0, atol=1e-14)


def test_layered_model_slices_are_kane_mele():
    mdl = tm.layered_3d_model(m=0.4, m_z=0.5, t_z=0.2)
    assert tm.check_trs(mdl) < 1e-12
    for kz in (0.0, np.pi, 1.1):
        km = tm.kane_mele_model(m=0.4 + 0.5 * np.cos(kz))
        gen = np.random.default_rng(7)
        for k2 in gen.uniform(0, TWO_PI, size=(6, 2)):
            k3 = np.array([k2[0], k2[1], kz])
            expected = km.bloch(k2) + 0.2 * np.cos(kz) * np.eye(4)
            assert np.allclose(mdl.bloch(k3), expected, atol=1e-12)


def test_cubic_ti_gap_formula():
    m = 2.0
    mdl = tm.cubic_ti_model(m=m)
    assert tm.check_trs(mdl) < 1e-12
    gen = np.random.default_rng(8)
    for k in gen.uniform(0, TWO_PI, size=(10, 3)):
        w = np.linalg.eigvalsh(mdl.bloch(k))
        gap = np.sqrt(np.sum(np.sin(k) ** 2) + (m - np.sum(np.cos(k))) ** 2)
        assert np.allclose(w, [-gap, -gap, gap, gap], atol=1e-12)


def test_antiunitary_validation():
    with pytest.raises(InputError):
        tm.AntiUnitary(np.eye(2), squares_to=-1)
    th = tm.AntiUnitary(np.array([[0.0, 1.0], [-1.0, 0.0]]), squares_to=-1)
    v = np.array([1.0 + 2j, 0.5j])
    assert np.allclose(th.apply(v), th.matrix @ v.conj())


def test_onsite_blocks_must_be_hermitian():
    with pytest.raises(InputError):
        tm.CrystalModel(
            1,
            np.eye(1),
            [tm.Site("s", (0.0,), 2)],
            [tm.HoppingTerm((0,), 0, 0, np.array([[0.0, 1.0], [0.0, 0.0]]))],
        )


def test_trim_points():
    pts = tm.trim_points(2)
    assert pts.shape == (4, 2)
    assert sorted(map(tuple, pts.tolist())) == [
        (0.0, 0.0),
        (0.0, np.pi),
        (np.pi, 0.0),
        (np.pi, np.pi),
    ]


def test_json_roundtrip_static(tmp_path):
    mdl = tm.kane_mele_model(lam_so=0.3, lam_r=0.25, m=0.9)
    path = tmp_path / "km.json"
    tm.save_model(str(path), mdl)
    loaded, drive = tm.load_model(str(path))
    assert drive is None
    assert loaded.n_orbitals == 4
    k = np.random.default_rng(9).uniform(0, TWO_PI, size=(7, 2))
    assert np.allclose(loaded.bloch(k), mdl.bloch(k), atol=1e-12)
    assert tm.check_trs(loaded) < 1e-12


def test_json_roundtrip_drive(tmp_path):
    base = tm.kane_mele_model(lam_so=0.3)
    phases = tuple(
        (base.scaled({i: 2.5}), 1.0 / 3.0) for i in range(3)
    )
    drive = tm.DriveProtocol(1.0, phases)
    path = tmp_path / "drive.json"
    tm.save_model(str(path), base, drive)
    _, loaded = tm.load_model(str(path))
    assert loaded is not None
    assert loaded.period == pytest.approx(1.0)
    k = np.array([[0.4, 1.7]])
    for t in (0.1, 0.5, 0.9):
        assert np.allclose(loaded.bloch(t, k), drive.bloch(t, k), atol=1e-12)


def test_drive_phase_lookup_and_validation():
    base = tm.chain_model()
    with pytest.raises(InputError):
        tm.DriveProtocol(1.0, ((base, 0.4), (base, 0.4)))
    drive = tm.DriveProtocol(1.0, ((base.scaled({0: 2.0}), 0.5), (base, 0.5)))
    assert drive.phase_at(0.25).bloch(np.array([0.0]))[0, 0] == pytest.approx(4.0)
    assert drive.phase_at(0.75).bloch(np.array([0.0]))[0, 0] == pytest.approx(2.0)
    assert drive.phase_at(1.25).bloch(np.array([0.0]))[0, 0] == pytest.approx(4.0)


def test_palindromic_drive_is_time_reversal_symmetric():
    base = tm.kane_mele_model(lam_so=0.3)
    a, b, c = base.scaled({0: 1.6}), base.scaled({1: 1.6}), base
    drive = tm.DriveProtocol(
        1.0, ((a, 0.2), (b, 0.2), (c, 0.2), (b, 0.2), (a, 0.2))
    )
    assert tm.check_drive_trs(drive) < 1e-12
    skew = tm.DriveProtocol(1.0, ((a, 0.3), (b, 0.3), (c, 0.4)))
    assert tm.check_drive_trs(skew) > 0.01


def test_malformed_model_files(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(InputError):
        tm.load_model(str(bad))
    bad.write_text('{"dimension": 2}')
    with pytest.raises(InputError):
        tm.load_model(str(bad))
    with pytest.raises(InputError):
        tm.load_model(str(tmp_path / "missing.json"))
