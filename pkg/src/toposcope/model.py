"""Tight-binding crystal models and Bloch Hamiltonians.

Conventions
-----------
Momenta are reduced coordinates ``k = (k_1, ..., k_d)`` with ``k_i = k . a_i`` in
``[0, 2*pi)``; the Brillouin zone is the torus ``[0, 2*pi)^d`` and the time-reversal
invariant momenta are ``{0, pi}^d``. The Bloch Hamiltonian uses the periodic
convention

    H(k) = sum_n exp(-1j * k . n) * H_n   (n integer cell offsets),

so ``H(k + 2*pi*e_i) = H(k)`` holds identically (no basis-position phases). A
hopping term ``(offset n, source j, target i, block B)`` contributes ``B`` at the
``(i, j)`` block together with its automatic Hermitian partner ``(-n, i, j, B^+)``;
on-site diagonal terms (zero offset, ``source == target``) must be given Hermitian
and are not doubled.

Built-in models
---------------
``haldane_model``: honeycomb lattice, nearest-neighbour hopping ``t``, staggered
mass ``m``, and complex next-nearest-neighbour hopping ``t2 * exp(1j*phi)`` whose
orientation is positive along ``x -> x + a1``, ``x -> x - a1 + a2``, ``x -> x - a2``
on the A sublattice and the reversed triple on B. The gap closes on
``m = +-3*sqrt(3)*t2*sin(phi)``.

``kane_mele_model``: two spinful honeycomb sublattices (basis A-up, A-down, B-up,
B-down). Spin-orbit coupling is the next-nearest-neighbour term
``1j * lam_so * nu * sigma_z`` with ``nu = +1`` exactly on the Haldane-positive
triples above, i.e. each spin sector is a Haldane model at ``phi = +-pi/2`` with
``t2*sin(phi) -> +-lam_so``. The Rashba term on nearest-neighbour bonds is
``1j * lam_r * (sigma_x * dhat_y - sigma_y * dhat_x)`` with ``dhat`` the geometric
unit bond direction. Time reversal is ``1j*sigma_y`` per site with square -1.

``layered_3d_model``: Kane-Mele layers stacked along the third axis with a
k_z-modulated staggered mass (``m(k_z) = m + m_z*cos(k_z)``) and an optional
spin-independent interlayer hopping; choosing ``m`` and ``m_z`` on opposite sides
of the 2d transition makes the k_z = 0 and k_z = pi slices topologically distinct.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import InputError

Array = np.ndarray

TRS_TOL = 1e-9


def trim_points(dim: int) -> Array:
    """All time-reversal invariant momenta {0, pi}^dim, shape (2**dim, dim)."""
    grids = np.meshgrid(*([np.array([0.0, np.pi])] * dim), indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=-1)


@dataclass(frozen=True)
class Site:
    name: str
    position: tuple[float, ...]
    dim: int = 1


@dataclass(frozen=True)
class HoppingTerm:
    """Hopping block from ``source`` in cell 0 to ``target`` in cell ``offset``."""

    offset: tuple[int, ...]
    source: int
    target: int
    block: Array

    def is_onsite_diagonal(self) -> bool:
        return self.source == self.target and all(n == 0 for n in self.offset)


@dataclass(frozen=True)
class AntiUnitary:
    """Antiunitary operator ``theta = U * complex conjugation``."""

    matrix: Array
    squares_to: int = -1

    def __post_init__(self) -> None:
        u = np.asarray(self.matrix, dtype=complex)
        n = u.shape[0]
        if u.shape != (n, n):
            raise InputError("time-reversal matrix must be square")
        if np.max(np.abs(u.conj().T @ u - np.eye(n))) > TRS_TOL:
            raise InputError("time-reversal matrix is not unitary")
        sq = u @ u.conj()
        if np.max(np.abs(sq - self.squares_to * np.eye(n))) > TRS_TOL:
            raise InputError(
                f"theta^2 is not {self.squares_to:+d} * identity "
                f"(deviation {np.max(np.abs(sq - self.squares_to * np.eye(n))):.3e})"
            )
        object.__setattr__(self, "matrix", u)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def apply(self, vectors: Array) -> Array:
        """theta acting on column vectors (or a matrix of columns)."""
        return self.matrix @ np.conj(vectors)

    def conjugate(self, m: Array) -> Array:
        """``theta M theta^{-1}`` for a linear operator M (batched over leading axes)."""
        return np.einsum("ij,...jk,lk->...il", self.matrix, np.conj(m), np.conj(self.matrix))


class CrystalModel:
    """A tight-binding model on a Bravais lattice with optional time reversal."""

    def __init__(
        self,
        dimension: int,
        bravais: Array,
        sites: Sequence[Site],
        hoppings: Sequence[HoppingTerm],
        time_reversal: AntiUnitary | None = None,
        name: str = "model",
    ) -> None:
        self.dimension = int(dimension)
        self.bravais = np.asarray(bravais, dtype=float)
        if self.bravais.shape != (self.dimension, self.dimension):
            raise InputError("bravais must be a (dimension x dimension) matrix")
        self.sites = tuple(sites)
        if not self.sites:
            raise InputError("model needs at least one site")
        self.name = name
        offsets = np.cumsum([0] + [s.dim for s in self.sites])
        self._site_offsets = offsets
        self.n_orbitals = int(offsets[-1])
        self.hoppings = tuple(self._validated(h) for h in hoppings)
        self.time_reversal = time_reversal
        if time_reversal is not None and time_reversal.dim != self.n_orbitals:
            raise InputError("time-reversal matrix size does not match orbital count")
        self._embedded = self._embed_terms()

    # -- construction helpers -------------------------------------------------

    def _validated(self, h: HoppingTerm) -> HoppingTerm:
        if len(h.offset) != self.dimension:
            raise InputError(f"hopping offset {h.offset} has wrong dimension")
        if not (0 <= h.source < len(self.sites) and 0 <= h.target < len(self.sites)):
            raise InputError(f"hopping references unknown site: {h}")
        block = np.atleast_2d(np.asarray(h.block, dtype=complex))
        want = (self.sites[h.target].dim, self.sites[h.source].dim)
        if block.shape != want:
            raise InputError(
                f"hopping block shape {block.shape} does not match sites {want}"
            )
        if h.is_onsite_diagonal() and np.max(np.abs(block - block.conj().T)) > 1e-12:
            raise InputError("on-site diagonal blocks must be Hermitian")
        return HoppingTerm(tuple(int(n) for n in h.offset), h.source, h.target, block)

    def _embed_terms(self) -> tuple[Array, Array]:
        """Dense embeddings: offsets (T, d) and matrices (T, N, N), h.c. included."""
        n = self.n_orbitals
        off_list: list[tuple[int, ...]] = []
        mat_list: list[Array] = []
        for h in self.hoppings:
            e = np.zeros((n, n), dtype=complex)
            r0 = self._site_offsets[h.target]
            c0 = self._site_offsets[h.source]
            e[r0 : r0 + h.block.shape[0], c0 : c0 + h.block.shape[1]] = h.block
            off_list.append(h.offset)
            mat_list.append(e)
            if not h.is_onsite_diagonal():
                off_list.append(tuple(-x for x in h.offset))
                mat_list.append(e.conj().T)
        return np.array(off_list, dtype=float), np.array(mat_list)

    # -- evaluation ------------------------------------------------------------

    def bloch(self, k: Array) -> Array:
        """Bloch Hamiltonian at reduced momenta ``k`` with shape (..., d) -> (..., N, N)."""
        k = np.asarray(k, dtype=float)
        if k.shape[-1] != self.dimension:
            raise InputError(
                f"momentum has dimension {k.shape[-1]}, model has {self.dimension}"
            )
        offsets, mats = self._embedded
        phases = np.exp(-1j * (k @ offsets.T))
        return np.einsum("...t,tij->...ij", phases, mats)

    def site_slices(self) -> list[slice]:
        return [
            slice(self._site_offsets[i], self._site_offsets[i + 1])
            for i in range(len(self.sites))
        ]

    def hopping_range(self, axis: int) -> int:
        return max((abs(h.offset[axis]) for h in self.hoppings), default=0)

    def with_hoppings(self, hoppings: Sequence[HoppingTerm], name: str | None = None) -> "CrystalModel":
        return CrystalModel(
            self.dimension,
            self.bravais,
            self.sites,
            hoppings,
            self.time_reversal,
            name or self.name,
        )

    def scaled(self, factors: dict[int, float], name: str | None = None) -> "CrystalModel":
        """Copy with hopping ``i`` scaled by ``factors[i]`` (identity elsewhere)."""
        new = [
            HoppingTerm(h.offset, h.source, h.target, factors.get(i, 1.0) * h.block)
            for i, h in enumerate(self.hoppings)
        ]
        return self.with_hoppings(new, name)


def check_trs(model: CrystalModel, grid: int = 8) -> float:
    """Max residual of ``theta H(k) theta^{-1} = H(-k)`` over a momentum grid.

    A model counts as time-reversal symmetric when the residual is <= 1e-8.
    """
    if model.time_reversal is None:
        raise InputError("model has no time-reversal operator")
    axes = [np.linspace(0.0, 2 * np.pi, grid, endpoint=False)] * model.dimension
    mesh = np.meshgrid(*axes, indexing="ij")
    ks = np.stack([m.ravel() for m in mesh], axis=-1)
    lhs = model.time_reversal.conjugate(model.bloch(ks))
    rhs = model.bloch(-ks)
    return float(np.max(np.abs(lhs - rhs)))


# -- drives ---------------------------------------------------------------------


@dataclass
class DriveProtocol:
    """Periodic drive: a piecewise-constant schedule or a smooth Hamiltonian.

    Exactly one of ``phases`` (list of (model, duration), durations summing to the
    period) and ``hamiltonian`` (callable ``(t, k) -> H``) must be provided. The
    drive is extended periodically outside ``[0, period)``.
    """

    period: float
    phases: tuple[tuple[CrystalModel, float], ...] = ()
    hamiltonian: Callable[[float, Array], Array] | None = None
    dim: int | None = None
    theta: AntiUnitary | None = None
    name: str = "drive"

    def __post_init__(self) -> None:
        if (not self.phases) == (self.hamiltonian is None):
            raise InputError("exactly one of phases / hamiltonian must be given")
        if self.period <= 0:
            raise InputError("drive period must be positive")
        if self.phases:
            total = sum(d for _, d in self.phases)
            if abs(total - self.period) > 1e-9 * max(1.0, self.period):
                raise InputError(
                    f"phase durations sum to {total}, period is {self.period}"
                )
            dims = {m.n_orbitals for m, _ in self.phases}
            if len(dims) != 1:
                raise InputError("all drive phases must share the orbital count")
        elif self.dim is None:
            raise InputError("smooth drives must declare their momentum dimension")

    @property
    def n_orbitals(self) -> int:
        if self.phases:
            return self.phases[0][0].n_orbitals
        probe = np.zeros((1, self.dimension))
        return int(np.asarray(self.hamiltonian(0.0, probe)).shape[-1])

    @property
    def dimension(self) -> int:
        if self.phases:
            return self.phases[0][0].dimension
        return int(self.dim)

    def boundaries(self) -> Array:
        return np.concatenate([[0.0], np.cumsum([d for _, d in self.phases])])

    def phase_at(self, t: float) -> CrystalModel:
        tau = float(np.mod(t, self.period))
        edges = self.boundaries()
        idx = int(np.searchsorted(edges, tau, side="right") - 1)
        idx = min(max(idx, 0), len(self.phases) - 1)
        return self.phases[idx][0]

    def bloch(self, t: float, k: Array) -> Array:
        if self.hamiltonian is not None:
            return np.asarray(self.hamiltonian(float(np.mod(t, self.period)), k))
        return self.phase_at(t).bloch(k)

    @property
    def time_reversal(self) -> AntiUnitary | None:
        if self.phases:
            return self.phases[0][0].time_reversal
        return self.theta


def check_drive_trs(drive: DriveProtocol, grid: int = 8, time_samples: int = 16) -> float:
    """Max residual of ``theta H(t, k) theta^{-1} = H(-t, -k)`` over sample points."""
    theta = drive.time_reversal
    if theta is None:
        raise InputError("drive has no time-reversal operator")
    axes = [np.linspace(0.0, 2 * np.pi, grid, endpoint=False)] * drive.dimension
    mesh = np.meshgrid(*axes, indexing="ij")
    ks = np.stack([m.ravel() for m in mesh], axis=-1)
    worst = 0.0
    for s in range(time_samples):
        # sample away from phase boundaries, where the residual is ill-defined
        t = drive.period * (s + 0.382) / time_samples
        lhs = theta.conjugate(drive.bloch(t, ks))
        rhs = drive.bloch(-t, -ks)
        worst = max(worst, float(np.max(np.abs(lhs - rhs))))
    return worst


# -- built-in models --------------------------------------------------------------

_HEX_BRAVAIS = np.array([[1.0, 0.0], [0.5, 0.5 * np.sqrt(3.0)]])

# Haldane-positive next-nearest-neighbour offsets on the A sublattice; the B
# sublattice uses the negatives. Chosen so the flux pattern matches the sign
# structure of the staggered mass term below.
_NNN_A = ((1, 0), (-1, 1), (0, -1))
_NN_OFFSETS = ((0, 0), (1, 0), (0, 1))


def chain_model(t: float = 1.0) -> CrystalModel:
    """Single-orbital 1d chain; Bloch Hamiltonian ``2*t*cos(k)``."""
    return CrystalModel(
        1,
        np.eye(1),
        [Site("s", (0.0,), 1)],
        [HoppingTerm((1,), 0, 0, np.array([[t]]))],
        name="chain",
    )


def haldane_model(
    t: float = 1.0, t2: float = 1.0 / 3.0, phi: float = 0.5 * np.pi, m: float = 0.0
) -> CrystalModel:
    sites = [Site("A", (0.0, 0.0), 1), Site("B", (1.0 / 3.0, 1.0 / 3.0), 1)]
    c2 = t2 * np.exp(1j * phi)
    hops = [HoppingTerm(n, 1, 0, np.array([[t]])) for n in _NN_OFFSETS]
    hops += [HoppingTerm(n, 0, 0, np.array([[c2]])) for n in _NNN_A]
    hops += [HoppingTerm(tuple(-x for x in n), 1, 1, np.array([[c2]])) for n in _NNN_A]
    hops += [
        HoppingTerm((0, 0), 0, 0, np.array([[m]], dtype=complex)),
        HoppingTerm((0, 0), 1, 1, np.array([[-m]], dtype=complex)),
    ]
    return CrystalModel(2, _HEX_BRAVAIS, sites, hops, name="haldane")


_SX = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
_SY = np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex)
_SZ = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)


def _km_sites() -> list[Site]:
    return [Site("A", (0.0, 0.0), 2), Site("B", (1.0 / 3.0, 1.0 / 3.0), 2)]


def _km_hoppings(
    t: float, lam_so: float, lam_r: float, m: float, bravais: Array
) -> list[HoppingTerm]:
    hops: list[HoppingTerm] = []
    pos_a = np.array([0.0, 0.0]) @ bravais
    pos_b = np.array([1.0 / 3.0, 1.0 / 3.0]) @ bravais
    for n in _NN_OFFSETS:
        block = t * np.eye(2, dtype=complex)
        if lam_r != 0.0:
            # bond from B in cell 0 to A in cell n
            delta = pos_a + np.array(n, dtype=float) @ bravais - pos_b
            dhat = delta / np.linalg.norm(delta)
            block = block + 1j * lam_r * (_SX * dhat[1] - _SY * dhat[0])
        hops.append(HoppingTerm(n, 1, 0, block))
    so = 1j * lam_so * _SZ
    hops += [HoppingTerm(n, 0, 0, so) for n in _NNN_A]
    hops += [HoppingTerm(tuple(-x for x in n), 1, 1, so) for n in _NNN_A]
    hops += [
        HoppingTerm((0, 0), 0, 0, m * np.eye(2, dtype=complex)),
        HoppingTerm((0, 0), 1, 1, -m * np.eye(2, dtype=complex)),
    ]
    return hops


def _km_theta() -> AntiUnitary:
    u = np.kron(np.eye(2), 1j * _SY)
    return AntiUnitary(u, squares_to=-1)


def kane_mele_model(
    t: float = 1.0, lam_so: float = 0.3, lam_r: float = 0.0, m: float = 0.0
) -> CrystalModel:
    """Spinful honeycomb model; topological for ``|m|`` below roughly 3*sqrt(3)*lam_so."""
    return CrystalModel(
        2,
        _HEX_BRAVAIS,
        _km_sites(),
        _km_hoppings(t, lam_so, lam_r, m, _HEX_BRAVAIS),
        time_reversal=_km_theta(),
        name="kane_mele",
    )


def layered_3d_model(
    t: float = 1.0,
    lam_so: float = 0.3,
    lam_r: float = 0.0,
    m: float = 0.4,
    m_z: float = 0.5,
    t_z: float = 0.2,
) -> CrystalModel:
    """Stacked Kane-Mele layers with a k_z-modulated staggered mass.

    The 2d slice at fixed ``k_z`` is a Kane-Mele model with mass
    ``m + m_z*cos(k_z)`` (plus an inert interlayer dispersion when ``t_z != 0``).
    The defaults keep every slice inside the topological phase, giving a weak
    stack; pushing ``m + m_z`` past the 2d transition while keeping ``m - m_z``
    below it would instead close the 3d gap at an intermediate ``k_z`` (the
    slice transition is a genuine bulk gap closing for this hopping structure),
    so strong phases are exercised through :func:`cubic_ti_model`.
    """
    bravais3 = np.eye(3)
    bravais3[:2, :2] = _HEX_BRAVAIS
    sites = [Site("A", (0.0, 0.0, 0.0), 2), Site("B", (1.0 / 3.0, 1.0 / 3.0, 0.0), 2)]
    hops: list[HoppingTerm] = []
    for h in _km_hoppings(t, lam_so, lam_r, m, _HEX_BRAVAIS):
        hops.append(HoppingTerm(h.offset + (0,), h.source, h.target, h.block))
    half_mz = 0.5 * m_z * np.eye(2, dtype=complex)
    hops.append(HoppingTerm((0, 0, 1), 0, 0, half_mz))
    hops.append(HoppingTerm((0, 0, 1), 1, 1, -half_mz))
    if t_z != 0.0:
        tz = 0.5 * t_z * np.eye(2, dtype=complex)
        hops.append(HoppingTerm((0, 0, 1), 0, 0, tz))
        hops.append(HoppingTerm((0, 0, 1), 1, 1, tz))
    return CrystalModel(
        3, bravais3, sites, hops, time_reversal=_km_theta(), name="layered_km"
    )


def cubic_ti_model(m: float = 2.0) -> CrystalModel:
    """Four-band cubic-lattice model ``sum_i sin(k_i) G_i + (m - sum_i cos(k_i)) G_0``.

    ``G_0 = tau_z x 1`` and ``G_i = tau_x x sigma_i`` anticommute, so the gap is
    ``sqrt(sum sin^2 + (m - sum cos)^2)`` and closes only at ``m in {-3, -1, 1, 3}``.
    For ``1 < |m| < 3`` the k_z = 0 and k_z = pi slices carry different 2d
    invariants (a strong phase); outside that range the model is trivial.
    Orbital basis: (orbital a, up), (a, down), (b, up), (b, down).
    """
    sites = [Site("a", (0.0, 0.0, 0.0), 2), Site("b", (0.5, 0.5, 0.5), 2)]
    sigmas = (_SX, _SY, _SZ)
    hops: list[HoppingTerm] = [
        HoppingTerm((0, 0, 0), 0, 0, m * np.eye(2, dtype=complex)),
        HoppingTerm((0, 0, 0), 1, 1, -m * np.eye(2, dtype=complex)),
    ]
    for axis in range(3):
        off = tuple(1 if a == axis else 0 for a in range(3))
        neg = tuple(-x for x in off)
        hops.append(HoppingTerm(off, 0, 0, -0.5 * np.eye(2, dtype=complex)))
        hops.append(HoppingTerm(off, 1, 1, 0.5 * np.eye(2, dtype=complex)))
        hops.append(HoppingTerm(off, 1, 0, 0.5j * sigmas[axis]))
        hops.append(HoppingTerm(neg, 1, 0, -0.5j * sigmas[axis]))
    return CrystalModel(
        3, np.eye(3), sites, hops, time_reversal=_km_theta(), name="cubic_ti"
    )


# -- JSON serialization -----------------------------------------------------------


def _matrix_to_json(m: Array) -> list:
    m = np.atleast_2d(np.asarray(m, dtype=complex))
    return [[[float(x.real), float(x.imag)] for x in row] for row in m]


def _matrix_from_json(data, label: str) -> Array:
    try:
        arr = np.asarray(data, dtype=float)
        if arr.ndim != 3 or arr.shape[-1] != 2:
            raise ValueError
    except (TypeError, ValueError):
        raise InputError(f"{label}: matrices must be nested [re, im] pairs") from None
    return arr[..., 0] + 1j * arr[..., 1]


def model_to_dict(model: CrystalModel, drive: DriveProtocol | None = None) -> dict:
    out: dict = {
        "dimension": model.dimension,
        "bravais": model.bravais.tolist(),
        "sites": [
            {"name": s.name, "position": list(s.position), "dim": s.dim}
            for s in model.sites
        ],
        "hoppings": [
            {
                "offset": list(h.offset),
                "source": h.source,
                "target": h.target,
                "block": _matrix_to_json(h.block),
            }
            for h in model.hoppings
        ],
    }
    if model.time_reversal is not None:
        out["time_reversal"] = {
            "matrix": _matrix_to_json(model.time_reversal.matrix),
            "squares_to": model.time_reversal.squares_to,
        }
    if drive is not None:
        if not drive.phases:
            raise InputError("only piecewise-constant drives can be serialized")
        out["drive"] = {
            "period": drive.period,
            "phases": [
                {
                    "duration": dur,
                    "scale": _diff_scale(model, phase),
                }
                for phase, dur in drive.phases
            ],
        }
    return out


def _diff_scale(base: CrystalModel, phase: CrystalModel) -> dict[str, float]:
    """Express a phase as per-hopping scale factors relative to the base model."""
    if len(phase.hoppings) != len(base.hoppings):
        raise InputError("drive phases must share the base model's hopping list")
    scale: dict[str, float] = {}
    for i, (hb, hp) in enumerate(zip(base.hoppings, phase.hoppings)):
        nb = float(np.max(np.abs(hb.block)))
        if nb == 0.0:
            continue
        ratios = hp.block[np.abs(hb.block) > 1e-300] / hb.block[np.abs(hb.block) > 1e-300]
        if ratios.size == 0:
            continue
        r = complex(ratios.flat[0])
        if np.max(np.abs(hp.block - r * hb.block)) > 1e-12 * nb or abs(r.imag) > 1e-12:
            raise InputError("drive phase is not a real scaling of the base hoppings")
        if abs(r.real - 1.0) > 1e-15:
            scale[str(i)] = float(r.real)
    return scale


def _require(cond: bool, msg: str) -> None:
    if not cond:
        raise InputError(msg)


def model_from_dict(data: dict) -> tuple[CrystalModel, DriveProtocol | None]:
    _require(isinstance(data, dict), "model file must contain a JSON object")
    for key in ("dimension", "bravais", "sites", "hoppings"):
        _require(key in data, f"model file is missing the '{key}' field")
    dim = data["dimension"]
    _require(isinstance(dim, int) and 1 <= dim <= 3, "dimension must be 1, 2, or 3")
    sites = []
    for s in data["sites"]:
        _require(
            isinstance(s, dict) and {"name", "position"} <= set(s),
            "each site needs 'name' and 'position'",
        )
        sites.append(Site(str(s["name"]), tuple(float(x) for x in s["position"]), int(s.get("dim", 1))))
    hoppings = []
    for i, h in enumerate(data["hoppings"]):
        _require(
            isinstance(h, dict) and {"offset", "source", "target", "block"} <= set(h),
            f"hopping {i} needs offset/source/target/block",
        )
        hoppings.append(
            HoppingTerm(
                tuple(int(x) for x in h["offset"]),
                int(h["source"]),
                int(h["target"]),
                _matrix_from_json(h["block"], f"hopping {i}"),
            )
        )
    theta = None
    if "time_reversal" in data and data["time_reversal"] is not None:
        tr = data["time_reversal"]
        _require(isinstance(tr, dict) and "matrix" in tr, "time_reversal needs a matrix")
        theta = AntiUnitary(
            _matrix_from_json(tr["matrix"], "time_reversal"),
            int(tr.get("squares_to", -1)),
        )
    try:
        model = CrystalModel(
            dim,
            np.asarray(data["bravais"], dtype=float),
            sites,
            hoppings,
            time_reversal=theta,
            name=str(data.get("name", "model")),
        )
    except (ValueError, TypeError) as exc:
        raise InputError(f"invalid model data: {exc}") from None

    drive = None
    if "drive" in data and data["drive"] is not None:
        d = data["drive"]
        _require(
            isinstance(d, dict) and "period" in d and "phases" in d,
            "drive needs 'period' and 'phases'",
        )
        phases = []
        for j, ph in enumerate(d["phases"]):
            _require(
                isinstance(ph, dict) and "duration" in ph,
                f"drive phase {j} needs a duration",
            )
            scale = {int(i): float(v) for i, v in ph.get("scale", {}).items()}
            bad = [i for i in scale if not 0 <= i < len(model.hoppings)]
            _require(not bad, f"drive phase {j} scales unknown hoppings {bad}")
            phases.append((model.scaled(scale), float(ph["duration"])))
        drive = DriveProtocol(float(d["period"]), tuple(phases), name=model.name + "_drive")
    return model, drive


def load_model(path: str) -> tuple[CrystalModel, DriveProtocol | None]:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise InputError(f"cannot read model file: {exc}") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"model file is not valid JSON: {exc}") from None
    return model_from_dict(data)


def save_model(path: str, model: CrystalModel, drive: DriveProtocol | None = None) -> None:
    with open(path, "w") as fh:
        json.dump(model_to_dict(model, drive), fh, indent=1, sort_keys=True)
        fh.write("\n")
