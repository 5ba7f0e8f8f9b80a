"""Determinant-line elements over spectral arcs and their gluing algebra.

For a unitary ``V`` and branch angles ``a < b`` in ``(-2*pi, 0)``, the line
``L_(a,b)(V)`` is the top exterior power of the spectral subspace of ``V`` on
the arc ``beta in (a, b)`` (branch coordinates as in :mod:`toposcope.numeric`).
Its canonical unit element is the wedge of the deterministic arc basis, columns
ordered by ascending branch coordinate.

Holonomy assembly manipulates these lines through *arrows*: the ordered pair
``a -> b`` stands for ``L_(a,b)`` when ``a < b`` and for its dual when
``a > b``. Transporting along a directed edge leaves the arrow ``from -> to``
at the edge's end vertex and the reversed arrow at its start vertex; at every
vertex the collected arrows must chain into closed cycles (their composition
factors are the gluing determinants), except at domain-boundary vertices where
a single residual arrow survives and is consumed by a junction or a fixed-point
anchor.

Composition of two arrows sharing their middle label reduces to one canonical
determinant per sorted label triple ``s1 < s2 < s3``:

    d = det( U_(s1,s3)^+ [ U_(s1,s2) | U_(s2,s3) ] ),

entering directly for cyclic (even) orderings of the triple and conjugated for
the odd ones. ``|d| = 1`` exactly, because the two blocks span orthogonal
subspaces of the same arc.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import numeric
from ..errors import AnchorDegenerate, LiftInvalid
from ..model import AntiUnitary

Array = np.ndarray

TWO_PI = 2.0 * np.pi

ANCHOR_TOL = 1e-8
_EVEN_PATTERNS = {(0, 1, 2), (1, 2, 0), (2, 0, 1)}


def circular_distance(beta: Array, angle: float) -> Array:
    d = np.mod(beta - angle, TWO_PI)
    return np.minimum(d, TWO_PI - d)


@dataclass
class VertexData:
    """Eigendecomposition of the field at one mesh vertex, in branch coordinates.

    ``beta`` is sorted ascending in ``[-2*pi, 0)`` and ``q`` holds the matching
    orthonormal eigenvector columns, so arc frames sliced from it are exactly
    the deterministic bases of :func:`toposcope.numeric.arc_basis`.
    """

    beta: Array
    q: Array

    @staticmethod
    def from_eig(lam: Array, q: Array) -> "VertexData":
        beta = numeric.branch_coordinates(lam)
        order = np.argsort(beta, kind="stable")
        return VertexData(beta[order], q[:, order])

    def check_cut(self, angle: float, gap_tol: float) -> None:
        d = float(np.min(circular_distance(self.beta, angle)))
        if d < gap_tol:
            raise LiftInvalid(
                f"eigenvalue within {d:.3e} of the branch cut at angle {angle:.6f}"
            )

    def rank(self, lo: float, hi: float) -> int:
        return int(np.count_nonzero((self.beta > lo) & (self.beta < hi)))

    def frame(self, lo: float, hi: float, gap_tol: float) -> Array:
        """Canonical orthonormal frame of the arc ``(lo, hi)`` (may have 0 columns)."""
        self.check_cut(lo, gap_tol)
        self.check_cut(hi, gap_tol)
        sel = (self.beta > lo) & (self.beta < hi)
        return self.q[:, sel]

    def merge_labels(self, labels: list[float], gap_tol: float) -> dict[float, float]:
        """Map each branch angle to its gap-equivalence representative here.

        Two angles are equivalent when no eigenvalue lies strictly between them;
        pairs built from equivalent angles select the same spectral subspace, so
        relabeling is exact. The representative is the smallest member.
        """
        uniq = sorted(set(labels))
        for angle in uniq:
            self.check_cut(angle, gap_tol)
        rep: dict[float, float] = {}
        current = prev = None
        for angle in uniq:
            if current is None or self.rank(prev, angle) > 0:
                current = angle
            rep[angle] = current
            prev = angle
        return rep


def glue_determinant(vd: VertexData, s1: float, s2: float, s3: float, gap_tol: float) -> complex:
    """Canonical gluing determinant for the sorted triple ``s1 < s2 < s3``."""
    u12 = vd.frame(s1, s2, gap_tol)
    u23 = vd.frame(s2, s3, gap_tol)
    u13 = vd.frame(s1, s3, gap_tol)
    if u12.shape[1] + u23.shape[1] != u13.shape[1]:
        raise AssertionError("arc ranks are inconsistent at a gluing vertex")
    if u13.shape[1] == 0:
        return 1.0 + 0.0j
    d = complex(np.linalg.det(u13.conj().T @ np.hstack([u12, u23])))
    if abs(abs(d) - 1.0) > 1e-8:
        raise AssertionError(f"gluing determinant has modulus {abs(d):.12f}")
    return d


def compose_factor(vd: VertexData, a: float, b: float, c: float, gap_tol: float) -> complex:
    """Factor from composing arrows ``a -> b`` and ``b -> c`` into ``a -> c``."""
    if a == c:
        return 1.0 + 0.0j
    triple = (a, b, c)
    order = tuple(sorted(range(3), key=lambda i: triple[i]))
    s = [triple[i] for i in order]
    pattern = tuple(order.index(i) for i in range(3))
    d = glue_determinant(vd, s[0], s[1], s[2], gap_tol)
    return d if pattern in _EVEN_PATTERNS else np.conj(d)


def fold_vertex(
    vd: VertexData, arrows: list[tuple[float, float]], gap_tol: float
) -> tuple[complex, tuple[float, float] | None]:
    """Contract all arrows collected at one vertex.

    Returns the accumulated scalar factor and the single residual arrow if the
    chains do not all close (one open chain is the legal boundary situation); a
    second residual is an internal assembly error.
    """
    if not arrows:
        return 1.0 + 0.0j, None
    rep = vd.merge_labels([x for arrow in arrows for x in arrow], gap_tol)
    pending = sorted(
        (rep[a], rep[b]) for a, b in arrows if rep[a] != rep[b]
    )
    factor = 1.0 + 0.0j
    residual: tuple[float, float] | None = None
    while pending:
        a0, b0 = pending.pop(0)
        cur = (a0, b0)
        while True:
            nxt = next((k for k, arr in enumerate(pending) if arr[0] == cur[1]), None)
            if nxt is None:
                # maybe a predecessor extends the chain from the left
                prv = next((k for k, arr in enumerate(pending) if arr[1] == cur[0]), None)
                if prv is None:
                    break
                x, y = pending.pop(prv)
                factor *= compose_factor(vd, x, y, cur[1], gap_tol)
                cur = (x, cur[1])
            else:
                x, y = pending.pop(nxt)
                factor *= compose_factor(vd, cur[0], cur[1], y, gap_tol)
                cur = (cur[0], y)
            if cur[0] == cur[1]:
                cur = None
                break
        if cur is None:
            continue
        if residual is not None:
            raise AssertionError(
                f"two uncancelled line slots at one vertex: {residual} and {cur}"
            )
        residual = cur
    return factor, residual


def pfaffian_anchor(frame: Array, theta: AntiUnitary) -> complex:
    """Pfaffian of the time-reversal Gram matrix ``<u_i | theta u_j>`` of a frame.

    The frame must span a theta-stable subspace (then the Gram matrix is
    antisymmetric and unimodular up to numerical error). Raises
    :class:`AnchorDegenerate` when the Pfaffian falls below ``1e-8``.
    """
    m = frame.shape[1]
    if m == 0:
        return 1.0 + 0.0j
    gram = frame.conj().T @ theta.matrix @ frame.conj()
    skew = float(np.max(np.abs(gram + gram.T)))
    if skew > ANCHOR_TOL:
        raise AnchorDegenerate(
            f"anchor subspace is not time-reversal stable (antisymmetry defect {skew:.3e})"
        )
    pf = numeric.pfaffian(gram)
    if abs(pf) < ANCHOR_TOL:
        raise AnchorDegenerate(f"anchor pfaffian magnitude {abs(pf):.3e} below tolerance")
    return complex(pf)


@dataclass(frozen=True)
class LineElement:
    """Transport result in a determinant line over a spectral arc.

    ``value`` is the transported coefficient relative to the canonical arc
    frames at the two endpoints; ``pair`` is the (ordered) angle pair naming the
    line, ``rank`` the arc rank along the edge. The element carries the arrow
    ``pair[0] -> pair[1]`` at ``end`` and the reversed arrow at ``start``.
    """

    value: complex
    pair: tuple[float, float]
    rank: int
    start: tuple[float, float]
    end: tuple[float, float]

    def reversed(self) -> "LineElement":
        return LineElement(
            np.conj(self.value), self.pair, self.rank, self.end, self.start
        )
