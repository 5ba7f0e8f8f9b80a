"""Exception taxonomy shared across the package.

Two broad families matter to callers: obstruction-type errors (the input genuinely
lacks the structure the computation needs — a spectral gap, a valid branch lift, a
non-degenerate anchor) and convergence-type errors (the discretization was too coarse
and the configured refinement budget ran out). The CLI maps them to distinct exit
codes; library users can catch the bases.
"""

from __future__ import annotations


class ToposcopeError(Exception):
    """Base class for all package-specific errors."""


class InputError(ToposcopeError):
    """Malformed user input: model files, parameter combinations, CLI arguments."""


class ObstructionError(ToposcopeError):
    """The input lacks structure required by the computation (not a numerics issue)."""


class BranchCut(ObstructionError):
    """An eigenvalue sits on (or too close to) the chosen branch cut.

    Carries the offending eigenvalue in the message so lift-selection code can react.
    """


class NoGap(ObstructionError):
    """The unitary's spectrum has no angular gap wider than the tolerance."""


class Obstruction(ObstructionError):
    """A topological obstruction prevents the requested trivialization."""


class LiftInvalid(ObstructionError):
    """A branch lift stopped being valid somewhere inside the cell it was chosen for."""


class AnchorDegenerate(ObstructionError):
    """The Pfaffian anchor at a fixed point is numerically degenerate."""


class ConvergenceError(ToposcopeError):
    """Refinement budget exhausted without reaching the requested accuracy."""


class MeshTooCoarse(ConvergenceError):
    """Per-cell variation exceeds the branch radius of the matrix logarithm."""


class RefineGrid(ConvergenceError):
    """A derived quantity (e.g. an edge-mode velocity) is unresolvable at this grid."""
