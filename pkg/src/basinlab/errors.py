"""Exception types shared across the package.

ScreeningError is special: it marks a hypothesis-screening failure (the input
does not satisfy the preconditions a check needs, as opposed to the check
failing or the code breaking).  The CLI maps it to exit code 2.
"""


class BasinlabError(Exception):
    """Base class for package-specific failures."""


class MapConstructionError(BasinlabError):
    """Invalid rational map data (degree < 2, common factor, bad file)."""


class RootFindingError(BasinlabError):
    """Root solver did not converge to the required residual."""


class AtlasError(BasinlabError):
    """Basin raster problem: unresolved attractor cell, uncertifiable capture
    radius, or an empty boundary search."""


class ChartError(BasinlabError):
    """Local coordinate at an attractor could not be built or validated."""


class BranchAmbiguityError(BasinlabError):
    """Preimage branch selection was ambiguous (continuation near a critical point)."""


class LiftError(BasinlabError):
    """Chord lifting found no candidate, or more than one, at the target preimage."""


class ConvergenceError(BasinlabError):
    """An iterative refinement (Newton, pullback, bisection) failed to converge."""


class ScreeningError(BasinlabError):
    """Hypothesis screening failed; the requested check does not apply to this input."""
