"""Exception hierarchy shared across the toolkit."""


class FabsegError(Exception):
    """Base class for all toolkit errors."""


class MeshParseError(FabsegError):
    """Raised when an OBJ/STL byte stream cannot be parsed.

    Carries the 1-based line number for ASCII formats when known.
    """

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class MeshValidationError(FabsegError):
    """Raised when mesh data violates a structural invariant."""


class RemeshError(FabsegError):
    """Raised when the remesher cannot reach the requested resolution.

    ``achieved`` holds the face count the remesher got stuck at.
    """

    def __init__(self, message, achieved=None):
        super().__init__(message)
        self.achieved = achieved


class GraphError(FabsegError):
    """Raised for degenerate dual graphs (isolated faces, zero distances)."""


class EigenConvergenceError(FabsegError):
    """Raised when the iterative eigensolver fails to converge.

    ``residual`` is the worst residual achieved before giving up.
    """

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class SimilarityError(FabsegError):
    """Raised for invalid similarity inputs (disconnected mesh, mismatched R)."""


class CorpusError(FabsegError):
    """Raised for corpus-level failures (empty index, unreadable manifest)."""


class ClassificationError(FabsegError):
    """Raised when classification cannot proceed (exhausted corpus)."""


class StyleError(FabsegError):
    """Raised for invalid style parameters (amplitude bound violations)."""
