"""Exception taxonomy shared across the package.

Programming-contract violations (wrong shapes, bad dtypes, invalid
parameter values) raise plain ``ValueError``/``TypeError``.  The classes
here cover domain failures a caller may want to catch and handle:
unreadable input files, infeasible encodings, diverging integrations,
download problems.
"""


class LaserSolveError(Exception):
    """Base class for all package-specific failures."""


class MatrixFormatError(LaserSolveError):
    """A matrix file is malformed or uses an unsupported variant."""


class EncodingError(LaserSolveError):
    """A linear system cannot be mapped onto laser couplings."""


class DynamicsError(LaserSolveError):
    """The laser integration produced a non-finite state."""


class RestartBudgetError(DynamicsError):
    """Phase excursions persisted through every allowed restart."""


class SolverError(LaserSolveError):
    """An iterative solver was misconfigured.

    Numerical breakdown during iteration is not an exception: it is
    reported through the outcome record as a non-convergence cause.
    """


class CollectionError(LaserSolveError):
    """Base class for matrix-collection client failures."""


class MatrixNotFoundError(CollectionError):
    """No collection entry matches the requested name."""


class AmbiguousNameError(CollectionError):
    """More than one collection entry matches the requested name."""


class NetworkError(CollectionError):
    """A download or index refresh failed at the transport level."""


class ChecksumError(CollectionError):
    """A cached or downloaded file does not match its recorded digest."""


class BenchmarkError(LaserSolveError):
    """A benchmark plan or summary request is unusable."""
