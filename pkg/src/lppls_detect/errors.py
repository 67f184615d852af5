"""Exception taxonomy and process exit codes shared by the library, service, and CLI."""


class LpplsError(Exception):
    """Base class for all errors raised by this package."""

    kind = "error"


class DataError(LpplsError):
    """Malformed or inadmissible input data (bad rows, non-positive prices, wrong resolution)."""

    kind = "data"


class ConfigError(LpplsError):
    """Invalid configuration: missing columns, non-nested spacings, bad schedules."""

    kind = "config"


class UsageError(LpplsError):
    """Caller violated an operation's preconditions (bad arguments)."""

    kind = "usage"


class ResolutionError(DataError):
    """Series resolution does not match what the operation needs (e.g. sub-daily input to the crash scanner)."""

    kind = "data"


class EmptyEnsembleError(UsageError):
    """Not enough history before the requested endpoint for even the shortest window."""

    kind = "usage"


class DegenerateBasisError(LpplsError):
    """The linear subproblem's normal matrix is singular or numerically rank-deficient."""

    kind = "degenerate"


class NoFitError(LpplsError):
    """The optimizer never evaluated a feasible candidate for this window."""

    kind = "no_fit"


# sysexits-style process exit codes used by the CLI.
EXIT_OK = 0
EXIT_NO_FIT = 2
EXIT_USAGE = 64
EXIT_DATA = 65
EXIT_CONFIG = 78
