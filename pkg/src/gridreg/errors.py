"""Exception types shared across the package."""


class GridregError(Exception):
    """Base class for all errors raised by this package."""


class InvalidInputError(GridregError, ValueError):
    """Malformed argument: bad shape, non-finite values, out-of-range parameter."""


class SearchSpaceTooLargeError(GridregError):
    """Requested pose grid exceeds the configured safety cap.

    Exhaustive search cost grows like O(K_rot^3 * K_trans^3 * N * M), so the
    cap guards against runs that would never finish.
    """


class NoCandidateError(GridregError):
    """No translation candidate fell inside the configured bounds for any rotation."""


class PointCloudIOError(GridregError):
    """Unreadable or malformed point-cloud file."""
