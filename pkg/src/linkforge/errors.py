"""Exception types shared across the toolkit.

Every condition that a caller can reasonably branch on gets its own
class; CLI exit codes and HTTP error bodies are derived from these.
"""


class LinkforgeError(Exception):
    """Base class for all toolkit errors."""

    code = "Error"

    def __init__(self, message: str = ""):
        super().__init__(message or self.__doc__)


class DataError(LinkforgeError):
    """Input data violates a contract (CLI exit code 3)."""

    code = "DataError"


# --- log ingestion ---

class MalformedLine(DataError):
    """Log line does not match the declared column layout."""

    code = "MalformedLine"


class BadTimestamp(DataError):
    """Timestamp field is unparseable or non-positive."""

    code = "BadTimestamp"


class BadStatus(DataError):
    """HTTP status field is not an integer in [100, 599]."""

    code = "BadStatus"


# --- transition statistics ---

class WindowMismatch(DataError):
    """Inputs to accumulate() cover disjoint time ranges."""

    code = "WindowMismatch"


class ZeroViews(DataError):
    """Transition counts exist for a page with zero recorded views."""

    code = "ZeroViews"


class AllStops(DataError):
    """Navigational degree is undefined: every view of the page stopped."""

    code = "AllStops"


# --- estimators ---

class UnknownSource(DataError):
    """Estimate requested for a source page with no recorded views."""

    code = "UnknownSource"


class NonConvergent(LinkforgeError):
    """Power iteration cannot converge (CLI exit code 4)."""

    code = "NonConvergent"


class NoExistingLinks(DataError):
    """Mean baseline requested for a source with no existing out-links."""

    code = "NoExistingLinks"


# --- placement ---

class UnknownCandidate(DataError):
    """A link set refers to a pair outside the problem's candidates."""

    code = "UnknownCandidate"


class TooLarge(DataError):
    """Problem exceeds the brute-force enumeration guard."""

    code = "TooLarge"


class InvalidProblem(DataError):
    """Placement problem violates its invariants."""

    code = "InvalidProblem"


# --- evaluation ---

class EmptySeries(DataError):
    """Metric requested on an empty series."""

    code = "EmptySeries"


class DegenerateVariance(DataError):
    """Correlation requested on a series with zero variance."""

    code = "DegenerateVariance"


class BadK(DataError):
    """k is outside [1, len(items)]."""

    code = "BadK"


# --- synthetic generation ---

class DisconnectedPair(DataError):
    """Hiding these links would disconnect a (source, target) pair."""

    code = "DisconnectedPair"


# --- review service ---

class UnknownSession(LinkforgeError):
    """No session with this id."""

    code = "UnknownSession"


class UnknownLink(LinkforgeError):
    """Link is not part of the session's current ranking."""

    code = "UnknownLink"


class AlreadyDecided(LinkforgeError):
    """Link already received a verdict in this session."""

    code = "AlreadyDecided"


class BudgetExhausted(LinkforgeError):
    """No remaining budget for further accepts."""

    code = "BudgetExhausted"
