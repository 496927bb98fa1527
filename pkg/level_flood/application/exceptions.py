"""Application-layer exceptions for the level-flood simulator.

These exceptions express contract and input violations without any CLI
dependency. The presentation layer is responsible for mapping them to exit
codes and diagnostics.
"""

__all__ = [
    "ContractViolationError",
    "EventBudgetExceededError",
    "ExperimentSpecError",
    "FieldOverflowError",
    "InvalidQueryError",
    "MetricsInputError",
    "PacketLengthMismatchError",
    "TruncatedPacketError",
    "UnknownPacketKindError",
    "WireError",
]


class WireError(ValueError):
    """Base class for packet codec failures."""


class FieldOverflowError(WireError):
    """Raised when a packet field does not fit its declared wire width."""


class UnknownPacketKindError(WireError):
    """Raised when the leading kind byte names no known packet format."""


class TruncatedPacketError(WireError):
    """Raised when input ends before the fixed header of its kind."""


class PacketLengthMismatchError(WireError):
    """Raised when a DataBack payload length disagrees with its data_len field."""


class ContractViolationError(RuntimeError):
    """Raised when protocol code asks the engine for an impossible delivery.

    A unicast to a node outside the sender's radio range (or to itself) is a
    programming error in the protocol layer, never a runtime condition of the
    simulated network, so it surfaces loudly instead of being dropped.
    """


class EventBudgetExceededError(RuntimeError):
    """Raised when a run processes more events than its budget allows.

    Parameters
    ----------
    budget : int
        The event budget that was exhausted.
    clock : float
        Virtual time of the last processed event.
    """

    def __init__(self, budget: int, clock: float) -> None:
        super().__init__(
            f"event budget of {budget} exhausted at virtual time {clock:.3f};"
            " a protocol handler is probably re-scheduling forever"
        )
        self.budget = budget
        self.clock = clock


class InvalidQueryError(ValueError):
    """Raised when the sink is asked to query itself or an unknown node."""


class MetricsInputError(ValueError):
    """Raised when an aggregate is requested over an empty record set."""


class ExperimentSpecError(ValueError):
    """Raised when an experiment description cannot be run as given."""
