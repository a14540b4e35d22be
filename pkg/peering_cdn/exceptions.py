class PeeringCDNException(Exception):
    """Base exception class for all peering_cdn exceptions"""


class ConfigurationError(PeeringCDNException):
    """Raised when simulator inputs are inconsistent with each other, for instance when a latency lookup has no entry for a pair of
    regions."""


class DomainError(PeeringCDNException, ValueError):
    """Raised when an economic formula is evaluated outside of the domain on which it is defined."""


class AuctionRefused(PeeringCDNException):
    """Raised when an auction cannot be opened, either because the buyer has no budget or because the policy has exhausted its
    retries."""


class BidRejected(PeeringCDNException):
    """Raised when a bid is submitted to an auction that is closed or that already holds a bid from the same seller."""


class RegistryError(PeeringCDNException):
    """Raised when the service registry refuses an advertisement, e.g. a duplicate active requirement for the same buyer and
    content."""


class InsufficientCapacity(PeeringCDNException):
    """Raised when a surrogate server cannot free enough storage for an incoming replica, even by evicting everything it holds."""


class ScenarioFileError(PeeringCDNException):
    """Raised when a scenario file cannot be read or is not valid JSON."""


class ScenarioInvalid(PeeringCDNException):
    """Raised when a scenario file parses but violates one or more invariants. All violations are available on the
    ``violations`` attribute."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__('; '.join(str(v) for v in self.violations))


class ProfileNotFound(PeeringCDNException):
    """Raised when a named profile cannot be found using any of the strategies described in the :ref:`Configuration` docs."""


class OutputError(PeeringCDNException):
    """Raised when an output directory or file cannot be written."""
