"""Exception hierarchy shared by all contactkit modules."""


class ContactKitError(Exception):
    """Base class for every error raised by contactkit."""

    category = "error"


class ConfigError(ContactKitError, ValueError):
    category = "config"


class SiteOutsideBoxError(ConfigError):
    category = "site-outside-box"


class HorizonError(ContactKitError, ValueError):
    category = "horizon"


class OrderingError(ContactKitError, ValueError):
    category = "ordering"


class PreconditionError(ContactKitError, ValueError):
    category = "precondition"


class FitUndefinedError(ContactKitError, ValueError):
    category = "fit-undefined"


class AcceptanceCapError(ContactKitError, RuntimeError):
    """Raised when a batch cannot reach its accepted-replica target.

    Carries the partial batch so callers can still report diagnostics.
    """

    category = "acceptance-cap"

    def __init__(self, message, batch=None):
        super().__init__(message)
        self.batch = batch

    @property
    def rejection_rate(self):
        if self.batch is None or self.batch.total == 0:
            return float("nan")
        return 1.0 - self.batch.n_accepted / self.batch.total
