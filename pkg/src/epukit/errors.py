"""Exception types shared across the toolkit.

Two failure families matter for exit codes: bad input content or
configuration (ValidationError, CLI exit 1) and broken I/O or a scorer
speaking the wire protocol incorrectly (ProtocolError, CLI exit 2).
"""


class EpukitError(Exception):
    """Base class for all toolkit errors."""


class ValidationError(EpukitError):
    """Input data or configuration violates a documented contract."""


class ProtocolError(EpukitError):
    """A scoring endpoint violated the wire protocol, or I/O failed mid-run."""


class FetchError(ProtocolError):
    """Scoring batches failed after exhausting the retry budget.

    Carries the ids that never received a probability so callers can
    report or re-request exactly the missing work.
    """

    def __init__(self, message: str, unscored_ids: list[str]):
        super().__init__(message)
        self.unscored_ids = unscored_ids
