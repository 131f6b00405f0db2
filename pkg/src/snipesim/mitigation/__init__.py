"""Defenses against sniping: tiered orders, fee bumps and fee locks."""

from enum import Enum


class OrderState(str, Enum):
    """Lifecycle of a protected order."""

    PENDING = "pending"
    TOP_FEE = "top-fee"
    GETTING_REPLACED = "getting-replaced"
    CONFIRMED = "confirmed"
    EXHAUSTED = "exhausted"

    @property
    def label(self) -> str:
        """Status text shown in reports."""
        return self.value.replace("-", " ").title()

    @property
    def is_final(self) -> bool:
        return self in (OrderState.CONFIRMED, OrderState.EXHAUSTED)


class MitigationError(Exception):
    """Base exception for mitigation errors."""
    pass


class NonIncreasingTiers(MitigationError):
    """Raised when tier fee rates are not strictly increasing."""
    pass


class InsufficientChange(MitigationError):
    """Raised when the change output cannot absorb a higher fee."""
    pass


class NotFound(MitigationError):
    """Raised when a transaction is not in the mempool."""
    pass


class NotOwner(MitigationError):
    """Raised when the signer owns no input of the transaction."""
    pass


class RateNotHigher(MitigationError):
    """Raised when a bump does not exceed the conflicting fee rates."""
    pass


class ReplacementRejected(MitigationError):
    """Raised when the mempool refuses a repriced transaction."""

    def __init__(self, message: str, reason: str) -> None:
        super().__init__(message)
        self.reason = reason
