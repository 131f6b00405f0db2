"""Sniping bot: victim observations, fee strategies and outcomes."""

from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Tuple

from ..core.inscription import InscriptionMetadata
from ..core.tx import Amount, OutPoint, TxId, TxOutput


@dataclass(frozen=True)
class VictimObservation:
    """A pending purchase seen in the mempool."""

    victim_txid: TxId
    victim_inputs: Tuple[OutPoint, ...]
    seller_output: TxOutput
    inscription: InscriptionMetadata
    victim_fee: Amount
    victim_vsize: int
    listing_input: Tuple[OutPoint, TxOutput]
    listing_signature: bytes
    data_output: TxOutput
    lock_outputs: Tuple[TxOutput, ...] = ()
    reveal: bytes = b""
    payer: Optional[str] = None

    def __post_init__(self) -> None:
        """Validate observation data after initialization."""
        if self.inscription.op != "transfer":
            raise ValueError("Only transfer inscriptions can be sniped")
        if self.victim_vsize <= 0:
            raise ValueError("Victim vsize must be positive")

    @property
    def victim_fee_rate(self) -> Fraction:
        return Fraction(self.victim_fee, self.victim_vsize)

    @property
    def seller_address(self) -> str:
        return self.seller_output.lock


@dataclass
class AttackOutcome:
    """Result of one snipe; inclusion fields settle after mining."""

    attack_txid: TxId
    attack_fee: Amount
    attack_vsize: int
    victim_txid: TxId
    tick: str
    amount: int
    included: bool = False
    victim_evicted: bool = False
    tokens_received: int = 0
    tokens_before: int = 0
    settled: bool = field(default=False, compare=False)

    @property
    def attack_fee_rate(self) -> Fraction:
        return Fraction(self.attack_fee, self.attack_vsize)

    @property
    def success(self) -> bool:
        return self.included and self.victim_evicted and self.tokens_received == self.amount


class FeeStrategy(ABC):
    """How the sniper prices its replica.

    All strategies must implement target_fee.
    """

    name = "base"

    @abstractmethod
    def target_fee(self, observation: VictimObservation, vsize: int, budget: Amount) -> Amount:
        """Pick the attack fee.

        Args:
            observation: The victim being sniped
            vsize: Size of the finalized attack transaction
            budget: Sats left for fee and change after paying the seller

        Returns:
            Amount: Fee in sats
        """
        pass


class AttackError(Exception):
    """Base exception for sniping errors."""

    def __init__(self, message: str, strategy: str = "unknown") -> None:
        super().__init__(message)
        self.strategy = strategy


class InsufficientFunds(AttackError):
    """Raised when attacker funds cannot cover the seller price and fee."""
    pass


class NoVictim(AttackError):
    """Raised when no matching purchase is in the mempool."""
    pass


class AttackRejected(AttackError):
    """Raised when the mempool refuses the attack transaction."""

    def __init__(self, message: str, outcome: AttackOutcome, reason: str, strategy: str = "unknown") -> None:
        super().__init__(message, strategy)
        self.outcome = outcome
        self.reason = reason
