"""Concrete fee strategies."""

import math
from decimal import Decimal
from fractions import Fraction
from typing import Dict, Optional, Type, Union

from ..core.tx import Amount
from . import AttackError, FeeStrategy, VictimObservation

DEFAULT_MARGIN_SATS = 140_000
DEFAULT_UNDERBID_FEE = 100
MINIMAL_OUTBID_INCREMENT = 1


class OutbidStrategy(FeeStrategy):
    """Victim fee plus a margin, falling back to a one-sat outbid."""

    name = "outbid"

    def __init__(self, margin_sats: int = DEFAULT_MARGIN_SATS) -> None:
        if margin_sats < MINIMAL_OUTBID_INCREMENT:
            raise ValueError("Outbid margin must be at least 1 sat")
        self.margin_sats = margin_sats

    def target_fee(self, observation: VictimObservation, vsize: int, budget: Amount) -> Amount:
        # Fee must also beat the victim's rate when the replica is larger
        by_rate = math.floor(observation.victim_fee_rate * vsize) + 1
        preferred = max(observation.victim_fee + self.margin_sats, by_rate)
        if preferred <= budget:
            return preferred
        return max(observation.victim_fee + MINIMAL_OUTBID_INCREMENT, by_rate)


class UnderbidStrategy(FeeStrategy):
    """A fixed low fee for control runs."""

    name = "underbid"

    def __init__(self, fee_sats: int = DEFAULT_UNDERBID_FEE) -> None:
        if fee_sats < 0:
            raise ValueError("Fee cannot be negative")
        self.fee_sats = fee_sats

    def target_fee(self, observation: VictimObservation, vsize: int, budget: Amount) -> Amount:
        return self.fee_sats


class FixedRateStrategy(FeeStrategy):
    """A fixed sats/vB rate regardless of the victim."""

    name = "fixed-rate"

    def __init__(self, rate: Union[Fraction, Decimal, int]) -> None:
        self.rate = Fraction(rate)
        if self.rate <= 0:
            raise ValueError("Fixed fee rate must be positive")

    def target_fee(self, observation: VictimObservation, vsize: int, budget: Amount) -> Amount:
        return math.ceil(self.rate * vsize)


STRATEGIES: Dict[str, Type[FeeStrategy]] = {
    OutbidStrategy.name: OutbidStrategy,
    UnderbidStrategy.name: UnderbidStrategy,
    FixedRateStrategy.name: FixedRateStrategy,
}


def strategy_from_config(
    strategy: str,
    margin_sats: int = DEFAULT_MARGIN_SATS,
    fixed_rate_sat_vb: Optional[Decimal] = None,
    fee_sats: int = DEFAULT_UNDERBID_FEE,
) -> FeeStrategy:
    """Build a strategy from its config keys.

    Raises:
        AttackError: If the strategy name is unknown or a key is missing
    """
    if strategy == OutbidStrategy.name:
        return OutbidStrategy(margin_sats)
    if strategy == UnderbidStrategy.name:
        return UnderbidStrategy(fee_sats)
    if strategy == FixedRateStrategy.name:
        if fixed_rate_sat_vb is None:
            raise AttackError("fixed-rate strategy requires fixed_rate_sat_vb", strategy)
        return FixedRateStrategy(fixed_rate_sat_vb)
    raise AttackError(f"Unknown strategy {strategy!r}; choose from {sorted(STRATEGIES)}", strategy)
