"""Tiered protection: pre-signed escalating replacements for one purchase."""

import logging
from dataclasses import dataclass, field, replace
from decimal import Decimal
from fractions import Fraction
from typing import List, Optional, Sequence, Tuple, Union

from ..core.ledger import Block
from ..core.mempool import Mempool, MempoolEntry, Rejected, SubmitResult, format_fee_rate
from ..core.psbt import Psbt
from ..core.signing import SigningKey
from ..core.tx import Transaction, TxId
from . import NonIncreasingTiers, OrderState
from .reprice import reprice

logger = logging.getLogger(__name__)

Rate = Union[Fraction, Decimal, int]


@dataclass(frozen=True)
class Tier:
    fee_rate: Fraction
    tx: Transaction

    @property
    def txid(self) -> TxId:
        return self.tx.txid


@dataclass(frozen=True)
class ProtectedOrder:
    """Escalating pre-signed purchases; only broadcast tiers reach the pool."""

    tiers: Tuple[Tier, ...]
    current_tier: int = 0
    state: OrderState = OrderState.PENDING
    broadcast: Tuple[int, ...] = ()
    history: Tuple[str, ...] = field(default=())

    @property
    def current(self) -> Tier:
        return self.tiers[self.current_tier]

    @property
    def txids(self) -> List[TxId]:
        return [tier.txid for tier in self.tiers]

    def owns(self, txid: TxId) -> bool:
        return txid in self.txids

    def transition(self, state: OrderState, **changes: object) -> "ProtectedOrder":
        return replace(self, state=state, history=self.history + (state.label,), **changes)


def create_protected_order(
    psbt: Psbt, base_rate: Rate, tier_rates: Sequence[Rate], key: SigningKey
) -> ProtectedOrder:
    """Pre-sign one purchase per tier, identical except for the change amount.

    Args:
        psbt: Purchase PSBT with the seller's signature attached
        base_rate: First tier rate; prepended when tier_rates does not start with it
        tier_rates: Escalation rates in sats/vB
        key: Buyer key owning the change output

    Raises:
        NonIncreasingTiers: If rates are not strictly increasing
        InsufficientChange: If change cannot fund a tier
    """
    rates = [Fraction(r) for r in tier_rates]
    base = Fraction(base_rate)
    if not rates or rates[0] != base:
        rates.insert(0, base)
    if any(later <= earlier for earlier, later in zip(rates, rates[1:])):
        raise NonIncreasingTiers(f"Tier rates must strictly increase: {[str(r) for r in rates]}")
    tiers = tuple(Tier(rate, reprice(psbt, rate, key)) for rate in rates)
    logger.info("Protected order with tiers %s sat/vB", [format_fee_rate(r) for r in rates])
    return ProtectedOrder(tiers=tiers)


def broadcast_tier(order: ProtectedOrder, pool: Mempool) -> Tuple[ProtectedOrder, SubmitResult]:
    """Submit the current tier and record it as broadcast."""
    result = pool.submit(order.current.tx)
    order = replace(order, broadcast=order.broadcast + (order.current_tier,))
    logger.info(
        "Broadcast tier %d at %s sat/vB: %s",
        order.current_tier, format_fee_rate(order.current.fee_rate), result.status,
    )
    return order, result


def _needs_escalation(order: ProtectedOrder, pool: Mempool) -> bool:
    """Current tier was dropped from the pool or a rival outranks it."""
    own = pool.entry(order.current.txid)
    if own is None:
        return order.current_tier in order.broadcast
    rivals: List[MempoolEntry] = [
        entry for entry in pool.rivals_of(own.txid) if not order.owns(entry.txid)
    ]
    return any(rival.ranks_before(own) for rival in rivals)


def monitor_and_escalate(
    order: ProtectedOrder, pool: Mempool, latest_block: Optional[Block] = None
) -> ProtectedOrder:
    """Advance the order one tick.

    Confirms when any tier is in the latest block; otherwise, while a rival
    outranks the current tier, broadcasts the next tier, ending exhausted
    when none remain.
    """
    if order.state.is_final:
        return order
    if latest_block is not None and any(latest_block.contains(t) for t in order.txids):
        return order.transition(OrderState.CONFIRMED)
    if order.state == OrderState.PENDING:
        order, _ = broadcast_tier(order, pool)
        order = order.transition(OrderState.TOP_FEE)

    while _needs_escalation(order, pool):
        if order.state != OrderState.GETTING_REPLACED:
            order = order.transition(OrderState.GETTING_REPLACED)
        if order.current_tier + 1 >= len(order.tiers):
            logger.warning("Protected order exhausted at tier %d", order.current_tier)
            return order.transition(OrderState.EXHAUSTED)
        order = replace(order, current_tier=order.current_tier + 1)
        order, result = broadcast_tier(order, pool)
        if isinstance(result, Rejected):
            logger.info("Tier %d rejected: %s", order.current_tier, result.reason.value)

    if order.state != OrderState.TOP_FEE:
        order = order.transition(OrderState.TOP_FEE)
    return order
