"""Marketplace flows: wallet payments, seller listings and buyer purchases."""

import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Collection, List, Optional, Sequence, Tuple

from .ledger import UtxoSet
from .psbt import (
    Psbt,
    add_partial_signature,
    create_psbt,
    encode_psbt,
    estimated_vsize,
    finalize_psbt,
    sign_psbt,
)
from .signing import SighashMode, SigningKey
from .tx import Amount, OutPoint, Transaction, TxOutput

logger = logging.getLogger(__name__)

Funding = Tuple[OutPoint, TxOutput]


class MarketError(Exception):
    """Base exception for wallet and marketplace flows."""
    pass


class InsufficientBalance(MarketError):
    """Raised when a wallet cannot cover a payment."""
    pass


def fee_for_rate(rate: Fraction, size: int) -> Amount:
    """Smallest whole-sat fee reaching `rate` at `size` vbytes."""
    return math.ceil(Fraction(rate) * size)


def wallet_funds(
    utxos: UtxoSet, address: str, exclude: Collection[OutPoint] = ()
) -> List[Funding]:
    """Spendable non-zero outputs of `address`, ordered by outpoint."""
    return [
        (outpoint, entry.output)
        for outpoint, entry in utxos.owned_by(address)
        if entry.amount > 0 and outpoint not in exclude
    ]


def build_payment(
    key: SigningKey,
    utxos: UtxoSet,
    outputs: Sequence[TxOutput],
    fee: Amount,
    exclude: Collection[OutPoint] = (),
) -> Transaction:
    """Fund `outputs` plus `fee` from the key's wallet, largest outputs first.

    Change, if any, returns to the key's address as the last output.

    Raises:
        InsufficientBalance: If the wallet cannot cover outputs and fee
    """
    needed = sum(out.amount for out in outputs) + fee
    funds = sorted(wallet_funds(utxos, key.address, exclude), key=lambda f: -f[1].amount)
    chosen: List[Funding] = []
    total = 0
    for funding in funds:
        if total >= needed and chosen:
            break
        chosen.append(funding)
        total += funding[1].amount
    if total < needed or not chosen:
        raise InsufficientBalance(f"Wallet {key.label or key.address[:16]} has {total}, needs {needed}")

    payment = list(outputs)
    if total > needed:
        payment.append(TxOutput.pay(key.address, total - needed))
    psbt, _ = sign_psbt(create_psbt(chosen, payment), key)
    return finalize_psbt(psbt)


@dataclass(frozen=True)
class Listing:
    """A seller's signed offer: the anchor input, payment output and inscription."""

    psbt: Psbt
    seller: str
    complete: bool
    lock_outputs: Tuple[TxOutput, ...] = ()
    reveal: bytes = b""

    @property
    def anchor(self) -> Funding:
        first = self.psbt.inputs[0]
        return first.outpoint, first.utxo

    @property
    def payment(self) -> TxOutput:
        return self.psbt.outputs[0].output

    @property
    def inscription(self) -> TxOutput:
        return self.psbt.outputs[1].output

    @property
    def seller_signature(self) -> bytes:
        record = self.psbt.inputs[0].partial_sig
        if record is None:
            raise MarketError("Listing is not signed by the seller")
        return record

    @property
    def text(self) -> str:
        return encode_psbt(self.psbt)


def create_listing(
    seller: SigningKey,
    anchor: Funding,
    price: Amount,
    inscription: bytes,
    buyer_funding: Optional[Funding] = None,
    lock_outputs: Sequence[TxOutput] = (),
    reveal: bytes = b"",
) -> Listing:
    """Sign a listing SINGLE|ANYONECANPAY over the anchor and payment output.

    With a designated buyer's funding input the listing stays incomplete
    until that buyer signs.
    """
    inputs = [anchor] + ([buyer_funding] if buyer_funding else [])
    outputs = [TxOutput.pay(seller.address, price), TxOutput.carrier(inscription), *lock_outputs]
    psbt = create_psbt(inputs, outputs)
    if reveal:
        psbt = psbt.with_final_unlock(0, reveal)
    psbt, complete = sign_psbt(psbt, seller, SighashMode.SINGLE_ANYONECANPAY)
    logger.info("Seller %s listed for %d sats, complete=%s", seller.address[:16], price, complete)
    return Listing(psbt, seller.address, complete, tuple(lock_outputs), reveal)


def build_purchase(
    listing: Listing,
    funds: Sequence[Funding],
    change_address: str,
    change: Optional[Amount] = None,
    fee_rate: Optional[Fraction] = None,
) -> Psbt:
    """Reconstruct the sale from a listing with the buyer's own funds.

    Exactly one of `change` or `fee_rate` fixes the fee.

    Raises:
        InsufficientBalance: If funds do not cover price and fee
    """
    if (change is None) == (fee_rate is None):
        raise ValueError("Specify exactly one of change or fee_rate")
    outputs = [
        listing.payment,
        TxOutput.pay(change_address, 0),
        listing.inscription,
        *listing.lock_outputs,
    ]
    draft = create_psbt([listing.anchor, *funds], outputs)
    if listing.reveal:
        draft = draft.with_final_unlock(0, listing.reveal)

    available = draft.input_total() - listing.payment.amount
    if change is None:
        change = available - fee_for_rate(fee_rate, estimated_vsize(draft))  # type: ignore[arg-type]
    if change < 0 or change > available:
        raise InsufficientBalance(f"Funds {draft.input_total()} cannot cover price and fee")
    purchase = draft.with_output(1, TxOutput.pay(change_address, change))
    return add_partial_signature(purchase, 0, listing.seller_signature)
