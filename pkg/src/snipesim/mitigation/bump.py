"""Manual fee bump of a pending purchase."""

import logging
from decimal import Decimal
from fractions import Fraction
from typing import Union

from ..core.mempool import Mempool, Rejected, format_fee_rate
from ..core.psbt import psbt_from_transaction
from ..core.signing import SigningKey
from ..core.tx import Transaction, TxId
from . import NotFound, NotOwner, RateNotHigher, ReplacementRejected
from .reprice import reprice

logger = logging.getLogger(__name__)


def bump_fee(
    pool: Mempool, txid: TxId, new_rate: Union[Fraction, Decimal, int], key: SigningKey
) -> Transaction:
    """Replace a pooled purchase with one paying `new_rate`.

    The change output shrinks; the seller's payment output and signature
    are kept as they are.

    Args:
        pool: Mempool holding the transaction
        txid: Transaction to bump
        new_rate: Target fee rate in sats/vB
        key: Key owning an input and the change output

    Returns:
        Transaction: The submitted replacement

    Raises:
        NotFound: If txid is not in the pool
        NotOwner: If the key owns none of its inputs
        RateNotHigher: If new_rate does not exceed the transaction's and its rivals' rates
        InsufficientChange: If change cannot cover the new fee
        ReplacementRejected: If the pool refuses the replacement
    """
    entry = pool.entry(txid)
    if entry is None:
        raise NotFound(f"Transaction {txid.hex()} is not in the mempool")
    owners = [pool.utxos[op].lock for op in entry.outpoints if op in pool.utxos]
    if key.address not in owners:
        raise NotOwner(f"{key.address[:16]} owns no input of {txid.hex()[:16]}")

    rate = Fraction(new_rate)
    ceiling = max([entry.fee_rate] + [rival.fee_rate for rival in pool.rivals_of(txid)])
    if rate <= ceiling:
        raise RateNotHigher(
            f"Rate {format_fee_rate(rate)} must exceed {format_fee_rate(ceiling)} sat/vB"
        )

    replacement = reprice(psbt_from_transaction(entry.tx, pool.utxos), rate, key)
    result = pool.submit(replacement)
    if isinstance(result, Rejected):
        raise ReplacementRejected(
            f"Bump of {txid.hex()[:16]} rejected: {result.detail}", result.reason.value
        )
    logger.info("Bumped %s to %s sat/vB as %s", txid.hex()[:16], format_fee_rate(rate), replacement.txid.hex()[:16])
    return replacement
