"""Shared repricing: shrink the signer's change to reach a target fee rate."""

from dataclasses import replace
from fractions import Fraction

from ..core.market import fee_for_rate
from ..core.psbt import Psbt, estimated_vsize, finalize_psbt, sign_psbt
from ..core.signing import SigningKey
from ..core.tx import Transaction, TxOutput
from . import InsufficientChange, NotOwner


def change_index(psbt: Psbt, address: str) -> int:
    """Index of the last address output paying `address`, never the seller's output 0.

    Raises:
        NotOwner: If no such output exists
    """
    for index in range(len(psbt.outputs) - 1, 0, -1):
        output = psbt.outputs[index].output
        if not output.is_data and output.lock == address:
            return index
    raise NotOwner(f"No change output pays {address[:16]}")


def reprice(psbt: Psbt, rate: Fraction, key: SigningKey) -> Transaction:
    """Re-sign `psbt` with its change reduced so the fee reaches `rate`.

    Signatures from other parties stay valid as long as they do not commit
    to the change output.

    Raises:
        NotOwner: If the key has no change output
        InsufficientChange: If change cannot cover the fee
    """
    index = change_index(psbt, key.address)
    others = sum(o.output.amount for n, o in enumerate(psbt.outputs) if n != index)
    fee = fee_for_rate(rate, estimated_vsize(psbt))
    change = psbt.input_total() - others - fee
    if change < 0:
        raise InsufficientChange(f"Fee {fee} at {rate} sat/vB exceeds available change")
    updated = psbt.with_output(index, TxOutput.pay(key.address, change))
    # Own signatures commit to every output, so refresh them
    updated = Psbt(
        inputs=tuple(
            replace(i, partial_sig=None) if i.required_signer == key.address else i
            for i in updated.inputs
        ),
        outputs=updated.outputs,
    )
    signed, _ = sign_psbt(updated, key)
    return finalize_psbt(signed)
