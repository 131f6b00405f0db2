"""Partially signed transactions: creation, signing, combination and finalization."""

import base64
import binascii
import logging
from dataclasses import dataclass, field, replace
from typing import List, Optional, Sequence, Tuple

from .ledger import UtxoSet
from .signing import (
    RECORD_SIZE,
    SighashMode,
    SigningError,
    SigningKey,
    sign_input,
    verify_input,
)
from .tx import (
    DEFAULT_SEQUENCE,
    Amount,
    ByteReader,
    DecodeError,
    LedgerError,
    OutPoint,
    OutputKind,
    Transaction,
    TxInput,
    TxOutput,
    encode_varint,
    read_transaction,
    serialize,
)

logger = logging.getLogger(__name__)

TEXT_PREFIX = "psbt1:"


class PsbtError(Exception):
    """Base exception for PSBT operations."""
    pass


class EmptyInputs(PsbtError):
    """Raised when a PSBT would have no inputs."""
    pass


class DuplicatePsbtInput(PsbtError):
    """Raised when the same outpoint appears twice."""
    pass


class Incomplete(PsbtError):
    """Raised when finalizing a PSBT with unsigned inputs."""

    def __init__(self, indices: Sequence[int]) -> None:
        self.indices = list(indices)
        super().__init__(f"Inputs {self.indices} still need signatures")


class PsbtDecodeError(PsbtError):
    """Raised when a PSBT text form cannot be parsed."""
    pass


@dataclass(frozen=True)
class PsbtInput:
    """Input plus the output it spends and its collected signature."""

    outpoint: OutPoint
    utxo: TxOutput
    sequence: int = DEFAULT_SEQUENCE
    partial_sig: Optional[bytes] = None
    final_unlock: bytes = b""

    @property
    def required_signer(self) -> str:
        return self.utxo.lock

    @property
    def is_signed(self) -> bool:
        return self.partial_sig is not None


@dataclass(frozen=True)
class PsbtOutput:
    output: TxOutput
    aux: bytes = b""


@dataclass(frozen=True)
class Psbt:
    """Transaction skeleton with per-input signing context."""

    inputs: Tuple[PsbtInput, ...]
    outputs: Tuple[PsbtOutput, ...] = field(default=())

    def __post_init__(self) -> None:
        object.__setattr__(self, "inputs", tuple(self.inputs))
        object.__setattr__(self, "outputs", tuple(self.outputs))

    @property
    def tx_outputs(self) -> Tuple[TxOutput, ...]:
        return tuple(o.output for o in self.outputs)

    def unsigned_tx(self) -> Transaction:
        """The skeleton every signature commits to."""
        return Transaction(
            inputs=tuple(TxInput(i.outpoint, b"", i.sequence) for i in self.inputs),
            outputs=self.tx_outputs,
        )

    def input_total(self) -> Amount:
        return sum(i.utxo.amount for i in self.inputs)

    def fee(self) -> Amount:
        return self.input_total() - sum(o.amount for o in self.tx_outputs)

    def unsigned_indices(self) -> List[int]:
        return [index for index, i in enumerate(self.inputs) if not i.is_signed]

    def verifies(self, index: int, record: Optional[bytes]) -> bool:
        """True iff `record` is a valid signature of input `index` by its required signer."""
        if record is None:
            return False
        return verify_input(self.unsigned_tx(), index, record, self.inputs[index].required_signer)

    def with_signature(self, index: int, record: bytes) -> "Psbt":
        inputs = list(self.inputs)
        inputs[index] = replace(inputs[index], partial_sig=record)
        return replace(self, inputs=tuple(inputs))

    def with_final_unlock(self, index: int, unlock: bytes) -> "Psbt":
        inputs = list(self.inputs)
        inputs[index] = replace(inputs[index], final_unlock=unlock)
        return replace(self, inputs=tuple(inputs))

    def with_output(self, index: int, output: TxOutput) -> "Psbt":
        """Replace one output, dropping signatures it invalidates."""
        outputs = list(self.outputs)
        outputs[index] = PsbtOutput(output, outputs[index].aux)
        changed = replace(self, outputs=tuple(outputs))
        return changed.drop_stale_signatures()

    def drop_stale_signatures(self) -> "Psbt":
        skeleton = self.unsigned_tx()
        inputs = tuple(
            i if i.partial_sig is None or verify_input(skeleton, n, i.partial_sig, i.required_signer)
            else replace(i, partial_sig=None)
            for n, i in enumerate(self.inputs)
        )
        return replace(self, inputs=inputs)


def create_psbt(
    inputs: Sequence[Tuple[OutPoint, TxOutput]], outputs: Sequence[TxOutput]
) -> Psbt:
    """Build an unsigned PSBT.

    Args:
        inputs: Outpoints with the outputs they spend
        outputs: Transaction outputs in order

    Raises:
        EmptyInputs: If no inputs are given
        DuplicatePsbtInput: If an outpoint repeats
    """
    if not inputs:
        raise EmptyInputs("PSBT requires at least one input")
    seen = set()
    for outpoint, _ in inputs:
        if outpoint in seen:
            raise DuplicatePsbtInput(f"Outpoint {outpoint} appears twice")
        seen.add(outpoint)
    if not outputs:
        raise PsbtError("PSBT requires at least one output")
    return Psbt(
        inputs=tuple(PsbtInput(outpoint, utxo) for outpoint, utxo in inputs),
        outputs=tuple(PsbtOutput(out) for out in outputs),
    )


def is_complete(psbt: Psbt) -> bool:
    """True iff every input carries a verifying signature from its required signer."""
    skeleton = psbt.unsigned_tx()
    return all(
        i.partial_sig is not None
        and verify_input(skeleton, index, i.partial_sig, i.required_signer)
        for index, i in enumerate(psbt.inputs)
    )


def sign_psbt(
    psbt: Psbt, key: SigningKey, mode: SighashMode = SighashMode.ALL
) -> Tuple[Psbt, bool]:
    """Sign every input locked to `key` that lacks a verifying signature.

    Returns:
        The updated PSBT and whether it is now complete
    """
    skeleton = psbt.unsigned_tx()
    signed = psbt
    for index, i in enumerate(psbt.inputs):
        if i.required_signer != key.address or psbt.verifies(index, i.partial_sig):
            continue
        try:
            record = sign_input(skeleton, index, key, mode)
        except SigningError as e:
            logger.debug("Skipping input %d: %s", index, e)
            continue
        signed = signed.with_signature(index, record)
    return signed, is_complete(signed)


def add_partial_signature(psbt: Psbt, index: int, record: bytes) -> Psbt:
    """Attach a signature produced elsewhere, e.g. a seller's listing signature.

    Raises:
        PsbtError: If the record does not verify for that input
    """
    if index < 0 or index >= len(psbt.inputs):
        raise PsbtError(f"Input index {index} out of range")
    if not psbt.verifies(index, record):
        raise PsbtError(f"Signature does not verify for input {index}")
    return psbt.with_signature(index, record)


def combine(first: Psbt, second: Psbt) -> Psbt:
    """Merge signatures of two PSBTs over the same skeleton.

    Only records that verify are kept; a verifying record replaces one that does not.
    """
    if first.unsigned_tx() != second.unsigned_tx():
        raise PsbtError("Cannot combine PSBTs with different skeletons")
    merged = first.drop_stale_signatures()
    for index, i in enumerate(second.inputs):
        if i.is_signed and not merged.inputs[index].is_signed:
            if merged.verifies(index, i.partial_sig):
                merged = merged.with_signature(index, i.partial_sig)  # type: ignore[arg-type]
            else:
                logger.debug("Dropping non-verifying signature for input %d", index)
        if i.final_unlock and not merged.inputs[index].final_unlock:
            merged = merged.with_final_unlock(index, i.final_unlock)
    return merged


def finalize_psbt(psbt: Psbt) -> Transaction:
    """Embed the collected signatures into a broadcastable transaction.

    Raises:
        Incomplete: Listing the input indices lacking a verifying signature
    """
    skeleton = psbt.unsigned_tx()
    missing = [
        index
        for index, i in enumerate(psbt.inputs)
        if i.partial_sig is None
        or not verify_input(skeleton, index, i.partial_sig, i.required_signer)
    ]
    if missing:
        raise Incomplete(missing)
    return Transaction(
        inputs=tuple(TxInput(i.outpoint, i.final_unlock, i.sequence) for i in psbt.inputs),
        outputs=skeleton.outputs,
        witness=tuple(i.partial_sig for i in psbt.inputs),  # type: ignore[misc]
    )


def psbt_from_transaction(tx: Transaction, utxos: UtxoSet) -> Psbt:
    """Rebuild a PSBT from a finalized transaction, keeping its verifying signatures.

    Raises:
        LedgerError: If an input's spent output is unknown
    """
    inputs = []
    for index, txin in enumerate(tx.inputs):
        entry = utxos.lookup(txin.outpoint)
        if entry is None:
            raise LedgerError(f"Input {index} spends unknown output {txin.outpoint}", index)
        inputs.append(
            PsbtInput(
                outpoint=txin.outpoint,
                utxo=entry.output,
                sequence=txin.sequence,
                partial_sig=tx.witness[index] if tx.witness else None,
                final_unlock=txin.unlock,
            )
        )
    rebuilt = Psbt(inputs=tuple(inputs), outputs=tuple(PsbtOutput(o) for o in tx.outputs))
    return rebuilt.drop_stale_signatures()


def estimated_vsize(psbt: Psbt) -> int:
    """Size the finalized transaction will have; signature records are fixed length."""
    placeholder = Transaction(
        inputs=tuple(TxInput(i.outpoint, i.final_unlock, i.sequence) for i in psbt.inputs),
        outputs=psbt.tx_outputs,
        witness=tuple(bytes(RECORD_SIZE) for _ in psbt.inputs),
    )
    return len(serialize(placeholder))


def encode_psbt(psbt: Psbt) -> str:
    """Text form: prefix plus base64 of skeleton, input contexts and signatures."""
    parts = [serialize(psbt.unsigned_tx())]
    for i in psbt.inputs:
        parts.append(i.utxo.serialize())
        parts.append(encode_varint(len(i.final_unlock)) + i.final_unlock)
    signed = [(index, i.partial_sig) for index, i in enumerate(psbt.inputs) if i.is_signed]
    parts.append(encode_varint(len(signed)))
    for index, record in signed:
        parts.append(encode_varint(index) + encode_varint(len(record)) + record)  # type: ignore[arg-type]
    return TEXT_PREFIX + base64.b64encode(b"".join(parts)).decode("ascii")


def decode_psbt(text: str) -> Psbt:
    """Parse the text form produced by encode_psbt.

    Raises:
        PsbtDecodeError: If the prefix, base64 or layout is invalid
    """
    if not text.startswith(TEXT_PREFIX):
        raise PsbtDecodeError(f"PSBT text must start with {TEXT_PREFIX!r}")
    try:
        reader = ByteReader(base64.b64decode(text[len(TEXT_PREFIX):], validate=True))
        skeleton = read_transaction(reader)
        contexts = []
        for _ in skeleton.inputs:
            holder = _read_output(reader)
            contexts.append((holder, reader.read_bytes()))
        psbt = Psbt(
            inputs=tuple(
                PsbtInput(txin.outpoint, utxo, txin.sequence, None, unlock)
                for txin, (utxo, unlock) in zip(skeleton.inputs, contexts)
            ),
            outputs=tuple(PsbtOutput(o) for o in skeleton.outputs),
        )
        seen = set()
        for _ in range(reader.read_varint()):
            index = reader.read_varint()
            if index >= len(psbt.inputs):
                raise PsbtDecodeError(f"Signature for unknown input {index}")
            if index in seen:
                raise PsbtDecodeError(f"Second signature for input {index}")
            seen.add(index)
            record = reader.read_bytes()
            if not psbt.verifies(index, record):
                raise PsbtDecodeError(f"Signature for input {index} does not verify")
            psbt = psbt.with_signature(index, record)
        if not reader.exhausted:
            raise PsbtDecodeError("Trailing bytes after PSBT")
        return psbt
    except (binascii.Error, DecodeError, LedgerError, ValueError) as e:
        raise PsbtDecodeError(f"Malformed PSBT: {e}")


def _read_output(reader: ByteReader) -> TxOutput:
    amount = reader.read_int(8)
    kind = reader.read(1)[0]
    payload = reader.read_bytes()
    if kind == OutputKind.ADDRESS:
        return TxOutput.pay(payload.decode("ascii"), amount)
    if kind == OutputKind.DATA and amount == 0:
        return TxOutput.carrier(payload)
    raise PsbtDecodeError(f"Bad input context kind {kind}")

