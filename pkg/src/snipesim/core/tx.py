"""Transaction model, canonical serialization and txid derivation."""

from dataclasses import dataclass, field
from enum import IntEnum
from functools import cached_property
from typing import Iterable, List, Tuple

from cryptography.hazmat.primitives import hashes

COIN = 100_000_000
MAX_MONEY = 21_000_000 * COIN
TX_VERSION = 2
DEFAULT_SEQUENCE = 0xFFFFFFFD
TXID_SIZE = 32

# Data-carrier payload prefix marking a fee-lock commitment output.
LOCK_TAG = b"FLCK"

Amount = int
TxId = bytes


class LedgerError(Exception):
    """Base exception for ledger and transaction errors."""

    def __init__(self, message: str, index: int = -1) -> None:
        super().__init__(message)
        self.index = index

    @property
    def kind(self) -> str:
        return type(self).__name__


class DecodeError(LedgerError):
    """Raised when a byte sequence is not a canonical transaction."""
    pass


class InvalidTransaction(LedgerError):
    """Raised when a transaction is structurally malformed."""
    pass


def sha256(data: bytes) -> bytes:
    """Single SHA-256 digest."""
    digest = hashes.Hash(hashes.SHA256())
    digest.update(data)
    return digest.finalize()


def sha256d(data: bytes) -> bytes:
    """Double SHA-256 digest, used for txids, block hashes and commitments."""
    return sha256(sha256(data))


def check_amount(value: int) -> int:
    """Validate a satoshi amount.

    Raises:
        InvalidTransaction: If the amount is negative or exceeds the money supply
    """
    if isinstance(value, bool) or not isinstance(value, int):
        raise InvalidTransaction(f"Amount must be an integer number of sats, got {value!r}")
    if value < 0 or value > MAX_MONEY:
        raise InvalidTransaction(f"Amount out of range: {value}")
    return value


def encode_varint(value: int) -> bytes:
    """Unsigned LEB128."""
    if value < 0:
        raise ValueError("varint cannot encode negative values")
    out = bytearray()
    while True:
        byte = value & 0x7F
        value >>= 7
        if value:
            out.append(byte | 0x80)
        else:
            out.append(byte)
            return bytes(out)


class ByteReader:
    """Cursor over a byte string used by the canonical decoders."""

    def __init__(self, data: bytes) -> None:
        self.data = data
        self.pos = 0

    def read(self, size: int) -> bytes:
        if size < 0 or self.pos + size > len(self.data):
            raise DecodeError(f"Unexpected end of data at offset {self.pos}")
        chunk = self.data[self.pos:self.pos + size]
        self.pos += size
        return chunk

    def read_int(self, size: int) -> int:
        return int.from_bytes(self.read(size), "big")

    def read_varint(self) -> int:
        result = 0
        shift = 0
        while True:
            byte = self.read(1)[0]
            result |= (byte & 0x7F) << shift
            if not byte & 0x80:
                # Reject non-minimal encodings so decoding stays bijective
                if byte == 0 and shift:
                    raise DecodeError("Non-canonical varint")
                return result
            shift += 7
            if shift > 63:
                raise DecodeError("Varint too long")

    def read_bytes(self) -> bytes:
        return self.read(self.read_varint())

    @property
    def exhausted(self) -> bool:
        return self.pos == len(self.data)


@dataclass(frozen=True)
class OutPoint:
    """Reference to a transaction output."""

    txid: TxId
    vout: int

    def __post_init__(self) -> None:
        if len(self.txid) != TXID_SIZE:
            raise InvalidTransaction(f"txid must be {TXID_SIZE} bytes")
        if self.vout < 0 or self.vout > 0xFFFFFFFF:
            raise InvalidTransaction(f"vout out of range: {self.vout}")

    def serialize(self) -> bytes:
        return self.txid + self.vout.to_bytes(4, "big")

    def __str__(self) -> str:
        return f"{self.txid.hex()}:{self.vout}"


@dataclass(frozen=True)
class TxInput:
    """Transaction input; `unlock` houses scriptSig-like data."""

    outpoint: OutPoint
    unlock: bytes = b""
    sequence: int = DEFAULT_SEQUENCE

    def __post_init__(self) -> None:
        if self.sequence < 0 or self.sequence > 0xFFFFFFFF:
            raise InvalidTransaction(f"sequence out of range: {self.sequence}")


class OutputKind(IntEnum):
    ADDRESS = 0
    DATA = 1


@dataclass(frozen=True)
class TxOutput:
    """Transaction output paying an address or carrying data."""

    amount: Amount
    lock: str = ""
    data: bytes = b""
    kind: OutputKind = OutputKind.ADDRESS

    def __post_init__(self) -> None:
        check_amount(self.amount)
        if self.kind == OutputKind.DATA:
            if self.amount != 0:
                raise InvalidTransaction("Data-carrier outputs must have amount 0")
            if self.lock:
                raise InvalidTransaction("Data-carrier outputs cannot carry an address")
        else:
            if not self.lock:
                raise InvalidTransaction("Address output requires a lock")
            if self.data:
                raise InvalidTransaction("Address outputs cannot carry data")
            if not self.lock.isascii():
                raise InvalidTransaction("Address must be ASCII")

    @classmethod
    def pay(cls, address: str, amount: Amount) -> "TxOutput":
        return cls(amount=amount, lock=address)

    @classmethod
    def carrier(cls, data: bytes) -> "TxOutput":
        return cls(amount=0, data=data, kind=OutputKind.DATA)

    @property
    def is_data(self) -> bool:
        return self.kind == OutputKind.DATA

    @property
    def is_lock_commitment(self) -> bool:
        return self.is_data and self.data.startswith(LOCK_TAG)

    @property
    def payload(self) -> bytes:
        return self.data if self.is_data else self.lock.encode("ascii")

    def serialize(self) -> bytes:
        return (
            self.amount.to_bytes(8, "big")
            + bytes([int(self.kind)])
            + encode_varint(len(self.payload))
            + self.payload
        )


@dataclass(frozen=True)
class Transaction:
    """A transaction: inputs, outputs and per-input witness records.

    A transaction with no inputs is a coinbase.
    """

    inputs: Tuple[TxInput, ...]
    outputs: Tuple[TxOutput, ...]
    witness: Tuple[bytes, ...] = field(default=())

    def __post_init__(self) -> None:
        object.__setattr__(self, "inputs", tuple(self.inputs))
        object.__setattr__(self, "outputs", tuple(self.outputs))
        object.__setattr__(self, "witness", tuple(self.witness))
        if not self.outputs:
            raise InvalidTransaction("Transaction requires at least one output")
        if self.witness and len(self.witness) != len(self.inputs):
            raise InvalidTransaction("Witness count must match input count")

    @property
    def is_coinbase(self) -> bool:
        return not self.inputs

    @property
    def outpoints(self) -> Tuple[OutPoint, ...]:
        return tuple(txin.outpoint for txin in self.inputs)

    @cached_property
    def txid(self) -> TxId:
        return compute_txid(self)

    def output_total(self) -> Amount:
        return sum(out.amount for out in self.outputs)

    def created(self) -> List[Tuple[OutPoint, TxOutput]]:
        """Outpoints this transaction creates, in output order."""
        return [(OutPoint(self.txid, vout), out) for vout, out in enumerate(self.outputs)]

    def stripped(self) -> "Transaction":
        """Copy without unlock data and witness; the signing skeleton."""
        return Transaction(
            inputs=tuple(TxInput(i.outpoint, b"", i.sequence) for i in self.inputs),
            outputs=self.outputs,
        )

    def with_witness(self, witness: Iterable[bytes]) -> "Transaction":
        return Transaction(inputs=self.inputs, outputs=self.outputs, witness=tuple(witness))


def serialize(tx: Transaction) -> bytes:
    """Canonical byte layout of a transaction (big-endian fixed ints, LEB128 varints)."""
    parts = [TX_VERSION.to_bytes(2, "big"), encode_varint(len(tx.inputs))]
    for txin in tx.inputs:
        parts.append(txin.outpoint.serialize())
        parts.append(encode_varint(len(txin.unlock)))
        parts.append(txin.unlock)
        parts.append(txin.sequence.to_bytes(4, "big"))
    parts.append(encode_varint(len(tx.outputs)))
    parts.extend(out.serialize() for out in tx.outputs)
    parts.append(encode_varint(len(tx.witness)))
    for record in tx.witness:
        parts.append(encode_varint(len(record)))
        parts.append(record)
    return b"".join(parts)


def read_transaction(reader: ByteReader) -> Transaction:
    """Decode one transaction from a reader positioned at its first byte."""
    version = reader.read_int(2)
    if version != TX_VERSION:
        raise DecodeError(f"Unsupported version {version}")
    try:
        inputs = []
        for _ in range(reader.read_varint()):
            outpoint = OutPoint(reader.read(TXID_SIZE), reader.read_int(4))
            unlock = reader.read_bytes()
            inputs.append(TxInput(outpoint, unlock, reader.read_int(4)))
        outputs = []
        for _ in range(reader.read_varint()):
            amount = reader.read_int(8)
            kind = reader.read(1)[0]
            payload = reader.read_bytes()
            if kind == OutputKind.ADDRESS:
                outputs.append(TxOutput.pay(payload.decode("ascii"), amount))
            elif kind == OutputKind.DATA:
                if amount:
                    raise DecodeError("Data-carrier output with non-zero amount")
                outputs.append(TxOutput.carrier(payload))
            else:
                raise DecodeError(f"Unknown output kind {kind}")
        witness = tuple(reader.read_bytes() for _ in range(reader.read_varint()))
        return Transaction(tuple(inputs), tuple(outputs), witness)
    except (InvalidTransaction, UnicodeDecodeError) as e:
        raise DecodeError(f"Malformed transaction: {e}")


def deserialize(data: bytes) -> Transaction:
    """Inverse of serialize.

    Raises:
        DecodeError: If the bytes are not exactly one canonical transaction
    """
    reader = ByteReader(data)
    tx = read_transaction(reader)
    if not reader.exhausted:
        raise DecodeError("Trailing bytes after transaction")
    return tx


def compute_txid(tx: Transaction) -> TxId:
    """txid = SHA-256(SHA-256(serialize(tx)))."""
    return sha256d(serialize(tx))


def vsize(tx: Transaction) -> int:
    """Virtual size in bytes; no witness discount."""
    return len(serialize(tx))
