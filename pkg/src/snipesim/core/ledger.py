"""Unspent output tracking, fee computation and block application."""

import logging
from dataclasses import dataclass, field
from typing import Dict, Iterable, Iterator, List, Mapping, Optional, Set, Tuple

from .signing import verify_input
from .tx import (
    Amount,
    LedgerError,
    OutPoint,
    Transaction,
    TxId,
    TxOutput,
    sha256d,
)

logger = logging.getLogger(__name__)

GENESIS_PREV_HASH = bytes(32)


class MissingUtxo(LedgerError):
    """Raised when an input refers to an unknown or spent output."""
    pass


class DuplicateInput(LedgerError):
    """Raised when an outpoint is spent twice within a transaction or block."""
    pass


class BadSignature(LedgerError):
    """Raised when an input lacks a verifying signature."""
    pass


class NegativeFee(LedgerError):
    """Raised when outputs exceed inputs."""
    pass


class UnspendableOutput(LedgerError):
    """Raised when an input spends a data-carrier output."""
    pass


class OutputExists(LedgerError):
    """Raised when a block would recreate an unspent output."""
    pass


class InvalidBlock(LedgerError):
    """Raised when a block is malformed or cannot be connected."""
    pass


@dataclass(frozen=True)
class UtxoEntry:
    """An unspent output and the height it was created at."""

    output: TxOutput
    height: int

    @property
    def amount(self) -> Amount:
        return self.output.amount

    @property
    def lock(self) -> str:
        return self.output.lock


class UtxoSet(Mapping[OutPoint, UtxoEntry]):
    """Immutable map of unspent outputs; updates return a new set."""

    def __init__(self, entries: Optional[Dict[OutPoint, UtxoEntry]] = None) -> None:
        self._entries: Dict[OutPoint, UtxoEntry] = dict(entries or {})

    def __getitem__(self, outpoint: OutPoint) -> UtxoEntry:
        return self._entries[outpoint]

    def __iter__(self) -> Iterator[OutPoint]:
        return iter(self._entries)

    def __len__(self) -> int:
        return len(self._entries)

    def lookup(self, outpoint: OutPoint) -> Optional[UtxoEntry]:
        return self._entries.get(outpoint)

    def owned_by(self, address: str) -> List[Tuple[OutPoint, UtxoEntry]]:
        """Spendable outputs paying `address`, ordered by outpoint."""
        owned = [
            (op, entry)
            for op, entry in self._entries.items()
            if entry.lock == address and not entry.output.is_data
        ]
        return sorted(owned, key=lambda item: (item[0].txid, item[0].vout))

    def balance(self, address: str) -> Amount:
        return sum(entry.amount for _, entry in self.owned_by(address))

    def total_value(self) -> Amount:
        return sum(entry.amount for entry in self._entries.values())

    def updated(
        self, spent: Iterable[OutPoint], created: Iterable[Tuple[OutPoint, UtxoEntry]]
    ) -> "UtxoSet":
        entries = dict(self._entries)
        for outpoint in spent:
            del entries[outpoint]
        for outpoint, entry in created:
            entries[outpoint] = entry
        return UtxoSet(entries)


def compute_fee(tx: Transaction, utxos: UtxoSet) -> Amount:
    """Sum of spent input amounts minus sum of output amounts.

    Raises:
        MissingUtxo: If an input is not in the set
        NegativeFee: If outputs exceed inputs
    """
    total_in = 0
    for index, txin in enumerate(tx.inputs):
        entry = utxos.lookup(txin.outpoint)
        if entry is None:
            raise MissingUtxo(f"Input {index} spends unknown output {txin.outpoint}", index)
        total_in += entry.amount
    fee = total_in - tx.output_total()
    if fee < 0:
        raise NegativeFee(f"Outputs exceed inputs by {-fee} sats")
    return fee


def validate(tx: Transaction, utxos: UtxoSet) -> List[LedgerError]:
    """Check a non-coinbase transaction against `utxos`.

    Returns:
        Every violation found, empty when the transaction is valid
    """
    if tx.is_coinbase:
        return [InvalidBlock("Coinbase transactions are only valid inside a block")]

    errors: List[LedgerError] = []
    seen: Set[OutPoint] = set()
    total_in = 0
    for index, txin in enumerate(tx.inputs):
        if txin.outpoint in seen:
            errors.append(DuplicateInput(f"Input {index} repeats outpoint {txin.outpoint}", index))
            continue
        seen.add(txin.outpoint)
        entry = utxos.lookup(txin.outpoint)
        if entry is None:
            errors.append(MissingUtxo(f"Input {index} spends unknown output {txin.outpoint}", index))
            continue
        if entry.output.is_data:
            errors.append(UnspendableOutput(f"Input {index} spends a data output", index))
            continue
        total_in += entry.amount
        record = tx.witness[index] if tx.witness else b""
        if not verify_input(tx, index, record, entry.lock):
            errors.append(BadSignature(f"Input {index} lacks a valid signature", index))

    if not any(isinstance(e, MissingUtxo) for e in errors) and tx.output_total() > total_in:
        errors.append(NegativeFee(f"Outputs {tx.output_total()} exceed inputs {total_in}"))
    return errors


def check_transaction(tx: Transaction, utxos: UtxoSet) -> None:
    """Raise the first validation error, if any."""
    errors = validate(tx, utxos)
    if errors:
        raise errors[0]


def block_hash(prev_hash: bytes, height: int, txids: Iterable[TxId]) -> bytes:
    return sha256d(prev_hash + height.to_bytes(8, "big") + b"".join(txids))


@dataclass(frozen=True)
class Block:
    """An ordered list of transactions, the first being the coinbase."""

    height: int
    prev_hash: bytes
    txs: Tuple[Transaction, ...]
    hash: bytes = field(default=b"", compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "txs", tuple(self.txs))
        if not self.txs or not self.txs[0].is_coinbase:
            raise InvalidBlock("First transaction of a block must be a coinbase")
        if any(tx.is_coinbase for tx in self.txs[1:]):
            raise InvalidBlock("Only the first transaction may be a coinbase")
        if not self.hash:
            object.__setattr__(self, "hash", block_hash(self.prev_hash, self.height, self.txids))

    @property
    def coinbase(self) -> Transaction:
        return self.txs[0]

    @property
    def txids(self) -> List[TxId]:
        return [tx.txid for tx in self.txs]

    def contains(self, txid: TxId) -> bool:
        return txid in self.txids

    def spent_outpoints(self) -> Set[OutPoint]:
        return {op for tx in self.txs for op in tx.outpoints}


def apply_block(utxos: UtxoSet, block: Block) -> Tuple[UtxoSet, Amount]:
    """Validate every transaction of `block` and return the resulting set.

    Transactions are checked in order against the pre-block set minus the
    outpoints spent so far; outputs created in the block become spendable
    only after it.

    Returns:
        The new set and the total fees collected

    Raises:
        InvalidBlock: Naming the first failing transaction; the input set is unchanged
    """
    spent: Set[OutPoint] = set()
    created: List[Tuple[OutPoint, UtxoEntry]] = []
    fees = 0

    for position, tx in enumerate(block.txs):
        try:
            if position:
                for index, outpoint in enumerate(tx.outpoints):
                    if outpoint in spent:
                        raise DuplicateInput(f"Outpoint {outpoint} already spent in this block", index)
                check_transaction(tx, utxos)
                fees += compute_fee(tx, utxos)
                spent.update(tx.outpoints)
            for outpoint, output in tx.created():
                if outpoint in utxos:
                    raise OutputExists(f"Output {outpoint} already exists")
                created.append((outpoint, UtxoEntry(output, block.height)))
        except InvalidBlock:
            raise
        except LedgerError as e:
            raise InvalidBlock(
                f"Block {block.height} tx {position} ({tx.txid.hex()}): {e.kind}: {e}", position
            ) from e

    logger.debug("Applied block %d: %d txs, %d sats fees", block.height, len(block.txs), fees)
    return utxos.updated(spent, created), fees
