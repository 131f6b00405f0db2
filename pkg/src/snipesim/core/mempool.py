"""Unconfirmed transaction pool with fee-rate ordering and replacement policy."""

import itertools
import logging
from dataclasses import dataclass
from decimal import ROUND_HALF_EVEN, Decimal
from enum import Enum
from fractions import Fraction
from typing import Dict, Iterator, List, Optional, Set, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field

from .ledger import Block, UtxoSet, compute_fee, validate
from .settings import settings
from .tx import OutPoint, Transaction, TxId, vsize

logger = logging.getLogger(__name__)

DEFAULT_MAX_BLOCK_VBYTES = 1_000_000


class PolicyMode(str, Enum):
    COEXIST = "coexist"
    RBF_REPLACE = "rbf-replace"


class MempoolPolicy(BaseModel):
    """Admission rules for the pool."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    mode: PolicyMode = PolicyMode.COEXIST
    min_relay_fee_rate: Decimal = Field(default_factory=lambda: settings.min_relay_fee_rate, ge=0)
    fee_lock_enforced: bool = False
    strict_input_match: bool = False

    @property
    def min_rate(self) -> Fraction:
        return Fraction(self.min_relay_fee_rate)


class RejectReason(str, Enum):
    INVALID_TX = "InvalidTx"
    BELOW_MIN_FEE = "BelowMinFee"
    RBF_FEE_TOO_LOW = "RbfFeeTooLow"
    RBF_INPUT_MISMATCH = "RbfInputMismatch"
    FEE_EXCEEDS_LOCK = "FeeExceedsLock"
    BAD_COMMITMENT = "BadCommitment"
    ALREADY_KNOWN = "AlreadyKnown"


@dataclass(frozen=True)
class Accepted:
    txid: TxId
    status: str = "accepted"


@dataclass(frozen=True)
class Replaced:
    txid: TxId
    evicted: Tuple[TxId, ...]
    status: str = "replaced"


@dataclass(frozen=True)
class Rejected:
    reason: RejectReason
    detail: str = ""
    txid: Optional[TxId] = None
    status: str = "rejected"


SubmitResult = Union[Accepted, Replaced, Rejected]


def format_fee_rate(rate: Fraction) -> str:
    """Render a rational fee rate with three decimals."""
    value = Decimal(rate.numerator) / Decimal(rate.denominator)
    return str(value.quantize(Decimal("0.001"), rounding=ROUND_HALF_EVEN))


@dataclass(frozen=True)
class MempoolEntry:
    """A pooled transaction with its admission-time fee."""

    tx: Transaction
    txid: TxId
    fee: int
    vsize: int
    seq: int

    @property
    def fee_rate(self) -> Fraction:
        return Fraction(self.fee, self.vsize)

    @property
    def outpoints(self) -> Tuple[OutPoint, ...]:
        return self.tx.outpoints

    def outbids(self, other: "MempoolEntry") -> bool:
        """Strictly higher fee rate, compared without rounding."""
        return self.fee * other.vsize > other.fee * self.vsize

    def ranks_before(self, other: "MempoolEntry") -> bool:
        """Block-template priority: higher rate first, then earlier arrival."""
        return self.sort_key() < other.sort_key()

    def sort_key(self) -> Tuple[Fraction, int]:
        return (-self.fee_rate, self.seq)

    def listing_line(self) -> str:
        return f"{self.txid.hex()} {self.fee} {format_fee_rate(self.fee_rate)} {self.seq}"


class Mempool:
    """Pool of valid unconfirmed transactions.

    Transactions are validated against the confirmed UTXO set only; no
    entry spends another entry's output.
    """

    def __init__(self, utxos: UtxoSet, policy: Optional[MempoolPolicy] = None) -> None:
        self.utxos = utxos
        self.policy = policy or MempoolPolicy()
        self._entries: Dict[TxId, MempoolEntry] = {}
        self._spenders: Dict[OutPoint, Set[TxId]] = {}
        self._seq = itertools.count(1)

    def __len__(self) -> int:
        return len(self._entries)

    def __contains__(self, txid: object) -> bool:
        return txid in self._entries

    def __iter__(self) -> Iterator[MempoolEntry]:
        return iter(sorted(self._entries.values(), key=lambda e: e.seq))

    def entry(self, txid: TxId) -> Optional[MempoolEntry]:
        return self._entries.get(txid)

    def submit(self, tx: Transaction) -> SubmitResult:
        """Validate and admit a transaction under the configured policy."""
        txid = tx.txid
        if txid in self._entries:
            return Rejected(RejectReason.ALREADY_KNOWN, "Transaction already in pool", txid)

        errors = validate(tx, self.utxos)
        if errors:
            detail = "; ".join(f"{e.kind}: {e}" for e in errors)
            logger.debug("Rejected %s: %s", txid.hex()[:16], detail)
            return Rejected(RejectReason.INVALID_TX, detail, txid)

        fee = compute_fee(tx, self.utxos)
        candidate = MempoolEntry(tx, txid, fee, vsize(tx), seq=0)
        if candidate.fee_rate < self.policy.min_rate:
            return Rejected(
                RejectReason.BELOW_MIN_FEE,
                f"Fee rate {format_fee_rate(candidate.fee_rate)} below minimum "
                f"{self.policy.min_relay_fee_rate}",
                txid,
            )

        if self.policy.fee_lock_enforced:
            from ..mitigation.feelock import check_admission

            lock_failure = check_admission(tx, self.utxos)
            if lock_failure is not None:
                return Rejected(RejectReason(lock_failure), "Fee lock check failed", txid)

        evicted: List[TxId] = []
        if self.policy.mode == PolicyMode.RBF_REPLACE:
            rivals = [self._entries[t] for t in self.conflicts_of(tx)]
            if self.policy.strict_input_match:
                mine = set(tx.outpoints)
                if any(set(rival.outpoints) != mine for rival in rivals):
                    return Rejected(
                        RejectReason.RBF_INPUT_MISMATCH, "Replacement must spend identical inputs", txid
                    )
            if not all(candidate.outbids(rival) for rival in rivals):
                return Rejected(
                    RejectReason.RBF_FEE_TOO_LOW, "Fee rate does not exceed every conflicting entry", txid
                )
            for rival in sorted(rivals, key=lambda e: e.seq):
                self._remove(rival.txid)
                evicted.append(rival.txid)

        entry = MempoolEntry(tx, txid, fee, candidate.vsize, next(self._seq))
        self._entries[txid] = entry
        for outpoint in entry.outpoints:
            self._spenders.setdefault(outpoint, set()).add(txid)

        logger.info(
            "Admitted %s fee=%d rate=%s seq=%d",
            txid.hex()[:16], fee, format_fee_rate(entry.fee_rate), entry.seq,
        )
        if evicted:
            logger.info("Replacement evicted %s", [t.hex()[:16] for t in evicted])
            return Replaced(txid, tuple(evicted))
        return Accepted(txid)

    def get_raw_mempool(self) -> List[TxId]:
        """Pooled txids in arrival order."""
        return [entry.txid for entry in self]

    def conflicts_of(self, tx: Transaction) -> Set[TxId]:
        """Pool entries sharing at least one input outpoint with `tx`."""
        found: Set[TxId] = set()
        for outpoint in tx.outpoints:
            found |= self._spenders.get(outpoint, set())
        return found

    def rivals_of(self, txid: TxId) -> List[MempoolEntry]:
        """Other pool entries conflicting with a pooled transaction."""
        entry = self._entries[txid]
        return sorted(
            (self._entries[t] for t in self.conflicts_of(entry.tx) if t != txid),
            key=lambda e: e.seq,
        )

    def conflict_sets(self) -> List[List[MempoolEntry]]:
        """Connected groups of entries linked by shared outpoints, by arrival."""
        groups: List[List[MempoolEntry]] = []
        visited: Set[TxId] = set()
        for entry in self:
            if entry.txid in visited:
                continue
            group, frontier = [], [entry.txid]
            visited.add(entry.txid)
            while frontier:
                current = self._entries[frontier.pop()]
                group.append(current)
                for other in self.conflicts_of(current.tx):
                    if other not in visited:
                        visited.add(other)
                        frontier.append(other)
            groups.append(sorted(group, key=lambda e: e.seq))
        return groups

    def select_for_block(self, max_vbytes: int = DEFAULT_MAX_BLOCK_VBYTES) -> List[Transaction]:
        """Greedy block template by descending fee rate, ties to earlier arrival.

        A transaction is skipped when it conflicts with one already chosen or
        does not fit in the remaining space.
        """
        chosen: List[Transaction] = []
        spent: Set[OutPoint] = set()
        used = 0
        for entry in sorted(self._entries.values(), key=MempoolEntry.sort_key):
            if spent.intersection(entry.outpoints):
                continue
            if used + entry.vsize > max_vbytes:
                continue
            chosen.append(entry.tx)
            spent.update(entry.outpoints)
            used += entry.vsize
        logger.debug("Selected %d of %d entries, %d vbytes", len(chosen), len(self), used)
        return chosen

    def evict_for_block(self, block: Block, utxos: Optional[UtxoSet] = None) -> List[TxId]:
        """Drop included entries and everything conflicting with the block.

        Args:
            block: The block just connected
            utxos: The post-block set; becomes the pool's validation base

        Returns:
            Evicted txids in arrival order
        """
        included = set(block.txids)
        consumed = block.spent_outpoints()
        if utxos is not None:
            self.utxos = utxos
        doomed = []
        for entry in self:
            stale = utxos is not None and any(op not in utxos for op in entry.outpoints)
            if entry.txid in included or consumed.intersection(entry.outpoints) or stale:
                doomed.append(entry.txid)
        for txid in doomed:
            self._remove(txid)
        if doomed:
            logger.info("Block %d evicted %d entries", block.height, len(doomed))
        return doomed

    def listing(self) -> List[str]:
        """Lines "txid fee_sats fee_rate seq" in arrival order."""
        return [entry.listing_line() for entry in self]

    def _remove(self, txid: TxId) -> None:
        entry = self._entries.pop(txid)
        for outpoint in entry.outpoints:
            spenders = self._spenders.get(outpoint)
            if spenders is not None:
                spenders.discard(txid)
                if not spenders:
                    del self._spenders[outpoint]
