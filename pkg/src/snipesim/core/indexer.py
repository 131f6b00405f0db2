"""Off-chain BRC20 balance tracking over confirmed blocks."""

import logging
from dataclasses import dataclass, field, replace
from typing import Callable, Dict, List, Optional, Sequence, Tuple

from .inscription import InscriptionMetadata, extract_inscriptions
from .ledger import Block
from .tx import OutPoint, Transaction, TxId, TxOutput

logger = logging.getLogger(__name__)


class IndexerError(Exception):
    """Base exception for indexer errors."""
    pass


class OutOfOrder(IndexerError):
    """Raised when blocks are not consecutive from genesis."""
    pass


@dataclass(frozen=True)
class TxParties:
    """Owners of a transaction's spent inputs and of its outputs."""

    input_owners: Tuple[Optional[str], ...]
    output_owners: Tuple[Optional[str], ...]

    @property
    def sender(self) -> Optional[str]:
        return self.input_owners[0] if self.input_owners else None

    def recipient(self) -> Optional[str]:
        """Fee payer when distinct from the sender, else the first foreign output."""
        sender = self.sender
        for owner in self.input_owners[1:]:
            if owner is not None and owner != sender:
                return owner
        for owner in self.output_owners:
            if owner is not None and owner != sender:
                return owner
        return None


Resolver = Callable[[Transaction], TxParties]


@dataclass(frozen=True)
class TickInfo:
    max: int
    lim: int
    deployer: str
    minted: int = 0


@dataclass(frozen=True)
class TokenLedger:
    """Indexer state; every update returns a new ledger."""

    deployed: Dict[str, TickInfo] = field(default_factory=dict)
    balances: Dict[Tuple[str, str], int] = field(default_factory=dict)
    height: int = -1

    def balance(self, address: str, tick: str) -> int:
        return self.balances.get((address, tick.lower()), 0)

    def supply(self, tick: str) -> int:
        tick = tick.lower()
        return sum(amount for (_, t), amount in self.balances.items() if t == tick)

    def is_conserved(self) -> bool:
        """Per tick, balances sum to the minted amount and none is negative."""
        if any(amount < 0 for amount in self.balances.values()):
            return False
        return all(self.supply(tick) == info.minted for tick, info in self.deployed.items())

    def report_lines(self) -> List[str]:
        """Lines "tick address balance", sorted."""
        return sorted(
            f"{tick} {address} {amount}"
            for (address, tick), amount in self.balances.items()
            if amount
        )


def _credit(balances: Dict[Tuple[str, str], int], address: str, tick: str, amount: int) -> None:
    key = (address, tick)
    balances[key] = balances.get(key, 0) + amount


def _apply(
    ledger: TokenLedger, meta: InscriptionMetadata, parties: TxParties, premine: bool
) -> TokenLedger:
    tick = meta.tick.lower()
    deployed = ledger.deployed
    balances = ledger.balances

    if meta.op == "deploy":
        if tick in deployed or parties.sender is None:
            return ledger
        minted = meta.max_supply if premine else 0
        deployed = {**deployed, tick: TickInfo(meta.max_supply, meta.limit, parties.sender, minted)}
        if minted:
            balances = dict(balances)
            _credit(balances, parties.sender, tick, minted)
        logger.info("Deployed %s max=%d lim=%d", tick, meta.max_supply, meta.limit)
        return replace(ledger, deployed=deployed, balances=balances)

    info = deployed.get(tick)
    if info is None:
        return ledger

    if meta.op == "mint":
        amount = min(meta.amount, info.lim, info.max - info.minted)
        if amount <= 0 or parties.sender is None:
            return ledger
        balances = dict(balances)
        _credit(balances, parties.sender, tick, amount)
        deployed = {**deployed, tick: replace(info, minted=info.minted + amount)}
        return replace(ledger, deployed=deployed, balances=balances)

    sender, recipient = parties.sender, parties.recipient()
    if sender is None or recipient is None:
        return ledger
    if ledger.balance(sender, tick) < meta.amount:
        logger.debug("Ignoring transfer of %d %s from %s: insufficient balance", meta.amount, tick, sender[:16])
        return ledger
    balances = dict(balances)
    _credit(balances, sender, tick, -meta.amount)
    _credit(balances, recipient, tick, meta.amount)
    logger.info("Transfer %d %s %s -> %s", meta.amount, tick, sender[:16], recipient[:16])
    return replace(ledger, balances=balances)


def index_block(
    ledger: TokenLedger, block: Block, resolver: Resolver, premine: bool = True
) -> TokenLedger:
    """Fold the inscriptions of a confirmed block into the ledger.

    Invalid inscriptions are skipped; indexing never fails.
    """
    for tx in block.txs[1:]:
        inscriptions = extract_inscriptions(tx)
        if not inscriptions:
            continue
        parties = resolver(tx)
        for _, meta in inscriptions:
            ledger = _apply(ledger, meta, parties, premine)
    return replace(ledger, height=block.height)


def balance(ledger: TokenLedger, address: str, tick: str) -> int:
    return ledger.balance(address, tick)


class ChainResolver:
    """Resolves input owners by looking up the spent outputs in earlier blocks."""

    def __init__(self) -> None:
        self._txs: Dict[TxId, Transaction] = {}

    def add_block(self, block: Block) -> None:
        for tx in block.txs:
            self._txs[tx.txid] = tx

    def get(self, txid: TxId) -> Optional[Transaction]:
        return self._txs.get(txid)

    def output(self, outpoint: OutPoint) -> Optional[TxOutput]:
        tx = self._txs.get(outpoint.txid)
        if tx is None or outpoint.vout >= len(tx.outputs):
            return None
        return tx.outputs[outpoint.vout]

    def __call__(self, tx: Transaction) -> TxParties:
        inputs = []
        for outpoint in tx.outpoints:
            spent = self.output(outpoint)
            inputs.append(spent.lock if spent is not None and not spent.is_data else None)
        outputs = tuple(None if out.is_data else out.lock for out in tx.outputs)
        return TxParties(tuple(inputs), outputs)


def rebuild(blocks: Sequence[Block], premine: bool = True) -> TokenLedger:
    """Replay a chain from genesis into a fresh ledger.

    Raises:
        OutOfOrder: If heights do not run 0, 1, 2, ...
    """
    ledger = TokenLedger()
    resolver = ChainResolver()
    for expected, block in enumerate(blocks):
        if block.height != expected:
            raise OutOfOrder(f"Expected block at height {expected}, got {block.height}")
        resolver.add_block(block)
        ledger = index_block(ledger, block, resolver, premine)
    return ledger
