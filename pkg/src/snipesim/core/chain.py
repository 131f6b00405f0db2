"""Regtest-style chain: genesis funding, mining and a transaction index."""

import logging
from typing import List, Optional, Sequence, Tuple

from .indexer import ChainResolver, TxParties
from .ledger import GENESIS_PREV_HASH, Block, InvalidBlock, UtxoSet, apply_block, compute_fee
from .mempool import DEFAULT_MAX_BLOCK_VBYTES, Mempool
from .tx import Amount, Transaction, TxId, TxOutput

logger = logging.getLogger(__name__)

DEFAULT_COINBASE_REWARD = 5_000_000_000


def build_coinbase(height: int, payouts: Sequence[Tuple[str, Amount]]) -> Transaction:
    """Coinbase paying `payouts` plus a data output holding the height."""
    outputs = [TxOutput.pay(address, amount) for address, amount in payouts]
    outputs.append(TxOutput.carrier(height.to_bytes(8, "big")))
    return Transaction(inputs=(), outputs=tuple(outputs))


class Chain:
    """Blocks from genesis, the UTXO set they produce and a txid index."""

    def __init__(
        self,
        allocations: Sequence[Tuple[str, Amount]],
        coinbase_reward: Amount = DEFAULT_COINBASE_REWARD,
    ) -> None:
        self.coinbase_reward = coinbase_reward
        self.blocks: List[Block] = []
        self.utxos = UtxoSet()
        self.issuance: Amount = 0
        self.txindex = ChainResolver()

        genesis = Block(0, GENESIS_PREV_HASH, (build_coinbase(0, allocations),))
        self.utxos, _ = apply_block(self.utxos, genesis)
        self.issuance = genesis.coinbase.output_total()
        self._append(genesis)

    @property
    def tip(self) -> Block:
        return self.blocks[-1]

    @property
    def height(self) -> int:
        return self.tip.height

    def connect(self, block: Block) -> None:
        """Apply a block on top of the tip.

        Raises:
            InvalidBlock: If the block does not extend the tip, overpays the
                coinbase or contains an invalid transaction
        """
        if block.height != self.height + 1 or block.prev_hash != self.tip.hash:
            raise InvalidBlock(f"Block {block.height} does not extend tip {self.height}")
        utxos, fees = apply_block(self.utxos, block)
        minted = block.coinbase.output_total()
        if minted > self.coinbase_reward + fees:
            raise InvalidBlock(
                f"Coinbase pays {minted}, allowed {self.coinbase_reward + fees}", 0
            )
        self.utxos = utxos
        self.issuance += minted - fees
        self._append(block)

    def mine(
        self, pool: Mempool, miner: str, max_vbytes: int = DEFAULT_MAX_BLOCK_VBYTES
    ) -> Block:
        """Assemble a block from the pool, connect it and evict what it settles."""
        txs = pool.select_for_block(max_vbytes)
        fees = sum(compute_fee(tx, self.utxos) for tx in txs)
        height = self.height + 1
        coinbase = build_coinbase(height, [(miner, self.coinbase_reward + fees)])
        block = Block(height, self.tip.hash, (coinbase, *txs))
        self.connect(block)
        evicted = pool.evict_for_block(block, self.utxos)
        logger.info(
            "Mined block %d with %d txs, %d sats fees, %d evicted",
            height, len(txs), fees, len(evicted),
        )
        return block

    def find_tx(self, txid: TxId) -> Optional[Transaction]:
        return self.txindex.get(txid)

    def is_confirmed(self, txid: TxId) -> bool:
        return self.find_tx(txid) is not None

    def resolve(self, tx: Transaction) -> TxParties:
        return self.txindex(tx)

    def _append(self, block: Block) -> None:
        self.blocks.append(block)
        self.txindex.add_block(block)
