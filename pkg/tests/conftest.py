"""Shared fixtures: a funded regtest chain with a deployed tick and a signed listing."""

from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import pytest

from snipesim.attack import VictimObservation
from snipesim.attack.sniper import craft_snipe, scan_mempool
from snipesim.attack.strategies import OutbidStrategy
from snipesim.core.chain import Chain
from snipesim.core.indexer import TokenLedger, rebuild
from snipesim.core.inscription import InscriptionMetadata, encode_inscription
from snipesim.core.market import (
    Listing,
    build_payment,
    build_purchase,
    create_listing,
    wallet_funds,
)
from snipesim.core.mempool import Mempool, MempoolPolicy
from snipesim.core.psbt import finalize_psbt, sign_psbt
from snipesim.core.signing import Keyring, SigningKey
from snipesim.core.tx import Transaction, TxOutput
from snipesim.mitigation.feelock import open_commitment

SEED = 7
SELLER_FUNDS = 156_250_000
BUYER_FUNDS = 87_985_000
ATTACKER_FUNDS = 78_130_000
LOW_FUNDS = 70_000_100
PRICE = 50_000_000
TICK = "ak47"
WALLETS = ["seller", "buyer", "attacker", "attacker_low", "miner"]


@dataclass
class Market:
    """A chain where the seller holds the whole premined tick and has listed 1000 of it."""

    keyring: Keyring
    chain: Chain
    pool: Mempool
    listing: Listing

    def key(self, name: str) -> SigningKey:
        return self.keyring.key(name)

    def ledger(self) -> TokenLedger:
        return rebuild(self.chain.blocks)

    def purchase(self, change: Optional[int] = 10_000_000, fee_rate=None, wallet: str = "buyer") -> Transaction:
        """Finalized buyer transaction, not yet submitted."""
        key = self.key(wallet)
        funds = wallet_funds(self.pool.utxos, key.address, exclude={self.listing.anchor[0]})
        psbt = build_purchase(
            self.listing, funds, key.address,
            change=None if fee_rate is not None else change, fee_rate=fee_rate,
        )
        signed, _ = sign_psbt(psbt, key)
        return finalize_psbt(signed)

    def observe(self, victim: Transaction) -> VictimObservation:
        for observation in scan_mempool(self.pool):
            if observation.victim_txid == victim.txid:
                return observation
        raise AssertionError("victim not in pool")

    def snipe(self, observation: VictimObservation, wallet: str, strategy=None, disjoint: bool = False) -> Transaction:
        """Finalized replica of a pooled purchase, not yet submitted."""
        key = self.key(wallet)
        strategy = strategy or OutbidStrategy()
        psbt = craft_snipe(observation, wallet_funds(self.pool.utxos, key.address), strategy, key.address, disjoint)
        signed, _ = sign_psbt(psbt, key)
        return finalize_psbt(signed)

    def mine(self):
        return self.chain.mine(self.pool, self.keyring.address("miner"))


def build_market(
    policy: Optional[MempoolPolicy] = None,
    fee_lock: Optional[int] = None,
    extra: Sequence[Tuple[str, int]] = (),
) -> Market:
    """Fund wallets, deploy the tick with premine and publish a listing."""
    names = WALLETS + [name for name, _ in extra]
    keyring = Keyring(SEED, names)
    allocations = [
        (keyring.address("seller"), SELLER_FUNDS),
        (keyring.address("buyer"), BUYER_FUNDS),
        (keyring.address("attacker"), ATTACKER_FUNDS),
        (keyring.address("attacker_low"), LOW_FUNDS),
    ] + [(keyring.address(name), amount) for name, amount in extra]
    chain = Chain(allocations)
    pool = Mempool(chain.utxos, policy or MempoolPolicy(min_relay_fee_rate=0))
    seller = keyring.key("seller")
    miner = keyring.address("miner")

    deploy = InscriptionMetadata.deploy(TICK, 2_100_000, 1000)
    pool.submit(build_payment(seller, pool.utxos, [TxOutput.carrier(bytes.fromhex(encode_inscription(deploy)))], 10_000))
    chain.mine(pool, miner)

    anchor_tx = build_payment(seller, pool.utxos, [TxOutput.pay(seller.address, 0)], 10_000)
    pool.submit(anchor_tx)
    chain.mine(pool, miner)

    lock_outputs: Tuple[TxOutput, ...] = ()
    reveal = b""
    if fee_lock is not None:
        commitment = open_commitment(fee_lock, bytes(range(32)))
        lock_outputs = (commitment.to_output(),)
        reveal = commitment.reveal_bytes()

    payload = bytes.fromhex(encode_inscription(InscriptionMetadata.transfer(TICK, 1000)))
    listing = create_listing(seller, anchor_tx.created()[0], PRICE, payload, None, lock_outputs, reveal)
    return Market(keyring, chain, pool, listing)


@pytest.fixture
def market() -> Market:
    return build_market()


@pytest.fixture
def make_market():
    return build_market


@pytest.fixture
def keyring() -> Keyring:
    return Keyring(SEED, WALLETS)

@pytest.fixture
def pending(market):
    """Market with the buyer's purchase in the mempool."""
    buyer = market.purchase()
    market.pool.submit(buyer)
    return market, buyer
