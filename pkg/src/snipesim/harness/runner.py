"""Executes a scenario tick by tick and assembles its report."""

import logging
from fractions import Fraction
from typing import Dict, List, Optional, Set, Tuple

from ..attack import AttackError, AttackOutcome, AttackRejected
from ..attack.sniper import execute_attack, find_victim, scan_mempool, verify_success
from ..attack.strategies import strategy_from_config
from ..core.chain import Chain
from ..core.indexer import IndexerError, TokenLedger, index_block, rebuild
from ..core.inscription import InscriptionError, InscriptionMetadata, encode_inscription
from ..core.ledger import Block, LedgerError, compute_fee
from ..core.market import (
    Listing,
    MarketError,
    build_payment,
    build_purchase,
    create_listing,
    wallet_funds,
)
from ..core.mempool import Mempool, PolicyMode, Rejected, Replaced, SubmitResult, format_fee_rate
from ..core.psbt import PsbtError, finalize_psbt, sign_psbt
from ..core.settings import settings
from ..core.signing import Keyring
from ..core.tx import Transaction, TxId, TxOutput, sha256
from ..mitigation import MitigationError
from ..mitigation.bump import bump_fee
from ..mitigation.feelock import open_commitment
from ..mitigation.tiered import ProtectedOrder, create_protected_order, monitor_and_escalate
from . import ScenarioError
from .report import (
    Admission,
    BalanceLine,
    Contest,
    Entrant,
    ExpectationResult,
    ListingLine,
    OrderLine,
    OutcomeLine,
    PoolLine,
    Report,
    Snapshot,
)
from .scenario import (
    Action,
    BumpAction,
    BuyAction,
    DeployAction,
    MineAction,
    MintAction,
    ProtectAction,
    PublishPsbtAction,
    Scenario,
    SnipeAction,
)

logger = logging.getLogger(__name__)

NONCE_DOMAIN = b"snipesim-nonce"

STEP_ERRORS = (
    LedgerError,
    PsbtError,
    MarketError,
    InscriptionError,
    IndexerError,
    AttackError,
    MitigationError,
    ValueError,
    KeyError,
)


class ScenarioRunner:
    """Owns the chain, mempool and indexer for one scenario run."""

    def __init__(self, scenario: Scenario) -> None:
        self.scenario = scenario
        self.keyring = Keyring(scenario.seed, scenario.wallets)
        reward = scenario.coinbase_reward
        if reward is None:
            reward = settings.coinbase_reward
        allocations = [(self.keyring.address(a.wallet), a.amount) for a in scenario.genesis_allocations]
        self.chain = Chain(allocations, reward)
        self.pool = Mempool(self.chain.utxos, scenario.policy)
        self.ledger = index_block(TokenLedger(), self.chain.tip, self.chain.resolve, scenario.premine)

        self.labels: Dict[TxId, str] = {}
        self.by_label: Dict[str, TxId] = {}
        self.fees: Dict[str, int] = {}
        self.listings: Dict[str, Listing] = {}
        self.orders: Dict[str, ProtectedOrder] = {}
        self.outcomes: Dict[str, AttackOutcome] = {}
        self.outcome_owner: Dict[str, str] = {}
        self.outcome_admission: Dict[str, str] = {}

        self.admissions: List[Admission] = []
        self.timeline: List[Snapshot] = []
        self.contests: List[Contest] = []
        self.replay_consistent = True
        self.supply_conserved = self.ledger.is_conserved()

    # Labels

    def _register(self, label: str, txid: TxId) -> None:
        self.labels[txid] = label
        self.by_label[label] = txid

    def _name(self, txid: TxId) -> str:
        return self.labels.get(txid, txid.hex()[:16])

    def resolve_label(self, label: str) -> TxId:
        """Txid behind a label; an order label means its current tier."""
        if label in self.orders:
            return self.orders[label].current.txid
        if label not in self.by_label:
            raise KeyError(f"Unknown transaction label {label!r}")
        return self.by_label[label]

    def nonce(self, label: str) -> bytes:
        return sha256(NONCE_DOMAIN + self.scenario.seed.to_bytes(8, "big") + label.encode("utf-8"))

    # Submission bookkeeping

    def _submit(self, step: int, label: str, tx: Transaction) -> SubmitResult:
        before = set(self.pool.get_raw_mempool())
        try:
            self.fees[label] = compute_fee(tx, self.pool.utxos)
        except LedgerError:
            pass
        result = self.pool.submit(tx)
        self._register(label, tx.txid)
        self._record_admission(step, label, tx.txid, result, before)
        return result

    def _record_admission(
        self, step: int, label: str, txid: TxId, result: SubmitResult, before: Set[TxId]
    ) -> None:
        evicted = sorted(before - set(self.pool.get_raw_mempool()) - {txid})
        if isinstance(result, Replaced):
            evicted = list(result.evicted)
        self.admissions.append(
            Admission(
                step=step,
                label=label,
                txid=txid.hex(),
                status=result.status,
                reason=result.reason.value if isinstance(result, Rejected) else None,
                evicted=[self._name(t) for t in evicted],
            )
        )

    # Actions

    def _deploy(self, step: int, action: DeployAction) -> None:
        meta = InscriptionMetadata.deploy(action.tick, action.max, action.lim)
        self._inscribe(step, action.wallet, meta, action.fee_sats, action.label or f"deploy-{action.tick}")

    def _mint(self, step: int, action: MintAction) -> None:
        meta = InscriptionMetadata.mint(action.tick, action.amt)
        self._inscribe(step, action.wallet, meta, action.fee_sats, action.label or f"mint-{action.tick}")

    def _inscribe(self, step: int, wallet: str, meta: InscriptionMetadata, fee: int, label: str) -> None:
        key = self.keyring.key(wallet)
        payload = bytes.fromhex(encode_inscription(meta))
        tx = build_payment(key, self.pool.utxos, [TxOutput.carrier(payload)], fee)
        self._submit(step, label, tx)

    def _publish(self, step: int, action: PublishPsbtAction) -> None:
        label = action.label or "listing"
        seller = self.keyring.key(action.wallet)
        anchor_tx = build_payment(
            seller, self.pool.utxos, [TxOutput.pay(seller.address, action.postage)], action.fee_sats
        )
        self._submit(step, f"{label}-anchor", anchor_tx)

        buyer_funding = None
        if action.buyer:
            funds = wallet_funds(self.pool.utxos, self.keyring.address(action.buyer))
            if not funds:
                raise MarketError(f"Designated buyer {action.buyer!r} has no spendable outputs")
            buyer_funding = max(funds, key=lambda f: (f[1].amount, f[0].txid, f[0].vout))

        lock_outputs: Tuple[TxOutput, ...] = ()
        reveal = b""
        if action.fee_lock is not None:
            commitment = open_commitment(action.fee_lock, self.nonce(label))
            lock_outputs = (commitment.to_output(),)
            reveal = commitment.reveal_bytes()

        meta = InscriptionMetadata.transfer(action.tick, action.amt)
        self.listings[label] = create_listing(
            seller,
            anchor_tx.created()[0],
            action.price,
            bytes.fromhex(encode_inscription(meta)),
            buyer_funding,
            lock_outputs,
            reveal,
        )

    def _listing(self, label: str) -> Listing:
        if label not in self.listings:
            raise KeyError(f"Unknown listing {label!r}")
        return self.listings[label]

    def _buy(self, step: int, action: BuyAction) -> None:
        listing = self._listing(action.listing)
        key = self.keyring.key(action.wallet)
        funds = wallet_funds(self.pool.utxos, key.address, exclude={listing.anchor[0]})
        rate = Fraction(action.fee_rate) if action.fee_rate is not None else None
        purchase = build_purchase(listing, funds, key.address, change=action.change, fee_rate=rate)
        signed, complete = sign_psbt(purchase, key)
        logger.debug("Buyer %s signed purchase, complete=%s", action.wallet, complete)
        self._submit(step, action.label or "buyer", finalize_psbt(signed))

    def _snipe(self, step: int, action: SnipeAction) -> None:
        key = self.keyring.key(action.wallet)
        label = action.label or action.wallet
        target = self.resolve_label(action.target) if action.target else None
        victim = find_victim(scan_mempool(self.pool, exclude_payer=key.address), target)
        strategy = strategy_from_config(
            action.strategy, action.margin_sats, action.fixed_rate_sat_vb, action.fee_sats
        )
        funds = wallet_funds(self.pool.utxos, key.address)
        before = set(self.pool.get_raw_mempool())
        try:
            outcome = execute_attack(victim, funds, strategy, self.pool, key, action.disjoint)
            status = "accepted"
        except AttackRejected as e:
            outcome = e.outcome
            status = "rejected"
            self.admissions.append(
                Admission(step=step, label=label, txid=outcome.attack_txid.hex(), status=status, reason=e.reason)
            )
        outcome.tokens_before = self.ledger.balance(key.address, outcome.tick)
        self._register(label, outcome.attack_txid)
        self.fees[label] = outcome.attack_fee
        self.outcomes[label] = outcome
        self.outcome_owner[label] = key.address
        if status == "accepted":
            after = set(self.pool.get_raw_mempool())
            evicted = sorted(before - after)
            status = "replaced" if evicted else "accepted"
            self.admissions.append(
                Admission(
                    step=step,
                    label=label,
                    txid=outcome.attack_txid.hex(),
                    status=status,
                    evicted=[self._name(t) for t in evicted],
                )
            )
        self.outcome_admission[label] = status

    def _protect(self, step: int, action: ProtectAction) -> None:
        listing = self._listing(action.listing)
        key = self.keyring.key(action.wallet)
        label = action.label or "protected"
        funds = wallet_funds(self.pool.utxos, key.address, exclude={listing.anchor[0]})
        base = Fraction(action.tiers[0])
        purchase = build_purchase(listing, funds, key.address, fee_rate=base)
        order = create_protected_order(purchase, base, action.tiers, key)
        for index, tier in enumerate(order.tiers):
            self._register(f"{label}#{index}", tier.txid)
            self.fees[f"{label}#{index}"] = compute_fee(tier.tx, self.pool.utxos)
        self.orders[label] = order

    def _bump(self, step: int, action: BumpAction) -> None:
        key = self.keyring.key(action.wallet)
        target = self.resolve_label(action.target)
        entry = self.pool.entry(target)
        if action.fee_rate is not None:
            rate = Fraction(action.fee_rate)
        else:
            rival = self.pool.entry(self.resolve_label(action.outbid))  # type: ignore[arg-type]
            if rival is None or entry is None:
                raise MarketError(f"Cannot outbid {action.outbid!r}: not in the mempool")
            rate = Fraction(rival.fee + action.margin_sats, entry.vsize)
        before = set(self.pool.get_raw_mempool())
        replacement = bump_fee(self.pool, target, rate, key)
        label = action.label or f"{action.target}-bump"
        self._register(label, replacement.txid)
        self.fees[label] = self.pool.entry(replacement.txid).fee  # type: ignore[union-attr]
        evicted = sorted(before - set(self.pool.get_raw_mempool()))
        self.admissions.append(
            Admission(
                step=step,
                label=label,
                txid=replacement.txid.hex(),
                status="replaced" if evicted else "accepted",
                evicted=[self._name(t) for t in evicted],
            )
        )

    def _mine(self, step: int, action: MineAction) -> Block:
        contests = [group for group in self.pool.conflict_sets() if len(group) >= 2]
        miner = self.keyring.address(action.miner)
        block = self.chain.mine(self.pool, miner, action.max_vbytes or settings.max_block_vbytes)
        for group in contests:
            winner = next((entry for entry in group if block.contains(entry.txid)), None)
            self.contests.append(
                Contest(
                    height=block.height,
                    entrants=[
                        Entrant(
                            label=self._name(entry.txid),
                            txid=entry.txid.hex(),
                            fee_sats=entry.fee,
                            vsize=entry.vsize,
                            fee_rate=format_fee_rate(entry.fee_rate),
                        )
                        for entry in group
                    ],
                    winner=self._name(winner.txid) if winner else None,
                    winner_txid=winner.txid.hex() if winner else None,
                    winner_fee_sats=winner.fee if winner else None,
                )
            )

        self.ledger = index_block(self.ledger, block, self.chain.resolve, self.scenario.premine)
        if rebuild(self.chain.blocks, self.scenario.premine) != self.ledger:
            logger.error("Indexer replay diverged at height %d", block.height)
            self.replay_consistent = False
        if not self.ledger.is_conserved():
            logger.error("Token supply not conserved at height %d", block.height)
            self.supply_conserved = False

        for label, outcome in list(self.outcomes.items()):
            if outcome.settled:
                continue
            self.outcomes[label] = verify_success(
                outcome, block, self.chain, self.pool, self.ledger, self.outcome_owner[label]
            )
        return block

    def _monitor(self, step: int, block: Optional[Block]) -> None:
        for label, order in list(self.orders.items()):
            before = set(self.pool.get_raw_mempool())
            sent = order.broadcast
            updated = monitor_and_escalate(order, self.pool, block)
            self.orders[label] = updated
            for index in updated.broadcast[len(sent):]:
                tier = updated.tiers[index]
                tier_label = f"{label}#{index}"
                in_pool = tier.txid in self.pool
                evicted = sorted(before - set(self.pool.get_raw_mempool()))
                self.admissions.append(
                    Admission(
                        step=step,
                        label=tier_label,
                        txid=tier.txid.hex(),
                        status=("replaced" if evicted else "accepted") if in_pool else "rejected",
                        evicted=[self._name(t) for t in evicted],
                    )
                )

    def _snapshot(self, step: int, action: str) -> None:
        lines = [
            PoolLine(
                label=self._name(entry.txid),
                txid=entry.txid.hex(),
                fee_sats=entry.fee,
                fee_rate=format_fee_rate(entry.fee_rate),
                seq=entry.seq,
            )
            for entry in self.pool
        ]
        self.timeline.append(Snapshot(step=step, action=action, height=self.chain.height, mempool=lines))

    def step(self, index: int, action: Action) -> None:
        """Run one action, then one monitoring tick."""
        handlers = {
            "deploy": self._deploy,
            "mint": self._mint,
            "publish-psbt": self._publish,
            "buy": self._buy,
            "snipe": self._snipe,
            "protect": self._protect,
            "bump": self._bump,
        }
        try:
            block = None
            if isinstance(action, MineAction):
                block = self._mine(index, action)
            else:
                handlers[action.action](index, action)  # type: ignore[operator]
            self._monitor(index, block)
        except STEP_ERRORS as e:
            message = e.args[0] if isinstance(e, KeyError) and e.args else str(e)
            raise ScenarioError(f"{type(e).__name__}: {message}", index, action.action) from e
        self._snapshot(index, action.action)

    def run(self) -> Report:
        logger.info("Running scenario %s with seed %d", self.scenario.name, self.scenario.seed)
        for index, action in enumerate(self.scenario.actors):
            self.step(index, action)
        return self.report()

    # Report

    def _evaluate(self) -> List[ExpectationResult]:
        results = []
        for expectation in self.scenario.expectations:
            try:
                passed, detail = self._check(expectation)
            except KeyError as e:
                passed, detail = False, str(e.args[0] if e.args else e)
            results.append(ExpectationResult(description=expectation.describe(), passed=passed, detail=detail))
        return results

    def _check(self, expectation: object) -> Tuple[bool, str]:
        kind = getattr(expectation, "kind")
        if kind == "winner":
            height = getattr(expectation, "height")
            contests = [c for c in self.contests if height is None or c.height == height]
            if not contests:
                return False, "no contest recorded"
            winner = contests[-1].winner
            return winner == getattr(expectation, "label"), f"winner was {winner}"
        if kind == "fee":
            label = getattr(expectation, "label")
            if label not in self.fees:
                raise KeyError(f"no fee recorded for {label!r}")
            fee = self.fees[label]
            return fee == getattr(expectation, "equals"), f"fee was {fee}"
        if kind == "balance":
            address = self.keyring.address(getattr(expectation, "wallet"))
            held = self.ledger.balance(address, getattr(expectation, "tick"))
            return held == getattr(expectation, "equals"), f"balance was {held}"
        if kind == "evicted":
            survivors = []
            for label in getattr(expectation, "labels"):
                txid = self.resolve_label(label)
                if txid in self.pool or self.chain.is_confirmed(txid):
                    survivors.append(label)
            return not survivors, f"still pending or confirmed: {survivors}"
        if kind == "confirmed":
            confirmed = self.chain.is_confirmed(self.resolve_label(getattr(expectation, "label")))
            return confirmed == getattr(expectation, "equals"), f"confirmed={confirmed}"
        if kind == "admission":
            label = getattr(expectation, "label")
            records = [a for a in self.admissions if a.label == label]
            if not records:
                raise KeyError(f"no admission recorded for {label!r}")
            last = records[-1]
            reason = getattr(expectation, "reason")
            passed = last.status == getattr(expectation, "status") and (reason is None or last.reason == reason)
            return passed, f"{last.status} {last.reason or ''}".strip()
        if kind == "attack-success":
            label = getattr(expectation, "label")
            if label not in self.outcomes:
                raise KeyError(f"no attack labelled {label!r}")
            success = self.outcomes[label].success
            return success == getattr(expectation, "equals"), f"success={success}"
        if kind == "order-state":
            label = getattr(expectation, "label")
            if label not in self.orders:
                raise KeyError(f"no protected order labelled {label!r}")
            status = self.orders[label].state.label
            return status == getattr(expectation, "equals"), f"status was {status}"
        size = len(self.pool)
        return size == getattr(expectation, "equals"), f"mempool size was {size}"

    def _policy_text(self) -> str:
        policy = self.scenario.policy
        return (
            f"{policy.mode.value} min_relay={policy.min_relay_fee_rate} "
            f"fee_lock={'on' if policy.fee_lock_enforced else 'off'} "
            f"strict_input_match={'on' if policy.strict_input_match else 'off'}"
        )

    def report(self) -> Report:
        balances = [
            BalanceLine(
                tick=tick,
                wallet=self.keyring.name_of(address) or "",
                address=address,
                balance=amount,
            )
            for (address, tick), amount in sorted(self.ledger.balances.items(), key=lambda kv: (kv[0][1], kv[0][0]))
            if amount
        ]
        outcomes = [
            OutcomeLine(
                label=label,
                attack_txid=outcome.attack_txid.hex(),
                victim=self._name(outcome.victim_txid),
                attack_fee_sats=outcome.attack_fee,
                attack_fee_rate=format_fee_rate(outcome.attack_fee_rate),
                admission=self.outcome_admission[label],
                included=outcome.included,
                victim_evicted=outcome.victim_evicted,
                tokens_received=outcome.tokens_received,
                success=outcome.success,
            )
            for label, outcome in self.outcomes.items()
        ]
        orders = [
            OrderLine(
                label=label,
                status=order.state.label,
                current_tier=order.current_tier,
                tier_rates=[format_fee_rate(t.fee_rate) for t in order.tiers],
                broadcast_rates=[format_fee_rate(order.tiers[i].fee_rate) for i in order.broadcast],
                history=list(order.history),
            )
            for label, order in self.orders.items()
        ]
        listings = [
            ListingLine(label=label, seller=listing.seller, complete=listing.complete, psbt=listing.text)
            for label, listing in self.listings.items()
        ]
        return Report(
            scenario=self.scenario.name,
            description=self.scenario.description,
            seed=self.scenario.seed,
            policy=self._policy_text(),
            height=self.chain.height,
            replay_consistent=self.replay_consistent,
            supply_conserved=self.supply_conserved,
            listings=listings,
            timeline=self.timeline,
            admissions=self.admissions,
            contests=self.contests,
            balances=balances,
            outcomes=outcomes,
            orders=orders,
            expectations=self._evaluate(),
        )


def apply_overrides(
    scenario: Scenario,
    seed: Optional[int] = None,
    policy: Optional[str] = None,
    fee_lock: Optional[bool] = None,
) -> Scenario:
    """Scenario copy with CLI or environment overrides applied."""
    changes: Dict[str, object] = {}
    if policy is not None:
        try:
            mode = PolicyMode.RBF_REPLACE if policy == "rbf" else PolicyMode(policy)
        except ValueError:
            raise ScenarioError(f"Unknown policy {policy!r}; expected coexist or rbf")
        changes["mode"] = mode
    if fee_lock is not None:
        changes["fee_lock_enforced"] = fee_lock
    update: Dict[str, object] = {}
    if changes:
        update["policy"] = scenario.policy.model_copy(update=changes)
    if seed is not None:
        update["seed"] = seed
    return scenario.model_copy(update=update) if update else scenario


def run_scenario(scenario: Scenario) -> Report:
    """Execute every action of `scenario` in order and report.

    Raises:
        ScenarioError: Naming the failing step and action
    """
    return ScenarioRunner(scenario).run()
