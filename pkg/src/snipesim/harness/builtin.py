"""Built-in scenarios reproducing the regtest sniping rounds and the defenses."""

from typing import Any, Dict, List

from . import UnknownScenario
from .scenario import Scenario, parse_scenario

SELLER_FUNDS = 156_250_000
BUYER_FUNDS = 87_985_000
HIGH_FUNDS = 78_130_000
LOW_FUNDS = 70_000_100
PRICE = 50_000_000
TICK = "ak47"

RELAY_FREE: Dict[str, Any] = {"mode": "coexist", "min_relay_fee_rate": "0"}

Document = Dict[str, Any]


def _funding(**wallets: int) -> List[Document]:
    return [{"wallet": name, "amount": amount} for name, amount in wallets.items()]


def _listing_setup(fee_lock: Any = None) -> List[Document]:
    publish: Document = {
        "action": "publish-psbt",
        "wallet": "seller",
        "buyer": "buyer",
        "tick": TICK,
        "amt": 1000,
        "price": PRICE,
    }
    if fee_lock is not None:
        publish["fee_lock"] = fee_lock
    return [
        {"action": "deploy", "wallet": "seller", "tick": TICK, "max": 2_100_000, "lim": 1000},
        {"action": "mine", "miner": "miner"},
        publish,
        {"action": "mine", "miner": "miner"},
    ]


BUY = {"action": "buy", "wallet": "buyer", "change": 10_000_000}
SNIPE_HIGH = {
    "action": "snipe",
    "wallet": "attacker_high",
    "label": "attacker-high",
    "target": "buyer",
    "strategy": "outbid",
    "margin_sats": 140_000,
}
SNIPE_LOW = {
    "action": "snipe",
    "wallet": "attacker_low",
    "label": "attacker-low",
    "target": "buyer",
    "strategy": "underbid",
    "fee_sats": 100,
}
MINE = {"action": "mine", "miner": "miner"}

ROUND_WALLETS = ["seller", "buyer", "attacker_high", "attacker_low", "miner"]
ROUND_FUNDING = _funding(
    seller=SELLER_FUNDS, buyer=BUYER_FUNDS, attacker_high=HIGH_FUNDS, attacker_low=LOW_FUNDS
)
ROUND_EXPECTATIONS: List[Document] = [
    {"kind": "fee", "label": "buyer", "equals": 27_985_000},
    {"kind": "fee", "label": "attacker-high", "equals": 28_125_000},
    {"kind": "fee", "label": "attacker-low", "equals": 100},
    {"kind": "winner", "label": "attacker-high"},
    {"kind": "evicted", "labels": ["buyer", "attacker-low"]},
    {"kind": "balance", "wallet": "attacker_high", "tick": TICK, "equals": 1000},
    {"kind": "balance", "wallet": "seller", "tick": TICK, "equals": 2_099_000},
    {"kind": "balance", "wallet": "buyer", "tick": TICK, "equals": 0},
    {"kind": "attack-success", "label": "attacker-high", "equals": True},
    {"kind": "attack-success", "label": "attacker-low", "equals": False},
    {"kind": "mempool-size", "equals": 0},
]


def _sniper(rate: int, wallet: str = "", target: str = "buyer") -> Document:
    return {
        "action": "snipe",
        "wallet": wallet or f"sniper_{rate}",
        "label": f"sniper-{rate}",
        "target": target,
        "strategy": "fixed-rate",
        "fixed_rate_sat_vb": str(rate),
    }


def _tiered(sniper_rates: List[int], name: str, description: str, expectations: List[Document]) -> Document:
    return {
        "name": name,
        "description": description,
        "policy": RELAY_FREE,
        "wallets": ["seller", "buyer", "sniper", "miner"],
        "genesis_allocations": _funding(seller=SELLER_FUNDS, buyer=BUYER_FUNDS, sniper=HIGH_FUNDS),
        "actors": _listing_setup()
        + [{"action": "protect", "wallet": "buyer", "tiers": ["9", "95", "180"]}]
        + [_sniper(rate, wallet="sniper", target="protected") for rate in sniper_rates]
        + [MINE],
        "expectations": expectations,
    }


BUILTIN_SCENARIOS: Dict[str, Document] = {
    "baseline": {
        "name": "baseline",
        "description": "Purchase with no attacker confirms and moves the tokens to the buyer",
        "policy": RELAY_FREE,
        "wallets": ROUND_WALLETS,
        "genesis_allocations": ROUND_FUNDING,
        "actors": _listing_setup() + [BUY, MINE],
        "expectations": [
            {"kind": "confirmed", "label": "buyer"},
            {"kind": "balance", "wallet": "buyer", "tick": TICK, "equals": 1000},
            {"kind": "balance", "wallet": "seller", "tick": TICK, "equals": 2_099_000},
        ],
    },
    "round1": {
        "name": "round1",
        "description": "Buyer, then high-fee and low-fee snipes of the same listing",
        "policy": RELAY_FREE,
        "wallets": ROUND_WALLETS,
        "genesis_allocations": ROUND_FUNDING,
        "actors": _listing_setup() + [BUY, SNIPE_HIGH, SNIPE_LOW, MINE],
        "expectations": ROUND_EXPECTATIONS,
    },
    "round2": {
        "name": "round2",
        "description": "Round 1 with the two snipes submitted in reverse order",
        "policy": RELAY_FREE,
        "wallets": ROUND_WALLETS,
        "genesis_allocations": ROUND_FUNDING,
        "actors": _listing_setup() + [BUY, SNIPE_LOW, SNIPE_HIGH, MINE],
        "expectations": ROUND_EXPECTATIONS,
    },
    "round3": {
        "name": "round3",
        "description": "Buyer at 9 sat/vB against snipers at 20, 35 and 50 sat/vB",
        "policy": RELAY_FREE,
        "wallets": ["seller", "buyer", "sniper_20", "sniper_35", "sniper_50", "miner"],
        "genesis_allocations": _funding(
            seller=SELLER_FUNDS,
            buyer=BUYER_FUNDS,
            sniper_20=HIGH_FUNDS,
            sniper_35=HIGH_FUNDS,
            sniper_50=HIGH_FUNDS,
        ),
        "actors": _listing_setup()
        + [
            {"action": "buy", "wallet": "buyer", "fee_rate": "9"},
            _sniper(20),
            _sniper(35),
            _sniper(50),
            MINE,
        ],
        "expectations": [
            {"kind": "winner", "label": "sniper-50"},
            {"kind": "evicted", "labels": ["buyer", "sniper-20", "sniper-35"]},
            {"kind": "balance", "wallet": "sniper_50", "tick": TICK, "equals": 1000},
            {"kind": "attack-success", "label": "sniper-50", "equals": True},
            {"kind": "mempool-size", "equals": 0},
        ],
    },
    "round1-disjoint": {
        "name": "round1-disjoint",
        "description": "High-fee replica funded only by the attacker; both confirm and the attacker gains nothing",
        "policy": RELAY_FREE,
        "wallets": ROUND_WALLETS,
        "genesis_allocations": ROUND_FUNDING,
        "actors": _listing_setup() + [BUY, {**SNIPE_HIGH, "disjoint": True}, MINE],
        "expectations": [
            {"kind": "confirmed", "label": "buyer"},
            {"kind": "confirmed", "label": "attacker-high"},
            {"kind": "balance", "wallet": "buyer", "tick": TICK, "equals": 1000},
            {"kind": "balance", "wallet": "attacker_high", "tick": TICK, "equals": 0},
            {"kind": "attack-success", "label": "attacker-high", "equals": False},
        ],
    },
    "mitigation-tiered": _tiered(
        [50, 100],
        "mitigation-tiered",
        "Tiers 9/95/180 sat/vB outlast a sniper capped at 100 sat/vB",
        [
            {"kind": "order-state", "label": "protected", "equals": "Confirmed"},
            {"kind": "winner", "label": "protected#2"},
            {"kind": "balance", "wallet": "buyer", "tick": TICK, "equals": 1000},
            {"kind": "attack-success", "label": "sniper-100", "equals": False},
        ],
    ),
    "mitigation-tiered-overrun": _tiered(
        [50, 100, 200],
        "mitigation-tiered-overrun",
        "A sniper at 200 sat/vB exhausts tiers 9/95/180",
        [
            {"kind": "order-state", "label": "protected", "equals": "Exhausted"},
            {"kind": "winner", "label": "sniper-200"},
            {"kind": "balance", "wallet": "sniper", "tick": TICK, "equals": 1000},
            {"kind": "attack-success", "label": "sniper-200", "equals": True},
        ],
    ),
    "mitigation-bump": {
        "name": "mitigation-bump",
        "description": "Buyer bumps above the high-fee snipe and wins the block",
        "policy": RELAY_FREE,
        "wallets": ROUND_WALLETS,
        "genesis_allocations": ROUND_FUNDING,
        "actors": _listing_setup()
        + [
            BUY,
            SNIPE_HIGH,
            {
                "action": "bump",
                "wallet": "buyer",
                "target": "buyer",
                "outbid": "attacker-high",
                "margin_sats": 10_000,
            },
            MINE,
        ],
        "expectations": [
            {"kind": "fee", "label": "buyer-bump", "equals": 28_135_000},
            {"kind": "winner", "label": "buyer-bump"},
            {"kind": "balance", "wallet": "buyer", "tick": TICK, "equals": 1000},
            {"kind": "balance", "wallet": "attacker_high", "tick": TICK, "equals": 0},
            {"kind": "attack-success", "label": "attacker-high", "equals": False},
        ],
    },
    "mitigation-feelock": {
        "name": "mitigation-feelock",
        "description": "Listing commits to a 27,985,000 sat fee cap; the high-fee replica is refused",
        "policy": {**RELAY_FREE, "fee_lock_enforced": True},
        "wallets": ROUND_WALLETS,
        "genesis_allocations": ROUND_FUNDING,
        "actors": _listing_setup(fee_lock=27_985_000) + [BUY, SNIPE_HIGH, MINE],
        "expectations": [
            {"kind": "admission", "label": "buyer", "status": "accepted"},
            {"kind": "admission", "label": "attacker-high", "status": "rejected", "reason": "FeeExceedsLock"},
            {"kind": "confirmed", "label": "buyer"},
            {"kind": "balance", "wallet": "buyer", "tick": TICK, "equals": 1000},
            {"kind": "attack-success", "label": "attacker-high", "equals": False},
        ],
    },
    "rbf-mode-comparison": {
        "name": "rbf-mode-comparison",
        "description": "Round 1 under replace-by-fee relay: the high-fee snipe replaces the buyer",
        "policy": {"mode": "rbf-replace", "min_relay_fee_rate": "0"},
        "wallets": ROUND_WALLETS,
        "genesis_allocations": ROUND_FUNDING,
        "actors": _listing_setup()
        + [BUY, SNIPE_HIGH, {**SNIPE_LOW, "target": None}, MINE],
        "expectations": [
            {"kind": "admission", "label": "attacker-high", "status": "replaced"},
            {"kind": "admission", "label": "attacker-low", "status": "rejected", "reason": "RbfFeeTooLow"},
            {"kind": "confirmed", "label": "attacker-high"},
            {"kind": "balance", "wallet": "attacker_high", "tick": TICK, "equals": 1000},
            {"kind": "mempool-size", "equals": 0},
        ],
    },
    "mint-no-premine": {
        "name": "mint-no-premine",
        "description": "Deploy without premine; mints are capped by the per-mint limit",
        "premine": False,
        "policy": RELAY_FREE,
        "wallets": ["deployer", "minter", "miner"],
        "genesis_allocations": _funding(deployer=10_000_000, minter=10_000_000),
        "actors": [
            {"action": "deploy", "wallet": "deployer", "tick": "ordi", "max": 2500, "lim": 1000},
            MINE,
            {"action": "mint", "wallet": "minter", "tick": "ordi", "amt": 1000, "label": "mint-1"},
            MINE,
            {"action": "mint", "wallet": "minter", "tick": "ordi", "amt": 5000, "label": "mint-2"},
            MINE,
            {"action": "mint", "wallet": "deployer", "tick": "ordi", "amt": 1000, "label": "mint-3"},
            MINE,
        ],
        "expectations": [
            {"kind": "balance", "wallet": "deployer", "tick": "ordi", "equals": 500},
            {"kind": "balance", "wallet": "minter", "tick": "ordi", "equals": 2000},
        ],
    },
}


def list_scenarios() -> List[str]:
    """Names of the built-in scenarios, sorted."""
    return sorted(BUILTIN_SCENARIOS)


def builtin_document(name: str) -> Document:
    if name not in BUILTIN_SCENARIOS:
        raise UnknownScenario(f"No built-in scenario named {name!r}")
    return BUILTIN_SCENARIOS[name]


def builtin_scenario(name: str) -> Scenario:
    """Validated built-in scenario by name.

    Raises:
        UnknownScenario: If no built-in has that name
    """
    return parse_scenario(builtin_document(name))
