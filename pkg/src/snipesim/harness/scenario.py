"""Scenario documents: wallets, funding, scripted actions and expectations."""

from decimal import Decimal
from pathlib import Path
from typing import Annotated, List, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from ..core.mempool import MempoolPolicy
from ..core.tx import MAX_MONEY
from ..utils.store import DocumentStore, StoreError
from . import ScenarioError, UnknownScenario

MAX_SEED = 2**64 - 1


class _Model(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class Allocation(_Model):
    wallet: str
    amount: int = Field(gt=0, le=MAX_MONEY)


class _Action(_Model):
    label: Optional[str] = None

    def wallets(self) -> List[str]:
        return [getattr(self, "wallet")]


class DeployAction(_Action):
    action: Literal["deploy"]
    wallet: str
    tick: str
    max: int = Field(gt=0)
    lim: int = Field(gt=0)
    fee_sats: int = Field(default=10_000, ge=0)


class MintAction(_Action):
    action: Literal["mint"]
    wallet: str
    tick: str
    amt: int = Field(gt=0)
    fee_sats: int = Field(default=10_000, ge=0)


class PublishPsbtAction(_Action):
    """Seller confirms a listing anchor and signs the listing PSBT."""

    action: Literal["publish-psbt"]
    label: Optional[str] = "listing"
    wallet: str
    buyer: Optional[str] = None
    tick: str
    amt: int = Field(gt=0)
    price: int = Field(gt=0, le=MAX_MONEY)
    postage: int = Field(default=0, ge=0)
    fee_sats: int = Field(default=10_000, ge=0)
    fee_lock: Optional[int] = Field(default=None, gt=0)

    def wallets(self) -> List[str]:
        return [self.wallet] + ([self.buyer] if self.buyer else [])


class BuyAction(_Action):
    action: Literal["buy"]
    label: Optional[str] = "buyer"
    wallet: str
    listing: str = "listing"
    change: Optional[int] = Field(default=None, ge=0)
    fee_rate: Optional[Decimal] = Field(default=None, gt=0)

    @model_validator(mode="after")
    def _one_fee_rule(self) -> "BuyAction":
        if (self.change is None) == (self.fee_rate is None):
            raise ValueError("buy needs exactly one of change or fee_rate")
        return self


class SnipeAction(_Action):
    action: Literal["snipe"]
    wallet: str
    target: Optional[str] = None
    strategy: Literal["outbid", "underbid", "fixed-rate"] = "outbid"
    margin_sats: int = Field(default=140_000, ge=1)
    fixed_rate_sat_vb: Optional[Decimal] = Field(default=None, gt=0)
    fee_sats: int = Field(default=100, ge=0)
    disjoint: bool = False

    @model_validator(mode="after")
    def _rate_given(self) -> "SnipeAction":
        if self.strategy == "fixed-rate" and self.fixed_rate_sat_vb is None:
            raise ValueError("fixed-rate strategy needs fixed_rate_sat_vb")
        return self


class ProtectAction(_Action):
    action: Literal["protect"]
    label: Optional[str] = "protected"
    wallet: str
    listing: str = "listing"
    tiers: List[Decimal] = Field(min_length=1)


class BumpAction(_Action):
    action: Literal["bump"]
    wallet: str
    target: str
    fee_rate: Optional[Decimal] = Field(default=None, gt=0)
    outbid: Optional[str] = None
    margin_sats: int = Field(default=10_000, ge=1)

    @model_validator(mode="after")
    def _one_rate_rule(self) -> "BumpAction":
        if (self.fee_rate is None) == (self.outbid is None):
            raise ValueError("bump needs exactly one of fee_rate or outbid")
        return self


class MineAction(_Action):
    action: Literal["mine"]
    miner: str
    max_vbytes: Optional[int] = Field(default=None, gt=0)

    def wallets(self) -> List[str]:
        return [self.miner]


Action = Annotated[
    Union[
        DeployAction,
        MintAction,
        PublishPsbtAction,
        BuyAction,
        SnipeAction,
        ProtectAction,
        BumpAction,
        MineAction,
    ],
    Field(discriminator="action"),
]


class WinnerExpectation(_Model):
    kind: Literal["winner"]
    label: str
    height: Optional[int] = None

    def describe(self) -> str:
        where = f"block {self.height}" if self.height is not None else "last contest"
        return f"{self.label} wins {where}"


class FeeExpectation(_Model):
    kind: Literal["fee"]
    label: str
    equals: int

    def describe(self) -> str:
        return f"{self.label} pays fee {self.equals}"


class BalanceExpectation(_Model):
    kind: Literal["balance"]
    wallet: str
    tick: str
    equals: int

    def describe(self) -> str:
        return f"{self.wallet} holds {self.equals} {self.tick}"


class EvictedExpectation(_Model):
    kind: Literal["evicted"]
    labels: List[str]

    def describe(self) -> str:
        return f"evicted without confirming: {', '.join(self.labels)}"


class ConfirmedExpectation(_Model):
    kind: Literal["confirmed"]
    label: str
    equals: bool = True

    def describe(self) -> str:
        return f"{self.label} {'confirmed' if self.equals else 'not confirmed'}"


class AdmissionExpectation(_Model):
    kind: Literal["admission"]
    label: str
    status: Literal["accepted", "replaced", "rejected"]
    reason: Optional[str] = None

    def describe(self) -> str:
        suffix = f" ({self.reason})" if self.reason else ""
        return f"{self.label} {self.status}{suffix}"


class AttackExpectation(_Model):
    kind: Literal["attack-success"]
    label: str
    equals: bool

    def describe(self) -> str:
        return f"attack {self.label} {'succeeds' if self.equals else 'fails'}"


class OrderExpectation(_Model):
    kind: Literal["order-state"]
    label: str
    equals: Literal["Pending", "Top Fee", "Getting Replaced", "Confirmed", "Exhausted"]

    def describe(self) -> str:
        return f"order {self.label} is {self.equals}"


class MempoolExpectation(_Model):
    kind: Literal["mempool-size"]
    equals: int = Field(ge=0)

    def describe(self) -> str:
        return f"mempool holds {self.equals} txs"


Expectation = Annotated[
    Union[
        WinnerExpectation,
        FeeExpectation,
        BalanceExpectation,
        EvictedExpectation,
        ConfirmedExpectation,
        AdmissionExpectation,
        AttackExpectation,
        OrderExpectation,
        MempoolExpectation,
    ],
    Field(discriminator="kind"),
]


class Scenario(_Model):
    """A scripted experiment."""

    name: str
    description: str = ""
    seed: int = Field(default=0, ge=0, le=MAX_SEED)
    policy: MempoolPolicy = Field(default_factory=MempoolPolicy)
    premine: bool = True
    coinbase_reward: Optional[int] = Field(default=None, ge=0, le=MAX_MONEY)
    wallets: List[str] = Field(min_length=1)
    genesis_allocations: List[Allocation] = Field(default_factory=list)
    actors: List[Action] = Field(default_factory=list)
    expectations: List[Expectation] = Field(default_factory=list)

    @model_validator(mode="after")
    def _references_declared(self) -> "Scenario":
        declared = set(self.wallets)
        if len(declared) != len(self.wallets):
            raise ValueError("wallet names must be unique")
        for allocation in self.genesis_allocations:
            if allocation.wallet not in declared:
                raise ValueError(f"allocation to undeclared wallet {allocation.wallet!r}")
        labels = set()
        for step, action in enumerate(self.actors):
            for wallet in action.wallets():
                if wallet not in declared:
                    raise ValueError(f"step {step} ({action.action}) uses undeclared wallet {wallet!r}")
            if action.label is not None and action.action != "mine":
                if action.label in labels:
                    raise ValueError(f"step {step} reuses label {action.label!r}")
                labels.add(action.label)
        for expectation in self.expectations:
            wallet = getattr(expectation, "wallet", None)
            if wallet is not None and wallet not in declared:
                raise ValueError(f"expectation names undeclared wallet {wallet!r}")
        return self


def parse_scenario(document: object) -> Scenario:
    """Validate a scenario document.

    Raises:
        ScenarioError: Listing the schema violations
    """
    try:
        return Scenario.model_validate(document)
    except ValidationError as e:
        problems = "; ".join(
            f"{'.'.join(str(p) for p in err['loc'])}: {err['msg']}" for err in e.errors()
        )
        raise ScenarioError(f"Invalid scenario: {problems}")


def load_scenario(reference: str) -> Scenario:
    """Resolve a built-in name or a path to a JSON scenario file.

    Raises:
        UnknownScenario: If the reference is neither
        ScenarioError: If the document is invalid
    """
    from .builtin import BUILTIN_SCENARIOS, builtin_scenario

    if reference in BUILTIN_SCENARIOS:
        return builtin_scenario(reference)
    path = Path(reference)
    store = DocumentStore(str(path.parent))
    if not store.exists(path.name):
        raise UnknownScenario(
            f"Unknown scenario {reference!r}; use a built-in name or a JSON file path"
        )
    try:
        document = store.load_json(path.name)
    except StoreError as e:
        raise ScenarioError(str(e))
    return parse_scenario(document)
