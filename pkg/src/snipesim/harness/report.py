"""Report model and its text and json renderings."""

from typing import List, Optional

from pydantic import BaseModel, ConfigDict, ValidationError

from . import HarnessError, UnsupportedFormat

FORMATS = ("text", "json")


class _Model(BaseModel):
    model_config = ConfigDict(extra="forbid")


class PoolLine(_Model):
    label: str
    txid: str
    fee_sats: int
    fee_rate: str
    seq: int


class Snapshot(_Model):
    step: int
    action: str
    height: int
    mempool: List[PoolLine]


class Admission(_Model):
    step: int
    label: str
    txid: str
    status: str
    reason: Optional[str] = None
    evicted: List[str] = []


class Entrant(_Model):
    label: str
    txid: str
    fee_sats: int
    vsize: int
    fee_rate: str


class Contest(_Model):
    """A conflict set present in the pool when a block was mined."""

    height: int
    entrants: List[Entrant]
    winner: Optional[str] = None
    winner_txid: Optional[str] = None
    winner_fee_sats: Optional[int] = None


class ListingLine(_Model):
    label: str
    seller: str
    complete: bool
    psbt: str


class BalanceLine(_Model):
    tick: str
    wallet: str
    address: str
    balance: int


class OutcomeLine(_Model):
    label: str
    attack_txid: str
    victim: str
    attack_fee_sats: int
    attack_fee_rate: str
    admission: str
    included: bool
    victim_evicted: bool
    tokens_received: int
    success: bool


class OrderLine(_Model):
    label: str
    status: str
    current_tier: int
    tier_rates: List[str]
    broadcast_rates: List[str]
    history: List[str]


class ExpectationResult(_Model):
    description: str
    passed: bool
    detail: str = ""


class Report(_Model):
    scenario: str
    description: str
    seed: int
    policy: str
    height: int
    replay_consistent: bool
    supply_conserved: bool
    listings: List[ListingLine] = []
    timeline: List[Snapshot] = []
    admissions: List[Admission] = []
    contests: List[Contest] = []
    balances: List[BalanceLine] = []
    outcomes: List[OutcomeLine] = []
    orders: List[OrderLine] = []
    expectations: List[ExpectationResult] = []

    @property
    def passed(self) -> bool:
        return (
            self.replay_consistent
            and self.supply_conserved
            and all(result.passed for result in self.expectations)
        )


def _yes(flag: bool) -> str:
    return "yes" if flag else "no"


def render_text(report: Report) -> str:
    """Plain-text rendering with the same numbers as the json form."""
    lines = [
        f"scenario {report.scenario}",
        f"seed {report.seed}",
        f"policy {report.policy}",
        f"height {report.height}",
    ]
    if report.description:
        lines.append(f"description {report.description}")

    for listing in report.listings:
        lines.append("")
        lines.append(f"listing {listing.label} seller={listing.seller} complete={str(listing.complete).lower()}")
        lines.append(f"  {listing.psbt}")

    lines.append("")
    lines.append("timeline")
    for snap in report.timeline:
        lines.append(f"  step {snap.step} {snap.action} height={snap.height} mempool={len(snap.mempool)}")
        for entry in snap.mempool:
            lines.append(f"    {entry.txid} {entry.fee_sats} {entry.fee_rate} {entry.seq} {entry.label}")

    lines.append("")
    lines.append("admissions")
    for adm in report.admissions:
        reason = f" reason={adm.reason}" if adm.reason else ""
        evicted = f" evicted={','.join(adm.evicted)}" if adm.evicted else ""
        lines.append(f"  step {adm.step} {adm.label} {adm.status}{reason}{evicted}")

    for contest in report.contests:
        lines.append("")
        lines.append(f"contest height={contest.height} entrants={len(contest.entrants)}")
        for entrant in contest.entrants:
            lines.append(
                f"  {entrant.label} fee_sats={entrant.fee_sats} vsize={entrant.vsize} "
                f"fee_rate={entrant.fee_rate} txid={entrant.txid}"
            )
        if contest.winner is None:
            lines.append("no winner")
        else:
            lines.append(f"winner tx fee_sats={contest.winner_fee_sats}")
            lines.append(f"  role={contest.winner}")
            lines.append(f"  txid={contest.winner_txid}")

    lines.append("")
    lines.append("balances")
    for line in report.balances:
        lines.append(f"  {line.tick} {line.address} {line.balance} {line.wallet}")

    if report.outcomes:
        lines.append("")
        lines.append("attacks")
        for outcome in report.outcomes:
            lines.append(
                f"  {outcome.label} fee_sats={outcome.attack_fee_sats} fee_rate={outcome.attack_fee_rate} "
                f"admission={outcome.admission} included={_yes(outcome.included)} "
                f"victim_evicted={_yes(outcome.victim_evicted)} tokens={outcome.tokens_received} "
                f"success={_yes(outcome.success)}"
            )

    if report.orders:
        lines.append("")
        lines.append("orders")
        for order in report.orders:
            lines.append(
                f"  {order.label} status={order.status} tier={order.current_tier} "
                f"broadcast={','.join(order.broadcast_rates)}"
            )
            lines.append(f"    history {' -> '.join(order.history)}")

    lines.append("")
    lines.append(f"replay_consistent {_yes(report.replay_consistent)}")
    lines.append(f"supply_conserved {_yes(report.supply_conserved)}")
    lines.append("expectations")
    for result in report.expectations:
        mark = "PASS" if result.passed else "FAIL"
        detail = f" ({result.detail})" if result.detail and not result.passed else ""
        lines.append(f"  {mark} {result.description}{detail}")
    lines.append(f"result {'PASS' if report.passed else 'FAIL'}")
    return "\n".join(lines) + "\n"


def emit_report(report: Report, fmt: str = "text") -> bytes:
    """Render a report as bytes.

    Raises:
        UnsupportedFormat: If fmt is not text or json
    """
    if fmt == "json":
        return (report.model_dump_json(indent=2) + "\n").encode("utf-8")
    if fmt == "text":
        return render_text(report).encode("utf-8")
    raise UnsupportedFormat(f"Unsupported report format {fmt!r}; choose from {', '.join(FORMATS)}")


def load_report(data: bytes) -> Report:
    """Parse a json report produced by emit_report.

    Raises:
        HarnessError: If the bytes are not a valid report
    """
    try:
        return Report.model_validate_json(data)
    except ValidationError as e:
        raise HarnessError(f"Not a snipesim json report: {e.error_count()} problems")
