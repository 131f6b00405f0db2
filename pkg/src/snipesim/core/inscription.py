"""BRC20 inscription metadata: validation, hex encoding and decoding."""

import json
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Tuple

from .tx import Transaction

PROTOCOL = "brc-20"
OPS = ("deploy", "mint", "transfer")
MAX_VALUE = 2**64 - 1
MAX_TICK_LENGTH = 8

# Marketplace wire form writes the protocol key with the colon inside the
# quotes; encode reproduces it and decode accepts it alongside strict JSON.
WIRE_PROTOCOL_HEAD = '{"p:"'
STRICT_PROTOCOL_HEAD = '{"p":"'


class InscriptionError(Exception):
    """Base exception for inscription parsing and validation."""
    pass


class InvalidMetadata(InscriptionError):
    """Raised when metadata violates a BRC20 field rule."""
    pass


class NotHex(InscriptionError):
    pass


class NotJson(InscriptionError):
    pass


class UnknownOp(InscriptionError):
    pass


class MissingField(InscriptionError):
    pass


def _check_number(name: str, value: str) -> int:
    if not isinstance(value, str) or not value.isascii() or not value.isdigit():
        raise InvalidMetadata(f"{name} must be a decimal string, got {value!r}")
    if len(value) > 1 and value.startswith("0"):
        raise InvalidMetadata(f"{name} must not have leading zeros")
    number = int(value)
    if number <= 0 or number > MAX_VALUE:
        raise InvalidMetadata(f"{name} must be between 1 and {MAX_VALUE}")
    return number


@dataclass(frozen=True)
class InscriptionMetadata:
    """The BRC20 fields carried by a data output."""

    op: str
    tick: str
    amt: Optional[str] = None
    max: Optional[str] = None
    lim: Optional[str] = None
    p: str = PROTOCOL

    def __post_init__(self) -> None:
        if self.p != PROTOCOL:
            raise InvalidMetadata(f"Protocol must be {PROTOCOL!r}, got {self.p!r}")
        if self.op not in OPS:
            raise UnknownOp(f"Unknown op {self.op!r}")
        if not isinstance(self.tick, str) or not self.tick.isascii():
            raise InvalidMetadata("tick must be ASCII")
        if not 1 <= len(self.tick) <= MAX_TICK_LENGTH:
            raise InvalidMetadata(f"tick must be 1-{MAX_TICK_LENGTH} characters")
        if any(c in self.tick for c in '"\\') or not self.tick.isprintable():
            raise InvalidMetadata("tick contains characters that need escaping")
        if self.op == "deploy":
            if self.max is None or self.lim is None:
                raise InvalidMetadata("deploy requires max and lim")
            if self.amt is not None:
                raise InvalidMetadata("deploy must not carry amt")
            _check_number("max", self.max)
            _check_number("lim", self.lim)
        else:
            if self.amt is None:
                raise InvalidMetadata(f"{self.op} requires amt")
            if self.max is not None or self.lim is not None:
                raise InvalidMetadata(f"{self.op} must not carry max or lim")
            _check_number("amt", self.amt)

    @classmethod
    def transfer(cls, tick: str, amount: int) -> "InscriptionMetadata":
        return cls(op="transfer", tick=tick, amt=str(amount))

    @classmethod
    def mint(cls, tick: str, amount: int) -> "InscriptionMetadata":
        return cls(op="mint", tick=tick, amt=str(amount))

    @classmethod
    def deploy(cls, tick: str, max_supply: int, limit: int) -> "InscriptionMetadata":
        return cls(op="deploy", tick=tick, max=str(max_supply), lim=str(limit))

    @property
    def amount(self) -> int:
        return int(self.amt) if self.amt is not None else 0

    @property
    def max_supply(self) -> int:
        return int(self.max) if self.max is not None else 0

    @property
    def limit(self) -> int:
        return int(self.lim) if self.lim is not None else 0

    def fields(self) -> List[Tuple[str, str]]:
        """Canonical key order: p, op, tick, then max and lim or amt."""
        ordered = [("p", self.p), ("op", self.op), ("tick", self.tick)]
        if self.op == "deploy":
            ordered += [("max", self.max), ("lim", self.lim)]  # type: ignore[list-item]
        else:
            ordered.append(("amt", self.amt))  # type: ignore[arg-type]
        return ordered

    def render(self) -> str:
        body = ",".join(f'"{key}":"{value}"' for key, value in self.fields()[1:])
        return f'{WIRE_PROTOCOL_HEAD}{self.p}",{body}}}'


def encode_inscription(meta: InscriptionMetadata) -> str:
    """Lowercase hex of the canonical rendering of `meta`."""
    return meta.render().encode("utf-8").hex()


def _load_json(text: str) -> Dict[str, Any]:
    try:
        document = json.loads(text)
    except json.JSONDecodeError:
        if not text.startswith(WIRE_PROTOCOL_HEAD):
            raise NotJson("Payload is not JSON")
        try:
            document = json.loads(STRICT_PROTOCOL_HEAD + text[len(WIRE_PROTOCOL_HEAD):])
        except json.JSONDecodeError as e:
            raise NotJson(f"Payload is not JSON: {e}")
    if not isinstance(document, dict):
        raise NotJson("Payload must be a JSON object")
    return document


def decode_inscription(hexdata: str) -> InscriptionMetadata:
    """Parse hex-encoded BRC20 metadata; key order on input is free.

    Raises:
        NotHex: If hexdata is not an even-length hex string
        NotJson: If the bytes are not a UTF-8 JSON object
        MissingField: If a required key is absent
        UnknownOp: If op is not deploy, mint or transfer
        InvalidMetadata: If a field violates its rule
    """
    try:
        raw = bytes.fromhex(hexdata)
    except (ValueError, TypeError):
        raise NotHex(f"Not a hex string: {hexdata[:32]!r}")
    return decode_payload(raw)


def decode_payload(raw: bytes) -> InscriptionMetadata:
    """Parse raw data-output bytes as BRC20 metadata."""
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError:
        raise NotJson("Payload is not UTF-8")
    document = _load_json(text)

    for key in ("p", "op", "tick"):
        if key not in document:
            raise MissingField(f"Missing field {key!r}")
    op = document["op"]
    if op not in OPS:
        raise UnknownOp(f"Unknown op {op!r}")
    required = ("max", "lim") if op == "deploy" else ("amt",)
    for key in required:
        if key not in document:
            raise MissingField(f"{op} requires field {key!r}")

    values = {key: document.get(key) for key in ("p", "op", "tick", "amt", "max", "lim")}
    for key, value in values.items():
        if value is not None and not isinstance(value, str):
            raise InvalidMetadata(f"{key} must be a JSON string")
    return InscriptionMetadata(**values)


def extract_inscriptions(tx: Transaction) -> List[Tuple[int, InscriptionMetadata]]:
    """Every data output of `tx` that parses as BRC20 metadata."""
    found = []
    for index, output in enumerate(tx.outputs):
        if not output.is_data or output.is_lock_commitment:
            continue
        try:
            found.append((index, decode_payload(output.data)))
        except InscriptionError:
            continue
    return found
