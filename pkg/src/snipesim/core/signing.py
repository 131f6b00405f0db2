"""Deterministic keys, sighash computation and input signatures."""

from dataclasses import dataclass
from enum import IntEnum
from typing import Dict, Iterator, List, Optional

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives import serialization
from cryptography.hazmat.primitives.asymmetric.ed25519 import (
    Ed25519PrivateKey,
    Ed25519PublicKey,
)

from .tx import LedgerError, Transaction, encode_varint, serialize, sha256, sha256d

PUBKEY_SIZE = 32
SIGNATURE_SIZE = 64
RECORD_SIZE = 1 + PUBKEY_SIZE + SIGNATURE_SIZE
KEY_DOMAIN = b"snipesim-key"


class SigningError(LedgerError):
    """Raised when an input cannot be signed."""
    pass


class SighashMode(IntEnum):
    """Which parts of a transaction a signature commits to."""

    ALL = 0x01
    SINGLE_ANYONECANPAY = 0x83

    @property
    def label(self) -> str:
        return "ALL" if self is SighashMode.ALL else "SINGLE|ANYONECANPAY"


def address_of(public_key: bytes) -> str:
    """Address derived from a raw public key."""
    return sha256(public_key).hex()


def sighash(tx: Transaction, index: int, mode: SighashMode) -> bytes:
    """Digest signed for input `index` under `mode`.

    ALL commits to every input outpoint and every output. SINGLE|ANYONECANPAY
    commits to the signed input, the output at the same index and any
    fee-lock commitment outputs, so other inputs and outputs may change.

    Raises:
        SigningError: If index is out of range, or SINGLE has no paired output
    """
    if index < 0 or index >= len(tx.inputs):
        raise SigningError(f"Input index {index} out of range", index)
    skeleton = tx.stripped()
    if mode == SighashMode.ALL:
        preimage = bytes([mode]) + encode_varint(index) + serialize(skeleton)
    else:
        if index >= len(tx.outputs):
            raise SigningError(f"No output paired with input {index}", index)
        parts = [
            bytes([mode]),
            tx.inputs[index].outpoint.serialize(),
            tx.outputs[index].serialize(),
        ]
        parts.extend(out.serialize() for out in tx.outputs if out.is_lock_commitment)
        preimage = b"".join(parts)
    return sha256d(preimage)


@dataclass(frozen=True)
class SignatureRecord:
    """Witness record: mode byte, public key, Ed25519 signature."""

    mode: SighashMode
    public_key: bytes
    signature: bytes

    def encode(self) -> bytes:
        return bytes([self.mode]) + self.public_key + self.signature

    @classmethod
    def decode(cls, record: bytes) -> "SignatureRecord":
        if len(record) != RECORD_SIZE:
            raise SigningError(f"Signature record must be {RECORD_SIZE} bytes")
        try:
            mode = SighashMode(record[0])
        except ValueError:
            raise SigningError(f"Unknown sighash mode 0x{record[0]:02x}")
        return cls(mode, record[1:1 + PUBKEY_SIZE], record[1 + PUBKEY_SIZE:])

    @property
    def address(self) -> str:
        return address_of(self.public_key)


class SigningKey:
    """Ed25519 key whose address is the hex SHA-256 of its public key."""

    def __init__(self, secret: bytes, label: str = "") -> None:
        if len(secret) != 32:
            raise ValueError("Signing key secret must be 32 bytes")
        self.label = label
        self._private = Ed25519PrivateKey.from_private_bytes(secret)
        self.public_key = self._private.public_key().public_bytes(
            encoding=serialization.Encoding.Raw,
            format=serialization.PublicFormat.Raw,
        )
        self.address = address_of(self.public_key)

    @classmethod
    def derive(cls, seed: int, label: str) -> "SigningKey":
        """Derive a key from a scenario seed and a wallet label."""
        secret = sha256(KEY_DOMAIN + seed.to_bytes(8, "big") + label.encode("utf-8"))
        return cls(secret, label)

    def sign_digest(self, digest: bytes) -> bytes:
        return self._private.sign(digest)

    def __repr__(self) -> str:
        return f"SigningKey(label={self.label!r}, address={self.address[:16]}...)"


def sign_input(
    tx: Transaction, index: int, key: SigningKey, mode: SighashMode = SighashMode.ALL
) -> bytes:
    """Produce an encoded signature record for input `index`."""
    signature = key.sign_digest(sighash(tx, index, mode))
    return SignatureRecord(mode, key.public_key, signature).encode()


def verify_input(tx: Transaction, index: int, record: bytes, lock: str) -> bool:
    """Check that `record` authorizes spending input `index` locked to `lock`."""
    try:
        parsed = SignatureRecord.decode(record)
        if parsed.address != lock:
            return False
        digest = sighash(tx, index, parsed.mode)
        Ed25519PublicKey.from_public_bytes(parsed.public_key).verify(parsed.signature, digest)
        return True
    except (SigningError, InvalidSignature, ValueError):
        return False


class Keyring:
    """Named wallets derived from a single seed."""

    def __init__(self, seed: int, names: Optional[List[str]] = None) -> None:
        self.seed = seed
        self._keys: Dict[str, SigningKey] = {}
        self._by_address: Dict[str, str] = {}
        for name in names or []:
            self.key(name)

    def key(self, name: str) -> SigningKey:
        if name not in self._keys:
            signing_key = SigningKey.derive(self.seed, name)
            self._keys[name] = signing_key
            self._by_address[signing_key.address] = name
        return self._keys[name]

    def address(self, name: str) -> str:
        return self.key(name).address

    def name_of(self, address: Optional[str]) -> Optional[str]:
        if address is None:
            return None
        return self._by_address.get(address)

    def __contains__(self, name: str) -> bool:
        return name in self._keys

    def __iter__(self) -> Iterator[str]:
        return iter(sorted(self._keys))
