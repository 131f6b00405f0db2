"""Fee lock: commit to a maximum fee, reveal it at broadcast, enforce at admission."""

import logging
from dataclasses import dataclass
from typing import Optional

from ..core.ledger import LedgerError, UtxoSet, compute_fee
from ..core.tx import LOCK_TAG, Amount, ByteReader, DecodeError, Transaction, TxOutput, sha256d

logger = logging.getLogger(__name__)

REVEAL_TAG = b"FLRV"
NONCE_SIZE = 32
DIGEST_SIZE = 32

BAD_COMMITMENT = "BadCommitment"
FEE_EXCEEDS_LOCK = "FeeExceedsLock"


def commitment_digest(f_max: Amount, nonce: bytes) -> bytes:
    """Double SHA-256 of the 8-byte big-endian cap followed by the nonce."""
    return sha256d(f_max.to_bytes(8, "big") + nonce)


@dataclass(frozen=True)
class FeeCommitment:
    """A fee-cap digest, with the cap and nonce once revealed."""

    digest: bytes
    f_max: Optional[Amount] = None
    nonce: Optional[bytes] = None

    def __post_init__(self) -> None:
        """Validate commitment data after initialization."""
        if len(self.digest) != DIGEST_SIZE:
            raise ValueError(f"Digest must be {DIGEST_SIZE} bytes")
        if self.nonce is not None and len(self.nonce) != NONCE_SIZE:
            raise ValueError(f"Nonce must be {NONCE_SIZE} bytes")

    @property
    def revealed(self) -> bool:
        return self.f_max is not None and self.nonce is not None

    def reveal(self, f_max: Amount, nonce: bytes) -> "FeeCommitment":
        return FeeCommitment(self.digest, f_max, nonce)

    def verify(self) -> bool:
        """True iff revealed and the digest recomputes."""
        if not self.revealed:
            return False
        return commitment_digest(self.f_max, self.nonce) == self.digest  # type: ignore[arg-type]

    def to_output(self) -> TxOutput:
        """Data output carrying the commitment."""
        return TxOutput.carrier(LOCK_TAG + self.digest)

    def reveal_bytes(self) -> bytes:
        """Unlock payload for the listing input."""
        if not self.revealed:
            raise ValueError("Commitment has not been revealed")
        return REVEAL_TAG + self.f_max.to_bytes(8, "big") + self.nonce  # type: ignore[union-attr,operator]


def commit_fee(f_max: Amount, nonce: bytes) -> FeeCommitment:
    """Digest-only commitment to `f_max`; the cap and nonce stay private."""
    if f_max <= 0:
        raise ValueError("Fee cap must be positive")
    if len(nonce) != NONCE_SIZE:
        raise ValueError(f"Nonce must be {NONCE_SIZE} bytes")
    return FeeCommitment(commitment_digest(f_max, nonce))


def open_commitment(f_max: Amount, nonce: bytes) -> FeeCommitment:
    """Commitment together with its reveal."""
    return commit_fee(f_max, nonce).reveal(f_max, nonce)


def parse_reveal(unlock: bytes) -> Optional[tuple]:
    """(f_max, nonce) from an unlock payload, or None if it is not a reveal."""
    if not unlock.startswith(REVEAL_TAG):
        return None
    reader = ByteReader(unlock[len(REVEAL_TAG):])
    try:
        f_max = reader.read_int(8)
        nonce = reader.read(NONCE_SIZE)
    except DecodeError:
        return None
    return (f_max, nonce) if reader.exhausted else None


def find_commitment(tx: Transaction) -> Optional[FeeCommitment]:
    """The commitment carried by `tx`, revealed when input 0 holds a reveal."""
    for output in tx.outputs:
        if not output.is_lock_commitment:
            continue
        digest = output.data[len(LOCK_TAG):]
        if len(digest) != DIGEST_SIZE:
            return FeeCommitment(bytes(DIGEST_SIZE))
        commitment = FeeCommitment(digest)
        opened = parse_reveal(tx.inputs[0].unlock) if tx.inputs else None
        if opened is not None:
            commitment = commitment.reveal(*opened)
        return commitment
    return None


@dataclass(frozen=True)
class LockVerdict:
    accepted: bool
    reason: Optional[str] = None


def verify_fee_lock(tx: Transaction, commitment: FeeCommitment, utxos: UtxoSet) -> LockVerdict:
    """Accept iff the commitment is carried, recomputes and the fee stays within its cap."""
    carried = any(
        out.is_lock_commitment and out.data == LOCK_TAG + commitment.digest for out in tx.outputs
    )
    if not carried or not commitment.verify():
        return LockVerdict(False, BAD_COMMITMENT)
    try:
        fee = compute_fee(tx, utxos)
    except LedgerError:
        return LockVerdict(False, BAD_COMMITMENT)
    if fee > commitment.f_max:  # type: ignore[operator]
        logger.info("Fee %d exceeds committed cap %d", fee, commitment.f_max)
        return LockVerdict(False, FEE_EXCEEDS_LOCK)
    return LockVerdict(True)


def check_admission(tx: Transaction, utxos: UtxoSet) -> Optional[str]:
    """Rejection reason for a transaction violating its own fee lock, else None."""
    commitment = find_commitment(tx)
    if commitment is None:
        return None
    verdict = verify_fee_lock(tx, commitment, utxos)
    return verdict.reason
