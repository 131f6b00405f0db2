"""Tests for deterministic keys, sighash modes and signature records."""

import pytest

from snipesim.core.signing import (
    RECORD_SIZE,
    Keyring,
    SighashMode,
    SignatureRecord,
    SigningError,
    SigningKey,
    sighash,
    sign_input,
    verify_input,
)
from snipesim.core.tx import OutPoint, Transaction, TxInput, TxOutput


def two_input_tx(seller: SigningKey, buyer: SigningKey, change: int = 1_000) -> Transaction:
    return Transaction(
        inputs=(TxInput(OutPoint(b"\x01" * 32, 0)), TxInput(OutPoint(b"\x02" * 32, 1))),
        outputs=(TxOutput.pay(seller.address, 50_000), TxOutput.pay(buyer.address, change)),
    )


class TestKeys:
    """Test key derivation."""

    def test_derivation_is_deterministic(self):
        """Test the same seed and label give the same key."""
        assert SigningKey.derive(1, "buyer").address == SigningKey.derive(1, "buyer").address

    def test_seed_and_label_separate_keys(self):
        """Test different seeds or labels give different addresses."""
        addresses = {
            SigningKey.derive(1, "buyer").address,
            SigningKey.derive(2, "buyer").address,
            SigningKey.derive(1, "seller").address,
        }
        assert len(addresses) == 3

    def test_address_format(self):
        """Test addresses are 64 lowercase hex characters."""
        address = SigningKey.derive(0, "x").address
        assert len(address) == 64
        assert address == address.lower()
        int(address, 16)

    def test_secret_length(self):
        """Test secrets must be 32 bytes."""
        with pytest.raises(ValueError):
            SigningKey(b"short")

    def test_keyring_lookup(self, keyring):
        """Test the keyring maps addresses back to wallet names."""
        address = keyring.address("seller")
        assert keyring.name_of(address) == "seller"
        assert keyring.name_of("00" * 32) is None
        assert keyring.name_of(None) is None
        assert "seller" in keyring
        assert list(keyring) == sorted(keyring)


class TestSighash:
    """Test what each sighash mode commits to."""

    def test_all_commits_to_every_output(self, keyring):
        """Test an ALL signature breaks when any output changes."""
        seller, buyer = keyring.key("seller"), keyring.key("buyer")
        tx = two_input_tx(seller, buyer)
        record = sign_input(tx, 1, buyer)
        assert verify_input(tx, 1, record, buyer.address)
        assert not verify_input(two_input_tx(seller, buyer, change=999), 1, record, buyer.address)

    def test_single_anyonecanpay_survives_other_changes(self, keyring):
        """Test SINGLE|ANYONECANPAY ignores other inputs and outputs."""
        seller, buyer = keyring.key("seller"), keyring.key("buyer")
        tx = two_input_tx(seller, buyer)
        record = sign_input(tx, 0, seller, SighashMode.SINGLE_ANYONECANPAY)

        changed = Transaction(
            inputs=(tx.inputs[0], TxInput(OutPoint(b"\x09" * 32, 4))),
            outputs=(tx.outputs[0], TxOutput.pay(buyer.address, 123), TxOutput.carrier(b"{}")),
        )
        assert verify_input(changed, 0, record, seller.address)

    def test_single_anyonecanpay_commits_to_paired_output(self, keyring):
        """Test changing the seller's payment output breaks the signature."""
        seller, buyer = keyring.key("seller"), keyring.key("buyer")
        tx = two_input_tx(seller, buyer)
        record = sign_input(tx, 0, seller, SighashMode.SINGLE_ANYONECANPAY)
        cheaper = Transaction(
            inputs=tx.inputs,
            outputs=(TxOutput.pay(seller.address, 1), tx.outputs[1]),
        )
        assert not verify_input(cheaper, 0, record, seller.address)

    def test_single_anyonecanpay_commits_to_fee_locks(self, keyring):
        """Test dropping a fee-lock output breaks the listing signature."""
        seller, buyer = keyring.key("seller"), keyring.key("buyer")
        lock = TxOutput.carrier(b"FLCK" + bytes(32))
        tx = Transaction(
            inputs=(TxInput(OutPoint(b"\x01" * 32, 0)),),
            outputs=(TxOutput.pay(seller.address, 50_000), lock),
        )
        record = sign_input(tx, 0, seller, SighashMode.SINGLE_ANYONECANPAY)
        stripped = Transaction(inputs=tx.inputs, outputs=(tx.outputs[0], TxOutput.carrier(b"{}")))
        assert verify_input(tx, 0, record, seller.address)
        assert not verify_input(stripped, 0, record, seller.address)

    def test_index_out_of_range(self, keyring):
        """Test signing a missing input fails."""
        tx = two_input_tx(keyring.key("seller"), keyring.key("buyer"))
        with pytest.raises(SigningError):
            sighash(tx, 5, SighashMode.ALL)

    def test_single_without_paired_output(self, keyring):
        """Test SINGLE needs an output at the input's index."""
        seller = keyring.key("seller")
        tx = Transaction(
            inputs=(TxInput(OutPoint(b"\x01" * 32, 0)), TxInput(OutPoint(b"\x02" * 32, 0))),
            outputs=(TxOutput.pay(seller.address, 1),),
        )
        with pytest.raises(SigningError, match="No output"):
            sighash(tx, 1, SighashMode.SINGLE_ANYONECANPAY)

    def test_signature_modes_differ(self, keyring):
        """Test ALL and SINGLE|ANYONECANPAY digests differ."""
        tx = two_input_tx(keyring.key("seller"), keyring.key("buyer"))
        assert sighash(tx, 0, SighashMode.ALL) != sighash(tx, 0, SighashMode.SINGLE_ANYONECANPAY)


class TestSignatureRecord:
    """Test witness record encoding."""

    def test_record_layout(self, keyring):
        """Test records are mode byte, public key and signature."""
        buyer = keyring.key("buyer")
        record = sign_input(two_input_tx(keyring.key("seller"), buyer), 1, buyer)
        assert len(record) == RECORD_SIZE
        parsed = SignatureRecord.decode(record)
        assert parsed.mode == SighashMode.ALL
        assert parsed.address == buyer.address
        assert parsed.encode() == record

    def test_wrong_signer_rejected(self, keyring):
        """Test a valid signature from the wrong key does not verify."""
        seller, buyer = keyring.key("seller"), keyring.key("buyer")
        tx = two_input_tx(seller, buyer)
        record = sign_input(tx, 1, seller)
        assert not verify_input(tx, 1, record, buyer.address)

    def test_malformed_records(self):
        """Test bad lengths and unknown modes are refused."""
        with pytest.raises(SigningError):
            SignatureRecord.decode(b"\x01" * 10)
        with pytest.raises(SigningError, match="mode"):
            SignatureRecord.decode(b"\x07" + bytes(RECORD_SIZE - 1))

    def test_garbage_does_not_verify(self, keyring):
        """Test verify_input returns False rather than raising."""
        tx = two_input_tx(keyring.key("seller"), keyring.key("buyer"))
        assert not verify_input(tx, 0, b"", keyring.address("seller"))
        assert not verify_input(tx, 0, b"\x01" + bytes(RECORD_SIZE - 1), keyring.address("seller"))

    def test_mode_labels(self):
        """Test mode labels used in reports."""
        assert SighashMode.ALL.label == "ALL"
        assert SighashMode.SINGLE_ANYONECANPAY.label == "SINGLE|ANYONECANPAY"
