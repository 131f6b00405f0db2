"""Tests for PSBT creation, signing, combination and the text form."""

import base64

import pytest

from snipesim.core.ledger import UtxoEntry, UtxoSet, validate
from snipesim.core.psbt import (
    DuplicatePsbtInput,
    EmptyInputs,
    Incomplete,
    PsbtDecodeError,
    PsbtError,
    add_partial_signature,
    combine,
    create_psbt,
    decode_psbt,
    encode_psbt,
    estimated_vsize,
    finalize_psbt,
    is_complete,
    psbt_from_transaction,
    sign_psbt,
)
from snipesim.core.signing import SighashMode, SigningKey, sign_input
from snipesim.core.tx import OutPoint, TxOutput, serialize, vsize

SELLER = SigningKey.derive(11, "seller")
BUYER = SigningKey.derive(11, "buyer")
ANCHOR = (OutPoint(b"\xaa" * 32, 0), TxOutput.pay(SELLER.address, 546))
FUNDING = (OutPoint(b"\xbb" * 32, 2), TxOutput.pay(BUYER.address, 100_000))


def sale(change: int = 40_000):
    return create_psbt(
        [ANCHOR, FUNDING],
        [
            TxOutput.pay(SELLER.address, 50_000),
            TxOutput.pay(BUYER.address, change),
            TxOutput.carrier(b'{"op":"transfer"}'),
        ],
    )


def utxos() -> UtxoSet:
    return UtxoSet({op: UtxoEntry(out, 1) for op, out in (ANCHOR, FUNDING)})


class TestCreate:
    """Test PSBT construction."""

    def test_unsigned_skeleton(self):
        """Test a fresh PSBT carries no signatures."""
        psbt = sale()
        assert psbt.unsigned_indices() == [0, 1]
        assert not is_complete(psbt)
        assert psbt.fee() == 100_546 - 90_000

    def test_empty_inputs(self):
        """Test at least one input is required."""
        with pytest.raises(EmptyInputs):
            create_psbt([], [TxOutput.pay(BUYER.address, 1)])

    def test_duplicate_inputs(self):
        """Test an outpoint may appear once."""
        with pytest.raises(DuplicatePsbtInput):
            create_psbt([FUNDING, FUNDING], [TxOutput.pay(BUYER.address, 1)])

    def test_required_signer(self):
        """Test each input is owned by its spent output's address."""
        psbt = sale()
        assert [i.required_signer for i in psbt.inputs] == [SELLER.address, BUYER.address]


class TestSigning:
    """Test signing and finalization."""

    def test_two_party_completion(self):
        """Test both parties signing completes the PSBT."""
        psbt, complete = sign_psbt(sale(), SELLER, SighashMode.SINGLE_ANYONECANPAY)
        assert not complete
        assert psbt.unsigned_indices() == [1]
        psbt, complete = sign_psbt(psbt, BUYER)
        assert complete

        tx = finalize_psbt(psbt)
        assert validate(tx, utxos()) == []

    def test_sign_skips_foreign_inputs(self):
        """Test a key only signs inputs it owns."""
        psbt, _ = sign_psbt(sale(), BUYER)
        assert psbt.unsigned_indices() == [0]

    def test_finalize_incomplete(self):
        """Test finalizing reports the unsigned inputs."""
        psbt, _ = sign_psbt(sale(), BUYER)
        with pytest.raises(Incomplete) as exc_info:
            finalize_psbt(psbt)
        assert exc_info.value.indices == [0]

    def test_combine_merges_signatures(self):
        """Test independently signed copies combine into a complete PSBT."""
        seller_copy, _ = sign_psbt(sale(), SELLER, SighashMode.SINGLE_ANYONECANPAY)
        buyer_copy, _ = sign_psbt(sale(), BUYER)
        assert is_complete(combine(seller_copy, buyer_copy))

    def test_combine_different_skeletons(self):
        """Test PSBTs over different transactions do not combine."""
        with pytest.raises(PsbtError):
            combine(sale(40_000), sale(30_000))

    def test_add_partial_signature_verifies(self):
        """Test foreign signatures must verify before attaching."""
        psbt = sale()
        good = sign_input(psbt.unsigned_tx(), 0, SELLER, SighashMode.SINGLE_ANYONECANPAY)
        assert add_partial_signature(psbt, 0, good).inputs[0].is_signed
        with pytest.raises(PsbtError):
            add_partial_signature(psbt, 1, good)
        with pytest.raises(PsbtError):
            add_partial_signature(psbt, 7, good)

    def test_change_edit_keeps_listing_signature(self):
        """Test editing change drops ALL signatures but keeps SINGLE|ANYONECANPAY ones."""
        psbt, _ = sign_psbt(sale(), SELLER, SighashMode.SINGLE_ANYONECANPAY)
        psbt, _ = sign_psbt(psbt, BUYER)
        edited = psbt.with_output(1, TxOutput.pay(BUYER.address, 30_000))
        assert edited.inputs[0].is_signed
        assert not edited.inputs[1].is_signed

    def test_estimated_vsize_matches_final(self):
        """Test the size estimate equals the finalized size."""
        psbt, _ = sign_psbt(sale(), SELLER, SighashMode.SINGLE_ANYONECANPAY)
        psbt, _ = sign_psbt(psbt, BUYER)
        assert estimated_vsize(psbt) == vsize(finalize_psbt(psbt))

    def test_rebuild_from_transaction(self):
        """Test a finalized transaction converts back with its signatures."""
        psbt, _ = sign_psbt(sale(), SELLER, SighashMode.SINGLE_ANYONECANPAY)
        psbt, _ = sign_psbt(psbt, BUYER)
        tx = finalize_psbt(psbt)
        rebuilt = psbt_from_transaction(tx, utxos())
        assert is_complete(rebuilt)
        assert finalize_psbt(rebuilt) == tx


class TestTextForm:
    """Test the psbt1: text encoding."""

    def test_round_trip_keeps_partial_signatures(self):
        """Test a half-signed PSBT survives encoding."""
        psbt, _ = sign_psbt(sale(), SELLER, SighashMode.SINGLE_ANYONECANPAY)
        text = encode_psbt(psbt)
        assert text.startswith("psbt1:")
        decoded = decode_psbt(text)
        assert decoded == psbt
        assert decoded.unsigned_indices() == [1]

    def test_round_trip_keeps_unlock(self):
        """Test per-input unlock data is carried."""
        psbt = sale().with_final_unlock(0, b"FLRV" + bytes(40))
        assert decode_psbt(encode_psbt(psbt)).inputs[0].final_unlock == b"FLRV" + bytes(40)

    @pytest.mark.parametrize("text", ["nope", "psbt1:***", "psbt1:AAAA", "psbt0:" + "A" * 8])
    def test_malformed(self, text):
        """Test bad prefixes, base64 and layouts raise PsbtDecodeError."""
        with pytest.raises(PsbtDecodeError):
            decode_psbt(text)

    def test_trailing_bytes(self):
        """Test extra bytes after the signature section are refused."""
        text = encode_psbt(sale())
        raw = base64.b64decode(text[len("psbt1:"):]) + b"\x00"
        with pytest.raises(PsbtDecodeError):
            decode_psbt("psbt1:" + base64.b64encode(raw).decode())


class TestUnverifiedRecords:
    """Test records that fail verification are never kept."""

    def test_decode_refuses_bad_record(self):
        """Test a text form carrying a junk signature does not decode."""
        text = encode_psbt(sale().with_signature(0, bytes(97)))
        with pytest.raises(PsbtDecodeError, match="input 0 does not verify"):
            decode_psbt(text)

    def test_decode_refuses_signature_for_changed_skeleton(self):
        """Test an ALL signature moved onto another skeleton does not decode."""
        signed, _ = sign_psbt(sale(40_000), BUYER)
        moved = sale(30_000).with_signature(1, signed.inputs[1].partial_sig)
        with pytest.raises(PsbtDecodeError):
            decode_psbt(encode_psbt(moved))

    def test_sign_replaces_bad_record(self):
        """Test the rightful signer can still complete an input holding junk."""
        junk = sale().with_signature(1, bytes(97))
        psbt, complete = sign_psbt(junk, BUYER)
        assert not complete
        assert psbt.verifies(1, psbt.inputs[1].partial_sig)
        psbt, complete = sign_psbt(psbt, SELLER, SighashMode.SINGLE_ANYONECANPAY)
        assert complete

    def test_combine_drops_bad_record(self):
        """Test combining never stores a record that does not verify."""
        merged = combine(sale(), sale().with_signature(0, bytes(97)))
        assert not merged.inputs[0].is_signed

    def test_combine_replaces_bad_record(self):
        """Test a verifying record wins over junk already held."""
        seller_copy, _ = sign_psbt(sale(), SELLER, SighashMode.SINGLE_ANYONECANPAY)
        merged = combine(sale().with_signature(0, bytes(97)), seller_copy)
        assert merged.inputs[0].partial_sig == seller_copy.inputs[0].partial_sig

    def test_rebuild_drops_bad_witness(self):
        """Test only verifying witness records survive a rebuild."""
        psbt, _ = sign_psbt(sale(), SELLER, SighashMode.SINGLE_ANYONECANPAY)
        psbt, _ = sign_psbt(psbt, BUYER)
        tx = finalize_psbt(psbt)
        tampered = tx.with_witness([tx.witness[0], bytes(97)])
        rebuilt = psbt_from_transaction(tampered, utxos())
        assert rebuilt.unsigned_indices() == [1]
        assert rebuilt.inputs[0].partial_sig == tx.witness[0]

    def test_signature_section_layout(self):
        """Test records trail the input contexts as count, index, length and record."""
        psbt, _ = sign_psbt(sale(), SELLER, SighashMode.SINGLE_ANYONECANPAY)
        record = psbt.inputs[0].partial_sig
        raw = base64.b64decode(encode_psbt(psbt)[len("psbt1:"):])
        entry = b"\x00" + bytes([len(record)]) + record
        assert raw.endswith(b"\x01" + entry)
        assert raw.startswith(serialize(psbt.unsigned_tx()))

        doubled = raw[: -len(entry) - 1] + b"\x02" + entry + entry
        with pytest.raises(PsbtDecodeError, match="Second signature for input 0"):
            decode_psbt("psbt1:" + base64.b64encode(doubled).decode("ascii"))
