"""Signature-digest and template-hash tests.

The oracle for digest layouts is the committed-field semantics: for
every sighash mode, mutating a committed field must change the digest
and mutating an uncommitted field must not. The frozen vectors pin the
byte layout against accidental drift.
"""

import random

import pytest

from covenantkit.sighash import (SIGHASH_ALL, SIGHASH_ANYONECANPAY,
                                 SIGHASH_NOINPUT, SIGHASH_NONE, SIGHASH_SINGLE,
                                 SigHashType, SighashError, SpentOutputContext,
                                 committed_view, ctv_hash, sighash_digest)
from covenantkit.txcore import (Amount, Op, OutPoint, Script, Transaction,
                                TxInput, TxOutput)


def base_tx() -> Transaction:
    return Transaction(
        2,
        (TxInput(OutPoint(bytes(range(32)), 1), 0xFFFFFFFE),
         TxInput(OutPoint(bytes(range(32, 64)), 0), 0xFFFFFFFF)),
        (TxOutput(Amount(50_000), Script(bytes.fromhex("0020") + bytes(32))),
         TxOutput(Amount(25_000), Script(b"\x51"))),
        500)


WS = Script.from_ops([b"\x02" * 33, Op.OP_CHECKSIG])
CTX = SpentOutputContext(WS, Amount(80_000))

FROZEN = {
    "ALL": "87e4b9ba7f48bb86a2ac289a3fca71491abbb2f8117e77f14cf14be322b361d4",
    "NONE": "1c6a6fe501ea520182ae692b56c8b16ec514bee17b130162dbc11fe562c08c84",
    "SINGLE": "43f07f3b7ed4651094bbfa8181cfc124cdc56867d2449a0137b479f30c66baf3",
    "ALL_ACP": "54447f68fd14d61d0e5a079da777306e864cb2451f5b78c3aab862c43cbf8434",
    "ALL_NOINPUT": "88b33e32d5fa23dfabca50e839727f705325831ef019da160e46958fa09920c5",
    "SINGLE_ACP": "0a6b95fb4be560d0b53b9d41349cb55325e4a7484adb8dd191074113a6a44be6",
    "CTV0": "3ddef08a3cf9917cee57f784c15050d8f9b0c0bf71f97079445338944df27111",
    "CTV1": "76512de2d84f9d3ca8ce0dffc17d57dd69e9c06ee9a799e4cc8d05067d4356a7",
}

TYPES = {
    "ALL": SigHashType(SIGHASH_ALL),
    "NONE": SigHashType(SIGHASH_NONE),
    "SINGLE": SigHashType(SIGHASH_SINGLE),
    "ALL_ACP": SigHashType(SIGHASH_ALL, anyonecanpay=True),
    "ALL_NOINPUT": SigHashType(SIGHASH_ALL, noinput=True),
    "SINGLE_ACP": SigHashType(SIGHASH_SINGLE, anyonecanpay=True),
}


def with_output(tx, index, amount) -> Transaction:
    outs = list(tx.outputs)
    outs[index] = TxOutput(Amount(amount), outs[index].script)
    return Transaction(tx.version, tx.inputs, tuple(outs), tx.locktime)


def with_input(tx, index, *, txid=None, sequence=None) -> Transaction:
    ins = list(tx.inputs)
    old = ins[index]
    prev = OutPoint(txid or old.previous.txid, old.previous.vout)
    ins[index] = TxInput(prev, sequence if sequence is not None else old.sequence,
                         old.witness)
    return Transaction(tx.version, tuple(ins), tx.outputs, tx.locktime)


class TestFrozenVectors:
    @pytest.mark.parametrize("name", sorted(TYPES))
    def test_digest(self, name):
        assert sighash_digest(base_tx(), 0, CTX, TYPES[name]).hex() == FROZEN[name]

    def test_ctv(self):
        assert ctv_hash(base_tx(), 0).hex() == FROZEN["CTV0"]
        assert ctv_hash(base_tx(), 1).hex() == FROZEN["CTV1"]


class TestTypeByte:
    def test_encoding(self):
        assert TYPES["ALL"].to_byte() == 0x01
        assert TYPES["NONE"].to_byte() == 0x02
        assert TYPES["SINGLE"].to_byte() == 0x03
        assert TYPES["ALL_ACP"].to_byte() == 0x81
        assert TYPES["ALL_NOINPUT"].to_byte() == 0x41
        assert TYPES["SINGLE_ACP"].to_byte() == 0x83

    def test_round_trip(self):
        for t in TYPES.values():
            assert SigHashType.from_byte(t.to_byte()) == t

    def test_bad_base_rejected(self):
        with pytest.raises(SighashError):
            SigHashType.from_byte(0x00)
        with pytest.raises(SighashError):
            SigHashType(0x04)


def digest(tx, index, t) -> bytes:
    return sighash_digest(tx, index, CTX, t)


class TestCommittedFields:
    """Digest (in)sensitivity per mode; each case is one committed-field
    statement from the documented layouts."""

    def test_all_commits_everything(self):
        tx, t = base_tx(), TYPES["ALL"]
        d = digest(tx, 0, t)
        assert digest(with_output(tx, 1, 26_000), 0, t) != d
        assert digest(with_input(tx, 1, txid=b"\xEE" * 32), 0, t) != d
        assert digest(with_input(tx, 1, sequence=5), 0, t) != d
        assert digest(with_input(tx, 0, sequence=5), 0, t) != d

    def test_none_frees_outputs(self):
        tx, t = base_tx(), TYPES["NONE"]
        d = digest(tx, 0, t)
        assert digest(with_output(tx, 0, 1), 0, t) == d
        assert digest(with_output(tx, 1, 1), 0, t) == d
        # prevouts and sequences stay committed in this layout
        assert digest(with_input(tx, 1, txid=b"\xEE" * 32), 0, t) != d
        assert digest(with_input(tx, 1, sequence=5), 0, t) != d

    def test_single_commits_matching_output_only(self):
        tx, t = base_tx(), TYPES["SINGLE"]
        d = digest(tx, 0, t)
        assert digest(with_output(tx, 1, 1), 0, t) == d
        assert digest(with_output(tx, 0, 1), 0, t) != d
        d1 = digest(tx, 1, t)
        assert digest(with_output(tx, 0, 1), 1, t) == d1
        assert digest(with_output(tx, 1, 1), 1, t) != d1

    def test_single_beyond_outputs_rejected(self):
        tx = Transaction(2, base_tx().inputs,
                         (base_tx().outputs[0],), 500)
        with pytest.raises(SighashError):
            digest(tx, 1, TYPES["SINGLE"])

    def test_anyonecanpay_frees_other_inputs(self):
        tx, t = base_tx(), TYPES["ALL_ACP"]
        d = digest(tx, 0, t)
        assert digest(with_input(tx, 1, txid=b"\xEE" * 32), 0, t) == d
        assert digest(with_input(tx, 1, sequence=5), 0, t) == d
        # own outpoint and outputs stay committed
        assert digest(with_input(tx, 0, txid=b"\xEE" * 32), 0, t) != d
        assert digest(with_output(tx, 0, 1), 0, t) != d

    def test_noinput_frees_own_outpoint(self):
        tx, t = base_tx(), TYPES["ALL_NOINPUT"]
        d = digest(tx, 0, t)
        assert digest(with_input(tx, 0, txid=b"\xEE" * 32), 0, t) == d
        assert digest(with_input(tx, 1, txid=b"\xEE" * 32), 0, t) == d
        assert digest(with_input(tx, 1, sequence=9), 0, t) == d
        # committed set: version, locktime, own sequence, all outputs
        assert digest(with_input(tx, 0, sequence=9), 0, t) != d
        assert digest(with_output(tx, 0, 1), 0, t) != d
        assert digest(with_output(tx, 1, 1), 0, t) != d
        bumped = Transaction(3, tx.inputs, tx.outputs, tx.locktime)
        assert digest(bumped, 0, t) != d
        late = Transaction(tx.version, tx.inputs, tx.outputs, 501)
        assert digest(late, 0, t) != d

    def test_noinput_ignores_spent_script(self):
        tx, t = base_tx(), TYPES["ALL_NOINPUT"]
        other = SpentOutputContext(Script.from_ops([b"\x03" * 33, Op.OP_CHECKSIG]),
                                   Amount(1))
        assert sighash_digest(tx, 0, CTX, t) == sighash_digest(tx, 0, other, t)
        # every other mode commits to the spent script and amount
        for name in ("ALL", "NONE", "SINGLE", "ALL_ACP"):
            assert sighash_digest(tx, 0, CTX, TYPES[name]) != \
                sighash_digest(tx, 0, other, TYPES[name])

    def test_rebinding_equality(self):
        # the same template bound to two different deposits digests equally
        t = TYPES["ALL_NOINPUT"]
        a = base_tx()
        b = with_input(a, 0, txid=b"\x77" * 32)
        assert digest(a, 0, t) == digest(b, 0, t)


class TestCommittedViewConsistency:
    def test_digest_equal_iff_view_equal(self):
        rng = random.Random(505)
        tx = base_tx()
        variants = [tx]
        for _ in range(40):
            v = tx
            if rng.random() < 0.5:
                v = with_output(v, rng.randrange(2), rng.randrange(1, 60_000))
            if rng.random() < 0.5:
                v = with_input(v, rng.randrange(2), txid=rng.randbytes(32))
            if rng.random() < 0.5:
                v = with_input(v, rng.randrange(2), sequence=rng.randrange(1 << 32))
            if rng.random() < 0.3:
                v = Transaction(v.version, v.inputs, v.outputs, rng.randrange(600))
            variants.append(v)
        for t in TYPES.values():
            for v in variants:
                same_digest = digest(v, 0, t) == digest(tx, 0, t)
                same_view = (committed_view(v, 0, CTX, t)
                             == committed_view(tx, 0, CTX, t))
                assert same_digest == same_view


class TestCtvHash:
    def test_commits_structure_not_outpoints(self):
        tx = base_tx()
        h = ctv_hash(tx, 0)
        assert ctv_hash(with_input(tx, 0, txid=b"\xEE" * 32), 0) == h
        assert ctv_hash(with_input(tx, 1, txid=b"\xEE" * 32), 0) == h
        assert ctv_hash(with_input(tx, 0, sequence=7), 0) != h
        assert ctv_hash(with_output(tx, 1, 1), 0) != h
        assert ctv_hash(Transaction(3, tx.inputs, tx.outputs, tx.locktime), 0) != h
        assert ctv_hash(Transaction(tx.version, tx.inputs, tx.outputs, 501), 0) != h
        assert ctv_hash(tx, 1) != h

    def test_commits_input_count(self):
        tx = base_tx()
        fewer = Transaction(tx.version, tx.inputs[:1], tx.outputs, tx.locktime)
        assert ctv_hash(fewer, 0) != ctv_hash(tx, 0)

    def test_witnesses_do_not_matter(self):
        tx = base_tx()
        ins = list(tx.inputs)
        ins[0] = TxInput(ins[0].previous, ins[0].sequence, (b"\x01", b"\x02"))
        dressed = Transaction(tx.version, tuple(ins), tx.outputs, tx.locktime)
        assert ctv_hash(dressed, 0) == ctv_hash(tx, 0)
        assert sighash_digest(dressed, 0, CTX, TYPES["ALL"]) == \
            sighash_digest(tx, 0, CTX, TYPES["ALL"])
