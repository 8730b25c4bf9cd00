"""Signature hash types and the transaction digest they commit to.

The digest layout follows the BIP-143 shape (version, hashPrevouts,
hashSequence, outpoint, script code, amount, sequence, hashOutputs,
locktime, 4-byte type) with one simulator-local extension: a NOINPUT flag
(0x40) that removes the per-input binding so a signature can be rebound to
any output whose script it satisfies. The exact byte layout is normative
and frozen in docs/digest-formats.md; validator and signer share this code.

Field zeroing rules:
  ANYONECANPAY  hashPrevouts = hashSequence = zero32
  NONE          hashOutputs = zero32
  SINGLE        hashOutputs = dSHA256(outputs[index]); hard error without
                a matching output
  NOINPUT       hashPrevouts = hashSequence = zero32, outpoint zeroed,
                script code emptied, amount zeroed, and hashOutputs covers
                all outputs regardless of base

so a NOINPUT signature commits to exactly: version, locktime, the input's
own sequence, the sighash type, and all outputs.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

from .txcore import (Amount, Script, Transaction, compact_size,
                     double_sha256, sha256)

SIGHASH_ALL = 0x01
SIGHASH_NONE = 0x02
SIGHASH_SINGLE = 0x03
SIGHASH_ANYONECANPAY = 0x80
SIGHASH_NOINPUT = 0x40

_BASES = {SIGHASH_ALL: "ALL", SIGHASH_NONE: "NONE", SIGHASH_SINGLE: "SINGLE"}
_ZERO32 = b"\x00" * 32


class SighashError(ValueError):
    """Digest request that the type rules reject."""


@dataclass(frozen=True)
class SigHashType:
    base: int = SIGHASH_ALL
    anyonecanpay: bool = False
    noinput: bool = False

    def __post_init__(self) -> None:
        if self.base not in _BASES:
            raise SighashError(f"unknown sighash base 0x{self.base:02x}")

    def to_byte(self) -> int:
        return (self.base
                | (SIGHASH_ANYONECANPAY if self.anyonecanpay else 0)
                | (SIGHASH_NOINPUT if self.noinput else 0))

    @classmethod
    def from_byte(cls, value: int) -> "SigHashType":
        base = value & 0x3F
        flags = value & ~0x3F
        if flags & ~(SIGHASH_ANYONECANPAY | SIGHASH_NOINPUT):
            raise SighashError(f"unknown sighash flags in 0x{value:02x}")
        return cls(base, bool(flags & SIGHASH_ANYONECANPAY), bool(flags & SIGHASH_NOINPUT))

    def name(self) -> str:
        parts = [_BASES[self.base]]
        if self.noinput:
            parts.append("NOINPUT")
        if self.anyonecanpay:
            parts.append("ANYONECANPAY")
        return "|".join(parts)


@dataclass(frozen=True)
class SpentOutputContext:
    """What the signer knows about the output being spent."""

    witness_script: Script
    amount: Amount

    def __post_init__(self) -> None:
        object.__setattr__(self, "amount", Amount(self.amount))


@dataclass(frozen=True)
class CommittedFields:
    """Declarative description of what a sighash type commits to."""

    outpoints: str      # "all" | "own" | "none"
    sequences: str      # "all" | "own"
    own_outpoint: bool
    script_code: bool
    amount: bool
    outputs: str        # "all" | "matching" | "none"
    # version, locktime, and the input's own sequence are always committed

    def describe(self) -> str:
        return (f"outpoints={self.outpoints} sequences={self.sequences} "
                f"own_outpoint={self.own_outpoint} script_code={self.script_code} "
                f"amount={self.amount} outputs={self.outputs}")


def committed_fields(sighash_type: SigHashType) -> CommittedFields:
    t = sighash_type
    if t.noinput:
        return CommittedFields("none", "own", False, False, False, "all")
    scope = "own" if t.anyonecanpay else "all"
    outputs = {SIGHASH_ALL: "all", SIGHASH_NONE: "none", SIGHASH_SINGLE: "matching"}[t.base]
    return CommittedFields(scope, scope, True, True, True, outputs)


def _hash_outputs(tx: Transaction, input_index: int, t: SigHashType) -> bytes:
    if t.noinput or t.base == SIGHASH_ALL:
        return double_sha256(b"".join(out.serialize() for out in tx.outputs))
    if t.base == SIGHASH_SINGLE:
        if input_index >= len(tx.outputs):
            raise SighashError("SINGLE requires an output matching the input index")
        return double_sha256(tx.outputs[input_index].serialize())
    return _ZERO32


def sighash_digest(tx: Transaction, input_index: int,
                   ctx: SpentOutputContext, sighash_type: SigHashType) -> bytes:
    """32-byte signature digest for one input."""
    if not 0 <= input_index < len(tx.inputs):
        raise SighashError(f"input index {input_index} out of range")
    t = sighash_type
    txin = tx.inputs[input_index]

    if t.anyonecanpay or t.noinput:
        hash_prevouts = hash_sequence = _ZERO32
    else:
        hash_prevouts = double_sha256(b"".join(i.previous.serialize() for i in tx.inputs))
        hash_sequence = double_sha256(b"".join(struct.pack("<I", i.sequence) for i in tx.inputs))

    if t.noinput:
        outpoint = b"\x00" * 36
        script_code = compact_size(0)
        amount = 0
    else:
        outpoint = txin.previous.serialize()
        script_code = compact_size(len(ctx.witness_script.data)) + ctx.witness_script.data
        amount = int(ctx.amount)

    preimage = (struct.pack("<i", tx.version)
                + hash_prevouts
                + hash_sequence
                + outpoint
                + script_code
                + struct.pack("<Q", amount)
                + struct.pack("<I", txin.sequence)
                + _hash_outputs(tx, input_index, t)
                + struct.pack("<I", tx.locktime)
                + struct.pack("<I", t.to_byte()))
    return double_sha256(preimage)


def ctv_hash(tx: Transaction, input_index: int) -> bytes:
    """32-byte template commitment hash checked by CHECKTEMPLATEVERIFY.

    Single SHA256 over: version (int32 LE), locktime (uint32 LE), input
    count (uint32 LE), SHA256 of all sequences (uint32 LE each), output
    count (uint32 LE), SHA256 of all serialized outputs, and the input
    index (uint32 LE). The scriptSigs-hash field of the quoted layout is
    conditional on non-null scriptSigs and therefore never present in this
    SegWit-only model. Frozen in docs/digest-formats.md with golden
    vectors; input outpoints are deliberately not committed, so a child
    can be re-pointed at a mutated parent txid without changing its hash.
    """
    if not 0 <= input_index < len(tx.inputs):
        raise SighashError(f"input index {input_index} out of range")
    r = struct.pack("<i", tx.version)
    r += struct.pack("<I", tx.locktime)
    r += struct.pack("<I", len(tx.inputs))
    r += sha256(b"".join(struct.pack("<I", i.sequence) for i in tx.inputs))
    r += struct.pack("<I", len(tx.outputs))
    r += sha256(b"".join(out.serialize() for out in tx.outputs))
    r += struct.pack("<I", input_index)
    return sha256(r)


def committed_view(tx: Transaction, input_index: int,
                   ctx: SpentOutputContext, sighash_type: SigHashType) -> tuple:
    """Canonical tuple of the field values a signature with this type pins
    down. Two (tx, index, ctx) triples produce equal digests iff their
    committed views are equal; used by replay analysis and tests."""
    t = sighash_type
    fields = committed_fields(t)
    txin = tx.inputs[input_index]

    outpoints: tuple = ()
    if fields.outpoints == "all":
        outpoints = tuple(i.previous for i in tx.inputs)
    sequences = (tuple(i.sequence for i in tx.inputs)
                 if fields.sequences == "all" else (txin.sequence,))
    if fields.outputs == "all":
        outputs = tuple((int(o.amount), o.script.data) for o in tx.outputs)
    elif fields.outputs == "matching":
        if input_index >= len(tx.outputs):
            raise SighashError("SINGLE requires an output matching the input index")
        out = tx.outputs[input_index]
        outputs = ((int(out.amount), out.script.data),)
    else:
        outputs = ()

    return (tx.version, tx.locktime, t.to_byte(),
            outpoints,
            sequences,
            txin.previous if fields.own_outpoint else None,
            ctx.witness_script.data if fields.script_code else None,
            int(ctx.amount) if fields.amount else None,
            outputs)
