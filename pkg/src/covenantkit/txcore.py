"""Transaction primitives: amounts, outpoints, scripts, serialization.

The transaction model is SegWit-only: inputs carry witness stacks and no
scriptSig, and the wire format writes an empty scriptSig for every input.
txid is the double SHA256 of the no-witness serialization, so witness
malleation never changes a transaction id. Display txids are the 32 bytes
reversed, as lowercase hex.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass
from enum import IntEnum
from typing import Iterable, Union

MAX_MONEY = 21_000_000 * 100_000_000
MAX_SCRIPT_SIZE = 10_000
MAX_WITNESS_SCRIPT_SIZE = 3_600
SEQUENCE_FINAL = 0xFFFFFFFF
# sequences below this signal replaceability
SEQUENCE_RBF_LIMIT = 0xFFFFFFFE


class TxError(ValueError):
    """Domain error in transaction construction or serialization."""


class ScriptError(TxError):
    """Malformed or oversized script."""


def sha256(data: bytes) -> bytes:
    return hashlib.sha256(data).digest()


def double_sha256(data: bytes) -> bytes:
    return sha256(sha256(data))


class Amount(int):
    """Satoshi amount; construction and arithmetic reject values outside
    [0, MAX_MONEY]."""

    def __new__(cls, value: int) -> "Amount":
        v = int(value)
        if not 0 <= v <= MAX_MONEY:
            raise TxError(f"amount {v} outside [0, {MAX_MONEY}]")
        return super().__new__(cls, v)

    def __add__(self, other: int) -> "Amount":
        return Amount(int(self) + int(other))

    __radd__ = __add__

    def __sub__(self, other: int) -> "Amount":
        return Amount(int(self) - int(other))


class Op(IntEnum):
    OP_0 = 0x00
    OP_PUSHDATA1 = 0x4C
    OP_PUSHDATA2 = 0x4D
    OP_PUSHDATA4 = 0x4E
    OP_1 = 0x51
    OP_2 = 0x52
    OP_3 = 0x53
    OP_4 = 0x54
    OP_5 = 0x55
    OP_6 = 0x56
    OP_7 = 0x57
    OP_8 = 0x58
    OP_9 = 0x59
    OP_10 = 0x5A
    OP_11 = 0x5B
    OP_12 = 0x5C
    OP_13 = 0x5D
    OP_14 = 0x5E
    OP_15 = 0x5F
    OP_16 = 0x60
    OP_IF = 0x63
    OP_ELSE = 0x67
    OP_ENDIF = 0x68
    OP_DROP = 0x75
    OP_EQUAL = 0x87
    OP_EQUALVERIFY = 0x88
    OP_CHECKSIG = 0xAC
    OP_CHECKSIGVERIFY = 0xAD
    OP_CHECKMULTISIG = 0xAE
    OP_CHECKMULTISIGVERIFY = 0xAF
    OP_CHECKLOCKTIMEVERIFY = 0xB1
    OP_CHECKSEQUENCEVERIFY = 0xB2
    OP_CHECKTEMPLATEVERIFY = 0xB3


_PUSH_OPS = {Op.OP_PUSHDATA1, Op.OP_PUSHDATA2, Op.OP_PUSHDATA4}
_OP_NAMES = {int(op): op.name for op in Op}

ScriptItem = Union[int, bytes]


def script_num(n: int) -> bytes:
    """Minimal little-endian signed number encoding (CScriptNum style)."""
    if n == 0:
        return b""
    neg, mag, out = n < 0, abs(n), bytearray()
    while mag:
        out.append(mag & 0xFF)
        mag >>= 8
    if out[-1] & 0x80:
        out.append(0x80 if neg else 0x00)
    elif neg:
        out[-1] |= 0x80
    return bytes(out)


def parse_script_num(item: bytes, max_size: int = 4) -> int:
    if len(item) > max_size:
        raise ScriptError("script number too large")
    if item and item[-1] & 0x7F == 0 and (len(item) == 1 or not item[-2] & 0x80):
        raise ScriptError("non-minimal script number")
    if not item:
        return 0
    mag = int.from_bytes(item[:-1] + bytes([item[-1] & 0x7F]), "little")
    return -mag if item[-1] & 0x80 else mag


def push_int(n: int) -> ScriptItem:
    """Canonical script item for a number operand."""
    if n == 0:
        return int(Op.OP_0)
    if 1 <= n <= 16:
        return int(Op.OP_1) + n - 1
    return script_num(n)


def _encode_push(data: bytes) -> bytes:
    if len(data) == 0:
        return bytes([Op.OP_0])
    if len(data) <= 0x4B:
        return bytes([len(data)]) + data
    if len(data) <= 0xFF:
        return bytes([Op.OP_PUSHDATA1, len(data)]) + data
    if len(data) <= 0xFFFF:
        return bytes([Op.OP_PUSHDATA2]) + struct.pack("<H", len(data)) + data
    return bytes([Op.OP_PUSHDATA4]) + struct.pack("<I", len(data)) + data


@dataclass(frozen=True)
class Script:
    """Serialized script over the covenant opcode subset."""

    data: bytes = b""

    @classmethod
    def from_ops(cls, items: Iterable[ScriptItem]) -> "Script":
        out = bytearray()
        for item in items:
            if isinstance(item, (bytes, bytearray)):
                out += _encode_push(bytes(item))
            elif int(item) in _OP_NAMES and int(item) not in _PUSH_OPS:
                out.append(int(item))
            else:
                raise ScriptError(f"not an opcode in the supported subset: {item!r}")
        return cls(bytes(out))

    def ops(self) -> list[tuple[str, ScriptItem]]:
        """Parse into [("push", bytes) | ("op", opcode_int)], rejecting
        truncated pushes and opcodes outside the subset."""
        out: list[tuple[str, ScriptItem]] = []
        data, i = self.data, 0
        while i < len(data):
            op = data[i]
            i += 1
            if op == Op.OP_0:
                out.append(("push", b""))
            elif op <= 0x4B:
                if i + op > len(data):
                    raise ScriptError(f"truncated push at offset {i - 1}")
                out.append(("push", data[i:i + op]))
                i += op
            elif op in (Op.OP_PUSHDATA1, Op.OP_PUSHDATA2, Op.OP_PUSHDATA4):
                width = {Op.OP_PUSHDATA1: 1, Op.OP_PUSHDATA2: 2, Op.OP_PUSHDATA4: 4}[op]
                if i + width > len(data):
                    raise ScriptError(f"truncated push length at offset {i - 1}")
                n = int.from_bytes(data[i:i + width], "little")
                i += width
                if i + n > len(data):
                    raise ScriptError(f"truncated push at offset {i - 1}")
                out.append(("push", data[i:i + n]))
                i += n
            elif Op.OP_1 <= op <= Op.OP_16:
                out.append(("push", bytes([op - Op.OP_1 + 1])))
            elif op in _OP_NAMES:
                out.append(("op", op))
            else:
                raise ScriptError(f"unknown opcode 0x{op:02x} at offset {i - 1}")
        return out

    def asm(self) -> str:
        """Human-readable opcode listing; pushes rendered as hex."""
        parts = []
        for kind, val in self.ops():
            if kind == "op":
                parts.append(_OP_NAMES[int(val)])
            else:
                parts.append(val.hex() if val else "OP_0")
        return " ".join(parts)

    def __len__(self) -> int:
        return len(self.data)

    def hex(self) -> str:
        return self.data.hex()


@dataclass(frozen=True)
class OutPoint:
    txid: bytes  # 32 bytes, natural (hash) order
    vout: int

    def __post_init__(self) -> None:
        if len(self.txid) != 32:
            raise TxError("outpoint txid must be 32 bytes")
        if not 0 <= self.vout <= 0xFFFFFFFF:
            raise TxError("outpoint vout out of range")

    def serialize(self) -> bytes:
        return self.txid + struct.pack("<I", self.vout)

    def is_null(self) -> bool:
        return self == NULL_OUTPOINT


# reserved marker: coinbase inputs and proof-of-reserves commitment inputs
NULL_OUTPOINT = OutPoint(b"\x00" * 32, 0xFFFFFFFF)


@dataclass(frozen=True)
class TxInput:
    previous: OutPoint
    sequence: int = SEQUENCE_FINAL
    witness: tuple[bytes, ...] = ()

    def __post_init__(self) -> None:
        if not 0 <= self.sequence <= 0xFFFFFFFF:
            raise TxError("sequence out of range")
        object.__setattr__(self, "witness", tuple(bytes(w) for w in self.witness))

    def signals_rbf(self) -> bool:
        return self.sequence < SEQUENCE_RBF_LIMIT


@dataclass(frozen=True)
class TxOutput:
    amount: Amount
    script: Script

    def __post_init__(self) -> None:
        object.__setattr__(self, "amount", Amount(self.amount))

    def serialize(self) -> bytes:
        return struct.pack("<Q", int(self.amount)) + compact_size(len(self.script.data)) + self.script.data


@dataclass(frozen=True)
class Transaction:
    version: int = 2
    inputs: tuple[TxInput, ...] = ()
    outputs: tuple[TxOutput, ...] = ()
    locktime: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "inputs", tuple(self.inputs))
        object.__setattr__(self, "outputs", tuple(self.outputs))
        if not -0x80000000 <= self.version <= 0x7FFFFFFF:
            raise TxError("version out of range")
        if not 0 <= self.locktime <= 0xFFFFFFFF:
            raise TxError("locktime out of range")
        if not self.inputs or not self.outputs:
            raise TxError("transaction needs at least one input and one output")

    def serialize(self, include_witness: bool = True) -> bytes:
        return serialize(self, include_witness)

    def txid(self) -> bytes:
        return double_sha256(serialize(self, include_witness=False))

    def display_txid(self) -> str:
        return self.txid()[::-1].hex()

    def size(self) -> int:
        """Byte length of the witness serialization (the feerate unit)."""
        return len(serialize(self, include_witness=True))


def compact_size(n: int) -> bytes:
    if n < 0:
        raise TxError("negative compact size")
    if n < 0xFD:
        return bytes([n])
    if n <= 0xFFFF:
        return b"\xfd" + struct.pack("<H", n)
    if n <= 0xFFFFFFFF:
        return b"\xfe" + struct.pack("<I", n)
    return b"\xff" + struct.pack("<Q", n)


class _Reader:
    def __init__(self, data: bytes):
        self.data, self.pos = data, 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise TxError(f"truncated at byte {len(self.data)}")
        out = self.data[self.pos:self.pos + n]
        self.pos += n
        return out

    def compact_size(self) -> int:
        tag = self.take(1)[0]
        if tag < 0xFD:
            return tag
        width = {0xFD: 2, 0xFE: 4, 0xFF: 8}[tag]
        return int.from_bytes(self.take(width), "little")


def _check_script_size(script: Script) -> None:
    if len(script.data) > MAX_SCRIPT_SIZE:
        raise ScriptError(f"script of {len(script.data)} bytes exceeds {MAX_SCRIPT_SIZE}")


def serialize(tx: Transaction, include_witness: bool = True) -> bytes:
    for out in tx.outputs:
        _check_script_size(out.script)
    r = struct.pack("<i", tx.version)
    if include_witness:
        r += b"\x00\x01"
    r += compact_size(len(tx.inputs))
    for inp in tx.inputs:
        r += inp.previous.serialize() + b"\x00" + struct.pack("<I", inp.sequence)
    r += compact_size(len(tx.outputs))
    for out in tx.outputs:
        r += out.serialize()
    if include_witness:
        for inp in tx.inputs:
            r += compact_size(len(inp.witness))
            for item in inp.witness:
                r += compact_size(len(item)) + item
    r += struct.pack("<I", tx.locktime)
    return r


def deserialize(data: bytes) -> Transaction:
    """Parse either serialization mode (witness mode detected by the
    0x00 0x01 marker); rejects trailing bytes."""
    r = _Reader(data)
    version = struct.unpack("<i", r.take(4))[0]
    has_witness = data[4:6] == b"\x00\x01"
    if has_witness:
        r.take(2)
    inputs = []
    for _ in range(r.compact_size()):
        previous = OutPoint(r.take(32), struct.unpack("<I", r.take(4))[0])
        if r.compact_size() != 0:
            raise TxError("non-empty scriptSig in SegWit-only model")
        sequence = struct.unpack("<I", r.take(4))[0]
        inputs.append(TxInput(previous, sequence))
    outputs = []
    for _ in range(r.compact_size()):
        amount = Amount(struct.unpack("<Q", r.take(8))[0])
        script = Script(r.take(r.compact_size()))
        outputs.append(TxOutput(amount, script))
    if has_witness:
        inputs = [
            TxInput(inp.previous, inp.sequence,
                    tuple(r.take(r.compact_size()) for _ in range(r.compact_size())))
            for inp in inputs
        ]
    locktime = struct.unpack("<I", r.take(4))[0]
    if r.pos != len(data):
        raise TxError(f"trailing bytes at byte {r.pos}")
    return Transaction(version, tuple(inputs), tuple(outputs), locktime)


def witness_script_hash(witness_script: Script) -> bytes:
    if not witness_script.data:
        raise ScriptError("witness script must be non-empty")
    if len(witness_script.data) > MAX_WITNESS_SCRIPT_SIZE:
        raise ScriptError(
            f"witness script of {len(witness_script.data)} bytes exceeds {MAX_WITNESS_SCRIPT_SIZE}")
    return sha256(witness_script.data)


def p2wsh_script(witness_script: Script) -> Script:
    """Locking script: OP_0 PUSH32(SHA256(witness_script))."""
    return Script(bytes([Op.OP_0, 32]) + witness_script_hash(witness_script))


def p2wsh_address(witness_script: Script) -> str:
    return "p2wsh:" + witness_script_hash(witness_script).hex()


def address_script_hash(address: str) -> bytes:
    """Parse a p2wsh:<64 hex> address back to the 32-byte script hash."""
    if not address.startswith("p2wsh:"):
        raise TxError(f"unsupported address prefix: {address!r}")
    digest = address[len("p2wsh:"):]
    if len(digest) != 64 or digest != digest.lower():
        raise TxError("p2wsh address needs 64 lowercase hex characters")
    try:
        return bytes.fromhex(digest)
    except ValueError as exc:
        raise TxError(f"bad address hex: {exc}") from None
