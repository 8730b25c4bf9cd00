"""Independent transaction serialization and txid oracle.

Serializes a transaction described as plain Python data and hashes it with
double SHA256. This module deliberately imports nothing from the package
under test, so the package serializer and this one can only agree by
actually producing the same bytes.

A transaction description is a dict:

    {"version": int,            # signed 32-bit
     "locktime": int,           # unsigned 32-bit
     "inputs": [{"txid": bytes,       # 32 bytes, natural (hash) order
                 "vout": int,
                 "sequence": int,
                 "witness": [bytes, ...]}, ...],
     "outputs": [{"amount": int, "script": bytes}, ...]}

Wire layout (SegWit-only model, empty scriptSig written for every input):

    no-witness:   version | vin | vout | locktime
    witness:      version | 0x00 0x01 | vin | vout | stacks | locktime
    txid:         double-SHA256 of the no-witness serialization
    display txid: the 32 bytes reversed, lowercase hex
"""

import hashlib
import struct


def compact_size(n: int) -> bytes:
    if n < 0:
        raise ValueError("negative compact size")
    if n < 0xFD:
        return bytes([n])
    if n <= 0xFFFF:
        return b"\xfd" + struct.pack("<H", n)
    if n <= 0xFFFFFFFF:
        return b"\xfe" + struct.pack("<I", n)
    return b"\xff" + struct.pack("<Q", n)


def _ser_input(inp: dict) -> bytes:
    if len(inp["txid"]) != 32:
        raise ValueError("txid must be 32 bytes")
    return inp["txid"] + struct.pack("<I", inp["vout"]) + b"\x00" + struct.pack("<I", inp["sequence"])


def _ser_output(out: dict) -> bytes:
    return struct.pack("<Q", out["amount"]) + compact_size(len(out["script"])) + out["script"]


def _ser_witness_stack(items: list) -> bytes:
    r = compact_size(len(items))
    for item in items:
        r += compact_size(len(item)) + item
    return r


def serialize_tx(desc: dict, include_witness: bool = False) -> bytes:
    r = struct.pack("<i", desc["version"])
    if include_witness:
        r += b"\x00\x01"
    r += compact_size(len(desc["inputs"]))
    for inp in desc["inputs"]:
        r += _ser_input(inp)
    r += compact_size(len(desc["outputs"]))
    for out in desc["outputs"]:
        r += _ser_output(out)
    if include_witness:
        for inp in desc["inputs"]:
            r += _ser_witness_stack(inp["witness"])
    r += struct.pack("<I", desc["locktime"])
    return r


def double_sha256(data: bytes) -> bytes:
    return hashlib.sha256(hashlib.sha256(data).digest()).digest()


def txid(desc: dict) -> bytes:
    return double_sha256(serialize_tx(desc, include_witness=False))


def display_txid(desc: dict) -> str:
    return txid(desc)[::-1].hex()
