"""Simulated consensus validator: script engine, UTXO chain state,
mempool with replace-by-fee, and ancestor-package block building.

This is the correctness oracle for every covenant mechanism: a covenant
"holds" exactly when the transactions that violate it fail check_tx here.
Rejections carry machine-readable reasons:

    missing-utxo   input absent from the UTXO view (includes the reserved
                   null outpoint, which only coinbases may carry)
    double-spend   duplicate outpoint within a transaction, or a mempool
                   conflict that does not qualify for replacement
    timelock       locktime not yet reached, or CLTV/CSV failure
    bad-sig        a VERIFY-class signature check failed
    ctv-mismatch   template hash differs from the spending transaction
    negative-fee   outputs exceed inputs
    bad-script     any other script failure

Simulator-local rules, documented in docs/script-subset.md: CHECKMULTISIG
pops exactly m signatures and n keys (no historical dummy element); a
transaction with locktime L is only valid at height >= L; consensus
accepts high-s signatures (low-s is a relay lint, not enforced here);
blocks have instant finality with a configurable confirmation depth.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional

from . import curvecrypto
from .curvecrypto import CryptoError, PublicKey, der_decode_signature
from .sighash import SighashError, SigHashType, SpentOutputContext, ctv_hash, sighash_digest
from .txcore import (Amount, NULL_OUTPOINT, Op, OutPoint, Script, ScriptError,
                     Transaction, TxInput, TxOutput, deserialize, parse_script_num,
                     serialize, sha256)

MAX_STACK = 1000
MAX_OPS = 201

R_MISSING_UTXO = "missing-utxo"
R_DOUBLE_SPEND = "double-spend"
R_TIMELOCK = "timelock"
R_BAD_SIG = "bad-sig"
R_CTV_MISMATCH = "ctv-mismatch"
R_NEGATIVE_FEE = "negative-fee"
R_BAD_SCRIPT = "bad-script"


class EngineFailure(Exception):
    def __init__(self, reason: str, detail: str = ""):
        self.reason, self.detail = reason, detail
        super().__init__(f"{reason}: {detail}" if detail else reason)


def _cast_to_bool(item: bytes) -> bool:
    for i, c in enumerate(item):
        if c != 0:
            return not (i == len(item) - 1 and c == 0x80)
    return False


_TRUE, _FALSE = b"\x01", b""


class StaticChecker:
    """Fixed-answer checker for engine tests and script experiments."""

    def __init__(self, sig_results=None, locktime: int = -1, sequence: int = -1,
                 template_hash: bytes = b"\x00" * 32):
        self._sig_results = sig_results or {}
        self._locktime, self._sequence = locktime, sequence
        self._template_hash = template_hash
        self.sig_ops = 0

    def check_sig(self, sig: bytes, pubkey: bytes) -> bool:
        return bool(self._sig_results.get((bytes(sig), bytes(pubkey)), False))

    def locktime_ok(self, value: int) -> bool:
        return 0 <= value <= self._locktime

    def sequence_ok(self, value: int) -> bool:
        return 0 <= value <= self._sequence

    def template_hash(self) -> bytes:
        return self._template_hash


class TransactionChecker:
    """Binds signature and timelock checks to one input of a transaction."""

    def __init__(self, tx: Transaction, input_index: int, ctx: SpentOutputContext,
                 height: int, spent_height: int):
        self.tx, self.input_index, self.ctx = tx, input_index, ctx
        self.height, self.spent_height = height, spent_height
        self.sig_ops = 0

    def check_sig(self, sig: bytes, pubkey: bytes) -> bool:
        if not sig or not pubkey:
            return False
        try:
            decoded = der_decode_signature(bytes(sig[:-1]))
            sighash_type = SigHashType.from_byte(sig[-1])
            pub = PublicKey.from_bytes(bytes(pubkey))
        except (CryptoError, SighashError):
            return False
        digest = sighash_digest(self.tx, self.input_index, self.ctx, sighash_type)
        self.sig_ops += 1
        # consensus accepts both s halves; low-s is relay policy only
        return curvecrypto.verify(pub, digest, decoded, enforce_low_s=False)

    def locktime_ok(self, value: int) -> bool:
        # CLTV commits through the transaction's locktime, which the
        # transaction-level rule pins to the chain height
        return value <= self.tx.locktime

    def sequence_ok(self, value: int) -> bool:
        age = self.height - self.spent_height
        return value <= self.tx.inputs[self.input_index].sequence and value <= age

    def template_hash(self) -> bytes:
        return ctv_hash(self.tx, self.input_index)


class ScriptEngine:
    """Streaming interpreter with an execution-condition stack.

    execute() raises EngineFailure or returns the final stack; the caller
    applies the single-truthy-value rule.
    """

    def __init__(self, checker):
        self.checker = checker

    def execute(self, script: Script, initial_stack: list[bytes]) -> list[bytes]:
        try:
            ops = script.ops()
        except ScriptError as exc:
            raise EngineFailure(R_BAD_SCRIPT, str(exc)) from None
        if sum(1 for kind, _ in ops if kind == "op") > MAX_OPS:
            raise EngineFailure(R_BAD_SCRIPT, "opcode count above 201")
        if len(script.data) > 10_000:
            raise EngineFailure(R_BAD_SCRIPT, "script above 10000 bytes")
        stack = [bytes(item) for item in initial_stack]
        if len(stack) > MAX_STACK:
            raise EngineFailure(R_BAD_SCRIPT, "initial stack above 1000 items")
        cond: list[bool] = []
        elsed: list[bool] = []
        for kind, val in ops:
            executing = all(cond)
            if kind == "op" and val == Op.OP_IF:
                cond.append(_cast_to_bool(self._pop(stack)) if executing else False)
                elsed.append(False)
                continue
            if kind == "op" and val == Op.OP_ELSE:
                if not cond or elsed[-1]:
                    raise EngineFailure(R_BAD_SCRIPT, "ELSE without matching IF")
                cond[-1] = not cond[-1]
                elsed[-1] = True
                continue
            if kind == "op" and val == Op.OP_ENDIF:
                if not cond:
                    raise EngineFailure(R_BAD_SCRIPT, "ENDIF without IF")
                cond.pop()
                elsed.pop()
                continue
            if not executing:
                continue
            if kind == "push":
                stack.append(val)
            else:
                self._op(int(val), stack)
            if len(stack) > MAX_STACK:
                raise EngineFailure(R_BAD_SCRIPT, "stack above 1000 items")
        if cond:
            raise EngineFailure(R_BAD_SCRIPT, "unterminated IF")
        return stack

    @staticmethod
    def _pop(stack: list[bytes]) -> bytes:
        if not stack:
            raise EngineFailure(R_BAD_SCRIPT, "stack underflow")
        return stack.pop()

    def _num(self, item: bytes, max_size: int) -> int:
        try:
            return parse_script_num(item, max_size)
        except ScriptError as exc:
            raise EngineFailure(R_BAD_SCRIPT, str(exc)) from None

    def _op(self, op: int, stack: list[bytes]) -> None:
        checker = self.checker
        if op == Op.OP_DROP:
            self._pop(stack)
        elif op in (Op.OP_EQUAL, Op.OP_EQUALVERIFY):
            equal = self._pop(stack) == self._pop(stack)
            if op == Op.OP_EQUAL:
                stack.append(_TRUE if equal else _FALSE)
            elif not equal:
                raise EngineFailure(R_BAD_SCRIPT, "EQUALVERIFY failed")
        elif op in (Op.OP_CHECKSIG, Op.OP_CHECKSIGVERIFY):
            pubkey, sig = self._pop(stack), self._pop(stack)
            ok = checker.check_sig(sig, pubkey)
            if op == Op.OP_CHECKSIG:
                stack.append(_TRUE if ok else _FALSE)
            elif not ok:
                raise EngineFailure(R_BAD_SIG, "CHECKSIGVERIFY failed")
        elif op in (Op.OP_CHECKMULTISIG, Op.OP_CHECKMULTISIGVERIFY):
            n = self._num(self._pop(stack), 4)
            if not 1 <= n <= 15:
                raise EngineFailure(R_BAD_SCRIPT, f"key count {n} outside [1, 15]")
            keys = [self._pop(stack) for _ in range(n)][::-1]
            m = self._num(self._pop(stack), 4)
            if not 1 <= m <= n:
                raise EngineFailure(R_BAD_SCRIPT, f"signature count {m} outside [1, {n}]")
            sigs = [self._pop(stack) for _ in range(m)][::-1]
            key_index, ok = 0, True
            for sig in sigs:
                while key_index < len(keys) and not checker.check_sig(sig, keys[key_index]):
                    key_index += 1
                if key_index == len(keys):
                    ok = False
                    break
                key_index += 1
            if op == Op.OP_CHECKMULTISIG:
                stack.append(_TRUE if ok else _FALSE)
            elif not ok:
                raise EngineFailure(R_BAD_SIG, "CHECKMULTISIGVERIFY failed")
        elif op in (Op.OP_CHECKLOCKTIMEVERIFY, Op.OP_CHECKSEQUENCEVERIFY):
            if not stack:
                raise EngineFailure(R_BAD_SCRIPT, "stack underflow")
            value = self._num(stack[-1], 5)
            if value < 0:
                raise EngineFailure(R_BAD_SCRIPT, "negative timelock value")
            ok = (checker.locktime_ok(value) if op == Op.OP_CHECKLOCKTIMEVERIFY
                  else checker.sequence_ok(value))
            if not ok:
                raise EngineFailure(R_TIMELOCK, f"timelock {value} not satisfied")
        elif op == Op.OP_CHECKTEMPLATEVERIFY:
            if not stack:
                raise EngineFailure(R_BAD_SCRIPT, "stack underflow")
            if len(stack[-1]) != 32:
                raise EngineFailure(R_BAD_SCRIPT, "template hash must be 32 bytes")
            if stack[-1] != checker.template_hash():
                raise EngineFailure(R_CTV_MISMATCH, "template hash differs")
        else:
            raise EngineFailure(R_BAD_SCRIPT, f"unexpected opcode 0x{op:02x}")


def verify_input(tx: Transaction, input_index: int, utxo: "UtxoEntry",
                 height: int) -> int:
    """Run one input's P2WSH script; returns the signature-operation count
    or raises EngineFailure."""
    lock = utxo.output.script.data
    if len(lock) != 34 or lock[0] != 0x00 or lock[1] != 32:
        raise EngineFailure(R_BAD_SCRIPT, "spent output is not pay-to-witness-script-hash")
    witness = tx.inputs[input_index].witness
    if not witness:
        raise EngineFailure(R_BAD_SCRIPT, "empty witness")
    witness_script = Script(witness[-1])
    if sha256(witness_script.data) != lock[2:]:
        raise EngineFailure(R_BAD_SCRIPT, "witness script does not match committed hash")
    checker = TransactionChecker(
        tx, input_index,
        SpentOutputContext(witness_script, utxo.output.amount),
        height, utxo.height)
    try:
        stack = ScriptEngine(checker).execute(witness_script, list(witness[:-1]))
    except SighashError as exc:
        raise EngineFailure(R_BAD_SIG, str(exc)) from None
    if len(stack) != 1 or not _cast_to_bool(stack[0]):
        raise EngineFailure(R_BAD_SCRIPT, "script did not leave a single true value")
    return checker.sig_ops


@dataclass(frozen=True)
class UtxoEntry:
    output: TxOutput
    height: int


@dataclass(frozen=True)
class CheckResult:
    ok: bool
    reason: Optional[str] = None
    detail: str = ""
    fee: int = 0
    sig_ops: int = 0


def check_tx(view: dict[OutPoint, UtxoEntry], tx: Transaction, height: int) -> CheckResult:
    """Full consensus check of one transaction against a UTXO view."""
    seen = set()
    for txin in tx.inputs:
        if txin.previous.is_null():
            return CheckResult(False, R_MISSING_UTXO, "null outpoint is reserved for coinbases")
        if txin.previous in seen:
            return CheckResult(False, R_DOUBLE_SPEND, "outpoint spent twice in one transaction")
        seen.add(txin.previous)
    for txin in tx.inputs:
        if txin.previous not in view:
            return CheckResult(False, R_MISSING_UTXO,
                               f"{txin.previous.txid[::-1].hex()}:{txin.previous.vout}")
    if tx.locktime > height:
        return CheckResult(False, R_TIMELOCK,
                           f"locktime {tx.locktime} above height {height}")
    total_in = sum(int(view[i.previous].output.amount) for i in tx.inputs)
    total_out = sum(int(o.amount) for o in tx.outputs)
    if total_out > total_in:
        return CheckResult(False, R_NEGATIVE_FEE, f"outputs {total_out} exceed inputs {total_in}")
    sig_ops = 0
    for index in range(len(tx.inputs)):
        try:
            sig_ops += verify_input(tx, index, view[tx.inputs[index].previous], height)
        except EngineFailure as exc:
            return CheckResult(False, exc.reason, f"input {index}: {exc.detail}")
    return CheckResult(True, fee=total_in - total_out, sig_ops=sig_ops)


@dataclass
class MempoolEntry:
    tx: Transaction
    fee: int
    size: int

    @property
    def txid(self) -> bytes:
        return self.tx.txid()

    def signals_rbf(self) -> bool:
        return any(i.signals_rbf() for i in self.tx.inputs)

    def feerate(self) -> float:
        return self.fee / self.size


@dataclass(frozen=True)
class Block:
    height: int
    txs: tuple[Transaction, ...]
    fees: int
    size: int
    txids: tuple[str, ...] = ()   # stands in for txs on loaded snapshots

    def log_entry(self) -> dict:
        ids = [tx.display_txid() for tx in self.txs] if self.txs else list(self.txids)
        return {"height": self.height, "txids": ids,
                "fees": self.fees, "size": self.size}


@dataclass(frozen=True)
class SubmitResult:
    status: str                  # "accepted" | "replaced" | "rejected"
    reason: Optional[str] = None
    detail: str = ""
    replaced: tuple[bytes, ...] = ()

    @property
    def ok(self) -> bool:
        return self.status != "rejected"


class ChainState:
    """UTXO set, chain tip, mempool, and block log."""

    def __init__(self, confirmation_depth: int = 6):
        self.confirmation_depth = confirmation_depth
        self.utxos: dict[OutPoint, UtxoEntry] = {}
        self.height = 0
        self.blocks: list[Block] = []
        self.tx_heights: dict[bytes, int] = {}
        self.mempool: dict[bytes, MempoolEntry] = {}

    # -- utxo views ---------------------------------------------------------

    def view_with_mempool(self, exclude: set[bytes] = frozenset()) -> dict[OutPoint, UtxoEntry]:
        view = dict(self.utxos)
        for txid, entry in self.mempool.items():
            if txid in exclude:
                continue
            for vout, output in enumerate(entry.tx.outputs):
                # unconfirmed outputs count as created at the next height
                view[OutPoint(txid, vout)] = UtxoEntry(output, self.height + 1)
        for txid, entry in self.mempool.items():
            if txid in exclude:
                continue
            for txin in entry.tx.inputs:
                view.pop(txin.previous, None)
        return view

    # -- mempool ------------------------------------------------------------

    def _descendants(self, txids: set[bytes]) -> set[bytes]:
        out = set(txids)
        changed = True
        while changed:
            changed = False
            for txid, entry in self.mempool.items():
                if txid in out:
                    continue
                if any(i.previous.txid in out for i in entry.tx.inputs):
                    out.add(txid)
                    changed = True
        return out

    def submit(self, tx: Transaction) -> SubmitResult:
        """Validate against chain + mempool and add to the mempool,
        applying the replace-by-fee rule on conflicts."""
        txid = tx.txid()
        if txid in self.mempool or txid in self.tx_heights:
            return SubmitResult("rejected", R_DOUBLE_SPEND, "transaction already known")
        spent_by: dict[OutPoint, bytes] = {}
        for known, entry in self.mempool.items():
            for txin in entry.tx.inputs:
                spent_by[txin.previous] = known
        conflicts = {spent_by[i.previous] for i in tx.inputs if i.previous in spent_by}
        evicted = self._descendants(conflicts) if conflicts else set()

        view = self.view_with_mempool(exclude=evicted)
        result = check_tx(view, tx, self.height)
        if not result.ok:
            return SubmitResult("rejected", result.reason, result.detail)
        size = tx.size()
        if conflicts:
            for old_txid in conflicts:
                old = self.mempool[old_txid]
                if not old.signals_rbf():
                    return SubmitResult("rejected", R_DOUBLE_SPEND,
                                        "conflicting transaction does not signal replaceability")
                if result.fee * old.size <= old.fee * size:
                    return SubmitResult("rejected", R_DOUBLE_SPEND,
                                        "replacement feerate not strictly higher")
            evicted_fees = sum(self.mempool[t].fee for t in evicted)
            if result.fee <= evicted_fees:
                return SubmitResult("rejected", R_DOUBLE_SPEND,
                                    "replacement absolute fee not strictly higher")
            for old_txid in evicted:
                del self.mempool[old_txid]
        self.mempool[txid] = MempoolEntry(tx, result.fee, size)
        if conflicts:
            return SubmitResult("replaced", replaced=tuple(sorted(evicted)))
        return SubmitResult("accepted")

    # -- mining -------------------------------------------------------------

    def _mempool_ancestors(self, txid: bytes, available: dict[bytes, MempoolEntry]) -> set[bytes]:
        out, frontier = {txid}, [txid]
        while frontier:
            current = frontier.pop()
            for txin in available[current].tx.inputs:
                parent = txin.previous.txid
                if parent in available and parent not in out:
                    out.add(parent)
                    frontier.append(parent)
        return out

    def _topo_order(self, txids: set[bytes], available: dict[bytes, MempoolEntry]) -> list[bytes]:
        ordered, placed = [], set()
        pending = sorted(txids, key=lambda t: t.hex())
        while pending:
            progressed = False
            for txid in list(pending):
                parents = {i.previous.txid for i in available[txid].tx.inputs}
                if all(p not in txids or p in placed for p in parents):
                    ordered.append(txid)
                    placed.add(txid)
                    pending.remove(txid)
                    progressed = True
            if not progressed:
                raise RuntimeError("dependency cycle in mempool")
        return ordered

    def mine_block(self, capacity: Optional[int] = None,
                   coinbase_outputs: Optional[list[TxOutput]] = None) -> Block:
        """Greedy ancestor-package selection by package feerate; ancestors
        are always included before descendants. The coinbase is the only
        source of new value (subsidy defaults to none)."""
        remaining = dict(self.mempool)
        selected: list[bytes] = []
        space = capacity if capacity is not None else float("inf")
        while True:
            best_pkg, best_fee, best_size = None, 0, 1
            for txid in remaining:
                pkg = self._mempool_ancestors(txid, remaining)
                pkg_fee = sum(remaining[t].fee for t in pkg)
                pkg_size = sum(remaining[t].size for t in pkg)
                if pkg_size > space:
                    continue
                if best_pkg is None or pkg_fee * best_size > best_fee * pkg_size:
                    best_pkg, best_fee, best_size = pkg, pkg_fee, pkg_size
            if best_pkg is None:
                break
            for txid in self._topo_order(best_pkg, remaining):
                selected.append(txid)
                del remaining[txid]
            space -= best_size

        new_height = self.height + 1
        txs: list[Transaction] = []
        fees = 0
        if coinbase_outputs:
            # the height in the locktime keeps repeated identical coinbases
            # from colliding on txid and overwriting each other's outputs
            coinbase = Transaction(
                inputs=(TxInput(NULL_OUTPOINT, 0xFFFFFFFF),),
                outputs=tuple(coinbase_outputs),
                locktime=new_height)
            txs.append(coinbase)
        for txid in selected:
            txs.append(self.mempool[txid].tx)
            fees += self.mempool[txid].fee
        for tx in txs:
            txid = tx.txid()
            for txin in tx.inputs:
                if txin.previous.is_null():
                    continue
                if txin.previous not in self.utxos:
                    raise RuntimeError("mined transaction spends unknown outpoint")
                del self.utxos[txin.previous]
            for vout, output in enumerate(tx.outputs):
                self.utxos[OutPoint(txid, vout)] = UtxoEntry(output, new_height)
            self.tx_heights[txid] = new_height
            self.mempool.pop(txid, None)
        block = Block(new_height, tuple(txs), fees, sum(t.size() for t in txs))
        self.height = new_height
        self.blocks.append(block)
        self._evict_stale()
        return block

    def _evict_stale(self) -> None:
        # drop entries whose inputs were consumed by a block (plus their
        # descendant chains)
        changed = True
        while changed:
            changed = False
            produced = {OutPoint(txid, vout)
                        for txid, entry in self.mempool.items()
                        for vout in range(len(entry.tx.outputs))}
            for txid, entry in list(self.mempool.items()):
                if any(i.previous not in self.utxos and i.previous not in produced
                       for i in entry.tx.inputs):
                    for dropped in self._descendants({txid}):
                        self.mempool.pop(dropped, None)
                    changed = True
                    break

    # -- queries ------------------------------------------------------------

    def confirmations(self, txid: bytes) -> int:
        if txid not in self.tx_heights:
            return 0
        return self.height - self.tx_heights[txid] + 1

    def is_confirmed(self, txid: bytes) -> bool:
        return self.confirmations(txid) >= self.confirmation_depth

    def balance(self) -> int:
        return sum(int(e.output.amount) for e in self.utxos.values())

    def block_log(self) -> str:
        """One JSON object per line per block."""
        return "\n".join(json.dumps(b.log_entry(), sort_keys=True) for b in self.blocks)

    # -- persistence ---------------------------------------------------------

    def dump(self) -> dict:
        return {
            "format": 1,
            "confirmation_depth": self.confirmation_depth,
            "height": self.height,
            "utxos": [
                {"txid": op.txid.hex(), "vout": op.vout,
                 "amount": int(e.output.amount), "script": e.output.script.hex(),
                 "height": e.height}
                for op, e in sorted(self.utxos.items(), key=lambda kv: (kv[0].txid, kv[0].vout))
            ],
            "tx_heights": {txid.hex(): h for txid, h in sorted(self.tx_heights.items())},
            "blocks": [b.log_entry() for b in self.blocks],
            "mempool": [{"tx": serialize(e.tx, include_witness=True).hex(), "fee": e.fee}
                        for e in self.mempool.values()],
        }

    @classmethod
    def load(cls, data: dict) -> "ChainState":
        if data.get("format") != 1:
            raise ValueError(f"unsupported chain state format: {data.get('format')!r}")
        state = cls(confirmation_depth=data["confirmation_depth"])
        state.height = data["height"]
        for item in data["utxos"]:
            op = OutPoint(bytes.fromhex(item["txid"]), item["vout"])
            out = TxOutput(Amount(item["amount"]), Script(bytes.fromhex(item["script"])))
            state.utxos[op] = UtxoEntry(out, item["height"])
        state.tx_heights = {bytes.fromhex(t): h for t, h in data["tx_heights"].items()}
        for entry in data["blocks"]:
            state.blocks.append(Block(entry["height"], (), entry["fees"],
                                      entry["size"], tuple(entry["txids"])))
        for item in data["mempool"]:
            tx = deserialize(bytes.fromhex(item["tx"]))
            state.mempool[tx.txid()] = MempoolEntry(tx, item["fee"], tx.size())
        return state
