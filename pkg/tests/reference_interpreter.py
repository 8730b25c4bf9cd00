"""Naive reference script interpreter.

Brute-force evaluator for the covenant script subset, used as an
equivalence oracle for the package's script engine. Written before the
engine and kept import-independent from the package. It builds an explicit
branch tree and evaluates it recursively, where the engine streams opcodes
with a condition stack, so the two can only agree through the documented
semantics (docs/script-subset.md).

run_script returns True iff execution raises no error and leaves exactly
one truthy stack item. Signature and timelock checks are injected as
callbacks so the oracle itself stays crypto-free.
"""

MAX_STACK = 1000
MAX_OPS = 201
MAX_SCRIPT = 10_000

_IF, _ELSE, _ENDIF = 0x63, 0x67, 0x68
_DROP, _EQUAL, _EQUALVERIFY = 0x75, 0x87, 0x88
_CHECKSIG, _CHECKSIGVERIFY = 0xAC, 0xAD
_CHECKMULTISIG, _CHECKMULTISIGVERIFY = 0xAE, 0xAF
_CLTV, _CSV, _CTV = 0xB1, 0xB2, 0xB3
_SIMPLE_OPS = {_DROP, _EQUAL, _EQUALVERIFY, _CHECKSIG, _CHECKSIGVERIFY,
               _CHECKMULTISIG, _CHECKMULTISIGVERIFY, _CLTV, _CSV, _CTV}


class _Fail(Exception):
    pass


def _tokenize(script):
    # yields ("push", bytes) | ("op", byte); raises _Fail on malformed pushes
    i, out = 0, []
    while i < len(script):
        op = script[i]
        i += 1
        if op == 0x00:
            out.append(("push", b""))
        elif op <= 0x4B:
            if i + op > len(script):
                raise _Fail("truncated push")
            out.append(("push", script[i:i + op]))
            i += op
        elif op in (0x4C, 0x4D, 0x4E):
            width = {0x4C: 1, 0x4D: 2, 0x4E: 4}[op]
            if i + width > len(script):
                raise _Fail("truncated push length")
            n = int.from_bytes(script[i:i + width], "little")
            i += width
            if i + n > len(script):
                raise _Fail("truncated push")
            out.append(("push", script[i:i + n]))
            i += n
        elif 0x51 <= op <= 0x60:
            out.append(("push", bytes([op - 0x50])))
        elif op in (_IF, _ELSE, _ENDIF) or op in _SIMPLE_OPS:
            out.append(("op", op))
        else:
            raise _Fail("unknown opcode")
    return out


def _tree(tokens, i=0, in_branch=False):
    # nodes: ("push", bytes) | ("op", byte) | ("if", then_nodes, else_nodes)
    nodes = []
    while i < len(tokens):
        kind, val = tokens[i]
        if kind == "op" and val == _IF:
            then_nodes, i = _tree(tokens, i + 1, True)
            else_nodes = []
            if i < len(tokens) and tokens[i] == ("op", _ELSE):
                else_nodes, i = _tree(tokens, i + 1, True)
            if i >= len(tokens) or tokens[i] != ("op", _ENDIF):
                raise _Fail("unbalanced if")
            nodes.append(("if", then_nodes, else_nodes))
            i += 1
        elif kind == "op" and val in (_ELSE, _ENDIF):
            if not in_branch:
                raise _Fail("unbalanced else/endif")
            return nodes, i
        else:
            nodes.append((kind, val))
            i += 1
    if in_branch:
        raise _Fail("unbalanced if")
    return nodes, i


def _to_bool(item):
    for i, c in enumerate(item):
        if c != 0:
            return not (i == len(item) - 1 and c == 0x80)
    return False


def _to_num(item, max_size):
    if len(item) > max_size:
        raise _Fail("number too large")
    if item and item[-1] & 0x7F == 0 and (len(item) == 1 or not item[-2] & 0x80):
        raise _Fail("non-minimal number")
    if not item:
        return 0
    neg = item[-1] & 0x80
    mag = int.from_bytes(item[:-1] + bytes([item[-1] & 0x7F]), "little")
    return -mag if neg else mag


def _pop(stack):
    if not stack:
        raise _Fail("stack underflow")
    return stack.pop()


class _Eval:
    def __init__(self, stack, sigcheck, locktime_ok, sequence_ok, ctv_hash):
        self.stack = stack
        self.sigcheck, self.ctv_hash = sigcheck, ctv_hash
        self.locktime_ok, self.sequence_ok = locktime_ok, sequence_ok

    def run(self, nodes):
        for node in nodes:
            if node[0] == "push":
                self.stack.append(node[1])
            elif node[0] == "if":
                taken = node[1] if _to_bool(_pop(self.stack)) else node[2]
                self.run(taken)
            else:
                self.op(node[1])
            if len(self.stack) > MAX_STACK:
                raise _Fail("stack overflow")

    def op(self, op):
        stack = self.stack
        if op == _DROP:
            _pop(stack)
        elif op in (_EQUAL, _EQUALVERIFY):
            eq = _pop(stack) == _pop(stack)
            if op == _EQUAL:
                stack.append(b"\x01" if eq else b"")
            elif not eq:
                raise _Fail("equalverify")
        elif op in (_CHECKSIG, _CHECKSIGVERIFY):
            pub, sig = _pop(stack), _pop(stack)
            ok = self.sigcheck(sig, pub)
            if op == _CHECKSIG:
                stack.append(b"\x01" if ok else b"")
            elif not ok:
                raise _Fail("checksigverify")
        elif op in (_CHECKMULTISIG, _CHECKMULTISIGVERIFY):
            n = _to_num(_pop(stack), 4)
            if not 1 <= n <= 15:
                raise _Fail("bad key count")
            keys = [_pop(stack) for _ in range(n)][::-1]
            m = _to_num(_pop(stack), 4)
            if not 1 <= m <= n:
                raise _Fail("bad sig count")
            sigs = [_pop(stack) for _ in range(m)][::-1]
            ki, ok = 0, True
            for sig in sigs:
                while ki < len(keys) and not self.sigcheck(sig, keys[ki]):
                    ki += 1
                if ki == len(keys):
                    ok = False
                    break
                ki += 1
            if op == _CHECKMULTISIG:
                stack.append(b"\x01" if ok else b"")
            elif not ok:
                raise _Fail("checkmultisigverify")
        elif op in (_CLTV, _CSV):
            if not stack:
                raise _Fail("stack underflow")
            v = _to_num(stack[-1], 5)
            if v < 0:
                raise _Fail("negative locktime")
            check = self.locktime_ok if op == _CLTV else self.sequence_ok
            if not check(v):
                raise _Fail("timelock")
        elif op == _CTV:
            if not stack:
                raise _Fail("stack underflow")
            if len(stack[-1]) != 32:
                raise _Fail("template hash must be 32 bytes")
            if stack[-1] != self.ctv_hash:
                raise _Fail("template mismatch")


def run_script(script, stack, *, sigcheck=lambda sig, pub: False,
               locktime_ok=lambda v: False, sequence_ok=lambda v: False,
               ctv_hash=b"\x00" * 32):
    try:
        if len(script) > MAX_SCRIPT:
            raise _Fail("script too large")
        tokens = _tokenize(script)
        if sum(1 for kind, _ in tokens if kind == "op") > MAX_OPS:
            raise _Fail("too many opcodes")
        if len(stack) > MAX_STACK:
            raise _Fail("stack overflow")
        nodes, _ = _tree(tokens)
        ev = _Eval(list(stack), sigcheck, locktime_ok, sequence_ok, ctv_hash)
        ev.run(nodes)
        return len(ev.stack) == 1 and _to_bool(ev.stack[0])
    except _Fail:
        return False
