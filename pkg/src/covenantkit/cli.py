"""Command-line interface.

Exit codes: 0 success, 1 operational failure (rejected transaction,
rejected proof, missing key), 2 malformed input (bad hex or JSON, with
the byte offset of the first offending character).

Key material lives in a wallet file (JSON, format 1) selected by
--wallet or the COVENANT_WALLET environment variable. Anywhere a public
key is expected, a wallet key name works too.
"""

from __future__ import annotations

import argparse
import json
import os
import random
import secrets
import sys
from pathlib import Path
from typing import Optional, Sequence

from . import compose, curvecrypto, mechanisms
from .curvecrypto import (CryptoError, PrivateKey, PublicKey, SignatureSeeds,
                          der_decode_signature, der_encode_signature)
from .mechanisms import (CommitmentSignature, CovenantError, CovenantTemplate,
                         CustodialPolicy, Deposit, EnforcementPolicy, Mechanism,
                         ProofBundle, RefundPath, build_deposit, size_report,
                         verify_proof)
from .protocol import ProtocolError, key_lifetime_report, load_scenario, run_scenario
from .sighash import (SIGHASH_ALL, SIGHASH_NONE, SIGHASH_SINGLE, SighashError,
                      SigHashType, SpentOutputContext, ctv_hash)
from .txcore import (Amount, OutPoint, Script, Transaction, TxError, TxOutput,
                     deserialize)
from .validator import ChainState

WALLET_ENV = "COVENANT_WALLET"


class CliError(Exception):
    exit_code = 1


class InputError(CliError):
    exit_code = 2


def _parse_hex(text: str, what: str) -> bytes:
    clean = text.strip()
    for i, ch in enumerate(clean):
        if ch not in "0123456789abcdefABCDEF":
            raise InputError(f"{what}: invalid hex character at byte {i}")
    if len(clean) % 2:
        raise InputError(f"{what}: odd-length hex ({len(clean)} digits)")
    return bytes.fromhex(clean)


def _parse_json(text: str, what: str) -> dict:
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"{what}: invalid JSON at byte {exc.pos}: {exc.msg}")


def _read_text(path: str, what: str) -> str:
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise CliError(f"{what}: {exc}")


def _emit(obj) -> None:
    print(json.dumps(obj, sort_keys=True, indent=2))


# ---------------------------------------------------------------------------
# Wallet


def _wallet_path(args) -> str:
    path = args.wallet or os.environ.get(WALLET_ENV)
    if not path:
        raise CliError(f"no wallet: pass --wallet or set {WALLET_ENV}")
    return path


def _load_wallet(args) -> dict:
    path = _wallet_path(args)
    if not Path(path).exists():
        return {"format": 1, "keys": {}}
    data = _parse_json(_read_text(path, "wallet"), "wallet")
    if data.get("format") != 1:
        raise InputError(f"wallet: unsupported format {data.get('format')!r}")
    return data


def _save_wallet(args, wallet: dict) -> None:
    Path(_wallet_path(args)).write_text(
        json.dumps(wallet, sort_keys=True, indent=2) + "\n")


def _wallet_priv(wallet: dict, name: str) -> PrivateKey:
    entry = wallet.get("keys", {}).get(name)
    if entry is None:
        raise CliError(f"no key named {name!r} in the wallet")
    return PrivateKey.from_bytes(_parse_hex(entry["secret"], f"key {name}"))


def _pubkey(token: str, wallet: Optional[dict]) -> PublicKey:
    clean = token.strip()
    if len(clean) == 66 and all(c in "0123456789abcdefABCDEF" for c in clean):
        return PublicKey.from_bytes(bytes.fromhex(clean))
    if wallet is not None and clean in wallet.get("keys", {}):
        return PublicKey.from_bytes(
            _parse_hex(wallet["keys"][clean]["pubkey"], f"key {clean}"))
    raise InputError(f"not a public key or wallet key name: {token!r}")


def _policy(spec: Optional[str], wallet: Optional[dict], cls, label: str):
    """threshold:key,key,... -> policy"""
    if spec is None:
        return None
    try:
        threshold_text, keys_text = spec.split(":", 1)
        threshold = int(threshold_text)
    except ValueError:
        raise InputError(f"{label} must look like m:key,key,...")
    keys = tuple(_pubkey(t, wallet) for t in keys_text.split(",") if t)
    return cls(threshold, keys)


def _outpoint(spec: str) -> OutPoint:
    try:
        txid_hex, vout_text = spec.rsplit(":", 1)
        vout = int(vout_text)
    except ValueError:
        raise InputError("outpoint must look like txid:vout")
    txid = _parse_hex(txid_hex, "outpoint txid")
    if len(txid) != 32:
        raise InputError("outpoint txid must be 32 bytes")
    # display txids are byte-reversed
    return OutPoint(txid[::-1], vout)


SIGHASH_NAMES = {
    "all": SIGHASH_ALL, "none": SIGHASH_NONE, "single": SIGHASH_SINGLE,
}


def _sighash_type(spec: str) -> SigHashType:
    parts = [p.strip().lower() for p in spec.split("|") if p.strip()]
    base, acp, noinput = None, False, False
    for p in parts:
        if p in SIGHASH_NAMES:
            base = SIGHASH_NAMES[p]
        elif p in ("anyonecanpay", "acp"):
            acp = True
        elif p == "noinput":
            noinput = True
        else:
            raise InputError(f"unknown sighash flag {p!r}")
    if base is None:
        raise InputError("sighash type needs a base: all, none, or single")
    return SigHashType(base, anyonecanpay=acp, noinput=noinput)


def _tx(hex_text: str, what: str = "transaction") -> Transaction:
    raw = _parse_hex(hex_text, what)
    try:
        return deserialize(raw)
    except TxError as exc:
        raise InputError(f"{what}: {exc}")


def _deposit_from_args(args, wallet: Optional[dict]) -> Deposit:
    mechanism = Mechanism(args.mechanism)
    enforcement = _policy(getattr(args, "enforcement", None), wallet,
                          EnforcementPolicy, "--enforcement")
    custody = _policy(getattr(args, "custody", None), wallet,
                      CustodialPolicy, "--custody")
    recovered = tuple(_pubkey(t, wallet)
                      for t in (getattr(args, "recovered_key", None) or []))
    hashes = tuple(_parse_hex(h, "--ctv-hash")
                   for h in (getattr(args, "ctv_hash", None) or []))
    refund = None
    if getattr(args, "refund", None):
        height_text, key_text = args.refund.split(":", 1)
        refund = RefundPath(int(height_text), _pubkey(key_text, wallet))
    return build_deposit(mechanism, enforcement, custody,
                         recovered_keys=recovered, ctv_hashes=hashes,
                         timelock_height=getattr(args, "timelock", None),
                         refund=refund)


def _custodial_privs(args, wallet: dict) -> list[PrivateKey]:
    names = [n for n in (args.custody_keys or "").split(",") if n]
    return [_wallet_priv(wallet, n) for n in names]


# ---------------------------------------------------------------------------
# Commands


def cmd_keygen(args) -> int:
    wallet = _load_wallet(args)
    if args.name in wallet["keys"]:
        raise CliError(f"key {args.name!r} already exists")
    rng = random.Random(args.seed) if args.seed is not None else secrets.SystemRandom()
    key = PrivateKey.generate(rng)
    wallet["keys"][args.name] = {
        "secret": key.to_bytes().hex(),
        "pubkey": key.public_key().encode().hex(),
    }
    _save_wallet(args, wallet)
    _emit({"name": args.name, "pubkey": key.public_key().encode().hex()})
    return 0


def cmd_export(args) -> int:
    wallet = _load_wallet(args)
    if args.public:
        wallet = {"format": wallet["format"],
                  "keys": {name: {"pubkey": entry["pubkey"]}
                           for name, entry in wallet["keys"].items()}}
        _emit(wallet)
        return 0
    raise CliError("refusing to export secrets; use --public")


def cmd_address(args) -> int:
    wallet = _load_wallet(args) if (args.wallet or os.environ.get(WALLET_ENV)) else None
    deposit = _deposit_from_args(args, wallet)
    _emit({
        "address": deposit.address(),
        "witness_script": deposit.witness_script.data.hex(),
        "witness_script_asm": deposit.witness_script.asm(),
        "mechanism": deposit.mechanism.value,
    })
    return 0


def cmd_ctv_hash(args) -> int:
    tx = _tx(args.tx)
    _emit({"input": args.input, "ctv_hash": ctv_hash(tx, args.input).hex()})
    return 0


def cmd_nums_sig(args) -> int:
    digest = _parse_hex(args.digest, "--digest")
    sig, pub = curvecrypto.nums_signature(digest)
    _emit({
        "r": sig.r, "s": sig.s,
        "der": der_encode_signature(sig).hex(),
        "recovered_key": pub.encode().hex(),
    })
    return 0


def cmd_seeded_sig(args) -> int:
    digest = _parse_hex(args.digest, "--digest")
    seeds = SignatureSeeds(_parse_hex(args.seed_r, "--seed-r"),
                           _parse_hex(args.seed_s, "--seed-s"))
    sig, pub = curvecrypto.seeded_signature(seeds, digest)
    _emit({
        "r": sig.r, "s": sig.s,
        "der": der_encode_signature(sig).hex(),
        "recovered_key": pub.encode().hex(),
    })
    return 0


def cmd_sign_commitment(args) -> int:
    wallet = _load_wallet(args)
    key = _wallet_priv(wallet, args.key)
    tx = _tx(args.tx)
    sighash_type = _sighash_type(args.sighash)
    template = CovenantTemplate(
        tx, tuple(sighash_type for _ in tx.inputs),
        Mechanism.RECOVERED_KEY if sighash_type.noinput else Mechanism.DELETED_KEY)
    ctx = SpentOutputContext(Script(_parse_hex(args.witness_script, "--witness-script")),
                             Amount(args.amount))
    sig = mechanisms.sign_commitment(template, key, ctx, None, args.input)
    _emit({
        "input": args.input,
        "der": der_encode_signature(sig.signature).hex(),
        "sighash_type": sig.sighash_type.to_byte(),
        "witness_item": sig.witness_bytes().hex(),
        "pubkey": sig.signer.encode().hex(),
        "digest": template.digest(args.input, ctx).hex(),
    })
    return 0


def _chain_json(chain: compose.CovenantChain) -> dict:
    return {
        "mechanism": chain.mechanism.value,
        "amount": chain.amount,
        "rebindable": chain.rebindable,
        "entry_address": chain.entry_address(),
        "leaf_script": chain.leaf_script.hex(),
        "hops": [{
            "address": hop.deposit.address(),
            "witness_script": hop.deposit.witness_script.hex(),
            "covenant_tx": hop.covenant_tx.serialize().hex(),
            "fee": hop.fee,
        } for hop in chain.hops],
    }


def _chain_build_kwargs(args, wallet) -> dict:
    kwargs = {
        "custody": _policy(args.custody, wallet, CustodialPolicy, "--custody"),
        "custodial_keys": _custodial_privs(args, wallet) if wallet else [],
        "style": args.style,
    }
    if args.leaf_script:
        kwargs["leaf_script"] = Script(_parse_hex(args.leaf_script, "--leaf-script"))
    if args.mechanism == "deleted-key":
        m, n = (int(x) for x in args.enforcement_size.split(":", 1))
        kwargs["enforcement_size"] = (m, n)
        kwargs["rng"] = random.Random(args.seed)
        if args.funding_outpoint:
            kwargs["funding_outpoint"] = _outpoint(args.funding_outpoint)
    return kwargs


def cmd_build_chain(args) -> int:
    wallet = _load_wallet(args) if args.custody_keys else None
    chain = compose.build_chain(Mechanism(args.mechanism), args.length,
                                args.amount, fee=args.fee,
                                **_chain_build_kwargs(args, wallet))
    doc = _chain_json(chain)
    if args.graph:
        doc["graph"] = json.loads(compose.chain_graph(chain).to_json())
        doc["tree"] = compose.chain_graph(chain).render()
    _emit(doc)
    return 0


def cmd_build_disjoint(args) -> int:
    wallet = _load_wallet(args) if args.custody_keys else None

    def branch(spec: str, label: str) -> list[TxOutput]:
        try:
            amount_text, script_hex = spec.split(":", 1)
            return [TxOutput(Amount(int(amount_text)),
                             Script(_parse_hex(script_hex, label)))]
        except ValueError:
            raise InputError(f"{label} must look like amount:scripthex")

    kwargs = {
        "custody": _policy(args.custody, wallet, CustodialPolicy, "--custody"),
        "custodial_keys": _custodial_privs(args, wallet) if wallet else [],
        "style": args.style,
    }
    if args.mechanism == "deleted-key":
        m, n = (int(x) for x in args.enforcement_size.split(":", 1))
        kwargs["enforcement_size"] = (m, n)
        kwargs["rng"] = random.Random(args.seed)
        if args.funding_outpoint:
            kwargs["funding_outpoint"] = _outpoint(args.funding_outpoint)
    dis = compose.build_disjoint(
        Mechanism(args.mechanism), args.amount,
        (branch(args.branch_a, "--branch-a"), branch(args.branch_b, "--branch-b")),
        **kwargs)
    _emit({
        "mechanism": dis.mechanism.value,
        "address": dis.deposit.address(),
        "witness_script": dis.deposit.witness_script.hex(),
        "rebindable": dis.rebindable,
        "branches": [tx.serialize().hex() for tx in dis.covenant_txs],
    })
    return 0


def cmd_build_multideposit(args) -> int:
    wallet = _load_wallet(args) if (args.custody_keys or args.wallet) else None
    amounts = [int(a) for a in args.amounts.split(",") if a]
    kwargs = {}
    if args.leaf_script:
        kwargs["leaf_script"] = Script(_parse_hex(args.leaf_script, "--leaf-script"))
    md = compose.build_multi_deposit(
        Mechanism(args.mechanism), amounts, args.refund_height,
        _pubkey(args.refund_key, wallet),
        custody=_policy(args.custody, wallet, CustodialPolicy, "--custody"),
        custodial_keys=_custodial_privs(args, wallet) if wallet else [],
        style=args.style, fee=args.fee, **kwargs)
    _emit({
        "mechanism": md.mechanism.value,
        "refund_height": md.refund_height,
        "deposits": [{
            "address": d.address(),
            "amount": a,
            "witness_script": d.witness_script.hex(),
            "covenant_tx": tx.serialize().hex(),
        } for d, a, tx in zip(md.deposits, md.amounts, md.covenant_txs)],
        "funding_outputs": [{"amount": int(o.amount), "script": o.script.hex()}
                            for o in md.funding_outputs()],
    })
    return 0


def cmd_fee_variants(args) -> int:
    wallet = _load_wallet(args) if args.custody_keys else None
    feerates = [int(r) for r in args.feerates.split(",") if r]
    variants = compose.enumerate_fee_variants(
        Mechanism(args.mechanism), args.length, args.amount, feerates,
        **_chain_build_kwargs(args, wallet))
    doc = {
        "count": len(variants),
        "variants": [{
            "feerates": list(v.feerates),
            "fees": list(v.fees),
            "entry_address": v.chain.entry_address(),
        } for v in variants],
    }
    if args.full:
        for item, v in zip(doc["variants"], variants):
            item["chain"] = _chain_json(v.chain)
    _emit(doc)
    return 0


def cmd_cpfp_child(args) -> int:
    wallet = _load_wallet(args)
    parent = _tx(args.parent_tx, "--parent-tx")
    deposit = _deposit_from_args(args, wallet)
    names = [n for n in args.keys.split(",") if n]
    keys = [_wallet_priv(wallet, n) for n in names]
    child = compose.cpfp_child(
        parent, args.vout, args.parent_fee, deposit, keys,
        Script(_parse_hex(args.dest, "--dest")), args.target_feerate)
    fee = int(parent.outputs[args.vout].amount) - sum(
        int(o.amount) for o in child.outputs)
    _emit({
        "child_tx": child.serialize().hex(),
        "child_fee": fee,
        "package_size": parent.size() + child.size(),
        "package_feerate": round((args.parent_fee + fee)
                                 / (parent.size() + child.size()), 4),
    })
    return 0


def cmd_simulate(args) -> int:
    scenario = load_scenario(_parse_json(_read_text(args.scenario, "scenario"),
                                         "scenario"))
    result = run_scenario(scenario)
    if args.trace:
        # one JSON record per line: every event, then a summary
        Path(args.trace).write_text(result.trace_jsonl())
    _emit({
        "scenario": scenario.name,
        "outcome": result.outcome,
        "ticks": result.trace["ticks"],
        "deposit": result.trace["deposit"],
        "theft": result.trace["theft"],
        "key_lifetimes": key_lifetime_report(result),
    })
    return 0


def cmd_prove(args) -> int:
    wallet = _load_wallet(args) if (args.wallet or os.environ.get(WALLET_ENV)) else None
    mechanism = Mechanism(args.mechanism)
    deposit = _deposit_from_args(args, wallet)
    if args.kind == "reserves":
        if not (args.deposit_outpoint and args.challenge and args.custody_keys):
            raise CliError("reserves proofs need --deposit-outpoint, --challenge, "
                           "and --custody-keys")
        bundle = mechanisms.prove(
            "reserves", mechanism, deposit=deposit,
            deposit_outpoint=_outpoint(args.deposit_outpoint),
            deposit_amount=Amount(args.amount),
            custodial_keys=_custodial_privs(args, wallet or {}),
            challenge=args.challenge.encode())
    else:
        tx = _tx(args.covenant_tx, "--covenant-tx")
        types = tuple(_sighash_type(t) for t in args.sighash_types.split(","))
        template = CovenantTemplate(tx, types, mechanism)
        sigs = []
        for spec in args.commitment_sig or []:
            der_hex, type_text, pub_text = spec.split(":", 2)
            sigs.append(CommitmentSignature(
                0, der_decode_signature(_parse_hex(der_hex, "--commitment-sig")),
                _sighash_type(type_text), _pubkey(pub_text, wallet)))
        seeds = None
        if args.seed_r and args.seed_s:
            seeds = SignatureSeeds(_parse_hex(args.seed_r, "--seed-r"),
                                   _parse_hex(args.seed_s, "--seed-s"))
        attestations = []
        for spec in args.attestation or []:
            enforcer, key_hex, tick_text = spec.split(":", 2)
            attestations.append({"enforcer": enforcer, "key": key_hex,
                                 "event": int(tick_text)})
        bundle = mechanisms.prove(
            "covenant", mechanism, template=template, deposit=deposit,
            deposit_amount=Amount(args.amount), commitment_sigs=tuple(sigs),
            seeds=seeds, branch_index=args.branch,
            deletion_attestations=attestations)
    text = bundle.to_json()
    if args.output:
        Path(args.output).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_verify_proof(args) -> int:
    bundle = ProofBundle(_parse_json(_read_text(args.bundle, "proof bundle"),
                                     "proof bundle"))
    check = verify_proof(bundle)
    _emit({"accepted": check.accepted,
           "failing_check": check.failing_check,
           "detail": check.detail})
    return 0 if check.accepted else 1


def cmd_size_report(args) -> int:
    mechanism = Mechanism(args.mechanism)
    sig = None
    if args.der:
        sig = der_decode_signature(_parse_hex(args.der, "--der"))
    _emit(size_report(mechanism, sig))
    return 0


# -- chain state commands


def _load_state(path: str) -> ChainState:
    try:
        return ChainState.load(_parse_json(_read_text(path, "chain state"),
                                           "chain state"))
    except ValueError as exc:
        raise InputError(f"chain state: {exc}")


def _save_state(path: str, state: ChainState) -> None:
    Path(path).write_text(json.dumps(state.dump(), sort_keys=True) + "\n")


def _grant_output(spec: str) -> TxOutput:
    try:
        target, amount_text = spec.rsplit(":", 1)
        amount = Amount(int(amount_text))
    except (ValueError, TxError):
        raise InputError("grant must look like p2wsh:hash:amount or scripthex:amount")
    if target.startswith("p2wsh:"):
        script_hash = _parse_hex(target[len("p2wsh:"):], "grant address")
        if len(script_hash) != 32:
            raise InputError("grant address hash must be 32 bytes")
        return TxOutput(amount, Script(b"\x00\x20" + script_hash))
    return TxOutput(amount, Script(_parse_hex(target, "grant script")))


def cmd_chain_init(args) -> int:
    state = ChainState(confirmation_depth=args.confirmation_depth)
    outputs = [_grant_output(g) for g in args.grant or []]
    if outputs:
        state.mine_block(coinbase_outputs=outputs)
    _save_state(args.state, state)
    _emit({"state": args.state, "height": state.height,
           "utxos": len(state.utxos)})
    return 0


def cmd_chain_submit(args) -> int:
    state = _load_state(args.state)
    result = state.submit(_tx(args.tx))
    _save_state(args.state, state)
    _emit({"status": result.status, "reason": result.reason,
           "detail": result.detail,
           "replaced": [t.hex() for t in result.replaced]})
    return 0 if result.ok else 1


def cmd_chain_mine(args) -> int:
    state = _load_state(args.state)
    block = state.mine_block(capacity=args.capacity)
    _save_state(args.state, state)
    _emit(block.log_entry())
    return 0


def cmd_chain_state(args) -> int:
    state = _load_state(args.state)
    _emit({
        "height": state.height,
        "utxos": len(state.utxos),
        "balance": state.balance(),
        "mempool": [e.tx.display_txid() for e in state.mempool.values()],
        "blocks": [b.log_entry() for b in state.blocks],
    })
    return 0


# ---------------------------------------------------------------------------
# Parser


def _add_wallet_arg(p: argparse.ArgumentParser) -> None:
    p.add_argument("--wallet", help=f"wallet file (default ${WALLET_ENV})")


def _add_deposit_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--mechanism", required=True,
                   choices=[m.value for m in Mechanism])
    p.add_argument("--enforcement", help="m:key,key,...")
    p.add_argument("--custody", help="j:key,key,...")
    p.add_argument("--recovered-key", action="append",
                   help="recovered branch key (repeatable)")
    p.add_argument("--ctv-hash", action="append",
                   help="template hash hex (repeatable)")
    p.add_argument("--timelock", type=int, help="absolute height lock")
    p.add_argument("--refund", help="height:key refund arm")


def _add_chain_build_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--mechanism", required=True,
                   choices=[m.value for m in Mechanism])
    p.add_argument("--amount", type=int, required=True)
    p.add_argument("--custody", help="j:key,key,...")
    p.add_argument("--custody-keys", help="wallet key names for witnesses")
    p.add_argument("--style", choices=["nums", "seeded"], default="nums")
    p.add_argument("--enforcement-size", default="2:3", help="m:n (deleted-key)")
    p.add_argument("--funding-outpoint", help="txid:vout (deleted-key)")
    p.add_argument("--seed", type=int, default=0, help="rng seed (deleted-key)")
    p.add_argument("--leaf-script", help="final payout script hex")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="covenantkit",
        description="construct, enforce, and verify transaction covenants "
                    "against a simulated chain")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("keygen", help="add a key to the wallet")
    _add_wallet_arg(p)
    p.add_argument("--name", required=True)
    p.add_argument("--seed", type=int, help="deterministic key (testing only)")
    p.set_defaults(func=cmd_keygen)

    p = sub.add_parser("export", help="print the wallet without secrets")
    _add_wallet_arg(p)
    p.add_argument("--public", action="store_true")
    p.set_defaults(func=cmd_export)

    p = sub.add_parser("address", help="deposit address and witness script")
    _add_wallet_arg(p)
    _add_deposit_args(p)
    p.set_defaults(func=cmd_address)

    p = sub.add_parser("ctv-hash", help="template hash of a transaction")
    p.add_argument("--tx", required=True, help="transaction hex")
    p.add_argument("--input", type=int, default=0)
    p.set_defaults(func=cmd_ctv_hash)

    p = sub.add_parser("nums-sig", help="smallest verifying signature and its key")
    p.add_argument("--digest", required=True, help="32-byte digest hex")
    p.set_defaults(func=cmd_nums_sig)

    p = sub.add_parser("seeded-sig", help="seed-derived signature and its key")
    p.add_argument("--digest", required=True)
    p.add_argument("--seed-r", required=True, help="seed hex for r")
    p.add_argument("--seed-s", required=True, help="seed hex for s")
    p.set_defaults(func=cmd_seeded_sig)

    p = sub.add_parser("sign-commitment", help="sign a covenant input")
    _add_wallet_arg(p)
    p.add_argument("--key", required=True, help="wallet key name")
    p.add_argument("--tx", required=True, help="transaction hex")
    p.add_argument("--input", type=int, default=0)
    p.add_argument("--witness-script", required=True)
    p.add_argument("--amount", type=int, required=True)
    p.add_argument("--sighash", default="all", help="all|none|single[|acp][|noinput]")
    p.set_defaults(func=cmd_sign_commitment)

    p = sub.add_parser("build-chain", help="linear covenant chain")
    _add_wallet_arg(p)
    _add_chain_build_args(p)
    p.add_argument("--length", type=int, required=True)
    p.add_argument("--fee", type=int, default=1000)
    p.add_argument("--graph", action="store_true", help="include graph json + tree")
    p.set_defaults(func=cmd_build_chain)

    p = sub.add_parser("build-disjoint", help="either-branch covenant")
    _add_wallet_arg(p)
    _add_chain_build_args(p)
    p.add_argument("--branch-a", required=True, help="amount:scripthex")
    p.add_argument("--branch-b", required=True, help="amount:scripthex")
    p.set_defaults(func=cmd_build_disjoint)

    p = sub.add_parser("build-multideposit", help="deposits with a CLTV refund arm")
    _add_wallet_arg(p)
    p.add_argument("--mechanism", required=True,
                   choices=[Mechanism.RECOVERED_KEY.value, Mechanism.CTV.value])
    p.add_argument("--amounts", required=True, help="comma-separated sats")
    p.add_argument("--refund-height", type=int, required=True)
    p.add_argument("--refund-key", required=True)
    p.add_argument("--custody", help="j:key,key,...")
    p.add_argument("--custody-keys", help="wallet key names")
    p.add_argument("--style", choices=["nums", "seeded"], default="nums")
    p.add_argument("--fee", type=int, default=1000)
    p.add_argument("--leaf-script", help="final payout script hex")
    p.set_defaults(func=cmd_build_multideposit)

    p = sub.add_parser("fee-variants", help="one chain per feerate combination")
    _add_wallet_arg(p)
    _add_chain_build_args(p)
    p.add_argument("--length", type=int, required=True)
    p.add_argument("--feerates", required=True, help="comma-separated sat/byte")
    p.add_argument("--full", action="store_true", help="include full chains")
    p.set_defaults(func=cmd_fee_variants)

    p = sub.add_parser("cpfp-child", help="child that pays for its parent")
    _add_wallet_arg(p)
    _add_deposit_args(p)
    p.add_argument("--parent-tx", required=True)
    p.add_argument("--vout", type=int, default=0)
    p.add_argument("--parent-fee", type=int, required=True)
    p.add_argument("--keys", required=True, help="wallet key names to sign with")
    p.add_argument("--dest", required=True, help="child payout script hex")
    p.add_argument("--target-feerate", type=float, required=True)
    p.set_defaults(func=cmd_cpfp_child)

    p = sub.add_parser("simulate", help="run a ceremony scenario")
    p.add_argument("--scenario", required=True, help="scenario json file")
    p.add_argument("--trace", help="write the full trace here")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("prove", help="build a proof bundle")
    _add_wallet_arg(p)
    _add_deposit_args(p)
    p.add_argument("--kind", required=True, choices=["covenant", "reserves"])
    p.add_argument("--amount", type=int, required=True, help="deposit amount")
    p.add_argument("--covenant-tx", help="covenant transaction hex")
    p.add_argument("--sighash-types", default="all", help="comma-separated")
    p.add_argument("--commitment-sig", action="append",
                   help="der:sighash:pubkey (repeatable)")
    p.add_argument("--seed-r")
    p.add_argument("--seed-s")
    p.add_argument("--branch", type=int, default=0)
    p.add_argument("--attestation", action="append",
                   help="enforcer:keyhex:tick (repeatable)")
    p.add_argument("--deposit-outpoint", help="txid:vout (reserves)")
    p.add_argument("--challenge", help="challenge text (reserves)")
    p.add_argument("--custody-keys", help="wallet key names (reserves)")
    p.add_argument("--output", help="write the bundle here instead of stdout")
    p.set_defaults(func=cmd_prove)

    p = sub.add_parser("verify-proof", help="check a proof bundle")
    p.add_argument("--bundle", required=True, help="bundle json file")
    p.set_defaults(func=cmd_verify_proof)

    p = sub.add_parser("size-report", help="commitment size accounting")
    p.add_argument("--mechanism", required=True,
                   choices=[m.value for m in Mechanism])
    p.add_argument("--der", help="DER signature hex (non-ctv mechanisms)")
    p.set_defaults(func=cmd_size_report)

    p = sub.add_parser("chain", help="simulated chain state")
    chain_sub = p.add_subparsers(dest="chain_command", required=True)

    c = chain_sub.add_parser("init", help="create a chain state file")
    c.add_argument("--state", required=True)
    c.add_argument("--confirmation-depth", type=int, default=6)
    c.add_argument("--grant", action="append",
                   help="address:amount coinbase grant (repeatable)")
    c.set_defaults(func=cmd_chain_init)

    c = chain_sub.add_parser("submit", help="submit a transaction")
    c.add_argument("--state", required=True)
    c.add_argument("--tx", required=True, help="transaction hex")
    c.set_defaults(func=cmd_chain_submit)

    c = chain_sub.add_parser("mine", help="mine a block from the mempool")
    c.add_argument("--state", required=True)
    c.add_argument("--capacity", type=int, help="block capacity in bytes")
    c.set_defaults(func=cmd_chain_mine)

    c = chain_sub.add_parser("state", help="print a chain summary")
    c.add_argument("--state", required=True)
    c.set_defaults(func=cmd_chain_state)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (TxError, SighashError, CryptoError, CovenantError,
            ProtocolError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
