"""Covenant mechanisms: deposit scripts, commitment signatures, proofs.

Three ways to bind a deposit to a pre-agreed spending transaction:

  deleted-key    an m-of-n set of ephemeral enforcement keys signs the
                 covenant transaction, then every private key is deleted;
                 script: m <P_1..P_n> n CHECKMULTISIGVERIFY <custody>
  recovered-key  the enforcement key is *derived from* the signature via
                 public-key recovery (NUMS or seeded values), so no
                 private key ever exists;
                 script: <P> CHECKSIGVERIFY <custody>
  ctv            the deposit script pins the spending transaction's
                 template hash directly;
                 script: <custody-VERIFY> <hash32> CHECKTEMPLATEVERIFY

Deposits optionally prepend an absolute-height timelock clause and wrap
everything in an IF/ELSE refund branch (time-locked single-key escape
hatch). Disjoint variants commit to two alternative branches: two
enforcement keys in IF/ELSE arms, or two template hashes before a single
CHECKTEMPLATEVERIFY.

Proof bundles are JSON documents carrying hex transactions, signatures,
seeds, and the witness script with a parsed opcode listing; verify_proof
re-derives everything and rejects with the name of the first failing
check. Reserves proofs embed a null-outpoint commitment input, which makes
them verifiable off-chain yet unconditionally invalid on-chain.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence

from . import curvecrypto
from .curvecrypto import (CryptoError, EcdsaSignature, PrivateKey, PublicKey,
                          SignatureSeeds, der_decode_signature,
                          der_encode_signature, nums_signature,
                          recover_pubkeys, seeded_signature)
from .sighash import (SIGHASH_ALL, SighashError, SigHashType,
                      SpentOutputContext, ctv_hash, sighash_digest)
from .txcore import (Amount, NULL_OUTPOINT, Op, OutPoint, Script, Transaction,
                     TxInput, TxOutput, deserialize, p2wsh_address,
                     p2wsh_script, push_int, script_num, serialize, sha256)

__all__ = [
    "Mechanism", "EnforcementPolicy", "CustodialPolicy", "RefundPath",
    "Deposit", "CovenantTemplate", "CommitmentSignature", "CovenantError",
    "build_deposit", "deposit_address", "sign_commitment",
    "build_recovered_key_covenant", "sign_custodial", "spend_witness",
    "spend_deposit", "ctv_hash", "prove", "verify_proof", "ProofBundle",
    "ProofCheck", "size_report",
]


class CovenantError(ValueError):
    pass


class Mechanism(str, Enum):
    DELETED_KEY = "deleted-key"
    RECOVERED_KEY = "recovered-key"
    CTV = "ctv"


def _check_policy(threshold: int, keys: Sequence[PublicKey], label: str) -> None:
    if not 1 <= threshold <= len(keys) <= 15:
        raise CovenantError(
            f"{label} policy needs 1 <= threshold <= keys <= 15, "
            f"got {threshold} of {len(keys)}")
    if len(set(k.encode() for k in keys)) != len(keys):
        raise CovenantError(f"duplicate {label} key")


@dataclass(frozen=True)
class EnforcementPolicy:
    threshold: int
    keys: tuple[PublicKey, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "keys", tuple(self.keys))
        _check_policy(self.threshold, self.keys, "enforcement")


@dataclass(frozen=True)
class CustodialPolicy:
    threshold: int
    keys: tuple[PublicKey, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "keys", tuple(self.keys))
        _check_policy(self.threshold, self.keys, "custodial")


@dataclass(frozen=True)
class RefundPath:
    height: int
    key: PublicKey


@dataclass(frozen=True)
class CovenantTemplate:
    """A pre-agreed spending transaction plus the sighash type class of
    each input's commitment signature."""

    transaction: Transaction
    sighash_types: tuple[SigHashType, ...]
    mechanism: Mechanism

    def __post_init__(self) -> None:
        object.__setattr__(self, "sighash_types", tuple(self.sighash_types))
        if len(self.sighash_types) != len(self.transaction.inputs):
            raise CovenantError("one sighash type per input required")
        if self.mechanism is Mechanism.RECOVERED_KEY:
            for t in self.sighash_types:
                if not t.noinput:
                    raise CovenantError(
                        "recovered-key commitments must not commit to the txid; "
                        "use a NOINPUT-flagged sighash type")

    def ctv_hash(self, input_index: int = 0) -> bytes:
        return ctv_hash(self.transaction, input_index)

    def digest(self, input_index: int, ctx: SpentOutputContext) -> bytes:
        return sighash_digest(self.transaction, input_index, ctx,
                              self.sighash_types[input_index])


@dataclass(frozen=True)
class CommitmentSignature:
    input_index: int
    signature: EcdsaSignature
    sighash_type: SigHashType
    signer: PublicKey

    def witness_bytes(self) -> bytes:
        return der_encode_signature(self.signature) + bytes([self.sighash_type.to_byte()])


# ---------------------------------------------------------------------------
# Deposit script composition


def _custodial_items(custody: CustodialPolicy, verify: bool) -> list:
    suffix = Op.OP_CHECKSIGVERIFY if verify else Op.OP_CHECKSIG
    if custody.threshold == 1 and len(custody.keys) == 1:
        return [custody.keys[0].encode(), suffix]
    suffix = Op.OP_CHECKMULTISIGVERIFY if verify else Op.OP_CHECKMULTISIG
    return [push_int(custody.threshold),
            *(k.encode() for k in custody.keys),
            push_int(len(custody.keys)), suffix]


def _enforcement_items(policy: EnforcementPolicy, final: bool) -> list:
    op = Op.OP_CHECKMULTISIG if final else Op.OP_CHECKMULTISIGVERIFY
    return [push_int(policy.threshold),
            *(k.encode() for k in policy.keys),
            push_int(len(policy.keys)), op]


def _recovered_items(keys: tuple[PublicKey, ...], final: bool) -> list:
    op = Op.OP_CHECKSIG if final else Op.OP_CHECKSIGVERIFY
    if len(keys) == 1:
        return [keys[0].encode(), op]
    if len(keys) == 2:
        return [Op.OP_IF, keys[0].encode(), op,
                Op.OP_ELSE, keys[1].encode(), op, Op.OP_ENDIF]
    raise CovenantError("recovered-key deposits support one key or two disjoint branches")


def _ctv_items(hashes: tuple[bytes, ...]) -> list:
    for h in hashes:
        if len(h) != 32:
            raise CovenantError("template hash must be 32 bytes")
    if len(hashes) == 1:
        return [hashes[0], Op.OP_CHECKTEMPLATEVERIFY]
    if len(hashes) == 2:
        return [Op.OP_IF, hashes[0], Op.OP_ELSE, hashes[1], Op.OP_ENDIF,
                Op.OP_CHECKTEMPLATEVERIFY]
    raise CovenantError("ctv deposits support one hash or two disjoint branches")


@dataclass(frozen=True)
class Deposit:
    """A covenant-encumbered deposit: the witness script plus everything
    needed to re-derive it."""

    mechanism: Mechanism
    witness_script: Script
    enforcement: Optional[EnforcementPolicy] = None
    custody: Optional[CustodialPolicy] = None
    recovered_keys: tuple[PublicKey, ...] = ()
    ctv_hashes: tuple[bytes, ...] = ()
    timelock_height: Optional[int] = None
    refund: Optional[RefundPath] = None

    def address(self) -> str:
        return p2wsh_address(self.witness_script)

    def lock_script(self) -> Script:
        return p2wsh_script(self.witness_script)

    def output(self, amount: Amount) -> TxOutput:
        return TxOutput(Amount(amount), self.lock_script())


def build_deposit(mechanism: Mechanism,
                  enforcement: Optional[EnforcementPolicy] = None,
                  custody: Optional[CustodialPolicy] = None,
                  *,
                  recovered_keys: Sequence[PublicKey] = (),
                  ctv_hashes: Sequence[bytes] = (),
                  timelock_height: Optional[int] = None,
                  refund: Optional[RefundPath] = None) -> Deposit:
    """Compose the deposit witness script for a mechanism.

    Clauses chain through VERIFY opcodes (no script nesting): an optional
    absolute timelock, the mechanism's commitment clause, and the custodial
    clause. custody=None builds an enforcement-only script, used for size
    and signature-operation accounting.
    """
    mechanism = Mechanism(mechanism)
    items: list = []
    if timelock_height is not None:
        if timelock_height <= 0:
            raise CovenantError("timelock height must be positive")
        items += [script_num(timelock_height), Op.OP_CHECKLOCKTIMEVERIFY, Op.OP_DROP]

    if mechanism is Mechanism.DELETED_KEY:
        if enforcement is None:
            raise CovenantError("deleted-key deposits need an enforcement policy")
        items += _enforcement_items(enforcement, final=custody is None)
        if custody is not None:
            items += _custodial_items(custody, verify=False)
    elif mechanism is Mechanism.RECOVERED_KEY:
        if not recovered_keys:
            raise CovenantError("recovered-key deposits need the recovered key list")
        items += _recovered_items(tuple(recovered_keys), final=custody is None)
        if custody is not None:
            items += _custodial_items(custody, verify=False)
    else:
        if not ctv_hashes:
            raise CovenantError("ctv deposits need the template hash list")
        if custody is not None:
            items += _custodial_items(custody, verify=True)
        items += _ctv_items(tuple(ctv_hashes))

    if refund is not None:
        if refund.height <= 0:
            raise CovenantError("refund height must be positive")
        items = ([Op.OP_IF] + items
                 + [Op.OP_ELSE, script_num(refund.height), Op.OP_CHECKLOCKTIMEVERIFY,
                    Op.OP_DROP, refund.key.encode(), Op.OP_CHECKSIG, Op.OP_ENDIF])

    deposit = Deposit(mechanism, Script.from_ops(items), enforcement, custody,
                      tuple(recovered_keys), tuple(bytes(h) for h in ctv_hashes),
                      timelock_height, refund)
    deposit.address()  # validates witness script size bounds
    return deposit


def deposit_address(enforcement: Optional[EnforcementPolicy],
                    custody: Optional[CustodialPolicy],
                    mechanism: Mechanism, **extras) -> tuple[str, Script]:
    """Address and witness script for a covenant deposit."""
    deposit = build_deposit(mechanism, enforcement, custody, **extras)
    return deposit.address(), deposit.witness_script


# ---------------------------------------------------------------------------
# Commitment signatures


def sign_commitment(template: CovenantTemplate, key: PrivateKey,
                    ctx: SpentOutputContext,
                    policy: Optional[EnforcementPolicy] = None,
                    input_index: int = 0) -> CommitmentSignature:
    """Sign one covenant input with an enforcement private key."""
    pub = key.public_key()
    if policy is not None and pub not in policy.keys:
        raise CovenantError("signing key is not part of the enforcement policy")
    digest = template.digest(input_index, ctx)
    return CommitmentSignature(input_index, curvecrypto.sign(key, digest),
                               template.sighash_types[input_index], pub)


def build_recovered_key_covenant(template: CovenantTemplate,
                                 ctx: SpentOutputContext,
                                 style: str = "nums",
                                 seeds: Optional[SignatureSeeds] = None,
                                 input_index: int = 0
                                 ) -> tuple[CommitmentSignature, PublicKey]:
    """Derive the enforcement key *from* a signature over the template.

    style="nums" walks r up from (1, 1); style="seeded" uses seed hashes.
    The returned public key has no known private key.
    """
    sighash_type = template.sighash_types[input_index]
    if not sighash_type.noinput:
        raise CovenantError("recovered-key commitments require a NOINPUT-flagged type")
    digest = template.digest(input_index, ctx)
    if style == "nums":
        sig, pub = nums_signature(digest)
    elif style == "seeded":
        if seeds is None:
            raise CovenantError("seeded style needs SignatureSeeds")
        sig, pub = seeded_signature(seeds, digest)
    else:
        raise CovenantError(f"unknown recovered-key style {style!r}")
    return CommitmentSignature(input_index, sig, sighash_type, pub), pub


def sign_custodial(tx: Transaction, input_index: int, deposit: Deposit,
                   ctx: SpentOutputContext, keys: Sequence[PrivateKey],
                   sighash_type: SigHashType = SigHashType(SIGHASH_ALL)
                   ) -> list[bytes]:
    """Custodial witness signatures, ordered to match the policy key list;
    takes the first threshold signers in key order."""
    if deposit.custody is None:
        return []
    by_pub = {key.public_key().encode(): key for key in keys}
    ordered = [by_pub[pub.encode()] for pub in deposit.custody.keys
               if pub.encode() in by_pub]
    if len(ordered) < deposit.custody.threshold:
        raise CovenantError(
            f"need {deposit.custody.threshold} custodial keys, have {len(ordered)}")
    digest = sighash_digest(tx, input_index, ctx, sighash_type)
    out = []
    for key in ordered[:deposit.custody.threshold]:
        out.append(der_encode_signature(curvecrypto.sign(key, digest))
                   + bytes([sighash_type.to_byte()]))
    return out


def spend_witness(deposit: Deposit,
                  commitment_items: Sequence[bytes] = (),
                  custodial_items: Sequence[bytes] = (),
                  branch_index: Optional[int] = None,
                  refund_item: Optional[bytes] = None) -> tuple[bytes, ...]:
    """Assemble the witness stack for a deposit spend.

    Stack order follows clause execution: items consumed first go last.
    branch_index selects the IF (0) or ELSE (1) arm of disjoint deposits;
    refund_item, when given, takes the refund path instead.
    """
    if refund_item is not None:
        if deposit.refund is None:
            raise CovenantError("deposit has no refund path")
        return (refund_item, b"", deposit.witness_script.data)

    items: list[bytes] = []
    branch = b"\x01" if branch_index == 0 else b""
    disjoint = (len(deposit.recovered_keys) == 2 or len(deposit.ctv_hashes) == 2)
    if disjoint and branch_index is None:
        raise CovenantError("disjoint deposit needs branch_index")

    if deposit.mechanism is Mechanism.CTV:
        # custody clause runs first (its items on top), selector below it
        if disjoint:
            items.append(branch)
        items += list(custodial_items)
    else:
        # custody clause runs last: its items sit at the bottom
        items += list(custodial_items)
        items += list(commitment_items)
        if disjoint:
            items.append(branch)
    if deposit.refund is not None:
        items.append(b"\x01")
    items.append(deposit.witness_script.data)
    return tuple(items)


def spend_deposit(deposit: Deposit, outpoint: OutPoint, amount: Amount,
                  outputs: Sequence[TxOutput], *,
                  enforcement_keys: Sequence[PrivateKey] = (),
                  commitment_sigs: Sequence[CommitmentSignature] = (),
                  custodial_keys: Sequence[PrivateKey] = (),
                  sequence: int = 0xFFFFFFFF,
                  locktime: int = 0,
                  version: int = 2,
                  branch_index: Optional[int] = None) -> Transaction:
    """Build and fully sign a transaction spending a covenant deposit.

    Enforcement evidence comes either as ready commitment signatures or as
    live private keys (the theft-simulation path signs with leaked keys).
    """
    tx = Transaction(version,
                     (TxInput(outpoint, sequence),),
                     tuple(outputs), locktime)
    ctx = SpentOutputContext(deposit.witness_script, Amount(amount))

    commitment_items: list[bytes] = []
    if deposit.mechanism is Mechanism.DELETED_KEY:
        if commitment_sigs:
            ordered = sorted(commitment_sigs,
                             key=lambda s: deposit.enforcement.keys.index(s.signer))
            commitment_items = [s.witness_bytes() for s in ordered]
        else:
            policy = deposit.enforcement
            by_pub = {k.public_key().encode(): k for k in enforcement_keys}
            ordered_keys = [by_pub[p.encode()] for p in policy.keys if p.encode() in by_pub]
            if len(ordered_keys) < policy.threshold:
                raise CovenantError(
                    f"need {policy.threshold} enforcement keys, have {len(ordered_keys)}")
            all_type = SigHashType(SIGHASH_ALL)
            digest = sighash_digest(tx, 0, ctx, all_type)
            for key in ordered_keys[:policy.threshold]:
                commitment_items.append(der_encode_signature(curvecrypto.sign(key, digest))
                                        + bytes([all_type.to_byte()]))
    elif deposit.mechanism is Mechanism.RECOVERED_KEY:
        if not commitment_sigs:
            raise CovenantError("recovered-key spends need the commitment signature")
        commitment_items = [s.witness_bytes() for s in commitment_sigs]

    custodial_items = sign_custodial(tx, 0, deposit, ctx, custodial_keys)
    witness = spend_witness(deposit, commitment_items, custodial_items, branch_index)
    return Transaction(version,
                       (TxInput(outpoint, sequence, witness),),
                       tuple(outputs), locktime)


# ---------------------------------------------------------------------------
# Proof bundles


@dataclass(frozen=True)
class ProofCheck:
    accepted: bool
    failing_check: Optional[str] = None
    detail: str = ""


@dataclass(frozen=True)
class ProofBundle:
    payload: dict

    @property
    def kind(self) -> str:
        return self.payload.get("kind", "")

    @property
    def mechanism(self) -> str:
        return self.payload.get("mechanism", "")

    def to_json(self) -> str:
        return json.dumps(self.payload, sort_keys=True, indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "ProofBundle":
        payload = json.loads(text)
        if not isinstance(payload, dict):
            raise CovenantError("proof bundle must be a JSON object")
        return cls(payload)


def _policy_json(policy) -> Optional[dict]:
    if policy is None:
        return None
    return {"threshold": policy.threshold,
            "keys": [k.encode().hex() for k in policy.keys]}


def _policy_from_json(obj, cls):
    if obj is None:
        return None
    return cls(obj["threshold"],
               tuple(PublicKey.from_bytes(bytes.fromhex(h)) for h in obj["keys"]))


def _deposit_json(deposit: Deposit) -> dict:
    refund = None
    if deposit.refund is not None:
        refund = {"height": deposit.refund.height,
                  "key": deposit.refund.key.encode().hex()}
    return {
        "address": deposit.address(),
        "witness_script": deposit.witness_script.data.hex(),
        "witness_script_asm": deposit.witness_script.asm(),
        "enforcement": _policy_json(deposit.enforcement),
        "custody": _policy_json(deposit.custody),
        "recovered_keys": [k.encode().hex() for k in deposit.recovered_keys],
        "ctv_hashes": [h.hex() for h in deposit.ctv_hashes],
        "timelock_height": deposit.timelock_height,
        "refund": refund,
    }


def _deposit_from_json(mechanism: Mechanism, obj: dict) -> Deposit:
    refund = None
    if obj.get("refund"):
        refund = RefundPath(obj["refund"]["height"],
                            PublicKey.from_bytes(bytes.fromhex(obj["refund"]["key"])))
    return build_deposit(
        mechanism,
        _policy_from_json(obj.get("enforcement"), EnforcementPolicy),
        _policy_from_json(obj.get("custody"), CustodialPolicy),
        recovered_keys=tuple(PublicKey.from_bytes(bytes.fromhex(h))
                             for h in obj.get("recovered_keys", [])),
        ctv_hashes=tuple(bytes.fromhex(h) for h in obj.get("ctv_hashes", [])),
        timelock_height=obj.get("timelock_height"),
        refund=refund)


def prove(kind: str, mechanism: Mechanism, **evidence) -> ProofBundle:
    """Build a proof bundle.

    kind="covenant" shows a deposit is bound to its covenant transaction:
      deleted-key needs template, deposit, commitment_sigs, deposit_amount,
        and deletion_attestations (enforcer id, key hex, event index);
      recovered-key needs template, deposit, deposit_amount, plus either
        nums=(sig) or seeds=SignatureSeeds along with recovered_key;
      ctv needs template, deposit, and branch_index when disjoint.
    kind="reserves" shows custodial key possession without a spendable
    transaction: deposit, deposit_outpoint, deposit_amount, custodial_keys,
    challenge (bytes).
    """
    mechanism = Mechanism(mechanism)
    if kind == "covenant":
        return _prove_covenant(mechanism, **evidence)
    if kind == "reserves":
        return _prove_reserves(mechanism, **evidence)
    raise CovenantError(f"unknown proof kind {kind!r}")


def _prove_covenant(mechanism: Mechanism, *, template: CovenantTemplate,
                    deposit: Deposit, deposit_amount: Amount = Amount(0),
                    commitment_sigs: Sequence[CommitmentSignature] = (),
                    seeds: Optional[SignatureSeeds] = None,
                    recovered_key: Optional[PublicKey] = None,
                    branch_index: int = 0,
                    deletion_attestations: Sequence[dict] = ()) -> ProofBundle:
    payload = {
        "format": 1,
        "kind": "covenant",
        "mechanism": mechanism.value,
        "deposit": _deposit_json(deposit),
        "covenant_tx": serialize(template.transaction).hex(),
        "sighash_types": [t.to_byte() for t in template.sighash_types],
        "deposit_amount": int(deposit_amount),
        "branch_index": branch_index,
    }
    if mechanism is Mechanism.DELETED_KEY:
        payload["commitment_signatures"] = [
            {"input": s.input_index,
             "der": der_encode_signature(s.signature).hex(),
             "sighash_type": s.sighash_type.to_byte(),
             "pubkey": s.signer.encode().hex()}
            for s in commitment_sigs]
        payload["deletion_attestations"] = list(deletion_attestations)
    elif mechanism is Mechanism.RECOVERED_KEY:
        if not commitment_sigs:
            raise CovenantError("recovered-key proof needs the commitment signature")
        sig = commitment_sigs[0]
        payload["commitment_signatures"] = [
            {"input": sig.input_index,
             "der": der_encode_signature(sig.signature).hex(),
             "sighash_type": sig.sighash_type.to_byte(),
             "pubkey": sig.signer.encode().hex()}]
        payload["recovered_key"] = (recovered_key or sig.signer).encode().hex()
        if seeds is not None:
            payload["seeds"] = {"seed_r": seeds.seed_r.hex(),
                                "seed_s": seeds.seed_s.hex()}
    return ProofBundle(payload)


def _prove_reserves(mechanism: Mechanism, *, deposit: Deposit,
                    deposit_outpoint: OutPoint, deposit_amount: Amount,
                    custodial_keys: Sequence[PrivateKey],
                    challenge: bytes) -> ProofBundle:
    """Reserves transaction: input 0 is the null-outpoint commitment input
    carrying the challenge hash, input 1 spends the deposit with custodial
    signatures. The null input makes the transaction unconditionally
    invalid on-chain while every signature still verifies off-chain."""
    challenge_input = TxInput(NULL_OUTPOINT, 0xFFFFFFFF, (sha256(challenge),))
    tx = Transaction(
        2,
        (challenge_input, TxInput(deposit_outpoint, 0xFFFFFFFF)),
        (TxOutput(Amount(deposit_amount), deposit.lock_script()),),
        0)
    ctx = SpentOutputContext(deposit.witness_script, Amount(deposit_amount))
    sigs = sign_custodial(tx, 1, deposit, ctx, custodial_keys)
    witness = tuple(sigs) + (deposit.witness_script.data,)
    tx = Transaction(
        2,
        (challenge_input, TxInput(deposit_outpoint, 0xFFFFFFFF, witness)),
        tx.outputs, 0)
    return ProofBundle({
        "format": 1,
        "kind": "reserves",
        "mechanism": mechanism.value,
        "deposit": _deposit_json(deposit),
        "deposit_amount": int(deposit_amount),
        "reserves_tx": serialize(tx).hex(),
        "challenge": challenge.hex(),
    })


def _reject(check: str, detail: str = "") -> ProofCheck:
    return ProofCheck(False, check, detail)


def verify_proof(bundle: ProofBundle) -> ProofCheck:
    """Re-derive every claim in a proof bundle; reject with the name of
    the first failing check."""
    try:
        return _verify_proof(bundle)
    except (CovenantError, SighashError, CryptoError, ValueError, KeyError,
            IndexError) as exc:
        return _reject("malformed-bundle", str(exc))


def _verify_proof(bundle: ProofBundle) -> ProofCheck:
    payload = bundle.payload
    mechanism = Mechanism(payload["mechanism"])
    deposit = _deposit_from_json(mechanism, payload["deposit"])
    recorded_script = bytes.fromhex(payload["deposit"]["witness_script"])
    if deposit.witness_script.data != recorded_script:
        return _reject("script-mismatch",
                       "witness script does not re-derive from the stated policies")
    if deposit.address() != payload["deposit"]["address"]:
        return _reject("address-mismatch",
                       "address is not the script hash of the witness script")
    if bundle.kind == "covenant":
        return _verify_covenant(payload, mechanism, deposit)
    if bundle.kind == "reserves":
        return _verify_reserves(payload, mechanism, deposit)
    return _reject("malformed-bundle", f"unknown kind {bundle.kind!r}")


def _verify_covenant(payload: dict, mechanism: Mechanism,
                     deposit: Deposit) -> ProofCheck:
    tx = deserialize(bytes.fromhex(payload["covenant_tx"]))
    types = tuple(SigHashType.from_byte(b) for b in payload["sighash_types"])
    template = CovenantTemplate(tx, types, mechanism)
    amount = Amount(payload["deposit_amount"])
    ctx = SpentOutputContext(deposit.witness_script, amount)

    if mechanism is Mechanism.CTV:
        want = template.ctv_hash(0)
        hashes = deposit.ctv_hashes
        index = payload.get("branch_index", 0)
        if index >= len(hashes) or hashes[index] != want:
            return _reject("ctv-mismatch",
                           "covenant transaction does not hash to the committed template")
        return ProofCheck(True)

    sigs = payload["commitment_signatures"]
    if mechanism is Mechanism.RECOVERED_KEY:
        entry = sigs[0]
        sig = der_decode_signature(bytes.fromhex(entry["der"]))
        digest = template.digest(entry["input"], ctx)
        if "seeds" in payload:
            seeds = SignatureSeeds(bytes.fromhex(payload["seeds"]["seed_r"]),
                                   bytes.fromhex(payload["seeds"]["seed_s"]))
            reseeded, _ = seeded_signature(seeds, digest)
            if (reseeded.r, reseeded.s) != (sig.r, sig.s):
                return _reject("seed-mismatch",
                               "signature does not re-derive from the stated seeds")
        claimed = PublicKey.from_bytes(bytes.fromhex(payload["recovered_key"]))
        candidates = recover_pubkeys(digest, sig)
        if claimed not in candidates:
            return _reject("recovered-key-mismatch",
                           "claimed key is not recoverable from the signature")
        index = payload.get("branch_index", 0)
        if index >= len(deposit.recovered_keys) or deposit.recovered_keys[index] != claimed:
            return _reject("recovered-key-mismatch",
                           "recovered key is not the one committed in the script")
        return ProofCheck(True)

    # deleted-key
    policy = deposit.enforcement
    enforcement_keys = {k.encode() for k in policy.keys}
    seen = set()
    for entry in sigs:
        pub = PublicKey.from_bytes(bytes.fromhex(entry["pubkey"]))
        if pub.encode() not in enforcement_keys:
            return _reject("unknown-signer",
                           "commitment signer is outside the enforcement policy")
        sig = der_decode_signature(bytes.fromhex(entry["der"]))
        digest = sighash_digest(tx, entry["input"], ctx,
                                SigHashType.from_byte(entry["sighash_type"]))
        if not curvecrypto.verify(pub, digest, sig):
            return _reject("commitment-signature-invalid",
                           f"signature by {entry['pubkey'][:16]} does not verify")
        seen.add(pub.encode())
    if len(seen) < policy.threshold:
        return _reject("commitment-quorum",
                       f"only {len(seen)} of {policy.threshold} required signers")
    attested = set()
    for att in payload.get("deletion_attestations", []):
        key = bytes.fromhex(att["key"])
        if key not in enforcement_keys:
            return _reject("attestation-unknown-key",
                           "attestation names a key outside the enforcement policy")
        attested.add(key)
    # theft needs threshold surviving keys, so soundness requires
    # n - threshold + 1 attested deletions
    needed = len(policy.keys) - policy.threshold + 1
    if len(attested) < needed:
        return _reject("attestation-missing",
                       f"{len(attested)} deletion attestations, need {needed}")
    return ProofCheck(True)


def _verify_reserves(payload: dict, mechanism: Mechanism,
                     deposit: Deposit) -> ProofCheck:
    tx = deserialize(bytes.fromhex(payload["reserves_tx"]))
    if len(tx.inputs) < 2 or not tx.inputs[0].previous.is_null():
        return _reject("missing-null-input",
                       "reserves transaction must lead with the null commitment input")
    challenge = bytes.fromhex(payload["challenge"])
    if tx.inputs[0].witness != (sha256(challenge),):
        return _reject("challenge-mismatch",
                       "commitment input does not carry the challenge hash")
    if deposit.custody is None:
        return _reject("malformed-bundle", "reserves proof needs a custodial policy")
    witness = tx.inputs[1].witness
    if not witness or witness[-1] != deposit.witness_script.data:
        return _reject("script-mismatch",
                       "deposit input witness does not reveal the witness script")
    amount = Amount(payload["deposit_amount"])
    ctx = SpentOutputContext(deposit.witness_script, amount)
    sig_items = witness[:-1]
    if len(sig_items) < deposit.custody.threshold:
        return _reject("custodial-quorum",
                       f"{len(sig_items)} signatures, need {deposit.custody.threshold}")
    keys = list(deposit.custody.keys)
    matched = 0
    for item in sig_items:
        if len(item) < 9:
            return _reject("custodial-signature-invalid", "signature item too short")
        sig = der_decode_signature(item[:-1])
        sighash_type = SigHashType.from_byte(item[-1])
        digest = sighash_digest(tx, 1, ctx, sighash_type)
        while keys:
            key = keys.pop(0)
            if curvecrypto.verify(key, digest, sig):
                matched += 1
                break
        else:
            return _reject("custodial-signature-invalid",
                           "signature does not verify against any remaining custodial key")
    if matched < deposit.custody.threshold:
        return _reject("custodial-quorum",
                       f"{matched} valid signatures, need {deposit.custody.threshold}")
    return ProofCheck(True)


# ---------------------------------------------------------------------------
# Size accounting


def size_report(mechanism: Mechanism,
                signature: Optional[EcdsaSignature] = None) -> dict:
    """Byte accounting for the commitment portion of each mechanism.

    Two conventions are reported because published figures mix them: the
    der convention counts the bare DER signature (70-72 bytes for random
    full-width components), while der_plus_type also counts the one-byte
    sighash type appended in the witness. The commitment portion adds the
    33-byte compressed key and the 1-byte CHECKSIG.
    """
    mechanism = Mechanism(mechanism)
    if mechanism is Mechanism.CTV:
        core = Script.from_ops([b"\x00" * 32, Op.OP_CHECKTEMPLATEVERIFY])
        return {"mechanism": mechanism.value,
                "template_hash": 32,
                "script_core": len(core.data),
                "signature_operations": 0}
    if signature is None:
        raise CovenantError("signature required for size accounting")
    der = len(der_encode_signature(signature))
    return {
        "mechanism": mechanism.value,
        "der": der,
        "der_plus_type": der + 1,
        "commitment_portion": {
            # DER + OP_CHECKSIG + compressed key
            "der_convention": der + 1 + 33,
            # same, counting the sighash type byte inside the signature
            "der_plus_type_convention": der + 1 + 33 + 1,
        },
        "signature_operations": 1,
        "note": "published totals use der_convention for the 104-106 range "
                "but der_plus_type_convention for the 43-byte minimal figure",
    }
