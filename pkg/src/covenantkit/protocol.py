"""Deposit ceremony simulator for the deleted-key mechanism.

A ceremony run is a deterministic event loop: one event processed per
tick, events held in a FIFO ready queue, and the only randomness drawn
from a seeded generator (key material plus a shuffle of each batch of
concurrent messages). Two runs with the same scenario produce
byte-identical traces.

Message flow:
  1. depositor announces the session (policies, amount);
  2. each enforcer generates an ephemeral key and returns its pubkey;
  3. depositor builds the deposit and the covenant template once every
     pubkey arrived, and shares the deposit details with everyone;
  4. each enforcer signs the covenant template and, in the same
     message, destroys its key and attests the deletion; the signature
     is forwarded to the custodians as well as the depositor;
  5. the depositor broadcasts the funding transaction only once a
     signature quorum is valid and all deletion confirmations arrived,
     then waits out the confirmation depth;
  6. after confirmation the depositor forwards the assembled covenant
     package to the custodians, who keep the first copy that verifies.

Adversarial deviations are per-actor behaviors injected by scenarios:
  stall               delay an enforcer's next reply by a fixed number
                      of ticks (re-queued one tick at a time), or
                      forever when the tick count is 0: every *other*
                      enforcer's key lifetime grows by exactly the
                      stall length, and an indefinite stall aborts the
                      ceremony outright
  leak-key            hand the adversary a copy of the key at generation
  withhold-signature  never sign and never delete the key
  withhold-forwarding depositor never forwards the package to custodians
  abort-deposit       depositor walks away before broadcasting

Outcome classification runs against the consensus validator, not
against bookkeeping: if the deposit confirmed and a theft transaction
built from the leaked keys is *accepted*, the run is funds-at-risk;
if the theft is rejected (or no key leaked) the covenant holds.
"""

from __future__ import annotations

import json
import random
from collections import deque
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence, Union

from . import curvecrypto
from .curvecrypto import EcdsaSignature, PrivateKey, PublicKey, der_encode_signature
from .mechanisms import (CommitmentSignature, CovenantTemplate, CustodialPolicy,
                         Deposit, EnforcementPolicy, Mechanism, build_deposit,
                         sign_custodial, spend_deposit, spend_witness)
from .sighash import SIGHASH_ALL, SigHashType, SpentOutputContext, sighash_digest
from .txcore import Amount, OutPoint, Transaction, TxInput, TxOutput, sha256
from .validator import ChainState

__all__ = [
    "KeyCell", "KeyDeletedError", "DeletionAttestation", "Deviation",
    "Scenario", "CeremonyResult", "ProtocolError", "run_scenario",
    "load_scenario", "key_lifetime_report",
]

FUNDING_FEE = Amount(1_000)
THEFT_FEE = Amount(1_000)
PREMINE = Amount(100_000_000)

DEVIATION_KINDS = ("stall", "leak-key", "withhold-signature",
                   "withhold-forwarding", "abort-deposit")

INDEFINITE = 0   # stall tick count meaning "forever"


class ProtocolError(ValueError):
    pass


class KeyDeletedError(RuntimeError):
    pass


@dataclass(frozen=True)
class DeletionAttestation:
    enforcer: str
    pubkey: str
    tick: int

    @property
    def fingerprint(self) -> str:
        return sha256(bytes.fromhex(self.pubkey))[:8].hex()

    def to_dict(self) -> dict:
        return {"enforcer": self.enforcer, "pubkey": self.pubkey,
                "fingerprint": self.fingerprint, "tick": self.tick}


class KeyCell:
    """One-way container for an ephemeral signing key. destroy() drops
    the only reference to the secret; signing afterwards raises."""

    __slots__ = ("_key", "pubkey")

    def __init__(self, key: PrivateKey):
        self._key: Optional[PrivateKey] = key
        self.pubkey: PublicKey = key.public_key()

    @property
    def alive(self) -> bool:
        return self._key is not None

    def sign(self, digest: bytes) -> EcdsaSignature:
        if self._key is None:
            raise KeyDeletedError("key was destroyed")
        return curvecrypto.sign(self._key, digest)

    def reveal(self) -> PrivateKey:
        if self._key is None:
            raise KeyDeletedError("key was destroyed")
        return self._key

    def destroy(self, enforcer: str, tick: int) -> DeletionAttestation:
        if self._key is None:
            raise KeyDeletedError("key was already destroyed")
        self._key = None
        return DeletionAttestation(enforcer, self.pubkey.encode().hex(), tick)


@dataclass(frozen=True)
class Deviation:
    actor: str
    kind: str
    ticks: int = INDEFINITE

    def __post_init__(self) -> None:
        if self.kind not in DEVIATION_KINDS:
            raise ProtocolError(f"unknown deviation kind {self.kind!r}")
        if self.kind == "stall" and self.ticks < 0:
            raise ProtocolError("stall ticks must be >= 0 (0 stalls forever)")


@dataclass(frozen=True)
class Scenario:
    name: str
    seed: int
    enforcement_threshold: int
    enforcement_count: int
    custody_threshold: int
    custody_count: int
    amount: int = 50_000
    confirmation_depth: int = 6
    timeout: int = 50
    mechanism: str = "deleted-key"
    deviations: tuple[Deviation, ...] = ()

    def __post_init__(self) -> None:
        if Mechanism(self.mechanism) is not Mechanism.DELETED_KEY:
            raise ProtocolError("the ceremony simulates the deleted-key mechanism")
        if not 1 <= self.enforcement_threshold <= self.enforcement_count <= 15:
            raise ProtocolError("bad enforcement policy bounds")
        if not 1 <= self.custody_threshold <= self.custody_count <= 15:
            raise ProtocolError("bad custody policy bounds")
        if self.timeout < 1:
            raise ProtocolError("timeout must be positive")
        object.__setattr__(self, "deviations", tuple(self.deviations))
        roles = ({"depositor"}
                 | {f"enforcer:{i}" for i in range(self.enforcement_count)}
                 | {f"custodian:{i}" for i in range(self.custody_count)})
        for d in self.deviations:
            if d.actor not in roles:
                raise ProtocolError(f"deviation names unknown role {d.actor!r}")

    @classmethod
    def from_dict(cls, obj: dict) -> "Scenario":
        if obj.get("format") != 1:
            raise ProtocolError("scenario format must be 1")
        deviations = tuple(
            Deviation(d["actor"], d["kind"], d.get("ticks", INDEFINITE))
            for d in obj.get("deviations", []))
        return cls(
            name=obj["name"],
            seed=obj["seed"],
            enforcement_threshold=obj["enforcement"]["threshold"],
            enforcement_count=obj["enforcement"]["count"],
            custody_threshold=obj["custody"]["threshold"],
            custody_count=obj["custody"]["count"],
            amount=obj.get("amount", 50_000),
            confirmation_depth=obj.get("confirmation_depth", 6),
            timeout=obj.get("timeout", 50),
            mechanism=obj.get("mechanism", "deleted-key"),
            deviations=deviations)

    def to_dict(self) -> dict:
        return {
            "format": 1,
            "name": self.name,
            "seed": self.seed,
            "mechanism": self.mechanism,
            "enforcement": {"threshold": self.enforcement_threshold,
                            "count": self.enforcement_count},
            "custody": {"threshold": self.custody_threshold,
                        "count": self.custody_count},
            "amount": self.amount,
            "confirmation_depth": self.confirmation_depth,
            "timeout": self.timeout,
            "deviations": [
                {"actor": d.actor, "kind": d.kind,
                 **({"ticks": d.ticks} if d.kind == "stall" else {})}
                for d in self.deviations],
        }


def load_scenario(source: Union[str, Path, dict]) -> Scenario:
    if isinstance(source, dict):
        return Scenario.from_dict(source)
    return Scenario.from_dict(json.loads(Path(source).read_text()))


@dataclass
class CeremonyResult:
    outcome: str
    trace: dict
    chain: ChainState
    deposit: Optional[Deposit]
    covenant_tx: Optional[Transaction]
    attestations: list[DeletionAttestation]
    lifetimes: dict

    def trace_json(self) -> str:
        return json.dumps(self.trace, sort_keys=True, separators=(",", ":")) + "\n"

    def trace_jsonl(self) -> str:
        """One event per line, then one summary record."""
        summary = {k: v for k, v in self.trace.items() if k != "events"}
        summary["record"] = "summary"
        lines = [json.dumps({"record": "event", **e},
                            sort_keys=True, separators=(",", ":"))
                 for e in self.trace["events"]]
        lines.append(json.dumps(summary, sort_keys=True, separators=(",", ":")))
        return "\n".join(lines) + "\n"


class _Ceremony:
    def __init__(self, scenario: Scenario):
        self.sc = scenario
        self.rng = random.Random(scenario.seed)
        self.queue: deque = deque()
        self.tick = 0
        self.events: list[dict] = []
        self.deviations = {(d.actor, d.kind): d for d in scenario.deviations}
        self.stall_budget: dict[str, Optional[int]] = {
            d.actor: (d.ticks if d.ticks > 0 else None)
            for d in scenario.deviations if d.kind == "stall"}

        self.depositor_key = PrivateKey.generate(self.rng)
        self.custodial_keys = [PrivateKey.generate(self.rng)
                               for _ in range(scenario.custody_count)]
        self.adversary_key = PrivateKey.generate(self.rng)
        self.custody = CustodialPolicy(
            scenario.custody_threshold,
            tuple(k.public_key() for k in self.custodial_keys))

        self.cells: dict[str, KeyCell] = {}
        self.generated_tick: dict[str, int] = {}
        self.deleted_tick: dict[str, int] = {}
        self.pubkeys: dict[str, PublicKey] = {}
        self.signatures: dict[str, CommitmentSignature] = {}
        self.leaked: dict[str, PrivateKey] = {}
        self.attestations: list[DeletionAttestation] = []
        self.withheld: set[str] = set()
        self.forwarded: set[str] = set()       # enforcers whose sig reached custody
        self.details_shared = False            # custodians know the deposit details
        self.archived: dict[str, bool] = {}    # depositor-delivered packages
        self.package: Optional[dict] = None

        self.enforcement: Optional[EnforcementPolicy] = None
        self.deposit: Optional[Deposit] = None
        self.deposit_outpoint: Optional[OutPoint] = None
        self.template: Optional[CovenantTemplate] = None
        self.covenant_tx: Optional[Transaction] = None
        self.funding_tx: Optional[Transaction] = None
        self.confirmed = False
        self.aborted_reason: Optional[str] = None

        self.chain = ChainState(confirmation_depth=scenario.confirmation_depth)
        self.wallet = build_deposit(
            Mechanism.DELETED_KEY,
            EnforcementPolicy(1, (self.depositor_key.public_key(),)), None)
        grant = self.chain.mine_block(
            coinbase_outputs=[TxOutput(PREMINE, self.wallet.lock_script())])
        self.wallet_outpoint = OutPoint(grant.txs[0].txid(), 0)

    # -- event plumbing

    def enqueue(self, actor: str, action: str, **data) -> None:
        self.queue.append((actor, action, data))

    def enqueue_batch(self, items: Sequence[tuple]) -> None:
        batch = list(items)
        self.rng.shuffle(batch)
        for actor, action in batch:
            self.enqueue(actor, action)

    def record(self, actor: str, action: str, **detail) -> None:
        self.events.append({"tick": self.tick, "actor": actor,
                            "action": action, **detail})

    def deviates(self, actor: str, kind: str) -> bool:
        return (actor, kind) in self.deviations

    def enforcers(self) -> list[str]:
        return [f"enforcer:{i}" for i in range(self.sc.enforcement_count)]

    def custodians(self) -> list[str]:
        return [f"custodian:{i}" for i in range(self.sc.custody_count)]

    # -- event handlers

    def run(self) -> CeremonyResult:
        self.enqueue("depositor", "announce")
        while self.queue:
            actor, action, data = self.queue.popleft()
            self.tick += 1
            getattr(self, "on_" + action.replace("-", "_"))(actor, **data)
        self.cleanup_keys()
        return self.classify()

    def on_announce(self, actor: str) -> None:
        self.record(actor, "announce",
                    session=self.sc.name, amount=self.sc.amount,
                    enforcement=[self.sc.enforcement_threshold,
                                 self.sc.enforcement_count],
                    custody=[self.sc.custody_threshold, self.sc.custody_count])
        self.enqueue_batch([(e, "generate-key") for e in self.enforcers()]
                           + [(c, "ready") for c in self.custodians()])

    def on_ready(self, actor: str) -> None:
        self.record(actor, "ready")

    def _stalls(self, actor: str, action: str) -> bool:
        if actor not in self.stall_budget:
            return False
        budget = self.stall_budget[actor]
        if budget is None:
            self.record(actor, "stall", pending=action, remaining="indefinite")
            return True   # the event is dropped: the enforcer never acts
        budget -= 1
        if budget == 0:
            del self.stall_budget[actor]
        else:
            self.stall_budget[actor] = budget
        self.record(actor, "stall", pending=action, remaining=budget)
        self.enqueue(actor, action)
        return True

    def on_generate_key(self, actor: str) -> None:
        if self._stalls(actor, "generate-key"):
            return
        cell = KeyCell(PrivateKey.generate(self.rng))
        self.cells[actor] = cell
        self.generated_tick[actor] = self.tick
        self.pubkeys[actor] = cell.pubkey
        self.record(actor, "generate-key", pubkey=cell.pubkey.encode().hex())
        if self.deviates(actor, "leak-key"):
            self.leaked[actor] = cell.reveal()
            self.record(actor, "leak-key", pubkey=cell.pubkey.encode().hex())
        if len(self.pubkeys) == self.sc.enforcement_count:
            self.enqueue("depositor", "build-package")

    def on_build_package(self, actor: str) -> None:
        keys = tuple(self.pubkeys[e] for e in self.enforcers())
        self.enforcement = EnforcementPolicy(self.sc.enforcement_threshold, keys)
        self.deposit = build_deposit(Mechanism.DELETED_KEY,
                                     self.enforcement, self.custody)
        amount = Amount(self.sc.amount)
        outputs = (TxOutput(amount, self.deposit.lock_script()),
                   TxOutput(Amount(PREMINE - amount - FUNDING_FEE),
                            self.wallet.lock_script()))
        self.funding_tx = spend_deposit(
            self.wallet, self.wallet_outpoint, PREMINE, outputs,
            enforcement_keys=[self.depositor_key])
        self.deposit_outpoint = OutPoint(self.funding_tx.txid(), 0)
        recovery = Transaction(
            2,
            (TxInput(self.deposit_outpoint, 0xFFFFFFFF),),
            (TxOutput(Amount(amount - FUNDING_FEE),
                      build_deposit(Mechanism.DELETED_KEY,
                                    EnforcementPolicy(self.custody.threshold,
                                                      self.custody.keys),
                                    None).lock_script()),),
            0)
        self.template = CovenantTemplate(recovery, (SigHashType(SIGHASH_ALL),),
                                         Mechanism.DELETED_KEY)
        self.details_shared = True   # deposit details go to every participant
        self.record(actor, "build-package",
                    address=self.deposit.address(),
                    funding_txid=self.funding_tx.display_txid(),
                    template_txid=self.template.transaction.display_txid())
        self.enqueue_batch([(e, "sign-commitment") for e in self.enforcers()])

    def on_sign_commitment(self, actor: str) -> None:
        """One message carries the commitment signature and the deletion
        confirmation: the enforcer signs, forwards the signature to the
        depositor and the custodians, then destroys its key."""
        if self._stalls(actor, "sign-commitment"):
            return
        if self.deviates(actor, "withhold-signature"):
            # refuses to sign and, crucially, refuses to delete
            self.withheld.add(actor)
            self.record(actor, "withhold-signature")
            self._maybe_assemble()
            return
        ctx = SpentOutputContext(self.deposit.witness_script, Amount(self.sc.amount))
        cell = self.cells[actor]
        digest = self.template.digest(0, ctx)
        sig = cell.sign(digest)
        self.signatures[actor] = CommitmentSignature(
            0, sig, self.template.sighash_types[0], cell.pubkey)
        self.forwarded.add(actor)
        att = cell.destroy(actor, self.tick)
        self.deleted_tick[actor] = self.tick
        self.attestations.append(att)
        self.record(actor, "sign-commitment",
                    der=der_encode_signature(sig).hex(),
                    deletion=att.fingerprint)
        self._maybe_assemble()

    def _maybe_assemble(self) -> None:
        responded = len(self.signatures) + len(self.withheld)
        if responded == self.sc.enforcement_count:
            self.enqueue("depositor", "assemble")

    def on_assemble(self, actor: str) -> None:
        # broadcast needs a valid signature quorum and a deletion
        # confirmation from every enforcer
        if len(self.signatures) < self.sc.enforcement_count:
            self.aborted_reason = "missing-deletion-confirmations"
            self.record(actor, "abort", reason=self.aborted_reason,
                        have=len(self.signatures),
                        need=self.sc.enforcement_count)
            return
        ctx = SpentOutputContext(self.deposit.witness_script, Amount(self.sc.amount))
        digest = self.template.digest(0, ctx)
        for e in self.enforcers():
            sig = self.signatures[e]
            if not curvecrypto.verify(sig.signer, digest, sig.signature):
                self.aborted_reason = "bad-commitment-signature"
                self.record(actor, "abort", reason=self.aborted_reason, by=e)
                return
        ordered = sorted(self.signatures.values(),
                         key=lambda s: self.enforcement.keys.index(s.signer))
        items = [s.witness_bytes() for s in ordered[:self.enforcement.threshold]]
        base = self.template.transaction
        # the simulator owns the custody side, so it completes the witness
        # that real custodians would finish at recovery time
        custodial = sign_custodial(base, 0, self.deposit, ctx, self.custodial_keys)
        witness = spend_witness(self.deposit, items, custodial)
        self.covenant_tx = Transaction(
            base.version,
            (TxInput(base.inputs[0].previous, base.inputs[0].sequence, witness),),
            base.outputs, base.locktime)
        self.package = {
            "address": self.deposit.address(),
            "witness_script": self.deposit.witness_script.data.hex(),
            "covenant_tx": self.covenant_tx.serialize().hex(),
            "signatures": {e: der_encode_signature(self.signatures[e].signature).hex()
                           for e in self.enforcers()},
        }
        if self.deviates("depositor", "abort-deposit"):
            self.aborted_reason = "abort-deposit"
            self.record(actor, "abort-deposit")
            return
        self.record(actor, "assemble",
                    covenant_txid=self.covenant_tx.display_txid())
        self.enqueue("depositor", "broadcast-funding")

    def on_broadcast_funding(self, actor: str) -> None:
        res = self.chain.submit(self.funding_tx)
        self.record(actor, "broadcast-funding",
                    txid=self.funding_tx.display_txid(),
                    status=res.status)
        if not res.ok:
            self.aborted_reason = f"funding-rejected:{res.reason}"
            return
        for _ in range(self.sc.confirmation_depth):
            self.enqueue("miner", "mine")
        self.enqueue("depositor", "confirm-deposit")

    def on_mine(self, actor: str) -> None:
        block = self.chain.mine_block()
        self.record(actor, "mine", height=block.height, txs=len(block.txs))

    def on_confirm_deposit(self, actor: str) -> None:
        if not self.chain.is_confirmed(self.funding_tx.txid()):
            self.aborted_reason = "confirmation-failed"
            self.record(actor, "abort", reason=self.aborted_reason)
            return
        self.confirmed = True
        self.record(actor, "confirm-deposit",
                    depth=self.sc.confirmation_depth,
                    height=self.chain.height)
        if self.deviates("depositor", "withhold-forwarding"):
            self.record(actor, "withhold-forwarding")
            return
        self.enqueue_batch([(c, "deliver-package") for c in self.custodians()])

    def on_deliver_package(self, actor: str) -> None:
        ok = self._verify_package()
        keep = ok and not self.archived.get(actor, False)
        if keep:
            self.archived[actor] = True
        self.record(actor, "archive-package", verified=ok, kept=keep)

    def _verify_package(self) -> bool:
        rebuilt = build_deposit(Mechanism.DELETED_KEY, self.enforcement, self.custody)
        if rebuilt.address() != self.package["address"]:
            return False
        ctx = SpentOutputContext(rebuilt.witness_script, Amount(self.sc.amount))
        digest = self.template.digest(0, ctx)
        for e in self.enforcers():
            sig = self.signatures[e]
            if not curvecrypto.verify(sig.signer, digest, sig.signature):
                return False
        return True

    # -- final phase

    def cleanup_keys(self) -> None:
        """Honest enforcers hold their keys until the abort deadline,
        then delete them even though the ceremony died; withholding
        enforcers keep theirs (that is the deviation)."""
        live = [actor for actor in self.enforcers()
                if (cell := self.cells.get(actor)) is not None
                and cell.alive and actor not in self.withheld]
        if not live:
            return
        if self.tick < self.sc.timeout:
            self.tick = self.sc.timeout
            self.record("depositor", "timeout", deadline=self.sc.timeout)
        for actor in live:
            self.tick += 1
            att = self.cells[actor].destroy(actor, self.tick)
            self.deleted_tick[actor] = self.tick
            self.attestations.append(att)
            self.record(actor, "delete-key", pubkey=att.pubkey, late=True)

    def _custodian_report(self) -> dict:
        """A custodian holds the covenant package if the depositor
        delivered it, or if enough enforcers forwarded signatures to
        assemble one (details plus a signature quorum)."""
        report = {}
        assembled = (self.details_shared
                     and len(self.forwarded) >= self.sc.enforcement_threshold)
        for c in self.custodians():
            via_depositor = self.archived.get(c, False)
            report[c] = {
                "package": via_depositor or assembled,
                "source": ("depositor" if via_depositor
                           else "enforcers" if assembled else None),
                "forwarded_signatures": len(self.forwarded),
            }
        return report

    def classify(self) -> CeremonyResult:
        theft = None
        recovery_valid = None
        if self.confirmed:
            outcome = "covenant-active"
            snapshot = ChainState.load(self.chain.dump())
            rec = snapshot.submit(self.covenant_tx)
            recovery_valid = rec.ok
            if self.leaked:
                theft = self._attempt_theft()
                if theft["accepted"]:
                    outcome = "funds-at-risk"
        else:
            outcome = "aborted"
            if self.aborted_reason is None:
                # the queue drained without a broadcast: name the quorum
                # that never completed
                if self.deposit is None:
                    self.aborted_reason = "missing-enforcement-keys"
                elif len(self.signatures) < self.sc.enforcement_count:
                    self.aborted_reason = "missing-deletion-confirmations"
                else:
                    self.aborted_reason = "ceremony-incomplete"
        lifetimes = {}
        for e in self.enforcers():
            gen = self.generated_tick.get(e)
            dele = self.deleted_tick.get(e)
            lifetimes[e] = {"generated": gen, "deleted": dele,
                            "span": (dele - gen)
                            if gen is not None and dele is not None else None}
        trace = {
            "format": 1,
            "scenario": self.sc.to_dict(),
            "ticks": self.tick,
            "events": self.events,
            "outcome": outcome,
            "aborted_reason": self.aborted_reason,
            "deposit": None if self.deposit is None else {
                "address": self.deposit.address(),
                "outpoint": None if self.deposit_outpoint is None else
                            self.deposit_outpoint.txid.hex() + ":" +
                            str(self.deposit_outpoint.vout),
                "confirmed": self.confirmed,
            },
            "recovery_path_valid": recovery_valid,
            "theft": theft,
            "deletion_attestations": [a.to_dict() for a in self.attestations],
            "key_lifetimes": lifetimes,
            "undeleted_keys": sorted(e for e in self.enforcers()
                                     if self.cells.get(e) is not None
                                     and self.cells[e].alive),
            "custodians": self._custodian_report(),
        }
        return CeremonyResult(outcome, trace, self.chain, self.deposit,
                              self.covenant_tx, self.attestations, lifetimes)

    def _attempt_theft(self) -> dict:
        """Adversary spends the deposit with the leaked keys plus padding;
        the validator's verdict decides the outcome."""
        thief_wallet = build_deposit(
            Mechanism.DELETED_KEY,
            EnforcementPolicy(1, (self.adversary_key.public_key(),)), None)
        amount = Amount(self.sc.amount)
        outputs = (TxOutput(Amount(amount - THEFT_FEE), thief_wallet.lock_script()),)
        tx = Transaction(2, (TxInput(self.deposit_outpoint, 0xFFFFFFFF),), outputs, 0)
        ctx = SpentOutputContext(self.deposit.witness_script, amount)
        all_type = SigHashType(SIGHASH_ALL)
        digest = sighash_digest(tx, 0, ctx, all_type)
        by_pub = {k.public_key().encode(): k for k in self.leaked.values()}
        ordered = [by_pub[p.encode()] for p in self.enforcement.keys
                   if p.encode() in by_pub]
        items = [der_encode_signature(curvecrypto.sign(k, digest))
                 + bytes([all_type.to_byte()])
                 for k in ordered[:self.enforcement.threshold]]
        while len(items) < self.enforcement.threshold:
            # pad with signatures that cannot match any enforcement key
            items.append(der_encode_signature(
                curvecrypto.sign(self.adversary_key, digest))
                + bytes([all_type.to_byte()]))
        custodial = [der_encode_signature(curvecrypto.sign(k, digest))
                     + bytes([all_type.to_byte()])
                     for k in self.custodial_keys[:self.custody.threshold]]
        witness = spend_witness(self.deposit, items, custodial)
        theft_tx = Transaction(2,
                               (TxInput(self.deposit_outpoint, 0xFFFFFFFF, witness),),
                               outputs, 0)
        snapshot = ChainState.load(self.chain.dump())
        res = snapshot.submit(theft_tx)
        return {
            "txid": theft_tx.display_txid(),
            "leaked_keys": sorted(self.leaked),
            "accepted": res.ok,
            "status": res.status,
            "reason": res.reason,
        }


def run_scenario(source: Union[str, Path, dict, Scenario]) -> CeremonyResult:
    scenario = source if isinstance(source, Scenario) else load_scenario(source)
    return _Ceremony(scenario).run()


def key_lifetime_report(result: CeremonyResult) -> dict:
    spans = [v["span"] for v in result.lifetimes.values() if v["span"] is not None]
    return {
        "enforcers": result.lifetimes,
        "max_span": max(spans) if spans else None,
        "min_span": min(spans) if spans else None,
        "deletion_attestations": len(result.attestations),
        "undeleted_keys": result.trace["undeleted_keys"],
    }
