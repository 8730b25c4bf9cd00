"""Composing covenants into chains, trees, and fee structures.

Chains are built backward from the final payout: each hop's spending
transaction must exist before the deposit that commits to it, because
the commitment evidence (a recovered key, a template hash, or a set of
commitment signatures) is derived from that transaction.

Hops that commit with NOINPUT-flagged signatures or template hashes do
not commit to the parent txid, so a finished chain can be re-pointed at
any output paying the same witness-script hash (rebinding). Deleted-key
hops sign concrete outpoints; re-pointing them produces transactions
the validator rejects, which is exactly the difference the two designs
trade on.

The fee machinery treats pre-signed transactions as immutable: fee
choice happens by enumerating alternative chains (one per feerate
combination), by attaching a child that pays for its parent (CPFP), or
adversarially by replaying an ANYONECANPAY|SINGLE signature into an
enlarged conflicting transaction (pinning).
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

from .curvecrypto import PrivateKey, PublicKey, SignatureSeeds, der_encode_signature
from . import curvecrypto
from .mechanisms import (CommitmentSignature, CovenantError, CovenantTemplate,
                         CustodialPolicy, Deposit, EnforcementPolicy, Mechanism,
                         RefundPath, build_deposit, build_recovered_key_covenant,
                         ctv_hash, sign_custodial, spend_deposit, spend_witness)
from .sighash import SIGHASH_ALL, SigHashType, SpentOutputContext, sighash_digest
from .txcore import (Amount, OutPoint, Script, Transaction, TxInput, TxOutput,
                     sha256)

__all__ = [
    "CovenantGraph", "GraphNode", "GraphEdge", "ChainHop", "CovenantChain",
    "DisjointCovenant", "MultiDeposit", "FeeVariant", "rebind", "add_fee_input",
    "build_chain", "build_disjoint", "build_multi_deposit",
    "enumerate_fee_variants", "cpfp_child", "pin_transaction", "chain_graph",
]

VARIANT_CAP = 4096
NOMINAL_HOP_SIZE = 300  # accounting size for turning a feerate into a hop fee
RBF_SEQUENCE = 0xFFFFFFFD


def rebind(tx: Transaction, input_index: int, outpoint: OutPoint) -> Transaction:
    """Re-point one input at a different outpoint, keeping the witness."""
    inputs = list(tx.inputs)
    old = inputs[input_index]
    inputs[input_index] = TxInput(outpoint, old.sequence, old.witness)
    return Transaction(tx.version, tuple(inputs), tx.outputs, tx.locktime)


def add_fee_input(tx: Transaction, outpoint: OutPoint, amount: Amount,
                  fee_deposit: Deposit,
                  keys: Sequence[PrivateKey]) -> Transaction:
    """Append a fee-bearing input to a finished transaction, leaving the
    existing witnesses untouched. The extra value becomes fee (adding a
    change output would break the committed output set). The result is
    only valid when the existing signatures do not commit to the input
    set; txid-committing signatures break the moment the input appears.
    """
    inputs = tx.inputs + (TxInput(outpoint, 0xFFFFFFFF),)
    enlarged = Transaction(tx.version, inputs, tx.outputs, tx.locktime)
    idx = len(inputs) - 1
    ctx = SpentOutputContext(fee_deposit.witness_script, Amount(amount))
    all_type = SigHashType(SIGHASH_ALL)
    digest = sighash_digest(enlarged, idx, ctx, all_type)
    items = [der_encode_signature(curvecrypto.sign(k, digest))
             + bytes([all_type.to_byte()]) for k in keys]
    witness = spend_witness(fee_deposit, items, [])
    final = list(inputs)
    final[idx] = TxInput(outpoint, 0xFFFFFFFF, witness)
    return Transaction(tx.version, tuple(final), tx.outputs, tx.locktime)


def _placeholder(i: int) -> OutPoint:
    return OutPoint(sha256(b"unbound-hop-%d" % i), 0)


# ---------------------------------------------------------------------------
# Chains


@dataclass(frozen=True)
class ChainHop:
    deposit: Deposit
    template: CovenantTemplate
    covenant_tx: Transaction
    fee: int


@dataclass(frozen=True)
class CovenantChain:
    mechanism: Mechanism
    hops: tuple[ChainHop, ...]
    leaf_script: Script
    amount: int
    rebindable: bool

    def entry_address(self) -> str:
        return self.hops[0].deposit.address()

    def entry_output(self) -> TxOutput:
        return TxOutput(Amount(self.amount), self.hops[0].deposit.lock_script())

    def bind(self, funding_outpoint: OutPoint) -> list[Transaction]:
        """Re-point hop 0 at the funding outpoint and each later hop at
        its parent's first output. Witnesses are kept as built: for
        txid-committing chains bound anywhere but the original outpoint,
        the result is a transaction sequence the validator rejects."""
        txs: list[Transaction] = []
        outpoint = funding_outpoint
        for hop in self.hops:
            tx = rebind(hop.covenant_tx, 0, outpoint)
            txs.append(tx)
            outpoint = OutPoint(tx.txid(), 0)
        return txs


def _custody_lock(custody: Optional[CustodialPolicy]) -> Optional[Script]:
    if custody is None:
        return None
    cold = build_deposit(Mechanism.DELETED_KEY,
                         EnforcementPolicy(custody.threshold, custody.keys), None)
    return cold.lock_script()


def _seeded_evidence(template: CovenantTemplate, ctx: SpentOutputContext,
                     prefix: str, hop: int) -> tuple[CommitmentSignature, PublicKey]:
    for attempt in range(64):
        seeds = SignatureSeeds(f"{prefix}-r-{hop}-{attempt}".encode(),
                               f"{prefix}-s-{hop}-{attempt}".encode())
        try:
            return build_recovered_key_covenant(template, ctx, "seeded", seeds)
        except curvecrypto.SeedRejectedError:
            continue
    raise CovenantError("no acceptable seeds after 64 attempts")


def _chain_fees(length: int, fee: Union[int, Sequence[int]]) -> list[int]:
    fees = [int(fee)] * length if isinstance(fee, int) else [int(f) for f in fee]
    if len(fees) != length:
        raise CovenantError("need one fee per hop")
    if any(f < 0 for f in fees):
        raise CovenantError("negative hop fee")
    return fees


def build_chain(mechanism: Mechanism, length: int, amount: int, *,
                custody: Optional[CustodialPolicy] = None,
                custodial_keys: Sequence[PrivateKey] = (),
                enforcement_size: tuple[int, int] = (2, 3),
                style: str = "nums",
                seed_prefix: str = "chain",
                fee: Union[int, Sequence[int]] = 1_000,
                leaf_script: Optional[Script] = None,
                funding_outpoint: Optional[OutPoint] = None,
                sequence: int = 0xFFFFFFFF,
                rng=None) -> CovenantChain:
    """A linear covenant chain: deposit_0 -> tx_0 -> deposit_1 -> ... -> leaf.

    Recovered-key and ctv chains are built leaf-first with placeholder
    outpoints and bound to a funding outpoint later; deleted-key chains
    sign concrete outpoints, so funding_outpoint is required up front
    and the ephemeral keys are discarded when this function returns.
    """
    mechanism = Mechanism(mechanism)
    if length < 1:
        raise CovenantError("chain needs at least one hop")
    fees = _chain_fees(length, fee)
    if leaf_script is None:
        leaf_script = _custody_lock(custody)
    if leaf_script is None:
        raise CovenantError("need leaf_script or a custody policy for the payout")

    amounts = [amount]
    for f in fees:
        nxt = amounts[-1] - f
        if nxt <= 0:
            raise CovenantError("fees exhaust the deposit amount")
        amounts.append(nxt)

    if mechanism is Mechanism.DELETED_KEY:
        return _build_deleted_key_chain(length, amounts, fees, custody,
                                        custodial_keys, enforcement_size,
                                        leaf_script, funding_outpoint,
                                        sequence, rng)

    noi = SigHashType(SIGHASH_ALL, noinput=True)
    hops_rev: list[ChainHop] = []
    next_script = leaf_script
    for i in range(length - 1, -1, -1):
        tx = Transaction(2,
                         (TxInput(_placeholder(i), sequence),),
                         (TxOutput(Amount(amounts[i + 1]), next_script),), 0)
        if mechanism is Mechanism.RECOVERED_KEY:
            template = CovenantTemplate(tx, (noi,), mechanism)
            ctx0 = SpentOutputContext(Script(b""), Amount(0))
            if style == "nums":
                commitment, pub = build_recovered_key_covenant(template, ctx0, "nums")
            else:
                commitment, pub = _seeded_evidence(template, ctx0, seed_prefix, i)
            deposit = build_deposit(mechanism, None, custody, recovered_keys=(pub,))
            ctx = SpentOutputContext(deposit.witness_script, Amount(amounts[i]))
            custodial = sign_custodial(tx, 0, deposit, ctx, custodial_keys, noi)
            witness = spend_witness(deposit, [commitment.witness_bytes()], custodial)
        else:
            template = CovenantTemplate(tx, (noi,), mechanism)
            deposit = build_deposit(mechanism, None, custody,
                                    ctv_hashes=(template.ctv_hash(0),))
            ctx = SpentOutputContext(deposit.witness_script, Amount(amounts[i]))
            custodial = sign_custodial(tx, 0, deposit, ctx, custodial_keys, noi)
            witness = spend_witness(deposit, (), custodial)
        covenant_tx = Transaction(2, (TxInput(_placeholder(i), sequence, witness),),
                                  tx.outputs, 0)
        hops_rev.append(ChainHop(deposit, template, covenant_tx, fees[i]))
        next_script = deposit.lock_script()
    return CovenantChain(mechanism, tuple(reversed(hops_rev)), leaf_script,
                         amount, rebindable=True)


def _build_deleted_key_chain(length, amounts, fees, custody, custodial_keys,
                             enforcement_size, leaf_script, funding_outpoint,
                             sequence, rng) -> CovenantChain:
    if funding_outpoint is None:
        raise CovenantError(
            "deleted-key commitments sign the funding outpoint; provide it up front")
    if rng is None:
        raise CovenantError("deleted-key chains need an rng for the ephemeral keys")
    m, n = enforcement_size
    hop_keys = [[PrivateKey.generate(rng) for _ in range(n)] for _ in range(length)]
    deposits = []
    for i in range(length):
        policy = EnforcementPolicy(m, tuple(k.public_key() for k in hop_keys[i]))
        deposits.append(build_deposit(Mechanism.DELETED_KEY, policy, custody))

    hops: list[ChainHop] = []
    outpoint = funding_outpoint
    for i in range(length):
        next_script = deposits[i + 1].lock_script() if i + 1 < length else leaf_script
        outputs = (TxOutput(Amount(amounts[i + 1]), next_script),)
        tx = spend_deposit(deposits[i], outpoint, Amount(amounts[i]), outputs,
                           enforcement_keys=hop_keys[i],
                           custodial_keys=custodial_keys,
                           sequence=sequence)
        template = CovenantTemplate(
            Transaction(2, (TxInput(outpoint, sequence),), outputs, 0),
            (SigHashType(SIGHASH_ALL),), Mechanism.DELETED_KEY)
        hops.append(ChainHop(deposits[i], template, tx, fees[i]))
        outpoint = OutPoint(tx.txid(), 0)
    # hop_keys drop out of scope here: the chain is final
    return CovenantChain(Mechanism.DELETED_KEY, tuple(hops), leaf_script,
                         amounts[0], rebindable=False)


# ---------------------------------------------------------------------------
# Disjoint (either-branch) covenants


@dataclass(frozen=True)
class DisjointCovenant:
    mechanism: Mechanism
    deposit: Deposit
    templates: tuple[CovenantTemplate, CovenantTemplate]
    covenant_txs: tuple[Transaction, Transaction]
    amount: int
    rebindable: bool

    def bind(self, branch_index: int, funding_outpoint: OutPoint) -> Transaction:
        return rebind(self.covenant_txs[branch_index], 0, funding_outpoint)

    def entry_output(self) -> TxOutput:
        return TxOutput(Amount(self.amount), self.deposit.lock_script())


def build_disjoint(mechanism: Mechanism, amount: int,
                   branch_outputs: tuple[Sequence[TxOutput], Sequence[TxOutput]], *,
                   custody: Optional[CustodialPolicy] = None,
                   custodial_keys: Sequence[PrivateKey] = (),
                   enforcement_size: tuple[int, int] = (2, 3),
                   style: str = "nums",
                   seed_prefix: str = "disjoint",
                   funding_outpoint: Optional[OutPoint] = None,
                   sequence: int = 0xFFFFFFFF,
                   rng=None) -> DisjointCovenant:
    """One deposit committed to either of two alternative spends.

    recovered-key and ctv deposits carry both branches inside the
    script (IF/ELSE arms); a deleted-key quorum simply signs both
    templates before the keys are destroyed.
    """
    mechanism = Mechanism(mechanism)
    branch_outputs = (tuple(branch_outputs[0]), tuple(branch_outputs[1]))
    for outs in branch_outputs:
        total = sum(int(o.amount) for o in outs)
        if total >= amount:
            raise CovenantError("branch outputs leave no fee")

    if mechanism is Mechanism.DELETED_KEY:
        if funding_outpoint is None or rng is None:
            raise CovenantError("deleted-key disjoint needs funding_outpoint and rng")
        m, n = enforcement_size
        keys = [PrivateKey.generate(rng) for _ in range(n)]
        policy = EnforcementPolicy(m, tuple(k.public_key() for k in keys))
        deposit = build_deposit(mechanism, policy, custody)
        templates, txs = [], []
        for outs in branch_outputs:
            tx = spend_deposit(deposit, funding_outpoint, Amount(amount), outs,
                               enforcement_keys=keys, custodial_keys=custodial_keys,
                               sequence=sequence)
            templates.append(CovenantTemplate(
                Transaction(2, (TxInput(funding_outpoint, sequence),), tuple(outs), 0),
                (SigHashType(SIGHASH_ALL),), mechanism))
            txs.append(tx)
        return DisjointCovenant(mechanism, deposit, tuple(templates), tuple(txs),
                                amount, rebindable=False)

    noi = SigHashType(SIGHASH_ALL, noinput=True)
    ctx0 = SpentOutputContext(Script(b""), Amount(0))
    templates, evidence = [], []
    for b, outs in enumerate(branch_outputs):
        tx = Transaction(2, (TxInput(_placeholder(b), sequence),), outs, 0)
        template = CovenantTemplate(tx, (noi,), mechanism)
        templates.append(template)
        if mechanism is Mechanism.RECOVERED_KEY:
            if style == "nums":
                evidence.append(build_recovered_key_covenant(template, ctx0, "nums"))
            else:
                evidence.append(_seeded_evidence(template, ctx0,
                                                 f"{seed_prefix}-{b}", b))
        else:
            evidence.append(template.ctv_hash(0))

    if mechanism is Mechanism.RECOVERED_KEY:
        deposit = build_deposit(mechanism, None, custody,
                                recovered_keys=tuple(pub for _, pub in evidence))
    else:
        deposit = build_deposit(mechanism, None, custody,
                                ctv_hashes=tuple(evidence))

    txs = []
    ctx = SpentOutputContext(deposit.witness_script, Amount(amount))
    for b, template in enumerate(templates):
        base = template.transaction
        custodial = sign_custodial(base, 0, deposit, ctx, custodial_keys, noi)
        commitment = ([evidence[b][0].witness_bytes()]
                      if mechanism is Mechanism.RECOVERED_KEY else ())
        witness = spend_witness(deposit, commitment, custodial, branch_index=b)
        txs.append(Transaction(2, (TxInput(_placeholder(b), sequence, witness),),
                               base.outputs, 0))
    return DisjointCovenant(mechanism, deposit, tuple(templates), tuple(txs),
                            amount, rebindable=True)


# ---------------------------------------------------------------------------
# Multi-deposit with a timelocked refund


@dataclass(frozen=True)
class MultiDeposit:
    mechanism: Mechanism
    deposits: tuple[Deposit, ...]
    templates: tuple[CovenantTemplate, ...]
    covenant_txs: tuple[Transaction, ...]
    amounts: tuple[int, ...]
    refund_height: int
    refund_key: PublicKey

    def funding_outputs(self) -> tuple[TxOutput, ...]:
        return tuple(TxOutput(Amount(a), d.lock_script())
                     for a, d in zip(self.amounts, self.deposits))

    def bind(self, index: int, outpoint: OutPoint) -> Transaction:
        return rebind(self.covenant_txs[index], 0, outpoint)

    def refund_tx(self, index: int, outpoint: OutPoint, refund_priv: PrivateKey,
                  dest: Sequence[TxOutput], *, sequence: int = 0xFFFFFFFE) -> Transaction:
        """Time-locked escape: spends deposit index through the refund arm."""
        if refund_priv.public_key() != self.refund_key:
            raise CovenantError("refund key mismatch")
        deposit = self.deposits[index]
        tx = Transaction(2, (TxInput(outpoint, sequence),), tuple(dest),
                         self.refund_height)
        ctx = SpentOutputContext(deposit.witness_script, Amount(self.amounts[index]))
        all_type = SigHashType(SIGHASH_ALL)
        digest = sighash_digest(tx, 0, ctx, all_type)
        item = (der_encode_signature(curvecrypto.sign(refund_priv, digest))
                + bytes([all_type.to_byte()]))
        witness = spend_witness(deposit, refund_item=item)
        return Transaction(2, (TxInput(outpoint, sequence, witness),), tuple(dest),
                           self.refund_height)


def build_multi_deposit(mechanism: Mechanism, amounts: Sequence[int],
                        refund_height: int, refund_key: PublicKey, *,
                        custody: Optional[CustodialPolicy] = None,
                        custodial_keys: Sequence[PrivateKey] = (),
                        style: str = "nums",
                        seed_prefix: str = "multi",
                        fee: int = 1_000,
                        leaf_script: Optional[Script] = None,
                        sequence: int = 0xFFFFFFFF) -> MultiDeposit:
    """Several covenant deposits funded by one transaction, each carrying
    a CLTV refund arm for the depositor. Rebindable mechanisms only: the
    funding txid does not exist until the funding wallet builds it."""
    mechanism = Mechanism(mechanism)
    if mechanism is Mechanism.DELETED_KEY:
        raise CovenantError(
            "multi-deposit funding is built after the covenants; use a "
            "rebindable mechanism (recovered-key or ctv)")
    if leaf_script is None:
        leaf_script = _custody_lock(custody)
    if leaf_script is None:
        raise CovenantError("need leaf_script or a custody policy for the payout")
    refund = RefundPath(refund_height, refund_key)
    noi = SigHashType(SIGHASH_ALL, noinput=True)
    ctx0 = SpentOutputContext(Script(b""), Amount(0))

    deposits, templates, txs = [], [], []
    for i, amount in enumerate(amounts):
        if amount - fee <= 0:
            raise CovenantError("fee exhausts the deposit amount")
        tx = Transaction(2, (TxInput(_placeholder(i), sequence),),
                         (TxOutput(Amount(amount - fee), leaf_script),), 0)
        template = CovenantTemplate(tx, (noi,), mechanism)
        if mechanism is Mechanism.RECOVERED_KEY:
            if style == "nums":
                commitment, pub = build_recovered_key_covenant(template, ctx0, "nums")
            else:
                commitment, pub = _seeded_evidence(template, ctx0, seed_prefix, i)
            deposit = build_deposit(mechanism, None, custody,
                                    recovered_keys=(pub,), refund=refund)
            commitment_items = [commitment.witness_bytes()]
        else:
            deposit = build_deposit(mechanism, None, custody,
                                    ctv_hashes=(template.ctv_hash(0),), refund=refund)
            commitment_items = []
        ctx = SpentOutputContext(deposit.witness_script, Amount(amount))
        custodial = sign_custodial(tx, 0, deposit, ctx, custodial_keys, noi)
        witness = spend_witness(deposit, commitment_items, custodial)
        deposits.append(deposit)
        templates.append(template)
        txs.append(Transaction(2, (TxInput(_placeholder(i), sequence, witness),),
                               tx.outputs, 0))
    return MultiDeposit(mechanism, tuple(deposits), tuple(templates), tuple(txs),
                        tuple(int(a) for a in amounts), refund_height, refund_key)


# ---------------------------------------------------------------------------
# Fee machinery


@dataclass(frozen=True)
class FeeVariant:
    feerates: tuple[int, ...]
    fees: tuple[int, ...]
    chain: CovenantChain


def enumerate_fee_variants(mechanism: Mechanism, length: int, amount: int,
                           feerates: Sequence[int], *,
                           cap: int = VARIANT_CAP,
                           nominal_hop_size: int = NOMINAL_HOP_SIZE,
                           sequence: int = RBF_SEQUENCE,
                           **chain_kwargs) -> list[FeeVariant]:
    """All feerate-per-hop combinations as independent pre-signed chains.

    p feerates over t hops gives p**t chains; the count is refused above
    the cap since every variant costs full key or hash derivation. Hop
    fees use a nominal per-hop size: pre-signed fees must be chosen
    before final witness sizes exist. Variant transactions signal
    replaceability so the funding side can switch chains via RBF.
    """
    rates = [int(r) for r in feerates]
    if not rates or length < 1:
        raise CovenantError("need at least one feerate and one hop")
    count = len(rates) ** length
    if count > cap:
        raise CovenantError(
            f"refusing to enumerate {count} fee variants (cap {cap})")
    variants = []
    for combo in itertools.product(rates, repeat=length):
        fees = tuple(r * nominal_hop_size for r in combo)
        chain = build_chain(mechanism, length, amount, fee=fees,
                            sequence=sequence, **chain_kwargs)
        variants.append(FeeVariant(tuple(combo), fees, chain))
    return variants


def cpfp_child(parent: Transaction, vout: int, parent_fee: int,
               deposit: Deposit, keys: Sequence[PrivateKey],
               dest: Script, target_feerate: float, *,
               sequence: int = RBF_SEQUENCE) -> Transaction:
    """Child transaction paying enough fee that the parent+child package
    meets the target feerate (child pays for parent)."""
    parent_out = parent.outputs[vout]
    if parent_out.script != deposit.lock_script():
        raise CovenantError("deposit does not match the parent output")
    outpoint = OutPoint(parent.txid(), vout)
    parent_size = parent.size()
    available = int(parent_out.amount)

    def build(fee: int) -> Transaction:
        if fee >= available:
            raise CovenantError("cpfp fee exhausts the parent output")
        outs = (TxOutput(Amount(available - fee), dest),)
        kwargs = {"custodial_keys": keys} if deposit.custody else {"enforcement_keys": keys}
        return spend_deposit(deposit, outpoint, Amount(available), outs,
                             sequence=sequence, **kwargs)

    fee = 0
    for _ in range(8):
        child = build(fee)
        need = math.ceil(target_feerate * (parent_size + child.size())) - parent_fee
        need = max(need, 0)
        if need <= fee:
            break
        fee = need
    else:
        raise CovenantError("cpfp fee search did not settle")
    child = build(fee)
    if (parent_fee + fee) / (parent_size + child.size()) < target_feerate:
        child = build(fee + 2)
    return child


def pin_transaction(victim: Transaction, attacker_outpoint: OutPoint,
                    attacker_amount: int, attacker_deposit: Deposit,
                    attacker_keys: Sequence[PrivateKey], *,
                    pin_fee: int, pad_outputs: int = 25,
                    pad_amount: int = 546) -> Transaction:
    """Replay an ANYONECANPAY|SINGLE input into an enlarged conflict.

    The victim's input 0 signature only commits to its own input and the
    output at its index, so an attacker can append their own input and
    padding outputs. The result spends the same outpoint (a conflict)
    with a larger size; whoever wants to replace it must now outbid its
    absolute fee."""
    wit = victim.inputs[0].witness
    if not wit or not wit[0]:
        raise CovenantError("victim input 0 carries no signature")
    base_type = wit[0][-1]
    if not (base_type & 0x80) or (base_type & 0x3F) != 0x03:
        raise CovenantError("victim input 0 is not signed ANYONECANPAY|SINGLE")
    pads = [TxOutput(Amount(pad_amount), attacker_deposit.lock_script())
            for _ in range(pad_outputs)]
    spend_total = pin_fee + pad_amount * pad_outputs
    if spend_total > attacker_amount:
        raise CovenantError("attacker funds do not cover the pin")
    change = attacker_amount - spend_total
    if change > 0:
        pads.append(TxOutput(Amount(change), attacker_deposit.lock_script()))
    outputs = (victim.outputs[0], *pads)
    unsigned = Transaction(victim.version,
                           (victim.inputs[0], TxInput(attacker_outpoint, RBF_SEQUENCE)),
                           outputs, victim.locktime)
    ctx = SpentOutputContext(attacker_deposit.witness_script, Amount(attacker_amount))
    all_type = SigHashType(SIGHASH_ALL)
    digest = sighash_digest(unsigned, 1, ctx, all_type)
    kwargs_keys = list(attacker_keys)
    if attacker_deposit.custody:
        items = sign_custodial(unsigned, 1, attacker_deposit, ctx, kwargs_keys)
    else:
        ordered = [k for k in kwargs_keys]
        items = [der_encode_signature(curvecrypto.sign(k, digest))
                 + bytes([all_type.to_byte()])
                 for k in ordered[:attacker_deposit.enforcement.threshold]]
    witness = spend_witness(attacker_deposit, items, ())
    return Transaction(victim.version,
                       (victim.inputs[0],
                        TxInput(attacker_outpoint, RBF_SEQUENCE, witness)),
                       outputs, victim.locktime)


# ---------------------------------------------------------------------------
# Covenant graphs


@dataclass(frozen=True)
class GraphNode:
    id: str
    kind: str       # "deposit" | "transaction" | "output"
    label: str
    data: dict = field(default_factory=dict)


@dataclass(frozen=True)
class GraphEdge:
    src: str
    dst: str
    binding: str    # "txid" | "script"
    detail: str = ""


class CovenantGraph:
    """Directed acyclic graph of deposits and the transactions that
    spend them. A txid edge is pinned to one concrete parent; a script
    edge accepts any output paying the same witness-script hash."""

    def __init__(self) -> None:
        self.nodes: dict[str, GraphNode] = {}
        self.edges: list[GraphEdge] = []

    def add_node(self, node: GraphNode) -> None:
        if node.id in self.nodes:
            raise CovenantError(f"duplicate node {node.id!r}")
        self.nodes[node.id] = node

    def add_edge(self, edge: GraphEdge) -> None:
        if edge.src not in self.nodes or edge.dst not in self.nodes:
            raise CovenantError("edge endpoints must be added first")
        if edge.binding not in ("txid", "script"):
            raise CovenantError(f"unknown edge binding {edge.binding!r}")
        self.edges.append(edge)
        if not self._acyclic():
            self.edges.pop()
            raise CovenantError(f"edge {edge.src}->{edge.dst} closes a cycle")

    def _acyclic(self) -> bool:
        adjacent: dict[str, list[str]] = {n: [] for n in self.nodes}
        degree = {n: 0 for n in self.nodes}
        for e in self.edges:
            adjacent[e.src].append(e.dst)
            degree[e.dst] += 1
        ready = [n for n, d in degree.items() if d == 0]
        seen = 0
        while ready:
            node = ready.pop()
            seen += 1
            for nxt in adjacent[node]:
                degree[nxt] -= 1
                if degree[nxt] == 0:
                    ready.append(nxt)
        return seen == len(self.nodes)

    def compatible_output(self, edge: GraphEdge, output: TxOutput) -> bool:
        """script-bound edges accept any output paying the recorded
        witness-script hash; txid edges never re-point."""
        if edge.binding != "script":
            return False
        node = self.nodes[edge.src]
        want = node.data.get("script_hash", "")
        script = output.script.data
        return (len(script) == 34 and script[:2] == b"\x00\x20"
                and script[2:].hex() == want)

    def roots(self) -> list[str]:
        targets = {e.dst for e in self.edges}
        return [n for n in self.nodes if n not in targets]

    def render(self) -> str:
        children: dict[str, list[GraphEdge]] = {n: [] for n in self.nodes}
        for e in self.edges:
            children[e.src].append(e)
        lines: list[str] = []

        def walk(node_id: str, prefix: str, edge: Optional[GraphEdge],
                 last: bool) -> None:
            node = self.nodes[node_id]
            if edge is None:
                lines.append(node.label)
                deeper = ""
            else:
                tag = f"[{edge.binding}] "
                lines.append(prefix + ("`- " if last else "|- ") + tag + node.label)
                deeper = prefix + ("   " if last else "|  ")
            edges = children[node_id]
            for i, nxt in enumerate(edges):
                walk(nxt.dst, deeper, nxt, i == len(edges) - 1)

        for root in self.roots():
            walk(root, "", None, True)
        return "\n".join(lines)

    def to_json(self) -> str:
        return json.dumps({
            "format": 1,
            "nodes": [{"id": n.id, "kind": n.kind, "label": n.label, "data": n.data}
                      for n in self.nodes.values()],
            "edges": [{"src": e.src, "dst": e.dst, "binding": e.binding,
                       "detail": e.detail} for e in self.edges],
        }, sort_keys=True, indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "CovenantGraph":
        data = json.loads(text)
        if data.get("format") != 1:
            raise CovenantError("unsupported graph format")
        graph = cls()
        for n in data["nodes"]:
            graph.add_node(GraphNode(n["id"], n["kind"], n["label"],
                                     n.get("data", {})))
        for e in data["edges"]:
            graph.add_edge(GraphEdge(e["src"], e["dst"], e["binding"],
                                     e.get("detail", "")))
        return graph


def chain_graph(chain: CovenantChain) -> CovenantGraph:
    graph = CovenantGraph()
    binding = "script" if chain.rebindable else "txid"
    for i, hop in enumerate(chain.hops):
        graph.add_node(GraphNode(
            f"deposit-{i}", "deposit",
            f"deposit-{i} {chain.mechanism.value} {hop.deposit.address()[:22]}..",
            {"script_hash": hop.deposit.address()[len("p2wsh:"):],
             "mechanism": chain.mechanism.value}))
        graph.add_node(GraphNode(
            f"tx-{i}", "transaction",
            f"tx-{i} fee={hop.fee}",
            {"txid": hop.covenant_tx.display_txid()}))
    graph.add_node(GraphNode("leaf", "output", "leaf payout",
                             {"script": chain.leaf_script.hex()}))
    for i in range(len(chain.hops)):
        graph.add_edge(GraphEdge(f"deposit-{i}", f"tx-{i}", binding,
                                 "rebindable" if chain.rebindable else "pinned"))
        dst = f"deposit-{i + 1}" if i + 1 < len(chain.hops) else "leaf"
        graph.add_edge(GraphEdge(f"tx-{i}", dst, "txid", "pays"))
    return graph
