"""Chain building, rebinding, disjoint spends, fee machinery, graphs."""

import json
import random

import pytest

from covenantkit import curvecrypto
from covenantkit.compose import (CovenantGraph, GraphEdge, GraphNode,
                                 NOMINAL_HOP_SIZE, RBF_SEQUENCE, add_fee_input,
                                 build_chain, build_disjoint,
                                 build_multi_deposit, chain_graph, cpfp_child,
                                 enumerate_fee_variants, pin_transaction,
                                 rebind)
from covenantkit.curvecrypto import PrivateKey, der_encode_signature
from covenantkit.mechanisms import (CovenantError, CustodialPolicy,
                                    EnforcementPolicy, Mechanism,
                                    build_deposit, spend_deposit)
from covenantkit.sighash import (SIGHASH_SINGLE, SigHashType,
                                 SpentOutputContext, sighash_digest)
from covenantkit.txcore import (Amount, OutPoint, Script, Transaction,
                                TxInput, TxOutput)
from covenantkit.validator import ChainState, R_MISSING_UTXO


def custody_setup(rng):
    privs = [PrivateKey.generate(rng) for _ in range(3)]
    policy = CustodialPolicy(2, tuple(k.public_key() for k in privs))
    return policy, privs


def fund(chain_state, output):
    block = chain_state.mine_block(coinbase_outputs=[output])
    return OutPoint(block.txs[0].txid(), 0)


def submit_all(chain_state, txs):
    for tx in txs:
        res = chain_state.submit(tx)
        assert res.status == "accepted", (res.reason, res.detail)


class TestChains:
    @pytest.mark.parametrize("mechanism", [Mechanism.RECOVERED_KEY,
                                           Mechanism.CTV])
    def test_rebindable_chain_validates_anywhere(self, mechanism):
        rng = random.Random(600)
        custody, keys = custody_setup(rng)
        chain = build_chain(mechanism, 3, 100_000, custody=custody,
                            custodial_keys=keys)
        assert chain.rebindable and len(chain.hops) == 3
        state = ChainState(confirmation_depth=1)
        op_a = fund(state, chain.entry_output())
        op_b = fund(state, chain.entry_output())
        submit_all(state, chain.bind(op_a))
        # the same pre-signed chain re-pointed at a second funding
        submit_all(state, chain.bind(op_b))
        state.mine_block()

    def test_deleted_key_chain_bound_to_its_outpoint(self):
        custody, keys = custody_setup(random.Random(601))
        state = ChainState(confirmation_depth=1)
        probe = build_chain(Mechanism.DELETED_KEY, 3, 100_000, custody=custody,
                            custodial_keys=keys,
                            funding_outpoint=OutPoint(b"\x00" * 32, 0),
                            rng=random.Random(77))
        op = fund(state, probe.entry_output())
        # same rng seed regenerates the same hop keys, so the rebuilt
        # chain starts at the same entry address with real signatures
        chain = build_chain(Mechanism.DELETED_KEY, 3, 100_000, custody=custody,
                            custodial_keys=keys, funding_outpoint=op,
                            rng=random.Random(77))
        assert chain.entry_address() == probe.entry_address()
        assert not chain.rebindable
        submit_all(state, chain.bind(op))

    def test_deleted_key_chain_rejected_elsewhere(self):
        custody, keys = custody_setup(random.Random(602))
        state = ChainState(confirmation_depth=1)
        probe = build_chain(Mechanism.DELETED_KEY, 2, 100_000, custody=custody,
                            custodial_keys=keys,
                            funding_outpoint=OutPoint(b"\x00" * 32, 0),
                            rng=random.Random(78))
        op_a = fund(state, probe.entry_output())
        op_b = fund(state, probe.entry_output())
        chain = build_chain(Mechanism.DELETED_KEY, 2, 100_000, custody=custody,
                            custodial_keys=keys, funding_outpoint=op_a,
                            rng=random.Random(78))
        res = state.submit(chain.bind(op_b)[0])
        assert res.status == "rejected"

    def test_fee_schedule_controls_hop_amounts(self):
        custody, keys = custody_setup(random.Random(603))
        chain = build_chain(Mechanism.CTV, 3, 50_000, custody=custody,
                            custodial_keys=keys, fee=[500, 1_000, 2_000])
        amounts = [int(h.covenant_tx.outputs[0].amount) for h in chain.hops]
        assert amounts == [49_500, 48_500, 46_500]
        assert [h.fee for h in chain.hops] == [500, 1_000, 2_000]

    def test_build_validation(self):
        custody, keys = custody_setup(random.Random(604))
        with pytest.raises(CovenantError):
            build_chain(Mechanism.CTV, 0, 1_000, custody=custody)
        with pytest.raises(CovenantError):
            build_chain(Mechanism.CTV, 2, 1_000, custody=custody, fee=[1])
        with pytest.raises(CovenantError):
            build_chain(Mechanism.CTV, 2, 1_000, custody=custody, fee=-1)
        with pytest.raises(CovenantError):
            build_chain(Mechanism.CTV, 2, 1_000, custody=custody, fee=600)
        with pytest.raises(CovenantError):
            build_chain(Mechanism.CTV, 1, 1_000)
        with pytest.raises(CovenantError):
            build_chain(Mechanism.DELETED_KEY, 1, 1_000, custody=custody,
                        custodial_keys=keys)

    def test_seeded_style_chain(self):
        rng = random.Random(605)
        custody, keys = custody_setup(rng)
        chain = build_chain(Mechanism.RECOVERED_KEY, 2, 40_000, custody=custody,
                            custodial_keys=keys, style="seeded",
                            seed_prefix="t-seeded")
        state = ChainState(confirmation_depth=1)
        op = fund(state, chain.entry_output())
        submit_all(state, chain.bind(op))


class TestFeeInput:
    def test_noinput_chain_tolerates_added_fee_input(self):
        rng = random.Random(606)
        custody, keys = custody_setup(rng)
        wallet_key = PrivateKey.generate(rng)
        wallet = build_deposit(Mechanism.DELETED_KEY,
                               EnforcementPolicy(1, (wallet_key.public_key(),)))
        chain = build_chain(Mechanism.RECOVERED_KEY, 3, 100_000,
                            custody=custody, custodial_keys=keys)
        state = ChainState(confirmation_depth=1)
        op = fund(state, chain.entry_output())
        fee_op = fund(state, wallet.output(Amount(7_000)))
        txs = chain.bind(op)
        boosted = add_fee_input(txs[1], fee_op, Amount(7_000), wallet,
                                [wallet_key])
        assert boosted.txid() != txs[1].txid()
        assert len(boosted.inputs) == 2
        # the child hop re-points at the boosted txid and stays valid
        tail = rebind(txs[2], 0, OutPoint(boosted.txid(), 0))
        submit_all(state, [txs[0], boosted, tail])
        state.mine_block()

    def test_txid_committing_chain_breaks_on_added_input(self):
        rng = random.Random(607)
        custody, keys = custody_setup(rng)
        wallet_key = PrivateKey.generate(rng)
        wallet = build_deposit(Mechanism.DELETED_KEY,
                               EnforcementPolicy(1, (wallet_key.public_key(),)))
        state = ChainState(confirmation_depth=1)
        probe = build_chain(Mechanism.DELETED_KEY, 2, 100_000, custody=custody,
                            custodial_keys=keys,
                            funding_outpoint=OutPoint(b"\x00" * 32, 0),
                            rng=random.Random(79))
        op = fund(state, probe.entry_output())
        fee_op = fund(state, wallet.output(Amount(7_000)))
        chain = build_chain(Mechanism.DELETED_KEY, 2, 100_000, custody=custody,
                            custodial_keys=keys, funding_outpoint=op,
                            rng=random.Random(79))
        txs = chain.bind(op)
        assert state.submit(txs[0]).status == "accepted"
        boosted = add_fee_input(txs[1], fee_op, Amount(7_000), wallet,
                                [wallet_key])
        res = state.submit(boosted)
        assert res.status == "rejected"


class TestDisjoint:
    def branch_outputs(self, rng):
        a = build_deposit(Mechanism.DELETED_KEY,
                          EnforcementPolicy(1, (PrivateKey.generate(rng).public_key(),)))
        b = build_deposit(Mechanism.DELETED_KEY,
                          EnforcementPolicy(1, (PrivateKey.generate(rng).public_key(),)))
        return ((a.output(Amount(48_000)),), (b.output(Amount(47_000)),))

    @pytest.mark.parametrize("mechanism", [Mechanism.DELETED_KEY,
                                           Mechanism.RECOVERED_KEY,
                                           Mechanism.CTV])
    def test_confirming_one_branch_excludes_the_other(self, mechanism):
        for first, second in ((0, 1), (1, 0)):
            rng = random.Random(608 + first)
            custody, keys = custody_setup(rng)
            branches = self.branch_outputs(rng)
            state = ChainState(confirmation_depth=1)
            if mechanism is Mechanism.DELETED_KEY:
                build_rng = random.Random(80)
                probe = build_disjoint(mechanism, 50_000, branches,
                                       custody=custody, custodial_keys=keys,
                                       funding_outpoint=OutPoint(b"\x00" * 32, 0),
                                       rng=build_rng)
                op = fund(state, probe.entry_output())
                cov = build_disjoint(mechanism, 50_000, branches,
                                     custody=custody, custodial_keys=keys,
                                     funding_outpoint=op, rng=random.Random(80))
            else:
                cov = build_disjoint(mechanism, 50_000, branches,
                                     custody=custody, custodial_keys=keys)
                op = fund(state, cov.entry_output())
            assert state.submit(cov.bind(first, op)).status == "accepted"
            state.mine_block()
            res = state.submit(cov.bind(second, op))
            assert res.status == "rejected" and res.reason == R_MISSING_UTXO

    def test_branches_conflict_in_mempool(self):
        rng = random.Random(610)
        custody, keys = custody_setup(rng)
        cov = build_disjoint(Mechanism.CTV, 50_000, self.branch_outputs(rng),
                             custody=custody, custodial_keys=keys)
        state = ChainState(confirmation_depth=1)
        op = fund(state, cov.entry_output())
        assert state.submit(cov.bind(0, op)).status == "accepted"
        res = state.submit(cov.bind(1, op))
        assert res.status == "rejected"

    def test_branch_fee_validation(self):
        rng = random.Random(611)
        custody, _ = custody_setup(rng)
        dest = build_deposit(Mechanism.DELETED_KEY,
                             EnforcementPolicy(1, (PrivateKey.generate(rng).public_key(),)))
        with pytest.raises(CovenantError):
            build_disjoint(Mechanism.CTV, 50_000,
                           ((dest.output(Amount(50_000)),),
                            (dest.output(Amount(1_000)),)),
                           custody=custody)


class TestMultiDeposit:
    def build(self, rng_seed=612):
        rng = random.Random(rng_seed)
        custody, keys = custody_setup(rng)
        refund_priv = PrivateKey.generate(rng)
        multi = build_multi_deposit(Mechanism.RECOVERED_KEY,
                                    [30_000, 20_000, 10_000], 12,
                                    refund_priv.public_key(), custody=custody,
                                    custodial_keys=keys)
        state = ChainState(confirmation_depth=1)
        block = state.mine_block(coinbase_outputs=list(multi.funding_outputs()))
        ops = [OutPoint(block.txs[0].txid(), i) for i in range(3)]
        return multi, state, ops, refund_priv

    def test_each_deposit_spends_through_covenant(self):
        multi, state, ops, _ = self.build()
        submit_all(state, [multi.bind(i, ops[i]) for i in range(3)])
        state.mine_block()

    def test_refund_arm_is_timelocked(self):
        multi, state, ops, refund_priv = self.build()
        dest = (TxOutput(Amount(9_000), multi.deposits[0].lock_script()),)
        refund = multi.refund_tx(2, ops[2], refund_priv, dest)
        assert refund.locktime == 12
        res = state.submit(refund)
        assert res.status == "rejected"   # chain height below refund height
        while state.height < 12:
            state.mine_block()
        assert state.submit(refund).status == "accepted"

    def test_refund_key_checked(self):
        multi, state, ops, _ = self.build()
        stranger = PrivateKey.generate(random.Random(613))
        with pytest.raises(CovenantError):
            multi.refund_tx(0, ops[0], stranger,
                            (TxOutput(Amount(1_000), multi.deposits[0].lock_script()),))

    def test_deleted_key_refused(self):
        rng = random.Random(614)
        custody, _ = custody_setup(rng)
        with pytest.raises(CovenantError):
            build_multi_deposit(Mechanism.DELETED_KEY, [10_000], 5,
                                PrivateKey.generate(rng).public_key(),
                                custody=custody)


class TestFeeVariants:
    def test_two_rates_three_hops_gives_eight_chains(self):
        rng = random.Random(615)
        custody, keys = custody_setup(rng)
        variants = enumerate_fee_variants(Mechanism.CTV, 3, 200_000, [1, 5],
                                          custody=custody, custodial_keys=keys)
        assert len(variants) == 8
        combos = {v.feerates for v in variants}
        assert len(combos) == 8
        for v in variants:
            assert v.fees == tuple(r * NOMINAL_HOP_SIZE for r in v.feerates)
            assert all(tx.inputs[0].sequence == RBF_SEQUENCE
                       for tx in (h.covenant_tx for h in v.chain.hops))

    def test_variant_chains_validate(self):
        rng = random.Random(616)
        custody, keys = custody_setup(rng)
        variants = enumerate_fee_variants(Mechanism.RECOVERED_KEY, 2, 100_000,
                                          [2, 4], custody=custody,
                                          custodial_keys=keys)
        assert len(variants) == 4
        state = ChainState(confirmation_depth=1)
        chosen = variants[-1]
        op = fund(state, chosen.chain.entry_output())
        submit_all(state, chosen.chain.bind(op))

    def test_cap_refusal_names_count(self):
        rng = random.Random(617)
        custody, _ = custody_setup(rng)
        with pytest.raises(CovenantError) as exc:
            enumerate_fee_variants(Mechanism.CTV, 13, 10_000_000, [1, 2],
                                   custody=custody)
        assert "8192" in str(exc.value)


class TestCpfp:
    def test_child_lifts_package_feerate(self):
        rng = random.Random(618)
        key = PrivateKey.generate(rng)
        wallet = build_deposit(Mechanism.DELETED_KEY,
                               EnforcementPolicy(1, (key.public_key(),)))
        state = ChainState(confirmation_depth=1)
        op = fund(state, wallet.output(Amount(200_000)))
        # zero-fee parent: all value moves to the next wallet output
        parent = spend_deposit(wallet, op, Amount(200_000),
                               (wallet.output(Amount(200_000)),),
                               enforcement_keys=[key])
        child = cpfp_child(parent, 0, 0, wallet, [key],
                           wallet.lock_script(), 10.0)
        assert state.submit(parent).status == "accepted"
        assert state.submit(child).status == "accepted"
        block = state.mine_block()
        ids = [t.txid() for t in block.txs]
        assert parent.txid() in ids and child.txid() in ids
        package_rate = block.fees / (parent.size() + child.size())
        assert package_rate >= 10.0

    def test_deposit_must_match_parent_output(self):
        rng = random.Random(619)
        key = PrivateKey.generate(rng)
        wallet = build_deposit(Mechanism.DELETED_KEY,
                               EnforcementPolicy(1, (key.public_key(),)))
        other = build_deposit(Mechanism.DELETED_KEY,
                              EnforcementPolicy(1, (PrivateKey.generate(rng).public_key(),)))
        parent = Transaction(2, (TxInput(OutPoint(b"\x01" * 32, 0), 0),),
                             (wallet.output(Amount(5_000)),), 0)
        with pytest.raises(CovenantError):
            cpfp_child(parent, 0, 0, other, [key], wallet.lock_script(), 2.0)


def single_acp_spend(deposit, key, outpoint, amount, output):
    t = SigHashType(SIGHASH_SINGLE, anyonecanpay=True)
    tx = Transaction(2, (TxInput(outpoint, 0xFFFFFFFD),), (output,), 0)
    ctx = SpentOutputContext(deposit.witness_script, Amount(amount))
    digest = sighash_digest(tx, 0, ctx, t)
    item = (der_encode_signature(curvecrypto.sign(key, digest))
            + bytes([t.to_byte()]))
    witness = (item, deposit.witness_script.data)
    return Transaction(2, (TxInput(outpoint, 0xFFFFFFFD, witness),), (output,), 0)


class TestPinning:
    def setup_parties(self, rng_seed=620):
        rng = random.Random(rng_seed)
        vic_key = PrivateKey.generate(rng)
        victim_dep = build_deposit(
            Mechanism.DELETED_KEY,
            EnforcementPolicy(1, (vic_key.public_key(),)))
        atk_key = PrivateKey.generate(rng)
        attacker_dep = build_deposit(
            Mechanism.DELETED_KEY,
            EnforcementPolicy(1, (atk_key.public_key(),)))
        state = ChainState(confirmation_depth=1)
        vic_op = fund(state, victim_dep.output(Amount(50_000)))
        atk_op = fund(state, attacker_dep.output(Amount(100_000)))
        victim = single_acp_spend(victim_dep, vic_key, vic_op, 50_000,
                                  victim_dep.output(Amount(48_000)))
        return state, victim, vic_op, atk_op, attacker_dep, atk_key

    def test_pin_is_a_valid_conflict(self):
        state, victim, vic_op, atk_op, attacker_dep, atk_key = self.setup_parties()
        pin = pin_transaction(victim, atk_op, 100_000, attacker_dep,
                              [atk_key], pin_fee=3_000)
        assert pin.inputs[0].witness == victim.inputs[0].witness
        assert pin.inputs[0].previous == vic_op
        assert len(pin.outputs) == 1 + 25 + 1
        assert state.submit(pin).status == "accepted"
        assert pin.size() > victim.size() * 3

    def test_requires_acp_single_signature(self):
        state, victim, _, atk_op, attacker_dep, atk_key = self.setup_parties(621)
        plain = Transaction(victim.version, victim.inputs, victim.outputs, 0)
        stripped = TxInput(plain.inputs[0].previous, 0xFFFFFFFD,
                           (plain.inputs[0].witness[0][:-1] + b"\x01",
                            plain.inputs[0].witness[1]))
        bad = Transaction(2, (stripped,), plain.outputs, 0)
        with pytest.raises(CovenantError):
            pin_transaction(bad, atk_op, 100_000, attacker_dep, [atk_key],
                            pin_fee=3_000)

    def test_funds_must_cover_pin(self):
        state, victim, _, atk_op, attacker_dep, atk_key = self.setup_parties(622)
        with pytest.raises(CovenantError):
            pin_transaction(victim, atk_op, 10_000, attacker_dep, [atk_key],
                            pin_fee=3_000)


class TestGraphs:
    def test_chain_graph_bindings(self):
        rng = random.Random(623)
        custody, keys = custody_setup(rng)
        chain = build_chain(Mechanism.RECOVERED_KEY, 2, 60_000, custody=custody,
                            custodial_keys=keys)
        graph = chain_graph(chain)
        assert graph.roots() == ["deposit-0"]
        bindings = {(e.src, e.dst): e.binding for e in graph.edges}
        assert bindings[("deposit-0", "tx-0")] == "script"
        assert bindings[("tx-0", "deposit-1")] == "txid"
        assert bindings[("tx-1", "leaf")] == "txid"
        entry_edge = graph.edges[0]
        assert graph.compatible_output(entry_edge, chain.entry_output())
        txid_edge = graph.edges[1]
        assert not graph.compatible_output(txid_edge, chain.entry_output())

    def test_pinned_chain_uses_txid_bindings(self):
        custody, keys = custody_setup(random.Random(624))
        chain = build_chain(Mechanism.DELETED_KEY, 2, 60_000, custody=custody,
                            custodial_keys=keys,
                            funding_outpoint=OutPoint(b"\x02" * 32, 1),
                            rng=random.Random(81))
        graph = chain_graph(chain)
        assert all(e.binding == "txid" for e in graph.edges)

    def test_render_and_json_round_trip(self):
        custody, keys = custody_setup(random.Random(625))
        chain = build_chain(Mechanism.CTV, 2, 60_000, custody=custody,
                            custodial_keys=keys)
        graph = chain_graph(chain)
        text = graph.render()
        assert "deposit-0 ctv" in text and "[script]" in text and "leaf" in text
        again = CovenantGraph.from_json(graph.to_json())
        assert again.render() == text
        assert json.loads(again.to_json()) == json.loads(graph.to_json())

    def test_structural_rules(self):
        g = CovenantGraph()
        g.add_node(GraphNode("a", "deposit", "a"))
        g.add_node(GraphNode("b", "transaction", "b"))
        with pytest.raises(CovenantError):
            g.add_node(GraphNode("a", "deposit", "dup"))
        with pytest.raises(CovenantError):
            g.add_edge(GraphEdge("a", "missing", "txid"))
        with pytest.raises(CovenantError):
            g.add_edge(GraphEdge("a", "b", "hash"))
        g.add_edge(GraphEdge("a", "b", "txid"))
        with pytest.raises(CovenantError):
            g.add_edge(GraphEdge("b", "a", "txid"))
        assert len(g.edges) == 1
