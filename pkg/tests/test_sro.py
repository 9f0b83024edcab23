import itertools

import pytest

from fairorder.domain import ContractError
from fairorder.sro import (
    Backend,
    DprfNode,
    InsufficientValidShares,
    InvalidSignatureSet,
    RevealRequest,
    Share,
    SroConfig,
    combine_shares,
    generate_proof,
    hash_to_field,
    production_group,
    share_is_valid,
    sro_init,
    small_field_group,
    verify,
)

SEED = bytes(range(32))


def handle_for(n=4, f=1, backend=Backend.SEEDED_HASH, field=None, seed=SEED):
    return sro_init(SroConfig(n=n, f=f, backend=backend, test_field=field), seed)


def reveal_k(handle, k):
    return handle.reveal(RevealRequest(k, handle.quorum_signatures(k)))


class TestConfig:
    def test_rejects_too_few_nodes(self):
        with pytest.raises(ContractError):
            SroConfig(n=3, f=1, backend=Backend.SEEDED_HASH)

    def test_degenerate_single_node(self):
        handle = handle_for(n=1, f=0)
        assert len(reveal_k(handle, 0)) == 64

    def test_seed_length_checked(self):
        with pytest.raises(ContractError):
            handle_for(seed=b"short")

    def test_duplicate_signature_node_ids(self):
        handle = handle_for()
        sig = next(iter(handle.quorum_signatures(0)))
        with pytest.raises(ContractError):
            RevealRequest(0, frozenset({sig, (sig[0], b"other")}))


class TestRevealGating:
    @pytest.mark.parametrize("backend,field", [(Backend.SEEDED_HASH, None), (Backend.THRESHOLD_DPRF, 101)])
    def test_quorum_minus_one_rejected(self, backend, field):
        handle = handle_for(backend=backend, field=field)
        short = handle.quorum_signatures(3, node_ids=range(handle.config.quorum - 1))
        with pytest.raises(InvalidSignatureSet):
            handle.reveal(RevealRequest(3, short))

    def test_garbage_signatures_rejected(self):
        handle = handle_for()
        fake = frozenset((i, b"\x00" * 32) for i in range(4))
        with pytest.raises(InvalidSignatureSet):
            handle.reveal(RevealRequest(5, fake))

    def test_signatures_for_other_slot_rejected(self):
        handle = handle_for()
        with pytest.raises(InvalidSignatureSet):
            handle.reveal(RevealRequest(6, handle.quorum_signatures(7)))

    @pytest.mark.parametrize("backend,field", [(Backend.SEEDED_HASH, None), (Backend.THRESHOLD_DPRF, 101)])
    def test_any_valid_quorum_same_value(self, backend, field):
        handle = handle_for(backend=backend, field=field)
        values = set()
        for ids in itertools.combinations(range(4), 3):
            values.add(handle.reveal(RevealRequest(9, handle.quorum_signatures(9, node_ids=ids))))
        assert len(values) == 1


class TestDeterminism:
    def test_same_seed_same_outputs(self):
        a, b = handle_for(), handle_for()
        for k in range(5):
            assert reveal_k(a, k) == reveal_k(b, k)

    def test_repeated_reveal_identical(self):
        handle = handle_for(backend=Backend.THRESHOLD_DPRF, field=101)
        assert reveal_k(handle, 7) == reveal_k(handle, 7)

    def test_hundred_seed_pairs_no_collision(self):
        seen = set()
        for i in range(100):
            handle = handle_for(seed=bytes([i]) + SEED[1:])
            seen.add(reveal_k(handle, 0))
        assert len(seen) == 100


class TestThresholdDprf:
    def test_subset_combinations_agree_small_field(self):
        handle = handle_for(n=4, f=1, backend=Backend.THRESHOLD_DPRF, field=101)
        sigs = handle.quorum_signatures(2)
        shares = [node.produce_share(2, sigs) for node in handle.nodes]
        a = combine_shares(handle.group, [shares[0], shares[1], shares[2]])
        b = combine_shares(handle.group, [shares[1], shares[2], shares[3]])
        assert a == b == reveal_k(handle, 2)

    def test_exhaustive_quorum_subsets_n7(self):
        handle = handle_for(n=7, f=2, backend=Backend.THRESHOLD_DPRF, field=53)
        sigs = handle.quorum_signatures(11)
        shares = [node.produce_share(11, sigs) for node in handle.nodes]
        expected = reveal_k(handle, 11)
        for subset in itertools.combinations(shares, handle.config.quorum):
            assert combine_shares(handle.group, subset) == expected

    def test_node_refuses_without_quorum_signatures(self):
        handle = handle_for(backend=Backend.THRESHOLD_DPRF, field=101)
        short = handle.quorum_signatures(1, node_ids=range(handle.config.quorum - 1))
        with pytest.raises(InvalidSignatureSet):
            handle.nodes[0].produce_share(1, short)

    def test_share_against_wrong_commitment_fails(self):
        handle = handle_for(backend=Backend.THRESHOLD_DPRF, field=101)
        sigs = handle.quorum_signatures(4)
        share1 = handle.nodes[0].produce_share(4, sigs)
        crossed = Share(node_id=2, value=share1.value, proof=share1.proof)
        assert not share_is_valid(handle.group, 4, 2, crossed, handle.commitments)

    def test_single_share_tamper_detected(self):
        handle = handle_for(backend=Backend.THRESHOLD_DPRF, field=53)
        sigs = handle.quorum_signatures(8)
        for node in handle.nodes[: handle.config.quorum]:
            share = node.produce_share(8, sigs)
            assert share_is_valid(handle.group, 8, share.node_id, share, handle.commitments)
            p = handle.group.p
            for delta in range(1, p):
                bad = Share(share.node_id, (share.value + delta) % p, share.proof)
                assert not share_is_valid(handle.group, 8, bad.node_id, bad, handle.commitments)
            for bit in range(p.bit_length() + 1):
                flipped = share.value ^ (1 << bit)
                if flipped == share.value:
                    continue
                bad = Share(share.node_id, flipped, share.proof)
                assert not share_is_valid(handle.group, 8, bad.node_id, bad, handle.commitments)

    def test_byzantine_majority_of_shares_blocks_reveal(self):
        handle = handle_for(n=4, f=1, backend=Backend.THRESHOLD_DPRF, field=101)

        class LyingNode:
            def __init__(self, inner):
                self.inner = inner
                self.node_id = inner.node_id

            def produce_share(self, k, signatures):
                good = self.inner.produce_share(k, signatures)
                return Share(good.node_id, (good.value + 1) % 101, good.proof)

        handle.nodes[0] = LyingNode(handle.nodes[0])
        handle.nodes[1] = LyingNode(handle.nodes[1])
        with pytest.raises(InsufficientValidShares):
            reveal_k(handle, 3)

    def test_one_byzantine_share_tolerated(self):
        handle = handle_for(n=4, f=1, backend=Backend.THRESHOLD_DPRF, field=101)
        clean = reveal_k(handle, 12)

        class SilentNode:
            def __init__(self, node_id):
                self.node_id = node_id

            def produce_share(self, k, signatures):
                raise InvalidSignatureSet("byzantine silence")

        broken = handle_for(n=4, f=1, backend=Backend.THRESHOLD_DPRF, field=101)
        broken.nodes[0] = SilentNode(1)
        assert reveal_k(broken, 12) == clean

    def test_secrecy_exhaustive_enumeration(self):
        # Conditioning on f = 1 share leaves every value of poly(0) equally
        # likely: enumerate all degree-(quorum-1) polynomials consistent with
        # the observed share and tally the secret they would imply.
        for p in (11, 101):
            handle = handle_for(n=4, f=1, backend=Backend.THRESHOLD_DPRF, field=p)
            sigs = handle.quorum_signatures(0)
            observed = handle.nodes[0].produce_share(0, sigs)  # node_id 1
            counts = {v: 0 for v in range(p)}
            for c1 in range(p):
                for c2 in range(p):
                    # poly(1) = c0 + c1 + c2  =>  c0 determined by the share
                    c0 = (observed.value - c1 - c2) % p
                    counts[c0] += 1
            assert set(counts.values()) == {p}

    def test_production_group_large_field(self):
        group = production_group()
        assert group.p.bit_length() >= 128
        assert pow(group.g, group.p, group.q) == 1
        handle = handle_for(backend=Backend.THRESHOLD_DPRF)
        value = reveal_k(handle, 0)
        assert len(value) == 64
        assert verify(0, generate_proof(handle, 0), value)

    def test_test_group_construction(self):
        for p in (11, 53, 101):
            group = small_field_group(p)
            assert pow(group.g, group.p, group.q) == 1
            assert group.g != 1
        with pytest.raises(ContractError):
            small_field_group(100)

    def test_hash_to_field_nonzero(self):
        for k in range(200):
            assert 1 <= hash_to_field(k, 101) <= 100


class TestValidity:
    @pytest.mark.parametrize("backend,field", [(Backend.SEEDED_HASH, None), (Backend.THRESHOLD_DPRF, 101)])
    def test_proof_verifies_and_tamper_fails(self, backend, field):
        handle = handle_for(backend=backend, field=field)
        value = reveal_k(handle, 42)
        proof = generate_proof(handle, 42)
        assert verify(42, proof, value)
        tampered = bytes([value[0] ^ 1]) + value[1:]
        assert not verify(42, proof, tampered)

    def test_seeded_proof_tamper_fails(self):
        handle = handle_for()
        value = reveal_k(handle, 1)
        proof = generate_proof(handle, 1)
        bad = type(proof)(proof.backend, digest=bytes([proof.digest[0] ^ 1]) + proof.digest[1:])
        assert not verify(1, bad, value)

    def test_malformed_proof_returns_false(self):
        handle = handle_for(backend=Backend.THRESHOLD_DPRF, field=101)
        value = reveal_k(handle, 2)
        proof = generate_proof(handle, 2)
        assert not verify(2, type(proof)(proof.backend), value)
        hollow = type(proof)(
            proof.backend, group=proof.group, commitments=(), shares=proof.shares,
            quorum=proof.quorum,
        )
        assert not verify(2, hollow, value)


class TestRandomness:
    def test_chi_square_uniform_bytes(self):
        from scipy import stats

        handle = handle_for()
        counts = [0] * 256
        for k in range(2000):
            for byte in reveal_k(handle, k):
                counts[byte] += 1
        _, pvalue = stats.chisquare(counts)
        assert pvalue > 0.001
