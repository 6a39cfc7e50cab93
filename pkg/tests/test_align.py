import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cnvote.align import (ConfusionNetwork, align_pair, build_network, dump_networks,
                          load_networks, merge_slot, network_from_json, network_to_json,
                          select_primary)
from cnvote.corpus import EPSILON
from cnvote.errors import FormatError

from oracles import exhaustive_ter_edits

words = st.sampled_from(["a", "b", "c", "d", "e"])
hyp = st.lists(words, min_size=1, max_size=6).map(tuple)


def _oracle_alignment_cost(slots, h):
    """Min cost over all monotone alignments, by brute-force recursion."""
    sets = [set(s) - {EPSILON} for s in slots]

    def go(i, j, memo={}):
        key = (i, j, id(sets))
        if key in memo:
            return memo[key]
        if i == len(h):
            r = len(sets) - j
        elif j == len(sets):
            r = len(h) - i
        else:
            r = min(go(i + 1, j + 1) + (h[i] not in sets[j]), go(i + 1, j) + 1, go(i, j + 1) + 1)
        memo[key] = r
        return r
    return go(0, 0, {})


class TestSelectPrimary:
    def test_identical(self):
        assert select_primary([("a", "b")] * 3) == 0

    def test_sample(self, sample_hyps):
        assert select_primary(sample_hyps) == 2

    def test_sample_mean_ter_by_exhaustive_oracle(self, sample_hyps):
        means = []
        for i, r in enumerate(sample_hyps):
            vals = [exhaustive_ter_edits(h, r) / len(r) for j, h in enumerate(sample_hyps) if j != i]
            means.append(sum(vals) / len(vals))
        assert means[2] == means[3] == pytest.approx(7 / 9)
        assert means[0] == means[1] == pytest.approx(1.0)

    def test_two_equal_length_systems(self):
        assert select_primary([("a", "b", "c"), ("b", "c", "d")]) == 0

    def test_empty_hypothesis_not_primary(self):
        assert select_primary([(), ("a",), ("a",)]) == 1

    @settings(max_examples=40, deadline=None)
    @given(st.lists(hyp, min_size=3, max_size=4), st.randoms(use_true_random=False))
    def test_chosen_sentence_permutation_invariant(self, hyps, rnd):
        chosen = hyps[select_primary(hyps)]
        perm = list(hyps)
        rnd.shuffle(perm)
        # the chosen string survives permutation unless another string ties with it
        other = perm[select_primary(perm)]
        from cnvote.align import _pairwise_ter
        from cnvote.metrics import MetricConfig
        t = _pairwise_ter(hyps, MetricConfig())
        n = len(hyps)
        cost = {hyps[i]: sum(t[j][i] for j in range(n) if j != i) for i in range(n)}
        assert cost[other] == pytest.approx(cost[chosen])


class TestAlignPair:
    def test_identity(self):
        pairs = align_pair([["a"], ["b"]], ("a", "b"))
        assert pairs == [(0, 0), (1, 1)]

    def test_insertion(self):
        cn = build_network([("a", "car"), ("a", "red", "car")])
        assert cn.slots == (("a", "a"), (EPSILON, "red"), ("car", "car"))

    def test_sample_three_substitution_slots(self):
        pairs = align_pair([["the"], ["black"], ["cab"]], ("an", "red", "train"))
        assert pairs == [(0, 0), (1, 1), (2, 2)]

    def test_match_any_word_in_slot_is_free(self):
        pairs = align_pair([["x", "y"], ["z"]], ("y", "z"))
        assert pairs == [(0, 0), (1, 1)]

    @settings(max_examples=150, deadline=None)
    @given(st.lists(st.lists(words, min_size=1, max_size=3), min_size=1, max_size=5), hyp)
    def test_minimal_cost(self, slots, h):
        pairs = align_pair(slots, h)
        sets = [set(s) for s in slots]
        cost = sum(1 if j is None or i is None else (h[i] not in sets[j]) for j, i in pairs)
        assert cost == _oracle_alignment_cost(slots, h)
        assert [i for _, i in pairs if i is not None] == list(range(len(h)))
        assert [j for j, _ in pairs if j is not None] == list(range(len(slots)))


class TestBuildNetwork:
    def test_sample(self, sample_network):
        cn = sample_network
        assert cn.primary_id == 2
        assert cn.slots == (("the", "an", "a", "a"), ("black", "red", "orange", "green"),
                            ("cab", "train", "car", "car"))

    def test_identical(self):
        cn = build_network([("x", "y", "z")] * 3)
        assert len(cn) == 3
        assert all(len(set(s)) == 1 for s in cn.slots)

    def test_two_systems_shifted(self):
        cn = build_network([("a", "b", "c"), ("b", "c", "d")])
        assert cn.slots == (("a", EPSILON), ("b", "b"), ("c", "c"), (EPSILON, "d"))

    def test_empty_hypothesis_becomes_epsilon_row(self, caplog):
        cn = build_network([("a", "b"), (), ("a", "c")])
        assert all(s[1] == EPSILON for s in cn.slots)
        assert "empty" in caplog.text

    @settings(max_examples=150, deadline=None)
    @given(st.lists(hyp, min_size=2, max_size=5))
    def test_invariants(self, hyps):
        cn = build_network(hyps)
        for i, h in enumerate(hyps):
            assert cn.system_path(i) == h
        assert max(map(len, hyps)) <= len(cn) <= sum(map(len, hyps))
        for j in range(len(cn)):
            assert len(cn.slots[j]) == len(hyps)
            assert any(w != EPSILON for w in cn.slots[j])
            merged = merge_slot(cn.slots[j])
            covered = sorted(itertools.chain.from_iterable(m.support for m in merged))
            assert covered == list(range(len(hyps)))

    def test_slot_validation(self):
        with pytest.raises(ValueError):
            ConfusionNetwork(((EPSILON, EPSILON),), 2, 0)
        with pytest.raises(ValueError):
            ConfusionNetwork((("a",),), 2, 0)


class TestMergeSlot:
    def test_all_same(self):
        [m] = merge_slot(("a",) * 4)
        assert m.word == "a" and m.support == frozenset(range(4))

    def test_sample_first_column(self):
        got = [(m.word, set(m.support)) for m in merge_slot(("the", "an", "a", "a"))]
        assert got == [("the", {0}), ("an", {1}), ("a", {2, 3})]

    def test_with_epsilon(self):
        got = [(m.word, set(m.support)) for m in merge_slot(("cab", EPSILON, "car", "car"))]
        assert got == [("cab", {0}), (EPSILON, {1}), ("car", {2, 3})]


class TestDump:
    def test_round_trip(self, tmp_path, sample_network):
        rng = np.random.default_rng(0)
        nets = [sample_network]
        for s in range(10):
            hyps = [tuple(f"w{x}" for x in rng.integers(0, 6, size=rng.integers(1, 6))) for _ in range(3)]
            nets.append(build_network(hyps, s + 1))
        p = tmp_path / "cn.jsonl"
        dump_networks(nets, p)
        back = load_networks(p)
        assert back == nets
        p2 = tmp_path / "cn2.jsonl"
        dump_networks(back, p2)
        assert p.read_bytes() == p2.read_bytes()

    def test_record_fields(self, sample_network):
        import json
        rec = json.loads(network_to_json(sample_network))
        assert rec["sentence_index"] == 0 and rec["primary_id"] == 2
        assert rec["slots"][0] == ["the", "an", "a", "a"]

    def test_bad_record(self):
        with pytest.raises(FormatError):
            network_from_json('{"sentence_index": 0}')
