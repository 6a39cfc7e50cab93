import json

import numpy as np
import pytest

from cnvote.align import ConfusionNetwork, build_network, merge_slot
from cnvote.corpus import EPSILON, UNK
from cnvote.errors import DomainError
from cnvote.metrics import sentence_bleu
from cnvote.oracle import (OracleConfig, extract_oracle, oracle_corpus, read_decisions,
                           simplify_unk, write_decisions)

from conftest import random_network, random_reference
from oracles import brute_sbleu, enumerate_paths


def _exhaustive_best(cn, ref):
    return max(brute_sbleu(p, ref) for p in enumerate_paths(cn.slots))


class TestSimplifyUnk:
    def test_sample_middle_slot(self, sample_network, sample_ref):
        s = simplify_unk(sample_network, sample_ref)
        assert s.slots[1] == (UNK,) * 4
        assert s.slots[0] == ("the", UNK, UNK, UNK)
        assert s.slots[2] == (UNK, UNK, "car", "car")

    def test_all_in_reference_unchanged(self):
        cn = ConfusionNetwork((("the", "blue"),), 2, 0)
        assert simplify_unk(cn, ("the", "blue", "car")) == cn

    def test_per_word_rule_keeps_epsilon(self):
        cn = ConfusionNetwork((("cab", EPSILON, "car", "car"),), 4, 0)
        assert simplify_unk(cn, ("the", "blue", "car")).slots[0] == (UNK, EPSILON, "car", "car")

    def test_empty_reference(self, sample_network):
        with pytest.raises(DomainError):
            simplify_unk(sample_network, ())


class TestExtractOracle:
    def test_sample_simplified(self, sample_network, sample_ref):
        path = extract_oracle(simplify_unk(sample_network, sample_ref), sample_ref)
        assert path.words == ("the", UNK, "car")
        assert abs(path.sbleu - brute_sbleu(("the", UNK, "car"), sample_ref)) < 1e-12

    def test_sample_raw_same_pattern(self, sample_network, sample_ref):
        path = extract_oracle(sample_network, sample_ref)
        assert path.words[0] == "the" and path.words[2] == "car"
        assert abs(path.sbleu - 0.5946035575013605) < 1e-12

    def test_reference_equal_system(self):
        cn = build_network([("x", "y"), ("a", "b", "c"), ("a", "q", "c")])
        path = extract_oracle(cn, ("a", "b", "c"))
        assert path.sbleu == 1.0
        assert path.words == ("a", "b", "c")

    def test_empty_network(self):
        with pytest.raises(DomainError):
            extract_oracle(ConfusionNetwork((), 2, 0), ("a",))

    def test_exhaustive_on_random_networks(self):
        rng = np.random.default_rng(11)
        for _ in range(200):
            cn = random_network(rng)
            ref = random_reference(rng)
            path = extract_oracle(cn, ref, OracleConfig(k=None))
            assert path.sbleu == pytest.approx(_exhaustive_best(cn, ref), abs=1e-12)

    def test_unk_invariance(self):
        rng = np.random.default_rng(12)
        for _ in range(100):
            cn = random_network(rng, vocab=14)
            ref = random_reference(rng, vocab=14)
            raw = extract_oracle(cn, ref, OracleConfig(k=None)).sbleu
            simp = extract_oracle(simplify_unk(cn, ref), ref, OracleConfig(k=None)).sbleu
            assert raw == pytest.approx(simp, abs=1e-12)

    def test_unbounded_k_dominates_every_finite_k(self):
        rng = np.random.default_rng(13)
        for _ in range(100):
            cn = random_network(rng)
            ref = random_reference(rng)
            full = extract_oracle(cn, ref, OracleConfig(k=None)).sbleu
            for k in (1, 3, 10):
                assert extract_oracle(cn, ref, OracleConfig(k=k)).sbleu <= full + 1e-15

    def test_large_k_is_exact(self):
        rng = np.random.default_rng(14)
        for _ in range(50):
            cn = random_network(rng, max_slots=5)
            ref = random_reference(rng)
            bound = len(enumerate_paths(cn.slots))
            a = extract_oracle(cn, ref, OracleConfig(k=bound)).sbleu
            assert a == extract_oracle(cn, ref, OracleConfig(k=None)).sbleu

    def test_path_consistency(self):
        rng = np.random.default_rng(15)
        for _ in range(100):
            cn = random_network(rng)
            ref = random_reference(rng)
            path = extract_oracle(cn, ref, OracleConfig(k=5))
            assert len(path.decisions) == len(cn)
            assert path.words == tuple(d.word for d in path.decisions if d.word != EPSILON)
            assert path.sbleu == sentence_bleu(path.words, ref)
            for j, d in enumerate(path.decisions):
                assert d in merge_slot(cn.slots[j])

    def test_dominates_every_system(self):
        rng = np.random.default_rng(16)
        for _ in range(50):
            hyps = [random_reference(rng, max_len=6) for _ in range(4)]
            ref = random_reference(rng)
            cn = build_network(hyps)
            best = extract_oracle(cn, ref, OracleConfig(k=None)).sbleu
            for h in hyps:
                assert best >= sentence_bleu(h, ref) - 1e-15

    def test_model_tiebreak(self):
        # both paths score identically against the reference
        cn = ConfusionNetwork((("a", "a"), ("x", "y")), 2, 0)
        favor_y = lambda j, arc, words: 1.0 if arc.word == "y" else 0.0
        assert extract_oracle(cn, ("a", "b"), scorer=favor_y).words == ("a", "y")
        assert extract_oracle(cn, ("a", "b")).words == ("a", "x")
        no_tb = OracleConfig(use_model_tiebreak=False)
        assert extract_oracle(cn, ("a", "b"), no_tb, scorer=favor_y).words == ("a", "x")

    def test_k_validated(self):
        with pytest.raises(ValueError):
            OracleConfig(k=0)


class TestOracleCorpus:
    def test_reference_system_gives_perfect_bleu(self):
        refs = [("a", "b", "c", "d", "e"), ("f", "g", "h", "i")]
        nets = [build_network([r, ("z",) * 3], i) for i, r in enumerate(refs)]
        _, stats = oracle_corpus(nets, refs)
        assert stats["bleu"] == 1.0 and stats["ter"] == 0.0

    def test_k_trend_and_determinism(self):
        rng = np.random.default_rng(17)
        nets = [random_network(rng, sentence_index=i) for i in range(60)]
        refs = [random_reference(rng) for _ in range(60)]
        _, s1 = oracle_corpus(nets, refs, OracleConfig(k=1))
        _, s100 = oracle_corpus(nets, refs, OracleConfig(k=100))
        _, again = oracle_corpus(nets, refs, OracleConfig(k=100))
        assert s100["criterion"] <= s1["criterion"]
        assert again == s100


class TestDecisionFile:
    def test_round_trip(self, tmp_path, sample_network, sample_ref):
        path = extract_oracle(simplify_unk(sample_network, sample_ref), sample_ref)
        f = tmp_path / "d.jsonl"
        write_decisions([path], f)
        rec = json.loads(f.read_text().splitlines()[0])
        assert rec["sentence_index"] == 0 and rec["decisions"] == ["the", UNK, "car"]
        assert read_decisions(f) == {0: ["the", UNK, "car"]}
