"""Witten-Bell interpolated trigram language model over system outputs."""

from __future__ import annotations

import math
from collections import Counter, defaultdict

from .corpus import BOS, NN_UNK

EOS = "</s>"


class TrigramLM:
    """p(w | u v) = (c(u v w) + T(u v) p(w | v)) / (c(u v) + T(u v)),
    recursing down to a unigram level interpolated with the uniform
    distribution over the vocabulary (observed words, ``</s>``, ``<unk>``)."""

    def __init__(self, sentences):
        self.uni = Counter()
        self.bi = defaultdict(Counter)
        self.tri = defaultdict(Counter)
        for sent in sentences:
            toks = [BOS, BOS] + list(sent) + [EOS]
            for i in range(2, len(toks)):
                u, v, w = toks[i - 2], toks[i - 1], toks[i]
                self.uni[w] += 1
                self.bi[v][w] += 1
                self.tri[(u, v)][w] += 1
        self.vocab = sorted(set(self.uni) | {EOS, NN_UNK})
        self._known = set(self.uni)
        self._n = sum(self.uni.values())
        self._bi_tot = {v: (sum(c.values()), len(c)) for v, c in self.bi.items()}
        self._tri_tot = {h: (sum(c.values()), len(c)) for h, c in self.tri.items()}
        self._cache = {}

    def _map(self, w):
        return w if w in self._known or w == BOS else NN_UNK

    def p_unigram(self, w) -> float:
        types = len(self.uni)
        return (self.uni.get(w, 0) + types / len(self.vocab)) / (self._n + types)

    def p_bigram(self, w, v) -> float:
        lower = self.p_unigram(w)
        tot = self._bi_tot.get(v)
        if tot is None:
            return lower
        c, t = tot
        return (self.bi[v].get(w, 0) + t * lower) / (c + t)

    def prob(self, w, u, v) -> float:
        key = (w, u, v)
        p = self._cache.get(key)
        if p is None:
            w2, u2, v2 = self._map(w), self._map(u), self._map(v)
            lower = self.p_bigram(w2, v2)
            tot = self._tri_tot.get((u2, v2))
            if tot is None:
                p = lower
            else:
                c, t = tot
                p = (self.tri[(u2, v2)].get(w2, 0) + t * lower) / (c + t)
            self._cache[key] = p
        return p

    def logprob(self, w, u=BOS, v=BOS) -> float:
        return math.log(self.prob(w, u, v))

    def sentence_logprob(self, sent) -> float:
        u, v = BOS, BOS
        total = 0.0
        for w in list(sent) + [EOS]:
            total += self.logprob(w, u, v)
            u, v = v, w
        return total


def train_lm(corpus) -> TrigramLM:
    """Pool every system's every sentence."""
    sents = [s for sysout in corpus.systems for s in sysout.sentences]
    return TrigramLM(sents)
