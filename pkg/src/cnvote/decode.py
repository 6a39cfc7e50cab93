"""Log-linear decoding of confusion networks.

Features per arc, in file order:
``globalVote_0 .. globalVote_{I-1}, primary, lm, wordPenalty[, localVote]``.
Epsilon arcs carry globalVote and primary but no LM, word penalty, or
localVote contribution. The n-best search is exact: a search state is
(slot, last two words), and each state keeps the top ``n`` distinct word
sequences. Ties are broken by surface string.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .align import ConfusionNetwork, MergedArc, merge_slot
from .corpus import BOS, EPSILON
from .errors import ConfigurationError, FormatError
from .lm import EOS, TrigramLM
from .nnvote import FeedForwardNet, network_arc_scores


def feature_names(num_systems: int, localvote: bool = False) -> list:
    names = [f"globalVote_{i}" for i in range(num_systems)] + ["primary", "lm", "wordPenalty"]
    if localvote:
        names.append("localVote")
    return names


@dataclass
class Weights:
    names: list
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if len(self.names) != len(self.values):
            raise ConfigurationError("weight names and values differ in length")
        if not np.all(np.isfinite(self.values)):
            raise ConfigurationError("non-finite weight")

    @property
    def num_systems(self) -> int:
        return sum(1 for n in self.names if n.startswith("globalVote_"))

    @property
    def has_localvote(self) -> bool:
        return "localVote" in self.names

    def __getitem__(self, name):
        return self.values[self.names.index(name)]

    def copy(self) -> "Weights":
        return Weights(list(self.names), self.values.copy())

    def with_localvote(self, value: float = 0.0) -> "Weights":
        if self.has_localvote:
            return self.copy()
        return Weights(self.names + ["localVote"], np.append(self.values, value))

    @classmethod
    def initial(cls, num_systems: int, localvote: bool = False) -> "Weights":
        vals = [1.0] * num_systems + [0.1, 0.1, 0.0]
        if localvote:
            vals.append(0.0)
        return cls(feature_names(num_systems, localvote), np.array(vals))

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            for n, v in zip(self.names, self.values):
                f.write(f"{n}\t{float(v)!r}\n")

    @classmethod
    def load(cls, path) -> "Weights":
        names, vals = [], []
        with open(path, encoding="utf-8") as f:
            for lineno, line in enumerate(f, 1):
                line = line.rstrip("\n")
                if not line:
                    continue
                try:
                    n, v = line.split("\t")
                    names.append(n)
                    vals.append(float(v))
                except ValueError:
                    raise FormatError(f"{path}:{lineno}: expected name<TAB>value") from None
        return cls(names, np.array(vals))


def arc_features(merged_arc: MergedArc, primary_id: int, num_systems: int) -> np.ndarray:
    """Static features (globalVote per system, primary, word penalty)."""
    f = np.zeros(num_systems + 2)
    for i in merged_arc.support:
        f[i] = 1.0
    f[num_systems] = 1.0 if primary_id in merged_arc.support else 0.0
    f[num_systems + 1] = 0.0 if merged_arc.is_epsilon else 1.0
    return f


@dataclass
class NBestEntry:
    words: tuple
    features: np.ndarray
    score: float

    @property
    def surface(self) -> str:
        return " ".join(self.words)


@dataclass
class NBestList:
    sentence_index: int
    entries: list = field(default_factory=list)

    def best(self) -> NBestEntry:
        return self.entries[0]


def arc_scorer(cn: ConfusionNetwork, weights: Weights, lm: TrigramLM):
    """Baseline linear score of one arc given the words emitted so far.

    Used by the oracle to break sBLEU ties. The localVote feature, if
    present in ``weights``, is ignored.
    """
    I = cn.num_systems
    w = weights.values
    if weights.num_systems != I:
        raise ConfigurationError("weights do not match the network's systems")
    lm_w, wp_w = w[I + 1], w[I + 2]

    def score(j, arc, words):
        s = float(sum(w[i] for i in arc.support))
        if cn.primary_id in arc.support:
            s += w[I]
        if arc.is_epsilon:
            return s
        hist = (BOS, BOS) + tuple(words)
        return s + wp_w + lm_w * lm.logprob(arc.word, hist[-2], hist[-1])
    return score


def _arc_vectors(cn: ConfusionNetwork, dim: int, lv_scores):
    """Per slot: list of (word, full feature vector without LM)."""
    I = cn.num_systems
    lm_idx = I + 1
    out = []
    for j, slot in enumerate(cn.slots):
        arcs = []
        for arc in merge_slot(slot):
            static = arc_features(arc, cn.primary_id, I)
            v = np.zeros(dim)
            v[:I + 1] = static[:I + 1]
            v[lm_idx + 1] = static[I + 1]
            if lv_scores is not None:
                v[lm_idx + 2] = lv_scores[j][arc.word]
            arcs.append((arc.word, v))
        out.append(arcs)
    return out


def decode_nbest(cn: ConfusionNetwork, weights: Weights, lm: TrigramLM,
                 localvote: Optional[FeedForwardNet] = None, n: Optional[int] = 200) -> NBestList:
    I = cn.num_systems
    dim = I + 3 + (1 if weights.has_localvote else 0)
    if len(weights.values) != dim or weights.num_systems != I:
        raise ConfigurationError(
            f"{len(weights.values)} weights for {dim} features ({I} systems)")
    lv_scores = None
    if weights.has_localvote:
        if localvote is not None:
            if localvote.num_inputs != localvote.config.history * I:
                raise ConfigurationError("localVote model arity does not match the network")
            lv_scores = network_arc_scores(localvote, cn)
        else:
            lv_scores = [{w: 0.0 for w in slot} for slot in cn.slots]
    w = weights.values
    lm_idx = I + 1
    lm_w = w[lm_idx]
    arc_vecs = _arc_vectors(cn, dim, lv_scores)
    arc_scores = [[(word, v, float(v @ w)) for word, v in arcs] for arcs in arc_vecs]

    # state (u, v) -> {words: (score, lm_total, static_vector)}
    states = {(BOS, BOS): {(): (0.0, 0.0, np.zeros(dim))}}
    for arcs in arc_scores:
        nxt: dict = {}
        for (u, v), hyps in states.items():
            for word, vec, s in arcs:
                if word == EPSILON:
                    key, lp = (u, v), 0.0
                else:
                    key, lp = (v, word), lm.logprob(word, u, v)
                bucket = nxt.setdefault(key, {})
                for words, (score, lm_tot, feats) in hyps.items():
                    nw = words if word == EPSILON else words + (word,)
                    ns = score + s + lm_w * lp
                    old = bucket.get(nw)
                    if old is None or ns > old[0]:
                        bucket[nw] = (ns, lm_tot + lp, feats + vec)
        states = {k: _prune(b, n) for k, b in nxt.items()}

    finals = []
    for (u, v), hyps in states.items():
        lp = lm.logprob(EOS, u, v)
        for words, (score, lm_tot, feats) in hyps.items():
            f = feats.copy()
            f[lm_idx] = lm_tot + lp
            finals.append((words, f))
    entries = [NBestEntry(words, f, float(f @ w)) for words, f in finals]
    entries.sort(key=lambda e: (-e.score, e.surface))
    if n is not None:
        entries = entries[:n]
    return NBestList(cn.sentence_index, entries)


def _prune(bucket: dict, n: Optional[int]) -> dict:
    if n is None or len(bucket) <= n:
        return bucket
    keep = heapq.nsmallest(n, bucket.items(), key=lambda kv: (-kv[1][0], " ".join(kv[0])))
    return dict(keep)


def decode_corpus(networks: Sequence[ConfusionNetwork], weights: Weights, lm: TrigramLM,
                  localvote: Optional[FeedForwardNet] = None, n: Optional[int] = 200):
    """1-best word sequences and n-best lists for every network."""
    nbests = [decode_nbest(cn, weights, lm, localvote, n) for cn in networks]
    hyps = [nb.best().words if nb.entries else () for nb in nbests]
    return hyps, nbests


# --- n-best file -------------------------------------------------------------

def format_nbest(nbests) -> str:
    lines = []
    for nb in nbests:
        for e in nb.entries:
            feats = " ".join(repr(float(x)) for x in e.features)
            lines.append(f"{nb.sentence_index} ||| {e.surface} ||| {feats} ||| {e.score!r}")
    return "".join(line + "\n" for line in lines)


def write_nbest(nbests, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(format_nbest(nbests))


def read_nbest(path) -> list:
    by_sent: dict = {}
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split(" ||| ")
            if len(parts) != 4:
                raise FormatError(f"{path}:{lineno}: expected 4 fields")
            idx = int(parts[0])
            words = tuple(parts[1].split()) if parts[1] else ()
            feats = np.array([float(x) for x in parts[2].split()])
            by_sent.setdefault(idx, NBestList(idx)).entries.append(
                NBestEntry(words, feats, float(parts[3])))
    return [by_sent[k] for k in sorted(by_sent)]
