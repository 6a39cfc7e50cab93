"""Exchange-algorithm word clustering (mkcls style).

Classes are chosen to maximize the class-bigram log-likelihood

    sum_{c,d} N(c,d) log N(c,d) - sum_c N_l(c) log N_l(c)
        - sum_d N_r(d) log N_r(d) + sum_w N_r(w) log N_r(w)

where ``N(c,d)`` counts within-sentence bigrams whose words fall in
classes ``c`` and ``d``, and ``N_l`` and ``N_r`` are its row and column sums.
Each sweep visits the vocabulary once and moves every word to its best class.
"""

from __future__ import annotations

import logging
from collections import Counter, defaultdict
from dataclasses import dataclass
from typing import Callable, Iterable, Optional

import numpy as np

from .corpus import BOS, EPSILON, NN_UNK
from .errors import DomainError, FormatError

log = logging.getLogger(__name__)

RESERVED_CLASS_TOKENS = (BOS, EPSILON, NN_UNK)
UNSEEN_CLASS = 0


@dataclass(frozen=True)
class ClusterConfig:
    num_classes: int = 1000
    iterations: int = 10
    seed: int = 1

    def __post_init__(self):
        if self.num_classes < 2:
            raise ValueError("num_classes must be >= 2")
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")


class ClassMap:
    """Total word -> class mapping; unseen words fall back to class 0."""

    def __init__(self, word_to_class: dict, num_classes: int):
        self.word_to_class = dict(word_to_class)
        self.num_classes = num_classes

    def __eq__(self, other):
        return (isinstance(other, ClassMap) and self.num_classes == other.num_classes
                and self.word_to_class == other.word_to_class)

    def __contains__(self, word):
        return word in self.word_to_class

    def class_id(self, word: str) -> int:
        if word in RESERVED_CLASS_TOKENS:
            return self.num_classes + RESERVED_CLASS_TOKENS.index(word)
        return self.word_to_class.get(word, UNSEEN_CLASS)

    def token(self, word: str) -> str:
        """Class as a token for the neural net; reserved tokens pass through."""
        if word in RESERVED_CLASS_TOKENS:
            return word
        return f"C{self.word_to_class.get(word, UNSEEN_CLASS)}"

    def classes(self) -> list:
        groups = defaultdict(list)
        for w, c in self.word_to_class.items():
            groups[c].append(w)
        return [sorted(groups[c]) for c in range(self.num_classes)]

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            for w in sorted(self.word_to_class):
                f.write(f"{w}\t{self.word_to_class[w]}\n")

    @classmethod
    def load(cls, path, num_classes: Optional[int] = None) -> "ClassMap":
        mapping = {}
        with open(path, encoding="utf-8") as f:
            for lineno, line in enumerate(f, 1):
                line = line.rstrip("\n")
                if not line:
                    continue
                try:
                    w, c = line.split("\t")
                    mapping[w] = int(c)
                except ValueError:
                    raise FormatError(f"{path}:{lineno}: expected word<TAB>class_id") from None
        if num_classes is None:
            num_classes = max(mapping.values()) + 1 if mapping else 1
        return cls(mapping, num_classes)


def apply_classes(sentences: Iterable, cmap: ClassMap) -> list:
    """Replace every word by its class id."""
    return [[cmap.class_id(w) for w in sent] for sent in sentences]


def _xlogx(x):
    x = np.asarray(x, dtype=np.float64)
    return np.where(x > 0, x * np.log(np.where(x > 0, x, 1.0)), 0.0)


class _BigramData:
    def __init__(self, sentences):
        unigram = Counter()
        bigram = Counter()
        for sent in sentences:
            unigram.update(sent)
            bigram.update(zip(sent, sent[1:]))
        self.words = sorted(unigram, key=lambda w: (-unigram[w], w))
        self.index = {w: i for i, w in enumerate(self.words)}
        n = len(self.words)
        succ = defaultdict(Counter)
        pred = defaultdict(Counter)
        self.self_count = np.zeros(n)
        for (a, b), c in bigram.items():
            ia, ib = self.index[a], self.index[b]
            if ia == ib:
                self.self_count[ia] += c
            else:
                succ[ia][ib] += c
                pred[ib][ia] += c
        self.succ = [(np.array(list(succ[i].keys()), dtype=np.intp),
                      np.array(list(succ[i].values()), dtype=np.float64)) for i in range(n)]
        self.pred = [(np.array(list(pred[i].keys()), dtype=np.intp),
                      np.array(list(pred[i].values()), dtype=np.float64)) for i in range(n)]
        self.left_count = np.array([self.succ[i][1].sum() + self.self_count[i] for i in range(n)])
        self.right_count = np.array([self.pred[i][1].sum() + self.self_count[i] for i in range(n)])
        self.bigrams = bigram


def class_bigram_loglik(sentences, assignment: dict) -> float:
    """Full objective, computed from scratch (used to check the exchange moves)."""
    m = Counter()
    right = Counter()
    for sent in sentences:
        for a, b in zip(sent, sent[1:]):
            m[(assignment[a], assignment[b])] += 1
            right[b] += 1
    nl, nr = Counter(), Counter()
    for (c, d), k in m.items():
        nl[c] += k
        nr[d] += k
    f = lambda xs: float(np.sum(_xlogx(np.array(list(xs), dtype=np.float64)))) if xs else 0.0
    return f(m.values()) - f(nl.values()) - f(nr.values()) + f(right.values())


def word_bigram_loglik(sentences) -> float:
    big = Counter()
    left = Counter()
    for sent in sentences:
        for a, b in zip(sent, sent[1:]):
            big[(a, b)] += 1
            left[a] += 1
    return float(sum(k * np.log(k / left[a]) for (a, _), k in big.items()))


def initial_assignment(words_by_freq, num_classes: int) -> np.ndarray:
    """Top C-1 words get their own class; the rest go round-robin from C-1."""
    return np.arange(len(words_by_freq), dtype=np.intp) % num_classes


def train_classes(sentences, cfg: ClusterConfig = ClusterConfig(),
                  on_move: Optional[Callable[[str, int, int, float], None]] = None) -> ClassMap:
    """Exchange clustering. ``on_move(word, old, new, objective)`` fires per accepted move."""
    sentences = [list(s) for s in sentences]
    data = _BigramData(sentences)
    n, C = len(data.words), cfg.num_classes
    if n < C:
        raise DomainError(f"{n} distinct words, fewer than {C} classes")
    cls = initial_assignment(data.words, C)

    M = np.zeros((C, C))
    for (a, b), k in data.bigrams.items():
        M[cls[data.index[a]], cls[data.index[b]]] += k
    Nl = M.sum(axis=1)
    Nr = M.sum(axis=0)
    sizes = np.bincount(cls, minlength=C)
    const = float(np.sum(_xlogx(data.right_count)))

    def objective():
        return float(np.sum(_xlogx(M)) - np.sum(_xlogx(Nl)) - np.sum(_xlogx(Nr))) + const

    current = objective()
    rng = np.random.default_rng(cfg.seed)
    arange = np.arange(C)
    for it in range(cfg.iterations):
        moves = 0
        for w in rng.permutation(n):
            a = cls[w]
            if sizes[a] == 1:
                continue
            s_ids, s_cnt = data.succ[w]
            p_ids, p_cnt = data.pred[w]
            R = np.bincount(cls[s_ids], s_cnt, minlength=C) if len(s_ids) else np.zeros(C)
            L = np.bincount(cls[p_ids], p_cnt, minlength=C) if len(p_ids) else np.zeros(C)
            s = data.self_count[w]
            nl, nr = data.left_count[w], data.right_count[w]
            # take w out of class a
            M[a, :] -= R
            M[:, a] -= L
            M[a, a] -= s
            Nl[a] -= nl
            Nr[a] -= nr
            gain = _insertion_gain(M, Nl, Nr, R, L, s, nl, nr, arange)
            b = int(np.argmax(gain))
            if gain[b] <= gain[a] + 1e-9:
                b = a
            M[b, :] += R
            M[:, b] += L
            M[b, b] += s
            Nl[b] += nl
            Nr[b] += nr
            if b != a:
                cls[w] = b
                sizes[a] -= 1
                sizes[b] += 1
                moves += 1
                current += float(gain[b] - gain[a])
                if on_move is not None:
                    on_move(data.words[w], int(a), b, current)
        log.info("exchange iteration %d: %d moves, objective %.4f", it + 1, moves, current)
        if moves == 0:
            break
    return ClassMap({w: int(cls[i]) for i, w in enumerate(data.words)}, C)


def _insertion_gain(M, Nl, Nr, R, L, s, nl, nr, arange):
    """Objective change of inserting the word into each class."""
    gain = np.zeros(len(M))
    nz = np.nonzero(R)[0]
    if len(nz):
        sub = M[:, nz]
        d = _xlogx(sub + R[nz]) - _xlogx(sub)
        gain += d.sum(axis=1)
        gain[nz] -= d[nz, np.arange(len(nz))]
    nz = np.nonzero(L)[0]
    if len(nz):
        sub = M[nz, :]
        d = _xlogx(sub + L[nz, None]) - _xlogx(sub)
        gain += d.sum(axis=0)
        gain[nz] -= d[np.arange(len(nz)), nz]
    diag = M[arange, arange]
    gain += _xlogx(diag + R + L + s) - _xlogx(diag)
    gain -= _xlogx(Nl + nl) - _xlogx(Nl)
    gain -= _xlogx(Nr + nr) - _xlogx(Nr)
    return gain
