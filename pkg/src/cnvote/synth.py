"""Synthetic system outputs with controlled noise.

References come from a small Zipfian Markov chain. Each simulated system
corrupts them independently (substitution by a fixed confusable word,
deletion, insertion). "Planted minority" positions are also added: there
exactly one system keeps the reference word and every other system agrees
on its confusable.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .corpus import CombinationCorpus, SystemOutput
from .errors import DomainError


@dataclass(frozen=True)
class SystemNoise:
    substitution: float = 0.0
    deletion: float = 0.0
    insertion: float = 0.0
    seed: int = 0

    def __post_init__(self):
        for r in (self.substitution, self.deletion, self.insertion):
            if not 0.0 <= r <= 1.0:
                raise ValueError("noise rates must lie in [0, 1]")


@dataclass(frozen=True)
class NoiseSpec:
    systems: tuple
    planted_minority: float = 0.0
    confusables: Optional[dict] = None  # word -> wrong word; sampled by frequency if None
    minority_systems: Optional[tuple] = None  # systems that may be the lone correct one
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.planted_minority <= 1.0:
            raise ValueError("planted_minority must lie in [0, 1]")
        seeds = [s.seed for s in self.systems]
        if len(set(seeds)) != len(seeds):
            raise ValueError("system seeds must be distinct")

    @classmethod
    def uniform(cls, num_systems: int, substitution=0.0, deletion=0.0, insertion=0.0,
                planted_minority=0.0, seed=0, **kw) -> "NoiseSpec":
        systems = tuple(SystemNoise(substitution, deletion, insertion, seed=1000 * (seed + 1) + i)
                        for i in range(num_systems))
        return cls(systems, planted_minority, seed=seed, **kw)


@dataclass(frozen=True)
class PlantedLabel:
    sentence_index: int
    position: int
    correct_system: int


def generate_references(num_sentences: int, vocab_size: int = 200, seed: int = 0,
                        min_len: int = 6, max_len: int = 14, zipf: float = 1.1) -> list:
    """Sentences from a first-order Markov chain over ``w0 .. w{V-1}``.

    Each word prefers a handful of successors, mixed with a Zipfian
    background, so that an n-gram LM has something to model.
    """
    rng = np.random.default_rng(seed)
    words = [f"w{i}" for i in range(vocab_size)]
    background = 1.0 / np.arange(1, vocab_size + 1) ** zipf
    background /= background.sum()
    trans = np.empty((vocab_size, vocab_size))
    for i in range(vocab_size):
        favored = rng.choice(vocab_size, size=4, replace=False, p=background)
        row = 0.5 * background.copy()
        row[favored] += 0.5 / 4
        trans[i] = row / row.sum()
    cum = np.cumsum(trans, axis=1)
    bg_cum = np.cumsum(background)
    out = []
    for _ in range(num_sentences):
        length = int(rng.integers(min_len, max_len + 1))
        cur = int(np.searchsorted(bg_cum, rng.random() * bg_cum[-1], side="right"))
        sent = [words[min(cur, vocab_size - 1)]]
        for _ in range(length - 1):
            cur = int(np.searchsorted(cum[min(cur, vocab_size - 1)], rng.random() * cum[cur, -1], side="right"))
            sent.append(words[min(cur, vocab_size - 1)])
        out.append(tuple(sent))
    return out


def default_confusables(refs, seed: int = 0) -> dict:
    """For every reference word, a fixed different word drawn by frequency."""
    freq = Counter(w for s in refs for w in s)
    vocab = sorted(freq)
    if len(vocab) < 2:
        raise DomainError("need at least two distinct reference words")
    p = np.array([freq[w] for w in vocab], dtype=np.float64)
    p /= p.sum()
    rng = np.random.default_rng(seed)
    table = {}
    for i, w in enumerate(vocab):
        q = p.copy()
        q[i] = 0.0
        q /= q.sum()
        table[w] = vocab[int(rng.choice(len(vocab), p=q))]
    return table


def generate_systems(refs: Sequence[Sequence[str]], spec: NoiseSpec, num_systems: Optional[int] = None):
    """Corrupt ``refs`` into a corpus of noisy systems plus planted labels.

    Only positions whose word occurs once in its sentence, and whose
    confusable does not occur there, may be planted. Noise never produces a
    planted word elsewhere, so a label can be checked by word presence alone.
    """
    refs = [tuple(r) for r in refs]
    if not refs:
        raise DomainError("no references")
    I = num_systems if num_systems is not None else len(spec.systems)
    if I != len(spec.systems):
        raise ValueError(f"noise spec covers {len(spec.systems)} systems, asked for {I}")
    conf = spec.confusables if spec.confusables is not None else default_confusables(refs, spec.seed)
    freq = Counter(w for s in refs for w in s)
    ins_vocab = sorted(freq)
    ins_p = np.array([freq[w] for w in ins_vocab], dtype=np.float64)
    ins_p /= ins_p.sum()
    minority = list(spec.minority_systems) if spec.minority_systems is not None else list(range(I))

    plant_rng = np.random.default_rng([spec.seed, 7919])
    sys_rngs = [np.random.default_rng([spec.seed, s.seed]) for s in spec.systems]
    outputs = [[] for _ in range(I)]
    labels = []
    for si, ref in enumerate(refs):
        counts = Counter(ref)
        plants = {}
        for pos, word in enumerate(ref):
            if spec.planted_minority > 0 and counts[word] == 1 and conf.get(word, word) not in counts:
                # draw always, so planting does not shift the stream for other positions
                u = plant_rng.random()
                pick = minority[int(plant_rng.integers(len(minority)))]
                if u < spec.planted_minority:
                    plants[pos] = pick
        # noise elsewhere must not produce a planted word
        blocked = {ref[pos] for pos in plants}
        rows = [[] for _ in range(I)]
        for pos, word in enumerate(ref):
            planted = plants.get(pos)
            for i, noise in enumerate(spec.systems):
                rng = sys_rngs[i]
                u_del, u_sub, u_ins = rng.random(3)
                ins_word = ins_vocab[int(rng.choice(len(ins_vocab), p=ins_p))] if noise.insertion else None
                if planted is not None:
                    rows[i].append(word if i == planted else conf[word])
                    continue
                if u_del < noise.deletion:
                    pass
                elif u_sub < noise.substitution and conf.get(word, word) not in blocked:
                    rows[i].append(conf.get(word, word))
                else:
                    rows[i].append(word)
                if ins_word is not None and u_ins < noise.insertion and ins_word not in blocked:
                    rows[i].append(ins_word)
            if planted is not None:
                labels.append(PlantedLabel(si, pos, planted))
        for i in range(I):
            outputs[i].append(tuple(rows[i]))
    systems = tuple(SystemOutput(i, f"sys{i}", tuple(outputs[i])) for i in range(I))
    return CombinationCorpus(systems, tuple(refs)), labels


def write_labels(labels, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for lab in labels:
            f.write(json.dumps({"sentence_index": lab.sentence_index, "position": lab.position,
                                "correct_system": lab.correct_system}, separators=(",", ":")) + "\n")


def read_labels(path) -> list:
    out = []
    with open(path, encoding="utf-8") as f:
        for line in f:
            if line.strip():
                rec = json.loads(line)
                out.append(PlantedLabel(int(rec["sentence_index"]), int(rec["position"]),
                                        int(rec["correct_system"])))
    return out


def planted_recovered(labels, refs, outputs) -> int:
    """Planted positions whose reference word made it into the output."""
    hits = 0
    for lab in labels:
        word = refs[lab.sentence_index][lab.position]
        if word in outputs[lab.sentence_index]:
            hits += 1
    return hits
