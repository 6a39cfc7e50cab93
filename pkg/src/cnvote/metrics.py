"""BLEU (sentence-smoothed and corpus), TER with block shifts, and the
(TER - BLEU) / 2 tuning criterion.

All scores are fractions in [0, 1] (TER may exceed 1). Tokens are
lowercased before comparison unless ``MetricConfig.lowercase`` is off.
"""

from __future__ import annotations

import math
from functools import lru_cache
from collections import Counter
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import CorpusShapeError, DomainError


@dataclass(frozen=True)
class MetricConfig:
    max_order: int = 4
    lowercase: bool = True
    # greedy shift search caps (tercom defaults)
    max_shift_size: int = 10
    max_shift_dist: int = 10

    def __post_init__(self):
        if self.max_order < 1:
            raise ValueError("max_order must be >= 1")


DEFAULT = MetricConfig()


def _norm(tokens, cfg: MetricConfig):
    if cfg.lowercase:
        return [t.lower() for t in tokens]
    return list(tokens)


def ngram_counts(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


@dataclass
class NGramStats:
    """Raw clipped-match statistics; smoothing happens at score time."""

    matches: list
    totals: list
    hyp_len: int
    ref_len: int

    def __post_init__(self):
        for m, t in zip(self.matches, self.totals):
            assert 0 <= m <= t

    def __add__(self, other: "NGramStats") -> "NGramStats":
        return NGramStats([a + b for a, b in zip(self.matches, other.matches)],
                          [a + b for a, b in zip(self.totals, other.totals)],
                          self.hyp_len + other.hyp_len,
                          self.ref_len + other.ref_len)

    def as_array(self) -> np.ndarray:
        return np.array(self.matches + self.totals + [self.hyp_len, self.ref_len],
                        dtype=np.float64)


def bleu_stats(hyp, ref, cfg: MetricConfig = DEFAULT) -> NGramStats:
    h = _norm(hyp, cfg)
    r = _norm(ref, cfg)
    matches, totals = [], []
    for n in range(1, cfg.max_order + 1):
        hc = ngram_counts(h, n)
        rc = ngram_counts(r, n)
        matches.append(sum(min(c, rc[g]) for g, c in hc.items()))
        totals.append(max(len(h) - n + 1, 0))
    return NGramStats(matches, totals, len(h), len(r))


def brevity_penalty(hyp_len, ref_len) -> float:
    if hyp_len == 0:
        return 0.0
    if hyp_len >= ref_len:
        return 1.0
    return math.exp(1.0 - ref_len / hyp_len)


def bleu_from_stats(stats: NGramStats, smooth: bool) -> float:
    """Score raw statistics; ``smooth`` adds one to every n-gram count."""
    if stats.hyp_len == 0:
        return 0.0
    order = len(stats.matches)
    log_p = 0.0
    for m, t in zip(stats.matches, stats.totals):
        if smooth:
            m, t = m + 1, t + 1
        if m == 0 or t == 0:
            return 0.0
        log_p += math.log(m / t)
    return brevity_penalty(stats.hyp_len, stats.ref_len) * math.exp(log_p / order)


def sentence_bleu(hyp, ref, cfg: MetricConfig = DEFAULT) -> float:
    if len(ref) == 0:
        raise DomainError("sentence_bleu needs a non-empty reference")
    return bleu_from_stats(bleu_stats(hyp, ref, cfg), smooth=True)


def _check_corpus(hyps, refs):
    if len(hyps) != len(refs):
        raise CorpusShapeError(f"{len(hyps)} hypotheses vs {len(refs)} references")
    for r in refs:
        if len(r) == 0:
            raise DomainError("empty reference in corpus")


def corpus_bleu_stats(hyps, refs, cfg: MetricConfig = DEFAULT) -> NGramStats:
    _check_corpus(hyps, refs)
    total = NGramStats([0] * cfg.max_order, [0] * cfg.max_order, 0, 0)
    for h, r in zip(hyps, refs):
        total = total + bleu_stats(h, r, cfg)
    return total


def corpus_bleu(hyps, refs, cfg: MetricConfig = DEFAULT) -> float:
    return bleu_from_stats(corpus_bleu_stats(hyps, refs, cfg), smooth=False)


def bleu_from_arrays(stats: np.ndarray, max_order: int = 4) -> np.ndarray:
    """Vectorized unsmoothed BLEU over rows of ``as_array`` layout."""
    stats = np.atleast_2d(stats)
    m = stats[:, :max_order]
    t = stats[:, max_order:2 * max_order]
    hl = stats[:, 2 * max_order]
    rl = stats[:, 2 * max_order + 1]
    with np.errstate(divide="ignore", invalid="ignore"):
        ok = np.all(m > 0, axis=1) & (hl > 0)
        logp = np.where(ok, np.sum(np.log(np.where(m > 0, m, 1.0))
                                   - np.log(np.where(t > 0, t, 1.0)), axis=1) / max_order, 0.0)
        bp = np.where(hl >= rl, 1.0, np.exp(1.0 - rl / np.where(hl > 0, hl, 1.0)))
    return np.where(ok, bp * np.exp(logp), 0.0)


# --- TER -------------------------------------------------------------------

MATCH, SUB, INS, DEL = "M", "S", "I", "D"


def levenshtein(a, b) -> int:
    prev = list(range(len(b) + 1))
    for i in range(1, len(a) + 1):
        cur = [i] + [0] * len(b)
        ai = a[i - 1]
        for j in range(1, len(b) + 1):
            d = prev[j - 1] + (ai != b[j - 1])
            if prev[j] + 1 < d:
                d = prev[j] + 1
            if cur[j - 1] + 1 < d:
                d = cur[j - 1] + 1
            cur[j] = d
        prev = cur
    return prev[-1]


def edit_alignment(hyp, ref):
    """Minimum-cost monotone alignment as (op, hyp_index, ref_index) triples.

    ``D`` marks a hypothesis word without counterpart (to delete), ``I`` a
    reference word missing from the hypothesis (to insert). Ties prefer
    match/substitution, then deletion, then insertion.
    """
    n, m = len(hyp), len(ref)
    d = [[0] * (m + 1) for _ in range(n + 1)]
    for i in range(n + 1):
        d[i][0] = i
    for j in range(m + 1):
        d[0][j] = j
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            d[i][j] = min(d[i - 1][j - 1] + (hyp[i - 1] != ref[j - 1]),
                          d[i - 1][j] + 1, d[i][j - 1] + 1)
    ops = []
    i, j = n, m
    while i > 0 or j > 0:
        if i > 0 and j > 0 and d[i][j] == d[i - 1][j - 1] + (hyp[i - 1] != ref[j - 1]):
            ops.append((MATCH if hyp[i - 1] == ref[j - 1] else SUB, i - 1, j - 1))
            i, j = i - 1, j - 1
        elif i > 0 and d[i][j] == d[i - 1][j] + 1:
            ops.append((DEL, i - 1, None))
            i -= 1
        else:
            ops.append((INS, None, j - 1))
            j -= 1
    ops.reverse()
    return d[n][m], ops


@dataclass
class TerResult:
    edits: int
    ref_len: int
    shifts: int
    shifted_hyp: list
    alignment: list = field(repr=False)

    @property
    def score(self) -> float:
        return self.edits / self.ref_len


def _apply_shift(words, start, length, dest):
    """Move ``words[start:start+length]`` so it begins at ``dest`` of the
    remaining sequence."""
    block = words[start:start + length]
    rest = words[:start] + words[start + length:]
    return rest[:dest] + block + rest[dest:]


@lru_cache(maxsize=256)
def _shift_permutations(n: int, max_size: int, max_dist: int) -> np.ndarray:
    """Index permutations for every block shift of a length-``n`` sequence,
    in (start, length, dest) order."""
    idx = list(range(n))
    perms = []
    for start in range(n):
        for length in range(1, min(max_size, n - start) + 1):
            for dest in range(max(0, start - max_dist), min(n - length, start + max_dist) + 1):
                if dest != start:
                    perms.append(_apply_shift(idx, start, length, dest))
    if not perms:
        return np.zeros((0, n), dtype=np.intp)
    return np.array(perms, dtype=np.intp)


def _batch_levenshtein(cands: np.ndarray, ref: np.ndarray) -> np.ndarray:
    """Edit distance of every row of ``cands`` against ``ref``."""
    c, n = cands.shape
    m = len(ref)
    ramp = np.arange(m + 1)
    prev = np.broadcast_to(ramp, (c, m + 1)).copy()
    for i in range(n):
        neq = cands[:, i:i + 1] != ref[None, :]
        x = np.empty_like(prev)
        x[:, 0] = i + 1
        np.minimum(prev[:, :-1] + neq, prev[:, 1:] + 1, out=x[:, 1:])
        prev = np.minimum.accumulate(x - ramp, axis=1) + ramp
    return prev[:, m]


def ter(hyp, ref, cfg: MetricConfig = DEFAULT) -> TerResult:
    """TER: repeatedly apply the block shift that most reduces the edit
    distance (ties go to the earliest (start, length, dest)), then count
    shifts plus the remaining edits."""
    if len(ref) == 0:
        raise DomainError("ter needs a non-empty reference")
    words = _norm(hyp, cfg)
    r = _norm(ref, cfg)
    vocab = {w: i for i, w in enumerate(sorted(set(words) | set(r)))}
    ids = np.array([vocab[w] for w in words], dtype=np.intp)
    rids = np.array([vocab[w] for w in r], dtype=np.intp)
    dist = levenshtein(words, r)
    shifts = 0
    shared = set(words) & set(r)
    perms = _shift_permutations(len(words), cfg.max_shift_size, cfg.max_shift_dist)
    while dist > 0 and shared and len(perms):
        dists = _batch_levenshtein(ids[perms], rids)
        best = int(np.argmin(dists))
        if dists[best] >= dist:
            break
        ids = ids[perms[best]]
        words = [words[k] for k in perms[best]]
        dist = int(dists[best])
        shifts += 1
    dist, ops = edit_alignment(words, r)
    return TerResult(shifts + dist, len(r), shifts, words, ops)


def ter_score(hyp, ref, cfg: MetricConfig = DEFAULT) -> float:
    return ter(hyp, ref, cfg).score


def corpus_ter(hyps, refs, cfg: MetricConfig = DEFAULT) -> float:
    _check_corpus(hyps, refs)
    edits = sum(ter(h, r, cfg).edits for h, r in zip(hyps, refs))
    return edits / sum(len(r) for r in refs)


def combined_criterion(hyps, refs, cfg: MetricConfig = DEFAULT) -> float:
    """(TER - BLEU) / 2 on fractional scores; lower is better."""
    return (corpus_ter(hyps, refs, cfg) - corpus_bleu(hyps, refs, cfg)) / 2.0


def criterion_from_totals(bleu_totals: np.ndarray, ter_edits, ter_ref_len,
                          max_order: int = 4) -> np.ndarray:
    bleu = bleu_from_arrays(bleu_totals, max_order)
    return (np.asarray(ter_edits, dtype=np.float64) / ter_ref_len - bleu) / 2.0


def bootstrap_significance(hyps_a, hyps_b, refs, samples: int = 1000, seed: int = 0,
                           cfg: MetricConfig = DEFAULT) -> float:
    """Fraction of paired bootstrap resamples where A beats B on corpus BLEU."""
    if not (len(hyps_a) == len(hyps_b) == len(refs)):
        raise CorpusShapeError("bootstrap inputs differ in length")
    if samples < 100:
        raise ValueError("need at least 100 bootstrap samples")
    _check_corpus(hyps_a, refs)
    sa = np.stack([bleu_stats(h, r, cfg).as_array() for h, r in zip(hyps_a, refs)])
    sb = np.stack([bleu_stats(h, r, cfg).as_array() for h, r in zip(hyps_b, refs)])
    rng = np.random.default_rng(seed)
    n = len(refs)
    wins = 0
    for _ in range(samples):
        idx = rng.integers(0, n, size=n)
        ba = bleu_from_arrays(sa[idx].sum(axis=0), cfg.max_order)[0]
        bb = bleu_from_arrays(sb[idx].sum(axis=0), cfg.max_order)[0]
        if ba > bb:
            wins += 1
    return wins / samples


def significance_marker(confidence: float) -> str:
    if confidence >= 0.99:
        return "‡"
    if confidence >= 0.95:
        return "†"
    return ""
