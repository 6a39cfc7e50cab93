"""sBLEU-optimal paths through confusion networks.

The network is swept left to right. Every node keeps at most ``k`` partial
hypotheses, ranked by total clipped n-gram matches, then by baseline model
score, then by word sequence. Partials with identical words are
recombined. The brevity penalty is only applied at the final node.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

from .align import ConfusionNetwork, MergedArc, merge_slot
from .corpus import EPSILON, UNK
from .errors import DomainError, FormatError
from .metrics import (MetricConfig, NGramStats, bleu_from_stats,
                      corpus_bleu, corpus_ter, ngram_counts)

# scorer(slot_index, merged_arc, words_so_far) -> baseline model score of the arc
ArcScorer = Callable[[int, MergedArc, tuple], float]


@dataclass(frozen=True)
class OracleConfig:
    k: Optional[int] = 1200  # None: no pruning
    max_order: int = 4
    use_model_tiebreak: bool = True
    lowercase: bool = True

    def __post_init__(self):
        if self.k is not None and self.k < 1:
            raise ValueError("k must be >= 1")


@dataclass
class OraclePath:
    decisions: list          # MergedArc per slot
    words: tuple
    sbleu: float
    sentence_index: int = 0
    model_score: float = 0.0

    @property
    def decision_words(self) -> list:
        return [d.word for d in self.decisions]


def simplify_unk(cn: ConfusionNetwork, ref: Sequence[str], lowercase: bool = True) -> ConfusionNetwork:
    """Replace every real word absent from the reference by ``UNK``.

    The per-system arc layout is kept, so all such arcs in a slot merge into
    one UNK arc.
    """
    if not ref:
        raise DomainError("empty reference")
    norm = (lambda w: w.lower()) if lowercase else (lambda w: w)
    vocab = {norm(w) for w in ref}
    slots = []
    for slot in cn.slots:
        slots.append(tuple(w if w == EPSILON or norm(w) in vocab else UNK for w in slot))
    return cn.replace_slots(slots)


class _Partial:
    __slots__ = ("words", "norm", "matches", "used", "score", "trace")

    def __init__(self, words, norm, matches, used, score, trace):
        self.words = words
        self.norm = norm
        self.matches = matches
        self.used = used
        self.score = score
        self.trace = trace

    def total_matches(self):
        return sum(self.matches)


def _extend(p: _Partial, word: str, nword: str, ref_counts, max_order: int):
    norm = p.norm + (nword,)
    matches = list(p.matches)
    used = p.used
    copied = False
    for n in range(1, min(max_order, len(norm)) + 1):
        g = norm[-n:]
        limit = ref_counts[n - 1].get(g, 0)
        if limit and used.get(g, 0) < limit:
            if not copied:
                used = dict(used)
                copied = True
            used[g] = used.get(g, 0) + 1
            matches[n - 1] += 1
    return norm, matches, used


def _stats(p: _Partial, ref_len: int, max_order: int) -> NGramStats:
    h = len(p.norm)
    return NGramStats(list(p.matches), [max(h - n + 1, 0) for n in range(1, max_order + 1)],
                      h, ref_len)


def extract_oracle(cn: ConfusionNetwork, ref: Sequence[str], cfg: OracleConfig = OracleConfig(),
                   scorer: Optional[ArcScorer] = None) -> OraclePath:
    if len(cn) == 0:
        raise DomainError("empty network")
    if not ref:
        raise DomainError("empty reference")
    order = cfg.max_order
    lower = cfg.lowercase
    nref = tuple(w.lower() for w in ref) if lower else tuple(ref)
    ref_counts = [dict(ngram_counts(nref, n)) for n in range(1, order + 1)]
    use_score = scorer is not None and cfg.use_model_tiebreak

    beam = [_Partial((), (), [0] * order, {}, 0.0, ())]
    for j in range(len(cn)):
        arcs = merge_slot(cn.slots[j])
        nxt: dict = {}
        for p in beam:
            for arc in arcs:
                score = p.score + scorer(j, arc, p.words) if use_score else 0.0
                if arc.word == EPSILON:
                    words, norm, matches, used = p.words, p.norm, p.matches, p.used
                else:
                    nword = arc.word.lower() if lower else arc.word
                    norm, matches, used = _extend(p, arc.word, nword, ref_counts, order)
                    words = p.words + (arc.word,)
                old = nxt.get(words)
                if old is not None and old.score >= score:
                    continue
                nxt[words] = _Partial(words, norm, matches, used, score, p.trace + (arc,))
        cands = list(nxt.values())
        if cfg.k is not None and len(cands) > cfg.k:
            cands.sort(key=lambda q: (-q.total_matches(), -q.score, q.words))
            cands = cands[:cfg.k]
        beam = cands

    ref_len = len(nref)
    best, best_key = None, None
    for p in beam:
        s = bleu_from_stats(_stats(p, ref_len, order), smooth=True)
        key = (s, p.score)
        if best is None or key > best_key or (key == best_key and p.words < best.words):
            best, best_key = p, key
    return OraclePath(list(best.trace), best.words, best_key[0], cn.sentence_index, best.score)


def oracle_corpus(networks: Sequence[ConfusionNetwork], refs: Sequence[Sequence[str]],
                  cfg: OracleConfig = OracleConfig(), simplify: bool = True,
                  scorer_for: Optional[Callable[[ConfusionNetwork], ArcScorer]] = None,
                  metric_cfg: MetricConfig = MetricConfig()):
    """Oracle paths for a corpus plus corpus BLEU / TER / criterion of the
    oracle sentences."""
    paths = []
    for cn in networks:
        ref = refs[cn.sentence_index]
        net = simplify_unk(cn, ref, cfg.lowercase) if simplify else cn
        scorer = scorer_for(net) if scorer_for is not None else None
        paths.append(extract_oracle(net, ref, cfg, scorer))
    hyps = [p.words for p in paths]
    sel_refs = [refs[cn.sentence_index] for cn in networks]
    bleu = corpus_bleu(hyps, sel_refs, metric_cfg)
    terv = corpus_ter(hyps, sel_refs, metric_cfg)
    return paths, {"bleu": bleu, "ter": terv, "criterion": (terv - bleu) / 2.0}


# --- arc decision file -------------------------------------------------------

def decisions_to_json(path: OraclePath) -> str:
    return json.dumps({"sentence_index": path.sentence_index,
                       "decisions": path.decision_words,
                       "sbleu": path.sbleu},
                      ensure_ascii=False, separators=(",", ":"))


def write_decisions(paths, filename) -> None:
    with open(filename, "w", encoding="utf-8", newline="\n") as f:
        for p in paths:
            f.write(decisions_to_json(p) + "\n")


def read_decisions(filename) -> dict:
    """sentence_index -> list of decided words (``UNK``/``<eps>`` included)."""
    out = {}
    with open(filename, encoding="utf-8") as f:
        for line in f:
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                out[int(rec["sentence_index"])] = list(rec["decisions"])
            except (KeyError, ValueError, TypeError) as e:
                raise FormatError(f"bad decision record: {e}") from e
    return out
