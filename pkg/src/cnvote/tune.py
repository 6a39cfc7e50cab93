"""Minimum error rate training on n-best lists.

The criterion is corpus-level (TER - BLEU) / 2, computed from additive
sufficient statistics: clipped n-gram counts and lengths for BLEU, edits
and reference length for TER. Each line search is exact. Every
sentence's upper envelope is traced along the line, the breakpoints are
pooled over the corpus, and every interval between them is evaluated.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .decode import NBestList, Weights, decode_corpus
from .errors import ConfigurationError, DomainError
from .metrics import MetricConfig, bleu_from_arrays, bleu_stats, ter

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class MERTConfig:
    restarts: int = 5
    outer_iterations: int = 5
    n: int = 200
    seed: int = 1
    epsilon: float = 1e-6
    random_directions: int = 2
    max_sweeps: int = 50

    def __post_init__(self):
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")
        if self.n < 2:
            raise ValueError("n must be >= 2")


class NBestPool:
    """Merged, deduplicated n-best candidates with cached error statistics."""

    def __init__(self, refs: Sequence[Sequence[str]], metric_cfg: MetricConfig = MetricConfig()):
        self.refs = list(refs)
        self.metric_cfg = metric_cfg
        self.order = metric_cfg.max_order
        self._cands: dict = {}   # sentence -> {surface: (words, features)}
        self._stats: dict = {}   # (sentence, surface) -> stats row
        self._arrays = None

    def __len__(self):
        return sum(len(c) for c in self._cands.values())

    @property
    def sentences(self) -> list:
        return sorted(self._cands)

    def add(self, sentence: int, words, features) -> bool:
        bucket = self._cands.setdefault(sentence, {})
        surface = " ".join(words)
        if surface in bucket:
            return False
        bucket[surface] = (tuple(words), np.asarray(features, dtype=np.float64))
        self._arrays = None
        return True

    def merge(self, nbests: Sequence[NBestList]) -> int:
        added = 0
        for nb in nbests:
            for e in nb.entries:
                added += self.add(nb.sentence_index, e.words, e.features)
        return added

    def keys(self):
        for s in self.sentences:
            for surface in self._cands[s]:
                yield s, surface

    def stats_row(self, sentence: int, words) -> np.ndarray:
        key = (sentence, " ".join(words))
        row = self._stats.get(key)
        if row is None:
            ref = self.refs[sentence]
            b = bleu_stats(words, ref, self.metric_cfg).as_array()
            t = ter(words, ref, self.metric_cfg)
            row = np.append(b, [t.edits, t.ref_len])
            self._stats[key] = row
        return row

    def arrays(self) -> list:
        """Per sentence: (features K x D, stats K x S, tie rank K)."""
        if self._arrays is None:
            out = []
            for s in self.sentences:
                items = self._cands[s]
                surfaces = list(items)
                feats = np.stack([items[x][1] for x in surfaces])
                stats = np.stack([self.stats_row(s, items[x][0]) for x in surfaces])
                rank = np.empty(len(surfaces), dtype=np.int64)
                rank[np.argsort(np.array(surfaces, dtype=object), kind="stable")] = np.arange(len(surfaces))
                out.append((feats, stats, rank))
            self._arrays = out
        return self._arrays

    @property
    def dim(self) -> int:
        arrs = self.arrays()
        return arrs[0][0].shape[1] if arrs else 0


def criterion_of(totals: np.ndarray, order: int = 4) -> np.ndarray:
    """(TER - BLEU) / 2 from summed statistic rows (any leading shape)."""
    totals = np.atleast_2d(totals)
    bleu = bleu_from_arrays(totals[:, :2 * order + 2], order)
    terv = totals[:, 2 * order + 2] / totals[:, 2 * order + 3]
    return (terv - bleu) / 2.0


def _winner(scores: np.ndarray, rank: np.ndarray) -> int:
    top = scores.max()
    tied = np.flatnonzero(scores == top)
    if len(tied) == 1:
        return int(tied[0])
    return int(tied[np.argmin(rank[tied])])


def evaluate(pool: NBestPool, weights) -> float:
    """Criterion of the pool's 1-best under ``weights`` (ties by surface)."""
    w = np.asarray(getattr(weights, "values", weights), dtype=np.float64)
    arrs = pool.arrays()
    if not arrs:
        raise DomainError("empty n-best pool")
    total = np.zeros(arrs[0][1].shape[1])
    for feats, stats, rank in arrs:
        if feats.shape[1] != len(w):
            raise ConfigurationError(f"{feats.shape[1]} features vs {len(w)} weights")
        total += stats[_winner(feats @ w, rank)]
    return float(criterion_of(total, pool.order)[0])


def _envelope(a: np.ndarray, b: np.ndarray, rank: np.ndarray):
    """Breakpoints and winners of max_k a_k + g b_k as g sweeps upward."""
    cur = int(np.lexsort((rank, -a, b))[0])
    gammas, winners = [], [cur]
    g_cur = -math.inf
    while True:
        mask = b > b[cur]
        if not mask.any():
            break
        idx = np.flatnonzero(mask)
        g = (a[cur] - a[idx]) / (b[idx] - b[cur])
        ok = g > g_cur
        if not ok.any():
            break
        idx, g = idx[ok], g[ok]
        gmin = g.min()
        cand = idx[g == gmin]
        if len(cand) > 1:
            cand = cand[np.lexsort((rank[cand], -b[cand]))]
        cur = int(cand[0])
        g_cur = float(gmin)
        gammas.append(g_cur)
        winners.append(cur)
    return gammas, winners


def line_search(pool: NBestPool, weights, direction):
    """Exact minimization of the criterion along ``weights + g * direction``.

    Returns ``(g, criterion)``; ``g`` is 0 when the current point is optimal,
    otherwise the midpoint of the best interval (or one unit beyond the
    outermost breakpoint for unbounded intervals).
    """
    w = np.asarray(getattr(weights, "values", weights), dtype=np.float64)
    d = np.asarray(direction, dtype=np.float64)
    arrs = pool.arrays()
    if not arrs:
        raise DomainError("empty n-best pool")
    if len(w) != len(d) or arrs[0][0].shape[1] != len(w):
        raise ConfigurationError("dimension mismatch in line search")
    width = arrs[0][1].shape[1]
    base = np.zeros(width)
    ev_g, ev_delta = [], []
    for feats, stats, rank in arrs:
        gammas, winners = _envelope(feats @ w, feats @ d, rank)
        base += stats[winners[0]]
        for k, g in enumerate(gammas):
            ev_g.append(g)
            ev_delta.append(stats[winners[k + 1]] - stats[winners[k]])
    if not ev_g:
        return 0.0, float(criterion_of(base, pool.order)[0])
    ev_g = np.array(ev_g)
    order = np.argsort(ev_g, kind="stable")
    ev_g = ev_g[order]
    deltas = np.array(ev_delta)[order]
    cum = base + np.cumsum(deltas, axis=0)
    # one interval after each distinct breakpoint
    last_of_group = np.append(ev_g[1:] != ev_g[:-1], True)
    bounds = ev_g[last_of_group]
    totals = np.vstack([base, cum[last_of_group]])
    crits = criterion_of(totals, pool.order)
    lo = np.concatenate([[-math.inf], bounds])
    hi = np.concatenate([bounds, [math.inf]])
    best = crits.min()
    # among optimal intervals prefer the one containing (or nearest to) 0
    cands = np.flatnonzero(crits == best)
    dist = np.where((lo[cands] < 0) & (hi[cands] > 0), 0.0,
                    np.minimum(np.abs(lo[cands]), np.abs(hi[cands])))
    k = int(cands[np.argmin(dist)])
    if lo[k] < 0 < hi[k]:
        step = 0.0
    elif math.isinf(lo[k]):
        step = hi[k] - 1.0
    elif math.isinf(hi[k]):
        step = lo[k] + 1.0
    else:
        step = (lo[k] + hi[k]) / 2.0
    return float(step), float(best)


def _optimize_from(pool: NBestPool, w: np.ndarray, cfg: MERTConfig, rng) -> tuple:
    dim = len(w)
    crit = evaluate(pool, w)
    for _ in range(cfg.max_sweeps):
        directions = [np.eye(dim)[i] for i in range(dim)]
        for _ in range(cfg.random_directions):
            v = rng.normal(size=dim)
            directions.append(v / np.linalg.norm(v))
        best = None
        for d in directions:
            step, c = line_search(pool, w, d)
            if step != 0.0 and c < crit - cfg.epsilon and (best is None or c < best[0]):
                best = (c, w + step * d)
        if best is None:
            break
        # re-evaluate directly so the stored criterion is exact for the new point
        c_new = evaluate(pool, best[1])
        if c_new >= crit:
            break
        crit, w = c_new, best[1]
    return w, crit


def mert(pool: NBestPool, init: Weights, cfg: MERTConfig = MERTConfig()):
    """Best weights over ``cfg.restarts`` starts (the first is ``init``).

    Never returns a pool criterion worse than that of ``init``.
    """
    if len(pool) == 0:
        raise DomainError("empty n-best pool")
    if pool.dim != len(init.values):
        raise ConfigurationError(f"pool has {pool.dim} features, weights {len(init.values)}")
    rng = np.random.default_rng(cfg.seed)
    init_crit = evaluate(pool, init.values)
    best_w, best_c = init.values.copy(), init_crit
    for r in range(cfg.restarts):
        start = init.values.copy() if r == 0 else rng.uniform(-1.0, 1.0, size=len(init.values))
        w, c = _optimize_from(pool, start, cfg, rng)
        log.debug("restart %d: criterion %.6f", r, c)
        if c < best_c:
            best_w, best_c = w, c
    scale = np.max(np.abs(best_w))
    if scale > 0:
        normed = best_w / scale
        c = evaluate(pool, normed)
        if c <= best_c:
            best_w, best_c = normed, c
    return Weights(list(init.names), best_w), best_c


@dataclass
class TuneIteration:
    iteration: int
    decoded_criterion: float
    pool_size: int
    pool_criterion_before: Optional[float] = None
    pool_criterion_after: Optional[float] = None


def tune_loop(networks, refs, lm, init: Weights, cfg: MERTConfig = MERTConfig(),
              localvote=None, metric_cfg: MetricConfig = MetricConfig(), pool: Optional[NBestPool] = None):
    """Alternate decoding and MERT until the 1-best output stops changing.

    Returns the weights whose decoded tune criterion was best, and the
    per-iteration history.
    """
    if refs is None:
        raise DomainError("tuning needs references")
    pool = pool or NBestPool(refs, metric_cfg)
    w = init.copy()
    history = []
    best_w, best_c = None, math.inf
    prev = None
    for it in range(cfg.outer_iterations + 1):
        hyps, nbests = decode_corpus(networks, w, lm, localvote, cfg.n)
        crit = decoded_criterion(pool, networks, hyps)
        rec = TuneIteration(it, crit, len(pool))
        history.append(rec)
        log.info("tune iteration %d: decoded criterion %.6f", it, crit)
        if crit < best_c:
            best_w, best_c = w.copy(), crit
        if hyps == prev or it == cfg.outer_iterations:
            break
        prev = hyps
        pool.merge(nbests)
        rec.pool_size = len(pool)
        rec.pool_criterion_before = evaluate(pool, w)
        w, rec.pool_criterion_after = mert(pool, w, cfg)
    return best_w, history


def decoded_criterion(pool: NBestPool, networks, hyps) -> float:
    """Corpus criterion of 1-best outputs, reusing the pool's statistic cache."""
    total = None
    for cn, h in zip(networks, hyps):
        row = pool.stats_row(cn.sentence_index, h)
        total = row.copy() if total is None else total + row
    return float(criterion_of(total, pool.order)[0])
