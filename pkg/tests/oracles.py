"""Independent reference implementations used as test oracles.

These are deliberately naive (plain loops, exhaustive enumeration) and share
no code with the package.
"""

import itertools
import math
from collections import deque

EPS = "<eps>"


def ngrams(words, n):
    return [tuple(words[i:i + n]) for i in range(len(words) - n + 1)]


def clipped_matches(hyp, ref, n):
    ref_grams = ngrams(ref, n)
    matched = 0
    pool = list(ref_grams)
    for g in ngrams(hyp, n):
        if g in pool:
            pool.remove(g)
            matched += 1
    return matched


def brute_sbleu(hyp, ref, order=4):
    hyp = [w.lower() for w in hyp]
    ref = [w.lower() for w in ref]
    if not hyp:
        return 0.0
    logp = 0.0
    for n in range(1, order + 1):
        m = clipped_matches(hyp, ref, n)
        t = max(len(hyp) - n + 1, 0)
        logp += math.log((m + 1) / (t + 1))
    bp = min(1.0, math.exp(1 - len(ref) / len(hyp)))
    return bp * math.exp(logp / order)


def brute_corpus_bleu(hyps, refs, order=4):
    m = [0] * order
    t = [0] * order
    hl = rl = 0
    for h, r in zip(hyps, refs):
        h = [w.lower() for w in h]
        r = [w.lower() for w in r]
        hl += len(h)
        rl += len(r)
        for n in range(1, order + 1):
            m[n - 1] += clipped_matches(h, r, n)
            t[n - 1] += max(len(h) - n + 1, 0)
    if hl == 0 or any(x == 0 for x in m):
        return 0.0
    logp = sum(math.log(m[i] / t[i]) for i in range(order)) / order
    bp = 1.0 if hl > rl else math.exp(1 - rl / hl)
    return bp * math.exp(logp)


def lev(a, b):
    """Plain recursive-table edit distance."""
    table = {}
    for i in range(len(a) + 1):
        for j in range(len(b) + 1):
            if i == 0 or j == 0:
                table[i, j] = i + j
            else:
                table[i, j] = min(table[i - 1, j] + 1, table[i, j - 1] + 1,
                                  table[i - 1, j - 1] + (a[i - 1] != b[j - 1]))
    return table[len(a), len(b)]


def all_shifts(words):
    n = len(words)
    out = set()
    for s in range(n):
        for length in range(1, n - s + 1):
            block = words[s:s + length]
            rest = words[:s] + words[s + length:]
            for d in range(len(rest) + 1):
                if d != s:
                    out.add(tuple(rest[:d] + block + rest[d:]))
    return out


def exhaustive_ter_edits(hyp, ref, max_shifts=3):
    """min over shift sequences of length <= max_shifts of (#shifts + edit distance)."""
    hyp = tuple(w.lower() for w in hyp)
    ref = tuple(w.lower() for w in ref)
    best = lev(hyp, ref)
    seen = {hyp: 0}
    frontier = deque([hyp])
    while frontier:
        cur = frontier.popleft()
        depth = seen[cur]
        if depth >= max_shifts or depth + 1 >= best:
            continue
        for nxt in all_shifts(list(cur)):
            if nxt in seen:
                continue
            seen[nxt] = depth + 1
            best = min(best, depth + 1 + lev(nxt, ref))
            frontier.append(nxt)
    return best


def best_single_shift_edits(hyp, ref):
    hyp = [w.lower() for w in hyp]
    ref = [w.lower() for w in ref]
    best = lev(hyp, ref)
    for s in all_shifts(hyp):
        best = min(best, 1 + lev(s, ref))
    return best


def enumerate_paths(slots):
    """Every distinct surface string of a network given as rows of words."""
    choices = [sorted(set(slot)) for slot in slots]
    out = set()
    for pick in itertools.product(*choices):
        out.add(tuple(w for w in pick if w != EPS))
    return out


def witten_bell_trigram(sentences):
    """Dict-based Witten-Bell interpolated trigram, returns prob(w, u, v)."""
    bos, eos, unk = "<s>", "</s>", "<unk>"
    uni, bi, tri = {}, {}, {}
    for s in sentences:
        toks = [bos, bos] + list(s) + [eos]
        for i in range(2, len(toks)):
            w, v, u = toks[i], toks[i - 1], toks[i - 2]
            uni[w] = uni.get(w, 0) + 1
            bi[(v, w)] = bi.get((v, w), 0) + 1
            tri[(u, v, w)] = tri.get((u, v, w), 0) + 1
    vocab = set(uni) | {eos, unk}
    total = sum(uni.values())

    def p1(w):
        types = len(uni)
        lam = total / (total + types)
        return lam * uni.get(w, 0) / total + (1 - lam) / len(vocab)

    def p2(w, v):
        c = sum(k for (a, _), k in bi.items() if a == v)
        t = sum(1 for (a, _) in bi if a == v)
        if c == 0:
            return p1(w)
        lam = c / (c + t)
        return lam * bi.get((v, w), 0) / c + (1 - lam) * p1(w)

    def p3(w, u, v):
        w = w if w in vocab else unk
        c = sum(k for (a, b, _), k in tri.items() if (a, b) == (u, v))
        t = sum(1 for (a, b, _) in tri if (a, b) == (u, v))
        if c == 0:
            return p2(w, v)
        lam = c / (c + t)
        return lam * tri.get((u, v, w), 0) / c + (1 - lam) * p2(w, v)

    return p3, vocab
