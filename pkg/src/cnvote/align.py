"""Confusion network construction by incremental hypothesis alignment.

A primary hypothesis is chosen by minimum average TER against the others.
The remaining hypotheses are then aligned one at a time to the growing
network. A word costs nothing against a slot that already holds that word.
Each slot keeps exactly one arc per system, so reading a system's words
left to right gives back its sentence.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from typing import Iterable, Sequence

from .corpus import EPSILON
from .errors import FormatError
from .metrics import MetricConfig, ter

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Arc:
    word: str
    system_id: int

    @property
    def is_epsilon(self) -> bool:
        return self.word == EPSILON


@dataclass(frozen=True)
class MergedArc:
    word: str
    support: frozenset

    @property
    def is_epsilon(self) -> bool:
        return self.word == EPSILON


@dataclass(frozen=True)
class ConfusionNetwork:
    """``slots[j][i]`` is the word (or ``EPSILON``) system ``i`` puts in slot ``j``."""

    slots: tuple
    num_systems: int
    primary_id: int
    sentence_index: int = 0

    def __post_init__(self):
        for slot in self.slots:
            if len(slot) != self.num_systems:
                raise ValueError("slot arity differs from num_systems")
            if all(w == EPSILON for w in slot):
                raise ValueError("slot without a real word")
            if any(not w for w in slot):
                raise ValueError("empty arc label")

    def __len__(self):
        return len(self.slots)

    def arcs(self, j: int) -> list:
        return [Arc(w, i) for i, w in enumerate(self.slots[j])]

    def system_path(self, system_id: int) -> tuple:
        return tuple(s[system_id] for s in self.slots if s[system_id] != EPSILON)

    def merged(self, j: int) -> list:
        return merge_slot(self.slots[j])

    def replace_slots(self, slots) -> "ConfusionNetwork":
        return ConfusionNetwork(tuple(tuple(s) for s in slots), self.num_systems,
                                self.primary_id, self.sentence_index)


def merge_slot(slot: Sequence[str]) -> list:
    """Group a slot's arcs by word, in order of first appearance."""
    groups: dict = {}
    for i, w in enumerate(slot):
        groups.setdefault(w, []).append(i)
    return [MergedArc(w, frozenset(ids)) for w, ids in groups.items()]


def _pairwise_ter(hyps, cfg):
    n = len(hyps)
    table = [[0.0] * n for _ in range(n)]
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            table[j][i] = ter(hyps[j], hyps[i], cfg).score if hyps[i] else float("inf")
    return table


def select_primary(hyps: Sequence[Sequence[str]], cfg: MetricConfig = MetricConfig(),
                   _table=None) -> int:
    """Index of the hypothesis with lowest mean TER when used as reference."""
    if len(hyps) < 2:
        raise ValueError("need at least two hypotheses")
    table = _table or _pairwise_ter(hyps, cfg)
    n = len(hyps)
    best, best_cost = 0, None
    for i in range(n):
        if not hyps[i]:
            continue
        cost = sum(table[j][i] for j in range(n) if j != i) / (n - 1)
        if best_cost is None or cost < best_cost:
            best, best_cost = i, cost
    return best


def align_pair(slot_words: Sequence[Iterable[str]], hyp: Sequence[str]) -> list:
    """Monotone minimum-edit alignment of ``hyp`` against network slots.

    Returns ``(slot_index, hyp_index)`` pairs in order, with ``None`` on the
    hypothesis side for a deletion (the system gets epsilon) and ``None``
    on the slot side for an insertion (a new slot).
    """
    sets = [frozenset(w for w in s if w != EPSILON) for s in slot_words]
    n, m = len(hyp), len(sets)
    d = [[0] * (m + 1) for _ in range(n + 1)]
    for i in range(n + 1):
        d[i][0] = i
    for j in range(m + 1):
        d[0][j] = j
    for i in range(1, n + 1):
        w = hyp[i - 1]
        row, prev = d[i], d[i - 1]
        for j in range(1, m + 1):
            row[j] = min(prev[j - 1] + (w not in sets[j - 1]), prev[j] + 1, row[j - 1] + 1)
    out = []
    i, j = n, m
    while i > 0 or j > 0:
        if i > 0 and j > 0 and d[i][j] == d[i - 1][j - 1] + (hyp[i - 1] not in sets[j - 1]):
            out.append((j - 1, i - 1))
            i, j = i - 1, j - 1
        elif j > 0 and d[i][j] == d[i][j - 1] + 1:
            out.append((j - 1, None))
            j -= 1
        else:
            out.append((None, i - 1))
            i -= 1
    out.reverse()
    return out


def build_network(hyps: Sequence[Sequence[str]], sentence_index: int = 0,
                  cfg: MetricConfig = MetricConfig()) -> ConfusionNetwork:
    num = len(hyps)
    if num < 2:
        raise ValueError("need at least two hypotheses")
    for i, h in enumerate(hyps):
        if not h:
            log.warning("sentence %d: system %d is empty, using an all-epsilon row",
                        sentence_index, i)
    table = _pairwise_ter(hyps, cfg)
    primary = select_primary(hyps, cfg, _table=table)
    order = sorted((i for i in range(num) if i != primary),
                   key=lambda i: (table[i][primary], i))

    # slots as lists indexed by system; None = system not yet aligned
    slots = [[None] * num for _ in hyps[primary]]
    for j, w in enumerate(hyps[primary]):
        slots[j][primary] = w
    aligned = [primary]
    for sys_id in order:
        hyp = hyps[sys_id]
        if not hyp:
            for s in slots:
                s[sys_id] = EPSILON
            aligned.append(sys_id)
            continue
        pairs = align_pair([[w for w in s if w is not None] for s in slots], hyp)
        new_slots = []
        for j, i in pairs:
            if j is None:
                s = [None] * num
                for a in aligned:
                    s[a] = EPSILON
                s[sys_id] = hyp[i]
            else:
                s = slots[j]
                s[sys_id] = hyp[i] if i is not None else EPSILON
            new_slots.append(s)
        slots = new_slots
        aligned.append(sys_id)
    return ConfusionNetwork(tuple(tuple(s) for s in slots), num, primary, sentence_index)


def build_networks(corpus, cfg: MetricConfig = MetricConfig()) -> list:
    return [build_network(corpus.hypotheses(s), s, cfg) for s in range(len(corpus))]


# --- dump format -------------------------------------------------------------

def network_to_json(cn: ConfusionNetwork) -> str:
    return json.dumps({"sentence_index": cn.sentence_index,
                       "primary_id": cn.primary_id,
                       "num_systems": cn.num_systems,
                       "slots": [list(s) for s in cn.slots]},
                      ensure_ascii=False, separators=(",", ":"))


def network_from_json(line: str) -> ConfusionNetwork:
    try:
        rec = json.loads(line)
        slots = tuple(tuple(s) for s in rec["slots"])
        num = rec.get("num_systems", len(slots[0]) if slots else None)
        if num is None:
            raise FormatError("cannot infer num_systems for an empty network")
        return ConfusionNetwork(slots, int(num), int(rec["primary_id"]),
                                int(rec["sentence_index"]))
    except (KeyError, TypeError, ValueError, json.JSONDecodeError) as e:
        raise FormatError(f"bad network record: {e}") from e


def dump_networks(networks, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for cn in networks:
            f.write(network_to_json(cn) + "\n")


def load_networks(path) -> list:
    with open(path, encoding="utf-8") as f:
        return [network_from_json(line) for line in f if line.strip()]
