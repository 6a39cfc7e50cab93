"""How often words backed by few systems survive into the combined output.

Counting is per sentence and per word type. For each sentence, every
distinct word in the union of the system outputs gets a support count (the
number of systems whose output contains it) and a flag saying whether the
combined output contains it.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .errors import CorpusShapeError


@dataclass(frozen=True)
class OccurrenceRow:
    support: int
    in_output: int
    total: int

    @property
    def percent(self) -> float:
        return 100.0 * self.in_output / self.total if self.total else 0.0

    def format(self) -> str:
        return f"{self.in_output}/{self.total} ({self.percent:.1f}%)"


def word_occurrence_distribution(system_outputs: Sequence[Sequence[Sequence[str]]],
                                 combined: Sequence[Sequence[str]], lowercase: bool = False) -> list:
    """Rows for support ``c = 1..I``.

    ``system_outputs[i][s]`` is system i's sentence s; ``combined[s]`` is the
    combined output for sentence s.
    """
    I = len(system_outputs)
    S = len(combined)
    for i, out in enumerate(system_outputs):
        if len(out) != S:
            raise CorpusShapeError(f"system {i} has {len(out)} sentences, combined output has {S}")
    norm = (lambda w: w.lower()) if lowercase else (lambda w: w)
    hit = [0] * (I + 1)
    tot = [0] * (I + 1)
    for s in range(S):
        types = [set(map(norm, system_outputs[i][s])) for i in range(I)]
        out = set(map(norm, combined[s]))
        support = {}
        for ts in types:
            for w in ts:
                support[w] = support.get(w, 0) + 1
        for w, c in support.items():
            tot[c] += 1
            if w in out:
                hit[c] += 1
    return [OccurrenceRow(c, hit[c], tot[c]) for c in range(1, I + 1)]


def format_distribution(columns: dict) -> str:
    """Text table; ``columns`` maps a column label to its row list."""
    labels = list(columns)
    if not labels:
        return ""
    n = len(columns[labels[0]])
    width = max(18, *(len(x) for x in labels))
    lines = ["support  " + "  ".join(f"{x:>{width}}" for x in labels)]
    for k in range(n):
        cells = "  ".join(f"{columns[x][k].format():>{width}}" for x in labels)
        lines.append(f"{columns[labels[0]][k].support:>7}  {cells}")
    return "\n".join(lines) + "\n"
