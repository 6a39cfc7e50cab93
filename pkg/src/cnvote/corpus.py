"""Parallel system outputs and references as plain text.

Every file holds one sentence per line with space separated tokens. Input
is taken as already tokenized; case is kept as-is and only the metrics
lowercase.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

from .errors import CorpusShapeError, InputValidationError

EPSILON = "<eps>"
UNK = "UNK"
BOS = "<s>"
NN_UNK = "<unk>"
RESERVED = frozenset({EPSILON, UNK, BOS, NN_UNK})

Sentence = tuple  # tuple[str, ...]


def make_sentence(tokens) -> Sentence:
    if isinstance(tokens, str):
        tokens = tokens.split()
    sent = tuple(tokens)
    for tok in sent:
        if not tok:
            raise InputValidationError("empty token")
        if tok in RESERVED:
            raise InputValidationError(f"reserved token {tok!r} in input")
    return sent


@dataclass(frozen=True)
class SystemOutput:
    system_id: int
    name: str
    sentences: tuple

    def __len__(self):
        return len(self.sentences)


@dataclass(frozen=True)
class CombinationCorpus:
    systems: tuple
    references: Optional[tuple] = None

    def __post_init__(self):
        if len(self.systems) < 2:
            raise CorpusShapeError("need at least two systems")
        ids = sorted(s.system_id for s in self.systems)
        if ids != list(range(len(self.systems))):
            raise CorpusShapeError(f"system ids must be 0..I-1, got {ids}")
        n = len(self.systems[0])
        for s in self.systems:
            if len(s) != n:
                raise CorpusShapeError(
                    f"system {s.name!r} has {len(s)} sentences, expected {n}")
        if self.references is not None and len(self.references) != n:
            raise CorpusShapeError(
                f"references have {len(self.references)} sentences, expected {n}")

    @property
    def num_systems(self) -> int:
        return len(self.systems)

    def __len__(self):
        return len(self.systems[0])

    def hypotheses(self, index: int) -> list:
        """All systems' sentences for one sentence index, in system order."""
        return [s.sentences[index] for s in self.systems]

    @classmethod
    def from_lists(cls, system_sentences: Sequence[Sequence], references=None,
                   names: Optional[Sequence[str]] = None) -> "CombinationCorpus":
        systems = []
        for i, sents in enumerate(system_sentences):
            name = names[i] if names else f"sys{i}"
            systems.append(SystemOutput(i, name, tuple(make_sentence(s) for s in sents)))
        refs = None
        if references is not None:
            refs = tuple(make_sentence(r) for r in references)
        return cls(tuple(systems), refs)


def read_sentences(path) -> list:
    path = Path(path)
    with open(path, encoding="utf-8") as f:
        lines = f.read().split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    out = []
    for lineno, line in enumerate(lines, 1):
        try:
            out.append(make_sentence(line.split()))
        except InputValidationError as e:
            raise InputValidationError(f"{path}:{lineno}: {e}") from None
    return out


def write_sentences(sentences, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for sent in sentences:
            f.write(" ".join(sent) + "\n")


def load_corpus(system_paths, reference_path=None) -> CombinationCorpus:
    system_paths = [Path(p) for p in system_paths]
    if len(system_paths) < 2:
        raise CorpusShapeError("need at least two system files")
    loaded = [read_sentences(p) for p in system_paths]
    n = len(loaded[0])
    for p, sents in zip(system_paths, loaded):
        if len(sents) != n:
            raise CorpusShapeError(
                f"{p} has {len(sents)} lines, expected {n} (as in {system_paths[0]})")
    refs = None
    if reference_path is not None:
        refs = read_sentences(reference_path)
        if len(refs) != n:
            raise CorpusShapeError(
                f"{reference_path} has {len(refs)} lines, expected {n}")
        refs = tuple(refs)
    systems = tuple(SystemOutput(i, p.stem, tuple(s))
                    for i, (p, s) in enumerate(zip(system_paths, loaded)))
    return CombinationCorpus(systems, refs)
