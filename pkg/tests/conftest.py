import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

SAMPLE_HYPS = [("the", "black", "cab"), ("an", "red", "train"),
             ("a", "orange", "car"), ("a", "green", "car")]
SAMPLE_REF = ("the", "blue", "car")


@pytest.fixture
def sample_hyps():
    return [tuple(h) for h in SAMPLE_HYPS]


@pytest.fixture
def sample_ref():
    return SAMPLE_REF


@pytest.fixture
def sample_network():
    from cnvote.align import build_network
    return build_network(SAMPLE_HYPS, 0)


def random_network(rng, num_systems=4, max_slots=8, max_words=4, vocab=10, eps_rate=0.15,
                   sentence_index=0):
    """Random confusion network: each slot draws up to ``max_words`` distinct
    words and gives every system one of them (or epsilon)."""
    from cnvote.align import ConfusionNetwork
    from cnvote.corpus import EPSILON

    slots = []
    for _ in range(int(rng.integers(1, max_slots + 1))):
        k = int(rng.integers(1, max_words + 1))
        pool = [f"w{x}" for x in rng.choice(vocab, size=k, replace=False)]
        row = [pool[int(rng.integers(k))] if rng.random() > eps_rate else EPSILON
               for _ in range(num_systems)]
        if all(w == EPSILON for w in row):
            row[int(rng.integers(num_systems))] = pool[0]
        slots.append(tuple(row))
    return ConfusionNetwork(tuple(slots), num_systems, 0, sentence_index)


def random_reference(rng, vocab=10, max_len=8):
    return tuple(f"w{x}" for x in rng.integers(0, vocab, size=int(rng.integers(1, max_len + 1))))


# acceptance results: criterion number -> (passed, detail)
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:>2}: {'PASS' if ok else 'FAIL'}  {detail}")
