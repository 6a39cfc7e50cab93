"""Neural local voting (localVote) feature.

Training examples come from oracle arc decisions: the input is the word
every system puts in a slot (optionally preceded by that system's previous
word) and the target is the oracle's choice. A small feedforward network
is fit to them: a shared projection layer, one rectifier hidden layer and
a softmax over the vocabulary. Its log-probabilities then score arcs
during decoding.
"""

from __future__ import annotations

import io
import json
import logging
from dataclasses import asdict, dataclass
from typing import Optional, Sequence

import numpy as np

from .align import ConfusionNetwork
from .corpus import BOS, EPSILON, NN_UNK, UNK
from .errors import ConsistencyError, DomainError, FormatError
from .wordclass import ClassMap

log = logging.getLogger(__name__)

RESERVED_NN = (BOS, EPSILON, NN_UNK)
MODEL_VERSION = 1


class Vocabulary:
    """Dense word <-> index mapping with the reserved tokens first."""

    def __init__(self, words: Sequence[str] = ()):
        extra = sorted(set(words) - set(RESERVED_NN))
        self.itos = list(RESERVED_NN) + extra
        self.stoi = {w: i for i, w in enumerate(self.itos)}

    def __len__(self):
        return len(self.itos)

    def __contains__(self, word):
        return word in self.stoi

    def __eq__(self, other):
        return isinstance(other, Vocabulary) and self.itos == other.itos

    def index(self, word: str) -> int:
        return self.stoi.get(word, self.stoi[NN_UNK])

    def encode(self, words) -> list:
        return [self.index(w) for w in words]

    @classmethod
    def from_itos(cls, itos) -> "Vocabulary":
        if list(itos[:3]) != list(RESERVED_NN):
            raise FormatError("vocabulary does not start with the reserved tokens")
        v = cls()
        v.itos = list(itos)
        v.stoi = {w: i for i, w in enumerate(v.itos)}
        if len(v.stoi) != len(v.itos):
            raise FormatError("duplicate vocabulary entries")
        return v


@dataclass(frozen=True)
class TrainingExample:
    context: tuple   # history * I words, system-major
    target: str


def build_vocab(examples) -> Vocabulary:
    words = set()
    for ex in examples:
        words.update(ex.context)
        words.add(ex.target)
    return Vocabulary(words)


# --- example extraction ------------------------------------------------------

def slot_contexts(cn: ConfusionNetwork, history: int) -> list:
    """Input words for every slot: each system's arc word, preceded (history 2)
    by that system's last real word in earlier slots or ``<s>``."""
    if history not in (1, 2):
        raise ValueError("history must be 1 or 2")
    prev = [BOS] * cn.num_systems
    out = []
    for slot in cn.slots:
        if history == 1:
            out.append(tuple(slot))
        else:
            ctx = []
            for i, w in enumerate(slot):
                ctx.extend((prev[i], w))
            out.append(tuple(ctx))
        for i, w in enumerate(slot):
            if w != EPSILON:
                prev[i] = w
    return out


def extract_examples(cn: ConfusionNetwork, decisions, history: int = 1) -> list:
    """One example per slot whose oracle decision is a real word.

    ``decisions`` is either an ``OraclePath`` or the per-slot decided words.
    UNK and epsilon decisions produce no example.
    """
    words = decisions.decision_words if hasattr(decisions, "decision_words") else list(decisions)
    if len(words) != len(cn):
        raise ConsistencyError(
            f"sentence {cn.sentence_index}: {len(words)} decisions for {len(cn)} slots")
    contexts = slot_contexts(cn, history)
    out = []
    for j, (slot, word) in enumerate(zip(cn.slots, words)):
        if word in (UNK, EPSILON):
            continue
        if word not in slot:
            raise ConsistencyError(
                f"sentence {cn.sentence_index} slot {j}: decision {word!r} not among arcs")
        out.append(TrainingExample(contexts[j], word))
    return out


def write_examples(examples, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for ex in examples:
            f.write(" ".join(ex.context) + "\t" + ex.target + "\n")


def read_examples(path) -> list:
    out = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            line = line.rstrip("\n")
            if not line:
                continue
            try:
                ctx, target = line.split("\t")
            except ValueError:
                raise FormatError(f"{path}:{lineno}: expected one tab") from None
            out.append(TrainingExample(tuple(ctx.split(" ")), target))
    return out


# --- network -----------------------------------------------------------------

@dataclass(frozen=True)
class NNConfig:
    hidden_size: int = 200
    learning_rate: float = 0.08
    epochs: int = 20
    projection_dim: int = 150
    history: int = 1
    seed: int = 1
    batch_size: int = 64
    init_range: float = 0.05

    def __post_init__(self):
        if min(self.hidden_size, self.projection_dim, self.epochs, self.batch_size) < 1:
            raise ValueError("sizes must be >= 1")
        if self.history not in (1, 2):
            raise ValueError("history must be 1 or 2")


PARAM_NAMES = ("proj", "w_hidden", "b_hidden", "w_out", "b_out")


class FeedForwardNet:
    def __init__(self, vocab: Vocabulary, config: NNConfig, num_inputs: int,
                 params: Optional[dict] = None, classes: Optional[ClassMap] = None):
        self.vocab = vocab
        self.config = config
        self.num_inputs = num_inputs
        # applied to both input and output words when set
        self.classes = classes
        if params is None:
            params = self._init_params()
        self.params = params

    def _init_params(self) -> dict:
        rng = np.random.default_rng(self.config.seed)
        r = self.config.init_range
        v, p, h = len(self.vocab), self.config.projection_dim, self.config.hidden_size
        return {
            "proj": rng.uniform(-r, r, size=(v, p)),
            "w_hidden": rng.uniform(-r, r, size=(self.num_inputs * p, h)),
            "b_hidden": np.zeros(h),
            "w_out": rng.uniform(-r, r, size=(h, v)),
            "b_out": np.zeros(v),
        }

    # forward / backward

    def _forward(self, ctx: np.ndarray):
        P = self.params
        x = P["proj"][ctx].reshape(len(ctx), -1)
        pre = x @ P["w_hidden"] + P["b_hidden"]
        hid = np.maximum(pre, 0.0)
        logits = hid @ P["w_out"] + P["b_out"]
        logits = logits - logits.max(axis=1, keepdims=True)
        e = np.exp(logits)
        probs = e / e.sum(axis=1, keepdims=True)
        return x, pre, hid, probs

    def forward(self, ctx) -> np.ndarray:
        """Posterior over the vocabulary for one context or a batch of them."""
        ctx = np.asarray(ctx, dtype=np.intp)
        single = ctx.ndim == 1
        ctx = np.atleast_2d(ctx)
        if ctx.shape[1] != self.num_inputs:
            raise ValueError(f"context length {ctx.shape[1]}, expected {self.num_inputs}")
        probs = self._forward(ctx)[3]
        return probs[0] if single else probs

    def loss_and_grads(self, ctx: np.ndarray, target: np.ndarray):
        P = self.params
        b = len(ctx)
        x, pre, hid, probs = self._forward(ctx)
        loss = -np.mean(np.log(probs[np.arange(b), target]))
        d_logits = probs.copy()
        d_logits[np.arange(b), target] -= 1.0
        d_logits /= b
        grads = {"w_out": hid.T @ d_logits, "b_out": d_logits.sum(axis=0)}
        d_pre = (d_logits @ P["w_out"].T) * (pre > 0)
        grads["w_hidden"] = x.T @ d_pre
        grads["b_hidden"] = d_pre.sum(axis=0)
        d_x = (d_pre @ P["w_hidden"].T).reshape(b, self.num_inputs, -1)
        d_proj = np.zeros_like(P["proj"])
        np.add.at(d_proj, ctx, d_x)
        grads["proj"] = d_proj
        return loss, grads

    # word-level helpers

    def map_word(self, word: str) -> str:
        if self.classes is None:
            return word
        return self.classes.token(word)

    def encode_context(self, words) -> list:
        return [self.vocab.index(self.map_word(w)) for w in words]

    def output_index(self, word: str) -> int:
        return self.vocab.index(self.map_word(word))


def encode_examples(net: FeedForwardNet, examples):
    ctx = np.array([net.encode_context(ex.context) for ex in examples], dtype=np.intp)
    tgt = np.array([net.output_index(ex.target) for ex in examples], dtype=np.intp)
    return ctx, tgt


def train(examples, cfg: NNConfig = NNConfig(), classes: Optional[ClassMap] = None,
          vocab: Optional[Vocabulary] = None, report=None):
    """Minibatch SGD on cross-entropy. Returns the net and per-epoch mean loss."""
    examples = list(examples)
    if not examples:
        raise DomainError("no training examples")
    for ex in examples:
        if ex.target in (UNK, EPSILON):
            raise DomainError(f"illegal training target {ex.target!r}")
    num_inputs = len(examples[0].context)
    if num_inputs % cfg.history:
        raise ValueError("context length is not a multiple of the history size")
    if vocab is None:
        if classes is not None:
            mapped = [TrainingExample(tuple(classes.token(w) for w in ex.context),
                                      classes.token(ex.target)) for ex in examples]
            vocab = build_vocab(mapped)
        else:
            vocab = build_vocab(examples)
    net = FeedForwardNet(vocab, cfg, num_inputs, classes=classes)
    ctx, tgt = encode_examples(net, examples)
    rng = np.random.default_rng(cfg.seed + 1)
    losses = []
    n = len(ctx)
    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            loss, grads = net.loss_and_grads(ctx[idx], tgt[idx])
            total += loss * len(idx)
            for name in PARAM_NAMES:
                net.params[name] -= cfg.learning_rate * grads[name]
        losses.append(total / n)
        log.info("epoch %d loss %.5f", epoch + 1, losses[-1])
        if report is not None:
            report(epoch + 1, losses[-1])
    return net, losses


def accuracy(net: FeedForwardNet, examples) -> float:
    ctx, tgt = encode_examples(net, examples)
    return float(np.mean(np.argmax(net.forward(ctx), axis=1) == tgt))


# --- scoring -----------------------------------------------------------------

def score_arc(net: FeedForwardNet, slot_words: Sequence[str], arc_word: str,
              history_words: Optional[Sequence[str]] = None) -> float:
    """log p(arc word | slot words [, per-system predecessors]); 0 for epsilon."""
    if arc_word == EPSILON:
        return 0.0
    if net.config.history == 2:
        if history_words is None:
            raise ValueError("bigram model needs history words")
        ctx = [w for pair in zip(history_words, slot_words) for w in pair]
    else:
        ctx = list(slot_words)
    probs = net.forward(net.encode_context(ctx))
    return float(np.log(probs[net.output_index(arc_word)]))


def network_arc_scores(net: FeedForwardNet, cn: ConfusionNetwork) -> list:
    """Per slot, a dict word -> localVote log-probability (epsilon -> 0)."""
    if len(cn) == 0:
        return []
    contexts = slot_contexts(cn, net.config.history)
    if len(contexts[0]) != net.num_inputs:
        raise ValueError("network arity does not match the model")
    ctx = np.array([net.encode_context(c) for c in contexts], dtype=np.intp)
    logp = np.log(net.forward(ctx))
    out = []
    for j, slot in enumerate(cn.slots):
        scores = {}
        for w in slot:
            scores[w] = 0.0 if w == EPSILON else float(logp[j, net.output_index(w)])
        out.append(scores)
    return out


# --- persistence -------------------------------------------------------------

def save_model(net: FeedForwardNet, path) -> None:
    meta = {"version": MODEL_VERSION, "config": asdict(net.config),
            "num_inputs": net.num_inputs, "vocab": net.vocab.itos,
            "classes": None if net.classes is None else
            {"num_classes": net.classes.num_classes,
             "map": sorted(net.classes.word_to_class.items())}}
    arrays = {name: net.params[name] for name in PARAM_NAMES}
    buf = io.BytesIO()
    np.savez(buf, meta=np.frombuffer(json.dumps(meta).encode("utf-8"), dtype=np.uint8), **arrays)
    with open(path, "wb") as f:
        f.write(buf.getvalue())


def load_model(path) -> FeedForwardNet:
    try:
        with np.load(path, allow_pickle=False) as data:
            meta = json.loads(bytes(data["meta"]).decode("utf-8"))
            params = {name: np.array(data[name]) for name in PARAM_NAMES}
    except FormatError:
        raise
    except Exception as e:
        raise FormatError(f"cannot read model {path}: {e}") from e
    if meta.get("version") != MODEL_VERSION:
        raise FormatError(f"unsupported model version {meta.get('version')}")
    cfg = NNConfig(**meta["config"])
    vocab = Vocabulary.from_itos(meta["vocab"])
    v, p, h, k = len(vocab), cfg.projection_dim, cfg.hidden_size, meta["num_inputs"]
    shapes = {"proj": (v, p), "w_hidden": (k * p, h), "b_hidden": (h,),
              "w_out": (h, v), "b_out": (v,)}
    for name, shape in shapes.items():
        if params[name].shape != shape:
            raise FormatError(f"{name} has shape {params[name].shape}, expected {shape}")
    classes = None
    if meta["classes"] is not None:
        classes = ClassMap(dict(meta["classes"]["map"]), meta["classes"]["num_classes"])
    return FeedForwardNet(vocab, cfg, k, params, classes)
