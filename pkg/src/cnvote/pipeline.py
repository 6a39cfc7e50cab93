"""End-to-end combination runs over the three data splits.

Splits:

* ``tune_nn``: oracle paths and localVote training examples come from here.
* ``tune_mert``: linear-model weights are tuned here.
* ``test``: held-out evaluation.

A run writes every intermediate artifact into one directory together with
a snapshot of the configuration. The contents depend only on the inputs
and the seeds.

Config file (JSON)::

    {
      "splits": {
        "tune_nn":   {"systems": ["sys0.txt", "sys1.txt"], "reference": "ref.txt"},
        "tune_mert": {"systems": [...], "reference": "..."},
        "test":      {"systems": [...], "reference": "..."}
      },
      "oracle": {"k": 1200},
      "localvote": {"enabled": true, "history": 1},
      "nn": {"hidden_size": 200, "learning_rate": 0.08, "epochs": 20, ...},
      "word_classes": {"enabled": false, "num_classes": 1000, "iterations": 10},
      "mert": {"restarts": 5, "outer_iterations": 5, "n": 200},
      "seed": 1
    }

Relative paths are resolved against the config file's directory. A
``seed`` given inside ``nn``, ``word_classes`` or ``mert`` overrides the
top-level one for that stage.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import os
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Optional, Sequence

from .align import build_network, dump_networks
from .analysis import format_distribution, word_occurrence_distribution
from .corpus import CombinationCorpus, load_corpus, write_sentences
from .decode import Weights, arc_scorer, decode_corpus
from .errors import CnvoteError, ConfigurationError
from .lm import train_lm
from .metrics import (MetricConfig, bootstrap_significance, corpus_bleu, corpus_ter,
                      significance_marker)
from .nnvote import NNConfig, extract_examples, save_model, train, write_examples
from .oracle import OracleConfig, oracle_corpus, write_decisions
from .tune import MERTConfig, tune_loop
from .wordclass import ClusterConfig, train_classes

log = logging.getLogger(__name__)

SPLITS = ("tune_nn", "tune_mert", "test")


class PipelineError(CnvoteError):
    def __init__(self, stage: str, message: str, sentence_index: Optional[int] = None):
        where = f" (sentence {sentence_index})" if sentence_index is not None else ""
        super().__init__(f"stage {stage}{where}: {message}")
        self.stage = stage
        self.sentence_index = sentence_index


@dataclass(frozen=True)
class SplitPaths:
    systems: tuple
    reference: Optional[str] = None


@dataclass
class PipelineConfig:
    splits: dict = field(default_factory=dict)  # role -> SplitPaths
    oracle_k: Optional[int] = 1200
    localvote: bool = True
    history: int = 1
    nn: NNConfig = NNConfig()
    word_classes: bool = False
    cluster: ClusterConfig = ClusterConfig()
    mert: MERTConfig = MERTConfig()
    seed: int = 1

    def validate(self, check_files: bool = True) -> None:
        missing = [r for r in SPLITS if r not in self.splits]
        if missing:
            raise ConfigurationError(f"missing splits: {', '.join(missing)}")
        owner = {}
        for role in SPLITS:
            sp = self.splits[role]
            files = list(sp.systems) + ([sp.reference] if sp.reference else [])
            for p in files:
                key = os.path.realpath(p)
                if key in owner and owner[key] != role:
                    raise ConfigurationError(f"{p} is used by both {owner[key]} and {role}")
                owner[key] = role
                if check_files and not os.path.isfile(p):
                    raise ConfigurationError(f"{role}: no such file {p}")
            if role in ("tune_nn", "tune_mert") and not sp.reference:
                raise ConfigurationError(f"{role} needs a reference")
        if self.oracle_k is not None and self.oracle_k < 1:
            raise ConfigurationError("oracle k must be >= 1")
        if self.history not in (1, 2):
            raise ConfigurationError("history must be 1 or 2")

    def to_dict(self) -> dict:
        return {
            "splits": {r: {"systems": list(s.systems), "reference": s.reference}
                       for r, s in sorted(self.splits.items())},
            "oracle": {"k": self.oracle_k},
            "localvote": {"enabled": self.localvote, "history": self.history},
            "nn": asdict(self.nn),
            "word_classes": {"enabled": self.word_classes, **asdict(self.cluster)},
            "mert": asdict(self.mert),
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict, base_dir: Optional[str] = None) -> "PipelineConfig":
        known = {"splits", "oracle", "localvote", "nn", "word_classes", "mert", "seed"}
        extra = set(d) - known
        if extra:
            raise ConfigurationError(f"unknown config keys: {', '.join(sorted(extra))}")

        def resolve(p):
            if p is None or base_dir is None or os.path.isabs(p):
                return p
            return os.path.join(base_dir, p)

        seed = int(d.get("seed", 1))
        splits = {}
        for role, sp in d.get("splits", {}).items():
            if role not in SPLITS:
                raise ConfigurationError(f"unknown split {role!r}")
            splits[role] = SplitPaths(tuple(resolve(p) for p in sp["systems"]),
                                      resolve(sp.get("reference")))
        lv = d.get("localvote", {})
        wc = dict(d.get("word_classes", {}))
        try:
            nn = _with_seed(NNConfig, d.get("nn", {}), seed)
            cluster = _with_seed(ClusterConfig, {k: v for k, v in wc.items() if k != "enabled"}, seed)
            mert = _with_seed(MERTConfig, d.get("mert", {}), seed)
        except (TypeError, ValueError) as e:
            raise ConfigurationError(str(e)) from e
        return cls(splits=splits, oracle_k=d.get("oracle", {}).get("k", 1200),
                   localvote=bool(lv.get("enabled", True)), history=int(lv.get("history", 1)),
                   nn=nn, word_classes=bool(wc.get("enabled", False)), cluster=cluster,
                   mert=mert, seed=seed)

    @classmethod
    def load(cls, path) -> "PipelineConfig":
        with open(path, encoding="utf-8") as f:
            try:
                d = json.load(f)
            except json.JSONDecodeError as e:
                raise ConfigurationError(f"{path}: {e}") from e
        return cls.from_dict(d, os.path.dirname(os.path.abspath(path)))


def _with_seed(klass, values: dict, seed: int):
    names = {f.name for f in fields(klass)}
    unknown = set(values) - names
    if unknown:
        raise ConfigurationError(f"unknown {klass.__name__} keys: {', '.join(sorted(unknown))}")
    values = dict(values)
    values.setdefault("seed", seed)
    return klass(**values)


@dataclass
class SystemRun:
    """Tuned weights and outputs of one feature set."""
    name: str
    weights: Weights
    tune_criterion: float
    test_output: list
    history: list


@dataclass
class RunResult:
    rows: list            # report rows (dicts)
    baseline: SystemRun
    localvote: Optional[SystemRun] = None
    oracle_stats: Optional[dict] = None


# --- stages ------------------------------------------------------------------

def _stage(name):
    def wrap(fn):
        def inner(*args, **kw):
            try:
                return fn(*args, **kw)
            except PipelineError:
                raise
            except Exception as e:
                raise PipelineError(name, f"{type(e).__name__}: {e}",
                                    getattr(e, "sentence_index", None)) from e
        inner.__name__ = fn.__name__
        inner.__doc__ = fn.__doc__
        return inner
    return wrap


@_stage("build")
def build_split_networks(corpus: CombinationCorpus, metric_cfg: MetricConfig = MetricConfig()) -> list:
    nets = []
    for s in range(len(corpus)):
        try:
            nets.append(build_network(corpus.hypotheses(s), s, metric_cfg))
        except Exception as e:
            raise PipelineError("build", f"{type(e).__name__}: {e}", s) from e
    return nets


@_stage("oracle")
def run_oracle(networks, refs, k: Optional[int], weights: Optional[Weights] = None, lm=None):
    scorer_for = None
    if weights is not None and lm is not None:
        scorer_for = lambda cn: arc_scorer(cn, weights, lm)
    return oracle_corpus(networks, refs, OracleConfig(k=k), scorer_for=scorer_for)


@_stage("extract")
def run_extract(networks, paths, history: int) -> list:
    examples = []
    for cn, p in zip(networks, paths):
        examples.extend(extract_examples(cn, p, history))
    return examples


@_stage("classes")
def run_classes(corpus: CombinationCorpus, cfg: ClusterConfig):
    sents = [s for sysout in corpus.systems for s in sysout.sentences]
    return train_classes(sents, cfg)


@_stage("nn-train")
def run_nn_train(examples, cfg: NNConfig, classes=None):
    return train(examples, cfg, classes=classes)


@_stage("tune")
def run_tune(networks, refs, lm, init: Weights, cfg: MERTConfig, net=None):
    w, hist = tune_loop(networks, refs, lm, init, cfg, localvote=net)
    return w, min(h.decoded_criterion for h in hist), hist


@_stage("decode")
def run_decode(networks, weights, lm, net=None, n: int = 1):
    hyps, _ = decode_corpus(networks, weights, lm, net, n)
    return hyps


def _scores(hyps, refs) -> dict:
    bleu = corpus_bleu(hyps, refs)
    terv = corpus_ter(hyps, refs)
    return {"bleu": bleu, "ter": terv, "criterion": (terv - bleu) / 2.0}


def _write_history(hist, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["iteration", "decoded_criterion", "pool_size",
                    "pool_criterion_before", "pool_criterion_after"])
        for h in hist:
            w.writerow([h.iteration, repr(h.decoded_criterion), h.pool_size,
                        "" if h.pool_criterion_before is None else repr(h.pool_criterion_before),
                        "" if h.pool_criterion_after is None else repr(h.pool_criterion_after)])


# --- driver ------------------------------------------------------------------

def load_splits(cfg: PipelineConfig) -> dict:
    out = {}
    for role in SPLITS:
        sp = cfg.splits[role]
        try:
            out[role] = load_corpus(list(sp.systems), sp.reference)
        except CnvoteError as e:
            raise PipelineError("load", f"{role}: {e}") from e
    return out


def run_pipeline(cfg: PipelineConfig, run_dir, corpora: Optional[dict] = None) -> RunResult:
    """Run every stage and write the artifacts into ``run_dir``.

    ``corpora`` (role -> CombinationCorpus) skips loading from the
    configured paths, which is handy for in-memory data.
    """
    if corpora is None:
        cfg.validate()
        corpora = load_splits(cfg)
    else:
        missing = [r for r in SPLITS if r not in corpora]
        if missing:
            raise ConfigurationError(f"missing splits: {', '.join(missing)}")
    out = Path(run_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "config.json", "w", encoding="utf-8", newline="\n") as f:
        json.dump(cfg.to_dict(), f, indent=2, sort_keys=True)
        f.write("\n")

    I = corpora["tune_mert"].num_systems
    for role, c in corpora.items():
        if c.num_systems != I:
            raise PipelineError("load", f"{role} has {c.num_systems} systems, tune_mert has {I}")
    nets = {}
    lms = {}
    for role in SPLITS:
        nets[role] = build_split_networks(corpora[role])
        dump_networks(nets[role], out / f"networks.{role}.jsonl")
        lms[role] = train_lm(corpora[role])

    tune_refs = corpora["tune_mert"].references

    # baseline feature set
    base_dir = out / "baseline"
    base_dir.mkdir(exist_ok=True)
    bw, bcrit, bhist = run_tune(nets["tune_mert"], tune_refs, lms["tune_mert"], Weights.initial(I), cfg.mert)
    bw.save(base_dir / "weights.txt")
    _write_history(bhist, base_dir / "tune_history.csv")
    b_test = run_decode(nets["test"], bw, lms["test"])
    write_sentences(b_test, base_dir / "output.test.txt")
    baseline = SystemRun("baseline", bw, bcrit, b_test, bhist)

    lv_run, ostats = None, None
    if cfg.localvote:
        lv_run, ostats = _localvote_stage(cfg, corpora, nets, lms, bw, bcrit, out / "localvote")

    rows = _report(cfg, corpora, baseline, lv_run, ostats, out)
    return RunResult(rows, baseline, lv_run, ostats)


def _localvote_stage(cfg, corpora, nets, lms, base_w, base_crit, lv_dir, save=True):
    lv_dir = Path(lv_dir)
    if save:
        lv_dir.mkdir(parents=True, exist_ok=True)
    nn_corpus = corpora["tune_nn"]
    paths, ostats = run_oracle(nets["tune_nn"], nn_corpus.references, cfg.oracle_k,
                               base_w, lms["tune_nn"])
    examples = run_extract(nets["tune_nn"], paths, cfg.history)
    classes = run_classes(nn_corpus, cfg.cluster) if cfg.word_classes else None
    nn_cfg = replace(cfg.nn, history=cfg.history)
    net, losses = run_nn_train(examples, nn_cfg, classes)
    init = base_w.with_localvote(0.0)
    w, crit, hist = run_tune(nets["tune_mert"], corpora["tune_mert"].references,
                             lms["tune_mert"], init, cfg.mert, net)
    test_out = run_decode(nets["test"], w, lms["test"], net)
    if save:
        write_sentences([p.words for p in paths], lv_dir / "oracle.tune_nn.txt")
        write_decisions(paths, lv_dir / "decisions.jsonl")
        write_examples(examples, lv_dir / "examples.txt")
        if classes is not None:
            classes.save(lv_dir / "classes.txt")
        save_model(net, lv_dir / "model.npz")
        with open(lv_dir / "nn_loss.txt", "w", encoding="utf-8", newline="\n") as f:
            f.writelines(f"{i + 1}\t{x!r}\n" for i, x in enumerate(losses))
        w.save(lv_dir / "weights.txt")
        _write_history(hist, lv_dir / "tune_history.csv")
        write_sentences(test_out, lv_dir / "output.test.txt")
    return SystemRun("+localVote", w, crit, test_out, hist), ostats


def _report(cfg, corpora, baseline, lv_run, ostats, out: Path) -> list:
    test = corpora["test"]
    refs = test.references
    rows = []
    for sysout in test.systems:
        rows.append({"name": sysout.name, "tune_criterion": None, **(_scores(sysout.sentences, refs) if refs else {})})
    runs = [baseline] + ([lv_run] if lv_run is not None else [])
    for r in runs:
        rows.append({"name": r.name, "tune_criterion": r.tune_criterion,
                     **(_scores(r.test_output, refs) if refs else {})})

    lines = ["system combination report", ""]
    if refs:
        lines.append(f"{'system':<14}{'BLEU':>8}{'TER':>8}{'(T-B)/2':>9}{'tune':>9}")
        for row in rows:
            tune = "" if row["tune_criterion"] is None else f"{100 * row['tune_criterion']:.2f}"
            lines.append(f"{row['name']:<14}{100 * row['bleu']:>8.2f}{100 * row['ter']:>8.2f}"
                         f"{100 * row['criterion']:>9.2f}{tune:>9}")
        if lv_run is not None:
            conf = bootstrap_significance(lv_run.test_output, baseline.test_output, refs,
                                          samples=1000, seed=cfg.seed)
            mark = significance_marker(conf)
            lines += ["", f"+localVote beats baseline on test BLEU in {100 * conf:.1f}% "
                          f"of bootstrap samples{(' ' + mark) if mark else ''}"]
    if ostats is not None:
        lines += ["", f"oracle on tune_nn (k={cfg.oracle_k}): BLEU {100 * ostats['bleu']:.2f} "
                      f"TER {100 * ostats['ter']:.2f} (T-B)/2 {100 * ostats['criterion']:.2f}"]
    sys_sents = [s.sentences for s in test.systems]
    cols = {"baseline": word_occurrence_distribution(sys_sents, baseline.test_output)}
    if lv_run is not None:
        cols["+localVote"] = word_occurrence_distribution(sys_sents, lv_run.test_output)
    lines += ["", "word occurrence on test (in output / with support c)",
              format_distribution(cols).rstrip("\n")]
    with open(out / "report.txt", "w", encoding="utf-8", newline="\n") as f:
        f.write("\n".join(lines) + "\n")
    with open(out / "report.csv", "w", encoding="utf-8", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["name", "bleu", "ter", "criterion", "tune_criterion"])
        for row in rows:
            w.writerow([row["name"], *(repr(row[k]) if k in row else "" for k in ("bleu", "ter", "criterion")),
                        "" if row["tune_criterion"] is None else repr(row["tune_criterion"])])
    return rows


# --- sweeps ------------------------------------------------------------------

SWEEP_AXES = ("k", "class_size")
SWEEP_HEADER = ["value", "oracle_bleu", "oracle_ter", "oracle_criterion", "tune_criterion"]


def sweep(cfg: PipelineConfig, axis: str, values: Sequence, corpora: Optional[dict] = None,
          oracle_only: bool = False) -> str:
    """CSV text with one row per value of ``axis``.

    ``oracle_only`` (k axis only) skips NN training and tuning and leaves
    ``tune_criterion`` empty.
    """
    if axis not in SWEEP_AXES:
        raise ConfigurationError(f"axis must be one of {SWEEP_AXES}")
    if not values:
        raise ConfigurationError("no sweep values")
    if axis == "k" and any(v is not None and int(v) < 1 for v in values):
        raise ConfigurationError("k values must be >= 1")
    if axis == "class_size" and any(int(v) < 2 for v in values):
        raise ConfigurationError("class sizes must be >= 2")
    if oracle_only and axis != "k":
        raise ConfigurationError("oracle_only applies to the k axis")
    if corpora is None:
        cfg.validate()
        corpora = load_splits(cfg)
    roles = ("tune_nn",) if oracle_only else SPLITS
    nets = {r: build_split_networks(corpora[r]) for r in roles}
    lms = {r: train_lm(corpora[r]) for r in roles}
    I = corpora["tune_nn"].num_systems
    if oracle_only:
        base_w = Weights.initial(I)
    else:
        base_w, base_c, _ = run_tune(nets["tune_mert"], corpora["tune_mert"].references,
                                     lms["tune_mert"], Weights.initial(I), cfg.mert)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SWEEP_HEADER)
    for v in values:
        if axis == "k":
            c = replace(cfg, oracle_k=None if v is None else int(v))
        else:
            c = replace(cfg, word_classes=True, cluster=replace(cfg.cluster, num_classes=int(v)))
        if oracle_only:
            _, ostats = run_oracle(nets["tune_nn"], corpora["tune_nn"].references, c.oracle_k,
                                   base_w, lms["tune_nn"])
            tune_c = ""
        else:
            run, ostats = _localvote_stage(c, corpora, nets, lms, base_w, base_c, "", save=False)
            tune_c = repr(run.tune_criterion)
        w.writerow(["inf" if v is None else v, repr(ostats["bleu"]), repr(ostats["ter"]),
                    repr(ostats["criterion"]), tune_c])
    return buf.getvalue()
