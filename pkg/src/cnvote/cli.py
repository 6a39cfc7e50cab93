"""Command-line entry point: ``cnvote <subcommand> ...``."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

from . import __version__
from .align import build_networks, dump_networks, load_networks
from .analysis import format_distribution, word_occurrence_distribution
from .corpus import load_corpus, read_sentences, write_sentences
from .decode import Weights, decode_corpus, write_nbest
from .errors import CnvoteError
from .lm import train_lm
from .metrics import (bootstrap_significance, corpus_bleu, corpus_ter, significance_marker)
from .nnvote import (NNConfig, accuracy, extract_examples, load_model, read_examples,
                     save_model, train, write_examples)
from .oracle import OracleConfig, oracle_corpus, read_decisions, write_decisions
from .pipeline import SWEEP_AXES, PipelineConfig, run_pipeline, sweep
from .synth import NoiseSpec, generate_references, generate_systems, write_labels
from .tune import MERTConfig, tune_loop
from .wordclass import ClassMap, ClusterConfig, train_classes

log = logging.getLogger("cnvote")


def _k(value: str):
    if value.lower() in ("inf", "none", "all"):
        return None
    k = int(value)
    if k < 1:
        raise argparse.ArgumentTypeError("k must be >= 1 or 'inf'")
    return k


def _networks(args, corpus):
    if getattr(args, "networks", None):
        nets = load_networks(args.networks)
        if len(nets) != len(corpus):
            raise CnvoteError(f"{args.networks} has {len(nets)} networks, corpus has {len(corpus)} sentences")
        return nets
    return build_networks(corpus)


# --- subcommands -------------------------------------------------------------

def cmd_combine(args):
    corpus = load_corpus(args.systems)
    nets = _networks(args, corpus)
    if args.dump_cn:
        dump_networks(nets, args.dump_cn)
    net = load_model(args.model) if args.model else None
    if args.weights:
        weights = Weights.load(args.weights)
    else:
        weights = Weights.initial(corpus.num_systems, localvote=net is not None)
    lm = train_lm(corpus)
    hyps, nbests = decode_corpus(nets, weights, lm, net, args.n)
    write_sentences(hyps, args.output)
    if args.nbest:
        write_nbest(nbests, args.nbest)


def cmd_oracle(args):
    corpus = load_corpus(args.systems, args.ref)
    nets = _networks(args, corpus)
    paths, stats = oracle_corpus(nets, corpus.references, OracleConfig(k=args.k),
                                 simplify=not args.no_simplify)
    write_sentences([p.words for p in paths], args.output)
    if args.decisions:
        write_decisions(paths, args.decisions)
    print(f"oracle BLEU {100 * stats['bleu']:.2f} TER {100 * stats['ter']:.2f} "
          f"(TER-BLEU)/2 {100 * stats['criterion']:.2f}")


def cmd_extract(args):
    nets = load_networks(args.networks)
    decisions = read_decisions(args.decisions)
    examples = []
    for cn in nets:
        if cn.sentence_index in decisions:
            examples.extend(extract_examples(cn, decisions[cn.sentence_index], args.history))
    write_examples(examples, args.output)
    print(f"{len(examples)} examples")


def cmd_classes(args):
    sents = [s for path in args.input for s in read_sentences(path)]
    cmap = train_classes(sents, ClusterConfig(args.num_classes, args.iterations, args.seed))
    cmap.save(args.output)


def cmd_nn_train(args):
    examples = read_examples(args.examples)
    classes = ClassMap.load(args.classes) if args.classes else None
    cfg = NNConfig(hidden_size=args.hidden, learning_rate=args.lr, epochs=args.epochs,
                   projection_dim=args.projection, history=args.history, seed=args.seed,
                   batch_size=args.batch_size)
    net, losses = train(examples, cfg, classes=classes)
    save_model(net, args.output)
    print(f"final loss {losses[-1]:.5f}, training accuracy {100 * accuracy(net, examples):.2f}%")


def cmd_tune(args):
    corpus = load_corpus(args.systems, args.ref)
    nets = _networks(args, corpus)
    net = load_model(args.model) if args.model else None
    if args.init:
        init = Weights.load(args.init)
        if net is not None:
            init = init.with_localvote(0.0)
    else:
        init = Weights.initial(corpus.num_systems, localvote=net is not None)
    cfg = MERTConfig(restarts=args.restarts, outer_iterations=args.outer, n=args.n, seed=args.seed)
    w, hist = tune_loop(nets, corpus.references, train_lm(corpus), init, cfg, localvote=net)
    w.save(args.output)
    for h in hist:
        print(f"iteration {h.iteration}: tune (TER-BLEU)/2 {100 * h.decoded_criterion:.2f}")


def cmd_eval(args):
    refs = read_sentences(args.ref)
    rows = []
    for path in args.hyp:
        hyps = read_sentences(path)
        b, t = corpus_bleu(hyps, refs), corpus_ter(hyps, refs)
        rows.append((path, hyps, b, t))
    base = rows[0][1] if args.bootstrap and len(rows) > 1 else None
    for i, (path, hyps, b, t) in enumerate(rows):
        mark = ""
        if base is not None and i > 0:
            mark = significance_marker(bootstrap_significance(hyps, base, refs, args.samples, args.seed))
        print(f"{path}\tBLEU {100 * b:.2f}{mark}\tTER {100 * t:.2f}\t(TER-BLEU)/2 {100 * (t - b) / 2:.2f}")


def cmd_analyze(args):
    corpus = load_corpus(args.systems)
    sys_sents = [s.sentences for s in corpus.systems]
    cols = {}
    for path in args.combined:
        cols[os.path.basename(path)] = word_occurrence_distribution(sys_sents, read_sentences(path))
    sys.stdout.write(format_distribution(cols))


def cmd_sweep(args):
    cfg = PipelineConfig.load(args.config)
    values = [_k(v) if args.axis == "k" else int(v) for v in args.values.split(",")]
    text = sweep(cfg, args.axis, values, oracle_only=args.oracle_only)
    if args.output:
        with open(args.output, "w", encoding="utf-8", newline="") as f:
            f.write(text)
    else:
        sys.stdout.write(text)


def cmd_pipeline(args):
    cfg = PipelineConfig.load(args.config)
    run_pipeline(cfg, args.run_dir)
    with open(os.path.join(args.run_dir, "report.txt"), encoding="utf-8") as f:
        sys.stdout.write(f.read())


def cmd_synth(args):
    sizes = [int(x) for x in args.splits.split(",")]
    refs = generate_references(sum(sizes), vocab_size=args.vocab, seed=args.seed)
    spec = NoiseSpec.uniform(args.num_systems, args.sub, args.dele, args.ins,
                             planted_minority=args.planted, seed=args.seed)
    corpus, labels = generate_systems(refs, spec)
    names = ["tune_nn", "tune_mert", "test"] if len(sizes) == 3 else [f"part{i}" for i in range(len(sizes))]
    os.makedirs(args.out_dir, exist_ok=True)
    start = 0
    config = {"splits": {}}
    for name, size in zip(names, sizes):
        d = os.path.join(args.out_dir, name)
        os.makedirs(d, exist_ok=True)
        for s in corpus.systems:
            write_sentences(s.sentences[start:start + size], os.path.join(d, f"{s.name}.txt"))
        write_sentences(refs[start:start + size], os.path.join(d, "ref.txt"))
        part = [lab for lab in labels if start <= lab.sentence_index < start + size]
        write_labels([type(lab)(lab.sentence_index - start, lab.position, lab.correct_system)
                      for lab in part], os.path.join(d, "labels.jsonl"))
        config["splits"][name] = {"systems": [f"{name}/{s.name}.txt" for s in corpus.systems],
                                  "reference": f"{name}/ref.txt"}
        start += size
    if len(sizes) == 3:
        config["seed"] = args.seed
        # small batches: the default leaves the net undertrained on corpora this size
        config["nn"] = {"batch_size": 8}
        with open(os.path.join(args.out_dir, "config.json"), "w", encoding="utf-8") as f:
            json.dump(config, f, indent=2)
            f.write("\n")


# --- parser ------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cnvote", description="Confusion-network system combination")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("combine", help="build networks and decode")
    s.add_argument("--systems", nargs="+", required=True)
    s.add_argument("--networks", help="read networks from a JSONL dump instead of aligning")
    s.add_argument("--weights")
    s.add_argument("--model", help="localVote model (.npz)")
    s.add_argument("--dump-cn", help="write the networks as JSONL")
    s.add_argument("--nbest")
    s.add_argument("--n", type=int, default=200)
    s.add_argument("-o", "--output", required=True)
    s.set_defaults(func=cmd_combine)

    s = sub.add_parser("oracle", help="extract sBLEU oracle paths")
    s.add_argument("--systems", nargs="+", required=True)
    s.add_argument("--ref", required=True)
    s.add_argument("--networks")
    s.add_argument("--k", type=_k, default=1200)
    s.add_argument("--no-simplify", action="store_true")
    s.add_argument("--decisions")
    s.add_argument("-o", "--output", required=True)
    s.set_defaults(func=cmd_oracle)

    s = sub.add_parser("extract", help="turn oracle decisions into NN training examples")
    s.add_argument("--networks", required=True)
    s.add_argument("--decisions", required=True)
    s.add_argument("--history", type=int, choices=(1, 2), default=1)
    s.add_argument("-o", "--output", required=True)
    s.set_defaults(func=cmd_extract)

    s = sub.add_parser("classes", help="exchange word clustering")
    s.add_argument("--input", nargs="+", required=True)
    s.add_argument("--num-classes", type=int, default=1000)
    s.add_argument("--iterations", type=int, default=10)
    s.add_argument("--seed", type=int, default=1)
    s.add_argument("-o", "--output", required=True)
    s.set_defaults(func=cmd_classes)

    d = NNConfig()
    s = sub.add_parser("nn-train", help="train the localVote network")
    s.add_argument("--examples", required=True)
    s.add_argument("--classes")
    s.add_argument("--hidden", type=int, default=d.hidden_size)
    s.add_argument("--lr", type=float, default=d.learning_rate)
    s.add_argument("--epochs", type=int, default=d.epochs)
    s.add_argument("--projection", type=int, default=d.projection_dim)
    s.add_argument("--history", type=int, choices=(1, 2), default=d.history)
    s.add_argument("--batch-size", type=int, default=d.batch_size)
    s.add_argument("--seed", type=int, default=d.seed)
    s.add_argument("-o", "--output", required=True)
    s.set_defaults(func=cmd_nn_train)

    m = MERTConfig()
    s = sub.add_parser("tune", help="MERT on (TER-BLEU)/2")
    s.add_argument("--systems", nargs="+", required=True)
    s.add_argument("--ref", required=True)
    s.add_argument("--networks")
    s.add_argument("--model")
    s.add_argument("--init", help="starting weights (localVote added at 0 if missing)")
    s.add_argument("--restarts", type=int, default=m.restarts)
    s.add_argument("--outer", type=int, default=m.outer_iterations)
    s.add_argument("--n", type=int, default=m.n)
    s.add_argument("--seed", type=int, default=m.seed)
    s.add_argument("-o", "--output", required=True)
    s.set_defaults(func=cmd_tune)

    s = sub.add_parser("eval", help="BLEU / TER / (TER-BLEU)/2 in percent")
    s.add_argument("--ref", required=True)
    s.add_argument("--hyp", nargs="+", required=True)
    s.add_argument("--bootstrap", action="store_true",
                   help="mark later files that beat the first one on BLEU")
    s.add_argument("--samples", type=int, default=1000)
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("analyze", help="word occurrence distribution")
    s.add_argument("--systems", nargs="+", required=True)
    s.add_argument("--combined", nargs="+", required=True)
    s.set_defaults(func=cmd_analyze)

    s = sub.add_parser("sweep", help="sweep oracle k or word-class size")
    s.add_argument("--config", required=True)
    s.add_argument("--axis", choices=SWEEP_AXES, required=True)
    s.add_argument("--values", required=True, help="comma separated")
    s.add_argument("--oracle-only", action="store_true")
    s.add_argument("-o", "--output")
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser("pipeline", help="full run over tune_nn / tune_mert / test")
    s.add_argument("--config", required=True)
    s.add_argument("--run-dir", required=True)
    s.set_defaults(func=cmd_pipeline)

    s = sub.add_parser("synth", help="generate a synthetic noisy-systems corpus")
    s.add_argument("--out-dir", required=True)
    s.add_argument("--num-systems", type=int, default=4)
    s.add_argument("--splits", default="500,300,200", help="sentence counts per split")
    s.add_argument("--vocab", type=int, default=200)
    s.add_argument("--sub", type=float, default=0.15)
    s.add_argument("--del", dest="dele", type=float, default=0.05)
    s.add_argument("--ins", type=float, default=0.0)
    s.add_argument("--planted", type=float, default=0.05)
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_synth)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except (CnvoteError, ValueError, OSError) as e:
        print(f"cnvote {args.command}: error: {e}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
