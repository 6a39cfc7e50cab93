"""Confusion-network system combination with a neural local voting feature."""

__version__ = "0.1.0"

from .align import ConfusionNetwork, build_network, build_networks
from .corpus import CombinationCorpus, SystemOutput, load_corpus
from .decode import Weights, decode_corpus, decode_nbest
from .metrics import MetricConfig, corpus_bleu, corpus_ter, sentence_bleu, ter
from .nnvote import FeedForwardNet, NNConfig, extract_examples, train
from .oracle import OracleConfig, extract_oracle, simplify_unk
from .tune import MERTConfig, mert, tune_loop
from .wordclass import ClassMap, ClusterConfig, train_classes

__all__ = [
    "CombinationCorpus", "ConfusionNetwork", "ClassMap", "ClusterConfig", "FeedForwardNet",
    "MERTConfig", "MetricConfig", "NNConfig", "OracleConfig", "SystemOutput", "Weights",
    "build_network", "build_networks", "corpus_bleu", "corpus_ter", "decode_corpus",
    "decode_nbest", "extract_examples", "extract_oracle", "load_corpus", "mert",
    "sentence_bleu", "simplify_unk", "ter", "train", "train_classes", "tune_loop",
]
