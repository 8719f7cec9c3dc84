"""Content-based item-to-item relation prediction."""

from .edges import EdgeDataset, EdgeSampler, eval_i2i, read_edges, split_edges, train_i2i
from .features import FeatureMatrix, extract_features, load_triplets, read_corpus, save_triplets
from .models import LMT, PAIR_KINDS, WNN, PairModel, TransRecContent, empty_pair_model, make_pair_model

__all__ = [
    "EdgeDataset", "EdgeSampler", "FeatureMatrix", "LMT", "PAIR_KINDS", "PairModel", "TransRecContent", "WNN",
    "empty_pair_model", "eval_i2i", "extract_features", "load_triplets", "make_pair_model", "read_corpus",
    "read_edges", "save_triplets", "split_edges", "train_i2i",
]
