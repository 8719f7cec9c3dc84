"""Sequential ranking models and their factory."""

from __future__ import annotations

from .base import RankingModel, Regularization, log_sigmoid
from .baselines import BPRMF, FMC, FPMC, HRM, PRME, Factorized, PopRec, init_baseline
from .transrec import DistanceKind, TransRec, distance, init_params, project_to_ball

KINDS = ("poprec", "bprmf", "fmc", "fpmc", "prme", "hrm-avg", "hrm-max", "transrec-l1", "transrec-l2")


def empty_model(kind: str, n_users: int, n_items: int, dim: int, **hyper) -> RankingModel:
    """A zero-parameter model of the named kind."""
    if kind == "poprec":
        return PopRec(n_users, n_items)
    if kind == "bprmf":
        return BPRMF(n_users, n_items, dim, use_bias=hyper.get("use_bias", True))
    if kind == "fmc":
        return FMC(n_users, n_items, dim, use_bias=hyper.get("use_bias", False))
    if kind == "fpmc":
        return FPMC(n_users, n_items, dim)
    if kind == "prme":
        return PRME(n_users, n_items, dim, alpha=hyper.get("alpha", 0.2))
    if kind in ("hrm-avg", "hrm-max"):
        return HRM(n_users, n_items, dim, pooling=kind[4:])
    if kind in ("transrec-l1", "transrec-l2"):
        return TransRec(n_users, n_items, dim, DistanceKind(kind[-2:]))
    raise ValueError(f"unknown model kind {kind!r}; expected one of {', '.join(KINDS)}")


def make_model(kind: str, n_users: int, n_items: int, dim: int = 10, seed=None, **hyper) -> RankingModel:
    """A freshly initialized model of the named kind."""
    if kind in ("transrec-l1", "transrec-l2"):
        return init_params(n_users, n_items, dim, seed, DistanceKind(kind[-2:]))
    return init_baseline(empty_model(kind, n_users, n_items, dim, **hyper), seed)


__all__ = [
    "BPRMF", "FMC", "FPMC", "HRM", "KINDS", "PRME", "DistanceKind", "Factorized", "PopRec",
    "RankingModel", "Regularization", "TransRec", "distance", "empty_model", "init_baseline",
    "init_params", "log_sigmoid", "make_model", "project_to_ball",
]
