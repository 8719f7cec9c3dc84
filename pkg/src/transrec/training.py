"""Pairwise sequential ranking (S-BPR) by sampled stochastic gradient ascent."""

from __future__ import annotations

import itertools
import logging
import time
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .dataset import SequenceDataset
from .errors import DataError, NumericalError
from .evaluation import auc
from .models import PopRec, RankingModel, Regularization, log_sigmoid, make_model
from .models.base import logistic_weight
from .seeding import substream

_log = logging.getLogger(__name__)

LAMBDA_GRID = (0.0, 0.001, 0.01, 0.1, 1.0)
ALPHA_GRID = (0.2, 0.5, 0.8)


@dataclass
class TrainConfig:
    """Optimizer settings.

    ``samples_per_iteration`` of ``None`` means one nominal epoch: as many
    sampled triples as there are training transitions.
    """

    learning_rate: float = 0.05
    reg: Regularization = field(default_factory=lambda: Regularization.shared(0.01))
    dim: int = 10
    max_iterations: int = 100
    samples_per_iteration: int | None = None
    patience: int = 5
    seed: int = 0

    def __post_init__(self):
        if isinstance(self.reg, (int, float)):
            self.reg = Regularization.shared(float(self.reg))
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")
        if self.patience < 1:
            raise ValueError("patience must be >= 1")
        if self.max_iterations < 0:
            raise ValueError("max_iterations must be >= 0")
        if self.dim < 1:
            raise ValueError("dim must be >= 1")

    def as_dict(self) -> dict[str, object]:
        return {
            "learning_rate": self.learning_rate,
            "reg_embed": self.reg.embed,
            "reg_bias": self.reg.bias,
            "reg_translation": self.reg.translation,
            "dim": self.dim,
            "max_iterations": self.max_iterations,
            "samples_per_iteration": self.samples_per_iteration,
            "patience": self.patience,
            "seed": self.seed,
        }


class TripleSampler:
    """Draws ``(u, i, j, j')`` rows: a user, a training transition ``i -> j`` and a negative.

    Users are uniform over those with at least one training transition, ``j``
    is uniform over positions 2.. of the user's training prefix, ``i`` is its
    predecessor, and ``j'`` is uniform over items the user never touched.
    """

    def __init__(self, ds: SequenceDataset):
        self.n_items = ds.n_items
        trains = [ds.train_sequence(u) for u in range(ds.n_users)]
        lengths = np.array([len(s) for s in trains], dtype=np.int64)
        self.users = np.flatnonzero(lengths >= 2)
        if len(self.users) == 0:
            raise DataError("no user has a training transition")
        self.lengths = lengths
        self.offsets = np.concatenate([[0], np.cumsum(lengths)[:-1]])
        self.flat = np.concatenate(trains) if trains else np.zeros(0, dtype=np.int64)
        full = [u for u in self.users if len(ds.user_items[u]) >= ds.n_items]
        if full:
            raise DataError(f"user {ds.user_ids[full[0]]} interacted with every item; no negative exists")
        self.seen_keys = np.sort(
            np.concatenate([u * self.n_items + ds.user_items[u] for u in range(ds.n_users)])
        )

    def is_seen(self, users: np.ndarray, items: np.ndarray) -> np.ndarray:
        keys = users * self.n_items + items
        pos = np.searchsorted(self.seen_keys, keys)
        pos = np.minimum(pos, len(self.seen_keys) - 1)
        return self.seen_keys[pos] == keys

    def draw(self, rng: np.random.Generator, n: int) -> np.ndarray:
        users = self.users[rng.integers(len(self.users), size=n)]
        pos = rng.integers(1, self.lengths[users])
        at = self.offsets[users] + pos
        out = np.empty((n, 4), dtype=np.int64)
        out[:, 0] = users
        out[:, 1] = self.flat[at - 1]
        out[:, 2] = self.flat[at]
        neg = rng.integers(self.n_items, size=n)
        bad = np.flatnonzero(self.is_seen(users, neg))
        while len(bad):
            neg[bad] = rng.integers(self.n_items, size=len(bad))
            bad = bad[self.is_seen(users[bad], neg[bad])]
        out[:, 3] = neg
        return out


def sample_triple(ds: SequenceDataset, rng: np.random.Generator) -> tuple[int, int, int, int]:
    u, i, j, jn = TripleSampler(ds).draw(rng, 1)[0]
    return int(u), int(i), int(j), int(jn)


def pairwise_loglik(model: RankingModel, triple) -> float:
    """``ln sigma(p(u,i,j) - p(u,i,j'))``."""
    u, i, j, jn = (int(x) for x in triple)
    return float(log_sigmoid(model.score(u, i, j) - model.score(u, i, jn)))


def sgd_step(model: RankingModel, triple, lr: float, reg: Regularization | float, project: bool = True) -> float:
    """One ascent step on a single triple, in place. Returns the pre-update score gap."""
    if not isinstance(reg, Regularization):
        reg = Regularization.shared(float(reg))
    return float(model.sgd_batch(np.asarray(triple, dtype=np.int64).reshape(1, -1), lr, reg, project)[0])


def delta_gradient(model: RankingModel, triple) -> dict[str, np.ndarray]:
    """Gradient of ``p(u,i,j) - p(u,i,j')`` as applied by the model's update kernel.

    Runs one unprojected, unregularized step with unit learning rate on a copy
    and divides the parameter change by the logistic weight.
    """
    probe = model.copy()
    before = {k: v.copy() for k, v in model.blocks().items()}
    delta = sgd_step(probe, triple, 1.0, Regularization(), project=False)
    w = logistic_weight(delta)
    return {k: (v - before[k]) / w for k, v in probe.blocks().items()}


def sbpr_objective(model: RankingModel, ds: SequenceDataset, reg: Regularization | float = 0.0) -> float:
    """Exact pairwise objective: every training transition against every negative, minus the L2 penalty."""
    if not isinstance(reg, Regularization):
        reg = Regularization.shared(float(reg))
    total = 0.0
    for u in range(ds.n_users):
        seq = ds.train_sequence(u)
        if len(seq) < 2:
            continue
        neg = np.ones(ds.n_items, dtype=bool)
        neg[ds.user_items[u]] = False
        for p in range(1, len(seq)):
            s = model.score_items(u, int(seq[p - 1]))
            total += float(log_sigmoid(s[seq[p]] - s[neg]).sum())
    return total - model.regularizer(reg)


@dataclass
class IterationRecord:
    iteration: int
    mean_loglik: float
    val_auc: float
    seconds: float


@dataclass
class TrainReport:
    records: list[IterationRecord] = field(default_factory=list)
    best_iteration: int = 0
    best_val_auc: float = float("nan")
    stopped_early: bool = False

    def lines(self) -> list[str]:
        out = ["iteration\tmean_loglik\tval_auc\tseconds"]
        out += [f"{r.iteration}\t{r.mean_loglik:.6f}\t{r.val_auc:.6f}\t{r.seconds:.3f}" for r in self.records]
        return out


def fit(
    model,
    draw: Callable[[np.random.Generator, int], np.ndarray],
    validate: Callable[[object], float],
    config: TrainConfig,
    samples_per_iteration: int,
    rng: np.random.Generator,
) -> tuple[object, TrainReport]:
    """Generic loop: sampled ascent steps, then a validation score; keep the best snapshot.

    Stops after ``config.max_iterations`` or when ``config.patience`` checks in
    a row fail to beat the best validation score.
    """
    report = TrainReport()
    best = model.copy()
    best_score = -np.inf
    stale = 0
    for it in range(1, config.max_iterations + 1):
        t0 = time.perf_counter()
        triples = draw(rng, samples_per_iteration)
        deltas = model.sgd_batch(triples, config.learning_rate, config.reg)
        if not model.all_finite():
            bad = [k for k, v in model.blocks().items() if not np.isfinite(v).all()]
            raise NumericalError(
                f"non-finite parameters in {', '.join(bad)} after iteration {it} "
                f"(learning_rate={config.learning_rate}, reg={config.reg}); try a smaller learning rate"
            )
        score = validate(model)
        report.records.append(
            IterationRecord(it, float(np.mean(log_sigmoid(deltas))), score, time.perf_counter() - t0)
        )
        _log.debug("iteration %d: val auc %.4f", it, score)
        if score > best_score:
            best_score = score
            best = model.copy()
            report.best_iteration = it
            stale = 0
        else:
            stale += 1
            if stale >= config.patience:
                report.stopped_early = True
                break
    report.best_val_auc = float(best_score) if report.records else float("nan")
    return best, report


def train(ds: SequenceDataset, kind: str | RankingModel, config: TrainConfig | None = None, **hyper):
    """Fit a model of ``kind`` (or continue an existing model) on the training prefixes.

    Returns the best-validation snapshot and the per-iteration report.
    """
    config = config or TrainConfig()
    if isinstance(kind, RankingModel):
        model = kind
    else:
        model = make_model(kind, ds.n_users, ds.n_items, config.dim, seed=substream(config.seed, "init"), **hyper)
    if isinstance(model, PopRec):
        model.counts[:] = ds.train_counts()
        report = TrainReport(best_val_auc=auc(model, ds, "validation"))
        return model, report
    if config.max_iterations == 0:
        return model, TrainReport()
    sampler = TripleSampler(ds)
    n = config.samples_per_iteration or ds.n_train_transitions()
    return fit(
        model, sampler.draw, lambda m: auc(m, ds, "validation"), config, n, substream(config.seed, "sampling")
    )


@dataclass
class GridResult:
    model: RankingModel
    config: TrainConfig
    hyper: dict
    report: TrainReport
    table: list[dict]


def grid_search(
    ds: SequenceDataset,
    kind: str,
    config: TrainConfig | None = None,
    lambdas=LAMBDA_GRID,
    alphas=ALPHA_GRID,
    **hyper,
) -> GridResult:
    """Train once per grid point and keep the best validation AUC (first wins on ties).

    ``lambdas`` sets one shared regularization weight per run; ``alphas`` is
    only swept for PRME.
    """
    config = config or TrainConfig()
    alpha_values = list(alphas) if kind == "prme" else [None]
    lambda_values = [None] if kind == "poprec" else list(lambdas)
    best = None
    table = []
    for lam, alpha in itertools.product(lambda_values, alpha_values):
        cfg = config if lam is None else replace(config, reg=Regularization.shared(lam))
        hp = dict(hyper)
        if alpha is not None:
            hp["alpha"] = alpha
        model, report = train(ds, kind, cfg, **hp)
        row = {"lambda": lam, "alpha": alpha, "val_auc": report.best_val_auc, "best_iteration": report.best_iteration}
        table.append(row)
        _log.info("grid %s: %s", kind, row)
        if best is None or report.best_val_auc > best.report.best_val_auc:
            best = GridResult(model, cfg, hp, report, table)
    return best
