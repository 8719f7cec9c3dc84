"""Interaction logs, k-core filtering, per-user sequences and the leave-one-out split."""

from __future__ import annotations

import csv
import gzip
import io
import logging
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DataError

_log = logging.getLogger(__name__)

_INT64_MIN = -(2**63)
_INT64_MAX = 2**63 - 1


@dataclass
class InteractionLog:
    """Raw ``(user, item, timestamp)`` triples in file order."""

    users: list[str]
    items: list[str]
    timestamps: np.ndarray
    skipped: int = 0
    filter_iterations: int = 0

    def __len__(self) -> int:
        return len(self.users)

    @classmethod
    def from_triples(cls, triples: Sequence[tuple[str, str, int]]) -> InteractionLog:
        users = [str(t[0]) for t in triples]
        items = [str(t[1]) for t in triples]
        ts = np.array([int(t[2]) for t in triples], dtype=np.int64)
        return cls(users, items, ts)

    def triples(self) -> list[tuple[str, str, int]]:
        return list(zip(self.users, self.items, self.timestamps.tolist()))

    def subset(self, mask: np.ndarray) -> InteractionLog:
        idx = np.flatnonzero(mask)
        return InteractionLog(
            [self.users[k] for k in idx],
            [self.items[k] for k in idx],
            self.timestamps[idx],
            skipped=self.skipped,
            filter_iterations=self.filter_iterations,
        )


def _open_text(path: Path) -> io.TextIOBase:
    with open(path, "rb") as fh:
        magic = fh.read(2)
    if magic == b"\x1f\x8b":
        return io.TextIOWrapper(gzip.open(path, "rb"), encoding="utf-8", newline="")
    return open(path, encoding="utf-8", newline="")


def load_interactions(
    path: str | os.PathLike,
    delimiter: str = "\t",
    columns: Sequence[int | str] = (0, 1, 2),
    header: bool | None = None,
    on_error: str = "fail",
) -> InteractionLog:
    """Parse a delimited interaction file.

    Parameters
    ----------
    path : path-like
        Text file, optionally gzip-compressed (detected from its magic bytes).
    delimiter : str
        Field separator, usually tab or comma.
    columns : sequence of three ints or names
        Positions (0-based) or header names of the user, item and timestamp columns.
    header : bool, optional
        Whether the first line is a header. Defaults to True exactly when
        ``columns`` contains names.
    on_error : {"fail", "skip"}
        Raise on the first malformed line, or skip and count it.

    Returns
    -------
    InteractionLog
        All parsed triples in file order; ``skipped`` holds the number of
        malformed lines dropped in skip mode.
    """
    if on_error not in ("fail", "skip"):
        raise ValueError(f"on_error must be 'fail' or 'skip', got {on_error!r}")
    if len(columns) != 3:
        raise ValueError("columns must name exactly the user, item and timestamp fields")
    by_name = any(isinstance(c, str) for c in columns)
    if header is None:
        header = by_name
    if by_name and not header:
        raise ValueError("column names require a header line")

    path = Path(path)
    try:
        fh = _open_text(path)
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc

    users: list[str] = []
    items: list[str] = []
    stamps: list[int] = []
    skipped = 0
    with fh:
        reader = csv.reader(fh, delimiter=delimiter)
        try:
            if header:
                names = next(reader, None)
                if names is None:
                    return InteractionLog([], [], np.zeros(0, dtype=np.int64))
                names = [n.strip() for n in names]
                try:
                    cols = [names.index(c) if isinstance(c, str) else int(c) for c in columns]
                except ValueError as exc:
                    raise DataError(f"{path}: header {names} lacks a requested column") from exc
            else:
                cols = [int(c) for c in columns]
            width = max(cols) + 1

            for row in reader:
                lineno = reader.line_num
                if not row or (len(row) == 1 and not row[0].strip()):
                    continue
                problem = None
                if len(row) < width:
                    problem = f"expected at least {width} fields, found {len(row)}"
                else:
                    user, item, stamp = (row[c].strip() for c in cols)
                    if not user or not item:
                        problem = "empty user or item id"
                    else:
                        try:
                            ts = int(stamp)
                        except ValueError:
                            problem = f"timestamp {stamp!r} is not an integer"
                        else:
                            if not _INT64_MIN <= ts <= _INT64_MAX:
                                problem = f"timestamp {stamp!r} overflows int64"
                if problem is not None:
                    if on_error == "fail":
                        raise DataError(f"{path}:{lineno}: {problem}")
                    skipped += 1
                    continue
                users.append(user)
                items.append(item)
                stamps.append(ts)
        except (UnicodeDecodeError, csv.Error, OSError, EOFError) as exc:
            raise DataError(f"cannot parse {path}: {exc}") from exc

    _log.info("loaded %d interactions from %s (%d skipped)", len(users), path, skipped)
    return InteractionLog(users, items, np.array(stamps, dtype=np.int64), skipped=skipped)


def _codes(tokens: list[str]) -> tuple[np.ndarray, list[str]]:
    """Dense codes by order of first appearance."""
    index: dict[str, int] = {}
    codes = np.fromiter((index.setdefault(t, len(index)) for t in tokens), dtype=np.int64, count=len(tokens))
    return codes, list(index)


def core_filter(log: InteractionLog, min_count: int = 5) -> InteractionLog:
    """Drop users and items with fewer than ``min_count`` actions, to a fixed point.

    Each pass removes every interaction whose user or item falls short, counted
    on the log as it stood at the start of the pass. Passes repeat until one
    removes nothing. ``filter_iterations`` on the result is the number of passes
    that removed something.
    """
    if min_count < 1:
        raise ValueError("min_count must be >= 1")
    if len(log) == 0:
        raise DataError("dataset annihilated by filtering: input log is empty")
    ucode, _ = _codes(log.users)
    icode, _ = _codes(log.items)
    keep = np.ones(len(log), dtype=bool)
    passes = 0
    while True:
        uc = np.bincount(ucode[keep], minlength=ucode.max() + 1)
        ic = np.bincount(icode[keep], minlength=icode.max() + 1)
        new_keep = keep & (uc[ucode] >= min_count) & (ic[icode] >= min_count)
        if np.array_equal(new_keep, keep):
            break
        keep = new_keep
        passes += 1
    if not keep.any():
        raise DataError(f"dataset annihilated by filtering (min_count={min_count})")
    out = log.subset(keep)
    out.filter_iterations = passes
    _log.info("%d-core filter: %d -> %d actions in %d passes", min_count, len(log), len(out), passes)
    return out


@dataclass
class SequenceDataset:
    """Per-user item sequences over dense user and item indices.

    ``sequences[u]`` is the full time-ordered sequence of user ``u``. Once
    ``is_split`` is set, its last element is the test item, the one before it
    the validation item, and the rest the training prefix.
    """

    user_ids: list[str]
    item_ids: list[str]
    sequences: list[np.ndarray]
    timestamps: list[np.ndarray] | None = None
    is_split: bool = False
    dropped_users: int = 0
    user_items: list[np.ndarray] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        self.sequences = [np.asarray(s, dtype=np.int64) for s in self.sequences]
        self.user_items = [np.unique(s) for s in self.sequences]

    @property
    def n_users(self) -> int:
        return len(self.user_ids)

    @property
    def n_items(self) -> int:
        return len(self.item_ids)

    @property
    def n_actions(self) -> int:
        return int(sum(len(s) for s in self.sequences))

    def train_sequence(self, u: int) -> np.ndarray:
        seq = self.sequences[u]
        return seq[:-2] if self.is_split else seq

    def validation_item(self, u: int) -> int:
        self._require_split()
        return int(self.sequences[u][-2])

    def test_item(self, u: int) -> int:
        self._require_split()
        return int(self.sequences[u][-1])

    def context(self, u: int, split: str) -> tuple[int, int]:
        """``(previous item, ground-truth item)`` for the validation or test position."""
        self._require_split()
        seq = self.sequences[u]
        if split == "validation":
            return int(seq[-3]), int(seq[-2])
        if split == "test":
            return int(seq[-2]), int(seq[-1])
        raise ValueError(f"split must be 'validation' or 'test', got {split!r}")

    def train_counts(self) -> np.ndarray:
        """Per-item action counts over the training prefixes only."""
        counts = np.zeros(self.n_items, dtype=np.int64)
        for u in range(self.n_users):
            np.add.at(counts, self.train_sequence(u), 1)
        return counts

    def n_train_transitions(self) -> int:
        return int(sum(max(len(self.train_sequence(u)) - 1, 0) for u in range(self.n_users)))

    def _require_split(self) -> None:
        if not self.is_split:
            raise ValueError("dataset has no leave-one-out split")


def build_sequences(log: InteractionLog) -> SequenceDataset:
    """Group a log into per-user sequences sorted by timestamp.

    Users and items receive dense indices in order of first appearance.
    Equal timestamps keep their input order.
    """
    if len(log) == 0:
        raise DataError("cannot build sequences from an empty log")
    ucode, user_ids = _codes(log.users)
    icode, item_ids = _codes(log.items)
    # lexsort is stable: ties in (user, timestamp) keep file order
    order = np.lexsort((log.timestamps, ucode))
    bounds = np.flatnonzero(np.diff(ucode[order])) + 1
    groups = np.split(order, bounds)
    sequences = [icode[g] for g in groups]
    stamps = [log.timestamps[g] for g in groups]
    return SequenceDataset(user_ids, item_ids, sequences, stamps)


def split_leave_one_out(ds: SequenceDataset) -> SequenceDataset:
    """Mark the last item of every sequence as test and the one before as validation.

    Users with fewer than three actions cannot provide a training item, so they
    are dropped (counted in ``dropped_users``) and the user index is compacted.
    """
    keep = [u for u in range(ds.n_users) if len(ds.sequences[u]) >= 3]
    dropped = ds.n_users - len(keep)
    if dropped:
        _log.warning("leave-one-out split dropped %d users with fewer than 3 actions", dropped)
    if not keep:
        raise DataError("no user has the 3 actions a leave-one-out split needs")
    return SequenceDataset(
        [ds.user_ids[u] for u in keep],
        list(ds.item_ids),
        [ds.sequences[u] for u in keep],
        [ds.timestamps[u] for u in keep] if ds.timestamps is not None else None,
        is_split=True,
        dropped_users=ds.dropped_users + dropped,
    )


def manifest(ds: SequenceDataset) -> dict[str, object]:
    """Dataset statistics in the columns of the usual dataset-summary table."""
    n_actions = ds.n_actions
    return {
        "users": ds.n_users,
        "items": ds.n_items,
        "actions": n_actions,
        "avg_actions_per_user": round(n_actions / ds.n_users, 4) if ds.n_users else 0.0,
        "avg_actions_per_item": round(n_actions / ds.n_items, 4) if ds.n_items else 0.0,
        "train_transitions": ds.n_train_transitions(),
        "dropped_users": ds.dropped_users,
    }


def format_kv(pairs: dict[str, object]) -> str:
    return "".join(f"{k}={v}\n" for k, v in pairs.items())


def parse_kv(text: str) -> dict[str, str]:
    out = {}
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise DataError(f"not a key=value line: {line!r}")
        out[key.strip()] = value.strip()
    return out


# Prepared-dataset directory: sequences.tsv holds (user_id, item_id, timestamp)
# grouped by user in dense order, each group in sequence order; items.txt lists
# item ids in dense order.
SEQUENCES_FILE = "sequences.tsv"
ITEMS_FILE = "items.txt"
MANIFEST_FILE = "manifest.txt"


def save_prepared(ds: SequenceDataset, directory: str | os.PathLike) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    with open(directory / SEQUENCES_FILE, "w", encoding="utf-8", newline="\n") as fh:
        for u, seq in enumerate(ds.sequences):
            stamps = ds.timestamps[u] if ds.timestamps is not None else np.arange(len(seq))
            for item, ts in zip(seq.tolist(), stamps.tolist()):
                fh.write(f"{ds.user_ids[u]}\t{ds.item_ids[item]}\t{ts}\n")
    with open(directory / ITEMS_FILE, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("".join(f"{i}\n" for i in ds.item_ids))


def load_prepared(directory: str | os.PathLike) -> SequenceDataset:
    """Reload a dataset written by :func:`save_prepared`, with its split applied."""
    directory = Path(directory)
    try:
        item_ids = (directory / ITEMS_FILE).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise DataError(f"cannot read prepared dataset in {directory}: {exc}") from exc
    log = load_interactions(directory / SEQUENCES_FILE)
    item_index = {iid: k for k, iid in enumerate(item_ids)}
    user_ids: list[str] = []
    seqs: list[list[int]] = []
    stamps: list[list[int]] = []
    for user, item, ts in log.triples():
        if not user_ids or user_ids[-1] != user:
            user_ids.append(user)
            seqs.append([])
            stamps.append([])
        try:
            seqs[-1].append(item_index[item])
        except KeyError as exc:
            raise DataError(f"item {item!r} missing from {ITEMS_FILE}") from exc
        stamps[-1].append(ts)
    ds = SequenceDataset(user_ids, item_ids, seqs, [np.array(s, dtype=np.int64) for s in stamps])
    return split_leave_one_out(ds)
