"""Versioned little-endian binary model files.

Layout (all integers little-endian)::

    magic        8 bytes   b"TRANSREC"
    version      u32       FORMAT_VERSION
    kind         u32       index into KIND_CODES
    distance     u32       0 = none, 1 = L1, 2 = squared L2
    dim          u64       embedding size K
    n_users      u64
    n_items      u64
    meta         u32 length + UTF-8 JSON ({"hyper": ..., "config": ...})
    n_blocks     u32
    block * n    u16 name length + ASCII name, u8 ndim, u64 * ndim shape,
                 float64 data in C order
    users        u64 count, then per id: u32 length + UTF-8 bytes
    items        u64 count, then per id: u32 length + UTF-8 bytes
    crc32        u32 over every preceding byte

TransRec blocks appear in the order beta, gamma, t_global, t_user.
"""

from __future__ import annotations

import json
import os
import struct
import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ModelFileError
from .models import KINDS, RankingModel, empty_model

MAGIC = b"TRANSREC"
FORMAT_VERSION = 1
I2I_KINDS = ("i2i-transrec", "wnn", "lmt")
KIND_CODES = KINDS + I2I_KINDS
_DISTANCE_CODES = {None: 0, "l1": 1, "l2": 2}
_HEADER = struct.Struct("<8sIIIQQQ")


@dataclass
class ModelBundle:
    """A model together with the id maps and provenance it was saved with."""

    model: object
    user_ids: list[str]
    item_ids: list[str]
    config: dict = field(default_factory=dict)

    def check_items(self, item_ids: list[str]) -> None:
        if list(item_ids) != list(self.item_ids):
            raise ModelFileError(
                f"model was trained on {len(self.item_ids)} items that do not match the "
                f"dataset's {len(item_ids)} items"
            )

    def check_users(self, user_ids: list[str]) -> None:
        if list(user_ids) != list(self.user_ids):
            raise ModelFileError(
                f"model was trained on {len(self.user_ids)} users that do not match the "
                f"dataset's {len(user_ids)} users"
            )


def _pack_strings(ids) -> bytes:
    parts = [struct.pack("<Q", len(ids))]
    for s in ids:
        b = str(s).encode("utf-8")
        parts.append(struct.pack("<I", len(b)))
        parts.append(b)
    return b"".join(parts)


def save_model(path: str | os.PathLike, model, user_ids, item_ids, config: dict | None = None) -> None:
    kind = model.kind
    if kind not in KIND_CODES:
        raise ValueError(f"cannot serialize model kind {kind!r}")
    hyper = model.hyper()
    meta = json.dumps({"hyper": hyper, "config": config or {}}, sort_keys=True).encode("utf-8")
    n_users = getattr(model, "n_users", 0)
    if len(item_ids) != model.n_items or len(user_ids) != n_users:
        raise ValueError(
            f"id maps ({len(user_ids)} users, {len(item_ids)} items) do not match the model "
            f"({n_users} users, {model.n_items} items)"
        )
    parts = [
        _HEADER.pack(
            MAGIC, FORMAT_VERSION, KIND_CODES.index(kind), _DISTANCE_CODES[hyper.get("distance")],
            model.dim, n_users, model.n_items,
        ),
        struct.pack("<I", len(meta)),
        meta,
    ]
    blocks = model.blocks()
    parts.append(struct.pack("<I", len(blocks)))
    for name, arr in blocks.items():
        arr = np.ascontiguousarray(arr, dtype="<f8")
        nb = name.encode("ascii")
        parts.append(struct.pack("<H", len(nb)) + nb + struct.pack("<B", arr.ndim))
        parts.append(struct.pack(f"<{arr.ndim}Q", *arr.shape))
        parts.append(arr.tobytes())
    parts.append(_pack_strings(user_ids))
    parts.append(_pack_strings(item_ids))
    body = b"".join(parts)
    Path(path).write_bytes(body + struct.pack("<I", zlib.crc32(body)))


class _Reader:
    def __init__(self, buf: bytes):
        self.buf = buf
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.buf):
            raise ModelFileError("model file is truncated")
        out = self.buf[self.pos:self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str):
        s = struct.Struct(fmt)
        return s.unpack(self.take(s.size))

    def strings(self) -> list[str]:
        (n,) = self.unpack("<Q")
        out = []
        for _ in range(n):
            (ln,) = self.unpack("<I")
            out.append(self.take(ln).decode("utf-8"))
        return out


def load_model(path: str | os.PathLike, item_ids: list[str] | None = None) -> ModelBundle:
    """Read a model file; when ``item_ids`` is given, insist it matches the stored item map."""
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise ModelFileError(f"cannot read model file {path}: {exc}") from exc
    if len(raw) < _HEADER.size + 4:
        raise ModelFileError("model file is truncated")
    if raw[:8] != MAGIC:
        raise ModelFileError(f"{path} is not a model file (bad magic)")
    body, (crc,) = raw[:-4], struct.unpack("<I", raw[-4:])
    if zlib.crc32(body) != crc:
        raise ModelFileError(f"{path} is corrupt or truncated (checksum mismatch)")

    rd = _Reader(body)
    _, version, kind_code, _dist, dim, n_users, n_items = rd.unpack(_HEADER.format)
    if version != FORMAT_VERSION:
        raise ModelFileError(f"unsupported model file version {version}")
    if kind_code >= len(KIND_CODES):
        raise ModelFileError(f"unknown model kind code {kind_code}")
    kind = KIND_CODES[kind_code]
    (mlen,) = rd.unpack("<I")
    meta = json.loads(rd.take(mlen).decode("utf-8"))
    hyper = meta.get("hyper", {})

    if kind in I2I_KINDS:
        from .item2item.models import empty_pair_model

        model = empty_pair_model(kind, n_items, dim, **hyper)
    else:
        model = empty_model(kind, n_users, n_items, dim, **hyper)

    expected = model.blocks()
    (n_blocks,) = rd.unpack("<I")
    if n_blocks != len(expected):
        raise ModelFileError(f"{kind} expects {len(expected)} parameter blocks, file has {n_blocks}")
    for _ in range(n_blocks):
        (nlen,) = rd.unpack("<H")
        name = rd.take(nlen).decode("ascii")
        (ndim,) = rd.unpack("<B")
        shape = rd.unpack(f"<{ndim}Q")
        if name not in expected or expected[name].shape != tuple(shape):
            raise ModelFileError(f"block {name!r} with shape {tuple(shape)} does not fit a {kind} model")
        count = int(np.prod(shape, dtype=np.int64))
        data = np.frombuffer(rd.take(8 * count), dtype="<f8").reshape(shape)
        expected[name][...] = data
    users = rd.strings()
    items = rd.strings()
    if rd.pos != len(body):
        raise ModelFileError("trailing bytes after model payload")
    if len(items) != n_items or len(users) != n_users:
        raise ModelFileError("id maps disagree with the header sizes")

    bundle = ModelBundle(model, users, items, meta.get("config", {}))
    if item_ids is not None:
        bundle.check_items(item_ids)
    return bundle
