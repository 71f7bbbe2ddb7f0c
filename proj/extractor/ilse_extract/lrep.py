"""LREP reader/writer, bit-compatible with the C++ library.

Layout (little-endian): magic "LREP", u32 version = 1, u8 task kind
(0 classification, 1 pair), u32 L, u32 d, u32 K (0 for pairs), u64 N, then
per example: classification -> L*d f32 + u32 label + u8 split;
pair -> 2*L*d f32 + f32 gold + u8 split.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

MAGIC = b"LREP"
VERSION = 1
CLASSIFICATION = 0
PAIR = 1
SPLITS = {"train": 0, "validation": 1, "test": 2}
_HEADER = struct.Struct("<4sIBIIIQ")


@dataclass
class LrepDataset:
    kind: int
    stacks: np.ndarray  # (N, L, d) float32
    splits: np.ndarray  # (N,) uint8
    labels: Optional[np.ndarray] = None  # (N,) uint32, classification
    classes: int = 0
    pairs: Optional[np.ndarray] = None  # (N, L, d) float32, pair tasks
    golds: Optional[np.ndarray] = None  # (N,) float32 in [0, 1], pair tasks

    @property
    def layers(self) -> int:
        return int(self.stacks.shape[1])

    @property
    def width(self) -> int:
        return int(self.stacks.shape[2])

    def validate(self) -> None:
        if self.stacks.ndim != 3:
            raise ValueError("stacks must be (N, L, d)")
        n = self.stacks.shape[0]
        if not np.all(np.isfinite(self.stacks)):
            raise ValueError("non-finite stack value")
        if self.splits.shape != (n,) or np.any(self.splits > 2):
            raise ValueError("bad split tags")
        if self.kind == CLASSIFICATION:
            if self.labels is None or self.labels.shape != (n,):
                raise ValueError("classification needs one label per example")
            if self.classes < 2 or np.any(self.labels >= self.classes):
                raise ValueError("labels must lie in [0, classes) with classes >= 2")
        elif self.kind == PAIR:
            if self.pairs is None or self.pairs.shape != self.stacks.shape:
                raise ValueError("pair task needs a second stack per example")
            if not np.all(np.isfinite(self.pairs)):
                raise ValueError("non-finite stack value")
            if self.golds is None or self.golds.shape != (n,):
                raise ValueError("pair task needs one gold score per example")
            if np.any(~((self.golds >= 0) & (self.golds <= 1))):
                raise ValueError("gold scores must lie in [0, 1]")
        else:
            raise ValueError(f"unknown task kind {self.kind}")


def write_lrep(path: str | Path, ds: LrepDataset) -> None:
    ds.validate()
    n, layers, width = ds.stacks.shape
    classes = ds.classes if ds.kind == CLASSIFICATION else 0
    stacks = np.ascontiguousarray(ds.stacks, dtype="<f4")
    with open(path, "wb") as f:
        f.write(_HEADER.pack(MAGIC, VERSION, ds.kind, layers, width, classes, n))
        for i in range(n):
            f.write(stacks[i].tobytes())
            if ds.kind == CLASSIFICATION:
                f.write(struct.pack("<IB", int(ds.labels[i]), int(ds.splits[i])))
            else:
                f.write(np.ascontiguousarray(ds.pairs[i], dtype="<f4").tobytes())
                f.write(struct.pack("<fB", float(ds.golds[i]), int(ds.splits[i])))


def read_lrep(path: str | Path) -> LrepDataset:
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise ValueError(f"truncated header at offset {len(data)}")
    magic, version, kind, layers, width, classes, n = _HEADER.unpack_from(data, 0)
    if magic != MAGIC:
        raise ValueError("bad magic at offset 0")
    if version != VERSION:
        raise ValueError("unsupported version at offset 4")
    block = layers * width * 4
    record = block + 5 if kind == CLASSIFICATION else 2 * block + 5
    if len(data) != _HEADER.size + n * record:
        raise ValueError("payload size does not match header")
    stacks = np.empty((n, layers, width), dtype=np.float32)
    pairs = np.empty_like(stacks) if kind == PAIR else None
    labels = np.empty(n, dtype=np.uint32) if kind == CLASSIFICATION else None
    golds = np.empty(n, dtype=np.float32) if kind == PAIR else None
    splits = np.empty(n, dtype=np.uint8)
    at = _HEADER.size
    for i in range(n):
        stacks[i] = np.frombuffer(data, "<f4", layers * width, at).reshape(layers, width)
        at += block
        if kind == CLASSIFICATION:
            labels[i], splits[i] = struct.unpack_from("<IB", data, at)
        else:
            pairs[i] = np.frombuffer(data, "<f4", layers * width, at).reshape(layers, width)
            at += block
            golds[i], splits[i] = struct.unpack_from("<fB", data, at)
        at += 5
    return LrepDataset(kind, stacks, splits, labels, classes if kind == CLASSIFICATION else 0, pairs, golds)
