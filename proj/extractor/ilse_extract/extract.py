"""Frozen-LM layer extraction into LREP.

For each example every hidden state the model exposes (embedding output plus
each block output) is mean-pooled over non-padding tokens, giving an L x d
stack with L = blocks + 1.
"""

from __future__ import annotations

import csv
import json
import logging
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np
import torch

from .lrep import CLASSIFICATION, PAIR, SPLITS, LrepDataset, write_lrep
from .pooling import masked_mean_layers

log = logging.getLogger("ilse_extract")


@dataclass
class ExtractionJob:
    model: str
    dataset: str
    out: str
    task: str = "classification"  # or "pair"
    splits: Sequence[str] = ("train",)
    batch_size: int = 16
    max_length: int = 512
    score_scale: float = 1.0  # pair golds are divided by this (5 for STS-B style 0..5 scores)
    classes: Optional[int] = None
    limit: Optional[int] = None  # examples per split
    device: str = "cpu"


@dataclass
class _Rows:
    texts: List[str] = field(default_factory=list)
    pair_texts: List[str] = field(default_factory=list)
    targets: List[object] = field(default_factory=list)
    splits: List[int] = field(default_factory=list)


def _first(row: dict, names: Iterable[str]):
    for n in names:
        if n in row and row[n] is not None:
            return row[n]
    raise KeyError(f"row has none of the fields {list(names)}")


def _collect(rows: Iterable[dict], task: str, split: Optional[str], out: _Rows, limit: Optional[int]) -> None:
    taken = 0
    for row in rows:
        tag = row.get("split", split)
        if tag is None or tag not in SPLITS:
            raise ValueError(f"unknown or missing split tag {tag!r}")
        if split is not None and "split" in row and row["split"] != split:
            continue
        if limit is not None and taken >= limit:
            break
        if task == "classification":
            out.texts.append(str(_first(row, ("text", "sentence"))))
            out.targets.append(_first(row, ("label", "labels")))
        else:
            out.texts.append(str(_first(row, ("text_a", "sentence1"))))
            out.pair_texts.append(str(_first(row, ("text_b", "sentence2"))))
            out.targets.append(float(_first(row, ("score", "similarity_score", "label"))))
        out.splits.append(SPLITS[tag])
        taken += 1


def _local_rows(path: Path) -> List[dict]:
    if path.suffix == ".jsonl":
        return [json.loads(line) for line in path.read_text().splitlines() if line.strip()]
    if path.suffix == ".json":
        return json.loads(path.read_text())
    if path.suffix in (".csv", ".tsv"):
        with open(path, newline="") as f:
            return list(csv.DictReader(f, delimiter="\t" if path.suffix == ".tsv" else ","))
    raise ValueError(f"unsupported dataset file type: {path.suffix}")


def load_rows(job: ExtractionJob) -> _Rows:
    rows = _Rows()
    path = Path(job.dataset)
    if path.exists():
        data = _local_rows(path)
        if data and "split" in data[0]:
            for s in job.splits:
                _collect(data, job.task, s, rows, job.limit)
        else:
            if len(job.splits) != 1:
                raise ValueError("a local file without a 'split' column takes exactly one --splits value")
            _collect(data, job.task, job.splits[0], rows, job.limit)
        return rows
    try:
        import datasets  # optional dependency
    except ImportError as e:  # pragma: no cover - depends on environment
        raise RuntimeError(f"{job.dataset} is not a local file and the 'datasets' package is unavailable") from e
    for s in job.splits:
        _collect(({**r, "split": s} for r in datasets.load_dataset(job.dataset, split=s)), job.task, s, rows, job.limit)
    return rows


def _label_indices(targets: Sequence[object], classes: Optional[int]) -> Tuple[np.ndarray, int]:
    if all(isinstance(t, (int, np.integer)) or (isinstance(t, str) and t.lstrip("-").isdigit()) for t in targets):
        labels = np.array([int(t) for t in targets], dtype=np.int64)
    else:
        names = sorted({str(t) for t in targets})
        index = {n: i for i, n in enumerate(names)}
        labels = np.array([index[str(t)] for t in targets], dtype=np.int64)
    if labels.size and labels.min() < 0:
        raise ValueError("negative class label")
    k = classes if classes is not None else max(2, int(labels.max()) + 1 if labels.size else 2)
    return labels.astype(np.uint32), k


@torch.no_grad()
def encode_texts(model, tokenizer, texts: Sequence[str], batch_size: int = 16, max_length: int = 512,
                 device: str = "cpu") -> np.ndarray:
    """Returns (N, L, d) float32 mean-pooled stacks, L = blocks + 1."""
    if tokenizer.pad_token is None:
        tokenizer.pad_token = tokenizer.eos_token if tokenizer.eos_token is not None else tokenizer.unk_token
    tokenizer.padding_side = "right"
    model.eval()
    out = []
    for start in range(0, len(texts), batch_size):
        batch = list(texts[start:start + batch_size])
        lengths = [len(ids) for ids in tokenizer(batch, add_special_tokens=True)["input_ids"]]
        if max(lengths) > max_length:
            warnings.warn(f"truncating {sum(l > max_length for l in lengths)} sequence(s) to {max_length} tokens")
        enc = tokenizer(batch, padding=True, truncation=True, max_length=max_length, return_tensors="pt")
        enc = {k: v.to(device) for k, v in enc.items() if k in ("input_ids", "attention_mask")}
        result = model(**enc, output_hidden_states=True)
        pooled = masked_mean_layers(result.hidden_states, enc["attention_mask"])
        out.append(pooled.float().cpu().numpy())
    return np.concatenate(out, axis=0)


def extract(job: ExtractionJob, model=None, tokenizer=None) -> LrepDataset:
    """Runs the job and writes job.out. model/tokenizer may be passed in to skip loading."""
    if job.task not in ("classification", "pair"):
        raise ValueError(f"unknown task {job.task!r}")
    if model is None or tokenizer is None:
        from transformers import AutoModel, AutoTokenizer

        tokenizer = AutoTokenizer.from_pretrained(job.model)
        model = AutoModel.from_pretrained(job.model).to(job.device)
    rows = load_rows(job)
    if not rows.texts:
        raise ValueError("no examples selected")
    stacks = encode_texts(model, tokenizer, rows.texts, job.batch_size, job.max_length, job.device)
    splits = np.array(rows.splits, dtype=np.uint8)
    if job.task == "classification":
        labels, k = _label_indices(rows.targets, job.classes)
        ds = LrepDataset(CLASSIFICATION, stacks, splits, labels=labels, classes=k)
    else:
        pairs = encode_texts(model, tokenizer, rows.pair_texts, job.batch_size, job.max_length, job.device)
        golds = np.array(rows.targets, dtype=np.float64) / job.score_scale
        ds = LrepDataset(PAIR, stacks, splits, pairs=pairs, golds=golds.astype(np.float32))
    write_lrep(job.out, ds)
    log.info("wrote %s: N=%d L=%d d=%d", job.out, stacks.shape[0], ds.layers, ds.width)
    return ds
