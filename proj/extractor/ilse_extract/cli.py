"""Command line entry point: ilse-extract --model ID --dataset ID_OR_FILE --out FILE."""

from __future__ import annotations

import argparse
import logging
import sys

from .extract import ExtractionJob, extract


def parse_args(argv=None) -> ExtractionJob:
    p = argparse.ArgumentParser(prog="ilse-extract", description=__doc__)
    p.add_argument("--model", required=True, help="Hugging Face model id or local directory")
    p.add_argument("--dataset", required=True, help="Hugging Face dataset id or a local .jsonl/.json/.csv/.tsv file")
    p.add_argument("--out", required=True, help="output LREP path")
    p.add_argument("--task", choices=["classification", "pair"], default="classification")
    p.add_argument("--splits", default="train", help="comma-separated subset of train,validation,test")
    p.add_argument("--batch-size", type=int, default=16)
    p.add_argument("--max-length", type=int, default=512)
    p.add_argument("--score-scale", type=float, default=1.0, help="divide pair scores by this (e.g. 5 for STS-B)")
    p.add_argument("--classes", type=int, default=None, help="class count K (default: max label + 1)")
    p.add_argument("--limit", type=int, default=None, help="examples per split")
    p.add_argument("--device", default="cpu")
    a = p.parse_args(argv)
    return ExtractionJob(model=a.model, dataset=a.dataset, out=a.out, task=a.task,
                         splits=[s for s in a.splits.split(",") if s], batch_size=a.batch_size,
                         max_length=a.max_length, score_scale=a.score_scale, classes=a.classes, limit=a.limit,
                         device=a.device)


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(message)s")
    job = parse_args(argv)
    try:
        extract(job)
    except Exception as e:  # fetch failures, bad data: message + nonzero exit
        print(f"ilse-extract: error: {e}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
