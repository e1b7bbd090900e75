"""Export mean-pooled encoder embeddings to the ALEMB1 binary format.

Reads a corpus JSONL (rows with ``id`` and ``text``), runs a pretrained
encoder (roberta-base by default, or any local model directory), mean-pools
the final hidden states weighted by the attention mask so padding never
contributes, and writes one record per instance ordered by id.

The output format is the consumer's contract: bytes ``ALEMB1``, u32 LE dim,
u64 LE count, then count records of (u64 LE id, dim x f32 LE values).
"""

from __future__ import annotations

import argparse
import json
import struct
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
from transformers import AutoModel, AutoTokenizer

MAGIC = b"ALEMB1"


@dataclass(frozen=True)
class ExportJob:
    corpus_path: str
    output_path: str
    model_name: str = "roberta-base"
    max_length: int = 512
    batch_size: int = 16
    text_field: str = "text"


def read_corpus(path: str | Path, text_field: str) -> list[tuple[int, str]]:
    """Read (id, text) pairs; ids must be unique and exactly 0..n-1."""
    rows: list[tuple[int, str]] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            obj = json.loads(line)
            if "id" not in obj or text_field not in obj:
                raise ValueError(f"row {lineno}: need 'id' and {text_field!r} fields")
            rows.append((int(obj["id"]), str(obj[text_field])))
    if not rows:
        raise ValueError(f"no rows in {path}")
    ids = sorted(r[0] for r in rows)
    if ids != list(range(len(rows))):
        raise ValueError("corpus ids must be exactly 0..n-1")
    rows.sort(key=lambda r: r[0])
    return rows


def write_alemb1(path: str | Path, vectors: np.ndarray) -> None:
    vectors = np.ascontiguousarray(vectors, dtype="<f4")
    n, dim = vectors.shape
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<IQ", dim, n))
        for i in range(n):
            fh.write(struct.pack("<Q", i))
            fh.write(vectors[i].tobytes())


def _mean_pool(hidden: torch.Tensor, attention_mask: torch.Tensor) -> torch.Tensor:
    mask = attention_mask.unsqueeze(-1).to(hidden.dtype)
    return (hidden * mask).sum(dim=1) / mask.sum(dim=1).clamp(min=1.0)


def export(job: ExportJob) -> Path:
    """Run the export; returns the output path.

    Duplicate texts are embedded once and share the cached vector, which
    also guarantees they map to bit-identical records regardless of how
    batches are padded.
    """
    rows = read_corpus(job.corpus_path, job.text_field)
    tokenizer = AutoTokenizer.from_pretrained(job.model_name)
    model = AutoModel.from_pretrained(job.model_name)
    model.eval()

    unique_texts = list(dict.fromkeys(text for _, text in rows))
    vectors_by_text: dict[str, np.ndarray] = {}
    with torch.no_grad():
        for start in range(0, len(unique_texts), job.batch_size):
            batch = unique_texts[start : start + job.batch_size]
            encoded = tokenizer(
                batch,
                padding=True,
                truncation=True,
                max_length=job.max_length,
                return_tensors="pt",
            )
            hidden = model(**encoded).last_hidden_state
            pooled = _mean_pool(hidden, encoded["attention_mask"])
            for text, vec in zip(batch, pooled):
                vectors_by_text[text] = vec.cpu().numpy().astype(np.float32)

    dim = model.config.hidden_size
    out = np.empty((len(rows), dim), dtype=np.float32)
    for row_id, text in rows:
        out[row_id] = vectors_by_text[text]
    if not np.isfinite(out).all():
        raise ValueError("encoder produced non-finite values")
    output = Path(job.output_path)
    write_alemb1(output, out)
    return output


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="embed-exporter", description=__doc__.splitlines()[0]
    )
    parser.add_argument("--corpus", required=True, help="corpus JSONL path")
    parser.add_argument("--out", required=True, help="output ALEMB1 path")
    parser.add_argument("--model", default="roberta-base",
                        help="model name or local model directory")
    parser.add_argument("--max-length", type=int, default=512)
    parser.add_argument("--batch-size", type=int, default=16)
    parser.add_argument("--text-field", default="text")
    args = parser.parse_args(argv)
    job = ExportJob(
        corpus_path=args.corpus,
        output_path=args.out,
        model_name=args.model,
        max_length=args.max_length,
        batch_size=args.batch_size,
        text_field=args.text_field,
    )
    try:
        path = export(job)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
