"""Text corpus loading and preprocessing.

A :class:`Corpus` is an immutable ordered collection of text instances with
an optional gold label per instance.  Instance ids always equal positions
``0..n-1``, which is the canonical index order every downstream module
(embeddings, pool state, metrics) aligns to.  Transforms therefore reassign
ids and record the surviving original ids in the provenance note.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .rngs import SAMPLING_STREAM, make_rng

__all__ = [
    "CorpusError",
    "Instance",
    "Corpus",
    "load_corpus",
    "filter_short",
    "balanced_sample",
    "random_subsample",
    "length_histogram",
    "write_corpus_jsonl",
    "word_count",
]


class CorpusError(ValueError):
    """Malformed corpus file or invalid preprocessing request."""


@dataclass(frozen=True)
class Instance:
    """One text item; ``gold_label`` is a class index or None."""

    id: int
    text: str
    gold_label: Optional[int] = None


@dataclass(frozen=True)
class Corpus:
    """Ordered instances plus the class-name list that defines label indices."""

    instances: tuple[Instance, ...]
    label_names: tuple[str, ...]
    provenance: str = ""

    def __post_init__(self) -> None:
        if len(self.label_names) < 2:
            raise CorpusError("a corpus needs at least 2 label names")
        c = len(self.label_names)
        for pos, inst in enumerate(self.instances):
            if inst.id != pos:
                raise CorpusError(
                    f"instance id {inst.id} at position {pos}: ids must be 0..n-1"
                )
            if not inst.text.strip():
                raise CorpusError(f"instance {pos} has empty text")
            if inst.gold_label is not None and not 0 <= inst.gold_label < c:
                raise CorpusError(
                    f"instance {pos} gold label {inst.gold_label} outside [0, {c})"
                )

    def __len__(self) -> int:
        return len(self.instances)

    @property
    def class_count(self) -> int:
        return len(self.label_names)

    @property
    def texts(self) -> list[str]:
        return [inst.text for inst in self.instances]

    def gold_labels(self, indices: Sequence[int] | None = None) -> np.ndarray:
        """Gold labels as an int array; raises if any requested label is missing."""
        idx = range(len(self)) if indices is None else indices
        out = []
        for i in idx:
            g = self.instances[i].gold_label
            if g is None:
                raise CorpusError(f"instance {i} has no gold label")
            out.append(g)
        return np.asarray(out, dtype=np.int64)

    def has_gold_labels(self) -> bool:
        return all(inst.gold_label is not None for inst in self.instances)


def word_count(text: str) -> int:
    """Number of whitespace-separated tokens."""
    return len(text.split())


def _rebuild(
    corpus: Corpus, keep_positions: Sequence[int], note: str
) -> Corpus:
    """New corpus from the given original positions, ids reassigned 0..m-1."""
    instances = tuple(
        Instance(new_id, corpus.instances[pos].text, corpus.instances[pos].gold_label)
        for new_id, pos in enumerate(keep_positions)
    )
    prov = f"{note}; original_ids={_compress_ids(keep_positions)}"
    if corpus.provenance:
        prov = f"{corpus.provenance} | {prov}"
    return Corpus(instances=instances, label_names=corpus.label_names, provenance=prov)


def _compress_ids(ids: Sequence[int]) -> str:
    """Run-length compress sorted ids: [0,1,2,5,7,8] -> '0-2,5,7-8'."""
    if not ids:
        return ""
    runs: list[str] = []
    start = prev = ids[0]
    for i in list(ids[1:]) + [None]:  # type: ignore[list-item]
        if i is not None and i == prev + 1:
            prev = i
            continue
        runs.append(str(start) if start == prev else f"{start}-{prev}")
        if i is not None:
            start = prev = i
    return ",".join(runs)


def load_corpus(
    path: str | Path,
    format: str,
    text_field: str,
    label_field: str | None,
    label_names: Sequence[str],
) -> Corpus:
    """Load a CSV or JSONL file into a Corpus.

    Ids are assigned 0..n-1 in file order; label strings are mapped to
    indices by their position in ``label_names``.  Rows are addressed in
    error messages by their 1-based data-row number (CSV header excluded).
    """
    path = Path(path)
    if not path.exists():
        raise CorpusError(f"corpus file not found: {path}")
    if format not in ("csv", "jsonl"):
        raise CorpusError(f"unknown corpus format {format!r}")

    label_index = {name: i for i, name in enumerate(label_names)}
    instances: list[Instance] = []

    def add_row(rownum: int, row: dict) -> None:
        text = row.get(text_field)
        if text is None or not str(text).strip():
            raise CorpusError(f"row {rownum}: missing or empty {text_field!r}")
        gold: Optional[int] = None
        if label_field is not None:
            raw = row.get(label_field)
            if raw is None or str(raw) == "":
                raise CorpusError(f"row {rownum}: missing {label_field!r}")
            key = str(raw)
            if key not in label_index:
                raise CorpusError(f"row {rownum}: unknown label {key!r}")
            gold = label_index[key]
        instances.append(Instance(len(instances), str(text), gold))

    if format == "csv":
        with path.open(newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None or text_field not in reader.fieldnames:
                raise CorpusError(f"CSV header missing {text_field!r}")
            for rownum, row in enumerate(reader, start=1):
                add_row(rownum, row)
    else:
        with path.open(encoding="utf-8") as fh:
            for rownum, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    obj = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise CorpusError(f"row {rownum}: invalid JSON ({exc.msg})") from exc
                if not isinstance(obj, dict):
                    raise CorpusError(f"row {rownum}: expected a JSON object")
                add_row(rownum, obj)

    if not instances:
        raise CorpusError(f"no instances in {path}")
    return Corpus(
        instances=tuple(instances),
        label_names=tuple(label_names),
        provenance=f"loaded {path.name} ({format})",
    )


def filter_short(corpus: Corpus, min_words: int) -> Corpus:
    """Drop instances with ``min_words`` words or fewer (keep count > min_words)."""
    if min_words < 1:
        raise CorpusError("min_words must be >= 1")
    keep = [
        pos
        for pos, inst in enumerate(corpus.instances)
        if word_count(inst.text) > min_words
    ]
    if not keep:
        raise CorpusError(f"filter_short(min_words={min_words}) removed every instance")
    return _rebuild(corpus, keep, f"filter_short(min_words={min_words})")


def balanced_sample(corpus: Corpus, per_class: int, rng_seed: int) -> Corpus:
    """Uniform per-class sample without replacement; output in ascending original id."""
    if per_class < 1:
        raise CorpusError("per_class must be >= 1")
    by_class: dict[int, list[int]] = {c: [] for c in range(corpus.class_count)}
    for pos, inst in enumerate(corpus.instances):
        if inst.gold_label is not None:
            by_class[inst.gold_label].append(pos)
    for c in range(corpus.class_count):
        if len(by_class[c]) < per_class:
            raise CorpusError(
                f"class {corpus.label_names[c]!r} has {len(by_class[c])} labeled "
                f"instances, need {per_class}"
            )
    rng = make_rng(rng_seed, SAMPLING_STREAM)
    keep: list[int] = []
    for c in range(corpus.class_count):
        keep.extend(rng.choice(by_class[c], size=per_class, replace=False).tolist())
    keep.sort()
    return _rebuild(
        corpus, keep, f"balanced_sample(per_class={per_class}, seed={rng_seed})"
    )


def random_subsample(corpus: Corpus, n: int, rng_seed: int) -> Corpus:
    """Uniform sample without replacement; output in ascending original id."""
    if n < 1:
        raise CorpusError("n must be >= 1")
    if n > len(corpus):
        raise CorpusError(f"cannot sample {n} from a corpus of {len(corpus)}")
    rng = make_rng(rng_seed, SAMPLING_STREAM)
    keep = sorted(rng.choice(len(corpus), size=n, replace=False).tolist())
    return _rebuild(corpus, keep, f"random_subsample(n={n}, seed={rng_seed})")


def length_histogram(corpus: Corpus, bin_width: int) -> list[tuple[int, int]]:
    """Whitespace-token-length histogram as (bin_start, count); empty bins omitted."""
    if bin_width < 1:
        raise CorpusError("bin_width must be >= 1")
    counts: dict[int, int] = {}
    for inst in corpus.instances:
        start = (word_count(inst.text) // bin_width) * bin_width
        counts[start] = counts.get(start, 0) + 1
    return sorted(counts.items())


def write_corpus_jsonl(corpus: Corpus, path: str | Path) -> None:
    """Write instances as JSONL rows {id, text, label}; label omitted when absent.

    The provenance note (including the original-id trail) goes to a sidecar
    ``<path>.meta.json`` so the row schema stays exactly id/text/label.
    """
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        for inst in corpus.instances:
            row: dict = {"id": inst.id, "text": inst.text}
            if inst.gold_label is not None:
                row["label"] = corpus.label_names[inst.gold_label]
            fh.write(json.dumps(row, ensure_ascii=False) + "\n")
    meta = {
        "label_names": list(corpus.label_names),
        "provenance": corpus.provenance,
        "count": len(corpus),
    }
    Path(f"{path}.meta.json").write_text(
        json.dumps(meta, ensure_ascii=False, indent=2) + "\n", encoding="utf-8"
    )
