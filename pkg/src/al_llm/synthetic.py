"""Seeded synthetic datasets: Gaussian blobs plus matching token texts.

The generator produces a corpus (with gold labels and class-flavored token
texts, so the hashing embedder also separates it) together with the blob
coordinates as an embedding matrix.  Everything is deterministic under the
seed, which makes the bundled pool a stable fixture for experiments and
acceptance runs without any downloads.
"""

from __future__ import annotations

import numpy as np

from .corpus import Corpus, Instance
from .embedding import EmbeddingMatrix
from .rngs import make_rng

__all__ = ["make_blobs", "bundled_pool", "BUNDLED_POOL_SEED"]

BUNDLED_POOL_SEED = 7


def make_blobs(
    n: int,
    classes: int,
    dim: int,
    rng_seed: int,
    *,
    center_scale: float = 0.35,
    cluster_std: float = 1.0,
    tokens_per_text: int = 12,
    class_vocab: int = 24,
    shared_vocab: int = 40,
) -> tuple[Corpus, EmbeddingMatrix]:
    """Generate ``n`` points in ``classes`` isotropic Gaussian blobs.

    Blob centers are drawn from N(0, center_scale^2) per coordinate and the
    default center/spread ratio leaves the classes overlapping enough that
    boundary-focused querying matters.  Texts mix class-specific and shared
    tokens at a 2:1 ratio.  Instances are shuffled so classes interleave.
    """
    if n < classes:
        raise ValueError("need at least one point per class")
    rng = make_rng(rng_seed)
    centers = rng.normal(0.0, center_scale, size=(classes, dim))
    labels = np.repeat(np.arange(classes), np.diff(np.linspace(0, n, classes + 1).astype(int)))
    points = centers[labels] + rng.normal(0.0, cluster_std, size=(n, dim))
    order = rng.permutation(n)
    labels = labels[order]
    points = points[order]

    shared = [f"g{j}" for j in range(shared_vocab)]
    per_class = [[f"c{c}w{j}" for j in range(class_vocab)] for c in range(classes)]
    instances = []
    for i in range(n):
        c = int(labels[i])
        own = rng.choice(class_vocab, size=2 * tokens_per_text // 3)
        com = rng.choice(shared_vocab, size=tokens_per_text - len(own))
        tokens = [per_class[c][j] for j in own] + [shared[j] for j in com]
        instances.append(Instance(i, " ".join(tokens), c))
    corpus = Corpus(
        instances=tuple(instances),
        label_names=tuple(f"class{c}" for c in range(classes)),
        provenance=f"synthetic blobs(n={n}, classes={classes}, dim={dim}, seed={rng_seed})",
    )
    return corpus, EmbeddingMatrix(vectors=points.astype(np.float32))


def bundled_pool() -> tuple[Corpus, EmbeddingMatrix]:
    """The fixed 2000-point, 4-class, 32-dim pool used by fixtures and demos."""
    return make_blobs(2000, 4, 32, BUNDLED_POOL_SEED)
