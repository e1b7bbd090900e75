"""Query strategies over the labeled/unlabeled pool.

Five selection policies: committee vote entropy, entropy sampling with a
greedy diversity term, greedy k-center core-set coverage, information
density (entropy x representativeness), and the seeded random baseline.
All tie-breaking is by lowest corpus index so selections are reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .models.base import TrainedClassifier
from .rngs import STRATEGY_STREAM, make_rng

__all__ = [
    "StrategyError",
    "PoolState",
    "QuerySelection",
    "distribution_entropy",
    "select_qbc",
    "select_entropy_diversity",
    "select_coreset",
    "select_info_density",
    "select_random",
    "select",
    "STRATEGY_NAMES",
]

STRATEGY_NAMES = ("qbc", "entropy_diversity", "coreset", "info_density", "random")


class StrategyError(ValueError):
    """Selection requested from an invalid pool state."""


@dataclass
class PoolState:
    """Disjoint labeled/unlabeled corpus-index sets plus acquired labels.

    ``unlabeled`` is kept in ascending order; ``labeled`` is in acquisition
    order with ``labels`` aligned to it.
    """

    labeled: list[int] = field(default_factory=list)
    labels: list[int] = field(default_factory=list)
    unlabeled: list[int] = field(default_factory=list)
    initial: frozenset[int] = frozenset()

    @classmethod
    def from_indices(cls, pool_indices) -> "PoolState":
        idx = sorted(int(i) for i in pool_indices)
        if len(set(idx)) != len(idx):
            raise StrategyError("duplicate index in pool")
        return cls(unlabeled=idx, initial=frozenset(idx))

    def acquire(self, index: int, label: int) -> None:
        # list.remove also guards against indices outside the unlabeled set.
        try:
            self.unlabeled.remove(index)
        except ValueError:
            raise StrategyError(f"index {index} is not unlabeled") from None
        self.labeled.append(index)
        self.labels.append(label)

    def check_conservation(self) -> None:
        lab, unlab = set(self.labeled), set(self.unlabeled)
        if lab & unlab:
            raise StrategyError(f"labeled/unlabeled overlap: {sorted(lab & unlab)[:5]}")
        if lab | unlab != self.initial:
            raise StrategyError("labeled+unlabeled no longer cover the initial pool")
        if len(self.labeled) != len(self.labels):
            raise StrategyError("labeled indices and labels are misaligned")


@dataclass(frozen=True)
class QuerySelection:
    """Selected unlabeled indices, their scores, and the full score ranking.

    ``ranking`` orders every unlabeled index (selected first); the loop uses
    it to substitute the next-ranked candidate when labeling fails.
    """

    indices: list[int]
    scores: list[float]
    ranking: list[int]


def distribution_entropy(P: np.ndarray) -> np.ndarray:
    """Row-wise Shannon entropy (natural log, 0*log0 = 0)."""
    P = np.asarray(P, dtype=np.float64)
    terms = np.where(P > 0, P * np.log(np.where(P > 0, P, 1.0)), 0.0)
    return -terms.sum(axis=1)


def _rank(indices: np.ndarray, scores: np.ndarray) -> np.ndarray:
    """Order positions by score descending, corpus index ascending on ties."""
    return np.lexsort((indices, -scores))


def _top_k_selection(
    unlabeled: np.ndarray, scores: np.ndarray, batch: int
) -> QuerySelection:
    order = _rank(unlabeled, scores)
    k = min(batch, len(unlabeled))
    return QuerySelection(
        indices=[int(unlabeled[i]) for i in order[:k]],
        scores=[float(scores[i]) for i in order[:k]],
        ranking=[int(unlabeled[i]) for i in order],
    )


def _require_unlabeled(pool: PoolState) -> np.ndarray:
    if not pool.unlabeled:
        raise StrategyError("unlabeled pool is empty")
    return np.asarray(pool.unlabeled, dtype=np.int64)


def select_qbc(
    pool: PoolState, X: np.ndarray, committee: TrainedClassifier, batch: int
) -> QuerySelection:
    """Highest vote entropy: entropy of the committee-mean class distribution."""
    unlabeled = _require_unlabeled(pool)
    P = committee.predict_proba(X[unlabeled])
    return _top_k_selection(unlabeled, distribution_entropy(P), batch)


def select_entropy_diversity(
    pool: PoolState,
    X: np.ndarray,
    model: TrainedClassifier,
    batch: int,
    candidate_factor: int = 10,
) -> QuerySelection:
    """Greedy pick over the top-entropy candidates, trading entropy for spread.

    The ``candidate_factor * batch`` highest-entropy points form the
    candidate set.  The first pick is the entropy argmax; each subsequent
    pick maximizes min-max-normalized entropy plus min-max-normalized
    minimum Euclidean distance to the picks so far.
    """
    if candidate_factor < 1:
        raise StrategyError("candidate_factor must be >= 1")
    unlabeled = _require_unlabeled(pool)
    P = model.predict_proba(X[unlabeled])
    H = distribution_entropy(P)
    entropy_order = _rank(unlabeled, H)
    if H.max() == 0.0:
        # Degenerate model (single-class labeled set): every entropy is zero,
        # so fall back to deterministic lowest-index selection.
        k = min(batch, len(unlabeled))
        return QuerySelection(
            indices=[int(i) for i in unlabeled[:k]],
            scores=[0.0] * k,
            ranking=[int(i) for i in unlabeled],
        )

    K = min(candidate_factor * batch, len(unlabeled))
    cand = entropy_order[:K]  # positions into `unlabeled`
    cand_h = H[cand]
    span = cand_h.max() - cand_h.min()
    norm_h = (cand_h - cand_h.min()) / span if span > 0 else np.zeros_like(cand_h)

    k = min(batch, len(unlabeled))
    picked: list[int] = [0]  # positions into `cand`; first pick = entropy argmax
    scores: list[float] = [float(norm_h[0])]
    remaining = list(range(1, K))
    cand_vecs = X[unlabeled[cand]].astype(np.float64)
    min_dist = np.full(K, np.inf)
    while remaining and len(picked) < k:
        last = cand_vecs[picked[-1]]
        d = np.linalg.norm(cand_vecs - last, axis=1)
        np.minimum(min_dist, d, out=min_dist)
        rd = min_dist[remaining]
        span_d = rd.max() - rd.min()
        norm_d = (rd - rd.min()) / span_d if span_d > 0 else np.zeros_like(rd)
        combined = norm_h[remaining] + norm_d
        order = np.lexsort((unlabeled[cand[remaining]], -combined))
        best = order[0]
        picked.append(remaining[best])
        scores.append(float(combined[best]))
        remaining.pop(best)

    picked_positions = cand[picked]
    picked_set = set(picked_positions.tolist())
    rest = [p for p in entropy_order if p not in picked_set]
    ranking = [int(unlabeled[p]) for p in list(picked_positions) + rest]
    return QuerySelection(
        indices=[int(unlabeled[p]) for p in picked_positions],
        scores=scores,
        ranking=ranking,
    )


def _sq_dists_to(X: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Squared Euclidean distances from every row of X to every row of points."""
    x2 = (X * X).sum(axis=1)[:, None]
    p2 = (points * points).sum(axis=1)[None, :]
    return np.maximum(x2 + p2 - 2.0 * (X @ points.T), 0.0)


def select_coreset(pool: PoolState, X: np.ndarray, batch: int) -> QuerySelection:
    """Greedy k-center: repeatedly take the point farthest from labeled+picked."""
    if not pool.labeled:
        raise StrategyError("core-set selection needs a non-empty labeled set")
    unlabeled = _require_unlabeled(pool)
    U = X[unlabeled].astype(np.float64)
    L = X[np.asarray(pool.labeled, dtype=np.int64)].astype(np.float64)
    min_sq = _sq_dists_to(U, L).min(axis=1)

    k = min(batch, len(unlabeled))
    picked: list[int] = []
    scores: list[float] = []
    available = np.ones(len(unlabeled), dtype=bool)
    for _ in range(k):
        masked = np.where(available, min_sq, -np.inf)
        order = np.lexsort((unlabeled, -masked))
        best = next(i for i in order if available[i])
        picked.append(best)
        scores.append(float(np.sqrt(min_sq[best])))
        available[best] = False
        d = _sq_dists_to(U, U[best][None, :])[:, 0]
        np.minimum(min_sq, d, out=min_sq)
    rest_order = np.lexsort((unlabeled, -np.where(available, min_sq, -np.inf)))
    ranking = [int(unlabeled[i]) for i in picked] + [
        int(unlabeled[i]) for i in rest_order if available[i]
    ]
    return QuerySelection(
        indices=[int(unlabeled[i]) for i in picked], scores=scores, ranking=ranking
    )


def select_info_density(
    pool: PoolState, X: np.ndarray, model: TrainedClassifier, batch: int
) -> QuerySelection:
    """Entropy times density, density being mean cosine similarity to the pool.

    Density is computed against the other unlabeled points only, clamped
    below at zero; a singleton pool has density 1 by convention.
    """
    unlabeled = _require_unlabeled(pool)
    P = model.predict_proba(X[unlabeled])
    H = distribution_entropy(P)
    m = len(unlabeled)
    if m == 1:
        density = np.ones(1)
    else:
        V = X[unlabeled].astype(np.float64)
        norms = np.linalg.norm(V, axis=1)
        nonzero = norms > 0
        Vn = np.zeros_like(V)
        Vn[nonzero] = V[nonzero] / norms[nonzero, None]
        total = Vn.sum(axis=0)
        self_sim = nonzero.astype(np.float64)  # cos(x, x) is 1 unless x = 0
        density = (Vn @ total - self_sim) / (m - 1)
        density = np.maximum(density, 0.0)
    return _top_k_selection(unlabeled, H * density, batch)


def select_random(pool: PoolState, batch: int, rng_seed: int) -> QuerySelection:
    """Uniform sample without replacement; ranking is the seeded shuffle order."""
    unlabeled = np.asarray(pool.unlabeled, dtype=np.int64)
    rng = make_rng(rng_seed, STRATEGY_STREAM)
    perm = rng.permutation(unlabeled)
    k = min(batch, len(unlabeled))
    return QuerySelection(
        indices=[int(i) for i in perm[:k]],
        scores=[0.0] * k,
        ranking=[int(i) for i in perm],
    )


def select(
    name: str,
    pool: PoolState,
    X: np.ndarray,
    model: TrainedClassifier | None,
    batch: int,
    *,
    candidate_factor: int = 10,
    rng_seed: int = 0,
) -> QuerySelection:
    """Dispatch by strategy name; ``model`` may be None only for coreset/random."""
    if name == "qbc":
        assert model is not None
        return select_qbc(pool, X, model, batch)
    if name == "entropy_diversity":
        assert model is not None
        return select_entropy_diversity(pool, X, model, batch, candidate_factor)
    if name == "coreset":
        return select_coreset(pool, X, batch)
    if name == "info_density":
        assert model is not None
        return select_info_density(pool, X, model, batch)
    if name == "random":
        return select_random(pool, batch, rng_seed)
    raise StrategyError(f"unknown strategy {name!r}")
