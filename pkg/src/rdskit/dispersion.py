"""Radial dispersion scoring on the unit hypersphere.

The core quantities for a set of N unit-norm embeddings u_1..u_N with
centroid ub = mean(u_i):

* ``rds``            - sum_i ||u_i - ub||_1, the radial dispersion score;
* ``rds_l2``         - same with the l2 norm per vector;
* ``eigen_embed``    - (1/N) sum_i ||u_i - ub||_2^2, equal to 1 - ||ub||_2^2
                       for unit-norm inputs, hence bounded in [0, 1];
* ``rds_weighted``   - sum_i p_i ||u_i - ub_w||_1 with ub_w = sum_i p_i u_i,
                       the 1-Wasserstein distance from the weighted empirical
                       distribution to the Dirac at its barycenter under l1
                       ground cost;
* per-sample variants ||u_i - ub||_1 and ||u_i - ub_w||_1.

All arithmetic is float64 regardless of the input dtype so that N*d
accumulations do not drift.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateEmbedding, InvalidLikelihood, LengthMismatch

UNIT_NORM_TOL = 1e-6
ZERO_NORM_TOL = 1e-12
WEIGHT_SUM_TOL = 1e-9


def l2_normalize(v) -> np.ndarray:
    """Scale a vector to unit l2 norm, preserving direction.

    Raises DegenerateEmbedding for (near-)zero input.
    """
    arr = np.asarray(v, dtype=np.float64)
    if arr.ndim != 1 or arr.size == 0:
        raise ValueError("expected a non-empty 1-D vector")
    norm = float(np.linalg.norm(arr))
    if norm < ZERO_NORM_TOL:
        raise DegenerateEmbedding(f"cannot normalize vector with norm {norm:.3e}")
    return arr / norm


@dataclass(frozen=True)
class EmbeddingSet:
    """N unit-norm embeddings of sampled generations for one prompt.

    Immutable after construction; the backing array is read-only.
    Construct via :meth:`from_vectors`.
    """

    vectors: np.ndarray

    def __post_init__(self):
        v = self.vectors
        if v.ndim != 2:
            raise ValueError("vectors must be a 2-D array of shape (n, dim)")
        if v.shape[0] < 2:
            raise ValueError("an embedding set needs at least 2 vectors")
        if v.shape[1] < 1:
            raise ValueError("embedding dimension must be >= 1")
        norms = np.linalg.norm(v, axis=1)
        if not np.all(np.abs(norms - 1.0) <= UNIT_NORM_TOL):
            worst = float(np.max(np.abs(norms - 1.0)))
            raise ValueError(
                f"vectors are not unit-norm (max deviation {worst:.3e}); "
                "use EmbeddingSet.from_vectors to renormalize"
            )

    @classmethod
    def from_vectors(cls, vectors, renormalize: bool = True) -> "EmbeddingSet":
        """Build a set from raw vectors, renormalizing off-sphere inputs.

        Embedding endpoints differ in normalization conventions, so inputs
        whose norm deviates from 1 by more than the tolerance are rescaled
        with a warning rather than rejected. Zero vectors are rejected.
        """
        arr = np.array(vectors, dtype=np.float64, copy=True)
        if arr.ndim != 2:
            raise ValueError("vectors must be a 2-D array of shape (n, dim)")
        norms = np.linalg.norm(arr, axis=1)
        if np.any(norms < ZERO_NORM_TOL):
            bad = int(np.argmin(norms))
            raise DegenerateEmbedding(f"vector {bad} has near-zero norm")
        off = np.abs(norms - 1.0) > UNIT_NORM_TOL
        if np.any(off):
            if not renormalize:
                raise ValueError("vectors are not unit-norm and renormalize=False")
            warnings.warn(
                "embedding vectors were not unit-norm; renormalizing",
                RuntimeWarning,
                stacklevel=2,
            )
            arr = arr / norms[:, None]
        arr.setflags(write=False)
        return cls(arr)

    @property
    def n(self) -> int:
        return self.vectors.shape[0]

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]


@dataclass(frozen=True)
class ProbabilityWeights:
    """Normalized generation likelihoods p_i, non-negative and summing to 1."""

    weights: np.ndarray

    def __post_init__(self):
        w = self.weights
        if w.ndim != 1 or w.size < 1:
            raise ValueError("weights must be a non-empty 1-D array")
        if np.any(w < 0):
            raise ValueError("weights must be non-negative")
        total = float(w.sum())
        if abs(total - 1.0) > WEIGHT_SUM_TOL:
            raise ValueError(f"weights sum to {total!r}, expected 1.0")

    @classmethod
    def from_values(cls, values) -> "ProbabilityWeights":
        arr = np.array(values, dtype=np.float64, copy=True)
        arr.setflags(write=False)
        return cls(arr)

    @classmethod
    def uniform(cls, n: int) -> "ProbabilityWeights":
        if n < 1:
            raise ValueError("n must be >= 1")
        return cls.from_values(np.full(n, 1.0 / n))

    @property
    def n(self) -> int:
        return self.weights.shape[0]


def probs_from_anll(anlls) -> ProbabilityWeights:
    """Normalized sequence likelihoods from per-generation ANLL values.

    p_i is proportional to exp(-anll_i) (length-normalized sequence
    likelihood); the minimum ANLL is subtracted before exponentiation so the
    softmax is numerically stable, which also makes the result invariant to
    adding a constant to every input.
    """
    arr = np.asarray(anlls, dtype=np.float64)
    if arr.ndim != 1 or arr.size < 1:
        raise InvalidLikelihood("expected a non-empty 1-D list of ANLL values")
    if not np.all(np.isfinite(arr)):
        raise InvalidLikelihood("ANLL values must be finite")
    shifted = arr - arr.min()
    w = np.exp(-shifted)
    return ProbabilityWeights.from_values(w / w.sum())


def centroid(es: EmbeddingSet) -> np.ndarray:
    """Empirical mean of the embeddings; norm <= 1 by convexity.

    Accumulated relative to the first vector: identical inputs then yield
    their common value bit-exactly (a plain mean can be off by an ulp, which
    would leave a spurious nonzero dispersion on collapsed sets).
    """
    anchor = es.vectors[0]
    return anchor + (es.vectors - anchor).mean(axis=0)


def weighted_centroid(es: EmbeddingSet, p: ProbabilityWeights) -> np.ndarray:
    """Probability-weighted mean sum_i p_i u_i."""
    _check_lengths(es, p)
    return p.weights @ es.vectors


def rds(es: EmbeddingSet) -> float:
    """Total l1 dispersion from the centroid."""
    dev = es.vectors - centroid(es)
    return float(np.abs(dev).sum())


def rds_l2(es: EmbeddingSet) -> float:
    """Total l2 dispersion from the centroid."""
    dev = es.vectors - centroid(es)
    return float(np.linalg.norm(dev, axis=1).sum())


def eigen_embed(es: EmbeddingSet) -> float:
    """Mean squared l2 deviation from the centroid, in [0, 1].

    Computed in distance form (1/N) sum ||u_i - ub||^2; for unit-norm inputs
    this equals 1 - ||ub||^2, so the value is clipped to [0, 1] to absorb
    float rounding at the boundaries.
    """
    dev = es.vectors - centroid(es)
    val = float((dev * dev).sum()) / es.n
    return min(max(val, 0.0), 1.0)


def rds_per_sample(es: EmbeddingSet) -> np.ndarray:
    """l1 distance of each embedding from the centroid; sums to rds."""
    return np.abs(es.vectors - centroid(es)).sum(axis=1)


def rds_weighted(es: EmbeddingSet, p: ProbabilityWeights) -> float:
    """Probability-weighted dispersion around the weighted centroid.

    Equals the 1-Wasserstein distance between sum_i p_i * delta(u_i) and the
    Dirac at the barycenter under l1 ground cost (the single-target coupling
    is the only feasible transport plan). With uniform weights this reduces
    to rds(es) / N.
    """
    _check_lengths(es, p)
    dist = np.abs(es.vectors - weighted_centroid(es, p)).sum(axis=1)
    return float(p.weights @ dist)


def rds_w_per_sample(es: EmbeddingSet, p: ProbabilityWeights) -> np.ndarray:
    """l1 distance of each embedding from the weighted centroid.

    The p-weighted sum of the entries equals rds_weighted(es, p).
    """
    _check_lengths(es, p)
    return np.abs(es.vectors - weighted_centroid(es, p)).sum(axis=1)


def avg_pairwise_cosine(es: EmbeddingSet) -> float:
    """Mean of u_i . u_j over ordered pairs i != j.

    Uses ||sum u_i||^2 = N + sum_{i != j} u_i.u_j, so the off-diagonal sum
    never needs the full Gram matrix. When the centroid vanishes this is
    exactly -1/(N-1).
    """
    n = es.n
    total = es.vectors.sum(axis=0)
    off_diag = float(total @ total) - n
    return off_diag / (n * (n - 1))


@dataclass(frozen=True)
class ScoreSet:
    """All prompt-level and per-sample dispersion scores for one record."""

    rds: float
    rds_l2: float
    eigen_embed: float
    per_sample: np.ndarray
    rds_w: float | None = None
    per_sample_w: np.ndarray | None = None

    def __post_init__(self):
        if not math.isclose(float(self.per_sample.sum()), self.rds, rel_tol=1e-6, abs_tol=1e-9):
            raise ValueError("per-sample scores do not sum to rds")
        if self.eigen_embed < 0.0 or self.eigen_embed > 1.0 + 1e-9:
            raise ValueError("eigen_embed out of [0, 1]")
        if self.rds < self.eigen_embed - 1e-9:
            raise ValueError("rds < eigen_embed violates the dispersion bound")


def score_set(es: EmbeddingSet, p: ProbabilityWeights | None = None) -> ScoreSet:
    """Compute every dispersion score for one embedding set at once."""
    return ScoreSet(
        rds=rds(es),
        rds_l2=rds_l2(es),
        eigen_embed=eigen_embed(es),
        per_sample=rds_per_sample(es),
        rds_w=None if p is None else rds_weighted(es, p),
        per_sample_w=None if p is None else rds_w_per_sample(es, p),
    )


def _check_lengths(es: EmbeddingSet, p: ProbabilityWeights) -> None:
    if es.n != p.n:
        raise LengthMismatch(f"{es.n} embeddings vs {p.n} weights")
