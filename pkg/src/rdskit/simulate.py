"""Synthetic unit-vector sets reproducing three uncertainty regimes.

* coherent    - one tight cluster around a random direction; dispersion and
                eigen_embed both collapse to 0 as noise goes to 0.
* hemispheric - broad spread confined to the half-space of a random axis.
                Angles from the axis follow a stratified rim-weighted pattern
                (fractions ((j+0.5)/m)**RIM_EXPONENT of a quarter turn),
                emitted as antithetic tangent pairs. The rim weighting keeps
                eigen_embed in the 0.8-0.9 regime this configuration is meant
                to illustrate; an exactly-uniform hemisphere would center it
                near 0.5 in low dimension.
* opposing    - k tight clusters whose centers cancel to a zero sum: +-e1 for
                k=2, canonical regular-simplex vertices for k >= 3 (requires
                k <= dim + 1). Balanced assignment (round-robin), so with
                noise=0 and n divisible by k the centroid is exactly zero,
                eigen_embed saturates at 1, and dispersion keeps scaling.

Generation is pure given the config: the random source is numpy's seeded
PCG64 generator and the draw order is fixed, so equal configs give
bit-identical output on any platform. Noise draws happen even at noise=0,
which makes outputs at different noise levels comparable per seed.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .dispersion import EmbeddingSet, avg_pairwise_cosine, eigen_embed, rds, rds_l2
from .errors import ConfigError

REGIMES = ("coherent", "hemispheric", "opposing")
RIM_EXPONENT = 0.4

SWEEP_HEADER = "regime,n,dim,noise,clusters,seed,rds,rds_l2,eigen_embed,avg_cosine"


@dataclass(frozen=True)
class RegimeConfig:
    regime: str
    n: int = 10
    dim: int = 2
    noise: float = 0.0
    clusters: int = 2
    seed: int = 0

    def __post_init__(self):
        if self.regime not in REGIMES:
            raise ConfigError(f"unknown regime {self.regime!r}; expected one of {REGIMES}")
        if self.n < 2:
            raise ConfigError("n must be >= 2")
        if self.dim < 1:
            raise ConfigError("dim must be >= 1")
        if self.noise < 0:
            raise ConfigError("noise must be >= 0")
        if self.regime == "opposing":
            if self.clusters < 2:
                raise ConfigError("opposing regime needs clusters >= 2")
            if self.clusters > self.dim + 1:
                raise ConfigError(
                    f"cannot place {self.clusters} mutually cancelling clusters in "
                    f"dimension {self.dim} (need clusters <= dim + 1)"
                )


def generate(cfg: RegimeConfig) -> EmbeddingSet:
    """Draw one embedding set for the configured regime, seed-deterministic."""
    rng = np.random.default_rng(cfg.seed)
    if cfg.regime == "coherent":
        base = _random_unit(rng, cfg.dim)
        vectors = np.tile(base, (cfg.n, 1))
    elif cfg.regime == "hemispheric":
        vectors = _hemispheric_base(rng, cfg.n, cfg.dim)
    else:
        vectors = _opposing_base(cfg.n, cfg.dim, cfg.clusters)

    jitter = rng.standard_normal((cfg.n, cfg.dim))
    if cfg.noise > 0:
        vectors = vectors + cfg.noise * jitter
    vectors = vectors / np.linalg.norm(vectors, axis=1, keepdims=True)
    if cfg.regime == "hemispheric":
        # jitter may push a sample across the equator; reflect it back
        axis = _axis_of(cfg)
        d = vectors @ axis
        vectors = vectors - 2.0 * np.minimum(d, 0.0)[:, None] * axis
    return EmbeddingSet.from_vectors(vectors, renormalize=True)


def _random_unit(rng: np.random.Generator, dim: int) -> np.ndarray:
    while True:
        v = rng.standard_normal(dim)
        norm = np.linalg.norm(v)
        if norm > 1e-9:
            return v / norm


def _axis_of(cfg: RegimeConfig) -> np.ndarray:
    # the axis is the first draw of the seed's stream, recomputable at will
    return _random_unit(np.random.default_rng(cfg.seed), cfg.dim)


def _hemispheric_base(rng: np.random.Generator, n: int, dim: int) -> np.ndarray:
    axis = _random_unit(rng, dim)
    m = (n + 1) // 2
    fractions = ((np.arange(m) + 0.5) / m) ** RIM_EXPONENT
    angles = fractions * (np.pi / 2)
    out = []
    for theta in angles:
        tangent = _random_tangent(rng, axis)
        plus = np.cos(theta) * axis + np.sin(theta) * tangent
        minus = np.cos(theta) * axis - np.sin(theta) * tangent
        out.extend((plus, minus))
    return np.asarray(out[:n])


def _random_tangent(rng: np.random.Generator, axis: np.ndarray) -> np.ndarray:
    while True:
        g = rng.standard_normal(axis.shape[0])
        t = g - (g @ axis) * axis
        norm = np.linalg.norm(t)
        if norm > 1e-9:
            return t / norm


def _opposing_base(n: int, dim: int, k: int) -> np.ndarray:
    centers = _cluster_centers(dim, k)
    return centers[np.arange(n) % k]


def _cluster_centers(dim: int, k: int) -> np.ndarray:
    """k unit vectors summing to zero: +-e1, or regular-simplex vertices."""
    if k == 2:
        centers = np.zeros((2, dim))
        centers[0, 0] = 1.0
        centers[1, 0] = -1.0
        return centers
    # rows of the centering matrix I - J/k span a (k-1)-dim simplex; an
    # orthonormal basis of that hyperplane gives coordinates in R^(k-1)
    raw = np.eye(k) - np.full((k, k), 1.0 / k)
    _, _, vt = np.linalg.svd(raw)
    coords = raw @ vt[: k - 1].T
    coords /= np.linalg.norm(coords, axis=1, keepdims=True)
    centers = np.zeros((k, dim))
    centers[:, : k - 1] = coords
    return centers


def sweep(configs: list[RegimeConfig]) -> list[dict]:
    """Score one generated set per config; one result row per config."""
    rows = []
    for cfg in configs:
        es = generate(cfg)
        rows.append(
            {
                "regime": cfg.regime,
                "n": cfg.n,
                "dim": cfg.dim,
                "noise": cfg.noise,
                "clusters": cfg.clusters,
                "seed": cfg.seed,
                "rds": rds(es),
                "rds_l2": rds_l2(es),
                "eigen_embed": eigen_embed(es),
                "avg_cosine": avg_pairwise_cosine(es),
            }
        )
    return rows


def sweep_csv(configs: list[RegimeConfig]) -> str:
    """Sweep results as deterministic CSV (repr-formatted floats)."""
    rows = sweep(configs)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(SWEEP_HEADER.split(","))
    for r in rows:
        writer.writerow(
            [
                r["regime"],
                r["n"],
                r["dim"],
                repr(float(r["noise"])),
                r["clusters"],
                r["seed"],
                repr(r["rds"]),
                repr(r["rds_l2"]),
                repr(r["eigen_embed"]),
                repr(r["avg_cosine"]),
            ]
        )
    return buf.getvalue()
