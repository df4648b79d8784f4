"""Synthetic annotators that follow the quantized latent-normal model.

Each rating is a draw u ~ N(mu, sigma) rounded to the nearest category and
clamped to 1..K, so the category law is exactly :func:`quantized_pmf`.

Randomness comes from numpy's Philox counter-based generator keyed by
``SeedSequence(seed, spawn_key=(sample_index,))``; every sample owns its
stream, so output does not depend on how generation is scheduled.
Normal deviates are produced by inverse-CDF transform of uniforms.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Iterator, Optional, Sequence

import numpy as np

from latentmos.errors import InputError
from latentmos.latent import FitConfig, fit
from latentmos.normal import standard_normal_ppf
from latentmos.ratings import DEFAULT_SCALE_MAX, RatingSet, mos

DEFAULT_GRID_MU = (1.5, 2.25, 3.0, 3.75, 4.5)
DEFAULT_GRID_SIGMA = (0.3, 0.8, 1.4, 2.0)

_U53 = float(2**53)


@dataclass(frozen=True)
class SynthConfig:
    mu_star: float
    sigma_star: float
    n_ratings: int
    n_samples: int
    seed: int = 0
    scale_max: int = DEFAULT_SCALE_MAX

    def __post_init__(self) -> None:
        if not math.isfinite(self.mu_star):
            raise InputError(f"mu_star must be finite, got {self.mu_star!r}")
        if not (math.isfinite(self.sigma_star) and self.sigma_star > 0):
            raise InputError(f"sigma_star must be positive, got {self.sigma_star!r}")
        if self.n_ratings < 1:
            raise InputError(f"n_ratings must be >= 1, got {self.n_ratings!r}")
        if self.n_samples < 1:
            raise InputError(f"n_samples must be >= 1, got {self.n_samples!r}")
        if not 0 <= self.seed < 2**64:
            raise InputError(f"seed must be an unsigned 64-bit integer, got {self.seed!r}")
        if self.scale_max < 2:
            raise InputError(f"scale_max must be >= 2, got {self.scale_max!r}")


def sample_stream(seed: int, index: int) -> np.random.Generator:
    """Independent, platform-stable generator for sample ``index``."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(index,))))


def _open_uniform(rng: np.random.Generator, size) -> np.ndarray:
    # 53-bit grid shifted by half a step: never exactly 0 or 1
    return (rng.integers(0, 2**53, size=size, dtype=np.int64) + 0.5) / _U53


def _quantize(u: np.ndarray, scale_max: int) -> np.ndarray:
    rounded = np.where(u >= 0.0, np.floor(u + 0.5), np.ceil(u - 0.5))
    return np.clip(rounded, 1, scale_max).astype(np.int64)


def sample_ratings(
    mu: float,
    sigma: float,
    size: int,
    rng: np.random.Generator,
    scale_max: int = DEFAULT_SCALE_MAX,
) -> np.ndarray:
    if not sigma > 0:
        raise InputError(f"sigma must be positive, got {sigma!r}")
    u = mu + sigma * standard_normal_ppf(_open_uniform(rng, size))
    return _quantize(np.atleast_1d(u), scale_max)


def sample_rating(
    mu: float, sigma: float, rng: np.random.Generator, scale_max: int = DEFAULT_SCALE_MAX
) -> int:
    """One annotator's rating: the category nearest a latent normal draw."""
    return int(sample_ratings(mu, sigma, 1, rng, scale_max)[0])


def _rating_set(sample_id: str, mu: float, sigma: float, n: int, rng, scale_max: int) -> RatingSet:
    ratings = sample_ratings(mu, sigma, n, rng, scale_max)
    return RatingSet(sample_id, tuple(int(r) for r in ratings), scale_max)


def generate_dataset(cfg: SynthConfig) -> list[RatingSet]:
    """``n_samples`` rating sets drawn i.i.d. from one latent (mu*, sigma*)."""
    return [
        _rating_set(
            f"s{i:06d}", cfg.mu_star, cfg.sigma_star, cfg.n_ratings,
            sample_stream(cfg.seed, i), cfg.scale_max,
        )
        for i in range(cfg.n_samples)
    ]


@dataclass(frozen=True)
class TruthRow:
    sample_id: str
    mu_star: float
    sigma_star: float


def generate_grid(
    mus: Sequence[float],
    sigmas: Sequence[float],
    n_ratings: int,
    n_samples: int,
    seed: int = 0,
    scale_max: int = DEFAULT_SCALE_MAX,
) -> tuple[list[RatingSet], list[TruthRow]]:
    """Sweep the cartesian grid of (mu*, sigma*), ``n_samples`` per cell.

    Sample streams are keyed by the global sample index, cells in
    row-major (mu outer, sigma inner) order.
    """
    dataset, truth = [], []
    index = 0
    for cell, (mu, sigma) in enumerate(itertools.product(mus, sigmas)):
        SynthConfig(mu, sigma, n_ratings, n_samples, seed, scale_max)  # validation only
        for i in range(n_samples):
            sid = f"g{cell:03d}_s{i:06d}"
            dataset.append(
                _rating_set(sid, mu, sigma, n_ratings, sample_stream(seed, index), scale_max)
            )
            truth.append(TruthRow(sid, float(mu), float(sigma)))
            index += 1
    return dataset, truth


@dataclass(frozen=True)
class EstimatorComparison:
    mu_star: float
    sigma_star: float
    mae_latent: float
    mae_mos: float

    @property
    def latent_better(self) -> bool:
        return self.mae_latent <= self.mae_mos

    @property
    def in_claim_region(self) -> bool:
        """Cells where the latent mean is expected to beat MOS: the latent
        score sits outside [2, 4] and the spread is wide enough to clip."""
        return not (2.0 <= self.mu_star <= 4.0) and self.sigma_star >= 0.7


def compare_estimators(
    mus: Sequence[float] = DEFAULT_GRID_MU,
    sigmas: Sequence[float] = DEFAULT_GRID_SIGMA,
    n_ratings: int = 8,
    n_samples: int = 200,
    seed: int = 0,
    cfg: Optional[FitConfig] = None,
) -> list[EstimatorComparison]:
    """Mean absolute error to mu* of the fitted latent mean vs plain MOS."""
    cfg = cfg or FitConfig(beta=0.0)
    dataset, truth = generate_grid(mus, sigmas, n_ratings, n_samples, seed, cfg.scale_max)
    rows = []
    for cell in range(len(mus) * len(sigmas)):
        chunk = slice(cell * n_samples, (cell + 1) * n_samples)
        mu_star = truth[chunk.start].mu_star
        err_latent = [abs(fit(rs, cfg).representative - mu_star) for rs in dataset[chunk]]
        err_mos = [abs(mos(rs) - mu_star) for rs in dataset[chunk]]
        rows.append(
            EstimatorComparison(
                mu_star, truth[chunk.start].sigma_star,
                math.fsum(err_latent) / n_samples, math.fsum(err_mos) / n_samples,
            )
        )
    return rows


