"""Rating containers and the classical aggregators (MOS, N-lowest MOS)."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from latentmos.errors import InputError

DEFAULT_SCALE_MAX = 5


@dataclass(frozen=True)
class RatingSet:
    """Discrete ratings on 1..scale_max collected for one sample.

    Counts may differ between samples; nothing here assumes a fixed N.
    """

    sample_id: str
    ratings: tuple[int, ...]
    scale_max: int = DEFAULT_SCALE_MAX

    def __post_init__(self) -> None:
        ratings = tuple(self.ratings)
        object.__setattr__(self, "ratings", ratings)
        if self.scale_max < 2:
            raise InputError(f"{self.sample_id}: scale_max must be >= 2, got {self.scale_max}")
        if not ratings:
            raise InputError(f"{self.sample_id}: empty rating list")
        for r in ratings:
            if isinstance(r, bool) or not isinstance(r, (int, np.integer)):
                raise InputError(f"{self.sample_id}: non-integer rating {r!r}")
            if not 1 <= r <= self.scale_max:
                raise InputError(
                    f"{self.sample_id}: rating {r} outside 1..{self.scale_max}"
                )

    def __len__(self) -> int:
        return len(self.ratings)


@dataclass(frozen=True)
class EmpiricalStats:
    mean: float
    stddev: float


def mos(rs: RatingSet) -> float:
    """Arithmetic mean of the ratings."""
    return math.fsum(rs.ratings) / len(rs.ratings)


def n_low_mos(rs: RatingSet, n: int) -> float:
    """Mean of the ``n`` lowest ratings.

    ``n`` larger than the number of ratings is an error, not a clamp, so that
    datasets with uneven rating counts fail loudly.
    """
    if isinstance(n, bool) or not isinstance(n, (int, np.integer)) or n <= 0:
        raise InputError(f"n must be a positive integer, got {n!r}")
    if n > len(rs.ratings):
        raise InputError(
            f"{rs.sample_id}: n={n} exceeds the {len(rs.ratings)} available ratings"
        )
    lowest = sorted(rs.ratings)[:n]
    return math.fsum(lowest) / n


def rel_freq(rs: RatingSet) -> np.ndarray:
    """Relative frequency of each rating value; index 0 holds rating 1."""
    counts = np.bincount(np.asarray(rs.ratings, dtype=np.int64) - 1, minlength=rs.scale_max)
    return counts.astype(np.float64) / len(rs.ratings)


def empirical_stats(rs: RatingSet) -> EmpiricalStats:
    """Mean and population (divide-by-N) standard deviation of the ratings."""
    mean = mos(rs)
    var = math.fsum((r - mean) ** 2 for r in rs.ratings) / len(rs.ratings)
    return EmpiricalStats(mean=mean, stddev=math.sqrt(var))


def stats_from_rel_freq(mass: Sequence[float]) -> EmpiricalStats:
    """Moments of a relative-frequency vector over the values 1..K."""
    mass = np.asarray(mass, dtype=np.float64)
    values = np.arange(1, mass.size + 1, dtype=np.float64)
    mean = math.fsum(values * mass)
    var = math.fsum(mass * (values - mean) ** 2)
    return EmpiricalStats(mean=mean, stddev=math.sqrt(max(var, 0.0)))
