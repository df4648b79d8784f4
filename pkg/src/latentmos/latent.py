"""Quantized latent-normal fit of a rating histogram.

Annotators are modelled as holding a continuous score u ~ N(mu, sigma) and
reporting the nearest category in 1..K, with the two end categories
absorbing the tails.  Given an observed histogram, (mu, sigma) is chosen to
minimise

    L(mu, sigma) = sum_k |H_model[k] - H_obs[k]| + beta * (sigma - sigma0)**2

where H are cumulative distributions over the categories and sigma0 is the
standard deviation of the observed ratings.  The fitted ``mu`` replaces MOS
as the sample's representative value.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from latentmos.errors import InputError
from latentmos.normal import standard_normal_cdf, standard_normal_sf
from latentmos.ratings import (
    DEFAULT_SCALE_MAX,
    EmpiricalStats,
    RatingSet,
    empirical_stats,
    rel_freq,
    stats_from_rel_freq,
)

SIGMA_MIN = 1e-5

# Nelder-Mead coefficients (reflection, expansion, contraction, shrink).
_ALPHA, _GAMMA, _RHO, _SHRINK = 1.0, 2.0, 0.5, 0.5
_SIMPLEX_STEP = 0.25
_XTOL = 1e-9


@dataclass(frozen=True)
class LatentParams:
    mu: float
    sigma: float
    sigma_min: float = field(default=SIGMA_MIN, repr=False, compare=False)

    def __post_init__(self) -> None:
        if not (math.isfinite(self.mu) and math.isfinite(self.sigma)):
            raise InputError(f"non-finite latent parameters mu={self.mu!r}, sigma={self.sigma!r}")
        if not self.sigma > self.sigma_min:
            raise InputError(f"sigma={self.sigma!r} must exceed sigma_min={self.sigma_min!r}")


@dataclass(frozen=True)
class FitConfig:
    """Fit hyperparameters; the defaults are the published setting."""

    beta: float = 0.03
    max_iters: int = 100
    sigma_min: float = SIGMA_MIN
    scale_max: int = DEFAULT_SCALE_MAX

    def __post_init__(self) -> None:
        if not (math.isfinite(self.beta) and self.beta >= 0):
            raise InputError(f"beta must be a finite non-negative number, got {self.beta!r}")
        if int(self.max_iters) != self.max_iters or self.max_iters < 1:
            raise InputError(f"max_iters must be a positive integer, got {self.max_iters!r}")
        if not (math.isfinite(self.sigma_min) and self.sigma_min > 0):
            raise InputError(f"sigma_min must be positive, got {self.sigma_min!r}")
        if self.scale_max < 2:
            raise InputError(f"scale_max must be >= 2, got {self.scale_max!r}")


@dataclass(frozen=True)
class FitResult:
    """Outcome of :func:`fit`.

    ``params`` is the lowest-loss iterate (``None`` when the ratings were all
    identical and no optimisation ran).  ``trace`` holds ``(mu, sigma, loss)``
    for every loss evaluation in order, starting with the initial point.
    """

    params: Optional[LatentParams]
    loss: float
    initial_loss: float
    iterations_run: int
    fell_back: bool
    representative: float
    trace: tuple[tuple[float, float, float], ...] = field(default=(), repr=False)

    @property
    def n_evaluations(self) -> int:
        return len(self.trace)


def _bin_edges(mu: float, sigma: float, scale_max: int) -> list[float]:
    return [(k + 0.5 - mu) / sigma for k in range(1, scale_max)]


def quantized_pmf(p: LatentParams, scale_max: int = DEFAULT_SCALE_MAX) -> np.ndarray:
    """Category probabilities of N(mu, sigma) rounded to the nearest of 1..K.

    Bin k covers (k - 0.5, k + 0.5]; bin 1 extends to -inf and bin K to +inf.
    """
    if scale_max < 2:
        raise InputError(f"scale_max must be >= 2, got {scale_max!r}")
    z = _bin_edges(p.mu, p.sigma, scale_max)
    mass = np.empty(scale_max, dtype=np.float64)
    mass[0] = standard_normal_cdf(z[0])
    mass[-1] = standard_normal_sf(z[-1])
    for k in range(1, scale_max - 1):
        lo, hi = z[k - 1], z[k]
        # difference on whichever tail keeps precision
        if lo >= 0.0:
            mass[k] = standard_normal_sf(lo) - standard_normal_sf(hi)
        elif hi <= 0.0:
            mass[k] = standard_normal_cdf(hi) - standard_normal_cdf(lo)
        else:
            mass[k] = 1.0 - standard_normal_cdf(lo) - standard_normal_sf(hi)
    np.maximum(mass, 0.0, out=mass)
    total = math.fsum(mass)
    if abs(total - 1.0) > 1e-12:
        mass /= total
    return mass


def cdf_l1_distance(a: Sequence[float], b: Sequence[float]) -> float:
    """L1 distance between the cumulative sums of two category distributions.

    On an ordinal scale with unit spacing this equals the earth mover's
    distance between the two histograms.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 1 or a.shape != b.shape:
        raise InputError(f"distribution shapes differ: {a.shape} vs {b.shape}")
    return math.fsum(np.abs(np.cumsum(a) - np.cumsum(b)))


def loss(
    p: LatentParams,
    r: Sequence[float],
    stats: EmpiricalStats,
    cfg: FitConfig = FitConfig(),
) -> float:
    """Regularised CDF-L1 loss of latent parameters against a histogram."""
    d = cdf_l1_distance(quantized_pmf(p, cfg.scale_max), r)
    return d + cfg.beta * (p.sigma - stats.stddev) ** 2


def loss_gradient(
    p: LatentParams,
    r: Sequence[float],
    stats: EmpiricalStats,
    cfg: FitConfig = FitConfig(),
) -> tuple[float, float]:
    """Gradient of :func:`loss` with respect to (mu, sigma).

    Valid away from kinks, i.e. where no model/observed CDF pair coincides.
    """
    r = np.asarray(r, dtype=np.float64)
    h_obs = np.cumsum(r)
    h_model = np.cumsum(quantized_pmf(p, cfg.scale_max))
    d_mu = 0.0
    d_sigma = 0.0
    # the last cumulative value is 1 on both sides and does not move
    for k, z in enumerate(_bin_edges(p.mu, p.sigma, cfg.scale_max)):
        s = float(np.sign(h_model[k] - h_obs[k]))
        dens = math.exp(-0.5 * z * z) / math.sqrt(2.0 * math.pi)
        d_mu -= s * dens / p.sigma
        d_sigma -= s * dens * z / p.sigma
    d_sigma += 2.0 * cfg.beta * (p.sigma - stats.stddev)
    return d_mu, d_sigma


def fit(rs: RatingSet, cfg: FitConfig = FitConfig()) -> FitResult:
    """Fit the latent normal to one sample's ratings."""
    if rs.scale_max != cfg.scale_max:
        raise InputError(
            f"{rs.sample_id}: rating scale 1..{rs.scale_max} does not match "
            f"config scale 1..{cfg.scale_max}"
        )
    return fit_histogram(rel_freq(rs), empirical_stats(rs), cfg)


def fit_histogram(
    r: Sequence[float],
    stats: Optional[EmpiricalStats] = None,
    cfg: FitConfig = FitConfig(),
) -> FitResult:
    """Fit the latent normal to a relative-frequency vector.

    Starts from (mean, stddev) of the histogram and runs Nelder-Mead on
    (mu, log(sigma - sigma_min)), which keeps sigma feasible without a
    penalty.  The lowest loss seen over every evaluation wins; if nothing
    beats the starting point, the MOS is returned with ``fell_back`` set.
    """
    r = np.asarray(r, dtype=np.float64)
    if r.shape != (cfg.scale_max,):
        raise InputError(f"histogram has shape {r.shape}, expected ({cfg.scale_max},)")
    if np.any(r < 0) or abs(math.fsum(r) - 1.0) > 1e-9:
        raise InputError("histogram must be non-negative and sum to 1")
    if stats is None:
        stats = stats_from_rel_freq(r)

    if stats.stddev == 0.0 or np.count_nonzero(r) == 1:
        # every rating identical: nothing to fit
        return FitResult(
            params=None,
            loss=math.nan,
            initial_loss=math.nan,
            iterations_run=0,
            fell_back=True,
            representative=stats.mean,
        )

    sigma_min = cfg.sigma_min
    trace: list[tuple[float, float, float]] = []

    def objective(x: tuple[float, float]) -> float:
        mu = x[0]
        sigma = sigma_min + math.exp(x[1])
        if not (math.isfinite(mu) and math.isfinite(sigma)) or sigma <= sigma_min:
            value = math.nan
        else:
            value = loss(LatentParams(mu, sigma, sigma_min), r, stats, cfg)
        trace.append((mu, sigma, value))
        if not math.isfinite(value):
            raise _NonFiniteLoss
        return value

    sigma0 = max(stats.stddev, 2.0 * sigma_min)
    x0 = (stats.mean, math.log(sigma0 - sigma_min))
    iterations = 0
    try:
        initial_loss = objective(x0)
        iterations = _nelder_mead(objective, x0, initial_loss, cfg.max_iters)
    except _NonFiniteLoss:
        mu0, s0, l0 = trace[0]
        return FitResult(
            params=LatentParams(mu0, s0, sigma_min) if math.isfinite(l0) else None,
            loss=l0,
            initial_loss=l0,
            iterations_run=iterations,
            fell_back=True,
            representative=stats.mean,
            trace=tuple(trace),
        )

    best = min(range(len(trace)), key=lambda i: trace[i][2])
    mu_b, sigma_b, loss_b = trace[best]
    improved = loss_b < initial_loss
    return FitResult(
        params=LatentParams(mu_b, sigma_b, sigma_min),
        loss=loss_b,
        initial_loss=initial_loss,
        iterations_run=iterations,
        fell_back=not improved,
        representative=mu_b if improved else stats.mean,
        trace=tuple(trace),
    )


class _NonFiniteLoss(Exception):
    pass


def _nelder_mead(f, x0: tuple[float, float], f0: float, max_iters: int) -> int:
    """Minimise ``f`` over R^2 starting from ``x0`` (where ``f(x0) == f0``).

    Returns the number of simplex updates made; the caller tracks the best
    point through ``f`` itself.
    """

    def ev(x: np.ndarray) -> float:
        return f((float(x[0]), float(x[1])))

    x0 = np.asarray(x0, dtype=np.float64)
    simplex = [x0, x0 + (_SIMPLEX_STEP, 0.0), x0 + (0.0, _SIMPLEX_STEP)]
    values = [f0, ev(simplex[1]), ev(simplex[2])]

    iterations = 0
    while iterations < max_iters:
        order = sorted(range(3), key=lambda i: values[i])
        simplex = [simplex[i] for i in order]
        values = [values[i] for i in order]
        spread = np.max(np.abs(np.asarray(simplex[1:]) - simplex[0]), axis=0)
        if np.all(spread < _XTOL):
            break
        iterations += 1

        centroid = 0.5 * (simplex[0] + simplex[1])
        worst = simplex[2]
        xr = centroid + _ALPHA * (centroid - worst)
        fr = ev(xr)
        if values[0] <= fr < values[1]:
            simplex[2], values[2] = xr, fr
            continue
        if fr < values[0]:
            xe = centroid + _GAMMA * (xr - centroid)
            fe = ev(xe)
            if fe < fr:
                simplex[2], values[2] = xe, fe
            else:
                simplex[2], values[2] = xr, fr
            continue
        if fr < values[2]:
            xc = centroid + _RHO * (xr - centroid)
            fc = ev(xc)
            if fc <= fr:
                simplex[2], values[2] = xc, fc
                continue
        else:
            xc = centroid + _RHO * (worst - centroid)
            fc = ev(xc)
            if fc < values[2]:
                simplex[2], values[2] = xc, fc
                continue
        for i in (1, 2):
            simplex[i] = simplex[0] + _SHRINK * (simplex[i] - simplex[0])
            values[i] = ev(simplex[i])
    return iterations
