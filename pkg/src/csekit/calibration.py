"""Threshold calibration with expected Type I Error control over a platten.

Each tile's target level ``alpha'`` is the inverted Tilt-Bound maximized over
``q``; its threshold is the ``floor((N+1) alpha')``-th smallest simulated
statistic; the global threshold is the minimum over tiles.
"""

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from sklearn.base import BaseEstimator

from .grid import vertices
from .rng import BOOTSTRAP_DOMAIN, SeedSpec, RandomStream
from .simengine import run_batches
from .tiltbound import BoundQuery, optimize_inverse

__all__ = [
    "REJECT_NOTHING",
    "order_index",
    "pointwise_threshold",
    "tile_alpha_target",
    "CalibrationResult",
    "Calibrator",
    "calibrate",
    "thresholds_from_batches",
    "empirical_slack",
    "bootstrap_bias",
    "AffineEstimand",
    "ConfidenceSet",
    "confidence_set",
    "observed_tile_statistics",
]

# Sorts below every real threshold; ``S < REJECT_NOTHING`` is never true.
REJECT_NOTHING = -math.inf


def order_index(n, alpha_prime):
    """``floor((n + 1) * alpha_prime)`` in exact arithmetic."""
    return math.floor((n + 1) * Fraction(float(alpha_prime)))


def pointwise_threshold(sorted_stats, alpha_prime):
    """The ``floor((N+1) alpha')``-th order statistic, or ``REJECT_NOTHING`` if that index is 0."""
    sorted_stats = np.asarray(sorted_stats, dtype=float)
    if sorted_stats.size == 0:
        raise ValueError("need at least one simulated statistic")
    if not 0.0 <= alpha_prime <= 1.0:
        raise ValueError("alpha_prime must lie in [0, 1]")
    k = min(order_index(sorted_stats.size, alpha_prime), sorted_stats.size)
    if k < 1:
        return REJECT_NOTHING
    return float(sorted_stats[k - 1])


def tile_alpha_target(family, tile, alpha):
    """Largest level at ``tile.sim_point`` that keeps the whole tile at ``alpha``."""
    query = BoundQuery(tile.sim_point, vertices(tile) - tile.sim_point, alpha)
    return optimize_inverse(family, query).bound


@dataclass(frozen=True, eq=False)
class CalibrationResult:
    alpha: float
    alpha_prime: np.ndarray
    k: np.ndarray
    lambda_hat: np.ndarray
    lambda_star: float
    argmin: int

    def to_dict(self):
        return {
            "alpha": self.alpha,
            "lambda_star": _json_lambda(self.lambda_star),
            "argmin_tile": self.argmin,
            "tiles": [
                {
                    "alpha_prime": float(self.alpha_prime[i]),
                    "k": int(self.k[i]),
                    "lambda_hat": _json_lambda(self.lambda_hat[i]),
                }
                for i in range(len(self.k))
            ],
        }


def _json_lambda(lam):
    return "REJECT_NOTHING" if lam == REJECT_NOTHING else float(lam)


def thresholds_from_batches(sorted_stats, alpha_primes, alpha):
    """Assemble a result from per-tile sorted statistics and targets."""
    alpha_primes = np.asarray(alpha_primes, dtype=float)
    ks = np.array([order_index(len(s), a) for s, a in zip(sorted_stats, alpha_primes)])
    lam = np.array([pointwise_threshold(s, a) for s, a in zip(sorted_stats, alpha_primes)])
    argmin = int(np.argmin(lam))
    return CalibrationResult(float(alpha), alpha_primes, ks, lam, float(lam[argmin]), argmin)


class Calibrator(BaseEstimator):
    """Calibrate a design's rejection threshold over a platten.

    The design must reject on ``S < lam`` with rejection sets growing in
    ``lam``; that cannot be checked at runtime.

    Attributes
    ----------
    result_ : CalibrationResult
    lambda_star_ : float
    batches_ : list of SimBatch
    platten_ : Platten
    """

    def __init__(self, design, family, alpha=0.025, seed=0, threads=None):
        self.design = design
        self.family = family
        self.alpha = alpha
        self.seed = seed
        self.threads = threads

    def fit(self, platten, y=None):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must lie in [0, 1]")
        # targets depend only on geometry, never on simulated data
        targets = [tile_alpha_target(self.family, t, self.alpha) for t in platten.tiles]
        batches = run_batches(
            self.design, self.family, platten.tiles, SeedSpec(self.seed), self.threads
        )
        self.result_ = thresholds_from_batches([b.stats for b in batches], targets, self.alpha)
        self.lambda_star_ = self.result_.lambda_star
        self.batches_ = batches
        self.platten_ = platten
        return self

    def predict(self, stats):
        """Reject (``True``) where the statistic is below the calibrated threshold."""
        return np.asarray(stats, dtype=float) < self.lambda_star_


def calibrate(platten, design, family, alpha, seed_spec, threads=None):
    """Functional form of :class:`Calibrator`; returns ``(result, batches)``."""
    seed = seed_spec.master_seed if isinstance(seed_spec, SeedSpec) else int(seed_spec)
    est = Calibrator(design, family, alpha, seed, threads).fit(platten)
    return est.result_, est.batches_


def _empirical_rate(sorted_stats, lam):
    return np.searchsorted(sorted_stats, lam, side="left") / len(sorted_stats)


def _slack(originals, resampled, alpha_primes, alpha):
    lam = np.array([pointwise_threshold(s, a) for s, a in zip(resampled, alpha_primes)])
    informative = np.flatnonzero(lam != REJECT_NOTHING)
    if informative.size == 0:
        return math.nan, REJECT_NOTHING
    i = int(informative[np.argmin(lam[informative])])
    return alpha - _empirical_rate(originals[i], lam[i]), float(lam[i])


def empirical_slack(batches, result):
    """``alpha`` minus the empirical error at the binding tile for the fitted threshold."""
    stats = [b.stats for b in batches]
    return _slack(stats, stats, result.alpha_prime, result.alpha)[0]


def bootstrap_bias(
    platten, batches, alpha, n_boot, family=None, alpha_primes=None, seed=0, resampler=None
):
    """Bootstrap estimate of calibration slack.

    Each replicate resamples every tile's statistics with replacement,
    recalibrates, and scores the new threshold on the original empirical
    error surface at the binding tile. Tiles whose threshold is
    ``REJECT_NOTHING`` are left out of the argmin.

    Per-tile targets come from ``alpha_primes`` when given, else from
    ``family``. ``resampler(b, tile_index, n)`` may supply the index arrays
    instead of the seeded bootstrap streams.

    Returns
    -------
    dict with ``mean``, ``std``, ``slacks`` and ``lambda_stars``.
    """
    if n_boot < 1:
        raise ValueError("need at least one bootstrap replicate")
    if alpha_primes is None:
        if family is None:
            raise ValueError("pass either family or alpha_primes")
        alpha_primes = [tile_alpha_target(family, t, alpha) for t in platten.tiles]
    originals = [b.stats for b in batches]
    offsets = np.cumsum([0] + [len(s) for s in originals])
    slacks, lams = [], []
    for b in range(n_boot):
        if resampler is None:
            u = RandomStream(seed, [b], BOOTSTRAP_DOMAIN).uniforms(int(offsets[-1]))[0]
        resampled = []
        for i, s in enumerate(originals):
            if resampler is None:
                idx = np.minimum((u[offsets[i] : offsets[i + 1]] * len(s)).astype(np.int64), len(s) - 1)
            else:
                idx = np.asarray(resampler(b, i, len(s)))
            resampled.append(np.sort(s[idx], kind="stable"))
        slack, lam = _slack(originals, resampled, alpha_primes, alpha)
        slacks.append(slack)
        lams.append(lam)
    slacks = np.asarray(slacks)
    finite = slacks[np.isfinite(slacks)]
    return {
        "mean": float(finite.mean()) if finite.size else math.nan,
        "std": float(finite.std(ddof=1)) if finite.size > 1 else 0.0,
        "slacks": slacks,
        "lambda_stars": np.asarray(lams),
    }


@dataclass(frozen=True)
class AffineEstimand:
    """``e(theta) = coef . theta + offset``; a coordinate projection is a unit ``coef``."""

    coef: tuple
    offset: float = 0.0

    def __call__(self, theta):
        return np.asarray(theta, dtype=float) @ np.asarray(self.coef, dtype=float) + self.offset

    @classmethod
    def projection(cls, axis, dim):
        coef = [0.0] * dim
        coef[axis] = 1.0
        return cls(tuple(coef))


@dataclass(frozen=True, eq=False)
class ConfidenceSet:
    retained: tuple
    image: tuple

    @property
    def empty(self):
        return not self.retained

    def to_dict(self):
        return {
            "retained_tiles": list(self.retained),
            "image": None if self.image is None else list(self.image),
        }


def confidence_set(platten, observed_stats, thresholds, estimand):
    """Union of tiles not rejected by the observed data, and its image under ``estimand``.

    Tile ``i`` is kept when ``observed_stats[i] >= thresholds[i]``. The image is
    exact for affine estimands because their extremes sit at tile vertices.
    """
    observed_stats = np.asarray(observed_stats, dtype=float)
    thresholds = np.asarray(thresholds, dtype=float)
    if observed_stats.shape != (len(platten),) or thresholds.shape != (len(platten),):
        raise ValueError("need one observed statistic and one threshold per tile")
    keep = tuple(int(i) for i in np.flatnonzero(observed_stats >= thresholds))
    if not keep:
        return ConfidenceSet((), None)
    values = np.concatenate([estimand(vertices(platten.tiles[i])) for i in keep])
    return ConfidenceSet(keep, (float(values.min()), float(values.max())))


def observed_tile_statistics(design, platten, outcomes):
    """Each tile's statistic evaluated on one observed dataset (a one-row outcome matrix)."""
    return np.array([float(design.tile_statistic(outcomes, t)[0]) for t in platten.tiles])
