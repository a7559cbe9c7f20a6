"""Pointwise confidence bounds on an operating characteristic over a platten.

Each tile gets an exact Clopper-Pearson bound at its simulation point, which
the tilewise optimized Tilt-Bound then extends to the whole tile.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import betainc
from sklearn.base import BaseEstimator

from .grid import vertices
from .rng import SeedSpec
from .simengine import run_batches
from .tiltbound import BoundQuery, optimize_forward, optimize_lower

__all__ = [
    "clopper_pearson_upper",
    "clopper_pearson_lower",
    "hoeffding_upper",
    "beta_quantile",
    "tile_upper_bound",
    "report_from_counts",
    "ValidationReport",
    "Validator",
    "validate",
]

_BISECT_ITERS = 42  # bracket width 2**-42 < 1e-12


def beta_quantile(p, a, b, round_up=True):
    """Quantile of Beta(a, b) by bisection on the regularized incomplete beta.

    The result is an endpoint of a bracket narrower than ``1e-12``: the upper
    endpoint (CDF >= p) when ``round_up`` else the lower one (CDF <= p), so
    bounds built from it never under-cover through rounding.
    """
    p, a, b = np.broadcast_arrays(*(np.asarray(x, dtype=float) for x in (p, a, b)))
    lo = np.zeros(p.shape)
    hi = np.ones(p.shape)
    for _ in range(_BISECT_ITERS):
        mid = 0.5 * (lo + hi)
        below = betainc(a, b, mid) < p
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    return hi if round_up else lo


def _check_counts(r, n, delta):
    r = np.asarray(r)
    n = np.asarray(n)
    if np.any(n < 1) or np.any(r < 0) or np.any(r > n):
        raise ValueError("need 0 <= R <= N and N >= 1")
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must lie in (0, 1)")
    return r.astype(float), n.astype(float)


def clopper_pearson_upper(r, n, delta):
    """One-sided ``1 - delta`` upper bound: the ``1 - delta`` quantile of Beta(R+1, N-R)."""
    scalar = np.ndim(r) == 0 and np.ndim(n) == 0
    r, n = _check_counts(r, n, delta)
    full = r == n
    q = beta_quantile(1.0 - delta, r + 1.0, np.where(full, 1.0, n - r), round_up=True)
    q = np.where(full, 1.0, q)
    return float(q) if scalar else q


def clopper_pearson_lower(r, n, delta):
    """One-sided ``1 - delta`` lower bound: the ``delta`` quantile of Beta(R, N-R+1)."""
    scalar = np.ndim(r) == 0 and np.ndim(n) == 0
    r, n = _check_counts(r, n, delta)
    empty = r == 0
    q = beta_quantile(delta, np.where(empty, 1.0, r), n - r + 1.0, round_up=False)
    q = np.where(empty, 0.0, q)
    return float(q) if scalar else q


def hoeffding_upper(sample_mean, n, delta, range_width=1.0):
    """One-sided Hoeffding bound on the mean of a ``[0, range_width]`` variable."""
    if n < 1 or not 0.0 < delta < 1.0 or range_width <= 0:
        raise ValueError("need N >= 1, delta in (0, 1) and range_width > 0")
    band = math.sqrt(range_width**2 * math.log(1.0 / delta) / (2.0 * n))
    return min(range_width, max(0.0, sample_mean + band))


def tile_upper_bound(family, tile, point_bound):
    """Extend a bound at ``tile.sim_point`` to the whole tile."""
    query = BoundQuery(tile.sim_point, vertices(tile) - tile.sim_point, point_bound)
    return optimize_forward(family, query)


@dataclass(frozen=True, eq=False)
class ValidationReport:
    """Per-tile validation output; arrays are indexed by tile."""

    theta: np.ndarray
    n: np.ndarray
    false_rejections: np.ndarray
    cp_upper: np.ndarray
    tile_upper: np.ndarray
    q_star: np.ndarray
    delta: float
    cp_lower: np.ndarray = None
    tile_lower: np.ndarray = None

    def to_dict(self):
        out = {
            "delta": self.delta,
            "tiles": [
                {
                    "theta": self.theta[i].tolist(),
                    "N": int(self.n[i]),
                    "R": int(self.false_rejections[i]),
                    "cp_upper": float(self.cp_upper[i]),
                    "tile_upper": float(self.tile_upper[i]),
                    "q_star": _json_q(self.q_star[i]),
                }
                for i in range(len(self.n))
            ],
        }
        if self.tile_lower is not None:
            for i, row in enumerate(out["tiles"]):
                row["cp_lower"] = float(self.cp_lower[i])
                row["tile_lower"] = float(self.tile_lower[i])
        return out


def _json_q(q):
    return None if math.isinf(q) else float(q)


def report_from_counts(platten, family, counts, delta, lower=False):
    """Build the report from per-tile false-rejection counts."""
    counts = np.asarray(counts, dtype=int)
    n = np.array([t.sim_count for t in platten.tiles])
    cp = clopper_pearson_upper(counts, n, delta)
    upper = np.empty(len(n))
    q_star = np.empty(len(n))
    for i, tile in enumerate(platten.tiles):
        res = tile_upper_bound(family, tile, float(cp[i]))
        upper[i], q_star[i] = res.bound, res.q_star
    cp_lo = tile_lo = None
    if lower:
        cp_lo = clopper_pearson_lower(counts, n, delta)
        tile_lo = np.array(
            [
                optimize_lower(
                    family, BoundQuery(t.sim_point, vertices(t) - t.sim_point, float(cp_lo[i]))
                ).bound
                for i, t in enumerate(platten.tiles)
            ]
        )
    return ValidationReport(
        theta=np.array([t.sim_point for t in platten.tiles]),
        n=n,
        false_rejections=counts,
        cp_upper=np.asarray(cp),
        tile_upper=upper,
        q_star=q_star,
        delta=float(delta),
        cp_lower=cp_lo,
        tile_lower=tile_lo,
    )


class Validator(BaseEstimator):
    """Validate a design's family-wise error over a platten.

    Parameters
    ----------
    design : Design
        Evaluated at its own threshold ``design.lam`` unless ``lam`` is given.
    family : model family
    delta : float
        Each pointwise bound holds with probability at least ``1 - delta``.
    seed : int
        Master seed for the simulation streams.
    lower : bool
        Also compute tilewise lower bounds.
    threads : int or None
        Worker threads; ``None`` reads ``CSE_THREADS``. Never changes results.
    lam : float or None
        Rejection threshold override.

    Attributes
    ----------
    report_ : ValidationReport
    batches_ : list of SimBatch
    platten_ : Platten
    """

    def __init__(self, design, family, delta=0.05, seed=0, lower=False, threads=None, lam=None):
        self.design = design
        self.family = family
        self.delta = delta
        self.seed = seed
        self.lower = lower
        self.threads = threads
        self.lam = lam

    def fit(self, platten, y=None):
        if not 0.0 < self.delta < 1.0:
            raise ValueError("delta must lie in (0, 1)")
        batches = run_batches(
            self.design, self.family, platten.tiles, SeedSpec(self.seed), self.threads, self.lam
        )
        counts = [b.false_rejections(t.config) for b, t in zip(batches, platten.tiles)]
        self.report_ = report_from_counts(platten, self.family, counts, self.delta, self.lower)
        self.batches_ = batches
        self.platten_ = platten
        return self

    def predict(self, theta):
        """Flat tile upper bound at each point; the max over tiles sharing a boundary.

        Points outside every tile get ``nan``.
        """
        theta = np.atleast_2d(np.asarray(theta, dtype=float))
        if theta.shape[1] != self.platten_.dim:
            theta = theta.reshape(-1, self.platten_.dim)
        lo = np.array([t.lower for t in self.platten_.tiles])
        hi = np.array([t.upper for t in self.platten_.tiles])
        inside = np.all(
            (theta[:, None, :] >= lo[None] - 1e-12) & (theta[:, None, :] <= hi[None] + 1e-12),
            axis=2,
        )
        vals = np.where(inside, self.report_.tile_upper[None, :], -np.inf)
        out = vals.max(axis=1)
        return np.where(np.isfinite(out), out, np.nan)


def validate(platten, design, family, delta, seed_spec, lower=False, threads=None):
    """Functional form of :class:`Validator`; returns the report."""
    seed = seed_spec.master_seed if isinstance(seed_spec, SeedSpec) else int(seed_spec)
    return Validator(design, family, delta, seed, lower, threads).fit(platten).report_
