"""Hyperrectangular tilings ("plattens") of a bounded null region.

Tiles are axis-aligned boxes whose interiors each lie in a single null
configuration: the bit-vector of which axis-aligned null hypotheses hold.
"""

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "NullHypothesis",
    "Tile",
    "Platten",
    "assign_config",
    "vertices",
    "build_platten",
    "split_on_hypotheses",
    "refine",
    "MAX_VERTEX_DIM",
]

MAX_VERTEX_DIM = 20


@dataclass(frozen=True)
class NullHypothesis:
    """``theta[axis] <= threshold`` (direction ``"<="``) or ``>=``."""

    axis: int
    threshold: float
    direction: str = "<="

    def __post_init__(self):
        if self.direction not in ("<=", ">="):
            raise ValueError(f"direction must be '<=' or '>=', got {self.direction!r}")
        if int(self.axis) < 0:
            raise ValueError("axis must be non-negative")

    def to_dict(self):
        return {"axis": self.axis, "threshold": self.threshold, "direction": self.direction}


@dataclass(frozen=True, eq=False)
class Tile:
    center: np.ndarray
    half_widths: np.ndarray
    config: tuple
    sim_point: np.ndarray = None
    sim_count: int = 1

    def __post_init__(self):
        center = np.atleast_1d(np.asarray(self.center, dtype=float))
        half = np.atleast_1d(np.asarray(self.half_widths, dtype=float))
        if center.shape != half.shape:
            raise ValueError("center and half_widths must have the same shape")
        if np.any(half < 0) or not np.all(np.isfinite(half)):
            raise ValueError("half_widths must be finite and non-negative")
        sim = center if self.sim_point is None else np.atleast_1d(np.asarray(self.sim_point, dtype=float))
        if sim.shape != center.shape or not np.all(np.isfinite(sim)):
            raise ValueError("sim_point must be a finite point of the tile's dimension")
        if int(self.sim_count) < 1:
            raise ValueError("sim_count must be a positive integer")
        for arr in (center, half, sim):
            arr.setflags(write=False)
        object.__setattr__(self, "center", center)
        object.__setattr__(self, "half_widths", half)
        object.__setattr__(self, "sim_point", sim)
        object.__setattr__(self, "config", tuple(bool(b) for b in self.config))
        object.__setattr__(self, "sim_count", int(self.sim_count))

    @property
    def dim(self):
        return self.center.shape[0]

    @property
    def lower(self):
        return self.center - self.half_widths

    @property
    def upper(self):
        return self.center + self.half_widths

    @property
    def volume(self):
        return float(np.prod(2.0 * self.half_widths))

    def contains(self, theta, atol=1e-12):
        theta = np.asarray(theta, dtype=float)
        return bool(np.all(np.abs(theta - self.center) <= self.half_widths + atol))

    def replace(self, **changes):
        fields = dict(
            center=self.center,
            half_widths=self.half_widths,
            config=self.config,
            sim_point=self.sim_point,
            sim_count=self.sim_count,
        )
        fields.update(changes)
        return Tile(**fields)

    def to_dict(self):
        return {
            "center": self.center.tolist(),
            "half_widths": self.half_widths.tolist(),
            "config": [int(b) for b in self.config],
            "sim_point": self.sim_point.tolist(),
            "sim_count": self.sim_count,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            center=d["center"],
            half_widths=d["half_widths"],
            config=tuple(bool(b) for b in d["config"]),
            sim_point=d.get("sim_point"),
            sim_count=d.get("sim_count", 1),
        )


@dataclass(frozen=True, eq=False)
class Platten:
    tiles: tuple
    hypotheses: tuple = ()
    lower: np.ndarray = None
    upper: np.ndarray = None

    def __post_init__(self):
        object.__setattr__(self, "tiles", tuple(self.tiles))
        object.__setattr__(self, "hypotheses", tuple(self.hypotheses))
        if self.lower is None and self.tiles:
            lows = np.min([t.lower for t in self.tiles], axis=0)
            highs = np.max([t.upper for t in self.tiles], axis=0)
            object.__setattr__(self, "lower", lows)
            object.__setattr__(self, "upper", highs)
        else:
            object.__setattr__(self, "lower", np.asarray(self.lower, dtype=float))
            object.__setattr__(self, "upper", np.asarray(self.upper, dtype=float))

    def __len__(self):
        return len(self.tiles)

    def __iter__(self):
        return iter(self.tiles)

    @property
    def dim(self):
        return self.lower.shape[0]

    @property
    def total_sims(self):
        return sum(t.sim_count for t in self.tiles)

    def containing(self, theta):
        """Indices of the (closed) tiles that contain ``theta``."""
        return [i for i, t in enumerate(self.tiles) if t.contains(theta)]

    def with_sim_count(self, n):
        return Platten(
            [t.replace(sim_count=n) for t in self.tiles], self.hypotheses, self.lower, self.upper
        )

    def to_dict(self):
        return {
            "bounds": {"lower": self.lower.tolist(), "upper": self.upper.tolist()},
            "hypotheses": [h.to_dict() for h in self.hypotheses],
            "tiles": [t.to_dict() for t in self.tiles],
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            tiles=[Tile.from_dict(t) for t in d["tiles"]],
            hypotheses=[NullHypothesis(**h) for h in d.get("hypotheses", [])],
            lower=d["bounds"]["lower"],
            upper=d["bounds"]["upper"],
        )


def _straddles(lo, hi, h):
    return lo[h.axis] < h.threshold < hi[h.axis]


def assign_config(lower, upper, hypotheses):
    """Null configuration of the box ``[lower, upper]``.

    Bit ``j`` is set when the box interior satisfies hypothesis ``j``. Raises
    ``ValueError`` if the box straddles a threshold.
    """
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    bits = []
    for h in hypotheses:
        if _straddles(lower, upper, h):
            raise ValueError(f"tile straddles hypothesis {h}; split it first")
        if h.direction == "<=":
            bits.append(bool(upper[h.axis] <= h.threshold))
        else:
            bits.append(bool(lower[h.axis] >= h.threshold))
    return tuple(bits)


def vertices(tile):
    """The ``2**d`` corners, ordered lexicographically over sign bits (``-`` first)."""
    d = tile.dim
    if d > MAX_VERTEX_DIM:
        raise ValueError(f"vertex enumeration is limited to d <= {MAX_VERTEX_DIM}")
    signs = np.array(list(itertools.product((-1.0, 1.0), repeat=d)))
    return tile.center + signs * tile.half_widths


def _box_tile(lo, hi, config, sim_count):
    return Tile((lo + hi) / 2.0, (hi - lo) / 2.0, config, None, sim_count)


def split_on_hypotheses(tile, hypotheses):
    """Cut a tile at every hypothesis threshold crossing its interior.

    Children are re-centered (their sim point is their own center) and get a
    fresh configuration. A tile that straddles nothing is returned unchanged
    apart from its configuration.
    """
    boxes = [(tile.lower.copy(), tile.upper.copy())]
    for h in hypotheses:
        nxt = []
        for lo, hi in boxes:
            if _straddles(lo, hi, h):
                left_hi = hi.copy()
                left_hi[h.axis] = h.threshold
                right_lo = lo.copy()
                right_lo[h.axis] = h.threshold
                nxt += [(lo, left_hi), (right_lo, hi)]
            else:
                nxt.append((lo, hi))
        boxes = nxt
    if len(boxes) == 1:
        return [tile.replace(config=assign_config(tile.lower, tile.upper, hypotheses))]
    return [
        _box_tile(lo, hi, assign_config(lo, hi, hypotheses), tile.sim_count) for lo, hi in boxes
    ]


def _keep(tile, hypotheses):
    return not hypotheses or any(tile.config)


def build_platten(lower, upper, counts, hypotheses=(), sim_count=1):
    """Uniform grid over ``[lower, upper]`` clipped to the null region.

    Cells straddling a hypothesis threshold are split there; cells lying
    entirely in the alternative are dropped. With no hypotheses every cell is
    kept and carries an empty configuration (the whole box is the null).
    """
    lower = np.atleast_1d(np.asarray(lower, dtype=float))
    upper = np.atleast_1d(np.asarray(upper, dtype=float))
    counts = np.broadcast_to(np.atleast_1d(np.asarray(counts, dtype=int)), lower.shape)
    if lower.shape != upper.shape or np.any(upper <= lower):
        raise ValueError("bounds must be non-degenerate boxes")
    if np.any(counts < 1):
        raise ValueError("per-axis counts must be >= 1")
    hypotheses = tuple(hypotheses)
    for h in hypotheses:
        if h.axis >= lower.shape[0]:
            raise ValueError(f"hypothesis axis {h.axis} out of range for d={lower.shape[0]}")
    edges = [np.linspace(lo, hi, n + 1) for lo, hi, n in zip(lower, upper, counts)]
    tiles = []
    for cell in itertools.product(*(range(n) for n in counts)):
        lo = np.array([e[i] for e, i in zip(edges, cell)])
        hi = np.array([e[i + 1] for e, i in zip(edges, cell)])
        base = Tile((lo + hi) / 2.0, (hi - lo) / 2.0, (), None, sim_count)
        tiles += [t for t in split_on_hypotheses(base, hypotheses) if _keep(t, hypotheses)]
    return Platten(tiles, hypotheses, lower, upper)


def refine(platten, scores, budget, sim_growth=1.0):
    """Bisect the ``budget`` highest-scoring tiles along their widest axis.

    Ties in score go to the lower tile index; ties in width to the lower axis.
    Children take ``ceil(parent.sim_count * sim_growth)`` simulations and are
    placed where their parent was, so the tile order stays deterministic.
    """
    scores = np.asarray(scores, dtype=float)
    if scores.shape != (len(platten),):
        raise ValueError("scores must align with the platten's tiles")
    budget = max(0, min(int(budget), len(platten)))
    order = np.argsort(-scores, kind="stable")
    chosen = set(order[:budget].tolist())
    out = []
    for i, tile in enumerate(platten.tiles):
        if i not in chosen or not np.any(tile.half_widths > 0):
            out.append(tile)
            continue
        axis = int(np.argmax(tile.half_widths))
        n = int(math.ceil(tile.sim_count * sim_growth))
        mid = tile.center[axis]
        for lo_edge, hi_edge in ((tile.lower[axis], mid), (mid, tile.upper[axis])):
            lo, hi = tile.lower.copy(), tile.upper.copy()
            lo[axis], hi[axis] = lo_edge, hi_edge
            child = Tile((lo + hi) / 2.0, (hi - lo) / 2.0, tile.config, None, n)
            out += [
                t
                for t in split_on_hypotheses(child, platten.hypotheses)
                if _keep(t, platten.hypotheses)
            ]
    return Platten(out, platten.hypotheses, platten.lower, platten.upper)
