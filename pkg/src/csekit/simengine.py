"""Deterministic simulation of designs over tiles.

Simulation ``k`` of every tile uses the stream ``(master_seed, k)``, so tiles
share randomness (common random numbers) while each tile's simulations stay
i.i.d. Work is split into fixed-size chunks of simulation indices; each
chunk's results land in their own slot, so thread count never changes output.
"""

import os
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .designs import fwer_statistic
from .rng import SeedSpec

__all__ = ["SimBatch", "run_batch", "run_batches", "resolve_threads", "CHUNK_SIZE"]

CHUNK_SIZE = 1 << 14
_MAGIC = b"CSEB"
_HEADER = struct.Struct("<4sIQQQ")


@dataclass(frozen=True, eq=False)
class SimBatch:
    """Per-tile simulation output.

    ``stats`` are the family-wise statistics sorted ascending.
    ``rejections`` holds per-hypothesis rejection bits at ``lam`` in
    simulation order.
    """

    tile_id: int
    stats: np.ndarray
    rejections: np.ndarray
    lam: float
    seed: int

    @property
    def n(self):
        return self.stats.shape[0]

    def false_rejections(self, config):
        """Simulations rejecting at least one true null of ``config``."""
        rej = self.rejections
        if len(config):
            rej = rej[:, np.asarray(config, dtype=bool)]
        return int(np.count_nonzero(rej.any(axis=1)))

    def dump(self, path):
        """Write ``stats`` as little-endian doubles behind a fixed header."""
        with open(path, "wb") as fh:
            fh.write(_HEADER.pack(_MAGIC, 1, self.tile_id, self.n, self.seed))
            fh.write(self.stats.astype("<f8").tobytes())

    @staticmethod
    def load_stats(path):
        """Read back ``(tile_id, seed, stats)`` from :meth:`dump` output."""
        with open(path, "rb") as fh:
            magic, _, tile_id, n, seed = _HEADER.unpack(fh.read(_HEADER.size))
            if magic != _MAGIC:
                raise ValueError(f"{path} is not a SimBatch dump")
            stats = np.frombuffer(fh.read(8 * n), dtype="<f8")
        return tile_id, seed, stats


class _SharedStream:
    """Memoizes draws of one stream block so every tile in a chunk reuses them."""

    def __init__(self, stream):
        self._stream = stream
        self._cache = {}

    def uniforms(self, n_draws, offset=0):
        key = ("u", n_draws, offset)
        if key not in self._cache:
            self._cache[key] = self._stream.uniforms(n_draws, offset)
        return self._cache[key]

    def normals(self, n_draws, offset=0):
        key = ("z", n_draws, offset)
        if key not in self._cache:
            self._cache[key] = self._stream.normals(n_draws, offset)
        return self._cache[key]


class _RowSlice:
    def __init__(self, shared, rows):
        self._shared = shared
        self._rows = rows

    def uniforms(self, n_draws, offset=0):
        return self._shared.uniforms(n_draws, offset)[: self._rows]

    def normals(self, n_draws, offset=0):
        return self._shared.normals(n_draws, offset)[: self._rows]


def resolve_threads(threads=None):
    if threads is None:
        threads = int(os.environ.get("CSE_THREADS", "1"))
    return max(1, int(threads))


def _simulate_chunk(design, family, tiles, seed_spec, start, stop, lam):
    shared = _SharedStream(seed_spec.stream(np.arange(start, stop, dtype=np.uint64)))
    out = []
    for tile in tiles:
        rows = min(tile.sim_count, stop) - start
        if rows <= 0:
            out.append(None)
            continue
        outcomes = family.sample(tile.sim_point, _RowSlice(shared, rows))
        per_hyp = design.tile_hypothesis_statistics(outcomes, tile)
        stats = fwer_statistic(per_hyp, tile.config)
        out.append((stats, per_hyp < lam))
    return out


def run_batches(design, family, tiles, seed_spec, threads=None, lam=None, chunk_size=CHUNK_SIZE):
    """Simulate every tile; returns one :class:`SimBatch` per tile, in order."""
    design.check_family(family)
    if not isinstance(seed_spec, SeedSpec):
        seed_spec = SeedSpec(int(seed_spec))
    tiles = list(tiles)
    lam = design.lam if lam is None else float(lam)
    if not tiles:
        return []
    n_max = max(t.sim_count for t in tiles)
    bounds = [(s, min(s + chunk_size, n_max)) for s in range(0, n_max, chunk_size)]

    def work(b):
        return _simulate_chunk(design, family, tiles, seed_spec, b[0], b[1], lam)

    threads = resolve_threads(threads)
    if threads == 1 or len(bounds) == 1:
        chunks = [work(b) for b in bounds]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            chunks = list(pool.map(work, bounds))

    batches = []
    for i, tile in enumerate(tiles):
        parts = [c[i] for c in chunks if c[i] is not None]
        stats = np.concatenate([p[0] for p in parts])
        rejections = np.concatenate([p[1] for p in parts])
        # tied statistics are equal values, so any sort yields the same array
        batches.append(SimBatch(i, np.sort(stats), rejections, lam, seed_spec.master_seed))
    return batches


def run_batch(design, family, tile, seed_spec, threads=None, lam=None, tile_id=0):
    """Simulate a single tile."""
    batch = run_batches(design, family, [tile], seed_spec, threads, lam)[0]
    return SimBatch(tile_id, batch.stats, batch.rejections, batch.lam, batch.seed)
