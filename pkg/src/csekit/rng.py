"""Counter-based random streams.

Every uniform is a pure function of ``(seed, sim_index, draw_index, domain)``
computed with Philox4x32-10, so any worker can regenerate any draw without
coordination and results never depend on scheduling.
"""

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

__all__ = ["philox4x32", "SeedSpec", "RandomStream", "SIM_DOMAIN", "BOOTSTRAP_DOMAIN"]

_M0 = np.uint64(0xD2511F53)
_M1 = np.uint64(0xCD9E8D57)
_W0 = np.uint64(0x9E3779B9)
_W1 = np.uint64(0xBB67AE85)
_MASK32 = np.uint64(0xFFFFFFFF)
_SHIFT32 = np.uint64(32)

SIM_DOMAIN = 0
BOOTSTRAP_DOMAIN = 1


def philox4x32(counter, key, rounds=10):
    """Philox4x32 block function, vectorized over leading axes.

    Parameters
    ----------
    counter : array_like of shape (..., 4)
        32-bit counter words.
    key : array_like of shape (..., 2)
        32-bit key words; broadcast against ``counter``.
    rounds : int
        Number of rounds (10 is the standard variant).

    Returns
    -------
    ndarray of uint32, shape (..., 4)
    """
    counter = np.asarray(counter, dtype=np.uint64) & _MASK32
    key = np.asarray(key, dtype=np.uint64) & _MASK32
    c0, c1, c2, c3 = (counter[..., i] for i in range(4))
    k0, k1 = key[..., 0], key[..., 1]
    for r in range(rounds):
        if r:
            k0 = (k0 + _W0) & _MASK32
            k1 = (k1 + _W1) & _MASK32
        p0 = _M0 * c0
        p1 = _M1 * c2
        hi0, lo0 = p0 >> _SHIFT32, p0 & _MASK32
        hi1, lo1 = p1 >> _SHIFT32, p1 & _MASK32
        c0, c1, c2, c3 = hi1 ^ c1 ^ k0, lo1, hi0 ^ c3 ^ k1, lo0
    return np.stack(np.broadcast_arrays(c0, c1, c2, c3), axis=-1).astype(np.uint32)


@dataclass(frozen=True)
class SeedSpec:
    """Master seed from which every simulation stream is derived."""

    master_seed: int

    def __post_init__(self):
        if not 0 <= int(self.master_seed) < 2**64:
            raise ValueError("master_seed must fit in an unsigned 64-bit integer")

    def stream(self, indices, domain=SIM_DOMAIN):
        return RandomStream(self.master_seed, indices, domain)


class RandomStream:
    """Streams for a block of simulation indices.

    The stream of simulation ``k`` is identical whichever block, tile or worker
    asks for it. Draw ``j`` of simulation ``k`` is the uniform built from the
    first two output words of Philox at counter ``(k_lo, k_hi, j, domain)``
    keyed by the 64-bit seed.
    """

    def __init__(self, seed, indices, domain=SIM_DOMAIN):
        self.seed = int(seed)
        self.indices = np.atleast_1d(np.asarray(indices, dtype=np.uint64))
        self.domain = int(domain)

    def __len__(self):
        return self.indices.shape[0]

    def uniforms(self, n_draws, offset=0):
        """Open-interval uniforms of shape ``(len(self), n_draws)``."""
        k = self.indices[:, None]
        j = np.arange(offset, offset + n_draws, dtype=np.uint64)[None, :]
        k, j = np.broadcast_arrays(k, j)
        counter = np.stack(
            [k & _MASK32, k >> _SHIFT32, j, np.full(k.shape, self.domain, np.uint64)],
            axis=-1,
        )
        seed = np.uint64(self.seed)
        key = np.array([seed & _MASK32, seed >> _SHIFT32], dtype=np.uint64)
        words = philox4x32(counter, key).astype(np.uint64)
        bits = ((words[..., 0] << _SHIFT32) | words[..., 1]) >> np.uint64(11)
        return (bits.astype(np.float64) + 0.5) * 2.0**-53

    def normals(self, n_draws, offset=0):
        """Standard normals by inversion, so draw ``j`` maps one-to-one to a uniform."""
        return ndtri(self.uniforms(n_draws, offset))
