"""Counter-based randomness keyed by (seed, stream, site).

Every random quantity attached to a *site* of the graph (an edge slot, a
vertex slot, a replacement copy, a coupling auxiliary) is derived by hashing
the 128-bit base seed, the replicate stream id and a canonical site key
through a splitmix64-style mixer.  Re-querying a site therefore always
returns the same value, which is what makes lazy "weights on all possible
edges" and the resampled graphs G^F work without quadratic storage.

Sequential randomness (bulk graph generation, tree sampling, experiment
drivers) uses numpy Generators seeded from the same key material via
``SeedSequence`` so that replicas are independent and reproducible.
"""

from __future__ import annotations

import numpy as np

# site kinds (the "purpose" word of a site key)
KIND_EDGE_REPL = 1      # replacement edge indicator X'_e
KIND_EDGE_WEIGHT = 2    # edge weight w_e
KIND_VERTEX_WEIGHT = 3  # vertex weight w_v
KIND_COUPLING_AUX = 4   # conditional uniform for the Bernoulli/Poisson coupling
KIND_ZSTAR = 5          # fresh Poisson copies Z* used during joint exploration

PRIMARY = 0
REPLACEMENT = 1

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_U64 = np.uint64


def _mix(h):
    """splitmix64 finalizer; h is uint64 scalar or array (wrapping is intended)."""
    with np.errstate(over="ignore"):
        h = (h ^ (h >> _U64(30))) * _MIX1
        h = (h ^ (h >> _U64(27))) * _MIX2
        return h ^ (h >> _U64(31))


def _absorb(h, word):
    with np.errstate(over="ignore"):
        return _mix((h + _GOLDEN) ^ np.asarray(word, dtype=np.uint64))


class SiteRandom:
    """Pure-function uniforms for the sites of one (seed, stream) replicate."""

    def __init__(self, seed: tuple[int, int], stream: int):
        self.seed = (int(seed[0]) & 0xFFFFFFFFFFFFFFFF,
                     int(seed[1]) & 0xFFFFFFFFFFFFFFFF)
        self.stream = int(stream)
        h = _absorb(np.uint64(self.seed[0]), self.seed[1])
        self._base = _absorb(h, self.stream)

    def _hash_words(self, kind, a, b, flag):
        h = _absorb(self._base, kind)
        h = _absorb(h, a)
        h = _absorb(h, b)
        return _absorb(h, flag)

    def uniform(self, kind: int, a, b=0, flag: int = PRIMARY):
        """Uniform(0,1) for site (kind, a, b, flag); vectorizes over a or b.

        Unordered pair sites must be canonicalized (a <= b) by the caller.
        The value is strictly inside (0,1) so it can feed quantile functions.
        """
        h = self._hash_words(kind, a, b, flag)
        return (np.asarray(h >> np.uint64(11), dtype=np.float64) + 0.5) * 2.0 ** -53

    def edge_uniform(self, kind: int, u, v, flag: int = PRIMARY):
        """Uniform for an unordered pair site; orders the endpoints itself."""
        u = np.asarray(u, dtype=np.uint64)
        v = np.asarray(v, dtype=np.uint64)
        return self.uniform(kind, np.minimum(u, v), np.maximum(u, v), flag)


def parse_seed(text: str) -> tuple[int, int]:
    """Parse a 128-bit hex seed into (lo, hi) words. Short hex is allowed."""
    value = int(text, 16)
    if value < 0 or value >= 1 << 128:
        raise ValueError("seed must be a non-negative 128-bit hex value")
    return value & 0xFFFFFFFFFFFFFFFF, value >> 64


def format_seed(seed: tuple[int, int]) -> str:
    return f"{(seed[1] << 64) | seed[0]:032x}"


def stream_rng(seed: tuple[int, int], stream: int, *tags: int) -> np.random.Generator:
    """Sequential generator for (seed, stream) and a purpose tag tuple."""
    entropy = [seed[0], seed[1], stream & 0xFFFFFFFFFFFFFFFF, *[t & 0xFFFFFFFFFFFFFFFF for t in tags]]
    return np.random.default_rng(np.random.SeedSequence(entropy))
