"""Sparse weighted rank-one inhomogeneous random graphs.

An edge between u and v is present independently with probability

    p_uv = min(W_u W_v / (n theta), 1).

Generation never touches all n^2 pairs: vertices are grouped into
power-of-two weight buckets, candidate pairs inside a bucket pair are drawn
by geometric skip sampling at the bucket's uniform probability bound, and
each candidate is then thinned to its exact p_uv.  The expected cost is
O(n + edges).

Everything that is not the realized edge set -- replacement indicators X',
decorative vertex/edge weights w, w' and the coupling auxiliaries -- is a
pure function of (seed, stream, site) through :mod:`sparselocal.rng`, so the
resampled graphs G^F and lazy weights on all possible edges need no storage.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import rng as srng
from .rng import SiteRandom, stream_rng
from .weights import EmpiricalWeights, WeightSpec

_GEN_TAG = 12


def edge_probability(Wu: float, Wv: float, n: int, theta: float) -> float:
    """min(Wu*Wv/(n*theta), 1); all arguments must be positive."""
    if Wu <= 0 or Wv <= 0 or n <= 0 or theta <= 0:
        raise ValueError("edge_probability requires positive arguments")
    return min(Wu * Wv / (n * theta), 1.0)


@dataclass(frozen=True)
class PerturbationSet:
    """A set of resampling sites: vertex ids and unordered vertex pairs."""

    vertices: frozenset[int] = frozenset()
    edges: frozenset[tuple[int, int]] = frozenset()

    def __post_init__(self):
        canon = set()
        for u, v in self.edges:
            if u == v:
                raise ValueError("edge sites need distinct endpoints")
            canon.add((min(u, v), max(u, v)))
        object.__setattr__(self, "edges", frozenset(canon))

    @staticmethod
    def all_sites(n: int) -> "PerturbationSet":
        pairs = [(u, v) for u in range(n) for v in range(u + 1, n)]
        return PerturbationSet(vertices=frozenset(range(n)), edges=frozenset(pairs))

    def validate(self, n: int) -> None:
        for v in self.vertices:
            if not 0 <= v < n:
                raise IndexError(f"vertex site {v} out of range")
        for u, v in self.edges:
            if not (0 <= u < n and 0 <= v < n):
                raise IndexError(f"edge site {(u, v)} out of range")


class WeightedGraph:
    """Realized sparse graph plus deterministic lazy access to all sites.

    Immutable after construction; replicate-level parallelism uses distinct
    stream ids.  ``flipped_edges``/``flipped_vertices`` record the sites of a
    perturbation G^F: flipped edge indicators are already baked into the
    adjacency, flipped weight sites transparently read the replacement
    stream.
    """

    def __init__(self, weights: EmpiricalWeights, seed: tuple[int, int], stream: int,
                 edge_u: np.ndarray, edge_v: np.ndarray,
                 mu_v: WeightSpec | None = None, mu_e: WeightSpec | None = None,
                 flipped_edges: frozenset = frozenset(),
                 flipped_vertices: frozenset = frozenset()):
        self.weights = weights
        self.n = weights.n
        self.theta = weights.theta
        self.seed = seed
        self.stream = stream
        self.mu_v = mu_v
        self.mu_e = mu_e
        self.flipped_edges = flipped_edges
        self.flipped_vertices = flipped_vertices
        self._sites = SiteRandom(seed, stream)
        order = np.argsort(edge_u * np.int64(weights.n) + edge_v, kind="stable")
        self.edge_u = np.asarray(edge_u, dtype=np.int64)[order]
        self.edge_v = np.asarray(edge_v, dtype=np.int64)[order]
        self._build_adjacency()

    def _build_adjacency(self):
        ends = np.concatenate((self.edge_u, self.edge_v))
        other = np.concatenate((self.edge_v, self.edge_u))
        order = np.lexsort((other, ends))
        counts = np.bincount(ends, minlength=self.n)
        self.indptr = np.concatenate(([0], np.cumsum(counts))).astype(np.int64)
        self.indices = other[order]

    # ---- structure ------------------------------------------------------------

    @property
    def num_edges(self) -> int:
        return int(self.edge_u.size)

    def neighbors(self, v: int) -> np.ndarray:
        return self.indices[self.indptr[v]:self.indptr[v + 1]]

    def degree(self, v: int) -> int:
        return int(self.indptr[v + 1] - self.indptr[v])

    def degrees(self) -> np.ndarray:
        return np.diff(self.indptr)

    def has_edge(self, u: int, v: int) -> bool:
        row = self.neighbors(u)
        i = np.searchsorted(row, v)
        return bool(i < row.size and row[i] == v)

    def edge_indicator(self, u: int, v: int) -> int:
        if u == v:
            return 0
        return int(self.has_edge(u, v))

    def replacement_edge_indicator(self, u, v):
        """X'_{uv} = 1{U' < p_uv}, a pure site function; vectorized."""
        u_arr = np.asarray(u, dtype=np.int64)
        v_arr = np.asarray(v, dtype=np.int64)
        uni = self._sites.edge_uniform(srng.KIND_EDGE_REPL, u_arr, v_arr)
        p = np.minimum(self.p_prime(u_arr, v_arr), 1.0)
        out = (uni < p) & (u_arr != v_arr)
        return out.astype(np.int64) if out.ndim else int(out)

    def p_prime(self, u, v):
        """Uncapped connection intensity W_u W_v / (n theta); vectorized."""
        W = self.weights.W
        return W[np.asarray(u)] * W[np.asarray(v)] / (self.n * self.theta)

    # ---- decorative weights -----------------------------------------------------

    def _needs(self, spec, what):
        if spec is None:
            raise ValueError(f"graph carries no {what} distribution")
        return spec

    def vertex_weight(self, v, replacement: bool = False):
        spec = self._needs(self.mu_v, "vertex weight")
        v_arr = np.asarray(v, dtype=np.int64)
        flag = np.where(self._flipped_vertex_mask(v_arr) ^ replacement,
                        srng.REPLACEMENT, srng.PRIMARY)
        # evaluate both streams and select: keeps vectorization simple
        u_pri = self._sites.uniform(srng.KIND_VERTEX_WEIGHT, v_arr, 0, srng.PRIMARY)
        u_rep = self._sites.uniform(srng.KIND_VERTEX_WEIGHT, v_arr, 0, srng.REPLACEMENT)
        out = spec.quantile(np.where(flag == srng.PRIMARY, u_pri, u_rep))
        return out if out.ndim else float(out)

    def edge_weight(self, u, v, replacement: bool = False):
        spec = self._needs(self.mu_e, "edge weight")
        u_arr = np.asarray(u, dtype=np.int64)
        v_arr = np.asarray(v, dtype=np.int64)
        flag = np.where(self._flipped_edge_mask(u_arr, v_arr) ^ replacement,
                        srng.REPLACEMENT, srng.PRIMARY)
        u_pri = self._sites.edge_uniform(srng.KIND_EDGE_WEIGHT, u_arr, v_arr, srng.PRIMARY)
        u_rep = self._sites.edge_uniform(srng.KIND_EDGE_WEIGHT, u_arr, v_arr, srng.REPLACEMENT)
        out = spec.quantile(np.where(flag == srng.PRIMARY, u_pri, u_rep))
        return out if out.ndim else float(out)

    def coupling_uniform(self, u, v):
        """Auxiliary site uniform for the Bernoulli/Poisson coupling."""
        return self._sites.edge_uniform(srng.KIND_COUPLING_AUX, u, v)

    def zstar_uniform(self, root: int, explored: int, u):
        """Uniform for the fresh Z* copies, keyed per (root, explored vertex)."""
        u_arr = np.asarray(u, dtype=np.uint64)
        key = (np.uint64(root) << np.uint64(32)) | np.uint64(explored)
        return self._sites.uniform(srng.KIND_ZSTAR, key, u_arr)

    def _flipped_vertex_mask(self, v_arr):
        if not self.flipped_vertices:
            return np.zeros(np.shape(v_arr), dtype=bool)
        table = np.zeros(self.n, dtype=bool)
        table[list(self.flipped_vertices)] = True
        return table[v_arr]

    def _flipped_edge_mask(self, u_arr, v_arr):
        if not self.flipped_edges:
            return np.zeros(np.broadcast(u_arr, v_arr).shape, dtype=bool)
        lo = np.minimum(u_arr, v_arr)
        hi = np.maximum(u_arr, v_arr)
        flipped = self.flipped_edges
        return np.asarray([(int(a), int(b)) in flipped for a, b in
                           zip(np.atleast_1d(lo), np.atleast_1d(hi))]
                          ).reshape(np.shape(lo))


def _bernoulli_positions(gen: np.random.Generator, total: int, p: float) -> np.ndarray:
    """Positions of successes of a Bernoulli(p) process on [0, total)."""
    if total <= 0 or p <= 0:
        return np.empty(0, dtype=np.int64)
    if p >= 1.0:
        return np.arange(total, dtype=np.int64)
    out = []
    pos = -1
    while True:
        expect = (total - pos) * p
        block = int(expect + 10.0 * np.sqrt(expect + 1.0) + 16)
        gaps = gen.geometric(p, size=block)
        positions = pos + np.cumsum(gaps)
        inside = positions < total
        out.append(positions[inside])
        if not inside.all():
            break
        pos = int(positions[-1])
    return np.concatenate(out).astype(np.int64)


def _unrank_triangle(L: np.ndarray, m: int) -> tuple[np.ndarray, np.ndarray]:
    """Map linear indices to pairs (i, j), i < j < m, in lexicographic order."""
    L = L.astype(np.float64)
    b = 2.0 * m - 1.0
    i = np.floor((b - np.sqrt(b * b - 8.0 * L)) / 2.0).astype(np.int64)
    offset = i * (2 * m - i - 1) // 2
    # float sqrt can be off by one near boundaries
    too_big = offset > L.astype(np.int64)
    i = i - too_big.astype(np.int64)
    offset = i * (2 * m - i - 1) // 2
    next_off = (i + 1) * (2 * m - i - 2) // 2
    too_small = L.astype(np.int64) >= next_off
    i = i + too_small.astype(np.int64)
    offset = i * (2 * m - i - 1) // 2
    j = L.astype(np.int64) - offset + i + 1
    return i, j


def sample_graph(weights: EmpiricalWeights, seed: tuple[int, int], stream: int = 0,
                 mu_v: WeightSpec | None = None,
                 mu_e: WeightSpec | None = None) -> WeightedGraph:
    """Realize the edge set; expected O(n + edges) work, never n^2 memory."""
    W = weights.W
    n, theta = weights.n, weights.theta
    gen = stream_rng(seed, stream, _GEN_TAG)
    if n == 1:
        return WeightedGraph(weights, seed, stream,
                             np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int64),
                             mu_v=mu_v, mu_e=mu_e)

    bucket = np.floor(np.log2(W)).astype(np.int64)
    labels = np.unique(bucket)
    members = {b: np.flatnonzero(bucket == b) for b in labels}
    wmax = {b: float(W[members[b]].max()) for b in labels}

    all_u, all_v = [], []
    for ai, a in enumerate(labels):
        ia = members[a]
        for b in labels[ai:]:
            ib = members[b]
            pmax = min(wmax[a] * wmax[b] / (n * theta), 1.0)
            if a == b:
                m = ia.size
                total = m * (m - 1) // 2
            else:
                total = ia.size * ib.size
            pos = _bernoulli_positions(gen, total, pmax)
            if pos.size == 0:
                continue
            if a == b:
                i, j = _unrank_triangle(pos, ia.size)
                cu, cv = ia[i], ia[j]
            else:
                cu = ia[pos // ib.size]
                cv = ib[pos % ib.size]
            accept = gen.random(pos.size) * pmax < np.minimum(
                W[cu] * W[cv] / (n * theta), 1.0)
            if np.any(accept):
                all_u.append(np.minimum(cu[accept], cv[accept]))
                all_v.append(np.maximum(cu[accept], cv[accept]))

    if all_u:
        edge_u = np.concatenate(all_u)
        edge_v = np.concatenate(all_v)
    else:
        edge_u = np.empty(0, dtype=np.int64)
        edge_v = np.empty(0, dtype=np.int64)
    return WeightedGraph(weights, seed, stream, edge_u, edge_v, mu_v=mu_v, mu_e=mu_e)


def perturb(graph: WeightedGraph, sites: PerturbationSet) -> WeightedGraph:
    """The resampled graph G^F: X_e -> X'_e and w_z -> w'_z exactly on F.

    Deterministic given (seed, stream): the replacement values come from the
    replacement site stream, so G^emptyset is G site-by-site and the full
    flip is an independent copy.  Perturbations always start from the base
    graph, matching how G^F is defined.
    """
    if graph.flipped_edges or graph.flipped_vertices:
        raise ValueError("perturb must be applied to the base graph")
    sites.validate(graph.n)
    keep = [(int(u), int(v)) for u, v in zip(graph.edge_u, graph.edge_v)
            if (int(u), int(v)) not in sites.edges]
    added = []
    for u, v in sorted(sites.edges):
        if graph.replacement_edge_indicator(u, v):
            added.append((u, v))
    edges = keep + added
    if edges:
        edge_u = np.asarray([e[0] for e in edges], dtype=np.int64)
        edge_v = np.asarray([e[1] for e in edges], dtype=np.int64)
    else:
        edge_u = np.empty(0, dtype=np.int64)
        edge_v = np.empty(0, dtype=np.int64)
    return WeightedGraph(graph.weights, graph.seed, graph.stream, edge_u, edge_v,
                         mu_v=graph.mu_v, mu_e=graph.mu_e,
                         flipped_edges=frozenset(sites.edges),
                         flipped_vertices=frozenset(sites.vertices))
