"""The two concrete graph functionals: dependent edge-weight sums and
maximum weight matching.

The edge-weight sum N(G) adds, over realized edges, the decorative weights
of the two endpoints; its perturbation effects have exact closed forms.

Maximum weight matching is solved exactly: on trees by the linear-time
bottom-up recursion, on general graphs at desk scale (<= 24 vertices) by a
memoized branch-and-bound over the remove-or-match recursion

    M(G) = max( M(G - v), max_u w_{vu} + M(G - {v, u}) ).

The finite-depth recursion h_k on a rooted tree brackets the matching
increment h(G, v) = M(G) - M(G - v) between consecutive even and odd
depths, which is what the sandwich evaluator returns.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .explore import Neighbourhood, is_tree, to_rooted_tree
from .graph import WeightedGraph
from .trees import RootedWeightedTree

EXACT_SOLVER_LIMIT = 24


@dataclass
class Matching:
    """A witness matching: vertex-disjoint edges and their total weight."""

    edges: list[tuple[int, int]]
    value: float

    def __post_init__(self):
        used = set()
        for u, v in self.edges:
            if u in used or v in used or u == v:
                raise ValueError("matching edges must be vertex-disjoint")
            used.update((u, v))


@dataclass
class SandwichResult:
    gL: float
    gU: float
    kL: int
    kU: int

    def __post_init__(self):
        if self.gL > self.gU + 1e-12:
            raise ValueError("sandwich is inverted")


# ---- exact solver on small general graphs -------------------------------------------


class _ExactMatcher:
    """Memoized branch-and-bound over vertex bitmasks (n <= 24)."""

    def __init__(self, n: int, edges: list[tuple[int, int, float]]):
        if n > EXACT_SOLVER_LIMIT:
            raise ValueError(f"exact matching limited to {EXACT_SOLVER_LIMIT} vertices")
        self.n = n
        self.adj: list[list[tuple[int, float]]] = [[] for _ in range(n)]
        seen = set()
        for u, v, w in edges:
            if u == v:
                raise ValueError("self loops are not allowed")
            if w < 0:
                raise ValueError("matching requires nonnegative edge weights")
            key = (min(u, v), max(u, v))
            if key in seen:
                raise ValueError("duplicate edge")
            seen.add(key)
            self.adj[u].append((v, float(w)))
            self.adj[v].append((u, float(w)))
        self._memo: dict[int, float] = {}

    def value(self, mask: int) -> float:
        memo = self._memo
        cached = memo.get(mask)
        if cached is not None:
            return cached
        if mask == 0:
            return 0.0
        v = (mask & -mask).bit_length() - 1
        best = self.value(mask & ~(1 << v))  # leave v unmatched
        for u, w in self.adj[v]:
            if mask >> u & 1:
                cand = w + self.value(mask & ~(1 << v) & ~(1 << u))
                if cand > best:
                    best = cand
        memo[mask] = best
        return best

    def witness(self, mask: int) -> list[tuple[int, int]]:
        out = []
        while mask:
            v = (mask & -mask).bit_length() - 1
            rest = mask & ~(1 << v)
            best = self.value(rest)
            pick = None
            for u, w in self.adj[v]:
                if mask >> u & 1:
                    cand = w + self.value(rest & ~(1 << u))
                    if cand > best + 1e-12:
                        best = cand
                        pick = u
            if pick is None:
                mask = rest
            else:
                out.append((min(v, pick), max(v, pick)))
                mask = rest & ~(1 << pick)
        return out


def matching_value(n: int, edges: list[tuple[int, int, float]],
                   exclude: frozenset[int] = frozenset()) -> float:
    """M(G - exclude) for an explicit edge list; exact."""
    solver = _ExactMatcher(n, edges)
    mask = 0
    for v in range(n):
        if v not in exclude:
            mask |= 1 << v
    return solver.value(mask)


def max_weight_matching(obj, edges: list[tuple[int, int, float]] | None = None) -> Matching:
    """Exact maximum weight matching.

    Accepts a RootedWeightedTree (linear-time recursion), a WeightedGraph
    with an edge-weight law (desk-scale exact search), or an explicit
    (n, edges) pair.  Sizes beyond the exact-solver limit raise; there is no
    heuristic fallback.
    """
    if isinstance(obj, RootedWeightedTree):
        value, matched = _tree_matching(obj)
        return Matching(edges=matched, value=value)
    if isinstance(obj, WeightedGraph):
        edge_list = [(int(u), int(v), float(obj.edge_weight(int(u), int(v))))
                     for u, v in zip(obj.edge_u, obj.edge_v)]
        solver = _ExactMatcher(obj.n, edge_list)
        full = (1 << obj.n) - 1
        return Matching(edges=solver.witness(full), value=solver.value(full))
    n = int(obj)
    solver = _ExactMatcher(n, edges or [])
    full = (1 << n) - 1
    return Matching(edges=solver.witness(full), value=solver.value(full))


def _tree_matching(tree: RootedWeightedTree) -> tuple[float, list[tuple[int, int]]]:
    """Bottom-up: M(T_u) = sum_c M(T_c) + max(0, max_c (w_c - h_c))."""
    n = tree.node_count
    h = np.zeros(n)
    m = np.zeros(n)
    pick: list[int | None] = [None] * n
    for node in range(n - 1, -1, -1):
        best, arg, total = 0.0, None, 0.0
        for c in tree.children[node]:
            total += m[c]
            gain = tree.edge_w[c] - h[c]
            if gain > best:
                best, arg = gain, c
        h[node] = best
        m[node] = total + best
        pick[node] = arg
    # reconstruct a witness top-down: a free node takes its best child edge
    matched: list[tuple[int, int]] = []
    used = np.zeros(n, dtype=bool)
    for node in range(n):  # parents precede children
        c = pick[node]
        if c is not None and h[node] > 0 and not used[node]:
            matched.append((node, c))
            used[node] = used[c] = True
    return float(m[0]), matched


def h_value(obj, v: int, edges: list[tuple[int, int, float]] | None = None) -> float:
    """h(G, v) = M(G) - M(G - v); nonnegative.

    Accepts a WeightedGraph with an edge-weight law or an explicit
    (n, edges) pair.
    """
    if isinstance(obj, WeightedGraph):
        n = obj.n
        edges = [(int(a), int(b), float(obj.edge_weight(int(a), int(b))))
                 for a, b in zip(obj.edge_u, obj.edge_v)]
    else:
        n = int(obj)
        edges = edges or []
    solver = _ExactMatcher(n, edges)
    full = (1 << n) - 1
    return solver.value(full) - solver.value(full & ~(1 << v))


def h_k(tree: RootedWeightedTree, k: int) -> float:
    """Finite-depth matching recursion at the root of the depth-k cut.

    Nodes at depth k (and genuine leaves) start at zero; each internal node
    takes max(0, max over children of edge weight minus the child's value).
    """
    t = tree.truncate(min(k, tree.depth))
    h = np.zeros(t.node_count)
    for node in range(t.node_count - 1, -1, -1):
        best = 0.0
        for c in t.children[node]:
            best = max(best, t.edge_w[c] - h[c])
        h[node] = best
    return float(h[0])


def matching_sandwich(nb: Neighbourhood, k: int, graph: WeightedGraph) -> SandwichResult:
    """h_{kL} and h_{kU} on the ball, kU the largest odd <= k, kL = kU - 1.

    For tree-shaped balls these bracket the matching increment of the root:
    even depths from below, odd depths from above.
    """
    if k < 1:
        raise ValueError("sandwich needs k >= 1")
    if not is_tree(nb):
        raise ValueError("sandwich requires a tree-shaped neighbourhood")
    kU = k if k % 2 == 1 else k - 1
    kL = kU - 1
    tree = to_rooted_tree(nb, graph.weights, edge_weight=graph.edge_weight)
    return SandwichResult(gL=h_k(tree, kL), gU=h_k(tree, kU), kL=kL, kU=kU)


# ---- dependent edge-weight sum -------------------------------------------------------


def dependent_edge_sum(graph: WeightedGraph) -> float:
    """N(G): sum over realized edges of the endpoint vertex weights."""
    if graph.mu_v is None:
        raise ValueError("dependent edge sum needs vertex weights")
    if graph.num_edges == 0:
        return 0.0
    wu = graph.vertex_weight(graph.edge_u)
    wv = graph.vertex_weight(graph.edge_v)
    return float(np.sum(wu) + np.sum(wv))


def dependent_edge_sum_by_degree(graph: WeightedGraph) -> float:
    """The same sum written as sum_v deg(v) w_v."""
    if graph.mu_v is None:
        raise ValueError("dependent edge sum needs vertex weights")
    deg = graph.degrees()
    live = np.flatnonzero(deg)
    if live.size == 0:
        return 0.0
    return float(np.sum(deg[live] * graph.vertex_weight(live)))


def delta_N(graph: WeightedGraph, site) -> float:
    """Closed-form change of N when one site is resampled.

    site is ("edge", (u, v)) or ("vertex", v):
      edge:   (w_v + w_u) (X_e - X'_e)
      vertex: |D_1(v)| (w_v - w'_v)
    """
    kind, where = site
    if kind == "edge":
        u, v = where
        x = graph.edge_indicator(u, v)
        x_new = graph.replacement_edge_indicator(u, v)
        return float((graph.vertex_weight(u) + graph.vertex_weight(v)) * (x - x_new))
    if kind == "vertex":
        v = where
        return float(graph.degree(v)
                     * (graph.vertex_weight(v) - graph.vertex_weight(v, replacement=True)))
    raise ValueError(f"unknown site kind {kind!r}")


# ---- envelope functions (the simple perturbation bounds) -----------------------------


def envelope_bound(application: str, graph: WeightedGraph, site) -> float:
    """The closed-form dominating envelope for |Delta_site f|.

    matching:  edge sites are bounded by 1{max(X, X') = 1} max(w_e, w'_e);
               vertex sites do not enter (no vertex weights).
    edge-sum:  edge sites by 1{max(X, X') = 1}(w_v + w_u), vertex sites by
               |D_1(v)| (w_v + w'_v).
    """
    kind, where = site
    if application == "matching":
        if kind == "vertex":
            return 0.0
        u, v = where
        present = max(graph.edge_indicator(u, v), graph.replacement_edge_indicator(u, v))
        return float(present * max(graph.edge_weight(u, v),
                                   graph.edge_weight(u, v, replacement=True)))
    if application == "edge-sum":
        if kind == "edge":
            u, v = where
            present = max(graph.edge_indicator(u, v), graph.replacement_edge_indicator(u, v))
            return float(present * (graph.vertex_weight(u) + graph.vertex_weight(v)))
        v = where
        return float(graph.degree(v)
                     * (graph.vertex_weight(v) + graph.vertex_weight(v, replacement=True)))
    raise ValueError(f"unknown application {application!r}")
