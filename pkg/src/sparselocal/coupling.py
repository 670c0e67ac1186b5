"""Explicit couplings between graph neighbourhoods and limiting trees.

The pipeline has three stages with per-stage break accounting:

1. joint exploration: the ball around a root is explored while the
   intermediate tree is emitted from Bernoulli/Poisson-coupled edge sites;
   the coupling breaks at the first level where a coupled pair disagrees,
   a Poisson child points back into the active set, a fresh Poisson copy
   points into the completed set, or the explored connectivity weight
   exceeds the size threshold k_n;
2. independence repair across roots: a joint breadth-first pass replaces
   repeated vertex types by fresh subtrees so the trees are independent;
3. redraw to the limit: per node, the empirical type is coupled to the
   limiting size-biased law through a shared uniform (the Wasserstein
   optimal coupling) and child counts through maximally coupled Poissons.

Every stage preserves the marginal laws on both sides even when it breaks:
after a break the tree simply keeps growing from fresh randomness, so pooled
tree statistics stay exactly distributed as direct sampling.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from collections import deque

import numpy as np

from .explore import Neighbourhood
from .graph import WeightedGraph
from .rng import stream_rng
from .trees import RootedWeightedTree
from .weights import EmpiricalWeights, WeightSpec

_COUPLE_TAG = 31
_REPAIR_TAG = 32
_LIMIT_TAG = 33
_WEIGHT_TAG = 34

BREAK_X_NEQ_Z = "XneqZ"
BREAK_ACTIVE = "ActiveCollision"
BREAK_COMPLETED = "CompletedCollision"
BREAK_OVERFLOW = "SizeOverflow"
BREAK_REPEAT = "TypeRepeat"
BREAK_REDRAW = "WassersteinRedraw"
BREAK_WEIGHT = "WeightMismatch"


@dataclass(frozen=True)
class CouplingConfig:
    k_n: float
    depth: int
    include_weights: bool = True

    def __post_init__(self):
        if not self.k_n > 0:
            raise ValueError("k_n must be positive")
        if self.depth < 0:
            raise ValueError("depth must be non-negative")

    @staticmethod
    def default(n: int, depth: int, include_weights: bool = True) -> "CouplingConfig":
        return CouplingConfig(k_n=float(np.ceil(n ** (1.0 / 3.0))), depth=depth,
                              include_weights=include_weights)


@dataclass
class CouplingOutcome:
    root: int
    depth: int
    neighbourhood: Neighbourhood
    tree: RootedWeightedTree
    ok: bool
    break_level: int | None = None
    break_reason: str | None = None
    flags: set = field(default_factory=set)

    def record_break(self, level: int, reason: str) -> None:
        self.flags.add(reason)
        if self.ok:
            self.ok = False
            self.break_level = level
            self.break_reason = reason


# ---- elementary Bernoulli/Poisson coupling ----------------------------------------


def poisson_icdf(lam, u):
    """Inverse CDF of Poisson(lam) at u; vectorized, exact summation."""
    lam = np.asarray(lam, dtype=float)
    u = np.asarray(u, dtype=float)
    lam, u = np.broadcast_arrays(lam, u)
    out = np.zeros(lam.shape, dtype=np.int64)
    pmf = np.exp(-lam)
    cdf = pmf.copy()
    unresolved = u > cdf
    if lam.size == 0:
        return out
    top = float(np.max(lam))
    kmax = int(top + 40.0 * np.sqrt(top + 1.0) + 60.0)
    k = 0
    while unresolved.any() and k < kmax:
        k += 1
        pmf = pmf * lam / k
        cdf = cdf + pmf
        out[unresolved & (u <= cdf)] = k
        unresolved = u > cdf
    out[unresolved] = kmax
    return out


def poisson_cdf_interval(k: int, lam: float) -> tuple[float, float]:
    """(F(k-1), F(k)) for Poisson(lam), summed exactly like poisson_icdf.

    Sharing the summation with the inverse guarantees that a uniform drawn
    inside this interval inverts back to k bit-for-bit.
    """
    pmf = np.exp(-lam)
    cdf = pmf
    lo = 0.0
    for j in range(1, k + 1):
        lo = cdf
        pmf = pmf * lam / j
        cdf = cdf + pmf
    if k == 0:
        return 0.0, cdf
    return lo, cdf


def couple_bernoulli_poisson(p_prime, u):
    """Comonotone (X, Z) from one shared uniform per site.

    X = 1{u > 1 - min(p', 1)} is Bernoulli(min(p', 1)), Z the Poisson(p')
    quantile at the same u.  Routing both through the intermediate
    Poisson(min(p', 1)) quantile shows P(X != Z) <= p'^2 + p' 1{p' >= 1}.
    """
    p_prime = np.asarray(p_prime, dtype=float)
    u = np.asarray(u, dtype=float)
    pe = np.minimum(p_prime, 1.0)
    x = (u > 1.0 - pe).astype(np.int64)
    z = poisson_icdf(p_prime, u)
    if x.ndim == 0:
        return int(x), int(z)
    return x, z


# ---- stage 1: neighbourhood to intermediate tree -----------------------------------


def _grow_intermediate(tree: RootedWeightedTree, frontier: list[int],
                       weights: EmpiricalWeights, rng: np.random.Generator) -> None:
    """Grow the given tree nodes to full depth with fresh intermediate law."""
    W = weights.W
    scale = weights.lambda_n / (weights.n * weights.theta)
    cum = np.cumsum(W / weights.lambda_n)
    queue = deque(frontier)
    while queue:
        node = queue.popleft()
        if tree.node_depth[node] >= tree.depth:
            continue
        k = rng.poisson(W[tree.labels[node]] * scale if tree.labels[node] is not None
                        else tree.type_w[node] * scale)
        if k:
            picks = np.searchsorted(cum, rng.random(k), side="left")
            for j in picks:
                queue.append(tree.add_child(node, W[j], label=int(j)))


def couple_neighbourhood_to_intermediate(graph: WeightedGraph, root: int,
                                         cfg: CouplingConfig,
                                         rng: np.random.Generator | None = None
                                         ) -> CouplingOutcome:
    """Explore the ball and emit the coupled intermediate tree simultaneously.

    The graph side is exactly the breadth-first exploration of the realized
    ball.  The tree side consumes, for the currently explored vertex, the
    coupled Poisson Z for unexplored and active types and fresh copies Z*
    for completed types (and the diagonal), so it is distributed as the
    intermediate tree no matter whether the coupling breaks.  Breaks are
    data, not errors.
    """
    if rng is None:
        rng = stream_rng(graph.seed, graph.stream, _COUPLE_TAG, root)
    n, depth = graph.n, cfg.depth
    W = graph.weights.W
    theta = graph.theta
    status = np.zeros(n, dtype=np.int8)  # 0 unexplored, 1 active, 2 completed
    status[root] = 1

    levels: list[list[int]] = [[root]]
    tree_edges: list[tuple[int, int, int]] = []
    extra_edges: list[tuple[int, int, int]] = []
    parent: dict[int, int] = {}
    children: dict[int, list[int]] = {root: []}
    order = [root]

    tree = RootedWeightedTree(W[root], depth, root_label=int(root))
    outcome_break: tuple[int, str] | None = None
    attached = True
    detached_frontier: list[int] = []

    current = [root]
    tree_current = [0]
    weight_seen = float(W[root])

    for r in range(depth):
        nxt: list[int] = []
        tree_next: list[int] = []
        for i, vj in enumerate(current):
            nbrs = graph.neighbors(vj)
            # graph side bookkeeping (identical to the plain exploration)
            i_j: list[int] = []
            for u in nbrs:
                u = int(u)
                if status[u] == 2:
                    continue
                if status[u] == 0:
                    i_j.append(u)
                elif u != vj:
                    extra_edges.append((vj, u, r))
            if attached:
                tnode = tree_current[i]
                # coupled sites: unexplored and active types except vj itself
                mask = status <= 1
                mask[vj] = False
                us = np.flatnonzero(mask)
                pprime = W[vj] * W[us] / (n * theta)
                x_vec = np.zeros(us.size, dtype=np.int64)
                if us.size and len(nbrs):
                    pos = np.searchsorted(us, nbrs)
                    hit = (pos < us.size) & (us[np.minimum(pos, us.size - 1)] == nbrs)
                    x_vec[pos[hit]] = 1
                aux = graph.coupling_uniform(vj, us)
                pe = np.minimum(pprime, 1.0)
                u_shared = np.where(x_vec == 1, 1.0 - pe + aux * pe, aux * (1.0 - pe))
                z = poisson_icdf(pprime, u_shared)
                # fresh copies for completed types and the diagonal
                us_c = np.flatnonzero(status == 2)
                us_c = np.append(us_c, vj)
                zstar = poisson_icdf(W[vj] * W[us_c] / (n * theta),
                                     graph.zstar_uniform(root, vj, us_c))

                step_break = None
                if np.any(x_vec != z):
                    step_break = BREAK_X_NEQ_Z
                elif np.any(z[status[us] == 1] > 0):
                    step_break = BREAK_ACTIVE
                elif np.any(zstar > 0):
                    step_break = BREAK_COMPLETED

                if step_break is None:
                    for u in i_j:
                        tree_next.append(tree.add_child(tnode, W[u], label=int(u)))
                else:
                    outcome_break = (r + 1, step_break)
                    # children were generated regardless; relabel them randomly
                    types = np.concatenate((np.repeat(us, z), np.repeat(us_c, zstar)))
                    for u in rng.permutation(types):
                        tree_next.append(tree.add_child(tnode, W[u], label=int(u)))
                    attached = False
                    detached_frontier = tree_current[i + 1:] + tree_next
                    tree_next = []
            # advance the graph exploration
            for u in i_j:
                status[u] = 1
                parent[u] = vj
                children[vj].append(u)
                children[u] = []
                tree_edges.append((vj, u, r + 1))
                nxt.append(u)
                order.append(u)
                weight_seen += float(W[u])
            status[vj] = 2

        if attached and weight_seen > cfg.k_n:
            outcome_break = (r + 1, BREAK_OVERFLOW)
            attached = False
            detached_frontier = tree_next
            tree_next = []

        levels.append(nxt)
        current = nxt
        tree_current = tree_next
        if not nxt and attached and not tree_current:
            levels.extend([[]] * (depth - r - 1))
            break

    if not attached and detached_frontier:
        _grow_intermediate(tree, detached_frontier, graph.weights, rng)

    while len(levels) < depth + 1:
        levels.append([])

    nb = Neighbourhood(root=root, depth=depth, levels=levels, tree_edges=tree_edges,
                       extra_edges=extra_edges, parent=parent, children=children,
                       order=order)
    outcome = CouplingOutcome(root=root, depth=depth, neighbourhood=nb, tree=tree,
                              ok=outcome_break is None)
    if outcome_break is not None:
        outcome.ok = True  # let record_break set the fields
        outcome.record_break(*outcome_break)
    return outcome


# ---- stage 2: independence repair across roots --------------------------------------


def repair_independence(outcomes: list[CouplingOutcome], weights: EmpiricalWeights,
                        rng: np.random.Generator | None = None,
                        seed: tuple[int, int] | None = None, stream: int = 0
                        ) -> list[CouplingOutcome]:
    """Replace repeated vertex types by fresh subtrees, level by level.

    The joint breadth-first pass keeps the first occurrence of every type;
    later occurrences (across or within trees) are replaced by independent
    subtrees of the remaining height with the empirical size-biased
    offspring law.  A replaced node flags its outcome as a type repeat.
    """
    roots = [o.root for o in outcomes]
    if len(set(roots)) != len(roots):
        raise ValueError("roots must be pairwise distinct")
    if rng is None:
        rng = stream_rng(seed if seed is not None else (0, 0), stream, _REPAIR_TAG)
    W = weights.W
    scale = weights.lambda_n / (weights.n * weights.theta)
    cum = np.cumsum(W / weights.lambda_n)
    seen: set[int] = set(int(r) for r in roots)

    depth = max((o.tree.depth for o in outcomes), default=0)
    rebuilt = [RootedWeightedTree(o.tree.type_w[0], o.tree.depth,
                                  o.tree.vertex_w[0], o.tree.labels[0])
               for o in outcomes]
    # per outcome: map new node -> (source node in old tree | None if fresh)
    frontier = [{0: 0} for _ in outcomes]
    repeated = [None] * len(outcomes)

    for r in range(1, depth + 1):
        new_frontier: list[dict[int, int | None]] = [dict() for _ in outcomes]
        for t, out in enumerate(outcomes):
            old = out.tree
            new = rebuilt[t]
            if r > old.depth:
                continue
            for new_node, src in frontier[t].items():
                if src is not None:
                    kids = old.children[src]
                    kid_types = [(old.labels[c], c) for c in kids]
                else:
                    mean = W[new.labels[new_node]] * scale
                    k = rng.poisson(mean)
                    picks = np.searchsorted(cum, rng.random(k), side="left") if k else []
                    kid_types = [(int(j), None) for j in picks]
                for label, old_child in kid_types:
                    label = int(label)
                    if label in seen and old_child is not None:
                        if repeated[t] is None:
                            repeated[t] = r
                        label = int(np.searchsorted(cum, rng.random(), side="left"))
                        old_child = None
                    seen.add(label)
                    child = new.add_child(new_node, W[label], label=label)
                    new_frontier[t][child] = old_child
        frontier = new_frontier

    result = []
    for t, out in enumerate(outcomes):
        new_out = CouplingOutcome(root=out.root, depth=out.depth,
                                  neighbourhood=out.neighbourhood, tree=rebuilt[t],
                                  ok=out.ok, break_level=out.break_level,
                                  break_reason=out.break_reason, flags=set(out.flags))
        if repeated[t] is not None:
            new_out.record_break(repeated[t], BREAK_REPEAT)
        result.append(new_out)
    return result


# ---- stage 3: intermediate tree to limit tree ---------------------------------------


def _empirical_biased_intervals(weights: EmpiricalWeights):
    """CDF intervals of the size-biased empirical law, per vertex id."""
    order = np.argsort(weights.W, kind="stable")
    masses = weights.W[order] / weights.lambda_n
    hi = np.cumsum(masses)
    hi[-1] = 1.0
    lo = np.concatenate(([0.0], hi[:-1]))
    lo_by_vertex = np.empty(weights.n)
    hi_by_vertex = np.empty(weights.n)
    lo_by_vertex[order] = lo
    hi_by_vertex[order] = hi
    return lo_by_vertex, hi_by_vertex


def couple_intermediate_to_limit(tree: RootedWeightedTree, weights: EmpiricalWeights,
                                 spec: WeightSpec,
                                 rng: np.random.Generator | None = None,
                                 seed: tuple[int, int] | None = None, stream: int = 0
                                 ) -> tuple[RootedWeightedTree, bool, int | None]:
    """Redraw the empirical tree into the limit law, node by node.

    Types are coupled through a shared uniform positioned inside the
    empirical size-biased CDF interval of the node's type (the 1-Wasserstein
    optimal coupling); child counts through comonotone Poisson quantiles.
    The first node whose count differs breaks the coupling; the limit tree
    still grows to full depth with fresh draws so its law is exact.
    """
    if rng is None:
        rng = stream_rng(seed if seed is not None else (0, 0), stream, _LIMIT_TAG)
    biased = spec.size_biased()
    lo_v, hi_v = _empirical_biased_intervals(weights)
    gamma1 = weights.lambda_n / (weights.n * weights.theta)

    root_w = tree.type_w[0]
    out = RootedWeightedTree(root_w, tree.depth, root_label=tree.labels[0])
    break_level: int | None = None

    # queue of (limit node, matched intermediate node or None, offspring mean)
    queue = deque([(0, 0, float(root_w))])
    while queue:
        new_node, src, mean = queue.popleft()
        d = out.node_depth[new_node]
        if d >= tree.depth:
            continue
        if src is None:
            count = int(rng.poisson(mean))
            matched_children: list[int | None] = [None] * count
        else:
            lam_tilde = gamma1 * tree.type_w[src]
            n_tilde = len(tree.children[src])
            lo, hi = poisson_cdf_interval(n_tilde, lam_tilde)
            u = lo + rng.random() * max(hi - lo, 0.0)
            count = int(poisson_icdf(mean, min(max(u, 1e-300), 1.0 - 1e-16)))
            if count != n_tilde and break_level is None:
                break_level = d + 1
            matched_children = [tree.children[src][t] if t < n_tilde else None
                                for t in range(count)]
        for child_src in matched_children:
            if child_src is not None:
                ilo, ihi = lo_v[tree.labels[child_src]], hi_v[tree.labels[child_src]]
                u = ilo + rng.random() * (ihi - ilo)
                what = float(biased.quantile(min(max(u, 1e-300), 1.0 - 1e-16)))
            else:
                what = float(biased.quantile(rng.random()))
            child = out.add_child(new_node, what)
            queue.append((child, child_src, what))
    return out, break_level is None, break_level


# ---- weight overlay and the full pipeline -------------------------------------------


def tv_distance(a: WeightSpec, b: WeightSpec) -> float:
    """Total-variation distance; exact for discrete pairs, 0 for equal specs."""
    if a == b:
        return 0.0
    discrete = {"constant", "finite"}
    if a.family in discrete and b.family in discrete:
        from .weights import _as_discrete

        va, pa = _as_discrete(a)
        vb, pb = _as_discrete(b)
        support = np.unique(np.concatenate((va, vb)))
        fa = np.array([pa[va == s].sum() for s in support])
        fb = np.array([pb[vb == s].sum() for s in support])
        return float(0.5 * np.abs(fa - fb).sum())
    raise ValueError("total variation only available for discrete spec pairs")


def _tv_coupled_value(x: float, spec_n: WeightSpec, spec: WeightSpec,
                      rng: np.random.Generator) -> tuple[float, bool]:
    """Keep x with the maximal-coupling probability, else draw from the excess."""
    if spec_n == spec:
        return x, True
    from .weights import _as_discrete

    vn, pn = _as_discrete(spec_n)
    v, p = _as_discrete(spec)
    fn = float(pn[vn == x].sum())
    f = float(p[v == x].sum())
    if fn <= 0:
        raise ValueError("observed weight outside its own support")
    if rng.random() < min(fn, f) / fn:
        return x, True
    excess = np.array([max(float(p[v == s].sum()) - float(pn[vn == s].sum()), 0.0)
                       for s in v])
    excess = excess / excess.sum()
    return float(rng.choice(v, p=excess)), False


def couple_full(graph: WeightedGraph, roots: list[int], cfg: CouplingConfig,
                spec: WeightSpec, mu_e: WeightSpec | None, mu_v: WeightSpec | None,
                rng: np.random.Generator | None = None,
                mu_e_n: WeightSpec | None = None, mu_v_n: WeightSpec | None = None
                ) -> list[CouplingOutcome]:
    """Full pipeline: joint exploration, repair, limit redraw, weight overlay.

    mu_e_n/mu_v_n default to the limit laws mu_e/mu_v (no total-variation
    penalty); when they differ, shared sites keep the graph's weight with the
    maximal-coupling probability and flag WeightMismatch otherwise.
    """
    if len(set(roots)) != len(roots):
        raise ValueError("roots must be pairwise distinct")
    if rng is None:
        rng = stream_rng(graph.seed, graph.stream, _COUPLE_TAG)
    mu_e_n = mu_e_n if mu_e_n is not None else mu_e
    mu_v_n = mu_v_n if mu_v_n is not None else mu_v

    stage1 = [couple_neighbourhood_to_intermediate(graph, r, cfg, rng=rng)
              for r in roots]
    repaired = repair_independence(stage1, graph.weights, rng=rng)
    final: list[CouplingOutcome] = []
    for out in repaired:
        limit, ok3, lvl3 = couple_intermediate_to_limit(out.tree, graph.weights,
                                                        spec, rng=rng)
        res = CouplingOutcome(root=out.root, depth=out.depth,
                              neighbourhood=out.neighbourhood, tree=limit,
                              ok=out.ok, break_level=out.break_level,
                              break_reason=out.break_reason, flags=set(out.flags))
        if not ok3:
            res.record_break(lvl3, BREAK_REDRAW)
        if cfg.include_weights:
            _overlay_weights(res, graph, mu_e, mu_v, mu_e_n, mu_v_n, rng)
        final.append(res)
    return final


def _overlay_weights(outcome: CouplingOutcome, graph: WeightedGraph,
                     mu_e: WeightSpec | None, mu_v: WeightSpec | None,
                     mu_e_n: WeightSpec | None, mu_v_n: WeightSpec | None,
                     rng: np.random.Generator) -> None:
    """Copy graph weights onto the tree where the coupling holds end to end.

    On a fully coupled outcome the tree mirrors the ball node for node (the
    node labels are graph vertex ids), so shared sites receive exactly the
    graph's weights; otherwise the tree gets fresh i.i.d. weights, keeping
    its marginal law intact.
    """
    tree = outcome.tree
    nb = outcome.neighbourhood
    # match tree nodes to graph vertices positionally while fully coupled
    mirror: dict[int, int] = {}
    if outcome.ok:
        mirror[0] = nb.root
        queue = [(0, nb.root)]
        ok_shape = True
        while queue and ok_shape:
            tnode, gv = queue.pop(0)
            g_kids = nb.children.get(gv, [])
            t_kids = tree.children[tnode]
            if len(g_kids) != len(t_kids):
                ok_shape = False
                break
            for tk, gk in zip(t_kids, g_kids):
                mirror[tk] = gk
                queue.append((tk, gk))
        if not ok_shape:
            mirror = {}

    for node in range(tree.node_count):
        gv = mirror.get(node)
        if mu_v is not None:
            if gv is not None:
                w, same = _shared_weight(graph.vertex_weight(gv), mu_v_n, mu_v, rng)
                if not same:
                    outcome.record_break(tree.node_depth[node], BREAK_WEIGHT)
                tree.vertex_w[node] = w
            else:
                tree.vertex_w[node] = float(mu_v.quantile(rng.random()))
        if node != 0 and mu_e is not None:
            gp = mirror.get(tree.parent[node])
            if gv is not None and gp is not None:
                w, same = _shared_weight(graph.edge_weight(gp, gv), mu_e_n, mu_e, rng)
                if not same:
                    outcome.record_break(tree.node_depth[node], BREAK_WEIGHT)
                tree.edge_w[node] = w
            else:
                tree.edge_w[node] = float(mu_e.quantile(rng.random()))


def _shared_weight(x: float, spec_n: WeightSpec, spec: WeightSpec,
                   rng: np.random.Generator) -> tuple[float, bool]:
    if spec_n == spec:
        return float(x), True
    return _tv_coupled_value(float(x), spec_n, spec, rng)
