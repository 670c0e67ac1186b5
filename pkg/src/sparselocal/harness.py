"""Monte Carlo experiment drivers: replication, estimators, trend tables.

Replicas are embarrassingly parallel and keyed by their stream id, so
splitting a replica range across any number of workers reproduces the same
pooled results bit for bit; aggregation is a deterministic fold in replica
order.  Central-limit experiments condition on a single realized weight
vector per n (weights are drawn once per (n, seed) and frozen across
replicas).
"""

from __future__ import annotations

import hashlib
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from . import matching as app
from .bounds import BoundParams, VertexSetSummary, epsilon_v_bound
from .coupling import CouplingConfig, couple_full
from .graph import sample_graph
from .rng import format_seed, parse_seed
from .weights import WeightSpec, moments, sample_empirical_weights

_WEIGHTS_STREAM = 1_000_003


@dataclass
class ExperimentConfig:
    weights: WeightSpec
    n_grid: list[int]
    replicas: int
    seed: tuple[int, int]
    depth: int = 2
    k_n_rule: str | float = "cbrt"
    application: str = "edge-sum"
    roots: int = 2
    vertex_weights: WeightSpec | None = None
    edge_weights: WeightSpec | None = None
    rde_pop_size: int = 100_000
    rde_iterations: int = 30
    workers: int = 1

    def __post_init__(self):
        if self.replicas < 1:
            raise ValueError("replicas must be at least 1")
        if not self.n_grid:
            raise ValueError("n grid must be non-empty")
        if self.application not in ("edge-sum", "matching"):
            raise ValueError(f"unknown application {self.application!r}")

    def k_n(self, n: int) -> float:
        if self.k_n_rule == "cbrt":
            return float(np.ceil(n ** (1.0 / 3.0)))
        return float(self.k_n_rule)

    def canonical_json(self) -> str:
        body = {
            "weights": self.weights.to_config(),
            "n_grid": list(self.n_grid),
            "replicas": self.replicas,
            "depth": self.depth,
            "k_n_rule": self.k_n_rule,
            "application": self.application,
            "roots": self.roots,
            "vertex_weights": self.vertex_weights.to_config() if self.vertex_weights else None,
            "edge_weights": self.edge_weights.to_config() if self.edge_weights else None,
            "rde_pop_size": self.rde_pop_size,
            "rde_iterations": self.rde_iterations,
        }
        return json.dumps(body, sort_keys=True, separators=(",", ":"))

    def config_hash(self) -> str:
        return hashlib.sha256(self.canonical_json().encode()).hexdigest()[:16]

    @staticmethod
    def from_dict(cfg: dict) -> "ExperimentConfig":
        def spec_or_none(key):
            return WeightSpec.from_config(cfg[key]) if cfg.get(key) else None

        return ExperimentConfig(
            weights=WeightSpec.from_config(cfg["weights"]),
            n_grid=[int(n) for n in cfg["n_grid"]],
            replicas=int(cfg.get("replicas", 1000)),
            seed=parse_seed(cfg.get("seed", "0")),
            depth=int(cfg.get("depth", 2)),
            k_n_rule=cfg.get("k_n_rule", "cbrt"),
            application=cfg.get("application", "edge-sum"),
            roots=int(cfg.get("roots", 2)),
            vertex_weights=spec_or_none("vertex_weights"),
            edge_weights=spec_or_none("edge_weights"),
            rde_pop_size=int(cfg.get("rde_pop_size", 100_000)),
            rde_iterations=int(cfg.get("rde_iterations", 30)),
            workers=int(cfg.get("workers", 1)),
        )


# ---- estimators -----------------------------------------------------------------------


@dataclass
class KSReport:
    statistic: float
    sample_size: int


def ks_to_normal(samples) -> KSReport:
    """Exact one-sample Kolmogorov statistic against the standard normal.

    Both one-sided gaps are evaluated at the sorted sample; the normal CDF
    comes from the complementary error function (absolute error far below
    1e-10 in double precision).
    """
    x = np.sort(np.asarray(samples, dtype=float))
    n = x.size
    if n < 2:
        raise ValueError("need at least two samples")
    grid = np.arange(1, n + 1) / n
    phi = ndtr(x)
    d_plus = float(np.max(grid - phi))
    d_minus = float(np.max(phi - (grid - 1.0 / n)))
    return KSReport(statistic=max(d_plus, d_minus), sample_size=n)


@dataclass
class VarianceEstimate:
    value: float
    jackknife_se: float


def estimate_variance(samples) -> VarianceEstimate:
    """Unbiased sample variance with its jackknife standard error."""
    x = np.asarray(samples, dtype=float)
    n = x.size
    if n < 2:
        raise ValueError("variance needs at least two samples")
    m = x.mean()
    m2 = float(np.sum((x - m) ** 2))
    var = m2 / (n - 1)
    if n == 2:
        return VarianceEstimate(value=var, jackknife_se=float("nan"))
    loo = (m2 - (x - m) ** 2 * n / (n - 1)) / (n - 2)
    se = float(np.sqrt((n - 1) / n * np.sum((loo - loo.mean()) ** 2)))
    return VarianceEstimate(value=var, jackknife_se=se)


# ---- replica workers -------------------------------------------------------------------
# The per-batch context is a module global set before the worker pool forks,
# so replicas only receive their stream id; results are folded in replica
# order, which makes pooled output independent of the worker count.

_CTX: dict = {}


class ReplicaFailure(RuntimeError):
    """A replica worker raised; the message carries the replica id."""


def _set_context(**kw) -> None:
    global _CTX
    _CTX = kw


def _clt_replica(stream: int) -> float:
    c = _CTX
    try:
        graph = sample_graph(c["weights"], c["seed"], stream,
                             mu_v=c["mu_v"], mu_e=c["mu_e"])
        if c["application"] == "edge-sum":
            return app.dependent_edge_sum(graph)
        if graph.n <= app.EXACT_SOLVER_LIMIT:
            return app.max_weight_matching(graph).value
        # tree-local diagnostic: lower recursion values over sampled roots
        from .explore import explore, is_tree

        total = 0.0
        for v in range(min(graph.n, 50)):
            nb = explore(graph, v, c["depth"])
            if is_tree(nb):
                total += app.matching_sandwich(nb, max(c["depth"], 1), graph).gL
        return total
    except Exception as exc:
        raise ReplicaFailure(f"replica {stream}: {exc}") from exc


def _coupling_replica(stream: int) -> list[tuple[int, bool, int | None, str | None]]:
    c = _CTX
    try:
        graph = sample_graph(c["weights"], c["seed"], stream,
                             mu_v=c["mu_v"], mu_e=c["mu_e"])
        cfg = CouplingConfig(k_n=c["k_n"], depth=c["depth"],
                             include_weights=c["mu_e"] is not None
                             or c["mu_v"] is not None)
        outcomes = couple_full(graph, list(c["roots"]), cfg, c["spec"],
                               c["mu_e"], c["mu_v"])
        return [(o.root, o.ok, o.break_level, o.break_reason) for o in outcomes]
    except Exception as exc:
        raise ReplicaFailure(f"replica {stream}: {exc}") from exc


def _map_replicas(fn, n_replicas: int, workers: int):
    streams = range(n_replicas)
    if workers <= 1:
        return [fn(t) for t in streams]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, streams,
                             chunksize=max(1, n_replicas // (4 * workers))))


# ---- experiments ------------------------------------------------------------------------


def clt_experiment(cfg: ExperimentConfig) -> list[dict]:
    """Standardize f(G_n) over replicas, per n: sigma^2, KS to normal, trend."""
    rows = []
    chash = cfg.config_hash()
    for n in cfg.n_grid:
        weights = sample_empirical_weights(cfg.weights, n, cfg.seed,
                                           stream=_WEIGHTS_STREAM + n)
        _set_context(weights=weights, seed=cfg.seed, application=cfg.application,
                     mu_v=cfg.vertex_weights, mu_e=cfg.edge_weights, depth=cfg.depth)
        values = np.asarray(_map_replicas(_clt_replica, cfg.replicas, cfg.workers))
        est = estimate_variance(values)
        scale = max(1.0, float(np.mean(values)) ** 2)
        degenerate = est.value <= 1e-12 * scale
        row = {
            "n": n,
            "replicas": cfg.replicas,
            "sigma2": est.value,
            "sigma2_se": est.jackknife_se,
            "n_over_sigma2": n / est.value if not degenerate else float("nan"),
            "ks": float("nan"),
            "degenerate": int(degenerate),
            "mode": ("exact" if cfg.application == "edge-sum" or n <= app.EXACT_SOLVER_LIMIT
                     else "tree-local-diagnostic"),
            "seed": format_seed(cfg.seed),
            "config": chash,
        }
        if not degenerate:
            z = (values - values.mean()) / np.sqrt(est.value)
            row["ks"] = ks_to_normal(z).statistic
        rows.append(row)
    return rows


def coupling_experiment(cfg: ExperimentConfig) -> tuple[list[dict], list[dict]]:
    """Empirical break rates of the full coupling against the failure bound.

    Returns (summary rows, per-replica outcome rows); a replica breaks when
    any root's coupling fails, which is the union event of the bound.
    """
    rows = []
    outcome_rows = []
    chash = cfg.config_hash()
    reasons_all = ("XneqZ", "ActiveCollision", "CompletedCollision", "SizeOverflow",
                   "TypeRepeat", "WassersteinRedraw", "WeightMismatch")
    for n in cfg.n_grid:
        weights = sample_empirical_weights(cfg.weights, n, cfg.seed,
                                           stream=_WEIGHTS_STREAM + n)
        summ = moments(weights, spec=cfg.weights)
        roots = tuple(range(cfg.roots))
        for ell in range(1, cfg.depth + 1):
            _set_context(weights=weights, seed=cfg.seed, depth=ell, k_n=cfg.k_n(n),
                         spec=cfg.weights, mu_v=cfg.vertex_weights,
                         mu_e=cfg.edge_weights, roots=roots)
            results = _map_replicas(_coupling_replica, cfg.replicas, cfg.workers)
            breaks = 0
            hist = {r: 0 for r in reasons_all}
            for t, per_root in enumerate(results):
                replica_bad = False
                for root, ok, lvl, reason in per_root:
                    outcome_rows.append({
                        "n": n, "ell": ell, "replica": t, "root": root, "ok": int(ok),
                        "break_level": "" if lvl is None else lvl,
                        "break_reason": reason or "",
                    })
                    if not ok:
                        if not replica_bad and reason in hist:
                            hist[reason] += 1
                        replica_bad = True
                breaks += int(replica_bad)
            params = BoundParams.from_summary(n, ell, summ, cfg.weights, k_n=cfg.k_n(n))
            bound = epsilon_v_bound(params, VertexSetSummary.of(weights, roots))
            rate = breaks / cfg.replicas
            half = float(3.0 * np.sqrt(max(rate * (1.0 - rate), 1e-12) / cfg.replicas))
            rows.append({
                "n": n, "ell": ell, "replicas": cfg.replicas, "breaks": breaks,
                "rate": rate, "ci_low": max(rate - half, 0.0),
                "ci_high": min(rate + half, 1.0), "bound": float(bound),
                "violation": int(max(rate - half, 0.0) > bound),
                **{f"reason_{r}": hist[r] for r in reasons_all},
                "seed": format_seed(cfg.seed), "config": chash,
            })
    return rows, outcome_rows


def bounds_grid(cfg: ExperimentConfig) -> list[dict]:
    """Closed-form bound table over the (n, ell) grid."""
    from .bounds import epsilon_rho_sequences, eta_bound, structural_bounds

    rows = []
    chash = cfg.config_hash()
    for n in cfg.n_grid:
        weights = sample_empirical_weights(cfg.weights, n, cfg.seed,
                                           stream=_WEIGHTS_STREAM + n)
        summ = moments(weights, spec=cfg.weights)
        for ell in range(1, cfg.depth + 1):
            params = BoundParams.from_summary(n, ell, summ, cfg.weights, k_n=cfg.k_n(n))
            eps, rho = epsilon_rho_sequences(params)
            vs = VertexSetSummary.of(weights, range(cfg.roots))
            row = {"n": n, "ell": ell, "k_n": cfg.k_n(n), "alpha_n": summ.alpha_n,
                   "eta": eta_bound(params, vs),
                   "epsilon_v": epsilon_v_bound(params, vs),
                   "epsilon": eps, "rho": rho, "C": params.C, "C0": params.C0,
                   "seed": format_seed(cfg.seed), "config": chash}
            row.update({f"b_{k}": v for k, v in
                        structural_bounds(params, float(weights.W[0])).items()})
            rows.append(row)
    return rows
