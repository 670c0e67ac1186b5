"""Connectivity-weight laws and their empirical summaries.

A :class:`WeightSpec` is a parametric law for the per-vertex connectivity
weights W_v with closed-form moments, Laplace transform and quantile
function.  Only three families are supported (constant, finite discrete,
gamma); all of them have finite third moments and exact quantiles, which is
what the downstream Wasserstein couplings and bound evaluators require.

The empirical side lives in :class:`EmpiricalWeights` (a realized weight
vector together with the model constant theta = E[W]) and
:class:`MomentSummary`, which carries the normalized moments

    Gamma_{p,n} = (n theta)^{-1} sum_v W_v^p
    kappa_{p,n} = (n theta)^{-1} sum_v W_v^p 1{W_v > sqrt(n theta)}

and the 1-Wasserstein distances between the empirical laws and their limits.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import special

from .rng import stream_rng

_WEIGHT_TAG = 11


@dataclass(frozen=True)
class WeightSpec:
    """Parametric connectivity-weight law.

    family is one of "constant", "finite" and "gamma":

    * constant: point mass at ``c``
    * finite:   finitely supported law with ``values``/``probs``
    * gamma:    Gamma(shape, scale); Exp(1) is gamma(1, 1)
    """

    family: str
    c: float = 0.0
    values: tuple[float, ...] = ()
    probs: tuple[float, ...] = ()
    shape: float = 0.0
    scale: float = 0.0

    def __post_init__(self):
        if self.family == "constant":
            if not self.c > 0:
                raise ValueError("constant weight must be positive")
        elif self.family == "finite":
            v = np.asarray(self.values, dtype=float)
            p = np.asarray(self.probs, dtype=float)
            if v.size == 0 or v.size != p.size:
                raise ValueError("values and probs must be non-empty and equally long")
            if np.any(v <= 0) or np.any(p < 0) or not np.isclose(p.sum(), 1.0):
                raise ValueError("finite law needs positive values and probabilities summing to 1")
            order = np.argsort(v)
            object.__setattr__(self, "values", tuple(v[order]))
            object.__setattr__(self, "probs", tuple(p[order]))
        elif self.family == "gamma":
            if not (self.shape > 0 and self.scale > 0):
                raise ValueError("gamma parameters must be positive")
        else:
            raise ValueError(f"unknown weight family {self.family!r}")

    # ---- closed-form functionals -------------------------------------------------

    def moment(self, p: float) -> float:
        """E[W^p], exact."""
        if self.family == "constant":
            return self.c ** p
        if self.family == "finite":
            return float(np.dot(np.asarray(self.probs), np.asarray(self.values) ** p))
        return self.scale ** p * float(np.exp(special.gammaln(self.shape + p) - special.gammaln(self.shape)))

    def mean(self) -> float:
        return self.moment(1)

    def gamma_limit(self, p: float) -> float:
        """Gamma_p of the law: E[W^p] / E[W]."""
        return self.moment(p) / self.mean()

    def laplace(self, t: float = 1.0) -> float:
        """E[exp(-t W)], exact."""
        if self.family == "constant":
            return float(np.exp(-t * self.c))
        if self.family == "finite":
            return float(np.dot(np.asarray(self.probs), np.exp(-t * np.asarray(self.values))))
        return (1.0 + t * self.scale) ** (-self.shape)

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        if self.family == "constant":
            return (x >= self.c).astype(float)
        if self.family == "finite":
            v = np.asarray(self.values)
            cum = np.cumsum(self.probs)
            idx = np.searchsorted(v, x, side="right")
            out = np.where(idx > 0, cum[np.maximum(idx - 1, 0)], 0.0)
            return out
        return special.gammainc(self.shape, x / self.scale)

    def quantile(self, u):
        """Inverse CDF, valid for u in (0,1); vectorized."""
        u = np.asarray(u, dtype=float)
        if self.family == "constant":
            return np.full_like(u, self.c)
        if self.family == "finite":
            cum = np.cumsum(self.probs)
            idx = np.searchsorted(cum, u, side="left")
            return np.asarray(self.values)[np.minimum(idx, len(self.values) - 1)]
        return self.scale * special.gammaincinv(self.shape, u)

    def partial_quantile_integral(self, u):
        """G(u) = integral of the quantile function over (0, u], exact.

        For the gamma family this is the partial expectation
        E[W 1{F(W) <= u}] = shape*scale*P(shape+1, Q(u)/scale).
        """
        u = np.asarray(u, dtype=float)
        if self.family == "constant":
            return self.c * u
        if self.family == "finite":
            v = np.asarray(self.values)
            p = np.asarray(self.probs)
            lower = np.concatenate(([0.0], np.cumsum(p)[:-1]))
            # overlap of (0, u] with each quantile step
            seg = np.clip(u[..., None] - lower[None, :], 0.0, p[None, :])
            return (seg * v[None, :]).sum(axis=-1)
        q = self.quantile(u)
        return self.shape * self.scale * special.gammainc(self.shape + 1.0, q / self.scale)

    def sample(self, rng: np.random.Generator, size: int):
        return self.quantile(rng.random(size))

    # ---- derived laws --------------------------------------------------------------

    def size_biased(self) -> "WeightSpec":
        """The law with density proportional to w dnu(w); exact per family."""
        if self.family == "constant":
            return self
        if self.family == "finite":
            v = np.asarray(self.values)
            p = np.asarray(self.probs) * v
            p = p / p.sum()
            return WeightSpec("finite", values=tuple(v), probs=tuple(p))
        return WeightSpec("gamma", shape=self.shape + 1.0, scale=self.scale)

    # ---- config round-trip -----------------------------------------------------------

    def to_config(self) -> dict:
        if self.family == "constant":
            return {"family": "constant", "c": self.c}
        if self.family == "finite":
            return {"family": "finite", "values": list(self.values), "probs": list(self.probs)}
        return {"family": "gamma", "shape": self.shape, "scale": self.scale}

    @staticmethod
    def from_config(cfg: dict) -> "WeightSpec":
        family = cfg.get("family")
        if family == "constant":
            return WeightSpec("constant", c=float(cfg["c"]))
        if family == "finite":
            return WeightSpec("finite", values=tuple(float(v) for v in cfg["values"]),
                              probs=tuple(float(p) for p in cfg["probs"]))
        if family == "gamma":
            return WeightSpec("gamma", shape=float(cfg["shape"]), scale=float(cfg["scale"]))
        raise ValueError(f"unknown weight family in config: {family!r}")


def exponential(rate: float = 1.0) -> WeightSpec:
    """Exp(rate) as a gamma spec (shape 1, scale 1/rate)."""
    return WeightSpec("gamma", shape=1.0, scale=1.0 / rate)


def size_biased(spec: WeightSpec) -> WeightSpec:
    """The size-biased companion law; mean E[W^2]/E[W]."""
    return spec.size_biased()


@dataclass
class EmpiricalWeights:
    """A realized connectivity-weight vector and the model constant theta."""

    n: int
    W: np.ndarray
    theta: float

    def __post_init__(self):
        self.W = np.asarray(self.W, dtype=float)
        if self.n != self.W.size or self.n < 1:
            raise ValueError("n must match the number of weights")
        if np.any(self.W <= 0):
            raise ValueError("connectivity weights must be positive")
        if not self.theta > 0:
            raise ValueError("theta must be positive")

    @property
    def lambda_n(self) -> float:
        return float(self.W.sum())


@dataclass
class MomentSummary:
    """Normalized empirical moments used by every bound evaluator."""

    gamma: dict[int, float]
    kappa: dict[int, float]
    lambda_n: float
    alpha_n: float
    theta: float
    n: int = field(default=0)


def sample_empirical_weights(spec: WeightSpec, n: int, seed: tuple[int, int],
                             stream: int = 0) -> EmpiricalWeights:
    """Draw W_1..W_n i.i.d. from spec; theta is the closed-form mean."""
    if n < 1:
        raise ValueError("n must be at least 1")
    rng = stream_rng(seed, stream, _WEIGHT_TAG)
    return EmpiricalWeights(n=n, W=spec.sample(rng, n), theta=spec.mean())


def moments(weights: EmpiricalWeights, spec: WeightSpec | None = None) -> MomentSummary:
    """Gamma_{p,n} for p in {0,1,2,3}, kappa_{p,n} for p in {1,2}, Lambda_n.

    When spec is given, alpha_n is the larger of the exact 1-Wasserstein
    distances W1(nu_n, nu) and W1(nu_hat_n, nu_hat); otherwise 0.
    """
    W = weights.W
    n, theta = weights.n, weights.theta
    norm = n * theta
    excess = W > np.sqrt(norm)
    gamma = {p: float((W ** p).sum() / norm) for p in (0, 1, 2, 3)}
    kappa = {p: float((W[excess] ** p).sum() / norm) for p in (1, 2)}
    alpha = 0.0
    if spec is not None:
        a_plain = wasserstein_1d(W, spec)
        masses = W / W.sum()
        a_biased = _wasserstein_weighted_sample(W, masses, spec.size_biased())
        alpha = max(a_plain, a_biased)
    return MomentSummary(gamma=gamma, kappa=kappa, lambda_n=weights.lambda_n,
                         alpha_n=alpha, theta=theta, n=n)


# ---- exact 1-Wasserstein distances ---------------------------------------------------


def _wasserstein_weighted_sample(values: np.ndarray, masses: np.ndarray,
                                 spec: WeightSpec) -> float:
    """W1 between a weighted empirical law and a spec, by quantile coupling.

    The empirical quantile function is a step function with steps at the
    cumulative masses; on each step the integral of |s - Q_spec(u)| has a
    closed form in terms of the spec's partial quantile integral.
    """
    order = np.argsort(values)
    s = np.asarray(values, dtype=float)[order]
    m = np.asarray(masses, dtype=float)[order]
    hi = np.cumsum(m)
    hi[-1] = 1.0
    lo = np.concatenate(([0.0], hi[:-1]))
    # split each segment at c = clip(F(s), lo, hi): Q <= s below c, Q >= s above
    c = np.clip(spec.cdf(s), lo, hi)
    g_lo = spec.partial_quantile_integral(lo)
    g_c = spec.partial_quantile_integral(c)
    g_hi = spec.partial_quantile_integral(hi)
    below = s * (c - lo) - (g_c - g_lo)
    above = (g_hi - g_c) - s * (hi - c)
    return float((below + above).sum())


def wasserstein_1d(a, b: WeightSpec) -> float:
    """Exact 1-Wasserstein distance via the inverse-CDF coupling.

    ``a`` is either a 1-d sample (uniform empirical masses) or a WeightSpec.
    Discrete/discrete pairs are summed exactly over merged CDF breakpoints;
    pairs involving a gamma law integrate |F_a - F_b| by adaptive quadrature.
    """
    if not isinstance(b, WeightSpec):
        raise ValueError(f"unsupported Wasserstein combination: second argument "
                         f"must be a WeightSpec, got {type(b).__name__}")
    if isinstance(a, WeightSpec):
        return _wasserstein_spec_spec(a, b)
    sample = np.asarray(a, dtype=float)
    if sample.ndim != 1 or sample.size == 0:
        raise ValueError("sample must be a non-empty 1-d array")
    masses = np.full(sample.size, 1.0 / sample.size)
    return _wasserstein_weighted_sample(sample, masses, b)


def _wasserstein_spec_spec(a: WeightSpec, b: WeightSpec) -> float:
    discrete = {"constant", "finite"}
    if a.family in discrete and b.family in discrete:
        va, pa = _as_discrete(a)
        vb, pb = _as_discrete(b)
        # merge the CDF breakpoints of both laws and sum |Qa - Qb| segment-wise
        cuts = np.unique(np.concatenate((np.cumsum(pa), np.cumsum(pb), [0.0, 1.0])))
        cuts = cuts[(cuts >= 0.0) & (cuts <= 1.0)]
        mid = (cuts[:-1] + cuts[1:]) / 2.0
        qa = a.quantile(mid)
        qb = b.quantile(mid)
        return float(np.sum(np.abs(qa - qb) * np.diff(cuts)))
    if a.family == "gamma" or b.family == "gamma":
        from scipy.integrate import quad

        top = max(_upper_support(a), _upper_support(b))
        val, _ = quad(lambda x: abs(float(a.cdf(x)) - float(b.cdf(x))), 0.0, top,
                      limit=200)
        return float(val)
    raise ValueError(f"unsupported Wasserstein combination: {a.family}/{b.family}")


def _as_discrete(spec: WeightSpec):
    if spec.family == "constant":
        return np.array([spec.c]), np.array([1.0])
    return np.asarray(spec.values), np.asarray(spec.probs)


def _upper_support(spec: WeightSpec) -> float:
    if spec.family == "constant":
        return spec.c
    if spec.family == "finite":
        return max(spec.values)
    return float(spec.quantile(1.0 - 1e-13))
