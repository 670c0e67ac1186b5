import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sparselocal.graph import edge_probability
from sparselocal.weights import (EmpiricalWeights, WeightSpec, exponential, moments,
                                 sample_empirical_weights, wasserstein_1d)

SEED = (2024, 7)


def test_edge_probability_er_embedding():
    # constant weights sqrt(lam_n * lam) give exactly lam_n / n
    lam_n, lam, n = 2.5, 2.0, 100
    w = np.sqrt(lam_n * lam)
    assert edge_probability(w, w, n, lam) == pytest.approx(lam_n / n, abs=0, rel=1e-15)


def test_edge_probability_cap_and_direct():
    assert edge_probability(1, 1, 1, 1) == 1.0
    assert edge_probability(1, 2, 4, 1) == 0.5


@pytest.mark.parametrize("bad", [(0, 1, 2, 1), (1, -1, 2, 1), (1, 1, 0, 1), (1, 1, 2, 0)])
def test_edge_probability_domain_errors(bad):
    with pytest.raises(ValueError):
        edge_probability(*bad)


def test_constant_weights():
    w = sample_empirical_weights(WeightSpec("constant", c=3.0), 5, SEED)
    assert np.all(w.W == 3.0)
    assert w.theta == 3.0


def test_finite_discrete_lln_mean():
    spec = WeightSpec("finite", values=(1.0, 3.0), probs=(0.5, 0.5))
    n = 40_000
    w = sample_empirical_weights(spec, n, SEED)
    sd = np.sqrt(spec.moment(2) - spec.mean() ** 2)
    assert abs(w.W.mean() - 2.0) <= 3 * sd / np.sqrt(n)
    assert w.theta == 2.0


def test_gamma_third_moment():
    spec = WeightSpec("gamma", shape=2.0, scale=1.0)
    assert spec.moment(3) == pytest.approx(24.0)  # 2*3*4
    n = 60_000
    w = sample_empirical_weights(spec, n, SEED)
    third = w.W ** 3
    assert abs(third.mean() - 24.0) <= 3 * third.std() / np.sqrt(n)


def test_moments_er_example():
    lam_n, lam, n = 2.5, 2.0, 50
    w = EmpiricalWeights(n=n, W=np.full(n, np.sqrt(lam_n * lam)), theta=lam)
    m = moments(w)
    assert m.gamma[2] == pytest.approx(lam_n, rel=1e-12)
    assert m.kappa == {1: 0.0, 2: 0.0}  # max weight below sqrt(n theta)


def test_moments_direct_arithmetic():
    w = EmpiricalWeights(n=3, W=np.array([1.0, 2.0, 3.0]), theta=2.0)
    m = moments(w)
    assert m.gamma[2] == pytest.approx(14.0 / 6.0, rel=1e-14)
    assert m.gamma[0] == pytest.approx(1.0 / 2.0)  # 1/theta
    assert m.gamma[1] == pytest.approx(m.lambda_n / (3 * 2.0), rel=1e-14)


def test_kappa_markov_holder_inequality():
    # kappa_p <= Gamma_3 (n theta)^{-(3-p)/2}, with excess triggered on purpose
    w = EmpiricalWeights(n=4, W=np.array([0.5, 0.5, 0.5, 10.0]), theta=1.0)
    m = moments(w)
    for p in (1, 2):
        assert m.kappa[p] <= m.gamma[p]
        assert m.kappa[p] <= m.gamma[3] * (4 * 1.0) ** (-(3 - p) / 2) + 1e-12


def test_size_biased_mean_identity():
    spec = WeightSpec("gamma", shape=2.0, scale=1.5)
    w = sample_empirical_weights(spec, 500, SEED)
    m = moments(w)
    # empirical size-biased mean: sum W^2 / Lambda = Gamma_2 / Gamma_1 exactly
    assert (w.W ** 2).sum() / w.lambda_n == pytest.approx(
        m.gamma[2] / m.gamma[1], rel=1e-12)


def test_size_biased_families():
    assert WeightSpec("constant", c=2.0).size_biased() == WeightSpec("constant", c=2.0)
    fd = WeightSpec("finite", values=(1.0, 3.0), probs=(0.5, 0.5)).size_biased()
    assert fd.values == (1.0, 3.0)
    assert fd.probs == pytest.approx((0.25, 0.75))
    g = WeightSpec("gamma", shape=2.0, scale=0.5).size_biased()
    assert (g.shape, g.scale) == (3.0, 0.5)
    # mean of the size-biased law is E[W^2]/E[W]
    base = WeightSpec("gamma", shape=2.0, scale=0.5)
    assert g.mean() == pytest.approx(base.moment(2) / base.mean())


def test_laplace_closed_forms():
    assert WeightSpec("constant", c=0.7).laplace() == pytest.approx(np.exp(-0.7))
    g = WeightSpec("gamma", shape=2.0, scale=1.0)
    assert g.laplace() == pytest.approx(2.0 ** -2)
    fd = WeightSpec("finite", values=(1.0, 2.0), probs=(0.3, 0.7))
    assert fd.laplace() == pytest.approx(0.3 * np.exp(-1) + 0.7 * np.exp(-2))


# ---- Wasserstein -----------------------------------------------------------------------


def test_wasserstein_identical_laws():
    g = WeightSpec("gamma", shape=2.0, scale=1.0)
    assert wasserstein_1d(g, g) == pytest.approx(0.0, abs=1e-10)
    c = WeightSpec("constant", c=1.5)
    assert wasserstein_1d(c, c) == 0.0


def test_wasserstein_point_masses():
    a = WeightSpec("constant", c=1.0)
    b = WeightSpec("constant", c=3.5)
    assert wasserstein_1d(a, b) == pytest.approx(2.5)


def test_wasserstein_shifted_uniform():
    # quantile functions differ by exactly 1 everywhere
    a = WeightSpec("finite", values=(1.0, 2.0), probs=(0.5, 0.5))
    b = WeightSpec("finite", values=(2.0, 3.0), probs=(0.5, 0.5))
    assert wasserstein_1d(a, b) == pytest.approx(1.0)


def _grid_w1(a, b, k=200_001):
    # independent oracle: quantile coupling on a fine uniform grid
    u = (np.arange(k) + 0.5) / k
    return float(np.mean(np.abs(a.quantile(u) - b.quantile(u))))


def test_wasserstein_gamma_vs_gamma_quadrature():
    a = WeightSpec("gamma", shape=2.0, scale=1.0)
    b = WeightSpec("gamma", shape=3.0, scale=1.0)
    assert wasserstein_1d(a, b) == pytest.approx(_grid_w1(a, b), rel=1e-3)


def test_wasserstein_sample_vs_spec_matches_grid_oracle():
    rng = np.random.default_rng(5)
    sample = rng.gamma(2.0, 1.0, size=400)
    spec = WeightSpec("gamma", shape=2.0, scale=1.0)
    exact = wasserstein_1d(sample, spec)
    # oracle: empirical quantile vs spec quantile on a fine grid
    k = 400_000
    u = (np.arange(k) + 0.5) / k
    emp_q = np.sort(sample)[np.minimum((u * 400).astype(int), 399)]
    oracle = float(np.mean(np.abs(emp_q - spec.quantile(u))))
    assert exact == pytest.approx(oracle, rel=2e-3)


def test_wasserstein_sample_vs_finite_spec_exact():
    spec = WeightSpec("finite", values=(1.0, 2.0), probs=(0.5, 0.5))
    # hand-computable: sample {1, 2, 2, 2}; empirical quantile steps at 1/4
    sample = np.array([2.0, 1.0, 2.0, 2.0])
    # segments: [0,.25):|1-1|=0; [.25,.5):|2-1|=1; [.5,1):|2-2|=0
    assert wasserstein_1d(sample, spec) == pytest.approx(0.25)


def test_wasserstein_unsupported_pair():
    class Weird:
        pass

    with pytest.raises(ValueError, match="unsupported"):
        wasserstein_1d(WeightSpec("gamma", shape=1.0, scale=1.0), Weird())


def test_empirical_weights_validation():
    with pytest.raises(ValueError):
        EmpiricalWeights(n=2, W=np.array([1.0, -1.0]), theta=1.0)
    with pytest.raises(ValueError):
        EmpiricalWeights(n=3, W=np.array([1.0, 1.0]), theta=1.0)


def test_spec_validation():
    with pytest.raises(ValueError):
        WeightSpec("constant", c=0.0)
    with pytest.raises(ValueError):
        WeightSpec("finite", values=(1.0,), probs=(0.7,))
    with pytest.raises(ValueError):
        WeightSpec("gamma", shape=-1.0, scale=1.0)
    with pytest.raises(ValueError):
        WeightSpec("zeta")


def test_exponential_helper():
    e = exponential(1.0)
    assert e.mean() == pytest.approx(1.0)
    assert e.moment(6) == pytest.approx(720.0)  # 6!


@settings(max_examples=40, deadline=None)
@given(st.floats(0.2, 5.0), st.floats(0.2, 4.0),
       st.lists(st.floats(0.01, 0.99), min_size=3, max_size=6))
def test_quantile_monotone_and_cdf_consistent(shape, scale, us):
    spec = WeightSpec("gamma", shape=shape, scale=scale)
    q = spec.quantile(np.sort(np.asarray(us)))
    assert np.all(np.diff(q) >= 0)
    assert np.allclose(spec.cdf(q), np.sort(us), atol=1e-9)


def test_config_round_trip():
    for spec in (WeightSpec("constant", c=1.2),
                 WeightSpec("finite", values=(1.0, 2.0), probs=(0.4, 0.6)),
                 WeightSpec("gamma", shape=2.0, scale=0.7)):
        assert WeightSpec.from_config(spec.to_config()) == spec
