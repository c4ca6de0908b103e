import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate as sci_integrate, stats

from ppclust.models import Family, ModelSpec, Tail, base_quantile, generate_paths
from ppclust.oracles import (
    EnumerationLimitError,
    ExactEvent,
    UnsupportedModel,
    ad1_gap_exact_iid,
    aim_gap_exact,
    armax_max_leq_prob,
    cluster_prob_enum,
    cluster_prob_exact,
    enumerate_patterns,
    exact_prob,
    limit_count_law,
    limit_lambda_cluster,
    limit_lambda_Mx,
    limit_laplace,
    limit_oracle,
    marginal_laplace_deficit,
    pair_prob_exact,
    theta_exact,
)
from ppclust.pointproc import ClusterEvent, ObservableSet, TestFunction

IID = ModelSpec()
MM2 = ModelSpec(Family.MOVING_MAX, window_m=2)
MM3 = ModelSpec(Family.MOVING_MAX, window_m=3)
ARMAX = ModelSpec(Family.ARMAX, armax_alpha=0.5)
TENT = TestFunction.tent(1.0, 3.0, 1.0, 2.0)


def u_at(model, p):
    return base_quantile(model, p)


# ----------------------------------------------------------------------------
# limit oracles


def test_theta_values():
    assert theta_exact(IID) == 1.0
    for m in (1, 2, 3, 4):
        assert theta_exact(ModelSpec(Family.MOVING_MAX, window_m=m)) == pytest.approx(1 / m)
    assert theta_exact(ARMAX) == pytest.approx(0.5)
    assert theta_exact(ModelSpec(Family.ARMAX, armax_alpha=0.5, alpha=2.0)) == pytest.approx(0.75)
    o = limit_oracle(MM3)
    assert o.cluster_size == 3 and o.center_intensity(2.0) == pytest.approx(1 / 6)


@given(st.floats(0.01, 100))
@settings(max_examples=50, deadline=None)
def test_lambda_mx_identity(x):
    for model in (IID, MM2, MM3, ModelSpec(alpha=2.0)):
        assert limit_lambda_Mx(model, x) == theta_exact(model) * x ** -model.alpha


def test_lambda_mx_examples():
    assert limit_lambda_Mx(MM2, 1.0) == 0.5
    assert limit_lambda_Mx(IID, 2.0) == 0.5
    assert limit_lambda_Mx(IID, math.inf) == 0.0
    with pytest.raises(UnsupportedModel):
        limit_lambda_Mx(ARMAX, 1.0)
    with pytest.raises(ValueError):
        limit_lambda_Mx(IID, 0.0)


def test_lambda_cluster_examples():
    assert limit_lambda_cluster(MM2, ClusterEvent.parse("(2,inf]>=2"), 1.0) == pytest.approx(0.25)
    assert limit_lambda_cluster(MM2, ClusterEvent.parse("(1,inf]>=3"), 1.0) == 0.0
    assert limit_lambda_cluster(MM2, ClusterEvent.parse("(0.5,inf]>=1"), 1.0) == limit_lambda_Mx(MM2, 1.0)
    with pytest.raises(UnsupportedModel):
        limit_lambda_cluster(MM2, ClusterEvent.parse("(1,2]>=1"), 1.0)


@given(st.floats(0.1, 10), st.floats(0.1, 10), st.integers(1, 4), st.floats(0.0, 5.0), st.integers(0, 2))
@settings(max_examples=100, deadline=None)
def test_lambda_cluster_monotone(x, y, k, dx, dk):
    ev = lambda yy, kk: ClusterEvent(((ObservableSet.above(yy), kk),))
    base = limit_lambda_cluster(MM3, ev(y, k), x)
    assert limit_lambda_cluster(MM3, ev(y, k), x + dx) <= base
    assert limit_lambda_cluster(MM3, ev(y + dx, k), x) <= base
    assert limit_lambda_cluster(MM3, ev(y, k + dk), x) <= base


def _laplace_by_y(model, f):
    # independent evaluation in the original variable y over the support of f
    m, th, a = model.window, theta_exact(model), model.alpha
    g = lambda y: -math.expm1(-m * float(f(y))) * th * a * y ** (-a - 1)
    val, _ = sci_integrate.quad(g, float(f.xs[0]), float(f.xs[-1]), points=list(map(float, f.xs[1:-1])),
                                epsabs=1e-13)
    return math.exp(-val)


@pytest.mark.parametrize("model", [IID, MM2, MM3, ModelSpec(alpha=1.5)])
def test_laplace_matches_direct_quadrature(model):
    for f in (TENT, TestFunction.tent(0.2, 0.5, 2.0), TestFunction.tent(5.0, 20.0, 0.3, 6.0)):
        assert limit_laplace(model, f) == pytest.approx(_laplace_by_y(model, f), abs=1e-9)


def test_laplace_zero_and_range():
    assert limit_laplace(IID, TestFunction.zero()) == 1.0
    v1, v2 = limit_laplace(IID, TENT), limit_laplace(MM2, TENT)
    assert 0 < v1 < 1 and 0 < v2 < 1


def test_count_law_examples():
    pmf = limit_count_law(IID, ObservableSet.parse("(1,inf]"))
    assert pmf[0] == pytest.approx(math.exp(-1))
    np.testing.assert_allclose(pmf[:6], stats.poisson.pmf(np.arange(6), 1.0), rtol=1e-14)
    pmf2 = limit_count_law(MM2, ObservableSet.parse("(1,inf]"))
    assert pmf2[1] == 0.0
    assert pmf2[2] == pytest.approx(math.exp(-0.5) * 0.5)
    assert pmf2[2] == pytest.approx(0.3033, abs=1e-4)
    far = limit_count_law(IID, ObservableSet.above(1e300))
    assert far[0] == pytest.approx(1.0)


@pytest.mark.parametrize("model", [IID, MM2, MM3])
@pytest.mark.parametrize("x", [0.1, 0.5, 1.0, 3.0])
def test_count_law_sums_to_one(model, x):
    assert abs(limit_count_law(model, ObservableSet.above(x)).sum() - 1) < 1e-12


def test_count_law_needs_ray():
    with pytest.raises(UnsupportedModel):
        limit_count_law(IID, ObservableSet.outside(1.0))


# ----------------------------------------------------------------------------
# exact finite-n probabilities


def test_exact_prob_examples():
    assert exact_prob(MM2, "max_leq", 10, u_at(MM2, 0.99)) == pytest.approx(0.99 ** 11, rel=1e-12)
    assert exact_prob(MM2, ExactEvent.MAX_LEQ, 10, u_at(MM2, 0.99)) == pytest.approx(0.8953, abs=1e-4)
    v = exact_prob(MM3, ExactEvent.RUNS, 3, u_at(MM3, 0.999))
    assert v == pytest.approx(0.999 ** 4 * 0.001, rel=1e-9)
    assert v == pytest.approx(9.960e-4, rel=1e-4)


@pytest.mark.parametrize("k", [1, 2, 5, 9])
def test_exact_prob_iid_binomial(k):
    p = 0.93
    u = u_at(IID, p)
    assert exact_prob(IID, "max_leq", k, u) == pytest.approx(stats.binom.pmf(k, k, p), rel=1e-12)
    assert exact_prob(IID, "block_tail", k, u) == pytest.approx(1 - p ** k, rel=1e-12)
    assert exact_prob(IID, "runs", k, u) == pytest.approx(p ** (k - 1) * (1 - p), rel=1e-12)


def _brute(model, q, u, pred):
    # enumerate the Bernoulli string of the q + w - 1 base variables directly
    w = model.window
    F = float(np.exp(-u ** -model.alpha)) if model.base_tail is Tail.FRECHET else 1 - u ** -model.alpha
    total = 0.0
    for bits in itertools.product((0, 1), repeat=q + w - 1):
        b = np.array(bits)
        x = np.array([b[i:i + w].max() for i in range(q)])
        if pred(x):
            total += F ** (b.size - b.sum()) * (1 - F) ** b.sum()
    return total


@pytest.mark.parametrize("model", [IID, MM2, MM3])
@pytest.mark.parametrize("k", [1, 2, 3, 6])
def test_exact_prob_vs_brute_force(model, k):
    u = u_at(model, 0.8)
    assert exact_prob(model, "max_leq", k, u) == pytest.approx(_brute(model, k, u, lambda x: not x.any()), rel=1e-12)
    assert exact_prob(model, "block_tail", k, u) == pytest.approx(_brute(model, k, u, lambda x: x.any()), rel=1e-12)
    runs = _brute(model, k, u, lambda x: x[-1] == 1 and not x[:-1].any())
    assert exact_prob(model, "runs", k, u) == pytest.approx(runs, rel=1e-12)


def test_exact_prob_agrees_with_enumeration_exactly():
    u = u_at(MM3, 0.9)
    for k in range(1, 12):
        ev = ClusterEvent(((ObservableSet.above(u), 1),))
        enum = cluster_prob_enum(MM3, ev, k, 1.0)
        assert 1 - exact_prob(MM3, "max_leq", k, u) == pytest.approx(enum, rel=1e-13)


def test_enumeration_limit():
    with pytest.raises(EnumerationLimitError):
        enumerate_patterns(MM3, np.array([1.0]), 40)


def test_exact_prob_errors():
    with pytest.raises(UnsupportedModel):
        exact_prob(ARMAX, "max_leq", 3, 2.0)
    with pytest.raises(ValueError):
        exact_prob(IID, "runs", 0, 2.0)
    with pytest.raises(ValueError):
        exact_prob(IID, "max_leq", 3, 0.0)


def test_armax_max_leq_monte_carlo():
    n, u = 50, 60.0
    x = generate_paths(ARMAX, n, 1, range(20_000))
    p = np.mean(x.max(axis=1) <= u)
    exact = armax_max_leq_prob(ARMAX, n, u)
    assert abs(p - exact) <= 3 * math.sqrt(exact * (1 - exact) / x.shape[0])


def test_pair_prob_exact_monte_carlo():
    x = generate_paths(MM3, 8, 2, range(200_000)) / 4.0
    b1, b2 = ObservableSet.above(1.0), ObservableSet.above(2.0)
    # four lags checked at once: 4 stderr
    for lag in (1, 2, 3, 5):
        mc = np.mean((x[:, 0] > 1.0) & (x[:, lag] > 2.0))
        ex = pair_prob_exact(MM3, b1, b2, lag, 4.0)
        assert abs(mc - ex) <= 4 * math.sqrt(ex * (1 - ex) / x.shape[0])
    # independent beyond the window
    p1 = pair_prob_exact(MM3, b1, b1, 0, 4.0)
    assert pair_prob_exact(MM3, b1, b1, 7, 4.0) == pytest.approx(p1 * p1, rel=1e-12)


@pytest.mark.parametrize("model", [IID, MM2, MM3])
def test_cluster_dp_matches_enumeration(model):
    ev = ClusterEvent.parse("(1,inf]>=2; (2.5,inf]>=1")
    scale = base_quantile(model, 0.7)
    for q in range(0, 10):
        assert cluster_prob_exact(model, ev, q, scale) == pytest.approx(
            cluster_prob_enum(model, ev, q, scale), abs=1e-15)


def test_cluster_prob_monte_carlo():
    ev = ClusterEvent.parse("(1,inf]>=2")
    scale = base_quantile(MM2, 0.8)
    x = generate_paths(MM2, 6, 4, range(50_000)) / scale
    mc = np.mean(np.count_nonzero(x > 1.0, axis=1) >= 2)
    ex = cluster_prob_exact(MM2, ev, 6, scale)
    assert abs(mc - ex) <= 3 * math.sqrt(ex * (1 - ex) / x.shape[0])


def test_gap_closed_forms():
    n, r = 1000, 64
    u = 1000.0
    F = math.exp(-1 / u)
    assert aim_gap_exact(MM2, n, u, r) == pytest.approx(abs(F ** (n + 1) - F ** ((r + 1) * (n // r))), rel=1e-12)
    assert aim_gap_exact(IID, n, u, n) == 0.0
    q = marginal_laplace_deficit(IID, TENT, 500.0)
    assert ad1_gap_exact_iid(IID, TENT, n, r, 500.0) == pytest.approx(abs((1 - q) ** n - (1 - q) ** (r * (n // r))))
    with pytest.raises(UnsupportedModel):
        ad1_gap_exact_iid(MM2, TENT, n, r, 500.0)


def test_marginal_laplace_deficit_monte_carlo():
    scale = 3.0
    x = generate_paths(MM2, 1, 5, range(200_000))[:, 0] / scale
    vals = -np.expm1(-TENT(x))
    ex = marginal_laplace_deficit(MM2, TENT, scale)
    assert abs(vals.mean() - ex) <= 3 * vals.std() / math.sqrt(vals.size)
