import itertools

import numpy as np
import pytest
from scipy import linalg, optimize, stats

from countnet.design import CountSeries, ModelOrder, build_design, build_target
from countnet.dists import pmf_moments, truncated_poisson_pmf
from countnet.gnari import (
    GnariModel,
    conditional_mean,
    conditional_variance,
    fit_gnari_cls,
    gnari_autocovariance,
    gnari_bounds,
    gnari_conditional_pmf,
    gnari_log_likelihood,
    model_from_fit,
    predict_gnari,
    sandwich_covariance,
    simulate_gnari,
)
from countnet.network import build_network
from countnet.ngnar import SOFTPLUS, NgnarModel, simulate_ngnar

SINGLE = build_network([[0]])


def table1_model(net):
    return GnariModel.from_coefficients(net, [0.5], [[0.4]], 10.0)


# --- model construction ----------------------------------------------------------


def test_invalid_coefficients_rejected(fig1):
    with pytest.raises(ValueError):
        GnariModel.from_coefficients(fig1, [1.2], [[0.1]], 1.0)
    with pytest.raises(ValueError):
        GnariModel.from_coefficients(fig1, [0.5], [[-0.1]], 1.0)
    with pytest.raises(ValueError):
        GnariModel.from_coefficients(fig1, [0.5], [[0.1]], -1.0)


def test_local_innovation_means(fig1):
    m = GnariModel.from_coefficients(fig1, [0.2], [[0.3]], [1, 2, 3, 4, 5])
    np.testing.assert_array_equal(m.innovation_means, [1, 2, 3, 4, 5])
    assert m.order.local_intercept


# --- simulation ------------------------------------------------------------------


def test_simulate_iid_poisson(fig1):
    m = GnariModel.from_coefficients(fig1, [0.0], [[0.0]], 10.0)
    s = simulate_gnari(m, 20_000, 0, np.random.default_rng(1))
    assert abs(s.data.mean() - 10) <= 0.1


def test_simulate_absorbing_zero(fig1):
    m = GnariModel.from_coefficients(fig1, [0.5], [[0.4]], 0.0)
    s = simulate_gnari(m, 50, 0, np.random.default_rng(1), initial=np.zeros((5, 1)))
    assert s.data.sum() == 0


def test_simulate_stationary_mean(fig1):
    m = table1_model(fig1)
    s = simulate_gnari(m, 10_000, 500, np.random.default_rng(5))
    mu = m.stationary_mean()
    np.testing.assert_allclose(mu, 100.0)
    # node means of a strongly autocorrelated series: allow a generous Monte Carlo band
    assert np.all(np.abs(s.data.mean(axis=1) - 100) < 5)


def test_simulate_is_reproducible(fig1):
    m = table1_model(fig1)
    a = simulate_gnari(m, 100, 10, np.random.default_rng(3))
    b = simulate_gnari(m, 100, 10, np.random.default_rng(3))
    np.testing.assert_array_equal(a.data, b.data)


def test_simulate_warns_outside_stationary_region(fig1):
    m = GnariModel.from_coefficients(fig1, [0.7], [[0.4]], 1.0)
    with pytest.warns(RuntimeWarning):
        simulate_gnari(m, 5, 0, np.random.default_rng(0))


# --- conditional moments and pmf -----------------------------------------------


def test_conditional_moments_zero_history(fig1):
    m = table1_model(fig1)
    np.testing.assert_allclose(conditional_mean(m, np.zeros((5, 1))), 10.0)
    np.testing.assert_allclose(conditional_variance(m, np.zeros((5, 1))), 10.0)


def test_conditional_moments_degenerate_thinning():
    m = GnariModel.from_coefficients(SINGLE, [1.0], [[]], 0.0)
    assert conditional_mean(m, [[7]])[0] == 7
    assert conditional_variance(m, [[7]])[0] == 0


def test_conditional_moments_formula(fig1):
    m = table1_model(fig1)
    hist = np.full((5, 1), 100.0)
    np.testing.assert_allclose(conditional_mean(m, hist), 100.0)
    for i in range(5):
        w = fig1.stage_weights(i, 1)
        expected = 10 + 25 + sum(0.4 * wq * (1 - 0.4 * wq) * 100 for wq in w.values())
        assert conditional_variance(m, hist)[i] == pytest.approx(expected)


def test_conditional_moments_against_simulation(fig1):
    m = table1_model(fig1)
    hist = np.array([[3], [8], [1], [6], [4]])
    rng = np.random.default_rng(9)
    draws = np.array(
        [simulate_gnari(m, 1, 0, rng, initial=hist).data[:, 0] for _ in range(20_000)]
    )
    mean, var = conditional_mean(m, hist), conditional_variance(m, hist)
    se = np.sqrt(var / draws.shape[0])
    assert np.all(np.abs(draws.mean(axis=0) - mean) < 4 * se)
    assert np.all(np.abs(draws.var(axis=0) / var - 1) < 0.05)


def test_pmf_zero_history_is_poisson(fig1):
    m = GnariModel.from_coefficients(fig1, [0.5], [[0.4]], 4.0)
    law = gnari_conditional_pmf(m, np.zeros((5, 1)), 0)
    ref = truncated_poisson_pmf(4.0, 1e-10)
    np.testing.assert_allclose(law.pmf, ref / ref.sum(), atol=1e-14)
    assert law.truncated_mass < 1e-10


def test_pmf_single_node_binomial():
    m = GnariModel.from_coefficients(SINGLE, [0.5], [[]], 0.0)
    law = gnari_conditional_pmf(m, [[3]], 0)
    np.testing.assert_allclose(law.pmf, stats.binom.pmf(np.arange(4), 3, 0.5), atol=1e-15)


def test_pmf_tolerance_validated(fig1):
    m = table1_model(fig1)
    for tol in (0.0, 0.01):
        with pytest.raises(ValueError):
            gnari_conditional_pmf(m, np.zeros((5, 1)), 0, tail_tol=tol)


def enumerated_pmf(model, hist, node, tail_tol=1e-10):
    """Sum over every thinning outcome of every counted individual, then add the Poisson."""
    net = model.net
    c = model.coefficients
    probs = []
    for j in range(1, model.order.p + 1):
        x = hist[:, -j]
        probs += [c.alpha[node, j - 1]] * int(x[node])
        for r, b in enumerate(c.beta[j - 1], start=1):
            for q, w in net.stage_weights(node, r).items():
                probs += [b * w] * int(x[q])
    thin = np.zeros(len(probs) + 1)
    for bits in itertools.product((0, 1), repeat=len(probs)):
        w = 1.0
        for bit, pr in zip(bits, probs):
            w *= pr if bit else 1 - pr
        thin[sum(bits)] += w
    pois = truncated_poisson_pmf(c.intercept[node], tail_tol)
    out = np.zeros(thin.size + pois.size - 1)
    for a, pa in enumerate(thin):
        for b, pb in enumerate(pois):
            out[a + b] += pa * pb
    return out / out.sum()


@pytest.mark.parametrize("node", [0, 2, 4])
def test_pmf_matches_enumeration(fig1, node):
    order = ModelOrder(p=2, s=(2, 1), intercept_mode="innovation")
    m = GnariModel(fig1, order, [0.3, 0.4, 0.6, 0.2, 0.5, 2.5])
    hist = np.array([[1, 2], [0, 1], [2, 1], [1, 0], [1, 1]])
    law = gnari_conditional_pmf(m, hist, node)
    ref = enumerated_pmf(m, hist, node)
    assert 0.5 * np.abs(law.pmf - ref).sum() <= 1e-8


def test_pmf_moments_match_conditional_moments(fig1):
    order = ModelOrder(p=1, s=(2,), intercept_mode="innovation")
    m = GnariModel(fig1, order, [0.5, 0.3, 0.2, 6.0])
    hist = np.array([[12], [30], [7], [0], [21]])
    mean, var = conditional_mean(m, hist), conditional_variance(m, hist)
    for i in range(5):
        mu, v = pmf_moments(gnari_conditional_pmf(m, hist, i, 1e-12).pmf)
        assert mu == pytest.approx(mean[i], abs=1e-8)
        assert v == pytest.approx(var[i], abs=1e-7)


def test_log_likelihood_finite(fig1):
    m = table1_model(fig1)
    s = simulate_gnari(m, 6, 50, np.random.default_rng(2))
    ll = gnari_log_likelihood(m, s)
    assert np.isfinite(ll) and ll < 0


# --- estimation -------------------------------------------------------------------


def test_exact_recovery_noiseless():
    # alpha = 1, lambda = 3 on one node: X_t = X_{t-1} + 3 exactly
    s = CountSeries(np.array([[5 + 3 * t for t in range(30)]]))
    fit = fit_gnari_cls(s, SINGLE, ModelOrder(p=1, s=(0,), intercept_mode="innovation"), covariance=False)
    np.testing.assert_allclose(fit.values, [1.0, 3.0], atol=1e-10)
    assert fit.info["solver"] == "normal-equations"


def test_fit_feasible_interior_is_normal_equations(fig1):
    s = simulate_gnari(table1_model(fig1), 500, 100, np.random.default_rng(4))
    order = ModelOrder.simple(1, 1, intercept_mode="innovation")
    fit = fit_gnari_cls(s, fig1, order)
    X, Y = build_design(s, fig1, order), build_target(s, 1)
    np.testing.assert_allclose(fit.values, np.linalg.lstsq(X, Y, rcond=None)[0], rtol=1e-9)
    assert fit.converged and fit.objective >= 0
    assert fit.info["covariance_valid"]


def test_fit_objective_not_worse_than_truth(fig1):
    m = table1_model(fig1)
    order = m.order
    for seed in range(5):
        s = simulate_gnari(m, 200, 50, np.random.default_rng(seed))
        fit = fit_gnari_cls(s, fig1, order, covariance=False)
        X, Y = build_design(s, fig1, order), build_target(s, 1)
        r0 = Y - X @ m.params.values
        assert fit.objective <= r0 @ r0 * (1 + 1e-8)


def test_fit_negative_dependence_clipped_to_bound(fig1):
    # NGNAR data with a negative neighbour effect: the unconstrained beta is negative
    ng = NgnarModel.from_coefficients(fig1, [0.1], [[-0.8]], 10.0, SOFTPLUS)
    s = simulate_ngnar(ng, 500, 100, np.random.default_rng(8))
    order = ModelOrder.simple(1, 1, intercept_mode="innovation")
    X, Y = build_design(s, fig1, order), build_target(s, 1)
    assert np.linalg.lstsq(X, Y, rcond=None)[0][1] < 0
    fit = fit_gnari_cls(s, fig1, order)
    lo, hi = gnari_bounds(order, 5)
    oracle = optimize.lsq_linear(X, Y, bounds=(lo, hi), tol=1e-14, method="bvls")
    assert fit.values[1] == 0.0
    assert fit.info["kkt"] <= 1e-8 and fit.converged
    assert fit.info["at_bound"] and not fit.info["covariance_valid"]
    np.testing.assert_allclose(fit.values, oracle.x, rtol=1e-7, atol=1e-9)


def test_fit_rank_deficient_reports_columns(fig1):
    s = CountSeries(np.ones((5, 20), dtype=int) * 4)
    with pytest.raises(np.linalg.LinAlgError, match="columns"):
        fit_gnari_cls(s, fig1, ModelOrder.simple(1, 1, intercept_mode="innovation"))


def test_fit_too_short(fig1):
    with pytest.raises(ValueError):
        fit_gnari_cls(CountSeries(np.ones((5, 1), int)), fig1, ModelOrder.simple(1, 1))


# --- covariance ---------------------------------------------------------------------


def test_sandwich_homoskedastic_matches_ols():
    rng = np.random.default_rng(6)
    D = np.column_stack([rng.normal(size=400), rng.normal(size=400), np.ones(400)])
    sigma2 = 2.5
    classical = sigma2 * np.linalg.inv(D.T @ D)
    np.testing.assert_allclose(sandwich_covariance(D, np.full(400, sigma2), 80), classical, rtol=1e-6)


def test_covariance_scales_with_length(fig1):
    m = table1_model(fig1)
    order = m.order
    se = {}
    for T in (200, 500):
        vals = []
        for seed in range(20):
            s = simulate_gnari(m, T, 100, np.random.default_rng(100 + seed))
            vals.append(fit_gnari_cls(s, fig1, order).standard_errors()[0])
        se[T] = np.mean(vals)
    assert se[200] / se[500] == pytest.approx(np.sqrt(2.5), rel=0.1)


# --- autocovariance -----------------------------------------------------------------


def test_autocovariance_iid(fig1):
    m = GnariModel.from_coefficients(fig1, [0.0], [[0.0]], 10.0)
    g = gnari_autocovariance(m, 3)
    np.testing.assert_allclose(g[0], 10 * np.eye(5))
    np.testing.assert_allclose(g[1:], 0.0)


def test_autocovariance_inar1():
    m = GnariModel.from_coefficients(SINGLE, [0.5], [[]], 5.0)
    g = gnari_autocovariance(m, 2)
    assert g[1, 0, 0] / g[0, 0, 0] == pytest.approx(0.5, abs=1e-10)
    # INAR(1) variance equals its mean lambda / (1 - alpha)
    assert g[0, 0, 0] == pytest.approx(10.0, rel=1e-10)


def test_autocovariance_matches_lyapunov_solver(fig1):
    order = ModelOrder(p=2, s=(1, 1), intercept_mode="innovation")
    m = GnariModel(fig1, order, [0.3, 0.2, 0.1, 0.15, 4.0])
    g = gnari_autocovariance(m, 4)
    from countnet.design import companion_matrix

    A = companion_matrix(order, m.params, fig1)
    mu = m.stationary_mean()
    Q = np.zeros((10, 10))
    Q[:5, :5] = np.diag(sum((Aj * (1 - Aj)) @ mu for Aj in m.thinning_matrices()) + m.innovation_means)
    G = linalg.solve_discrete_lyapunov(A, Q)
    for h in range(5):
        np.testing.assert_allclose(g[h], (np.linalg.matrix_power(A, h) @ G)[:5, :5], rtol=1e-9, atol=1e-9)
    assert np.allclose(g[0], g[0].T)
    assert np.linalg.eigvalsh(g[0]).min() >= -1e-10


def test_autocovariance_requires_stationarity(fig1):
    m = GnariModel.from_coefficients(fig1, [0.7], [[0.4]], 1.0)
    with pytest.raises(ValueError):
        gnari_autocovariance(m, 1)


# --- prediction ---------------------------------------------------------------------


def test_predict_zero_history_two_step(fig1):
    m = table1_model(fig1)
    f = predict_gnari(m, np.zeros((5, 1)), 3)
    np.testing.assert_allclose(f[:, 0], 10.0)
    # weights sum to one per node, so the second step is lambda (1 + alpha + beta)
    np.testing.assert_allclose(f[:, 1], 10 * (1 + 0.5 + 0.4))
    np.testing.assert_allclose(f[:, 2], 10 + 0.9 * 19)


def test_predict_constant_when_no_dynamics(fig1):
    m = GnariModel.from_coefficients(fig1, [0.0], [[0.0]], [1, 2, 3, 4, 5])
    np.testing.assert_allclose(predict_gnari(m, np.full((5, 1), 50), 4), np.tile([[1], [2], [3], [4], [5]], 4))


def test_predict_geometric_decay():
    m = GnariModel.from_coefficients(SINGLE, [0.5], [[]], 0.0)
    np.testing.assert_allclose(predict_gnari(m, [[8]], 3)[0], [4, 2, 1])


def test_predict_from_fit_needs_network(fig1):
    s = simulate_gnari(table1_model(fig1), 100, 10, np.random.default_rng(0))
    fit = fit_gnari_cls(s, fig1, ModelOrder.simple(1, 1, intercept_mode="innovation"))
    with pytest.raises(ValueError):
        predict_gnari(fit, s.data, 2)
    assert predict_gnari(fit, s.data, 2, fig1).shape == (5, 2)
    assert isinstance(model_from_fit(fit, fig1), GnariModel)
    with pytest.raises(ValueError):
        predict_gnari(fit, np.zeros((5, 0)), 2, fig1)
