import numpy as np
import pytest
import statsmodels.api as sm
from hypothesis import given, strategies as st
from scipy import stats as sps

from coreperi.stats import CollinearityError, ConvergenceError, design_matrix, ols_fe, poisson_fit, welch_t

samples = st.lists(st.floats(-1e3, 1e3, allow_nan=False), min_size=2, max_size=30)


# ---------------------------------------------------------------- Welch

def test_welch_examples():
    r = welch_t([1, 2, 3, 4, 5], [2, 3, 4, 5, 6])
    assert r.t == pytest.approx(-1.0) and r.dof == pytest.approx(8.0)
    same = welch_t([1, 2, 3], [1, 2, 3])
    assert same.t == 0 and same.p == 1
    far = welch_t([10, 10.001, 9.999], [0, 0.001, -0.001])
    assert abs(far.t) > 100 and far.p < 0.001
    assert welch_t([1, 1], [2, 2]) is None
    with pytest.raises(ValueError):
        welch_t([1], [1, 2])


@given(samples, samples)
def test_welch_matches_scipy(a, b):
    r = welch_t(a, b)
    if r is None:
        return
    ref = sps.ttest_ind(a, b, equal_var=False)
    if np.isfinite(ref.statistic):
        assert r.t == pytest.approx(ref.statistic, rel=1e-7, abs=1e-9)
        assert r.p == pytest.approx(ref.pvalue, rel=1e-6, abs=1e-12)


@given(samples, samples)
def test_welch_antisymmetric(a, b):
    r, s = welch_t(a, b), welch_t(b, a)
    if r is None:
        assert s is None
        return
    assert r.t == -s.t and r.dof == s.dof and r.p == s.p


# ---------------------------------------------------------------- OLS

def test_design_matrix_dummies():
    X, names = design_matrix({"x": [1, 2, 3, 4]}, {"f": ["b", "a", "c", "a"]})
    assert names == ["Intercept", "x", "f[b]", "f[c]"]
    assert X[:, 2].tolist() == [1, 0, 0, 0]


def test_ols_exact_fit():
    x = np.arange(10.0)
    r = ols_fe(3.0 + 2.5 * x, {"x": x})
    assert r.coefficient("x")[0] == pytest.approx(2.5, abs=1e-9)
    assert r.r2 == pytest.approx(1.0)


def test_ols_matches_statsmodels():
    rng = np.random.default_rng(0)
    n = 200
    x1, x2 = rng.normal(size=n), rng.normal(size=n)
    g = rng.choice(["u", "v", "w"], size=n)
    y = 1 + 0.5 * x1 - 0.2 * x2 + (g == "v") * 0.7 + rng.normal(size=n)
    r = ols_fe(y, {"x1": x1, "x2": x2}, {"g": g}, test=["x1", "x2"])
    X = np.column_stack([np.ones(n), x1, x2, g == "v", g == "w"]).astype(float)
    ref = sm.OLS(y, X).fit()
    assert np.allclose(r.coef, ref.params, atol=1e-10)
    assert np.allclose(r.se, ref.bse, atol=1e-10)
    assert r.adj_r2 == pytest.approx(ref.rsquared_adj)
    ftest = ref.f_test(np.eye(5)[1:3])
    assert r.test_stat == pytest.approx(float(np.squeeze(ftest.fvalue)))
    assert r.test_pvalue == pytest.approx(float(ftest.pvalue))
    assert r.test_df == (2.0, n - 5.0)


@given(st.integers(0, 2**31))
def test_ols_residuals_orthogonal(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(15, 60))
    x = rng.normal(size=(n, 2)) * rng.uniform(0.1, 100)
    g = rng.choice(list("abc"), size=n)
    y = rng.normal(size=n) * 10
    try:
        r = ols_fe(y, {"a": x[:, 0], "b": x[:, 1]}, {"g": g})
    except CollinearityError:
        return
    scale = np.abs(r.design).max() * np.abs(y).max() * n
    assert np.max(np.abs(r.design.T @ r.residuals)) < 1e-8 * scale


def test_ols_collinearity_named():
    x = np.arange(8.0)
    with pytest.raises(CollinearityError) as exc:
        ols_fe(x * 2, {"x": x, "x_twice": 2 * x})
    assert set(exc.value.columns) & {"x", "x_twice"}


def test_ols_noise_f_test_calibrated():
    passes = 0
    for seed in range(20):
        rng = np.random.default_rng(seed)
        n = 1000
        r = ols_fe(rng.normal(size=n), {"noise": rng.normal(size=n)},
                   {"f": rng.choice(list("abcd"), size=n)}, test=["noise"])
        passes += r.test_pvalue > 0.05
    assert passes >= 18


def test_ols_simulation_recovery():
    rng = np.random.default_rng(1)
    n = 2000
    churn = rng.uniform(0, 1, n)
    cores = rng.integers(1, 30, n)
    field = rng.choice(list("abcdef"), size=n)
    effect = {k: v for k, v in zip("abcdef", rng.normal(0, 0.1, 6))}
    y = 0.05 * churn - 0.01 * np.log(cores) + np.array([effect[f] for f in field]) + rng.normal(0, 0.05, n)
    r = ols_fe(y, {"churn": churn, "log_cores": np.log(cores)}, {"field": field})
    for name, truth in (("churn", 0.05), ("log_cores", -0.01)):
        b, se = r.coefficient(name)
        assert abs(b - truth) < 2 * se


def test_ols_needs_rows():
    with pytest.raises(ValueError):
        ols_fe([1.0, 2.0], {"x": [1.0, 2.0]})


# ---------------------------------------------------------------- Poisson

def test_poisson_constant_model():
    y = np.array([0, 1, 2, 5, 3, 1, 0, 4])
    r = poisson_fit(y)
    assert abs(r.coef[0] - np.log(y.mean())) < 1e-6


def test_poisson_matches_statsmodels():
    rng = np.random.default_rng(3)
    n = 500
    x = rng.normal(size=n)
    g = rng.choice(["p", "q"], size=n)
    y = rng.poisson(np.exp(0.3 + 0.4 * x + 0.5 * (g == "q")))
    r = poisson_fit(y, {"x": x}, {"g": g})
    X = np.column_stack([np.ones(n), x, g == "q"]).astype(float)
    ref = sm.GLM(y, X, family=sm.families.Poisson()).fit(tol=1e-12)
    assert np.allclose(r.coef, ref.params, atol=1e-8)
    assert np.allclose(r.se, ref.bse, atol=1e-8)
    assert r.loglik == pytest.approx(ref.llf)


def test_poisson_simulation_recovery():
    rng = np.random.default_rng(4)
    n = 3000
    x = rng.normal(size=n)
    y = rng.poisson(np.exp(1.0 - 0.3 * x))
    r = poisson_fit(y, {"x": x})
    b, se = r.coefficient("x")
    assert abs(b + 0.3) < 2 * se
    assert 0 < r.pseudo_r2 < 1


@given(st.integers(0, 2**31))
def test_poisson_loglik_nondecreasing(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(30, 200))
    x = rng.normal(size=n)
    y = rng.poisson(np.exp(rng.normal() * 0.5 + rng.normal() * x))
    if y.sum() == 0:
        return
    try:
        r = poisson_fit(y, {"x": x})
    except ConvergenceError:
        return
    assert all(b >= a - 1e-9 for a, b in zip(r.loglik_trace, r.loglik_trace[1:]))


def test_poisson_all_zero_diagnostic():
    with pytest.raises(ConvergenceError) as exc:
        poisson_fit(np.zeros(10, dtype=int), {"x": np.arange(10.0)})
    assert exc.value.grad_norm >= 0


def test_poisson_rejects_bad_counts():
    with pytest.raises(ValueError):
        poisson_fit([1.5, 2.0])
    with pytest.raises(ValueError):
        poisson_fit([-1, 2])


def test_summary_text():
    x = np.arange(20.0)
    r = ols_fe(x + np.sin(x), {"x": x})
    text = r.summary()
    assert "OLS regression, n = 20" in text and "joint F test" in text
