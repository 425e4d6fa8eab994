"""Welch t-test, OLS with fixed effects, and Poisson regression by IRLS.

Classical (non-robust) standard errors throughout.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy import linalg, special
from scipy import stats as sps


class CollinearityError(ValueError):
    def __init__(self, columns: Sequence[str]):
        self.columns = list(columns)
        super().__init__(f"design matrix is rank deficient; collinear column(s): {', '.join(self.columns)}")


class ConvergenceError(RuntimeError):
    def __init__(self, message: str, grad_norm: float, n_iter: int):
        self.grad_norm = grad_norm
        self.n_iter = n_iter
        super().__init__(f"{message} (gradient norm {grad_norm:.3g} after {n_iter} iterations)")


@dataclass(frozen=True)
class WelchResult:
    t: float
    dof: float
    p: float


def welch_t(a: Sequence[float], b: Sequence[float]) -> WelchResult | None:
    """Unequal-variance two-sample t-test, two-sided.

    Returns ``None`` when both samples have zero variance.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if len(a) < 2 or len(b) < 2:
        raise ValueError("each sample needs at least two values")
    va = a.var(ddof=1) / len(a)
    vb = b.var(ddof=1) / len(b)
    se2 = va + vb
    if se2 == 0.0:
        return None
    t = (a.mean() - b.mean()) / np.sqrt(se2)
    dof = se2 ** 2 / (va ** 2 / (len(a) - 1) + vb ** 2 / (len(b) - 1))
    p = float(min(1.0, 2.0 * sps.t.sf(abs(t), dof)))
    return WelchResult(float(t), float(dof), p)


@dataclass(frozen=True)
class RegressionResult:
    names: tuple[str, ...]
    coef: np.ndarray
    se: np.ndarray
    stat: np.ndarray
    pvalues: np.ndarray
    n_obs: int
    model: str
    r2: float | None = None
    adj_r2: float | None = None
    pseudo_r2: float | None = None
    loglik: float | None = None
    test_kind: str | None = None
    test_columns: tuple[str, ...] = ()
    test_stat: float | None = None
    test_df: tuple[float, ...] = ()
    test_pvalue: float | None = None
    n_iter: int = 0
    loglik_trace: tuple[float, ...] = field(default=(), repr=False)
    residuals: np.ndarray | None = field(default=None, repr=False)
    design: np.ndarray | None = field(default=None, repr=False)

    def coefficient(self, name: str) -> tuple[float, float]:
        k = self.names.index(name)
        return float(self.coef[k]), float(self.se[k])

    def rows(self) -> list[tuple[str, float, float, float, float]]:
        return [(n, float(c), float(s), float(z), float(p))
                for n, c, s, z, p in zip(self.names, self.coef, self.se, self.stat, self.pvalues)]

    def summary(self, show_fe: bool = False) -> str:
        stat_name = "t" if self.model == "ols" else "z"
        lines = [f"{self.model.upper()} regression, n = {self.n_obs}",
                 f"{'term':<32}{'coef':>12}{'se':>12}{stat_name:>9}{'p':>10}"]
        for n, c, s, z, p in self.rows():
            if not show_fe and "[" in n:
                continue
            lines.append(f"{n:<32}{c:>12.5g}{s:>12.4g}{z:>9.3f}{p:>10.4f}")
        if self.model == "ols":
            lines.append(f"R2 = {self.r2:.4f}, adjusted R2 = {self.adj_r2:.4f}")
        else:
            lines.append(f"log-likelihood = {self.loglik:.4f}, McFadden R2 = {self.pseudo_r2:.4f}")
        if self.test_kind is not None:
            dfs = ", ".join(f"{d:g}" for d in self.test_df)
            lines.append(f"joint {self.test_kind} test of {', '.join(self.test_columns)}: "
                         f"{self.test_stat:.4f} (d.f. {dfs}), p = {self.test_pvalue:.4g}")
        return "\n".join(lines)


def design_matrix(predictors: Mapping[str, Sequence[float]],
                  fixed_effects: Mapping[str, Sequence] | None = None,
                  intercept: bool = True) -> tuple[np.ndarray, list[str]]:
    """Columns: intercept, predictors in the given order, then one dummy per
    non-reference level of each fixed effect (lexicographically first level dropped)."""
    cols: list[np.ndarray] = []
    names: list[str] = []
    n = None
    for name, col in predictors.items():
        col = np.asarray(col, dtype=float)
        n = len(col) if n is None else n
        cols.append(col)
        names.append(name)
    for fe, vals in (fixed_effects or {}).items():
        vals = [str(v) for v in vals]
        n = len(vals) if n is None else n
        for level in sorted(set(vals))[1:]:
            cols.append(np.array([v == level for v in vals], dtype=float))
            names.append(f"{fe}[{level}]")
    if n is None:
        raise ValueError("no columns given")
    if any(len(c) != n for c in cols):
        raise ValueError("columns differ in length")
    if intercept:
        cols.insert(0, np.ones(n))
        names.insert(0, "Intercept")
    return np.column_stack(cols), names


def _check_rank(X: np.ndarray, names: Sequence[str]) -> None:
    _, r, perm = linalg.qr(X, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    tol = diag[0] * max(X.shape) * np.finfo(float).eps if len(diag) else 0.0
    rank = int(np.sum(diag > tol))
    if rank < X.shape[1]:
        raise CollinearityError([names[k] for k in sorted(perm[rank:])])


def _lstsq_qr(X: np.ndarray, y: np.ndarray):
    q, r = linalg.qr(X, mode="economic")
    beta = linalg.solve_triangular(r, q.T @ y)
    rinv = linalg.solve_triangular(r, np.eye(r.shape[0]))
    return beta, rinv @ rinv.T


def ols_fe(outcome: Sequence[float], predictors: Mapping[str, Sequence[float]],
           fixed_effects: Mapping[str, Sequence] | None = None,
           test: Sequence[str] | None = None) -> RegressionResult:
    """OLS with dummy-coded fixed effects, solved by QR.

    ``test`` names the predictors for the joint F test (default: all
    non-fixed-effect predictors); the statistic compares restricted and
    unrestricted residual sums of squares.
    """
    y = np.asarray(outcome, dtype=float)
    X, names = design_matrix(predictors, fixed_effects)
    n, k = X.shape
    if n <= k:
        raise ValueError(f"need more observations ({n}) than columns ({k})")
    _check_rank(X, names)
    beta, xtx_inv = _lstsq_qr(X, y)
    resid = y - X @ beta
    ssr = float(resid @ resid)
    dof = n - k
    sigma2 = ssr / dof
    se = np.sqrt(np.diag(xtx_inv) * sigma2)
    with np.errstate(divide="ignore", invalid="ignore"):
        tstat = np.where(se > 0, beta / se, np.inf * np.sign(beta))
    pvals = np.clip(2 * sps.t.sf(np.abs(tstat), dof), 0.0, 1.0)
    sst = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 - ssr / sst if sst > 0 else 1.0
    adj = 1.0 - (1.0 - r2) * (n - 1) / dof

    test = list(predictors) if test is None else list(test)
    f_stat = f_p = None
    f_df: tuple[float, ...] = ()
    if test:
        missing = [t for t in test if t not in names]
        if missing:
            raise KeyError(f"test columns not in the model: {missing}")
        keep = [j for j, nm in enumerate(names) if nm not in test]
        Xr = X[:, keep]
        br, _ = _lstsq_qr(Xr, y)
        ssr_r = float(((y - Xr @ br) ** 2).sum())
        q = len(test)
        f_stat = ((ssr_r - ssr) / q) / sigma2 if sigma2 > 0 else np.inf
        f_p = float(sps.f.sf(f_stat, q, dof)) if np.isfinite(f_stat) else 0.0
        f_df = (float(q), float(dof))
    return RegressionResult(tuple(names), beta, se, tstat, pvals, n, "ols", r2=r2, adj_r2=adj,
                            test_kind="F" if test else None, test_columns=tuple(test),
                            test_stat=f_stat, test_df=f_df, test_pvalue=f_p,
                            residuals=resid, design=X)


def _poisson_ll(y: np.ndarray, eta: np.ndarray) -> float:
    return float(np.sum(y * eta - np.exp(eta) - special.gammaln(y + 1)))


def poisson_fit(counts: Sequence[int], predictors: Mapping[str, Sequence[float]] | None = None,
                fixed_effects: Mapping[str, Sequence] | None = None, test: Sequence[str] | None = None,
                tol: float = 1e-8, max_iter: int = 100) -> RegressionResult:
    """Log-link Poisson regression by iteratively reweighted least squares.

    Stops when the score vector norm drops below ``tol``; steps are halved
    whenever a full step would lower the log-likelihood. Raises
    :class:`ConvergenceError` (with the final gradient norm) when
    ``max_iter`` is reached or the linear predictor diverges.
    """
    y = np.asarray(counts, dtype=float)
    if np.any(y < 0) or np.any(y != np.round(y)):
        raise ValueError("counts must be nonnegative integers")
    X, names = design_matrix(predictors or {}, fixed_effects) if (predictors or fixed_effects) \
        else (np.ones((len(y), 1)), ["Intercept"])
    n, k = X.shape
    _check_rank(X, names)
    beta = np.zeros(k)
    if y.mean() > 0:
        beta[0] = np.log(y.mean())
    eta = X @ beta
    ll = _poisson_ll(y, eta)
    trace = [ll]
    grad_norm = np.inf
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        mu = np.exp(eta)
        grad_norm = float(np.linalg.norm(X.T @ (y - mu)))
        if grad_norm < tol:
            converged = True
            break
        if y.sum() == 0 or np.max(np.abs(eta)) > 50:
            raise ConvergenceError("linear predictor diverges (counts cannot be fit, e.g. all zero)",
                                   grad_norm, it)
        w = np.sqrt(mu)
        step, *_ = np.linalg.lstsq(X * w[:, None], (y - mu) / w, rcond=None)
        t = 1.0
        ll_new = _poisson_ll(y, X @ (beta + step))
        while ll_new < ll and t > 1e-10:
            t *= 0.5
            ll_new = _poisson_ll(y, X @ (beta + t * step))
        if ll_new < ll:
            break  # no ascent direction left at floating-point resolution
        beta = beta + t * step
        eta = X @ beta
        ll = ll_new
        trace.append(ll)
    if not converged:
        grad_norm = float(np.linalg.norm(X.T @ (y - np.exp(eta))))
        if grad_norm >= tol:
            raise ConvergenceError("IRLS did not converge", grad_norm, it)
    mu = np.exp(eta)
    cov = linalg.inv(X.T @ (X * mu[:, None]))
    se = np.sqrt(np.diag(cov))
    z = beta / se
    pvals = np.clip(2 * sps.norm.sf(np.abs(z)), 0.0, 1.0)
    ybar = y.mean()
    ll_null = float(np.sum(y * np.log(ybar) - ybar - special.gammaln(y + 1))) if ybar > 0 else 0.0
    pseudo = 1.0 - ll / ll_null if ll_null != 0 else 0.0

    test = [nm for nm in (predictors or {})] if test is None else list(test)
    w_stat = w_p = None
    w_df: tuple[float, ...] = ()
    if test:
        idx = [names.index(t) for t in test]
        b = beta[idx]
        w_stat = float(b @ linalg.solve(cov[np.ix_(idx, idx)], b))
        w_p = float(sps.chi2.sf(w_stat, len(idx)))
        w_df = (float(len(idx)),)
    return RegressionResult(tuple(names), beta, se, z, pvals, n, "poisson", pseudo_r2=pseudo, loglik=ll,
                            test_kind="Wald" if test else None, test_columns=tuple(test), test_stat=w_stat,
                            test_df=w_df, test_pvalue=w_p, n_iter=it, loglik_trace=tuple(trace),
                            residuals=y - mu, design=X)
