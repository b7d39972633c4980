"""Multivariate normality tests: Henze-Zirkler and Mardia, plus a per-axis scan."""

from __future__ import annotations

import numpy as np
from scipy import stats as sps

from ..errors import RankDeficiencyError
from .report import TestReport


def _centered_precision(X: np.ndarray, ridge: float):
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    n, d = X.shape
    if n <= d and ridge == 0:
        raise RankDeficiencyError(f"need more samples than dimensions (n={n}, d={d})")
    Xc = X - X.mean(axis=0)
    S = Xc.T @ Xc / n  # maximum-likelihood covariance, as in both tests' definitions
    if ridge:
        S = S + ridge * np.eye(d)
    eig = np.linalg.eigvalsh(S)
    if eig[0] <= 1e-12 * max(eig[-1], np.finfo(float).tiny):
        raise RankDeficiencyError("sample covariance is singular; pass ridge > 0")
    try:
        L = np.linalg.cholesky(S)
    except np.linalg.LinAlgError as exc:
        raise RankDeficiencyError("sample covariance is singular; pass ridge > 0") from exc
    # Rows of Y are L^{-1} x_c, so Y Yᵀ is the Mahalanobis Gram matrix.
    Y = np.linalg.solve(L, Xc.T).T
    return Y, n, d


def hz_beta(n: int, d: int) -> float:
    """Henze-Zirkler's optimal smoothing bandwidth."""
    return ((n * (2 * d + 1)) / 4.0) ** (1.0 / (d + 4)) / np.sqrt(2.0)


def _hz_lognormal_params(beta: float, d: int):
    b2 = beta**2
    a = 1 + 2 * b2
    wb = (1 + b2) * (1 + 3 * b2)
    mean = 1 - a ** (-d / 2) * (1 + d * b2 / a + d * (d + 2) * b2**2 / (2 * a**2))
    var = (
        2 * (1 + 4 * b2) ** (-d / 2)
        + 2 * a ** (-d) * (1 + 2 * d * b2**2 / a**2 + 3 * d * (d + 2) * b2**4 / (4 * a**4))
        - 4 * wb ** (-d / 2) * (1 + 3 * d * b2**2 / (2 * wb) + d * (d + 2) * b2**4 / (2 * wb**2))
    )
    log_mu = np.log(np.sqrt(mean**4 / (var + mean**2)))
    log_sigma = np.sqrt(np.log((var + mean**2) / mean**2))
    return log_mu, log_sigma


def henze_zirkler(X, alpha: float = 0.05, ridge: float = 0.0) -> TestReport:
    """Henze-Zirkler test of multivariate normality.

    The statistic is the weighted L2 distance between the empirical and
    normal characteristic functions of the standardized sample; the p-value
    uses the lognormal approximation to its null distribution.
    """
    Y, n, d = _centered_precision(X, ridge)
    beta = hz_beta(n, d)
    b2 = beta**2
    sq = np.einsum("ij,ij->i", Y, Y)
    gram = Y @ Y.T
    pair = sq[:, None] + sq[None, :] - 2 * gram
    np.maximum(pair, 0.0, out=pair)
    t1 = np.exp(-0.5 * b2 * pair).sum() / n**2
    t2 = 2 * (1 + b2) ** (-d / 2) * np.exp(-b2 * sq / (2 * (1 + b2))).mean()
    t3 = (1 + 2 * b2) ** (-d / 2)
    hz = n * (t1 - t2 + t3)
    log_mu, log_sigma = _hz_lognormal_params(beta, d)
    p = sps.lognorm.sf(hz, log_sigma, scale=np.exp(log_mu))
    return TestReport("henze_zirkler", hz, p, alpha, n, d, {"beta": beta, "ridge": ridge})


def _mardia_moments(Y: np.ndarray, chunk: int = 2048):
    n, d = Y.shape
    if d**3 <= n:
        # ΣΣ (y_iᵀy_j)³ = ‖Σ y_i⊗y_i⊗y_i‖², linear in n.
        t = np.einsum("ni,nj,nk->ijk", Y, Y, Y, optimize=True)
        b1 = float(np.sum(t**2))
    else:
        b1 = 0.0
        for start in range(0, n, chunk):
            g = Y[start : start + chunk] @ Y.T
            b1 += np.sum(g**3)
    b1 /= n**2
    sq = np.einsum("ij,ij->i", Y, Y)
    b2 = np.mean(sq**2)
    return b1, b2


def mardia(X, alpha: float = 0.05, ridge: float = 0.0) -> tuple[TestReport, TestReport]:
    """Mardia's multivariate skewness and kurtosis tests.

    Skewness ``n·b1/6`` is referred to chi-square with d(d+1)(d+2)/6 degrees
    of freedom (with Mardia's small-sample correction below n=20). Kurtosis
    ``b2`` is standardized by its asymptotic mean d(d+2) and variance
    8d(d+2)/n and referred two-sided to the standard normal.
    """
    Y, n, d = _centered_precision(X, ridge)
    b1, b2 = _mardia_moments(Y)
    df = d * (d + 1) * (d + 2) / 6.0
    if n < 20:
        k = (d + 1) * (n + 1) * (n + 3) / (n * ((n + 1) * (d + 1) - 6))
        skew_stat = n * k * b1 / 6.0
    else:
        skew_stat = n * b1 / 6.0
    skew = TestReport(
        "mardia_skewness", skew_stat, sps.chi2.sf(skew_stat, df), alpha, n, d, {"b1": b1, "df": df}
    )
    z = (b2 - d * (d + 2)) / np.sqrt(8.0 * d * (d + 2) / n)
    kurt = TestReport("mardia_kurtosis", z, 2 * sps.norm.sf(abs(z)), alpha, n, d, {"b2": b2})
    return skew, kurt


def mardia_combined(reports: tuple[TestReport, TestReport], alpha: float | None = None) -> TestReport:
    """Bonferroni union of the skewness and kurtosis decisions at overall level ``alpha``."""
    skew, kurt = reports
    alpha = skew.alpha if alpha is None else alpha
    p = min(1.0, 2 * min(skew.p_value, kurt.p_value))
    return TestReport(
        "mardia",
        max(skew.statistic, abs(kurt.statistic)),
        p,
        alpha,
        skew.n_samples,
        skew.n_dims,
        {"skewness_p": skew.p_value, "kurtosis_p": kurt.p_value, "rule": "bonferroni"},
    )


def principal_axes(X, basis=None, mu=None) -> np.ndarray:
    """Coordinates of X along principal axes (of X itself unless ``basis`` is given)."""
    X = np.asarray(X, dtype=np.float64)
    if basis is None:
        mu = X.mean(axis=0)
        Xc = X - mu
        lam, basis = np.linalg.eigh(Xc.T @ Xc / (X.shape[0] - 1))
        basis = basis[:, np.argsort(lam)[::-1]]
    else:
        Xc = X - (X.mean(axis=0) if mu is None else mu)
    return Xc @ basis


def marginal_normality_scan(X, alpha: float = 0.05, basis=None, mu=None) -> tuple[int, list[TestReport]]:
    """Univariate Mardia test along every principal axis of ``X``.

    Returns the number of axes whose marginal is not rejected, and the
    per-axis combined reports (ordered by decreasing variance).
    """
    coords = principal_axes(X, basis, mu)
    reports = []
    for k in range(coords.shape[1]):
        combined = mardia_combined(mardia(coords[:, k], alpha))
        reports.append(
            TestReport(
                "marginal_mardia",
                combined.statistic,
                combined.p_value,
                alpha,
                combined.n_samples,
                1,
                {**combined.params, "axis": k},
            )
        )
    return sum(not r.reject for r in reports), reports
