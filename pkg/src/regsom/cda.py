"""Canonical discriminant analysis of the classification variables against
the super-classes.

The generalized eigenproblem W^{-1} B is solved through the symmetric
reduction: Cholesky-factor the within-class covariance, whiten the
between-class matrix and eigendecompose. Coefficients are normalized so each
canonical variable has pooled within-class variance 1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cholesky, solve_triangular
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from .errors import DataError, NumericalError

RANK_TOL = 1e-10
RIDGE_CONDITION = 1e12
RIDGE_EPS = 1e-8


@dataclass(frozen=True)
class ScatterDecomposition:
    """Raw within/between scatter matrices; within + between = total."""

    within: np.ndarray
    between: np.ndarray
    n_obs: int
    classes: tuple
    class_sizes: np.ndarray
    class_means: np.ndarray
    grand_mean: np.ndarray


@dataclass(frozen=True)
class CdaResult:
    eigenvalues: np.ndarray        # all p, descending, floored at 0
    shares: np.ndarray             # eigenvalue / sum
    n_components: int              # count above RANK_TOL * largest
    coefficients: np.ndarray       # p x n_components
    grand_mean: np.ndarray
    structure_correlations: np.ndarray  # p x n_components, total-sample
    ridge: float                   # 0.0 when no ridge was applied


def scatter(features: np.ndarray, labels) -> ScatterDecomposition:
    """Raw pooled within-class and between-class scatter of the features."""
    X = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels)
    if X.ndim != 2:
        raise DataError("features must be a 2-D matrix")
    n, p = X.shape
    if len(labels) != n:
        raise DataError("labels do not match the feature rows")
    classes = tuple(sorted(set(labels.tolist())))
    if n <= p:
        raise DataError(f"need more observations ({n}) than variables ({p})")
    grand = X.mean(axis=0)
    W = np.zeros((p, p))
    B = np.zeros((p, p))
    sizes = []
    means = []
    for cls in classes:
        block = X[labels == cls]
        if block.shape[0] == 0:
            raise DataError(f"class {cls} is empty")
        mu = block.mean(axis=0)
        centered = block - mu
        W += centered.T @ centered
        dm = mu - grand
        B += block.shape[0] * np.outer(dm, dm)
        sizes.append(block.shape[0])
        means.append(mu)
    return ScatterDecomposition(W, B, n, classes, np.array(sizes),
                                np.array(means), grand)


def canonical(sd: ScatterDecomposition, ridge: str | float = "auto") -> CdaResult:
    """Solve the canonical eigenproblem from a scatter decomposition.

    Covariance-convention divisors (n - g within, g - 1 between) are applied
    here; the eigenvalue shares are divisor-invariant. When the within matrix
    is ill-conditioned (condition number above 1e12) and ridge is "auto", a
    ridge eps * trace(W)/p * I is added and reported in the result.
    """
    g = len(sd.classes)
    p = sd.within.shape[0]
    dof_w = sd.n_obs - g
    dof_b = max(g - 1, 1)
    if dof_w <= 0:
        raise DataError("no within-class degrees of freedom")
    W = sd.within / dof_w
    B = sd.between / dof_b

    ridge_used = 0.0
    if ridge == "auto":
        if np.linalg.cond(W) > RIDGE_CONDITION:
            ridge_used = RIDGE_EPS * np.trace(W) / p
    elif ridge:
        ridge_used = float(ridge) * np.trace(W) / p
    if ridge_used:
        W = W + ridge_used * np.eye(p)
    try:
        L = cholesky(W, lower=True)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(
            "within-class covariance is singular; pass ridge=1e-8 to "
            "regularize") from exc

    half = solve_triangular(L, B, lower=True)
    M = solve_triangular(L, half.T, lower=True)
    M = (M + M.T) / 2.0
    try:
        eigvals, eigvecs = np.linalg.eigh(M)
    except np.linalg.LinAlgError as exc:
        raise NumericalError("canonical eigen-solver did not converge") from exc
    order = np.argsort(eigvals)[::-1]
    eigvals = np.maximum(eigvals[order], 0.0)
    eigvecs = eigvecs[:, order]
    n_comp = int(np.sum(eigvals > RANK_TOL * max(eigvals[0], 1e-300)))

    # back-transform the whitened eigenvectors: a = L^{-T} u
    coeff = solve_triangular(L.T, eigvecs[:, :n_comp], lower=False)
    for c in range(n_comp):
        peak = np.argmax(np.abs(coeff[:, c]))
        if coeff[peak, c] < 0:
            coeff[:, c] = -coeff[:, c]

    total = sd.within + sd.between
    std_total = np.sqrt(np.diag(total) / (sd.n_obs - 1))
    std_total[std_total == 0] = 1.0
    # total-sample covariance between variables and canonical scores
    cov_vs = (total / (sd.n_obs - 1)) @ coeff
    score_std = np.sqrt(np.einsum("ij,jk,ki->i", coeff.T, total / (sd.n_obs - 1),
                                  coeff))
    score_std[score_std == 0] = 1.0
    structure = cov_vs / std_total[:, None] / score_std[None, :]

    return CdaResult(
        eigenvalues=eigvals,
        shares=eigvals / eigvals.sum() if eigvals.sum() > 0 else eigvals,
        n_components=n_comp,
        coefficients=coeff,
        grand_mean=sd.grand_mean,
        structure_correlations=structure,
        ridge=ridge_used,
    )


def scores(result: CdaResult, features: np.ndarray) -> np.ndarray:
    """Canonical scores: grand-mean-centered features times coefficients."""
    X = np.asarray(features, dtype=np.float64)
    return (X - result.grand_mean) @ result.coefficients


def class_means_on_canonicals(result: CdaResult, features: np.ndarray,
                              labels) -> dict:
    """Per-class mean of each canonical score; grand mean is zero per
    component by centering."""
    sc = scores(result, features)
    labels = np.asarray(labels)
    means = {}
    for cls in sorted(set(labels.tolist())):
        means[cls] = sc[labels == cls].mean(axis=0)
    return means


def write_tables(outdir, result: CdaResult, feature_names,
                 class_means: dict) -> None:
    """Eigenvalue, coefficient and class-mean tables as delimited text."""
    import os

    n = result.n_components
    with open(os.path.join(outdir, "cda_eigenvalues.csv"), "w") as fh:
        fh.write("component,eigenvalue,share,cumulative_share\n")
        cum = 0.0
        for i, (val, share) in enumerate(zip(result.eigenvalues, result.shares),
                                         start=1):
            cum += share
            fh.write(f"{i},{val:.10g},{share:.10g},{cum:.10g}\n")
    with open(os.path.join(outdir, "cda_coefficients.csv"), "w") as fh:
        fh.write("variable," + ",".join(f"can{c + 1}" for c in range(n)) + "\n")
        for name, row in zip(feature_names, result.coefficients):
            fh.write(name + "," + ",".join(f"{v:.10g}" for v in row) + "\n")
    with open(os.path.join(outdir, "cda_class_means.csv"), "w") as fh:
        fh.write("super_class," + ",".join(f"can{c + 1}" for c in range(n))
                 + "\n")
        for cls, row in class_means.items():
            fh.write(f"{cls}," + ",".join(f"{v:.10g}" for v in row) + "\n")


class CanonicalDiscriminant(BaseEstimator):
    """Canonical discriminant analysis with fit/transform semantics."""

    def __init__(self, ridge="auto"):
        self.ridge = ridge

    def fit(self, X, y):
        X = check_array(X, dtype=np.float64)
        sd = scatter(X, y)
        self.scatter_ = sd
        self.result_ = canonical(sd, self.ridge)
        self.eigenvalues_ = self.result_.eigenvalues
        self.coefficients_ = self.result_.coefficients
        return self

    def transform(self, X):
        check_is_fitted(self, "result_")
        X = check_array(X, dtype=np.float64)
        return scores(self.result_, X)
