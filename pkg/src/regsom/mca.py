"""Multiple correspondence analysis of the qualitative profiles via the Burt
table, with supplementary-category projection.

The Burt table B = Z'Z is analysed as a symmetric correspondence table: with
P = B / grand total and equal row/column masses r, the standardized residual
S = D^{-1/2} (P - r r') D^{-1/2} is eigendecomposed. Reported eigenvalues are
the eigenvalues of S, which equal the squared singular values of the
indicator matrix's residual. Principal coordinates scale eigenvectors by
sqrt(eigenvalue); supplementary categories are projected onto the standard
coordinates through their profile over the active categories.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator

from .errors import DataError, NumericalError
from .register import ACTIVE_VARS, QUAL_CODES

EIGEN_TOL = 1e-12


@dataclass(frozen=True)
class IndicatorMatrix:
    """N x J binary matrix over categorical variables; one column per
    observed category, rows sum to the number of variables."""

    Z: np.ndarray
    variables: tuple[str, ...]
    categories: tuple[tuple[str, str], ...]  # (variable, code) per column

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(code for _, code in self.categories)


@dataclass(frozen=True)
class McaResult:
    eigenvalues: np.ndarray          # descending, nontrivial only
    inertia_shares: np.ndarray
    coordinates: np.ndarray          # J x A principal coordinates
    standard_coordinates: np.ndarray  # J x A
    masses: np.ndarray               # J category masses
    categories: tuple[tuple[str, str], ...]


def build_indicator(profiles, active_vars=ACTIVE_VARS) -> IndicatorMatrix:
    """Indicator matrix of the profiles over the active variables.

    Categories never observed are dropped with a warning, so every retained
    column has a positive count.
    """
    columns = []
    for var in active_vars:
        if var not in QUAL_CODES:
            raise DataError(f"unknown qualitative variable {var!r}")
        observed = set()
        for i, prof in enumerate(profiles):
            try:
                observed.add(prof.code(var))
            except AttributeError as exc:
                raise DataError(f"profile {i} lacks variable {var!r}") from exc
        for code in QUAL_CODES[var]:
            if code in observed:
                columns.append((var, code))
            else:
                warnings.warn(f"category {code!r} of {var!r} never observed; "
                              f"column dropped")
    col_index = {cat: j for j, cat in enumerate(columns)}
    Z = np.zeros((len(profiles), len(columns)))
    for i, prof in enumerate(profiles):
        for var in active_vars:
            Z[i, col_index[(var, prof.code(var))]] = 1.0
    return IndicatorMatrix(Z, tuple(active_vars), tuple(columns))


def burt(indicator: IndicatorMatrix) -> np.ndarray:
    """The Burt table Z'Z: all pairwise category cross-tabulations."""
    return indicator.Z.T @ indicator.Z


def correspondence(B: np.ndarray, categories=None) -> McaResult:
    """Correspondence analysis of a Burt table.

    Axes are ordered by descending eigenvalue, the trivial (null) axes are
    dropped, and each axis is oriented so its largest-magnitude principal
    coordinate is positive.
    """
    B = np.asarray(B, dtype=np.float64)
    if B.ndim != 2 or B.shape[0] != B.shape[1]:
        raise DataError("Burt table must be square")
    total = B.sum()
    if total <= 0:
        raise DataError("Burt table has no mass")
    r = B.sum(axis=1) / total
    if np.any(r <= 0):
        zero = np.flatnonzero(r <= 0)
        raise DataError(f"zero-mass categories at columns {zero.tolist()}")
    P = B / total
    inv_sqrt = 1.0 / np.sqrt(r)
    S = (P - np.outer(r, r)) * np.outer(inv_sqrt, inv_sqrt)
    S = (S + S.T) / 2.0
    try:
        eigvals, eigvecs = np.linalg.eigh(S)
    except np.linalg.LinAlgError as exc:
        raise NumericalError("eigendecomposition failed") from exc
    order = np.argsort(eigvals)[::-1]
    eigvals = eigvals[order]
    eigvecs = eigvecs[:, order]
    keep = eigvals > max(EIGEN_TOL, EIGEN_TOL * abs(eigvals[0]))
    eigvals = eigvals[keep]
    eigvecs = eigvecs[:, keep]

    std = eigvecs * inv_sqrt[:, None]
    coords = std * np.sqrt(eigvals)[None, :]
    # deterministic orientation
    for a in range(coords.shape[1]):
        peak = np.argmax(np.abs(coords[:, a]))
        if coords[peak, a] < 0:
            coords[:, a] = -coords[:, a]
            std[:, a] = -std[:, a]
    if categories is None:
        categories = tuple(("cat", str(j)) for j in range(B.shape[0]))
    return McaResult(
        eigenvalues=eigvals,
        inertia_shares=eigvals / eigvals.sum(),
        coordinates=coords,
        standard_coordinates=std,
        masses=r,
        categories=tuple(categories),
    )


def project_supplementary(result: McaResult, counts: np.ndarray) -> np.ndarray:
    """Project supplementary categories through the transition formula.

    counts holds the cross-counts supplementary category x active category;
    each row's profile is multiplied by the standard coordinates. Empty
    categories come back as NaN rows.
    """
    counts = np.asarray(counts, dtype=np.float64)
    J = len(result.masses)
    if counts.ndim != 2 or counts.shape[1] != J:
        raise DataError(f"supplementary counts must have {J} columns")
    totals = counts.sum(axis=1, keepdims=True)
    coords = np.full((counts.shape[0], result.standard_coordinates.shape[1]),
                     np.nan)
    nonempty = totals[:, 0] > 0
    profiles = counts[nonempty] / totals[nonempty]
    coords[nonempty] = profiles @ result.standard_coordinates
    return coords


def supplementary_counts(profiles, var: str,
                         indicator: IndicatorMatrix) -> tuple[list[str], np.ndarray]:
    """Cross-counts of a supplementary variable against the active columns."""
    codes = list(QUAL_CODES[var])
    counts = np.zeros((len(codes), indicator.Z.shape[1]))
    row_of = {code: i for i, code in enumerate(codes)}
    for prof, zrow in zip(profiles, indicator.Z):
        counts[row_of[prof.code(var)]] += zrow
    return codes, counts


def write_coordinates(path, result: McaResult, sup_labels=(),
                      sup_coords=None, axes: int = 5) -> None:
    """Category coordinates as delimited text: variable, code, kind, axes."""
    A = min(axes, result.coordinates.shape[1])
    with open(path, "w") as fh:
        fh.write("variable,code,kind," +
                 ",".join(f"axis{a + 1}" for a in range(A)) + "\n")
        for (var, code), row in zip(result.categories, result.coordinates):
            vals = ",".join(f"{v:.10g}" for v in row[:A])
            fh.write(f"{var},{code},active,{vals}\n")
        if sup_coords is not None:
            for code, row in zip(sup_labels, sup_coords):
                vals = ",".join("" if np.isnan(v) else f"{v:.10g}"
                                for v in row[:A])
                fh.write(f"age,{code},supplementary,{vals}\n")


class BurtMca(BaseEstimator):
    """Burt-table MCA over qualitative profiles, estimator style.

    fit(profiles) builds the indicator matrix over `active_vars`, analyses
    the Burt table and projects `supplementary_var`.
    """

    def __init__(self, active_vars=ACTIVE_VARS, supplementary_var="age"):
        self.active_vars = active_vars
        self.supplementary_var = supplementary_var

    def fit(self, profiles, y=None):
        self.indicator_ = build_indicator(profiles, self.active_vars)
        self.burt_ = burt(self.indicator_)
        self.result_ = correspondence(self.burt_, self.indicator_.categories)
        self.eigenvalues_ = self.result_.eigenvalues
        if self.supplementary_var is not None:
            codes, counts = supplementary_counts(
                profiles, self.supplementary_var, self.indicator_)
            self.supplementary_labels_ = codes
            self.supplementary_coordinates_ = project_supplementary(
                self.result_, counts)
        return self
