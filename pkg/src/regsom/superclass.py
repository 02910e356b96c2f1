"""Ward agglomeration of the map's code vectors into super-classes.

The merge tree is built with the Lance-Williams recurrence so that trees are
reproducible; cutting it at k gives the super-classes, which usually form
connected patches on the grid. A split super-class is reported, not rejected.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array

from .errors import DataError
from .register import Individual


@dataclass(frozen=True)
class Merge:
    left: int
    right: int
    height: float
    new_id: int


@dataclass(frozen=True)
class MergeTree:
    """P-1 merges over leaves 0..P-1; ids past P-1 are merged clusters."""

    n_leaves: int
    merges: tuple[Merge, ...]


@dataclass(frozen=True)
class SuperClassification:
    """Unit -> super-class labels 1..k and per-class member lists."""

    k: int
    labels: tuple[int, ...]

    def members(self, label: int) -> list[int]:
        return [u for u, lab in enumerate(self.labels) if lab == label]


def ward_tree(code_vectors: np.ndarray,
              weights: np.ndarray | None = None) -> MergeTree:
    """Greedy Ward agglomeration via the Lance-Williams recurrence.

    The pair cost is w_a*w_b/(w_a+w_b) * |mu_a - mu_b|^2; cost ties merge the
    pair with the lexicographically smallest (min id, max id).
    """
    X = np.asarray(code_vectors, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 2:
        raise DataError("need at least two code vectors")
    P = X.shape[0]
    w = np.ones(P) if weights is None else np.asarray(weights, dtype=np.float64)
    if w.shape != (P,) or np.any(w < 0):
        raise DataError("weights must be P non-negative reals")

    # cost matrix over active clusters, indexed by slot; slot i holds cluster
    # ids[i] with weight wts[i]
    diff = X[:, None, :] - X[None, :, :]
    sq = np.einsum("ijk,ijk->ij", diff, diff)
    cost = (np.outer(w, w) / np.add.outer(w, w)) * sq
    np.fill_diagonal(cost, np.inf)

    ids = list(range(P))
    wts = w.copy()
    active = np.ones(P, dtype=bool)
    merges = []
    next_id = P
    for _ in range(P - 1):
        act = np.flatnonzero(active)
        sub = cost[np.ix_(act, act)]
        cmin = float(np.min(sub))
        tied = [(min(ids[act[a]], ids[act[b]]),
                 max(ids[act[a]], ids[act[b]]), act[a], act[b])
                for a, b in zip(*np.where(sub == cmin)) if a < b]
        left, right, i, j = min(tied)
        merges.append(Merge(left, right, cmin, next_id))
        # Lance-Williams update of slot i as the merged cluster
        wa, wb = wts[i], wts[j]
        for m in act:
            if m == i or m == j:
                continue
            wc = wts[m]
            s = wa + wb + wc
            cost[i, m] = cost[m, i] = ((wa + wc) * cost[i, m]
                                       + (wb + wc) * cost[j, m]
                                       - wc * cmin) / s
        wts[i] = wa + wb
        ids[i] = next_id
        active[j] = False
        cost[j, :] = np.inf
        cost[:, j] = np.inf
        next_id += 1
    return MergeTree(P, tuple(merges))


def cut(tree: MergeTree, k: int) -> SuperClassification:
    """The k clusters that exist after P-k merges, labelled 1..k in order of
    their smallest member unit."""
    P = tree.n_leaves
    if not 1 <= k <= P:
        raise DataError(f"k={k} outside 1..{P}")
    parent = {}
    for merge in tree.merges[:P - k]:
        parent[merge.left] = merge.new_id
        parent[merge.right] = merge.new_id

    def root(i):
        while i in parent:
            i = parent[i]
        return i

    roots = [root(u) for u in range(P)]
    order = sorted(set(roots), key=lambda r: roots.index(r))
    label_of = {r: lab for lab, r in enumerate(order, start=1)}
    return SuperClassification(k, tuple(label_of[r] for r in roots))


def connectivity_report(sc: SuperClassification,
                        grid_shape: tuple[int, int]) -> dict:
    """Connected components of each super-class under 4-adjacency on the
    lattice. Splits are findings, not errors."""
    n_rows, n_cols = grid_shape
    if len(sc.labels) != n_rows * n_cols:
        raise DataError("labels do not cover the grid")
    seen = [False] * len(sc.labels)
    report: dict[int, dict] = {lab: {"n_components": 0, "component_sizes": []}
                               for lab in range(1, sc.k + 1)}
    for start in range(len(sc.labels)):
        if seen[start]:
            continue
        lab = sc.labels[start]
        size = 0
        stack = [start]
        seen[start] = True
        while stack:
            u = stack.pop()
            size += 1
            r, c = u // n_cols, u % n_cols
            for rr, cc in ((r - 1, c), (r + 1, c), (r, c - 1), (r, c + 1)):
                if 0 <= rr < n_rows and 0 <= cc < n_cols:
                    v = rr * n_cols + cc
                    if not seen[v] and sc.labels[v] == lab:
                        seen[v] = True
                        stack.append(v)
        report[lab]["n_components"] += 1
        report[lab]["component_sizes"].append(size)
    for entry in report.values():
        entry["component_sizes"].sort(reverse=True)
    return report


PROFILE_COLUMNS = ("age", "seniority", "latest_duration", "cumulated_duration",
                   "n_periods")


def profile(sc: SuperClassification, assignment_units: np.ndarray,
            individuals: list[Individual], features,
            columns: tuple[str, ...] = PROFILE_COLUMNS) -> dict:
    """Per-super-class sizes and unstandardized means of selected variables,
    plus a total row. Empty classes get size 0 and absent means (None)."""
    units = np.asarray(assignment_units)
    if len(units) != len(individuals):
        raise DataError("assignment does not cover all individuals")
    values = np.array([[getattr(f, col) for col in columns] for f in features])
    labels = np.array([sc.labels[u] for u in units])
    rows = {}
    for lab in range(1, sc.k + 1):
        mask = labels == lab
        n = int(mask.sum())
        if n == 0:
            rows[lab] = {"size": 0, "means": {col: None for col in columns}}
        else:
            means = values[mask].mean(axis=0)
            rows[lab] = {"size": n,
                         "means": dict(zip(columns, means.tolist()))}
    total = {"size": len(individuals),
             "means": dict(zip(columns, values.mean(axis=0).tolist()))}
    return {"columns": columns, "classes": rows, "total": total}


def composition(sc: SuperClassification, assignment_units: np.ndarray,
                profiles, variables) -> dict:
    """Row-percentage cross-tabulations super-class x category, one table per
    qualitative variable. Structural zeros stay 0; empty classes give None."""
    from .register import QUAL_CODES

    labels = [sc.labels[u] for u in np.asarray(assignment_units)]
    tables = {}
    for var in variables:
        codes = QUAL_CODES[var]
        counts = {lab: {c: 0 for c in codes} for lab in range(1, sc.k + 1)}
        for lab, prof in zip(labels, profiles):
            counts[lab][prof.code(var)] += 1
        rows = {}
        for lab in range(1, sc.k + 1):
            total = sum(counts[lab].values())
            if total == 0:
                rows[lab] = {c: None for c in codes}
            else:
                rows[lab] = {c: 100.0 * counts[lab][c] / total for c in codes}
        grand = {c: 0 for c in codes}
        for prof in profiles:
            grand[prof.code(var)] += 1
        n = len(profiles)
        rows["total"] = {c: (100.0 * grand[c] / n if n else None) for c in codes}
        tables[var] = {"codes": codes, "rows": rows}
    return tables


def write_tree(tree: MergeTree, path) -> None:
    with open(path, "w") as fh:
        for m in tree.merges:
            fh.write(f"{m.left} {m.right} {m.height:.17g}\n")


def read_tree(path, n_leaves: int) -> MergeTree:
    merges = []
    with open(path) as fh:
        for idx, line in enumerate(fh):
            left, right, height = line.split()
            merges.append(Merge(int(left), int(right), float(height),
                                n_leaves + idx))
    if len(merges) != n_leaves - 1:
        raise DataError(f"{path}: expected {n_leaves - 1} merges, "
                        f"found {len(merges)}")
    return MergeTree(n_leaves, tuple(merges))


def write_superclasses(sc: SuperClassification, path) -> None:
    with open(path, "w") as fh:
        for unit, label in enumerate(sc.labels):
            fh.write(f"{unit} {label}\n")


def read_superclasses(path) -> SuperClassification:
    labels = []
    with open(path) as fh:
        for line in fh:
            unit, label = line.split()
            labels.append(int(label))
    return SuperClassification(max(labels), tuple(labels))


class WardSuperclasses(BaseEstimator):
    """Agglomerative Ward clustering with a fit/fit_predict surface.

    fit(X) builds the merge tree over the rows of X and cuts it at
    n_clusters; labels_ holds 1-based super-class labels.
    """

    def __init__(self, n_clusters=10, weights=None):
        self.n_clusters = n_clusters
        self.weights = weights

    def fit(self, X, y=None):
        X = check_array(X, dtype=np.float64)
        self.tree_ = ward_tree(X, self.weights)
        sc = cut(self.tree_, self.n_clusters)
        self.classification_ = sc
        self.labels_ = np.asarray(sc.labels)
        return self

    def fit_predict(self, X, y=None):
        return self.fit(X).labels_
