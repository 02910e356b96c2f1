"""Online Kohonen self-organizing map on a rectangular grid.

Code vectors live in the data space; one observation is presented per step and
the winning unit plus its square (Chebyshev) grid neighbourhood move towards
it. The adaptation gain decays geometrically and the neighbourhood radius
shrinks linearly to zero over the run. All randomness comes from numpy's
PCG64 generator, so fixtures recorded for a seed are portable.

With the radius frozen at zero the procedure degenerates to online k-means
(Forgy/MacQueen style): only the winner moves.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np
from numba import njit
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from .errors import DataError


@dataclass(frozen=True)
class SomGrid:
    """A rectangular grid of code vectors, indexed row-major from 0."""

    n_rows: int
    n_cols: int
    code_vectors: np.ndarray  # (P, d) float64

    def __post_init__(self):
        if self.n_rows < 1 or self.n_cols < 1:
            raise DataError("grid must have at least one unit")
        if self.code_vectors.shape[0] != self.n_rows * self.n_cols:
            raise DataError("code vector count does not match grid shape")

    @property
    def n_units(self) -> int:
        return self.n_rows * self.n_cols

    @property
    def dim(self) -> int:
        return self.code_vectors.shape[1]

    def unit_coords(self) -> tuple[np.ndarray, np.ndarray]:
        idx = np.arange(self.n_units)
        return idx // self.n_cols, idx % self.n_cols


@dataclass(frozen=True)
class TrainingSchedule:
    """Annealing schedule: gain eps0 -> eps_min geometrically, radius
    radius0 -> 0 in radius0 + 1 equal phases."""

    total_steps: int
    eps0: float = 0.5
    eps_min: float = 0.01
    radius0: int = 5
    seed: int = 0

    def __post_init__(self):
        if self.total_steps < 0:
            raise DataError("total_steps must be >= 0")
        if not 0 < self.eps_min <= self.eps0 < 1:
            raise DataError("need 0 < eps_min <= eps0 < 1")
        if self.radius0 < 0:
            raise DataError("radius0 must be >= 0")

    def eps(self, t: int) -> float:
        if self.total_steps == 0:
            return self.eps0
        return self.eps0 * (self.eps_min / self.eps0) ** (t / self.total_steps)

    def radius(self, t: int) -> int:
        if self.total_steps == 0 or self.radius0 == 0:
            return self.radius0
        phase = (t * (self.radius0 + 1)) // self.total_steps
        return max(0, self.radius0 - int(phase))

    def eps_array(self) -> np.ndarray:
        t = np.arange(self.total_steps, dtype=np.float64)
        return self.eps0 * (self.eps_min / self.eps0) ** (t / self.total_steps)

    def radius_array(self) -> np.ndarray:
        t = np.arange(self.total_steps, dtype=np.int64)
        if self.radius0 == 0:
            return np.zeros_like(t)
        phase = (t * (self.radius0 + 1)) // self.total_steps
        return np.maximum(0, self.radius0 - phase)


@dataclass(frozen=True)
class Assignment:
    """Nearest-unit classification of a data set."""

    units: np.ndarray     # (N,) int64 winning unit per observation
    distances: np.ndarray  # (N,) float64 Euclidean distance to the winner


@dataclass(frozen=True)
class SomModel:
    """A trained map plus its schedule and the quantization-error log."""

    grid: SomGrid
    schedule: TrainingSchedule
    qe_log: tuple[tuple[int, float], ...] = field(default_factory=tuple)


# --------------------------------------------------------------------------
# core operations
# --------------------------------------------------------------------------

def init_grid(n_rows: int, n_cols: int, data: np.ndarray, seed: int) -> SomGrid:
    """Initial code vectors: rows of the data matrix sampled uniformly with
    replacement under PCG64(seed)."""
    data = np.asarray(data, dtype=np.float64)
    if data.ndim != 2 or data.shape[0] < 1:
        raise DataError("need a non-empty 2-D data matrix")
    rng = np.random.Generator(np.random.PCG64(seed))
    picks = rng.integers(0, data.shape[0], size=n_rows * n_cols)
    return SomGrid(n_rows, n_cols, data[picks].copy())


def winner(grid: SomGrid, x: np.ndarray) -> int:
    """Index of the unit whose code vector is nearest to x (squared Euclidean,
    ties to the smallest index)."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (grid.dim,):
        raise DataError(f"observation has dimension {x.shape}, "
                        f"expected ({grid.dim},)")
    if not np.all(np.isfinite(x)):
        raise DataError("non-finite observation")
    diff = grid.code_vectors - x
    return int(np.argmin(np.einsum("ij,ij->i", diff, diff)))


def neighborhood(grid: SomGrid, unit: int, radius: int) -> set[int]:
    """Units within Chebyshev distance radius of unit on the lattice."""
    if radius < 0:
        raise DataError("radius must be >= 0")
    row, col = unit // grid.n_cols, unit % grid.n_cols
    rows, cols = grid.unit_coords()
    mask = np.maximum(np.abs(rows - row), np.abs(cols - col)) <= radius
    return set(np.flatnonzero(mask).tolist())


def train_step(grid: SomGrid, x: np.ndarray, t: int,
               schedule: TrainingSchedule) -> SomGrid:
    """One online update: the winner's neighbourhood moves by eps(t)(x - C);
    every other unit is returned bit-identical."""
    win = winner(grid, x)
    eps = schedule.eps(t)
    hood = sorted(neighborhood(grid, win, schedule.radius(t)))
    code = grid.code_vectors.copy()
    x = np.asarray(x, dtype=np.float64)
    code[hood] += eps * (x - code[hood])
    return SomGrid(grid.n_rows, grid.n_cols, code)


@njit(cache=True)
def _train_loop(code, data, draws, eps, radius, n_cols):
    P, d = code.shape
    for t in range(draws.shape[0]):
        x = data[draws[t]]
        # winner search: strict < keeps ties on the smallest index
        best = 0
        best_d = np.inf
        for i in range(P):
            acc = 0.0
            for j in range(d):
                diff = code[i, j] - x[j]
                acc += diff * diff
            if acc < best_d:
                best_d = acc
                best = i
        w_row = best // n_cols
        w_col = best % n_cols
        r = radius[t]
        e = eps[t]
        for i in range(P):
            dr = i // n_cols - w_row
            if dr < 0:
                dr = -dr
            dc = i % n_cols - w_col
            if dc < 0:
                dc = -dc
            if dr <= r and dc <= r:
                for j in range(d):
                    code[i, j] = code[i, j] + e * (x[j] - code[i, j])


def train(grid: SomGrid, data: np.ndarray,
          schedule: TrainingSchedule) -> SomModel:
    """Run the full online training.

    Observations are drawn i.i.d. uniformly from the rows of data under the
    spawn-key-(1,) child of PCG64(schedule.seed), so the draw stream is
    decoupled from init_grid's root stream. The quantization error is logged
    at step 0, every total_steps/20 steps, and at the end.
    """
    data = np.ascontiguousarray(data, dtype=np.float64)
    if data.ndim != 2 or data.shape[0] < 1:
        raise DataError("need a non-empty 2-D data matrix")
    if data.shape[1] != grid.dim:
        raise DataError("data dimension does not match the grid")
    if not np.all(np.isfinite(data)):
        raise DataError("non-finite training data")

    code = grid.code_vectors.copy()
    T = schedule.total_steps
    log = [(0, quality(SomGrid(grid.n_rows, grid.n_cols, code), data)
            ["quantization_error"])]
    if T > 0:
        rng = np.random.Generator(np.random.PCG64(
            np.random.SeedSequence(schedule.seed, spawn_key=(1,))))
        draws = rng.integers(0, data.shape[0], size=T)
        eps = schedule.eps_array()
        radius = schedule.radius_array()
        stride = max(1, T // 20)
        done = 0
        while done < T:
            upto = min(T, done + stride)
            _train_loop(code, data, draws[done:upto], eps[done:upto],
                        radius[done:upto], grid.n_cols)
            done = upto
            log.append((done, quality(SomGrid(grid.n_rows, grid.n_cols, code),
                                      data)["quantization_error"]))
    final = SomGrid(grid.n_rows, grid.n_cols, code)
    return SomModel(final, schedule, tuple(log))


def classify(grid: SomGrid, data: np.ndarray) -> Assignment:
    """Nearest-unit assignment for every row of data; empty input gives an
    empty assignment."""
    data = np.asarray(data, dtype=np.float64)
    if data.size == 0:
        return Assignment(np.zeros(0, dtype=np.int64), np.zeros(0))
    d2 = _sq_distances(grid.code_vectors, data)
    units = np.argmin(d2, axis=1)
    # recompute the winner distances directly: the expansion trick above is
    # fine for the argmin but loses precision near zero
    dist = np.linalg.norm(data - grid.code_vectors[units], axis=1)
    return Assignment(units.astype(np.int64), dist)


def _sq_distances(code: np.ndarray, data: np.ndarray) -> np.ndarray:
    """(N, P) squared Euclidean distances."""
    c2 = np.einsum("ij,ij->i", code, code)
    x2 = np.einsum("ij,ij->i", data, data)
    return x2[:, None] + c2[None, :] - 2.0 * data @ code.T


def quality(grid: SomGrid, data: np.ndarray) -> dict:
    """Map diagnostics: quantization error (mean distance to the winner) and
    topographic error (share of observations whose two nearest units are not
    lattice-adjacent). A single-unit map has topographic error 0."""
    data = np.asarray(data, dtype=np.float64)
    if data.ndim != 2 or data.shape[0] < 1:
        raise DataError("need non-empty data")
    d2 = _sq_distances(grid.code_vectors, data)
    order = np.argsort(d2, axis=1, kind="stable")
    best = order[:, 0]
    qe = float(np.mean(np.sqrt(np.maximum(
        d2[np.arange(len(data)), best], 0.0))))
    if grid.n_units == 1:
        return {"quantization_error": qe, "topographic_error": 0.0}
    second = order[:, 1]
    rows, cols = grid.unit_coords()
    cheb = np.maximum(np.abs(rows[best] - rows[second]),
                      np.abs(cols[best] - cols[second]))
    te = float(np.mean(cheb != 1))
    return {"quantization_error": qe, "topographic_error": te}


# --------------------------------------------------------------------------
# persistence
# --------------------------------------------------------------------------

def save_model(model: SomModel, path) -> None:
    """Flat text format: a key=value header, then one line of 17-significant-
    digit values per code vector (round-trip exact)."""
    grid, sched = model.grid, model.schedule
    with open(path, "w") as fh:
        fh.write(f"n_rows = {grid.n_rows}\n")
        fh.write(f"n_cols = {grid.n_cols}\n")
        fh.write(f"d = {grid.dim}\n")
        fh.write(f"seed = {sched.seed}\n")
        fh.write(f"total_steps = {sched.total_steps}\n")
        fh.write(f"eps0 = {sched.eps0!r}\n")
        fh.write(f"eps_min = {sched.eps_min!r}\n")
        fh.write(f"radius0 = {sched.radius0}\n")
        for row in grid.code_vectors:
            fh.write(" ".join(f"{v:.17g}" for v in row) + "\n")


def load_model(path) -> SomModel:
    with open(path) as fh:
        header = {}
        for _ in range(8):
            key, _, value = fh.readline().partition("=")
            header[key.strip()] = value.strip()
        try:
            n_rows, n_cols = int(header["n_rows"]), int(header["n_cols"])
            dim = int(header["d"])
            sched = TrainingSchedule(
                total_steps=int(header["total_steps"]),
                eps0=float(header["eps0"]), eps_min=float(header["eps_min"]),
                radius0=int(header["radius0"]), seed=int(header["seed"]))
        except (KeyError, ValueError) as exc:
            raise DataError(f"{path}: bad model header") from exc
        code = np.loadtxt(io.StringIO(fh.read()), ndmin=2)
    if code.shape != (n_rows * n_cols, dim):
        raise DataError(f"{path}: expected {n_rows * n_cols} x {dim} code "
                        f"vectors, found {code.shape}")
    return SomModel(SomGrid(n_rows, n_cols, code), sched)


# --------------------------------------------------------------------------
# estimator wrapper
# --------------------------------------------------------------------------

class KohonenMap(BaseEstimator):
    """Self-organizing map with a scikit-learn estimator surface.

    fit() z-scores each input column (optional), samples the initial code
    vectors from the data and runs the online training; predict() returns the
    winning unit per row, transform() the distances to every unit.
    """

    def __init__(self, n_rows=10, n_cols=10, total_steps=None, eps0=0.5,
                 eps_min=0.01, radius0=5, seed=0, standardize=True):
        self.n_rows = n_rows
        self.n_cols = n_cols
        self.total_steps = total_steps
        self.eps0 = eps0
        self.eps_min = eps_min
        self.radius0 = radius0
        self.seed = seed
        self.standardize = standardize

    def fit(self, X, y=None):
        X = check_array(X, dtype=np.float64)
        if self.standardize:
            self.mean_ = X.mean(axis=0)
            scale = X.std(axis=0)
            scale[scale == 0] = 1.0
            self.scale_ = scale
        else:
            self.mean_ = np.zeros(X.shape[1])
            self.scale_ = np.ones(X.shape[1])
        Z = (X - self.mean_) / self.scale_
        steps = self.total_steps if self.total_steps is not None else 20 * len(X)
        schedule = TrainingSchedule(total_steps=steps, eps0=self.eps0,
                                    eps_min=self.eps_min, radius0=self.radius0,
                                    seed=self.seed)
        grid = init_grid(self.n_rows, self.n_cols, Z, self.seed)
        self.model_ = train(grid, Z, schedule)
        self.code_vectors_ = self.model_.grid.code_vectors
        self.labels_ = classify(self.model_.grid, Z).units
        return self

    def predict(self, X):
        check_is_fitted(self, "model_")
        X = check_array(X, dtype=np.float64)
        Z = (X - self.mean_) / self.scale_
        return classify(self.model_.grid, Z).units

    def transform(self, X):
        check_is_fitted(self, "model_")
        X = check_array(X, dtype=np.float64)
        Z = (X - self.mean_) / self.scale_
        return np.sqrt(np.maximum(_sq_distances(self.code_vectors_, Z), 0.0))

    def quality(self, X):
        check_is_fitted(self, "model_")
        X = check_array(X, dtype=np.float64)
        Z = (X - self.mean_) / self.scale_
        return quality(self.model_.grid, Z)
