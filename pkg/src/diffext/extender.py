"""Normalized Gaussian-kernel extension with adaptive bandwidth.

A function known at samples ``x_i`` is extended to a query ``x`` by

    g(x) ~ sum_i w_i g(x_i) / Nm,   w_i = exp(-|P(x - x_i)|^2 / eps(x)^2),

where ``P`` is the low-rank projection from :mod:`diffext.dimred`,
``Nm = sum_i w_i`` and the bandwidth ``eps(x) = -min_i |P(x - x_i)| / log(delta)``
keeps ``Nm >= exp(-log(delta)^2)`` for every query.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .dimred import as_point_cloud, build_a1, draw_reference_set, project, svd_basis, ProjectionBasis
from .errors import ConfigError

COINCIDENCE_TOL = 1e-12
DEFAULT_DELTA = 0.1


class ExactSampleHit(Exception):
    """Raised by :func:`adaptive_epsilon` when the query is a training point."""

    def __init__(self, index: int):
        super().__init__(f"query coincides with training sample {index}")
        self.index = index


class Extension(NamedTuple):
    value: np.ndarray
    epsilon: float  # nan for an exact sample hit
    nm: float
    exact_index: int  # -1 unless the query hit a training sample


def check_delta(delta: float) -> float:
    delta = float(delta)
    if not 0.0 < delta < 1.0:
        raise ConfigError(
            f"stabilizer delta={delta} is outside (0, 1); the bandwidth "
            "eps(x) = -d_min / log(delta) needs log(delta) < 0"
        )
    return delta


def stability_bound(delta: float) -> float:
    """Lower bound ``exp(-log(delta)^2)`` on the normalization factor."""
    return math.exp(-math.log(check_delta(delta)) ** 2)


def gaussian_kernel(sq_dist, epsilon):
    """Rescaled Gaussian ``exp(-sq_dist / epsilon^2)``."""
    return np.exp(-np.asarray(sq_dist, dtype=np.float64) / (epsilon * epsilon))


def as_sample_values(values, k: int) -> np.ndarray:
    """Return values as a (k, p) Fortran-ordered array (one column per component)."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2 or arr.shape[1] < 1:
        raise ConfigError(f"values must have shape (k,) or (k, p), got {np.shape(values)}")
    if arr.shape[0] != k:
        raise ConfigError(f"got {arr.shape[0]} values for {k} sample points")
    if not np.all(np.isfinite(arr)):
        raise ConfigError("values contain non-finite entries")
    return np.asfortranarray(arr)


@dataclass(frozen=True)
class ExtenderModel:
    """Everything needed to evaluate the extension at query time.

    Arrays are read-only; :func:`diffext.online.update` returns a new model.
    """

    train_points: np.ndarray  # (k, n)
    train_coords: np.ndarray  # (k, n_bar)
    values: np.ndarray  # (k, p), Fortran order
    basis: ProjectionBasis
    delta: float
    M: float

    def __post_init__(self):
        k = self.train_points.shape[0]
        if self.train_coords.shape != (k, self.basis.n_bar) or self.values.shape[0] != k:
            raise ConfigError("train_points, train_coords and values disagree in length")
        check_delta(self.delta)
        for arr in (self.train_points, self.train_coords, self.values):
            arr.flags.writeable = False

    @property
    def k(self) -> int:
        return self.train_points.shape[0]

    @property
    def n(self) -> int:
        return self.basis.n

    @property
    def n_bar(self) -> int:
        return self.basis.n_bar

    @property
    def p(self) -> int:
        return self.values.shape[1]


def check_in_cube(points: np.ndarray, M: float, name: str = "samples") -> None:
    if np.any(np.abs(points) > M):
        worst = float(np.max(np.abs(points)))
        raise ConfigError(f"{name} leave the hypercube [-M, M]^n with M={M} (max |coord| = {worst})")


def fit(X, values, n_bar: int = 2, m: int = 50, M: float = 1.0,
        delta: float = DEFAULT_DELTA, seed: int = 0) -> ExtenderModel:
    """Build an :class:`ExtenderModel` from samples ``X`` and their values.

    Draws ``m`` reference points from ``[-M, M]^n`` with ``seed``, forms the
    difference matrix, keeps the top ``n_bar`` right singular vectors and
    precomputes the projected training coordinates. Nothing is iterated.
    """
    delta = check_delta(delta)
    X = as_point_cloud(X, "X")
    vals = as_sample_values(values, X.shape[0])
    check_in_cube(X, M)
    n = X.shape[1]
    if not 1 <= n_bar <= n:
        raise ConfigError(f"target dimension n_bar={n_bar} must satisfy 1 <= n_bar <= n={n}")
    rng = np.random.default_rng(seed)
    Z = draw_reference_set(m, n, M, rng)
    basis = svd_basis(build_a1(X, Z), n_bar)
    return ExtenderModel(
        train_points=X.copy(),
        train_coords=project(X, basis),
        values=vals.copy(order="F"),
        basis=basis,
        delta=delta,
        M=float(M),
    )


def sq_distances(coords: np.ndarray, train_coords: np.ndarray) -> np.ndarray:
    """Squared distances between (q, n_bar) queries and (k, n_bar) samples.

    Accumulated component by component, so each entry is independent of the
    batch it was computed in.
    """
    out = np.zeros((coords.shape[0], train_coords.shape[0]))
    for l in range(coords.shape[1]):
        diff = coords[:, l, None] - train_coords[None, :, l]
        out += diff * diff
    return out


def adaptive_epsilon(query_coord, model: ExtenderModel) -> float:
    """Per-query bandwidth ``-min_j |c - c_j| / log(delta)`` in projected coordinates.

    Raises :class:`ExactSampleHit` when the nearest sample lies within
    ``COINCIDENCE_TOL`` of the query.
    """
    c = np.asarray(query_coord, dtype=np.float64).reshape(1, -1)
    if c.shape[1] != model.n_bar:
        raise ConfigError(f"query coordinate must have length {model.n_bar}")
    d2 = sq_distances(c, model.train_coords)[0]
    j = int(np.argmin(d2))
    return _epsilon_from_sq(d2[j], j, model.delta)


def _epsilon_from_sq(d2min: float, j: int, delta: float) -> float:
    dmin = math.sqrt(d2min)
    if dmin <= COINCIDENCE_TOL:
        raise ExactSampleHit(j)
    return -dmin / math.log(delta)


def _evaluate_row(d2: np.ndarray, model: ExtenderModel):
    """Kernel sums for one query row.

    Returns ``(eps, ref_sq, u_sum, u_weighted, exact)``. Weights are shifted
    by the nearest squared distance ``ref_sq`` so the largest is exactly 1;
    the true normalization is ``exp(-ref_sq / eps^2) * u_sum``.
    """
    j = int(np.argmin(d2))
    try:
        eps = _epsilon_from_sq(d2[j], j, model.delta)
    except ExactSampleHit:
        return math.nan, 0.0, 1.0, model.values[j].copy(), j
    ref = d2[j]
    u = np.exp(-(d2 - ref) / (eps * eps))
    return eps, ref, u.sum(), model.values.T @ u, -1


def extend_batch(queries, model: ExtenderModel, return_diagnostics: bool = False,
                 chunk: int = 4096):
    """Evaluate the extension at each row of ``queries``.

    Returns a (q, p) array. With ``return_diagnostics`` a tuple
    ``(values, eps, nm, exact_index)`` is returned instead, where ``eps`` is
    nan and ``exact_index >= 0`` for queries that hit a training sample.
    """
    if model.k == 0:
        raise ConfigError("cannot evaluate an empty model")
    Q = as_point_cloud(queries, "queries", allow_empty=True)
    if Q.shape[1] != model.n:
        raise ConfigError(f"dimension mismatch: queries have n={Q.shape[1]}, model has n={model.n}")
    q = Q.shape[0]
    out = np.empty((q, model.p))
    eps = np.empty(q)
    nm = np.empty(q)
    exact = np.empty(q, dtype=np.int64)
    for start in range(0, q, chunk):
        stop = min(start + chunk, q)
        D2 = sq_distances(project(Q[start:stop], model.basis), model.train_coords)
        for r in range(stop - start):
            e, ref, u_sum, u_w, hit = _evaluate_row(D2[r], model)
            i = start + r
            out[i] = u_w if hit >= 0 else u_w / u_sum
            eps[i] = e
            nm[i] = math.nan if hit >= 0 else math.exp(-ref / (e * e)) * u_sum
            exact[i] = hit
    if return_diagnostics:
        return out, eps, nm, exact
    return out


def extend(query, model: ExtenderModel) -> Extension:
    """Evaluate the extension at a single n-vector ``query``."""
    x = np.asarray(query, dtype=np.float64)
    if x.ndim != 1:
        raise ConfigError(f"query must be a 1-D vector, got shape {x.shape}")
    vals, eps, nm, exact = extend_batch(x[None, :], model, return_diagnostics=True)
    return Extension(vals[0], float(eps[0]), float(nm[0]), int(exact[0]))


def kernel_average(queries, X, values, epsilon: float) -> np.ndarray:
    """Fixed-bandwidth normalized kernel average in ambient coordinates.

    No projection and no adaptive bandwidth: the plain Monte Carlo
    estimator, used for convergence checks as the bandwidth shrinks.
    """
    Q = as_point_cloud(queries, "queries")
    X = as_point_cloud(X, "X")
    vals = as_sample_values(values, X.shape[0])
    D2 = sq_distances(Q, X)
    logw = -D2 / (epsilon * epsilon)
    logw -= logw.max(axis=1, keepdims=True)
    W = np.exp(logw)
    return (W @ vals) / W.sum(axis=1, keepdims=True)
