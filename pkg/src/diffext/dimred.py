"""Low-rank projection from the SVD of the sample-minus-reference matrix.

Given training points ``X`` (k x n) and reference points ``Z`` (m x n) drawn
uniformly from the hypercube ``[-M, M]^n``, the stacked difference matrix
``A1`` has row ``i*m + j`` equal to ``X[i] - Z[j]``. Its top right singular
vectors span the subspace on which kernel distances are evaluated.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError

# Above this many rows the n x n Gram matrix is eigendecomposed instead of A1.
GRAM_ROW_THRESHOLD = 10_000


def as_point_cloud(points, name="points", allow_empty=False) -> np.ndarray:
    """Validate and return ``points`` as a C-contiguous float64 (k, n) array."""
    arr = np.asarray(points, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2:
        raise ConfigError(f"{name} must be a 2-D array of shape (k, n), got ndim={arr.ndim}")
    if arr.shape[1] < 1:
        raise ConfigError(f"{name} must have ambient dimension n >= 1")
    if not allow_empty and arr.shape[0] == 0:
        raise ConfigError(f"{name} must be non-empty")
    if not np.all(np.isfinite(arr)):
        raise ConfigError(f"{name} contains non-finite coordinates")
    return np.ascontiguousarray(arr)


def draw_reference_set(m: int, n: int, M: float, rng: np.random.Generator) -> np.ndarray:
    """Draw ``m`` i.i.d. points uniformly from ``[-M, M]^n``."""
    if m < 1:
        raise ConfigError(f"reference set size m must be >= 1, got {m}")
    if not M > 0:
        raise ConfigError(f"hypercube half-width M must be positive, got {M}")
    return rng.uniform(-M, M, size=(m, n))


def build_a1(X, Z) -> np.ndarray:
    """Stack the differences ``x_i - z_j`` into an (m*k, n) matrix.

    Row ``i*m + j`` holds ``X[i] - Z[j]``, so block ``i`` (rows ``i*m`` to
    ``(i+1)*m - 1``) collects every reference offset of sample ``i``.
    """
    X = as_point_cloud(X, "X")
    Z = as_point_cloud(Z, "Z")
    if X.shape[1] != Z.shape[1]:
        raise ConfigError(
            f"dimension mismatch: X has n={X.shape[1]} but Z has n={Z.shape[1]}"
        )
    k, n = X.shape
    m = Z.shape[0]
    return (X[:, None, :] - Z[None, :, :]).reshape(k * m, n)


@dataclass(frozen=True)
class ProjectionBasis:
    """Top right singular vectors of ``A1`` plus the full singular spectrum.

    ``right_vectors`` is (n, n_bar) with orthonormal columns;
    ``singular_values`` holds all ``min(rows, n)`` values in non-increasing
    order, trailing zeros included for rank-deficient input.
    """

    right_vectors: np.ndarray
    singular_values: np.ndarray

    def __post_init__(self):
        V = np.array(self.right_vectors, dtype=np.float64, order="C")
        s = np.array(self.singular_values, dtype=np.float64)
        if V.ndim != 2 or not 1 <= V.shape[1] <= V.shape[0]:
            raise ConfigError(f"right_vectors must be (n, n_bar) with 1 <= n_bar <= n, got {V.shape}")
        if s.ndim != 1 or np.any(s < 0) or np.any(np.diff(s) > 0):
            raise ConfigError("singular_values must be a non-negative, non-increasing 1-D sequence")
        V.flags.writeable = False
        s.flags.writeable = False
        object.__setattr__(self, "right_vectors", V)
        object.__setattr__(self, "singular_values", s)

    @property
    def n(self) -> int:
        return self.right_vectors.shape[0]

    @property
    def n_bar(self) -> int:
        return self.right_vectors.shape[1]

    @property
    def rank(self) -> int:
        s = self.singular_values
        if s.size == 0 or s[0] == 0:
            return 0
        tol = s[0] * max(s.size, self.n) * np.finfo(float).eps
        return int(np.sum(s > tol))


def _fix_signs(V: np.ndarray) -> np.ndarray:
    # first nonzero component of each column made positive
    V = V.copy()
    for col in range(V.shape[1]):
        nz = np.flatnonzero(np.abs(V[:, col]) > 1e-12)
        if nz.size and V[nz[0], col] < 0:
            V[:, col] = -V[:, col]
    return V


def svd_basis(A1, n_bar: int) -> ProjectionBasis:
    """Compute the rank-``n_bar`` projection basis of ``A1``.

    Parameters
    ----------
    A1 : array_like, shape (rows, n)
        Difference matrix from :func:`build_a1`.
    n_bar : int
        Target dimension, ``1 <= n_bar <= n``.

    Returns
    -------
    ProjectionBasis
        Columns ordered by decreasing singular value, each with its first
        nonzero component positive.
    """
    A1 = np.asarray(A1, dtype=np.float64)
    if A1.ndim != 2 or A1.shape[0] == 0 or A1.shape[1] == 0:
        raise ConfigError(f"A1 must be a non-empty 2-D matrix, got shape {A1.shape}")
    n = A1.shape[1]
    if not 1 <= n_bar <= n:
        raise ConfigError(f"target dimension n_bar={n_bar} must satisfy 1 <= n_bar <= n={n}")

    if A1.shape[0] > GRAM_ROW_THRESHOLD:
        evals, evecs = np.linalg.eigh(A1.T @ A1)
        order = np.argsort(evals, kind="stable")[::-1]
        s = np.sqrt(np.clip(evals[order], 0.0, None))
        V = evecs[:, order]
    else:
        _, s, Vt = np.linalg.svd(A1, full_matrices=False)
        V = Vt.T
        if V.shape[1] < n:
            # fewer rows than columns: complete the basis with the null space
            _, _, Vt_full = np.linalg.svd(A1, full_matrices=True)
            V = Vt_full.T
    V = _fix_signs(V[:, :n_bar])
    return ProjectionBasis(right_vectors=V, singular_values=s)


def project(x, basis: ProjectionBasis) -> np.ndarray:
    """Coordinates of ``x`` in the span of the basis vectors.

    Accepts a single n-vector or a (q, n) batch. The dot products are
    accumulated in a fixed order over the ambient axis, so a row gives
    bitwise the same coordinates whether projected alone or in a batch.
    """
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    X = x[None, :] if single else x
    if X.ndim != 2 or X.shape[1] != basis.n:
        raise ConfigError(
            f"dimension mismatch: expected vectors of length {basis.n}, got shape {x.shape}"
        )
    V = basis.right_vectors
    out = np.zeros((X.shape[0], basis.n_bar))
    for j in range(basis.n):
        out += X[:, j, None] * V[j]
    return out[0] if single else out
