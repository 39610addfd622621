"""Online incorporation of new samples into cached query evaluations.

Each cached query keeps its bandwidth frozen at first evaluation together
with the running normalization and weighted value sum. New samples add
their kernel terms to both sums, so reading a cached entry after an update
gives the same value as a single pass over all samples at that bandwidth:

    g_new = (g_prev * Nm_k + sum_new w_i g(x_i)) / Nm_{k+m}.

The stability bound on ``Nm`` survives updates because old terms are kept.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Hashable

import numpy as np

from .dimred import as_point_cloud, project
from .errors import ConfigError
from .extender import (COINCIDENCE_TOL, ExtenderModel, _evaluate_row, as_sample_values,
                       check_in_cube, sq_distances)


@dataclass
class CacheEntry:
    query_coord: np.ndarray  # (n_bar,)
    epsilon: float  # nan for exact sample hits
    ref_sq: float  # weight shift; true weight = exp(-ref_sq / eps^2) * u
    u_sum: float
    u_weighted: np.ndarray  # (p,)
    k_seen: int
    exact_index: int = -1

    @property
    def exact(self) -> bool:
        return self.exact_index >= 0

    @property
    def nm(self) -> float:
        """Unshifted normalization factor (nan for exact hits)."""
        if self.exact:
            return math.nan
        return math.exp(-self.ref_sq / (self.epsilon * self.epsilon)) * self.u_sum

    @property
    def weighted_sum(self) -> np.ndarray:
        if self.exact:
            return self.u_weighted.copy()
        return math.exp(-self.ref_sq / (self.epsilon * self.epsilon)) * self.u_weighted

    @property
    def value(self) -> np.ndarray:
        if self.exact:
            return self.u_weighted.copy()
        return self.u_weighted / self.u_sum


@dataclass
class EvaluationCache:
    """Per-query state keyed by caller-supplied identifiers.

    ``kernel_evals`` counts every Gaussian weight computed through this
    cache, which lets tests check the cost of an update.
    """

    entries: dict = field(default_factory=dict)
    kernel_evals: int = 0

    def __contains__(self, key) -> bool:
        return key in self.entries

    def __len__(self) -> int:
        return len(self.entries)

    def __getitem__(self, key) -> CacheEntry:
        return self.entries[key]


def _cold_entry(coord: np.ndarray, model: ExtenderModel, cache: EvaluationCache) -> CacheEntry:
    d2 = sq_distances(coord[None, :], model.train_coords)[0]
    eps, ref, u_sum, u_w, hit = _evaluate_row(d2, model)
    if hit < 0:
        cache.kernel_evals += model.k
    return CacheEntry(coord.copy(), eps, ref, u_sum, np.asarray(u_w, dtype=np.float64),
                      model.k, hit)


def _absorb(entry: CacheEntry, coords: np.ndarray, values: np.ndarray, offset: int,
            cache: EvaluationCache) -> None:
    """Add the kernel terms of samples ``coords`` (indices from ``offset``) to ``entry``."""
    if entry.exact or coords.shape[0] == 0:
        return
    d2 = sq_distances(entry.query_coord[None, :], coords)[0]
    j = int(np.argmin(d2))
    if math.sqrt(d2[j]) <= COINCIDENCE_TOL:
        # a new sample landed on the query: the entry degenerates to that value
        entry.epsilon = math.nan
        entry.ref_sq = 0.0
        entry.u_sum = 1.0
        entry.u_weighted = values[j].copy()
        entry.exact_index = offset + j
        return
    u = np.exp(-(d2 - entry.ref_sq) / (entry.epsilon * entry.epsilon))
    cache.kernel_evals += coords.shape[0]
    entry.u_sum = entry.u_sum + u.sum()
    entry.u_weighted = entry.u_weighted + values.T @ u


def evaluate_cached(key: Hashable, query, model: ExtenderModel, cache: EvaluationCache) -> np.ndarray:
    """Evaluate ``query`` through the cache under identifier ``key``.

    A cold key is evaluated against all current samples and stored. A warm
    key returns the stored ratio; if the model has grown since the entry was
    last synced, only the missing samples are absorbed first.
    """
    if model.k == 0:
        raise ConfigError("cannot evaluate an empty model")
    entry = cache.entries.get(key)
    if entry is None:
        x = np.asarray(query, dtype=np.float64)
        if x.shape != (model.n,):
            raise ConfigError(f"query must be a vector of length {model.n}, got shape {x.shape}")
        entry = _cold_entry(project(x, model.basis), model, cache)
        cache.entries[key] = entry
    elif entry.k_seen < model.k:
        lo = entry.k_seen
        _absorb(entry, model.train_coords[lo:], model.values[lo:], lo, cache)
        entry.k_seen = model.k
    return entry.value


def update(model: ExtenderModel, cache: EvaluationCache, new_points, new_values):
    """Append samples to ``model`` and fold them into every cached entry.

    New points are projected with the model's existing basis. Returns
    ``(new_model, cache)``; the cache is modified in place.
    """
    P = as_point_cloud(new_points, "new_points", allow_empty=True)
    if P.shape[1] != model.n:
        raise ConfigError(f"dimension mismatch: new points have n={P.shape[1]}, model has n={model.n}")
    if P.shape[0] == 0:
        return model, cache
    V = as_sample_values(new_values, P.shape[0])
    if V.shape[1] != model.p:
        raise ConfigError(f"value dimension mismatch: got p={V.shape[1]}, model has p={model.p}")
    check_in_cube(P, model.M, "new points")

    coords = project(P, model.basis)
    new_model = ExtenderModel(
        train_points=np.concatenate([model.train_points, P]),
        train_coords=np.concatenate([model.train_coords, coords]),
        values=np.asfortranarray(np.concatenate([model.values, V])),
        basis=model.basis,
        delta=model.delta,
        M=model.M,
    )
    for entry in cache.entries.values():
        if entry.k_seen < model.k:
            lo = entry.k_seen
            _absorb(entry, model.train_coords[lo:], model.values[lo:], lo, cache)
        _absorb(entry, coords, V, model.k, cache)
        entry.k_seen = new_model.k
    return new_model, cache
