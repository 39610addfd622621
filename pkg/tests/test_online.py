import math

import numpy as np
import pytest

from diffext.dimred import ProjectionBasis, project
from diffext.errors import ConfigError
from diffext.extender import ExtenderModel, extend, fit, stability_bound
from diffext.harness.experiments import spiral_points
from diffext.online import EvaluationCache, evaluate_cached, update


def frozen_eps_oracle(query, model, eps):
    """Single pass over all samples at a fixed bandwidth, no shifting."""
    c = project(query, model.basis)
    d2 = np.sum((model.train_coords - c) ** 2, axis=1)
    w = np.exp(-d2 / eps**2)
    return (w @ model.values) / w.sum(), w.sum()


def spiral_split(seed, k, extra):
    r = np.random.default_rng(seed)
    t = r.uniform(0, 1, k + extra)
    return spiral_points(t), t


def _cache_queries(model, cache, Q):
    return [evaluate_cached(i, q, model, cache) for i, q in enumerate(Q)]


class TestEvaluateCached:
    def test_cold_equals_extend(self, spiral_data, rng):
        model = fit(*spiral_data, M=math.e)
        cache = EvaluationCache()
        for i, q in enumerate(rng.uniform(-2, 2, size=(25, 2))):
            assert evaluate_cached(i, q, model, cache).tobytes() == extend(q, model).value.tobytes()

    def test_warm_hit_costs_nothing(self, spiral_data):
        model = fit(*spiral_data, M=math.e)
        cache = EvaluationCache()
        first = evaluate_cached("q", [0.4, -1.1], model, cache)
        assert cache.kernel_evals == model.k
        second = evaluate_cached("q", [0.4, -1.1], model, cache)
        assert cache.kernel_evals == model.k
        assert first.tobytes() == second.tobytes()

    def test_records_epsilon(self):
        basis = ProjectionBasis(np.eye(1), np.array([1.0]))
        X = np.array([[0.0], [2.0]])
        model = ExtenderModel(X, X.copy(), np.asfortranarray([[1.0], [3.0]]), basis, 0.1, 5.0)
        cache = EvaluationCache()
        evaluate_cached("a", [-1.0], model, cache)
        assert cache["a"].epsilon == pytest.approx(0.434294481903251827651128918917, rel=1e-14)
        assert cache["a"].k_seen == 2

    def test_exact_hit_entry(self, spiral_data):
        X, t = spiral_data
        model = fit(X, t, M=math.e)
        cache = EvaluationCache()
        assert evaluate_cached(0, X[5], model, cache)[0] == t[5]
        assert cache[0].exact and math.isnan(cache[0].nm)


class TestUpdate:
    def test_empty_update_is_identity(self, spiral_data, rng):
        model = fit(*spiral_data, M=math.e)
        cache = EvaluationCache()
        _cache_queries(model, cache, rng.uniform(-2, 2, size=(5, 2)))
        before = {k: (e.u_sum, e.u_weighted.tobytes()) for k, e in cache.entries.items()}
        new_model, new_cache = update(model, cache, np.zeros((0, 2)), np.zeros((0, 1)))
        assert new_model is model and new_cache is cache
        assert {k: (e.u_sum, e.u_weighted.tobytes()) for k, e in cache.entries.items()} == before

    def test_matches_frozen_batch(self):
        X, t = spiral_split(1, 30, 20)
        model = fit(X[:30], t[:30], M=math.e, seed=2)
        Q = np.random.default_rng(3).uniform(-math.e, math.e, size=(20, 2))
        cache = EvaluationCache()
        _cache_queries(model, cache, Q)
        eps = {i: cache[i].epsilon for i in range(20)}
        model, cache = update(model, cache, X[30:], t[30:])
        assert model.k == 50
        for i, q in enumerate(Q):
            want, _ = frozen_eps_oracle(q, model, eps[i])
            got = evaluate_cached(i, q, model, cache)
            np.testing.assert_allclose(got, want, rtol=1e-10)
            assert cache[i].epsilon == eps[i]

    def test_normalization_additive(self, spiral_data, rng):
        X, t = spiral_data
        model = fit(X[:100], t[:100], M=math.e)
        cache = EvaluationCache()
        q = np.array([0.9, 0.7])
        evaluate_cached("q", q, model, cache)
        nm_before = cache["q"].nm
        eps = cache["q"].epsilon
        c = project(q, model.basis)
        new_w = np.exp(-np.sum((project(X[100:], model.basis) - c) ** 2, axis=1) / eps**2)
        update(model, cache, X[100:], t[100:])
        assert cache["q"].nm == pytest.approx(nm_before + new_w.sum(), rel=1e-12, abs=1e-12)

    def test_update_cost(self, spiral_data, rng):
        X, t = spiral_data
        model = fit(X[:100], t[:100], M=math.e)
        cache = EvaluationCache()
        _cache_queries(model, cache, rng.uniform(-2, 2, size=(10, 2)))
        before = cache.kernel_evals
        update(model, cache, X[100:], t[100:])
        assert cache.kernel_evals - before == 10 * 50

    def test_order_invariance(self):
        X, t = spiral_split(4, 20, 40)
        Q = np.random.default_rng(5).uniform(-2, 2, size=(15, 2))
        base = fit(X[:20], t[:20], M=math.e, seed=1)

        def run(batches):
            model, cache = base, EvaluationCache()
            _cache_queries(model, cache, Q)
            for lo, hi in batches:
                model, cache = update(model, cache, X[lo:hi], t[lo:hi])
            return np.array([cache[i].value for i in range(len(Q))])

        a = run([(20, 40), (40, 60)])
        b = run([(40, 60), (20, 40)])
        c = run([(20, 60)])
        np.testing.assert_allclose(a, b, rtol=1e-10)
        np.testing.assert_allclose(a, c, rtol=1e-10)

    def test_monotone_normalization_and_bound(self):
        X, t = spiral_split(6, 10, 60)
        model = fit(X[:10], t[:10], M=math.e)
        cache = EvaluationCache()
        _cache_queries(model, cache, np.random.default_rng(0).uniform(-2, 2, size=(30, 2)))
        prev = {k: e.nm for k, e in cache.entries.items()}
        for lo in range(10, 70, 15):
            model, cache = update(model, cache, X[lo:lo + 15], t[lo:lo + 15])
            for k, e in cache.entries.items():
                assert e.nm >= prev[k]
                assert e.nm >= stability_bound(0.1) - 1e-12
                assert t.min() - 1e-12 <= e.value[0] <= t.max() + 1e-12
                prev[k] = e.nm

    def test_new_point_on_cached_query(self, spiral_data):
        X, t = spiral_data
        model = fit(X[:100], t[:100], M=math.e)
        cache = EvaluationCache()
        evaluate_cached("q", X[120], model, cache)
        assert not cache["q"].exact
        model, cache = update(model, cache, X[100:], t[100:])
        assert cache["q"].exact_index == 120
        assert evaluate_cached("q", X[120], model, cache)[0] == t[120]

    def test_basis_frozen(self, spiral_data):
        X, t = spiral_data
        model = fit(X[:50], t[:50], M=math.e)
        new_model, _ = update(model, EvaluationCache(), X[50:], t[50:])
        assert new_model.basis is model.basis
        np.testing.assert_allclose(new_model.train_coords[50:], project(X[50:], model.basis), atol=1e-12)

    def test_stale_entry_catches_up(self, spiral_data):
        X, t = spiral_data
        model = fit(X[:80], t[:80], M=math.e)
        cache = EvaluationCache()
        evaluate_cached("q", [1.0, 1.0], model, cache)
        eps = cache["q"].epsilon
        model, _ = update(model, EvaluationCache(), X[80:], t[80:])
        got = evaluate_cached("q", [1.0, 1.0], model, cache)
        want, _ = frozen_eps_oracle(np.array([1.0, 1.0]), model, eps)
        np.testing.assert_allclose(got, want, rtol=1e-10)

    @pytest.mark.parametrize("pts,vals", [
        (np.zeros((2, 3)), np.zeros(2)),
        (np.zeros((2, 2)), np.zeros((2, 2))),
        (np.full((1, 2), 9.0), np.zeros(1)),
    ])
    def test_rejects_bad_input(self, spiral_data, pts, vals):
        model = fit(*spiral_data, M=math.e)
        with pytest.raises(ConfigError):
            update(model, EvaluationCache(), pts, vals)
