import math
import struct

import numpy as np
import pytest

from diffext.errors import (BadMagicError, ChecksumError, ConfigError, TruncatedFileError,
                            VersionMismatchError)
from diffext.extender import extend_batch, fit
from diffext.harness.cli import EXIT_CONFIG, EXIT_IO, EXIT_NUMERICAL, EXIT_OK, main
from diffext.harness.config import ExperimentConfig, Seeds, build_config, parse_config_text
from diffext.harness.experiments import (LOCK_NAME, run_ct, run_spiral, sample_spiral_parameters,
                                         spiral_label, spiral_points)
from diffext.harness.persistence import dumps_model, load_model, loads_model, save_model
from diffext.online import EvaluationCache, evaluate_cached
from diffext.tomo.io import read_mxf, write_mxf


class TestConfig:
    def test_defaults(self):
        cfg = ExperimentConfig()
        assert cfg.batch_sizes == [50, 100, 150]
        assert cfg.eval_count == 10_000
        assert cfg.n_bar == 2 and cfg.delta == 0.1 and cfg.m_reference == 50
        assert cfg.half_width == math.e
        assert ExperimentConfig(experiment="ct").half_width == 1.0
        assert ExperimentConfig(experiment="ct").train_sampling == "random"
        assert cfg.train_sampling == "parameter"

    def test_file_parsing(self):
        vals = parse_config_text("# comment\nexperiment = ct\nbatch-sizes = 10, 20\ndelta=0.2\nM = 2.5\ntiming = yes\n")
        assert vals == {"experiment": "ct", "batch_sizes": [10, 20], "delta": 0.2, "M": 2.5, "timing": True}

    def test_flags_override_file(self):
        cfg = build_config({"experiment": "ct", "delta": 0.2, "seed": 4}, {"delta": "0.3", "seed": None})
        assert cfg.delta == 0.3 and cfg.seed == 4

    @pytest.mark.parametrize("text", [
        "delta = 1.0", "delta = 0", "batch_sizes = 0,5", "nb = 366", "bogus = 1", "eval_count = x",
        "experiment = mri", "train_sampling = grid", "no equals sign",
    ])
    def test_invalid(self, text):
        with pytest.raises(ConfigError):
            build_config(parse_config_text(text))

    def test_seeds_independent_and_stable(self):
        a, b = Seeds.derive(0), Seeds.derive(0)
        assert a == b
        assert len({a.train, a.eval, a.noise, a.fit}) == 4
        assert Seeds.derive(1) != a


class TestSpiralGeometry:
    def test_label_inverts_parametrization(self):
        t = np.linspace(0, 1, 101)
        np.testing.assert_allclose(spiral_label(spiral_points(t)), t, atol=1e-15)

    def test_midpoint(self):
        np.testing.assert_allclose(spiral_points([0.5])[0], [-math.exp(0.5), 0.0], atol=1e-15)

    def test_arclength_sampling_density(self):
        t = sample_spiral_parameters(np.random.default_rng(0), 200_000, "arclength")
        # fraction below t0 equals (e^t0 - 1)/(e - 1)
        assert np.mean(t < 0.5) == pytest.approx((math.exp(0.5) - 1) / (math.e - 1), abs=0.005)


@pytest.fixture
def spiral_model(spiral_data):
    return fit(*spiral_data, M=math.e, seed=1)


class TestPersistence:
    def test_roundtrip_predictions_bitwise(self, tmp_path, spiral_model, rng):
        save_model(spiral_model, None, tmp_path / "m.dxm")
        loaded, cache = load_model(tmp_path / "m.dxm")
        assert cache is None
        Q = rng.uniform(-2, 2, size=(100, 2))
        assert extend_batch(Q, loaded).tobytes() == extend_batch(Q, spiral_model).tobytes()
        assert loaded.basis.singular_values.tobytes() == spiral_model.basis.singular_values.tobytes()

    def test_vector_model_roundtrip(self, spiral_data, rng):
        X, t = spiral_data
        model = fit(X, np.column_stack([t, t**2]), M=math.e)
        loaded, _ = loads_model(dumps_model(model))
        Q = rng.uniform(-2, 2, size=(20, 2))
        assert extend_batch(Q, loaded).tobytes() == extend_batch(Q, model).tobytes()

    def test_cache_roundtrip(self, spiral_model, rng):
        cache = EvaluationCache()
        Q = rng.uniform(-2, 2, size=(10, 2))
        for i, q in enumerate(Q):
            evaluate_cached(f"q{i}", q, spiral_model, cache)
        evaluate_cached(99, spiral_model.train_points[3], spiral_model, cache)
        _, back = loads_model(dumps_model(spiral_model, cache))
        assert list(back.entries) == list(cache.entries)
        for key, e in cache.entries.items():
            b = back[key]
            assert (b.epsilon == e.epsilon) or (math.isnan(b.epsilon) and math.isnan(e.epsilon))
            assert b.value.tobytes() == e.value.tobytes()
            assert b.k_seen == e.k_seen and b.exact_index == e.exact_index
        assert back.kernel_evals == cache.kernel_evals

    def test_bad_magic(self, spiral_model):
        raw = dumps_model(spiral_model)
        with pytest.raises(BadMagicError):
            loads_model(b"XX" + raw[2:])

    def test_version_mismatch(self, spiral_model):
        raw = bytearray(dumps_model(spiral_model))
        raw[8:12] = struct.pack("<I", 99)
        with pytest.raises(VersionMismatchError):
            loads_model(bytes(raw))

    @pytest.mark.parametrize("cut", [5, 30, 100, 1])
    def test_truncated(self, spiral_model, cut):
        raw = dumps_model(spiral_model)
        with pytest.raises(TruncatedFileError):
            loads_model(raw[:len(raw) - cut] if cut > 1 else raw[:cut + 3])

    def test_checksum(self, spiral_model):
        raw = bytearray(dumps_model(spiral_model))
        raw[-100] ^= 0xFF
        with pytest.raises(ChecksumError):
            loads_model(bytes(raw))


class TestExperimentsSmall:
    def test_spiral_outputs(self, tmp_path):
        cfg = ExperimentConfig(batch_sizes=[20, 40], eval_count=500, raster_size=16, output_dir=str(tmp_path))
        res = run_spiral(cfg)
        assert [r.batch for r in res.reports] == [20, 40]
        names = {p.name for p in tmp_path.iterdir()}
        assert {"report.csv", "manifest.txt", "spiral_k20_extension.pgm", "spiral_k40_cube.mxf"} <= names
        assert LOCK_NAME not in names
        manifest = (tmp_path / "manifest.txt").read_text()
        assert "version = v" in manifest and "seed_eval = " in manifest and "batch_sizes = 20,40" in manifest
        for k, model in res.models.items():
            got = extend_batch(model.train_points, model)[:, 0]
            assert got.tobytes() == res.train_params[k].tobytes()

    def test_ct_small(self, tmp_path):
        cfg = ExperimentConfig(experiment="ct", batch_sizes=[12, 24], eval_count=300, d=32, nb=47,
                               output_dir=str(tmp_path))
        res = run_ct(cfg)
        methods = {r.method for r in res.reports}
        assert methods == {"training", "learned", "spline", "training_vs_noisy", "learned_vs_noisy",
                           "spline_vs_noisy"}
        assert (tmp_path / "ct_k12_learned.pgm").exists()
        assert (tmp_path / "ct_k24_train_sino.mxf.angles").exists()

    def test_timing_column(self, tmp_path):
        cfg = ExperimentConfig(batch_sizes=[20], eval_count=100, raster_size=8, timing=True,
                               output_dir=str(tmp_path))
        run_spiral(cfg)
        line = (tmp_path / "report.csv").read_text().splitlines()[1]
        assert float(line.split(",")[3]) >= 0

    def test_locked_output_dir(self, tmp_path):
        (tmp_path / LOCK_NAME).write_text("123")
        cfg = ExperimentConfig(batch_sizes=[20], eval_count=100, raster_size=8, output_dir=str(tmp_path))
        with pytest.raises(OSError, match="locked"):
            run_spiral(cfg)


def _spiral_files(tmp_path, rng):
    t = rng.uniform(0, 1, 40)
    write_mxf(tmp_path / "x.mxf", spiral_points(t))
    np.savetxt(tmp_path / "v.txt", t)
    np.savetxt(tmp_path / "q.csv", rng.uniform(-2, 2, size=(5, 2)), delimiter=",")
    return t


class TestCLI:
    def test_fit_predict_update_info(self, tmp_path, rng, capsys):
        t = _spiral_files(tmp_path, rng)
        m = str(tmp_path / "m.dxm")
        assert main(["fit", "--points", str(tmp_path / "x.mxf"), "--values", str(tmp_path / "v.txt"),
                     "--model", m, "--M", str(math.e)]) == EXIT_OK
        assert main(["predict", "--model", m, "--queries", str(tmp_path / "q.csv"),
                     "--out", str(tmp_path / "p.mxf"), "--cache"]) == EXIT_OK
        pred = read_mxf(tmp_path / "p.mxf")
        assert pred.shape == (5, 1) and np.all((pred >= t.min()) & (pred <= t.max()))
        t2 = rng.uniform(0, 1, 10)
        np.savetxt(tmp_path / "x2.txt", spiral_points(t2))
        np.savetxt(tmp_path / "v2.txt", t2)
        assert main(["update", "--model", m, "--points", str(tmp_path / "x2.txt"),
                     "--values", str(tmp_path / "v2.txt")]) == EXIT_OK
        model, cache = load_model(m)
        assert model.k == 50 and len(cache) == 5 and all(e.k_seen == 50 for e in cache.entries.values())
        capsys.readouterr()
        assert main(["info", "--model", m]) == EXIT_OK
        out = capsys.readouterr().out
        assert "k = 50" in out and "cached_queries = 5" in out

    def test_spiral_with_config_file(self, tmp_path):
        (tmp_path / "cfg.txt").write_text("batch_sizes = 20,30\neval_count = 200\nraster_size = 8\n")
        out = tmp_path / "out"
        assert main(["spiral", "--config", str(tmp_path / "cfg.txt"), "--eval-count", "100",
                     "--output-dir", str(out)]) == EXIT_OK
        assert "eval_count = 100" in (out / "manifest.txt").read_text()

    @pytest.mark.parametrize("argv_fn,code", [
        (lambda p: ["spiral", "--delta", "1.0", "--output-dir", str(p / "o")], EXIT_CONFIG),
        (lambda p: ["spiral", "--batch-sizes", "abc", "--output-dir", str(p / "o")], EXIT_CONFIG),
        (lambda p: ["ct", "--config", str(p / "missing.cfg")], EXIT_CONFIG),
        (lambda p: ["nonsense"], EXIT_CONFIG),
        (lambda p: ["fit", "--points", str(p / "x.mxf"), "--values", str(p / "v.txt"),
                    "--model", str(p / "m.dxm"), "--delta", "1.0"], EXIT_CONFIG),
        (lambda p: ["fit", "--points", str(p / "x.mxf"), "--values", str(p / "v.txt"),
                    "--model", str(p / "m.dxm"), "--M", "1.0"], EXIT_CONFIG),
        (lambda p: ["info", "--model", str(p / "nope.dxm")], EXIT_IO),
        (lambda p: ["info", "--model", str(p / "x.mxf")], EXIT_IO),
        (lambda p: ["predict", "--model", str(p / "nope.dxm"), "--queries", "q", "--out", "o"], EXIT_IO),
        (lambda p: ["fit", "--points", str(p / "inf.txt"), "--values", str(p / "one.txt"),
                    "--model", str(p / "m.dxm")], EXIT_CONFIG),
        (lambda p: ["predict", "--model", str(p / "good.dxm"), "--queries", str(p / "huge.txt"),
                    "--out", str(p / "o.txt")], EXIT_NUMERICAL),
    ])
    def test_exit_codes(self, tmp_path, rng, argv_fn, code):
        _spiral_files(tmp_path, rng)
        np.savetxt(tmp_path / "inf.txt", [[np.inf, 0.0]])
        np.savetxt(tmp_path / "one.txt", [1.0])
        main(["fit", "--points", str(tmp_path / "x.mxf"), "--values", str(tmp_path / "v.txt"),
              "--model", str(tmp_path / "good.dxm"), "--M", str(math.e)])
        np.savetxt(tmp_path / "huge.txt", [[1e200, 1e200]])
        assert main(argv_fn(tmp_path)) == code
