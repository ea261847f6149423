import numpy as np
import pytest

from quadflora import formats
from quadflora._util import canonical9, fmt9_array
from quadflora.ensemble import HeadSelection
from quadflora.errors import ConfigError, DuplicatePredictionError, FormatError
from quadflora.metric import GroundTruthTable
from quadflora.selection import PredictionSet
from quadflora.synthworld import SynthConfig, gen_world


class TestCanonicalFloats:
    def test_round_trip_is_fixed_point(self):
        rng = np.random.default_rng(0)
        v = np.concatenate(
            [
                rng.standard_normal(5000) * 10.0 ** rng.integers(-12, 12, 5000),
                [0.0, -0.0, 1e-310, -1e-310, 1e300, -1e300, 0.1, 1 / 3],
            ]
        )
        once = canonical9(v)
        np.testing.assert_array_equal(canonical9(once), once)
        assert (fmt9_array(once) == fmt9_array(v)).all()

    def test_parse_of_rendering_recovers_canonical(self):
        rng = np.random.default_rng(1)
        v = rng.standard_normal(2000) * 1e6
        rendered = fmt9_array(canonical9(v))
        np.testing.assert_array_equal(rendered.astype(np.float64), canonical9(v))

    def test_precision_within_nine_digits(self):
        v = np.array([123456789.123, -0.000123456789123, 3.141592653589793])
        np.testing.assert_allclose(canonical9(v), v, rtol=5e-9)


@pytest.fixture(scope="module")
def world():
    return gen_world(
        SynthConfig(
            n_species=15,
            n_genera=6,
            n_families=3,
            n_quadrats=4,
            grid_cells=8,
            feature_dim=6,
            noise_sigma=0.3,
            richness_min=2,
            richness_max=3,
            seed=12,
        )
    )


class TestGroundTruth:
    def test_round_trip(self, world, tmp_path):
        _, quads, _ = world
        gt = GroundTruthTable(
            quadrats={q.quadrat_id: (q.transect_id, q.truth) for q in quads}
        )
        path = tmp_path / "gt.csv"
        formats.write_ground_truth(gt, path)
        assert formats.load_ground_truth(path).quadrats == gt.quadrats

    def test_byte_identical_rewrite(self, world, tmp_path):
        _, quads, _ = world
        gt = GroundTruthTable(
            quadrats={q.quadrat_id: (q.transect_id, q.truth) for q in quads}
        )
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        formats.write_ground_truth(gt, a)
        formats.write_ground_truth(gt, b)
        assert a.read_bytes() == b.read_bytes()

    def test_duplicate_quadrat_rejected(self, tmp_path):
        p = tmp_path / "gt.csv"
        p.write_text("quadrat_id,transect_id,species_ids\nq0,t0,1\nq0,t0,2\n")
        with pytest.raises(FormatError):
            formats.load_ground_truth(p)

    def test_bad_header(self, tmp_path):
        p = tmp_path / "gt.csv"
        p.write_text("id,transect,species\nq0,t0,1\n")
        with pytest.raises(FormatError):
            formats.load_ground_truth(p)

    def test_ids_must_ascend(self, tmp_path):
        p = tmp_path / "gt.csv"
        p.write_text("quadrat_id,transect_id,species_ids\nq0,t0,3;1\n")
        with pytest.raises(FormatError):
            formats.load_ground_truth(p)


class TestSubmission:
    def test_round_trip(self, tmp_path):
        preds = [PredictionSet("q1", (2, 5)), PredictionSet("q0", (1,))]
        path = tmp_path / "sub.csv"
        formats.write_submission(preds, path)
        loaded = formats.load_submission(path)
        assert [(p.quadrat_id, p.species) for p in loaded] == [
            ("q0", (1,)),
            ("q1", (2, 5)),
        ]

    def test_label_translation(self, tmp_path):
        labels = np.array([100, 200, 300])
        path = tmp_path / "sub.csv"
        formats.write_submission(
            [PredictionSet("q0", (0, 2))], path, species_labels=labels
        )
        assert "q0,100;300" in path.read_text()

    def test_label_out_of_range(self, tmp_path):
        labels = np.array([100])
        with pytest.raises(FormatError):
            formats.write_submission(
                [PredictionSet("q0", (0, 5))], tmp_path / "s.csv", species_labels=labels
            )

    def test_duplicate_rows_rejected(self, tmp_path):
        p = tmp_path / "sub.csv"
        p.write_text("quadrat_id,species_ids\nq0,1\nq0,2\n")
        with pytest.raises(DuplicatePredictionError):
            formats.load_submission(p)


class TestFeatures:
    def test_round_trip(self, world, tmp_path):
        _, quads, _ = world
        path = tmp_path / "feat.csv"
        formats.write_quadrat_features(quads, path)
        loaded = formats.load_quadrat_features(path)
        assert [q.quadrat_id for q in loaded] == [q.quadrat_id for q in quads]
        for a, b in zip(loaded, quads):
            assert a.transect_id == b.transect_id
            # written at 9 significant digits
            np.testing.assert_allclose(a.cells, b.cells, rtol=1e-8)

    def test_loaded_features_are_canonical(self, world, tmp_path):
        _, quads, _ = world
        path = tmp_path / "feat.csv"
        formats.write_quadrat_features(quads, path)
        once = formats.load_quadrat_features(path)
        formats.write_quadrat_features(once, tmp_path / "feat2.csv")
        assert path.read_bytes() == (tmp_path / "feat2.csv").read_bytes()

    def test_missing_cell_rejected(self, tmp_path):
        p = tmp_path / "feat.csv"
        p.write_text(
            "quadrat_id,transect_id,grid_cells,feature_dim,row,col,values\n"
            "q0,t0,2,1,0,0,1.5\n"
        )
        with pytest.raises(FormatError, match="missing cells"):
            formats.load_quadrat_features(p)


class TestHeadRegistry:
    def test_round_trip(self, world, tmp_path):
        _, _, registry = world
        path = tmp_path / "heads.csv"
        formats.write_head_registry(registry, path)
        loaded = formats.load_head_registry(path)
        assert set(loaded.heads) == set(registry.heads)
        for level in registry.heads:
            assert sorted(loaded.heads[level]) == sorted(registry.heads[level])
        lin = loaded.heads["species"]["lin1"]
        np.testing.assert_allclose(
            lin.weight, registry.heads["species"]["lin1"].weight, rtol=1e-8
        )
        two = loaded.heads["genus"]["mlp2"]
        np.testing.assert_allclose(
            two.w2, registry.heads["genus"]["mlp2"].w2, rtol=1e-8
        )

    def test_unknown_param_rejected(self, tmp_path):
        p = tmp_path / "heads.csv"
        p.write_text("level,head_id,param,row,values\nspecies,h,w3,0,1.0\n")
        with pytest.raises(FormatError):
            formats.load_head_registry(p)


class TestCache:
    def test_round_trip_and_stability(self, tmp_path):
        path = tmp_path / "cache.csv"
        cache = formats.LogitCache(path)
        rng = np.random.default_rng(3)
        from quadflora._util import canonical9

        for i in range(5):
            key = ("m", f"q{i}", "10", 4, i % 4, i // 4, "species")
            cache.put(key, canonical9(rng.standard_normal(7)))
        cache.save()
        loaded = formats.LogitCache.load(path)
        assert len(loaded) == 5
        for key in cache._data:
            np.testing.assert_array_equal(loaded.get(key), cache.get(key))
        loaded.save(tmp_path / "cache2.csv")
        assert path.read_bytes() == (tmp_path / "cache2.csv").read_bytes()

    def test_missing_file_is_empty(self, tmp_path):
        assert len(formats.LogitCache.load(tmp_path / "nope.csv")) == 0

    def test_clean_save_skips_rewrite(self, tmp_path):
        import os

        path = tmp_path / "cache.csv"
        cache = formats.LogitCache(path)
        cache.put(("m", "q0", "10", 4, 0, 0, "species"), np.array([1.0, 2.0]))
        cache.save()
        inode = os.stat(path).st_ino
        warm = formats.LogitCache.load(path)
        warm.save()  # nothing changed: the file must not be replaced
        assert os.stat(path).st_ino == inode
        warm.put(("m", "q0", "10", 4, 0, 1, "species"), np.array([3.0]))
        warm.save()
        assert os.stat(path).st_ino != inode
        assert len(formats.LogitCache.load(path)) == 2


class TestConfigs:
    def test_parse_text(self):
        text = "# comment\nn_species = 5\n\nn_genera=2  # tail\nn_families = 1\n"
        assert formats.parse_config_text(text) == {
            "n_species": "5",
            "n_genera": "2",
            "n_families": "1",
        }

    def test_duplicate_key(self):
        with pytest.raises(FormatError):
            formats.parse_config_text("a = 1\na = 2\n")

    def test_synth_config(self):
        cfg = formats.synth_config_from(
            {"n_species": "10", "n_genera": "4", "n_families": "2", "seed": "3"}
        )
        assert cfg.n_species == 10 and cfg.seed == 3

    def test_synth_config_unknown_key(self):
        with pytest.raises(ConfigError):
            formats.synth_config_from({"n_specie": "10"})

    def test_run_config(self):
        cfg = formats.run_config_from(
            {
                "scales": "4,5",
                "crop_fracs": "0.10",
                "models": "lin1+mlp2+mlp2, lin1h+-+-",
                "target_mean_len": "4.2",
                "max_len": "9",
            }
        )
        assert cfg.scales == (4, 5)
        assert cfg.crop_fracs == (0.10,)
        assert cfg.head_combos == (
            HeadSelection("lin1", "mlp2", "mlp2"),
            HeadSelection("lin1h", None, None),
        )
        assert cfg.selection.target_mean_len == 4.2
        assert cfg.selection.max_len == 9

    def test_run_config_table_style_static_threshold(self):
        cfg = formats.run_config_from(
            {
                "scales": "4,5",
                "crop_fracs": "0.10",
                "min_logit": "0.02",
                "max_len": "10",
                "channel": "raw",
            }
        )
        assert cfg.selection.min_logit == 0.02
        assert cfg.selection.max_len == 10

    def test_run_config_unbounded_max(self):
        cfg = formats.run_config_from({"scales": "4", "max_len": "inf"})
        assert cfg.selection.max_len is None

    def test_run_config_contradiction(self):
        with pytest.raises(ConfigError):
            formats.run_config_from(
                {"scales": "4", "min_logit": "0.1", "target_mean_len": "4"}
            )

    def test_run_config_needs_scales(self):
        with pytest.raises(ConfigError):
            formats.run_config_from({})
