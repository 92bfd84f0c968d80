import numpy as np
import pytest

from clfm.imgcore import read_png, write_png
from clfm.pipeline import (
    DEFAULT_TAU,
    DataError,
    build_dataset,
    edge_consistency_score,
    ingest,
    load_group,
    load_weight_maps,
    manifest_to_bytes,
    read_manifest,
    refresh_weight_maps,
    weight_maps_for_group,
)
from clfm.retinex import InterpolationMethod
from clfm.synthetic import make_pair, square_shift_pair
from clfm.weights import MaskParams

from conftest import random_image, write_pair_fixture


class TestEdgeConsistencyScore:
    def test_identical_pair_scores_zero(self, rng):
        img = random_image(rng, 32, 32)
        assert edge_consistency_score(img, img) == 0.0

    def test_symmetric(self, rng):
        a, b = random_image(rng, 32, 32), random_image(rng, 32, 32)
        assert edge_consistency_score(a, b) == pytest.approx(
            edge_consistency_score(b, a), rel=1e-12
        )

    def _square_scene_pair(self):
        # one fixed square rendered dark, plus a brightened unshifted twin
        from clfm.synthetic import Rect, Scene, render_scene

        scene = Scene(32, 0.12, (Rect(10, 7, 12, 12, 0.4),))
        return render_scene(scene, 0.5), render_scene(scene, 0.95)

    def test_shifted_square_scores_higher(self):
        i0, shifted = square_shift_pair(32, shift=6, square=12)
        _, brightened = self._square_scene_pair()
        s_shift = edge_consistency_score(i0, shifted)
        s_same = edge_consistency_score(*self._square_scene_pair())
        assert s_shift > s_same

    def test_tau_calibration_on_synthetic_case(self):
        # the default threshold rejects the 6 px shift and accepts the
        # brightened-but-unshifted twin
        i0, shifted = square_shift_pair(32, shift=6, square=12)
        assert edge_consistency_score(i0, shifted) > DEFAULT_TAU
        dark, bright = self._square_scene_pair()
        assert edge_consistency_score(dark, bright) <= DEFAULT_TAU

    def test_dimension_mismatch(self, rng):
        with pytest.raises(ValueError):
            edge_consistency_score(random_image(rng, 32, 32), random_image(rng, 32, 48))


class TestIngest:
    def test_empty_directory(self, tmp_path):
        assert ingest(tmp_path) == []

    def test_complete_pair_yields_record(self, tmp_path, rng):
        write_pair_fixture(tmp_path, n_pairs=1, size=32)
        records = ingest(tmp_path)
        assert len(records) == 1
        rec = records[0]
        assert rec.pair_id == "pair0"
        assert rec.width == 32 and rec.height == 32
        assert rec.accepted == (rec.consistency_score <= DEFAULT_TAU)

    def test_incomplete_pair_skipped_with_warning(self, tmp_path, rng, caplog):
        write_png(random_image(rng, 32, 32), tmp_path / "lonely_low.png")
        with caplog.at_level("WARNING"):
            records = ingest(tmp_path)
        assert records == []
        assert any("lonely" in message for message in caplog.messages)

    def test_dimension_mismatch_rejected_with_reason(self, tmp_path, rng):
        write_png(random_image(rng, 32, 32), tmp_path / "odd_low.png")
        write_png(random_image(rng, 32, 48), tmp_path / "odd_normal.png")
        records = ingest(tmp_path)
        assert len(records) == 1
        assert not records[0].accepted
        assert "mismatch" in records[0].reason
        assert records[0].consistency_score == float("inf")

    def test_unreadable_file_rejected(self, tmp_path, rng):
        (tmp_path / "bad_low.png").write_bytes(b"not a png at all")
        write_png(random_image(rng, 32, 32), tmp_path / "bad_normal.png")
        records = ingest(tmp_path)
        assert len(records) == 1
        assert not records[0].accepted
        assert "unreadable" in records[0].reason

    def test_tau_monotonicity(self, tmp_path):
        rng = np.random.default_rng(5)
        for i in range(4):
            low, normal = make_pair(rng, 32, misaligned=(i % 2 == 0))
            write_png(low, tmp_path / f"p{i}_low.png")
            write_png(normal, tmp_path / f"p{i}_normal.png")
        loose = {r.pair_id for r in ingest(tmp_path, tau=0.05) if r.accepted}
        tight = {r.pair_id for r in ingest(tmp_path, tau=0.005) if r.accepted}
        assert tight <= loose


class TestBuildDataset:
    def test_file_counts(self, fixture_dataset):
        dataset_dir = fixture_dataset["dataset_dir"]
        images = sorted(p.name for p in dataset_dir.glob("pair0_s*.png") if ".w16" not in p.name)
        maps = sorted(p.name for p in dataset_dir.glob("pair0_*.w16.png"))
        assert len(images) == 6  # s in {0, .2, .4, .6, .8, 1}
        assert len(maps) == 5  # every supervision target incl. s=1

    def test_no_accepted_pairs_is_an_error(self, tmp_path):
        with pytest.raises(DataError):
            build_dataset([], (0.2,), InterpolationMethod.RETINEX, tmp_path)

    def test_endpoint_images_round_trip_exactly(self, fixture_dataset):
        dataset_dir = fixture_dataset["dataset_dir"]
        source = read_png(fixture_dataset["pairs_dir"] / "pair0_low.png")
        stored = read_png(dataset_dir / "pair0_s000.png")
        assert np.array_equal(stored.data, source.data)

    def test_deterministic_rebuild(self, tmp_path):
        pairs_dir = write_pair_fixture(tmp_path / "pairs", n_pairs=2, size=32, seed=7)
        records = ingest(pairs_dir)
        out_a, out_b = tmp_path / "a", tmp_path / "b"
        build_dataset(records, (0.2, 0.6), InterpolationMethod.RETINEX, out_a)
        build_dataset(records, (0.2, 0.6), InterpolationMethod.RETINEX, out_b)
        files_a = sorted(p.name for p in out_a.iterdir())
        files_b = sorted(p.name for p in out_b.iterdir())
        assert files_a == files_b
        for name in files_a:
            assert (out_a / name).read_bytes() == (out_b / name).read_bytes(), name

    def test_manifest_round_trip_is_byte_identical(self, fixture_dataset):
        dataset_dir = fixture_dataset["dataset_dir"]
        raw = (dataset_dir / "manifest.json").read_bytes()
        manifest = read_manifest(dataset_dir)
        assert manifest_to_bytes(manifest) == raw

    def test_group_and_weights_load_back(self, fixture_dataset):
        dataset_dir = fixture_dataset["dataset_dir"]
        manifest = fixture_dataset["manifest"]
        group = load_group(dataset_dir, manifest, "pair1")
        assert group.strengths == (0.0, 0.2, 0.4, 0.6, 0.8, 1.0)
        maps = load_weight_maps(dataset_dir, manifest, "pair1")
        assert sorted(maps) == [0.2, 0.4, 0.6, 0.8, 1.0]
        for w in maps.values():
            assert w.data.min() >= manifest.mask.w_min - 1e-6
            assert w.data.max() <= 1.0 + 1e-6

    def test_unknown_pair_raises(self, fixture_dataset):
        with pytest.raises(DataError):
            fixture_dataset["manifest"].record("missing")


class TestRefreshWeightMaps:
    def test_new_params_take_effect(self, tmp_path):
        pairs_dir = write_pair_fixture(tmp_path / "pairs", n_pairs=1, size=32, seed=9)
        out = tmp_path / "built"
        build_dataset(ingest(pairs_dir), (0.4,), InterpolationMethod.RETINEX, out)
        params = MaskParams(d=1.0, alpha=0.5, w_min=0.5, dilate_radius=1)
        manifest = refresh_weight_maps(out, params)
        assert manifest.mask == params
        maps = load_weight_maps(out, manifest, "pair0")
        for w in maps.values():
            assert w.data.min() >= 0.5 - 1e-6
        reread = read_manifest(out)
        assert reread.mask == params


class TestWeightMapsForGroup:
    def test_matches_per_pair_operation(self, rng):
        from clfm.retinex import build_group
        from clfm.weights import weight_map_for_pair

        i0, i1 = square_shift_pair(32, shift=6, square=12)
        group = build_group(i0, i1, (0.4,))
        maps = weight_maps_for_group(i0, group)
        solo = weight_map_for_pair(i0, group.image_at(0.4))
        assert np.array_equal(maps[0.4].data, solo.data)
        assert sorted(maps) == [0.4, 1.0]
