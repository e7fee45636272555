import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from uvseg import geodata
from uvseg.errors import InvalidInputError

from oracles import flood_fill_components


def checkerboard_scene(h, w, seed=0):
    rng = np.random.default_rng(seed)
    return rng.integers(0, 256, size=(h, w, 3), dtype=np.uint8)


class TestTileScene:
    def test_exact_division(self):
        tiles = geodata.tile_scene(checkerboard_scene(2048, 2048), 1024)
        assert len(tiles) == 4

    def test_identity_single_tile(self):
        scene = checkerboard_scene(1024, 1024)
        tiles = geodata.tile_scene(scene, 1024)
        assert len(tiles) == 1
        np.testing.assert_array_equal(tiles[0].pixels, scene)

    def test_padded_grid(self):
        scene = checkerboard_scene(2560, 2560)
        tiles = geodata.tile_scene(scene, 1024, pad_value=0)
        assert len(tiles) == 9  # ceil(2560/1024) = 3 per axis
        right = tiles[2].pixels  # top-right tile: columns 2048..3072
        assert (right[:, 512:] == 0).all()
        np.testing.assert_array_equal(right[:, :512], scene[:1024, 2048:])

    def test_row_major_order(self):
        scene = checkerboard_scene(20, 20)
        tiles = geodata.tile_scene(scene, 10, id_prefix="s")
        assert [t.tile_id for t in tiles] == [
            "s_r000_c000", "s_r000_c001", "s_r001_c000", "s_r001_c001",
        ]

    def test_empty_scene_rejected(self):
        with pytest.raises(InvalidInputError):
            geodata.tile_scene(np.empty((0, 0, 3), dtype=np.uint8), 8)

    def test_origin_propagates(self):
        scene = checkerboard_scene(20, 20)
        tiles = geodata.tile_scene(
            scene, 10, resolution_m_per_px=2.0, origin=(116.0, 40.0)
        )
        assert tiles[0].origin == (116.0, 40.0)
        lon, lat = tiles[1].origin  # one tile east
        assert lat == 40.0
        assert lon > 116.0


class TestMergeTiles:
    def test_roundtrip_exact(self):
        scene = checkerboard_scene(2048, 2048)
        merged = geodata.merge_tiles(geodata.tile_scene(scene, 1024), (2, 2))
        np.testing.assert_array_equal(merged, scene)

    def test_single_tile_identity(self):
        scene = checkerboard_scene(64, 64)
        merged = geodata.merge_tiles(geodata.tile_scene(scene, 64), (1, 1))
        np.testing.assert_array_equal(merged, scene)

    def test_roundtrip_with_crop(self):
        scene = checkerboard_scene(2560, 2560)
        merged = geodata.merge_tiles(geodata.tile_scene(scene, 1024), (3, 3))
        assert merged.shape == (3072, 3072, 3)
        np.testing.assert_array_equal(merged[:2560, :2560], scene)

    def test_count_mismatch(self):
        tiles = geodata.tile_scene(checkerboard_scene(64, 64), 32)
        with pytest.raises(InvalidInputError):
            geodata.merge_tiles(tiles, (3, 3))

    @settings(max_examples=25, deadline=None)
    @given(
        h=st.integers(1, 90), w=st.integers(1, 90),
        ts=st.integers(1, 40), seed=st.integers(0, 1000),
    )
    def test_roundtrip_property(self, h, w, ts, seed):
        scene = checkerboard_scene(h, w, seed)
        tiles = geodata.tile_scene(scene, ts)
        rows = -(-h // ts)
        cols = -(-w // ts)
        merged = geodata.merge_tiles(tiles, (rows, cols))
        np.testing.assert_array_equal(merged[:h, :w], scene)


def make_manifest(n):
    entries = [
        geodata.ManifestEntry(
            tile=f"tiles/{i}.png", mask=None, tile_id=f"t{i}", city="x", year=2016
        )
        for i in range(n)
    ]
    return geodata.DatasetManifest(entries)


class TestSplitDataset:
    def test_exact_proportion(self):
        train, val, test = geodata.split_dataset(make_manifest(10), (0.6, 0.2, 0.2), 0)
        assert (len(train), len(val), len(test)) == (6, 2, 2)

    def test_remainder_to_train(self):
        # 2491 tiles at 6:2:2 -> floor gives 498/498, train takes the rest
        train, val, test = geodata.split_dataset(
            make_manifest(2491), (0.6, 0.2, 0.2), 7
        )
        assert (len(train), len(val), len(test)) == (1495, 498, 498)

    def test_deterministic(self):
        m = make_manifest(37)
        a = geodata.split_dataset(m, (0.6, 0.2, 0.2), 42)
        b = geodata.split_dataset(m, (0.6, 0.2, 0.2), 42)
        for ma, mb in zip(a, b):
            assert [e.tile_id for e in ma.entries] == [e.tile_id for e in mb.entries]

    def test_bad_ratios(self):
        with pytest.raises(InvalidInputError):
            geodata.split_dataset(make_manifest(5), (0.5, 0.2, 0.2), 0)

    def test_empty_manifest(self):
        with pytest.raises(InvalidInputError):
            geodata.split_dataset(geodata.DatasetManifest([]), (0.6, 0.2, 0.2), 0)

    @settings(max_examples=30, deadline=None)
    @given(n=st.integers(1, 1000), seed=st.integers(0, 10_000))
    def test_partition_property(self, n, seed):
        m = make_manifest(n)
        parts = geodata.split_dataset(m, (0.6, 0.2, 0.2), seed)
        ids = [e.tile_id for part in parts for e in part.entries]
        assert len(ids) == n
        assert set(ids) == {e.tile_id for e in m.entries}


class TestSyntheticTiles:
    def test_zero_regions(self):
        _, label = geodata.gen_synthetic_tile(geodata.SynthParams(0, 0.5, 3, size=64))
        assert not label.mask.any()

    @pytest.mark.parametrize("count", [1, 2, 5])
    def test_component_count_matches_oracle(self, count):
        params = geodata.SynthParams(count, 0.6, seed=7, size=96)
        _, label = geodata.gen_synthetic_tile(params)
        _, found = flood_fill_components(label.mask, connectivity=8)
        assert found == count

    def test_deterministic(self):
        params = geodata.SynthParams(3, 0.4, seed=11, size=64)
        t1, m1 = geodata.gen_synthetic_tile(params)
        t2, m2 = geodata.gen_synthetic_tile(params)
        np.testing.assert_array_equal(t1.pixels, t2.pixels)
        np.testing.assert_array_equal(m1.mask, m2.mask)

    def test_mask_binary_and_aligned(self):
        tile, label = geodata.gen_synthetic_tile(geodata.SynthParams(4, 0.7, 5, size=128))
        assert label.mask.shape == tile.pixels.shape[:2]
        assert set(np.unique(label.mask)) <= {0, 1}


class TestFileFormats:
    def test_tile_png_roundtrip(self, tmp_path):
        tile, label = geodata.gen_synthetic_tile(geodata.SynthParams(2, 0.5, 9, size=64))
        tp, mp = tmp_path / "t.png", tmp_path / "m.png"
        geodata.save_tile(tile, tp)
        geodata.save_mask(label, mp)
        np.testing.assert_array_equal(geodata.load_tile(tp).pixels, tile.pixels)
        np.testing.assert_array_equal(geodata.load_mask(mp).mask, label.mask)

    def test_manifest_roundtrip(self, tmp_path):
        entries = [
            geodata.ManifestEntry(
                "a.png", "a_mask.png", "a", "beijing", 2016,
                origin=(116.4, 39.9), resolution_m_per_px=1.05,
            ),
            geodata.ManifestEntry("b.png", None, "b", "xian", 2018),
        ]
        path = tmp_path / "manifest.jsonl"
        geodata.write_manifest(geodata.DatasetManifest(entries), path)
        loaded = geodata.read_manifest(path)
        assert loaded.split == "unsplit"
        assert loaded.entries[0].origin == (116.4, 39.9)
        assert loaded.entries[1].mask is None
        assert [e.tile_id for e in loaded.entries] == ["a", "b"]

    def test_duplicate_tile_ids_rejected(self):
        entries = [
            geodata.ManifestEntry("a.png", None, "same"),
            geodata.ManifestEntry("b.png", None, "same"),
        ]
        with pytest.raises(InvalidInputError):
            geodata.DatasetManifest(entries)

    def test_scene_meta_roundtrip(self, tmp_path):
        p = tmp_path / "scene.json"
        geodata.write_scene_meta(p, 1.05, (116.4, 39.9))
        res, origin = geodata.read_scene_meta(p)
        assert res == 1.05
        assert origin == (116.4, 39.9)
