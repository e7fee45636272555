import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import uvseg.maskops as maskops
from uvseg.errors import InvalidInputError

from oracles import flood_fill_components


def random_mask(rng, h, w, density):
    return (rng.random((h, w)) < density).astype(np.uint8)


class TestLabelComponents:
    def test_empty_mask(self):
        labels, count = maskops.label_components(np.zeros((8, 8), dtype=np.uint8))
        assert count == 0
        assert not labels.any()

    def test_full_mask_single_component(self):
        labels, count = maskops.label_components(np.ones((8, 8), dtype=np.uint8))
        assert count == 1
        assert (labels == 1).all()

    def test_diagonal_pixels_depend_on_connectivity(self):
        m = np.zeros((4, 4), dtype=np.uint8)
        m[1, 1] = m[2, 2] = 1
        _, count8 = maskops.label_components(m, connectivity=8)
        _, count4 = maskops.label_components(m, connectivity=4)
        assert count8 == 1
        assert count4 == 2

    def test_label_order_is_raster_first_pixel(self):
        m = np.zeros((5, 5), dtype=np.uint8)
        m[3:, :2] = 1  # lower-left block
        m[0, 4] = 1  # early pixel, top-right
        labels, count = maskops.label_components(m)
        assert count == 2
        assert labels[0, 4] == 1
        assert labels[3, 0] == 2

    def test_rejects_nonbinary(self):
        with pytest.raises(InvalidInputError):
            maskops.label_components(np.full((4, 4), 3, dtype=np.int32))

    def test_rejects_bad_connectivity(self):
        with pytest.raises(InvalidInputError):
            maskops.label_components(np.zeros((2, 2), dtype=np.uint8), connectivity=6)

    @pytest.mark.parametrize("connectivity", [4, 8])
    def test_matches_flood_fill_oracle(self, rng, maskops_backend, connectivity):
        fn = maskops.get_backend_fn(maskops_backend)
        for _ in range(60):
            m = random_mask(rng, rng.integers(1, 48), rng.integers(1, 48), rng.uniform(0.1, 0.9))
            labels, count, _, _, _ = fn(m, connectivity)
            ref_labels, ref_count = flood_fill_components(m, connectivity)
            assert count == ref_count
            assert (labels == ref_labels).all()


class TestComponentStats:
    def test_single_rectangle(self):
        m = np.zeros((10, 10), dtype=np.uint8)
        m[2:6, 3:8] = 1
        _, stats = maskops.component_stats(m)
        assert stats.count == 1
        assert stats.areas[0] == 20
        assert tuple(stats.bboxes[0]) == (2, 3, 6, 8)
        np.testing.assert_allclose(stats.centroids[0], [3.5, 5.0])

    def test_stats_match_bruteforce(self, rng, maskops_backend):
        fn = maskops.get_backend_fn(maskops_backend)
        for _ in range(40):
            m = random_mask(rng, 32, 32, 0.4)
            labels, count, areas, bboxes, centroids = fn(m, 8)
            for comp in range(1, count + 1):
                ys, xs = np.nonzero(labels == comp)
                assert areas[comp - 1] == len(ys)
                assert tuple(bboxes[comp - 1]) == (
                    ys.min(), xs.min(), ys.max() + 1, xs.max() + 1,
                )
                np.testing.assert_allclose(
                    centroids[comp - 1], [ys.mean(), xs.mean()], atol=1e-12
                )


@settings(max_examples=80, deadline=None)
@given(
    h=st.integers(1, 40),
    w=st.integers(1, 40),
    density=st.floats(0.05, 0.95),
    seed=st.integers(0, 2**31),
    connectivity=st.sampled_from([4, 8]),
)
def test_backends_bit_identical(h, w, density, seed, connectivity):
    m = random_mask(np.random.default_rng(seed), h, w, density)
    results = []
    for name in maskops.available_backends():
        labels, count, areas, bboxes, centroids = maskops.get_backend_fn(name)(
            m, connectivity
        )
        results.append((labels, count, areas, bboxes, centroids))
    first = results[0]
    for other in results[1:]:
        assert first[1] == other[1]
        assert (first[0] == other[0]).all()
        assert (first[2] == other[2]).all()
        assert (first[3] == other[3]).all()
        np.testing.assert_allclose(first[4], other[4], atol=1e-12)
