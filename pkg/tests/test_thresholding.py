import numpy as np
import pytest

from accell.errors import DegenerateImage, InvalidAlpha
from accell.imaging import binarize
from accell.thresholding import adjusted_cutoff, isodata_threshold, mean_intensity


def intermeans_map(img, t):
    """Reference map: midpoint of the class means at threshold t."""
    v = img.astype(np.float64).ravel()
    return (v[v <= t].mean() + v[v > t].mean()) / 2.0


class TestMeanIntensity:
    def test_constant_image(self):
        assert mean_intensity(np.full((4, 4), 42, dtype=np.uint8)) == 42.0

    def test_symmetric_pair(self):
        assert mean_intensity(np.array([[0, 255]], dtype=np.uint8)) == 127.5

    def test_direct_arithmetic(self):
        img = np.array([[10, 12, 14, 200, 210]], dtype=np.uint8)
        assert mean_intensity(img) == pytest.approx(89.2)


class TestIsodata:
    def test_symmetric_two_class(self):
        img = np.array([[0, 0, 255, 255]], dtype=np.uint8)
        res = isodata_threshold(img)
        assert res.converged
        assert res.threshold == 127.5
        assert res.iterations >= 1

    def test_hand_traced_fixed_point(self):
        # From the mean 89.2 the class means are 12 and 205, so the first
        # update lands on 108.5 and the partition no longer changes.
        img = np.array([[10, 12, 14, 200, 210]], dtype=np.uint8)
        res = isodata_threshold(img)
        assert res.converged
        assert res.threshold == pytest.approx(108.5)

    def test_constant_image_raises(self):
        with pytest.raises(DegenerateImage):
            isodata_threshold(np.full((5, 5), 100, dtype=np.uint8))

    def test_fixed_point_property_random(self):
        rng = np.random.default_rng(11)
        for _ in range(300):
            h, w = rng.integers(1, 65), rng.integers(1, 65)
            img = rng.integers(0, 256, size=(h, w), dtype=np.uint8)
            if np.all(img == img.flat[0]):
                continue
            res = isodata_threshold(img)
            assert res.converged
            assert abs(res.threshold - intermeans_map(img, res.threshold)) <= 0.5

    def test_permutation_invariance(self):
        rng = np.random.default_rng(5)
        img = rng.integers(0, 256, size=(8, 8), dtype=np.uint8)
        shuffled = rng.permutation(img.ravel()).reshape(4, 16)
        assert isodata_threshold(img).threshold == isodata_threshold(shuffled).threshold


class TestAdjustedCutoff:
    def test_scales_base_threshold(self):
        img = np.array([[0, 0, 255, 255]], dtype=np.uint8)
        assert adjusted_cutoff(img, 0.9) == pytest.approx(0.9 * 127.5)

    def test_alpha_one_is_identity(self):
        rng = np.random.default_rng(2)
        img = rng.integers(0, 256, size=(10, 10), dtype=np.uint8)
        assert adjusted_cutoff(img, 1.0) == isodata_threshold(img).threshold

    @pytest.mark.parametrize("alpha", [0.0, -0.5, 1.0001, 2.0])
    def test_alpha_out_of_range(self, alpha):
        img = np.array([[0, 255]], dtype=np.uint8)
        with pytest.raises(InvalidAlpha):
            adjusted_cutoff(img, alpha)

    def test_mask_growth_is_monotone_in_alpha(self):
        # Lowering the scale never removes object pixels.
        rng = np.random.default_rng(9)
        for _ in range(100):
            img = rng.integers(0, 256, size=(12, 12), dtype=np.uint8)
            if np.all(img == img.flat[0]):
                continue
            a1 = float(rng.uniform(0.1, 0.99))
            a2 = float(rng.uniform(a1, 1.0))
            high = binarize(img, adjusted_cutoff(img, a2))
            low = binarize(img, adjusted_cutoff(img, a1))
            assert not np.any(high & ~low)
