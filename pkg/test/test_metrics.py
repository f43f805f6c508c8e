import numpy as np
import pytest

from src.evaluation.metrics import FrameScore, Report, aggregate, boundary_f, boundary_map, combine_j_and_f, disc, \
    jaccard, score_frame, tolerance_radius
from src.exceptions import DataIntegrityError, DimensionError, NumericError


def mask_from(pixels, shape=(3, 3)):
    mask = np.zeros(shape, dtype=np.uint8)
    for pixel in pixels:
        mask[pixel] = 1
    return mask


def square(top, left, size=10, shape=(64, 64)):
    mask = np.zeros(shape, dtype=np.uint8)
    mask[top:top + size, left:left + size] = 1
    return mask


class TestJaccard:
    def test_identical(self, rng):
        mask = (rng.random((8, 8)) < 0.4).astype(np.uint8)
        assert jaccard(mask, mask) == 1.0

    def test_disjoint(self):
        assert jaccard(mask_from([(0, 0)]), mask_from([(2, 2)])) == 0.0

    def test_partial_overlap(self):
        pred = mask_from([(0, 0), (0, 1)])
        gt = mask_from([(0, 1), (0, 2)])
        assert jaccard(pred, gt) == pytest.approx(1 / 3)

    def test_both_empty(self):
        assert jaccard(np.zeros((4, 4)), np.zeros((4, 4))) == 1.0

    def test_symmetric(self, rng):
        for _ in range(20):
            a = rng.random((6, 6)) < 0.5
            b = rng.random((6, 6)) < 0.5
            assert jaccard(a, b) == jaccard(b, a)

    def test_removing_a_false_positive_never_hurts(self, rng):
        gt = (rng.random((8, 8)) < 0.4).astype(np.uint8)
        pred = gt.copy()
        false_positives = np.argwhere(gt == 0)
        for y, x in false_positives[:5]:
            pred[y, x] = 1
        for y, x in false_positives[:5]:
            before = jaccard(pred, gt)
            pred[y, x] = 0
            assert jaccard(pred, gt) >= before

    def test_size_mismatch(self):
        with pytest.raises(DimensionError):
            jaccard(np.zeros((3, 3)), np.zeros((3, 4)))


class TestBoundary:
    def test_boundary_of_a_square_is_its_outline(self):
        mask = np.zeros((6, 6), dtype=np.uint8)
        mask[1:5, 1:5] = 1
        expected = mask.copy()
        expected[2:4, 2:4] = 0
        np.testing.assert_array_equal(boundary_map(mask), expected.astype(bool))

    def test_image_edge_counts_as_background(self):
        assert boundary_map(np.ones((3, 3))).sum() == 8

    def test_tolerance_radius(self):
        assert tolerance_radius(64, 64) == 1
        assert tolerance_radius(480, 640) == 7

    def test_disc(self):
        assert disc(1).sum() == 5
        assert disc(0).shape == (1, 1)


class TestBoundaryF:
    def test_identical(self):
        mask = square(20, 20)
        assert boundary_f(mask, mask) == 1.0

    def test_empty_prediction(self):
        assert boundary_f(np.zeros((64, 64)), square(20, 20)) == 0.0

    def test_both_empty(self):
        assert boundary_f(np.zeros((8, 8)), np.zeros((8, 8))) == 1.0

    def test_one_pixel_shift_is_within_tolerance(self):
        assert boundary_f(square(20, 21), square(20, 20)) == 1.0

    def test_far_apart(self):
        assert boundary_f(square(0, 0), square(40, 40)) == 0.0

    def test_symmetric(self):
        a = square(10, 10)
        b = square(14, 12, size=12)
        assert boundary_f(a, b) == pytest.approx(boundary_f(b, a))


class TestAggregate:
    def test_perfect_frames(self):
        mask = square(5, 5)
        report = aggregate([score_frame(mask, mask) for _ in range(3)])
        assert report.to_dict() == {'J_mean': 100.0, 'J_recall': 100.0, 'F_mean': 100.0, 'F_recall': 100.0,
                                    'JandF': 100.0}

    def test_recall_threshold_is_strict(self):
        report = aggregate([FrameScore(0.6, 1.0), FrameScore(0.4, 0.5)])
        assert report.j_mean == pytest.approx(50.0)
        assert report.j_recall == 50.0
        assert report.f_recall == 50.0

    @pytest.mark.parametrize('j_mean, f_mean, expected', [(63.5, 81.5, 72.5), (68.9, 83.7, 76.3)])
    def test_combined_score(self, j_mean, f_mean, expected):
        assert round(combine_j_and_f(j_mean, f_mean), 1) == expected

    def test_empty(self):
        with pytest.raises(DataIntegrityError):
            aggregate([])

    def test_scores_must_be_fractions(self):
        with pytest.raises(NumericError):
            FrameScore(1.5, 0.0)

    def test_text_report(self):
        report = Report(j_mean=63.46, j_recall=70.0, f_mean=81.5, f_recall=90.0, j_and_f=72.475)
        assert report.to_text() == 'J_mean 63.5\nJ_recall 70.0\nF_mean 81.5\nF_recall 90.0\nJandF 72.5\n'
