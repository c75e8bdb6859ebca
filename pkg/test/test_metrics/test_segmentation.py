import math

import numpy as np
import pytest

from mman.data.labels import low_res_target, to_index, to_one_hot
from mman.metrics.segmentation import (
    MetricsReport, confusion_matrix, evaluate_dataset, iou, ipr, isolated_mask, low_res_miou, pixel_accuracy,
)
from test.test_metrics.metrics_fixtures import (
    ORACLE_CASES, brute_isolated_count, brute_majority, brute_miou, random_pair,
)


class TestAgainstBruteForce:
    rng = np.random.default_rng(2024)

    def test_miou(self):
        for _ in range(ORACLE_CASES):
            pred, gt, num_classes = random_pair(self.rng)
            assert iou(pred, gt, num_classes).miou == pytest.approx(brute_miou(pred, gt, num_classes), abs=1e-12)

    @pytest.mark.parametrize("connectivity", [4, 8])
    def test_ipr(self, connectivity):
        for _ in range(ORACLE_CASES):
            label, _, _ = random_pair(self.rng)
            expected = 100.0 * brute_isolated_count(label, connectivity) / label.size
            assert ipr(label, connectivity) == pytest.approx(expected, abs=1e-12)

    def test_low_res_miou(self):
        for _ in range(ORACLE_CASES):
            side = 4 * int(self.rng.integers(1, 5))
            num_classes = int(self.rng.integers(2, 6))
            pred = self.rng.integers(0, num_classes, size=(side, side))
            gt = self.rng.integers(0, num_classes, size=(side, side))
            pred_low = to_index(low_res_target(to_one_hot(pred, num_classes), 4))
            gt_low = to_index(low_res_target(to_one_hot(gt, num_classes), 4))
            np.testing.assert_array_equal(pred_low, brute_majority(pred, 4))
            expected = brute_miou(brute_majority(pred, 4), brute_majority(gt, 4), num_classes)
            assert low_res_miou(pred_low, gt_low, num_classes) == pytest.approx(expected, abs=1e-12)


class TestIoU:
    def test_perfect_prediction(self):
        label = np.array([[0, 1], [2, 2]])
        result = iou(label, label, 3)
        assert result.miou == 1.0
        np.testing.assert_array_equal(result.per_class, [1.0, 1.0, 1.0])

    def test_absent_classes_are_left_out(self):
        pred = np.array([[0, 0], [1, 1]])
        gt = np.array([[0, 1], [1, 1]])
        result = iou(pred, gt, 4)
        assert np.isnan(result.per_class[2]) and np.isnan(result.per_class[3])
        assert result.miou == pytest.approx((1 / 2 + 2 / 3) / 2)
        assert iou(pred, gt, 4, absent_as_one=True).miou == pytest.approx((1 / 2 + 2 / 3 + 2) / 4)

    def test_one_dimensional_strip(self):
        pred = np.array([[0, 1, 1, 1, 0, 0]])
        gt = np.array([[0, 0, 1, 1, 1, 0]])
        assert iou(pred, gt, 2).per_class[1] == pytest.approx(0.5)

    def test_disjoint_masks(self):
        assert iou(np.array([[1, 0]]), np.array([[0, 1]]), 2).per_class[1] == 0.0

    def test_default_class_count(self):
        assert len(iou(np.array([[0, 3]]), np.array([[0, 1]])).per_class) == 4

    def test_confusion_matrix_rows_are_ground_truth(self):
        confusion = confusion_matrix(np.array([[1, 1]]), np.array([[0, 1]]), 2)
        np.testing.assert_array_equal(confusion, [[0, 1], [0, 1]])

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            iou(np.zeros((2, 2), dtype=int), np.zeros((2, 3), dtype=int))

    def test_out_of_range_class(self):
        with pytest.raises(ValueError):
            confusion_matrix(np.array([[5]]), np.array([[0]]), 2)

    def test_pixel_accuracy(self):
        assert pixel_accuracy(np.array([[0, 1], [1, 1]]), np.array([[0, 1], [0, 0]])) == 0.5


class TestIsolatedPixels:
    def test_single_pixel_map_is_isolated(self):
        assert ipr(np.array([[3]])) == 100.0

    def test_uniform_map(self):
        assert ipr(np.zeros((8, 8), dtype=int)) == 0.0

    def test_checkerboard(self):
        board = np.indices((6, 6)).sum(axis=0) % 2
        assert ipr(board, 4) == 100.0
        assert ipr(board, 8) == 0.0

    def test_eight_neighbours_never_isolate_more(self):
        rng = np.random.default_rng(11)
        for _ in range(200):
            label, _, _ = random_pair(rng)
            assert ipr(label, 8) <= ipr(label, 4)

    def test_lone_centre_of_a_3x3_map(self):
        label = np.zeros((3, 3), dtype=int)
        label[1, 1] = 1
        assert ipr(label) == pytest.approx(100.0 / 9)

    def test_lone_pixel(self):
        label = np.zeros((5, 5), dtype=int)
        label[2, 2] = 1
        mask = isolated_mask(label)
        assert mask.sum() == 1 and mask[2, 2]
        assert ipr(label) == pytest.approx(4.0)

    def test_invalid_connectivity(self):
        with pytest.raises(ValueError):
            ipr(np.zeros((2, 2), dtype=int), 6)

    def test_empty_map(self):
        with pytest.raises(ValueError):
            ipr(np.zeros((0, 3), dtype=int))


class TestMetricsReport:
    @staticmethod
    def _report() -> MetricsReport:
        rng = np.random.default_rng(5)
        maps = [rng.integers(0, 3, size=(8, 8)) for _ in range(4)]
        lows = [rng.integers(0, 3, size=(2, 2)) for _ in range(4)]
        return evaluate_dataset(
            [(maps[0], lows[0]), (maps[1], lows[1])], [(maps[2], lows[2]), (maps[3], lows[3])], 4,
        )

    def test_dataset_metrics_pool_the_confusion(self):
        rng = np.random.default_rng(5)
        maps = [rng.integers(0, 3, size=(8, 8)) for _ in range(4)]
        report = self._report()
        pooled_pred = np.concatenate([maps[0], maps[1]])
        pooled_gt = np.concatenate([maps[2], maps[3]])
        assert report.miou == pytest.approx(iou(pooled_pred, pooled_gt, 4).miou)
        assert report.pixel_accuracy == pytest.approx(pixel_accuracy(pooled_pred, pooled_gt))
        expected_ipr = 100.0 * (isolated_mask(maps[0]).sum() + isolated_mask(maps[1]).sum()) / 128
        assert report.ipr == pytest.approx(expected_ipr)
        assert math.isnan(report.per_class_iou[3])

    def test_csv_round_trip(self, tmp_path):
        report = self._report()
        restored = MetricsReport.from_csv(report.to_csv(tmp_path / "report.csv"))
        assert restored.class_names == report.class_names
        assert restored.miou == pytest.approx(report.miou)
        assert restored.ipr == pytest.approx(report.ipr)
        np.testing.assert_allclose(restored.per_class_iou, report.per_class_iou)

    def test_frame_and_table(self):
        report = self._report()
        frame = report.to_frame()
        assert frame.index.names == ["metric"]
        assert "iou.class_0" in frame.index and "miou" in frame.index
        assert not frame.loc["iou.class_3", "present"]
        assert "absent" in report.to_table()

    def test_empty_dataset(self):
        with pytest.raises(ValueError):
            evaluate_dataset([], [], 3)
