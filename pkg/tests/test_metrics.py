import numpy as np
import pytest

from collabtrack.errors import FormatError
from collabtrack.metrics import Box, center_error, evaluate, load_boxes, overlap, write_report


class TestBox:
    def test_rejects_empty_box(self):
        with pytest.raises(ValueError):
            Box(0, 0, 0, 5)

    def test_center(self):
        assert Box(10, 20, 4, 6).center == (12.0, 23.0)


class TestCenterError:
    def test_identical_boxes(self):
        b = Box(3, 4, 10, 10)
        assert center_error(b, b) == 0.0

    def test_three_four_five(self):
        a = Box(-5, -5, 10, 10)  # center (0, 0)
        b = Box(-2, -1, 10, 10)  # center (3, 4)
        assert center_error(a, b) == pytest.approx(5.0)

    def test_symmetric(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            a = Box(*rng.uniform(1, 50, 2), *rng.uniform(1, 30, 2))
            b = Box(*rng.uniform(1, 50, 2), *rng.uniform(1, 30, 2))
            assert center_error(a, b) == center_error(b, a)


class TestOverlap:
    def test_identical(self):
        b = Box(5, 5, 20, 10)
        assert overlap(b, b) == 1.0

    def test_disjoint(self):
        assert overlap(Box(0, 0, 10, 10), Box(50, 50, 10, 10)) == 0.0

    def test_half_shift_is_one_third(self):
        assert overlap(Box(0, 0, 10, 10), Box(5, 0, 10, 10)) == pytest.approx(1 / 3)

    def test_symmetric_and_bounded(self):
        rng = np.random.default_rng(1)
        for _ in range(50):
            a = Box(*rng.uniform(0, 40, 2), *rng.uniform(1, 30, 2))
            b = Box(*rng.uniform(0, 40, 2), *rng.uniform(1, 30, 2))
            v = overlap(a, b)
            assert 0.0 <= v <= 1.0
            assert v == overlap(b, a)

    def test_monotone_decay_when_translating_away(self):
        base = Box(0, 0, 16, 16)
        values = [overlap(base, Box(dx, 0, 16, 16)) for dx in range(0, 20)]
        assert all(a >= b for a, b in zip(values, values[1:]))
        assert values[-1] == 0.0


class TestEvaluate:
    def test_perfect_trajectory(self):
        boxes = [Box(i, i, 10, 10) for i in range(5)]
        report = evaluate(boxes, boxes)
        assert report.mean_overlap == 1.0
        assert report.mean_center_error == 0.0
        assert report.frame_count == 5

    def test_mean_of_mixed_overlaps(self):
        truth = [Box(0, 0, 10, 10), Box(0, 0, 10, 10)]
        trajectory = [Box(0, 0, 10, 10), Box(100, 100, 10, 10)]
        report = evaluate(trajectory, truth)
        assert report.mean_overlap == pytest.approx(0.5)

    def test_row_count(self):
        boxes = [Box(i, 0, 5, 5) for i in range(7)]
        report = evaluate(boxes, boxes)
        assert len(report.center_errors) == 7
        assert len(report.overlaps) == 7

    def test_means_match_brute_force(self):
        rng = np.random.default_rng(2)
        traj = [Box(*rng.uniform(0, 30, 2), *rng.uniform(5, 20, 2)) for _ in range(25)]
        truth = [Box(*rng.uniform(0, 30, 2), *rng.uniform(5, 20, 2)) for _ in range(25)]
        report = evaluate(traj, truth)
        assert report.mean_overlap == pytest.approx(
            sum(overlap(a, b) for a, b in zip(traj, truth)) / 25
        )
        assert report.mean_center_error == pytest.approx(
            sum(center_error(a, b) for a, b in zip(traj, truth)) / 25
        )

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            evaluate([Box(0, 0, 1, 1)], [])


class TestReportFile:
    def test_rows_plus_average(self, tmp_path):
        boxes = [Box(i, i, 10, 10) for i in range(3)]
        report = evaluate(boxes, boxes)
        path = tmp_path / "report.csv"
        write_report(report, path)
        lines = path.read_text().splitlines()
        assert lines[0] == "frame,center_error,overlap"
        assert len(lines) == 5
        assert lines[-1] == "average,0.000000,1.000000"


class TestLoadBoxes:
    def test_reads_boxes(self, tmp_path):
        p = tmp_path / "gt.txt"
        p.write_text("1,2,3,4\n5.5,6.5,7.5,8.5\n")
        boxes = load_boxes(p)
        assert boxes[0] == Box(1, 2, 3, 4)
        assert boxes[1] == Box(5.5, 6.5, 7.5, 8.5)

    def test_malformed_line_cites_number(self, tmp_path):
        p = tmp_path / "gt.txt"
        p.write_text("1,2,3,4\n" * 6 + "1,2,3\n")
        with pytest.raises(FormatError, match="line 7"):
            load_boxes(p)

    def test_non_numeric_cites_number(self, tmp_path):
        p = tmp_path / "gt.txt"
        p.write_text("1,2,3,4\nx,2,3,4\n")
        with pytest.raises(FormatError, match="line 2"):
            load_boxes(p)

    def test_empty_file_rejected(self, tmp_path):
        p = tmp_path / "gt.txt"
        p.write_text("")
        with pytest.raises(FormatError):
            load_boxes(p)
