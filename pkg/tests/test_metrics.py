import numpy as np
import pytest

from oneshotseg.metrics import (
    SequenceScore,
    comparison_csv,
    comparison_report,
    iou,
    j_mean_sequence,
    scores_csv,
)


def sq(name, j):
    return SequenceScore(name, (j,), j)


class TestIou:
    def test_identity(self):
        m = np.zeros((4, 4), dtype=int)
        m[1:3, 1:3] = 1
        assert iou(m, m) == 1.0

    def test_disjoint(self):
        a = np.zeros((4, 4), dtype=int)
        b = np.zeros((4, 4), dtype=int)
        a[0, 0] = 1
        b[3, 3] = 1
        assert iou(a, b) == 0.0

    def test_one_of_three(self):
        # |pred| = 2, |truth| = 2, overlap 1: 1 / (2 + 2 - 1) = 1/3.
        a = np.zeros((3, 3), dtype=int)
        b = np.zeros((3, 3), dtype=int)
        a[0, 0] = a[0, 1] = 1
        b[0, 1] = b[0, 2] = 1
        assert iou(a, b) == 1.0 / 3.0

    def test_both_empty_defaults_to_one(self):
        z = np.zeros((3, 3), dtype=int)
        assert iou(z, z) == 1.0
        assert iou(z, z, empty_value=0.0) == 0.0

    def test_one_empty(self):
        z = np.zeros((3, 3), dtype=int)
        a = z.copy()
        a[1, 1] = 1
        assert iou(a, z) == 0.0
        assert iou(z, a) == 0.0

    def test_symmetry(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            a = (rng.random((5, 5)) < 0.5).astype(int)
            b = (rng.random((5, 5)) < 0.5).astype(int)
            assert iou(a, b) == iou(b, a)

    def test_bounds(self):
        rng = np.random.default_rng(1)
        for _ in range(20):
            a = (rng.random((5, 5)) < 0.5).astype(int)
            b = (rng.random((5, 5)) < 0.5).astype(int)
            assert 0.0 <= iou(a, b) <= 1.0

    def test_correct_pixel_never_decreases(self):
        rng = np.random.default_rng(2)
        truth = (rng.random((6, 6)) < 0.5).astype(int)
        pred = truth.copy()
        pred[truth == 1] = 0
        pred[0, :] = truth[0, :]
        base = iou(pred, truth)
        missing = np.argwhere((truth == 1) & (pred == 0))
        for r, c in missing[:5]:
            better = pred.copy()
            better[r, c] = 1
            assert iou(better, truth) >= base

    def test_wrong_pixel_never_increases(self):
        rng = np.random.default_rng(3)
        truth = (rng.random((6, 6)) < 0.5).astype(int)
        pred = truth.copy()
        base = iou(pred, truth)
        for r, c in np.argwhere(truth == 0)[:5]:
            worse = pred.copy()
            worse[r, c] = 1
            assert iou(worse, truth) <= base

    def test_dimension_mismatch_rejected(self):
        with pytest.raises(ValueError, match="differ"):
            iou(np.zeros((2, 2), dtype=int), np.zeros((3, 3), dtype=int))


class TestJMean:
    def make(self, ious_wanted):
        # Build (pred, truth) pairs hitting requested IoUs: 1.0 via identity,
        # 0.0 via disjoint, 1/3 via the 2-2-overlap-1 case.
        preds, truths = [], []
        for v in ious_wanted:
            t = np.zeros((3, 3), dtype=int)
            t[0, 1] = t[0, 2] = 1
            p = np.zeros((3, 3), dtype=int)
            if v == 1.0:
                p = t.copy()
            elif v == 0.0:
                p[2, 0] = 1
            else:
                p[0, 0] = p[0, 1] = 1
            preds.append(p)
            truths.append(t)
        return preds, truths

    def test_all_perfect(self):
        preds, truths = self.make([1.0, 1.0, 1.0])
        score = j_mean_sequence(preds, truths, skip_first=True, name="s")
        assert score.j_mean == 1.0
        assert score.per_frame_iou == (1.0, 1.0)

    def test_mean_without_skip(self):
        preds, truths = self.make([1.0, 0.0])
        score = j_mean_sequence(preds, truths, skip_first=False)
        assert score.j_mean == 0.5

    def test_skip_first_oracle(self):
        # frames 1, 2 have IoUs 1/3 and 1.0: mean 2/3.
        preds, truths = self.make([0.0, 1 / 3, 1.0])
        score = j_mean_sequence(preds, truths, skip_first=True)
        assert abs(score.j_mean - 2.0 / 3.0) < 1e-12

    def test_j_mean_equals_mean_of_per_frame(self):
        rng = np.random.default_rng(4)
        preds = [(rng.random((4, 4)) < 0.5).astype(int) for _ in range(6)]
        truths = [(rng.random((4, 4)) < 0.5).astype(int) for _ in range(6)]
        score = j_mean_sequence(preds, truths, skip_first=True)
        assert abs(score.j_mean - np.mean(score.per_frame_iou)) < 1e-12
        assert len(score.per_frame_iou) == 5

    def test_empty_evaluated_set_rejected(self):
        preds, truths = self.make([1.0])
        with pytest.raises(ValueError, match="no frames"):
            j_mean_sequence(preds, truths, skip_first=True)

    def test_length_mismatch_rejected(self):
        preds, truths = self.make([1.0, 1.0])
        with pytest.raises(ValueError, match="predictions"):
            j_mean_sequence(preds, truths[:1])


class TestComparisonReport:
    def test_self_comparison_zero_wins(self):
        scores = [sq("a", 0.5), sq("b", 0.75)]
        text = comparison_report(scores, scores)
        last = text.strip().splitlines()[-1]
        assert last.split() == ["wins", "0", "0"]

    def test_table_one_values_verbatim(self):
        a = [sq("seq", 0.750)]
        b = [sq("seq", 0.762)]
        text = comparison_report(a, b, labels=("base", "tuned"))
        assert "75.0" in text
        assert "76.2" in text
        last = text.strip().splitlines()[-1]
        assert last.split() == ["wins", "0", "1"]

    def test_win_counts_8_12(self):
        a, b = [], []
        for i in range(20):
            va, vb = (0.8, 0.6) if i < 8 else (0.6, 0.8)
            a.append(sq(f"s{i:02d}", va))
            b.append(sq(f"s{i:02d}", vb))
        text = comparison_report(a, b)
        last = text.strip().splitlines()[-1]
        assert last.split() == ["wins", "8", "12"]

    def test_tie_counts_for_neither(self):
        a = [sq("x", 0.5), sq("y", 0.7)]
        b = [sq("x", 0.5), sq("y", 0.6)]
        last = comparison_report(a, b).strip().splitlines()[-1]
        assert last.split() == ["wins", "1", "0"]

    def test_mean_row(self):
        a = [sq("x", 0.5), sq("y", 0.7)]
        b = [sq("x", 0.9), sq("y", 0.7)]
        lines = comparison_report(a, b).strip().splitlines()
        mean_line = [ln for ln in lines if ln.startswith("mean")][0]
        assert mean_line.split() == ["mean", "60.0", "80.0"]

    def test_mismatched_sets_rejected(self):
        with pytest.raises(ValueError, match="differ"):
            comparison_report([sq("a", 0.5)], [sq("b", 0.5)])

    def test_deterministic(self):
        a = [sq("a", 0.41), sq("b", 0.52)]
        b = [sq("a", 0.43), sq("b", 0.50)]
        assert comparison_report(a, b) == comparison_report(a, b)


class TestCsv:
    def test_comparison_header_literal(self):
        a = [sq("s0", 0.75)]
        b = [sq("s0", 0.762)]
        text = comparison_csv(a, b)
        lines = text.strip().splitlines()
        assert lines[0] == "sequence,method_a,method_b"
        assert lines[1] == "s0,0.750000,0.762000"

    def test_scores_csv_header(self):
        text = scores_csv([sq("v", 2 / 3)])
        lines = text.strip().splitlines()
        assert lines[0] == "sequence,j_mean"
        assert lines[1] == "v,0.666667"
