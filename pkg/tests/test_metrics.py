"""Metric exactness against brute-force tallies, plus ROC sweep properties."""
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dcganet import metrics as M
from dcganet.errors import ShapeError


def brute_counts(pred, gt):
    tp = fp = fn = tn = 0
    for p, g in zip(pred.ravel().tolist(), gt.ravel().tolist()):
        if p and g:
            tp += 1
        elif p and not g:
            fp += 1
        elif g:
            fn += 1
        else:
            tn += 1
    return tp, fp, fn, tn


class TestConfusion:
    @pytest.mark.parametrize("seed", range(20))
    def test_matches_pixel_tally(self, seed):
        rng = np.random.default_rng(seed)
        pred = (rng.uniform(size=(16, 16)) > 0.5).astype(np.uint8)
        gt = (rng.uniform(size=(16, 16)) > 0.8).astype(np.uint8)
        c = M.confusion(pred, gt)
        assert (c.tp, c.fp, c.fn, c.tn) == brute_counts(pred, gt)
        assert c.total == 256

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            M.confusion(np.zeros((2, 2)), np.zeros((3, 3)))

    def test_nonbinary_rejected(self):
        with pytest.raises(M.UsageError, match="binary"):
            M.confusion(np.full((2, 2), 0.5), np.zeros((2, 2)))

    def test_counts_add(self):
        a = M.ConfusionCounts(1, 2, 3, 4)
        b = M.ConfusionCounts(10, 20, 30, 40)
        s = a + b
        assert (s.tp, s.fp, s.fn, s.tn) == (11, 22, 33, 44)


class TestScalarMetrics:
    def test_hand_case(self):
        c = M.ConfusionCounts(tp=6, fp=2, fn=2, tn=90)
        assert M.iou(c) == pytest.approx(0.6)
        assert M.pd(c) == pytest.approx(0.75)
        assert M.fa(c, c.total) == pytest.approx(0.02)

    def test_perfect_and_empty(self):
        assert M.iou(M.ConfusionCounts(5, 0, 0, 5)) == 1.0
        assert M.iou(M.ConfusionCounts(0, 0, 0, 10)) == 1.0  # both empty
        assert np.isnan(M.pd(M.ConfusionCounts(0, 0, 0, 10)))
        assert M.fa(M.ConfusionCounts(0, 0, 0, 10), 10) == 0.0

    def test_niou_skips_targetless_images(self):
        per_img = [M.ConfusionCounts(2, 0, 2, 0),   # iou 0.5
                   M.ConfusionCounts(0, 3, 0, 7),   # no gt positives: skipped
                   M.ConfusionCounts(3, 1, 0, 6)]   # iou 0.75
        assert M.niou(per_img) == pytest.approx(0.625)
        assert np.isnan(M.niou([M.ConfusionCounts(0, 1, 0, 3)]))

    @pytest.mark.parametrize("seed", range(50))
    def test_matches_bruteforce_on_random_masks(self, seed):
        rng = np.random.default_rng(1000 + seed)
        pred = (rng.uniform(size=(8, 8)) > rng.uniform(0.2, 0.8)).astype(np.uint8)
        gt = (rng.uniform(size=(8, 8)) > rng.uniform(0.2, 0.8)).astype(np.uint8)
        tp, fp, fn, tn = brute_counts(pred, gt)
        c = M.confusion(pred, gt)
        if tp + fp + fn:
            assert M.iou(c) == tp / (tp + fp + fn)
        if tp + fn:
            assert M.pd(c) == tp / (tp + fn)
        assert M.fa(c, 64) == fp / 64


class TestRocSweep:
    def test_thresholds_must_descend(self):
        p = [np.zeros((2, 2))]
        g = [np.zeros((2, 2), dtype=np.uint8)]
        with pytest.raises(M.UsageError, match="descending"):
            M.roc_sweep(p, g, [0.2, 0.5])
        with pytest.raises(M.UsageError, match="empty"):
            M.roc_sweep(p, g, [])

    def test_endpoint_behavior(self):
        rng = np.random.default_rng(0)
        probs = [rng.uniform(0.01, 0.99, size=(8, 8))]
        gt = [(rng.uniform(size=(8, 8)) > 0.7).astype(np.uint8)]
        pts = M.roc_sweep(probs, gt, [1.0, 0.0])
        assert pts[-1].pd == 1.0  # threshold 0 marks everything positive
        assert pts[-1].fa == pytest.approx(np.count_nonzero(gt[0] == 0) / 64)

    @given(seed=st.integers(0, 10_000))
    @settings(max_examples=100, deadline=None)
    def test_monotone_in_threshold(self, seed):
        rng = np.random.default_rng(seed)
        probs = [rng.uniform(size=(8, 8)) for _ in range(3)]
        gt = [(rng.uniform(size=(8, 8)) > 0.75).astype(np.uint8) for _ in range(3)]
        pts = M.roc_sweep(probs, gt, [0.9, 0.7, 0.5, 0.3, 0.1])
        pds = [p.pd for p in pts]
        fas = [p.fa for p in pts]
        # lowering the threshold can only add positive pixels
        assert all(a <= b + 1e-12 for a, b in zip(pds, pds[1:]))
        assert all(a <= b + 1e-12 for a, b in zip(fas, fas[1:]))

    def test_csv_shape(self):
        pts = [M.RocPoint(0.5, 1.0, 0.25)]
        text = M.roc_csv(pts)
        assert text.splitlines()[0] == "threshold,pd,fa"
        assert "0.5,1,0.25" in text


class TestReport:
    def test_aggregate_vs_per_image(self):
        rng = np.random.default_rng(3)
        preds = [(rng.uniform(size=(8, 8)) > 0.5).astype(np.uint8) for _ in range(5)]
        gts = [(rng.uniform(size=(8, 8)) > 0.7).astype(np.uint8) for _ in range(5)]
        rep = M.compute_report(preds, gts)
        agg = M.ConfusionCounts()
        for p, g in zip(preds, gts):
            agg = agg + M.confusion(p, g)
        assert rep.iou == M.iou(agg)
        assert rep.counts.total == 5 * 64
        assert rep.n_images == 5

    def test_text_and_csv_render(self):
        rep = M.compute_report([np.ones((2, 2), dtype=np.uint8)],
                               [np.ones((2, 2), dtype=np.uint8)])
        assert "IoU" in rep.as_text()
        assert rep.as_csv().startswith("metric,value")
        assert rep.iou == 1.0 and rep.pd == 1.0


class TestTargetLevel:
    def test_exact_match(self):
        gt = np.zeros((16, 16), dtype=np.uint8)
        gt[2:4, 2:4] = 1
        gt[10:12, 10:12] = 1
        det, total, fa_comp = M.target_level_counts(gt, gt)
        assert (det, total, fa_comp) == (2, 2, 0)

    def test_near_miss_and_false_alarm(self):
        gt = np.zeros((16, 16), dtype=np.uint8)
        gt[2, 2] = 1
        pred = np.zeros_like(gt)
        pred[4, 4] = 1        # centroid distance ~2.83 <= 3: detection
        pred[12, 12] = 1      # unmatched component: false alarm
        det, total, fa_comp = M.target_level_counts(pred, gt)
        assert (det, total, fa_comp) == (1, 1, 1)

    def test_too_far_is_miss(self):
        gt = np.zeros((16, 16), dtype=np.uint8)
        gt[2, 2] = 1
        pred = np.zeros_like(gt)
        pred[9, 9] = 1
        det, total, fa_comp = M.target_level_counts(pred, gt)
        assert (det, total, fa_comp) == (0, 1, 1)
