import numpy as np
import pytest

from segalign.core import Segment, Segmentation
from segalign.metrics import evaluate, jaccard_iod, jaccard_iou, mof


def frames(seg):
    return set(range(seg.start, seg.end + 1))


def brute_force(preds, gts):
    """Per-frame set computations: (MoF, IoD, IoU) with transcript-order pairing."""
    correct = total = 0
    iod, iou = [], []
    for p, g in zip(preds, gts):
        pl = {t: s.action for s in p.segments for t in frames(s)}
        gl = {t: s.action for s in g.segments for t in frames(s)}
        correct += sum(pl[t] == gl[t] for t in gl)
        total += len(gl)
        for d, gs in zip(p.segments, g.segments):
            D, G = frames(d), frames(gs)
            iod.append(len(G & D) / len(D))
            iou.append(len(G & D) / len(G | D))
    return correct / total, float(np.mean(iod)), float(np.mean(iou))


def random_pair(rng):
    N = int(rng.integers(1, 5))
    acts = rng.integers(0, 3, N)
    T = int(rng.integers(N, 25))

    def cut():
        c = np.sort(rng.choice(np.arange(1, T), N - 1, replace=False))
        b = np.concatenate([[0], c, [T]])
        return Segmentation("v", tuple(Segment(int(a), int(b[i]), int(b[i + 1] - 1)) for i, a in enumerate(acts)))

    return cut(), cut()


def seg(*spans):
    return Segmentation("v", tuple(Segment(*s) for s in spans))


def test_mof_examples():
    assert mof([np.array([0, 1, 2])], [np.array([0, 1, 2])]) == 1.0
    assert mof([np.array([0, 0])], [np.array([1, 1])]) == 0.0
    assert mof([np.array([0, 1, 1, 2])], [np.array([0, 1, 1, 1])]) == 0.75


def test_mof_order_invariant():
    p = [np.array([0, 1]), np.array([2, 2, 2])]
    g = [np.array([0, 0]), np.array([2, 1, 2])]
    assert mof(p, g) == mof(p[::-1], g[::-1])


def test_jaccard_examples():
    exact = seg((0, 0, 9), (1, 10, 19))
    assert jaccard_iod([exact], [exact]) == 1.0
    assert jaccard_iou([exact], [exact]) == 1.0
    # first pair: D = [0, 9] holds all of G = [0, 4]
    d, g = seg((0, 0, 9), (1, 10, 19)), seg((0, 0, 4), (1, 5, 19))
    pair_iod = jaccard_iod([d], [g])
    assert pair_iod == pytest.approx((5 / 10 + 10 / 10) / 2)


def test_half_overlap_pair():
    d, g = seg((0, 0, 9), (1, 10, 14)), seg((1, 0, 4), (0, 5, 14))
    # class 0: D = [0, 9], G = [5, 14]; class 1: D = [10, 14], G = [0, 4] (disjoint)
    assert jaccard_iod([d], [g], matching="class") == pytest.approx((0 + 0.5) / 2)
    assert jaccard_iou([d], [g], matching="class") == pytest.approx((0 + 1 / 3) / 2)


def test_detection_inside_ground_truth():
    d, g = seg((0, 0, 2), (1, 3, 9)), seg((0, 0, 5), (1, 6, 9))
    assert jaccard_iod([d], [g]) == pytest.approx((1.0 + 4 / 7) / 2)


def test_matches_brute_force_sets():
    rng = np.random.default_rng(0)
    for _ in range(100):
        p, g = random_pair(rng)
        bm, bd, bu = brute_force([p], [g])
        assert mof([p.frame_labels()], [g.frame_labels()]) == bm
        assert jaccard_iod([p], [g]) == pytest.approx(bd, abs=1e-15)
        assert jaccard_iou([p], [g]) == pytest.approx(bu, abs=1e-15)
        assert jaccard_iou([p], [g]) <= jaccard_iod([p], [g])


def test_transcript_mismatch_is_an_error():
    with pytest.raises(ValueError):
        jaccard_iod([seg((0, 0, 3))], [seg((1, 0, 3))])


def test_evaluate_reports_class_matching_when_transcripts_differ():
    rep = evaluate([seg((0, 0, 3))], [seg((0, 0, 1), (1, 2, 3))], names=["a", "b"])
    assert rep.matching == "class"
    assert rep.mof == 0.5
    assert rep.per_class_accuracy == {"a": 1.0, "b": 0.0}
