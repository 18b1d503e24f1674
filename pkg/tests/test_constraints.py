import itertools

import numpy as np
import pytest

from segalign.constraints import (AnnotationAssignment, ConstraintError, adjust_boundaries,
                                  apply_annotations, assign_annotations, label_segment_distance)
from segalign.core import (Segment, Segmentation, SparseLabel, StateAlignment, alignment_to_segmentation,
                           extract_actions, uniform_alignment)

A, B, X = 0, 1, 2


def exhaustive_assignment(seg, labels):
    """Minimum over every non-decreasing label-to-segment map."""
    best = np.inf
    for combo in itertools.combinations_with_replacement(range(len(seg.segments)), len(labels)):
        d = sum(label_segment_distance(l.frame, l.label, seg.segments[n]) for l, n in zip(labels, combo))
        best = min(best, d)
    return best


def random_case(rng, max_labels=5, max_segments=6):
    N = int(rng.integers(1, max_segments + 1))
    acts = rng.integers(0, 3, N)
    lens = rng.integers(1, 6, N)
    bounds = np.concatenate([[0], np.cumsum(lens)])
    seg = Segmentation("v", tuple(Segment(int(a), int(bounds[i]), int(bounds[i + 1] - 1))
                                  for i, a in enumerate(acts)))
    T = int(bounds[-1])
    F = int(rng.integers(1, min(max_labels, T) + 1))
    frames = np.sort(rng.choice(T, F, replace=False))
    labels = [SparseLabel(int(f), int(rng.choice(acts))) for f in frames]
    return seg, labels


def test_distance_examples():
    seg = Segment(A, 10, 20)
    assert label_segment_distance(15, A, seg) == 0
    assert label_segment_distance(5, A, seg) == 5
    assert label_segment_distance(15, B, Segment(A, 10, 20)) == np.inf


def test_labels_already_inside():
    seg = Segmentation("v", (Segment(A, 0, 4), Segment(B, 5, 9), Segment(A, 10, 14)))
    res = assign_annotations(seg, [SparseLabel(2, A), SparseLabel(7, B), SparseLabel(12, A)])
    assert res == AnnotationAssignment((0, 1, 2), 0.0)


def test_label_between_two_segments_goes_to_nearer():
    seg = Segmentation("v", (Segment(X, 0, 4), Segment(B, 5, 14), Segment(X, 15, 19)))
    assert assign_annotations(seg, [SparseLabel(12, X)]).segment_of == (2,)
    assert assign_annotations(seg, [SparseLabel(7, X)]).segment_of == (0,)


def test_dp_matches_exhaustive():
    rng = np.random.default_rng(0)
    for _ in range(300):
        seg, labels = random_case(rng)
        oracle = exhaustive_assignment(seg, labels)
        if np.isfinite(oracle):
            assert assign_annotations(seg, labels).total_distance == oracle
        else:
            with pytest.raises(ConstraintError):
                assign_annotations(seg, labels)


def test_unknown_class_is_an_error():
    seg = Segmentation("v", (Segment(A, 0, 4),))
    with pytest.raises(ConstraintError):
        assign_annotations(seg, [SparseLabel(1, B)])


def one_state_alignment(seg):
    return uniform_alignment("v", seg.segments, [1, 1, 1])


def test_zero_distance_leaves_alignment():
    seg = Segmentation("v", (Segment(A, 0, 4), Segment(B, 5, 9)))
    al = one_state_alignment(seg)
    assert apply_annotations(al, [SparseLabel(1, A), SparseLabel(6, B)]) == al


def test_label_left_of_segment_moves_start():
    seg = Segmentation("v", (Segment(A, 0, 9), Segment(B, 10, 19)))
    out = alignment_to_segmentation(apply_annotations(one_state_alignment(seg), [SparseLabel(7, B)]))
    assert out.segments == (Segment(A, 0, 6), Segment(B, 7, 19))


def best_cuts_by_search(al, assignment, labels):
    """Smallest summed boundary shift over every admissible cut vector."""
    seg = alignment_to_segmentation(al)
    N, T = len(seg.segments), len(al)
    starts, ends = al.instance_bounds()
    visited = [int(al.substates[e]) + 1 for e in ends]
    orig = [s.start for s in seg.segments[1:]]
    best = np.inf
    for cuts in itertools.combinations(range(1, T), N - 1):
        b = (0,) + cuts + (T,)
        if any(b[n + 1] - b[n] < visited[n] for n in range(N)):
            continue
        if any(not b[n] <= l.frame < b[n + 1] for l, n in zip(labels, assignment.segment_of)):
            continue
        best = min(best, sum(abs(c - o) for c, o in zip(cuts, orig)))
    return best


def test_adjustment_is_minimal_and_satisfies_labels():
    rng = np.random.default_rng(1)
    done = 0
    while done < 150:
        seg, labels = random_case(rng, max_segments=4)
        K = [int(k) for k in rng.integers(1, 3, 3)]
        al = uniform_alignment("v", seg.segments, K)
        try:
            assignment = assign_annotations(seg, labels)
        except ConstraintError:
            continue
        if not np.isfinite(assignment.total_distance):
            continue
        oracle = best_cuts_by_search(al, assignment, labels)
        if not np.isfinite(oracle):
            with pytest.raises(ConstraintError):
                adjust_boundaries(al, assignment, labels)
            continue
        out = adjust_boundaries(al, assignment, labels)
        out.validate()
        new = alignment_to_segmentation(out)
        assert sum(abs(a.start - b.start) for a, b in zip(new.segments, seg.segments)) == oracle
        assert extract_actions(out).actions == extract_actions(al).actions
        for l in labels:
            assert out.actions[l.frame] == l.label
        again = assign_annotations(new, labels)
        assert again.total_distance == 0
        assert apply_annotations(out, labels) == out
        done += 1


def test_relaxed_floor_allows_short_segments():
    al = uniform_alignment("v", (Segment(A, 0, 5), Segment(B, 6, 11)), [3, 3])
    labels = [SparseLabel(1, B)]
    with pytest.raises(ConstraintError):
        apply_annotations(al, labels)
    out = apply_annotations(al, labels, allow_fewer_states=True)
    out.validate()
    assert list(out.actions[:2]) == [A, B]
    assert out.substates[0] == 0
