"""Sparse frame annotations as hard constraints on a decoded segmentation.

Annotated frames are first matched to segments of the same class by a
monotone dynamic program that minimises the total boundary shift; the
segment boundaries are then moved as little as possible so that every
annotated frame falls inside its matched segment.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import Segment, Segmentation, SparseLabel, StateAlignment, alignment_to_segmentation

INF = math.inf


class ConstraintError(ValueError):
    pass


@dataclass(frozen=True)
class AnnotationAssignment:
    segment_of: tuple[int, ...]
    total_distance: float


def label_segment_distance(frame: int, label: int, segment: Segment) -> float:
    """Frames the annotation must move to lie in ``segment``; inf on a class mismatch."""
    if label != segment.action:
        return INF
    if frame < segment.start:
        return float(segment.start - frame)
    if frame > segment.end:
        return float(frame - segment.end)
    return 0.0


def assign_annotations(seg: Segmentation, labels: Sequence[SparseLabel]) -> AnnotationAssignment:
    """Monotone label-to-segment matching with minimal summed distance.

    ``cost[i, n]`` is the best total for labels ``0..i`` with label ``i`` on
    segment ``n``; the predecessor may sit on any segment ``<= n``. Ties go
    to the earlier segment.
    """
    labels = list(labels)
    if not labels:
        return AnnotationAssignment((), 0.0)
    frames = [l.frame for l in labels]
    if any(b <= a for a, b in zip(frames, frames[1:])):
        raise ConstraintError("annotated frames must be strictly increasing")
    present = {s.action for s in seg.segments}
    missing = [l for l in labels if l.label not in present]
    if missing:
        raise ConstraintError(f"{seg.video_id}: annotated classes absent from the segmentation: {missing}")

    F, N = len(labels), len(seg.segments)
    dist = np.array([[label_segment_distance(l.frame, l.label, s) for s in seg.segments] for l in labels])
    cost = np.full((F, N), INF)
    back = np.zeros((F, N), dtype=np.int64)
    cost[0] = dist[0]
    for i in range(1, F):
        # running minimum over segments <= n, first index wins ties
        best, arg = INF, 0
        for n in range(N):
            if cost[i - 1, n] < best:
                best, arg = cost[i - 1, n], n
            cost[i, n] = best + dist[i, n]
            back[i, n] = arg
    n = int(np.argmin(cost[-1]))
    total = float(cost[-1, n])
    if not np.isfinite(total):
        raise ConstraintError(f"{seg.video_id}: no order-preserving assignment matches labels {labels}")
    out = [n]
    for i in range(F - 1, 0, -1):
        n = int(back[i, n])
        out.append(n)
    return AnnotationAssignment(tuple(reversed(out)), total)


def _visited_states(al: StateAlignment) -> list[int]:
    starts, ends = al.instance_bounds()
    return [int(al.substates[e]) + 1 for e in ends]


def adjust_boundaries(al: StateAlignment, assignment: AnnotationAssignment,
                      labels: Sequence[SparseLabel], allow_fewer_states: bool = False) -> StateAlignment:
    """Move segment boundaries minimally so each annotation lies in its segment.

    Cut positions are chosen by a dynamic program minimising the summed
    absolute boundary shift, subject to each segment keeping one frame per
    subaction state it visited. Segments whose span changes get their states
    spread evenly again; untouched segments keep their states.

    With ``allow_fewer_states`` an otherwise infeasible instance is retried
    with a floor of one frame per segment; a segment squeezed below its
    visited count then visits only its first states.
    """
    seg = alignment_to_segmentation(al)
    segs = seg.segments
    N, T = len(segs), len(al)
    labels = list(labels)
    if len(labels) != len(assignment.segment_of):
        raise ConstraintError("assignment does not match the label list")
    if not labels:
        return al
    visited = _visited_states(al)
    cuts = _cut_positions(T, segs, labels, assignment, visited)
    if cuts is None and allow_fewer_states:
        cuts = _cut_positions(T, segs, labels, assignment, [1] * N)
    if cuts is None:
        raise ConstraintError(
            f"{al.video_id}: annotations cannot be satisfied without shrinking a segment "
            "below one frame per visited state")

    actions, subs, inst = [], [], []
    for n, s in enumerate(segs):
        a, b = cuts[n], cuts[n + 1]
        if a == s.start and b == s.end + 1:
            k = al.substates[a:b]
        else:
            used = min(visited[n], b - a)
            sizes = [len(c) for c in np.array_split(np.arange(b - a), used)]
            k = np.repeat(np.arange(used), sizes)
        subs.append(k)
        actions.append(np.full(b - a, s.action))
        inst.append(np.full(b - a, n))
    out = StateAlignment(al.video_id, np.concatenate(actions), np.concatenate(subs), np.concatenate(inst))
    out.validate()
    return out


def _cut_positions(T, segs, labels, assignment, min_len) -> list[int] | None:
    N = len(segs)
    # cut c_n (n = 1..N-1) is the first frame of segment n
    lo = np.zeros(N + 1, dtype=np.int64)
    hi = np.full(N + 1, T, dtype=np.int64)
    for l, n in zip(labels, assignment.segment_of):
        # frame must satisfy c_n <= frame < c_{n+1}
        hi[1:n + 1] = np.minimum(hi[1:n + 1], l.frame)
        lo[n + 1:N] = np.maximum(lo[n + 1:N], l.frame + 1)
    orig = np.array([0] + [s.start for s in segs[1:]] + [T])

    # DP over cut positions; cost[c] = best shift for cuts 1..n with c_n = c
    positions = np.arange(T + 1)
    cost = np.where(positions == 0, 0.0, INF)
    choice = []
    for n in range(1, N + 1):
        # predecessor cut must satisfy c_{n-1} <= c - min_len[n-1]
        shifted = np.full(T + 1, INF)
        arg = np.zeros(T + 1, dtype=np.int64)
        run_min = np.minimum.accumulate(cost)
        run_arg = np.zeros(T + 1, dtype=np.int64)
        best_i = 0
        for c in range(T + 1):
            if cost[c] < cost[best_i]:
                best_i = c
            run_arg[c] = best_i
        k = min_len[n - 1]
        shifted[k:] = run_min[:T + 1 - k]
        arg[k:] = run_arg[:T + 1 - k]
        if n == N:
            new_cost = np.where(positions == T, shifted, INF)
        else:
            ok = (positions >= lo[n]) & (positions <= hi[n])
            new_cost = np.where(ok, shifted + np.abs(positions - orig[n]), INF)
        choice.append(arg)
        cost = new_cost
    if not np.isfinite(cost[T]):
        return None
    cuts = [T]
    for n in range(N, 0, -1):
        cuts.append(int(choice[n - 1][cuts[-1]]))
    return cuts[::-1]


def apply_annotations(al: StateAlignment, labels: Sequence[SparseLabel],
                      allow_fewer_states: bool = False) -> StateAlignment:
    """Assign then adjust: the two-step refinement used during training."""
    assignment = assign_annotations(alignment_to_segmentation(al), labels)
    return adjust_boundaries(al, assignment, labels, allow_fewer_states)
