"""Frame accuracy and Jaccard indices over segmentations."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .core import Segmentation


def mof(predictions: Sequence[np.ndarray], ground_truth: Sequence[np.ndarray]) -> float:
    """Mean over frames: correct frames / all frames, pooled over videos."""
    correct = total = 0
    for p, g in zip(predictions, ground_truth, strict=True):
        p, g = np.asarray(p), np.asarray(g)
        if p.shape != g.shape:
            raise ValueError(f"prediction has {len(p)} frames, ground truth {len(g)}")
        correct += int(np.sum(p == g))
        total += len(g)
    if total == 0:
        raise ValueError("no frames to evaluate")
    return correct / total


def _overlap(a, b) -> int:
    return max(0, min(a.end, b.end) - max(a.start, b.start) + 1)


def _pairwise(pred: Segmentation, gt: Segmentation, union: bool) -> list[float]:
    if pred.actions != gt.actions:
        raise ValueError(f"{gt.video_id}: predicted and ground-truth transcripts differ")
    if pred.num_frames != gt.num_frames:
        raise ValueError(f"{gt.video_id}: frame counts differ")
    out = []
    for d, g in zip(pred.segments, gt.segments):
        inter = _overlap(d, g)
        denom = d.length + g.length - inter if union else d.length
        out.append(inter / denom)
    return out


def _by_class(pred: Segmentation, gt: Segmentation, union: bool) -> list[float]:
    if pred.num_frames != gt.num_frames:
        raise ValueError(f"{gt.video_id}: frame counts differ")
    labels = pred.frame_labels()
    out = []
    for g in gt.segments:
        det = labels == g.action
        inter = int(det[g.start:g.end + 1].sum())
        d = int(det.sum())
        denom = d + g.length - inter if union else d
        out.append(inter / denom if denom else 0.0)
    return out


def _jaccard(predictions, ground_truth, union: bool, matching: str) -> float:
    if matching not in ("transcript", "class"):
        raise ValueError("matching must be 'transcript' or 'class'")
    fn = _pairwise if matching == "transcript" else _by_class
    values = [v for p, g in zip(predictions, ground_truth, strict=True) for v in fn(p, g, union)]
    return float(np.mean(values)) if values else 0.0


def jaccard_iod(predictions: Sequence[Segmentation], ground_truth: Sequence[Segmentation],
                matching: str = "transcript") -> float:
    """Mean ``|G & D| / |D|`` over matched segment pairs.

    ``matching="transcript"`` pairs segments one-to-one in transcript order
    (alignment results, transcripts must agree). ``matching="class"``
    compares each ground-truth segment with all predicted frames of its class.
    """
    return _jaccard(predictions, ground_truth, False, matching)


def jaccard_iou(predictions: Sequence[Segmentation], ground_truth: Sequence[Segmentation],
                matching: str = "transcript") -> float:
    """Mean ``|G & D| / |G | D|`` with the same matching conventions as IoD."""
    return _jaccard(predictions, ground_truth, True, matching)


@dataclass
class EvalReport:
    mof: float
    iod: float | None
    iou: float | None
    per_class_accuracy: dict[str, float] = field(default_factory=dict)
    videos: int = 0
    matching: str = "transcript"


def evaluate(predictions: Sequence[Segmentation], ground_truth: Sequence[Segmentation],
             names: Sequence[str] | None = None) -> EvalReport:
    """All metrics at once; Jaccard falls back to class matching when transcripts differ."""
    pl = [p.frame_labels() for p in predictions]
    gl = [g.frame_labels() for g in ground_truth]
    matching = "transcript" if all(p.actions == g.actions for p, g in zip(predictions, ground_truth)) else "class"
    allp, allg = np.concatenate(pl), np.concatenate(gl)
    per_class = {}
    for c in np.unique(allg):
        key = names[c] if names is not None else str(int(c))
        per_class[key] = float(np.mean(allp[allg == c] == c))
    return EvalReport(mof(pl, gl), jaccard_iod(predictions, ground_truth, matching),
                      jaccard_iou(predictions, ground_truth, matching), per_class, len(gl), matching)
