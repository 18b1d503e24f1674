"""Iterative realign-and-reestimate training.

Weak supervision starts from a linear segmentation of every video, then
alternates: fit scorer and HMM on the current alignment, realign each video
to its transcript, optionally snap the result to sparse frame annotations,
and re-estimate the number of subactions per action. Training stops once
fewer than ``stop_threshold`` of the frames change their action label, or
after ``max_iterations``.
"""
from __future__ import annotations

import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np

from .constraints import ConstraintError, apply_annotations
from .core import (LabelVocabulary, Segment, Segmentation, SparseLabel, StateAlignment,
                   StateVocabulary, Transcript, build_grammar, uniform_alignment)
from .decoder import InfeasibleError, align_to_transcript
from .hmm import HmmModel, estimate_transitions, skip_state_fraction
from .lengthprior import PriorKind
from .metrics import mof
from .model import SegmentationModel
from .observation import ScorerConfig, ScorerKind, fit_scorer

log = logging.getLogger(__name__)

SUPERVISION_MODES = ("weak", "sparse", "full")


@dataclass
class TrainConfig:
    frames_per_subaction: int = 10
    scorer: str = "gaussian"
    length_prior: str = "half-gaussian"
    max_iterations: int = 15
    stop_threshold: float = 0.05
    supervision: str = "weak"
    reestimate: bool = True
    seed: int = 0
    hidden: int = 64
    learning_rate: float = 0.01
    batch_size: int = 32
    epochs: int = 2
    chunk: int = 21
    variance_floor: float = 1e-4
    jobs: int = 1

    def __post_init__(self):
        if self.frames_per_subaction < 1:
            raise ValueError("frames_per_subaction must be >= 1")
        if not 0 < self.stop_threshold < 1:
            raise ValueError("stop_threshold must lie in (0, 1)")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.supervision not in SUPERVISION_MODES:
            raise ValueError(f"supervision must be one of {SUPERVISION_MODES}")
        self.scorer = ScorerKind.parse(self.scorer).value
        self.length_prior = PriorKind.parse(self.length_prior).value

    def scorer_config(self, iteration: int) -> ScorerConfig:
        return ScorerConfig(hidden=self.hidden, learning_rate=self.learning_rate,
                            batch_size=self.batch_size, epochs=self.epochs, chunk=self.chunk,
                            variance_floor=self.variance_floor, seed=self.seed + iteration)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class VideoData:
    video_id: str
    features: np.ndarray
    transcript: Transcript
    sparse_labels: list[SparseLabel] | None = None
    truth: Segmentation | None = None

    @property
    def num_frames(self) -> int:
        return len(self.features)


@dataclass
class IterationReport:
    iteration: int
    change_rate: float
    states_per_action: list[int]
    skip_state_fraction: float
    train_mof: float | None
    infeasible: list[str] = field(default_factory=list)
    wall_time: float = 0.0

    def to_dict(self, timing: bool = False) -> dict:
        d = asdict(self)
        if not timing:
            d.pop("wall_time")
        return d


@dataclass
class TrainResult:
    model: SegmentationModel
    alignments: list[StateAlignment]
    reports: list[IterationReport]
    initial_mof: float | None

    @property
    def final_mof(self) -> float | None:
        return self.reports[-1].train_mof if self.reports else self.initial_mof


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def _states_from_lengths(total_frames: np.ndarray, instances: np.ndarray, m: int,
                         fallback: Sequence[int]) -> list[int]:
    out = []
    for a, (frames, count) in enumerate(zip(total_frames, instances)):
        out.append(max(1, _round_half_up(frames / (count * m))) if count else int(fallback[a]))
    return out


def linear_segments(num_frames: int, actions: Sequence[int]) -> list[Segment]:
    """Equal-size split of ``num_frames`` over the transcript; extra frames go first."""
    if num_frames < len(actions):
        raise ValueError(f"{num_frames} frames cannot hold {len(actions)} action instances")
    sizes = [len(c) for c in np.array_split(np.arange(num_frames), len(actions))]
    bounds = np.concatenate([[0], np.cumsum(sizes)])
    return [Segment(int(a), int(bounds[i]), int(bounds[i + 1]) - 1) for i, a in enumerate(actions)]


def linear_init(lengths: Sequence[int], transcripts: Sequence[Transcript], m: int,
                num_actions: int) -> tuple[StateVocabulary, list[StateAlignment]]:
    """Linear action segmentation plus subaction counts from frames per instance."""
    segs = [linear_segments(T, tr.actions) for T, tr in zip(lengths, transcripts)]
    frames = np.zeros(num_actions)
    count = np.zeros(num_actions, dtype=np.int64)
    for video in segs:
        for s in video:
            frames[s.action] += s.length
            count[s.action] += 1
    vocab = StateVocabulary(_states_from_lengths(frames, count, m, [1] * num_actions))
    aligns = [uniform_alignment(tr.video_id, s, vocab.states_per_action) for s, tr in zip(segs, transcripts)]
    return vocab, aligns


def _segments_of(al: StateAlignment) -> list[Segment]:
    starts, ends = al.instance_bounds()
    return [Segment(int(al.actions[s]), int(s), int(e)) for s, e in zip(starts, ends)]


def reestimate_subactions(alignments: Sequence[StateAlignment], m: int, num_actions: int,
                          previous: Sequence[int] | None = None) -> tuple[StateVocabulary, list[StateAlignment]]:
    """Recount subactions from mean action lengths and respread them uniformly.

    Action boundaries are kept exactly; only the state granularity changes.
    Actions that no longer occur keep their previous count (or 1).
    """
    frames = np.zeros(num_actions)
    count = np.zeros(num_actions, dtype=np.int64)
    segs = [_segments_of(al) for al in alignments]
    for video in segs:
        for s in video:
            frames[s.action] += s.length
            count[s.action] += 1
    fallback = previous if previous is not None else [1] * num_actions
    vocab = StateVocabulary(_states_from_lengths(frames, count, m, fallback))
    return vocab, [uniform_alignment(al.video_id, s, vocab.states_per_action) for al, s in zip(alignments, segs)]


def frame_change_rate(previous: Sequence[StateAlignment], current: Sequence[StateAlignment]) -> float:
    """Share of frames whose action label differs between two alignment sets."""
    changed = total = 0
    for a, b in zip(previous, current, strict=True):
        if len(a) != len(b):
            raise ValueError(f"{a.video_id}: alignment lengths differ ({len(a)} vs {len(b)})")
        changed += int(np.sum(a.actions != b.actions))
        total += len(a)
    return changed / total if total else 0.0


def _realign_one(args):
    scorer, hmm, prior, video = args
    scores = scorer.log_likelihoods(video.features)
    return align_to_transcript(scores, video.transcript, hmm, prior).alignment


def _parallel_map(fn, items: list, jobs: int) -> list:
    if jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def realign_all(scorer, hmm: HmmModel, prior, videos: Sequence[VideoData],
                fallback: Sequence[StateAlignment], jobs: int = 1) -> tuple[list[StateAlignment], list[str]]:
    """Forced alignment of every video to its own transcript.

    Videos that cannot be aligned keep their ``fallback`` alignment and are
    reported by id.
    """
    prior = PriorKind.parse(prior)
    feasible, skipped = [], []
    for v in videos:
        if v.num_frames < hmm.vocab.transcript_states(v.transcript.actions):
            skipped.append(v.video_id)
        else:
            feasible.append(v)
    results = iter(_parallel_map(_realign_one, [(scorer, hmm, prior, v) for v in feasible], jobs))
    out = []
    for v, old in zip(videos, fallback):
        if v.video_id in skipped:
            log.warning("%s: too short for its transcript, keeping previous alignment", v.video_id)
            out.append(old)
        else:
            out.append(next(results))
    return out, skipped


def _fit(config: TrainConfig, vocab: StateVocabulary, videos: Sequence[VideoData],
         alignments: Sequence[StateAlignment], iteration: int):
    targets = [al.state_ids(vocab) for al in alignments]
    scorer, _ = fit_scorer(config.scorer, [v.features for v in videos], targets, vocab.num_states,
                           config.scorer_config(iteration))
    hmm = estimate_transitions(alignments, vocab, default_length=config.frames_per_subaction)
    return scorer, hmm


def _train_mof(videos: Sequence[VideoData], alignments: Sequence[StateAlignment]) -> float | None:
    if any(v.truth is None for v in videos):
        return None
    return mof([al.actions for al in alignments], [v.truth.frame_labels() for v in videos])


def _snap(videos: Sequence[VideoData], alignments: Sequence[StateAlignment]) -> list[StateAlignment]:
    out = []
    for v, al in zip(videos, alignments):
        if v.sparse_labels:
            try:
                al = apply_annotations(al, v.sparse_labels, allow_fewer_states=True)
            except ConstraintError as exc:
                log.warning("%s: annotations not applied: %s", v.video_id, exc)
        out.append(al)
    return out


def train(config: TrainConfig, videos: Sequence[VideoData], labels: LabelVocabulary,
          callback: Callable[[IterationReport, SegmentationModel], None] | None = None) -> TrainResult:
    """Run the full training procedure for the configured supervision mode."""
    videos = list(videos)
    if not videos:
        raise ValueError("no training videos")
    m = config.frames_per_subaction
    prior = PriorKind.parse(config.length_prior)
    grammar = build_grammar([v.transcript for v in videos])
    A = len(labels)
    if config.supervision == "sparse" and not any(v.sparse_labels for v in videos):
        raise ValueError("sparse supervision needs sparse labels for at least one video")
    if config.supervision == "full":
        return _train_full(config, videos, labels, grammar, callback)

    vocab, alignments = linear_init([v.num_frames for v in videos], [v.transcript for v in videos], m, A)
    initial_mof = _train_mof(videos, alignments)
    reports: list[IterationReport] = []
    for it in range(1, config.max_iterations + 1):
        t0 = time.perf_counter()
        scorer, hmm = _fit(config, vocab, videos, alignments, it)
        realigned, skipped = realign_all(scorer, hmm, prior, videos, alignments, config.jobs)
        if len(skipped) == len(videos):
            raise InfeasibleError("no training video could be realigned")
        if config.supervision == "sparse":
            realigned = _snap(videos, realigned)
        rate = frame_change_rate(alignments, realigned)
        skip = skip_state_fraction(realigned)
        train_mof = _train_mof(videos, realigned)
        if config.reestimate:
            vocab, alignments = reestimate_subactions(realigned, m, A, vocab.states_per_action)
        else:
            alignments = realigned
        report = IterationReport(it, rate, list(vocab.states_per_action), skip, train_mof,
                                 skipped, time.perf_counter() - t0)
        reports.append(report)
        log.info("iteration %d: change %.4f, skip %.3f, mof %s, states %s", it, rate, skip,
                 "n/a" if train_mof is None else f"{train_mof:.4f}", report.states_per_action)
        if callback is not None:
            callback(report, SegmentationModel(labels, hmm, scorer, prior, grammar))
        if rate < config.stop_threshold:
            break

    scorer, hmm = _fit(config, vocab, videos, alignments, len(reports) + 1)
    model = SegmentationModel(labels, hmm, scorer, prior, grammar)
    return TrainResult(model, list(alignments), reports, initial_mof)


def _train_full(config, videos, labels, grammar, callback) -> TrainResult:
    """Subaction counts and lengths straight from the ground-truth segments."""
    if any(v.truth is None for v in videos):
        raise ValueError("full supervision needs a ground-truth segmentation for every video")
    m = config.frames_per_subaction
    A = len(labels)
    gt_aligns = [StateAlignment(v.video_id, v.truth.frame_labels(), np.zeros(v.num_frames),
                                np.repeat(np.arange(len(v.truth.segments)),
                                          [s.length for s in v.truth.segments]))
                 for v in videos]
    vocab, alignments = reestimate_subactions(gt_aligns, m, A)
    t0 = time.perf_counter()
    scorer, hmm = _fit(config, vocab, videos, alignments, 1)
    prior = PriorKind.parse(config.length_prior)
    model = SegmentationModel(labels, hmm, scorer, prior, grammar)
    decoded, skipped = realign_all(scorer, hmm, prior, videos, alignments, config.jobs)
    report = IterationReport(1, frame_change_rate(alignments, decoded), list(vocab.states_per_action),
                             skip_state_fraction(decoded), _train_mof(videos, decoded), skipped,
                             time.perf_counter() - t0)
    if callback is not None:
        callback(report, model)
    return TrainResult(model, alignments, [report], 1.0)
