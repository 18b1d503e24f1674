"""Feature files and a synthetic corpus generator.

Feature file layout (little endian): the 8-byte magic ``SEGFEAT1``, ``u32 T``,
``u32 D``, then ``T * D`` float32 values in row-major order. A directory of
feature files is indexed by ``manifest.tsv`` with ``video_id<TAB>filename``
lines.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .core import (LabelVocabulary, Segment, Segmentation, SparseLabel, StateAlignment, Transcript)

MAGIC = b"SEGFEAT1"
_HEADER = struct.Struct("<8sII")
MANIFEST = "manifest.tsv"


class FeatureFormatError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class FeatureSequence:
    video_id: str
    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError(f"{self.video_id}: features must be a non-empty T x D matrix")
        if not np.all(np.isfinite(arr)):
            raise ValueError(f"{self.video_id}: features contain non-finite values")

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape


def save_features(path: str | Path, x: np.ndarray) -> None:
    x = np.ascontiguousarray(x, dtype="<f4")
    if x.ndim != 2:
        raise ValueError("features must be 2-D")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, x.shape[0], x.shape[1]))
        fh.write(x.tobytes())


def load_features(path: str | Path, video_id: str | None = None, dim: int | None = None) -> FeatureSequence:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise FeatureFormatError(f"{path}: truncated header: {len(raw)} of {_HEADER.size} bytes at offset 0")
    magic, T, D = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise FeatureFormatError(f"{path}: bad magic {magic!r} at offset 0")
    if T < 1 or D < 1:
        raise FeatureFormatError(f"{path}: invalid shape {T}x{D} in header")
    if dim is not None and D != dim:
        raise FeatureFormatError(f"{path}: dimension {D} does not match expected {dim}")
    need = T * D * 4
    body = len(raw) - _HEADER.size
    if body != need:
        raise FeatureFormatError(
            f"{path}: expected {need} data bytes after offset {_HEADER.size}, found {body} "
            f"(file ends at byte offset {len(raw)})")
    x = np.frombuffer(raw, dtype="<f4", offset=_HEADER.size).reshape(T, D).astype(np.float32)
    if not np.all(np.isfinite(x)):
        bad = int(np.flatnonzero(~np.isfinite(x.ravel()))[0])
        raise FeatureFormatError(f"{path}: non-finite value at byte offset {_HEADER.size + 4 * bad}")
    return FeatureSequence(video_id or Path(path).stem, x)


def write_feature_dir(directory: str | Path, features: dict[str, np.ndarray]) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    lines = []
    for vid, x in features.items():
        name = f"{vid}.feat"
        save_features(directory / name, x)
        lines.append(f"{vid}\t{name}")
    (directory / MANIFEST).write_text("\n".join(lines) + "\n")


def read_feature_dir(directory: str | Path) -> dict[str, FeatureSequence]:
    """Load every video listed in the directory manifest; all must share D."""
    directory = Path(directory)
    manifest = directory / MANIFEST
    if not manifest.exists():
        raise FileNotFoundError(f"no {MANIFEST} in {directory}")
    out: dict[str, FeatureSequence] = {}
    dim = None
    for lineno, line in enumerate(manifest.read_text().splitlines(), 1):
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise FeatureFormatError(f"{manifest}:{lineno}: expected 'video_id<TAB>path'")
        seq = load_features(directory / parts[1], parts[0], dim)
        dim = seq.shape[1]
        out[parts[0]] = seq
    return out


# ---------------------------------------------------------------------------
# synthetic corpora

@dataclass
class SyntheticSpec:
    """Generator settings; every state emits from its own diagonal Gaussian."""

    num_actions: int = 5
    states_per_action: list[int] = field(default_factory=lambda: [3, 2, 4, 3, 2])
    templates: list[list[int]] = field(default_factory=lambda: [[0, 1, 2, 3, 4], [1, 3, 0, 4, 2],
                                                                [4, 2, 1, 0, 3]])
    num_videos: int = 40
    dim: int = 8
    mean_duration: list[float] | float = 20.0
    mean_scale: float = 1.0
    noise_scale: float = 1.0
    seed: int = 0
    means: list[list[float]] | None = None
    variances: list[list[float]] | None = None
    action_names: list[str] | None = None

    def validate(self) -> None:
        if len(self.states_per_action) != self.num_actions:
            raise ValueError("states_per_action needs one entry per action")
        if any(k < 1 for k in self.states_per_action):
            raise ValueError("every action needs at least one state")
        if not self.templates or any(not t for t in self.templates):
            raise ValueError("templates must be non-empty transcripts")
        if any(not 0 <= a < self.num_actions for t in self.templates for a in t):
            raise ValueError("template refers to an unknown action")
        S = sum(self.states_per_action)
        if isinstance(self.mean_duration, list) and len(self.mean_duration) != S:
            raise ValueError("mean_duration list needs one entry per state")
        if np.any(np.asarray(self.mean_duration) < 1):
            raise ValueError("mean durations must be >= 1 frame")
        if self.num_videos < 1 or self.dim < 1 or self.noise_scale < 0:
            raise ValueError("num_videos and dim must be positive, noise_scale non-negative")
        if self.action_names is not None and len(self.action_names) != self.num_actions:
            raise ValueError("action_names needs one entry per action")
        problems = learnability_violations(self.templates, self.num_actions)
        if problems:
            raise ValueError("templates violate the context precondition: " + "; ".join(problems))

    def names(self) -> list[str]:
        return self.action_names or [f"action{a}" for a in range(self.num_actions)]


def learnability_violations(transcripts: Sequence[Sequence[int]], num_actions: int) -> list[str]:
    """Actions seen with fewer than two distinct predecessors or successors.

    Video start and end count as contexts.
    """
    preds = {a: set() for a in range(num_actions)}
    succs = {a: set() for a in range(num_actions)}
    for t in transcripts:
        padded = ["^"] + list(t) + ["$"]
        for i in range(1, len(padded) - 1):
            preds[padded[i]].add(padded[i - 1])
            succs[padded[i]].add(padded[i + 1])
    out = []
    for a in range(num_actions):
        if len(preds[a]) < 2 or len(succs[a]) < 2:
            out.append(f"action {a}: {len(preds[a])} predecessor(s), {len(succs[a])} successor(s)")
    return out


@dataclass
class SyntheticCorpus:
    labels: LabelVocabulary
    features: dict[str, np.ndarray]
    transcripts: dict[str, Transcript]
    segmentations: dict[str, Segmentation]
    alignments: dict[str, StateAlignment]
    state_means: np.ndarray
    durations: list[int]

    @property
    def video_ids(self) -> list[str]:
        return list(self.features)


def generate_corpus(spec: SyntheticSpec) -> SyntheticCorpus:
    """Sample videos from the template transcripts.

    State durations are geometric with the configured mean (matching an HMM
    self-loop) and frames are ``mean + noise_scale * sqrt(var) * N(0, 1)``.
    Videos cycle through the templates in order.
    """
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    K = list(spec.states_per_action)
    S = sum(K)
    offsets = np.concatenate([[0], np.cumsum(K)[:-1]])
    means = (np.asarray(spec.means, dtype=np.float64) if spec.means is not None
             else rng.normal(0.0, spec.mean_scale, (S, spec.dim)))
    var = (np.asarray(spec.variances, dtype=np.float64) if spec.variances is not None
           else np.ones((S, spec.dim)))
    dur = np.broadcast_to(np.asarray(spec.mean_duration, dtype=np.float64), (S,))
    names = spec.names()
    labels = LabelVocabulary(names)
    width = len(str(spec.num_videos - 1))
    features, transcripts, segmentations, alignments, durations = {}, {}, {}, {}, []
    for v in range(spec.num_videos):
        vid = f"video{v:0{width}d}"
        template = spec.templates[v % len(spec.templates)]
        acts, subs, inst, segs = [], [], [], []
        t = 0
        for n, a in enumerate(template):
            start = t
            for k in range(K[a]):
                d = int(rng.geometric(1.0 / dur[offsets[a] + k]))
                durations.append(d)
                acts += [a] * d
                subs += [k] * d
                inst += [n] * d
                t += d
            segs.append(Segment(a, start, t - 1))
        ids = offsets[np.asarray(acts)] + np.asarray(subs)
        noise = rng.standard_normal((t, spec.dim))
        x = means[ids] + spec.noise_scale * np.sqrt(var[ids]) * noise
        features[vid] = x.astype(np.float32)
        transcripts[vid] = Transcript(vid, tuple(template))
        segmentations[vid] = Segmentation(vid, tuple(segs))
        alignments[vid] = StateAlignment(vid, acts, subs, inst)
    return SyntheticCorpus(labels, features, transcripts, segmentations, alignments, means, durations)


def sample_sparse_labels(segmentations: dict[str, Segmentation], fraction: float,
                         seed: int = 0) -> dict[str, list[SparseLabel]]:
    """Annotate a uniformly drawn ``fraction`` of each video's frames."""
    if not 0 <= fraction <= 1:
        raise ValueError("fraction must lie in [0, 1]")
    rng = np.random.default_rng(seed)
    out = {}
    for vid, seg in segmentations.items():
        T = seg.num_frames
        k = int(round(fraction * T))
        frames = np.sort(rng.choice(T, size=k, replace=False)) if k else np.array([], dtype=np.int64)
        labels = seg.frame_labels()
        out[vid] = [SparseLabel(int(f), int(labels[f])) for f in frames]
    return out
