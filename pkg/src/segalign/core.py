"""Domain types shared across the package.

Frames and subaction indices are 0-based everywhere. Actions are referred to
by dense integer ids; :class:`LabelVocabulary` maps them to names.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np


class AlignmentError(ValueError):
    """Raised when a state alignment violates the feed-forward invariants."""


@dataclass(frozen=True)
class ActionLabel:
    name: str
    id: int


class LabelVocabulary:
    """Bidirectional mapping between action names and dense ids."""

    def __init__(self, names: Iterable[str]):
        names = list(names)
        if len(set(names)) != len(names):
            raise ValueError("duplicate action names in vocabulary")
        self._names = tuple(names)
        self._ids = {n: i for i, n in enumerate(self._names)}

    @classmethod
    def from_names(cls, names: Iterable[str]) -> "LabelVocabulary":
        """Sorted, deduplicated vocabulary; ids are stable for a given name set."""
        return cls(sorted(set(names)))

    def __len__(self) -> int:
        return len(self._names)

    def __contains__(self, name: str) -> bool:
        return name in self._ids

    def __eq__(self, other) -> bool:
        return isinstance(other, LabelVocabulary) and self._names == other._names

    def __repr__(self) -> str:
        return f"LabelVocabulary({list(self._names)!r})"

    @property
    def names(self) -> tuple[str, ...]:
        return self._names

    def id(self, name: str) -> int:
        try:
            return self._ids[name]
        except KeyError:
            raise KeyError(f"unknown action label {name!r}") from None

    def name(self, idx: int) -> str:
        return self._names[idx]

    def label(self, idx: int) -> ActionLabel:
        return ActionLabel(self._names[idx], idx)

    def encode(self, names: Iterable[str]) -> tuple[int, ...]:
        return tuple(self.id(n) for n in names)

    def decode(self, ids: Iterable[int]) -> list[str]:
        return [self._names[i] for i in ids]


@dataclass(frozen=True)
class Transcript:
    video_id: str
    actions: tuple[int, ...]

    def __post_init__(self):
        if len(self.actions) == 0:
            raise ValueError(f"transcript for {self.video_id!r} is empty")
        object.__setattr__(self, "actions", tuple(int(a) for a in self.actions))

    def __len__(self) -> int:
        return len(self.actions)


@dataclass(frozen=True)
class SubactionState:
    action: int
    index: int
    global_id: int


class StateVocabulary:
    """All subaction states of all actions, numbered densely.

    State ``k`` of action ``a`` has global id ``offsets[a] + k``.
    """

    def __init__(self, states_per_action: Sequence[int]):
        counts = np.asarray(states_per_action, dtype=np.int64)
        if counts.ndim != 1 or np.any(counts < 1):
            raise ValueError("every action needs at least one subaction state")
        self.states_per_action = tuple(int(k) for k in counts)
        self.offsets = np.concatenate([[0], np.cumsum(counts)[:-1]]).astype(np.int64)
        self.num_states = int(counts.sum())
        self.state_action = np.repeat(np.arange(len(counts)), counts)
        self.state_index = np.concatenate([np.arange(k) for k in counts])

    def __len__(self) -> int:
        return self.num_states

    def __eq__(self, other) -> bool:
        return (isinstance(other, StateVocabulary)
                and self.states_per_action == other.states_per_action)

    def __repr__(self) -> str:
        return f"StateVocabulary({list(self.states_per_action)})"

    @property
    def num_actions(self) -> int:
        return len(self.states_per_action)

    def global_id(self, action: int, index: int) -> int:
        if not 0 <= index < self.states_per_action[action]:
            raise IndexError(f"action {action} has no subaction {index}")
        return int(self.offsets[action] + index)

    def state(self, global_id: int) -> SubactionState:
        return SubactionState(int(self.state_action[global_id]),
                              int(self.state_index[global_id]), int(global_id))

    @property
    def states(self) -> list[SubactionState]:
        return [self.state(g) for g in range(self.num_states)]

    def transcript_states(self, actions: Sequence[int]) -> int:
        return int(sum(self.states_per_action[a] for a in actions))


@dataclass(frozen=True, eq=False)
class StateAlignment:
    """Per-frame subaction assignment with explicit action-instance indices.

    ``actions[t]`` is the action id at frame t, ``substates[t]`` the subaction
    index within that action, ``instances[t]`` the position of the action
    instance in the video's transcript. Keeping ``instances`` explicit makes
    back-to-back repeats such as ``[A, A]`` unambiguous.
    """

    video_id: str
    actions: np.ndarray
    substates: np.ndarray
    instances: np.ndarray

    def __post_init__(self):
        for name in ("actions", "substates", "instances"):
            arr = np.array(getattr(self, name), dtype=np.int64)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if not (len(self.actions) == len(self.substates) == len(self.instances)):
            raise AlignmentError("alignment arrays differ in length")
        if len(self.actions) == 0:
            raise AlignmentError("alignment is empty")

    def __len__(self) -> int:
        return len(self.actions)

    def __eq__(self, other) -> bool:
        return (isinstance(other, StateAlignment)
                and self.video_id == other.video_id
                and np.array_equal(self.actions, other.actions)
                and np.array_equal(self.substates, other.substates)
                and np.array_equal(self.instances, other.instances))

    @classmethod
    def from_states(cls, video_id: str, states: Sequence[tuple[int, int]]) -> "StateAlignment":
        """Build from ``(action, subindex)`` pairs, inferring instance boundaries.

        A new instance starts whenever the action changes or the subindex
        drops back to 0. Use the constructor directly when two instances of
        the same action with a single state follow each other.
        """
        actions = np.array([a for a, _ in states], dtype=np.int64)
        subs = np.array([k for _, k in states], dtype=np.int64)
        new = np.ones(len(states), dtype=bool)
        new[1:] = (actions[1:] != actions[:-1]) | ((subs[1:] == 0) & (subs[:-1] != 0))
        return cls(video_id, actions, subs, np.cumsum(new) - 1)

    def validate(self) -> None:
        """Check the feed-forward monotonicity invariants; raise AlignmentError."""
        a, k, n = self.actions, self.substates, self.instances
        if n[0] != 0 or k[0] != 0:
            raise AlignmentError(f"{self.video_id}: alignment must start in instance 0, state 0")
        dn = np.diff(n)
        dk = np.diff(k)
        same = dn == 0
        bad = np.flatnonzero(~((same & (a[1:] == a[:-1]) & ((dk == 0) | (dk == 1)))
                               | ((dn == 1) & (k[1:] == 0))))
        if len(bad):
            t = int(bad[0]) + 1
            raise AlignmentError(
                f"{self.video_id}: non-monotone transition at frame {t}: "
                f"({a[t-1]},{k[t-1]},#{n[t-1]}) -> ({a[t]},{k[t]},#{n[t]})")

    def state_ids(self, vocab: StateVocabulary) -> np.ndarray:
        if np.any(self.substates >= np.asarray(vocab.states_per_action)[self.actions]):
            raise AlignmentError(f"{self.video_id}: subaction index outside the state vocabulary")
        return vocab.offsets[self.actions] + self.substates

    def run_bounds(self) -> tuple[np.ndarray, np.ndarray]:
        """Start and end (inclusive) frames of maximal state runs."""
        change = np.ones(len(self), dtype=bool)
        change[1:] = (self.instances[1:] != self.instances[:-1]) | (self.substates[1:] != self.substates[:-1])
        starts = np.flatnonzero(change)
        ends = np.append(starts[1:] - 1, len(self) - 1)
        return starts, ends

    def instance_bounds(self) -> tuple[np.ndarray, np.ndarray]:
        change = np.ones(len(self), dtype=bool)
        change[1:] = self.instances[1:] != self.instances[:-1]
        starts = np.flatnonzero(change)
        ends = np.append(starts[1:] - 1, len(self) - 1)
        return starts, ends


@dataclass(frozen=True)
class Segment:
    action: int
    start: int
    end: int

    @property
    def length(self) -> int:
        return self.end - self.start + 1


@dataclass(frozen=True)
class Segmentation:
    video_id: str
    segments: tuple[Segment, ...]

    def __post_init__(self):
        segs = tuple(s if isinstance(s, Segment) else Segment(*s) for s in self.segments)
        object.__setattr__(self, "segments", segs)
        if not segs:
            raise ValueError(f"{self.video_id}: segmentation has no segments")
        expected = 0
        for s in segs:
            if s.start != expected or s.end < s.start:
                raise ValueError(f"{self.video_id}: segments must tile the video without gaps, got {s}")
            expected = s.end + 1

    @property
    def num_frames(self) -> int:
        return self.segments[-1].end + 1

    @property
    def actions(self) -> tuple[int, ...]:
        return tuple(s.action for s in self.segments)

    def frame_labels(self) -> np.ndarray:
        return np.repeat([s.action for s in self.segments], [s.length for s in self.segments])


@dataclass(frozen=True)
class SparseLabel:
    frame: int
    label: int


@dataclass
class _TrieNode:
    children: dict[int, int] = field(default_factory=dict)
    accepting: bool = False


class TranscriptGrammar:
    """Finite language of admissible action sequences stored as a prefix trie.

    Node 0 is the root. Only prefixes are merged, so the language of the trie
    is exactly the set of distinct input transcripts.
    """

    def __init__(self, paths: Iterable[Sequence[int]]):
        seen: dict[tuple[int, ...], None] = {}
        for p in paths:
            p = tuple(int(a) for a in p)
            if not p:
                raise ValueError("grammar paths must be non-empty")
            seen.setdefault(p, None)
        if not seen:
            raise ValueError("grammar needs at least one transcript")
        self.paths: tuple[tuple[int, ...], ...] = tuple(seen)
        self.nodes: list[_TrieNode] = [_TrieNode()]
        for p in self.paths:
            node = 0
            for a in p:
                nxt = self.nodes[node].children.get(a)
                if nxt is None:
                    nxt = len(self.nodes)
                    self.nodes.append(_TrieNode())
                    self.nodes[node].children[a] = nxt
                node = nxt
            self.nodes[node].accepting = True

    def __len__(self) -> int:
        return len(self.paths)

    def __repr__(self) -> str:
        return f"TranscriptGrammar({len(self.paths)} paths, {len(self.nodes)} nodes)"

    def edges(self) -> list[tuple[int, int, int, int]]:
        """Trie edges as ``(parent, action, child, depth)`` in depth-first order.

        Children are visited in ascending action id so the ordering is
        independent of insertion order.
        """
        out = []

        def walk(node: int, depth: int) -> None:
            for a in sorted(self.nodes[node].children):
                child = self.nodes[node].children[a]
                out.append((node, a, child, depth))
                walk(child, depth + 1)

        walk(0, 0)
        return out

    def language(self) -> set[tuple[int, ...]]:
        out: set[tuple[int, ...]] = set()
        stack: list[tuple[int, tuple[int, ...]]] = [(0, ())]
        while stack:
            node, prefix = stack.pop()
            if self.nodes[node].accepting:
                out.add(prefix)
            for a, child in self.nodes[node].children.items():
                stack.append((child, prefix + (a,)))
        return out

    def accepts(self, actions: Sequence[int]) -> bool:
        node = 0
        for a in actions:
            node = self.nodes[node].children.get(int(a), -1)
            if node < 0:
                return False
        return self.nodes[node].accepting

    @property
    def is_single_path(self) -> bool:
        return len(self.paths) == 1


def build_grammar(transcripts: Iterable[Transcript | Sequence[int]]) -> TranscriptGrammar:
    paths = [t.actions if isinstance(t, Transcript) else t for t in transcripts]
    if not paths:
        raise ValueError("cannot build a grammar from an empty transcript list")
    return TranscriptGrammar(paths)


def single_path_grammar(transcript: Transcript | Sequence[int]) -> TranscriptGrammar:
    actions = transcript.actions if isinstance(transcript, Transcript) else transcript
    return TranscriptGrammar([actions])


def extract_actions(al: StateAlignment) -> Transcript:
    """Collapse an alignment to its action sequence, one entry per instance."""
    al.validate()
    starts, _ = al.instance_bounds()
    return Transcript(al.video_id, tuple(int(a) for a in al.actions[starts]))


def alignment_to_segmentation(al: StateAlignment) -> Segmentation:
    al.validate()
    starts, ends = al.instance_bounds()
    return Segmentation(al.video_id, tuple(
        Segment(int(al.actions[s]), int(s), int(e)) for s, e in zip(starts, ends)))


def uniform_alignment(video_id: str, segments: Sequence[Segment],
                      states_per_action: Sequence[int],
                      visited: Sequence[int] | None = None) -> StateAlignment:
    """Spread each segment's subaction states evenly over its frames.

    Remainder frames go to the earliest states. A segment shorter than its
    chain visits only its first ``length`` states. ``visited`` optionally
    caps the number of states used per segment.
    """
    actions, subs, inst = [], [], []
    for n, seg in enumerate(segments):
        k = states_per_action[seg.action]
        if visited is not None:
            k = min(k, visited[n])
        sizes = [len(c) for c in np.array_split(np.arange(seg.length), k)]
        subs.append(np.repeat(np.arange(k), sizes))
        actions.append(np.full(seg.length, seg.action))
        inst.append(np.full(seg.length, n))
    return StateAlignment(video_id, np.concatenate(actions), np.concatenate(subs), np.concatenate(inst))


# ---------------------------------------------------------------------------
# text formats

def _read_lines(path: str | Path) -> list[tuple[int, list[str]]]:
    out = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        if line.strip() and not line.startswith("#"):
            out.append((lineno, line.rstrip("\n").split("\t")))
    return out


def read_transcript_names(path: str | Path) -> dict[str, list[str]]:
    """Parse ``video_id<TAB>label label ...`` lines into label-name lists."""
    out = {}
    for lineno, fields in _read_lines(path):
        if len(fields) != 2 or not fields[1].split():
            raise ValueError(f"{path}:{lineno}: expected 'video_id<TAB>labels'")
        if fields[0] in out:
            raise ValueError(f"{path}:{lineno}: duplicate video id {fields[0]!r}")
        out[fields[0]] = fields[1].split()
    return out


def read_transcripts(path: str | Path, vocab: LabelVocabulary) -> dict[str, Transcript]:
    return {vid: Transcript(vid, vocab.encode(names))
            for vid, names in read_transcript_names(path).items()}


def write_transcripts(path: str | Path, transcripts: Iterable[Transcript], vocab: LabelVocabulary) -> None:
    lines = [f"{t.video_id}\t{' '.join(vocab.decode(t.actions))}" for t in transcripts]
    Path(path).write_text("\n".join(lines) + "\n")


def read_sparse_labels(path: str | Path, vocab: LabelVocabulary) -> dict[str, list[SparseLabel]]:
    out: dict[str, list[SparseLabel]] = {}
    for lineno, fields in _read_lines(path):
        if len(fields) != 3:
            raise ValueError(f"{path}:{lineno}: expected 'video_id<TAB>frame<TAB>label'")
        out.setdefault(fields[0], []).append(SparseLabel(int(fields[1]), vocab.id(fields[2])))
    for vid, labels in out.items():
        labels.sort(key=lambda s: s.frame)
        frames = [s.frame for s in labels]
        if len(set(frames)) != len(frames):
            raise ValueError(f"{path}: video {vid!r} has repeated annotated frames")
    return out


def write_sparse_labels(path: str | Path, labels: dict[str, list[SparseLabel]], vocab: LabelVocabulary) -> None:
    lines = [f"{vid}\t{s.frame}\t{vocab.name(s.label)}" for vid, ls in labels.items() for s in ls]
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""))


def read_segmentations(path: str | Path, vocab: LabelVocabulary) -> dict[str, Segmentation]:
    rows: dict[str, list[Segment]] = {}
    for lineno, fields in _read_lines(path):
        if len(fields) != 4:
            raise ValueError(f"{path}:{lineno}: expected 'video_id<TAB>label<TAB>start<TAB>end'")
        rows.setdefault(fields[0], []).append(Segment(vocab.id(fields[1]), int(fields[2]), int(fields[3])))
    return {vid: Segmentation(vid, tuple(sorted(segs, key=lambda s: s.start))) for vid, segs in rows.items()}


def write_segmentations(path: str | Path, segmentations: Iterable[Segmentation], vocab: LabelVocabulary) -> None:
    lines = [f"{seg.video_id}\t{vocab.name(s.action)}\t{s.start}\t{s.end}"
             for seg in segmentations for s in seg.segments]
    Path(path).write_text("\n".join(lines) + "\n")
