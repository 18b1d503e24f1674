"""Feed-forward subaction HMMs: transition counting and state length statistics."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import StateAlignment, StateVocabulary

# Self-loop probability for states never seen as a transition source.
UNSEEN_SELF_PROB = 0.5


@dataclass(frozen=True, eq=False)
class HmmModel:
    """Per-action left-to-right chains over subaction states.

    Each state either loops (``log_self``) or advances (``log_advance``). For
    the last state of a chain advancing means leaving the action; the
    follow-up action is then chosen by the grammar with probability 1.
    """

    vocab: StateVocabulary
    log_self: np.ndarray
    log_advance: np.ndarray
    mean_length: np.ndarray

    def __post_init__(self):
        for name in ("log_self", "log_advance", "mean_length"):
            arr = np.array(getattr(self, name), dtype=np.float64)
            if arr.shape != (self.vocab.num_states,):
                raise ValueError(f"{name} must have one entry per state")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def num_states(self) -> int:
        return self.vocab.num_states

    @property
    def states_per_action(self) -> tuple[int, ...]:
        return self.vocab.states_per_action

    def to_dict(self) -> dict:
        return {
            "states_per_action": list(self.vocab.states_per_action),
            "log_self": [float(v) for v in self.log_self],
            "log_advance": [float(v) for v in self.log_advance],
            "mean_length": [float(v) for v in self.mean_length],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "HmmModel":
        return cls(StateVocabulary(d["states_per_action"]), np.array(d["log_self"]),
                   np.array(d["log_advance"]), np.array(d["mean_length"]))

    @classmethod
    def from_probabilities(cls, vocab: StateVocabulary, self_prob, mean_length=None) -> "HmmModel":
        p = np.asarray(self_prob, dtype=np.float64)
        if mean_length is None:
            mean_length = np.ones(vocab.num_states)
        with np.errstate(divide="ignore"):
            return cls(vocab, np.log(p), np.log1p(-p), mean_length)


def _transition_counts(alignments: Sequence[StateAlignment], vocab: StateVocabulary):
    stay = np.zeros(vocab.num_states, dtype=np.int64)
    leave = np.zeros(vocab.num_states, dtype=np.int64)
    for al in alignments:
        ids = al.state_ids(vocab)
        same = (al.instances[1:] == al.instances[:-1]) & (al.substates[1:] == al.substates[:-1])
        stay += np.bincount(ids[:-1][same], minlength=vocab.num_states)
        leave += np.bincount(ids[:-1][~same], minlength=vocab.num_states)
    return stay, leave


def _run_stats(alignments: Sequence[StateAlignment], vocab: StateVocabulary):
    frames = np.zeros(vocab.num_states, dtype=np.int64)
    runs = np.zeros(vocab.num_states, dtype=np.int64)
    for al in alignments:
        ids = al.state_ids(vocab)
        frames += np.bincount(ids, minlength=vocab.num_states)
        starts, _ = al.run_bounds()
        runs += np.bincount(ids[starts], minlength=vocab.num_states)
    return frames, runs


def estimate_transitions(alignments: Sequence[StateAlignment], vocab: StateVocabulary,
                         default_length: float = 10.0) -> HmmModel:
    """Relative-frequency self/advance probabilities pooled over all videos.

    Mean state lengths are filled in as well (see :func:`mean_state_lengths`).
    """
    if not alignments:
        raise ValueError("cannot estimate transitions from an empty alignment set")
    stay, leave = _transition_counts(alignments, vocab)
    total = stay + leave
    p_self = np.where(total > 0, stay / np.maximum(total, 1), UNSEEN_SELF_PROB)
    with np.errstate(divide="ignore"):
        log_self = np.log(p_self)
        log_adv = np.log(np.where(total > 0, leave / np.maximum(total, 1), 1.0 - UNSEEN_SELF_PROB))
    return HmmModel(vocab, log_self, log_adv, mean_state_lengths(alignments, vocab, default_length))


def mean_state_lengths(alignments: Sequence[StateAlignment], vocab: StateVocabulary,
                       default_length: float = 10.0) -> np.ndarray:
    """Aligned frames per state divided by its number of maximal runs.

    States that never occur get ``default_length`` (the frames-per-subaction
    setting of the training loop).
    """
    frames, runs = _run_stats(alignments, vocab)
    return np.where(runs > 0, frames / np.maximum(runs, 1), float(default_length))


def skip_state_fraction(alignments: Sequence[StateAlignment]) -> float:
    """Fraction of visited state instances that last exactly one frame."""
    single = total = 0
    for al in alignments:
        starts, ends = al.run_bounds()
        single += int(np.sum(starts == ends))
        total += len(starts)
    return single / total if total else 0.0
