"""Grammar-constrained Viterbi decoding with a run-length prior.

The grammar trie is expanded into a network of HMM states: every trie edge
labelled with action ``a`` contributes the ``K_a`` subaction states of ``a``.
Because the trie is a tree, each network state has at most one predecessor
besides itself. Hypotheses are ``(network state, run length)`` pairs with
run lengths tracked up to a cap; the bucket at the cap absorbs all longer
runs.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .core import (Segmentation, StateAlignment, Transcript, TranscriptGrammar,
                   alignment_to_segmentation, extract_actions, single_path_grammar)
from .hmm import HmmModel
from .lengthprior import PriorKind, log_prior_value, log_ratio_table, saturation_length

NEG_INF = -np.inf


class InfeasibleError(ValueError):
    """No grammar-consistent path with finite score exists."""


class DecodeMode(str, Enum):
    SEGMENTATION = "segment"
    ALIGNMENT = "align"


@dataclass(frozen=True)
class DecodeRequest:
    scores: np.ndarray
    grammar: TranscriptGrammar
    hmm: HmmModel
    prior: PriorKind = PriorKind.NONE
    mode: DecodeMode = DecodeMode.SEGMENTATION
    video_id: str = ""

    def __post_init__(self):
        object.__setattr__(self, "prior", PriorKind.parse(self.prior))
        object.__setattr__(self, "mode", DecodeMode(self.mode))
        if self.mode is DecodeMode.ALIGNMENT and not self.grammar.is_single_path:
            raise ValueError("alignment mode needs a single-path grammar")


@dataclass(frozen=True)
class DecodeResult:
    alignment: StateAlignment
    segmentation: Segmentation
    log_score: float
    consistent: bool

    @property
    def transcript(self) -> Transcript:
        return extract_actions(self.alignment)


@dataclass(frozen=True)
class _Network:
    state: np.ndarray     # model state id per network state
    action: np.ndarray
    sub: np.ndarray
    depth: np.ndarray     # action instance index along the path
    pred: np.ndarray      # predecessor network state, -1 for path starts
    accepting: np.ndarray
    min_frames: int       # fewest frames of any complete path


def _build_network(grammar: TranscriptGrammar, hmm: HmmModel) -> _Network:
    vocab = hmm.vocab
    state, action, sub, depth, pred, acc = [], [], [], [], [], []
    last_of_node = {0: -1}
    for parent, a, child, d in grammar.edges():
        if a >= vocab.num_actions:
            raise ValueError(f"grammar uses action {a} outside the model's {vocab.num_actions} actions")
        prev = last_of_node[parent]
        for k in range(vocab.states_per_action[a]):
            state.append(vocab.global_id(a, k))
            action.append(a)
            sub.append(k)
            depth.append(d)
            pred.append(prev)
            acc.append(False)
            prev = len(state) - 1
        last_of_node[child] = prev
        acc[prev] = grammar.nodes[child].accepting
    min_frames = min(vocab.transcript_states(p) for p in grammar.paths)
    arr = lambda x: np.asarray(x, dtype=np.int64)
    return _Network(arr(state), arr(action), arr(sub), arr(depth), arr(pred),
                    np.asarray(acc, dtype=bool), min_frames)


def default_max_run(hmm: HmmModel, prior) -> int:
    """Run-length cap that keeps decoding exact.

    One past the longest saturation length over all states: from there on
    every ratio factor equals 1, so merging longer runs loses nothing.
    """
    prior = PriorKind.parse(prior)
    if prior is PriorKind.NONE:
        return 1
    lens = np.unique(hmm.mean_length)
    return max(saturation_length(prior, m) for m in lens) + 1


def _check_scores(scores: np.ndarray, num_states: int, video_id: str) -> np.ndarray:
    scores = np.asarray(scores, dtype=np.float64)
    if scores.ndim != 2 or scores.shape[1] != num_states:
        raise ValueError(f"{video_id}: scores must be T x {num_states}, got {scores.shape}")
    if np.isnan(scores).any() or np.isposinf(scores).any():
        raise ValueError(f"{video_id}: scores contain NaN or +inf")
    dead = np.flatnonzero(np.all(np.isneginf(scores), axis=1))
    if len(dead):
        raise InfeasibleError(f"{video_id}: every state has -inf score at frame {int(dead[0])}")
    return scores


def viterbi(req: DecodeRequest, max_run: int | None = None, beam: float | None = None) -> DecodeResult:
    """Best grammar-consistent monotone alignment under the regularized objective.

    ``max_run`` overrides the run-length cap (beyond the cap the ratio factor
    is held at its value at the cap). ``beam`` prunes hypotheses scoring more
    than ``beam`` below the frame's best; exact decoding when ``None``.
    Ties prefer the longer run (a self loop), then the lower state id.
    """
    hmm = req.hmm
    scores = _check_scores(req.scores, hmm.num_states, req.video_id)
    T = scores.shape[0]
    net = _build_network(req.grammar, hmm)
    if T < net.min_frames:
        raise InfeasibleError(
            f"{req.video_id}: {T} frames cannot cover the shortest grammar path ({net.min_frames} states)")
    L = default_max_run(hmm, req.prior) if max_run is None else int(max_run)
    if L < 1:
        raise ValueError("max_run must be >= 1")

    g = net.state
    J = len(g)
    ratio = log_ratio_table(req.prior, hmm.mean_length, L)[g]      # (J, L)
    hold = ratio[:, L - 1]
    loop = hmm.log_self[g]
    has_pred = net.pred >= 0
    pred = np.where(has_pred, net.pred, 0)
    exit_ = hmm.log_advance[g]

    # back[t, j, l] >= 0: self loop from bucket back; < 0: entry from pred with bucket -back-1
    back = np.zeros((T, J, L), dtype=np.int16 if L < 32000 else np.int32)
    Q = np.full((J, L), NEG_INF)
    Q[~has_pred, 0] = scores[0, g[~has_pred]] + ratio[~has_pred, 0]
    back[0, :, 0] = -1
    rev = np.arange(L)[::-1]

    with np.errstate(invalid="ignore"):
        for t in range(1, T):
            obs = scores[t, g]
            # best bucket per state, preferring the longest run on ties
            best_l = (L - 1) - np.argmax(Q[:, ::-1], axis=1)
            best = Q[np.arange(J), best_l]
            new = np.full((J, L), NEG_INF)
            bp = np.zeros((J, L), dtype=back.dtype)

            entry = np.where(has_pred, best[pred] + exit_[pred], NEG_INF) + obs + ratio[:, 0]
            new[:, 0] = entry
            bp[:, 0] = -best_l[pred] - 1
            if L >= 2:
                stay = Q[:, :-1] + loop[:, None] + obs[:, None] + ratio[:, 1:]
                new[:, 1:] = stay
                bp[:, 1:] = np.arange(L - 1)[None, :]
            held = Q[:, L - 1] + loop + obs + hold
            take = held >= new[:, L - 1]
            new[take, L - 1] = held[take]
            bp[take, L - 1] = L - 1

            if beam is not None:
                top = new.max()
                if np.isfinite(top):
                    new[new < top - beam] = NEG_INF
            Q = new
            back[t] = bp

    final = np.where(net.accepting[:, None], Q, NEG_INF)
    top = final.max()
    if not np.isfinite(top):
        raise InfeasibleError(f"{req.video_id}: no grammar path has a finite score")
    cand = np.argwhere(final == top)
    # longer run first, then lower model state id, then lower network index
    j, l = min(((int(c[0]), int(c[1])) for c in cand), key=lambda c: (-c[1], g[c[0]], c[0]))

    path = np.empty(T, dtype=np.int64)
    for t in range(T - 1, -1, -1):
        path[t] = j
        b = int(back[t, j, l])
        if b >= 0:
            l = b
        else:
            l = -b - 1
            j = int(net.pred[j])
    alignment = StateAlignment(req.video_id, net.action[path], net.sub[path], net.depth[path])
    rescored = path_log_score(scores, alignment, hmm, req.prior)
    consistent = (net.pred[path[0]] < 0 and bool(net.accepting[path[-1]])
                  and math.isclose(rescored, float(top), rel_tol=1e-9, abs_tol=1e-9))
    if max_run is not None or beam is not None:
        consistent = consistent or np.isfinite(rescored)
    return DecodeResult(alignment, alignment_to_segmentation(alignment), float(top), bool(consistent))


def path_log_score(scores: np.ndarray, al: StateAlignment, hmm: HmmModel, prior) -> float:
    """Score of a given alignment under the regularized objective.

    Sums observation scores, self/advance transitions and the log prior of
    every state run, independently of the decoding recursion.
    """
    al.validate()
    ids = al.state_ids(hmm.vocab)
    T = len(ids)
    total = float(np.sum(np.asarray(scores)[np.arange(T), ids]))
    starts, ends = al.run_bounds()
    with np.errstate(invalid="ignore"):
        for s, e in zip(starts, ends):
            state = ids[s]
            total += (e - s) * hmm.log_self[state] if e > s else 0.0
            if e < T - 1:
                total += hmm.log_advance[state]
            total += log_prior_value(prior, e - s + 1, hmm.mean_length[state])
    return float(total)


def align_to_transcript(scores: np.ndarray, transcript: Transcript, hmm: HmmModel,
                        prior=PriorKind.NONE, **kwargs) -> DecodeResult:
    """Forced alignment to a known action sequence."""
    req = DecodeRequest(scores, single_path_grammar(transcript), hmm, prior,
                        DecodeMode.ALIGNMENT, video_id=transcript.video_id)
    return viterbi(req, **kwargs)


# ---------------------------------------------------------------------------
# exhaustive oracle

BRUTE_FORCE_MAX_FRAMES = 14
BRUTE_FORCE_MAX_STATES = 8


def brute_force_decode(req: DecodeRequest) -> DecodeResult:
    """Enumerate every grammar-consistent monotone alignment and keep the best.

    Only for tiny instances; used to check :func:`viterbi`.
    """
    scores = np.asarray(req.scores, dtype=np.float64)
    T = scores.shape[0]
    hmm = req.hmm
    if T > BRUTE_FORCE_MAX_FRAMES or hmm.num_states > BRUTE_FORCE_MAX_STATES:
        raise ValueError(f"instance too large for exhaustive decoding (T={T}, states={hmm.num_states})")
    vocab = hmm.vocab
    best_score, best = NEG_INF, None
    for path in sorted(req.grammar.language()):
        seq = [(a, k, n) for n, a in enumerate(path) for k in range(vocab.states_per_action[a])]
        S = len(seq)
        if S > T:
            continue
        for cuts in itertools.combinations(range(1, T), S - 1):
            bounds = (0,) + cuts + (T,)
            total = 0.0
            for i, (a, k, _) in enumerate(seq):
                s = vocab.global_id(a, k)
                length = bounds[i + 1] - bounds[i]
                total += float(np.sum(scores[bounds[i]:bounds[i + 1], s]))
                if length > 1:
                    total += (length - 1) * float(hmm.log_self[s])
                if i < S - 1:
                    total += float(hmm.log_advance[s])
                total += float(log_prior_value(req.prior, length, hmm.mean_length[s]))
            if total > best_score:
                best_score = total
                lengths = np.diff(bounds)
                best = StateAlignment(req.video_id,
                                      np.repeat([x[0] for x in seq], lengths),
                                      np.repeat([x[1] for x in seq], lengths),
                                      np.repeat([x[2] for x in seq], lengths))
    if best is None or not np.isfinite(best_score):
        raise InfeasibleError(f"{req.video_id}: no grammar path has a finite score")
    return DecodeResult(best, alignment_to_segmentation(best), float(best_score), True)
