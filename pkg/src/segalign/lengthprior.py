"""Monotone length priors over state run lengths.

Every prior is a non-increasing function of the current run length ``l`` of
a state, scaled so that its plateau is 1 and floored at ``EPSILON``. Decoding
uses the ratio form ``p(l) / p(l - 1)`` so that the product over a run of
length ``L`` telescopes to ``p(L)``.
"""
from __future__ import annotations

import math
from enum import Enum

import numpy as np

EPSILON = 1e-3
LOG_EPSILON = math.log(EPSILON)


class PriorKind(str, Enum):
    NONE = "none"
    BOX = "box"
    LINEAR = "linear"
    HALF_POISSON = "half-poisson"
    HALF_GAUSSIAN = "half-gaussian"

    @classmethod
    def parse(cls, value: "str | PriorKind") -> "PriorKind":
        if isinstance(value, PriorKind):
            return value
        key = str(value).strip().lower().replace("_", "-")
        if key == "linear-decay":
            key = "linear"
        try:
            return cls(key)
        except ValueError:
            choices = ", ".join(k.value for k in cls)
            raise ValueError(f"unknown length prior {value!r}; choose one of: {choices}") from None


def log_prior_value(kind, l, mean_len):
    """Log of the length prior for run length(s) ``l`` given mean state length.

    Vectorised over ``l``. ``mean_len`` must be positive.
    """
    kind = PriorKind.parse(kind)
    if not mean_len > 0:
        raise ValueError(f"mean length must be positive, got {mean_len}")
    l = np.asarray(l, dtype=np.float64)
    if kind is PriorKind.NONE:
        out = np.zeros_like(l)
    elif kind is PriorKind.BOX:
        out = np.where(l <= 2 * mean_len, 0.0, LOG_EPSILON)
    elif kind is PriorKind.LINEAR:
        with np.errstate(divide="ignore", invalid="ignore"):
            ramp = np.log(np.clip(1.0 - (l - mean_len) / mean_len, 0.0, None))
        out = np.where(l <= mean_len, 0.0, np.where(l < 2 * mean_len, ramp, LOG_EPSILON))
    elif kind is PriorKind.HALF_POISSON:
        # normalised by the pmf at the mode (>= 1 so the plateau at l=1 exists)
        mode = max(1, math.floor(mean_len))
        lg = np.vectorize(math.lgamma, otypes=[np.float64])
        tail = (l - mode) * math.log(mean_len) - lg(l + 1.0) + math.lgamma(mode + 1.0)
        out = np.where(l <= mean_len, 0.0, np.minimum(tail, 0.0))
    else:
        out = -(l ** 2) / mean_len ** 2
    out = np.maximum(out, LOG_EPSILON)
    return float(out) if out.ndim == 0 else out


def prior_value(kind, l, mean_len):
    """Length prior in the probability domain, in ``[EPSILON, 1]``."""
    return np.exp(log_prior_value(kind, l, mean_len))


def run_length_update(same_state: bool, prev_l: int | None) -> int:
    """Recursive run length: ``prev_l + 1`` when staying, 1 on a change or at t=0."""
    if prev_l is None or not same_state:
        return 1
    return prev_l + 1


def log_ratio_prior(kind, l, mean_len):
    """Log factor folded into the Viterbi recursion at run length ``l``.

    ``log p(1)`` on state entry, ``log p(l) - log p(l - 1)`` on a self loop.
    """
    l = np.asarray(l, dtype=np.float64)
    cur = np.asarray(log_prior_value(kind, l, mean_len))
    prev = np.where(l >= 2, log_prior_value(kind, np.maximum(l - 1, 1), mean_len), 0.0)
    out = cur - prev
    return float(out) if out.ndim == 0 else out


def ratio_prior(kind, l, mean_len):
    return np.exp(log_ratio_prior(kind, l, mean_len))


def saturation_length(kind, mean_len) -> int:
    """Smallest run length from which the prior stays constant.

    Past this length every ratio factor is exactly 1, so a decoder that
    tracks run lengths up to it (and merges longer runs into one bucket)
    is exact.
    """
    kind = PriorKind.parse(kind)
    if kind is PriorKind.NONE:
        return 1
    hi = max(8, int(math.ceil(4 * mean_len)) + 2)
    while True:
        vals = log_prior_value(kind, np.arange(1, hi + 1), mean_len)
        hit = np.flatnonzero(vals <= LOG_EPSILON)
        if len(hit):
            return int(hit[0]) + 1
        hi *= 2


def log_ratio_table(kind, mean_lengths, max_run: int) -> np.ndarray:
    """``(num_states, max_run)`` table of log ratio factors for l = 1..max_run."""
    ls = np.arange(1, max_run + 1)
    return np.stack([np.atleast_1d(log_ratio_prior(kind, ls, m)) for m in np.asarray(mean_lengths)])
