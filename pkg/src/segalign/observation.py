"""Frame-level observation scorers producing log p(x_t | s).

Three interchangeable scorers are provided: a diagonal Gaussian per state,
a frame-level MLP with one rectified hidden layer, and a single-layer GRU
that reads the 21-frame chunk ending at each frame. Neural posteriors are
turned into scaled likelihoods by dividing by the state prior.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

LOG_2PI = float(np.log(2 * np.pi))
VARIANCE_FLOOR = 1e-4


class ScorerKind(str, Enum):
    GAUSSIAN = "gaussian"
    FEEDFORWARD = "feedforward"
    RECURRENT = "recurrent"

    @classmethod
    def parse(cls, value) -> "ScorerKind":
        if isinstance(value, ScorerKind):
            return value
        aliases = {"gmm": "gaussian", "mlp": "feedforward", "gru": "recurrent", "rnn": "recurrent"}
        key = str(value).strip().lower()
        try:
            return cls(aliases.get(key, key))
        except ValueError:
            raise ValueError(f"unknown scorer {value!r}; choose one of: "
                             + ", ".join(k.value for k in cls)) from None


@dataclass
class ScorerConfig:
    hidden: int = 64
    learning_rate: float = 0.01
    batch_size: int = 32
    epochs: int = 2
    chunk: int = 21
    variance_floor: float = VARIANCE_FLOOR
    seed: int = 0


class StatePrior:
    """Relative frame frequency of each state, floored at ``1 / (10 * S)``."""

    def __init__(self, prob: np.ndarray, floor: float | None = None):
        prob = np.asarray(prob, dtype=np.float64)
        if floor is None:
            floor = 1.0 / (10 * len(prob))
        self.floor = float(floor)
        self.prob = np.maximum(prob, self.floor)
        self.log_prob = np.log(self.prob)

    @classmethod
    def from_targets(cls, targets: Sequence[np.ndarray], num_states: int, floor: float | None = None) -> "StatePrior":
        counts = np.zeros(num_states)
        for y in targets:
            counts += np.bincount(np.asarray(y), minlength=num_states)
        return cls(counts / counts.sum(), floor)

    @classmethod
    def uniform(cls, num_states: int) -> "StatePrior":
        return cls(np.full(num_states, 1.0 / num_states))


# ---------------------------------------------------------------------------
# Gaussian

class GaussianScorer:
    kind = ScorerKind.GAUSSIAN

    def __init__(self, means: np.ndarray, variances: np.ndarray, variance_floor: float = VARIANCE_FLOOR):
        self.means = np.asarray(means, dtype=np.float64)
        self.variance_floor = float(variance_floor)
        self.variances = np.maximum(np.asarray(variances, dtype=np.float64), self.variance_floor)
        self.prior: StatePrior | None = None

    @property
    def num_states(self) -> int:
        return self.means.shape[0]

    @property
    def input_dim(self) -> int:
        return self.means.shape[1]

    @classmethod
    def fit(cls, features: Sequence[np.ndarray], targets: Sequence[np.ndarray], num_states: int,
            variance_floor: float = VARIANCE_FLOOR) -> "GaussianScorer":
        """Per-state sample mean and (biased) variance of the aligned frames.

        States without frames fall back to the global statistics.
        """
        X = np.concatenate([np.asarray(x, dtype=np.float64) for x in features])
        y = np.concatenate([np.asarray(t) for t in targets])
        counts = np.bincount(y, minlength=num_states).astype(np.float64)
        sums = np.zeros((num_states, X.shape[1]))
        sq = np.zeros_like(sums)
        np.add.at(sums, y, X)
        np.add.at(sq, y, X * X)
        seen = counts > 0
        means = np.where(seen[:, None], sums / np.maximum(counts, 1)[:, None], X.mean(axis=0))
        var = np.where(seen[:, None], sq / np.maximum(counts, 1)[:, None] - means ** 2, X.var(axis=0))
        return cls(means, np.maximum(var, 0.0), variance_floor)

    def log_likelihoods(self, x: np.ndarray) -> np.ndarray:
        x = _check_input(x, self.input_dim)
        inv = 1.0 / self.variances
        quad = (x ** 2) @ inv.T - 2 * x @ (self.means * inv).T + np.sum(self.means ** 2 * inv, axis=1)
        return -0.5 * (quad + np.sum(np.log(self.variances), axis=1) + self.input_dim * LOG_2PI)

    def to_dict(self) -> dict:
        return {"kind": self.kind.value, "means": self.means.tolist(),
                "variances": self.variances.tolist(), "variance_floor": self.variance_floor}

    @classmethod
    def from_dict(cls, d: dict) -> "GaussianScorer":
        return cls(np.array(d["means"]), np.array(d["variances"]), d["variance_floor"])


def _check_input(x, dim: int) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != dim:
        raise ValueError(f"expected features of shape (T, {dim}), got {x.shape}")
    return x


# ---------------------------------------------------------------------------
# neural networks

def log_softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


def sigmoid(z: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def chunk_indices(T: int, length: int) -> np.ndarray:
    """Frame indices of the chunk ``[t - length + 1, t]`` for every t.

    Positions before the first frame repeat frame 0.
    """
    idx = np.arange(T)[:, None] + np.arange(-length + 1, 1)[None, :]
    return np.maximum(idx, 0)


class FeedForwardNet:
    """One hidden layer of rectified units over a single frame."""

    def __init__(self, params: dict[str, np.ndarray]):
        self.params = params

    @classmethod
    def init(cls, input_dim: int, hidden: int, num_states: int, rng: np.random.Generator) -> "FeedForwardNet":
        return cls({
            "W1": rng.normal(0.0, np.sqrt(2.0 / input_dim), (input_dim, hidden)),
            "b1": np.zeros(hidden),
            "W2": rng.normal(0.0, np.sqrt(1.0 / hidden), (hidden, num_states)),
            "b2": np.zeros(num_states),
        })

    def logits(self, X: np.ndarray) -> np.ndarray:
        p = self.params
        return np.maximum(X @ p["W1"] + p["b1"], 0.0) @ p["W2"] + p["b2"]

    def loss_and_grads(self, X: np.ndarray, y: np.ndarray) -> tuple[float, dict[str, np.ndarray]]:
        p = self.params
        pre = X @ p["W1"] + p["b1"]
        h = np.maximum(pre, 0.0)
        logp = log_softmax(h @ p["W2"] + p["b2"])
        B = len(y)
        loss = -float(np.mean(logp[np.arange(B), y]))
        d = np.exp(logp)
        d[np.arange(B), y] -= 1.0
        d /= B
        dh = (d @ p["W2"].T) * (pre > 0)
        return loss, {"W1": X.T @ dh, "b1": dh.sum(0), "W2": h.T @ d, "b2": d.sum(0)}


class GRUNet:
    """Single GRU layer over a chunk of frames; softmax on the last hidden state.

    Gate order in the stacked weights is update (z), reset (r), candidate (n).
    """

    def __init__(self, params: dict[str, np.ndarray]):
        self.params = params

    @classmethod
    def init(cls, input_dim: int, hidden: int, num_states: int, rng: np.random.Generator) -> "GRUNet":
        s = 1.0 / np.sqrt(hidden)
        return cls({
            "Wx": rng.uniform(-s, s, (input_dim, 3 * hidden)),
            "Uh": rng.uniform(-s, s, (hidden, 3 * hidden)),
            "bx": np.zeros(3 * hidden),
            "W2": rng.uniform(-s, s, (hidden, num_states)),
            "b2": np.zeros(num_states),
        })

    @property
    def hidden(self) -> int:
        return self.params["Uh"].shape[0]

    def _forward(self, X: np.ndarray, keep: bool):
        p = self.params
        H = self.hidden
        B, C, _ = X.shape
        h = np.zeros((B, H))
        cache = []
        ax_all = X @ p["Wx"] + p["bx"]
        for c in range(C):
            ax = ax_all[:, c]
            zr = sigmoid(ax[:, :2 * H] + h @ p["Uh"][:, :2 * H])
            z, r = zr[:, :H], zr[:, H:]
            n = np.tanh(ax[:, 2 * H:] + (r * h) @ p["Uh"][:, 2 * H:])
            if keep:
                cache.append((h, z, r, n))
            h = (1.0 - z) * n + z * h
        return h, cache

    def logits(self, X: np.ndarray) -> np.ndarray:
        h, _ = self._forward(X, keep=False)
        return h @ self.params["W2"] + self.params["b2"]

    def loss_and_grads(self, X: np.ndarray, y: np.ndarray) -> tuple[float, dict[str, np.ndarray]]:
        p = self.params
        H = self.hidden
        B, C, _ = X.shape
        hT, cache = self._forward(X, keep=True)
        logp = log_softmax(hT @ p["W2"] + p["b2"])
        loss = -float(np.mean(logp[np.arange(B), y]))
        d = np.exp(logp)
        d[np.arange(B), y] -= 1.0
        d /= B
        g = {"W2": hT.T @ d, "b2": d.sum(0), "Wx": np.zeros_like(p["Wx"]),
             "Uh": np.zeros_like(p["Uh"]), "bx": np.zeros_like(p["bx"])}
        U_zr, U_n = p["Uh"][:, :2 * H], p["Uh"][:, 2 * H:]
        dh = d @ p["W2"].T
        dax = np.empty((B, C, 3 * H))
        for c in range(C - 1, -1, -1):
            h, z, r, n = cache[c]
            dn = dh * (1.0 - z)
            dz = dh * (h - n)
            dh_prev = dh * z
            dan = dn * (1.0 - n * n)
            drh = dan @ U_n.T
            g["Uh"][:, 2 * H:] += (r * h).T @ dan
            dh_prev += drh * r
            dzr = np.concatenate([dz * z * (1.0 - z), drh * h * r * (1.0 - r)], axis=1)
            g["Uh"][:, :2 * H] += h.T @ dzr
            dh_prev += dzr @ U_zr.T
            dax[:, c, :2 * H] = dzr
            dax[:, c, 2 * H:] = dan
            dh = dh_prev
        g["Wx"] = X.reshape(B * C, -1).T @ dax.reshape(B * C, -1)
        g["bx"] = dax.sum(axis=(0, 1))
        return loss, g


_NETS = {ScorerKind.FEEDFORWARD: FeedForwardNet, ScorerKind.RECURRENT: GRUNet}


class NeuralScorer:
    """Trained network plus input normalisation and the state prior."""

    def __init__(self, kind: ScorerKind, net, mean: np.ndarray, std: np.ndarray,
                 prior: StatePrior, chunk: int = 21):
        self.kind = ScorerKind.parse(kind)
        self.net = net
        self.mean = np.asarray(mean, dtype=np.float64)
        self.std = np.asarray(std, dtype=np.float64)
        self.prior = prior
        self.chunk = int(chunk)

    @property
    def input_dim(self) -> int:
        return self.mean.shape[0]

    @property
    def num_states(self) -> int:
        return self.net.params["b2"].shape[0]

    def _inputs(self, x: np.ndarray) -> np.ndarray:
        z = (x - self.mean) / self.std
        if self.kind is ScorerKind.RECURRENT:
            return z[chunk_indices(len(z), self.chunk)]
        return z

    def log_posteriors(self, x: np.ndarray, batch: int = 1024) -> np.ndarray:
        x = _check_input(x, self.input_dim)
        inp = self._inputs(x)
        return np.concatenate([log_softmax(self.net.logits(inp[i:i + batch]))
                               for i in range(0, len(inp), batch)])

    def log_likelihoods(self, x: np.ndarray) -> np.ndarray:
        """log p(s|x_t) - log p(s); the Bayes constant is dropped."""
        return self.log_posteriors(x) - self.prior.log_prob

    def to_dict(self) -> dict:
        return {"kind": self.kind.value, "chunk": self.chunk, "mean": self.mean.tolist(),
                "std": self.std.tolist(), "prior": self.prior.prob.tolist(), "prior_floor": self.prior.floor,
                "params": {k: v.tolist() for k, v in self.net.params.items()}}

    @classmethod
    def from_dict(cls, d: dict) -> "NeuralScorer":
        kind = ScorerKind.parse(d["kind"])
        net = _NETS[kind]({k: np.array(v, dtype=np.float64) for k, v in d["params"].items()})
        return cls(kind, net, np.array(d["mean"]), np.array(d["std"]),
                   StatePrior(np.array(d["prior"]), d["prior_floor"]), d["chunk"])


def train_network(net, inputs: np.ndarray, targets: np.ndarray, config: ScorerConfig,
                  rng: np.random.Generator) -> list[float]:
    """Minibatch SGD on the cross-entropy; returns mean loss per epoch."""
    history = []
    n = len(targets)
    for _ in range(config.epochs):
        order = rng.permutation(n)
        total = 0.0
        for i in range(0, n, config.batch_size):
            idx = order[i:i + config.batch_size]
            loss, grads = net.loss_and_grads(inputs[idx], targets[idx])
            for k, gk in grads.items():
                net.params[k] -= config.learning_rate * gk
            total += loss * len(idx)
        history.append(total / n)
    return history


def fit_neural(kind, features: Sequence[np.ndarray], targets: Sequence[np.ndarray], num_states: int,
               config: ScorerConfig | None = None) -> NeuralScorer:
    """Train a fresh network from random weights on frame/state pairs."""
    kind = ScorerKind.parse(kind)
    config = config or ScorerConfig()
    rng = np.random.default_rng(config.seed)
    feats = [np.asarray(x, dtype=np.float64) for x in features]
    allx = np.concatenate(feats)
    mean = allx.mean(axis=0)
    std = np.maximum(allx.std(axis=0), 1e-6)
    net = _NETS[kind].init(allx.shape[1], config.hidden, num_states, rng)
    scorer = NeuralScorer(kind, net, mean, std, StatePrior.from_targets(targets, num_states), config.chunk)
    inputs = np.concatenate([scorer._inputs(x) for x in feats])
    y = np.concatenate([np.asarray(t, dtype=np.int64) for t in targets])
    scorer.history = train_network(net, inputs, y, config, rng)
    return scorer


def fit_scorer(kind, features: Sequence[np.ndarray], targets: Sequence[np.ndarray], num_states: int,
               config: ScorerConfig | None = None):
    """Fit any scorer kind; ``targets`` are per-frame global state ids.

    Returns the scorer and the state prior (also attached as ``scorer.prior``).
    """
    kind = ScorerKind.parse(kind)
    config = config or ScorerConfig()
    if kind is ScorerKind.GAUSSIAN:
        scorer = GaussianScorer.fit(features, targets, num_states, config.variance_floor)
        scorer.prior = StatePrior.from_targets(targets, num_states)
    else:
        scorer = fit_neural(kind, features, targets, num_states, config)
    return scorer, scorer.prior


def score(scorer, x: np.ndarray) -> np.ndarray:
    """``T x num_states`` matrix of log observation scores."""
    return scorer.log_likelihoods(x)


def scorer_to_dict(scorer) -> dict:
    d = scorer.to_dict()
    if isinstance(scorer, GaussianScorer) and scorer.prior is not None:
        d["prior"] = scorer.prior.prob.tolist()
        d["prior_floor"] = scorer.prior.floor
    return d


def scorer_from_dict(d: dict):
    kind = ScorerKind.parse(d["kind"])
    if kind is ScorerKind.GAUSSIAN:
        scorer = GaussianScorer.from_dict(d)
        if "prior" in d:
            scorer.prior = StatePrior(np.array(d["prior"]), d["prior_floor"])
        return scorer
    return NeuralScorer.from_dict(d)


def gradient_check(net, X: np.ndarray, y: np.ndarray, step: float = 1e-5) -> float:
    """Max relative error between analytic and central-difference gradients."""
    _, grads = net.loss_and_grads(X, y)
    worst = 0.0
    for name, param in net.params.items():
        it = np.nditer(param, flags=["multi_index"])
        for _ in it:
            i = it.multi_index
            orig = param[i]
            param[i] = orig + step
            up, _ = net.loss_and_grads(X, y)
            param[i] = orig - step
            down, _ = net.loss_and_grads(X, y)
            param[i] = orig
            num = (up - down) / (2 * step)
            ana = grads[name][i]
            denom = max(abs(num), abs(ana), 1e-6)
            worst = max(worst, abs(num - ana) / denom)
    return worst


__all__ = [
    "ScorerKind", "ScorerConfig", "StatePrior", "GaussianScorer", "FeedForwardNet", "GRUNet",
    "NeuralScorer", "fit_scorer", "fit_neural", "score", "gradient_check", "chunk_indices",
    "scorer_to_dict", "scorer_from_dict", "train_network",
]
