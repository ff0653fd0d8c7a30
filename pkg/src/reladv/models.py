"""Small differentiable classifiers and the four training schemes.

Every classifier works on batches (``X`` of shape ``(n, d)``) and exposes
``predict``, ``loss`` (per-sample negative log-likelihood) and
``grad_input``. Passing a single 1-D vector returns a scalar result.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DimensionMismatch, InvalidConfig, MissingNormalizer

log = logging.getLogger(__name__)

SCHEMES = ("natural", "np", "adversarial", "unified")


def _batch(X, d):
    X = np.asarray(X, dtype=np.float64)
    single = X.ndim == 1
    if single:
        X = X[None, :]
    if X.ndim != 2 or X.shape[1] != d:
        raise DimensionMismatch(f"expected inputs of dimension {d}, got shape {X.shape}")
    return X, single


def _labels(y, n):
    y = np.asarray(y, dtype=np.int64).reshape(-1)
    if y.size == 1 and n > 1:
        y = np.full(n, y[0])
    if y.size != n:
        raise DimensionMismatch(f"{y.size} labels for {n} inputs")
    return y


def _log_softmax(logits):
    m = logits.max(axis=1, keepdims=True)
    z = logits - m
    return z - np.log(np.exp(z).sum(axis=1, keepdims=True))


class Classifier:
    """Shared batch plumbing; subclasses provide ``logits`` and ``_backward``."""

    d: int
    n_classes: int = 2

    def logits(self, X):
        raise NotImplementedError

    def predict(self, X):
        X, single = _batch(X, self.d)
        # argmax returns the lowest index among ties
        out = np.argmax(self.logits(X), axis=1)
        return int(out[0]) if single else out

    def loss(self, X, y):
        X, single = _batch(X, self.d)
        y = _labels(y, X.shape[0])
        nll = -_log_softmax(self.logits(X))[np.arange(X.shape[0]), y]
        return float(nll[0]) if single else nll

    def zero_one_loss(self, X, y):
        X, single = _batch(X, self.d)
        y = _labels(y, X.shape[0])
        out = (np.argmax(self.logits(X), axis=1) != y).astype(np.float64)
        return float(out[0]) if single else out

    def grad_input(self, X, y):
        X, single = _batch(X, self.d)
        y = _labels(y, X.shape[0])
        g, _ = self._backward(X, y, want_params=False)
        return g[0] if single else g

    def param_grads(self, X, y):
        """Gradients of the mean NLL over the batch, one array per parameter."""
        X, _ = _batch(X, self.d)
        y = _labels(y, X.shape[0])
        _, grads = self._backward(X, y, want_params=True)
        return grads


class LinearModel(Classifier):
    """Linear threshold model; class-1 probability is the logistic of the score."""

    def __init__(self, w, b=0.0):
        self.w = np.asarray(w, dtype=np.float64).copy()
        self.b = np.float64(b)
        self.d = self.w.size
        if not (np.isfinite(self.w).all() and np.isfinite(self.b)):
            raise InvalidConfig("linear model parameters must be finite")

    @classmethod
    def init(cls, d, rng):
        bound = 1.0 / np.sqrt(d)
        return cls(rng.uniform(-bound, bound, d), rng.uniform(-bound, bound))

    def scores(self, X):
        X, single = _batch(X, self.d)
        s = X @ self.w + self.b
        return float(s[0]) if single else s

    def logits(self, X):
        s = X @ self.w + self.b
        return np.stack([np.zeros_like(s), s], axis=1)

    def _backward(self, X, y, want_params):
        s = X @ self.w + self.b
        resid = 1.0 / (1.0 + np.exp(-s)) - y
        g = resid[:, None] * self.w[None, :]
        if not want_params:
            return g, None
        n = X.shape[0]
        return g, [X.T @ resid / n, np.array(resid.mean())]

    @property
    def params(self):
        return [self.w, np.atleast_1d(self.b)]

    def set_params(self, params):
        self.w = np.array(params[0], dtype=np.float64)
        self.b = np.float64(np.asarray(params[1]).reshape(-1)[0])

    def architecture(self):
        return {"type": "linear", "d": self.d}


class MlpModel(Classifier):
    """Fully connected ReLU network with a softmax output layer."""

    def __init__(self, weights, biases):
        self.weights = [np.asarray(W, dtype=np.float64).copy() for W in weights]
        self.biases = [np.asarray(b, dtype=np.float64).copy() for b in biases]
        for (W, b), W2 in zip(zip(self.weights, self.biases), self.weights[1:] + [None]):
            if W.shape[1] != b.size or (W2 is not None and W2.shape[0] != W.shape[1]):
                raise InvalidConfig("incompatible layer dimensions")
        self.sizes = [self.weights[0].shape[0]] + [W.shape[1] for W in self.weights]
        self.d = self.sizes[0]
        self.n_classes = self.sizes[-1]

    @classmethod
    def init(cls, sizes, rng):
        weights, biases = [], []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            bound = 1.0 / np.sqrt(fan_in)
            weights.append(rng.uniform(-bound, bound, (fan_in, fan_out)))
            biases.append(rng.uniform(-bound, bound, fan_out))
        return cls(weights, biases)

    @classmethod
    def zeros(cls, sizes):
        return cls([np.zeros((a, b)) for a, b in zip(sizes[:-1], sizes[1:])],
                   [np.zeros(b) for b in sizes[1:]])

    def _forward(self, X):
        acts = [X]
        h = X
        last = len(self.weights) - 1
        for i, (W, b) in enumerate(zip(self.weights, self.biases)):
            h = h @ W + b
            if i < last:
                h = np.maximum(h, 0.0)
            acts.append(h)
        return acts

    def logits(self, X):
        return self._forward(X)[-1]

    def _backward(self, X, y, want_params):
        acts = self._forward(X)
        n = X.shape[0]
        delta = np.exp(_log_softmax(acts[-1]))
        delta[np.arange(n), y] -= 1.0
        grads_W, grads_b = [], []
        for i in range(len(self.weights) - 1, -1, -1):
            if want_params:
                grads_W.append(acts[i].T @ delta / n)
                grads_b.append(delta.mean(axis=0))
            delta = delta @ self.weights[i].T
            if i > 0:
                delta = delta * (acts[i] > 0)
        if not want_params:
            return delta, None
        grads = []
        for gW, gb in zip(reversed(grads_W), reversed(grads_b)):
            grads += [gW, gb]
        return delta, grads

    @property
    def params(self):
        out = []
        for W, b in zip(self.weights, self.biases):
            out += [W, b]
        return out

    def set_params(self, params):
        self.weights = [np.array(p, dtype=np.float64) for p in params[0::2]]
        self.biases = [np.array(p, dtype=np.float64) for p in params[1::2]]

    def architecture(self):
        return {"type": "mlp", "sizes": list(self.sizes)}


class NormalizedClassifier(Classifier):
    """``f(N(x))``: predictions and losses on the normal form of the input.

    ``grad_input`` evaluates the model gradient at ``N(x)`` and maps it back
    through the normalizer's ``pullback``.
    """

    def __init__(self, model, normalizer):
        self.model = model
        self.normalizer = normalizer
        self.d = model.d
        self.n_classes = model.n_classes

    def _norm(self, X):
        X, single = _batch(X, self.d)
        return self.normalizer.batch(X.astype(np.uint8)), single

    def predict(self, X):
        Z, single = self._norm(X)
        out = self.model.predict(Z)
        return int(out[0]) if single else out

    def loss(self, X, y):
        Z, single = self._norm(X)
        out = self.model.loss(Z, y)
        return float(out[0]) if single else out

    def zero_one_loss(self, X, y):
        Z, single = self._norm(X)
        out = self.model.zero_one_loss(Z, y)
        return float(out[0]) if single else out

    def grad_input(self, X, y):
        X2, single = _batch(X, self.d)
        Z = self.normalizer.batch(X2.astype(np.uint8))
        G = self.normalizer.pullback(X2, self.model.grad_input(Z, y))
        return G[0] if single else G


def predict(model, x):
    return model.predict(x)


def loss(model, x, y):
    return model.loss(x, y)


def zero_one_loss(model, x, y):
    return model.zero_one_loss(x, y)


def grad_input(model, x, y):
    return model.grad_input(x, y)


# datasets -------------------------------------------------------------------


@dataclass
class LabeledDataset:
    X: np.ndarray
    y: np.ndarray
    labels: tuple = (0, 1)

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=np.uint8)
        self.y = np.asarray(self.y, dtype=np.int64)
        if self.X.ndim != 2 or self.X.shape[0] != self.y.size:
            raise DimensionMismatch("dataset inputs and labels disagree in length")
        if self.y.size and not np.isin(self.y, self.labels).all():
            raise InvalidConfig("label outside the label set")

    def __len__(self):
        return self.y.size

    @property
    def d(self):
        return self.X.shape[1]

    def subset(self, idx):
        return LabeledDataset(self.X[idx], self.y[idx], self.labels)

    def to_jsonl(self) -> str:
        lines = [
            json.dumps({"features": [int(i) for i in np.flatnonzero(x)], "label": int(y)})
            for x, y in zip(self.X, self.y)
        ]
        return "".join(line + "\n" for line in lines)

    def save(self, path):
        Path(path).write_text(self.to_jsonl())

    @classmethod
    def from_jsonl(cls, text: str, d: int | None = None) -> "LabeledDataset":
        rows = [json.loads(line) for line in text.splitlines() if line.strip()]
        if d is None:
            d = 1 + max((max(r["features"], default=-1) for r in rows), default=-1)
        X = np.zeros((len(rows), d), dtype=np.uint8)
        for i, r in enumerate(rows):
            feats = r["features"]
            if feats and max(feats) >= d:
                raise DimensionMismatch(f"feature id {max(feats)} out of range for d={d}")
            X[i, feats] = 1
        return cls(X, [r["label"] for r in rows])

    @classmethod
    def load(cls, path, d: int | None = None) -> "LabeledDataset":
        return cls.from_jsonl(Path(path).read_text(), d)


# training -------------------------------------------------------------------


@dataclass
class TrainConfig:
    scheme: str = "natural"
    epochs: int = 20
    lr: float = 0.1
    seed: int = 0
    batch_size: int = 32
    attack_k: int = 5
    attack_m: int = 8
    warmup_epochs: int = 0
    attack_labels: tuple | None = None

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise InvalidConfig(f"unknown scheme {self.scheme!r}; expected one of {SCHEMES}")
        if self.epochs < 1:
            raise InvalidConfig("epochs must be >= 1")
        if not self.lr > 0:
            raise InvalidConfig("learning rate must be positive")
        if self.batch_size < 1 or self.attack_k < 0 or self.attack_m < 0 or self.warmup_epochs < 0:
            raise InvalidConfig("batch size must be >= 1 and attack budgets >= 0")


@dataclass
class TrainHistory:
    train_loss: list = field(default_factory=list)
    val_loss: list = field(default_factory=list)
    best_epoch: int | None = None


def _scheme_inputs(model, X, y, cfg, spec, normalizer, attack=True):
    """Inputs the scheme's objective is evaluated on for one batch."""
    from .attacks import greedy_by_grad_batch

    if cfg.scheme == "natural" or (cfg.scheme == "adversarial" and not attack):
        return X
    if cfg.scheme == "np":
        return normalizer.batch(X)
    # only samples whose label the adversary targets are perturbed
    hit = np.ones(len(y), bool) if cfg.attack_labels is None else np.isin(y, cfg.attack_labels)
    if cfg.scheme == "adversarial":
        Xa = X.copy()
        if hit.any():
            Xa[hit] = greedy_by_grad_batch(model, spec, X[hit], y[hit], cfg.attack_m, cfg.attack_k)
        worse = model.loss(Xa, y) > model.loss(X, y)
        return np.where(worse[:, None], Xa, X)
    Xn = normalizer.batch(X)
    residual = spec.without(normalizer.relation) if spec is not None else None
    if residual is None or residual.is_empty or not attack:
        return Xn
    clf = NormalizedClassifier(model, normalizer)
    Xa = Xn.copy()
    if hit.any():
        Xa[hit] = normalizer.batch(greedy_by_grad_batch(clf, residual, Xn[hit], y[hit], cfg.attack_m, cfg.attack_k))
    worse = model.loss(Xa, y) > model.loss(Xn, y)
    return np.where(worse[:, None], Xa, Xn)


def train(model, data: LabeledDataset, cfg: TrainConfig, spec=None, normalizer=None,
          val: LabeledDataset | None = None):
    """Mini-batch gradient descent on the objective of ``cfg.scheme``.

    ``spec`` is the full relation the adversary may use; for the unified
    scheme the normalizer's own relation is removed from it and the residual
    is attacked. When ``val`` is given, the parameters with the lowest
    validation objective are kept; the first ``cfg.warmup_epochs`` epochs
    skip the attack. The returned model carries a
    ``history`` attribute.
    """
    if cfg.scheme in ("np", "unified") and normalizer is None:
        raise MissingNormalizer(f"scheme {cfg.scheme!r} needs a normalizer")
    if cfg.scheme == "adversarial" and spec is None:
        raise InvalidConfig("adversarial training needs a relation")
    if data.d != model.d:
        raise DimensionMismatch(f"model expects d={model.d}, data has d={data.d}")
    rng = np.random.default_rng(cfg.seed)
    n = len(data)
    history = TrainHistory()
    best = None
    static = None
    if cfg.scheme == "np":
        static = normalizer.batch(data.X)
    for epoch in range(cfg.epochs):
        attacking = epoch >= cfg.warmup_epochs
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            yb = data.y[idx]
            if static is not None:
                Xb = static[idx]
            else:
                Xb = _scheme_inputs(model, data.X[idx], yb, cfg, spec, normalizer, attacking)
            total += float(model.loss(Xb, yb).sum())
            grads = model.param_grads(Xb, yb)
            model.set_params([p - cfg.lr * g for p, g in zip(model.params, grads)])
        history.train_loss.append(total / max(n, 1))
        if val is not None and len(val):
            Xv = _scheme_inputs(model, val.X, val.y, cfg, spec, normalizer, attacking)
            vloss = float(model.loss(Xv, val.y).mean())
            history.val_loss.append(vloss)
            # warm-up epochs optimize an easier objective and are not eligible
            if attacking and (best is None or vloss < best[0]):
                best = (vloss, [p.copy() for p in model.params])
                history.best_epoch = epoch
        log.debug("epoch %d scheme=%s loss=%.4f", epoch, cfg.scheme, history.train_loss[-1])
    if best is not None:
        model.set_params(best[1])
    model.history = history
    return model


# checkpoints ----------------------------------------------------------------


def model_to_dict(model, normalizer_relation=None) -> dict:
    return {
        "arch": model.architecture(),
        "weights": [np.asarray(p, dtype=np.float64).ravel().tolist() for p in model.params],
        "normalizer": None if normalizer_relation is None else normalizer_relation.to_json_dict(),
    }


def model_from_dict(obj: dict):
    arch = obj["arch"]
    flat = [np.asarray(w, dtype=np.float64) for w in obj["weights"]]
    if arch["type"] == "linear":
        return LinearModel(flat[0], flat[1][0])
    if arch["type"] == "mlp":
        sizes = arch["sizes"]
        weights = [flat[2 * i].reshape(a, b) for i, (a, b) in enumerate(zip(sizes[:-1], sizes[1:]))]
        return MlpModel(weights, flat[1::2])
    raise InvalidConfig(f"unknown architecture {arch['type']!r}")


def save_model(model, path, normalizer_relation=None):
    Path(path).write_text(json.dumps(model_to_dict(model, normalizer_relation)) + "\n")


def load_model(path):
    """Returns ``(model, normalizer relation or None)``."""
    from .relation import RelationSpec

    obj = json.loads(Path(path).read_text())
    rel = obj.get("normalizer")
    return model_from_dict(obj), (RelationSpec.from_json_dict(rel) if rel else None)
