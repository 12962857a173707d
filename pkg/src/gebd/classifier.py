"""Hand-crafted per-frame features and the logistic boundary classifier.

Each window frame yields a 27-dimensional feature vector

    [0]     mean flow magnitude
    [1]     max flow magnitude
    [2:10]  8-bin flow angle histogram (magnitude weighted, sums to 1)
    [10:26] 16-bin gray intensity histogram (sums to 1)
    [26]    mean absolute gray difference against the previous frame

The classifier input concatenates the mean feature vector of the m frames
before a candidate with the mean of the m frames after it (54 values), and
a logistic model with z-scored inputs is trained by minibatch gradient
descent with adaptive moment estimation (decay rates 0.9/0.999, epsilon
1e-8).  The default schedule is 16 epochs at batch size 16, learning rate
1e-4 multiplied by 0.1 after every 10 epochs.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np

from .flow import flow_stats, to_gray
from .postprocess import ScoreSequence

FEATURE_DIM = 27
FEATURE_SCHEMA_VERSION = 1

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


@dataclass
class TrainConfig:
    learning_rate: float = 0.0001
    decay_factor: float = 0.1
    decay_every: int = 10
    epochs: int = 16
    batch_size: int = 16
    seed: int = 0

    def validate(self) -> None:
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if not 0 < self.decay_factor <= 1:
            raise ValueError("decay_factor must be in (0,1]")
        if self.decay_every < 1 or self.epochs < 1 or self.batch_size < 1:
            raise ValueError("decay_every, epochs and batch_size must be >= 1")


@dataclass
class LogisticModel:
    weights: np.ndarray
    bias: float
    feature_mean: np.ndarray
    feature_std: np.ndarray
    schema_version: int = FEATURE_SCHEMA_VERSION
    train_config: TrainConfig | None = None

    def standardize(self, x: np.ndarray) -> np.ndarray:
        return (x - self.feature_mean) / self.feature_std

    def score(self, inputs: np.ndarray) -> np.ndarray:
        """Boundary probabilities for one (D,) or many (N,D) inputs.

        The dot product reduces each row independently, so batch scoring is
        bit-identical to scoring rows one at a time.
        """
        x = np.atleast_2d(np.asarray(inputs, dtype=np.float64))
        if x.shape[1] != self.weights.shape[0]:
            raise ValueError(
                f"input dim {x.shape[1]} does not match model dim "
                f"{self.weights.shape[0]}")
        z = (self.standardize(x) * self.weights).sum(axis=1) + self.bias
        return _sigmoid(z)


def _sigmoid(z):
    out = np.empty_like(z, dtype=np.float64)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def frame_features(rgb, flow, prev_rgb) -> np.ndarray:
    """27-vector for one window slot; slices are (3,S,S) RGB and (2,S,S) flow."""
    rgb = np.asarray(rgb, dtype=np.float64)
    flow = np.asarray(flow, dtype=np.float64)
    prev_rgb = np.asarray(prev_rgb, dtype=np.float64)
    if rgb.shape != prev_rgb.shape or rgb.shape[1:] != flow.shape[1:]:
        raise ValueError(
            f"slice shapes disagree: rgb {rgb.shape}, flow {flow.shape}, "
            f"prev {prev_rgb.shape}")
    mean_mag, max_mag, angle_hist = flow_stats(np.transpose(flow, (1, 2, 0)))
    gray = to_gray(np.transpose(rgb, (1, 2, 0)))
    prev_gray = to_gray(np.transpose(prev_rgb, (1, 2, 0)))
    intensity_hist, _ = np.histogram(np.clip(gray, 0, 1), bins=16, range=(0.0, 1.0))
    intensity_hist = intensity_hist / gray.size
    diff = float(np.abs(gray - prev_gray).mean())
    return np.concatenate([[mean_mag, max_mag], angle_hist, intensity_hist, [diff]])


def pc_concat(before, after) -> np.ndarray:
    """Mean of the before-features concatenated with mean of the after-features."""
    before = np.asarray(before, dtype=np.float64)
    after = np.asarray(after, dtype=np.float64)
    if before.ndim != 2 or after.ndim != 2 or before.shape != after.shape:
        raise ValueError(
            f"before/after must both be (m, d), got {before.shape} and {after.shape}")
    return np.concatenate([before.mean(axis=0), after.mean(axis=0)])


def window_features(rgb_window, flow_window) -> np.ndarray:
    """Classifier input for one extracted window ((2m,3,S,S), (2m,2,S,S))."""
    n = rgb_window.shape[0]
    if n % 2 != 0 or flow_window.shape[0] != n:
        raise ValueError("windows must hold 2m matching slots")
    feats = []
    for k in range(n):
        prev = rgb_window[k - 1] if k > 0 else rgb_window[k]
        feats.append(frame_features(rgb_window[k], flow_window[k], prev))
    feats = np.asarray(feats)
    m = n // 2
    return pc_concat(feats[:m], feats[m:])


def bce_loss(X, y, weights, bias) -> float:
    """Mean binary cross-entropy at the given parameters (stable log-sum form)."""
    z = X @ weights + bias
    return float(np.mean(np.logaddexp(0.0, z) - y * z))


def bce_gradient(X, y, weights, bias):
    """(loss, d_loss/d_weights, d_loss/d_bias) of the mean BCE."""
    z = X @ weights + bias
    p = _sigmoid(z)
    resid = p - y
    return (float(np.mean(np.logaddexp(0.0, z) - y * z)),
            X.T @ resid / len(y),
            float(resid.mean()))


def _as_xy(dataset):
    if isinstance(dataset, tuple) and len(dataset) == 2:
        X, y = dataset
    else:
        X = [row for row, _ in dataset]
        y = [label for _, label in dataset]
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    return X, y


def train_logistic(dataset, config: TrainConfig = TrainConfig()):
    """Fit a logistic model; returns (model, per-epoch mean loss list).

    ``dataset`` is a list of (input vector, 0/1 label) pairs or an (X, y)
    tuple.  Inputs are z-scored against the training set (stored with the
    model); shuffling is seeded; the learning rate decays by ``decay_factor``
    after every ``decay_every`` epochs.
    """
    config.validate()
    X, y = _as_xy(dataset)
    if X.ndim != 2 or len(X) == 0:
        raise ValueError("dataset must be a non-empty set of vectors")
    if len(set(np.unique(y)) - {0.0, 1.0}) > 0:
        raise ValueError("labels must be 0 or 1")
    if len(np.unique(y)) < 2:
        raise ValueError("training requires both classes present")

    mean = X.mean(axis=0)
    std = X.std(axis=0)
    std = np.where(std < 1e-12, 1.0, std)  # constant dims pass through
    Xs = (X - mean) / std

    n, d = Xs.shape
    w = np.zeros(d)
    b = 0.0
    mw = np.zeros(d)
    vw = np.zeros(d)
    mb = vb = 0.0
    step = 0
    rng = np.random.default_rng(config.seed)
    losses = []
    for epoch in range(config.epochs):
        lr = config.learning_rate * config.decay_factor ** (epoch // config.decay_every)
        perm = rng.permutation(n)
        total = 0.0
        for start in range(0, n, config.batch_size):
            idx = perm[start:start + config.batch_size]
            loss, gw, gb = bce_gradient(Xs[idx], y[idx], w, b)
            if not np.isfinite(loss):
                raise RuntimeError(
                    f"non-finite loss at epoch {epoch} step {step}: "
                    f"|w|={np.abs(w).max():.3g} b={b:.3g}")
            total += loss * len(idx)
            step += 1
            mw = ADAM_BETA1 * mw + (1 - ADAM_BETA1) * gw
            vw = ADAM_BETA2 * vw + (1 - ADAM_BETA2) * gw * gw
            mb = ADAM_BETA1 * mb + (1 - ADAM_BETA1) * gb
            vb = ADAM_BETA2 * vb + (1 - ADAM_BETA2) * gb * gb
            c1 = 1 - ADAM_BETA1 ** step
            c2 = 1 - ADAM_BETA2 ** step
            w = w - lr * (mw / c1) / (np.sqrt(vw / c2) + ADAM_EPS)
            b = b - lr * (mb / c1) / (np.sqrt(vb / c2) + ADAM_EPS)
        losses.append(total / n)
    model = LogisticModel(weights=w, bias=float(b), feature_mean=mean,
                          feature_std=std, train_config=config)
    return model, losses


def score_sequence(model: LogisticModel, inputs, timestamps,
                   video_id: str) -> ScoreSequence:
    """Boundary probability per candidate, in timestamp order."""
    if model.feature_mean is None or model.feature_std is None:
        raise ValueError("model lacks standardization vectors")
    ts = list(timestamps)
    X = np.asarray(inputs, dtype=np.float64)
    if len(X) != len(ts):
        raise ValueError("inputs and timestamps must align")
    scores = model.score(X) if len(ts) else np.zeros(0)
    return ScoreSequence(video_id=video_id, timestamps=ts,
                         scores=[float(s) for s in scores])


def save_model(path, model: LogisticModel) -> None:
    doc = {
        "schema_version": model.schema_version,
        "weights": [float(v) for v in model.weights],
        "bias": model.bias,
        "feature_mean": [float(v) for v in model.feature_mean],
        "feature_std": [float(v) for v in model.feature_std],
        "train_config": asdict(model.train_config) if model.train_config else None,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1)


def load_model(path) -> LogisticModel:
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("schema_version") != FEATURE_SCHEMA_VERSION:
        raise ValueError(
            f"unsupported model schema version {doc.get('schema_version')}")
    cfg = TrainConfig(**doc["train_config"]) if doc.get("train_config") else None
    return LogisticModel(
        weights=np.asarray(doc["weights"], dtype=np.float64),
        bias=float(doc["bias"]),
        feature_mean=np.asarray(doc["feature_mean"], dtype=np.float64),
        feature_std=np.asarray(doc["feature_std"], dtype=np.float64),
        schema_version=doc["schema_version"],
        train_config=cfg,
    )
