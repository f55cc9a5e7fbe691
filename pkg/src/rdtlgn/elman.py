"""Vanilla Elman RNN baseline with a three-way verdict head, trained by BPTT."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cell import Adam, TrainConfig, class_weights_from_labels

CLASSES = np.array([-1, 0, 1], dtype=np.int8)


@dataclass
class ElmanBaseline:
    Wx: np.ndarray  # (H, P)
    Wh: np.ndarray  # (H, H)
    b: np.ndarray  # (H,)
    Wy: np.ndarray  # (3, H)
    by: np.ndarray  # (3,)

    @property
    def hidden_dim(self) -> int:
        return self.Wh.shape[0]

    def params(self) -> list[np.ndarray]:
        return [self.Wx, self.Wh, self.b, self.Wy, self.by]

    @classmethod
    def init(cls, P: int, H: int, seed: int = 0) -> "ElmanBaseline":
        rng = np.random.default_rng(seed)
        return cls(
            rng.normal(0, 1 / np.sqrt(P), (H, P)),
            rng.normal(0, 1 / np.sqrt(max(H, 1)), (H, H)) * 0.5,
            np.zeros(H),
            rng.normal(0, 1 / np.sqrt(max(H, 1)), (3, H)),
            np.zeros(3),
        )


def forward(m: ElmanBaseline, x: np.ndarray):
    """Logits (N, 3, T) and hidden states (N, H, T+1) for inputs (N, P, T)."""
    N, P, T = x.shape
    H = m.hidden_dim
    hs = np.zeros((N, H, T + 1))
    logits = np.zeros((N, 3, T))
    for t in range(T):
        hs[:, :, t + 1] = np.tanh(x[:, :, t] @ m.Wx.T + hs[:, :, t] @ m.Wh.T + m.b)
        logits[:, :, t] = hs[:, :, t + 1] @ m.Wy.T + m.by
    return logits, hs


def _softmax(z: np.ndarray, axis: int) -> np.ndarray:
    z = z - z.max(axis=axis, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=axis, keepdims=True)


def loss_and_grad(m: ElmanBaseline, x, labels, class_weights):
    """Class-weighted mean cross-entropy over all (trajectory, step) pairs."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(labels, dtype=np.int64) + 1  # class index
    N, P, T = x.shape
    logits, hs = forward(m, x)
    prob = _softmax(logits, axis=1)
    cw = np.asarray(class_weights, dtype=float)[y]
    n = y.size
    picked = np.take_along_axis(prob, y[:, None, :], axis=1)[:, 0, :]
    loss = float(-(cw * np.log(picked + 1e-300)).sum() / n)

    dlogits = prob.copy()
    np.put_along_axis(dlogits, y[:, None, :], np.take_along_axis(dlogits, y[:, None, :], axis=1) - 1, axis=1)
    dlogits *= cw[:, None, :] / n

    gWx = np.zeros_like(m.Wx)
    gWh = np.zeros_like(m.Wh)
    gb = np.zeros_like(m.b)
    gWy = np.einsum("nct,nht->ch", dlogits, hs[:, :, 1:])
    gby = dlogits.sum(axis=(0, 2))
    dh_next = np.zeros((N, m.hidden_dim))
    for t in reversed(range(T)):
        dh = dlogits[:, :, t] @ m.Wy + dh_next
        dpre = dh * (1 - hs[:, :, t + 1] ** 2)
        gWx += dpre.T @ x[:, :, t]
        gWh += dpre.T @ hs[:, :, t]
        gb += dpre.sum(axis=0)
        dh_next = dpre @ m.Wh
    return loss, [gWx, gWh, gb, gWy, gby]


def predict(m: ElmanBaseline, x) -> np.ndarray:
    """Argmax verdicts (N, T)."""
    logits, _ = forward(m, np.asarray(x, dtype=float))
    return CLASSES[logits.argmax(axis=1)]


def train_elman(x, labels, hidden_dim: int, tc: TrainConfig = TrainConfig()) -> tuple[ElmanBaseline, list[float]]:
    x = np.asarray(x, dtype=float)
    labels = np.asarray(labels, dtype=np.int8)
    if labels.ndim == 3:
        labels = labels[:, 0, :]
    if x.shape[0] != labels.shape[0] or x.shape[2] != labels.shape[1]:
        raise ValueError(f"inputs {x.shape} and labels {labels.shape} disagree")
    m = ElmanBaseline.init(x.shape[1], hidden_dim, tc.seed)
    cw = np.asarray(tc.class_weights) if tc.class_weights is not None else class_weights_from_labels(labels)
    opt = Adam(m.params(), lr=tc.learning_rate)
    rng = np.random.default_rng(tc.seed)
    N = x.shape[0]
    history = []
    for _ in range(tc.epochs):
        order = rng.permutation(N)
        total = 0.0
        for k in range(0, N, tc.batch_size):
            idx = order[k : k + tc.batch_size]
            loss, grads = loss_and_grad(m, x[idx], labels[idx], cw)
            opt.step(m.params(), grads)
            total += loss * len(idx)
        history.append(total / N)
    return m, history
