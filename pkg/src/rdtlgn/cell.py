"""Soft recurrent ternary cell: polynomial gates, clip, and BPTT training.

At each step the cell reads ``z_t = [p_t; h_{t-1}]``, pushes it through ``L``
layers of two-input polynomial gates (each followed by clip), and splits the
last layer into the next state (first ``S`` units) and the output (last ``K``).
"""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass
from functools import lru_cache

import numpy as np

from . import pst
from .ternary import PROJ_1, PROJ_2, all_tables, vocabulary_mask, VocabularyKind, VocabTag

log = logging.getLogger(__name__)

CHECKPOINT_VERSION = 1
VERDICT_THRESHOLD = 1.0 / 3.0


class CheckpointError(ValueError):
    pass


@dataclass(frozen=True)
class CellConfig:
    P: int
    S: int
    K: int
    L: int
    widths: tuple[int, ...]
    seed: int = 0
    init_noise: float = 0.5

    def __post_init__(self):
        object.__setattr__(self, "widths", tuple(int(w) for w in self.widths))
        if min(self.P, self.K, self.L) < 1 or self.S < 0:
            raise ValueError("need P, K, L >= 1 and S >= 0")
        if len(self.widths) != self.L:
            raise ValueError(f"{len(self.widths)} widths given for L={self.L} layers")
        if self.widths[-1] != self.S + self.K:
            raise ValueError(f"last width {self.widths[-1]} != S + K = {self.S + self.K}")
        if min(self.widths) < 1:
            raise ValueError("layer widths must be positive")

    @classmethod
    def uniform(cls, P: int, S: int, K: int, L: int, hidden: int, seed: int = 0, **kw) -> "CellConfig":
        return cls(P, S, K, L, (hidden,) * (L - 1) + (S + K,), seed, **kw)

    @property
    def n_in(self) -> int:
        return self.P + self.S

    def fan_in(self, layer: int) -> int:
        return self.n_in if layer == 0 else self.widths[layer - 1]


def build_connectivity(cfg: CellConfig, rng: np.random.Generator) -> tuple[np.ndarray, ...]:
    """Random parent pairs per layer, repaired so every upstream node feeds something."""
    layers = []
    for l, n in enumerate(cfg.widths):
        n_prev = cfg.fan_in(l)
        par = np.empty((n, 2), dtype=np.int64)
        for j in range(n):
            par[j] = rng.choice(n_prev, size=2, replace=n_prev < 2)
        _repair(par, n_prev, rng)
        layers.append(par)
    return tuple(layers)


def _repair(par: np.ndarray, n_prev: int, rng: np.random.Generator) -> None:
    counts = np.bincount(par.ravel(), minlength=n_prev)
    for node in rng.permutation(np.flatnonzero(counts == 0)):
        # steal a slot whose current parent has another child
        slots = [(j, s) for j in range(len(par)) for s in (0, 1) if counts[par[j, s]] > 1]
        if not slots:
            break
        j, s = slots[rng.integers(len(slots))]
        counts[par[j, s]] -= 1
        par[j, s] = node
        counts[node] += 1


@dataclass
class SoftCell:
    config: CellConfig
    connectivity: tuple[np.ndarray, ...]
    coeffs: list[np.ndarray]

    def __post_init__(self):
        for l, (par, w) in enumerate(zip(self.connectivity, self.coeffs)):
            n = self.config.widths[l]
            if par.shape != (n, 2) or w.shape != (n, 9):
                raise ValueError(f"layer {l}: shapes {par.shape}, {w.shape} do not match width {n}")
            if par.min() < 0 or par.max() >= self.config.fan_in(l):
                raise ValueError(f"layer {l}: parent index out of range")

    @property
    def n_neurons(self) -> int:
        return sum(self.config.widths)

    def copy(self) -> "SoftCell":
        return SoftCell(self.config, self.connectivity, [w.copy() for w in self.coeffs])


def build_cell(cfg: CellConfig) -> SoftCell:
    rng = np.random.default_rng(cfg.seed)
    conn = build_connectivity(cfg, rng)
    proj = np.stack([pst.coeffs_from_table(PROJ_1), pst.coeffs_from_table(PROJ_2)])
    coeffs = []
    for n in cfg.widths:
        pick = rng.integers(0, 2, size=n)
        noise = rng.uniform(-cfg.init_noise, cfg.init_noise, size=(n, 9))
        coeffs.append(0.7 * proj[pick] + 0.3 * noise)
    return SoftCell(cfg, conn, coeffs)


def cell_from_tables(cfg: CellConfig, connectivity, tables) -> SoftCell:
    """Cell whose gates interpolate the given truth tables exactly on the grid."""
    coeffs = [pst.coeffs_from_tables(np.asarray(t)) for t in tables]
    return SoftCell(cfg, tuple(np.asarray(c, dtype=np.int64) for c in connectivity), coeffs)


# ---------------------------------------------------------------------------
# forward / backward


def _layer_forward(x: np.ndarray, par: np.ndarray, w: np.ndarray):
    a = x[:, par[:, 0]]
    b = x[:, par[:, 1]]
    m = pst.monomials(a, b)
    pre = np.einsum("bnk,nk->bn", m, w)
    return pst.clip(pre), (a, b, m, pre)


def cell_step(cell: SoftCell, p_t, h_prev):
    """One step on a batch; ``p_t`` (B, P) or (P,), ``h_prev`` (B, S) or (S,)."""
    single = np.ndim(p_t) == 1
    p = np.atleast_2d(np.asarray(p_t, dtype=float))
    h = np.atleast_2d(np.asarray(h_prev, dtype=float))
    x = np.concatenate([p, h], axis=1)
    for par, w in zip(cell.connectivity, cell.coeffs):
        x, _ = _layer_forward(x, par, w)
    S = cell.config.S
    h_new, y = x[:, :S], x[:, S:]
    return (h_new[0], y[0]) if single else (h_new, y)


@dataclass
class Tape:
    caches: list  # [t][layer] -> (a, b, m, pre)
    states: np.ndarray  # (B, S, T+1), states[..., 0] = h0


def unroll(cell: SoftCell, pred_seq, h0=None, keep_tape: bool = False):
    """Run the cell over predicate sequences (B, P, T) or (P, T).

    Returns outputs of shape (B, K, T) (or (K, T)) and the activation tape
    when ``keep_tape`` is set.
    """
    x = np.asarray(pred_seq, dtype=float)
    single = x.ndim == 2
    if single:
        x = x[None]
    B, P, T = x.shape
    cfg = cell.config
    if P != cfg.P:
        raise ValueError(f"cell expects P={cfg.P} predicates, got {P}")
    h = np.zeros((B, cfg.S)) if h0 is None else np.broadcast_to(np.asarray(h0, float), (B, cfg.S)).copy()
    ys = np.zeros((B, cfg.K, T))
    states = np.zeros((B, cfg.S, T + 1))
    states[..., 0] = h
    caches = []
    for t in range(T):
        z = np.concatenate([x[:, :, t], h], axis=1)
        step = []
        for par, w in zip(cell.connectivity, cell.coeffs):
            z, c = _layer_forward(z, par, w)
            step.append(c)
        if keep_tape:
            caches.append(step)
        h = z[:, : cfg.S]
        ys[:, :, t] = z[:, cfg.S :]
        states[..., t + 1] = h
    tape = Tape(caches, states) if keep_tape else None
    if single:
        ys = ys[0]
    return ys, tape


def backward(cell: SoftCell, tape: Tape, dy: np.ndarray) -> list[np.ndarray]:
    """Coefficient gradients given dLoss/dy of shape (B, K, T)."""
    cfg = cell.config
    B, _, T = dy.shape
    grads = [np.zeros_like(w) for w in cell.coeffs]
    dh = np.zeros((B, cfg.S))
    for t in reversed(range(T)):
        dout = np.concatenate([dh, dy[:, :, t]], axis=1)
        for l in reversed(range(cfg.L)):
            a, b, m, pre = tape.caches[t][l]
            w = cell.coeffs[l]
            par = cell.connectivity[l]
            dpre = dout * pst.clip_grad(pre)
            grads[l] += np.einsum("bn,bnk->nk", dpre, m)
            da = dpre * np.einsum("bnk,nk->bn", pst.monomials_da(a, b), w)
            db = dpre * np.einsum("bnk,nk->bn", pst.monomials_db(a, b), w)
            dout = np.zeros((B, cfg.fan_in(l)))
            np.add.at(dout, (slice(None), par[:, 0]), da)
            np.add.at(dout, (slice(None), par[:, 1]), db)
        dh = dout[:, cfg.P :]
    return grads


# ---------------------------------------------------------------------------
# losses


def class_weights_from_labels(labels) -> np.ndarray:
    """Weights for classes (-1, 0, +1) inversely proportional to frequency, mean 1 over samples."""
    lab = np.asarray(labels).ravel()
    counts = np.array([(lab == c).sum() for c in (-1, 0, 1)], dtype=float)
    w = np.where(counts > 0, 1.0 / np.maximum(counts, 1), 0.0)
    return w * lab.size / max((w * counts).sum(), 1e-12)


def task_loss(y: np.ndarray, labels: np.ndarray, class_weights) -> tuple[float, np.ndarray]:
    """Class-weighted mean squared error against target trits; y, labels (B, K, T)."""
    cw = np.asarray(class_weights, dtype=float)[np.asarray(labels, dtype=np.int64) + 1]
    r = y - labels
    n = r.size
    return float((cw * r * r).sum() / n), 2.0 * cw * r / n


@lru_cache(maxsize=None)
def _nm_tables() -> np.ndarray:
    mask = vocabulary_mask(VocabularyKind(VocabTag.NM))
    return all_tables()[mask].astype(float)


def regularizer(cell: SoftCell, nm_enforce: bool = True) -> tuple[float, list[np.ndarray]]:
    """Mean commitment penalty over all neurons, plus the mean distance of
    state-producing neurons to the nearest NM truth table when ``nm_enforce``."""
    n_total = cell.n_neurons
    value = 0.0
    grads = []
    for w in cell.coeffs:
        v, g = pst.commitment_penalty_batch(w)
        value += v.sum() / n_total
        grads.append(g / n_total)
    S = cell.config.S
    if nm_enforce and S > 0:
        v, g = pst.nearest_table_penalty_batch(cell.coeffs[-1][:S], _nm_tables())
        value += v.sum() / S
        grads[-1][:S] += g / S
    return float(value), grads


def soft_verdicts(y, threshold: float = VERDICT_THRESHOLD) -> np.ndarray:
    y = np.asarray(y)
    return (np.where(y > threshold, 1, 0) + np.where(y < -threshold, -1, 0)).astype(np.int8)


def total_loss_and_grad(cell, x, labels, class_weights, lam: float, nm_enforce: bool = True):
    """Loss = task + lam * regularizer, with gradients per layer."""
    y, tape = unroll(cell, x, keep_tape=True)
    lab = np.asarray(labels)
    if lab.ndim == 2:
        lab = lab[:, None, :]
    task, dy = task_loss(y, lab, class_weights)
    grads = backward(cell, tape, dy)
    reg, rgrads = regularizer(cell, nm_enforce)
    if lam:
        grads = [g + lam * rg for g, rg in zip(grads, rgrads)]
    return task + lam * reg, task, reg, grads, y


# ---------------------------------------------------------------------------
# training


class Adam:
    def __init__(self, params: list[np.ndarray], lr: float = 0.01, b1=0.9, b2=0.999, eps=1e-8):
        self.lr, self.b1, self.b2, self.eps = lr, b1, b2, eps
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, params: list[np.ndarray], grads: list[np.ndarray]) -> None:
        self.t += 1
        c1 = 1 - self.b1**self.t
        c2 = 1 - self.b2**self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.b1
            m += (1 - self.b1) * g
            v *= self.b2
            v += (1 - self.b2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 60
    batch_size: int = 32
    learning_rate: float = 0.01
    lambda_max: float = 0.3
    warmup_frac: float = 0.1
    loss_kind: str = "mse_trit"
    class_weights: tuple[float, float, float] | None = None
    nm_enforce: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1 or self.learning_rate <= 0:
            raise ValueError("epochs, batch_size and learning_rate must be positive")
        if self.loss_kind != "mse_trit":
            raise ValueError(f"unknown loss {self.loss_kind!r}")

    def schedule(self, total_steps: int) -> pst.AnnealSchedule | None:
        if self.lambda_max <= 0:
            return None
        return pst.AnnealSchedule(self.lambda_max, max(total_steps, 1), self.warmup_frac)


@dataclass
class EpochRecord:
    epoch: int
    task_loss: float
    reg: float
    lam: float
    accuracy: float


def train(cell: SoftCell, inputs, labels, tc: TrainConfig) -> tuple[SoftCell, list[EpochRecord]]:
    """Minibatch Adam on task loss + annealed commitment penalty.

    ``inputs`` has shape (N, P, T) and ``labels`` (N, T) with trit targets for
    the single output (or (N, K, T)).
    """
    x = np.asarray(inputs, dtype=float)
    lab = np.asarray(labels, dtype=np.int8)
    if lab.ndim == 2:
        lab = lab[:, None, :]
    if x.shape[0] != lab.shape[0] or x.shape[2] != lab.shape[2]:
        raise ValueError(f"inputs {x.shape} and labels {lab.shape} disagree")
    if x.shape[1] != cell.config.P:
        raise ValueError(f"cell expects P={cell.config.P}, inputs have {x.shape[1]}")
    if lab.shape[1] != cell.config.K:
        raise ValueError(f"labels carry {lab.shape[1]} outputs, cell has K={cell.config.K}")
    cell = cell.copy()
    cw = np.asarray(tc.class_weights) if tc.class_weights is not None else class_weights_from_labels(lab)
    rng = np.random.default_rng(tc.seed)
    N = x.shape[0]
    n_batches = -(-N // tc.batch_size)
    sched = tc.schedule(tc.epochs * n_batches)
    opt = Adam(cell.coeffs, lr=tc.learning_rate)
    history = []
    step = 0
    for epoch in range(tc.epochs):
        order = rng.permutation(N)
        tl = rg = 0.0
        correct = 0
        lam = 0.0
        for k in range(n_batches):
            idx = order[k * tc.batch_size : (k + 1) * tc.batch_size]
            lam = pst.anneal_lambda(sched, step) if sched else 0.0
            _, task, reg, grads, y = total_loss_and_grad(cell, x[idx], lab[idx], cw, lam, tc.nm_enforce)
            opt.step(cell.coeffs, grads)
            step += 1
            tl += task * len(idx)
            rg += reg * len(idx)
            correct += int((soft_verdicts(y) == lab[idx]).sum())
        rec = EpochRecord(epoch, tl / N, rg / N, lam, correct / lab.size)
        history.append(rec)
        log.debug("epoch %d task %.4f reg %.4f lam %.3f acc %.3f", *asdict(rec).values())
    return cell, history


# ---------------------------------------------------------------------------
# checkpoints


def save_checkpoint(cell: SoftCell, extra: dict | None = None) -> bytes:
    doc = {
        "format": "rdtlgn.softcell",
        "version": CHECKPOINT_VERSION,
        "config": asdict(cell.config),
        "connectivity": [par.tolist() for par in cell.connectivity],
        "coeffs": [[[repr(float(v)) for v in row] for row in w] for w in cell.coeffs],
    }
    if extra:
        doc.update(extra)
    return json.dumps(doc, indent=1).encode()


def load_checkpoint(data: bytes) -> SoftCell:
    try:
        doc = json.loads(data)
    except (json.JSONDecodeError, UnicodeDecodeError) as e:
        raise CheckpointError(f"unreadable checkpoint: {e}") from e
    if doc.get("format") != "rdtlgn.softcell" or doc.get("version") != CHECKPOINT_VERSION:
        raise CheckpointError(f"unsupported checkpoint {doc.get('format')} v{doc.get('version')}")
    try:
        cfg = CellConfig(**doc["config"])
        conn = tuple(np.array(p, dtype=np.int64).reshape(-1, 2) for p in doc["connectivity"])
        coeffs = [np.array([[float(v) for v in row] for row in w]).reshape(-1, 9) for w in doc["coeffs"]]
        return SoftCell(cfg, conn, coeffs)
    except (KeyError, TypeError, ValueError) as e:
        raise CheckpointError(f"malformed checkpoint: {e}") from e
