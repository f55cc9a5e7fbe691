"""Synthetic 2-D navigation trajectories and the five normalized predicates.

A point mass moves in a box world with axis-aligned obstacles and a circular
goal.  Each trajectory follows a seeded behaviour (goal seeking, detours,
wandering, idling) with Gaussian heading and speed noise.  Predicates:

    mu_g  at goal         sat((goal_radius - dist) / goal_scale)
    mu_s  safe            sat((signed obstacle distance - safe_margin) / safe_scale)
    mu_m  moving          sat((speed - speed_threshold) / move_scale)
    mu_h  heading         cos(angle(velocity, goal direction)), 0 when stationary
    mu_p  approach rate   sat(velocity . goal direction / approach_scale)

with ``sat(u) = clip(1.25 tanh(u), -1, 1)``, which reaches +-1 for |u| >= 1.1.
"""

from __future__ import annotations

import csv
import io
import json
import logging
from dataclasses import asdict, dataclass, field

import numpy as np

from .specs import PREDICATE_NAMES

log = logging.getLogger(__name__)

STATE_FIELDS = ("px", "py", "vx", "vy")
MODES = ("seek", "detour", "wander", "idle")


def saturate(u):
    return np.clip(1.25 * np.tanh(u), -1.0, 1.0)


@dataclass(frozen=True)
class Box:
    lo: tuple[float, float]
    hi: tuple[float, float]

    def signed_distance(self, pos: np.ndarray) -> np.ndarray:
        """Euclidean distance outside the box, minus penetration depth inside; pos (..., 2)."""
        lo = np.asarray(self.lo)
        hi = np.asarray(self.hi)
        d = np.maximum(lo - pos, pos - hi)
        outside = np.linalg.norm(np.maximum(d, 0.0), axis=-1)
        inside = np.minimum(d.max(axis=-1), 0.0)
        return outside + inside

    def contains(self, pos) -> bool:
        return bool(np.all(np.asarray(pos) >= self.lo) and np.all(np.asarray(pos) <= self.hi))


@dataclass(frozen=True)
class WorldConfig:
    bounds: Box = Box((0.0, 0.0), (10.0, 10.0))
    goal: tuple[float, float] = (7.5, 7.5)
    obstacles: tuple[Box, ...] = (
        Box((3.0, 3.5), (4.5, 5.0)),
        Box((6.0, 1.0), (7.5, 2.5)),
        Box((1.0, 6.5), (2.5, 8.0)),
        Box((5.0, 5.5), (6.0, 6.3)),
    )
    goal_radius: float = 1.5
    goal_scale: float = 1.2
    safe_margin: float = 0.4
    safe_scale: float = 0.4
    speed_threshold: float = 0.15
    move_scale: float = 0.12
    approach_scale: float = 0.25
    max_speed: float = 0.8
    heading_noise: float = 0.25
    speed_noise: float = 0.05
    gain: float = 0.6
    mode_probs: tuple[float, ...] = (0.45, 0.25, 0.15, 0.15)
    seed: int = 0

    def __post_init__(self):
        if not self.bounds.contains(self.goal):
            raise ValueError("goal outside world bounds")
        for ob in self.obstacles:
            if not (self.bounds.contains(ob.lo) and self.bounds.contains(ob.hi)):
                raise ValueError(f"obstacle {ob} outside world bounds")
        if len(self.mode_probs) != len(MODES):
            raise ValueError("one probability per behaviour mode")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "WorldConfig":
        d = dict(d)
        if "bounds" in d:
            d["bounds"] = Box(**d["bounds"]) if isinstance(d["bounds"], dict) else d["bounds"]
        if "obstacles" in d:
            d["obstacles"] = tuple(Box(**o) if isinstance(o, dict) else o for o in d["obstacles"])
        for k in ("goal", "mode_probs"):
            if k in d:
                d[k] = tuple(d[k])
        return cls(**d)

    def noiseless(self) -> "WorldConfig":
        return WorldConfig(**{**self.__dict__, "heading_noise": 0.0, "speed_noise": 0.0})


@dataclass
class Trajectory:
    states: np.ndarray  # (T, 4): px, py, vx, vy

    def __post_init__(self):
        self.states = np.asarray(self.states, dtype=float)
        if self.states.ndim != 2 or self.states.shape[1] != 4 or len(self.states) < 1:
            raise ValueError("states must have shape (T, 4) with T >= 1")
        if not np.isfinite(self.states).all():
            raise ValueError("non-finite state")

    @property
    def T(self) -> int:
        return len(self.states)

    @property
    def position(self) -> np.ndarray:
        return self.states[:, :2]

    @property
    def velocity(self) -> np.ndarray:
        return self.states[:, 2:]


def _rotate(v: np.ndarray, angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([c * v[0] - s * v[1], s * v[0] + c * v[1]])


def _random_point(world: WorldConfig, rng) -> np.ndarray:
    return rng.uniform(world.bounds.lo, world.bounds.hi)


def _simulate(world: WorldConfig, T: int, rng: np.random.Generator, mode: str | None = None) -> Trajectory:
    goal = np.asarray(world.goal)
    mode = mode or MODES[rng.choice(len(MODES), p=np.asarray(world.mode_probs) / sum(world.mode_probs))]
    if mode in ("seek", "detour"):
        ang = rng.uniform(0, 2 * np.pi)
        start = goal + rng.uniform(2.0, 7.0) * np.array([np.cos(ang), np.sin(ang)])
        start = np.clip(start, world.bounds.lo, world.bounds.hi)
    else:
        start = _random_point(world, rng)
    cruise = rng.uniform(0.25, world.max_speed)
    switch = int(rng.integers(T // 4, T)) if mode == "detour" else T
    waypoints = [goal] if mode == "seek" else [_random_point(world, rng), goal]
    pos = start.astype(float)
    vel = rng.normal(0.0, 0.2, size=2)
    states = np.zeros((T, 4))
    wp = 0
    for t in range(T):
        states[t] = [pos[0], pos[1], vel[0], vel[1]]
        if mode == "detour" and t >= switch:
            wp = 1
        elif mode == "wander" and np.linalg.norm(waypoints[wp] - pos) < 0.5:
            waypoints[wp] = _random_point(world, rng)
        target = goal if mode == "seek" else waypoints[min(wp, len(waypoints) - 1)]
        if mode == "wander":
            target = waypoints[0]
        offset = target - pos
        dist = np.linalg.norm(offset)
        if mode == "idle":
            desired = np.zeros(2)
        else:
            # slow down on arrival
            speed = cruise * min(1.0, dist / 1.0) + rng.normal(0.0, world.speed_noise)
            direction = offset / dist if dist > 1e-9 else np.zeros(2)
            desired = _rotate(direction, rng.normal(0.0, world.heading_noise)) * max(speed, 0.0)
        vel = vel + world.gain * (desired - vel)
        if mode == "idle":
            vel = vel + rng.normal(0.0, world.speed_noise, size=2)
        pos = np.clip(pos + vel, world.bounds.lo, world.bounds.hi)
    return Trajectory(states)


def gen_trajectories(world: WorldConfig, count: int, T: int = 20, seed: int = 0) -> list[Trajectory]:
    """Deterministic per (seed, index): trajectory ``i`` uses its own derived stream."""
    if count < 1:
        raise ValueError("count must be at least 1")
    return [_simulate(world, T, np.random.default_rng([seed, i])) for i in range(count)]


def compute_predicates(traj: Trajectory, world: WorldConfig) -> np.ndarray:
    """The five predicate signals as a (5, T) array in ``PREDICATE_NAMES`` order."""
    pos, vel = traj.position, traj.velocity
    goal = np.asarray(world.goal)
    offset = goal - pos
    dist = np.linalg.norm(offset, axis=1)
    speed = np.linalg.norm(vel, axis=1)
    unit = np.divide(offset, dist[:, None], out=np.zeros_like(offset), where=dist[:, None] > 1e-12)

    mu_g = saturate((world.goal_radius - dist) / world.goal_scale)
    if world.obstacles:
        sd = np.min([ob.signed_distance(pos) for ob in world.obstacles], axis=0)
        mu_s = saturate((sd - world.safe_margin) / world.safe_scale)
        mu_s = np.where(sd <= 0.0, -1.0, mu_s)
    else:
        mu_s = np.ones(traj.T)
    mu_m = saturate((speed - world.speed_threshold) / world.move_scale)
    along = (vel * unit).sum(axis=1)
    mu_h = np.divide(along, speed, out=np.zeros_like(speed), where=(speed > 1e-12) & (dist > 1e-12))
    mu_p = saturate(along / world.approach_scale)
    out = np.stack([mu_g, mu_s, mu_m, np.clip(mu_h, -1.0, 1.0), mu_p])
    return np.clip(out, -1.0, 1.0)


@dataclass
class Dataset:
    states: np.ndarray  # (N, T, 4)
    predicates: np.ndarray  # (N, 5, T)
    world: WorldConfig = field(default_factory=WorldConfig)
    traj_ids: np.ndarray | None = None
    labels: dict = field(default_factory=dict)  # name -> (N, T) int8

    def __post_init__(self):
        if self.traj_ids is None:
            self.traj_ids = np.arange(len(self.states))
        if self.predicates.shape[0] != self.states.shape[0]:
            raise ValueError("states and predicates disagree on trajectory count")
        if np.abs(self.predicates).max(initial=0.0) > 1.0:
            raise ValueError("predicates must lie in [-1, 1]")

    def __len__(self) -> int:
        return len(self.states)

    @property
    def T(self) -> int:
        return self.states.shape[1]

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx, dtype=np.int64)
        return Dataset(
            self.states[idx],
            self.predicates[idx],
            self.world,
            self.traj_ids[idx],
            {k: v[idx] for k, v in self.labels.items()},
        )

    def signals(self, columns) -> np.ndarray:
        return self.predicates[:, list(columns), :]


def make_dataset(world: WorldConfig, count: int, T: int = 20, seed: int = 0) -> Dataset:
    trajs = gen_trajectories(world, count, T, seed)
    states = np.stack([tr.states for tr in trajs])
    preds = np.stack([compute_predicates(tr, world) for tr in trajs])
    return Dataset(states, preds, world)


def label_class_counts(labels) -> np.ndarray:
    lab = np.asarray(labels)
    return np.stack([(lab == c).sum(axis=-1) for c in (-1, 0, 1)], axis=-1)


def balance_select(labels, N: int) -> tuple[np.ndarray, np.ndarray]:
    """Greedily pick ``N`` trajectories maximizing the rarest label class share.

    ``labels`` is the (count, T) CtQ label array.  Returns the selected indices
    (ascending) and the final class frequencies for (-1, 0, +1).
    """
    counts = label_class_counts(labels).astype(float)
    pool = len(counts)
    if N > pool:
        raise ValueError(f"cannot select {N} of {pool} trajectories")
    if (counts.sum(axis=0) == 0).any():
        log.warning("label class missing from the pool; selection is best effort")
    if N == pool:
        chosen = np.arange(pool)
    else:
        taken = np.zeros(pool, dtype=bool)
        acc = np.zeros(3)
        order = []
        for _ in range(N):
            cand = acc[None, :] + counts
            frac = cand / cand.sum(axis=1, keepdims=True)
            score = np.sort(frac, axis=1)
            # rarest class first, then the second rarest
            key = score[:, 0] * 1e6 + score[:, 1]
            key[taken] = -np.inf
            j = int(np.argmax(key))
            taken[j] = True
            acc += counts[j]
            order.append(j)
        chosen = np.sort(np.array(order))
    total = counts[chosen].sum(axis=0)
    freq = total / max(total.sum(), 1.0)
    if (freq == 0).any():
        log.warning("selected set lacks a label class: frequencies %s", freq.round(3))
    return chosen, freq


def split(n: int, seed: int = 0, train_frac: float = 0.8) -> tuple[np.ndarray, np.ndarray]:
    perm = np.random.default_rng(seed).permutation(n)
    k = int(round(train_frac * n))
    return np.sort(perm[:k]), np.sort(perm[k:])


# ---------------------------------------------------------------------------
# files

CSV_HEADER = ("traj_id", "t") + STATE_FIELDS + PREDICATE_NAMES


def dataset_to_csv(ds: Dataset) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for n in range(len(ds)):
        for t in range(ds.T):
            row = [int(ds.traj_ids[n]), t]
            row += [repr(float(v)) for v in ds.states[n, t]]
            row += [repr(float(v)) for v in ds.predicates[n, :, t]]
            w.writerow(row)
    return buf.getvalue()


def dataset_from_csv(text: str, world: WorldConfig | None = None) -> Dataset:
    rows = list(csv.reader(io.StringIO(text)))
    if tuple(rows[0]) != CSV_HEADER:
        raise ValueError(f"unexpected header {rows[0]}")
    body = np.array([[float(v) for v in r] for r in rows[1:]])
    ids = np.unique(body[:, 0].astype(np.int64))
    T = int(body[:, 1].max()) + 1
    if len(body) != len(ids) * T:
        raise ValueError("ragged trajectories in CSV")
    body = body[np.lexsort((body[:, 1], body[:, 0]))].reshape(len(ids), T, -1)
    states = body[:, :, 2:6]
    preds = body[:, :, 6:11].transpose(0, 2, 1)
    return Dataset(states, preds, world or WorldConfig(), ids)


def sidecar(ds: Dataset, formulas: dict, delta: float) -> str:
    doc = {
        "format": "rdtlgn.dataset",
        "version": 1,
        "world": ds.world.to_dict(),
        "formulas": formulas,
        "delta": delta,
        "traj_ids": ds.traj_ids.tolist(),
        "labels": {k: v.tolist() for k, v in ds.labels.items()},
    }
    return json.dumps(doc, indent=1)
