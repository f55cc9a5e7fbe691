"""Hardened ternary circuit: streaming table-lookup inference and gate census.

Nodes are numbered in a flat buffer: ``0 .. P+S-1`` hold ``z_t = [p_t; h_{t-1}]``
and every gate follows in layer order.  The last ``S + K`` nodes are the new
state and the verdict.  Trits are stored as int8.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numba
import numpy as np

from .cell import CellConfig
from .ternary import N_GATES, all_tables, constant_mask, im_mask, nm_mask

CIRCUIT_VERSION = 1


@dataclass(frozen=True)
class MonitorState:
    h: tuple[int, ...]
    t: int = 0

    @classmethod
    def bottom(cls, S: int) -> "MonitorState":
        return cls((0,) * S, 0)


@dataclass(frozen=True)
class InputMask:
    masked: frozenset[int] = frozenset()

    def __init__(self, masked=()):
        object.__setattr__(self, "masked", frozenset(int(i) for i in masked))


@dataclass
class HardCircuit:
    config: CellConfig
    connectivity: tuple[np.ndarray, ...]
    gates: list[np.ndarray]
    _flat: tuple | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self.connectivity = tuple(np.asarray(c, dtype=np.int64) for c in self.connectivity)
        self.gates = [np.asarray(g, dtype=np.int64).copy() for g in self.gates]
        for l, (par, g) in enumerate(zip(self.connectivity, self.gates)):
            n = self.config.widths[l]
            if par.shape != (n, 2) or g.shape != (n,):
                raise ValueError(f"layer {l}: shapes do not match width {n}")
            if g.min() < 0 or g.max() >= N_GATES:
                raise ValueError(f"layer {l}: gate id out of range")
            if par.min() < 0 or par.max() >= self.config.fan_in(l):
                raise ValueError(f"layer {l}: parent index out of range")

    def __eq__(self, other):
        if not isinstance(other, HardCircuit):
            return NotImplemented
        return (
            self.config == other.config
            and all(np.array_equal(a, b) for a, b in zip(self.connectivity, other.connectivity))
            and all(np.array_equal(a, b) for a, b in zip(self.gates, other.gates))
        )

    @property
    def n_neurons(self) -> int:
        return sum(self.config.widths)

    @property
    def n_in(self) -> int:
        return self.config.P + self.config.S

    def gate_ids(self) -> np.ndarray:
        return np.concatenate(self.gates)

    def with_gate(self, layer: int, j: int, gate_id: int) -> "HardCircuit":
        gates = [g.copy() for g in self.gates]
        gates[layer][j] = gate_id
        return HardCircuit(self.config, self.connectivity, gates)

    def flat(self) -> tuple[np.ndarray, np.ndarray]:
        """Global parent node indices (N, 2) and truth tables (N, 9)."""
        if self._flat is None:
            parents = []
            offset = 0
            for l, par in enumerate(self.connectivity):
                base = 0 if l == 0 else self.n_in + offset - self.config.widths[l - 1]
                parents.append(par + base)
                offset += self.config.widths[l]
            tables = all_tables()[self.gate_ids()]
            self._flat = (np.ascontiguousarray(np.concatenate(parents)), np.ascontiguousarray(tables))
        return self._flat

    def layer_of(self, neuron: int) -> tuple[int, int]:
        for l, n in enumerate(self.config.widths):
            if neuron < n:
                return l, neuron
            neuron -= n
        raise IndexError(neuron)

    def layer_start(self, layer: int) -> int:
        """Global node index of the first gate of ``layer``."""
        return self.n_in + sum(self.config.widths[:layer])


# ---------------------------------------------------------------------------
# kernels


@numba.njit(cache=True)
def _step(parents, tables, buf, start):
    n_in = buf.shape[0] - parents.shape[0]
    for j in range(start - n_in, parents.shape[0]):
        a = buf[parents[j, 0]]
        b = buf[parents[j, 1]]
        buf[n_in + j] = tables[j, 3 * (a + 1) + (b + 1)]


@numba.njit(cache=True)
def _run_batch(parents, tables, P, S, K, X, H0, keep_buf):
    B, _, T = X.shape
    N = parents.shape[0]
    n_nodes = P + S + N
    out = np.zeros((B, K, T), dtype=np.int8)
    states = np.zeros((B, S, T + 1), dtype=np.int8)
    bufs = np.zeros((B if keep_buf else 0, T, n_nodes), dtype=np.int8)
    buf = np.zeros(n_nodes, dtype=np.int8)
    for r in range(B):
        for i in range(S):
            buf[P + i] = H0[r, i]
            states[r, i, 0] = H0[r, i]
        for t in range(T):
            for i in range(P):
                buf[i] = X[r, i, t]
            _step(parents, tables, buf, P + S)
            for k in range(K):
                out[r, k, t] = buf[n_nodes - K + k]
            if keep_buf:
                bufs[r, t, :] = buf
            for i in range(S):
                buf[P + i] = buf[n_nodes - S - K + i]
                states[r, i, t + 1] = buf[P + i]
    return out, states, bufs


@numba.njit(cache=True)
def _score_swap(parents, tables, P, S, K, X, teacher, base_buf, base_dis, target, cand, cone, bound):
    """Disagreement count after replacing gate ``target`` by truth table ``cand``.

    Stops early once the count reaches ``bound``.  While the running state
    equals the cached baseline run, only the gates in ``cone`` (the target and
    its same-step descendants, ascending) are recomputed, and a step where the
    swapped gate outputs its baseline value is copied from the baseline.
    """
    B, _, T = X.shape
    N = parents.shape[0]
    n_in = P + S
    n_nodes = n_in + N
    node = n_in + target
    pa = parents[target, 0]
    pb = parents[target, 1]
    old = tables[target].copy()
    tables[target, :] = cand
    buf = np.zeros(n_nodes, dtype=np.int8)
    count = 0
    for r in range(B):
        same = True
        for t in range(T):
            if same:
                v = cand[3 * (base_buf[r, t, pa] + 1) + (base_buf[r, t, pb] + 1)]
                if v == base_buf[r, t, node]:
                    count += base_dis[r, t]
                    if count >= bound:
                        tables[target, :] = old
                        return count
                    continue
                buf[:] = base_buf[r, t, :]
                buf[node] = v
                for ci in range(1, cone.shape[0]):
                    j = cone[ci]
                    buf[n_in + j] = tables[j, 3 * (buf[parents[j, 0]] + 1) + (buf[parents[j, 1]] + 1)]
            else:
                for i in range(P):
                    buf[i] = X[r, i, t]
                _step(parents, tables, buf, n_in)
            for k in range(K):
                if buf[n_nodes - K + k] != teacher[r, k, t]:
                    count += 1
            if count >= bound:
                tables[target, :] = old
                return count
            same = True
            for i in range(S):
                nxt = buf[n_nodes - S - K + i]
                if nxt != base_buf[r, t, n_nodes - S - K + i]:
                    same = False
                buf[P + i] = nxt
    tables[target, :] = old
    return count


# ---------------------------------------------------------------------------
# public API


def _as_trits(x) -> np.ndarray:
    arr = np.asarray(x)
    if arr.size and (arr.min() < -1 or arr.max() > 1 or not np.all(arr == np.round(arr))):
        raise ValueError("inputs must be trits")
    return np.ascontiguousarray(arr, dtype=np.int8)


def run_full(c: HardCircuit, trit_signals, mask: InputMask = InputMask(), h0=None, keep_buf=False):
    """Batched run returning verdicts (B, K, T), states (B, S, T+1) and node buffers."""
    X = _as_trits(trit_signals)
    if X.ndim == 2:
        X = X[None]
    cfg = c.config
    if X.shape[1] != cfg.P:
        raise ValueError(f"circuit expects P={cfg.P} predicates, got {X.shape[1]}")
    if mask.masked:
        if max(mask.masked) >= cfg.P:
            raise ValueError("mask index out of range")
        X = X.copy()
        X[:, sorted(mask.masked), :] = 0
    H0 = np.zeros((X.shape[0], cfg.S), dtype=np.int8)
    if h0 is not None:
        H0[:] = _as_trits(h0)
    parents, tables = c.flat()
    return _run_batch(parents, tables, cfg.P, cfg.S, cfg.K, X, H0, keep_buf)


def run(c: HardCircuit, trit_signals, mask: InputMask = InputMask(), h0=None) -> np.ndarray:
    """Verdict trace from the all-unknown state; (P, T) -> (K, T), (B, P, T) -> (B, K, T)."""
    single = np.ndim(trit_signals) == 2
    out = run_full(c, trit_signals, mask, h0)[0]
    return out[0] if single else out


def circuit_step(c: HardCircuit, p, st: MonitorState) -> tuple[MonitorState, np.ndarray]:
    cfg = c.config
    parents, tables = c.flat()
    buf = np.zeros(c.n_in + c.n_neurons, dtype=np.int8)
    buf[: cfg.P] = _as_trits(p)
    buf[cfg.P : c.n_in] = st.h
    _step(parents, tables, buf, c.n_in)
    end = len(buf)
    h = tuple(int(v) for v in buf[end - cfg.S - cfg.K : end - cfg.K])
    return MonitorState(h, st.t + 1), buf[end - cfg.K :].copy()


def state_update(c: HardCircuit, p, h) -> tuple[np.ndarray, np.ndarray]:
    """F(p, h): next state and verdict as arrays."""
    st, y = circuit_step(c, p, MonitorState(tuple(int(v) for v in h)))
    return np.array(st.h, dtype=np.int8), y


def forward_cone(c: HardCircuit, neuron: int) -> np.ndarray:
    """``neuron`` and every gate it feeds within one step, in evaluation order."""
    parents, _ = c.flat()
    n_in = c.n_in
    hit = np.zeros(c.n_neurons, dtype=bool)
    hit[neuron] = True
    for j in range(neuron + 1, c.n_neurons):
        pa, pb = parents[j] - n_in
        hit[j] = (pa >= 0 and hit[pa]) or (pb >= 0 and hit[pb])
    return np.flatnonzero(hit)


def live_neurons(c: HardCircuit) -> np.ndarray:
    """Gates whose value can reach a verdict, directly or through the state."""
    cfg = c.config
    parents, _ = c.flat()
    n_in = c.n_in
    n_nodes = n_in + c.n_neurons
    live = np.zeros(n_nodes, dtype=bool)
    live[n_nodes - cfg.K :] = True
    while True:
        before = live.sum()
        for j in range(c.n_neurons - 1, -1, -1):
            if live[n_in + j]:
                live[parents[j]] = True
        for i in range(cfg.S):
            if live[cfg.P + i]:
                live[n_nodes - cfg.S - cfg.K + i] = True
        if live.sum() == before:
            return live[n_in:]


def gate_census(c: HardCircuit) -> dict:
    ids = c.gate_ids()
    nm = nm_mask()[ids]
    im = im_mask()[ids]
    const = constant_mask()[ids]
    n = len(ids)
    return {
        "neurons": n,
        "NM": int(nm.sum()),
        "IM": int(im.sum()),
        "NM_AND_IM": int((nm & im).sum()),
        "constant": int(const.sum()),
        "neither": int((~nm & ~im).sum()),
        "NM_only": int((nm & ~im).sum()),
        "IM_only": int((im & ~nm).sum()),
        "frac_NM": float(nm.mean()) if n else 1.0,
        "frac_IM": float(im.mean()) if n else 1.0,
        "frac_NM_AND_IM": float((nm & im).mean()) if n else 1.0,
    }


def is_all_im(c: HardCircuit, nonconstant: bool = False) -> bool:
    ids = c.gate_ids()
    ok = im_mask()[ids].all()
    if nonconstant:
        ok = ok and not constant_mask()[ids].any()
    return bool(ok)


def circuit_to_json(c: HardCircuit, extra: dict | None = None) -> str:
    doc = {
        "format": "rdtlgn.hardcircuit",
        "version": CIRCUIT_VERSION,
        "config": asdict(c.config),
        "connectivity": [p.tolist() for p in c.connectivity],
        "gates": [g.tolist() for g in c.gates],
    }
    if extra:
        doc.update(extra)
    return json.dumps(doc, indent=1)


def circuit_from_json(text: str) -> HardCircuit:
    doc = json.loads(text)
    if doc.get("format") != "rdtlgn.hardcircuit" or doc.get("version") != CIRCUIT_VERSION:
        raise ValueError(f"unsupported circuit file {doc.get('format')} v{doc.get('version')}")
    cfg = CellConfig(**doc["config"])
    conn = tuple(np.array(p, dtype=np.int64).reshape(-1, 2) for p in doc["connectivity"])
    return HardCircuit(cfg, conn, [np.array(g, dtype=np.int64) for g in doc["gates"]])
