"""Prediction and degradation metrics for hardened circuits."""

from __future__ import annotations

import itertools
from dataclasses import asdict, dataclass, field
from math import comb
from typing import Callable

import numpy as np

from .circuit import HardCircuit, InputMask, run, state_update
from .ternary import leq_information_vec


def accuracy(verdicts, labels) -> float:
    """Fraction of exactly matching trits, pooled over all trajectories and steps."""
    v = np.asarray(verdicts)
    y = np.asarray(labels)
    if v.shape != y.shape:
        raise ValueError(f"verdicts {v.shape} and labels {y.shape} differ in shape")
    return float((v == y).mean()) if v.size else 1.0


def _masked(signals: np.ndarray, masked) -> np.ndarray:
    x = np.array(signals, copy=True)
    x[:, list(masked), :] = 0
    return x


def preservation_of(runner: Callable[[np.ndarray], np.ndarray], signals) -> float:
    """1 - (sign flips under single-predicate masking) / (predicates x steps x trajectories).

    ``runner`` maps inputs (N, P, T) to verdicts (N, K, T); a masked predicate
    is set to 0.  Only +1 <-> -1 counts as a flip.
    """
    x = np.asarray(signals)
    if x.ndim == 2:
        x = x[None]
    base = runner(x)
    flips = 0
    total = 0
    for i in range(x.shape[1]):
        v = runner(_masked(x, [i]))
        flips += int((v.astype(np.int64) * base < 0).sum())
        total += base.size
    return 1.0 - flips / total if total else 1.0


def preservation(c: HardCircuit, trit_signals, baseline_verdicts=None) -> float:
    x = np.asarray(trit_signals, dtype=np.int8)
    if x.ndim == 2:
        x = x[None]
    if baseline_verdicts is None:
        return preservation_of(lambda s: run(c, s), x)
    base = np.asarray(baseline_verdicts)
    flips = total = 0
    for i in range(x.shape[1]):
        v = run(c, x, InputMask([i]))
        flips += int((v.astype(np.int64) * base < 0).sum())
        total += base.size
    return 1.0 - flips / total if total else 1.0


MAX_LATTICE_P = 12


def subset_verdicts(c: HardCircuit, trit_signals) -> dict[frozenset, np.ndarray]:
    """Verdicts with only the predicates in ``U`` observed, for every subset ``U``."""
    x = np.asarray(trit_signals, dtype=np.int8)
    if x.ndim == 2:
        x = x[None]
    P = x.shape[1]
    if P > MAX_LATTICE_P:
        raise ValueError(f"P={P} too large for power-set enumeration (max {MAX_LATTICE_P})")
    out = {}
    for r in range(P + 1):
        for U in itertools.combinations(range(P), r):
            hidden = [i for i in range(P) if i not in U]
            out[frozenset(U)] = run(c, x, InputMask(hidden))
    return out


def lattice_compliance(c: HardCircuit, trit_signals, covering_only: bool = False) -> float:
    """Share of (A subset-of B, t, trajectory) with verdict(A) below verdict(B) in the information order."""
    verdicts = subset_verdicts(c, trit_signals)
    keys = list(verdicts)
    ok = total = 0
    for A in keys:
        for B in keys:
            if not (A < B) or (covering_only and len(B - A) != 1):
                continue
            comp = leq_information_vec(verdicts[A], verdicts[B])
            ok += int(comp.sum())
            total += comp.size
    return ok / total if total else 1.0


def abstention_profile(
    c: HardCircuit, trit_signals, levels=None, max_masks: int = 64, seed: int = 0
) -> dict[int, float]:
    """Mean share of abstaining verdicts with ``k`` predicates masked, per level ``k``."""
    x = np.asarray(trit_signals, dtype=np.int8)
    if x.ndim == 2:
        x = x[None]
    P = x.shape[1]
    levels = range(P + 1) if levels is None else levels
    rng = np.random.default_rng(seed)
    curve = {}
    for k in levels:
        if comb(P, k) <= max_masks:
            masks = list(itertools.combinations(range(P), k))
        else:
            seen = set()
            while len(seen) < max_masks:
                seen.add(tuple(sorted(rng.choice(P, size=k, replace=False).tolist())))
            masks = sorted(seen)
        curve[int(k)] = float(np.mean([(run(c, x, InputMask(m)) == 0).mean() for m in masks]))
    return curve


@dataclass
class ProbeResult:
    converged: bool
    steps: int
    cycle_period: int | None
    ascending: bool
    chain: list[tuple[int, ...]] = field(default_factory=list)


def fixed_point_probe(c: HardCircuit, p, max_steps: int | None = None, h0=None) -> ProbeResult:
    """Iterate ``h <- F(p, h)`` under constant input until a state repeats.

    ``steps`` is the number of updates before the first fixed point (or before
    entering the cycle).  ``ascending`` records whether every update moved up
    (or stayed) in the information order.
    """
    S = c.config.S
    max_steps = max_steps if max_steps is not None else 3**S + 1
    h = np.zeros(S, dtype=np.int8) if h0 is None else np.asarray(h0, dtype=np.int8)
    seen = {tuple(h.tolist()): 0}
    chain = [tuple(h.tolist())]
    ascending = True
    for k in range(1, max_steps + 1):
        nxt, _ = state_update(c, p, h)
        ascending &= bool(leq_information_vec(h, nxt).all())
        key = tuple(nxt.tolist())
        if key in seen:
            first = seen[key]
            period = k - first
            if period == 1:
                return ProbeResult(True, first, None, ascending, chain)
            return ProbeResult(False, first, period, ascending, chain)
        seen[key] = k
        chain.append(key)
        h = nxt
    return ProbeResult(False, max_steps, None, ascending, chain)


@dataclass
class EvalReport:
    spec: str
    pipeline: str
    accuracy: float
    preservation: float
    lattice_compliance: float | None
    abstention_curve: dict
    gate_census: dict
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ("accuracy", "preservation", "lattice_compliance"):
            v = getattr(self, name)
            if v is not None and not 0.0 <= v <= 1.0:
                raise ValueError(f"{name}={v} outside [0, 1]")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["abstention_curve"] = {str(k): v for k, v in self.abstention_curve.items()}
        return d
