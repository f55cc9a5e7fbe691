"""Bounded discrete-time STL: syntax, parsing, and robustness semantics.

Robustness is evaluated on whole signal arrays of shape ``(..., P, T)`` and
returns ``(..., T)``: one value per evaluation time.  Temporal windows are
clamped to the end of the trace, ``[t+a, min(t+b, T-1)]``, falling back to the
singleton ``{T-1}`` when ``t+a`` runs past the end.

Until uses the closed-prefix form::

    rho(f U[a,b] g, t) = max_{tau in window} min(rho(g, tau), min_{s in [t, tau]} rho(f, s))
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Union

import numpy as np

R_BOUND = 1.0


class FormulaSyntaxError(ValueError):
    def __init__(self, msg: str, pos: int):
        super().__init__(f"{msg} at position {pos}")
        self.pos = pos


@dataclass(frozen=True)
class Interval:
    a: int
    b: int

    def __post_init__(self):
        if self.a < 0 or self.b < 0:
            raise ValueError("interval bounds must be nonnegative")
        if self.a > self.b:
            raise ValueError(f"empty interval [{self.a},{self.b}]")

    @property
    def width(self) -> int:
        return self.b - self.a + 1

    def __str__(self):
        return f"[{self.a},{self.b}]"


@dataclass(frozen=True)
class Pred:
    index: int


@dataclass(frozen=True)
class Not:
    child: "Formula"


@dataclass(frozen=True)
class And:
    left: "Formula"
    right: "Formula"


@dataclass(frozen=True)
class Or:
    left: "Formula"
    right: "Formula"


@dataclass(frozen=True)
class Always:
    interval: Interval
    child: "Formula"


@dataclass(frozen=True)
class Eventually:
    interval: Interval
    child: "Formula"


@dataclass(frozen=True)
class Until:
    interval: Interval
    left: "Formula"
    right: "Formula"


Formula = Union[Pred, Not, And, Or, Always, Eventually, Until]
TEMPORAL = (Always, Eventually, Until)


# ---------------------------------------------------------------------------
# parsing / printing

_TOKEN = re.compile(r"\s*(?:(p\d+)|([GFU])\s*\[\s*(\d+)\s*,\s*(\d+)\s*\]|([!&|()]))")


def _tokenize(text: str):
    pos = 0
    toks = []
    while True:
        while pos < len(text) and text[pos].isspace():
            pos += 1
        if pos == len(text):
            break
        m = _TOKEN.match(text, pos)
        if m is None:
            raise FormulaSyntaxError(f"unexpected character {text[pos]!r}", pos)
        start = m.start() + (len(m.group(0)) - len(m.group(0).lstrip()))
        if m.group(1):
            toks.append(("pred", int(m.group(1)[1:]), start))
        elif m.group(2):
            a, b = int(m.group(3)), int(m.group(4))
            if a > b:
                raise FormulaSyntaxError(f"interval [{a},{b}] has a > b", start)
            toks.append((m.group(2), Interval(a, b), start))
        else:
            toks.append((m.group(5), None, start))
        pos = m.end()
    toks.append(("eof", None, len(text)))
    return toks


class _Parser:
    # precedence, loosest first: U (right-assoc), |, &, then prefix ! G F
    def __init__(self, text: str):
        self.toks = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.toks[self.i]

    def take(self, kind=None):
        tok = self.toks[self.i]
        if kind is not None and tok[0] != kind:
            raise FormulaSyntaxError(f"expected {kind!r}, found {tok[0]!r}", tok[2])
        self.i += 1
        return tok

    def parse(self) -> Formula:
        phi = self.until()
        self.take("eof")
        return phi

    def until(self) -> Formula:
        left = self.disj()
        if self.peek()[0] == "U":
            iv = self.take()[1]
            return Until(iv, left, self.until())
        return left

    def disj(self) -> Formula:
        node = self.conj()
        while self.peek()[0] == "|":
            self.take()
            node = Or(node, self.conj())
        return node

    def conj(self) -> Formula:
        node = self.unary()
        while self.peek()[0] == "&":
            self.take()
            node = And(node, self.unary())
        return node

    def unary(self) -> Formula:
        kind, val, pos = self.peek()
        if kind == "!":
            self.take()
            return Not(self.unary())
        if kind == "G":
            self.take()
            return Always(val, self.unary())
        if kind == "F":
            self.take()
            return Eventually(val, self.unary())
        if kind == "pred":
            self.take()
            return Pred(val)
        if kind == "(":
            self.take()
            node = self.until()
            self.take(")")
            return node
        raise FormulaSyntaxError(f"unexpected token {kind!r}", pos)


def parse_formula(text: str) -> Formula:
    return _Parser(text).parse()


def to_text(phi: Formula) -> str:
    """Print a formula so that ``parse_formula(to_text(phi)) == phi``."""

    def wrap(node):
        s = to_text(node)
        return s if isinstance(node, Pred) else f"({s})"

    if isinstance(phi, Pred):
        return f"p{phi.index}"
    if isinstance(phi, Not):
        return "!" + wrap(phi.child)
    if isinstance(phi, And):
        return f"{wrap(phi.left)} & {wrap(phi.right)}"
    if isinstance(phi, Or):
        return f"{wrap(phi.left)} | {wrap(phi.right)}"
    if isinstance(phi, Always):
        return f"G{phi.interval} {wrap(phi.child)}"
    if isinstance(phi, Eventually):
        return f"F{phi.interval} {wrap(phi.child)}"
    if isinstance(phi, Until):
        return f"{wrap(phi.left)} U{phi.interval} {wrap(phi.right)}"
    raise TypeError(phi)


def predicates(phi: Formula) -> set[int]:
    if isinstance(phi, Pred):
        return {phi.index}
    return set().union(*(predicates(c) for c in _children(phi)))


def _children(phi: Formula) -> tuple:
    if isinstance(phi, Pred):
        return ()
    if isinstance(phi, (Not, Always, Eventually)):
        return (phi.child,)
    return (phi.left, phi.right)


# ---------------------------------------------------------------------------
# structural measures


def horizon(phi: Formula) -> int:
    if isinstance(phi, Pred):
        return 0
    if isinstance(phi, Not):
        return horizon(phi.child)
    if isinstance(phi, (And, Or)):
        return max(horizon(phi.left), horizon(phi.right))
    if isinstance(phi, (Always, Eventually)):
        return phi.interval.b + horizon(phi.child)
    return phi.interval.b + max(horizon(phi.left), horizon(phi.right))


def state_complexity(phi: Formula) -> int:
    """Hidden-trit lower bound B(phi): one shift register of length w per window."""
    if isinstance(phi, Pred):
        return 0
    if isinstance(phi, Not):
        return state_complexity(phi.child)
    if isinstance(phi, (And, Or)):
        return state_complexity(phi.left) + state_complexity(phi.right)
    w = phi.interval.width
    if isinstance(phi, (Always, Eventually)):
        return w + state_complexity(phi.child)
    return 2 * w + state_complexity(phi.left) + state_complexity(phi.right)


def temporal_depth(phi: Formula) -> int:
    own = 1 if isinstance(phi, TEMPORAL) else 0
    return own + max((temporal_depth(c) for c in _children(phi)), default=0)


def max_width(phi: Formula) -> int:
    own = phi.interval.width if isinstance(phi, TEMPORAL) else 0
    return max([own] + [max_width(c) for c in _children(phi)])


def depth_bound(phi: Formula) -> int:
    d = temporal_depth(phi)
    if d == 0:
        return 0
    return d * math.ceil(math.log2(max_width(phi)))


# ---------------------------------------------------------------------------
# robustness


def _window(t: int, iv: Interval, T: int) -> tuple[int, int]:
    lo = t + iv.a
    if lo > T - 1:
        return T - 1, T - 1
    return lo, min(t + iv.b, T - 1)


def _eval(phi: Formula, lo: np.ndarray, hi: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Interval robustness; leaf bounds have shape (..., P, T).

    min, max and negation are monotone, so evaluating both ends through the
    tree gives a sound enclosure (exact when lo == hi).
    """
    T = lo.shape[-1]
    if isinstance(phi, Pred):
        return lo[..., phi.index, :], hi[..., phi.index, :]
    if isinstance(phi, Not):
        l, h = _eval(phi.child, lo, hi)
        return -h, -l
    if isinstance(phi, (And, Or)):
        l1, h1 = _eval(phi.left, lo, hi)
        l2, h2 = _eval(phi.right, lo, hi)
        op = np.minimum if isinstance(phi, And) else np.maximum
        return op(l1, l2), op(h1, h2)
    if isinstance(phi, (Always, Eventually)):
        l, h = _eval(phi.child, lo, hi)
        red = np.min if isinstance(phi, Always) else np.max
        out_l = np.empty_like(l)
        out_h = np.empty_like(h)
        for t in range(T):
            s, e = _window(t, phi.interval, T)
            out_l[..., t] = red(l[..., s : e + 1], axis=-1)
            out_h[..., t] = red(h[..., s : e + 1], axis=-1)
        return out_l, out_h
    if isinstance(phi, Until):
        l1, h1 = _eval(phi.left, lo, hi)
        l2, h2 = _eval(phi.right, lo, hi)
        return _until(l1, l2, phi.interval), _until(h1, h2, phi.interval)
    raise TypeError(phi)


def _until(r1: np.ndarray, r2: np.ndarray, iv: Interval) -> np.ndarray:
    T = r1.shape[-1]
    out = np.empty_like(r1)
    for t in range(T):
        s, e = _window(t, iv, T)
        prefix = np.minimum.accumulate(r1[..., t : e + 1], axis=-1)
        cand = np.minimum(r2[..., s : e + 1], prefix[..., s - t :])
        out[..., t] = cand.max(axis=-1)
    return out


def robustness_trace(phi: Formula, signals) -> np.ndarray:
    """Oracle robustness at every time step; signals (..., P, T) -> (..., T)."""
    x = np.asarray(signals, dtype=float)
    return _eval(phi, x, x)[0]


def robustness_oracle(phi: Formula, signals, t: int) -> float:
    x = np.asarray(signals, dtype=float)
    if not 0 <= t < x.shape[-1]:
        raise ValueError(f"t={t} outside trace of length {x.shape[-1]}")
    return float(robustness_trace(phi, x)[..., t])


@dataclass(frozen=True)
class RobustnessInterval:
    lo: float
    hi: float

    def __post_init__(self):
        if self.lo > self.hi:
            raise ValueError("lo > hi")

    def verdict(self, delta: float = 0.0) -> int:
        return verdict_from_bounds(self.lo, self.hi, delta)


def verdict_from_bounds(lo, hi, delta: float = 0.0):
    lo = np.asarray(lo)
    hi = np.asarray(hi)
    v = np.where(lo > delta, 1, 0) + np.where(hi < -delta, -1, 0)
    return v.astype(np.int8) if v.ndim else int(v)


def _prefix_bounds(prefix: np.ndarray, length: int, r_bound: float):
    shape = prefix.shape[:-1] + (length,)
    lo = np.full(shape, -r_bound)
    hi = np.full(shape, r_bound)
    n = min(prefix.shape[-1], length)
    lo[..., :n] = prefix[..., :n]
    hi[..., :n] = prefix[..., :n]
    return lo, hi


def robustness_causal(
    phi: Formula,
    signals_prefix,
    t: int,
    total_length: int | None = None,
    r_bound: float = R_BOUND,
) -> RobustnessInterval:
    """Enclosure of rho(phi, x, t) over every completion of the observed prefix.

    ``signals_prefix`` holds samples ``0..t`` (extra columns are ignored).
    Unobserved samples range over ``[-r_bound, r_bound]``.  With
    ``total_length`` the trace is known to end there and windows are clamped
    as in the oracle; without it the future is unbounded.
    """
    x = np.asarray(signals_prefix, dtype=float)[..., : t + 1]
    if x.shape[-1] != t + 1:
        raise ValueError("prefix must contain samples 0..t")
    length = total_length if total_length is not None else t + horizon(phi) + 1
    lo, hi = _prefix_bounds(x, length, r_bound)
    l, h = _eval(phi, lo, hi)
    return RobustnessInterval(float(l[..., t]), float(h[..., t]))


def causal_verdicts(phi: Formula, signals, delta: float, r_bound: float = R_BOUND) -> np.ndarray:
    """Causal baseline verdict at every t from samples ``0..t`` only; (..., P, T) -> (..., T)."""
    x = np.asarray(signals, dtype=float)
    T = x.shape[-1]
    out = np.zeros(x.shape[:-2] + (T,), dtype=np.int8)
    for t in range(T):
        lo, hi = _prefix_bounds(x[..., : t + 1], T, r_bound)
        l, h = _eval(phi, lo, hi)
        out[..., t] = verdict_from_bounds(l[..., t], h[..., t], delta)
    return out


def quantize_signal(signals, delta: float) -> np.ndarray:
    """Sign-preserving dead-band quantization; ``|x| <= delta`` maps to 0."""
    if delta < 0:
        raise ValueError("delta must be nonnegative")
    x = np.asarray(signals, dtype=float)
    return (np.where(x > delta, 1, 0) + np.where(x < -delta, -1, 0)).astype(np.int8)


def robustness_qtc_trace(phi: Formula, trit_signals) -> np.ndarray:
    x = np.asarray(trit_signals, dtype=np.int8)
    return _eval(phi, x, x)[0].astype(np.int8)


def robustness_qtc(phi: Formula, trit_signals, t: int) -> int:
    return int(robustness_qtc_trace(phi, trit_signals)[..., t])


@dataclass(frozen=True)
class LabelConfig:
    pipeline: str = "CtQ"
    delta: float = 0.2

    def __post_init__(self):
        if self.pipeline not in ("CtQ", "QtC"):
            raise ValueError(f"unknown pipeline {self.pipeline!r}")
        if not 0.0 <= self.delta < 1.0:
            raise ValueError("dead band must lie in [0, 1)")


def make_labels(phi: Formula, signals, cfg: LabelConfig) -> np.ndarray:
    """Ternary label sequence(s); signals (..., P, T) -> (..., T) int8."""
    if cfg.pipeline == "CtQ":
        return quantize_signal(robustness_trace(phi, signals), cfg.delta)
    return robustness_qtc_trace(phi, quantize_signal(signals, cfg.delta))
