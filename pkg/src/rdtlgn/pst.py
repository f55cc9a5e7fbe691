"""Degree-(2,2) polynomial neurons and their bijection with ternary truth tables."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .ternary import GRID, GateTable

MONOMIALS = ("1", "a", "b", "ab", "a2", "b2", "a2b", "ab2", "a2b2")


def monomials(a, b) -> np.ndarray:
    """Monomial vector ``[1, a, b, ab, a^2, b^2, a^2 b, a b^2, a^2 b^2]`` along a new last axis."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    a2 = a * a
    b2 = b * b
    return np.stack(
        [np.ones_like(a), a, b, a * b, a2, b2, a2 * b, a * b2, a2 * b2], axis=-1
    )


def monomials_da(a, b) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    z = np.zeros_like(a)
    return np.stack(
        [z, np.ones_like(a), z, b, 2 * a, z, 2 * a * b, b * b, 2 * a * b * b], axis=-1
    )


def monomials_db(a, b) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    z = np.zeros_like(a)
    return np.stack(
        [z, z, np.ones_like(a), a, z, 2 * b, a * a, 2 * a * b, 2 * a * a * b], axis=-1
    )


@dataclass(frozen=True)
class VandermondeMatrix:
    V: tuple[tuple[Fraction, ...], ...]
    V_inv: tuple[tuple[Fraction, ...], ...]

    @property
    def V_float(self) -> np.ndarray:
        return _as_float(self.V)

    @property
    def V_inv_float(self) -> np.ndarray:
        return _as_float(self.V_inv)


def _as_float(rows) -> np.ndarray:
    out = np.array([[float(x) for x in row] for row in rows])
    out.setflags(write=False)
    return out


def _exact_inverse(rows: list[list[Fraction]]) -> list[list[Fraction]]:
    n = len(rows)
    aug = [list(r) + [Fraction(int(i == j)) for j in range(n)] for i, r in enumerate(rows)]
    for col in range(n):
        piv = next(r for r in range(col, n) if aug[r][col] != 0)
        aug[col], aug[piv] = aug[piv], aug[col]
        p = aug[col][col]
        aug[col] = [x / p for x in aug[col]]
        for r in range(n):
            if r != col and aug[r][col] != 0:
                f = aug[r][col]
                aug[r] = [x - f * y for x, y in zip(aug[r], aug[col])]
    return [row[n:] for row in aug]


@lru_cache(maxsize=None)
def vandermonde() -> VandermondeMatrix:
    """Exact V (rows = monomials at the 9 grid points) and its rational inverse."""
    rows = []
    for a, b in GRID:
        a, b = Fraction(a), Fraction(b)
        rows.append([Fraction(1), a, b, a * b, a * a, b * b, a * a * b, a * b * b, a * a * b * b])
    inv = _exact_inverse(rows)
    # every entry of the inverse is a multiple of 1/4
    assert all((4 * x).denominator == 1 for row in inv for x in row)
    return VandermondeMatrix(tuple(map(tuple, rows)), tuple(map(tuple, inv)))


@lru_cache(maxsize=None)
def _V() -> np.ndarray:
    return vandermonde().V_float


@lru_cache(maxsize=None)
def _V_inv() -> np.ndarray:
    return vandermonde().V_inv_float


def coeffs_from_table(t) -> np.ndarray:
    """Interpolating coefficients of a truth table (``GateTable`` or 9 values)."""
    if isinstance(t, GateTable):
        t = t.entries
    return _V_inv() @ np.asarray(t, dtype=float)


def coeffs_from_tables(tables: np.ndarray) -> np.ndarray:
    """Batched :func:`coeffs_from_table`, tables of shape (..., 9)."""
    return np.asarray(tables, dtype=float) @ _V_inv().T


def table_from_coeffs(w) -> np.ndarray:
    """Soft truth table ``V @ w`` (works on batches with a trailing axis of 9)."""
    return np.asarray(w, dtype=float) @ _V().T


def eval_poly(w, a, b):
    return monomials(a, b) @ np.asarray(w, dtype=float)


def clip(x):
    return np.clip(x, -1.0, 1.0)


def clip_grad(x):
    """Subgradient of clip: 1 on the closed interval [-1, 1], 0 outside."""
    x = np.asarray(x, dtype=float)
    return ((x >= -1.0) & (x <= 1.0)).astype(float)


def round_trit(x) -> np.ndarray:
    """Nearest trit; |x| = 0.5 goes to 0."""
    x = np.asarray(x, dtype=float)
    return (np.where(x > 0.5, 1, 0) + np.where(x < -0.5, -1, 0)).astype(np.int8)


def commitment_penalty(w) -> tuple[float, np.ndarray]:
    """Squared distance from the soft truth table of ``w`` to its rounded table."""
    t = table_from_coeffs(w)
    r = t - round_trit(t)
    return float(r @ r), 2.0 * _V().T @ r


def commitment_penalty_batch(W: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Row-wise penalty values (n,) and gradients (n, 9) for coefficients (n, 9)."""
    t = table_from_coeffs(W)
    r = t - round_trit(t)
    return (r * r).sum(axis=1), 2.0 * r @ _V()


def nearest_table_penalty_batch(W: np.ndarray, tables: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Squared distance from each soft table to the nearest of ``tables`` (m, 9)."""
    t = table_from_coeffs(W)
    tables = np.asarray(tables, dtype=float)
    d = ((t[:, None, :] - tables[None, :, :]) ** 2).sum(axis=2)
    k = d.argmin(axis=1)
    r = t - tables[k]
    return d[np.arange(len(W)), k], 2.0 * r @ _V()


@dataclass(frozen=True)
class AnnealSchedule:
    lambda_max: float = 0.3
    total_steps: int = 1000
    warmup_frac: float = 0.1
    shape: str = "linear"

    def __post_init__(self):
        if self.lambda_max <= 0:
            raise ValueError("lambda_max must be positive")
        if self.total_steps < 1:
            raise ValueError("total_steps must be positive")
        if self.shape != "linear":
            raise ValueError(f"unknown schedule shape {self.shape!r}")
        if not 0.0 <= self.warmup_frac < 1.0:
            raise ValueError("warmup_frac must lie in [0, 1)")


def anneal_lambda(sched: AnnealSchedule, step: int) -> float:
    """Zero during warmup, then a linear ramp reaching ``lambda_max`` at the last step."""
    if not 0 <= step <= sched.total_steps:
        raise ValueError(f"step {step} outside [0, {sched.total_steps}]")
    start = sched.warmup_frac * sched.total_steps
    if step <= start:
        return 0.0
    return sched.lambda_max * (step - start) / (sched.total_steps - start)
