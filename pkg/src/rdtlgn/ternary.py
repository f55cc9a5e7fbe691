"""Ternary domain {-1, 0, +1}, its two orders, and the two-input gate library.

Truth tables are stored as 9 trits indexed by ``3 * ord(a) + ord(b)`` with
``ord(-1) = 0, ord(0) = 1, ord(+1) = 2`` (``a`` is the outer loop).  A gate id
is the base-3 number ``sum(digit(entries[i]) * 3**i)`` with ``digit(t) = t + 1``.
"""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

N_GATES = 3**9
TRITS = (-1, 0, 1)

# (a, b) for each truth-table slot, in storage order.
GRID = tuple(itertools.product(TRITS, TRITS))
GRID_A = np.array([a for a, _ in GRID], dtype=np.int8)
GRID_B = np.array([b for _, b in GRID], dtype=np.int8)
_POW3 = 3 ** np.arange(9, dtype=np.int64)


class Trit(enum.IntEnum):
    F = -1
    U = 0
    T = 1


def check_trit(x) -> int:
    x = int(x)
    if x not in (-1, 0, 1):
        raise ValueError(f"not a trit: {x}")
    return x


def slot(a: int, b: int) -> int:
    """Truth-table slot of the input pair ``(a, b)``."""
    return 3 * (a + 1) + (b + 1)


def leq_numerical(a: int, b: int) -> bool:
    return a <= b


def leq_information(a: int, b: int) -> bool:
    """``a`` carries no more information than ``b``: 0 is below both +1 and -1."""
    return a == 0 or a == b


def leq_information_vec(a, b) -> np.ndarray:
    a = np.asarray(a)
    b = np.asarray(b)
    return (a == 0) | (a == b)


@dataclass(frozen=True)
class GateTable:
    entries: tuple[int, ...]

    def __post_init__(self):
        if len(self.entries) != 9:
            raise ValueError("a gate table has exactly 9 entries")
        object.__setattr__(self, "entries", tuple(check_trit(e) for e in self.entries))

    @classmethod
    def from_function(cls, fn) -> "GateTable":
        return cls(tuple(int(fn(a, b)) for a, b in GRID))

    @classmethod
    def from_id(cls, gate_id: int) -> "GateTable":
        return cls(tuple(int(x) for x in id_to_entries(gate_id)))

    @property
    def id(self) -> int:
        return entries_to_id(self.entries)

    def __call__(self, a: int, b: int) -> int:
        return self.entries[slot(a, b)]

    def as_array(self) -> np.ndarray:
        return np.array(self.entries, dtype=np.int8)


def entries_to_id(entries) -> int:
    digits = np.asarray(entries, dtype=np.int64) + 1
    return int(digits @ _POW3)


def id_to_entries(gate_id: int) -> np.ndarray:
    if not 0 <= gate_id < N_GATES:
        raise ValueError(f"gate id out of range: {gate_id}")
    return ((gate_id // _POW3) % 3 - 1).astype(np.int8)


@lru_cache(maxsize=None)
def all_tables() -> np.ndarray:
    """Truth tables of every gate, shape (19683, 9), row ``i`` is gate id ``i``."""
    ids = np.arange(N_GATES, dtype=np.int64)
    tables = (ids[:, None] // _POW3[None, :]) % 3 - 1
    tables = tables.astype(np.int8)
    tables.setflags(write=False)
    return tables


def apply_gate(g: GateTable, a: int, b: int) -> int:
    return g.entries[slot(a, b)]


KLEENE_AND = GateTable.from_function(min)
KLEENE_OR = GateTable.from_function(max)
KLEENE_NOT = GateTable.from_function(lambda a, b: -a)  # unary NOT on the first input
PROJ_1 = GateTable.from_function(lambda a, b: a)
PROJ_2 = GateTable.from_function(lambda a, b: b)
CONST_F = GateTable.from_function(lambda a, b: -1)
CONST_U = GateTable.from_function(lambda a, b: 0)
CONST_T = GateTable.from_function(lambda a, b: 1)


def _comparable_pairs(leq) -> list[tuple[int, int]]:
    """Slot pairs (i, j) with grid point i <= grid point j componentwise under ``leq``."""
    pairs = []
    for i, (a, b) in enumerate(GRID):
        for j, (a2, b2) in enumerate(GRID):
            if leq(a, a2) and leq(b, b2):
                pairs.append((i, j))
    return pairs


_NM_PAIRS = _comparable_pairs(leq_numerical)
_IM_PAIRS = _comparable_pairs(leq_information)


@dataclass(frozen=True)
class GateClass:
    is_nm: bool
    is_im: bool
    is_constant: bool


def classify_gate(g: GateTable) -> GateClass:
    e = g.entries
    return GateClass(
        is_nm=all(leq_numerical(e[i], e[j]) for i, j in _NM_PAIRS),
        is_im=all(leq_information(e[i], e[j]) for i, j in _IM_PAIRS),
        is_constant=len(set(e)) == 1,
    )


@lru_cache(maxsize=None)
def _classify_all() -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    t = all_tables()
    nm = np.ones(N_GATES, dtype=bool)
    for i, j in _NM_PAIRS:
        nm &= t[:, i] <= t[:, j]
    im = np.ones(N_GATES, dtype=bool)
    for i, j in _IM_PAIRS:
        im &= leq_information_vec(t[:, i], t[:, j])
    const = (t == t[:, :1]).all(axis=1)
    for arr in (nm, im, const):
        arr.setflags(write=False)
    return nm, im, const


def nm_mask() -> np.ndarray:
    return _classify_all()[0]


def im_mask() -> np.ndarray:
    return _classify_all()[1]


def constant_mask() -> np.ndarray:
    return _classify_all()[2]


class VocabTag(str, enum.Enum):
    FULL = "FULL"
    NM = "NM"
    IM = "IM"
    NM_AND_IM = "NM_AND_IM"


@dataclass(frozen=True)
class VocabularyKind:
    tag: VocabTag
    exclude_constants: bool = False

    @classmethod
    def parse(cls, text: str) -> "VocabularyKind":
        """``"NM"``, ``"NM_AND_IM"``, ... with an optional ``"_nonconst"`` suffix."""
        exclude = text.endswith("_nonconst")
        if exclude:
            text = text[: -len("_nonconst")]
        return cls(VocabTag(text), exclude)

    def __str__(self) -> str:
        return self.tag.value + ("_nonconst" if self.exclude_constants else "")


def vocabulary_mask(kind: VocabularyKind) -> np.ndarray:
    nm, im, const = _classify_all()
    mask = {
        VocabTag.FULL: np.ones(N_GATES, dtype=bool),
        VocabTag.NM: nm,
        VocabTag.IM: im,
        VocabTag.NM_AND_IM: nm & im,
    }[VocabTag(kind.tag)]
    if kind.exclude_constants:
        mask = mask & ~const
    return mask


def enumerate_vocabulary(kind: VocabularyKind) -> list[int]:
    return np.flatnonzero(vocabulary_mask(kind)).tolist()


def hamming_distance(g1: GateTable, g2: GateTable) -> int:
    return sum(x != y for x, y in zip(g1.entries, g2.entries))


def census() -> dict[str, int]:
    """Vocabulary cardinalities, with and without the three constant gates."""
    out = {}
    for tag in (VocabTag.NM, VocabTag.IM, VocabTag.NM_AND_IM):
        out[tag.value] = len(enumerate_vocabulary(VocabularyKind(tag)))
        out[tag.value + "_nonconst"] = len(enumerate_vocabulary(VocabularyKind(tag, True)))
    return out
