"""The six benchmark specifications over the navigation predicates.

Formulas use local predicate indices; ``predicates`` maps local index ``k`` to
a dataset predicate name, so ``p0`` in S01 is ``mu_g`` and ``p1`` is ``mu_h``.
"""

from __future__ import annotations

from dataclasses import dataclass

from .stl import Formula, parse_formula

PREDICATE_NAMES = ("mu_g", "mu_s", "mu_m", "mu_h", "mu_p")


@dataclass(frozen=True)
class SpecDef:
    name: str
    text: str
    predicates: tuple[str, ...]
    task: str

    @property
    def formula(self) -> Formula:
        return parse_formula(self.text)

    @property
    def P(self) -> int:
        return len(self.predicates)

    @property
    def columns(self) -> list[int]:
        return [PREDICATE_NAMES.index(p) for p in self.predicates]


SPECS = {
    s.name: s
    for s in [
        SpecDef("S01", "G[0,3](p1 U[0,3] p0)", ("mu_g", "mu_h"), "head -> goal"),
        SpecDef("S02", "G[0,2]((p1 | p2) U[0,3] p0)", ("mu_g", "mu_h", "mu_p"), "approach -> goal"),
        SpecDef(
            "S03",
            "G[0,2]((p2 | p3) U[0,3] (p0 | p1))",
            ("mu_g", "mu_p", "mu_h", "mu_s"),
            "safe -> arrive",
        ),
        SpecDef(
            "S04",
            "G[0,2]((p2 | p3) U[0,3] (p0 | p1))",
            ("mu_g", "mu_s", "mu_h", "mu_p"),
            "approach -> safe",
        ),
        SpecDef(
            "S05",
            "G[0,2]((p1 | p2) U[0,3] p0) & F[0,3](p3 | p4)",
            ("mu_g", "mu_h", "mu_s", "mu_p", "mu_m"),
            "safe -> goal + move",
        ),
        SpecDef(
            "S06",
            "G[0,2]((p2 | p3 | p4) U[0,3] (p0 | p1))",
            ("mu_g", "mu_s", "mu_h", "mu_p", "mu_m"),
            "active -> safe",
        ),
    ]
}
