"""From a trained soft cell to a ternary circuit.

Phase 1 warm-starts every neuron by rounding its soft truth table against the
full library, then sweeps neurons from the output side back, giving each the
vocabulary gate with the fewest verdict disagreements against the soft
teacher.  A warm-start gate outside the vocabulary is always replaced (it is
admitted to the vocabulary in the context of the current circuit); a gate
already inside is only replaced by a strictly better one.  Phase 2 tries to move each remaining NM-only gate to a
nearby NM-and-IM gate without losing more than ``eta`` calibration accuracy.
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field

import numpy as np

from . import pst
from .cell import VERDICT_THRESHOLD, SoftCell, soft_verdicts, unroll
from .circuit import HardCircuit, _score_swap, forward_cone, gate_census, live_neurons, run_full
from .ternary import (
    VocabTag,
    VocabularyKind,
    all_tables,
    entries_to_id,
    vocabulary_mask,
)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class DistillConfig:
    vocabulary: VocabularyKind = VocabularyKind(VocabTag.NM, exclude_constants=True)
    max_sweeps: int = 10
    eta: float = 0.001
    calib_count: int | None = None
    teacher_threshold: float = VERDICT_THRESHOLD
    seed: int = 0

    def __post_init__(self):
        if self.eta < 0:
            raise ValueError("eta must be nonnegative")
        if self.calib_count is not None and self.calib_count < 1:
            raise ValueError("calib_count must be at least 1")
        if self.max_sweeps < 1:
            raise ValueError("max_sweeps must be at least 1")


@dataclass
class SwapRecord:
    neuron: int
    old_gate: int
    new_gate: int
    accuracy_delta: float


@dataclass
class Phase1Step:
    neuron: int
    old_gate: int
    new_gate: int
    before: int
    after: int
    admitted: bool  # forced move of an out-of-vocabulary warm-start gate


@dataclass
class DistillReport:
    warm_start_disagreement: int = 0
    sweep_disagreements: list[int] = field(default_factory=list)
    phase1_steps: list[Phase1Step] = field(default_factory=list)
    sweeps: int = 0
    total: int = 0
    phase2_reference_accuracy: float | None = None
    phase2_final_accuracy: float | None = None
    phase2_swaps: list[SwapRecord] = field(default_factory=list)
    census_phase1: dict = field(default_factory=dict)
    census_phase2: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


def round_neuron(w) -> int:
    """Gate id of the rounded soft truth table ``round(V w)``."""
    return entries_to_id(pst.round_trit(pst.table_from_coeffs(w)))


def round_cell(cell: SoftCell) -> HardCircuit:
    gates = [pst.round_trit(pst.table_from_coeffs(w)) for w in cell.coeffs]
    ids = [((g.astype(np.int64) + 1) @ (3 ** np.arange(9))) for g in gates]
    return HardCircuit(cell.config, cell.connectivity, ids)


def teacher_verdicts(cell: SoftCell, calib_inputs, threshold: float = VERDICT_THRESHOLD) -> np.ndarray:
    """Soft outputs thresholded at +-threshold; inputs (N, P, T) -> (N, K, T)."""
    y, _ = unroll(cell, np.asarray(calib_inputs, dtype=float))
    return soft_verdicts(y, threshold)


def _nearest_in_vocab(w, vocab: np.ndarray) -> int:
    """Vocabulary gate whose table is closest (squared error) to the soft table of ``w``."""
    soft = pst.table_from_coeffs(w)
    d = ((all_tables()[vocab] - soft) ** 2).sum(axis=1)
    return int(vocab[d.argmin()])


class _Scorer:
    """Disagreement of a circuit (and single-gate variants) against fixed targets."""

    def __init__(self, circuit: HardCircuit, X: np.ndarray, target: np.ndarray):
        self.X = np.ascontiguousarray(X, dtype=np.int8)
        self.target = np.ascontiguousarray(target, dtype=np.int8)
        self.total = int(self.target.size)
        self._cones = {}  # connectivity is fixed, so cones survive gate swaps
        self.reset(circuit)

    def reset(self, circuit: HardCircuit) -> None:
        self.circuit = circuit
        out, _, buf = run_full(circuit, self.X, keep_buf=True)
        self.base_buf = buf
        self.base_dis = (out != self.target).sum(axis=1).astype(np.int64)
        self.count = int(self.base_dis.sum())
        self.parents, tables = circuit.flat()
        self.tables = tables.copy()

    def swap_count(self, neuron: int, gate_id: int, bound: int) -> int:
        cfg = self.circuit.config
        if neuron not in self._cones:
            self._cones[neuron] = forward_cone(self.circuit, neuron)
        cand = np.ascontiguousarray(all_tables()[gate_id])
        return int(
            _score_swap(
                self.parents, self.tables, cfg.P, cfg.S, cfg.K, self.X, self.target,
                self.base_buf, self.base_dis, neuron, cand, self._cones[neuron], bound,
            )
        )


def _sweep_order(circuit: HardCircuit) -> list[int]:
    """Output-to-input: last layer first, descending index within a layer."""
    return list(range(circuit.n_neurons - 1, -1, -1))


def _calibration(calib_inputs, calib_trits, dc: DistillConfig):
    x = np.asarray(calib_inputs, dtype=float)
    q = np.asarray(calib_trits, dtype=np.int8)
    if x.shape[0] == 0:
        raise ValueError("empty calibration set")
    if dc.calib_count is not None and dc.calib_count < x.shape[0]:
        idx = np.sort(np.random.default_rng(dc.seed).choice(x.shape[0], dc.calib_count, replace=False))
        x, q = x[idx], q[idx]
    return x, q


def distill(
    cell: SoftCell,
    calib_inputs,
    calib_trits,
    dc: DistillConfig = DistillConfig(),
    teacher: np.ndarray | None = None,
) -> tuple[HardCircuit, DistillReport]:
    """Phase 1 trajectory distillation.

    ``calib_inputs`` are what the soft teacher sees (continuous or quantized
    predicates, per pipeline); ``calib_trits`` are the quantized predicates the
    circuit sees.  Both have shape (N, P, T).
    """
    x, q = _calibration(calib_inputs, calib_trits, dc)
    if teacher is None:
        teacher = teacher_verdicts(cell, x, dc.teacher_threshold)
    vocab = np.flatnonzero(vocabulary_mask(dc.vocabulary))
    report = DistillReport()

    circuit = round_cell(cell)
    scorer = _Scorer(circuit, q, teacher)
    report.total = scorer.total
    report.warm_start_disagreement = scorer.count

    allowed = np.zeros(len(all_tables()), dtype=bool)
    allowed[vocab] = True
    live = live_neurons(circuit)
    # neurons that cannot reach an output take the nearest vocabulary table
    for j in np.flatnonzero(~live):
        layer, k = circuit.layer_of(int(j))
        if not allowed[circuit.gates[layer][k]]:
            circuit = circuit.with_gate(layer, k, _nearest_in_vocab(cell.coeffs[layer][k], vocab))
    scorer.reset(circuit)

    order = [j for j in _sweep_order(circuit) if live[j]]
    for sweep in range(dc.max_sweeps):
        improved = False
        for j in order:
            layer, k = circuit.layer_of(j)
            incumbent = int(circuit.gates[layer][k])
            admit = not allowed[incumbent]
            # the incumbent wins ties; an out-of-vocabulary incumbent is not a candidate
            best_gate, best = (None, scorer.total + 1) if admit else (incumbent, scorer.count)
            for g in vocab:
                if g == incumbent:
                    continue
                c = scorer.swap_count(j, int(g), best)
                if c < best:
                    best_gate, best = int(g), c
            if best_gate != incumbent:
                before = scorer.count
                circuit = circuit.with_gate(layer, k, best_gate)
                scorer.reset(circuit)
                assert scorer.count == best, "cached swap score disagrees with a fresh run"
                report.phase1_steps.append(Phase1Step(j, incumbent, best_gate, before, best, admit))
                improved = True
        report.sweeps = sweep + 1
        report.sweep_disagreements.append(scorer.count)
        log.info("sweep %d: disagreement %d / %d", sweep + 1, scorer.count, scorer.total)
        if not improved:
            break
    report.census_phase1 = gate_census(circuit)
    return circuit, report


def refine_to_intersection(
    circuit: HardCircuit,
    teacher: np.ndarray,
    calib_trits,
    dc: DistillConfig = DistillConfig(),
    report: DistillReport | None = None,
) -> tuple[HardCircuit, DistillReport]:
    """Phase 2: swap NM-only gates for the nearest NM-and-IM gate when it is cheap.

    Candidates are the non-constant NM-and-IM gates ordered by Hamming distance
    to the current gate (ties to lower id).  The first candidate whose
    calibration agreement with the teacher stays within ``eta`` of the
    Phase-1 circuit's agreement is accepted.
    """
    report = report if report is not None else DistillReport()
    q = np.asarray(calib_trits, dtype=np.int8)
    teacher = np.asarray(teacher, dtype=np.int8)
    if teacher.shape[0] != q.shape[0]:
        raise ValueError("teacher and calibration set differ in size")
    nm = vocabulary_mask(VocabularyKind(VocabTag.NM))
    inter_mask = vocabulary_mask(VocabularyKind(VocabTag.NM_AND_IM, exclude_constants=True))
    if not nm[circuit.gate_ids()].all():
        raise ValueError("phase 2 expects an all-NM circuit")
    inter = np.flatnonzero(inter_mask)
    tables = all_tables()

    scorer = _Scorer(circuit, q, teacher)
    total = scorer.total
    ref_acc = 1.0 - scorer.count / total
    report.phase2_reference_accuracy = ref_acc
    # accept when ref_acc - acc < eta, i.e. count < ref_count + eta * total
    bound = int(np.floor(scorer.count + dc.eta * total - 1e-12)) + 1
    live = live_neurons(circuit)
    for j in _sweep_order(circuit):
        layer, k = circuit.layer_of(j)
        g = int(circuit.gates[layer][k])
        if inter_mask[g]:
            continue
        dist = (tables[inter] != tables[g]).sum(axis=1)
        for cand in inter[np.lexsort((inter, dist))]:
            c = scorer.swap_count(j, int(cand), bound) if live[j] else scorer.count
            acc = 1.0 - c / total
            if ref_acc - acc < dc.eta:
                report.phase2_swaps.append(SwapRecord(j, g, int(cand), acc - (1.0 - scorer.count / total)))
                circuit = circuit.with_gate(layer, k, int(cand))
                scorer.reset(circuit)
                break
    report.phase2_final_accuracy = 1.0 - scorer.count / total
    report.census_phase2 = gate_census(circuit)
    return circuit, report


def harden(
    cell: SoftCell,
    calib_inputs,
    calib_trits,
    dc: DistillConfig = DistillConfig(),
) -> tuple[HardCircuit, HardCircuit, DistillReport]:
    """Both phases; returns the Phase-1 circuit, the Phase-2 circuit and the report."""
    x, q = _calibration(calib_inputs, calib_trits, dc)
    teacher = teacher_verdicts(cell, x, dc.teacher_threshold)
    inner = DistillConfig(dc.vocabulary, dc.max_sweeps, dc.eta, None, dc.teacher_threshold, dc.seed)
    phase1, report = distill(cell, x, q, inner, teacher=teacher)
    phase2, report = refine_to_intersection(phase1, teacher, q, inner, report)
    return phase1, phase2, report
