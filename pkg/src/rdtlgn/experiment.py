"""End-to-end desk-scale experiment: data, training, hardening, evaluation, baselines."""

from __future__ import annotations

import hashlib
import json
import logging
import time
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .cell import CellConfig, TrainConfig, build_cell, save_checkpoint, soft_verdicts, train, unroll
from .circuit import HardCircuit, circuit_to_json, gate_census, run
from .data import Dataset, WorldConfig, balance_select, dataset_to_csv, make_dataset, sidecar, split
from .elman import predict as elman_predict
from .elman import train_elman
from .harden import DistillConfig, DistillReport, harden
from .metrics import (
    MAX_LATTICE_P,
    EvalReport,
    abstention_profile,
    accuracy,
    lattice_compliance,
    preservation,
    preservation_of,
)
from .specs import PREDICATE_NAMES, SPECS
from .stl import (
    LabelConfig,
    causal_verdicts,
    depth_bound,
    horizon,
    make_labels,
    parse_formula,
    predicates,
    quantize_signal,
    state_complexity,
    temporal_depth,
)
from .ternary import VocabularyKind

log = logging.getLogger(__name__)

PIPELINES = ("CtQ", "QtC")
BACKGROUND = {1: "SAT", 0: "UNK", -1: "VIOL"}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    name: str = "S01"
    formula: str = SPECS["S01"].text
    predicates: tuple[str, ...] = SPECS["S01"].predicates
    pipelines: tuple[str, ...] = PIPELINES
    delta: float = 0.2
    sizing: str = "auto"  # or "explicit"
    S: int | None = None
    L: int | None = None
    min_layers: int = 6
    hidden: int = 24
    pool_count: int = 1200
    n_trajectories: int = 400
    T: int = 20
    train_frac: float = 0.8
    seed: int = 0
    train: TrainConfig = TrainConfig(epochs=40)
    distill: DistillConfig = DistillConfig()
    world: WorldConfig = field(default_factory=WorldConfig)
    elman: bool = True
    lattice_count: int | None = None  # test trajectories used for the power-set metric

    def __post_init__(self):
        object.__setattr__(self, "predicates", tuple(self.predicates))
        object.__setattr__(self, "pipelines", tuple(self.pipelines))
        phi = parse_formula(self.formula)
        bad = [p for p in self.predicates if p not in PREDICATE_NAMES]
        if bad:
            raise ConfigError(f"unknown predicates {bad}; choose from {PREDICATE_NAMES}")
        if predicates(phi) and max(predicates(phi)) >= len(self.predicates):
            raise ConfigError(f"formula uses p{max(predicates(phi))} but only {len(self.predicates)} predicates mapped")
        if not self.pipelines or any(p not in PIPELINES for p in self.pipelines):
            raise ConfigError(f"pipelines must be drawn from {PIPELINES}")
        if self.sizing not in ("auto", "explicit"):
            raise ConfigError(f"sizing must be 'auto' or 'explicit', got {self.sizing!r}")
        if self.sizing == "explicit" and (self.S is None or self.L is None):
            raise ConfigError("explicit sizing needs S and L")
        if self.delta < 0:
            raise ConfigError("delta must be nonnegative")
        if not 1 <= self.n_trajectories <= self.pool_count:
            raise ConfigError("need 1 <= n_trajectories <= pool_count")
        if not 0 < self.train_frac < 1:
            raise ConfigError("train_frac must lie in (0, 1)")

    @property
    def phi(self):
        return parse_formula(self.formula)

    @property
    def P(self) -> int:
        return len(self.predicates)

    @property
    def columns(self) -> list[int]:
        return [PREDICATE_NAMES.index(p) for p in self.predicates]

    def sizes(self) -> tuple[int, int]:
        """(S, L) for the cell."""
        if self.sizing == "auto":
            return state_complexity(self.phi), max(depth_bound(self.phi), self.min_layers)
        return int(self.S), int(self.L)

    def cell_config(self) -> CellConfig:
        S, L = self.sizes()
        return CellConfig.uniform(self.P, S, 1, L, self.hidden, seed=self.seed)

    def to_dict(self) -> dict:
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        d["predicates"] = list(self.predicates)
        d["pipelines"] = list(self.pipelines)
        d["train"] = asdict(self.train)
        d["distill"] = asdict(self.distill) | {"vocabulary": str(self.distill.vocabulary)}
        d["world"] = self.world.to_dict()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        d = dict(d)
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known - {"spec"}
        if unknown:
            raise ConfigError(f"unknown config keys {sorted(unknown)}")
        if "spec" in d:
            spec = SPECS.get(d.pop("spec"))
            if spec is None:
                raise ConfigError(f"unknown spec; choose from {sorted(SPECS)}")
            d.setdefault("name", spec.name)
            d.setdefault("formula", spec.text)
            d.setdefault("predicates", spec.predicates)
        try:
            if "train" in d:
                t = dict(d["train"])
                if t.get("class_weights") is not None:
                    t["class_weights"] = tuple(t["class_weights"])
                d["train"] = TrainConfig(**t)
            if "distill" in d:
                dc = dict(d["distill"])
                if "vocabulary" in dc:
                    dc["vocabulary"] = VocabularyKind.parse(dc["vocabulary"])
                d["distill"] = DistillConfig(**dc)
            if "world" in d:
                d["world"] = WorldConfig.from_dict(d["world"])
            return cls(**d)
        except ConfigError:
            raise
        except (TypeError, ValueError, KeyError) as e:
            raise ConfigError(str(e)) from e

    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


def load_config(path) -> ExperimentConfig:
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigError(f"cannot read config {path}: {e}") from e
    return ExperimentConfig.from_dict(doc)


def check_sizing(cfg: ExperimentConfig) -> None:
    S, _ = cfg.sizes()
    B = state_complexity(cfg.phi)
    if S < B:
        log.warning("S=%d is below the realizability bound B(phi)=%d; the cell cannot track every window", S, B)


# ---------------------------------------------------------------------------
# stages


@dataclass
class PreparedData:
    dataset: Dataset
    train_idx: np.ndarray
    test_idx: np.ndarray
    signals: np.ndarray  # (N, P, T) continuous
    trits: np.ndarray  # (N, P, T) quantized
    labels: dict  # pipeline -> (N, T)
    class_freq: np.ndarray

    def inputs(self, pipeline: str) -> np.ndarray:
        return self.signals if pipeline == "CtQ" else self.trits.astype(float)


def prepare_data(cfg: ExperimentConfig) -> PreparedData:
    phi = cfg.phi
    pool = make_dataset(cfg.world, cfg.pool_count, cfg.T, cfg.seed)
    pool_ctq = make_labels(phi, pool.signals(cfg.columns), LabelConfig("CtQ", cfg.delta))
    idx, freq = balance_select(pool_ctq, cfg.n_trajectories)
    ds = pool.subset(idx)
    x = ds.signals(cfg.columns)
    q = quantize_signal(x, cfg.delta)
    labels = {p: make_labels(phi, x, LabelConfig(p, cfg.delta)) for p in PIPELINES}
    ds.labels = {f"{cfg.name}_{p}": v for p, v in labels.items()}
    tr, te = split(len(ds), cfg.seed, cfg.train_frac)
    return PreparedData(ds, tr, te, x, q, labels, freq)


@dataclass
class PipelineResult:
    pipeline: str
    cell: object
    phase1: HardCircuit
    phase2: HardCircuit
    distill_report: DistillReport
    eval_report: EvalReport
    test_verdicts: np.ndarray
    timings: dict


def evaluate_circuit(c: HardCircuit, cfg: ExperimentConfig, data: PreparedData, pipeline: str, extra=None) -> EvalReport:
    q = data.trits[data.test_idx]
    truth = data.labels["CtQ"][data.test_idx]
    v = run(c, q)[:, 0]
    lat = None
    if cfg.P <= MAX_LATTICE_P:
        n = len(q) if cfg.lattice_count is None else min(cfg.lattice_count, len(q))
        lat = lattice_compliance(c, q[:n])
    return EvalReport(
        spec=cfg.name,
        pipeline=pipeline,
        accuracy=accuracy(v, truth),
        preservation=preservation(c, q),
        lattice_compliance=lat,
        abstention_curve=abstention_profile(c, q, seed=cfg.seed),
        gate_census=gate_census(c),
        metadata={"formula": cfg.formula, "config_hash": cfg.config_hash(), **(extra or {})},
    )


def run_pipeline(cfg: ExperimentConfig, data: PreparedData, pipeline: str) -> PipelineResult:
    tr = data.train_idx
    inp = data.inputs(pipeline)
    timings = {}
    t0 = time.perf_counter()
    cell = build_cell(cfg.cell_config())
    tc = replace(cfg.train, seed=cfg.seed)
    cell, history = train(cell, inp[tr], data.labels[pipeline][tr], tc)
    timings["train_s"] = time.perf_counter() - t0
    ys, _ = unroll(cell, inp[data.test_idx])
    soft_acc = accuracy(soft_verdicts(ys)[:, 0], data.labels["CtQ"][data.test_idx])

    t0 = time.perf_counter()
    phase1, phase2, report = harden(cell, inp[tr], data.trits[tr], cfg.distill)
    timings["harden_s"] = time.perf_counter() - t0

    truth = data.labels["CtQ"][data.test_idx]
    p1_acc = accuracy(run(phase1, data.trits[data.test_idx])[:, 0], truth)
    ev = evaluate_circuit(
        phase2,
        cfg,
        data,
        pipeline,
        {
            "soft_accuracy": soft_acc,
            "phase1_accuracy": p1_acc,
            "final_train_task_loss": history[-1].task_loss,
            "sweeps": report.sweeps,
        },
    )
    v = run(phase2, data.trits[data.test_idx])[:, 0]
    log.info("%s %s: soft %.3f, phase1 %.3f, phase2 %.3f", cfg.name, pipeline, soft_acc, p1_acc, ev.accuracy)
    return PipelineResult(pipeline, cell, phase1, phase2, report, ev, v, timings)


@dataclass
class BaselineResult:
    name: str
    accuracy: float
    preservation: float | None
    test_verdicts: np.ndarray


def causal_baseline(cfg: ExperimentConfig, data: PreparedData) -> BaselineResult:
    x = data.signals[data.test_idx]
    v = causal_verdicts(cfg.phi, x, cfg.delta)
    return BaselineResult("causal", accuracy(v, data.labels["CtQ"][data.test_idx]), None, v)


def elman_baseline(cfg: ExperimentConfig, data: PreparedData) -> BaselineResult:
    S, _ = cfg.sizes()
    x = data.signals
    tc = replace(cfg.train, seed=cfg.seed)
    model, _ = train_elman(x[data.train_idx], data.labels["CtQ"][data.train_idx], max(S, 1), tc)
    xt = x[data.test_idx]
    v = elman_predict(model, xt)
    pres = preservation_of(lambda s: elman_predict(model, s)[:, None, :], xt)
    return BaselineResult("RNN", accuracy(v, data.labels["CtQ"][data.test_idx]), pres, v)


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    data: PreparedData
    pipelines: dict[str, PipelineResult]
    baselines: dict[str, BaselineResult]
    timings: dict

    def summary(self) -> dict:
        phi = self.config.phi
        S, L = self.config.sizes()
        row = {
            "spec": self.config.name,
            "formula": self.config.formula,
            "P": self.config.P,
            "S": S,
            "L": L,
            "B": state_complexity(phi),
            "depth_bound": depth_bound(phi),
            "temporal_depth": temporal_depth(phi),
            "horizon": horizon(phi),
            "class_freq": [float(f) for f in self.data.class_freq],
            "config_hash": self.config.config_hash(),
        }
        for name, b in self.baselines.items():
            row[f"{name}_accuracy"] = b.accuracy
            if b.preservation is not None:
                row[f"{name}_preservation"] = b.preservation
        for name, p in self.pipelines.items():
            e = p.eval_report
            row[f"{name}_accuracy"] = e.accuracy
            row[f"{name}_preservation"] = e.preservation
            row[f"{name}_lattice"] = e.lattice_compliance
            row[f"{name}_frac_NM_AND_IM"] = e.gate_census["frac_NM_AND_IM"]
        return row


def format_table(rows: list[dict]) -> str:
    """Plain-text table: prediction, preservation and lattice columns per system."""

    def pct(v):
        return "--" if v is None else f"{100 * v:5.1f}"

    head = (
        f"{'spec':<5} {'P':>2} {'S':>3} | {'Prediction %':^31} | {'Preservation %':^20} | {'Lattice %':^13}\n"
        f"{'':<5} {'':>2} {'':>3} | {'causal':>7} {'CtQ':>7} {'QtC':>7} {'RNN':>7}"
        f" | {'CtQ':>6} {'QtC':>6} {'RNN':>6} | {'CtQ':>6} {'QtC':>6}"
    )
    lines = [head, "-" * len(head.splitlines()[1])]
    for r in rows:
        lines.append(
            f"{r['spec']:<5} {r['P']:>2} {r['S']:>3} | "
            f"{pct(r.get('causal_accuracy')):>7} {pct(r.get('CtQ_accuracy')):>7} "
            f"{pct(r.get('QtC_accuracy')):>7} {pct(r.get('RNN_accuracy')):>7} | "
            f"{pct(r.get('CtQ_preservation')):>6} {pct(r.get('QtC_preservation')):>6} "
            f"{pct(r.get('RNN_preservation')):>6} | "
            f"{pct(r.get('CtQ_lattice')):>6} {pct(r.get('QtC_lattice')):>6}"
        )
    return "\n".join(lines) + "\n"


def trace_csv(result: ExperimentResult) -> str:
    """Per-trajectory verdict traces on the test split, one row per (system, trajectory, t)."""
    data = result.data
    ids = data.dataset.traj_ids[data.test_idx]
    truth = data.labels["CtQ"][data.test_idx]
    systems = {p: r.test_verdicts for p, r in result.pipelines.items()}
    systems.update({b: r.test_verdicts for b, r in result.baselines.items()})
    out = ["system,traj_id,t,label,verdict,background"]
    for name, v in systems.items():
        for n in range(len(ids)):
            for t in range(truth.shape[1]):
                lab = int(truth[n, t])
                out.append(f"{name},{int(ids[n])},{t},{lab},{int(v[n, t])},{BACKGROUND[lab]}")
    return "\n".join(out) + "\n"


def run_experiment(cfg: ExperimentConfig) -> ExperimentResult:
    check_sizing(cfg)
    timings = {}
    t0 = time.perf_counter()
    data = prepare_data(cfg)
    timings["data_s"] = time.perf_counter() - t0
    pipelines = {p: run_pipeline(cfg, data, p) for p in cfg.pipelines}
    baselines = {"causal": causal_baseline(cfg, data)}
    if cfg.elman:
        t0 = time.perf_counter()
        baselines["RNN"] = elman_baseline(cfg, data)
        timings["elman_s"] = time.perf_counter() - t0
    for p, r in pipelines.items():
        timings.update({f"{p}_{k}": v for k, v in r.timings.items()})
    return ExperimentResult(cfg, data, pipelines, baselines, timings)


def write_artifacts(result: ExperimentResult, out_dir) -> dict[str, Path]:
    """Write every artifact under ``out_dir``; returns name -> path."""
    cfg = result.config
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    stamp = {"config_hash": cfg.config_hash()}
    paths = {}

    def put(name: str, text: str | bytes) -> None:
        path = out / name
        path.parent.mkdir(parents=True, exist_ok=True)
        if isinstance(text, bytes):
            path.write_bytes(text)
        else:
            path.write_text(text)
        paths[name] = path

    def doc(kind: str, body: dict) -> str:
        return json.dumps({"format": f"rdtlgn.{kind}", "version": 1, **stamp, **body}, indent=1, sort_keys=True)

    put("config.json", doc("experiment_config", {"config": cfg.to_dict()}))
    data = result.data
    formulas = {cfg.name: cfg.formula}
    put("data/train.csv", dataset_to_csv(data.dataset.subset(data.train_idx)))
    put("data/test.csv", dataset_to_csv(data.dataset.subset(data.test_idx)))
    put("data/sidecar.json", sidecar(data.dataset, formulas, cfg.delta))
    for p, r in result.pipelines.items():
        put(f"{p}/checkpoint.json", save_checkpoint(r.cell, stamp))
        put(f"{p}/circuit_phase1.json", circuit_to_json(r.phase1, {**stamp, "phase": 1}))
        put(f"{p}/circuit.json", circuit_to_json(r.phase2, {**stamp, "phase": 2}))
        put(f"{p}/distill_report.json", doc("distill_report", r.distill_report.to_dict()))
        put(f"{p}/eval_report.json", doc("eval_report", r.eval_report.to_dict()))
    summary = result.summary()
    put("summary.json", doc("summary", {"rows": [summary], "timings": result.timings}))
    put("summary.txt", format_table([summary]))
    put("traces.csv", trace_csv(result))
    return paths
