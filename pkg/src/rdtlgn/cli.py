"""Command line entry point.

Exit codes: 0 ok, 2 configuration or parse error, 3 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .cell import CheckpointError, build_cell, load_checkpoint, save_checkpoint, train
from .circuit import MonitorState, circuit_from_json, circuit_step, circuit_to_json
from .data import dataset_to_csv, make_dataset, sidecar
from .experiment import (
    PIPELINES,
    ConfigError,
    ExperimentConfig,
    check_sizing,
    evaluate_circuit,
    load_config,
    prepare_data,
    run_experiment,
    write_artifacts,
)
from .harden import harden
from .stl import FormulaSyntaxError, LabelConfig, depth_bound, horizon, make_labels, parse_formula, state_complexity
from .ternary import VocabTag, VocabularyKind, census, vocabulary_mask

log = logging.getLogger("rdtlgn")

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3


class StageError(RuntimeError):
    def __init__(self, stage: str, err: BaseException):
        super().__init__(f"[{stage}] {type(err).__name__}: {err}")
        self.stage = stage


def _config(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    if getattr(args, "seed", None) is not None:
        cfg = replace(cfg, seed=args.seed)
    return cfg


def _stage(name, fn, *a, **kw):
    try:
        return fn(*a, **kw)
    except (ConfigError, FormulaSyntaxError, CheckpointError):
        raise
    except Exception as e:  # noqa: BLE001
        raise StageError(name, e) from e


def _dump(obj) -> None:
    print(json.dumps(obj, sort_keys=True))


# ---------------------------------------------------------------------------
# subcommands


def cmd_bound(args) -> int:
    phi = parse_formula(args.formula)
    _dump({"B": state_complexity(phi), "depth_bound": depth_bound(phi), "horizon": horizon(phi)})
    return EXIT_OK


def cmd_audit_gates(args) -> int:
    c = census()
    if args.exclude_constants:
        result = {"NM": c["NM_nonconst"], "IM": c["IM_nonconst"], "NM_AND_IM": c["NM_AND_IM_nonconst"]}
    else:
        result = c
    _dump(result)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        for tag in (VocabTag.NM, VocabTag.IM, VocabTag.NM_AND_IM):
            kind = VocabularyKind(tag, args.exclude_constants)
            ids = np.flatnonzero(vocabulary_mask(kind))
            (out / f"{kind}.txt").write_text("".join(f"{i}\n" for i in ids))
    return EXIT_OK


def cmd_gen_data(args) -> int:
    cfg = _config(args)
    if args.prepared:
        data = _stage("gen-data", prepare_data, cfg)
        ds = data.dataset
    else:
        ds = _stage("gen-data", make_dataset, cfg.world, cfg.pool_count, cfg.T, cfg.seed)
        x = ds.signals(cfg.columns)
        ds.labels = {f"{cfg.name}_{p}": make_labels(cfg.phi, x, LabelConfig(p, cfg.delta)) for p in PIPELINES}
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "trajectories.csv").write_text(dataset_to_csv(ds))
    (out / "sidecar.json").write_text(sidecar(ds, {cfg.name: cfg.formula}, cfg.delta))
    log.info("wrote %d trajectories to %s", len(ds), out)
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = _config(args)
    check_sizing(cfg)
    data = _stage("data", prepare_data, cfg)
    inp = data.inputs(args.pipeline)
    cell = build_cell(cfg.cell_config())
    tc = replace(cfg.train, seed=cfg.seed)
    cell, history = _stage("train", train, cell, inp[data.train_idx], data.labels[args.pipeline][data.train_idx], tc)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_bytes(save_checkpoint(cell, {"config_hash": cfg.config_hash(), "pipeline": args.pipeline}))
    log.info("final task loss %.4f, train accuracy %.3f", history[-1].task_loss, history[-1].accuracy)
    return EXIT_OK


def cmd_harden(args) -> int:
    cfg = _config(args)
    cell = load_checkpoint(Path(args.checkpoint).read_bytes())
    data = _stage("data", prepare_data, cfg)
    tr = data.train_idx
    phase1, phase2, report = _stage("harden", harden, cell, data.inputs(args.pipeline)[tr], data.trits[tr], cfg.distill)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    stamp = {"config_hash": cfg.config_hash()}
    (out / "circuit_phase1.json").write_text(circuit_to_json(phase1, {**stamp, "phase": 1}))
    (out / "circuit.json").write_text(circuit_to_json(phase2, {**stamp, "phase": 2}))
    (out / "distill_report.json").write_text(
        json.dumps({"format": "rdtlgn.distill_report", "version": 1, **stamp, **report.to_dict()}, indent=1)
    )
    return EXIT_OK


def cmd_eval(args) -> int:
    cfg = _config(args)
    c = _load_circuit(args.circuit)
    data = _stage("data", prepare_data, cfg)
    rep = _stage("eval", evaluate_circuit, c, cfg, data, args.pipeline)
    text = json.dumps({"format": "rdtlgn.eval_report", "version": 1, **rep.to_dict()}, indent=1, sort_keys=True)
    if args.out:
        Path(args.out).write_text(text)
    print(text)
    return EXIT_OK


def _load_circuit(path):
    try:
        return circuit_from_json(Path(path).read_text())
    except (OSError, json.JSONDecodeError, KeyError, TypeError) as e:
        raise ConfigError(f"cannot load circuit {path}: {e}") from e


def _parse_line(line: str, P: int, delta: float | None) -> np.ndarray:
    parts = line.replace(",", " ").split()
    if len(parts) != P:
        raise ConfigError(f"expected {P} values per line, got {len(parts)}: {line.strip()!r}")
    try:
        vals = np.array([float(v) for v in parts])
    except ValueError as e:
        raise ConfigError(f"unreadable input line {line.strip()!r}") from e
    if delta is not None:
        return (np.sign(vals) * (np.abs(vals) > delta)).astype(np.int8)
    if not np.all(np.isin(vals, (-1, 0, 1))):
        raise ConfigError(f"inputs must be trits (or pass --delta): {line.strip()!r}")
    return vals.astype(np.int8)


def cmd_monitor(args) -> int:
    """Streaming verdicts: one line of P values in, one verdict per line out."""
    c = _load_circuit(args.circuit)
    st = MonitorState.bottom(c.config.S)
    src = open(args.input) if args.input else sys.stdin
    try:
        for line in src:
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            p = _parse_line(line, c.config.P, args.delta)
            st, y = circuit_step(c, p, st)
            print(" ".join(str(int(v)) for v in y), flush=True)
    finally:
        if src is not sys.stdin:
            src.close()
    return EXIT_OK


def cmd_run(args) -> int:
    cfg = _config(args)
    result = _stage("run", run_experiment, cfg)
    out = Path(args.out)
    _stage("write", write_artifacts, result, out)
    print((out / "summary.txt").read_text(), end="")
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="rdtlgn", description="Recurrent ternary logic gate monitors for bounded STL.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def with_config(p, seed=True):
        p.add_argument("--config", help="experiment config (JSON); defaults are used when omitted")
        if seed:
            p.add_argument("--seed", type=int, help="override the config seed")
        return p

    p = sub.add_parser("bound", help="realizability bounds of a formula")
    p.add_argument("formula")
    p.set_defaults(fn=cmd_bound)

    p = sub.add_parser("audit-gates", help="gate census and vocabulary lists")
    p.add_argument("--exclude-constants", action="store_true")
    p.add_argument("--out", help="directory for gate-id lists")
    p.set_defaults(fn=cmd_audit_gates)

    p = with_config(sub.add_parser("gen-data", help="generate trajectories and labels"))
    p.add_argument("--out", required=True)
    p.add_argument("--prepared", action="store_true", help="write the balanced selection instead of the raw pool")
    p.set_defaults(fn=cmd_gen_data)

    for name, fn, helptext in (
        ("train", cmd_train, "train a soft cell"),
        ("harden", cmd_harden, "distill a checkpoint into a ternary circuit"),
        ("eval", cmd_eval, "evaluate a hard circuit on the test split"),
    ):
        p = with_config(sub.add_parser(name, help=helptext))
        p.add_argument("--pipeline", choices=PIPELINES, default="CtQ")
        if name == "train":
            p.add_argument("--out", required=True, help="checkpoint path")
        elif name == "harden":
            p.add_argument("--checkpoint", required=True)
            p.add_argument("--out", required=True, help="output directory")
        else:
            p.add_argument("--circuit", required=True)
            p.add_argument("--out", help="write the report here as well")
        p.set_defaults(fn=fn)

    p = sub.add_parser("monitor", help="stream verdicts from a hard circuit")
    p.add_argument("--circuit", required=True)
    p.add_argument("--input", help="read from a file instead of stdin")
    p.add_argument("--delta", type=float, help="quantize real-valued inputs with this dead band")
    p.set_defaults(fn=cmd_monitor)

    p = with_config(sub.add_parser("run", help="full pipeline with baselines"))
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_run)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.fn(args)
    except (ConfigError, FormulaSyntaxError, CheckpointError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except StageError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_RUNTIME
    except Exception as e:  # noqa: BLE001
        print(f"error: [{args.command}] {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
