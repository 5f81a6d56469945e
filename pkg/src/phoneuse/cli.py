"""Command-line front end: synth, preprocess, train, evaluate, sweep, detect.

Every run writes a versioned ``run_config.json`` next to its outputs so
results are self-describing; identical inputs, flags and seeds produce
byte-identical files. Exit codes: 0 success, 2 input error,
3 convergence failure, 4 internal error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Optional

import numpy as np

from . import dsp, evaluate, io, svm, synthgen
from .features import (DEFAULT_EPS_RATIO, FULL_MASK, FeatureMask, FeaturePipeline,
                       apply_mask)
from .imu import DEFAULT_FS_HZ

CONFIG_VERSION = 1
CONFIG_ENV_VAR = "PHONEUSE_CONFIG"

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_CONVERGENCE = 3
EXIT_INTERNAL = 4

# Training rows are decimated by default: the features are smoothed with
# a ~1.6 s time constant, so full-rate rows are massively redundant and
# only slow the solver down. Evaluation always runs at full rate.
DEFAULT_TRAIN_STRIDE = 12


@dataclass
class RunConfig:
    """Numeric knobs shared by the commands; all frequencies in Hz."""

    fs: float = DEFAULT_FS_HZ
    bpf_low: float = dsp.BPF_LOW_HZ
    bpf_high: float = dsp.BPF_HIGH_HZ
    gyro_lp: float = dsp.GYRO_LP_HZ
    debias: float = dsp.DEBIAS_HZ
    var_hp: float = dsp.VAR_HP_HZ
    var_lp: float = dsp.VAR_LP_HZ
    eps_ratio: float = DEFAULT_EPS_RATIO
    t_hold: float = evaluate.DEFAULT_T_HOLD_S
    spike_max_len: int = evaluate.DEFAULT_SPIKE_MAX_LEN
    svm_c: float = 1.0
    svm_tol: float = 1e-6
    max_epochs: int = 10000
    train_stride: int = DEFAULT_TRAIN_STRIDE
    seed: int = 0

    def validate(self) -> None:
        if self.fs <= 0:
            raise ValueError(f"fs must be positive, got {self.fs}")
        for name in ("bpf_low", "bpf_high", "gyro_lp", "debias", "var_hp", "var_lp"):
            fc = getattr(self, name)
            if not 0 < fc < self.fs / 2:
                raise ValueError(f"{name}={fc} Hz must lie in (0, fs/2)")
        if self.bpf_low >= self.bpf_high:
            raise ValueError("bpf_low must be below bpf_high")

    def to_json(self) -> str:
        payload = {"format": "phoneuse-run-config", "version": CONFIG_VERSION}
        payload.update(asdict(self))
        return json.dumps(payload, indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json_file(cls, path: str | Path) -> "RunConfig":
        payload = json.loads(Path(path).read_text())
        known = {f.name for f in fields(cls)}
        kwargs = {k: v for k, v in payload.items() if k in known}
        return cls(**kwargs)


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, default=None,
                        help=f"JSON config file (env override: {CONFIG_ENV_VAR})")
    for f in fields(RunConfig):
        flag = "--" + f.name.replace("_", "-")
        parser.add_argument(flag, type=type(f.default), default=None, dest=f.name)


def _resolve_config(args: argparse.Namespace) -> RunConfig:
    path = args.config or os.environ.get(CONFIG_ENV_VAR)
    cfg = RunConfig.from_json_file(path) if path else RunConfig()
    for f in fields(RunConfig):
        value = getattr(args, f.name, None)
        if value is not None:
            setattr(cfg, f.name, value)
    cfg.validate()
    return cfg


def _write_config(cfg: RunConfig, out_dir: Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "run_config.json").write_text(cfg.to_json())


def _pipeline(cfg: RunConfig) -> FeaturePipeline:
    return FeaturePipeline(fs=cfg.fs, eps_ratio=cfg.eps_ratio, bpf_low_hz=cfg.bpf_low,
                           bpf_high_hz=cfg.bpf_high, gyro_lp_hz=cfg.gyro_lp,
                           debias_hz=cfg.debias, var_hp_hz=cfg.var_hp, var_lp_hz=cfg.var_lp)


def _train_config(cfg: RunConfig) -> svm.TrainConfig:
    return svm.TrainConfig(C=cfg.svm_c, tol=cfg.svm_tol, max_epochs=cfg.max_epochs,
                           seed=cfg.seed)


def _check_declared_fs(t: np.ndarray, fs: float, source: str) -> None:
    if len(t) < 2:
        return
    dt = float(np.median(np.diff(t)))
    if dt <= 0 or abs(dt * fs - 1.0) > 0.01:
        raise io.DataFormatError(
            f"{source}: sample spacing {dt:.6g} s does not match fs={fs:g} Hz")


def _load_schedule(path: Path, cfg: RunConfig) -> synthgen.ScenarioSchedule:
    payload = json.loads(path.read_text())
    segments = payload["segments"] if isinstance(payload, dict) else payload
    specs = []
    for k, seg in enumerate(segments):
        specs.append(synthgen.ScenarioSpec(
            vehicle=seg["vehicle"],
            phone=seg["phone"],
            duration_s=float(seg["duration_s"]),
            fs=cfg.fs,
            seed=int(seg.get("seed", cfg.seed * 100003 + k)),
            amplitudes=seg.get("amplitudes"),
        ))
    return synthgen.ScenarioSchedule.from_specs(specs)


def cmd_synth(args: argparse.Namespace) -> int:
    cfg = _resolve_config(args)
    schedule = _load_schedule(args.schedule, cfg)
    stream = synthgen.generate_trip(schedule)
    out = Path(args.out)
    _write_config(cfg, out)
    io.write_imu_csv(out / "imu.csv", stream)
    io.write_labels_csv(out / "labels.csv", synthgen.label_intervals(stream))
    print(f"wrote {out / 'imu.csv'} ({len(stream)} samples, "
          f"{len(stream.transitions)} transitions)")
    return EXIT_OK


def cmd_preprocess(args: argparse.Namespace) -> int:
    cfg = _resolve_config(args)
    t, acc, gyr = io.read_imu_csv(args.imu)
    _check_declared_fs(t, cfg.fs, str(args.imu))
    table = _pipeline(cfg).process_block(t, acc, gyr)
    if args.labels is not None:
        intervals = io.read_labels_csv(args.labels)
        table.label = io.labels_to_track(intervals, table.t)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    io.write_features_csv(out, table)
    _write_config(cfg, out.parent)
    print(f"wrote {out} ({len(table)} rows, {int(table.valid.sum())} valid)")
    return EXIT_OK


def _mask_from_arg(arg: Optional[str]) -> FeatureMask:
    if arg is None:
        return FULL_MASK
    try:
        return FeatureMask.from_index(int(arg))
    except ValueError:
        return FeatureMask.from_names(arg.split("+"))


def cmd_train(args: argparse.Namespace) -> int:
    cfg = _resolve_config(args)
    table = io.read_features_csv(args.features)
    if table.label is None:
        raise io.DataFormatError(f"{args.features}: no labels; train needs labeled features")
    mask = _mask_from_arg(args.mask)
    rows = table.scored_mask()
    idx = np.flatnonzero(rows)[::max(1, cfg.train_stride)]
    data = svm.Dataset(x=apply_mask(table.x[idx], mask), y=table.label[idx])
    model = svm.train(data, _train_config(cfg), standardize=True, mask=mask)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    svm.save_model(model, out)
    _write_config(cfg, out.parent)
    labels, _ = svm.predict(model, apply_mask(table.x[idx], mask))
    acc = float((labels == table.label[idx]).mean())
    print(f"wrote {out} (training accuracy {acc:.4f}, "
          f"certificate {model.meta.get('certificate')})")
    return EXIT_OK


def cmd_evaluate(args: argparse.Namespace) -> int:
    cfg = _resolve_config(args)
    table = io.read_features_csv(args.features)
    if table.label is None:
        raise io.DataFormatError(f"{args.features}: no labels; evaluate needs labeled features")
    model = svm.load_model(args.model)
    report = evaluate.evaluate_model(model, table, args.dataset_name,
                                     t_hold=cfg.t_hold, spike_max_len=cfg.spike_max_len)
    out = Path(args.out)
    _write_config(cfg, out)
    (out / "report.csv").write_text(evaluate.reports_to_csv([report]))
    (out / "report.txt").write_text(evaluate.render_table([report]))
    print(evaluate.render_table([report]), end="")
    return EXIT_OK


def cmd_sweep(args: argparse.Namespace) -> int:
    cfg = _resolve_config(args)
    tables = {}
    for name, path in (("train", args.train), ("val", args.val), ("test", args.test)):
        table = io.read_features_csv(path)
        if table.label is None:
            raise io.DataFormatError(f"{path}: no labels; sweep needs labeled features")
        tables[name] = table
    c_grid = None
    if args.c_grid:
        values = svm.DEFAULT_C_GRID if args.c_grid == "default" else args.c_grid.split(",")
        c_grid = tuple(float(v) for v in values)
    sweep_cfg = evaluate.SweepConfig(
        train=_train_config(cfg), t_hold=cfg.t_hold,
        spike_max_len=cfg.spike_max_len, train_stride=cfg.train_stride, c_grid=c_grid)
    result = evaluate.sweep(tables["train"], tables["val"], tables["test"], sweep_cfg)
    out = Path(args.out)
    _write_config(cfg, out)
    (out / "reports_validation.csv").write_text(evaluate.reports_to_csv(result.validation))
    (out / "reports_testing.csv").write_text(evaluate.reports_to_csv(result.testing))
    top5 = evaluate.render_table(result.validation[:5] + result.testing[:5])
    (out / "top5.txt").write_text(top5)
    (out / "plot_validation.csv").write_text(evaluate.metrics_plot_csv(result.validation))
    (out / "plot_testing.csv").write_text(evaluate.metrics_plot_csv(result.testing))
    if result.best_model is not None:
        svm.save_model(result.best_model, out / "best_model.json")
    print(top5, end="")
    return EXIT_OK


def cmd_detect(args: argparse.Namespace) -> int:
    cfg = _resolve_config(args)
    model = svm.load_model(args.model)
    mask = model.mask if model.mask is not None else FULL_MASK
    pipeline = _pipeline(cfg)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    _write_config(cfg, out.parent)
    n = 0
    with open(out, "w") as fh:
        fh.write("t,pred,margin,valid\n")
        for t, acc, gyr in io.read_imu_csv_chunks(args.imu, chunk=args.chunk):
            if n == 0:
                _check_declared_fs(t, cfg.fs, str(args.imu))
            table = pipeline.process_block(t, acc, gyr)
            labels, margins = svm.predict(model, apply_mask(table.x, mask))
            for i in range(len(table)):
                fh.write(f"{float(table.t[i])!r},{int(labels[i])},"
                         f"{float(margins[i])!r},{int(table.valid[i])}\n")
            n += len(table)
    print(f"wrote {out} ({n} predictions)")
    return EXIT_OK


def cmd_filters(args: argparse.Namespace) -> int:
    cfg = _resolve_config(args)
    print(dsp.export_chain_designs(cfg.fs))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="phoneuse",
        description="In-vehicle smartphone hand-usage detection from 6-axis IMU streams.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic labeled IMU stream")
    p.add_argument("--schedule", type=Path, required=True, help="JSON schedule file")
    p.add_argument("--out", type=Path, required=True, help="output directory")
    _add_config_flags(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("preprocess", help="IMU CSV -> per-sample feature CSV")
    p.add_argument("--imu", type=Path, required=True)
    p.add_argument("--labels", type=Path, default=None, help="label-interval sidecar")
    p.add_argument("--out", type=Path, required=True, help="output feature CSV")
    _add_config_flags(p)
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("train", help="train a classifier on a labeled feature CSV")
    p.add_argument("--features", type=Path, required=True)
    p.add_argument("--mask", default=None,
                   help="mask index 1-31 or names like var_w_bpf+var_w_lpf (default: all)")
    p.add_argument("--out", type=Path, required=True, help="output model file")
    _add_config_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="score a model against a labeled feature CSV")
    p.add_argument("--model", type=Path, required=True)
    p.add_argument("--features", type=Path, required=True)
    p.add_argument("--dataset-name", default="dataset")
    p.add_argument("--out", type=Path, required=True, help="output directory")
    _add_config_flags(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("sweep", help="train/evaluate all 31 feature subsets")
    p.add_argument("--train", type=Path, required=True)
    p.add_argument("--val", type=Path, required=True)
    p.add_argument("--test", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True, help="output directory")
    p.add_argument("--c-grid", default=None,
                   help="per-mask C selection: comma-separated values, or 'default' "
                        "for {0.01,0.1,1,10,100}")
    _add_config_flags(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("detect", help="streaming end-to-end prediction from an IMU CSV")
    p.add_argument("--model", type=Path, required=True)
    p.add_argument("--imu", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True, help="output prediction CSV")
    p.add_argument("--chunk", type=int, default=4096, help="samples per processing chunk")
    _add_config_flags(p)
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("filters", help="print designed filter coefficients")
    _add_config_flags(p)
    p.set_defaults(func=cmd_filters)

    return parser


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except svm.ConvergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    except (ValueError, OSError, KeyError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except Exception as exc:  # internal invariant violation
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
