"""Command-line pipeline: generate, detect, evaluate, profile.

Runs are driven by a flat JSON config document (every key optional, unknown
keys rejected) plus a few overriding flags.  Exit codes: 0 success, 1 usage
or config error, 2 data error.  Set ``MPSTREAM_LOG=debug|info|warning`` to
control diagnostics on stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import dataclass, fields
from pathlib import Path


from mpstream.core import SENTINEL_INDEX, matrix_profile
from mpstream.detect import AnomalyDetector, DetectorConfig, events_to_segments
from mpstream.evaluate import (classification_metrics, metrics_table,
                               point_confusion, segment_score)
from mpstream.generate import (DEFAULT_LAYOUT, FaultKind, FaultSpec,
                               FourFaultLayout, GeneratorConfig,
                               four_fault_dataset, generate_base, inject_fault)
from mpstream.io import (DataError, read_dataset, read_events, read_truth,
                         write_dataset, write_events, write_profile_trace,
                         write_report, write_truth)

__all__ = ["main", "ConfigError", "RunConfig"]

log = logging.getLogger("mpstream")


class ConfigError(Exception):
    """Invalid configuration or usage."""


@dataclass
class RunConfig:
    """Flat key-value run configuration; unknown keys are errors."""

    # generator
    sample_rate_hz: float = 5000.0
    duration_s: float = 20.0
    nominal_freq_hz: float = 50.0
    noise_std: float = 0.005
    ripple_amplitude_hz: float = 0.02
    seed: int = 42
    # dataset selection: "four_fault" or a single fault kind name
    dataset: str = "four_fault"
    fault_start_s: float = 2.0
    fault_duration_s: float = 0.05
    severity: float = 1.0
    # four-fault layout overrides
    ll_start_s: float = DEFAULT_LAYOUT.ll_start_s
    ll_duration_s: float = DEFAULT_LAYOUT.ll_duration_s
    sensor_start_s: float = DEFAULT_LAYOUT.sensor_start_s
    sensor_duration_s: float = DEFAULT_LAYOUT.sensor_duration_s
    sag_start_s: float = DEFAULT_LAYOUT.sag_start_s
    sag_duration_s: float = DEFAULT_LAYOUT.sag_duration_s
    grid_start_s: float = DEFAULT_LAYOUT.grid_start_s
    grid_duration_s: float = DEFAULT_LAYOUT.grid_duration_s
    # profile / stream
    window: int = 64
    exclusion_radius: int | None = None
    capacity: int = 8192
    # detector
    threshold_mode: str = "quantile"
    threshold_value: float | None = None
    quantile_q: float = 0.999
    calibration_len: int = 2000
    enter_ratio: float = 1.0
    exit_ratio: float = 0.9
    min_event_len: int = 3
    cooldown: int = 64
    warmup: int = 2000
    # default paths (flags take precedence)
    input: str | None = None
    out: str | None = None

    @classmethod
    def load(cls, path: str | None) -> "RunConfig":
        if path is None:
            return cls()
        try:
            with open(path, encoding="utf-8") as fh:
                doc = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
        if not isinstance(doc, dict):
            raise ConfigError(f"config {path} must be a flat JSON object")
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(doc) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        return cls(**doc)

    def generator_config(self) -> GeneratorConfig:
        try:
            return GeneratorConfig(
                sample_rate_hz=self.sample_rate_hz, duration_s=self.duration_s,
                nominal_freq_hz=self.nominal_freq_hz, noise_std=self.noise_std,
                ripple_amplitude_hz=self.ripple_amplitude_hz, seed=self.seed)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def layout(self) -> FourFaultLayout:
        return FourFaultLayout(
            ll_start_s=self.ll_start_s, ll_duration_s=self.ll_duration_s,
            sensor_start_s=self.sensor_start_s, sensor_duration_s=self.sensor_duration_s,
            sag_start_s=self.sag_start_s, sag_duration_s=self.sag_duration_s,
            grid_start_s=self.grid_start_s, grid_duration_s=self.grid_duration_s)

    def detector_config(self) -> DetectorConfig:
        try:
            return DetectorConfig(
                threshold_mode=self.threshold_mode, threshold_value=self.threshold_value,
                quantile_q=self.quantile_q, calibration_len=self.calibration_len,
                enter_ratio=self.enter_ratio, exit_ratio=self.exit_ratio,
                min_event_len=self.min_event_len, cooldown=self.cooldown,
                warmup=self.warmup)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc


def _sidecar(path: Path, suffix: str) -> Path:
    return path.with_name(path.stem + suffix)


def cmd_generate(cfg: RunConfig, out: Path) -> int:
    try:
        if cfg.dataset == "four_fault":
            dataset = four_fault_dataset(cfg.generator_config(), cfg.layout(),
                                         severity=cfg.severity)
        else:
            try:
                kind = FaultKind(cfg.dataset)
            except ValueError:
                names = ", ".join(k.value for k in FaultKind)
                raise ConfigError(
                    f"unknown dataset {cfg.dataset!r}; expected four_fault or one of {names}")
            base = generate_base(cfg.generator_config())
            spec = FaultSpec(kind, cfg.fault_start_s, cfg.fault_duration_s,
                             severity=cfg.severity)
            dataset = inject_fault(base, spec, cfg.generator_config(), seed=cfg.seed)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    truth_path = _sidecar(out, ".truth.csv")
    try:
        write_dataset(out, dataset)
        write_truth(truth_path, dataset.truth)
    except OSError as exc:
        raise DataError(f"cannot write output: {exc}") from exc
    log.info("wrote %d samples to %s (truth: %s)", len(dataset.channel), out, truth_path)
    return 0


def cmd_detect(cfg: RunConfig, in_path: Path, out: Path, threads: int) -> int:
    times, values, labels = read_dataset(in_path)
    detector = AnomalyDetector(m=cfg.window, config=cfg.detector_config(),
                               capacity=cfg.capacity,
                               exclusion_radius=cfg.exclusion_radius)
    events = []
    trace = []
    for x in values:
        try:
            events.extend(detector.step(float(x)))
        except ValueError as exc:
            raise DataError(f"{in_path}: sample {detector.stream.count}: {exc}") from exc
        trace.append(detector.last_profile)
    if detector.threshold is None:
        log.warning("input shorter than warm-up + calibration; no detection performed")
    profile_path = _sidecar(out, ".profile.csv")
    try:
        write_events(out, events)
        write_profile_trace(profile_path, times, values, labels, trace)
    except OSError as exc:
        raise DataError(f"cannot write output: {exc}") from exc
    log.info("detected %d events over %d samples (threshold %s)",
             len(events), len(values),
             "n/a" if detector.threshold is None else f"{detector.threshold:.6g}")
    return 0


def cmd_evaluate(pred_path: Path, truth_path: Path, n: int,
                 out: Path | None) -> int:
    events = read_events(pred_path)
    truth = read_truth(truth_path)
    for seg in truth:
        if seg.end > n:
            raise DataError(f"truth segment [{seg.start}, {seg.end}) exceeds "
                            f"stream length {n}")
    try:
        pred = events_to_segments(events, n)
    except ValueError as exc:
        raise DataError(f"{pred_path}: {exc}") from exc
    for seg in pred:
        if seg.end > n:
            raise DataError(f"predicted segment [{seg.start}, {seg.end}) exceeds "
                            f"stream length {n}")

    report = segment_score(pred, truth)
    print(f"{report.detected}/{len(truth)} segments detected, "
          f"{report.false_segments} false segments")
    for m in report.matches:
        label = truth[m.truth_index].label or f"segment {m.truth_index}"
        print(f"  {label}: start_latency={m.start_latency:+d} "
              f"end_latency={m.end_latency:+d}")

    rows = []
    for seg in truth:
        name = seg.label or f"segment {seg.start}"
        overlapping = [p for p in pred if p.start < seg.end and p.end > seg.start]
        rows.append((name, point_confusion(overlapping, [seg], n)))
    print()
    print(metrics_table(rows))
    if out is not None:
        write_report(out, [(name, classification_metrics(c)) for name, c in rows])
        log.info("wrote report to %s", out)
    return 0


def cmd_profile(cfg: RunConfig, in_path: Path, out: Path, threads: int) -> int:
    _, values, _ = read_dataset(in_path)
    try:
        mp = matrix_profile(values, cfg.window,
                            exclusion_radius=cfg.exclusion_radius,
                            threads=threads)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    try:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write("position,distance,index\n")
            for i in range(len(mp)):
                if mp.indices[i] == SENTINEL_INDEX:
                    fh.write(f"{i},,\n")
                else:
                    fh.write(f"{i},{format(mp.distances[i], '.9g')},{mp.indices[i]}\n")
    except OSError as exc:
        raise DataError(f"cannot write output: {exc}") from exc
    log.info("wrote profile of %d subsequences to %s", len(mp), out)
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mpstream",
        description="Streaming Matrix Profile anomaly detection pipeline")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, with_input=False):
        p.add_argument("--config", metavar="PATH", help="JSON run configuration")
        p.add_argument("--seed", type=int, metavar="N", help="override the config seed")
        p.add_argument("--window", type=int, metavar="M", help="override the window size")
        p.add_argument("--threads", type=int, default=1, metavar="N",
                       help="worker threads for batch profile computation")
        p.add_argument("--out", metavar="PATH", help="output path")
        if with_input:
            p.add_argument("input", nargs="?",
                           help="input dataset CSV (default: the config's input key)")

    p_gen = sub.add_parser("generate", help="write a labeled synthetic dataset")
    common(p_gen)

    p_det = sub.add_parser("detect", help="stream a dataset through the detector")
    common(p_det, with_input=True)

    p_eval = sub.add_parser("evaluate", help="score detected events against truth")
    p_eval.add_argument("events", help="events CSV from detect")
    p_eval.add_argument("truth", help="truth sidecar CSV from generate")
    p_eval.add_argument("length", type=int, help="stream length in samples")
    p_eval.add_argument("--out", metavar="PATH", help="also write the report CSV")

    p_prof = sub.add_parser("profile", help="batch Matrix Profile of a dataset CSV")
    common(p_prof, with_input=True)
    return parser


def _configure_logging():
    level = os.environ.get("MPSTREAM_LOG", "warning").upper()
    logging.basicConfig(stream=sys.stderr,
                        level=getattr(logging, level, logging.WARNING),
                        format="%(name)s: %(levelname)s: %(message)s")


def main(argv=None) -> int:
    _configure_logging()
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "evaluate":
            out = Path(args.out) if args.out else None
            return cmd_evaluate(Path(args.events), Path(args.truth),
                                args.length, out)
        cfg = RunConfig.load(args.config)
        if args.seed is not None:
            cfg.seed = args.seed
        if args.window is not None:
            cfg.window = args.window
        if args.threads < 1:
            raise ConfigError("--threads must be >= 1")
        if args.command == "generate":
            out = Path(args.out or cfg.out or "dataset.csv")
            return cmd_generate(cfg, out)
        input_arg = args.input or cfg.input
        if not input_arg:
            raise ConfigError("missing input path")
        in_path = Path(input_arg)
        if args.command == "detect":
            out = Path(args.out or cfg.out or "events.csv")
            return cmd_detect(cfg, in_path, out, args.threads)
        if args.command == "profile":
            out = Path(args.out or cfg.out or "profile.csv")
            return cmd_profile(cfg, in_path, out, args.threads)
        raise ConfigError(f"unknown command {args.command}")
    except ConfigError as exc:
        print(f"mpstream: error: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"mpstream: error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"mpstream: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
