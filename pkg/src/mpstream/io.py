"""CSV readers and writers for every pipeline artifact.

Formats (all with a header row, LF line endings, floats at 9 significant
digits so outputs are byte-reproducible):

* dataset:        ``t_s,f_c_hz,label`` — one row per sample, label empty for
  normal samples.
* truth sidecar:  ``start_idx,end_idx,label`` — ground-truth segments.
* events:         ``kind,position,profile_value``.
* profile trace:  ``t_s,f_c_hz,label,profile_value`` — per-sample; the
  profile field is empty while the stream warms up.
* report:         ``fault,accuracy,precision,recall,f_score`` — undefined
  metrics serialize as empty fields.

Every reader accepts its writer's output and reports malformed rows by file
line number.
"""

from __future__ import annotations

import csv

import numpy as np

from mpstream.detect import AnomalySegment, DetectionEvent, EventKind
from mpstream.evaluate import Metrics
from mpstream.generate import LabeledDataset

__all__ = [
    "DataError",
    "write_dataset",
    "read_dataset",
    "write_truth",
    "read_truth",
    "write_events",
    "read_events",
    "write_profile_trace",
    "write_report",
    "read_report",
]

DATASET_HEADER = ["t_s", "f_c_hz", "label"]
TRUTH_HEADER = ["start_idx", "end_idx", "label"]
EVENTS_HEADER = ["kind", "position", "profile_value"]
PROFILE_HEADER = ["t_s", "f_c_hz", "label", "profile_value"]
REPORT_HEADER = ["fault", "accuracy", "precision", "recall", "f_score"]


class DataError(Exception):
    """Malformed or inconsistent data file."""


def _fmt(x: float) -> str:
    return format(float(x), ".9g")


def _open_write(path):
    return open(path, "w", encoding="utf-8", newline="")


def _writer(fh):
    return csv.writer(fh, lineterminator="\n")


def _check_header(row, expected, path):
    if row != expected:
        raise DataError(f"{path}: line 1: expected header {','.join(expected)}")


def _sample_labels(dataset: LabeledDataset) -> list[str]:
    labels = [""] * len(dataset.channel)
    for seg in dataset.truth:
        for i in range(seg.start, seg.end):
            labels[i] = seg.label or ""
    return labels


def write_dataset(path, dataset: LabeledDataset) -> None:
    t = dataset.channel.times_s
    x = dataset.channel.samples
    labels = _sample_labels(dataset)
    with _open_write(path) as fh:
        w = _writer(fh)
        w.writerow(DATASET_HEADER)
        for i in range(x.size):
            w.writerow([_fmt(t[i]), _fmt(x[i]), labels[i]])


def read_dataset(path) -> tuple[np.ndarray, np.ndarray, list[str]]:
    """Returns (times_s, values, labels)."""
    times, values, labels = [], [], []
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            _check_header(next(reader), DATASET_HEADER, path)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        for lineno, row in enumerate(reader, start=2):
            if len(row) != 3:
                raise DataError(f"{path}: line {lineno}: expected 3 fields, got {len(row)}")
            try:
                times.append(float(row[0]))
                values.append(float(row[1]))
            except ValueError:
                raise DataError(f"{path}: line {lineno}: malformed number") from None
            labels.append(row[2])
    return np.asarray(times), np.asarray(values), labels


def write_truth(path, truth) -> None:
    with _open_write(path) as fh:
        w = _writer(fh)
        w.writerow(TRUTH_HEADER)
        for seg in truth:
            w.writerow([seg.start, seg.end, seg.label or ""])


def read_truth(path) -> list[AnomalySegment]:
    out = []
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            _check_header(next(reader), TRUTH_HEADER, path)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        for lineno, row in enumerate(reader, start=2):
            if len(row) != 3:
                raise DataError(f"{path}: line {lineno}: expected 3 fields, got {len(row)}")
            try:
                start, end = int(row[0]), int(row[1])
            except ValueError:
                raise DataError(f"{path}: line {lineno}: malformed index") from None
            try:
                out.append(AnomalySegment(start, end, row[2] or None))
            except ValueError as exc:
                raise DataError(f"{path}: line {lineno}: {exc}") from None
    return out


def write_events(path, events) -> None:
    with _open_write(path) as fh:
        w = _writer(fh)
        w.writerow(EVENTS_HEADER)
        for ev in events:
            w.writerow([ev.kind.value, ev.position, _fmt(ev.profile_value)])


def read_events(path) -> list[DetectionEvent]:
    out = []
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            _check_header(next(reader), EVENTS_HEADER, path)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        for lineno, row in enumerate(reader, start=2):
            if len(row) != 3:
                raise DataError(f"{path}: line {lineno}: expected 3 fields, got {len(row)}")
            try:
                kind = EventKind(row[0])
                out.append(DetectionEvent(kind, int(row[1]), float(row[2])))
            except ValueError:
                raise DataError(f"{path}: line {lineno}: malformed event") from None
    return out


def write_profile_trace(path, times, values, labels, profile_values) -> None:
    """Per-sample tidy trace; ``profile_values`` entries may be None."""
    with _open_write(path) as fh:
        w = _writer(fh)
        w.writerow(PROFILE_HEADER)
        for t, x, lab, pv in zip(times, values, labels, profile_values):
            w.writerow([_fmt(t), _fmt(x), lab, "" if pv is None else _fmt(pv)])


def write_report(path, rows: list[tuple[str, Metrics]]) -> None:
    with _open_write(path) as fh:
        w = _writer(fh)
        w.writerow(REPORT_HEADER)
        for name, m in rows:
            w.writerow([name] + ["" if v is None else _fmt(v)
                                 for v in (m.accuracy, m.precision, m.recall, m.f_score)])


def read_report(path) -> list[tuple[str, Metrics]]:
    out = []
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            _check_header(next(reader), REPORT_HEADER, path)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        for lineno, row in enumerate(reader, start=2):
            if len(row) != 5:
                raise DataError(f"{path}: line {lineno}: expected 5 fields, got {len(row)}")
            try:
                vals = [None if v == "" else float(v) for v in row[1:]]
            except ValueError:
                raise DataError(f"{path}: line {lineno}: malformed metric") from None
            if vals[0] is None:
                raise DataError(f"{path}: line {lineno}: accuracy must be present")
            out.append((row[0], Metrics(*vals)))
    return out
