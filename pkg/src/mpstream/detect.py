"""Anomaly start/end detection on streaming profile values.

A detector wraps a :class:`~mpstream.stream.StreamingProfile` and passes each
new profile value through a chain of four composable filters that set its
sensitivity:

* threshold calibration — a quantile of profile values collected during
  warm-up (or a fixed value),
* hysteresis — separate enter/exit ratios applied to the threshold,
* debounce — a run of ``min_event_len`` consecutive qualifying values is
  required before an event fires,
* cooldown — after an event ends, no new start may fire for a while.

Events are positioned at the subsequence start of the first value of the
triggering run, which maps naturally onto sample segments.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from mpstream.core import default_exclusion_radius
from mpstream.stream import StreamingProfile

__all__ = [
    "EventKind",
    "DetectionEvent",
    "AnomalySegment",
    "DetectorConfig",
    "FilterChain",
    "AnomalyDetector",
    "calibrate_threshold",
    "events_to_segments",
]


class EventKind(enum.Enum):
    START = "start"
    END = "end"


@dataclass(frozen=True)
class DetectionEvent:
    kind: EventKind
    position: int          # stream sample index (subsequence start)
    profile_value: float   # value at the trigger step


@dataclass(frozen=True)
class AnomalySegment:
    """Half-open sample interval [start, end) with an optional fault label."""

    start: int
    end: int
    label: str | None = None

    def __post_init__(self):
        if not self.start < self.end:
            raise ValueError(f"segment start {self.start} must precede end {self.end}")


@dataclass
class DetectorConfig:
    """Tunables of the detection filter chain.

    ``threshold_mode`` is ``"quantile"`` or ``"fixed"`` (use
    ``threshold_value`` directly).  The first ``warmup`` samples are ignored
    outright; this hides the stream's own warm-up transient, where the
    window holds few candidate subsequences and even normal profile values
    run high.  In quantile mode the next ``calibration_len`` profile values
    are then collected to calibrate the threshold, and detection begins once
    calibration completes.
    """

    threshold_mode: str = "quantile"
    threshold_value: float | None = None
    quantile_q: float = 0.999
    calibration_len: int = 2000
    enter_ratio: float = 1.0
    exit_ratio: float = 0.9
    min_event_len: int = 3
    cooldown: int = 64
    warmup: int = 2000

    def __post_init__(self):
        if self.threshold_mode not in ("quantile", "fixed"):
            raise ValueError(f"unknown threshold_mode {self.threshold_mode!r}")
        if self.threshold_mode == "fixed":
            if self.threshold_value is None or not math.isfinite(self.threshold_value):
                raise ValueError("fixed threshold_mode requires a finite threshold_value")
        if not 0.0 < self.quantile_q < 1.0:
            raise ValueError("quantile_q must lie in (0, 1)")
        if self.calibration_len < 1:
            raise ValueError("calibration_len must be >= 1")
        if not (self.exit_ratio <= 1.0 <= self.enter_ratio):
            raise ValueError("need exit_ratio <= 1 <= enter_ratio")
        if self.min_event_len < 1:
            raise ValueError("min_event_len must be >= 1")
        if self.cooldown < 0:
            raise ValueError("cooldown must be >= 0")
        if self.warmup < 0:
            raise ValueError("warmup must be >= 0")


def calibrate_threshold(values, q: float) -> float:
    """q-quantile (linear interpolation) of the finite calibration values."""
    if not 0.0 < q < 1.0:
        raise ValueError("q must lie in (0, 1)")
    v = np.asarray(values, dtype=np.float64)
    if v.size == 0:
        raise ValueError("cannot calibrate on empty values")
    v = v[np.isfinite(v)]
    if v.size == 0:
        raise ValueError("cannot calibrate: all values non-finite")
    return float(np.quantile(v, q))


class FilterChain:
    """Hysteresis + debounce + cooldown state machine over profile values.

    Consumes ``(position, value, sample_index)`` triples in order and emits
    strictly alternating start/end events.  Stateless with respect to the
    profile source, so it can be driven directly in tests.
    """

    def __init__(self, threshold: float, enter_ratio: float = 1.0,
                 exit_ratio: float = 0.9, min_event_len: int = 3,
                 cooldown: int = 0):
        self.enter_level = threshold * enter_ratio
        self.exit_level = threshold * exit_ratio
        self.min_event_len = int(min_event_len)
        self.cooldown = int(cooldown)
        self.in_anomaly = False
        self._run = 0
        self._run_start = 0
        self._cooldown_until = -1

    def push(self, position: int, value: float, sample_index: int) -> list[DetectionEvent]:
        events: list[DetectionEvent] = []
        if not self.in_anomaly:
            # During cooldown above-threshold values do not accumulate.
            if value > self.enter_level and sample_index >= self._cooldown_until:
                if self._run == 0:
                    self._run_start = position
                self._run += 1
                if self._run >= self.min_event_len:
                    events.append(DetectionEvent(EventKind.START, self._run_start, float(value)))
                    self.in_anomaly = True
                    self._run = 0
            else:
                self._run = 0
        else:
            if value < self.exit_level:
                if self._run == 0:
                    self._run_start = position
                self._run += 1
                if self._run >= self.min_event_len:
                    events.append(DetectionEvent(EventKind.END, self._run_start, float(value)))
                    self.in_anomaly = False
                    self._run = 0
                    self._cooldown_until = sample_index + self.cooldown
            else:
                self._run = 0
        return events


class AnomalyDetector:
    """Streaming detector: profile stream plus the filter chain.

    Feed samples one at a time through :meth:`step`; each call returns the
    events (possibly none) emitted by that sample.  ``last_profile`` holds
    the profile value produced by the most recent step, or None while the
    underlying stream is warming up.

    Single-writer like the stream it wraps; independent detectors on
    distinct channels can run on distinct threads freely.
    """

    def __init__(self, m: int = 64, config: DetectorConfig | None = None,
                 capacity: int = 8192, exclusion_radius: int | None = None):
        self.m = int(m)
        self.config = config if config is not None else DetectorConfig()
        r = default_exclusion_radius(self.m) if exclusion_radius is None else int(exclusion_radius)
        self.stream = StreamingProfile(self.m, capacity=capacity, exclusion_radius=r)
        self.threshold: float | None = (
            self.config.threshold_value if self.config.threshold_mode == "fixed" else None)
        self.last_profile: float | None = None
        self._calibration: list[float] = []
        self._chain: FilterChain | None = None
        if self.config.threshold_mode == "fixed":
            self._chain = self._make_chain(self.threshold)

    def _make_chain(self, threshold: float) -> FilterChain:
        c = self.config
        return FilterChain(threshold, enter_ratio=c.enter_ratio,
                           exit_ratio=c.exit_ratio,
                           min_event_len=c.min_event_len,
                           cooldown=c.cooldown)

    def step(self, sample: float) -> list[DetectionEvent]:
        """Ingest one sample and return any events it produced."""
        sample_index = self.stream.count
        result = self.stream.append(sample)
        if result is None:
            self.last_profile = None
            return []
        value, _ = result
        self.last_profile = value

        if sample_index < self.config.warmup:
            return []

        if self.threshold is None:
            # Quantile mode: consume post-warmup values as calibration until
            # enough are collected, then detect from the next value on.
            self._calibration.append(value)
            if len(self._calibration) >= self.config.calibration_len:
                self.threshold = calibrate_threshold(self._calibration,
                                                     self.config.quantile_q)
                self._chain = self._make_chain(self.threshold)
                self._calibration = []
            return []
        position = sample_index - self.m + 1
        return self._chain.push(position, value, sample_index)

    def process(self, samples) -> list[DetectionEvent]:
        """Run a whole sample sequence through :meth:`step`."""
        events: list[DetectionEvent] = []
        for x in samples:
            events.extend(self.step(x))
        return events


def events_to_segments(events, stream_len: int) -> list[AnomalySegment]:
    """Pair alternating start/end events into sample segments.

    A trailing unmatched start closes at ``stream_len``.  Raises on
    malformed sequences (wrong alternation or non-increasing positions).
    """
    segments: list[AnomalySegment] = []
    open_start: int | None = None
    prev_pos: int | None = None
    for ev in events:
        if prev_pos is not None and ev.position <= prev_pos:
            raise ValueError("event positions must strictly increase")
        prev_pos = ev.position
        if ev.kind is EventKind.START:
            if open_start is not None:
                raise ValueError("two starts without an end")
            open_start = ev.position
        elif ev.kind is EventKind.END:
            if open_start is None:
                raise ValueError("end without a preceding start")
            segments.append(AnomalySegment(open_start, ev.position))
            open_start = None
        else:
            raise ValueError(f"unknown event kind {ev.kind!r}")
    if open_start is not None:
        if open_start >= stream_len:
            raise ValueError("trailing start lies beyond the stream length")
        segments.append(AnomalySegment(open_start, stream_len))
    return segments
