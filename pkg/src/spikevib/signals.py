"""Signal and spike-event value types used by every pipeline stage.

All containers are immutable after construction (backing arrays are made
read-only), so instances can be shared freely. Sample indices are the
authoritative clock: a sample's time is ``t0 + i / sample_rate``, which keeps
long streams free of accumulated drift.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .errors import RejectedInputError

__all__ = [
    "Polarity",
    "TimeSeries",
    "MultiChannelSeries",
    "SpikeEvent",
    "SpikeTrain",
    "SignalSource",
    "concat",
    "slice_time",
    "rate_in_window",
]


class Polarity(enum.IntEnum):
    """Spike polarity; UP sorts before DOWN at equal (time, channel)."""

    UP = 0
    DOWN = 1


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class TimeSeries:
    """Uniformly sampled scalar signal.

    Parameters
    ----------
    sample_rate : float
        Samples per second, > 0.
    samples : array-like of float
        Amplitude values; all entries must be finite.
    t0 : float
        Time of the first sample, seconds.
    """

    sample_rate: float
    samples: np.ndarray
    t0: float = 0.0

    def __post_init__(self):
        if not self.sample_rate > 0:
            raise RejectedInputError(f"sample_rate must be > 0, got {self.sample_rate}")
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1:
            raise RejectedInputError("samples must be one-dimensional")
        if samples.size and not np.all(np.isfinite(samples)):
            raise RejectedInputError("samples contain non-finite values")
        object.__setattr__(self, "samples", _readonly(samples))

    def __len__(self) -> int:
        return self.samples.size

    @property
    def duration(self) -> float:
        return len(self) / self.sample_rate

    def times(self) -> np.ndarray:
        """Per-sample times, ``t0 + i / sample_rate``."""
        return self.t0 + np.arange(len(self)) / self.sample_rate


@dataclass(frozen=True)
class MultiChannelSeries:
    """N equally long channels sharing one sample rate (filterbank output)."""

    sample_rate: float
    channels: np.ndarray  # shape (n_channels, n_samples)
    t0: float = 0.0

    def __post_init__(self):
        if not self.sample_rate > 0:
            raise RejectedInputError(f"sample_rate must be > 0, got {self.sample_rate}")
        ch = np.asarray(self.channels, dtype=np.float64)
        if ch.ndim != 2:
            raise RejectedInputError("channels must be a 2-d array (n_channels, n_samples)")
        object.__setattr__(self, "channels", _readonly(ch))

    @property
    def n_channels(self) -> int:
        return self.channels.shape[0]

    @property
    def n_samples(self) -> int:
        return self.channels.shape[1]

    @property
    def channel_ids(self) -> range:
        return range(self.n_channels)

    @property
    def duration(self) -> float:
        return self.n_samples / self.sample_rate

    def channel(self, j: int) -> TimeSeries:
        return TimeSeries(self.sample_rate, self.channels[j], t0=self.t0)


@dataclass(frozen=True)
class SpikeEvent:
    """One timestamped, channel-tagged, polarity-tagged event."""

    time: float
    channel: int
    polarity: Polarity

    def __post_init__(self):
        if not (np.isfinite(self.time) and self.time >= 0):
            raise RejectedInputError(f"event time must be finite and >= 0, got {self.time}")

    def sort_key(self):
        return (self.time, self.channel, int(self.polarity))


@dataclass(frozen=True)
class SpikeTrain:
    """Sorted event collection backed by parallel arrays.

    Events are kept in the total order (time, channel, UP-before-DOWN).
    Construction normalizes order, so sorting is idempotent.
    """

    times: np.ndarray
    channels: np.ndarray
    polarities: np.ndarray
    duration: float

    def __post_init__(self):
        t = np.asarray(self.times, dtype=np.float64)
        c = np.asarray(self.channels, dtype=np.int64)
        p = np.asarray(self.polarities, dtype=np.int8)
        if not (t.shape == c.shape == p.shape) or t.ndim != 1:
            raise RejectedInputError("times/channels/polarities must be 1-d arrays of equal length")
        if t.size:
            if not np.all(np.isfinite(t)) or t.min() < 0:
                raise RejectedInputError("event times must be finite and >= 0")
            if t.max() > self.duration:
                raise RejectedInputError(
                    f"event time {t.max()} exceeds train duration {self.duration}"
                )
            order = np.lexsort((p, c, t))
            t, c, p = t[order], c[order], p[order]
        object.__setattr__(self, "times", _readonly(t))
        object.__setattr__(self, "channels", _readonly(c))
        object.__setattr__(self, "polarities", _readonly(p))

    @classmethod
    def from_events(cls, events, duration: float) -> "SpikeTrain":
        events = list(events)
        return cls(
            times=np.array([e.time for e in events], dtype=np.float64),
            channels=np.array([e.channel for e in events], dtype=np.int64),
            polarities=np.array([int(e.polarity) for e in events], dtype=np.int8),
            duration=duration,
        )

    @classmethod
    def empty(cls, duration: float) -> "SpikeTrain":
        return cls(np.empty(0), np.empty(0, np.int64), np.empty(0, np.int8), duration)

    def __len__(self) -> int:
        return self.times.size

    def __iter__(self):
        for t, c, p in zip(self.times, self.channels, self.polarities):
            yield SpikeEvent(float(t), int(c), Polarity(int(p)))

    def select(self, channel=None, polarity=None) -> "SpikeTrain":
        """Sub-train matching the given channel and/or polarity."""
        mask = np.ones(len(self), dtype=bool)
        if channel is not None:
            mask &= self.channels == channel
        if polarity is not None:
            mask &= self.polarities == int(polarity)
        return SpikeTrain(self.times[mask], self.channels[mask], self.polarities[mask], self.duration)

    def merged_with(self, other: "SpikeTrain") -> "SpikeTrain":
        if other.duration > self.duration:
            return other.merged_with(self)
        return SpikeTrain(
            np.concatenate([self.times, other.times]),
            np.concatenate([self.channels, other.channels]),
            np.concatenate([self.polarities, other.polarities]),
            self.duration,
        )


@dataclass(frozen=True)
class SignalSource:
    """Re-iterable chunked view of a signal, for constant-memory streaming.

    ``chunk_factory`` must return a fresh iterator of 1-d arrays whose
    lengths sum to ``n_samples``.
    """

    sample_rate: float
    n_samples: int
    chunk_factory: object

    @property
    def duration(self) -> float:
        return self.n_samples / self.sample_rate

    def chunks(self):
        return self.chunk_factory()

    @classmethod
    def from_series(cls, x: TimeSeries, chunk_s: float = 1.0) -> "SignalSource":
        step = max(1, int(round(chunk_s * x.sample_rate)))

        def gen():
            for i in range(0, len(x), step):
                yield x.samples[i : i + step]

        return cls(x.sample_rate, len(x), gen)

    @classmethod
    def from_arrays(cls, sample_rate: float, n_samples: int, factory) -> "SignalSource":
        return cls(sample_rate, n_samples, factory)


def concat(a: TimeSeries, b: TimeSeries) -> TimeSeries:
    """Append ``b`` after ``a``; both must share one sample rate."""
    if a.sample_rate != b.sample_rate:
        raise RejectedInputError(
            f"sample-rate mismatch: {a.sample_rate} vs {b.sample_rate}"
        )
    return TimeSeries(a.sample_rate, np.concatenate([a.samples, b.samples]), t0=a.t0)


def slice_time(x: TimeSeries, t_start: float, t_end: float) -> TimeSeries:
    """Samples in the window [t_start, t_end), times relative to the series start."""
    if not (0.0 <= t_start < t_end <= x.duration + 0.5 / x.sample_rate):
        raise RejectedInputError(
            f"slice window [{t_start}, {t_end}) outside [0, {x.duration}]"
        )
    i0 = int(round(t_start * x.sample_rate))
    i1 = int(round(t_end * x.sample_rate))
    i1 = min(i1, len(x))
    if i0 >= i1:
        raise RejectedInputError(f"slice window [{t_start}, {t_end}) is empty")
    return TimeSeries(x.sample_rate, x.samples[i0:i1], t0=x.t0 + i0 / x.sample_rate)


def rate_in_window(
    train: SpikeTrain,
    channel: int,
    t_start: float,
    t_end: float,
    polarity: Polarity | None = Polarity.UP,
) -> float:
    """Mean event rate (Hz) on one channel over [t_start, t_end).

    ``polarity=None`` counts both polarities. Empty windows give 0.
    """
    if not t_start < t_end:
        raise RejectedInputError(f"need t_start < t_end, got [{t_start}, {t_end})")
    mask = (train.channels == channel) & (train.times >= t_start) & (train.times < t_end)
    if polarity is not None:
        mask &= train.polarities == int(polarity)
    return float(np.count_nonzero(mask)) / (t_end - t_start)
