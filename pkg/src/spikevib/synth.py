"""Deterministic synthetic test signals: sums of sines, Gaussian noise and
two switchable anomaly types (used by property tests and the CLI)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import RejectedInputError
from .signals import TimeSeries

__all__ = ["Anomaly", "SynthSpec", "synth"]

ANOMALY_KINDS = ("rate-shift", "amplitude-burst")


@dataclass(frozen=True)
class Anomaly:
    """``rate-shift`` multiplies component frequencies from ``onset`` on
    (phase-continuous); ``amplitude-burst`` scales the whole signal by
    ``value`` from ``onset`` on."""

    kind: str
    value: float
    onset: float

    def __post_init__(self):
        if self.kind not in ANOMALY_KINDS:
            raise RejectedInputError(f"unknown anomaly kind {self.kind!r}; choose from {ANOMALY_KINDS}")
        if not self.value > 0:
            raise RejectedInputError(f"anomaly value must be > 0, got {self.value}")
        if self.onset < 0:
            raise RejectedInputError(f"anomaly onset must be >= 0, got {self.onset}")


@dataclass(frozen=True)
class SynthSpec:
    """Recipe for one synthetic series."""

    duration: float
    sample_rate: float
    components: tuple = ()  # (frequency_hz, amplitude) pairs
    noise_std: float = 0.0
    anomaly: Anomaly | None = None
    seed: int = 0

    def __post_init__(self):
        if not self.duration > 0:
            raise RejectedInputError(f"duration must be > 0, got {self.duration}")
        if not self.sample_rate > 0:
            raise RejectedInputError(f"sample_rate must be > 0, got {self.sample_rate}")
        if self.noise_std < 0:
            raise RejectedInputError(f"noise_std must be >= 0, got {self.noise_std}")
        for f, _a in self.components:
            if not self.sample_rate > 2 * f:
                raise RejectedInputError(
                    f"component at {f} Hz violates Nyquist for fs={self.sample_rate}"
                )
        if self.anomaly is not None and not self.anomaly.onset < self.duration:
            raise RejectedInputError("anomaly onset must precede the end of the signal")
        if self.anomaly is not None and self.anomaly.kind == "rate-shift":
            for f, _a in self.components:
                if not self.sample_rate > 2 * f * self.anomaly.value:
                    raise RejectedInputError(
                        f"rate-shifted component {f * self.anomaly.value} Hz violates Nyquist"
                    )


def synth(spec: SynthSpec) -> TimeSeries:
    """Render the spec; identical spec and seed give identical samples."""
    n = int(round(spec.duration * spec.sample_rate))
    t = np.arange(n) / spec.sample_rate
    rng = np.random.default_rng(spec.seed)
    x = np.zeros(n)

    shift = spec.anomaly if spec.anomaly and spec.anomaly.kind == "rate-shift" else None
    for f, amp in spec.components:
        if shift is None:
            x += amp * np.sin(2 * np.pi * f * t)
        else:
            # phase-continuous frequency step at the onset
            phase = 2 * np.pi * f * np.minimum(t, shift.onset)
            phase += 2 * np.pi * f * shift.value * np.maximum(t - shift.onset, 0.0)
            x += amp * np.sin(phase)

    if spec.noise_std > 0:
        x += spec.noise_std * rng.standard_normal(n)

    if spec.anomaly is not None and spec.anomaly.kind == "amplitude-burst":
        x[t >= spec.anomaly.onset] *= spec.anomaly.value

    return TimeSeries(spec.sample_rate, x)
