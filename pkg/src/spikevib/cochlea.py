"""Gammatone filterbank realized as cascades of four digital biquads.

Each channel is an order-4 gammatone

    g(t) = a * t^3 * exp(-2*pi*b*t) * cos(2*pi*f_c*t + phi)

whose Laplace transform factors exactly into four second-order sections
sharing the pole pair s = -2*pi*b +- j*2*pi*f_c, with one real zero per
section at s = -2*pi*b +- (sqrt(2)+-1)*2*pi*f_c. Every section is mapped to a
digital biquad with the bilinear transform, pre-warped so the analog center
frequency lands exactly at f_c, and the cascade is renormalized to unity gain
at f_c. Bandwidths default to 1.019 * ERB(f_c), the standard auditory-model
rule, and can be overridden per channel.

The analytic impulse response (`impulse_response_reference`) is kept as an
independent oracle against which the digital cascade is validated.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import signal as sps

from .errors import FilterDesignError, RejectedInputError
from .signals import MultiChannelSeries, TimeSeries

__all__ = [
    "GammatoneSpec",
    "FilterbankConfig",
    "BiquadSection",
    "FilterCascade",
    "GammatoneFilterbank",
    "erb",
    "default_bandwidth",
    "center_frequencies",
    "design_channel",
    "impulse_response_reference",
    "reference_amplitude_for_unity_gain",
    "analog_gain",
    "process",
]

GAMMATONE_ORDER = 4
ERB_SCALE = 1.019  # bandwidth = ERB_SCALE * ERB(f_c)
MAX_FC_FRACTION = 0.45  # reject designs with f_c above this fraction of fs


def erb(f: float) -> float:
    """Equivalent rectangular bandwidth (Glasberg & Moore) at frequency f."""
    return 24.7 * (4.37 * f / 1000.0 + 1.0)


def default_bandwidth(f_c: float) -> float:
    return ERB_SCALE * erb(f_c)


@dataclass(frozen=True)
class GammatoneSpec:
    """Parameters of one analytic gammatone: amplitude, order, bandwidth,
    center frequency and phase."""

    f_c: float
    b: float
    n: int = GAMMATONE_ORDER
    a: float = 1.0
    phi: float = 0.0

    def __post_init__(self):
        if not self.f_c > 0:
            raise RejectedInputError(f"f_c must be > 0, got {self.f_c}")
        if not self.b > 0:
            raise RejectedInputError(f"bandwidth must be > 0, got {self.b}")
        if self.n != GAMMATONE_ORDER:
            raise RejectedInputError(f"filter order is fixed at {GAMMATONE_ORDER}")


@dataclass(frozen=True)
class FilterbankConfig:
    """Log-spaced bank layout: channel count and band edges.

    ``bandwidths_hz`` optionally overrides the ERB rule per channel.
    """

    n_channels: int = 16
    f_min: float = 20.0
    f_max: float | None = None  # None -> 0.4 * sample_rate at design time
    bandwidths_hz: tuple | None = None

    def __post_init__(self):
        if self.n_channels < 1:
            raise RejectedInputError(f"n_channels must be >= 1, got {self.n_channels}")
        if not self.f_min > 0:
            raise RejectedInputError(f"f_min must be > 0, got {self.f_min}")
        if self.f_max is not None and not (self.f_min < self.f_max):
            raise RejectedInputError(f"need f_min < f_max, got [{self.f_min}, {self.f_max}]")
        if self.bandwidths_hz is not None and len(self.bandwidths_hz) != self.n_channels:
            raise RejectedInputError("bandwidths_hz must list one value per channel")

    def resolve_f_max(self, sample_rate: float) -> float:
        f_max = 0.4 * sample_rate if self.f_max is None else self.f_max
        if not f_max < sample_rate / 2:
            raise RejectedInputError(f"f_max {f_max} must stay below Nyquist {sample_rate / 2}")
        return f_max


@dataclass(frozen=True)
class BiquadSection:
    """One second-order section, normalized so a0 = 1."""

    b0: float
    b1: float
    b2: float
    a1: float
    a2: float

    def poles(self) -> np.ndarray:
        return np.roots([1.0, self.a1, self.a2])

    def is_stable(self) -> bool:
        return bool(np.all(np.abs(self.poles()) < 1.0))


@dataclass(frozen=True)
class FilterCascade:
    """Four biquads realizing one gammatone channel at a fixed sample rate."""

    f_c: float
    b: float
    sample_rate: float
    sections: tuple  # 4 BiquadSection

    def __post_init__(self):
        if len(self.sections) != GAMMATONE_ORDER:
            raise RejectedInputError("cascade must hold exactly 4 sections")

    def sos(self) -> np.ndarray:
        """Coefficients in scipy second-order-section layout."""
        return np.array(
            [[s.b0, s.b1, s.b2, 1.0, s.a1, s.a2] for s in self.sections], dtype=np.float64
        )

    def gain_at(self, f: float) -> float:
        """Magnitude response at frequency f (Hz)."""
        w = 2 * np.pi * f / self.sample_rate
        _, h = sps.sosfreqz(self.sos(), worN=[w])
        return float(np.abs(h[0]))

    def impulse_response(self, n_samples: int) -> np.ndarray:
        x = np.zeros(n_samples)
        x[0] = 1.0
        return sps.sosfilt(self.sos(), x)


def center_frequencies(cfg: FilterbankConfig, sample_rate: float) -> np.ndarray:
    """Geometric progression of channel centers from f_min to f_max inclusive."""
    f_max = cfg.resolve_f_max(sample_rate)
    if cfg.n_channels == 1:
        return np.array([cfg.f_min])
    return np.geomspace(cfg.f_min, f_max, cfg.n_channels)


def _analog_sections(f_c: float, b: float):
    """The four (num, den) second-order Laplace-domain factors of the
    order-4 gammatone transfer function (phase 0)."""
    p = 2 * np.pi * b
    w = 2 * np.pi * f_c
    den = [1.0, 2 * p, p * p + w * w]  # (s + p)^2 + w^2, shared by all sections
    zero_offsets = (
        (np.sqrt(2) + 1) * w,
        -(np.sqrt(2) + 1) * w,
        (np.sqrt(2) - 1) * w,
        -(np.sqrt(2) - 1) * w,
    )
    return [([1.0, p - u], den) for u in zero_offsets]


def analog_gain(f_c: float, b: float, f: float) -> float:
    """|G(j*2*pi*f)| of the analytic order-4 gammatone with unit amplitude.

    G(s) = 6 * (u^4 - 6 u^2 w^2 + w^4) / (u^2 + w^2)^4 with u = s + 2*pi*b,
    the exact Laplace transform of t^3 exp(-2*pi*b*t) cos(2*pi*f_c*t).
    """
    p = 2 * np.pi * b
    w = 2 * np.pi * f_c
    u = 1j * 2 * np.pi * f + p
    g = 6.0 * (u**4 - 6 * u**2 * w**2 + w**4) / (u**2 + w**2) ** 4
    return float(np.abs(g))


def design_channel(f_c: float, sample_rate: float, b: float | None = None) -> FilterCascade:
    """Design one channel: bilinear-transform each analog section with
    pre-warping at f_c, then renormalize the cascade to unity gain at f_c."""
    if not 0 < f_c < sample_rate / 2:
        raise FilterDesignError(f"f_c {f_c} outside (0, Nyquist {sample_rate / 2})")
    if f_c > MAX_FC_FRACTION * sample_rate:
        raise FilterDesignError(
            f"f_c {f_c} above {MAX_FC_FRACTION} * sample_rate; too close to Nyquist"
        )
    if b is None:
        b = default_bandwidth(f_c)
    w = 2 * np.pi * f_c
    # scipy's bilinear() substitutes s = 2*fs*(1 - z^-1)/(1 + z^-1); feeding it
    # fs_virtual makes the warped analog w land exactly on the digital f_c.
    fs_virtual = w / np.tan(w / (2 * sample_rate)) / 2.0
    sections = []
    for num, den in _analog_sections(f_c, b):
        bd, ad = sps.bilinear(num, den, fs=fs_virtual)
        bd = bd / ad[0]
        ad = ad / ad[0]
        sections.append(BiquadSection(bd[0], bd[1], bd[2], ad[1], ad[2]))
    raw = FilterCascade(f_c, b, sample_rate, tuple(sections))
    gain = raw.gain_at(f_c)
    if not np.isfinite(gain) or gain <= 0:
        raise FilterDesignError(f"degenerate gain {gain} at f_c={f_c}")
    scale = gain ** (-1.0 / GAMMATONE_ORDER)  # spread normalization over sections
    sections = tuple(
        BiquadSection(s.b0 * scale, s.b1 * scale, s.b2 * scale, s.a1, s.a2) for s in sections
    )
    return FilterCascade(f_c, b, sample_rate, sections)


def impulse_response_reference(spec: GammatoneSpec, t) -> np.ndarray:
    """Direct evaluation of the analytic gammatone at times t (>= 0)."""
    t = np.asarray(t, dtype=np.float64)
    if np.any(t < 0):
        raise RejectedInputError("reference impulse response is defined for t >= 0")
    return (
        spec.a
        * t ** (spec.n - 1)
        * np.exp(-2 * np.pi * spec.b * t)
        * np.cos(2 * np.pi * spec.f_c * t + spec.phi)
    )


def reference_amplitude_for_unity_gain(f_c: float, b: float, sample_rate: float) -> float:
    """Amplitude ``a`` that matches the analytic response to the digital
    cascade: unity analog gain at f_c plus the 1/fs sampling factor."""
    return 1.0 / analog_gain(f_c, b, f_c) / sample_rate


class GammatoneFilterbank:
    """A designed bank plus optional streaming state.

    Channels are processed independently; chunked processing with
    ``stateful=True`` is bit-identical to a one-shot call.
    """

    def __init__(self, cfg: FilterbankConfig, sample_rate: float):
        self.cfg = cfg
        self.sample_rate = float(sample_rate)
        f_cs = center_frequencies(cfg, sample_rate)
        bws = cfg.bandwidths_hz or [None] * cfg.n_channels
        self.cascades = [
            design_channel(fc, sample_rate, b=bw) for fc, bw in zip(f_cs, bws)
        ]
        self._sos = np.stack([c.sos() for c in self.cascades])  # (N, 4, 6)
        self.reset()

    @property
    def n_channels(self) -> int:
        return len(self.cascades)

    @property
    def center_hz(self) -> np.ndarray:
        return np.array([c.f_c for c in self.cascades])

    def reset(self):
        """Zero all per-channel filter state."""
        self._zi = np.zeros((self.n_channels, GAMMATONE_ORDER, 2))

    def process(self, x: TimeSeries, stateful: bool = False) -> MultiChannelSeries:
        """Run the bank over ``x``.

        With ``stateful=True`` filter state persists across calls, so feeding
        consecutive chunks reproduces the one-shot output exactly. Without it,
        state starts and ends at zero.
        """
        if x.sample_rate != self.sample_rate:
            raise RejectedInputError(
                f"bank designed for {self.sample_rate} Hz, input is {x.sample_rate} Hz"
            )
        out = np.empty((self.n_channels, len(x)))
        for j in range(self.n_channels):
            if stateful:
                out[j], self._zi[j] = sps.sosfilt(self._sos[j], x.samples, zi=self._zi[j])
            else:
                out[j] = sps.sosfilt(self._sos[j], x.samples)
        return MultiChannelSeries(self.sample_rate, out, t0=x.t0)


def process(bank: GammatoneFilterbank, x: TimeSeries) -> MultiChannelSeries:
    """One-shot functional wrapper around :meth:`GammatoneFilterbank.process`."""
    return bank.process(x)
