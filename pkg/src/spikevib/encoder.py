"""Asynchronous delta-modulator spike encoding with homeostatic calibration.

Each filterbank channel is tracked by a committed reference level. Whenever
the signal exceeds that level by the UP threshold (or falls below it by the
DOWN threshold) a spike is emitted and the crossed threshold is subtracted
from / added to the reference. A refractory period ``t_r`` caps the rate per
polarity.

During an initial window ``t_adapt`` every channel runs a proportional
control loop on its thresholds: an exponentially weighted running average of
the per-step binary spike indicator tracks the activity, and the threshold
moves by ``eta * (activity - target)`` each sample,

    a    <- a + (s - a) / tau_avg
    v_th <- max(floor, v_th + eta * (a - a_target))

with ``a_target = f_target / sample_rate`` (the per-step spike probability
equivalent of the target rate). After ``t_adapt`` the thresholds freeze
permanently. The frozen value is the trailing exponential average of the
threshold trajectory rather than its instantaneous endpoint: the control
loop hovers around its fixed point, and sampling a single instant would hand
downstream stages a rate biased by the hover phase.

`encode_step` and `calibrate_step` are the single-step reference
implementations; `encode` / `AdmEncoder` run the same arithmetic through a
compiled kernel and are bit-identical to the reference.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .errors import ContractViolationError, RejectedInputError
from .signals import MultiChannelSeries, Polarity, SpikeEvent, SpikeTrain

__all__ = [
    "AdmConfig",
    "CalibConfig",
    "AdmChannelState",
    "CalibrationTrace",
    "AdmEncoder",
    "encode_step",
    "calibrate_step",
    "encode",
    "estimate_initial_threshold",
]

INIT_WINDOW_S = 0.1  # auto v_thr_init estimation window, floor value
INIT_TARGET_SPIKES = 50  # stretch the window so it spans this many target spikes


def _init_window_s(f_target: float) -> float:
    return max(INIT_WINDOW_S, INIT_TARGET_SPIKES / f_target)


@dataclass(frozen=True)
class AdmConfig:
    """Per-channel modulator constants.

    ``v_thr_init=None`` derives the initial threshold per channel from the
    first 100 ms of signal, choosing the value whose frozen-modulator rate
    already matches the calibration target (clamped to ``thr_floor``).
    """

    t_r: float = 0.0
    v_thr_init: float | None = None
    thr_floor: float = 1e-9

    def __post_init__(self):
        if self.t_r < 0:
            raise RejectedInputError(f"t_r must be >= 0, got {self.t_r}")
        if not self.thr_floor > 0:
            raise RejectedInputError(f"thr_floor must be > 0, got {self.thr_floor}")
        if self.v_thr_init is not None and self.v_thr_init < self.thr_floor:
            raise RejectedInputError("v_thr_init must be >= thr_floor")


@dataclass(frozen=True)
class CalibConfig:
    """Homeostatic calibration constants.

    ``eta`` is expressed in units of the channel's initial threshold per unit
    activity error, so one value serves channels of very different scales.
    ``freeze_avg_fraction`` sets the trailing-average window used for the
    frozen threshold, as a fraction of the adaptation window.
    """

    t_adapt: float
    f_target: float
    eta: float = 0.01
    tau_avg: float = 1000.0
    freeze_avg_fraction: float = 0.125

    def __post_init__(self):
        if not self.t_adapt > 0:
            raise RejectedInputError(f"t_adapt must be > 0, got {self.t_adapt}")
        if not self.f_target > 0:
            raise RejectedInputError(f"f_target must be > 0, got {self.f_target}")
        if not self.eta > 0:
            raise RejectedInputError(f"eta must be > 0, got {self.eta}")
        if not self.tau_avg > 1:
            raise RejectedInputError(f"tau_avg must be > 1, got {self.tau_avg}")
        if not 0 < self.freeze_avg_fraction <= 1:
            raise RejectedInputError("freeze_avg_fraction must be in (0, 1]")


@dataclass
class AdmChannelState:
    """Mutable per-channel encoder state (thresholds, reference, activities)."""

    v_thr_up: float
    v_thr_dn: float
    thr_floor: float
    eta: float  # effective gain, threshold units per activity unit
    a_target: float
    ref_level: float = math.nan  # committed on the first sample
    a_up: float = 0.0
    a_dn: float = 0.0
    last_spike_t_up: float = -math.inf
    last_spike_t_dn: float = -math.inf
    avg_thr_up: float = math.nan
    avg_thr_dn: float = math.nan
    calibrating: bool = True
    channel: int = 0
    _last_t: float = -math.inf

    def __post_init__(self):
        if math.isnan(self.avg_thr_up):
            self.avg_thr_up = self.v_thr_up
        if math.isnan(self.avg_thr_dn):
            self.avg_thr_dn = self.v_thr_dn
        if self.a_up == 0.0 and self.a_dn == 0.0:
            # start the running averages at the fixed point
            self.a_up = self.a_target
            self.a_dn = self.a_target

    @classmethod
    def create(
        cls,
        v_thr_init: float,
        cfg: AdmConfig,
        cal: CalibConfig,
        sample_rate: float,
        channel: int = 0,
    ) -> "AdmChannelState":
        v0 = max(cfg.thr_floor, v_thr_init)
        return cls(
            v_thr_up=v0,
            v_thr_dn=v0,
            thr_floor=cfg.thr_floor,
            eta=cal.eta * v0,
            a_target=cal.f_target / sample_rate,
            channel=channel,
        )


def encode_step(state: AdmChannelState, sample: float, t: float, cfg: AdmConfig) -> list:
    """Process one sample at time ``t``; returns the emitted events.

    Repeated threshold crossings within one sample emit repeatedly until the
    reference is within one threshold of the signal, except that a nonzero
    refractory period caps emissions at one per polarity.
    """
    if not t > state._last_t:
        raise ContractViolationError(
            f"non-monotone time: step at t={t} after t={state._last_t}"
        )
    state._last_t = t
    if math.isnan(state.ref_level):
        state.ref_level = sample
    events = []
    while sample - state.ref_level >= state.v_thr_up and t - state.last_spike_t_up >= cfg.t_r:
        events.append(SpikeEvent(t, state.channel, Polarity.UP))
        state.ref_level += state.v_thr_up
        state.last_spike_t_up = t
        if cfg.t_r > 0:
            break
    while state.ref_level - sample >= state.v_thr_dn and t - state.last_spike_t_dn >= cfg.t_r:
        events.append(SpikeEvent(t, state.channel, Polarity.DOWN))
        state.ref_level -= state.v_thr_dn
        state.last_spike_t_dn = t
        if cfg.t_r > 0:
            break
    return events


def calibrate_step(
    state: AdmChannelState,
    spiked_up: bool,
    spiked_dn: bool,
    cal: CalibConfig,
    freeze_tau: float | None = None,
) -> AdmChannelState:
    """One homeostatic update from this step's spike indicators.

    Mutates and returns ``state``. ``freeze_tau`` is the trailing-average
    time constant in steps (defaults to ``tau_avg``) used to maintain the
    value the thresholds will freeze at.
    """
    if not state.calibrating:
        raise ContractViolationError("calibrate_step on a frozen channel")
    s_up = 1.0 if spiked_up else 0.0
    s_dn = 1.0 if spiked_dn else 0.0
    state.a_up = state.a_up + (s_up - state.a_up) / cal.tau_avg
    state.a_dn = state.a_dn + (s_dn - state.a_dn) / cal.tau_avg
    state.v_thr_up = max(state.thr_floor, state.v_thr_up + state.eta * (state.a_up - state.a_target))
    state.v_thr_dn = max(state.thr_floor, state.v_thr_dn + state.eta * (state.a_dn - state.a_target))
    ft = cal.tau_avg if freeze_tau is None else freeze_tau
    state.avg_thr_up = state.avg_thr_up + (state.v_thr_up - state.avg_thr_up) / ft
    state.avg_thr_dn = state.avg_thr_dn + (state.v_thr_dn - state.avg_thr_dn) / ft
    return state


def freeze_thresholds(state: AdmChannelState) -> AdmChannelState:
    """End calibration: pin thresholds at their trailing averages."""
    state.v_thr_up = max(state.thr_floor, state.avg_thr_up)
    state.v_thr_dn = max(state.thr_floor, state.avg_thr_dn)
    state.calibrating = False
    return state


@njit(cache=True)
def _fixed_theta_up_count(x, theta):
    """UP spikes emitted over ``x`` by a frozen symmetric threshold."""
    ref = x[0]
    n_up = 0
    for i in range(x.shape[0]):
        while x[i] - ref >= theta:
            n_up += 1
            ref += theta
        while ref - x[i] >= theta:
            ref -= theta
    return n_up


def estimate_initial_threshold(
    window: np.ndarray, sample_rate: float, f_target: float, thr_floor: float
) -> float:
    """Threshold whose frozen-modulator UP rate over ``window`` matches
    ``f_target``, found by bisection (rate is monotone in the threshold).

    Starting each channel at its operating point keeps the calibration
    transient small; initializing at the signal's standard deviation leaves
    narrowband channels firing far above target until the control loop
    catches up, and that burst would dominate any downstream tuning window.
    """
    window = np.ascontiguousarray(window, dtype=np.float64)
    target = f_target * window.size / sample_rate
    sigma = float(np.std(window))
    if sigma <= 0:
        return thr_floor
    lo, hi = max(thr_floor, 1e-4 * sigma), 1e4 * sigma
    if _fixed_theta_up_count(window, lo) <= target:
        return lo  # quiet even at the smallest threshold
    for _ in range(60):
        mid = math.sqrt(lo * hi)
        if _fixed_theta_up_count(window, mid) > target:
            lo = mid
        else:
            hi = mid
        if hi / lo < 1.001:
            break
    return max(thr_floor, math.sqrt(lo * hi))


# state vector layout for the compiled kernel (one row per channel)
_THR_UP, _THR_DN, _REF, _A_UP, _A_DN, _LAST_UP, _LAST_DN, _AVG_UP, _AVG_DN, _ETA, _INIT = range(11)
_STATE_LEN = 11


@njit(cache=True)
def _adm_kernel(
    x,            # (n,) one channel's samples
    st,           # (_STATE_LEN,) mutable state row
    i0,           # global index of x[0]
    t0,           # stream start time
    dt,
    t_r,
    thr_floor,
    tau,
    a_target,
    adapt_steps,
    freeze_tau,
    trace_stride,
):
    n = x.shape[0]
    up_t = np.empty(256, np.float64)
    dn_t = np.empty(256, np.float64)
    n_up = 0
    n_dn = 0
    n_trace = n // trace_stride + 2
    trace = np.empty((n_trace, 5), np.float64)
    k_trace = 0

    thr_up = st[_THR_UP]
    thr_dn = st[_THR_DN]
    ref = st[_REF]
    a_up = st[_A_UP]
    a_dn = st[_A_DN]
    last_up = st[_LAST_UP]
    last_dn = st[_LAST_DN]
    avg_up = st[_AVG_UP]
    avg_dn = st[_AVG_DN]
    eta = st[_ETA]
    if st[_INIT] == 0.0 and n > 0:
        ref = x[0]

    for i in range(n):
        g = i0 + i  # global step index
        t = t0 + g * dt
        s_up = 0.0
        s_dn = 0.0
        while x[i] - ref >= thr_up and t - last_up >= t_r:
            if n_up >= up_t.shape[0]:
                tmp = np.empty(up_t.shape[0] * 2, np.float64)
                tmp[:n_up] = up_t[:n_up]
                up_t = tmp
            up_t[n_up] = t
            n_up += 1
            ref += thr_up
            last_up = t
            s_up = 1.0
            if t_r > 0:
                break
        while ref - x[i] >= thr_dn and t - last_dn >= t_r:
            if n_dn >= dn_t.shape[0]:
                tmp = np.empty(dn_t.shape[0] * 2, np.float64)
                tmp[:n_dn] = dn_t[:n_dn]
                dn_t = tmp
            dn_t[n_dn] = t
            n_dn += 1
            ref -= thr_dn
            last_dn = t
            s_dn = 1.0
            if t_r > 0:
                break
        if g < adapt_steps:
            a_up = a_up + (s_up - a_up) / tau
            a_dn = a_dn + (s_dn - a_dn) / tau
            thr_up = max(thr_floor, thr_up + eta * (a_up - a_target))
            thr_dn = max(thr_floor, thr_dn + eta * (a_dn - a_target))
            avg_up = avg_up + (thr_up - avg_up) / freeze_tau
            avg_dn = avg_dn + (thr_dn - avg_dn) / freeze_tau
            if g % trace_stride == 0:
                trace[k_trace, 0] = t
                trace[k_trace, 1] = thr_up
                trace[k_trace, 2] = thr_dn
                trace[k_trace, 3] = a_up
                trace[k_trace, 4] = a_dn
                k_trace += 1
            if g == adapt_steps - 1:
                thr_up = max(thr_floor, avg_up)
                thr_dn = max(thr_floor, avg_dn)

    st[_THR_UP] = thr_up
    st[_THR_DN] = thr_dn
    st[_REF] = ref
    st[_A_UP] = a_up
    st[_A_DN] = a_dn
    st[_LAST_UP] = last_up
    st[_LAST_DN] = last_dn
    st[_AVG_UP] = avg_up
    st[_AVG_DN] = avg_dn
    st[_INIT] = 1.0
    return up_t[:n_up], dn_t[:n_dn], trace[:k_trace]


@dataclass(frozen=True)
class CalibrationTrace:
    """Diagnostics from the calibration window.

    Threshold/activity trajectories are decimated by ``stride`` samples;
    DOWN spikes (not consumed downstream) are returned here in full.
    """

    stride: int
    times: np.ndarray                # (n_rows,)
    v_thr_up: np.ndarray             # (n_channels, n_rows)
    v_thr_dn: np.ndarray
    a_up: np.ndarray
    a_dn: np.ndarray
    v_thr_init: np.ndarray           # (n_channels,)
    v_thr_frozen_up: np.ndarray
    v_thr_frozen_dn: np.ndarray
    down_events: SpikeTrain


class AdmEncoder:
    """Streaming multi-channel encoder with persistent state.

    Feeding the signal in chunks of any size yields output bit-identical to
    a single call; per-channel state lives in a compact array consumed by the
    compiled kernel.
    """

    def __init__(
        self,
        n_channels: int,
        sample_rate: float,
        cfg: AdmConfig,
        cal: CalibConfig,
        t0: float = 0.0,
        trace_stride: int | None = None,
    ):
        self.n_channels = n_channels
        self.sample_rate = float(sample_rate)
        self.cfg = cfg
        self.cal = cal
        self.t0 = float(t0)
        self.dt = 1.0 / self.sample_rate
        self.adapt_steps = int(round(cal.t_adapt * self.sample_rate))
        self.freeze_tau = max(1.0, cal.freeze_avg_fraction * self.adapt_steps)
        self.a_target = cal.f_target / self.sample_rate
        self.trace_stride = trace_stride or max(1, int(round(self.sample_rate / 100.0)))
        self._state = None
        self.v_thr_init = None
        self._i = 0  # global sample cursor
        self._up = []
        self._dn = []
        self._trace = [[] for _ in range(n_channels)]

    def _init_states(self, first_chunk: np.ndarray):
        win_s = _init_window_s(self.cal.f_target)
        init_n = max(1, int(round(win_s * self.sample_rate)))
        if self.cfg.v_thr_init is None and first_chunk.shape[1] < init_n:
            raise RejectedInputError(
                f"first chunk must cover the {win_s * 1e3:.0f} ms threshold "
                f"init window ({init_n} samples), got {first_chunk.shape[1]}"
            )
        st = np.zeros((self.n_channels, _STATE_LEN))
        v0 = np.empty(self.n_channels)
        for j in range(self.n_channels):
            if self.cfg.v_thr_init is not None:
                v = self.cfg.v_thr_init
            else:
                v = estimate_initial_threshold(
                    first_chunk[j, :init_n],
                    self.sample_rate,
                    self.cal.f_target,
                    self.cfg.thr_floor,
                )
            v0[j] = max(self.cfg.thr_floor, v)
            st[j, _THR_UP] = v0[j]
            st[j, _THR_DN] = v0[j]
            st[j, _AVG_UP] = v0[j]
            st[j, _AVG_DN] = v0[j]
            st[j, _A_UP] = self.a_target
            st[j, _A_DN] = self.a_target
            st[j, _LAST_UP] = -np.inf
            st[j, _LAST_DN] = -np.inf
            st[j, _ETA] = self.cal.eta * v0[j]
        self._state = st
        self.v_thr_init = v0

    def process(self, chunk: np.ndarray):
        """Encode one (n_channels, n) chunk; events accumulate internally."""
        chunk = np.asarray(chunk, dtype=np.float64)
        if chunk.ndim != 2 or chunk.shape[0] != self.n_channels:
            raise RejectedInputError(
                f"chunk must be ({self.n_channels}, n), got {chunk.shape}"
            )
        if self._state is None:
            self._init_states(chunk)
        for j in range(self.n_channels):
            up, dn, tr = _adm_kernel(
                np.ascontiguousarray(chunk[j]),
                self._state[j],
                self._i,
                self.t0,
                self.dt,
                self.cfg.t_r,
                self.cfg.thr_floor,
                self.cal.tau_avg,
                self.a_target,
                self.adapt_steps,
                self.freeze_tau,
                self.trace_stride,
            )
            self._up.append((j, up))
            self._dn.append((j, dn))
            if tr.shape[0]:
                self._trace[j].append(tr)
        self._i += chunk.shape[1]

    def finalize(self) -> tuple:
        """Assemble (SpikeTrain of UP events, CalibrationTrace)."""
        duration = self._i * self.dt
        end = self.t0 + duration

        def build(parts, polarity):
            ts, cs = [], []
            for j, arr in parts:
                ts.append(arr)
                cs.append(np.full(arr.shape[0], j, dtype=np.int64))
            t = np.concatenate(ts) if ts else np.empty(0)
            c = np.concatenate(cs) if cs else np.empty(0, np.int64)
            p = np.full(t.shape[0], int(polarity), dtype=np.int8)
            return SpikeTrain(t, c, p, end)

        up_train = build(self._up, Polarity.UP)
        dn_train = build(self._dn, Polarity.DOWN)

        per_ch = [np.vstack(parts) if parts else np.empty((0, 5)) for parts in self._trace]
        n_rows = per_ch[0].shape[0] if per_ch else 0
        times = per_ch[0][:, 0] if n_rows else np.empty(0)
        shape = (self.n_channels, n_rows)
        vdu, vdd, adu, add_ = (np.zeros(shape) for _ in range(4))
        for j, tr in enumerate(per_ch):
            vdu[j] = tr[:, 1]
            vdd[j] = tr[:, 2]
            adu[j] = tr[:, 3]
            add_[j] = tr[:, 4]
        st = self._state if self._state is not None else np.zeros((self.n_channels, _STATE_LEN))
        trace = CalibrationTrace(
            stride=self.trace_stride,
            times=times,
            v_thr_up=vdu,
            v_thr_dn=vdd,
            a_up=adu,
            a_dn=add_,
            v_thr_init=self.v_thr_init if self.v_thr_init is not None else np.empty(0),
            v_thr_frozen_up=st[:, _THR_UP].copy(),
            v_thr_frozen_dn=st[:, _THR_DN].copy(),
            down_events=dn_train,
        )
        return up_train, trace


def encode(x: MultiChannelSeries, cfg: AdmConfig, cal: CalibConfig):
    """Encode a full multi-channel series; see module docstring.

    Returns ``(up_train, calibration_trace)``. Deterministic: identical input
    and config give a bit-identical spike train.
    """
    if x.n_samples == 0:
        raise RejectedInputError("cannot encode an empty series")
    if cal.t_adapt > x.duration + 0.5 / x.sample_rate:
        raise RejectedInputError(
            f"t_adapt {cal.t_adapt} s exceeds input duration {x.duration} s"
        )
    enc = AdmEncoder(x.n_channels, x.sample_rate, cfg, cal, t0=x.t0)
    enc.process(x.channels)
    return enc.finalize()
