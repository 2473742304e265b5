"""Balanced spiking neural network of LIF neurons.

Topology: N input spike sources (the encoder's UP channels), N hidden LIF
neurons, one output LIF neuron. Hidden neuron j receives an excitatory
synapse from channel j with weight

    w_exc = alpha * (N - 1) * w_inh

and an inhibitory synapse of weight w_inh from every other channel, so with
alpha = 1 a volley that is identical across channels cancels exactly. All
hidden neurons project to the output with weight w_ho. Synapses are delta
jumps: a presynaptic spike moves the target membrane by w immediately.

Membrane dynamics follow the RC leak
    dV/dt = ((V_rest - V) + R*I) / (R*C)
integrated with the exact per-step exponential decay (no Euler error), so
the leak is dt-invariant and the alpha=1 cancellation is exact. A spike
resets the membrane to v_reset and starts a refractory hold during which
input still integrates but firing is blocked.

`tune` implements the sub-threshold search: over a log grid of
(w_ho, tau_c) pairs, pick the one maximizing the peak output membrane
potential subject to the output staying silent on a healthy calibration
train. `regenerate_poisson` resamples a train as an interval-wise
homogeneous Poisson process at the measured per-window rates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from numba import njit

from .errors import RejectedInputError, TuningFailureError
from .signals import Polarity, SpikeTrain

__all__ = [
    "LifParams",
    "LifState",
    "BsnnConfig",
    "BsnnNetwork",
    "SimTrace",
    "TuningGrid",
    "TuningResult",
    "lif_step",
    "build_bsnn",
    "simulate",
    "tune",
    "regenerate_poisson",
]


@dataclass(frozen=True)
class LifParams:
    """Leaky integrate-and-fire constants; tau_c = r * c."""

    r: float = 1.0
    c: float = 0.1
    v_rest: float = 0.0
    v_thr: float = 1.0
    v_reset: float = 0.0
    t_ref: float = 1e-3

    def __post_init__(self):
        if not (self.r > 0 and self.c > 0):
            raise RejectedInputError("r and c must be > 0")
        if not self.v_thr > self.v_reset:
            raise RejectedInputError("v_thr must exceed v_reset")
        if self.t_ref < 0:
            raise RejectedInputError("t_ref must be >= 0")

    @property
    def tau_c(self) -> float:
        return self.r * self.c

    def with_tau_c(self, tau_c: float) -> "LifParams":
        """Same neuron with the membrane time constant replaced (r kept)."""
        return replace(self, c=tau_c / self.r)


@dataclass
class LifState:
    """Membrane potential plus the refractory clock of one neuron."""

    v_mem: float
    t: float = 0.0
    refractory_until: float = -math.inf


def lif_step(state: LifState, params: LifParams, impulse: float, dt: float):
    """Advance one step: exact exponential leak, add the step's synaptic
    deltas, then fire if above threshold and out of refractory.

    Returns ``(state, spiked)``; ``state`` is mutated in place.
    """
    if not dt > 0:
        raise RejectedInputError(f"dt must be > 0, got {dt}")
    decay = math.exp(-dt / params.tau_c)
    v = params.v_rest + (state.v_mem - params.v_rest) * decay
    v = v + impulse
    spiked = False
    if v >= params.v_thr and state.t >= state.refractory_until:
        spiked = True
        v = params.v_reset
        state.refractory_until = state.t + params.t_ref
    state.v_mem = v
    state.t = state.t + dt
    return state, spiked


@dataclass(frozen=True)
class BsnnConfig:
    """Network shape and weights. ``w_exc`` is constructed from the balance
    identity, never stored independently."""

    n: int = 16
    alpha: float = 1.25
    w_inh: float = 0.01
    w_ho: float = 0.1
    dt: float = 1e-4

    def __post_init__(self):
        if self.n < 2:
            raise RejectedInputError(f"need n >= 2 channels, got {self.n}")
        if not self.alpha > 0:
            raise RejectedInputError(f"alpha must be > 0, got {self.alpha}")
        if not self.w_inh > 0:
            raise RejectedInputError(f"w_inh must be > 0, got {self.w_inh}")
        if not self.w_ho > 0:
            raise RejectedInputError(f"w_ho must be > 0, got {self.w_ho}")
        if not self.dt > 0:
            raise RejectedInputError(f"dt must be > 0, got {self.dt}")

    @property
    def balance_scale(self) -> float:
        """alpha * (N - 1), the excitation-to-inhibition weight ratio."""
        return self.alpha * (self.n - 1)

    @property
    def w_exc(self) -> float:
        return self.balance_scale * self.w_inh


@dataclass(frozen=True)
class BsnnNetwork:
    """Built network: config plus shared hidden/output neuron parameters."""

    cfg: BsnnConfig
    hidden: LifParams
    output: LifParams

    def synapse_counts(self) -> dict:
        n = self.cfg.n
        return {
            "input_excitatory": n,
            "input_inhibitory": n * (n - 1),
            "hidden_output": n,
            "total": n * n + n,
        }

    def synapses(self):
        """Enumerate (pre, post, weight) triples of the full connectivity."""
        n = self.cfg.n
        for j in range(n):
            yield ("in", j), ("hid", j), self.cfg.w_exc
            for k in range(n):
                if k != j:
                    yield ("in", k), ("hid", j), -self.cfg.w_inh
        for j in range(n):
            yield ("hid", j), ("out", 0), self.cfg.w_ho

    def with_tuning(self, w_ho: float, tau_c: float) -> "BsnnNetwork":
        return BsnnNetwork(
            cfg=replace(self.cfg, w_ho=w_ho),
            hidden=self.hidden.with_tau_c(tau_c),
            output=self.output.with_tau_c(tau_c),
        )


def build_bsnn(cfg: BsnnConfig, lif: LifParams, output: LifParams | None = None) -> BsnnNetwork:
    """Assemble the balanced network; hidden neurons share ``lif``, the
    output neuron defaults to the same parameters."""
    return BsnnNetwork(cfg=cfg, hidden=lif, output=output or lif)


@dataclass(frozen=True)
class SimTrace:
    """Simulation record: exact spikes, decimated output membrane trace."""

    output_spikes: SpikeTrain
    hidden_spikes: SpikeTrain
    v_mem_times: np.ndarray
    v_mem_output: np.ndarray
    trace_decimation: int
    peak_v_output: float


@njit(cache=True)
def _bsnn_kernel(
    ev_t,
    ev_c,
    n_steps,
    dt,
    n,
    w_inh,
    alpha_nm1,
    w_ho,
    vrest_h,
    vthr_h,
    vreset_h,
    tref_h,
    decay_h,
    vrest_o,
    vthr_o,
    vreset_o,
    tref_o,
    decay_o,
    trace_decim,
):
    v_h = np.full(n, vrest_h)
    refr_h = np.full(n, -np.inf)
    counts = np.zeros(n, np.int64)
    v_o = vrest_o
    refr_o = -np.inf
    peak_o = v_o

    hid_t = np.empty(1024, np.float64)
    hid_i = np.empty(1024, np.int64)
    n_hid = 0
    out_t = np.empty(256, np.float64)
    n_out = 0
    n_tr = n_steps // trace_decim + 1
    tr_t = np.empty(n_tr, np.float64)
    tr_v = np.empty(n_tr, np.float64)
    k_tr = 0

    ptr = 0
    n_ev = ev_t.shape[0]
    for k in range(n_steps):
        t = k * dt
        t_next = (k + 1) * dt
        for j in range(n):
            counts[j] = 0
        while ptr < n_ev and ev_t[ptr] < t_next:
            counts[ev_c[ptr]] += 1
            ptr += 1
        total = 0
        for j in range(n):
            total += counts[j]

        n_fired = 0
        for j in range(n):
            v = vrest_h + (v_h[j] - vrest_h) * decay_h
            if total > 0:
                v = v + w_inh * (alpha_nm1 * counts[j] - (total - counts[j]))
            if v >= vthr_h and t >= refr_h[j]:
                if n_hid >= hid_t.shape[0]:
                    tmp_t = np.empty(hid_t.shape[0] * 2, np.float64)
                    tmp_t[:n_hid] = hid_t[:n_hid]
                    hid_t = tmp_t
                    tmp_i = np.empty(hid_i.shape[0] * 2, np.int64)
                    tmp_i[:n_hid] = hid_i[:n_hid]
                    hid_i = tmp_i
                hid_t[n_hid] = t
                hid_i[n_hid] = j
                n_hid += 1
                n_fired += 1
                v = vreset_h
                refr_h[j] = t + tref_h
            v_h[j] = v

        v_o = vrest_o + (v_o - vrest_o) * decay_o
        if n_fired > 0:
            v_o = v_o + w_ho * n_fired
        if v_o > peak_o:
            peak_o = v_o
        if v_o >= vthr_o and t >= refr_o:
            if n_out >= out_t.shape[0]:
                tmp = np.empty(out_t.shape[0] * 2, np.float64)
                tmp[:n_out] = out_t[:n_out]
                out_t = tmp
            out_t[n_out] = t
            n_out += 1
            v_o = vreset_o
            refr_o = t + tref_o
        if k % trace_decim == 0:
            tr_t[k_tr] = t
            tr_v[k_tr] = v_o
            k_tr += 1

    return (
        hid_t[:n_hid],
        hid_i[:n_hid],
        out_t[:n_out],
        tr_t[:k_tr],
        tr_v[:k_tr],
        peak_o,
    )


@njit(cache=True)
def _hidden_kernel(ev_t, ev_c, n_steps, dt, n, w_inh, alpha_nm1,
                   vrest, vthr, vreset, tref, decay):
    """Hidden layer only; returns per-step hidden spike counts."""
    v_h = np.full(n, vrest)
    refr_h = np.full(n, -np.inf)
    counts = np.zeros(n, np.int64)
    fired = np.zeros(n_steps, np.int32)
    ptr = 0
    n_ev = ev_t.shape[0]
    for k in range(n_steps):
        t = k * dt
        t_next = (k + 1) * dt
        for j in range(n):
            counts[j] = 0
        while ptr < n_ev and ev_t[ptr] < t_next:
            counts[ev_c[ptr]] += 1
            ptr += 1
        total = 0
        for j in range(n):
            total += counts[j]
        nf = 0
        for j in range(n):
            v = vrest + (v_h[j] - vrest) * decay
            if total > 0:
                v = v + w_inh * (alpha_nm1 * counts[j] - (total - counts[j]))
            if v >= vthr and t >= refr_h[j]:
                nf += 1
                v = vreset
                refr_h[j] = t + tref
            v_h[j] = v
        fired[k] = nf
    return fired


@njit(cache=True)
def _output_scan_kernel(fired, dt, w_ho_values, vrest, vthr, vreset, tref, decay):
    """Output neuron over precomputed hidden counts, one lane per w_ho."""
    m = w_ho_values.shape[0]
    v = np.full(m, vrest)
    refr = np.full(m, -np.inf)
    peak = np.full(m, vrest)
    nsp = np.zeros(m, np.int64)
    for k in range(fired.shape[0]):
        t = k * dt
        nf = fired[k]
        for i in range(m):
            vi = vrest + (v[i] - vrest) * decay
            if nf > 0:
                vi = vi + w_ho_values[i] * nf
            if vi > peak[i]:
                peak[i] = vi
            if vi >= vthr and t >= refr[i]:
                nsp[i] += 1
                vi = vreset
                refr[i] = t + tref
            v[i] = vi
    return peak, nsp


def _validated_events(input_train: SpikeTrain, n: int, duration: float):
    if len(input_train) and input_train.channels.max() >= n:
        raise RejectedInputError(
            f"input channel {int(input_train.channels.max())} >= network size {n}"
        )
    if len(input_train) and input_train.times.max() > duration:
        raise RejectedInputError("input events extend past the simulation duration")
    return np.ascontiguousarray(input_train.times), np.ascontiguousarray(input_train.channels)


def simulate(
    net: BsnnNetwork,
    input_train: SpikeTrain,
    duration: float,
    trace_decimation: int | None = None,
) -> SimTrace:
    """Fixed-step simulation of the full network over UP events.

    Input spikes falling in step [t, t+dt) are delivered in that step;
    hidden spikes reach the output inside the same step, so the total
    input-to-output latency is one step. Fully deterministic.
    """
    cfg = net.cfg
    n_steps = int(math.ceil(duration / cfg.dt - 1e-12))
    ev_t, ev_c = _validated_events(input_train, cfg.n, duration)
    decim = trace_decimation or max(1, n_steps // 100_000)
    hid_t, hid_i, out_t, tr_t, tr_v, peak = _bsnn_kernel(
        ev_t,
        ev_c,
        n_steps,
        cfg.dt,
        cfg.n,
        cfg.w_inh,
        cfg.balance_scale,
        cfg.w_ho,
        net.hidden.v_rest,
        net.hidden.v_thr,
        net.hidden.v_reset,
        net.hidden.t_ref,
        math.exp(-cfg.dt / net.hidden.tau_c),
        net.output.v_rest,
        net.output.v_thr,
        net.output.v_reset,
        net.output.t_ref,
        math.exp(-cfg.dt / net.output.tau_c),
        decim,
    )
    return SimTrace(
        output_spikes=SpikeTrain(
            out_t, np.zeros(out_t.shape[0], np.int64),
            np.full(out_t.shape[0], int(Polarity.UP), np.int8), duration,
        ),
        hidden_spikes=SpikeTrain(
            hid_t, hid_i, np.full(hid_t.shape[0], int(Polarity.UP), np.int8), duration,
        ),
        v_mem_times=tr_t,
        v_mem_output=tr_v,
        trace_decimation=decim,
        peak_v_output=float(peak),
    )


@dataclass(frozen=True)
class TuningGrid:
    """Log-spaced search grid over output weight and membrane time constant."""

    w_ho_values: np.ndarray
    tau_c_values: np.ndarray

    @classmethod
    def default(cls, lif: LifParams) -> "TuningGrid":
        span = lif.v_thr - lif.v_rest
        return cls(
            w_ho_values=np.geomspace(0.01, 10.0, 24) * span,
            tau_c_values=np.geomspace(1e-3, 1.0, 16),
        )


@dataclass(frozen=True)
class TuningResult:
    w_ho: float
    tau_c: float
    peak_v: float
    margin: float  # v_thr - peak_v of the selected point


def tune(
    net_template: BsnnNetwork,
    calib_input: SpikeTrain,
    grid: TuningGrid | None = None,
    window: float | None = None,
) -> TuningResult:
    """Select (w_ho, tau_c) maximizing peak output membrane potential with
    zero output spikes over the healthy calibration train.

    Ties are broken toward smaller w_ho, then smaller tau_c. Hidden dynamics
    do not depend on w_ho, so each tau_c simulates the hidden layer once and
    scans all w_ho lanes over its hidden spike counts; results are identical
    to simulating every pair.
    """
    cfg = net_template.cfg
    if grid is None:
        grid = TuningGrid.default(net_template.output)
    duration = window if window is not None else calib_input.duration
    n_steps = int(math.ceil(duration / cfg.dt - 1e-12))
    ev_t, ev_c = _validated_events(calib_input, cfg.n, calib_input.duration)
    keep = ev_t <= duration
    ev_t, ev_c = ev_t[keep], ev_c[keep]

    w_vals = np.sort(np.asarray(grid.w_ho_values, dtype=np.float64))
    tau_vals = np.sort(np.asarray(grid.tau_c_values, dtype=np.float64))
    candidates = []
    for tau_c in tau_vals:
        decay = math.exp(-cfg.dt / tau_c)
        fired = _hidden_kernel(
            ev_t, ev_c, n_steps, cfg.dt, cfg.n, cfg.w_inh, cfg.balance_scale,
            net_template.hidden.v_rest, net_template.hidden.v_thr,
            net_template.hidden.v_reset, net_template.hidden.t_ref, decay,
        )
        peak, nsp = _output_scan_kernel(
            fired, cfg.dt, w_vals,
            net_template.output.v_rest, net_template.output.v_thr,
            net_template.output.v_reset, net_template.output.t_ref, decay,
        )
        for i, w in enumerate(w_vals):
            if nsp[i] == 0:
                candidates.append((float(peak[i]), float(w), float(tau_c)))
    if not candidates:
        raise TuningFailureError(
            "every (w_ho, tau_c) grid point produced output spikes; widen the grid"
        )
    best_peak = max(c[0] for c in candidates)
    peak_v, w_ho, tau_c = min(
        (c for c in candidates if c[0] == best_peak), key=lambda c: (c[1], c[2])
    )
    return TuningResult(
        w_ho=w_ho,
        tau_c=tau_c,
        peak_v=peak_v,
        margin=net_template.output.v_thr - peak_v,
    )


def regenerate_poisson(input_train: SpikeTrain, interval: float, seed: int) -> SpikeTrain:
    """Resample each channel as an interval-wise homogeneous Poisson process.

    For every consecutive window of length ``interval`` the UP rate is
    measured and a Poisson train of that rate is drawn inside the window.
    Reproducible for a fixed seed.
    """
    if not interval > 0:
        raise RejectedInputError(f"interval must be > 0, got {interval}")
    rng = np.random.default_rng(seed)
    duration = input_train.duration
    up = input_train.select(polarity=Polarity.UP)
    times, chans = [], []
    n_windows = int(math.ceil(duration / interval - 1e-12))
    for ch in np.unique(up.channels):
        ch_times = up.times[up.channels == ch]
        for w in range(n_windows):
            lo = w * interval
            hi = min((w + 1) * interval, duration)
            count = int(np.count_nonzero((ch_times >= lo) & (ch_times < hi)))
            if count == 0:
                continue
            k = rng.poisson(count)  # rate * window length == observed count
            if k == 0:
                continue
            times.append(lo + rng.random(k) * (hi - lo))
            chans.append(np.full(k, ch, dtype=np.int64))
    t = np.concatenate(times) if times else np.empty(0)
    c = np.concatenate(chans) if chans else np.empty(0, np.int64)
    return SpikeTrain(t, c, np.full(t.shape[0], int(Polarity.UP), np.int8), duration)
