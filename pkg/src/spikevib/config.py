"""Pipeline configuration: one layered TOML file with per-stage blocks.

Schema (all keys optional; omitted keys take the preset/dataclass defaults):

    [filterbank]
    n_channels = 16
    f_min_hz = 20.0
    f_max_hz = 8000.0          # default 0.4 * sample rate
    bandwidth_hz = [ ... ]     # optional per-channel override

    [adm]
    t_refractory_s = 0.0
    v_thr_init = 0.0           # 0 / omitted -> per-channel auto init
    thr_floor = 1e-9

    [calib]
    t_adapt_s = 3.0
    f_target_hz = 500.0
    eta = 0.01                 # in units of the channel's initial threshold
    tau_avg_steps = 1000
    freeze_avg_fraction = 0.125

    [snn]
    alpha = 1.25
    w_inh = 0.01
    w_ho = 0.1                 # pre-tuning placeholder
    dt_s = 1e-4
    v_rest = 0.0
    v_thr = 1.0
    v_reset = 0.0
    t_ref_s = 1e-3

    [tuning]
    window_s = 3.0
    w_ho_lo = 0.01             # in units of (v_thr - v_rest)
    w_ho_hi = 10.0
    w_ho_points = 24
    tau_c_lo_s = 1e-3
    tau_c_hi_s = 1.0
    tau_c_points = 16

    [poisson]
    interval_s = 1.0

    seed = 0

Every emitted artifact embeds ``config_hash``, the sha256 of the fully
resolved configuration, so outputs are traceable to their exact settings.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import sys
from dataclasses import dataclass, field

import numpy as np

from .cochlea import FilterbankConfig
from .encoder import AdmConfig, CalibConfig
from .errors import ParseError, RejectedInputError
from .snn import BsnnConfig, LifParams, TuningGrid

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

__all__ = [
    "TuningConfig",
    "PipelineConfig",
    "load_config",
    "config_hash",
    "ibf_default",
    "r2f_default",
]


@dataclass(frozen=True)
class TuningConfig:
    """Search window plus log-grid bounds for (w_ho, tau_c)."""

    window_s: float = 3.0
    w_ho_lo: float = 0.01
    w_ho_hi: float = 10.0
    w_ho_points: int = 24
    tau_c_lo_s: float = 1e-3
    tau_c_hi_s: float = 1.0
    tau_c_points: int = 16

    def grid(self, lif: LifParams) -> TuningGrid:
        span = lif.v_thr - lif.v_rest
        return TuningGrid(
            w_ho_values=np.geomspace(self.w_ho_lo, self.w_ho_hi, self.w_ho_points) * span,
            tau_c_values=np.geomspace(self.tau_c_lo_s, self.tau_c_hi_s, self.tau_c_points),
        )


@dataclass(frozen=True)
class PipelineConfig:
    """Everything one benchmark run needs, stage by stage."""

    filterbank: FilterbankConfig = field(default_factory=FilterbankConfig)
    adm: AdmConfig = field(default_factory=AdmConfig)
    calib: CalibConfig = field(default_factory=lambda: CalibConfig(t_adapt=3.0, f_target=500.0))
    snn: BsnnConfig = field(default_factory=BsnnConfig)
    lif: LifParams = field(default_factory=LifParams)
    tuning: TuningConfig = field(default_factory=TuningConfig)
    poisson_interval_s: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.calib.t_adapt > self.tuning.window_s:
            raise RejectedInputError(
                f"t_adapt {self.calib.t_adapt} s exceeds the tuning window "
                f"{self.tuning.window_s} s"
            )
        if self.filterbank.n_channels != self.snn.n:
            raise RejectedInputError(
                f"filterbank has {self.filterbank.n_channels} channels but the "
                f"network expects {self.snn.n}"
            )

    def resolved_dict(self) -> dict:
        out = {}
        for name in ("filterbank", "adm", "calib", "snn", "lif", "tuning"):
            block = dataclasses.asdict(getattr(self, name))
            out[name] = {
                k: (list(v) if isinstance(v, (tuple, list)) else v) for k, v in block.items()
            }
        out["poisson_interval_s"] = self.poisson_interval_s
        out["seed"] = self.seed
        return out


def config_hash(cfg: PipelineConfig) -> str:
    payload = json.dumps(cfg.resolved_dict(), sort_keys=True).encode()
    return hashlib.sha256(payload).hexdigest()[:16]


def ibf_default() -> PipelineConfig:
    """Induced-fault preset: 16 channels, 3 s adaptation to 500 Hz,
    tuning on a 3 s window.

    The long activity average (tau_avg) keeps calibration-phase statistics
    representative of the frozen state, and the 5 ms neuron refractory clips
    rare healthy coincidence bursts so the sub-threshold tuning margin holds
    across runs.
    """
    return PipelineConfig(
        filterbank=FilterbankConfig(n_channels=16, f_min=100.0, f_max=20000.0),
        adm=AdmConfig(t_r=2e-4),
        calib=CalibConfig(t_adapt=3.0, f_target=500.0, eta=0.003, tau_avg=30000.0),
        snn=BsnnConfig(n=16, alpha=1.25, w_inh=0.01, dt=1e-4),
        lif=LifParams(t_ref=5e-3),
        tuning=TuningConfig(window_s=3.0, tau_c_lo_s=0.1, tau_c_hi_s=0.4, tau_c_points=3),
    )


def r2f_default() -> PipelineConfig:
    """Run-to-failure preset: 16 channels, 60 s adaptation to 100 Hz,
    tuning on a 300 s window."""
    return PipelineConfig(
        filterbank=FilterbankConfig(n_channels=16, f_min=50.0, f_max=8000.0),
        adm=AdmConfig(t_r=1e-3),
        calib=CalibConfig(t_adapt=60.0, f_target=100.0, eta=0.03, tau_avg=3000.0),
        snn=BsnnConfig(n=16, alpha=1.25, w_inh=0.01, dt=1e-4),
        lif=LifParams(),
        tuning=TuningConfig(window_s=300.0),
    )


def _take(block: dict, mapping: dict, where: str) -> dict:
    out = {}
    for file_key, (attr, conv) in mapping.items():
        if file_key in block:
            out[attr] = conv(block.pop(file_key))
    if block:
        raise ParseError(f"unknown keys in [{where}]: {sorted(block)}")
    return out


def load_config(path, base: PipelineConfig | None = None) -> PipelineConfig:
    """Read a TOML config file, layering its blocks over ``base`` (or the
    package defaults)."""
    base = base or PipelineConfig()
    with open(path, "rb") as f:
        try:
            doc = tomllib.load(f)
        except tomllib.TOMLDecodeError as e:
            raise ParseError(f"config is not valid TOML: {e}", path=path)

    fb = _take(
        doc.pop("filterbank", {}),
        {
            "n_channels": ("n_channels", int),
            "f_min_hz": ("f_min", float),
            "f_max_hz": ("f_max", float),
            "bandwidth_hz": ("bandwidths_hz", tuple),
        },
        "filterbank",
    )
    adm = _take(
        doc.pop("adm", {}),
        {
            "t_refractory_s": ("t_r", float),
            "v_thr_init": ("v_thr_init", lambda v: float(v) or None),
            "thr_floor": ("thr_floor", float),
        },
        "adm",
    )
    calib = _take(
        doc.pop("calib", {}),
        {
            "t_adapt_s": ("t_adapt", float),
            "f_target_hz": ("f_target", float),
            "eta": ("eta", float),
            "tau_avg_steps": ("tau_avg", float),
            "freeze_avg_fraction": ("freeze_avg_fraction", float),
        },
        "calib",
    )
    snn_block = doc.pop("snn", {})
    snn = _take(
        {k: v for k, v in snn_block.items() if k in ("alpha", "w_inh", "w_ho", "dt_s", "n_channels")},
        {
            "n_channels": ("n", int),
            "alpha": ("alpha", float),
            "w_inh": ("w_inh", float),
            "w_ho": ("w_ho", float),
            "dt_s": ("dt", float),
        },
        "snn",
    )
    lif = _take(
        {k: v for k, v in snn_block.items() if k in ("v_rest", "v_thr", "v_reset", "t_ref_s", "r", "c")},
        {
            "v_rest": ("v_rest", float),
            "v_thr": ("v_thr", float),
            "v_reset": ("v_reset", float),
            "t_ref_s": ("t_ref", float),
            "r": ("r", float),
            "c": ("c", float),
        },
        "snn",
    )
    leftover = set(snn_block) - {
        "alpha", "w_inh", "w_ho", "dt_s", "n_channels",
        "v_rest", "v_thr", "v_reset", "t_ref_s", "r", "c",
    }
    if leftover:
        raise ParseError(f"unknown keys in [snn]: {sorted(leftover)}")
    tuning = _take(
        doc.pop("tuning", {}),
        {
            "window_s": ("window_s", float),
            "w_ho_lo": ("w_ho_lo", float),
            "w_ho_hi": ("w_ho_hi", float),
            "w_ho_points": ("w_ho_points", int),
            "tau_c_lo_s": ("tau_c_lo_s", float),
            "tau_c_hi_s": ("tau_c_hi_s", float),
            "tau_c_points": ("tau_c_points", int),
        },
        "tuning",
    )
    poisson = _take(doc.pop("poisson", {}), {"interval_s": ("interval", float)}, "poisson")
    seed = doc.pop("seed", base.seed)
    if doc:
        raise ParseError(f"unknown top-level config keys: {sorted(doc)}")

    if fb.get("n_channels") and "n" not in snn:
        snn["n"] = fb["n_channels"]

    return PipelineConfig(
        filterbank=dataclasses.replace(base.filterbank, **fb),
        adm=dataclasses.replace(base.adm, **adm),
        calib=dataclasses.replace(base.calib, **calib),
        snn=dataclasses.replace(base.snn, **snn),
        lif=dataclasses.replace(base.lif, **lif),
        tuning=dataclasses.replace(base.tuning, **tuning),
        poisson_interval_s=poisson.get("interval", base.poisson_interval_s),
        seed=int(seed),
    )
