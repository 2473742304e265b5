"""Dataset ingestion and evaluation-run construction.

Two public bearing corpora are supported:

* The induced-fault set: six trials (three healthy, three outer-race fault)
  of 6 s at 97.656 kHz. Trials arrive as single-column headerless CSV, one
  file per trial, declared by a small TOML manifest (path, label,
  sample_rate_hz, optional sha256). The corpus ships in a container format;
  convert each trial with a one-liner before use, e.g.

      python -c "import scipy.io, numpy; m = scipy.io.loadmat('trial.mat');
                 numpy.savetxt('trial.csv', m['bearing']['gs'][0][0].ravel())"

* The run-to-failure set: 984 snapshot recordings per test, headerless
  whitespace-separated ASCII, one row per sample and one column per sensor,
  20480 rows at 20 kHz per file, ordered lexicographically by timestamp
  filename. Each sensor column is concatenated into one stream, omitting the
  ten-minute gaps between snapshots.

Loaders verify declared sample counts and never silently truncate.
"""

from __future__ import annotations

import enum
import hashlib
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ParseError, RejectedInputError
from .signals import TimeSeries, concat

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

__all__ = [
    "Label",
    "Recording",
    "RunSpec",
    "R2fStream",
    "R2F_SAMPLES",
    "R2F_RATE",
    "IBF_EXPECTED_RATE",
    "load_ascii_matrix",
    "load_csv_recording",
    "load_ibf_manifest",
    "build_ibf_runs",
    "build_r2f_stream",
    "verify_ibf",
    "verify_r2f_dir",
]

R2F_SAMPLES = 20480
R2F_RATE = 20000.0
IBF_EXPECTED_RATE = 97656.0
IBF_EXPECTED_DURATION = 6.0


class Label(enum.Enum):
    HEALTHY = "healthy"
    DEFECTIVE = "defective"
    UNKNOWN = "unknown"


@dataclass(frozen=True)
class Recording:
    """One trial or snapshot with its provenance and condition label."""

    series: TimeSeries
    source_id: str
    label: Label = Label.UNKNOWN

    @property
    def duration(self) -> float:
        return self.series.duration


@dataclass(frozen=True)
class RunSpec:
    """An ordered list of recordings evaluated as a single stream, with an
    optional label-transition time at a segment boundary."""

    segments: tuple
    transition_time: float | None
    run_id: str

    def __post_init__(self):
        rates = {seg.series.sample_rate for seg in self.segments}
        if len(rates) != 1:
            raise RejectedInputError(f"run {self.run_id}: segments mix sample rates {rates}")
        if self.transition_time is not None:
            boundaries = np.cumsum([0.0] + [seg.duration for seg in self.segments])
            if not np.any(np.isclose(boundaries, self.transition_time, atol=1e-9)):
                raise RejectedInputError(
                    f"run {self.run_id}: transition {self.transition_time} s "
                    f"is not a segment boundary {boundaries}"
                )

    @property
    def sample_rate(self) -> float:
        return self.segments[0].series.sample_rate

    @property
    def duration(self) -> float:
        return sum(seg.duration for seg in self.segments)

    @property
    def labels(self) -> tuple:
        return tuple(seg.label for seg in self.segments)

    def series(self) -> TimeSeries:
        out = self.segments[0].series
        for seg in self.segments[1:]:
            out = concat(out, seg.series)
        return out

    def is_healthy_only(self) -> bool:
        return all(lb is Label.HEALTHY for lb in self.labels)


@dataclass(frozen=True)
class R2fStream:
    """One sensor's concatenated run-to-failure stream with the index
    metadata to map times back to 1-based recording datapoints."""

    bearing_id: int
    series: TimeSeries
    n_recordings: int
    recording_duration: float

    def __post_init__(self):
        expected = self.n_recordings * R2F_SAMPLES
        if len(self.series) != expected:
            raise RejectedInputError(
                f"bearing {self.bearing_id}: stream holds {len(self.series)} samples, "
                f"expected {self.n_recordings} x {R2F_SAMPLES} = {expected}"
            )

    def recording_index(self, t: float) -> int:
        """1-based datapoint containing time t; boundaries belong to the
        next recording."""
        return int(np.floor(t / self.recording_duration)) + 1

    def time_of_start(self, k: int) -> float:
        return (k - 1) * self.recording_duration


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for block in iter(lambda: f.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def _parse_float_table(path: Path) -> np.ndarray:
    """Whitespace-separated numeric table -> (rows, cols) array, or a
    ParseError naming the first offending line."""
    try:
        data = np.loadtxt(path, ndmin=2)
    except Exception:
        n_cols = None
        with open(path) as f:
            for lineno, line in enumerate(f, start=1):
                parts = line.split()
                if not parts:
                    raise ParseError("blank line in data file", path=path, line=lineno)
                if n_cols is None:
                    n_cols = len(parts)
                elif len(parts) != n_cols:
                    raise ParseError(
                        f"row has {len(parts)} columns, expected {n_cols}",
                        path=path,
                        line=lineno,
                    )
                for cell in parts:
                    try:
                        float(cell)
                    except ValueError:
                        raise ParseError(f"non-numeric cell {cell!r}", path=path, line=lineno)
        raise ParseError("unreadable data file", path=path)
    if data.size == 0:
        raise ParseError("empty data file", path=path, line=1)
    if not np.all(np.isfinite(data)):
        raise ParseError("non-finite value in data file", path=path)
    return data


def load_ascii_matrix(path, column: int, sample_rate: float, label: Label = Label.UNKNOWN) -> Recording:
    """One sensor column of a whitespace-separated ASCII snapshot file."""
    path = Path(path)
    if not path.is_file():
        raise ParseError("no such file", path=path)
    data = _parse_float_table(path)
    if column >= data.shape[1]:
        raise RejectedInputError(
            f"column {column} out of range for {data.shape[1]}-column file {path}"
        )
    return Recording(
        series=TimeSeries(sample_rate, data[:, column]),
        source_id=f"{path.name}[{column}]",
        label=label,
    )


def load_csv_recording(path, sample_rate: float, label: Label = Label.UNKNOWN) -> Recording:
    """Single-column headerless CSV (one amplitude per row)."""
    path = Path(path)
    if not path.is_file():
        raise ParseError("no such file", path=path)
    data = _parse_float_table(path)
    if data.shape[1] != 1:
        raise ParseError(f"expected 1 column, found {data.shape[1]}", path=path, line=1)
    return Recording(
        series=TimeSeries(sample_rate, data[:, 0]), source_id=path.name, label=label
    )


def load_ibf_manifest(manifest_path) -> dict:
    """Parse the trial manifest; returns its entries without loading data.

    Schema: repeated ``[[recording]]`` tables with keys ``path`` (relative to
    the manifest), ``label`` (healthy|defective), ``sample_rate_hz``, and an
    optional ``sha256``.
    """
    manifest_path = Path(manifest_path)
    if not manifest_path.is_file():
        raise ParseError("no such manifest", path=manifest_path)
    with open(manifest_path, "rb") as f:
        try:
            doc = tomllib.load(f)
        except tomllib.TOMLDecodeError as e:
            raise ParseError(f"manifest is not valid TOML: {e}", path=manifest_path)
    entries = doc.get("recording")
    if not entries:
        raise ParseError("manifest lists no [[recording]] entries", path=manifest_path)
    out = []
    for k, ent in enumerate(entries):
        for key in ("path", "label", "sample_rate_hz"):
            if key not in ent:
                raise ParseError(f"recording {k}: missing key {key!r}", path=manifest_path)
        try:
            label = Label(ent["label"])
        except ValueError:
            raise ParseError(
                f"recording {k}: unknown label {ent['label']!r}", path=manifest_path
            )
        out.append(
            {
                "path": manifest_path.parent / ent["path"],
                "label": label,
                "sample_rate_hz": float(ent["sample_rate_hz"]),
                "sha256": ent.get("sha256"),
            }
        )
    return {"entries": out, "root": manifest_path.parent}


def load_ibf_recordings(manifest_path):
    """Load every manifest entry; returns (healthy, defective) lists."""
    manifest = load_ibf_manifest(manifest_path)
    healthy, defective = [], []
    for ent in manifest["entries"]:
        rec = load_csv_recording(ent["path"], ent["sample_rate_hz"], label=ent["label"])
        (healthy if ent["label"] is Label.HEALTHY else defective).append(rec)
    return healthy, defective


def build_ibf_runs(healthy, defective) -> list:
    """All 18 ordered pairs starting from a healthy trial.

    Pair (h_i, x_j) runs h_i for its full 6 s, then x_j; the transition time
    is the duration of the leading trial. Run ids follow trial numbering:
    healthy trials are 1-3, defective 4-6, so run "3-4" is healthy trial 3
    followed by defective trial 1.
    """
    if len(healthy) != 3 or len(defective) != 3:
        raise RejectedInputError(
            f"need exactly 3 healthy + 3 defective trials, got {len(healthy)} + {len(defective)}"
        )
    rates = {r.series.sample_rate for r in list(healthy) + list(defective)}
    if len(rates) != 1:
        raise RejectedInputError(f"trials mix sample rates: {rates}")
    partners = list(healthy) + list(defective)
    runs = []
    for i, h in enumerate(healthy):
        for j, x in enumerate(partners):
            runs.append(
                RunSpec(
                    segments=(h, x),
                    transition_time=h.duration,
                    run_id=f"{i + 1}-{j + 1}",
                )
            )
    return runs


def build_r2f_stream(recordings, bearing: int) -> R2fStream:
    """Concatenate ordered snapshot recordings into one stream."""
    recordings = list(recordings)
    if not recordings:
        raise RejectedInputError("no recordings to concatenate")
    for rec in recordings:
        if len(rec.series) != R2F_SAMPLES or rec.series.sample_rate != R2F_RATE:
            raise RejectedInputError(
                f"{rec.source_id}: expected {R2F_SAMPLES} samples at {R2F_RATE} Hz, "
                f"got {len(rec.series)} at {rec.series.sample_rate}"
            )
    samples = np.concatenate([rec.series.samples for rec in recordings])
    return R2fStream(
        bearing_id=bearing,
        series=TimeSeries(R2F_RATE, samples),
        n_recordings=len(recordings),
        recording_duration=R2F_SAMPLES / R2F_RATE,
    )


def verify_ibf(manifest_path) -> dict:
    """Check every manifest entry: parseability, sample rate, the 6 s
    duration (to one sample), and declared checksums. Any failure raises."""
    manifest = load_ibf_manifest(manifest_path)
    report = {"recordings": [], "ok": True}
    for ent in manifest["entries"]:
        rec = load_csv_recording(ent["path"], ent["sample_rate_hz"], label=ent["label"])
        expected = round(IBF_EXPECTED_DURATION * ent["sample_rate_hz"])
        if abs(len(rec.series) - expected) > 1:
            raise RejectedInputError(
                f"{ent['path']}: {len(rec.series)} samples, expected {expected} +- 1"
            )
        if ent["sha256"]:
            actual = _sha256(ent["path"])
            if actual != ent["sha256"]:
                raise RejectedInputError(
                    f"{ent['path']}: sha256 {actual} != declared {ent['sha256']}"
                )
        report["recordings"].append(
            {
                "path": str(ent["path"]),
                "label": ent["label"].value,
                "n_samples": len(rec.series),
                "duration_s": rec.duration,
            }
        )
    n_h = sum(1 for r in report["recordings"] if r["label"] == "healthy")
    n_d = sum(1 for r in report["recordings"] if r["label"] == "defective")
    if (n_h, n_d) != (3, 3):
        raise RejectedInputError(f"manifest declares {n_h} healthy + {n_d} defective; need 3 + 3")
    report["run_duration_s"] = 2 * IBF_EXPECTED_DURATION
    return report


def verify_r2f_dir(directory, expected_files: int = 984, n_columns: int | None = None) -> dict:
    """Check a snapshot directory: file count, per-file row counts, column
    consistency. Any failure raises."""
    directory = Path(directory)
    files = sorted(p for p in directory.iterdir() if p.is_file())
    if len(files) != expected_files:
        raise RejectedInputError(
            f"{directory}: found {len(files)} files, expected {expected_files}"
        )
    cols = n_columns
    for path in files:
        data = _parse_float_table(path)
        if data.shape[0] != R2F_SAMPLES:
            raise RejectedInputError(
                f"{path}: {data.shape[0]} rows, expected {R2F_SAMPLES}"
            )
        if cols is None:
            cols = data.shape[1]
        elif data.shape[1] != cols:
            raise RejectedInputError(
                f"{path}: {data.shape[1]} columns, expected {cols}"
            )
    return {
        "n_files": len(files),
        "n_columns": cols,
        "total_samples_per_column": len(files) * R2F_SAMPLES,
        "stream_duration_s": len(files) * R2F_SAMPLES / R2F_RATE,
        "ok": True,
    }
