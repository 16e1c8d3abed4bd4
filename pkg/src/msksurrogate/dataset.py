"""Trial ingestion, kinetic normalization, feature transforms, and windowing.

A trial lives on disk as a directory holding ``inputs.csv``, ``outputs.csv``
and ``meta.json``. Both CSVs carry a header row of channel names whose first
column is ``time_s``; every number is serialized with round-trip-exact
decimal formatting (Python float repr), so save -> load is bit-exact for
finite values.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import (
    EmptyGroup,
    MissingFile,
    RowCountMismatch,
    SchemaError,
    TooFewFrames,
    TrialTooShort,
    UnsupportedCategory,
)
from .numerics import as_matrix, cubic_resample

CATEGORIES = (
    "joint_angles",
    "joint_reaction_forces",
    "joint_moments",
    "muscle_forces",
    "muscle_activations",
)

STANDARD_GRAVITY = 9.81  # m/s^2

# reserved channel name for the elapsed-time-fraction feature
TIME_FEATURE_NAME = "time_frac"


@dataclass(frozen=True)
class SubjectMeta:
    subject_id: str
    body_mass_kg: float
    height_m: float

    def __post_init__(self):
        if self.body_mass_kg <= 0 or self.height_m <= 0:
            raise SchemaError(
                f"subject {self.subject_id!r}: mass and height must be positive"
            )


@dataclass(frozen=True)
class TrialBundle:
    """One subject-trial: aligned input/output matrices plus metadata."""

    subject: SubjectMeta
    trial_id: str
    inputs: np.ndarray  # T x F_in
    outputs: np.ndarray  # T x F_out
    input_names: tuple[str, ...]
    output_names: tuple[str, ...]
    input_hz: float
    output_hz: float
    category: str

    def __post_init__(self):
        if self.category not in CATEGORIES:
            raise SchemaError(f"unknown output category {self.category!r}")
        if self.inputs.shape[0] != self.outputs.shape[0]:
            raise RowCountMismatch(
                f"trial {self.trial_id!r}: {self.inputs.shape[0]} input rows vs "
                f"{self.outputs.shape[0]} output rows"
            )
        if self.inputs.shape[1] != len(self.input_names):
            raise SchemaError("input name count disagrees with input columns")
        if self.outputs.shape[1] != len(self.output_names):
            raise SchemaError("output name count disagrees with output columns")

    @property
    def n_frames(self) -> int:
        return self.inputs.shape[0]


@dataclass(frozen=True)
class WindowedSet:
    """Sliding windows of one trial with last-frame-aligned targets."""

    x: np.ndarray  # n x t x F_in
    y: np.ndarray  # n x F_out
    t: int
    subject_id: str
    trial_id: str

    @property
    def n_windows(self) -> int:
        return self.x.shape[0]


def _read_csv_matrix(path: Path) -> tuple[tuple[str, ...], np.ndarray]:
    if not path.is_file():
        raise MissingFile(str(path))
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: empty file") from None
        if not header or header[0] != "time_s":
            raise SchemaError(f"{path}: first column must be 'time_s'")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise SchemaError(f"{path}:{lineno}: expected {len(header)} fields")
            try:
                rows.append([float(v) for v in row])
            except ValueError as exc:
                raise SchemaError(f"{path}:{lineno}: {exc}") from None
    if not rows:
        raise SchemaError(f"{path}: no data rows")
    data = np.array(rows, dtype=np.float64)
    if not np.all(np.isfinite(data)):
        raise SchemaError(f"{path}: non-finite values")
    # drop the time_s column; the bundle regenerates it from the rate on save
    return tuple(header[1:]), np.ascontiguousarray(data[:, 1:])


def _write_csv_matrix(path: Path, names, data: np.ndarray, hz: float) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["time_s", *names])
        for k in range(data.shape[0]):
            writer.writerow([repr(k / hz), *(repr(float(v)) for v in data[k])])


_META_FIELDS = {
    "subject_id": str,
    "trial_id": str,
    "body_mass_kg": (int, float),
    "height_m": (int, float),
    "input_hz": (int, float),
    "output_hz": (int, float),
    "category": str,
}


def load_trial(dir_path) -> TrialBundle:
    """Load and validate one trial-bundle directory.

    When the output rate differs from the input rate, the output stream is
    resampled to the input rate with a cubic spline; a post-resample row-count
    disagreement of more than one frame raises RowCountMismatch, otherwise
    both matrices are trimmed to the shorter length.
    """
    dir_path = Path(dir_path)
    meta_path = dir_path / "meta.json"
    if not meta_path.is_file():
        raise MissingFile(str(meta_path))
    with open(meta_path) as fh:
        try:
            meta = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"{meta_path}: {exc}") from None
    for field, types in _META_FIELDS.items():
        if field not in meta:
            raise SchemaError(f"{meta_path}: missing field {field!r}")
        if not isinstance(meta[field], types):
            raise SchemaError(f"{meta_path}: field {field!r} has wrong type")
    input_hz = float(meta["input_hz"])
    output_hz = float(meta["output_hz"])
    if input_hz <= 0 or output_hz <= 0:
        raise SchemaError(f"{meta_path}: rates must be positive")

    input_names, inputs = _read_csv_matrix(dir_path / "inputs.csv")
    output_names, outputs = _read_csv_matrix(dir_path / "outputs.csv")

    if output_hz != input_hz:
        outputs = cubic_resample(outputs, output_hz, input_hz)
        if abs(outputs.shape[0] - inputs.shape[0]) > 1:
            raise RowCountMismatch(
                f"trial {meta['trial_id']!r}: resampled outputs have "
                f"{outputs.shape[0]} rows vs {inputs.shape[0]} input rows"
            )
        n = min(outputs.shape[0], inputs.shape[0])
        inputs, outputs = inputs[:n], outputs[:n]
        output_hz = input_hz

    return TrialBundle(
        subject=SubjectMeta(
            subject_id=meta["subject_id"],
            body_mass_kg=float(meta["body_mass_kg"]),
            height_m=float(meta["height_m"]),
        ),
        trial_id=meta["trial_id"],
        inputs=inputs,
        outputs=outputs,
        input_names=input_names,
        output_names=output_names,
        input_hz=input_hz,
        output_hz=output_hz,
        category=meta["category"],
    )


def save_trial(bundle: TrialBundle, dir_path) -> None:
    """Write a bundle directory in the canonical CSV + meta.json format."""
    dir_path = Path(dir_path)
    dir_path.mkdir(parents=True, exist_ok=True)
    _write_csv_matrix(dir_path / "inputs.csv", bundle.input_names, bundle.inputs, bundle.input_hz)
    _write_csv_matrix(
        dir_path / "outputs.csv", bundle.output_names, bundle.outputs, bundle.output_hz
    )
    meta = {
        "subject_id": bundle.subject.subject_id,
        "trial_id": bundle.trial_id,
        "body_mass_kg": bundle.subject.body_mass_kg,
        "height_m": bundle.subject.height_m,
        "input_hz": bundle.input_hz,
        "output_hz": bundle.output_hz,
        "category": bundle.category,
    }
    with open(dir_path / "meta.json", "w") as fh:
        json.dump(meta, fh, indent=2)
        fh.write("\n")


def load_bundles(root) -> list[TrialBundle]:
    """Load every trial-bundle subdirectory under `root`, sorted by trial id."""
    root = Path(root)
    if not root.is_dir():
        raise MissingFile(str(root))
    bundles = [
        load_trial(child)
        for child in sorted(root.iterdir())
        if (child / "meta.json").is_file()
    ]
    if not bundles:
        raise MissingFile(f"no trial bundles under {root}")
    return sorted(bundles, key=lambda b: b.trial_id)


def normalize_kinetics(
    raw, category: str, subject: SubjectMeta, g: float = STANDARD_GRAVITY
) -> np.ndarray:
    """Normalize kinetic values to percentages of body weight (times height).

    Forces (N) become %BW via 100*v/(m*g); moments (N*m) become %BW x BH via
    100*v/(m*g*h); activations are already relative percentages and pass
    through. Joint angles carry no kinetic unit and are rejected.
    """
    raw = as_matrix(raw, "raw")
    if category not in CATEGORIES:
        raise UnsupportedCategory(f"unknown category {category!r}")
    if category == "joint_angles":
        raise UnsupportedCategory("joint angles are not normalized by body weight")
    if category in ("joint_reaction_forces", "muscle_forces"):
        return 100.0 * raw / (subject.body_mass_kg * g)
    if category == "joint_moments":
        return 100.0 * raw / (subject.body_mass_kg * g * subject.height_m)
    return raw.copy()  # muscle_activations


def append_time_feature(inputs) -> np.ndarray:
    """Prepend a column holding the fraction of total time elapsed, k/(T-1)."""
    inputs = as_matrix(inputs, "inputs")
    n = inputs.shape[0]
    if n < 2:
        raise TooFewFrames(f"time feature needs >= 2 frames, got {n}")
    time_col = np.arange(n, dtype=np.float64) / (n - 1)
    return np.ascontiguousarray(np.column_stack([time_col, inputs]))


def add_time_feature(bundle: TrialBundle) -> TrialBundle:
    """Bundle-level time feature; the reserved channel name guards against
    applying the transform twice."""
    if TIME_FEATURE_NAME in bundle.input_names:
        raise SchemaError(f"bundle already carries a {TIME_FEATURE_NAME!r} channel")
    return replace(
        bundle,
        inputs=append_time_feature(bundle.inputs),
        input_names=(TIME_FEATURE_NAME, *bundle.input_names),
    )


def muscle_envelope(bundles) -> np.ndarray:
    """Per-frame maximum across the bundle columns of one muscle group."""
    bundles = as_matrix(bundles, "bundles")
    if bundles.shape[1] < 1:
        raise EmptyGroup("muscle group has no bundle columns")
    return bundles.max(axis=1)


def make_windows(bundle: TrialBundle, t: int = 10) -> WindowedSet:
    """Slide a length-t window over the trial with step one.

    Window k covers frames [k, k+t-1]; its target is the output row at the
    window's last frame, so a window never sees the future.
    """
    n_frames = bundle.n_frames
    if n_frames < t:
        raise TrialTooShort(
            f"trial {bundle.trial_id!r} has {n_frames} frames, window needs {t}"
        )
    # (T-t+1, F, t) -> (T-t+1, t, F)
    x = sliding_window_view(bundle.inputs, window_shape=t, axis=0)
    x = np.ascontiguousarray(np.moveaxis(x, 2, 1))
    y = np.ascontiguousarray(bundle.outputs[t - 1 :])
    return WindowedSet(
        x=x, y=y, t=t, subject_id=bundle.subject.subject_id, trial_id=bundle.trial_id
    )
