"""Synthetic tasks with analytic oracles.

Two generators stand in for the private motion-capture cohort, at whatever
desk scale a test needs:

- linear: outputs are an affine map of the inputs plus per-subject offsets
  and Gaussian noise, so closed-form least squares is the known-best model.
- temporal: outputs gate the current frame against a lagged frame through
  saturating nonlinearities, so any memoryless affine map is provably
  suboptimal (the generator verifies this by fitting one and regenerating
  with a fresh derived seed if its NRMSE falls under the floor).

Inputs are band-limited sums of low-frequency sinusoids with random phases,
smooth like reach-to-grasp kinematics. Everything is a pure function of the
spec seed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from scipy.special import expit

from .dataset import SubjectMeta, TrialBundle, save_trial
from .errors import InvalidSpec, LagTooLarge
from .numerics import RngStream

TASKS = ("linear", "temporal")

SAMPLE_HZ = 60.0

# memoryless least-squares fits must stay at least this bad on temporal data
MEMORYLESS_NRMSE_FLOOR = 0.3

ORACLE_FORMAT_VERSION = 1


@dataclass(frozen=True)
class SynthSpec:
    task: str
    subjects: int = 5
    trials_per_subject: int = 3
    frames_per_trial: int = 300
    f_in: int = 8
    f_out: int = 3
    noise_sd: float = 0.0
    subject_effect_sd: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.task not in TASKS:
            raise InvalidSpec(f"unknown task {self.task!r}")
        if min(self.subjects, self.trials_per_subject, self.frames_per_trial,
               self.f_in, self.f_out) < 1:
            raise InvalidSpec("all counts must be >= 1")
        if self.noise_sd < 0 or self.subject_effect_sd < 0:
            raise InvalidSpec("noise_sd and subject_effect_sd must be >= 0")


@dataclass(frozen=True)
class OracleModel:
    """Ground-truth mapping; fully determines noise-free outputs from inputs."""

    task: str
    lag: int
    gate_mix: np.ndarray  # f_in x m (temporal) or f_in x f_out (linear)
    lag_mix: np.ndarray | None  # f_in x m, temporal only
    out_mix: np.ndarray | None  # m x f_out, temporal only
    offset: np.ndarray  # f_out
    subject_offsets: dict[str, np.ndarray]
    noise_sd: float

    def predict(self, inputs, subject_id: str | None = None) -> np.ndarray:
        """Noise-free outputs; adds the subject offset when an id is given."""
        x = np.asarray(inputs, dtype=np.float64)
        if self.task == "linear":
            y = x @ self.gate_mix + self.offset
        else:
            idx = np.maximum(np.arange(x.shape[0]) - self.lag, 0)
            gate = expit(x @ self.gate_mix)
            carried = np.tanh(x[idx] @ self.lag_mix)
            y = (gate * carried) @ self.out_mix + self.offset
        if subject_id is not None:
            y = y + self.subject_offsets[subject_id]
        return y


def _bandlimited_inputs(rng: RngStream, frames: int, channels: int) -> np.ndarray:
    """Smooth random curves: per channel, a sum of low-frequency sinusoids."""
    t = np.arange(frames) / SAMPLE_HZ
    n_waves = 4
    freqs = rng.uniform(0.3, 3.0, (channels, n_waves))
    phases = rng.uniform(0.0, 2.0 * np.pi, (channels, n_waves))
    amps = rng.uniform(0.4, 1.0, (channels, n_waves)) / np.sqrt(n_waves)
    x = np.zeros((frames, channels))
    for c in range(channels):
        for w in range(n_waves):
            x[:, c] += amps[c, w] * np.sin(2.0 * np.pi * freqs[c, w] * t + phases[c, w])
    return x


def _subject_ids(spec: SynthSpec):
    return [f"S{s + 1}" for s in range(spec.subjects)]


def _make_bundles(spec: SynthSpec, oracle: OracleModel, rng: RngStream):
    bundles = []
    input_names = tuple(f"in{i + 1}" for i in range(spec.f_in))
    output_names = tuple(f"out{i + 1}" for i in range(spec.f_out))
    for s, subject_id in enumerate(_subject_ids(spec)):
        subject = SubjectMeta(
            subject_id=subject_id, body_mass_kg=66.25, height_m=1.75
        )
        for j in range(spec.trials_per_subject):
            x = _bandlimited_inputs(
                rng.child(2, s, j), spec.frames_per_trial, spec.f_in
            )
            y = oracle.predict(x, subject_id)
            if spec.noise_sd > 0:
                y = y + rng.child(3, s, j).normal(y.shape, sd=spec.noise_sd)
            bundles.append(
                TrialBundle(
                    subject=subject,
                    trial_id=f"{subject_id}_T{j + 1}",
                    inputs=x,
                    outputs=y,
                    input_names=input_names,
                    output_names=output_names,
                    input_hz=SAMPLE_HZ,
                    output_hz=SAMPLE_HZ,
                    category="joint_angles",
                )
            )
    return bundles


def _draw_subject_offsets(spec: SynthSpec, rng: RngStream):
    return {
        subject_id: rng.child(1, s).normal(spec.f_out, sd=spec.subject_effect_sd)
        if spec.subject_effect_sd > 0
        else np.zeros(spec.f_out)
        for s, subject_id in enumerate(_subject_ids(spec))
    }


def gen_linear_task(spec: SynthSpec):
    """Affine task y = x A + c (+ subject offset + noise), oracle retained."""
    if spec.task != "linear":
        raise InvalidSpec(f"spec.task is {spec.task!r}, expected 'linear'")
    rng = RngStream(spec.seed)
    struct = rng.child(0)
    oracle = OracleModel(
        task="linear",
        lag=0,
        gate_mix=struct.normal((spec.f_in, spec.f_out), sd=1.0 / np.sqrt(spec.f_in)),
        lag_mix=None,
        out_mix=None,
        offset=struct.normal(spec.f_out, sd=0.5),
        subject_offsets=_draw_subject_offsets(spec, rng),
        noise_sd=spec.noise_sd,
    )
    return _make_bundles(spec, oracle, rng), oracle


def _memoryless_nrmse(bundles) -> float:
    """Mean per-feature NRMSE of the best memoryless affine map, pooled fit."""
    x = np.concatenate([b.inputs for b in bundles])
    y = np.concatenate([b.outputs for b in bundles])
    xa = np.column_stack([x, np.ones(x.shape[0])])
    coef, *_ = np.linalg.lstsq(xa, y, rcond=None)
    resid = y - xa @ coef
    per_feature = np.sqrt(np.mean(resid**2, axis=0)) / np.std(y, axis=0)
    return float(per_feature.mean())


def gen_temporal_task(spec: SynthSpec, lag: int, window: int = 10):
    """Lagged nonlinear task: y_t gates the current frame against frame t-lag.

    The lag must fit inside the sliding window destined to consume the data
    (lag < window) and inside a trial. Frames earlier than the lag use
    clamped history (x_0), so outputs exist for every frame and any window
    with t > lag carries all the history its target needs.
    """
    if spec.task != "temporal":
        raise InvalidSpec(f"spec.task is {spec.task!r}, expected 'temporal'")
    if lag < 0 or lag >= window:
        raise LagTooLarge(f"lag {lag} must satisfy 0 <= lag < window ({window})")
    if lag + 1 > spec.frames_per_trial:
        raise LagTooLarge(f"lag {lag} does not fit in {spec.frames_per_trial} frames")

    rng = RngStream(spec.seed)
    m = max(2, min(4, spec.f_out))
    for attempt in range(50):
        struct = rng.child(0, attempt)
        oracle = OracleModel(
            task="temporal",
            lag=lag,
            gate_mix=struct.normal((spec.f_in, m), sd=2.0 / np.sqrt(spec.f_in)),
            lag_mix=struct.normal((spec.f_in, m), sd=2.0 / np.sqrt(spec.f_in)),
            out_mix=struct.normal((m, spec.f_out), sd=1.0 / np.sqrt(m)),
            offset=struct.normal(spec.f_out, sd=0.2),
            subject_offsets=_draw_subject_offsets(spec, rng),
            noise_sd=spec.noise_sd,
        )
        probe = _make_bundles(replace(spec, noise_sd=0.0), oracle, rng)
        if _memoryless_nrmse(probe) >= MEMORYLESS_NRMSE_FLOOR:
            return _make_bundles(spec, oracle, rng), oracle
    raise InvalidSpec(
        "could not construct a temporal task the memoryless baseline fails on"
    )


# ---------------------------------------------------------------------------
# disk format: standard trial-bundle directories plus oracle.json
# ---------------------------------------------------------------------------


def oracle_to_dict(oracle: OracleModel) -> dict:
    return {
        "format_version": ORACLE_FORMAT_VERSION,
        "task": oracle.task,
        "lag": oracle.lag,
        "gate_mix": oracle.gate_mix.tolist(),
        "lag_mix": None if oracle.lag_mix is None else oracle.lag_mix.tolist(),
        "out_mix": None if oracle.out_mix is None else oracle.out_mix.tolist(),
        "offset": oracle.offset.tolist(),
        "subject_offsets": {k: v.tolist() for k, v in oracle.subject_offsets.items()},
        "noise_sd": oracle.noise_sd,
    }


def oracle_from_dict(payload: dict) -> OracleModel:
    if payload.get("format_version") != ORACLE_FORMAT_VERSION:
        raise InvalidSpec(f"unsupported oracle format {payload.get('format_version')!r}")

    def arr(v):
        return None if v is None else np.array(v, dtype=np.float64)

    return OracleModel(
        task=payload["task"],
        lag=payload["lag"],
        gate_mix=arr(payload["gate_mix"]),
        lag_mix=arr(payload["lag_mix"]),
        out_mix=arr(payload["out_mix"]),
        offset=arr(payload["offset"]),
        subject_offsets={
            k: np.array(v, dtype=np.float64)
            for k, v in payload["subject_offsets"].items()
        },
        noise_sd=payload["noise_sd"],
    )


def write_task(bundles, oracle: OracleModel, root) -> list[str]:
    """Write bundle directories (one per trial) plus oracle.json; returns ids."""
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    ids = []
    for bundle in bundles:
        save_trial(bundle, root / bundle.trial_id)
        ids.append(bundle.trial_id)
    with open(root / "oracle.json", "w") as fh:
        json.dump(oracle_to_dict(oracle), fh)
        fh.write("\n")
    return ids


def load_oracle(root) -> OracleModel:
    with open(Path(root) / "oracle.json") as fh:
        return oracle_from_dict(json.load(fh))
