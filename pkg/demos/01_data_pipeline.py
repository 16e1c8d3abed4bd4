#!/usr/bin/env python3
# Walk through the data layer: generate a synthetic cohort, write it in the
# canonical trial-bundle format, reload it, and apply every feature
# transform a model consumes.

import tempfile
from pathlib import Path

import numpy as np

from msksurrogate import dataset, synth

# ---------------------------------------------------------------------------
# 1. Generate a small cohort: 3 subjects x 2 trials of smooth band-limited
#    curves with a known affine input->output map.
# ---------------------------------------------------------------------------
spec = synth.SynthSpec(
    task="linear", subjects=3, trials_per_subject=2, frames_per_trial=120,
    f_in=4, f_out=2, noise_sd=0.02, seed=1,
)
bundles, oracle = synth.gen_linear_task(spec)
print(f"generated {len(bundles)} trials, "
      f"{bundles[0].n_frames} frames each, {bundles[0].inputs.shape[1]} input channels")

# ---------------------------------------------------------------------------
# 2. Round-trip through the on-disk format: inputs.csv / outputs.csv with a
#    time_s column and round-trip-exact decimals, plus meta.json.
# ---------------------------------------------------------------------------
root = Path(tempfile.mkdtemp(prefix="msk_demo_"))
synth.write_task(bundles, oracle, root)
reloaded = dataset.load_bundles(root)
print(f"round trip bit-exact: "
      f"{np.array_equal(reloaded[0].inputs, bundles[0].inputs)}")

# ---------------------------------------------------------------------------
# 3. Kinetic normalization. Raw forces in newtons become percent body weight;
#    moments scale by body weight times height.
# ---------------------------------------------------------------------------
subject = dataset.SubjectMeta("demo", body_mass_kg=66.25, height_m=1.75)
forces_n = np.array([[662.5], [331.25], [0.0]])
print("forces  %BW   :", dataset.normalize_kinetics(
    forces_n, "joint_reaction_forces", subject).ravel().round(2))
moments_nm = np.array([[50.0]])
print("moment  %BWxBH:", dataset.normalize_kinetics(
    moments_nm, "joint_moments", dataset.SubjectMeta("d", 50.0, 2.0)).ravel().round(3))

# ---------------------------------------------------------------------------
# 4. The maximum envelope collapses a muscle group's bundle columns to a
#    per-frame maximum.
# ---------------------------------------------------------------------------
group = np.array([[1.0, 3.0, 2.0], [2.0, 2.0, 5.0]])
print("envelope:", dataset.muscle_envelope(group))

# ---------------------------------------------------------------------------
# 5. The time feature prepends the fraction of elapsed task time; applying
#    it twice is an error (the channel name is reserved).
# ---------------------------------------------------------------------------
with_time = dataset.add_time_feature(bundles[0])
print("time feature column:", with_time.inputs[:4, 0], "... 1.0")
try:
    dataset.add_time_feature(with_time)
except Exception as exc:
    print(f"second application rejected: {type(exc).__name__}")

# ---------------------------------------------------------------------------
# 6. Sliding windows for the many-to-one recurrent models: step one, target
#    aligned to each window's last frame.
# ---------------------------------------------------------------------------
windows = dataset.make_windows(with_time, t=10)
print(f"windows: {windows.n_windows} of shape {windows.x.shape[1:]}, "
      f"targets {windows.y.shape[1:]}")
print("first target equals output row 9:",
      np.array_equal(windows.y[0], bundles[0].outputs[9]))
