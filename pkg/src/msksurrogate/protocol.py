"""Subject-exposed/subject-naive splits, grid enumeration, exhaustive search
with cross-validation, and final held-out evaluation.

The experiment state machine: build a split plan, stream every grid
configuration through k-fold cross-validation, select the configuration with
the lowest mean final-epoch validation loss (ties go to the earliest in
enumeration order), retrain it on training plus validation data, and report
metrics on the held-out test set only.

Training seeds derive deterministically from (base seed, config index, fold
index), and every training call is pinned to a single BLAS thread, so a
search gives bit-identical results no matter how many workers run it.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from itertools import product
from pathlib import Path

import numpy as np
from joblib import Parallel, delayed
from threadpoolctl import threadpool_limits

from . import nn, optim
from .dataset import TrialBundle, add_time_feature, make_windows
from .errors import (
    AllConfigsFailed,
    EmptyAxis,
    InvalidSpec,
    LeakageDetected,
    ShapeMismatch,
    TooFewSubjects,
    TooFewTrials,
)
from .metrics import MetricsReport, build_report, rows_for_trial
from .numerics import RngStream

SUBJECT_EXPOSED = "subject_exposed"
SUBJECT_NAIVE = "subject_naive"

# subject-exposed protocol constants: 2 test trials, 4 folds of 2 validation trials
SE_TEST_TRIALS = 2
SE_VAL_TRIALS = 2
SE_FOLDS = 4

# fold-index sentinel for the final train+validation retrain
FINAL_FOLD_KEY = 1 << 20

DEFAULT_WINDOW = 10


# ---------------------------------------------------------------------------
# split plans
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SplitPlan:
    """Assignment of trial ids (SE) or subject ids (SN) to test and CV folds."""

    setting: str
    test: tuple[str, ...]
    folds: tuple[tuple[tuple[str, ...], tuple[str, ...]], ...]  # (train, val) ids
    seed: int


def _trial_subject_map(trials) -> dict[str, str]:
    if isinstance(trials, dict):
        return dict(trials)
    return {b.trial_id: b.subject.subject_id for b in trials}


def split_subject_exposed(trials, rng: RngStream) -> SplitPlan:
    """Draw 2 test trials and 4 CV folds with disjoint 2-trial validation sets.

    Every test-set subject keeps at least one trial in every fold's training
    set; draws violating that are rejected and retried.
    """
    by_trial = _trial_subject_map(trials)
    trial_ids = sorted(by_trial)
    n = len(trial_ids)
    needed = SE_TEST_TRIALS + SE_FOLDS * SE_VAL_TRIALS
    if n < needed:
        raise TooFewTrials(f"subject-exposed split needs >= {needed} trials, got {n}")
    counts: dict[str, int] = {}
    for subject in by_trial.values():
        counts[subject] = counts.get(subject, 0) + 1
    if min(counts.values()) < 2:
        raise TooFewTrials("every subject needs >= 2 trials")

    for _ in range(1000):
        test = sorted(rng.choice(trial_ids, size=SE_TEST_TRIALS, replace=False))
        test_subjects = {by_trial[t] for t in test}
        remaining = [t for t in trial_ids if t not in test]
        remaining_counts = {
            s: sum(1 for t in remaining if by_trial[t] == s) for s in test_subjects
        }
        if min(remaining_counts.values()) < 1:
            continue  # a test subject lost all its training trials; redraw
        for _ in range(100):
            perm = [remaining[i] for i in rng.permutation(len(remaining))]
            folds = []
            ok = True
            for f in range(SE_FOLDS):
                val = sorted(perm[f * SE_VAL_TRIALS : (f + 1) * SE_VAL_TRIALS])
                train = sorted(t for t in remaining if t not in val)
                fold_train_subjects = {by_trial[t] for t in train}
                if not test_subjects <= fold_train_subjects:
                    ok = False
                    break
                folds.append((tuple(train), tuple(val)))
            if ok:
                return SplitPlan(
                    setting=SUBJECT_EXPOSED,
                    test=tuple(test),
                    folds=tuple(folds),
                    seed=rng.seed,
                )
    raise TooFewTrials("could not draw a subject-exposed split satisfying the invariant")


def split_subject_naive(subjects, rng: RngStream) -> SplitPlan:
    """Hold one subject out for test; each remaining subject validates one fold."""
    subjects = list(subjects)
    if subjects and isinstance(subjects[0], TrialBundle):
        subjects = [b.subject.subject_id for b in subjects]
    subject_ids = sorted(set(subjects))
    if len(subject_ids) < 3:
        raise TooFewSubjects(
            f"subject-naive split needs >= 3 subjects, got {len(subject_ids)}"
        )
    test = str(rng.choice(subject_ids))
    rest = [s for s in subject_ids if s != test]
    folds = tuple((tuple(s for s in rest if s != val), (val,)) for val in rest)
    return SplitPlan(setting=SUBJECT_NAIVE, test=(test,), folds=folds, seed=rng.seed)


def plan_to_json(plan: SplitPlan) -> dict:
    return asdict(plan)


def plan_from_json(payload: dict) -> SplitPlan:
    return SplitPlan(
        setting=payload["setting"],
        test=tuple(payload["test"]),
        folds=tuple((tuple(train), tuple(val)) for train, val in payload["folds"]),
        seed=payload["seed"],
    )


def save_plan(plan: SplitPlan, path) -> None:
    with open(Path(path), "w") as fh:
        json.dump(plan_to_json(plan), fh, indent=2)
        fh.write("\n")


def load_plan(path) -> SplitPlan:
    with open(Path(path)) as fh:
        return plan_from_json(json.load(fh))


# ---------------------------------------------------------------------------
# hyperparameter grids
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GridSpec:
    """Ordered named axes; configurations are their cartesian product."""

    axes: tuple[tuple[str, tuple], ...]

    def __post_init__(self):
        for name, values in self.axes:
            if len(values) == 0:
                raise EmptyAxis(f"grid axis {name!r} has no values")

    @property
    def size(self) -> int:
        out = 1
        for _, values in self.axes:
            out *= len(values)
        return out


def enumerate_grid(spec: GridSpec):
    """Stream configurations in lexicographic order (last axis fastest)."""
    names = [name for name, _ in spec.axes]
    for combo in product(*(values for _, values in spec.axes)):
        yield dict(zip(names, combo))


def table1_grid() -> GridSpec:
    """The full feed-forward search space (43,740 configurations)."""
    return GridSpec(
        axes=(
            ("init", ("xavier_normal", "random_normal", "he_normal")),
            ("optimizer", ("adam", "sgd", "rmsprop")),
            ("batch_size", (64, 256, 1028)),
            ("epochs", (50, 100, 200)),
            ("activation", ("relu", "tanh", "sigmoid")),
            ("nodes", (200, 400, 600, 800, 1000, 1200, 1400, 1600, 1800)),
            ("layers", (2, 4, 6, 8, 10)),
            ("lr", (0.001, 0.005)),
            ("dropout", (0.0, 0.2)),
        )
    )


def table2_grid() -> GridSpec:
    """The full recurrent search space (23,328 configurations)."""
    return GridSpec(
        axes=(
            ("cell", ("vanilla", "lstm", "gru", "b-vanilla", "b-lstm", "b-gru")),
            ("optimizer", ("adam", "sgd", "rmsprop")),
            ("batch_size", (64, 128, 256)),
            ("epochs", (50, 100, 200)),
            ("activation", ("relu", "tanh", "sigmoid")),
            ("nodes", (128, 256, 512)),
            ("layers", (1, 2, 3, 4)),
            ("lr", (0.001, 0.005)),
            ("dropout", (0.1, 0.2)),
        )
    )


def smoke_grid(arch: str) -> GridSpec:
    """Minutes-scale grids for end-to-end runs (<= 16 configurations)."""
    if arch == "ffnn":
        return GridSpec(
            axes=(
                ("init", ("xavier_normal",)),
                ("optimizer", ("adam",)),
                ("batch_size", (64,)),
                ("epochs", (30,)),
                ("activation", ("relu", "tanh")),
                ("nodes", (16, 32)),
                ("layers", (2,)),
                ("lr", (0.005,)),
                ("dropout", (0.0, 0.2)),
            )
        )
    if arch == "rnn":
        return GridSpec(
            axes=(
                ("cell", ("vanilla", "lstm", "gru")),
                ("optimizer", ("adam",)),
                ("batch_size", (64,)),
                ("epochs", (40,)),
                ("activation", ("tanh",)),
                ("nodes", (16, 32)),
                ("layers", (1,)),
                ("lr", (0.005,)),
                ("dropout", (0.0, 0.1)),
            )
        )
    if arch == "linear":
        return GridSpec(axes=(("solver", ("least_squares",)),))
    raise InvalidSpec(f"no smoke grid for arch {arch!r}")


def preset_grid(name: str, arch: str) -> GridSpec:
    if name == "table1":
        return table1_grid()
    if name == "table2":
        return table2_grid()
    if name == "smoke":
        return smoke_grid(arch)
    raise InvalidSpec(f"unknown grid preset {name!r}")


def config_to_specs(config: dict, arch: str, input_dim: int, output_dim: int,
                    window: int = DEFAULT_WINDOW):
    """Turn one grid point into network/optimizer/epoch settings."""
    if arch == "linear":
        spec = nn.NetworkSpec(arch="linear", input_dim=input_dim, output_dim=output_dim)
        return spec, None, None, None
    opt = optim.OptimizerConfig(kind=config["optimizer"], learning_rate=config["lr"])
    if arch == "ffnn":
        spec = nn.NetworkSpec(
            arch="ffnn", input_dim=input_dim, output_dim=output_dim,
            hidden_layers=config["layers"], nodes=config["nodes"],
            activation=config["activation"], dropout=config["dropout"],
            init=config.get("init", "xavier_normal"),
        )
    elif arch == "rnn":
        cell = config["cell"]
        spec = nn.NetworkSpec(
            arch="rnn", input_dim=input_dim, output_dim=output_dim,
            hidden_layers=config["layers"], nodes=config["nodes"],
            activation=config["activation"], cell=cell.removeprefix("b-"),
            bidirectional=cell.startswith("b-"), dropout=config["dropout"],
            init=config.get("init", "xavier_normal"), window=window,
        )
    else:
        raise InvalidSpec(f"unknown arch {arch!r}")
    return spec, opt, config["batch_size"], config["epochs"]


# ---------------------------------------------------------------------------
# data assembly
# ---------------------------------------------------------------------------


def assemble_frames(bundles, add_time: bool = True) -> optim.TrainSet:
    """Pool trials into per-frame feature rows for linear/FFNN models."""
    prepared = [add_time_feature(b) if add_time else b for b in bundles]
    return optim.TrainSet(
        x=np.concatenate([b.inputs for b in prepared]),
        y=np.concatenate([b.outputs for b in prepared]),
    )


def assemble_windows(bundles, t: int = DEFAULT_WINDOW, add_time: bool = True) -> optim.TrainSet:
    """Pool trials into sliding windows for recurrent models."""
    xs, ys = [], []
    for b in bundles:
        ws = make_windows(add_time_feature(b) if add_time else b, t=t)
        xs.append(ws.x)
        ys.append(ws.y)
    return optim.TrainSet(x=np.concatenate(xs), y=np.concatenate(ys))


def _bundles_for_ids(plan: SplitPlan, bundles, ids) -> list[TrialBundle]:
    wanted = set(ids)
    if plan.setting == SUBJECT_EXPOSED:
        out = [b for b in bundles if b.trial_id in wanted]
    else:
        out = [b for b in bundles if b.subject.subject_id in wanted]
    return sorted(out, key=lambda b: b.trial_id)


def test_bundles(plan: SplitPlan, bundles) -> list[TrialBundle]:
    return _bundles_for_ids(plan, bundles, plan.test)


# ---------------------------------------------------------------------------
# the search itself
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ConfigRecord:
    index: int
    config: dict
    status: str  # ok | failed
    fold_losses: tuple[float, ...] | None
    mean_loss: float | None
    error: str | None = None


@dataclass
class SearchResult:
    records: tuple[ConfigRecord, ...]
    best_index: int
    best_config: dict
    model: optim.TrainedModel
    seed: int
    plan: SplitPlan


def _task_seeds(base_seed: int, config_index: int, fold_index: int):
    task_rng = RngStream(base_seed).child(config_index, fold_index)
    return task_rng.child(0), task_rng.child(1), task_rng.child(2).seed


def _fit_one(arch, config, train_set, val_set, window, base_seed, config_index, fold_index):
    """Train one configuration on one fold; returns (model, final val loss)."""
    init_rng, train_rng, shuffle_seed = _task_seeds(base_seed, config_index, fold_index)
    with threadpool_limits(limits=1):
        if arch == "linear":
            model = optim.fit_linear(train_set)
            if val_set is None:
                return model, float("nan")
            pred = optim.predict(model, val_set.x)
            loss = optim.loss_normalized_mse(pred, val_set.y, model.output_scaler)
            return model, loss
        spec, opt_cfg, batch_size, epochs = config_to_specs(
            config, arch, train_set.x.shape[-1], train_set.y.shape[-1], window
        )
        net = nn.init_network(spec, init_rng)
        tc = optim.TrainConfig(batch_size=batch_size, epochs=epochs, shuffle_seed=shuffle_seed)
        model, log = optim.train(net, train_set, val_set, opt_cfg, tc, train_rng)
        return model, log.val_loss[-1]


def _eval_config(arch, index, config, folds_data, window, base_seed) -> ConfigRecord:
    losses = []
    try:
        for fold_index, (train_set, val_set) in enumerate(folds_data):
            _, loss = _fit_one(
                arch, config, train_set, val_set, window, base_seed, index, fold_index
            )
            losses.append(loss)
        return ConfigRecord(
            index=index,
            config=config,
            status="ok",
            fold_losses=tuple(losses),
            mean_loss=float(np.mean(losses)),
        )
    except Exception as exc:  # failed configs are recorded, not fatal
        return ConfigRecord(
            index=index, config=config, status="failed",
            fold_losses=None, mean_loss=None, error=f"{type(exc).__name__}: {exc}",
        )


def _record_to_json(record: ConfigRecord) -> str:
    return json.dumps(asdict(record), sort_keys=True)


def _record_from_json(line: str) -> ConfigRecord:
    payload = json.loads(line)
    return ConfigRecord(
        index=payload["index"],
        config=payload["config"],
        status=payload["status"],
        fold_losses=None if payload["fold_losses"] is None else tuple(payload["fold_losses"]),
        mean_loss=payload["mean_loss"],
        error=payload.get("error"),
    )


def load_checkpoint(path) -> dict[int, ConfigRecord]:
    """Read whatever complete records an interrupted search left behind."""
    records: dict[int, ConfigRecord] = {}
    path = Path(path)
    if not path.is_file():
        return records
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            try:
                record = _record_from_json(line)
            except (json.JSONDecodeError, KeyError):
                continue  # torn final line from an interrupt
            records[record.index] = record
    return records


def run_search(
    grid: GridSpec,
    arch: str,
    plan: SplitPlan,
    bundles,
    window: int = DEFAULT_WINDOW,
    jobs: int = 1,
    seed: int = 0,
    checkpoint_path=None,
    add_time: bool = True,
) -> SearchResult:
    """Cross-validate every configuration, pick the best, retrain it on
    training plus validation data, and return the frozen model.

    Failed configurations are recorded and skipped; the search only raises
    AllConfigsFailed when nothing trains. With a checkpoint path, previously
    completed records are reused and the file is rewritten in enumeration
    order, so interrupt/resume converges to the identical artifact.
    """
    bundles = list(bundles)
    ids_known = {b.trial_id for b in bundles} | {b.subject.subject_id for b in bundles}
    for ids in (plan.test, *[train + val for train, val in plan.folds]):
        missing = set(ids) - ids_known
        if missing:
            raise InvalidSpec(f"plan references unknown ids: {sorted(missing)}")

    def build(ids):
        fold_bundles = _bundles_for_ids(plan, bundles, ids)
        if arch == "rnn":
            return assemble_windows(fold_bundles, t=window, add_time=add_time)
        return assemble_frames(fold_bundles, add_time=add_time)

    folds_data = [(build(train), build(val)) for train, val in plan.folds]

    cached = load_checkpoint(checkpoint_path) if checkpoint_path else {}
    records: list[ConfigRecord] = []
    checkpoint_fh = open(checkpoint_path, "w") if checkpoint_path else None
    try:
        parallel = Parallel(n_jobs=jobs) if jobs != 1 else None
        chunk: list[tuple[int, dict]] = []
        chunk_size = max(1, jobs) * 4

        def flush():
            nonlocal chunk
            if not chunk:
                return
            todo = [(i, c) for i, c in chunk if i not in cached or cached[i].config != c]
            if todo:
                if parallel is None:
                    computed = [
                        _eval_config(arch, i, c, folds_data, window, seed) for i, c in todo
                    ]
                else:
                    computed = parallel(
                        delayed(_eval_config)(arch, i, c, folds_data, window, seed)
                        for i, c in todo
                    )
                for record in computed:
                    cached[record.index] = record
            for i, _ in chunk:
                record = cached[i]
                records.append(record)
                if checkpoint_fh is not None:
                    checkpoint_fh.write(_record_to_json(record) + "\n")
            if checkpoint_fh is not None:
                checkpoint_fh.flush()
            chunk = []

        for index, config in enumerate(enumerate_grid(grid)):
            chunk.append((index, config))
            if len(chunk) >= chunk_size:
                flush()
        flush()
    finally:
        if checkpoint_fh is not None:
            checkpoint_fh.close()

    usable = [r for r in records if r.status == "ok"]
    if not usable:
        raise AllConfigsFailed("every configuration failed to train")
    best = min(usable, key=lambda r: (r.mean_loss, r.index))

    # the winner retrains on training + validation data with its epoch budget
    fit_ids = tuple(sorted({i for train, val in plan.folds for i in train + val}))
    fit_bundles = _bundles_for_ids(plan, bundles, fit_ids)
    fit_set = (
        assemble_windows(fit_bundles, t=window, add_time=add_time)
        if arch == "rnn"
        else assemble_frames(fit_bundles, add_time=add_time)
    )
    model, _ = _fit_one(
        arch, best.config, fit_set, None, window, seed, best.index, FINAL_FOLD_KEY
    )
    return SearchResult(
        records=tuple(records),
        best_index=best.index,
        best_config=best.config,
        model=model,
        seed=seed,
        plan=plan,
    )


# ---------------------------------------------------------------------------
# final evaluation
# ---------------------------------------------------------------------------


def predict_trial(model: optim.TrainedModel, bundle: TrialBundle, add_time: bool = True):
    """Predict one trial in raw units.

    Returns (predictions, frame_offset): recurrent models only predict from
    the first full window onward, so their predictions align to frames
    [t-1, T).
    """
    prepared = add_time_feature(bundle) if add_time else bundle
    if prepared.inputs.shape[1] != model.spec.input_dim:
        raise ShapeMismatch(
            f"trial has {prepared.inputs.shape[1]} input features, "
            f"model expects {model.spec.input_dim}"
        )
    if model.spec.arch == "rnn":
        ws = make_windows(prepared, t=model.spec.window)
        return optim.predict(model, ws.x), model.spec.window - 1
    return optim.predict(model, prepared.inputs), 0


def evaluate_final(
    model: optim.TrainedModel,
    test_trials,
    plan: SplitPlan,
    add_time: bool = True,
) -> MetricsReport:
    """Metrics of the frozen model on held-out test trials, in raw units."""
    test_trials = list(test_trials)
    fit_ids = {i for train, val in plan.folds for i in train + val}
    for bundle in test_trials:
        offending = (
            bundle.trial_id if plan.setting == SUBJECT_EXPOSED else bundle.subject.subject_id
        )
        if offending in fit_ids:
            raise LeakageDetected(
                f"test id {offending!r} appears in the training/validation folds"
            )
    rows = []
    for bundle in test_trials:
        pred, offset = predict_trial(model, bundle, add_time=add_time)
        truth = bundle.outputs[offset:]
        rows.extend(
            rows_for_trial(
                pred, truth, bundle.output_names, bundle.trial_id, bundle.category
            )
        )
    return build_report(rows)
