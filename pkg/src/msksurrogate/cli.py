"""Batch command-line surface: synth | train | search | evaluate | report.

Every command is deterministic given (flags, seed, data). Exit codes follow
the usual batch contract: 0 success, 1 runtime failure, 2 usage error.
A JSON config file may supply any of data/arch/setting/grid/jobs/seed/out;
explicit flags override it, and MSKML_SEED provides the default seed.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import dataset, metrics, nn, optim, protocol, synth
from .numerics import RngStream

SEED_ENV_VAR = "MSKML_SEED"

CONFIG_KEYS = ("data", "arch", "setting", "grid", "jobs", "seed", "out")


def _default_seed() -> int:
    return int(os.environ.get(SEED_ENV_VAR, "0"))


def _merge_config(args: argparse.Namespace) -> argparse.Namespace:
    """Fill unset flags from the --config file; flags win on conflict."""
    if getattr(args, "config", None):
        with open(args.config) as fh:
            file_cfg = json.load(fh)
        for key in CONFIG_KEYS:
            if getattr(args, key, None) is None and key in file_cfg:
                setattr(args, key, file_cfg[key])
    if getattr(args, "seed", None) is None:
        args.seed = _default_seed()
    return args


def _require(args: argparse.Namespace, parser: argparse.ArgumentParser, *keys: str):
    for key in keys:
        if getattr(args, key, None) is None:
            parser.error(f"--{key} is required (flag or config file)")


def _build_split(setting: str, bundles, seed: int) -> protocol.SplitPlan:
    rng = RngStream(seed)
    if setting == "se":
        return protocol.split_subject_exposed(bundles, rng)
    if setting == "sn":
        return protocol.split_subject_naive(bundles, rng)
    raise ValueError(f"unknown setting {setting!r} (expected 'se' or 'sn')")


def _load_grid(name_or_path: str, arch: str) -> protocol.GridSpec:
    if name_or_path in ("table1", "table2", "smoke"):
        return protocol.preset_grid(name_or_path, arch)
    with open(name_or_path) as fh:
        payload = json.load(fh)
    return protocol.GridSpec(
        axes=tuple((name, tuple(values)) for name, values in payload["axes"])
    )


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_synth(args, parser) -> int:
    args = _merge_config(args)
    _require(args, parser, "out")
    spec = synth.SynthSpec(
        task=args.task,
        subjects=args.subjects,
        trials_per_subject=args.trials,
        frames_per_trial=args.frames,
        f_in=args.f_in,
        f_out=args.f_out,
        noise_sd=args.noise,
        subject_effect_sd=args.subject_effect,
        seed=args.seed,
    )
    if args.task == "linear":
        bundles, oracle = synth.gen_linear_task(spec)
    else:
        bundles, oracle = synth.gen_temporal_task(spec, lag=args.lag, window=args.window)
    ids = synth.write_task(bundles, oracle, args.out)
    print(f"wrote {len(ids)} trial bundles to {args.out}")
    for trial_id in ids:
        print(f"  {trial_id}")
    print(f"oracle: {Path(args.out) / 'oracle.json'}")
    return 0


def _single_config_from_flags(args) -> dict:
    return {
        "init": args.init,
        "optimizer": args.optimizer,
        "batch_size": args.batch_size,
        "epochs": args.epochs,
        "activation": args.activation,
        "nodes": args.nodes,
        "layers": args.layers,
        "lr": args.lr,
        "dropout": args.dropout,
        "cell": args.cell,
    }


def cmd_train(args, parser) -> int:
    args = _merge_config(args)
    _require(args, parser, "data", "arch", "setting", "out")
    bundles = dataset.load_bundles(args.data)
    plan = _build_split(args.setting, bundles, args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    train_ids, val_ids = plan.folds[0]
    train_b = protocol._bundles_for_ids(plan, bundles, train_ids)
    val_b = protocol._bundles_for_ids(plan, bundles, val_ids)
    if args.arch == "rnn":
        train_set = protocol.assemble_windows(train_b, t=args.window)
        val_set = protocol.assemble_windows(val_b, t=args.window)
    else:
        train_set = protocol.assemble_frames(train_b)
        val_set = protocol.assemble_frames(val_b)

    config = _single_config_from_flags(args)
    model, loss = protocol._fit_one(
        args.arch, config, train_set, val_set, args.window, args.seed,
        config_index=0, fold_index=0,
    )
    optim.save_model(model, out / "model.json")
    protocol.save_plan(plan, out / "plan.json")
    if model.log is not None:
        optim.train_log_to_csv(model.log, out / "trainlog.csv")
    print(f"validation loss (fold 0): {loss}")
    print(f"model: {out / 'model.json'}")
    return 0


def cmd_search(args, parser) -> int:
    args = _merge_config(args)
    _require(args, parser, "arch", "grid")
    grid = _load_grid(args.grid, args.arch)
    if args.dry_run:
        print(f"grid {args.grid!r} for arch {args.arch!r}: {grid.size} configurations")
        return 0
    _require(args, parser, "data", "setting", "out")
    bundles = dataset.load_bundles(args.data)
    plan = _build_split(args.setting, bundles, args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    result = protocol.run_search(
        grid,
        args.arch,
        plan,
        bundles,
        window=args.window,
        jobs=args.jobs if args.jobs else 1,
        seed=args.seed,
        checkpoint_path=out / "checkpoint.jsonl",
    )
    optim.save_model(result.model, out / "model.json")
    protocol.save_plan(plan, out / "plan.json")
    with open(out / "search.json", "w") as fh:
        json.dump(
            {
                "best_index": result.best_index,
                "best_config": result.best_config,
                "seed": result.seed,
                "arch": args.arch,
                "setting": args.setting,
                "grid": args.grid,
                "configs": grid.size,
            },
            fh,
            indent=2,
        )
        fh.write("\n")
    ok = sum(1 for r in result.records if r.status == "ok")
    print(f"evaluated {len(result.records)} configurations ({ok} ok)")
    print(f"best config #{result.best_index}: {result.best_config}")
    print(f"model: {out / 'model.json'}")
    return 0


def cmd_evaluate(args, parser) -> int:
    args = _merge_config(args)
    _require(args, parser, "data", "out")
    model = optim.load_model(args.model)
    bundles = dataset.load_bundles(args.data)
    plan = protocol.load_plan(args.plan)
    test_b = protocol.test_bundles(plan, bundles)
    report = protocol.evaluate_final(model, test_b, plan)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    metrics.save_report(report, out / "report.json")
    metrics.report_to_csv(report, out / "report.csv", model_label=model.spec.arch)
    curves_dir = out / "curves"
    for bundle in test_b:
        pred, offset = protocol.predict_trial(model, bundle)
        trial_dir = curves_dir / bundle.trial_id
        trial_dir.mkdir(parents=True, exist_ok=True)
        for j, feature in enumerate(bundle.output_names):
            metrics.write_curves_csv(
                pred[:, j],
                bundle.outputs[offset:, j],
                offset,
                trial_dir / f"{feature}.csv",
            )
    print(f"report: {out / 'report.json'}")
    print(f"aggregate table: {out / 'report.csv'}")
    print(f"curves: {curves_dir}")
    return 0


def cmd_report(args, parser) -> int:
    args = _merge_config(args)
    _require(args, parser, "out")
    report = metrics.load_report(args.report)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    metrics.report_to_csv(report, out / "report.csv", model_label=args.model_label)
    for category in sorted(report.aggregates):
        block = report.aggregates[category]
        print(category)
        for metric in metrics.METRIC_NAMES:
            s = block[metric]
            print(
                f"  {metric:>6}: mean={s.mean:.4f} sd={s.sd:.4f} "
                f"max={s.max:.4f} min={s.min:.4f} iqr={s.iqr:.4f}"
            )
    print(f"aggregate table: {out / 'report.csv'}")
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="msksurrogate",
        description="Surrogate-model pipeline: generate data, train, search, evaluate.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", help="JSON config file; flags override its values")
        p.add_argument("--seed", type=int, default=None,
                       help=f"base seed (default: ${SEED_ENV_VAR} or 0)")
        p.add_argument("--out", default=None, help="output directory")

    p_synth = sub.add_parser("synth", help="generate synthetic trial bundles")
    add_common(p_synth)
    p_synth.add_argument("--task", choices=synth.TASKS, required=True)
    p_synth.add_argument("--subjects", type=int, default=5)
    p_synth.add_argument("--trials", type=int, default=3)
    p_synth.add_argument("--frames", type=int, default=300)
    p_synth.add_argument("--f-in", type=int, default=8)
    p_synth.add_argument("--f-out", type=int, default=3)
    p_synth.add_argument("--noise", type=float, default=0.0)
    p_synth.add_argument("--subject-effect", type=float, default=0.0)
    p_synth.add_argument("--lag", type=int, default=5, help="temporal task lag")
    p_synth.add_argument("--window", type=int, default=protocol.DEFAULT_WINDOW)

    p_train = sub.add_parser("train", help="train one configuration on fold 0")
    add_common(p_train)
    p_train.add_argument("--data", default=None, help="trial-bundle directory")
    p_train.add_argument("--arch", choices=nn.ARCHS, default=None)
    p_train.add_argument("--setting", choices=("se", "sn"), default=None)
    p_train.add_argument("--cell", default="lstm",
                         help="rnn cell, optionally 'b-' prefixed for bidirectional")
    p_train.add_argument("--nodes", type=int, default=32)
    p_train.add_argument("--layers", type=int, default=1)
    p_train.add_argument("--activation", default="tanh")
    p_train.add_argument("--optimizer", default="adam")
    p_train.add_argument("--lr", type=float, default=0.001)
    p_train.add_argument("--batch-size", type=int, default=64)
    p_train.add_argument("--epochs", type=int, default=50)
    p_train.add_argument("--dropout", type=float, default=0.0)
    p_train.add_argument("--init", default="xavier_normal")
    p_train.add_argument("--window", type=int, default=protocol.DEFAULT_WINDOW)

    p_search = sub.add_parser("search", help="exhaustive grid search with CV")
    add_common(p_search)
    p_search.add_argument("--data", default=None)
    p_search.add_argument("--arch", choices=nn.ARCHS, default=None)
    p_search.add_argument("--setting", choices=("se", "sn"), default=None)
    p_search.add_argument("--grid", default=None,
                          help="preset (table1|table2|smoke) or grid JSON file")
    p_search.add_argument("--jobs", type=int, default=None, help="parallel workers")
    p_search.add_argument("--window", type=int, default=protocol.DEFAULT_WINDOW)
    p_search.add_argument("--dry-run", action="store_true",
                          help="print the configuration count and exit")

    p_eval = sub.add_parser("evaluate", help="score a model on held-out test trials")
    add_common(p_eval)
    p_eval.add_argument("--model", required=True, help="model JSON file")
    p_eval.add_argument("--data", default=None)
    p_eval.add_argument("--plan", required=True, help="split plan JSON file")

    p_report = sub.add_parser("report", help="render an aggregate table from a report")
    add_common(p_report)
    p_report.add_argument("--report", required=True, help="report JSON file")
    p_report.add_argument("--model-label", default="model")

    return parser


_COMMANDS = {
    "synth": cmd_synth,
    "train": cmd_train,
    "search": cmd_search,
    "evaluate": cmd_evaluate,
    "report": cmd_report,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args, parser)
    except BrokenPipeError:
        return 1
    except SystemExit:
        raise
    except KeyboardInterrupt:
        print("interrupted", file=sys.stderr)
        return 1
    except Exception as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
