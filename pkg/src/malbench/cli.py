"""Command-line entry point for the full pipeline.

Subcommands map 1:1 to module operations:

  synth      generate a synthetic JSONL corpus
  vectorize  JSONL -> fragment CSVs + manifest
  index      fragments -> metadata index CSV
  sample     draw and persist one dataset
  train      fit one detector on a persisted dataset
  evaluate   apply a saved model to a persisted dataset
  run        execute an experiment grid -> results CSV
  analyze    correlation / sensitivity tables from results
  plot       emit an SVG figure from a results table

Exit codes: 0 success, 1 operational failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import sys

import pandas as pd

from . import analyze as analyze_mod
from . import ingest, learn, orchestrate, synth, vectorize
from .errors import MalbenchError
from .fragments import load_manifest
from .plots import PLOT_KINDS, PlotSpec, emit_plot
from .sample import DatasetSpec, draw_dataset, partition_pools, save_dataset
from .vectorize import FEATURE_SET_VARIANTS

CORE_COLUMNS = ("appeared", "label", "avclass")


def _load_dataset_csv(path):
    df = pd.read_csv(path, dtype={"appeared": str, "avclass": str})
    feature_cols = [c for c in df.columns if c not in CORE_COLUMNS]
    X = df[feature_cols].to_numpy(dtype=float)
    y = df["label"].to_numpy(dtype=int)
    return X, y


def _cmd_synth(args):
    cfg = synth.SynthConfig(
        n_samples=args.n_samples,
        malware_fraction=args.malware_fraction,
        separability=args.separability,
        start_month=args.start_month,
        end_month=args.end_month,
        unlabeled_fraction=args.unlabeled_fraction,
        seed=args.seed,
    )
    path = synth.generate_corpus(cfg, args.out)
    print(f"wrote {cfg.n_samples} records to {path}")
    return 0


def _cmd_vectorize(args):
    manifest = vectorize.vectorize_corpus(
        args.input, args.out_dir, fragment_size=args.fragment_size,
        lenient=args.lenient)
    print(f"wrote {len(manifest.fragments)} fragments "
          f"({manifest.total_rows} rows) to {manifest.out_dir}")
    return 0


def _cmd_index(args):
    manifest = load_manifest(args.fragments)
    index = ingest.build_metadata_index(manifest)
    ingest.save_metadata_index(index, args.out)
    print(f"wrote {len(index)} index rows to {args.out}")
    return 0


def _cmd_sample(args):
    manifest = load_manifest(args.fragments)
    index = ingest.load_metadata_index(args.index)
    cfg = orchestrate.ExperimentConfig(
        first_malware_time=args.first_malware_time,
        split_time=args.split_time, top_n=args.top_n)
    pools = partition_pools(index, cfg.split_config())
    spec = DatasetSpec(role=args.role, n_malware=args.n_malware,
                       benign_ratio=args.benign_ratio,
                       feature_set=args.feature_set, seed=args.seed)
    ds = draw_dataset(pools, spec)
    path = save_dataset(ds, manifest, args.out_dir)
    print(f"wrote {len(ds)} rows to {path}")
    return 0


def _cmd_train(args):
    X, y = _load_dataset_csv(args.dataset)
    hyperparams = None
    if args.hyperparams:
        with open(args.hyperparams, "r", encoding="utf-8") as fh:
            hyperparams = json.load(fh).get(args.algorithm)
    model = learn.train(args.algorithm, X, y, args.seed, hyperparams)
    learn.save_model(model, args.out)
    print(f"trained {args.algorithm} on {X.shape[0]} rows "
          f"(converged={model.converged}); saved to {args.out}")
    return 0


def _cmd_evaluate(args):
    from . import evaluate as evaluate_mod

    model = learn.load_model(args.model)
    X, y = _load_dataset_csv(args.dataset)
    result = {"measure": args.measure}
    if args.measure == "accuracy":
        result["performance"] = evaluate_mod.accuracy(y, model.predict(X))
    elif args.measure == "AUC":
        result["performance"] = evaluate_mod.auc(
            evaluate_mod.roc_curve(y, model.score(X)))
    elif args.measure == "real-life":
        if model.algorithm == "SVM":
            point = evaluate_mod.hard_label_operating_point(
                y, model.predict(X))
        else:
            point = evaluate_mod.recall_at_fpr(
                evaluate_mod.roc_curve(y, model.score(X)), args.target_fpr)
        result["performance"] = point.recall
        result["achieved_fpr"] = point.achieved_fpr
    print(json.dumps(result, sort_keys=True))
    return 0


def _cmd_run(args):
    config = (orchestrate.ExperimentConfig.from_file(args.config)
              if args.config else orchestrate.ExperimentConfig())
    manifest = load_manifest(args.fragments)
    index = ingest.load_metadata_index(args.index)
    path = orchestrate.run_experiment(
        config, manifest, index, args.out, resume=args.resume,
        workers=args.workers, model_dir=args.model_dir)
    print(f"wrote results to {path}")
    return 0


def _cmd_analyze(args):
    obs = analyze_mod.load_observations(args.results)
    if args.sensitivity:
        table = analyze_mod.sensitivity_table(
            obs, args.question, args.measure, relative=args.relative)
        out = table
    else:
        corr = analyze_mod.correlation_table(obs, args.question, args.measure)
        out = pd.DataFrame(
            {"algorithm": list(corr), "correlation": list(corr.values())})
    if args.out:
        out.to_csv(args.out, index=False)
        print(f"wrote {len(out)} rows to {args.out}")
    else:
        print(out.to_csv(index=False), end="")
    return 0


def _cmd_plot(args):
    obs = pd.read_csv(args.results)
    if args.question is not None and "question" in obs.columns:
        obs = obs[obs["question"] == args.question]
    if args.measure and "perf_measure" in obs.columns:
        obs = obs[obs["perf_measure"] == args.measure]
    spec = PlotSpec(
        kind=args.kind, x=args.x, y=args.y, out_path=args.out,
        group_by=args.group_by.split(",") if args.group_by else [],
        title=args.title, log_x=args.log_x)
    emit_plot(obs, spec)
    print(f"wrote {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="malbench",
        description="Malware-detector benchmarking pipeline")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic JSONL corpus")
    p.add_argument("--n-samples", type=int, required=True)
    p.add_argument("--malware-fraction", type=float, default=0.5)
    p.add_argument("--separability", type=float, default=1.0)
    p.add_argument("--start-month", default="2018-01")
    p.add_argument("--end-month", default="2019-01")
    p.add_argument("--unlabeled-fraction", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=1337)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("vectorize", help="JSONL -> fragment CSVs")
    p.add_argument("--input", nargs="+", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--fragment-size", type=int,
                   default=vectorize.DEFAULT_FRAGMENT_SIZE)
    p.add_argument("--lenient", action="store_true")
    p.set_defaults(func=_cmd_vectorize)

    p = sub.add_parser("index", help="fragments -> metadata index CSV")
    p.add_argument("--fragments", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_index)

    p = sub.add_parser("sample", help="draw and persist one dataset")
    p.add_argument("--fragments", required=True)
    p.add_argument("--index", required=True)
    p.add_argument("--role", choices=["train", "test"], required=True)
    p.add_argument("--n-malware", type=int, required=True)
    p.add_argument("--benign-ratio", type=int, default=1)
    p.add_argument("--feature-set", choices=FEATURE_SET_VARIANTS,
                   default="combined")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--first-malware-time", default="2018-01-01")
    p.add_argument("--split-time", default="2018-07-31")
    p.add_argument("--top-n", type=int, default=50)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=_cmd_sample)

    p = sub.add_parser("train", help="fit one detector")
    p.add_argument("--algorithm", choices=learn.ALGORITHM_TAGS, required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--hyperparams", help="JSON file keyed by algorithm tag")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("evaluate", help="apply a saved model")
    p.add_argument("--model", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--measure", choices=["accuracy", "real-life", "AUC"],
                   default="accuracy")
    p.add_argument("--target-fpr", type=float, default=0.01)
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("run", help="execute an experiment grid")
    p.add_argument("--config", help="JSON config (defaults: paper grid)")
    p.add_argument("--fragments", required=True)
    p.add_argument("--index", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--resume", action="store_true")
    p.add_argument("--workers", type=int)
    p.add_argument("--model-dir")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("analyze", help="correlation / sensitivity tables")
    p.add_argument("--results", required=True)
    p.add_argument("--question", type=int, required=True)
    p.add_argument("--measure", default=None)
    p.add_argument("--sensitivity", action="store_true")
    p.add_argument("--relative", action="store_true",
                   help="sensitivity deltas relative to the lower level")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_analyze)

    p = sub.add_parser("plot", help="emit an SVG figure")
    p.add_argument("--results", required=True)
    p.add_argument("--kind", choices=PLOT_KINDS, required=True)
    p.add_argument("--x", required=True)
    p.add_argument("--y", required=True)
    p.add_argument("--group-by", default="")
    p.add_argument("--question", type=int)
    p.add_argument("--measure")
    p.add_argument("--title", default="")
    p.add_argument("--log-x", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_plot)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "analyze" and args.measure is None:
        args.measure = "accuracy" if args.question == 1 else "real-life"
    try:
        return args.func(args)
    except MalbenchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
