"""Command-line entry point.

Subcommands:
  synth          generate a seeded synthetic embedding dataset
  run            execute an incremental protocol run and write reports
  summarize      print average incremental accuracy rows for run directories
  extract-check  validate externally produced feature files + manifest

``run`` options may come from a flat JSON config file (--config); explicit
flags override file values, and the fully resolved config is echoed into the
output directory as config.json.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .classifier import TrainConfig
from .errors import FetrilError
from .feature_store import load_dataset
from .generator import parse_strategy
from .metrics import (average_incremental_accuracy, read_states_csv,
                      write_states_csv, write_summary_json)
from .runner import REPEAT_SEED_STRIDE, RunConfig, build_schedule, run
from .synth import PRESET_SIGMA, SynthSpec, generate, preset_spec

RUN_DEFAULTS = {
    "manifest": None,
    "test_manifest": None,
    "initial": 10,
    "states": 5,
    "method": "fetril",
    "strategy": "k:1",
    "samples_per_class": None,
    "classifier": "hinge",
    "neg_ratio": "all",
    "reg_c": 1.0,
    "tolerance": 1e-4,
    "max_epochs": 1000,
    "seed": 0,
    "repeats": 3,
    "class_order": None,
    "random_with_replacement": False,
    "normalize_before_translate": False,
    "out": None,
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fetril",
        description="Feature-translation benchmark harness for "
                    "exemplar-free class-incremental learning")
    sub = parser.add_subparsers(dest="command", required=True)

    p_synth = sub.add_parser("synth", help="generate a synthetic dataset")
    p_synth.add_argument("--classes", type=int, default=20)
    p_synth.add_argument("--dim", type=int, default=64)
    p_synth.add_argument("--samples", type=int, default=100)
    p_synth.add_argument("--sigma", type=float, default=None,
                         help="within-class sigma (overrides --preset)")
    p_synth.add_argument("--scale", type=float, default=10.0,
                         help="half-width of the center hypercube")
    p_synth.add_argument("--preset", choices=sorted(PRESET_SIGMA), default="easy")
    p_synth.add_argument("--seed", type=int, default=0)
    p_synth.add_argument("--name", default=None)
    p_synth.add_argument("--out", required=True)

    p_run = sub.add_parser("run", help="run an incremental protocol")
    p_run.add_argument("--config", default=None,
                       help="flat JSON config file; flags override its values")
    p_run.add_argument("--manifest", default=None, help="training manifest")
    p_run.add_argument("--test-manifest", dest="test_manifest", default=None)
    p_run.add_argument("--initial", type=int, default=None,
                       help="classes in the initial state")
    p_run.add_argument("--states", type=int, default=None,
                       help="number of incremental states T")
    p_run.add_argument("--method", choices=["fetril", "ncm", "deesil"], default=None)
    p_run.add_argument("--strategy", default=None,
                       help="pseudo-feature selection: k:<int>, random or herding")
    p_run.add_argument("--samples-per-class", dest="samples_per_class",
                       type=int, default=None)
    p_run.add_argument("--classifier", choices=["hinge", "softmax"], default=None)
    p_run.add_argument("--neg-ratio", dest="neg_ratio", default=None,
                       help="'all' for one-vs-all, or an integer ratio r")
    p_run.add_argument("--reg-c", dest="reg_c", type=float, default=None)
    p_run.add_argument("--tolerance", type=float, default=None)
    p_run.add_argument("--max-epochs", dest="max_epochs", type=int, default=None)
    p_run.add_argument("--seed", type=int, default=None)
    p_run.add_argument("--repeats", type=int, default=None)
    p_run.add_argument("--out", default=None, required=False)

    p_sum = sub.add_parser("summarize",
                           help="print method/T/accuracy rows for run dirs")
    p_sum.add_argument("dirs", nargs="+", help="run or repeat directories")

    p_check = sub.add_parser("extract-check",
                             help="validate feature files against a manifest")
    p_check.add_argument("--manifest", required=True)
    return parser


def _cmd_synth(args) -> int:
    spec = preset_spec(args.preset)
    sigma = args.sigma if args.sigma is not None else spec.within_class_sigma
    name = args.name or f"synth-{args.preset}"
    spec = SynthSpec(num_classes=args.classes, dim=args.dim,
                     samples_per_class=args.samples,
                     class_center_scale=args.scale,
                     within_class_sigma=sigma, seed=args.seed, name=name)
    train_path, test_path = generate(spec, args.out)
    print(f"wrote {train_path} and {test_path}")
    return 0


def _resolve_run_options(args) -> dict:
    options = dict(RUN_DEFAULTS)
    if args.config:
        path = Path(args.config)
        if not path.exists():
            raise FetrilError(f"config file not found: {path}")
        doc = json.loads(path.read_text())
        unknown = set(doc) - set(RUN_DEFAULTS)
        if unknown:
            raise FetrilError(f"unknown config keys: {sorted(unknown)}")
        options.update(doc)
    for key in RUN_DEFAULTS:
        value = getattr(args, key, None)
        if value is not None:
            options[key] = value
    for key in ("manifest", "test_manifest", "out"):
        if not options[key]:
            raise FetrilError(f"missing required option '{key}'")
    return options


def _run_config_from_options(options: dict) -> RunConfig:
    neg = options["neg_ratio"]
    if isinstance(neg, str):
        neg = None if neg.lower() == "all" else int(neg)
    classifier = TrainConfig(variant=options["classifier"],
                             reg_c=float(options["reg_c"]),
                             tolerance=float(options["tolerance"]),
                             max_epochs=int(options["max_epochs"]),
                             neg_ratio=neg, seed=int(options["seed"]))
    strategy = parse_strategy(options["strategy"], seed=int(options["seed"]),
                              with_replacement=bool(options["random_with_replacement"]))
    order = options["class_order"]
    return RunConfig(method=options["method"], initial_count=int(options["initial"]),
                     num_states=int(options["states"]), strategy=strategy,
                     samples_per_class=options["samples_per_class"],
                     classifier=classifier, seed=int(options["seed"]),
                     class_order=None if order is None else tuple(order),
                     normalize_before_translate=bool(options["normalize_before_translate"]))


def _mean_state_rows(all_reports) -> list[dict]:
    rows = []
    for state_idx in range(len(all_reports[0])):
        per_state = [reports[state_idx] for reports in all_reports]
        past_vals = [r.past_top1 for r in per_state if r.past_top1 is not None]
        rows.append({
            "state_idx": state_idx,
            "seen_classes": per_state[0].seen_class_count,
            "top1": float(np.mean([r.top1 for r in per_state])),
            "past_top1": float(np.mean(past_vals)) if past_vals else None,
            "new_top1": float(np.mean([r.new_top1 for r in per_state])),
        })
    return rows


def _write_mean_csv(path, rows: list[dict]) -> None:
    with open(path, "w") as fh:
        fh.write(",".join(("state_idx", "seen_classes", "top1", "past_top1",
                           "new_top1")) + "\n")
        for row in rows:
            past = "" if row["past_top1"] is None else repr(row["past_top1"])
            fh.write(f"{row['state_idx']},{row['seen_classes']},"
                     f"{row['top1']!r},{past},{row['new_top1']!r}\n")


def _cmd_run(args) -> int:
    options = _resolve_run_options(args)
    config = _run_config_from_options(options)
    repeats = int(options["repeats"])

    train_store = load_dataset(options["manifest"])
    test_store = load_dataset(options["test_manifest"])

    out_dir = Path(options["out"])
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "config.json").write_text(json.dumps(options, indent=2) + "\n")

    all_reports = []
    per_repeat_avg = []
    for rep in range(repeats):
        seed = config.seed + REPEAT_SEED_STRIDE * rep
        rep_config = config.with_seed(seed)
        reports = run(rep_config, train_store, test_store)
        all_reports.append(reports)
        per_repeat_avg.append(average_incremental_accuracy(reports))

        rep_dir = out_dir / f"repeat_{rep:02d}"
        rep_dir.mkdir(exist_ok=True)
        write_states_csv(rep_dir / "states.csv", reports)
        schedule = build_schedule(train_store.class_ids, config.initial_count,
                                  config.num_states, seed, config.class_order)
        (rep_dir / "schedule.json").write_text(json.dumps({
            "seed": seed,
            "initial_classes": list(schedule.initial_classes),
            "states": [list(s) for s in schedule.states],
        }, indent=2) + "\n")

    _write_mean_csv(out_dir / "states.csv", _mean_state_rows(all_reports))
    summary = {
        "method": config.method,
        "states": config.num_states,
        "repeats": repeats,
        "strategy": config.strategy.label,
        "seed": config.seed,
        "average_incremental_accuracy": float(np.mean(per_repeat_avg)),
        "per_repeat_average": per_repeat_avg,
    }
    write_summary_json(out_dir / "summary.json", summary)
    print(f"{config.method} T={config.num_states} "
          f"avg_inc_acc={summary['average_incremental_accuracy']:.4f} "
          f"({repeats} repeats) -> {out_dir}")
    return 0


def _summarize_dir(path: Path) -> tuple[str, int, float]:
    summary = path / "summary.json"
    if summary.exists():
        doc = json.loads(summary.read_text())
        return (doc.get("method", "-"), int(doc.get("states", -1)),
                float(doc["average_incremental_accuracy"]))
    states = path / "states.csv"
    if not states.exists():
        raise FetrilError(f"{path}: no summary.json or states.csv")
    rows = read_states_csv(states)
    method, num_states = "-", len(rows) - 1
    config = path / "config.json"
    if config.exists():
        doc = json.loads(config.read_text())
        method = doc.get("method", "-")
        num_states = int(doc.get("states", num_states))
    avg = sum(r["top1"] for r in rows) / len(rows)
    return method, num_states, avg


def _cmd_summarize(args) -> int:
    print(f"{'method':<10}{'T':>4}  {'avg_inc_acc':>11}  dir")
    values = []
    for d in args.dirs:
        method, num_states, avg = _summarize_dir(Path(d))
        values.append(avg)
        print(f"{method:<10}{num_states:>4}  {avg:>11.4f}  {d}")
    if len(values) > 1:
        print(f"{'mean':<10}{'':>4}  {sum(values) / len(values):>11.4f}")
    return 0


def _cmd_extract_check(args) -> int:
    store = load_dataset(args.manifest)
    total_rows = 0
    for class_id in store.class_ids:
        matrix = store.matrix(class_id)  # full load validates payload
        total_rows += matrix.rows
    print(f"ok: {store.manifest.num_classes} classes, dim {store.dim}, "
          f"{total_rows} rows ({store.manifest.split} split)")
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "synth": _cmd_synth,
        "run": _cmd_run,
        "summarize": _cmd_summarize,
        "extract-check": _cmd_extract_check,
    }
    try:
        return handlers[args.command](args)
    except FetrilError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
