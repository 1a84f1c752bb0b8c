"""Experiment CLI.

Subcommands: gen-synth, pseudo, train, eval, experiment, sweep.
Exit codes: 0 success, 2 config error, 3 data-format error,
4 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import data, harness, metrics, mlp, pseudo
from .errors import ConfigError, DataFormatError, DomainError, NumericalError


def _cmd_gen_synth(args) -> None:
    with open(args.config) as fh:
        raw = json.load(fh)
    config = data.SynthConfig.from_dict(raw)
    manifests = data.generate(config, args.out)
    for split, manifest in manifests.items():
        print(f"{split}: {len(manifest.instances)} instances, "
              f"C={manifest.num_classes} -> {manifest.path}")


def _cmd_pseudo(args) -> None:
    manifest = data.load_manifest(args.train)
    labels = manifest.single_labels()
    if args.mode == "instance":
        index = pseudo.build_index(manifest.load_features(), args.similarity)
        sets = pseudo.instance_pseudo_labels(index, labels, args.k, args.tau)
    elif args.mode == "class_cooc":
        if not args.cooc_source:
            raise ConfigError("--cooc-source (a multi-label manifest) is "
                              "required for class_cooc mode")
        source = data.load_manifest(args.cooc_source)
        table = pseudo.CooccurrenceTable.from_label_sets(
            source.label_sets(), source.num_classes)
        per_class = pseudo.class_pseudo_labels(table, args.cooc_threshold)
        sets = pseudo.assign_class_pseudo_labels(per_class, labels)
    else:  # ideal
        sets = pseudo.ideal_pseudo_labels(manifest.multi_label_sets(), labels)
    pseudo.save_pseudo_labels(sets, args.out)
    nonempty = sum(1 for s in sets if s.labels)
    print(f"wrote {len(sets)} records ({nonempty} with pseudo-labels) "
          f"to {args.out}")


def _cmd_train(args) -> None:
    config = harness.ExperimentConfig.from_json(args.config)
    result = harness.train(config, args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    mlp.save_checkpoint(result.params, out / "checkpoint.spmw")
    trace = {"seed": args.seed, "best_epoch": result.best_epoch,
             "val_trace": result.val_trace}
    with open(out / "trace.json", "w") as fh:
        json.dump(trace, fh, sort_keys=True, indent=2)
        fh.write("\n")
    pseudo.save_pseudo_labels(result.pseudo_sets, out / "pseudo_labels.jsonl")
    print(f"best epoch {result.best_epoch}, "
          f"val top-1 {result.best_val_top1:.4f} -> {out}")


def _cmd_eval(args) -> None:
    params = mlp.load_checkpoint(args.checkpoint)
    manifest = data.load_manifest(args.test)
    report = harness.evaluate(params, manifest)
    with open(args.out, "w") as fh:
        fh.write(report.to_json())
        fh.write("\n")
    print(metrics.format_table({"eval": report}))


def _cmd_experiment(args) -> None:
    config = harness.ExperimentConfig.from_json(args.config)
    result = harness.run_experiment(config, verbose=args.verbose)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "report.json", "w") as fh:
        fh.write(result.to_json())
        fh.write("\n")
    table = _aggregate_table(result)
    with open(out / "report.txt", "w") as fh:
        fh.write(table + "\n")
    print(table)


def _aggregate_table(result: harness.RunResult) -> str:
    header = ["metric", "mean", "std"]
    lines = ["  ".join(f"{h:>24}" for h in header)]
    for name in harness.AGGREGATE_FIELDS:
        entry = result.aggregate[name]
        lines.append("  ".join([f"{name:>24}", f"{entry['mean']:24.4f}",
                                f"{entry['std']:24.4f}"]))
    return "\n".join(lines)


def _parse_list(text: str, cast):
    try:
        return [cast(tok) for tok in text.split(",") if tok.strip()]
    except ValueError:
        raise ConfigError(f"cannot parse list {text!r}") from None


def _cmd_sweep(args) -> None:
    config = harness.ExperimentConfig.from_json(args.config)
    k_values = _parse_list(args.k, int)
    tau_values = _parse_list(args.tau, float)
    if not k_values or not tau_values:
        raise ConfigError("sweep needs at least one K and one tau value")
    results = harness.sweep(config, k_values, tau_values, verbose=args.verbose)
    table = harness.format_sweep_table(results, k_values, tau_values,
                                       metric=args.metric)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "sweep.json", "w") as fh:
            fh.write(harness.sweep_to_json(results))
            fh.write("\n")
        with open(out / "sweep.txt", "w") as fh:
            fh.write(table + "\n")
    print(table)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spml-lab",
        description="Single-positive multi-label learning experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-synth", help="generate a synthetic benchmark")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_gen_synth)

    p = sub.add_parser("pseudo", help="generate pseudo-label sets")
    p.add_argument("--train", required=True)
    p.add_argument("--mode", required=True,
                   choices=["instance", "class_cooc", "ideal"])
    p.add_argument("--k", type=int, default=15)
    p.add_argument("--tau", type=float, default=0.1)
    p.add_argument("--similarity", default="cosine",
                   choices=list(pseudo.SIMILARITY_KINDS))
    p.add_argument("--cooc-source", default=None,
                   help="multi-label manifest for class_cooc mode")
    p.add_argument("--cooc-threshold", type=float, default=0.5)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_pseudo)

    p = sub.add_parser("train", help="train one model")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("experiment", help="multi-seed aggregate run")
    p.add_argument("--config", required=True)
    p.add_argument("--out", default="experiment_out")
    p.add_argument("--verbose", action="store_true")
    p.set_defaults(func=_cmd_experiment)

    p = sub.add_parser("sweep", help="K/tau grid of experiments")
    p.add_argument("--config", required=True)
    p.add_argument("--k", default="3,5,10,15,20")
    p.add_argument("--tau", default="0.1,0.2,0.3")
    p.add_argument("--metric", default="f1",
                   choices=list(harness.AGGREGATE_FIELDS))
    p.add_argument("--out", default=None)
    p.add_argument("--verbose", action="store_true")
    p.set_defaults(func=_cmd_sweep)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (DataFormatError, FileNotFoundError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 4
    except DomainError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
