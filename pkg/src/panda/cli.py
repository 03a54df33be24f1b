"""Command-line interface.

Subcommands cover the whole workflow: generate synthetic data, train any
of the model kinds, predict, run the evaluation protocols, inspect
resource diagnostics, train or apply cross-technology transfer, and
explore a design space under a power budget.

Failures print a single JSON line to stderr, {"error": ..., "kind": ...},
and exit with 2 for usage problems, 3 for data problems, and 4 for model
file problems.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import __version__
from .baselines import (
    ANALYTICAL_FORMAT_TAG,
    COMPONENT_FORMAT_TAG,
    GLOBAL_FORMAT_TAG,
    load_analytical,
    load_component_ml,
    load_global_ml,
    predict_analytical,
    predict_component_ml,
    predict_global_ml,
    save_analytical,
    save_component_ml,
    save_global_ml,
    train_analytical,
    train_component_ml,
    train_global_ml,
)
from .components import ComponentId
from .dataset import DatasetError, load_dataset, save_dataset
from .dse import (
    DseError,
    dataset_events_provider,
    explore,
    load_design_space,
    write_result_csv,
)
from .evalharness import (
    EvalError,
    diagnostics_to_obj,
    report_to_obj,
    resource_diagnostics,
    run_protocol,
    run_special_case,
    write_diagnostics_scatter_csv,
    write_report_csv,
    write_report_json,
)
from .power_model import (
    MODEL_FORMAT_TAG,
    PowerModelError,
    load_panda_model,
    predict_total_power,
    save_panda_model,
    train_panda,
)
from .quality import QualityError, load_perf_model, save_perf_model, train_perf
from .regressor import ModelFormatError, RegressorError, TrainOptions
from .resource import ResourceError, load_resource_config
from .synth import (
    SynthError,
    default_synth_spec,
    exact_affine_spec,
    generate,
    generate_multitech,
)
from .transfer import (
    TransferError,
    load_transfer_model,
    load_transfer_samples,
    predict_transferred_power,
    save_transfer_model,
    save_transfer_samples,
    train_transfer,
)

EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_MODEL = 4

_DATA_ERRORS = (DatasetError, SynthError, EvalError, QualityError, TransferError, DseError, ResourceError)


class CliError(Exception):
    def __init__(self, message: str, exit_code: int):
        super().__init__(message)
        self.exit_code = exit_code


def _emit_error(message: str, exit_code: int) -> None:
    kind = {EXIT_USAGE: "usage", EXIT_DATA: "data", EXIT_MODEL: "model"}.get(exit_code, "error")
    print(json.dumps({"error": message, "kind": kind}), file=sys.stderr)


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # noqa: A002 - argparse API
        _emit_error(message, EXIT_USAGE)
        raise SystemExit(EXIT_USAGE)


def _load_data(path: str):
    try:
        return load_dataset(path)
    except FileNotFoundError:
        raise CliError(f"dataset file not found: {path}", EXIT_DATA) from None
    except DatasetError as exc:
        raise CliError(str(exc), EXIT_DATA) from None


def _default_seed(value: int | None) -> int:
    if value is not None:
        return value
    env = os.environ.get("PANDA_SEED", "").strip()
    if not env:
        return 0
    try:
        return int(env)
    except ValueError:
        raise CliError(f"PANDA_SEED must be an integer, got {env!r}", EXIT_USAGE) from None


def _train_options(args) -> TrainOptions:
    try:
        return TrainOptions(
            n_trees=args.trees,
            max_depth=args.max_depth,
            learning_rate=args.learning_rate,
            l2_leaf_reg=args.l2,
            min_samples_leaf=args.min_leaf,
        )
    except RegressorError as exc:
        raise CliError(str(exc), EXIT_USAGE) from None


def _add_train_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--trees", type=int, default=100, help="number of boosting rounds")
    parser.add_argument("--max-depth", type=int, default=6, help="tree depth limit")
    parser.add_argument("--learning-rate", type=float, default=0.3, help="shrinkage per round")
    parser.add_argument("--l2", type=float, default=1.0, help="leaf L2 regularization")
    parser.add_argument("--min-leaf", type=int, default=1, help="minimum samples per leaf")
    parser.add_argument(
        "--resource-config",
        default=None,
        help="JSON file with default resource biases and the issue-unit lookup",
    )


def _resource_defaults(args):
    if args.resource_config is None:
        return None
    try:
        return load_resource_config(args.resource_config)
    except FileNotFoundError:
        raise CliError(f"resource config not found: {args.resource_config}", EXIT_DATA) from None
    except ResourceError as exc:
        raise CliError(str(exc), EXIT_DATA) from None


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def _cmd_synth(args) -> int:
    seed = _default_seed(args.seed)
    try:
        if args.exact_affine:
            spec = exact_affine_spec(seed, include_special=args.include_special)
        else:
            spec = default_synth_spec(
                seed, include_special=args.include_special, noise_rel=args.noise
            )
        dataset = generate(spec)
        save_dataset(dataset, args.out)
        if args.transfer_out:
            corpus = generate_multitech(spec, n_designs=args.designs)
            save_transfer_samples(corpus, args.transfer_out)
    except SynthError as exc:
        raise CliError(str(exc), EXIT_USAGE) from None
    summary = {
        "seed": seed,
        "samples": len(dataset.samples),
        "configs": len(dataset.config_ids()),
        "out": str(args.out),
    }
    if args.transfer_out:
        summary["transfer_samples"] = len(corpus)
        summary["transfer_out"] = str(args.transfer_out)
    print(json.dumps(summary))
    return 0


_POWER_KINDS = ("panda", "global-ml", "component-ml", "analytical")


def _cmd_train(args) -> int:
    dataset = _load_data(args.data)
    opts = _train_options(args)
    defaults = _resource_defaults(args)
    try:
        if args.kind == "panda":
            save_panda_model(train_panda(dataset, opts, defaults), args.model)
        elif args.kind == "global-ml":
            save_global_ml(train_global_ml(dataset, opts), args.model)
        elif args.kind == "component-ml":
            save_component_ml(train_component_ml(dataset, opts), args.model)
        elif args.kind == "analytical":
            save_analytical(train_analytical(dataset, defaults), args.model)
        else:
            save_perf_model(train_perf(dataset, opts), args.model)
    except (PowerModelError, QualityError, RegressorError, ValueError) as exc:
        raise CliError(str(exc), EXIT_DATA) from None
    print(json.dumps({"kind": args.kind, "model": str(args.model), "train_samples": len(dataset.samples)}))
    return 0


def _sniff_model_tag(path: str) -> str:
    try:
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise CliError(f"model file not found: {path}", EXIT_MODEL) from None
    except json.JSONDecodeError as exc:
        raise CliError(f"corrupt model file: {exc.msg}", EXIT_MODEL) from None
    if not isinstance(obj, dict) or not isinstance(obj.get("format"), str):
        raise CliError("model file lacks a format tag", EXIT_MODEL)
    return obj["format"]


def _load_power_model(path: str):
    tag = _sniff_model_tag(path)
    loaders = {
        MODEL_FORMAT_TAG: ("panda", load_panda_model),
        GLOBAL_FORMAT_TAG: ("global-ml", load_global_ml),
        COMPONENT_FORMAT_TAG: ("component-ml", load_component_ml),
        ANALYTICAL_FORMAT_TAG: ("analytical", load_analytical),
    }
    if tag not in loaders:
        raise CliError(f"unsupported model format {tag!r}", EXIT_MODEL)
    kind, loader = loaders[tag]
    try:
        return kind, loader(path)
    except (ModelFormatError, PowerModelError, RegressorError, ValueError) as exc:
        raise CliError(str(exc), EXIT_MODEL) from None


def _cmd_predict(args) -> int:
    kind, model = _load_power_model(args.model)
    dataset = _load_data(args.data)
    import csv as _csv

    rows = []
    for s in dataset.samples:
        if kind == "panda":
            pred, _ = predict_total_power(model, s.config, s.events)
        elif kind == "global-ml":
            pred = predict_global_ml(model, s.config, s.events)
        elif kind == "component-ml":
            pred, _ = predict_component_ml(model, s.config, s.events)
        else:
            pred, _ = predict_analytical(model, s.config)
        rows.append((s.config.id, s.events.workload, pred, s.total_power_w))

    with open(args.out, "w", newline="", encoding="utf-8") as fh:
        writer = _csv.writer(fh)
        writer.writerow(["config_id", "workload", "predicted_power_w", "true_power_w"])
        for cid, workload, pred, true in rows:
            writer.writerow([cid, workload, repr(pred), repr(true)])
    print(json.dumps({"kind": kind, "rows": len(rows), "out": str(args.out)}))
    return 0


def _cmd_eval(args) -> int:
    if args.protocol == "known-n":
        if args.n_train is None:
            raise CliError("--protocol known-n requires --n-train", EXIT_USAGE)
        if not (1 <= args.n_train <= 14):
            raise CliError("--n-train must be between 1 and 14", EXIT_USAGE)
    if args.jobs < 1:
        raise CliError("--jobs must be >= 1", EXIT_USAGE)
    dataset = _load_data(args.data)
    opts = _train_options(args)
    defaults = _resource_defaults(args)
    try:
        if args.protocol == "special":
            report = run_special_case(dataset, args.kind, opts=opts, defaults=defaults)
        else:
            report = run_protocol(
                dataset,
                args.kind,
                args.protocol,
                n_train=args.n_train,
                opts=opts,
                defaults=defaults,
                jobs=args.jobs,
            )
    except (EvalError, PowerModelError, RegressorError, ValueError) as exc:
        raise CliError(str(exc), EXIT_DATA) from None
    if args.report:
        write_report_json(report, args.report)
    if args.csv:
        write_report_csv(report, args.csv)
    print(json.dumps(report_to_obj(report)))
    return 0


def _cmd_diag(args) -> int:
    dataset = _load_data(args.data)
    try:
        component = ComponentId(args.component)
    except ValueError:
        raise CliError(
            f"unknown component {args.component!r}, expected one of "
            f"{[c.value for c in ComponentId]}",
            EXIT_USAGE,
        ) from None
    params = _resource_defaults(args)
    try:
        diag = resource_diagnostics(dataset, component, params)
    except (EvalError, ResourceError) as exc:
        raise CliError(str(exc), EXIT_DATA) from None
    if args.out_dir:
        out_dir = Path(args.out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        write_diagnostics_scatter_csv(diag, out_dir / f"{component.value}_fres_power.csv")
    print(json.dumps(diagnostics_to_obj(diag)))
    return 0


def _cmd_transfer(args) -> int:
    if (args.train is None) == (args.apply is None):
        raise CliError("transfer needs exactly one of --train or --apply", EXIT_USAGE)
    if args.train is not None:
        try:
            corpus = load_transfer_samples(args.train)
        except FileNotFoundError:
            raise CliError(f"transfer corpus not found: {args.train}", EXIT_DATA) from None
        except TransferError as exc:
            raise CliError(str(exc), EXIT_DATA) from None
        opts = _train_options(args)
        try:
            model = train_transfer(corpus, opts)
        except (TransferError, RegressorError) as exc:
            raise CliError(str(exc), EXIT_DATA) from None
        save_transfer_model(model, args.model)
        print(json.dumps({"model": str(args.model), "train_samples": len(corpus)}))
        return 0

    try:
        model = load_transfer_model(args.model)
    except FileNotFoundError:
        raise CliError(f"model file not found: {args.model}", EXIT_MODEL) from None
    except (ModelFormatError, TransferError, RegressorError, ValueError) as exc:
        raise CliError(str(exc), EXIT_MODEL) from None
    try:
        corpus = load_transfer_samples(args.apply)
    except FileNotFoundError:
        raise CliError(f"transfer corpus not found: {args.apply}", EXIT_DATA) from None
    except TransferError as exc:
        raise CliError(str(exc), EXIT_DATA) from None

    import csv as _csv

    with open(args.out, "w", newline="", encoding="utf-8") as fh:
        writer = _csv.writer(fh)
        writer.writerow(
            [
                "design_id",
                "source_node",
                "target_node",
                "source_power_w",
                "predicted_target_power_w",
                "true_target_power_w",
            ]
        )
        for sample in corpus:
            pred = predict_transferred_power(
                model, sample.source_power_w, sample.source, sample.target
            )
            writer.writerow(
                [
                    sample.design_id,
                    sample.source.name,
                    sample.target.name,
                    repr(sample.source_power_w),
                    repr(pred),
                    repr(sample.target_power_w),
                ]
            )
    print(json.dumps({"rows": len(corpus), "out": str(args.out)}))
    return 0


def _cmd_dse(args) -> int:
    try:
        space = load_design_space(args.space)
    except FileNotFoundError:
        raise CliError(f"design space file not found: {args.space}", EXIT_DATA) from None
    except DseError as exc:
        raise CliError(str(exc), EXIT_DATA) from None

    kind, power_model = _load_power_model(args.power_model)
    if kind != "panda":
        raise CliError("design-space exploration needs a panda power model", EXIT_MODEL)
    try:
        perf_model = load_perf_model(args.perf_model)
    except FileNotFoundError:
        raise CliError(f"model file not found: {args.perf_model}", EXIT_MODEL) from None
    except (ModelFormatError, QualityError, RegressorError, ValueError) as exc:
        raise CliError(str(exc), EXIT_MODEL) from None

    dataset = _load_data(args.events_from)
    provider = dataset_events_provider(dataset)
    try:
        result = explore(
            power_model,
            perf_model,
            space,
            provider,
            power_constraint_w=args.constraint,
            tolerance=args.tolerance,
            max_candidates=args.max_candidates,
        )
    except DseError as exc:
        raise CliError(str(exc), EXIT_DATA) from None
    if args.out:
        write_result_csv(result, args.out)
    top = [
        {
            "rank": i + 1,
            "candidate_id": c.id,
            "predicted_perf": c.predicted_perf,
            "predicted_power_w": c.predicted_power_w,
            "params": c.config.params(),
        }
        for i, c in enumerate(result.top(min(args.top, len(result.ranked))))
    ]
    print(
        json.dumps(
            {
                "candidates": result.n_candidates,
                "feasible": result.n_feasible,
                "constraint_w": result.power_constraint_w,
                "top": top,
            }
        )
    )
    return 0


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="panda", description=__doc__)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic labeled dataset")
    p.add_argument("--out", required=True, help="output dataset (JSON lines)")
    p.add_argument("--seed", type=int, default=None, help="RNG seed (default: $PANDA_SEED or 0)")
    p.add_argument("--noise", type=float, default=0.05, help="relative noise level")
    p.add_argument("--include-special", action="store_true", help="also emit the two held-out designs")
    p.add_argument("--exact-affine", action="store_true", help="noise-free affine laws")
    p.add_argument("--transfer-out", default=None, help="also write a multi-node transfer corpus here")
    p.add_argument("--designs", type=int, default=20, help="designs in the transfer corpus")
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("train", help="train a model on a labeled dataset")
    p.add_argument("--data", required=True)
    p.add_argument("--model", required=True, help="output model file")
    p.add_argument("--kind", choices=(*_POWER_KINDS, "perf"), default="panda")
    _add_train_flags(p)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("predict", help="predict power for every sample in a dataset")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True, help="output CSV")
    p.set_defaults(func=_cmd_predict)

    p = sub.add_parser("eval", help="cross-validate a model kind under a protocol")
    p.add_argument("--data", required=True)
    p.add_argument("--kind", choices=_POWER_KINDS, default="panda")
    p.add_argument("--protocol", choices=("known-n", "unknown-domain", "special"), required=True)
    p.add_argument("--n-train", type=int, default=None, help="training designs per fold (known-n)")
    p.add_argument("--jobs", type=int, default=1, help="worker processes for fold training")
    p.add_argument("--report", default=None, help="write the full report as JSON here")
    p.add_argument("--csv", default=None, help="write per-design metrics as CSV here")
    _add_train_flags(p)
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("diag", help="resource-function diagnostics for one component")
    p.add_argument("--data", required=True)
    p.add_argument("--component", required=True, help="component name, e.g. DCache")
    p.add_argument("--out-dir", default=None, help="write <component>_fres_power.csv here")
    p.add_argument("--resource-config", default=None)
    p.set_defaults(func=_cmd_diag)

    p = sub.add_parser("transfer", help="train or apply cross-technology power transfer")
    p.add_argument("--train", default=None, help="transfer corpus to train on (JSON lines)")
    p.add_argument("--apply", default=None, help="transfer corpus to predict for")
    p.add_argument("--model", required=True, help="model file to write (train) or read (apply)")
    p.add_argument("--out", default="transfer_predictions.csv", help="prediction CSV (apply)")
    _add_train_flags(p)
    p.set_defaults(func=_cmd_transfer)

    p = sub.add_parser("dse", help="rank design-space candidates under a power budget")
    p.add_argument("--space", required=True, help="design space JSON")
    p.add_argument("--power-model", required=True)
    p.add_argument("--perf-model", required=True)
    p.add_argument("--events-from", required=True, help="dataset supplying per-workload activity")
    p.add_argument("--constraint", type=float, required=True, help="power budget in watts")
    p.add_argument("--tolerance", type=float, default=0.0, help="allowed relative overshoot")
    p.add_argument("--max-candidates", type=int, default=20_000)
    p.add_argument("--top", type=int, default=5, help="candidates to print")
    p.add_argument("--out", default=None, help="ranked CSV output")
    p.set_defaults(func=_cmd_dse)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except CliError as exc:
        _emit_error(str(exc), exc.exit_code)
        return exc.exit_code
    except SystemExit as exc:
        code = exc.code if isinstance(exc.code, int) else EXIT_USAGE
        return code


if __name__ == "__main__":
    sys.exit(main())
