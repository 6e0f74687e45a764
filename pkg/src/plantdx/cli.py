"""Command-line entry point: ``plantdx <subcommand> [flags]``.

Exit status: 0 success, 1 runtime failure, 2 usage error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from .dataset import FeatureCache, read_feature_cache, scan_dataset, stratified_split, write_feature_cache
from .errors import PlantDxError
from .evaluation import evaluate_model
from .forest import ForestParams, load_model, save_model
from .inference import predict_file
from .pipeline import (
    SelectionConfig,
    crossval_plant,
    extract_dataset,
    holdout_table,
    train_plant,
)
from .report import render_report
from .selection import correlation_matrix

log = logging.getLogger("plantdx")


class UsageError(Exception):
    pass


def _add_source(p):
    p.add_argument("--features", type=Path, help="feature cache CSV written by `extract`")
    p.add_argument("--data-dir", type=Path, help="PlantVillage-style image root (extracted on the fly)")
    p.add_argument("--workers", type=int, default=1, help="parallel extraction processes")


def _add_training(p):
    p.add_argument("--plant", required=True, help="plant name, or 'all'")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--trees", type=int, default=100)
    p.add_argument("--corr-drop", type=float, default=0.95, help="pairwise |r| that marks a feature redundant")
    p.add_argument("--target-corr-min", type=float, default=0.1, help="minimum |r| with the target")
    p.add_argument("--no-select", action="store_true", help="train on all 15 features")
    p.add_argument("--jobs", type=int, default=1, help="threads for tree fitting")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="plantdx", description="Leaf disease classification pipeline.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract", help="extract features for a dataset into a CSV cache")
    p.add_argument("--data-dir", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--workers", type=int, default=1)

    p = sub.add_parser("train", help="train one model per plant and report on the hold-out split")
    _add_source(p)
    _add_training(p)
    p.add_argument("--split", type=float, default=0.2, help="test fraction")
    p.add_argument("--out", type=Path, help="model file (single plant) or directory (--plant all)")
    p.add_argument("--models-dir", type=Path, help="output directory for --plant all")
    p.add_argument("--report-dir", type=Path)

    p = sub.add_parser("crossval", help="stratified k-fold cross-validation")
    _add_source(p)
    _add_training(p)
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--out", type=Path, help="write results JSON here instead of stdout")
    p.add_argument("--report-dir", type=Path, help="bundle of pooled out-of-fold predictions")

    p = sub.add_parser("evaluate", help="evaluate a model on the hold-out split of a feature cache")
    p.add_argument("--model", type=Path, required=True)
    p.add_argument("--features", type=Path, required=True)
    p.add_argument("--split", type=float, default=0.2)
    p.add_argument("--seed", type=int, help="split seed (default: the model's training seed)")
    p.add_argument("--report-dir", type=Path)

    p = sub.add_parser("predict", help="classify one leaf image")
    p.add_argument("--model", type=Path, required=True)
    p.add_argument("--image", type=Path, required=True)

    p = sub.add_parser("report", help="render metrics, confusion, ROC and correlation artifacts")
    p.add_argument("--model", type=Path, required=True)
    p.add_argument("--features", type=Path, required=True)
    p.add_argument("--report-dir", type=Path, required=True)
    p.add_argument("--split", type=float, default=0.2)
    p.add_argument("--seed", type=int)

    p = sub.add_parser("serve", help="run the HTTP inference service")
    p.add_argument("--models-dir", type=Path, required=True)
    p.add_argument("--port", type=int, default=8080)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--max-inflight", type=int, default=4)

    # argparse reports missing required flags before unknown ones; defer the
    # required check so that a typo is what the user hears about first
    parser.subcommands = dict(sub.choices)
    parser.deferred_required = {}
    for name, sp in sub.choices.items():
        for action in sp._actions:
            if action.required:
                action.required = False
                parser.deferred_required.setdefault(name, []).append(action)
    return parser


def _parse(parser: argparse.ArgumentParser, argv):
    args, extras = parser.parse_known_args(argv)
    sp = parser.subcommands[args.command]
    if extras:
        sp.error(f"unrecognized arguments: {' '.join(extras)}")
    missing = [a.option_strings[0] for a in parser.deferred_required.get(args.command, [])
               if getattr(args, a.dest) is None]
    if missing:
        sp.error(f"the following arguments are required: {', '.join(missing)}")
    return args


def _need_file(path: Path | None, flag: str):
    if path is None:
        raise UsageError(f"{flag} is required")
    if not path.is_file():
        raise PlantDxError(f"{flag}: file not found: {path}")


def _need_parent(path: Path, flag: str):
    if not path.parent.is_dir():
        raise PlantDxError(f"{flag}: directory does not exist: {path.parent}")


def _load_cache(args) -> FeatureCache:
    if (args.features is None) == (args.data_dir is None):
        raise UsageError("exactly one of --features or --data-dir is required")
    if args.features is not None:
        _need_file(args.features, "--features")
        return read_feature_cache(args.features)
    return extract_dataset(scan_dataset(args.data_dir), workers=args.workers)


def _plants(cache: FeatureCache, plant: str) -> list[str]:
    if plant == "all":
        return cache.plants()
    cache.for_plant(plant)  # raises UnknownPlant
    return [plant]


def _params(args) -> ForestParams:
    if args.trees < 1:
        raise UsageError("--trees must be >= 1")
    return ForestParams(n_trees=args.trees, seed=args.seed)


def _selection(args) -> SelectionConfig:
    return SelectionConfig(not args.no_select, args.corr_drop, args.target_corr_min)


def cmd_extract(args) -> int:
    _need_parent(args.out, "--out")
    index = scan_dataset(args.data_dir)
    cache = extract_dataset(index, workers=args.workers)
    write_feature_cache(cache, args.out)
    print(f"wrote {len(cache)} rows ({len(index.entries) - len(cache)} skipped) to {args.out}", file=sys.stderr)
    return 0


def cmd_train(args) -> int:
    if not 0 < args.split < 1:
        raise UsageError("--split must lie in (0, 1)")
    multi = args.plant == "all"
    if multi:
        out_dir = args.models_dir or args.out
        if out_dir is None:
            raise UsageError("--plant all needs --models-dir (or --out DIR)")
        out_dir.mkdir(parents=True, exist_ok=True)
    else:
        if args.out is None:
            raise UsageError("--out is required")
        _need_parent(args.out, "--out")
    cache = _load_cache(args)
    plants = _plants(cache, args.plant)
    params, selection = _params(args), _selection(args)

    def one(plant):
        return plant, train_plant(cache.for_plant(plant), params, selection, args.split, n_jobs=args.jobs)

    with ThreadPoolExecutor(max_workers=max(1, min(args.workers, len(plants)))) as pool:
        results = list(pool.map(one, plants))

    summary = {}
    for plant, res in results:
        path = (out_dir / f"{plant}.json") if multi else args.out
        save_model(res.model, path)
        entry = {"model": str(path), "selected_features": res.model.selected_features}
        if res.report is not None:
            entry.update(accuracy=res.report.accuracy, weighted_f1=res.report.weighted_f1)
            if args.report_dir is not None:
                target = args.report_dir / plant if multi else args.report_dir
                render_report(res.report, res.correlation, target)
        summary[plant] = entry
    print(json.dumps(summary, indent=2))
    return 0


def cmd_crossval(args) -> int:
    if args.k < 2:
        raise UsageError("--k must be >= 2")
    cache = _load_cache(args)
    params, selection = _params(args), _selection(args)
    out = {}
    for plant in _plants(cache, args.plant):
        table = cache.for_plant(plant)
        cv = crossval_plant(table, params, selection, k=args.k, n_jobs=args.jobs)
        out[plant] = cv.scalars()
        if args.report_dir is not None:
            target = args.report_dir / plant if args.plant == "all" else args.report_dir
            render_report(cv.pooled, correlation_matrix(table), target, {"crossval": cv.scalars()})
    text = json.dumps(out, indent=2)
    if args.out is not None:
        _need_parent(args.out, "--out")
        args.out.write_text(text + "\n")
    else:
        print(text)
    return 0


def _holdout(args):
    _need_file(args.model, "--model")
    _need_file(args.features, "--features")
    model = load_model(args.model)
    table = read_feature_cache(args.features).for_plant(model.plant)
    seed = model.params.seed if args.seed is None else args.seed
    return model, table, seed


def cmd_evaluate(args) -> int:
    model, table, seed = _holdout(args)
    report = evaluate_model(model, holdout_table(table, args.split, seed))
    if args.report_dir is not None:
        render_report(report, None, args.report_dir)
    print(json.dumps(report.scalars(), indent=2))
    return 0


def cmd_report(args) -> int:
    model, table, seed = _holdout(args)
    split = stratified_split(table.y, args.split, seed)
    report = evaluate_model(model, table.subset(split.test_indices))
    corr = correlation_matrix(table.subset(split.train_indices))
    bundle = render_report(report, corr, args.report_dir)
    for f in bundle.files:
        print(f)
    return 0


def cmd_predict(args) -> int:
    _need_file(args.model, "--model")
    _need_file(args.image, "--image")
    result = predict_file(load_model(args.model), args.image)
    result.pop("feature_vector")
    print(json.dumps(result))
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    app = create_app(args.models_dir, max_inflight=args.max_inflight)
    uvicorn.run(app, host=args.host, port=args.port)
    return 0


COMMANDS = {
    "extract": cmd_extract,
    "train": cmd_train,
    "crossval": cmd_crossval,
    "evaluate": cmd_evaluate,
    "predict": cmd_predict,
    "report": cmd_report,
    "serve": cmd_serve,
}


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = _parse(parser, argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"plantdx {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except (PlantDxError, OSError) as exc:
        print(f"plantdx {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
