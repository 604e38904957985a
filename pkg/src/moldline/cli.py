"""Command-line surface: synth, extract, select, train, eval, report.

Errors print one machine-parsable JSON object on stderr and exit nonzero
(2 for bad input, 1 for unexpected failures). All outputs are files named
on the command line; nothing is interactive.
"""
from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import regress, synth
from .config import PipelineConfig, derive_seed
from .dataset import load_dataset, load_manifest, split, write_dataset
from .descriptors import build_feature_matrix, export_features, load_features
from .errors import BadModelKind, MalformedRecord, MissingFile, MoldlineError
from .featsel import export_correlation, export_rfe_curve, rfe, correlation_matrix
from .lstm import frame_signals, lstm_from_dict, lstm_to_dict, predict_lstm
from .nn.network import export_train_log, network_from_dict, network_to_dict
from .persist import pack_array, unpack_array
from .train import (ColumnStats, NETWORK_KINDS, TrainReport, apply_feature_stats,
                    fit_feature_stats, format_ranking, labels_for, run_classical,
                    run_network, write_scores_csv)

BUNDLE_VERSION = 1


def load_config(path: str | None) -> PipelineConfig:
    path = path or os.environ.get("MOLDLINE_CONFIG")
    if path:
        return PipelineConfig.from_json(path)
    return PipelineConfig()


def _split_ids(manifest, split_seed: int | None, n_test: int | None):
    seed = manifest.split_seed if split_seed is None else split_seed
    n_test = manifest.n_test if n_test is None else n_test
    return split(manifest, seed, n_test)


# -- commands -------------------------------------------------------------------

def cmd_synth(args) -> int:
    config = load_config(args.config)
    if args.noise is not None:
        config.synth.noise_level = args.noise
    manifest, records, truth = synth.generate(
        n_cycles=args.n, seed=args.seed, noise_level=config.synth.noise_level,
        config=config.synth)
    out = Path(args.out)
    write_dataset(manifest, records, out)
    synth.write_ground_truth(truth, out / "ground_truth.json")
    print(json.dumps({"cycles": len(records), "out": str(out),
                      "n_train": manifest.n_train, "n_test": manifest.n_test}))
    return 0


def cmd_extract(args) -> int:
    config = load_config(args.config)
    _manifest, records = load_dataset(Path(args.data) / "manifest.json")
    fm = build_feature_matrix(records, config)
    export_features(fm, args.out)
    sidecar = {
        "manifest_hash": fm.manifest.hash,
        "columns": [{"name": e.name, "source": e.source, "channel": e.channel}
                    for e in fm.manifest.entries],
    }
    with open(str(args.out) + ".manifest.json", "w") as fh:
        json.dump(sidecar, fh, indent=2)
        fh.write("\n")
    print(json.dumps({"cycles": len(records), "features": fm.values.shape[1],
                      "manifest_hash": fm.manifest.hash}))
    return 0


def cmd_select(args) -> int:
    config = load_config(args.config)
    fm = load_features(args.features)
    manifest = load_manifest(args.labels)
    if args.all_rows:
        rows = fm
        y = np.array([e.width_mm for e in manifest.records], dtype=float)
    else:
        train_ids, _test_ids = _split_ids(manifest, args.split_seed, None)
        rows = fm.rows(train_ids)
        widths = {e.cycle_id: e.width_mm for e in manifest.records}
        y = np.array([widths[cid] for cid in train_ids], dtype=float)
    result = rfe(rows, y, cv_folds=args.cv, seed=args.seed)
    export_rfe_curve(result, args.out_curve)
    with open(args.out_subset, "w") as fh:
        json.dump({"selected": result.selected,
                   "selected_indices": result.selected_indices,
                   "manifest_hash": fm.manifest.hash,
                   "flags": list(result.flags)}, fh, indent=2)
        fh.write("\n")
    if args.out_correlation:
        corr, _flags = correlation_matrix(rows)
        export_correlation(corr, rows.manifest.names, args.out_correlation)
    best = max(result.curve, key=lambda e: e[1])
    print(json.dumps({"selected": len(result.selected), "of": fm.values.shape[1],
                      "best_mean_r2": best[1]}))
    return 0


def cmd_train(args) -> int:
    config = load_config(args.config)
    seed = config.seed if args.seed is None else args.seed
    data_dir = Path(args.data)
    manifest, records = load_dataset(data_dir / "manifest.json")
    train_ids, test_ids = _split_ids(manifest, args.split_seed, None)
    out = Path(args.out)

    if args.model in NETWORK_KINDS:
        report, payload = run_network(args.model, records, train_ids, test_ids,
                                      config, seed=seed, iters=args.iters)
        _save_network_bundle(out, args.model, payload, train_ids, test_ids, config)
        if report.trajectory:
            export_train_log(report.trajectory, out.with_suffix(".train_log.csv"))
    elif args.model in regress.MODEL_REGISTRY:
        if not args.features:
            raise MissingFile("classical models need --features (run extract first)")
        fm = load_features(args.features)
        if args.subset:
            with open(args.subset) as fh:
                subset = json.load(fh)
            name_to_idx = {n: i for i, n in enumerate(fm.manifest.names)}
            fm = fm.select([name_to_idx[n] for n in subset["selected"]])
        params = dict(config.model_params.get(args.model, {}))
        report, model, stats = run_classical(
            args.model, params, fm, records, train_ids, test_ids, seed=seed)
        _save_classical_bundle(out, model, stats, fm.manifest.names,
                               train_ids, test_ids)
    else:
        raise BadModelKind(args.model,
                           list(regress.MODEL_REGISTRY) + list(NETWORK_KINDS))
    report.to_json(out.with_suffix(".report.json"))
    print(json.dumps({"model": args.model, "mse": report.mse, "r2": report.r2,
                      "out": str(out)}))
    return 0


def cmd_eval(args) -> int:
    config = load_config(args.config)
    if args.pred:
        manifest = load_manifest(args.labels)
        widths = {e.cycle_id: e.width_mm for e in manifest.records}
        y_true, y_pred = [], []
        with open(args.pred, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            if header[:2] != ["cycle_id", "prediction"]:
                raise MalformedRecord(f"{args.pred}: expected header cycle_id,prediction")
            for row in reader:
                y_true.append(widths[row[0]])
                y_pred.append(float(row[1]))
        mse, r2 = regress.scores(np.array(y_true), np.array(y_pred))
        n, label = len(y_true), "predictions"
    else:
        if not args.model:
            raise MissingFile("eval needs --model or --pred")
        with open(args.model) as fh:
            bundle = json.load(fh)
        data_dir = Path(args.data)
        _manifest, records = load_dataset(data_dir / "manifest.json")
        test_ids = bundle["split"]["test_ids"]
        y_true = labels_for(records, test_ids)
        y_pred = _bundle_predict(bundle, records, test_ids, config,
                                 features_path=args.features)
        mse, r2 = regress.scores(y_true, y_pred)
        n, label = len(test_ids), bundle["kind"]
    print(json.dumps({"model": label, "n": n, "mse": mse, "r2": r2}))
    if args.out:
        with open(args.out, "w") as fh:
            fh.write("model,regime,n_features,mse,r2,seconds,seed\n")
            fh.write(f"{label},eval,,{mse!r},{r2!r},,\n")
    return 0


def cmd_report(args) -> int:
    runs = Path(args.runs)
    reports = []
    for path in sorted(runs.glob("*.report.json")):
        with open(path) as fh:
            reports.append(TrainReport.from_dict(json.load(fh)))
    if not reports:
        print("warning: no *.report.json files found", file=sys.stderr)
        return 0
    write_scores_csv(reports, args.out)
    print(format_ranking(reports))
    return 0


# -- model bundles ------------------------------------------------------------------

def _save_classical_bundle(path, model, stats: ColumnStats, columns,
                           train_ids, test_ids) -> None:
    doc = {
        "format_version": BUNDLE_VERSION,
        "family": "classical",
        "kind": model.kind,
        "model": regress.model_to_dict(model),
        "preprocess": {
            "columns": list(columns),
            "feature_mean": pack_array(stats.mean),
            "feature_std": pack_array(stats.std),
            "zero_std": stats.zero_std.astype(int).tolist(),
        },
        "split": {"train_ids": list(train_ids), "test_ids": list(test_ids)},
    }
    with open(path, "w") as fh:
        json.dump(doc, fh)
        fh.write("\n")


def _save_network_bundle(path, name, payload, train_ids, test_ids,
                         config: PipelineConfig) -> None:
    model = payload["model"]
    stats = payload["stats"]
    if name.startswith("lstm"):
        inner = lstm_to_dict(model)
        preprocess = {
            "channel_mean": pack_array(stats.channel_mean),
            "channel_std": pack_array(stats.channel_std),
            "label_mean": stats.label_mean,
            "label_std": stats.label_std,
            "frame_steps": config.lstm.frame_steps,
            "framing": config.lstm.framing,
            "resample_points": config.lstm.resample_points,
        }
        family = "lstm"
    else:
        inner = network_to_dict(model)
        preprocess = {
            "pixel_mean": pack_array(stats.pixel_mean),
            "pixel_std": pack_array(stats.pixel_std),
            "label_mean": stats.label_mean,
            "label_std": stats.label_std,
            "image_size": config.nn.image_size,
        }
        family = "network"
    doc = {
        "format_version": BUNDLE_VERSION,
        "family": family,
        "kind": name,
        "model": inner,
        "preprocess": preprocess,
        "split": {"train_ids": list(train_ids), "test_ids": list(test_ids)},
    }
    with open(path, "w") as fh:
        json.dump(doc, fh)
        fh.write("\n")


def _bundle_predict(bundle: dict, records, cycle_ids, config: PipelineConfig,
                    features_path=None) -> np.ndarray:
    from .train import image_tensors, signal_blocks
    family = bundle["family"]
    pre = bundle["preprocess"]
    if family == "classical":
        if not features_path:
            raise MissingFile("evaluating a classical bundle needs --features")
        fm = load_features(features_path)
        name_to_idx = {n: i for i, n in enumerate(fm.manifest.names)}
        fm = fm.select([name_to_idx[n] for n in pre["columns"]])
        fm = fm.rows(cycle_ids)
        stats = ColumnStats(
            mean=unpack_array(pre["feature_mean"]),
            std=unpack_array(pre["feature_std"]),
            zero_std=np.array(pre["zero_std"], dtype=bool),
        )
        X = apply_feature_stats(fm, list(range(len(cycle_ids))), stats)
        model = regress.model_from_dict(bundle["model"])
        return model.predict(X)
    if family == "lstm":
        blocks = signal_blocks(records, cycle_ids, config)
        z = (blocks - unpack_array(pre["channel_mean"])) / unpack_array(pre["channel_std"])
        frames = np.stack([frame_signals(b, pre["frame_steps"], pre["framing"])
                           for b in z])
        model = lstm_from_dict(bundle["model"])
        pred_z = predict_lstm(model, frames)
        return pred_z * pre["label_std"] + pre["label_mean"]
    if family == "network":
        images = image_tensors(records, cycle_ids, config)
        z = (images - unpack_array(pre["pixel_mean"])) / unpack_array(pre["pixel_std"])
        model = network_from_dict(bundle["model"])
        pred_z = model.predict(z)
        return pred_z * pre["label_std"] + pre["label_mean"]
    raise MalformedRecord(f"unknown bundle family {family!r}")


# -- argument parsing -----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="moldline",
        description="Predict molded-part width from in-mold signals and thermal images.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic dataset")
    p.add_argument("--n", type=int, default=204, help="number of cycles (default 204)")
    p.add_argument("--seed", type=int, default=7, help="master seed (default 7)")
    p.add_argument("--noise", type=float, default=None,
                   help="noise level override (default from config, 0.05)")
    p.add_argument("--out", required=True, help="output dataset directory")
    p.add_argument("--config", default=None, help="config JSON (or $MOLDLINE_CONFIG)")

    p = sub.add_parser("extract", help="extract the descriptor matrix")
    p.add_argument("--data", required=True, help="dataset directory")
    p.add_argument("--out", required=True, help="features.csv path")
    p.add_argument("--config", default=None)

    p = sub.add_parser("select", help="recursive feature elimination")
    p.add_argument("--features", required=True, help="features.csv from extract")
    p.add_argument("--labels", required=True, help="dataset manifest.json with labels")
    p.add_argument("--cv", type=int, default=5, help="CV folds (default 5)")
    p.add_argument("--seed", type=int, default=0, help="fold shuffle seed (default 0)")
    p.add_argument("--split-seed", type=int, default=None,
                   help="override the manifest split seed")
    p.add_argument("--all-rows", action="store_true",
                   help="select on all rows instead of the train split")
    p.add_argument("--out-curve", default="rfe_curve.csv")
    p.add_argument("--out-subset", default="subset.json")
    p.add_argument("--out-correlation", default=None, help="optional correlation.csv")
    p.add_argument("--config", default=None)

    p = sub.add_parser("train", help="fit one model and write a report")
    p.add_argument("--model", required=True,
                   help=f"one of {', '.join(list(regress.MODEL_REGISTRY) + list(NETWORK_KINDS))}")
    p.add_argument("--data", required=True, help="dataset directory")
    p.add_argument("--features", default=None, help="features.csv (classical models)")
    p.add_argument("--subset", default=None, help="subset.json from select")
    p.add_argument("--out", required=True, help="model file path")
    p.add_argument("--seed", type=int, default=None, help="master seed (default: config)")
    p.add_argument("--split-seed", type=int, default=None)
    p.add_argument("--iters", type=int, default=None,
                   help="iteration override for neural models")
    p.add_argument("--config", default=None)

    p = sub.add_parser("eval", help="score a model or a predictions file")
    p.add_argument("--model", default=None, help="model bundle from train")
    p.add_argument("--data", default=None, help="dataset directory (with --model)")
    p.add_argument("--features", default=None, help="features.csv (classical bundles)")
    p.add_argument("--pred", default=None, help="predictions CSV (cycle_id,prediction)")
    p.add_argument("--labels", default=None, help="manifest.json with labels (with --pred)")
    p.add_argument("--out", default=None, help="scores.csv path")
    p.add_argument("--config", default=None)

    p = sub.add_parser("report", help="consolidate TrainReports into a ranking")
    p.add_argument("--runs", required=True, help="directory holding *.report.json")
    p.add_argument("--out", default="scores.csv")
    return parser


COMMANDS = {
    "synth": cmd_synth,
    "extract": cmd_extract,
    "select": cmd_select,
    "train": cmd_train,
    "eval": cmd_eval,
    "report": cmd_report,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except MoldlineError as exc:
        payload = {"error": type(exc).__name__, "message": str(exc)}
        if isinstance(exc, BadModelKind):
            payload["valid_kinds"] = exc.valid
        print(json.dumps(payload), file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - the CLI boundary reports everything
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}),
              file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
