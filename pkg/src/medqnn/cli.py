"""Command-line harness for every experiment.

Subcommands: train, eval, noise-sweep, saliency, stats, pca-report.
Machine-readable results go to files only; stderr carries timestamped
progress lines. Exit codes: 0 success, 2 data error, 3 config error,
4 numeric failure.

Every command writes a manifest.json into its output directory last and
atomically, naming the effective configuration, the seed, sha256 of each
input archive, and every artifact it produced, so a run can be repeated
exactly. Flags win over the optional "key = value" config file, which
wins over built-in defaults. Reruns with the same seed and inputs produce
byte-identical result files (manifests differ only in timestamps).
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import data, metrics, models, pca, saliency, stats, training
from .errors import DataError, NumericError

_CONFIG_DEFAULTS = {
    "seed": 0,
    "epochs": 50,
    "batch_size": 32,
    "learning_rate": 1e-3,
    "folds": 3,
    "pca_components": 4,
    "threads": 1,
}

_MODEL_LABELS = {"classical": "C", "dv": "DV", "cv": "CV"}


def log(message: str) -> None:
    stamp = datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")
    print(f"[{stamp}] {message}", file=sys.stderr)


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # config errors exit 3, not argparse's 2
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(3)


def _load_config_file(path: str | None) -> dict:
    if path is None:
        return {}
    values = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    for line_no, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"{path}:{line_no}: expected 'key = value'")
        values[key.strip().replace("-", "_")] = value.strip()
    return values


class ConfigError(ValueError):
    pass


def _resolve_config(args) -> dict:
    """defaults < config file < explicit flags."""
    effective = dict(_CONFIG_DEFAULTS)
    file_values = _load_config_file(getattr(args, "config", None))
    for key, raw in file_values.items():
        if key not in effective:
            raise ConfigError(f"unknown config key {key!r}")
        kind = type(effective[key])
        try:
            effective[key] = kind(raw)
        except ValueError as exc:
            raise ConfigError(f"config key {key!r}: {exc}") from exc
    for key in effective:
        flag = getattr(args, key, None)
        if flag is not None:
            effective[key] = flag
    return effective


def _write_json(path: Path, payload) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _write_manifest(
    out_dir: Path,
    args_list: list[str],
    config: dict,
    checksums: dict,
    artifacts: list[Path],
    started: str,
    metrics_summary: dict,
) -> None:
    manifest = {
        "command": args_list,
        "config": config,
        "seed": config.get("seed"),
        "dataset_checksums": checksums,
        "artifacts": sorted(str(p.relative_to(out_dir)) for p in artifacts),
        "started_at": started,
        "finished_at": datetime.now(timezone.utc).isoformat(),
        "metrics": metrics_summary,
    }
    target = out_dir / "manifest.json"
    tmp = out_dir / "manifest.json.tmp"
    _write_json(tmp, manifest)
    os.replace(tmp, target)


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


def _prepare_out(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_verified_archive(args) -> tuple:
    archive = Path(args.archive)
    if not archive.exists():
        raise DataError(f"archive not found: {archive}")
    if getattr(args, "checksums", None):
        data.verify_checksums(args.checksums, {args.dataset: archive})
        log(f"checksum ok for {archive}")
    return data.load_archive(archive, args.dataset)


def _split_by_name(splits: tuple, name: str):
    return {"train": splits[0], "val": splits[1], "test": splits[2]}[name]


def _metric_row(label_truth, predicted, num_classes) -> dict:
    cm = metrics.confusion_matrix(label_truth, predicted, num_classes)
    acc, _, recall, f1 = metrics.micro_metrics(cm)
    return {
        "acc": acc,
        "precision": metrics.macro_precision(cm),
        "recall": recall,
        "f1": f1,
        "confusion_matrix": cm.counts.tolist(),
    }


def _write_curve_csv(path: Path, curve: metrics.Curve) -> None:
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["x", "y", "threshold"])
        for (x, y), thr in zip(curve.points, curve.thresholds):
            writer.writerow(
                [repr(float(x)), repr(float(y)), "inf" if np.isinf(thr) else repr(float(thr))]
            )


def _evaluate_model(model, pca_model, dataset) -> dict:
    features = pca.transform(pca_model, dataset.flat_images())
    logits, probs = models.predict_batch(model, features)
    predicted = logits.argmax(axis=1)
    row = _metric_row(dataset.labels, predicted, dataset.num_classes)
    row["split"] = dataset.split
    row["model_kind"] = model.kind
    row["dataset"] = dataset.name
    if dataset.num_classes == 2:
        roc = metrics.roc_curve(probs[:, 1], dataset.labels)
        pr = metrics.pr_curve(probs[:, 1], dataset.labels)
        row["auroc"] = roc.area
        row["auprc"] = pr.area
        row["pr_baseline"] = pr.baseline
        row["curves"] = {"roc": roc, "pr": pr}
    else:
        areas = metrics.ovr_areas(probs, dataset.labels)
        row["auroc"] = areas["auroc_mean"]
        row["auprc"] = areas["auprc_mean"]
        row["auroc_per_class"] = areas["auroc_per_class"]
        row["auprc_per_class"] = areas["auprc_per_class"]
        row["curves"] = {
            f"roc_class{cls}": metrics.roc_curve(probs[:, cls], (dataset.labels == cls).astype(int))
            for cls in range(dataset.num_classes)
        } | {
            f"pr_class{cls}": metrics.pr_curve(probs[:, cls], (dataset.labels == cls).astype(int))
            for cls in range(dataset.num_classes)
        }
    row["probs"] = probs
    return row


# --- train -------------------------------------------------------------------

def cmd_train(args, argv: list[str]) -> int:
    config = _resolve_config(args)
    out = _prepare_out(args)
    started = _now()
    splits = _load_verified_archive(args)
    train_split = splits[0]
    log(
        f"training {args.model} on {args.dataset} "
        f"(m={len(train_split)}, classes={train_split.num_classes}, seed={config['seed']})"
    )
    train_config = training.TrainConfig(
        batch_size=config["batch_size"],
        learning_rate=config["learning_rate"],
        epochs=config["epochs"],
        folds=config["folds"],
        seed=config["seed"],
        pca_components=config["pca_components"],
    )
    result = training.cross_validate(
        args.model,
        train_split.flat_images(),
        train_split.labels,
        train_split.num_classes,
        train_config,
        max_workers=config["threads"],
    )

    artifacts = []
    for fold in result.folds:
        model_path = out / f"model_fold{fold.fold_index}.json"
        pca_path = out / f"pca_fold{fold.fold_index}.json"
        models.save_checkpoint(fold.model, model_path)
        pca.save(fold.pca_model, pca_path)
        curve_path = out / f"curves_fold{fold.fold_index}.csv"
        with open(curve_path, "w", newline="", encoding="utf-8") as handle:
            writer = csv.writer(handle)
            writer.writerow(["epoch", "split", "loss", "acc", "p", "r", "f1"])
            for rec in fold.curves:
                writer.writerow(
                    [rec.epoch, rec.split]
                    + [f"{v!r}" for v in (rec.loss, rec.acc, rec.precision, rec.recall, rec.f1)]
                )
        artifacts += [model_path, pca_path, curve_path]
        log(f"fold {fold.fold_index}: val f1 {fold.val_metrics['f1']:.4f}")

    fold_metrics_path = out / "fold_metrics.csv"
    with open(fold_metrics_path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["fold", "split", "acc", "p", "r", "f1"])
        for fold in result.folds:
            for split_name, values in (("train", fold.train_metrics), ("val", fold.val_metrics)):
                writer.writerow(
                    [fold.fold_index, split_name]
                    + [f"{values[k]!r}" for k in ("acc", "precision", "recall", "f1")]
                )
    artifacts.append(fold_metrics_path)

    metrics_payload = {
        "dataset": args.dataset,
        "model_kind": args.model,
        "seed": config["seed"],
        "num_classes": train_split.num_classes,
        "folds": [
            {"fold": f.fold_index, "train": f.train_metrics, "val": f.val_metrics}
            for f in result.folds
        ],
        "summary": result.summary,
        "best_fold": result.best_fold_index,
    }
    metrics_path = out / "metrics.json"
    _write_json(metrics_path, metrics_payload)
    artifacts.append(metrics_path)

    checksums = {args.dataset: data.sha256_of_file(args.archive)}
    _write_manifest(
        out, argv, config, checksums, artifacts, started, result.summary
    )
    log(f"best fold {result.best_fold_index}; artifacts in {out}")
    return 0


# --- eval --------------------------------------------------------------------

def cmd_eval(args, argv: list[str]) -> int:
    config = _resolve_config(args)
    out = _prepare_out(args)
    started = _now()
    splits = _load_verified_archive(args)
    dataset = _split_by_name(splits, args.split)
    model = models.load_checkpoint(args.checkpoint)
    pca_model = pca.load(args.pca)
    log(f"evaluating {model.kind} checkpoint on {args.dataset}/{args.split} (m={len(dataset)})")

    row = _evaluate_model(model, pca_model, dataset)
    curves = row.pop("curves")
    row.pop("probs")
    artifacts = []
    for name, curve in curves.items():
        curve_path = out / f"curve_{name}.csv"
        _write_curve_csv(curve_path, curve)
        artifacts.append(curve_path)
    eval_path = out / "eval.json"
    _write_json(eval_path, row)
    artifacts.append(eval_path)

    if args.dump_state:
        image = dataset.flat_images()[0]
        features = pca.transform(pca_model, image)
        if model.kind == "cv":
            dump = {"kind": "cv"} | models.cv_final_state(model, features).to_json_dict()
        elif model.kind == "dv":
            dump = {
                "kind": "dv",
                "amplitudes": models.dv_final_state(model, features).to_json_list(),
            }
        else:
            dump = {
                "kind": "classical",
                "logits": models.forward(model, features).logits.tolist(),
            }
        dump_path = Path(args.dump_state)
        _write_json(dump_path, dump)
        log(f"state dump written to {dump_path}")

    checksums = {args.dataset: data.sha256_of_file(args.archive)}
    summary = {k: row[k] for k in ("acc", "precision", "recall", "f1", "auroc", "auprc")}
    _write_manifest(out, argv, config, checksums, artifacts, started, summary)
    log(f"acc {row['acc']:.4f}, auroc {row['auroc']:.4f}, auprc {row['auprc']:.4f}")
    return 0


# --- noise sweep ---------------------------------------------------------

def cmd_noise_sweep(args, argv: list[str]) -> int:
    config = _resolve_config(args)
    out = _prepare_out(args)
    started = _now()
    splits = _load_verified_archive(args)
    test = _split_by_name(splits, "test")
    entries = [
        ("cv", args.cv_checkpoint, args.cv_pca),
        ("dv", args.dv_checkpoint, args.dv_pca),
        ("classical", args.classical_checkpoint, args.classical_pca),
    ]
    loaded = []
    for kind, checkpoint, pca_path in entries:
        model = models.load_checkpoint(checkpoint)
        if model.kind != kind:
            raise DataError(f"{checkpoint} holds a {model.kind!r} model, expected {kind!r}")
        loaded.append((kind, model, pca.load(pca_path)))

    grid = data.noise_sweep_grid()
    rows = []
    for sigma in grid:
        noisy = data.inject_gaussian_noise(test, sigma, config["seed"], clip=args.clip)
        for kind, model, pca_model in loaded:
            features = pca.transform(pca_model, noisy.flat_images())
            logits, _ = models.predict_batch(model, features)
            cm = metrics.confusion_matrix(
                noisy.labels, logits.argmax(axis=1), noisy.num_classes
            )
            _, _, _, f1 = metrics.micro_metrics(cm)
            rows.append((sigma, kind, f1))
        log(f"sigma {sigma:.2f} done")

    sweep_path = out / "noise_sweep.csv"
    with open(sweep_path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["sigma", "model_kind", "f1"])
        for sigma, kind, f1 in rows:
            writer.writerow([f"{sigma!r}", kind, f"{f1!r}"])

    checksums = {args.dataset: data.sha256_of_file(args.archive)}
    baseline = {kind: f1 for sigma, kind, f1 in rows if sigma == 0.0}
    _write_manifest(
        out, argv, config, checksums, [sweep_path], started, {"f1_at_sigma0": baseline}
    )
    return 0


# --- saliency ------------------------------------------------------------

def cmd_saliency(args, argv: list[str]) -> int:
    config = _resolve_config(args)
    out = _prepare_out(args)
    started = _now()
    splits = _load_verified_archive(args)
    dataset = _split_by_name(splits, args.split)
    model = models.load_checkpoint(args.checkpoint)
    pca_model = pca.load(args.pca)

    try:
        indices = [int(v) for v in args.indices.split(",") if v.strip() != ""]
    except ValueError as exc:
        raise ConfigError(f"bad --indices: {exc}") from exc
    artifacts = []
    for index in indices:
        if not 0 <= index < len(dataset):
            raise DataError(f"sample index {index} out of range for {len(dataset)} samples")
        image = dataset.flat_images()[index]
        result = saliency.input_gradient_map(model, pca_model, image)
        recon = pca.inverse_transform(pca_model, pca.transform(pca_model, image))
        prefix = out / f"sample{index:05d}"
        recon_path = Path(f"{prefix}_recon.pgm")
        heat_path = Path(f"{prefix}_saliency.pgm")
        saliency.render_pgm(np.clip(recon.reshape(data.IMAGE_SIDE, data.IMAGE_SIDE), 0, 1), recon_path)
        saliency.render_pgm(result.heat, heat_path)
        artifacts += [recon_path, heat_path]
        if args.signed:
            signed_path = Path(f"{prefix}_saliency_signed.pgm")
            saliency.render_pgm(saliency.signed_to_unit(result.signed), signed_path)
            artifacts.append(signed_path)
        sidecar = {
            "predicted_class": result.predicted_class,
            "confidence": result.confidence,
            "true_class": int(dataset.labels[index]),
            "model_kind": model.kind,
        }
        sidecar_path = Path(f"{prefix}.json")
        _write_json(sidecar_path, sidecar)
        artifacts.append(sidecar_path)
        log(
            f"sample {index}: predicted {result.predicted_class} "
            f"(confidence {result.confidence:.3f}), true {sidecar['true_class']}"
        )

    checksums = {args.dataset: data.sha256_of_file(args.archive)}
    _write_manifest(out, argv, config, checksums, artifacts, started, {})
    return 0


# --- stats ---------------------------------------------------------------

def _read_fold_metrics(path: str) -> dict[str, list[float]]:
    """Validation rows of a fold_metrics.csv as metric -> per-fold values."""
    columns = {"acc": [], "p": [], "r": [], "f1": []}
    try:
        with open(path, newline="", encoding="utf-8") as handle:
            for row in csv.DictReader(handle):
                if row["split"] != "val":
                    continue
                for key in columns:
                    columns[key].append(float(row[key]))
    except (OSError, KeyError, TypeError, ValueError) as exc:
        raise DataError(f"cannot parse fold metrics from {path}: {exc}") from exc
    if not columns["f1"]:
        raise DataError(f"{path}: no validation rows")
    return columns


def cmd_stats(args, argv: list[str]) -> int:
    config = _resolve_config(args)
    out = _prepare_out(args)
    started = _now()
    sources = {
        "classical": _read_fold_metrics(args.classical),
        "dv": _read_fold_metrics(args.dv),
        "cv": _read_fold_metrics(args.cv),
    }
    report = {"alpha": args.alpha, "metrics": {}}
    for metric in ("acc", "p", "r", "f1"):
        scores = {
            _MODEL_LABELS[kind]: np.array(sources[kind][metric]) for kind in ("classical", "dv", "cv")
        }
        comparison = stats.compare_models(scores, alpha=args.alpha)
        entry = {
            "models": {
                kind: {
                    "mean": float(np.mean(sources[kind][metric])),
                    "std": float(np.std(sources[kind][metric], ddof=1)),
                }
                for kind in ("classical", "dv", "cv")
            },
            "friedman_chi2": comparison.friedman_chi2,
            "friedman_p": comparison.friedman_p,
            "friedman_h0_retained": comparison.friedman_p >= args.alpha,
            "alpha_corrected": comparison.alpha_corrected,
            "pairwise": {
                pair.name: {
                    "W": pair.w_statistic,
                    "p": pair.p_value,
                    "h0_retained": pair.p_value >= comparison.alpha_corrected,
                }
                for pair in comparison.pairwise
            },
        }
        report["metrics"][metric] = entry
        report["alpha_corrected"] = comparison.alpha_corrected
        verdict = "retained" if entry["friedman_h0_retained"] else "rejected"
        log(f"{metric}: Friedman chi2 {entry['friedman_chi2']:.4f}, p {entry['friedman_p']:.4f}, H0 {verdict}")
    report_path = out / "stats.json"
    _write_json(report_path, report)
    _write_manifest(out, argv, config, {}, [report_path], started, {})
    return 0


# --- pca report ------------------------------------------------------------

def cmd_pca_report(args, argv: list[str]) -> int:
    config = _resolve_config(args)
    out = _prepare_out(args)
    started = _now()
    splits = _load_verified_archive(args)
    train_split = splits[0]
    model = pca.fit(train_split.flat_images(), config["pca_components"])
    ratios = model.explained_variance_ratio
    report = {
        "dataset": args.dataset,
        "num_samples": len(train_split),
        "input_dim": model.input_dim,
        "k": model.k,
        "explained_variance_ratio": ratios.tolist(),
        "cumulative_variance": float(ratios.sum()),
    }
    report_path = out / "pca_report.json"
    _write_json(report_path, report)
    csv_path = out / "pca_report.csv"
    with open(csv_path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["component", "ratio", "cumulative"])
        running = 0.0
        for i, ratio in enumerate(ratios):
            running += float(ratio)
            writer.writerow([i + 1, f"{float(ratio)!r}", f"{running!r}"])
    checksums = {args.dataset: data.sha256_of_file(args.archive)}
    _write_manifest(out, argv, config, checksums, [report_path, csv_path], started, report)
    log(f"{args.dataset}: cumulative variance at k={model.k} is {report['cumulative_variance']:.4f}")
    return 0


# --- parser ----------------------------------------------------------------

def _add_common(sub, archive: bool = True) -> None:
    sub.add_argument("--out", required=True, help="output directory")
    sub.add_argument("--config", help="optional 'key = value' config file")
    sub.add_argument("--seed", type=int, default=None)
    if archive:
        sub.add_argument("--archive", required=True, help="path to the dataset .npz archive")
        sub.add_argument("--dataset", required=True, help="dataset name, e.g. pneumoniamnist")
        sub.add_argument("--checksums", help="verify archive against this sha256 manifest")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="medqnn", description=__doc__)
    subs = parser.add_subparsers(dest="command", required=True)

    p_train = subs.add_parser("train", help="cross-validated training run")
    _add_common(p_train)
    p_train.add_argument("--model", required=True, choices=models.KINDS)
    p_train.add_argument("--epochs", type=int, default=None)
    p_train.add_argument("--batch-size", dest="batch_size", type=int, default=None)
    p_train.add_argument("--learning-rate", dest="learning_rate", type=float, default=None)
    p_train.add_argument("--folds", type=int, default=None)
    p_train.add_argument("--pca-components", dest="pca_components", type=int, default=None)
    p_train.add_argument("--threads", type=int, default=None)
    p_train.set_defaults(func=cmd_train)

    p_eval = subs.add_parser("eval", help="evaluate a checkpoint on a split")
    _add_common(p_eval)
    p_eval.add_argument("--checkpoint", required=True)
    p_eval.add_argument("--pca", required=True)
    p_eval.add_argument("--split", default="test", choices=("train", "val", "test"))
    p_eval.add_argument("--dump-state", dest="dump_state", help="write a debug state dump here")
    p_eval.set_defaults(func=cmd_eval)

    p_sweep = subs.add_parser("noise-sweep", help="test-set F1 over the noise grid")
    _add_common(p_sweep)
    p_sweep.add_argument("--cv-checkpoint", required=True)
    p_sweep.add_argument("--cv-pca", required=True)
    p_sweep.add_argument("--dv-checkpoint", required=True)
    p_sweep.add_argument("--dv-pca", required=True)
    p_sweep.add_argument("--classical-checkpoint", required=True)
    p_sweep.add_argument("--classical-pca", required=True)
    p_sweep.add_argument("--clip", action="store_true", help="clip noisy pixels back to [0, 1]")
    p_sweep.set_defaults(func=cmd_noise_sweep)

    p_sal = subs.add_parser("saliency", help="attribution heatmaps for chosen samples")
    _add_common(p_sal)
    p_sal.add_argument("--checkpoint", required=True)
    p_sal.add_argument("--pca", required=True)
    p_sal.add_argument("--split", default="test", choices=("train", "val", "test"))
    p_sal.add_argument("--indices", required=True, help="comma-separated sample indices")
    p_sal.add_argument("--signed", action="store_true", help="also write signed maps")
    p_sal.set_defaults(func=cmd_saliency)

    p_stats = subs.add_parser("stats", help="Friedman / Wilcoxon comparison of three models")
    _add_common(p_stats, archive=False)
    p_stats.add_argument("--classical", required=True, help="fold_metrics.csv of the classical run")
    p_stats.add_argument("--dv", required=True, help="fold_metrics.csv of the DV run")
    p_stats.add_argument("--cv", required=True, help="fold_metrics.csv of the CV run")
    p_stats.add_argument("--alpha", type=float, default=0.05)
    p_stats.set_defaults(func=cmd_stats)

    p_pca = subs.add_parser("pca-report", help="explained-variance table for a dataset")
    _add_common(p_pca)
    p_pca.add_argument("--k", dest="pca_components", type=int, default=None)
    p_pca.set_defaults(func=cmd_pca_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    argv_list = list(argv) if argv is not None else sys.argv[1:]
    try:
        return args.func(args, argv_list)
    except DataError as exc:
        log(f"data error: {exc}")
        return 2
    except ConfigError as exc:
        log(f"config error: {exc}")
        return 3
    except NumericError as exc:
        log(f"numeric failure: {exc}")
        return 4


if __name__ == "__main__":
    sys.exit(main())
