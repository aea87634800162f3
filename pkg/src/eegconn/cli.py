"""Command-line pipeline: extract -> train -> eval -> predict/report.

Every stage reads a key=value config file and persists its artifacts under
the configured output directory, so later stages (and later sessions) can
resume from disk.  All randomness flows from the single master seed in the
config (overridable with --seed).
"""

from __future__ import annotations

import argparse
import json
import sys
import traceback
from pathlib import Path

import numpy as np

from .config import RunConfig, band_filter_list, model_kind_list, parse_config
from .container import read_container, write_container
from .eeg_io import CohortManifest, load_manifest, load_recording, standardize
from .errors import EegConnError, ValidationError
from .netmetrics import cn_features
from .nn.network import MultiBranchNetwork, Network
from .nn.serialize import load_bundle, save_bundle
from .pipeline import (
    DOMAINS,
    EnsembleModel,
    ExperimentRunner,
    FittedModel,
    FoldPlan,
    MetricsReport,
    ModelSpec,
    apply_input_stats,
    band_indices,
    evaluate,
    predict_with_core,
    time_classification,
)
from .reporting import (
    ascii_heatmap,
    format_latency_table,
    latency_table_csv,
    learning_curve_svg,
    write_pgm,
)
from .spectral import BandSpec, band_pdc
from .svm import LinearSvm
from .var_model import fit_var, var_feature_tensor

DOMAIN_BY_FEATURE_KIND = {"VAR": "var", "PDC": "pdc", "CN": "cn"}
FEATURE_KIND_BY_DOMAIN = {v: k for k, v in DOMAIN_BY_FEATURE_KIND.items()}


def _safe_name(sid: str) -> str:
    return "".join(c if (c.isalnum() or c in "-_") else "_" for c in sid)


def _features_dir(cfg: RunConfig) -> Path:
    return Path(cfg.output_dir) / "features"


def _models_dir(cfg: RunConfig) -> Path:
    return Path(cfg.output_dir) / "models"


def _curves_dir(cfg: RunConfig) -> Path:
    return Path(cfg.output_dir) / "curves"


def _report_dir(cfg: RunConfig) -> Path:
    return Path(cfg.output_dir) / "report"


def _load_manifest(cfg: RunConfig) -> CohortManifest:
    if not cfg.manifest:
        raise ValidationError("config is missing the 'manifest' key")
    return load_manifest(cfg.manifest)


def _expand_result_ids(kinds: list[str]) -> list[tuple[str, str, str]]:
    """(result_id, kind, feature_set) triples; the SVM expands to four rows."""
    out = []
    for kind in kinds:
        if kind == "svm_linear":
            for feat in (*DOMAINS, "all"):
                out.append((f"svm_{feat}", kind, feat))
        else:
            out.append((kind, kind, "all"))
    return out


# -- extract -----------------------------------------------------------------


def cmd_extract(cfg: RunConfig) -> int:
    manifest = _load_manifest(cfg)
    base = Path(cfg.manifest).parent
    feat_dir = _features_dir(cfg)
    feat_dir.mkdir(parents=True, exist_ok=True)
    bands = BandSpec()
    failures = 0
    for entry in manifest.entries:
        sid = entry.subject_id
        try:
            rec = load_recording(
                base / entry.path, cfg.data_format, channels=cfg.channels,
                rate=cfg.rate, subject_id=sid, label=entry.label,
            )
            if cfg.standardize:
                rec = standardize(rec)
            model = fit_var(rec, cfg.var_order)
            var_t = var_feature_tensor(model)
            pdc = band_pdc(model, bands, cfg.band_grid_step, cfg.exclude_self)
            cn = cn_features(pdc)
            stem = _safe_name(sid)
            write_container(feat_dir / f"{stem}_var.feat", "VAR", var_t, sid, entry.label)
            write_container(feat_dir / f"{stem}_pdc.feat", "PDC", pdc.values, sid,
                            entry.label, bands=bands)
            write_container(feat_dir / f"{stem}_cn.feat", "CN", cn.values, sid,
                            entry.label, bands=bands)
            print(f"{sid}: var={'x'.join(map(str, var_t.shape))} "
                  f"pdc={'x'.join(map(str, pdc.values.shape))} "
                  f"cn={'x'.join(map(str, cn.values.shape))} ok")
        except Exception as exc:  # noqa: BLE001 - per-subject isolation is the contract
            failures += 1
            print(f"{sid}: FAILED ({exc})", file=sys.stderr)
    print(f"extracted {len(manifest) - failures}/{len(manifest)} subjects")
    return 1 if failures else 0


def load_features(cfg: RunConfig, manifest: CohortManifest) -> tuple[dict, tuple[str, ...]]:
    """Read per-subject containers back into {sid: {domain: array}}."""
    feat_dir = _features_dir(cfg)
    features: dict[str, dict[str, np.ndarray]] = {}
    band_names: tuple[str, ...] = ()
    for entry in manifest.entries:
        stem = _safe_name(entry.subject_id)
        per = {}
        for domain in DOMAINS:
            path = feat_dir / f"{stem}_{domain}.feat"
            if not path.exists():
                raise FileNotFoundError(
                    f"missing {domain} features for {entry.subject_id!r}; run extract first"
                )
            values, header = read_container(path)
            if header["kind"] != FEATURE_KIND_BY_DOMAIN[domain]:
                raise ValidationError(f"{path}: holds {header['kind']}, expected "
                                      f"{FEATURE_KIND_BY_DOMAIN[domain]}")
            per[domain] = values
            if domain == "pdc" and header.get("bands"):
                band_names = tuple(b[0] for b in header["bands"])
        features[entry.subject_id] = per
    return features, band_names or BandSpec().names


def _spec_from_features(cfg: RunConfig, features: dict, band_idx) -> ModelSpec:
    first = next(iter(features.values()))
    n, _, lags = first["var"].shape
    n_bands = first["pdc"].shape[2] if band_idx is None else len(band_idx)
    return ModelSpec(
        kind="cnn2d_var", channels=n, lags=lags, n_bands=n_bands,
        dropout=cfg.dropout, pool2d=cfg.pool2d, epochs=cfg.epochs,
        learning_rate=cfg.learning_rate, lr_decay=cfg.lr_decay,
        batch_size=cfg.batch_size,
    )


# -- train -------------------------------------------------------------------


def _bundle_entries(fitted: FittedModel) -> tuple[dict, dict]:
    core = fitted.core
    extra: dict = {}
    if isinstance(core, (Network, MultiBranchNetwork)):
        entries: dict[str, object] = {"main": core}
    elif isinstance(core, EnsembleModel):
        entries = {f"member_{d}": net for d, net in core.members.items()}
        extra["fusion_mode"] = core.mode
        if core.stage2 is not None:
            entries["stage2"] = core.stage2
    elif isinstance(core, LinearSvm):
        entries = {"svm": core.param_arrays()}
    else:
        raise ValidationError(f"cannot bundle object of type {type(core).__name__}")
    if fitted.stats:
        for domain, (mean, sd) in fitted.stats.items():
            entries[f"stats_{domain}"] = {"mean": mean, "sd": sd}
    extra["standardized_inputs"] = bool(fitted.stats)
    return entries, extra


def core_from_bundle(entries: dict, meta: dict) -> FittedModel:
    kind = meta["model_kind"]
    stats = None
    if meta.get("standardized_inputs"):
        stats = {}
        for domain in DOMAINS:
            rec = entries.get(f"stats_{domain}")
            if rec is not None:
                stats[domain] = (rec["mean"], rec["sd"])
    if kind == "svm_linear":
        return FittedModel(core=LinearSvm.from_param_arrays(entries["svm"]), stats=None)
    if kind in ("fusion_score", "fusion_decision"):
        members = {d: entries[f"member_{d}"] for d in DOMAINS}
        core = EnsembleModel(mode=meta["fusion_mode"], members=members,
                             stage2=entries.get("stage2"))
        return FittedModel(core=core, stats=stats)
    return FittedModel(core=entries["main"], stats=stats)


def _write_curve_csv(path: Path, curve) -> None:
    lines = ["epoch,train_loss,val_loss"]
    for i, (tr, vl) in enumerate(curve):
        lines.append(f"{i},{tr!r},{vl!r}")
    path.write_text("\n".join(lines) + "\n")


def _curve_filename(kind: str, role: str, fold: int) -> str:
    if role in DOMAINS:
        return f"domain_{role}_fold{fold}.csv"
    if role == "main":
        return f"{kind}_fold{fold}.csv"
    return f"{kind}_{role}_fold{fold}.csv"


def write_fold_plan(path: Path, plan: FoldPlan, ordered_ids: list[str]) -> None:
    lines = ["subject_id,fold"]
    for sid in ordered_ids:
        lines.append(f"{sid},{plan.assignments[sid]}")
    path.write_text("\n".join(lines) + "\n")


def read_fold_plan(path: Path) -> FoldPlan:
    lines = path.read_text().splitlines()
    if not lines or lines[0] != "subject_id,fold":
        raise ValidationError(f"{path}: not a fold plan file")
    assignments = {}
    for line in lines[1:]:
        sid, _, fold = line.partition(",")
        assignments[sid] = int(fold)
    return FoldPlan(k=max(assignments.values()) + 1, assignments=assignments, seed=-1)


def cmd_train(cfg: RunConfig) -> int:
    manifest = _load_manifest(cfg)
    features, band_names = load_features(cfg, manifest)
    band_idx = band_indices(band_filter_list(cfg) or None, band_names)
    spec = _spec_from_features(cfg, features, band_idx)
    runner = ExperimentRunner(
        features, manifest, spec, master_seed=cfg.seed, k=cfg.folds,
        val_fraction=cfg.val_fraction, positive_class=cfg.positive_class,
        band_idx=band_idx, svm_l2=cfg.svm_l2,
        svm_learning_rate=cfg.svm_learning_rate, svm_steps=cfg.svm_steps,
        standardize_inputs=cfg.standardize_features,
    )
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_fold_plan(out / "folds.csv", runner.plan, manifest.subject_ids())
    models_dir = _models_dir(cfg)
    curves_dir = _curves_dir(cfg)
    models_dir.mkdir(parents=True, exist_ok=True)
    curves_dir.mkdir(parents=True, exist_ok=True)

    results = runner.run(model_kind_list(cfg))
    for result in results:
        for fold_outcome, fitted in zip(result.folds, result.models):
            fold = fold_outcome.fold
            entries, extra_meta = _bundle_entries(fitted)
            meta = {
                "model_kind": result.kind,
                "feature": result.feature_label,
                "feature_set": result.feature_label if result.kind == "svm_linear" else "all",
                "class_names": list(manifest.class_names),
                "positive_class": cfg.positive_class,
                "band_filter": band_filter_list(cfg),
                "fold": fold,
                **extra_meta,
            }
            save_bundle(models_dir / f"{result.result_id}_fold{fold}.model", entries, meta)
            for role, curve in fold_outcome.curves.items():
                _write_curve_csv(curves_dir / _curve_filename(result.result_id, role, fold), curve)
        print(f"{result.result_id}: trained {len(result.folds)} folds, "
              f"modified accuracy {result.report.mean['modified_accuracy']:.2f}% "
              f"(+/-{result.report.sd['modified_accuracy']:.2f})")
    return 0


# -- eval ----------------------------------------------------------------------


def cmd_eval(cfg: RunConfig) -> int:
    manifest = _load_manifest(cfg)
    features, band_names = load_features(cfg, manifest)
    plan = read_fold_plan(Path(cfg.output_dir) / "folds.csv")
    labels = manifest.labels()
    ordered = manifest.subject_ids()
    models_dir = _models_dir(cfg)
    rows = []
    failures = 0
    for result_id, kind, feature_set in _expand_result_ids(model_kind_list(cfg)):
        fold_metrics = []
        feature_label = feature_set
        band_idx = None
        try:
            for fold in range(plan.k):
                path = models_dir / f"{result_id}_fold{fold}.model"
                entries, meta = load_bundle(path)
                core = core_from_bundle(entries, meta)
                band_idx = band_indices(meta.get("band_filter") or None, band_names)
                feature_label = meta.get("feature", feature_set)
                test_ids = plan.test_ids(fold, ordered)
                bits, _ = predict_with_core(core, kind, features, test_ids,
                                            band_idx, feature_set)
                class_names = tuple(meta["class_names"])
                predicted = [class_names[int(b)] for b in bits]
                fold_metrics.append(
                    evaluate(predicted, [labels[s] for s in test_ids], cfg.positive_class)
                )
        except Exception as exc:  # noqa: BLE001 - per-model isolation, nonzero exit below
            failures += 1
            print(f"{result_id}: FAILED ({exc})", file=sys.stderr)
            continue
        report = MetricsReport.from_folds(fold_metrics)
        rows.append({
            "model": result_id,
            "classifier": kind,
            "feature": feature_label,
            **report.to_dict(),
        })
        print(f"{result_id}: acc {report.mean['accuracy']:.2f}% "
              f"sens {report.mean['sensitivity']:.2f}% "
              f"spec {report.mean['specificity']:.2f}% "
              f"modified {report.mean['modified_accuracy']:.2f}%")
    payload = {
        "folds": plan.k,
        "positive_class": cfg.positive_class,
        "seed": cfg.seed,
        "rows": rows,
    }
    out = Path(cfg.output_dir) / "metrics.json"
    out.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    print(f"wrote {out}")
    return 1 if failures else 0


# -- predict -------------------------------------------------------------------


def cmd_predict(cfg: RunConfig, model_path: str, input_paths: list[str]) -> int:
    entries, meta = load_bundle(model_path)
    core = core_from_bundle(entries, meta)
    kind = meta["model_kind"]
    per_domain: dict[str, np.ndarray] = {}
    sid = None
    for p in input_paths:
        values, header = read_container(p)
        domain = DOMAIN_BY_FEATURE_KIND[header["kind"]]
        per_domain[domain] = values
        if sid is None:
            sid = header["subject_id"]
        elif sid != header["subject_id"]:
            raise ValidationError(
                f"inputs mix subjects {sid!r} and {header['subject_id']!r}"
            )
    if sid is None:
        raise ValidationError("predict needs at least one --input feature container")
    features = {sid: per_domain}
    band_names = BandSpec().names
    band_idx = band_indices(meta.get("band_filter") or None, band_names)
    bits, probs = predict_with_core(core, kind, features, [sid], band_idx,
                                    meta.get("feature_set", "all"))
    class_names = tuple(meta["class_names"])
    result = {
        "subject_id": sid,
        "label": class_names[int(bits[0])],
        "probabilities": {cls: float(p) for cls, p in zip(class_names, probs[0])},
    }
    print(json.dumps(result, indent=2, sort_keys=True))
    return 0


# -- report --------------------------------------------------------------------


def _report_curves(cfg: RunConfig, report_dir: Path) -> int:
    curves_dir = _curves_dir(cfg)
    count = 0
    for csv_path in sorted(curves_dir.glob("*.csv")):
        lines = csv_path.read_text().splitlines()[1:]
        curve = []
        for line in lines:
            _, tr, vl = line.split(",")
            curve.append((float(tr), float(vl)))
        if not curve:
            continue
        svg = learning_curve_svg(curve, csv_path.stem)
        (report_dir / f"{csv_path.stem}.svg").write_text(svg)
        count += 1
    return count


def _report_feature_maps(cfg: RunConfig, manifest, features, band_names, report_dir: Path) -> int:
    sid = cfg.report_subject or manifest.subject_ids()[0]
    if sid not in features:
        raise ValidationError(f"report subject {sid!r} has no extracted features")
    models_dir = _models_dir(cfg)
    chosen = None
    for kind in ("cnn2d_pdc", "cnn2d_var"):
        path = models_dir / f"{kind}_fold0.model"
        if path.exists():
            chosen = (kind, path)
            break
    if chosen is None:
        return 0
    kind, path = chosen
    entries, meta = load_bundle(path)
    fitted = core_from_bundle(entries, meta)
    net: Network = fitted.core
    band_idx = band_indices(meta.get("band_filter") or None, band_names)
    domain = "pdc" if kind == "cnn2d_pdc" else "var"
    x = features[sid][domain][None]
    if band_idx is not None and domain == "pdc":
        x = x[..., band_idx]
    if fitted.stats is not None:
        x = apply_input_stats(x, fitted.stats.get(domain))
    record: list[np.ndarray] = []
    net.forward(x, train=False, record=record)
    conv_post_relu = [
        i + 1
        for i, layer in enumerate(net.layers)
        if layer.kind.startswith("conv") and i + 1 < len(net.layers)
        and net.layers[i + 1].kind == "relu"
    ]
    written = 0
    for li, rec_idx in enumerate(conv_post_relu[:2], start=1):
        maps = record[rec_idx][0]  # (H, W, R)
        layer_dir = report_dir / "featmaps" / f"layer{li}"
        layer_dir.mkdir(parents=True, exist_ok=True)
        for r in range(maps.shape[-1]):
            img = maps[:, :, r]
            write_pgm(layer_dir / f"map_{r:03d}.pgm", img,
                      comment=f"{kind} {sid} layer{li} map{r}")
            if cfg.report_ascii:
                (layer_dir / f"map_{r:03d}.txt").write_text(ascii_heatmap(img) + "\n")
            written += 1
    print(f"feature maps for subject {sid} from {kind}: {written} heatmaps")
    return written


def _report_latency(cfg: RunConfig, features, band_names, manifest, report_dir: Path) -> list[dict]:
    sid = cfg.report_subject or manifest.subject_ids()[0]
    models_dir = _models_dir(cfg)
    rows = []
    for result_id, kind, feature_set in _expand_result_ids(model_kind_list(cfg)):
        path = models_dir / f"{result_id}_fold0.model"
        if not path.exists():
            continue
        entries, meta = load_bundle(path)
        core = core_from_bundle(entries, meta)
        band_idx = band_indices(meta.get("band_filter") or None, band_names)
        ms = time_classification(core, kind, features, sid,
                                 repetitions=cfg.latency_repetitions,
                                 band_idx=band_idx, feature_set=feature_set)
        rows.append({
            "model": result_id,
            "feature": meta.get("feature", feature_set),
            "mean_ms": ms,
            "repetitions": cfg.latency_repetitions,
        })
    if rows:
        (report_dir / "latency.csv").write_text(latency_table_csv(rows))
        print(format_latency_table(rows))
    return rows


def cmd_report(cfg: RunConfig) -> int:
    manifest = _load_manifest(cfg)
    features, band_names = load_features(cfg, manifest)
    report_dir = _report_dir(cfg)
    report_dir.mkdir(parents=True, exist_ok=True)
    n_curves = _report_curves(cfg, report_dir)
    print(f"learning-curve SVGs: {n_curves}")
    _report_feature_maps(cfg, manifest, features, band_names, report_dir)
    _report_latency(cfg, features, band_names, manifest, report_dir)
    return 0


# -- entry point ---------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="eegconn",
        description="EEG connectivity feature extraction and two-group CNN classification",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, desc in (
        ("extract", "compute VAR/PDC/CN feature containers per subject"),
        ("train", "train the configured classifiers with k-fold cross-validation"),
        ("eval", "evaluate saved models and write metrics.json"),
        ("predict", "classify one subject from feature containers"),
        ("report", "emit learning-curve SVGs, feature-map heatmaps, latency table"),
    ):
        p = sub.add_parser(name, help=desc)
        p.add_argument("--config", required=True, help="key=value run configuration file")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        if name == "predict":
            p.add_argument("--model", required=True, help="trained model file")
            p.add_argument("--input", required=True, action="append",
                           help="feature container (repeat for fusion models)")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    cfg = parse_config(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    try:
        if args.command == "extract":
            return cmd_extract(cfg)
        if args.command == "train":
            return cmd_train(cfg)
        if args.command == "eval":
            return cmd_eval(cfg)
        if args.command == "predict":
            return cmd_predict(cfg, args.model, args.input)
        if args.command == "report":
            return cmd_report(cfg)
    except EegConnError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception:  # noqa: BLE001 - last-resort diagnostics for the CLI
        traceback.print_exc()
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
