"""Command-line pipeline: generate, extract, train, evaluate, explain, report.

Exit codes: 0 success, 2 usage error, 3 input/validation error, 4 runtime failure.
"""

from __future__ import annotations

import argparse
import csv
import glob
import json
import logging
import os
import sys
from dataclasses import dataclass, field, fields
from typing import List, Optional

import numpy as np

from . import charts
from .bundle import BundleError, ModelBundle, dataset_fingerprint, load_model, save_model
from .datagen import (
    DEFAULT_KERNELS_PER_CLASS,
    DEFAULT_ROWS,
    fit_generator,
    load_generator,
    sample_dataset,
    save_generator,
    simulate_event_log,
)
from .evaluation import best_mcc_threshold, evaluate_scores
from .explain import (
    DEFAULT_BACKGROUND_ROWS,
    DEFAULT_GRID_POINTS,
    build_grid,
    exact_shapley,
    ice_curve,
    mc_shapley,
    pdp_curve,
    shap_global_summary,
    subsample_background,
    with_observed,
)
from .neural_net import NetworkConfig, predict, train
from .process_data import (
    FEATURE_NAMES,
    DataError,
    LabeledDataset,
    apply_standardizer,
    extract_features,
    fit_standardizer,
    load_event_log_files,
    read_dataset_file,
    stratified_split,
    write_dataset_file,
    write_event_log,
)

log = logging.getLogger("procqx")

EXIT_OK, EXIT_USAGE, EXIT_INPUT, EXIT_RUNTIME = 0, 2, 3, 4
SEED_ENV = "PROCQX_SEED"
PICK_CATEGORIES = ("tp", "tn", "fp", "fn")


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    seed: int = 0
    rows: int = DEFAULT_ROWS
    kernels_per_class: int = DEFAULT_KERNELS_PER_CLASS
    seed_cases: int = 600
    split: List[float] = field(default_factory=lambda: [0.6, 0.2, 0.2])
    network: dict = field(default_factory=dict)
    samples: int = 0  # 0 selects exact Shapley
    grid_points: int = DEFAULT_GRID_POINTS
    background_rows: int = DEFAULT_BACKGROUND_ROWS
    summary_rows: int = 50
    pdp_rows: int = 256

    def validate(self) -> None:
        positive = ("rows", "kernels_per_class", "seed_cases", "background_rows", "pdp_rows")
        for name in positive:
            if not isinstance(getattr(self, name), int) or getattr(self, name) < 1:
                raise ConfigError(f"invalid config field {name!r}: must be a positive integer")
        for name in ("samples", "summary_rows"):
            if not isinstance(getattr(self, name), int) or getattr(self, name) < 0:
                raise ConfigError(f"invalid config field {name!r}: must be a nonnegative integer")
        if not isinstance(self.grid_points, int) or self.grid_points < 2:
            raise ConfigError("invalid config field 'grid_points': must be an integer >= 2")
        if not isinstance(self.seed, int):
            raise ConfigError("invalid config field 'seed': must be an integer")
        if (not isinstance(self.split, list) or len(self.split) != 3
                or any(not isinstance(r, (int, float)) or r <= 0 for r in self.split)
                or abs(sum(self.split) - 1.0) > 1e-9):
            raise ConfigError("invalid config field 'split': need three positive ratios summing to 1")
        if not isinstance(self.network, dict):
            raise ConfigError("invalid config field 'network': must be an object")
        try:
            self.network_config()
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"invalid config field 'network': {exc}") from None

    def network_config(self) -> NetworkConfig:
        return NetworkConfig.from_dict({**self.network, "seed": self.seed})


def load_run_config(args) -> RunConfig:
    raw = {}
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{args.config}: invalid JSON ({exc})") from None
        if not isinstance(raw, dict):
            raise ConfigError(f"{args.config}: config must be a JSON object")
    known = {f.name for f in fields(RunConfig)}
    unknown = sorted(set(raw) - known)
    if unknown:
        raise ConfigError(f"invalid config field {unknown[0]!r}: unknown setting")
    cfg = RunConfig(**raw)

    # flags win over the file; the environment only fills in a missing seed
    if args.seed is not None:
        cfg.seed = args.seed
    elif "seed" not in raw and os.environ.get(SEED_ENV):
        try:
            cfg.seed = int(os.environ[SEED_ENV])
        except ValueError:
            raise ConfigError(f"invalid {SEED_ENV}={os.environ[SEED_ENV]!r}: must be an integer") from None
    for name in ("rows", "kernels_per_class", "samples", "grid_points"):
        value = getattr(args, name, None)
        if value is not None:
            setattr(cfg, name, value)
    if getattr(args, "max_epochs", None) is not None:
        cfg.network = {**cfg.network, "max_epochs": args.max_epochs}
    cfg.validate()
    return cfg


# ---------------------------------------------------------------------------
# file helpers


def _require(path: Optional[str], flag: str) -> str:
    if not path:
        raise ConfigError(f"{flag} is required")
    if not os.path.exists(path):
        raise FileNotFoundError(f"{flag}: no such file {path!r}")
    return path


def _out_dir(args) -> str:
    os.makedirs(args.out, exist_ok=True)
    return args.out


def _write_json(path: str, doc) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


def _write_csv(path: str, header, rows, comments=()) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        for line in comments:
            fh.write(f"# {line}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(v) if isinstance(v, float) else v for v in row])


def _read_csv(path: str):
    meta, body = {}, []
    with open(path, newline="", encoding="utf-8") as fh:
        for line in fh:
            if line.startswith("#"):
                key, _, value = line[1:].strip().partition(":")
                meta[key.strip()] = value.strip()
            else:
                body.append(line)
    rows = list(csv.reader(body))
    return meta, rows[0], rows[1:]


def _load_dataset(args) -> LabeledDataset:
    if args.dataset:
        return read_dataset_file(_require(args.dataset, "--dataset"))
    if args.events or args.cases:
        return extract_features(load_event_log_files(_require(args.events, "--events"),
                                                     _require(args.cases, "--cases")))
    raise ConfigError("--dataset or --events/--cases is required")


# ---------------------------------------------------------------------------
# commands


def cmd_generate(args, cfg: RunConfig) -> None:
    out = _out_dir(args)
    if args.generator:
        gen = load_generator(_require(args.generator, "--generator"))
    else:
        if args.dataset or args.events or args.cases:
            seed_data = _load_dataset(args)
        else:
            log.info("no seed data given; simulating %d MES cases", cfg.seed_cases)
            seed_log = simulate_event_log(cfg.seed_cases, cfg.seed)
            with open(os.path.join(out, "seed_events.csv"), "w", newline="", encoding="utf-8") as ev, \
                    open(os.path.join(out, "seed_cases.csv"), "w", newline="", encoding="utf-8") as cs:
                write_event_log(seed_log, ev, cs)
            seed_data = extract_features(seed_log)
        gen = fit_generator(seed_data, cfg.kernels_per_class, cfg.seed)
    save_generator(gen, os.path.join(out, "generator.json"))
    data = sample_dataset(gen, cfg.rows, cfg.seed)
    write_dataset_file(data, os.path.join(out, "dataset.csv"))
    log.info("wrote %d rows to %s", len(data), os.path.join(out, "dataset.csv"))


def cmd_extract(args, cfg: RunConfig) -> None:
    out = _out_dir(args)
    data = extract_features(load_event_log_files(_require(args.events, "--events"), _require(args.cases, "--cases")))
    write_dataset_file(data, os.path.join(out, "dataset.csv"))
    log.info("extracted %d cases", len(data))


def cmd_train(args, cfg: RunConfig) -> None:
    out = _out_dir(args)
    data = _load_dataset(args)
    train_set, valid_set, _ = stratified_split(data, cfg.split, cfg.seed)
    params = fit_standardizer(train_set)
    net_cfg = cfg.network_config()
    net, history = train(net_cfg, apply_standardizer(params, train_set), apply_standardizer(params, valid_set),
                         log=lambda r: log.debug("epoch %d auroc %.4f loss %.4f", r.epoch, r.valid_auroc, r.train_loss))
    valid_scores = predict(net, apply_standardizer(params, valid_set))
    threshold, _ = best_mcc_threshold(valid_scores, valid_set.labels)
    bundle = ModelBundle(
        network=net, config=net_cfg, standardizer=params, history=history, threshold=threshold,
        feature_names=data.feature_names, split_ratios=tuple(cfg.split), split_seed=cfg.seed,
        dataset_sha256=dataset_fingerprint(data),
        background=subsample_background(train_set, cfg.background_rows, cfg.seed),
    )
    save_model(bundle, os.path.join(out, "model.json"))
    _write_csv(os.path.join(out, "history.csv"), ["epoch", "valid_auroc", "train_loss"],
               [(r.epoch, r.valid_auroc, r.train_loss) for r in history.rounds])
    log.info("trained %d epochs (best %d, AUROC %.4f, stopped early: %s)", len(history.rounds),
             history.best_epoch, history.best_auroc, history.stopped_early)


def _select_split(bundle: ModelBundle, data: LabeledDataset, which: str):
    if which == "all":
        return data, "all"
    if which == "auto" and bundle.dataset_sha256 != dataset_fingerprint(data):
        return data, "all"
    if bundle.dataset_sha256 != dataset_fingerprint(data):
        raise ConfigError(f"--split {which} needs the dataset the model was trained on")
    parts = dict(zip(("train", "valid", "test"), stratified_split(data, bundle.split_ratios, bundle.split_seed)))
    which = "test" if which == "auto" else which
    return parts[which], which


def cmd_evaluate(args, cfg: RunConfig) -> None:
    out = _out_dir(args)
    bundle = load_model(_require(args.model, "--model"))
    data = _load_dataset(args)
    if not data.is_labeled:
        raise DataError("evaluate needs a labeled dataset")
    subset, which = _select_split(bundle, data, args.split)
    scores = bundle.predict(subset)
    res = evaluate_scores(scores, subset.labels)
    doc = res.to_dict()
    doc["split"] = which
    doc["model_threshold"] = bundle.threshold
    _write_json(os.path.join(out, "metrics.json"), doc)
    _write_csv(os.path.join(out, "roc.csv"), ["threshold", "x", "y"], res.roc.rows(),
               comments=["curve: roc", "x: false positive rate", "y: true positive rate", f"auroc: {res.auroc!r}"])
    _write_csv(os.path.join(out, "pr.csv"), ["threshold", "x", "y"], res.pr.rows(),
               comments=["curve: pr", "x: recall", "y: precision", f"auprc: {res.auprc!r}"])
    log.info("%s split: AUROC %.4f AUPRC %.4f MCC %.4f at threshold %.4f", which, res.auroc, res.auprc,
             res.report.mcc_abs, res.report.threshold)


def pick_instance(scores: np.ndarray, labels: np.ndarray, threshold: float, category: str) -> int:
    """Most confident row of a confusion category (highest score if predicted Passed, else lowest)."""
    predicted = scores >= threshold
    passed = labels == "Passed"
    members = {"tp": predicted & passed, "tn": ~predicted & ~passed,
               "fp": predicted & ~passed, "fn": ~predicted & passed}[category]
    idx = np.flatnonzero(members)
    if idx.size == 0:
        raise DataError(f"no {category} instance at threshold {threshold:.4f}")
    if category in ("tp", "fp"):
        return int(idx[np.argmax(scores[idx])])
    return int(idx[np.argmin(scores[idx])])


def cmd_explain(args, cfg: RunConfig) -> None:
    out = _out_dir(args)
    bundle = load_model(_require(args.model, "--model"))
    data = _load_dataset(args)
    if tuple(data.feature_names) != tuple(bundle.feature_names):
        raise DataError("dataset features do not match the model")
    predictor = bundle.predictor()
    scores = predictor(data.X)
    background = bundle.background if len(bundle.background) else subsample_background(data, cfg.background_rows, cfg.seed)

    selected = []  # (row index, category or None)
    for idx in args.instance or []:
        if not 0 <= idx < len(data):
            raise DataError(f"--instance {idx} out of range (dataset has {len(data)} rows)")
        selected.append((idx, None))
    picks = args.pick or ([] if selected else (["tn", "tp"] if data.is_labeled else []))
    for cat in picks:
        if not data.is_labeled:
            raise DataError("--pick needs a labeled dataset")
        selected.append((pick_instance(scores, data.labels, bundle.threshold, cat), cat))
    if not selected:
        selected.append((0, None))

    def explain_row(x):
        if cfg.samples > 0:
            return mc_shapley(predictor, x, background, cfg.samples, cfg.seed)
        return exact_shapley(predictor, x, background)

    manifest = {"threshold": bundle.threshold, "method": "monte_carlo" if cfg.samples else "exact", "instances": [],
                "files": []}
    names = list(data.feature_names)

    def path(name: str) -> str:
        manifest["files"].append(name)
        return os.path.join(out, name)

    for idx, cat in selected:
        tag = f"row{idx}"
        expl = explain_row(data.X[idx])
        doc = expl.to_dict(names)
        doc.update({"row": idx, "category": cat, "label": None if data.labels is None else str(data.labels[idx]),
                    "efficiency_gap": expl.efficiency_gap()})
        _write_json(path(f"shapley_{tag}.json"), doc)
        manifest["instances"].append({"row": idx, "category": cat, "tag": tag})

    pdp_data = subsample_background(data, cfg.pdp_rows, cfg.seed)
    for j, name in enumerate(names):
        base_grid = build_grid(data, j, cfg.grid_points)
        for idx, cat in selected:
            grid = with_observed(base_grid, float(data.X[idx, j]))
            curve = ice_curve(predictor, data.X[idx], j, grid)
            _write_csv(path(f"ice_row{idx}_{name}.csv"), ["grid_value", "score"],
                       zip(curve.grid.tolist(), curve.scores.tolist()),
                       comments=[f"feature: {name}", f"row: {idx}", f"category: {cat or ''}",
                                 f"observed: {float(data.X[idx, j])!r}"])
        if base_grid.size >= 2:
            pdp = pdp_curve(predictor, pdp_data, j, base_grid)
            _write_csv(path(f"pdp_{name}.csv"), ["grid_value", "score"],
                       zip(pdp.grid.tolist(), pdp.mean_scores.tolist()),
                       comments=[f"feature: {name}", f"rows: {pdp.ice_scores.shape[0]}"])

    if cfg.summary_rows:
        n_rows = min(cfg.summary_rows, len(data))
        rows = np.sort(np.random.default_rng(cfg.seed).choice(len(data), size=n_rows, replace=False))
        summary = shap_global_summary([explain_row(data.X[i]) for i in rows])
        _write_json(path("shap_summary.json"), {
            "rows": rows.tolist(),
            "importance": {n: float(v) for n, v in zip(names, summary.importance)},
            "contributions": summary.contributions.tolist(),
            "values": summary.values.tolist(),
        })
    manifest["files"].sort()
    _write_json(os.path.join(out, "explain_manifest.json"), manifest)
    log.info("explained %d instance(s)", len(selected))


def cmd_report(args, cfg: RunConfig) -> None:
    out = _out_dir(args)
    written = []

    def emit(name: str, svg: str, sources: List[str]):
        with open(os.path.join(out, name), "w", encoding="utf-8") as fh:
            fh.write(svg)
        written.append({"file": name, "sources": sources})

    if os.path.exists(os.path.join(out, "roc.csv")):
        meta, _, rows = _read_csv(os.path.join(out, "roc.csv"))
        pts = np.array([[float(v) for v in r] for r in rows])
        emit("roc.svg", charts.roc_svg(pts[:, 1], pts[:, 2], float(meta["auroc"])), ["roc.csv", "metrics.json"])
    if os.path.exists(os.path.join(out, "pr.csv")):
        meta, _, rows = _read_csv(os.path.join(out, "pr.csv"))
        pts = np.array([[float(v) for v in r] for r in rows])
        emit("pr.svg", charts.pr_svg(pts[:, 1], pts[:, 2], float(meta["auprc"])), ["pr.csv", "metrics.json"])

    for path in sorted(glob.glob(os.path.join(out, "shapley_row*.json"))):
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
        feats = doc["features"]
        title = f"Shapley values, row {doc['row']}" + (f" ({doc['category'].upper()})" if doc.get("category") else "")
        svg = charts.shapley_svg([f["name"] for f in feats], [f["value"] for f in feats], [f["phi"] for f in feats],
                                 doc["prediction"], doc["base_value"], title)
        emit(os.path.basename(path)[:-5] + ".svg", svg, [os.path.basename(path)])

    if os.path.exists(os.path.join(out, "shap_summary.json")):
        with open(os.path.join(out, "shap_summary.json"), encoding="utf-8") as fh:
            doc = json.load(fh)
        emit("shap_importance.svg", charts.importance_svg(list(doc["importance"]), list(doc["importance"].values())),
             ["shap_summary.json"])

    for name in FEATURE_NAMES:
        series, sources = [], []
        for i, path in enumerate(sorted(glob.glob(os.path.join(out, f"ice_row*_{name}.csv")))):
            meta, _, rows = _read_csv(path)
            pts = np.array([[float(v) for v in r] for r in rows])
            label = f"row {meta['row']}" + (f" ({meta['category'].upper()})" if meta.get("category") else "")
            series.append(charts.Series(label, pts[:, 0], pts[:, 1], marker_x=float(meta["observed"])))
            sources.append(os.path.basename(path))
        pdp_path = os.path.join(out, f"pdp_{name}.csv")
        if os.path.exists(pdp_path):
            _, _, rows = _read_csv(pdp_path)
            pts = np.array([[float(v) for v in r] for r in rows])
            series.append(charts.Series("PDP (mean)", pts[:, 0], pts[:, 1], color="#555555", dashed=True))
            sources.append(os.path.basename(pdp_path))
        if series:
            emit(f"ice_{name}.svg", charts.line_chart(series, f"ICE: {name}", name, "Passed score"), sources)

    if not written:
        raise DataError(f"no evaluation or explanation artifacts found in {out!r}")
    manifest = sorted(written, key=lambda w: w["file"])
    _write_json(os.path.join(out, "report_manifest.json"), {"artifacts": manifest})
    log.info("rendered %d chart(s)", len(written))


COMMANDS = {
    "generate": cmd_generate,
    "extract": cmd_extract,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "explain": cmd_explain,
    "report": cmd_report,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration; flags override it")
    common.add_argument("--seed", type=int, help=f"random seed (falls back to ${SEED_ENV})")
    common.add_argument("--out", default=".", help="output directory")
    common.add_argument("-v", "--verbose", action="store_true")

    data = argparse.ArgumentParser(add_help=False)
    data.add_argument("--dataset", help="dataset CSV")
    data.add_argument("--events", help="events CSV")
    data.add_argument("--cases", help="cases CSV")

    parser = argparse.ArgumentParser(prog="procqx", description="Explainable process outcome prediction.")
    sub = parser.add_subparsers(dest="command", metavar="{" + ",".join(COMMANDS) + "}")
    sub.required = True

    p = sub.add_parser("generate", parents=[common, data], help="fit an RBF generator and sample a dataset")
    p.add_argument("--generator", help="reuse a saved generator JSON instead of fitting one")
    p.add_argument("--rows", type=int)
    p.add_argument("--kernels", dest="kernels_per_class", type=int)

    sub.add_parser("extract", parents=[common, data], help="event-log CSVs to a dataset CSV")

    p = sub.add_parser("train", parents=[common, data], help="train the network and save a model bundle")
    p.add_argument("--max-epochs", type=int)

    p = sub.add_parser("evaluate", parents=[common, data], help="threshold-free and MCC-optimal metrics")
    p.add_argument("--model", help="model bundle JSON")
    p.add_argument("--split", choices=("auto", "train", "valid", "test", "all"), default="auto",
                   help="rows to evaluate; auto = test split of the training dataset, else all rows")

    p = sub.add_parser("explain", parents=[common, data], help="Shapley values and ICE/PDP curves")
    p.add_argument("--model", help="model bundle JSON")
    sel = p.add_argument_group("instance selection")
    sel.add_argument("--instance", type=int, action="append", help="row index (repeatable)")
    sel.add_argument("--pick", choices=PICK_CATEGORIES, action="append",
                     help="most confident row of a confusion category (repeatable)")
    p.add_argument("--samples", type=int, help="Monte Carlo permutations; 0 = exact enumeration")
    p.add_argument("--grid-points", dest="grid_points", type=int)

    sub.add_parser("report", parents=[common], help="render SVG charts from the files in --out")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO, format="%(levelname)s %(message)s")
    try:
        cfg = load_run_config(args)
        COMMANDS[args.command](args, cfg)
    except FileNotFoundError as exc:
        log.error("%s", exc)
        return EXIT_INPUT
    except (ConfigError, DataError, BundleError, ValueError) as exc:
        log.error("%s", exc)
        return EXIT_INPUT
    except Exception as exc:  # noqa: BLE001
        log.exception("runtime failure: %s", exc)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
