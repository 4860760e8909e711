"""Command-line entry point: ``gam-sparsify {train,postprocess,evaluate,report}``.

Every subcommand reads one delimited data file, splits it into training and
test rows (by an indicator column or a seeded random fraction) and writes
its outputs under ``--out-dir`` with fixed file names.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import metrics
from .dataset import (
    Dataset,
    DataError,
    check_binary_target,
    ingest_csv,
    split_by_fraction,
    split_by_indicator,
)
from .ebm import (
    LOGIT,
    EbmModel,
    ModelFormatError,
    TrainConfig,
    fit_ebm,
    load_model,
    predict,
    save_model,
    term_importances,
)
from .lasso import BINOMIAL, GAUSSIAN, LassoConfig
from .postprocess import OFFSET, REESTIMATE, evaluate_predictions, run_pipeline, write_plot_data

log = logging.getLogger("gam_sparsify")

MODEL_FILE = "model.json"
REDUCED_FILE = "reduced_model.json"
TRAIN_LOG_FILE = "train_log.json"
REPORT_FILE = "path_report.csv"
METRIC_PLOT_FILE = "plotdata_metric_vs_terms.csv"
COEF_PLOT_FILE = "plotdata_coef_path.csv"


@dataclass
class RunConfig:
    subcommand: str
    data: Path
    target: str
    family: str | None = None  # None: gaussian, or the loaded model's link
    delimiter: str = ","
    test_indicator: str | None = None
    test_fraction: float | None = None
    subset: str = "test"
    out_dir: Path = Path(".")
    seed: int = 0
    models: list[Path] = field(default_factory=list)
    holdout: Path | None = None
    top_k: int | None = None
    intercept_mode: str = REESTIMATE
    train: TrainConfig = field(default_factory=TrainConfig)
    lasso: LassoConfig = field(default_factory=LassoConfig)

    def __post_init__(self):
        if (self.test_indicator is None) == (self.test_fraction is None):
            raise DataError("give exactly one of --test-indicator or --test-fraction")


def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("data")
    g.add_argument("--data", required=True, type=Path, help="delimited file with a header row")
    g.add_argument("--target", required=True, help="response column name")
    g.add_argument("--delimiter", default=",", help="field separator, or 'ws' for whitespace")
    split = g.add_mutually_exclusive_group(required=True)
    split.add_argument("--test-indicator", help="boolean column marking test rows")
    split.add_argument("--test-fraction", type=float, help="random test share in (0, 1)")
    g.add_argument("--family", choices=[GAUSSIAN, BINOMIAL], default=None,
                   help="default: gaussian, or the model's family when a model is given")
    g.add_argument("--seed", type=int, default=0, help="seed for the split and the trainer")
    g.add_argument("--out-dir", type=Path, default=Path("."))
    g.add_argument("-v", "--verbose", action="store_true")

    trainer = argparse.ArgumentParser(add_help=False)
    d = TrainConfig()
    t = trainer.add_argument_group("trainer")
    t.add_argument("--learning-rate", type=float, default=d.learning_rate)
    t.add_argument("--max-rounds", type=int, default=d.max_rounds)
    t.add_argument("--patience", type=int, default=d.early_stop_patience)
    t.add_argument("--validation-fraction", type=float, default=d.validation_fraction)
    t.add_argument("--outer-bags", type=int, default=d.outer_bags)
    t.add_argument("--interactions", type=int, default=d.n_interactions)
    t.add_argument("--max-bins", type=int, default=d.max_bins)
    t.add_argument("--interaction-bins", type=int, default=d.interaction_bins)
    t.add_argument("--max-leaves", type=int, default=d.max_leaves,
                   help="leaves per boosting step; 0 updates every bin independently")
    t.add_argument("--min-samples-leaf", type=int, default=d.min_samples_leaf)

    sparsifier = argparse.ArgumentParser(add_help=False)
    ld = LassoConfig()
    s = sparsifier.add_argument_group("lasso")
    s.add_argument("--positive", action=argparse.BooleanOptionalAction, default=ld.positive)
    s.add_argument("--standardize", action=argparse.BooleanOptionalAction,
                   default=ld.standardize)
    s.add_argument("--n-lambda", type=int, default=ld.n_lambda)
    s.add_argument("--lambda-min-ratio", type=float, default=None)
    s.add_argument("--tol", type=float, default=ld.tol)
    s.add_argument("--max-iter", type=int, default=ld.max_iter)
    s.add_argument("--intercept-mode", choices=[REESTIMATE, OFFSET], default=REESTIMATE)
    s.add_argument("--holdout", type=Path, help="extra labeled file scored by both models")

    parser = argparse.ArgumentParser(
        prog="gam-sparsify",
        description="Fit additive models and sparsify them with a non-negative LASSO.")
    sub = parser.add_subparsers(dest="subcommand", required=True)
    sub.add_parser("train", parents=[common, trainer], help="fit a model on the training rows")
    pp = sub.add_parser("postprocess", parents=[common, trainer, sparsifier],
                        help="re-weight the terms of a model and drop zeroed ones")
    pp.add_argument("--model", dest="models", type=Path, action="append", default=[],
                    help="fitted model file (trained first when omitted)")
    pp.add_argument("--top-k", type=int)
    ev = sub.add_parser("evaluate", parents=[common], help="score one or more models")
    ev.add_argument("--model", dest="models", type=Path, action="append", required=True)
    ev.add_argument("--subset", choices=["train", "test", "all"], default="test")
    ev.add_argument("--top-k", type=int)
    ev.add_argument("--csv", type=Path, help="also write the metric rows to this file")
    rp = sub.add_parser("report", parents=[common], help="list terms by importance")
    rp.add_argument("--model", dest="models", type=Path, action="append", required=True)
    rp.add_argument("--subset", choices=["train", "test", "all"], default="train")
    return parser


def _run_config(ns: argparse.Namespace) -> RunConfig:
    train = lasso = None
    if hasattr(ns, "learning_rate"):
        train = TrainConfig(
            learning_rate=ns.learning_rate, max_rounds=ns.max_rounds,
            early_stop_patience=ns.patience, validation_fraction=ns.validation_fraction,
            outer_bags=ns.outer_bags, n_interactions=ns.interactions, max_bins=ns.max_bins,
            interaction_bins=ns.interaction_bins,
            max_leaves=ns.max_leaves or None, min_samples_leaf=ns.min_samples_leaf,
            seed=ns.seed)
    if hasattr(ns, "positive"):
        lasso = LassoConfig(family=ns.family or GAUSSIAN, positive=ns.positive,
                            n_lambda=ns.n_lambda, lambda_min_ratio=ns.lambda_min_ratio,
                            standardize=ns.standardize, tol=ns.tol, max_iter=ns.max_iter)
    return RunConfig(
        subcommand=ns.subcommand, data=ns.data, target=ns.target,
        family=ns.family, delimiter=ns.delimiter,
        test_indicator=ns.test_indicator, test_fraction=ns.test_fraction,
        subset=getattr(ns, "subset", "test"), out_dir=ns.out_dir, seed=ns.seed,
        models=list(getattr(ns, "models", [])), holdout=getattr(ns, "holdout", None),
        top_k=getattr(ns, "top_k", None),
        intercept_mode=getattr(ns, "intercept_mode", REESTIMATE),
        train=train or TrainConfig(seed=ns.seed), lasso=lasso or LassoConfig())


def _load_split(cfg: RunConfig, family: str | None) -> tuple[Dataset, Dataset]:
    data = ingest_csv(cfg.data, cfg.target, cfg.delimiter, family=family)
    if cfg.test_indicator is not None:
        return split_by_indicator(data, cfg.test_indicator)
    return split_by_fraction(data, cfg.test_fraction, seed=cfg.seed)


def _subset(cfg: RunConfig, family: str | None) -> Dataset:
    train, test = _load_split(cfg, family)
    if cfg.subset == "train":
        return train
    if cfg.subset == "test":
        return test
    return ingest_csv(cfg.data, cfg.target, cfg.delimiter, family=family)


def _model_family(model: EbmModel) -> str:
    return BINOMIAL if model.link == LOGIT else GAUSSIAN


def _check_family(model: EbmModel, requested: str | None, y: np.ndarray, label: str):
    family = _model_family(model)
    if requested is not None and requested != family:
        raise DataError(f"{label}: model has {model.link} link but --family {requested} "
                        "was requested")
    if family == BINOMIAL and not np.all((y == 0) | (y == 1)):
        raise DataError(f"{label}: logit-link model needs a 0/1 target, "
                        f"but {_target_preview(y)}")
    return family


def _target_preview(y: np.ndarray) -> str:
    values = np.unique(y)
    return f"target takes values {values[:5].tolist()}"


def metric_rows(label: str, model: EbmModel, data: Dataset,
                top_k: int | None = None) -> list[metrics.MetricValue]:
    """Test metrics of ``model`` on ``data`` as (model label, MetricValue) rows."""
    family = _model_family(model)
    eta = predict(model, data)
    values = evaluate_predictions(data.target, eta, family)
    rows = [metrics.MetricValue(k, v, data.n_rows) for k, v in values.items()]
    if top_k is not None:
        if family != BINOMIAL:
            raise DataError("--top-k needs a binary target and a logit-link model")
        rows.append(metrics.MetricValue(
            f"top_{top_k}", float(metrics.top_k_capture(data.target, eta, top_k)),
            data.n_rows))
    return [(label, r) for r in rows]


def format_rows(rows) -> tuple[str, str]:
    text = "\n".join(f"{label}: {m.name} = {m.value:.6g} (n={m.n})" for label, m in rows)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["model", "metric", "value", "n"])
    for label, m in rows:
        w.writerow([label, m.name, repr(float(m.value)), m.n])
    return text, buf.getvalue()


def _emit(rows, csv_path: Path | None = None) -> None:
    text, table = format_rows(rows)
    print(text)
    print()
    print(table, end="")
    if csv_path is not None:
        csv_path.write_text(table)


def _out_dir(cfg: RunConfig) -> Path:
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    return cfg.out_dir


def _train(cfg: RunConfig, train: Dataset) -> EbmModel:
    family = cfg.family or GAUSSIAN
    model = fit_ebm(train, cfg.train, family)
    out = _out_dir(cfg)
    save_model(model, out / MODEL_FILE)
    doc = {"config": asdict(cfg.train), "family": family, "n_rows": train.n_rows,
           "n_terms": model.n_terms, "terms": model.term_names,
           "stages": list(model.training_log)}
    (out / TRAIN_LOG_FILE).write_text(json.dumps(doc, indent=1) + "\n")
    return model


def cmd_train(cfg: RunConfig) -> int:
    train, _ = _load_split(cfg, cfg.family or GAUSSIAN)
    model = _train(cfg, train)
    print(f"trained {model.n_terms} terms on {train.n_rows} rows "
          f"({train.n_features} features, {model.n_terms - train.n_features} pairs)")
    print(f"wrote {cfg.out_dir / MODEL_FILE}")
    return 0


def cmd_postprocess(cfg: RunConfig) -> int:
    if len(cfg.models) > 1:
        raise DataError("postprocess takes a single --model")
    model = load_model(cfg.models[0]) if cfg.models else None
    family = _model_family(model) if model is not None else cfg.family or GAUSSIAN
    train, test = _load_split(cfg, None)
    if model is not None:
        _check_family(model, cfg.family, train.target, "train")
    elif family == BINOMIAL:
        check_binary_target(train.target)
        check_binary_target(test.target)
    else:
        model = _train(cfg, train)
    holdout = None
    if cfg.holdout is not None:
        holdout = ingest_csv(cfg.holdout, cfg.target, cfg.delimiter, family=family)
        if cfg.test_indicator is not None and cfg.test_indicator in holdout.columns:
            holdout = holdout.drop(cfg.test_indicator)

    result = run_pipeline(train, test, lasso_config=cfg.lasso, family=family,
                          holdout=holdout, intercept_mode=cfg.intercept_mode, model=model)
    out = _out_dir(cfg)
    save_model(result.reduced_model, out / REDUCED_FILE)
    result.report.to_csv(out / REPORT_FILE)
    write_plot_data(result, out / METRIC_PLOT_FILE, out / COEF_PLOT_FILE)

    rep = result.report
    print(f"terms: {result.n_terms_full} -> {result.n_terms_reduced} "
          f"({100 * result.reduction_ratio:.1f}% reduction)")
    print(f"selected lambda = {result.selected_lambda:.6g} "
          f"(path index {rep.selected} of {len(rep)})")
    rows = (metric_rows("full", result.full_model, test, cfg.top_k)
            + metric_rows("reduced", result.reduced_model, test, cfg.top_k))
    if holdout is not None:
        rows += (metric_rows("full_holdout", result.full_model, holdout, cfg.top_k)
                 + metric_rows("reduced_holdout", result.reduced_model, holdout, cfg.top_k))
    _emit(rows)
    return 0


def cmd_evaluate(cfg: RunConfig, csv_path: Path | None = None) -> int:
    models = [(p.stem, load_model(p)) for p in cfg.models]
    families = {_model_family(m) for _, m in models}
    if len(families) > 1:
        raise DataError("models to compare use different links")
    data = _subset(cfg, None)
    rows = []
    for label, model in models:
        _check_family(model, cfg.family, data.target, label)
        rows += metric_rows(label, model, data, cfg.top_k)
    _emit(rows, csv_path)
    return 0


def cmd_report(cfg: RunConfig) -> int:
    data = _subset(cfg, None)
    for path in cfg.models:
        model = load_model(path)
        imp = term_importances(model, data)
        print(f"{path.stem}: {model.n_terms} terms, link {model.link}, "
              f"intercept {model.intercept:.6g}")
        for k in np.argsort(-imp, kind="stable"):
            print(f"  {model.term_names[k]:<40s} {imp[k]:.6g}")
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    ns = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if ns.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _run_config(ns)
        if cfg.subcommand == "train":
            return cmd_train(cfg)
        if cfg.subcommand == "postprocess":
            return cmd_postprocess(cfg)
        if cfg.subcommand == "evaluate":
            return cmd_evaluate(cfg, ns.csv)
        return cmd_report(cfg)
    except (DataError, ModelFormatError, ValueError, OSError) as exc:
        print(f"gam-sparsify {ns.subcommand}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
