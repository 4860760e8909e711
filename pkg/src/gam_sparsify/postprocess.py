"""Sparsify a fitted additive model by re-weighting its terms with the LASSO.

Steps: fit the model on training rows, turn each term's contributions into
a feature column, fit the (non-negative) LASSO path on the training
columns, pick the penalty with the best held-out metric, then scale each
term by its coefficient, replace the intercept and drop zeroed terms.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import metrics
from .dataset import Dataset, DataError
from .ebm import (
    LOGIT,
    ContribMatrix,
    EbmModel,
    TrainConfig,
    fit_ebm,
    inverse_logit,
    predict,
    predict_and_contrib,
    scale_term,
    set_intercept,
    sweep,
)
from .lasso import BINOMIAL, GAUSSIAN, LassoConfig, LassoPath, lasso_path

log = logging.getLogger(__name__)

REESTIMATE = "reestimate"
OFFSET = "offset"


@dataclass(frozen=True)
class PathReport:
    """Held-out metrics for every penalty on the path; one row is selected."""

    lambdas: np.ndarray
    num_terms: np.ndarray
    metrics: dict[str, np.ndarray]
    selected: int
    metric_name: str

    def __len__(self):
        return len(self.lambdas)

    def rows(self) -> list[dict]:
        out = []
        for k in range(len(self)):
            row = {"lambda": float(self.lambdas[k]), "num_terms": int(self.num_terms[k])}
            row.update({m: float(v[k]) for m, v in self.metrics.items()})
            row["selected"] = k == self.selected
            out.append(row)
        return out

    def to_csv(self, path) -> None:
        names = list(self.metrics)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["lambda", "num_terms", *names, "selected"])
            for row in self.rows():
                w.writerow([repr(row["lambda"]), row["num_terms"],
                            *(repr(row[m]) for m in names), int(row["selected"])])


@dataclass
class PipelineResult:
    full_model: EbmModel
    full_metrics: dict[str, float]
    reduced_model: EbmModel
    reduced_metrics: dict[str, float]
    path: LassoPath
    report: PathReport
    coefs: np.ndarray
    intercept: float
    holdout_metrics: dict[str, dict[str, float]] = field(default_factory=dict)

    @property
    def n_terms_full(self) -> int:
        return self.full_model.n_terms

    @property
    def n_terms_reduced(self) -> int:
        return self.reduced_model.n_terms

    @property
    def reduction_ratio(self) -> float:
        if self.n_terms_full == 0:
            return 0.0
        return 1.0 - self.n_terms_reduced / self.n_terms_full

    @property
    def selected_lambda(self) -> float:
        return float(self.report.lambdas[self.report.selected])


def family_of(model: EbmModel) -> str:
    return BINOMIAL if model.link == LOGIT else GAUSSIAN


def build_design(model: EbmModel, train: Dataset,
                 test: Dataset) -> tuple[ContribMatrix, ContribMatrix]:
    """Term-contribution matrices for the training and test rows."""
    for name, data in (("train", train), ("test", test)):
        absent = [f for f in model.feature_names if f not in data.columns]
        if absent:
            raise DataError(f"{name} data lacks model features {absent[:5]}")
    return predict_and_contrib(model, train)[1], predict_and_contrib(model, test)[1]


def evaluate_predictions(y, eta, family: str) -> dict[str, float]:
    """Metrics for link-scale predictions ``eta``."""
    if family == GAUSSIAN:
        return {"mse": metrics.mse(y, eta)}
    p = inverse_logit(eta)
    out = {"deviance": metrics.deviance(y, p)}
    y = np.asarray(y)
    out["auc"] = metrics.auroc(y, p) if 0 < y.sum() < y.size else math.nan
    return out


def path_metrics(path: LassoPath, X_tst, y_tst, family: str,
                 offset=None) -> dict[str, np.ndarray]:
    X_tst = np.asarray(X_tst, dtype=np.float64)
    y_tst = np.asarray(y_tst, dtype=np.float64)
    if y_tst.size == 0:
        raise ValueError("test set is empty; lambda selection is impossible")
    rows = [evaluate_predictions(y_tst, path.linear_predictor(X_tst, k, offset), family)
            for k in range(len(path))]
    return {m: np.array([r[m] for r in rows]) for m in rows[0]}


def select_lambda(path: LassoPath, X_tst, y_tst, family: str,
                  offset=None) -> tuple[float, int]:
    """Penalty minimizing test MSE (gaussian) or test deviance (binomial).

    Exact ties go to the earliest grid point, i.e. the sparsest model.
    """
    if len(path) == 0:
        raise ValueError("empty lasso path")
    values = path_metrics(path, X_tst, y_tst, family, offset)
    key = "mse" if family == GAUSSIAN else "deviance"
    k = int(np.argmin(values[key]))
    return float(path.lambdas[k]), k


def apply_coefficients(model: EbmModel, coefs, intercept: float) -> EbmModel:
    """Scale every term by its coefficient, set the intercept, drop zeroed terms."""
    coefs = np.asarray(coefs, dtype=np.float64).ravel()
    if coefs.size != model.n_terms:
        raise ValueError(f"{coefs.size} coefficients for {model.n_terms} terms")
    for j, c in enumerate(coefs):
        model = scale_term(model, j, float(c))
    return sweep(set_intercept(model, intercept))


def _model_metrics(model: EbmModel, data: Dataset) -> dict[str, float]:
    return evaluate_predictions(data.target, predict(model, data), family_of(model))


def run_pipeline(train: Dataset, test: Dataset,
                 train_config: TrainConfig = TrainConfig(),
                 lasso_config: LassoConfig | None = None,
                 family: str = GAUSSIAN, holdout: Dataset | None = None,
                 intercept_mode: str = REESTIMATE,
                 model: EbmModel | None = None) -> PipelineResult:
    """Fit (unless ``model`` is given), post-process and report.

    Only ``train`` feeds the trainer and the LASSO path; ``test`` labels are
    used solely to pick the penalty.  ``holdout``, when given, is scored
    with both the full and the reduced model.
    """
    if test.n_rows == 0:
        raise ValueError("test set is empty; lambda selection is impossible")
    if train.target is None or test.target is None:
        raise ValueError("train and test data need a target")
    if intercept_mode not in (REESTIMATE, OFFSET):
        raise ValueError(f"unknown intercept mode {intercept_mode!r}")
    if model is None:
        model = fit_ebm(train, train_config, family)
    family = family_of(model)
    if lasso_config is None:
        lasso_config = LassoConfig(family=family)
    elif lasso_config.family != family:
        lasso_config = replace(lasso_config, family=family)

    X_trn, X_tst = build_design(model, train, test)
    off_trn = off_tst = None
    if intercept_mode == OFFSET:
        off_trn = np.full(train.n_rows, model.intercept)
        off_tst = np.full(test.n_rows, model.intercept)
    cfg = replace(lasso_config, offset=off_trn)
    path = lasso_path(X_trn, train.target, cfg)
    values = path_metrics(path, X_tst, test.target, family, off_tst)
    key = "mse" if family == GAUSSIAN else "deviance"
    k = int(np.argmin(values[key]))
    report = PathReport(path.lambdas, path.df, values, k, key)

    coefs = path.coefs[k].copy()
    intercept = float(path.intercepts[k])
    if intercept_mode == OFFSET:
        intercept += model.intercept
    reduced = apply_coefficients(model, coefs, intercept)
    log.info("reduced %d terms to %d at lambda=%.6g", model.n_terms,
             reduced.n_terms, path.lambdas[k])

    result = PipelineResult(model, _model_metrics(model, test), reduced,
                            _model_metrics(reduced, test), path, report, coefs, intercept)
    if holdout is not None:
        result.holdout_metrics = {"full": _model_metrics(model, holdout),
                                  "reduced": _model_metrics(reduced, holdout)}
    return result


def write_plot_data(result: PipelineResult, metric_path, coef_path) -> None:
    """Two series for redrawing the path figures in any plotting tool."""
    rep = result.report
    with open(metric_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["num_terms", rep.metric_name, "lambda"])
        for k in range(len(rep)):
            w.writerow([int(rep.num_terms[k]), repr(float(rep.metrics[rep.metric_name][k])),
                        repr(float(rep.lambdas[k]))])
    names = result.full_model.term_names
    with open(coef_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["lambda", "log_lambda", "term", "coef"])
        for k, lam in enumerate(result.path.lambdas):
            for j, name in enumerate(names):
                w.writerow([repr(float(lam)), repr(math.log(lam)), name,
                            repr(float(result.path.coefs[k, j]))])
