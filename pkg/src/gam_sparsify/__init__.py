"""Sparse additive models: cyclic boosting plus LASSO term re-weighting."""

from .dataset import (
    BinnedMatrix,
    BinSpec,
    DataError,
    Dataset,
    apply_bins,
    build_bins,
    from_arrays,
    ingest_csv,
    split_by_fraction,
    split_by_indicator,
)
from .ebm import (
    ContribMatrix,
    EbmModel,
    Term,
    TrainConfig,
    fit_ebm,
    load_model,
    predict,
    predict_and_contrib,
    predict_proba,
    rank_pairs,
    save_model,
    scale_term,
    set_intercept,
    sweep,
    term_importances,
)
from .lasso import LassoConfig, LassoPath, fit_at_lambda, kkt_check, lambda_grid, lasso_path
from .postprocess import (
    PathReport,
    PipelineResult,
    apply_coefficients,
    build_design,
    run_pipeline,
    select_lambda,
)

__version__ = "0.1.0"
