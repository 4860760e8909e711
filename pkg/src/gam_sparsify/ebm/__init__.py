from .interactions import coarse_map, pair_gains, rank_pairs
from .io import SCHEMA_VERSION, ModelFormatError, load_model, save_model
from .model import (
    IDENTITY,
    LOGIT,
    MAIN,
    PAIR,
    ContribMatrix,
    EbmModel,
    Term,
    inverse_logit,
    predict,
    predict_and_contrib,
    predict_proba,
    scale_term,
    set_intercept,
    sweep,
    term_importances,
)
from .train import TrainConfig, fit_ebm

__all__ = [
    "IDENTITY", "LOGIT", "MAIN", "PAIR", "SCHEMA_VERSION",
    "ContribMatrix", "EbmModel", "ModelFormatError", "Term", "TrainConfig",
    "coarse_map", "fit_ebm", "inverse_logit", "load_model", "pair_gains",
    "predict", "predict_and_contrib", "predict_proba", "rank_pairs",
    "save_model", "scale_term", "set_intercept", "sweep", "term_importances",
]
