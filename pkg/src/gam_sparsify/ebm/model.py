"""Additive model representation, scoring and term editing."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from ..dataset import BinnedMatrix, BinSpec, Dataset, apply_bins

IDENTITY = "identity"
LOGIT = "logit"
MAIN = "main"
PAIR = "pair"


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=np.float64)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Term:
    """One shape function: a per-bin score table on the link scale."""

    kind: str
    features: tuple[int, ...]
    scores: np.ndarray

    def __eq__(self, other):
        if not isinstance(other, Term):
            return NotImplemented
        return (self.kind == other.kind and self.features == other.features
                and np.array_equal(self.scores, other.scores))

    __hash__ = None

    def __post_init__(self):
        object.__setattr__(self, "features", tuple(int(f) for f in self.features))
        object.__setattr__(self, "scores", _frozen(self.scores))
        if self.kind == MAIN:
            if len(self.features) != 1 or self.scores.ndim != 1:
                raise ValueError("main term needs one feature and a 1-D table")
        elif self.kind == PAIR:
            if len(self.features) != 2 or self.scores.ndim != 2:
                raise ValueError("pair term needs two features and a 2-D table")
            if not self.features[0] < self.features[1]:
                raise ValueError(f"pair features must satisfy i < j, got {self.features}")
        else:
            raise ValueError(f"unknown term kind {self.kind!r}")

    def lookup(self, binned: BinnedMatrix) -> np.ndarray:
        if self.kind == MAIN:
            return self.scores[binned.column(self.features[0])]
        i, j = self.features
        return self.scores[binned.column(i), binned.column(j)]

    def is_zero(self) -> bool:
        return not np.any(self.scores != 0.0)


@dataclass(frozen=True)
class EbmModel:
    intercept: float
    link: str
    bin_spec: BinSpec
    terms: tuple[Term, ...] = ()
    training_log: tuple = field(default=(), compare=False, repr=False)

    def __post_init__(self):
        if self.link not in (IDENTITY, LOGIT):
            raise ValueError(f"unknown link {self.link!r}")
        if not math.isfinite(self.intercept):
            raise ValueError("intercept must be finite")
        object.__setattr__(self, "intercept", float(self.intercept))
        object.__setattr__(self, "terms", tuple(self.terms))
        n_bins = self.bin_spec.n_bins
        for t in self.terms:
            if max(t.features) >= len(n_bins):
                raise ValueError(f"term references unknown feature {t.features}")
            expect = tuple(n_bins[f] for f in t.features)
            if t.scores.shape != expect:
                raise ValueError(f"score table shape {t.scores.shape} does not "
                                 f"match bins {expect}")
        names = self.term_names
        if len(set(names)) != len(names):
            raise ValueError("term names must be unique")

    @property
    def feature_names(self) -> list[str]:
        return self.bin_spec.names

    @property
    def term_names(self) -> list[str]:
        feats = self.feature_names
        return [" & ".join(feats[f] for f in t.features) for t in self.terms]

    @property
    def n_terms(self) -> int:
        return len(self.terms)


@dataclass(frozen=True)
class ContribMatrix:
    """Per-term contributions: column ``j`` holds term ``j``'s score for each row."""

    values: np.ndarray
    names: tuple[str, ...]

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)

    @property
    def shape(self):
        return self.values.shape


def _bin(model: EbmModel, data: Dataset) -> BinnedMatrix:
    return apply_bins(data, model.bin_spec, strict=False)


def _contributions(model: EbmModel, binned: BinnedMatrix) -> np.ndarray:
    out = np.empty((binned.n_rows, model.n_terms))
    for j, t in enumerate(model.terms):
        out[:, j] = t.lookup(binned)
    return out


def predict_and_contrib(model: EbmModel, data: Dataset) -> tuple[np.ndarray, ContribMatrix]:
    """Link-scale predictions together with the per-term contribution matrix.

    ``predictions == intercept + contrib.sum(axis=1)`` holds exactly.
    """
    contrib = _contributions(model, _bin(model, data))
    pred = model.intercept + contrib.sum(axis=1)
    return pred, ContribMatrix(contrib, tuple(model.term_names))


def predict(model: EbmModel, data: Dataset) -> np.ndarray:
    """Link-scale prediction ``intercept + sum of term lookups``."""
    return predict_and_contrib(model, data)[0]


def inverse_logit(eta):
    return np.exp(-np.logaddexp(0.0, -np.asarray(eta, dtype=np.float64)))


def predict_proba(model: EbmModel, data: Dataset) -> np.ndarray:
    if model.link != LOGIT:
        raise ValueError("predict_proba requires a logit-link model")
    return inverse_logit(predict(model, data))


def term_importances(model: EbmModel, data: Dataset) -> np.ndarray:
    """Mean absolute contribution of each term over the rows of ``data``."""
    if data.n_rows == 0:
        raise ValueError("term importances need at least one row")
    contrib = _contributions(model, _bin(model, data))
    return np.abs(contrib).mean(axis=0)


# ---------------------------------------------------------------------------
# Editing
# ---------------------------------------------------------------------------

def scale_term(model: EbmModel, term_index: int, factor: float) -> EbmModel:
    """Multiply one term's whole score table by ``factor``."""
    if not 0 <= term_index < model.n_terms:
        raise IndexError(f"term index {term_index} out of range "
                         f"for {model.n_terms} terms")
    if not math.isfinite(factor):
        raise ValueError("factor must be finite")
    terms = list(model.terms)
    t = terms[term_index]
    terms[term_index] = Term(t.kind, t.features, t.scores * float(factor))
    return replace(model, terms=tuple(terms))


def set_intercept(model: EbmModel, value: float) -> EbmModel:
    if not math.isfinite(value):
        raise ValueError("intercept must be finite")
    return replace(model, intercept=float(value))


def sweep(model: EbmModel) -> EbmModel:
    """Drop terms whose score tables are identically zero."""
    return replace(model, terms=tuple(t for t in model.terms if not t.is_zero()))
