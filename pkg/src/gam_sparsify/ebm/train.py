"""Cyclic gradient boosting of main-effect and pairwise shape functions."""

from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from ..dataset import Dataset, apply_bins, build_bins, check_binary_target
from .interactions import DEFAULT_COARSE_BINS, coarse_map, rank_pairs
from .model import IDENTITY, LOGIT, MAIN, PAIR, EbmModel, Term

log = logging.getLogger(__name__)

THREADS_ENV = "GAM_SPARSIFY_THREADS"


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.01
    max_rounds: int = 5000
    early_stop_patience: int = 50
    validation_fraction: float = 0.15
    outer_bags: int = 8
    n_interactions: int = 10
    max_bins: int = 256
    interaction_bins: int = DEFAULT_COARSE_BINS
    max_leaves: int | None = 3  # None: independent step per bin/cell
    min_samples_leaf: int = 2
    seed: int = 0

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if self.max_rounds < 0 or self.early_stop_patience < 1:
            raise ValueError("max_rounds must be >= 0 and early_stop_patience >= 1")
        if not 0 < self.validation_fraction < 1:
            raise ValueError("validation_fraction must lie in (0, 1)")
        if self.outer_bags < 1:
            raise ValueError("outer_bags must be at least 1")
        if self.n_interactions < 0:
            raise ValueError("n_interactions must be non-negative")
        if self.max_bins < 2 or self.interaction_bins < 1:
            raise ValueError("max_bins must be >= 2 and interaction_bins >= 1")
        if self.max_leaves is not None and self.max_leaves < 2:
            raise ValueError("max_leaves must be None or at least 2")


def _sigmoid(eta):
    return np.exp(-np.logaddexp(0.0, -eta))


def _loss(y, f, family) -> float:
    if y.size == 0:
        return 0.0
    if family == "gaussian":
        return float(np.mean((y - f) ** 2))
    return float(np.mean(np.logaddexp(0.0, f) - y * f))


@dataclass
class _Bag:
    fit_idx: np.ndarray
    fit_w: np.ndarray
    val_idx: np.ndarray


def _make_bags(n: int, cfg: TrainConfig) -> list[_Bag]:
    seeds = np.random.SeedSequence(cfg.seed).spawn(cfg.outer_bags)
    n_val = int(round(cfg.validation_fraction * n)) if n >= 2 else 0
    n_val = min(max(n_val, 1 if n >= 2 else 0), n - 1) if n >= 2 else 0
    bags = []
    for ss in seeds:
        rng = np.random.default_rng(ss)
        perm = rng.permutation(n)
        val_idx = np.sort(perm[:n_val])
        fit_idx = np.sort(perm[n_val:])
        if cfg.outer_bags > 1:
            draw = rng.integers(0, fit_idx.size, size=fit_idx.size)
            w = np.bincount(draw, minlength=fit_idx.size).astype(np.float64)
            keep = w > 0
            fit_idx, w = fit_idx[keep], w[keep]
        else:
            w = np.ones(fit_idx.size)
        bags.append(_Bag(fit_idx, w, val_idx))
    return bags


def _best_cut(g, h, c, min_leaf):
    """Best single cut of an ordered run of cells.

    Returns ``(gain, k)`` where the left part is the first ``k`` cells, or
    ``(0.0, None)`` when no cut leaves ``min_leaf`` weight on both sides.
    """
    if g.size < 2:
        return 0.0, None
    cg, ch, cc = np.cumsum(g), np.cumsum(h), np.cumsum(c)
    gl, hl, cl = cg[:-1], ch[:-1], cc[:-1]
    gr, hr, cr = cg[-1] - gl, ch[-1] - hl, cc[-1] - cl
    ok = (cl >= min_leaf) & (cr >= min_leaf) & (hl > 0) & (hr > 0)
    if not ok.any():
        return 0.0, None
    gain = np.full(gl.size, -np.inf)
    gain[ok] = gl[ok] ** 2 / hl[ok] + gr[ok] ** 2 / hr[ok]
    k = int(np.argmax(gain))
    return float(gain[k] - cg[-1] ** 2 / ch[-1]), k + 1


def _segment_step(g, h, c, max_leaves, min_leaf):
    """Newton step that is constant on at most ``max_leaves`` contiguous runs.

    Runs are grown greedily: each split takes the cut with the largest gain
    across the current runs.
    """
    runs = [(0, g.size)]
    for _ in range(max_leaves - 1):
        best_gain, best = 0.0, None
        for r, (a, b) in enumerate(runs):
            gain, k = _best_cut(g[a:b], h[a:b], c[a:b], min_leaf)
            if k is not None and gain > best_gain:
                best_gain, best = gain, (r, a + k)
        if best is None:
            break
        r, cut = best
        a, b = runs[r]
        runs[r:r + 1] = [(a, cut), (cut, b)]
    step = np.zeros(g.size)
    for a, b in runs:
        hs = h[a:b].sum()
        if hs > 0:
            step[a:b] = g[a:b].sum() / hs
    return step


def _row_cuts(g, h, c, min_leaf):
    """For each row of the (m, k) block sums, the best column cut or no cut.

    Returns per-row ``(score, cut)`` where score is the summed ``G**2/H`` of
    the resulting leaves and ``cut == k`` means the row block stays whole.
    """
    m, k = g.shape
    gt, ht, ct = g[:, -1:], h[:, -1:], c[:, -1:]
    whole = np.where(ht[:, 0] > 0, gt[:, 0] ** 2 / np.where(ht[:, 0] > 0, ht[:, 0], 1.0), 0.0)
    score, cut = whole.copy(), np.full(m, k)
    if k > 1:
        gl, hl, cl = g[:, :-1], h[:, :-1], c[:, :-1]
        gr, hr, cr = gt - gl, ht - hl, ct - cl
        ok = (cl >= min_leaf) & (cr >= min_leaf) & (hl > 0) & (hr > 0)
        split = np.full(gl.shape, -np.inf)
        split[ok] = gl[ok] ** 2 / hl[ok] + gr[ok] ** 2 / hr[ok]
        j = np.argmax(split, axis=1)
        best = split[np.arange(m), j]
        better = best > score
        score[better] = best[better]
        cut[better] = j[better] + 1
    return score, cut


def _pair_step(g, h, c, min_leaf):
    """Newton step on a 2-D grid with one cut along one axis and, inside
    each half, at most one cut along the other axis (up to four leaves)."""
    best_gain, best = 0.0, None
    total = g.sum() ** 2 / h.sum() if h.sum() > 0 else 0.0
    for flip in (False, True):
        G, H, C = (g.T, h.T, c.T) if flip else (g, h, c)
        if G.shape[0] < 2:
            continue
        # column-wise cumulative sums over rows, then along columns
        top = [np.cumsum(np.cumsum(M, axis=0)[:-1], axis=1) for M in (G, H, C)]
        full = [np.cumsum(M.sum(axis=0)) for M in (G, H, C)]
        bot = [f[None, :] - t for f, t in zip(full, top)]
        ok_rows = (top[2][:, -1] >= min_leaf) & (bot[2][:, -1] >= min_leaf)
        if not ok_rows.any():
            continue
        s_top, k_top = _row_cuts(*top, min_leaf)
        s_bot, k_bot = _row_cuts(*bot, min_leaf)
        gain = np.where(ok_rows, s_top + s_bot - total, -np.inf)
        a = int(np.argmax(gain))
        if gain[a] > best_gain:
            best_gain, best = float(gain[a]), (flip, a + 1, int(k_top[a]), int(k_bot[a]))
    if best is None:
        hs = h.sum()
        return np.full(g.shape, g.sum() / hs if hs > 0 else 0.0)
    flip, a, kt, kb = best
    G, H = (g.T, h.T) if flip else (g, h)
    step = np.zeros(G.shape)
    for rows, k in ((slice(0, a), kt), (slice(a, None), kb)):
        for cols in (slice(0, k), slice(k, None)):
            hs = H[rows, cols].sum()
            if hs > 0:
                step[rows, cols] = G[rows, cols].sum() / hs
    return step.T if flip else step


def _boost(codes, shapes, y, base, bag: _Bag, family, cfg: TrainConfig, populated):
    """Round-robin boosting of the given terms on one bag.

    ``codes[t]`` holds each row's flat cell index for term ``t`` (length
    ``n``); ``shapes[t]`` is that term's table shape, 1-D for main effects
    and 2-D for pairs.  Every round visits the terms in order and adds
    ``learning_rate`` times a Newton step of the loss (for squared error,
    the mean residual) computed per leaf, or per cell when
    ``cfg.max_leaves`` is None.  Cells never populated in the full
    training data keep a score of 0.  Returns the tables at the round with
    the best validation loss plus the validation-loss history.
    """
    fi, w, vi = bag.fit_idx, bag.fit_w, bag.val_idx
    y_fit, y_val = y[fi], y[vi]
    f_fit, f_val = base[fi].copy(), base[vi].copy()
    c_fit = [c[fi] for c in codes]
    c_val = [c[vi] for c in codes]
    sizes = [int(np.prod(s)) for s in shapes]
    wsum = [np.bincount(c, weights=w, minlength=k) for c, k in zip(c_fit, sizes)]
    tables = [np.zeros(k) for k in sizes]
    best = [t.copy() for t in tables]
    history = [_loss(y_val, f_val, family)]
    best_loss, best_round, stale = history[0], 0, 0
    lr = cfg.learning_rate
    gaussian = family == "gaussian"

    for rnd in range(1, cfg.max_rounds + 1):
        for t, k in enumerate(sizes):
            c = c_fit[t]
            if gaussian:
                num = np.bincount(c, weights=w * (y_fit - f_fit), minlength=k)
                den = wsum[t]
            else:
                p = _sigmoid(f_fit)
                num = np.bincount(c, weights=w * (y_fit - p), minlength=k)
                den = np.bincount(c, weights=w * p * (1.0 - p), minlength=k)
            if cfg.max_leaves is None:
                step = np.zeros(k)
                ok = den > 0
                step[ok] = num[ok] / den[ok]
            elif len(shapes[t]) == 1:
                step = _segment_step(num, den, wsum[t], cfg.max_leaves, cfg.min_samples_leaf)
            else:
                shape = shapes[t]
                step = _pair_step(num.reshape(shape), den.reshape(shape),
                                  wsum[t].reshape(shape), cfg.min_samples_leaf).ravel()
            step *= lr
            step[~populated[t]] = 0.0
            tables[t] += step
            f_fit += step[c]
            if vi.size:
                f_val += step[c_val[t]]
        if not vi.size:
            best_round = rnd
            continue
        loss = _loss(y_val, f_val, family)
        history.append(loss)
        if loss < best_loss:
            best_loss, best_round, stale = loss, rnd, 0
            best = [t.copy() for t in tables]
        else:
            stale += 1
            if stale >= cfg.early_stop_patience:
                break
    if not vi.size:
        best = tables
    return best, {"best_round": best_round, "rounds": len(history) - 1,
                  "validation_loss": history}


def _init_score(y, w, family) -> float:
    m = float(np.average(y, weights=w))
    if family == "gaussian":
        return m
    m = min(max(m, 1e-12), 1 - 1e-12)
    return math.log(m / (1 - m))


def _workers(n_jobs: int) -> int:
    env = os.environ.get(THREADS_ENV)
    cap = int(env) if env else (os.cpu_count() or 1)
    return max(1, min(cap, n_jobs))


def _run_bags(bags, fn):
    n = _workers(len(bags))
    if n == 1:
        return [fn(b) for b in bags]
    with ThreadPoolExecutor(max_workers=n) as ex:
        return list(ex.map(fn, bags))


def _center(table, cells, populated):
    """Shift the populated cells so the mean contribution over training rows is zero."""
    m = float(table.ravel()[cells].mean()) if cells.size else 0.0
    out = table.copy()
    out[populated] -= m
    return out, m


def fit_ebm(train: Dataset, config: TrainConfig = TrainConfig(),
            family: str = "gaussian") -> EbmModel:
    """Fit an additive model by cyclic gradient boosting.

    Stage one boosts one main-effect term per feature until validation
    loss stops improving.  Stage two ranks feature pairs on the stage-one
    residuals, then boosts the ``n_interactions`` best pairs on a coarse
    grid with the main effects frozen.  With several outer bags each stage
    is run per bootstrap replicate and the tables are averaged.  Finally
    every table is mean-centered over the training rows and the means are
    folded into the intercept.
    """
    if family not in ("gaussian", "binomial"):
        raise ValueError(f"unknown family {family!r}")
    if train.n_rows == 0 or train.n_features == 0:
        raise ValueError("training data must have rows and features")
    if train.target is None:
        raise ValueError("training data has no target")
    y = np.asarray(train.target, dtype=np.float64)
    if not np.all(np.isfinite(y)):
        raise ValueError("target has non-finite values")
    if family == "binomial":
        check_binary_target(y)

    spec = build_bins(train, config.max_bins)
    binned = apply_bins(train, spec)
    n, p = binned.codes.shape
    columns = [binned.column(j) for j in range(p)]
    sizes = spec.n_bins
    bags = _make_bags(n, config)
    training_log = []

    # stage 1: main effects
    main_shapes = [(k,) for k in sizes]
    main_hit = [np.bincount(c, minlength=k) > 0 for c, k in zip(columns, sizes)]

    def fit_main(bag):
        b0 = _init_score(y[bag.fit_idx], bag.fit_w, family)
        tables, info = _boost(columns, main_shapes, y, np.full(n, b0), bag, family,
                              config, main_hit)
        return b0, tables, info

    results = _run_bags(bags, fit_main)
    intercept = float(np.mean([r[0] for r in results]))
    for b, r in enumerate(results):
        training_log.append({"stage": "main", "bag": b, **r[2]})

    terms = []
    f = np.zeros(n)
    for j in range(p):
        table = np.mean([r[1][j] for r in results], axis=0)
        table, m = _center(table, columns[j], main_hit[j])
        intercept += m
        terms.append(Term(MAIN, (j,), table))
        f += table[columns[j]]
    f += intercept

    # stage 2: pairs
    n_pairs = min(config.n_interactions, p * (p - 1) // 2)
    if n_pairs > 0:
        resid = y - (f if family == "gaussian" else _sigmoid(f))
        pairs = rank_pairs(binned, resid, n_pairs, config.interaction_bins)
        maps = [coarse_map(fb, config.interaction_bins) for fb in spec.features]
        pair_codes, pair_shapes, pair_hit = [], [], []
        for i, j in pairs:
            (mi, ki), (mj, kj) = maps[i], maps[j]
            code = mi[columns[i]] * kj + mj[columns[j]]
            pair_codes.append(code)
            pair_shapes.append((ki, kj))
            pair_hit.append(np.bincount(code, minlength=ki * kj) > 0)

        def fit_pairs(bag):
            return _boost(pair_codes, pair_shapes, y, f, bag, family, config, pair_hit)

        results = _run_bags(bags, fit_pairs)
        for b, r in enumerate(results):
            training_log.append({"stage": "pairs", "bag": b,
                                 "pairs": [list(pr) for pr in pairs], **r[1]})
        for t, (i, j) in enumerate(pairs):
            coarse = np.mean([r[0][t] for r in results], axis=0)
            coarse, m = _center(coarse, pair_codes[t], pair_hit[t])
            intercept += m
            full = coarse.reshape(pair_shapes[t])[np.ix_(maps[i][0], maps[j][0])]
            terms.append(Term(PAIR, (i, j), full))

    link = IDENTITY if family == "gaussian" else LOGIT
    return EbmModel(intercept, link, spec, tuple(terms), tuple(training_log))
