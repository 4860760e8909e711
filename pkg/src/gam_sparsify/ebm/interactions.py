"""Pairwise interaction screening on residuals."""

from __future__ import annotations

import numpy as np

from ..dataset import CATEGORICAL, BinnedMatrix, FeatureBins

DEFAULT_COARSE_BINS = 16


def coarse_map(fb: FeatureBins, n_coarse: int = DEFAULT_COARSE_BINS) -> tuple[np.ndarray, int]:
    """Map each fine bin of ``fb`` onto at most ``n_coarse`` value groups.

    Value bins are merged into contiguous runs of (nearly) equal length,
    which for quantile bins means roughly equal counts.  The unseen and
    missing slots keep groups of their own.  Returns ``(mapping, n_groups)``.
    """
    nv = fb.n_value_bins
    k = max(1, min(n_coarse, nv))
    mapping = np.empty(fb.n_bins, dtype=np.intp)
    mapping[:nv] = np.arange(nv) * k // max(nv, 1)
    slot = k
    if fb.kind == CATEGORICAL:
        mapping[fb.unseen_bin] = slot
        slot += 1
    mapping[fb.missing_bin] = slot
    return mapping, slot + 1


def pair_gains(binned: BinnedMatrix, residuals, n_coarse: int = DEFAULT_COARSE_BINS) -> dict:
    """Residual sum-of-squares reduction of a 2-D cell-mean fit for every pair.

    Fitting cell means ``m_c`` to residuals ``r`` reduces ``sum(r**2)`` by
    ``sum_c n_c * m_c**2``.
    """
    r = np.asarray(residuals, dtype=np.float64).ravel()
    if r.size != binned.n_rows:
        raise ValueError(f"residuals have {r.size} rows, binned data has {binned.n_rows}")
    feats = binned.spec.features
    p = len(feats)
    if p < 2:
        raise ValueError("interaction ranking needs at least two features")
    codes, sizes = [], []
    for j, fb in enumerate(feats):
        m, k = coarse_map(fb, n_coarse)
        codes.append(m[binned.column(j)])
        sizes.append(k)
    gains = {}
    for i in range(p):
        for j in range(i + 1, p):
            cell = codes[i] * sizes[j] + codes[j]
            ncell = sizes[i] * sizes[j]
            s = np.bincount(cell, weights=r, minlength=ncell)
            n = np.bincount(cell, minlength=ncell)
            hit = n > 0
            gains[(i, j)] = float(np.sum(s[hit] ** 2 / n[hit]))
    return gains


def rank_pairs(binned: BinnedMatrix, residuals, top_k: int,
               n_coarse: int = DEFAULT_COARSE_BINS) -> list[tuple[int, int]]:
    """Return the ``top_k`` feature pairs with the largest residual RSS reduction.

    Ties are broken by lexicographic pair order.
    """
    p = len(binned.spec.features)
    n_pairs = p * (p - 1) // 2
    if p < 2:
        raise ValueError("interaction ranking needs at least two features")
    if not 0 <= top_k <= n_pairs:
        raise ValueError(f"top_k={top_k} outside [0, {n_pairs}]")
    gains = pair_gains(binned, residuals, n_coarse)
    ranked = sorted(gains, key=lambda pair: (-gains[pair], pair))
    return ranked[:top_k]
