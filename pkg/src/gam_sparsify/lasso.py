"""L1-penalized regression paths by cyclic coordinate descent.

Objectives, with ``eta = offset + b0 + X @ beta``:

gaussian
    ``1/(2n) * sum((y - eta)**2) + lam * sum(|beta|)``
binomial
    ``-1/n * loglik(y, sigmoid(eta)) + lam * sum(|beta|)``

The intercept is never penalized or constrained.  With ``positive=True``
every ``beta_j`` is constrained to be non-negative.

Each penalized least-squares problem is solved on a weighted, centered
Gram matrix so the intercept is profiled out exactly; the binomial family
wraps that solver in an iteratively reweighted least-squares loop.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

GAUSSIAN = "gaussian"
BINOMIAL = "binomial"
FAMILIES = (GAUSSIAN, BINOMIAL)

PROB_FLOOR = 1e-5
_MAX_OUTER = 100
_MAX_HALVINGS = 30


class ConvergenceWarning(UserWarning):
    pass


@dataclass(frozen=True)
class LassoConfig:
    family: str = GAUSSIAN
    positive: bool = True
    n_lambda: int = 100
    lambda_min_ratio: float | None = None  # None: 1e-4 if n > p else 1e-2
    standardize: bool = False
    offset: np.ndarray | None = field(default=None, compare=False, repr=False)
    tol: float = 1e-7
    max_iter: int = 100_000

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"family must be one of {FAMILIES}, got {self.family!r}")
        if self.n_lambda < 1:
            raise ValueError("n_lambda must be positive")
        if self.lambda_min_ratio is not None and not 0 < self.lambda_min_ratio < 1:
            raise ValueError("lambda_min_ratio must lie in (0, 1)")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be positive")


@dataclass(frozen=True)
class LassoPath:
    lambdas: np.ndarray      # (n_lambda,) strictly decreasing
    coefs: np.ndarray        # (n_lambda, p)
    intercepts: np.ndarray   # (n_lambda,)
    df: np.ndarray           # (n_lambda,) nonzero counts
    converged: np.ndarray    # (n_lambda,) bool
    lambda_max: float
    family: str = GAUSSIAN

    def __len__(self):
        return len(self.lambdas)

    def linear_predictor(self, X, index: int, offset=None) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        eta = self.intercepts[index] + X @ self.coefs[index]
        return eta if offset is None else eta + offset

    def to_csv(self, path, names=None) -> None:
        """Write one row per lambda: lambda, df, intercept, coef_<name>..."""
        p = self.coefs.shape[1]
        names = names if names is not None else [f"x{j}" for j in range(p)]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["lambda", "df", "intercept"] + [f"coef_{n}" for n in names])
            for k in range(len(self)):
                w.writerow([repr(float(self.lambdas[k])), int(self.df[k]),
                            repr(float(self.intercepts[k]))]
                           + [repr(float(c)) for c in self.coefs[k]])


# ---------------------------------------------------------------------------
# Problem setup
# ---------------------------------------------------------------------------

def _sigmoid(eta):
    return np.exp(-np.logaddexp(0.0, -eta))


class _Problem:
    """Validated inputs on the (optionally standardized) solver scale."""

    def __init__(self, X, y, config: LassoConfig):
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64).ravel()
        if X.ndim != 2:
            raise ValueError("X must be two-dimensional")
        n, p = X.shape
        if n == 0:
            raise ValueError("X has no rows")
        if y.size != n:
            raise ValueError(f"y has {y.size} rows, X has {n}")
        if np.isnan(X).any() or np.isnan(y).any():
            raise ValueError("NaN in lasso inputs")
        if config.family == BINOMIAL and not np.all((y == 0) | (y == 1)):
            raise ValueError("binomial family requires a 0/1 response")
        if config.offset is None:
            offset = np.zeros(n)
        else:
            offset = np.asarray(config.offset, dtype=np.float64).ravel()
            if offset.size != n:
                raise ValueError(f"offset has {offset.size} rows, X has {n}")
        if config.standardize:
            scale = X.std(axis=0)
            scale[scale == 0] = 1.0
        else:
            scale = np.ones(p)
        self.X = X / scale
        self.y = y
        self.offset = offset
        self.scale = scale
        self.n, self.p = n, p
        self.config = config
        self._gauss = None

    # null model -----------------------------------------------------------

    def null_intercept(self) -> float:
        y, o = self.y, self.offset
        if self.config.family == GAUSSIAN:
            return float(np.mean(y - o))
        ybar = y.mean()
        if ybar <= 0.0 or ybar >= 1.0:
            raise ValueError("binomial response has a single class")
        b0 = math.log(ybar / (1.0 - ybar)) - float(np.mean(o))
        for _ in range(100):
            mu = _sigmoid(o + b0)
            step = np.sum(y - mu) / np.sum(mu * (1.0 - mu))
            b0 += step
            if abs(step) < 1e-15 * max(1.0, abs(b0)):
                break
        return float(b0)

    def null_gradient(self, b0: float) -> np.ndarray:
        """Negative loss gradient ``X^T (y - mu) / n`` at the null model."""
        if self.config.family == GAUSSIAN:
            g = self.gaussian_moments()[1]
            return g
        r = self.y - _sigmoid(self.offset + b0)
        return self.X.T @ r / self.n

    def lambda_max(self) -> float:
        g = self.null_gradient(self.null_intercept())
        if self.p == 0:
            return 0.0
        return float(np.max(g) if self.config.positive else np.max(np.abs(g)))

    # gaussian -------------------------------------------------------------

    def gaussian_moments(self):
        if self._gauss is None:
            z = self.y - self.offset
            xm = self.X.mean(axis=0)
            zm = z.mean()
            Xc = self.X - xm
            G = Xc.T @ Xc / self.n
            c = Xc.T @ (z - zm) / self.n
            self._gauss = (G, c, xm, zm)
        return self._gauss

    # objective and optimality --------------------------------------------

    def loss(self, beta, b0) -> float:
        eta = self.offset + b0 + self.X @ beta
        if self.config.family == GAUSSIAN:
            return 0.5 * float(np.mean((self.y - eta) ** 2))
        return float(np.mean(np.logaddexp(0.0, eta) - self.y * eta))

    def objective(self, beta, b0, lam) -> float:
        return self.loss(beta, b0) + lam * float(np.sum(np.abs(beta)))

    def kkt(self, beta, b0, lam) -> float:
        eta = self.offset + b0 + self.X @ beta
        mu = eta if self.config.family == GAUSSIAN else _sigmoid(eta)
        r = self.y - mu
        grad = -(self.X.T @ r) / self.n  # loss gradient
        return _kkt_violation(grad, float(np.mean(r)), beta, lam,
                              self.config.positive)


def _kkt_violation(grad, intercept_grad, beta, lam, positive) -> float:
    viol = abs(intercept_grad)
    if beta.size == 0:
        return viol
    if positive and np.any(beta < 0):
        return math.inf
    nz = beta != 0
    v = np.empty_like(beta)
    v[nz] = np.abs(grad[nz] + lam * np.sign(beta[nz]))
    if positive:
        v[~nz] = np.maximum(-grad[~nz] - lam, 0.0)
    else:
        v[~nz] = np.maximum(np.abs(grad[~nz]) - lam, 0.0)
    return max(viol, float(v.max()))


# ---------------------------------------------------------------------------
# Coordinate descent on a quadratic
# ---------------------------------------------------------------------------

def _cd_quadratic(G, c, lam, beta, positive, tol, max_iter):
    """Minimize ``0.5 b'Gb - c'b + lam |b|_1`` in place by cyclic coordinate descent.

    Alternates full sweeps with sweeps over the active set.  Stops once a
    full sweep moves no coordinate by more than ``tol`` and the KKT
    residual of the quadratic is at most ``tol``.  Returns
    ``(n_sweeps, converged)``.
    """
    p = c.size
    diag = np.diag(G).copy()
    live = np.flatnonzero(diag > 0)
    beta[diag <= 0] = 0.0
    grad = c - G @ beta  # negative gradient of the smooth part

    def sweep(idx):
        dmax = 0.0
        for j in idx:
            bj = beta[j]
            u = grad[j] + diag[j] * bj
            if positive:
                new = max(u - lam, 0.0) / diag[j]
            elif u > lam:
                new = (u - lam) / diag[j]
            elif u < -lam:
                new = (u + lam) / diag[j]
            else:
                new = 0.0
            d = new - bj
            if d != 0.0:
                beta[j] = new
                grad[:] -= d * G[:, j]
                if abs(d) > dmax:
                    dmax = abs(d)
        return dmax

    sweeps = 0
    while sweeps < max_iter:
        dmax = sweep(live)
        sweeps += 1
        if dmax == 0.0:
            return sweeps, True
        if dmax < tol:
            # refresh the running gradient before certifying
            grad[:] = c - G @ beta
            if _kkt_violation(-grad, 0.0, beta, lam, positive) <= tol:
                return sweeps, True
            continue
        active = live[beta[live] != 0]
        while sweeps < max_iter:
            sweeps += 1
            if sweep(active) < tol:
                break
    return sweeps, False


# ---------------------------------------------------------------------------
# Single-lambda solvers
# ---------------------------------------------------------------------------

def _solve_gaussian(prob: _Problem, lam, beta):
    G, c, xm, zm = prob.gaussian_moments()
    cfg = prob.config
    n_iter, ok = _cd_quadratic(G, c, lam, beta, cfg.positive, cfg.tol, cfg.max_iter)
    b0 = float(zm - xm @ beta)
    return beta, b0, ok, n_iter


def _solve_binomial(prob: _Problem, lam, beta, b0):
    cfg = prob.config
    X, y, o, n = prob.X, prob.y, prob.offset, prob.n
    obj = prob.objective(beta, b0, lam)
    total = 0
    for _ in range(_MAX_OUTER):
        eta = o + b0 + X @ beta
        mu = _sigmoid(eta)
        mc = np.clip(mu, PROB_FLOOR, 1.0 - PROB_FLOOR)
        wc = mc * (1.0 - mc)
        z = (eta - o) + (y - mu) / wc
        w = wc / n
        sw = w.sum()
        xm = (w @ X) / sw
        zm = float(w @ z) / sw
        Xc = X - xm
        Xw = Xc * w[:, None]
        G = Xw.T @ Xc
        c = Xw.T @ (z - zm)
        new = beta.copy()
        iters, _ = _cd_quadratic(G, c, lam, new, cfg.positive, 0.1 * cfg.tol,
                                 cfg.max_iter)
        total += iters
        new_b0 = zm - float(xm @ new)
        new_obj = prob.objective(new, new_b0, lam)
        # step halving keeps the outer loop monotone
        halvings = 0
        while new_obj > obj + 1e-13 * max(1.0, abs(obj)) and halvings < _MAX_HALVINGS:
            new = 0.5 * (new + beta)
            new_b0 = 0.5 * (new_b0 + b0)
            new_obj = prob.objective(new, new_b0, lam)
            halvings += 1
        change = max(float(np.max(np.abs(new - beta), initial=0.0)), abs(new_b0 - b0))
        beta, b0, obj = new, new_b0, new_obj
        if change < cfg.tol and prob.kkt(beta, b0, lam) <= cfg.tol:
            return beta, b0, True, total
        if total >= cfg.max_iter:
            break
    return beta, b0, False, total


def _solve(prob: _Problem, lam, beta=None, b0=None, lam_max=None):
    if lam_max is None:
        lam_max = prob.lambda_max()
    if lam >= lam_max:
        return np.zeros(prob.p), prob.null_intercept(), True, 0
    beta = np.zeros(prob.p) if beta is None else np.array(beta, dtype=np.float64)
    if prob.config.positive:
        beta = np.maximum(beta, 0.0)
    if prob.config.family == GAUSSIAN:
        return _solve_gaussian(prob, lam, beta)
    b0 = prob.null_intercept() if b0 is None else float(b0)
    return _solve_binomial(prob, lam, beta, b0)


# ---------------------------------------------------------------------------
# Public API
# ---------------------------------------------------------------------------

def lambda_grid(X, y, config: LassoConfig = LassoConfig()) -> np.ndarray:
    """Log-spaced penalty grid from ``lambda_max`` down to ``lambda_max * ratio``.

    ``lambda_max`` is the smallest penalty at which every coefficient is
    zero: the largest absolute (or, under positivity, largest positive)
    entry of ``X^T r / n`` where ``r`` is the null-model residual.
    """
    prob = _Problem(X, y, config)
    return _grid(prob, prob.lambda_max())


def _grid(prob: _Problem, lam_max: float) -> np.ndarray:
    cfg = prob.config
    if not lam_max > 0:
        # the null model solves every lambda >= 0 (no column improves the
        # fit, or, under positivity, every column points the wrong way);
        # any positive scale gives an all-null path
        g = np.abs(prob.null_gradient(prob.null_intercept()))
        lam_max = float(g.max()) if g.size and g.max() > 0 else 1.0
    ratio = cfg.lambda_min_ratio
    if ratio is None:
        ratio = 1e-4 if prob.n > prob.p else 1e-2
    if cfg.n_lambda == 1:
        return np.array([lam_max])
    return lam_max * np.logspace(0.0, math.log10(ratio), cfg.n_lambda)


def fit_at_lambda(X, y, lam: float, warm=None,
                  config: LassoConfig = LassoConfig()) -> tuple[np.ndarray, float]:
    """Solve the penalized problem at a single ``lam``.

    Returns ``(coefs, intercept)`` on the original column scale.  Emits a
    :class:`ConvergenceWarning` and returns the last iterate if the solver
    does not converge within ``config.max_iter`` sweeps.
    """
    if not math.isfinite(lam) or lam < 0:
        raise ValueError(f"lambda must be finite and non-negative, got {lam}")
    prob = _Problem(X, y, config)
    if warm is not None:
        warm = np.asarray(warm, dtype=np.float64).ravel()
        if warm.size != prob.p:
            raise ValueError(f"warm start has {warm.size} entries, X has {prob.p} columns")
        warm = warm * prob.scale
    beta, b0, ok, _ = _solve(prob, lam, warm)
    if not ok:
        warnings.warn(f"lasso did not converge at lambda={lam:g}", ConvergenceWarning)
    return beta / prob.scale, float(b0)


def lasso_path(X, y, config: LassoConfig = LassoConfig(),
               lambdas=None) -> LassoPath:
    """Fit the regularization path with warm starts along a decreasing grid."""
    prob = _Problem(X, y, config)
    lam_max = prob.lambda_max()
    if lambdas is None:
        lambdas = _grid(prob, lam_max)
    else:
        lambdas = np.asarray(lambdas, dtype=np.float64)
        if lambdas.size == 0 or np.any(np.diff(lambdas) >= 0) or np.any(lambdas < 0):
            raise ValueError("lambdas must be non-negative and strictly decreasing")
    k = lambdas.size
    coefs = np.zeros((k, prob.p))
    intercepts = np.zeros(k)
    converged = np.ones(k, dtype=bool)
    beta, b0 = None, None
    for i, lam in enumerate(lambdas):
        beta, b0, ok, _ = _solve(prob, float(lam), beta, b0, lam_max)
        coefs[i] = beta / prob.scale
        intercepts[i] = b0
        converged[i] = ok
    if not converged.all():
        warnings.warn(f"lasso did not converge at {int((~converged).sum())} of "
                      f"{k} path points", ConvergenceWarning)
    df = np.count_nonzero(coefs, axis=1)
    return LassoPath(lambdas, coefs, intercepts, df, converged, lam_max, config.family)


def kkt_check(X, y, lam: float, coefs, intercept: float,
              config: LassoConfig = LassoConfig()) -> float:
    """Largest violation of the first-order optimality conditions.

    Covers the unpenalized intercept (its gradient must vanish) and every
    coefficient: a nonzero ``beta_j`` needs ``g_j + lam*sign(beta_j) = 0``;
    a zero one needs ``|g_j| <= lam``, or ``g_j >= -lam`` under positivity.
    ``g`` is the loss gradient on the solver scale.  A negative
    coefficient under positivity returns ``inf``.
    """
    prob = _Problem(X, y, config)
    beta = np.asarray(coefs, dtype=np.float64).ravel() * prob.scale
    if beta.size != prob.p:
        raise ValueError("coefs length does not match X")
    return prob.kkt(beta, float(intercept), float(lam))


def penalized_objective(X, y, lam: float, coefs, intercept: float,
                        config: LassoConfig = LassoConfig()) -> float:
    prob = _Problem(X, y, config)
    beta = np.asarray(coefs, dtype=np.float64).ravel() * prob.scale
    return prob.objective(beta, float(intercept), float(lam))


def training_loss(X, y, coefs, intercept: float,
                  config: LassoConfig = LassoConfig()) -> float:
    """Unpenalized loss (half mean squared error or mean negative log-likelihood)."""
    prob = _Problem(X, y, config)
    beta = np.asarray(coefs, dtype=np.float64).ravel() * prob.scale
    return prob.loss(beta, float(intercept))
