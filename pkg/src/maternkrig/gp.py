"""Gaussian process simulation and kriging under a possibly misspecified kernel.

The interpolant uses an imposed kernel Phi while the data come from a process
with true kernel Psi::

    I_{Phi,X} Z(x) = r_Phi(x)^T K_Phi^{-1} Y

``power_function`` is the conditional variance under the true kernel and
``quasi_power`` the mean-squared error of the misspecified interpolant.
"""
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve, solve_triangular
from scipy.linalg.lapack import dpocon, dpotrf
from scipy.spatial.distance import cdist
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import as_points, as_query_point
from .designs import Design
from .exceptions import ContractError
from .exceptions import IllConditionedError
from .kernels import KernelSpec, correlation

__all__ = [
    "JITTER_LADDER",
    "GpSample",
    "ErrorNormSpec",
    "KrigingInterpolator",
    "corr_matrix",
    "cross_corr",
    "cholesky_spd",
    "sample_gp",
    "fit_kriging",
    "predict",
    "power_function",
    "quasi_power",
    "empirical_error",
]

JITTER_LADDER = (0.0, 1e-12, 1e-10, 1e-8)


def cross_corr(kernel, a, b):
    """Correlations between every row of ``a`` and every row of ``b``."""
    a = as_points(a)
    b = as_points(b, dim=a.shape[1])
    return correlation(kernel, cdist(a, b), dim=a.shape[1])


def corr_matrix(kernel, points):
    """Symmetric correlation matrix with unit diagonal."""
    pts = as_points(points)
    if pts.shape[1] == 1:
        r = np.abs(pts - pts.T)
    else:
        r = cdist(pts, pts)
    m = correlation(kernel, r, dim=pts.shape[1])
    m = 0.5 * (m + m.T)
    np.fill_diagonal(m, 1.0)
    return m


def cholesky_spd(m, max_jitter=1e-8):
    """Lower Cholesky factor of ``m + j I`` for the smallest workable jitter.

    Jitters are tried in the order 0, 1e-12, 1e-10, 1e-8, stopping at
    ``max_jitter``.

    Returns
    -------
    factor : ndarray
        Lower-triangular ``L`` with ``L @ L.T == m + jitter * I``.
    jitter : float

    Raises
    ------
    IllConditionedError
        When every permitted jitter fails.
    """
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError("cholesky_spd needs a square matrix")
    ladder = [j for j in JITTER_LADDER if j <= max_jitter]
    info = 0
    for jitter in ladder:
        a = m + jitter * np.eye(m.shape[0]) if jitter else m
        c, info = dpotrf(a, lower=1, clean=1, overwrite_a=0)
        if info == 0:
            return c, jitter
    raise IllConditionedError(info, ladder[-1])


@dataclass(frozen=True)
class GpSample:
    """One joint draw of a zero-mean Gaussian process at ``points``."""

    points: np.ndarray
    values: np.ndarray
    true_kernel: KernelSpec
    seed: int = None
    jitter_used: float = 0.0

    def __post_init__(self):
        if len(self.values) != len(self.points):
            raise ContractError("values and points must have equal length")


@dataclass(frozen=True)
class ErrorNormSpec:
    """How to summarize prediction errors over an evaluation set.

    ``kind`` is "sup" or "lp".  The Lp norm uses equal-weight quadrature over
    the evaluation points, scaled by the domain volume.
    """

    kind: str = "sup"
    p: float = 2.0
    eval_set: Design = None

    def __post_init__(self):
        kind = str(self.kind).lower()
        if kind not in ("sup", "lp"):
            raise ValueError(f"unknown norm kind {self.kind!r}")
        object.__setattr__(self, "kind", kind)
        if kind == "lp" and not self.p >= 1:
            raise ValueError("Lp norms need p >= 1")

    def reduce(self, residuals, volume=1.0):
        """Norm of a residual vector (or of each row of a 2-D array)."""
        abs_res = np.abs(np.asarray(residuals, dtype=float))
        if self.kind == "sup":
            return abs_res.max(axis=-1)
        m = abs_res.shape[-1]
        return (volume / m * np.sum(abs_res**self.p, axis=-1)) ** (1.0 / self.p)


def sample_gp(kernel, points, seed, max_jitter=1e-8):
    """Draw ``Z`` jointly at all ``points`` with covariance ``sigma2 * corr_matrix``.

    Points must be distinct.  The draw is a deterministic function of ``seed``.
    """
    pts = as_points(points)
    factor, jitter = cholesky_spd(corr_matrix(kernel, pts), max_jitter)
    rng = np.random.default_rng(seed)
    values = np.sqrt(kernel.sigma2) * (factor @ rng.standard_normal(pts.shape[0]))
    return GpSample(pts, values, kernel, seed, jitter)


class KrigingInterpolator(RegressorMixin, BaseEstimator):
    """Simple-kriging interpolator with a fixed, possibly misspecified kernel.

    Parameters
    ----------
    kernel : KernelSpec, default=Matérn(nu=1.5, phi=1)
        The imposed correlation.  It is not estimated; ``sigma2`` cancels in
        the predictor and is only used by variance-type diagnostics.
    max_jitter : float, default=1e-8
        Largest diagonal jitter allowed when factoring the correlation matrix.

    Attributes
    ----------
    X_fit_ : ndarray of shape (n, d)
    y_fit_ : ndarray of shape (n,)
    chol_factor_ : ndarray of shape (n, n)
        Lower Cholesky factor of ``K + jitter_used_ * I``.
    weights_ : ndarray of shape (n,)
        Solution of ``K w = y``.
    jitter_used_ : float
    rcond_ : float
        LAPACK estimate of ``1 / cond_1(K + jitter_used_ * I)``.  Below machine
        epsilon the matrix is numerically singular and predictions at design
        points can miss the observations.

    Notes
    -----
    When no jitter is needed the weights are refined with residuals taken in
    ``np.longdouble`` and kept at that precision for :meth:`predict`.  The
    weights grow like ``cond(K) * |y|``, so a plain double solve would lose
    the interpolation property once ``cond(K)`` passes about 1e10.
    """

    def __init__(self, kernel=None, max_jitter=1e-8):
        self.kernel = kernel
        self.max_jitter = max_jitter

    @property
    def kernel_(self):
        return self.kernel if self.kernel is not None else KernelSpec()

    def fit(self, X, y):
        X = as_points(X, name="X")
        y = np.asarray(y, dtype=float).ravel()
        if y.shape[0] != X.shape[0]:
            raise ContractError(f"{y.shape[0]} observations for {X.shape[0]} design points")
        self.kernel_.check_dimension(X.shape[1])
        k = corr_matrix(self.kernel_, X)
        factor, jitter = cholesky_spd(k, self.max_jitter)
        self.rcond_ = float(dpocon(factor, float(np.abs(k).sum(axis=0).max()) + jitter, uplo="L")[0])
        self.X_fit_ = X
        self.y_fit_ = y
        self.chol_factor_ = factor
        self.jitter_used_ = jitter
        self._weights_ext = _refined_solve(factor, k, y, refine=jitter == 0.0)
        self.weights_ = self._weights_ext.astype(float)
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        check_is_fitted(self, "weights_")
        X = as_points(X, dim=self.n_features_in_, name="X")
        r = cross_corr(self.kernel_, X, self.X_fit_).astype(np.longdouble)
        return (r @ self._weights_ext).astype(float)

    def prediction_weights(self, X):
        """Rows ``r_Phi(x)^T K_Phi^{-1}``: the linear map from observations to predictions."""
        check_is_fitted(self, "weights_")
        X = as_points(X, dim=self.n_features_in_, name="X")
        r = cross_corr(self.kernel_, X, self.X_fit_)
        return cho_solve((self.chol_factor_, True), r.T).T

    def _more_tags(self):
        return {"requires_y": True}


def _cholesky_ext(k):
    """Lower Cholesky factor in ``np.longdouble`` (no LAPACK at this precision)."""
    a = np.array(k, dtype=np.longdouble)
    n = a.shape[0]
    low = np.zeros_like(a)
    for j in range(n):
        d = a[j, j] - low[j, :j] @ low[j, :j]
        if not d > 0:
            return None
        low[j, j] = np.sqrt(d)
        low[j + 1:, j] = (a[j + 1:, j] - low[j + 1:, :j] @ low[j, :j]) / low[j, j]
    return low


def _cho_solve_ext(low, b):
    n = low.shape[0]
    z = np.empty(n, dtype=np.longdouble)
    for i in range(n):
        z[i] = (b[i] - low[i, :i] @ z[:i]) / low[i, i]
    x = np.empty(n, dtype=np.longdouble)
    for i in range(n - 1, -1, -1):
        x[i] = (z[i] - low[i + 1:, i] @ x[i + 1:]) / low[i, i]
    return x


def _refined_solve(factor, k, y, refine, steps=4):
    """Weights ``K^{-1} y`` refined against residuals in extended precision.

    Falls back to an extended-precision factorization when refinement on the
    double factor stalls, which happens once ``cond(K)`` nears 1 / eps.
    """
    w = cho_solve((factor, True), y)
    if not refine or y.size == 0:
        return w.astype(np.longdouble)
    k_ext = k.astype(np.longdouble)
    y_ext = y.astype(np.longdouble)
    w_ext = w.astype(np.longdouble)
    tol = 1e-12 * max(float(np.max(np.abs(y))), 1e-300)
    for _ in range(steps):
        res = y_ext - k_ext @ w_ext
        if float(np.max(np.abs(res))) <= tol:
            return w_ext
        w_ext = w_ext + cho_solve((factor, True), res.astype(float))
    res = y_ext - k_ext @ w_ext
    if float(np.max(np.abs(res))) <= tol:
        return w_ext
    low = _cholesky_ext(k_ext)
    if low is None:
        return w_ext
    for _ in range(steps):
        w_ext = w_ext + _cho_solve_ext(low, y_ext - k_ext @ w_ext)
    return w_ext


def fit_kriging(design, observations, imposed, max_jitter=1e-8):
    """Fit a :class:`KrigingInterpolator` on ``design`` with the imposed kernel."""
    return KrigingInterpolator(imposed, max_jitter).fit(design, observations)


def predict(model, x):
    """Predict at a single point ``x``; returns a float."""
    return float(model.predict(as_query_point(x, model.n_features_in_))[0])


def _single_point(x, dim):
    return np.ndim(x) == 0 or (dim > 1 and np.ndim(x) == 1)


def _finish(values, single, return_n_clamped):
    # roundoff can push 1 - r^T K^{-1} r slightly below zero near design points
    n_clamped = int(np.sum(values < 0))
    out = np.maximum(values, 0.0)
    if single:
        out = float(out[0])
    return (out, n_clamped) if return_n_clamped else out


def power_function(true_kernel, design, x, return_n_clamped=False):
    """Conditional variance ``sigma2 * (1 - r(x)^T K^{-1} r(x))`` under the true kernel.

    ``x`` may be one point or an array of points; values are clamped at 0.
    With ``return_n_clamped=True`` also returns how many values were clamped.
    """
    X = as_points(design)
    xq = as_points(x, dim=X.shape[1])
    factor, _ = cholesky_spd(corr_matrix(true_kernel, X))
    r = cross_corr(true_kernel, xq, X)
    v = solve_triangular(factor, r.T, lower=True)
    p2 = true_kernel.sigma2 * (1.0 - np.sum(v * v, axis=0))
    return _finish(p2, _single_point(x, X.shape[1]), return_n_clamped)


def quasi_power(true_kernel, imposed, design, x, return_n_clamped=False):
    """Mean-squared error of the interpolant built with ``imposed`` when data follow ``true_kernel``.

    With ``c = K_Phi^{-1} r_Phi(x)`` and the best linear weights
    ``c_Psi = K_Psi^{-1} r_Psi(x)``::

        Q^2(x) = P^2(x) + sigma2 * (c - c_Psi)^T K_Psi (c - c_Psi)

    which equals ``sigma2 * (1 - 2 r_Psi^T c + c^T K_Psi c)`` but avoids
    its cancellation, so ``Q^2 >= P^2`` holds in floating point as well.
    """
    X = as_points(design)
    xq = as_points(x, dim=X.shape[1])
    factor_psi, _ = cholesky_spd(corr_matrix(true_kernel, X))
    factor_phi, _ = cholesky_spd(corr_matrix(imposed, X))
    r_psi = cross_corr(true_kernel, xq, X).T
    v = solve_triangular(factor_psi, r_psi, lower=True)
    c_psi = solve_triangular(factor_psi, v, lower=True, trans="T")
    c = cho_solve((factor_phi, True), cross_corr(imposed, xq, X).T)
    excess = factor_psi.T @ (c - c_psi)
    q2 = true_kernel.sigma2 * ((1.0 - np.sum(v * v, axis=0)) + np.sum(excess * excess, axis=0))
    return _finish(q2, _single_point(x, X.shape[1]), return_n_clamped)


def _locate(haystack, needles):
    """Row indices of ``needles`` inside ``haystack`` (exact match)."""
    lookup = {row.tobytes(): i for i, row in enumerate(np.ascontiguousarray(haystack))}
    idx = np.empty(needles.shape[0], dtype=int)
    for j, row in enumerate(np.ascontiguousarray(needles)):
        i = lookup.get(row.tobytes())
        if i is None:
            raise ContractError(f"evaluation point {row.tolist()} is not in the sample")
        idx[j] = i
    return idx


def empirical_error(sample, model, norm):
    """Sup or Lp norm of ``Z - prediction`` over ``norm.eval_set``.

    The sample must contain every evaluation point.
    """
    if norm.eval_set is None:
        raise ContractError("ErrorNormSpec.eval_set is required")
    pts = as_points(sample.points)
    eval_pts = as_points(norm.eval_set, dim=pts.shape[1])
    idx = _locate(pts, eval_pts)
    residuals = np.asarray(sample.values)[idx] - model.predict(eval_pts)
    volume = norm.eval_set.domain.volume if isinstance(norm.eval_set, Design) else 1.0
    return float(norm.reduce(residuals, volume))
