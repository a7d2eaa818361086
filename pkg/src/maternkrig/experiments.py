"""Convergence-rate study of kriging under misspecified Matérn smoothness.

For each sample size n and replication, a design is drawn, a Gaussian process
with the true kernel is sampled jointly at the design and at a Halton
evaluation set, the kriging interpolant with the imposed kernel is fitted to
the design values, and the prediction error over the evaluation set is
recorded.  Errors are averaged over replications per n, and
``log(mean error)`` is regressed on ``log(1/n)``.

Every replication derives its seeds from ``(base_seed, n, replication)``, so
serial and parallel runs give identical results.
"""
from dataclasses import asdict, dataclass, field
import hashlib
import json
import math
from typing import NamedTuple

import numpy as np
from joblib import Parallel, delayed

from .designs import GRID, HALTON, RANDOM, Domain, gen_halton, make_design
from .exceptions import ConfigurationError, ExperimentError, IllConditionedError
from .gp import ErrorNormSpec, KrigingInterpolator, cholesky_spd, corr_matrix
from .kernels import KernelSpec

__all__ = [
    "ExperimentConfig",
    "RateFit",
    "SlopeTheory",
    "Table2Row",
    "TABLE2_PAIRS",
    "theoretical_slope",
    "ols_fit",
    "run_rate_study",
    "table2_configs",
    "reproduce_table2",
    "replication_seeds",
]

DEFAULT_SAMPLE_SIZES = tuple(range(20, 151, 10))
TABLE2_PAIRS = ((1.1, 1.3), (1.1, 2.8), (2.1, 2.8), (1.5, 3.5))
MAX_DROP_FRACTION = 0.10
_QUASI_UNIFORM = (GRID, HALTON)


class SlopeTheory(NamedTuple):
    """Predicted exponent ``a`` in ``error ~ n^(-a)``.

    ``converges`` is False when the exponent is not positive.  ``log_factor``
    marks rates that carry a polylog factor the regression ignores.
    """

    value: float
    converges: bool
    log_factor: bool

    def __str__(self):
        return f"{self.value:g}" if self.converges else f"{self.value:g} (no convergence)"


def theoretical_slope(nu0, nu, scheme, norm_kind="sup", dim=1):
    """Theoretical convergence exponent for the error of the misspecified interpolant.

    Quasi-uniform schemes (grid, Halton) give ``min(nu, nu0) / dim``.  Uniform
    random designs in one dimension have fill distance of order
    ``log(n) / n`` and mesh ratio of order ``n log n``, which gives
    ``2 nu0 - nu`` when oversmoothed and ``nu`` (up to logs) otherwise.
    The exponent is the same for the sup norm and for Lp norms; only the
    log factors differ.
    """
    if not (nu0 > 0 and nu > 0):
        raise ConfigurationError("smoothness parameters must be positive")
    if norm_kind not in ("sup", "lp"):
        raise ConfigurationError(f"unknown norm kind {norm_kind!r}")
    sup = norm_kind == "sup"
    if scheme in _QUASI_UNIFORM:
        value = min(nu, nu0) / dim
        return SlopeTheory(value, value > 0, sup)
    if scheme != RANDOM:
        raise ConfigurationError(f"no rate theory for scheme {scheme!r}")
    if dim != 1:
        raise ConfigurationError("random-design rates are only tabulated for d = 1")
    if nu > nu0:
        value = 2.0 * nu0 - nu
        return SlopeTheory(value, value > 0, True)
    return SlopeTheory(float(nu), True, True)


def ols_fit(xs, ys):
    """Least-squares line ``y = slope * x + intercept``.

    Returns
    -------
    slope, intercept, r_squared : float
        ``r_squared`` is ``1 - SS_res / SS_tot``, defined as 0 when the
        responses have no variance.
    """
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("xs and ys must be 1-D and of equal length")
    if x.size < 3:
        raise ValueError("ols_fit needs at least three points")
    xc = x - x.mean()
    sxx = float(xc @ xc)
    if sxx <= 0.0 or sxx <= 1e-14 * float(x @ x):
        raise ValueError("xs are all equal; slope is undefined")
    yc = y - y.mean()
    slope = float(xc @ yc) / sxx
    intercept = float(y.mean() - slope * x.mean())
    ss_tot = float(yc @ yc)
    if ss_tot == 0.0:
        return slope, intercept, 0.0
    resid = y - (slope * x + intercept)
    r2 = 1.0 - float(resid @ resid) / ss_tot
    return slope, intercept, min(max(r2, 0.0), 1.0)


@dataclass(frozen=True)
class ExperimentConfig:
    """One cell of the rate study.

    ``phi_imposed=None`` reuses ``phi`` for the imposed kernel.
    """

    nu0: float
    nu: float
    scheme: str = GRID
    phi: float = 1.0
    phi_imposed: float = None
    sigma2: float = 1.0
    sample_sizes: tuple = DEFAULT_SAMPLE_SIZES
    replications: int = 30
    eval_points: int = 200
    norm: str = "sup"
    p: float = 2.0
    base_seed: int = 20210101
    dim: int = 1
    max_jitter: float = 1e-8

    def __post_init__(self):
        sizes = tuple(int(n) for n in self.sample_sizes)
        object.__setattr__(self, "sample_sizes", sizes)
        scheme = str(self.scheme).lower()
        object.__setattr__(self, "scheme", scheme)
        if scheme not in (RANDOM, GRID, HALTON):
            raise ConfigurationError(f"unknown scheme {self.scheme!r}")
        if not sizes or any(n < 2 for n in sizes):
            raise ConfigurationError("sample sizes must all be >= 2")
        if any(b <= a for a, b in zip(sizes, sizes[1:])):
            raise ConfigurationError("sample sizes must be strictly increasing")
        if int(self.replications) < 1:
            raise ConfigurationError("replications must be >= 1")
        if int(self.eval_points) < 1:
            raise ConfigurationError("eval_points must be >= 1")
        if self.base_seed is None or int(self.base_seed) < 0:
            raise ConfigurationError("base_seed must be a nonnegative integer")
        # constructing these validates nu0, nu, phi, sigma2, norm and p
        self.true_kernel
        self.imposed_kernel
        ErrorNormSpec(self.norm, self.p)

    @property
    def true_kernel(self):
        return KernelSpec.matern(self.nu0, self.phi, self.sigma2)

    @property
    def imposed_kernel(self):
        phi = self.phi if self.phi_imposed is None else self.phi_imposed
        return KernelSpec.matern(self.nu, phi, self.sigma2)

    @property
    def domain(self):
        return Domain(self.dim)

    def norm_spec(self):
        return ErrorNormSpec(self.norm, self.p, gen_halton(self.domain, self.eval_points))

    def to_dict(self):
        d = asdict(self)
        d["sample_sizes"] = list(self.sample_sizes)
        return d

    @classmethod
    def from_dict(cls, data):
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigurationError(f"unknown experiment fields: {sorted(unknown)}")
        return cls(**data)

    def config_hash(self):
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


@dataclass
class RateFit:
    slope: float
    intercept: float
    r_squared: float
    theoretical: SlopeTheory
    per_n_mean_error: list
    errors: dict = field(default_factory=dict)
    dropped: int = 0
    max_jitter_used: float = 0.0
    config: ExperimentConfig = None

    @property
    def theoretical_slope(self):
        return self.theoretical.value

    def plot_data(self):
        """Pairs ``(log(1/n), log(mean error))`` underlying the regression."""
        return [(-math.log(n), math.log(e)) for n, e in self.per_n_mean_error]

    def to_dict(self):
        return {
            "config": self.config.to_dict() if self.config else None,
            "slope": self.slope,
            "intercept": self.intercept,
            "r_squared": self.r_squared,
            "theoretical_slope": self.theoretical.value,
            "theoretical_converges": self.theoretical.converges,
            "per_n_mean_error": [[n, e] for n, e in self.per_n_mean_error],
            "errors": {str(n): [None if math.isnan(v) else v for v in errs]
                       for n, errs in self.errors.items()},
            "dropped_replications": self.dropped,
            "max_jitter_used": self.max_jitter_used,
        }


def replication_seeds(base_seed, n, rep):
    """(design seed, process seed) for one replication."""
    ss = np.random.SeedSequence([int(base_seed), int(n), int(rep)])
    design_seed, gp_seed = ss.generate_state(2)
    return int(design_seed), int(gp_seed)


class _Cell:
    """Everything fixed once the design is fixed.

    Holds the joint Cholesky factor of the true covariance over the design
    plus evaluation points, and the linear map from design values to
    predictions at the evaluation points.
    """

    def __init__(self, config, design_pts, eval_pts):
        n = design_pts.shape[0]
        joint = np.concatenate([design_pts, eval_pts])
        # grid and Halton points can coincide exactly (dyadic rationals)
        uniq, inverse = np.unique(joint, axis=0, return_inverse=True)
        inverse = inverse.ravel()
        self.factor, jitter_true = cholesky_spd(
            corr_matrix(config.true_kernel, uniq), config.max_jitter
        )
        self.design_idx = inverse[:n]
        self.eval_idx = inverse[n:]
        model = KrigingInterpolator(config.imposed_kernel, config.max_jitter)
        model.fit(design_pts, np.zeros(n))
        self.weights = model.prediction_weights(eval_pts)
        self.jitter = max(jitter_true, model.jitter_used_)
        self.sigma = math.sqrt(config.sigma2)

    def residuals(self, gp_seed):
        rng = np.random.default_rng(gp_seed)
        values = self.sigma * (self.factor @ rng.standard_normal(self.factor.shape[0]))
        return values[self.eval_idx] - self.weights @ values[self.design_idx]


def _run_reps(config, n, reps, eval_pts, norm, volume):
    """Errors for replications ``reps`` at sample size n; NaN marks a dropped replication."""
    out = []
    jitter = 0.0
    fixed_cell = None
    if config.scheme != RANDOM:
        try:
            design = make_design(config.scheme, config.domain, n)
            fixed_cell = _Cell(config, design.points, eval_pts)
        except IllConditionedError:
            return [math.nan] * len(reps), jitter
        jitter = fixed_cell.jitter
    for rep in reps:
        design_seed, gp_seed = replication_seeds(config.base_seed, n, rep)
        cell = fixed_cell
        if cell is None:
            try:
                design = make_design(RANDOM, config.domain, n, design_seed)
                cell = _Cell(config, design.points, eval_pts)
            except IllConditionedError:
                out.append(math.nan)
                continue
            jitter = max(jitter, cell.jitter)
        out.append(float(norm.reduce(cell.residuals(gp_seed), volume)))
    return out, jitter


def run_rate_study(config, n_jobs=1):
    """Run the replicated error study for one configuration and fit the log-log slope.

    Parameters
    ----------
    config : ExperimentConfig
    n_jobs : int, default=1
        Worker processes for joblib.  Results do not depend on it.

    Raises
    ------
    ExperimentError
        If more than 10% of replications fail to factor, or a sample size
        loses all of its replications.
    """
    norm = config.norm_spec()
    eval_pts = norm.eval_set.points
    volume = config.domain.volume
    reps = list(range(config.replications))
    if config.scheme == RANDOM and n_jobs != 1:
        chunks = [(n, [r]) for n in config.sample_sizes for r in reps]
    else:
        chunks = [(n, reps) for n in config.sample_sizes]
    if n_jobs == 1:
        results = [_run_reps(config, n, rs, eval_pts, norm, volume) for n, rs in chunks]
    else:
        results = Parallel(n_jobs=n_jobs)(
            delayed(_run_reps)(config, n, rs, eval_pts, norm, volume) for n, rs in chunks
        )
    errors = {n: [] for n in config.sample_sizes}
    max_jitter = 0.0
    for (n, _), (errs, jitter) in zip(chunks, results):
        errors[n].extend(errs)
        max_jitter = max(max_jitter, jitter)

    total = len(config.sample_sizes) * config.replications
    dropped = sum(int(np.isnan(v).sum()) for v in errors.values())
    if dropped > MAX_DROP_FRACTION * total:
        raise ExperimentError(
            f"{dropped} of {total} replications failed to factor "
            f"(nu0={config.nu0}, nu={config.nu}, scheme={config.scheme})"
        )
    per_n = []
    for n in config.sample_sizes:
        vals = np.asarray(errors[n])
        vals = vals[~np.isnan(vals)]
        if vals.size == 0:
            raise ExperimentError(f"every replication failed at n={n}")
        per_n.append((n, float(vals.mean())))
    theory = theoretical_slope(config.nu0, config.nu, config.scheme, config.norm, config.dim)
    if len(per_n) < 3:
        raise ExperimentError("need at least three sample sizes to fit a slope")
    xs = [-math.log(n) for n, _ in per_n]
    ys = [math.log(e) for _, e in per_n]
    slope, intercept, r2 = ols_fit(xs, ys)
    return RateFit(slope, intercept, r2, theory, per_n, errors, dropped, max_jitter, config)


@dataclass(frozen=True)
class Table2Row:
    nu0: float
    nu: float
    scheme: str
    sample_sizes: tuple
    estimated_slope: float
    theoretical: SlopeTheory
    relative_difference: float
    r_squared: float
    dropped_replications: int

    @classmethod
    def from_fit(cls, fit):
        cfg = fit.config
        ts = fit.theoretical.value
        rd = abs(fit.slope - ts) / ts if ts > 0 else None
        return cls(cfg.nu0, cfg.nu, cfg.scheme, cfg.sample_sizes, fit.slope,
                   fit.theoretical, rd, fit.r_squared, fit.dropped)


def table2_configs(replications=30, base_seed=20210101, sample_sizes=DEFAULT_SAMPLE_SIZES, **overrides):
    """The eight (nu0, nu, scheme) cells of the oversmoothing study, random before grid."""
    return [
        ExperimentConfig(nu0=nu0, nu=nu, scheme=scheme, replications=replications,
                         base_seed=base_seed, sample_sizes=tuple(sample_sizes), **overrides)
        for nu0, nu in TABLE2_PAIRS
        for scheme in (RANDOM, GRID)
    ]


def reproduce_table2(configs, n_jobs=1):
    """Run each configuration and return one :class:`Table2Row` per config.

    Also returns the underlying fits, in the same order, for auditing.
    """
    fits = [run_rate_study(cfg, n_jobs=n_jobs) for cfg in configs]
    return [Table2Row.from_fit(f) for f in fits], fits
