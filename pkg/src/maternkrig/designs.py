"""Experimental designs on rectangles and their space-filling metrics.

Metrics follow the usual scattered-data conventions:

* fill distance ``h`` -- largest distance from a domain point to its nearest
  design point,
* separation radius ``q`` -- half the smallest pairwise distance,
* mesh ratio ``rho = h / q``.

In one dimension the fill distance is computed exactly from the sorted
points.  In higher dimensions it is a lower bound obtained from a candidate
lattice, flagged with ``exact=False``.
"""
import csv
from dataclasses import dataclass, field
import io
import math

import numpy as np
from scipy.spatial import cKDTree
from scipy.stats import qmc

from .exceptions import ConfigurationError, DegenerateDesignError

__all__ = [
    "Domain",
    "Design",
    "DesignMetrics",
    "RANDOM",
    "GRID",
    "HALTON",
    "EXTERNAL",
    "gen_random",
    "gen_grid",
    "gen_halton",
    "make_design",
    "separation_radius",
    "fill_distance",
    "mesh_ratio",
    "design_metrics",
    "exponential_spacing_sample",
    "random_design_orders",
    "write_design_csv",
    "read_design_csv",
]

RANDOM = "random"
GRID = "grid"
HALTON = "halton"
EXTERNAL = "external"
SCHEMES = (RANDOM, GRID, HALTON, EXTERNAL)


@dataclass(frozen=True)
class Domain:
    """Axis-aligned box ``prod_i [lo_i, hi_i]``; defaults to the unit cube."""

    dim: int = 1
    bounds: tuple = None

    def __post_init__(self):
        dim = int(self.dim)
        if dim < 1:
            raise ConfigurationError("domain dimension must be positive")
        bounds = self.bounds
        if bounds is None:
            bounds = ((0.0, 1.0),) * dim
        bounds = tuple((float(lo), float(hi)) for lo, hi in bounds)
        if len(bounds) != dim:
            raise ConfigurationError(f"expected {dim} intervals, got {len(bounds)}")
        for lo, hi in bounds:
            if not (math.isfinite(lo) and math.isfinite(hi) and hi > lo):
                raise ConfigurationError(f"interval [{lo}, {hi}] must have positive length")
        object.__setattr__(self, "dim", dim)
        object.__setattr__(self, "bounds", bounds)

    @property
    def lower(self):
        return np.array([b[0] for b in self.bounds])

    @property
    def upper(self):
        return np.array([b[1] for b in self.bounds])

    @property
    def volume(self):
        return float(np.prod(self.upper - self.lower))

    def contains(self, points, tol=0.0):
        pts = np.atleast_2d(points)
        return np.all((pts >= self.lower - tol) & (pts <= self.upper + tol), axis=1)

    def scale(self, unit_points):
        """Map points from the unit cube onto this box."""
        return self.lower + unit_points * (self.upper - self.lower)


@dataclass(frozen=True)
class Design:
    """A finite point set ``X`` in a domain, with its provenance."""

    points: np.ndarray
    domain: Domain = field(default_factory=Domain)
    scheme: str = EXTERNAL
    seed: int = None

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts.reshape(-1, 1)
        if pts.ndim != 2 or pts.shape[1] != self.domain.dim:
            raise ConfigurationError(
                f"points must have shape (n, {self.domain.dim}), got {np.shape(self.points)}"
            )
        if pts.shape[0] == 0:
            raise ConfigurationError("a design needs at least one point")
        if not np.all(self.domain.contains(pts)):
            raise ConfigurationError("design points must lie inside the domain")
        if self.scheme not in SCHEMES:
            raise ConfigurationError(f"unknown design scheme {self.scheme!r}")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    def __len__(self):
        return self.points.shape[0]

    @property
    def n(self):
        return self.points.shape[0]

    @property
    def dim(self):
        return self.domain.dim


@dataclass(frozen=True)
class DesignMetrics:
    fill_distance: float
    separation_radius: float
    mesh_ratio: float
    fill_is_exact: bool

    def as_dict(self):
        return {
            "h": self.fill_distance,
            "q": self.separation_radius,
            "rho": self.mesh_ratio,
            "exact": self.fill_is_exact,
        }


def _domain(domain):
    if domain is None:
        return Domain()
    if isinstance(domain, Domain):
        return domain
    return Domain(int(domain))


def gen_random(domain, n, seed):
    """``n`` i.i.d. uniform points, reproducible from ``seed``.  Points are not sorted."""
    domain = _domain(domain)
    n = int(n)
    if n < 2:
        raise ConfigurationError("random designs need n >= 2")
    rng = np.random.default_rng(seed)
    pts = domain.scale(rng.random((n, domain.dim)))
    return Design(pts, domain, RANDOM, seed)


def gen_grid(domain, n):
    """Equispaced lattice including both endpoints on every axis.

    In ``d > 1`` dimensions ``n`` must be a perfect d-th power.
    """
    domain = _domain(domain)
    n = int(n)
    d = domain.dim
    per_axis = int(round(n ** (1.0 / d)))
    if per_axis**d != n or n < 1:
        raise ConfigurationError(f"grid in d={d} needs a perfect {d}-th power, got n={n}")
    if per_axis == 1:
        axis = np.array([0.5])
    else:
        axis = np.arange(per_axis) / (per_axis - 1)
    mesh = np.meshgrid(*([axis] * d), indexing="ij")
    unit = np.stack([m.ravel() for m in mesh], axis=1)
    return Design(domain.scale(unit), domain, GRID)


def gen_halton(domain, n):
    """First ``n`` points of the (unscrambled) Halton sequence, skipping the origin.

    Bases are the first d primes, so in 1D this is the base-2 van der Corput
    sequence 1/2, 1/4, 3/4, 1/8, ...
    """
    domain = _domain(domain)
    n = int(n)
    if n < 1:
        raise ConfigurationError("Halton designs need n >= 1")
    engine = qmc.Halton(d=domain.dim, scramble=False)
    engine.fast_forward(1)
    return Design(domain.scale(engine.random(n)), domain, HALTON)


def make_design(scheme, domain, n, seed=0):
    if scheme == RANDOM:
        return gen_random(domain, n, seed)
    if scheme == GRID:
        return gen_grid(domain, n)
    if scheme == HALTON:
        return gen_halton(domain, n)
    raise ConfigurationError(f"cannot generate designs for scheme {scheme!r}")


def _points(design):
    if isinstance(design, Design):
        return design.points, design.domain
    pts = np.asarray(design, dtype=float)
    if pts.ndim == 1:
        pts = pts.reshape(-1, 1)
    return pts, Domain(pts.shape[1])


def separation_radius(design):
    """Half the minimum pairwise Euclidean distance.

    Raises
    ------
    DegenerateDesignError
        With fewer than two points or with duplicated points.
    """
    pts, _ = _points(design)
    if pts.shape[0] < 2:
        raise DegenerateDesignError("separation radius needs at least two points")
    if pts.shape[1] == 1:
        gaps = np.diff(np.sort(pts[:, 0]))
        dmin = gaps.min()
    else:
        dist, _ = cKDTree(pts).query(pts, k=2)
        dmin = dist[:, 1].min()
    if dmin <= 0:
        raise DegenerateDesignError("design contains duplicate points")
    return float(dmin / 2.0)


def fill_distance(design, resolution=101):
    """Fill distance of ``design`` in its domain.

    Returns
    -------
    value : float
    exact : bool
        True in 1D, where the value comes from the sorted gaps.  For d > 1
        the value is the largest nearest-point distance over a lattice with
        ``resolution`` nodes per axis, which underestimates the supremum.
    """
    pts, domain = _points(design)
    if pts.shape[0] == 0:
        raise DegenerateDesignError("empty design")
    if domain.dim == 1:
        lo, hi = domain.bounds[0]
        x = np.sort(pts[:, 0])
        candidates = [x[0] - lo, hi - x[-1]]
        if x.size > 1:
            candidates.append(np.diff(x).max() / 2.0)
        return float(max(candidates)), True
    axes = [np.linspace(lo, hi, int(resolution)) for lo, hi in domain.bounds]
    mesh = np.meshgrid(*axes, indexing="ij")
    cand = np.stack([m.ravel() for m in mesh], axis=1)
    dist, _ = cKDTree(pts).query(cand, k=1)
    return float(dist.max()), False


def mesh_ratio(design, resolution=101):
    h, _ = fill_distance(design, resolution)
    return h / separation_radius(design)


def design_metrics(design, resolution=101):
    h, exact = fill_distance(design, resolution)
    q = separation_radius(design)
    return DesignMetrics(h, q, h / q, exact)


def exponential_spacing_sample(n, seed):
    """Normalized partial sums ``(E_1, ..., E_n) / E_{n+1}`` of unit exponentials.

    Distributed as the order statistics of ``n`` i.i.d. uniforms on (0, 1).
    """
    n = int(n)
    if n < 1:
        raise ConfigurationError("n must be positive")
    rng = np.random.default_rng(seed)
    partial = np.cumsum(rng.exponential(1.0, n + 1))
    return partial[:-1] / partial[-1]


def random_design_orders(sample_sizes, replications, seed=0):
    """Monte Carlo medians of the random-design orders in one dimension.

    For each n, draws ``replications`` uniform designs on [0, 1] and reports
    the medians of ``rho_n / (n log n)`` and ``h_n * n / log n``.  Both should
    stay bounded away from 0 and infinity as n grows.

    Returns
    -------
    dict
        Maps n to ``{"rho_scaled": ..., "h_scaled": ...}``.
    """
    root = np.random.SeedSequence(seed)
    out = {}
    for n, child in zip(sample_sizes, root.spawn(len(sample_sizes))):
        rng = np.random.default_rng(child)
        x = np.sort(rng.random((replications, n)), axis=1)
        gaps = np.diff(x, axis=1)
        edge = np.maximum(x[:, 0], 1.0 - x[:, -1])
        h = np.maximum(edge, gaps.max(axis=1) / 2.0)
        q = gaps.min(axis=1) / 2.0
        log_n = math.log(n)
        out[n] = {
            "rho_scaled": float(np.median(h / q) / (n * log_n)),
            "h_scaled": float(np.median(h) * n / log_n),
        }
    return out


def write_design_csv(design, dest, header=False):
    """Write one point per row, comma separated, LF line endings."""
    pts, _ = _points(design)
    own = isinstance(dest, (str, bytes)) or hasattr(dest, "__fspath__")
    fh = open(dest, "w", newline="", encoding="utf-8") if own else dest
    try:
        writer = csv.writer(fh, lineterminator="\n")
        if header:
            writer.writerow([f"x{i + 1}" for i in range(pts.shape[1])])
        for row in pts:
            writer.writerow([repr(float(v)) for v in row])
    finally:
        if own:
            fh.close()


def read_design_csv(source, domain=None, header=None):
    """Read a design CSV.

    ``header=None`` sniffs for a non-numeric first row.  Without an explicit
    domain, the unit cube of the file's dimension is assumed.
    """
    if isinstance(source, (str, bytes)) or hasattr(source, "__fspath__"):
        with open(source, newline="", encoding="utf-8") as fh:
            text = fh.read()
    else:
        text = source.read()
    rows = [r for r in csv.reader(io.StringIO(text)) if r and any(c.strip() for c in r)]
    if not rows:
        raise ConfigurationError("design CSV is empty")
    if header is None:
        try:
            [float(c) for c in rows[0]]
            header = False
        except ValueError:
            header = True
    if header:
        rows = rows[1:]
    try:
        pts = np.array([[float(c) for c in r] for r in rows])
    except ValueError as exc:
        raise ConfigurationError(f"non-numeric entry in design CSV: {exc}") from None
    if pts.ndim != 2:
        raise ConfigurationError("rows in design CSV have unequal lengths")
    domain = _domain(domain) if domain is not None else Domain(pts.shape[1])
    return Design(pts, domain, EXTERNAL)
