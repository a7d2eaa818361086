"""Isotropic correlation functions: Matérn and generalized Wendland.

Kernels are functions of the scalar distance r = ||x - x'||.  ``correlation``
dispatches on the family and ``correlation_between`` accepts point pairs.
"""
from dataclasses import asdict, dataclass
import math

import numba
import numpy as np
from scipy import integrate, special

from .exceptions import ConfigurationError
from .specfun import bessel_k_scalar, gamma_fn

__all__ = [
    "KernelSpec",
    "SmoothnessPair",
    "MATERN",
    "WENDLAND",
    "matern_corr",
    "matern_spectral",
    "wendland_corr",
    "correlation",
    "correlation_between",
]

MATERN = "matern"
WENDLAND = "wendland"
_FAMILIES = (MATERN, WENDLAND)
_FAMILY_ALIASES = {
    "matern": MATERN,
    "gw": WENDLAND,
    "wendland": WENDLAND,
    "generalizedwendland": WENDLAND,
    "generalized_wendland": WENDLAND,
}


@dataclass(frozen=True)
class KernelSpec:
    """Parameters of an isotropic correlation function.

    Parameters
    ----------
    family : {"matern", "wendland"}
        Correlation family.  "wendland" is the generalized Wendland family.
    nu : float
        Matérn smoothness.
    phi : float
        Inverse length-scale, shared by both families.
    kappa, mu : float
        Generalized Wendland shape parameters; require
        ``mu >= (d + 1) / 2 + kappa`` in dimension d.
    sigma2 : float
        Process variance.
    """

    family: str = MATERN
    nu: float = 1.5
    phi: float = 1.0
    kappa: float = 1.0
    mu: float = 2.5
    sigma2: float = 1.0

    def __post_init__(self):
        family = _FAMILY_ALIASES.get(str(self.family).lower())
        if family is None:
            raise ConfigurationError(f"unknown kernel family {self.family!r}")
        object.__setattr__(self, "family", family)
        for name in ("nu", "phi", "kappa", "mu", "sigma2"):
            value = float(getattr(self, name))
            if not math.isfinite(value):
                raise ConfigurationError(f"{name} must be finite, got {value!r}")
            object.__setattr__(self, name, value)
        if self.phi <= 0 or self.sigma2 <= 0:
            raise ConfigurationError("phi and sigma2 must be positive")
        if self.family == MATERN and self.nu <= 0:
            raise ConfigurationError("Matérn smoothness nu must be positive")
        if self.family == WENDLAND and self.kappa <= 0:
            raise ConfigurationError("Wendland kappa must be positive")

    @classmethod
    def matern(cls, nu, phi=1.0, sigma2=1.0):
        return cls(MATERN, nu=nu, phi=phi, sigma2=sigma2)

    @classmethod
    def wendland(cls, kappa, mu, phi=1.0, sigma2=1.0):
        return cls(WENDLAND, kappa=kappa, mu=mu, phi=phi, sigma2=sigma2)

    def check_dimension(self, dim):
        """Raise ConfigurationError if the kernel is not valid in ``dim`` dimensions."""
        if self.family == WENDLAND and self.mu < (dim + 1) / 2 + self.kappa:
            raise ConfigurationError(
                f"generalized Wendland needs mu >= (d+1)/2 + kappa = "
                f"{(dim + 1) / 2 + self.kappa:g} in d={dim}, got mu={self.mu:g}"
            )

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, data):
        known = {k: data[k] for k in cls.__dataclass_fields__ if k in data}
        unknown = set(data) - set(known)
        if unknown:
            raise ConfigurationError(f"unknown kernel fields: {sorted(unknown)}")
        return cls(**known)


@dataclass(frozen=True)
class SmoothnessPair:
    """True smoothness ``nu0`` of the process and smoothness ``nu`` imposed by the predictor."""

    nu0: float
    nu: float

    def __post_init__(self):
        if not (self.nu0 > 0 and self.nu > 0):
            raise ConfigurationError("smoothness parameters must be positive")

    @property
    def oversmoothed(self):
        return self.nu > self.nu0


@numba.njit(cache=True)
def _matern_values(r, nu, scale, norm, z_small):
    out = np.empty(r.shape[0])
    for i in range(r.shape[0]):
        z = scale * r[i]
        if z < z_small:
            out[i] = 1.0
        else:
            k = bessel_k_scalar(nu, z)
            out[i] = 0.0 if k == 0.0 else norm * z**nu * k
    return out


def _matern_small_z(nu):
    # Below this argument z^nu K_nu(z) equals its limit to double precision.
    return 2.0 * 1e-20 ** (1.0 / (2.0 * min(nu, 1.0)))


def _as_distance(r):
    arr = np.asarray(r, dtype=float)
    if np.any(arr < 0) or np.any(np.isnan(arr)):
        raise ValueError("distances must be nonnegative")
    return arr


def _scalar_or_array(arr):
    return float(arr) if arr.ndim == 0 else arr


def matern_corr(spec, r):
    """Matérn correlation at distance(s) ``r``.

    Uses the parameterization in which the Bessel argument is
    ``2 * sqrt(nu) * phi * r``.  Exactly 1 at r = 0.
    """
    if spec.family != MATERN:
        raise ConfigurationError("matern_corr needs a Matérn KernelSpec")
    arr = _as_distance(r)
    nu = spec.nu
    norm = 1.0 / (gamma_fn(nu) * 2.0 ** (nu - 1.0))
    scale = 2.0 * math.sqrt(nu) * spec.phi
    flat = np.ascontiguousarray(arr).ravel()
    out = _matern_values(flat, nu, scale, norm, _matern_small_z(nu)).reshape(arr.shape)
    return _scalar_or_array(out)


def matern_spectral(spec, omega_norm, dim=1):
    """Spectral density of the Matérn correlation at frequency norm ``omega_norm``.

    The density integrates to one over R^dim (it is the spectral density of
    the correlation, not of the covariance).
    """
    if spec.family != MATERN:
        raise ConfigurationError("matern_spectral needs a Matérn KernelSpec")
    if dim < 1:
        raise ConfigurationError("dim must be a positive integer")
    w = _as_distance(omega_norm)
    nu = spec.nu
    a = 4.0 * nu * spec.phi**2
    half_d = dim / 2.0
    log_const = (
        -half_d * math.log(math.pi)
        + math.lgamma(nu + half_d)
        - math.lgamma(nu)
        + nu * math.log(a)
    )
    out = np.exp(log_const - (nu + half_d) * np.log(a + w**2))
    return _scalar_or_array(out)


def _wendland_single(s, kappa, mu, log_beta):
    # u (u^2 - s^2)^(kappa-1) (1-u)^mu = [u (u+s)^(kappa-1)] (u-s)^(kappa-1) (1-u)^mu;
    # the algebraic endpoint factors go to QUADPACK's weighted rule.
    if s == 0.0:
        return 1.0
    if s >= 1.0:
        return 0.0
    val, _ = integrate.quad(
        lambda u: u * (u + s) ** (kappa - 1.0),
        s,
        1.0,
        weight="alg",
        wvar=(kappa - 1.0, mu),
        epsabs=0.0,
        epsrel=1e-10,
        limit=200,
    )
    return val * math.exp(-log_beta)


def wendland_corr(spec, r, dim=1):
    """Generalized Wendland correlation at distance(s) ``r``.

    Supported on ``[0, 1/phi)``; identically zero beyond.  The defining
    integral is evaluated by adaptive quadrature (relative tolerance 1e-10).
    """
    if spec.family != WENDLAND:
        raise ConfigurationError("wendland_corr needs a generalized Wendland KernelSpec")
    spec.check_dimension(dim)
    arr = _as_distance(r)
    s = spec.phi * arr
    log_beta = special.betaln(2.0 * spec.kappa, spec.mu + 1.0)
    flat = s.ravel()
    vals = np.zeros(flat.shape)
    inside = flat < 1.0
    # Memoize repeated radii, common on grids.
    uniq, inverse = np.unique(flat[inside], return_inverse=True)
    computed = np.array([_wendland_single(u, spec.kappa, spec.mu, log_beta) for u in uniq])
    if uniq.size:
        vals[inside] = computed[inverse]
    return _scalar_or_array(vals.reshape(s.shape))


def correlation(spec, r, dim=1):
    """Correlation of either family at distance(s) ``r``."""
    if spec.family == MATERN:
        return matern_corr(spec, r)
    return wendland_corr(spec, r, dim=dim)


def correlation_between(spec, x, y):
    """Correlation between two points (or matching rows of two point arrays)."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    r = np.linalg.norm(x - y, axis=-1)
    return correlation(spec, r, dim=x.shape[-1])
