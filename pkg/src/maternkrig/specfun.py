"""Gamma function and the modified Bessel function of the second kind.

``bessel_k`` evaluates K_nu(z) for real order nu > 0 and real z > 0.  The
order is split as nu = mu + m with |mu| <= 1/2 and integer m.  K_mu and
K_{mu+1} come from Temme's series for z < 2 and from Steed's continued
fraction (CF2) for z >= 2; forward recurrence then lifts the pair to order
nu.  Forward recurrence is stable for K because it is the dominant solution.

The scalar kernel is compiled with numba so the Matérn correlation matrices
used by the rate study (tens of millions of evaluations) stay cheap.
"""
import math

import numba
import numpy as np

__all__ = ["gamma_fn", "bessel_k", "bessel_k_scalar"]

_EPS = 1e-16
_FPMIN = 1e-300
_MAXIT = 10000
_XMIN = 2.0

# Taylor coefficients c_k of 1/Gamma(z) = sum_{k>=1} c_k z^k, k = 1..26
# (generated with mpmath.taylor(mpmath.rgamma, 0, 26) at 50 digits).
_RGAMMA_TAYLOR = np.array([
    1.0,
    0.57721566490153286061,
    -0.65587807152025388108,
    -0.042002635034095235529,
    0.1665386113822914895,
    -0.042197734555544336748,
    -0.0096219715278769735621,
    0.0072189432466630995424,
    -0.0011651675918590651121,
    -0.00021524167411495097282,
    0.00012805028238811618615,
    -0.000020134854780788238656,
    -1.2504934821426706573e-6,
    1.1330272319816958824e-6,
    -2.0563384169776071035e-7,
    6.1160951044814158179e-9,
    5.0020076444692229301e-9,
    -1.1812745704870201446e-9,
    1.0434267116911005105e-10,
    7.782263439905071254e-12,
    -3.6968056186422057082e-12,
    5.100370287454475979e-13,
    -2.0583260535665067832e-14,
    -5.3481225394230179824e-15,
    1.2267786282382607902e-15,
    -1.1812593016974587695e-16,
])


def gamma_fn(x):
    """Gamma function for positive real ``x``.

    Raises
    ------
    ValueError
        If ``x`` is not strictly positive.
    """
    x = float(x)
    if not x > 0.0:
        raise ValueError(f"gamma_fn requires x > 0, got {x!r}")
    return math.gamma(x)


@numba.njit(cache=True)
def _temme_gammas(mu):
    """Return (gam1, gam2, 1/Gamma(1+mu), 1/Gamma(1-mu)) for |mu| <= 1/2.

    gam1 = (1/Gamma(1-mu) - 1/Gamma(1+mu)) / (2 mu)
    gam2 = (1/Gamma(1-mu) + 1/Gamma(1+mu)) / 2
    Both are even in mu and summed directly from the 1/Gamma Taylor series,
    which avoids the cancellation in the defining quotient near mu = 0.
    """
    c = _RGAMMA_TAYLOR
    mu2 = mu * mu
    gam1 = 0.0
    gam2 = 0.0
    # even k (index k-1 odd) -> gam1, odd k -> gam2; Horner in mu^2
    for j in range(c.shape[0] // 2 - 1, -1, -1):
        gam2 = gam2 * mu2 + c[2 * j]
        gam1 = gam1 * mu2 + c[2 * j + 1]
    gam1 = -gam1
    # 1/Gamma(1+mu) = gam2 - mu*gam1, 1/Gamma(1-mu) = gam2 + mu*gam1
    return gam1, gam2, gam2 - mu * gam1, gam2 + mu * gam1


@numba.njit(cache=True)
def _k_pair_small(mu, x):
    """K_mu(x), K_{mu+1}(x) by Temme's series; x < 2, |mu| <= 1/2."""
    x2 = 0.5 * x
    pimu = math.pi * mu
    fact = 1.0 if abs(pimu) < _EPS else pimu / math.sin(pimu)
    d = -math.log(x2)
    e = mu * d
    fact2 = 1.0 if abs(e) < _EPS else math.sinh(e) / e
    gam1, gam2, gampl, gammi = _temme_gammas(mu)
    ff = fact * (gam1 * math.cosh(e) + gam2 * fact2 * d)
    total = ff
    e = math.exp(e)
    p = 0.5 * e / gampl
    q = 0.5 / (e * gammi)
    c = 1.0
    d = x2 * x2
    total1 = p
    for i in range(1, _MAXIT + 1):
        ff = (i * ff + p + q) / (i * i - mu * mu)
        c *= d / i
        p /= i - mu
        q /= i + mu
        delta = c * ff
        total += delta
        total1 += c * (p - i * ff)
        if abs(delta) < abs(total) * _EPS:
            break
    return total, total1 * 2.0 / x


@numba.njit(cache=True)
def _k_pair_large(mu, x):
    """K_mu(x), K_{mu+1}(x) by Steed's continued fraction; x >= 2."""
    b = 2.0 * (1.0 + x)
    d = 1.0 / b
    h = d
    delh = d
    q1 = 0.0
    q2 = 1.0
    a1 = 0.25 - mu * mu
    q = a1
    c = a1
    a = -a1
    s = 1.0 + q * delh
    for i in range(2, _MAXIT + 1):
        a -= 2 * (i - 1)
        c = -a * c / i
        qnew = (q1 - b * q2) / a
        q1 = q2
        q2 = qnew
        q += c * qnew
        b += 2.0
        d = 1.0 / (b + a * d)
        delh = (b * d - 1.0) * delh
        h += delh
        dels = q * delh
        s += dels
        if abs(dels / s) < _EPS:
            break
    h = a1 * h
    kmu = math.sqrt(math.pi / (2.0 * x)) * math.exp(-x) / s
    return kmu, kmu * (mu + x + 0.5 - h) / x


@numba.njit(cache=True)
def bessel_k_scalar(nu, z):
    """K_nu(z) for nu >= 0, z > 0 (no argument checking)."""
    if z > 745.0:
        return 0.0
    m = int(nu + 0.5)
    mu = nu - m
    if z < _XMIN:
        kmu, k1 = _k_pair_small(mu, z)
    else:
        kmu, k1 = _k_pair_large(mu, z)
    for i in range(1, m + 1):
        knext = (mu + i) * (2.0 / z) * k1 + kmu
        kmu = k1
        k1 = knext
    return kmu


@numba.vectorize(["float64(float64, float64)"], cache=True)
def _bessel_k_ufunc(nu, z):
    return bessel_k_scalar(nu, z)


def bessel_k(nu, z):
    """Modified Bessel function of the second kind, K_nu(z).

    Parameters
    ----------
    nu : float or array_like
        Order, strictly positive.
    z : float or array_like
        Argument, strictly positive.  Broadcasts against ``nu``.

    Returns
    -------
    float or ndarray
        K_nu(z).  Arguments beyond the exp(-z) underflow threshold give 0.

    Raises
    ------
    ValueError
        On a non-positive order or argument.
    """
    nu_arr = np.asarray(nu, dtype=float)
    z_arr = np.asarray(z, dtype=float)
    if not np.all(nu_arr > 0):
        raise ValueError("bessel_k requires nu > 0")
    if not np.all(z_arr > 0):
        raise ValueError("bessel_k requires z > 0")
    out = _bessel_k_ufunc(nu_arr, z_arr)
    if np.ndim(out) == 0:
        return float(out)
    return out
