"""
End-to-end channel statistics of h = h_l * h_s * h_g.

The PDF and CDF are Meijer-G series in z = alpha beta h / (a0 h_l), one term per
power of v; oracle_pdf and oracle_cdf integrate the product of the factor
densities directly and serve as references for the series.
"""
import math
import warnings
from dataclasses import dataclass, field
from enum import Enum
from typing import Tuple

import numpy as np
from scipy import integrate, special

from oris_noma.config import (ASYMPTOTIC_DEGENERATE_GAP, LOG_SERIES_RATIO_WARN, LOG_SERIES_TERMS, MB_TOL,
                              NEGATIVE_CLAMP_WARN, ORACLE_EPSREL, ORACLE_LIMIT, SERIES_GAP_WARN, SERIES_MAX_TERMS,
                              SERIES_TERMS)
from oris_noma.models.channel import (ChannelParams, cdf_turbulence, log_pdf_turbulence, log_pointing_density,
                                      pointing_tail)
from oris_noma.utils.logging import logger
from oris_noma.utils.specfun import MellinFamily, mellin_barnes_series, separate_shapes


class DistributionException(ValueError):
    """
    Base exception for E2E distribution evaluation errors.

    Attributes:
        message (str): Explanation of the error that occurred.
    """

    def __init__(self, message):
        super().__init__(message)
        logger.error(f"{type(self).__name__}: {message}")


class NonConvergentAsymptoticException(DistributionException):
    """Raised when the turbulence-limited asymptote is requested with v >= c - min(alpha, beta)."""


class DegenerateAsymptoticException(DistributionException):
    """Raised when min(alpha, beta) and c coincide and neither branch applies."""


class QuadratureException(DistributionException):
    """Raised when an adaptive quadrature oracle reports an unreliable result."""


class Branch(Enum):
    TURBULENCE_LIMITED = "turbulence_limited"
    POINTING_LIMITED = "pointing_limited"


@dataclass(frozen=True)
class AsymptoticCdf:
    """
    Small-h form of the E2E CDF, coefficient * L(z) * z^exponent with z = alpha beta h / (a0 h_l).

    L(z) is 1 in the turbulence-limited branch and the truncated even power
    series in ln z in the pointing-limited one.

    Attributes:
        branch (Branch): Which factor dominates the decay.
        coefficient (float): Leading coefficient (nan when the form does not apply).
        exponent (float): min(alpha, beta) or c.
        log_series_terms (int): Terms kept in the ln z series.
        converges (bool): Whether the branch is valid for these parameters.
        log_coefficients (Tuple[float, ...]): Coefficients of ln^(2k) z, k = 0..log_series_terms-1.
        degenerate (bool): min(alpha, beta) too close to c.
    """
    branch: Branch
    coefficient: float
    exponent: float
    log_series_terms: int
    converges: bool
    log_coefficients: Tuple[float, ...] = (1.0,)
    degenerate: bool = False

    def log_factor(self, log_z: float) -> float:
        if self.branch is Branch.TURBULENCE_LIMITED:
            return 1.0
        log_sq = log_z * log_z
        return float(sum(d * log_sq ** k for k, d in enumerate(self.log_coefficients)))

    def value(self, z: float) -> float:
        if z <= 0.0:
            return 0.0
        log_z = math.log(z)
        try:
            return self.coefficient * self.log_factor(log_z) * math.exp(self.exponent * log_z)
        except OverflowError as e:
            raise DistributionException(f"asymptote overflows at z = {z:.6g}: {e}") from e


def series_abscissa(params: ChannelParams, alpha: float = None, beta: float = None) -> float:
    """
    Real part of the line shared by every CDF-family term.

    Half the distance to the first pole, pulled left of c - v so that the sum
    over k converges pointwise along the line. The PDF family uses one unit less.
    """
    alpha = params.alpha if alpha is None else alpha
    beta = params.beta if beta is None else beta
    m = min(alpha, beta, params.c)
    return min(0.5 * m, 0.5 * (params.c - params.v))


def _log_pointing_coefficient(k: int, v: float) -> float:
    # (2k+1)^(2k) (v/2)^(2k) / ((2k)!^2 (k!)^2)
    if k == 0:
        return 0.0
    return (2 * k * math.log(2 * k + 1) + 2 * k * math.log(v / 2.0)
            - 2.0 * special.gammaln(2 * k + 1) - 2.0 * special.gammaln(k + 1))


@dataclass(frozen=True)
class E2EChannelDist:
    """
    Evaluator of the E2E channel PDF, CDF and small-h asymptote.

    The series starts with n_terms terms. While the N and N-2 partial sums
    differ by more than SERIES_GAP_WARN (relative) the truncation is doubled,
    up to max_terms; a gap that is still too wide there is logged. Setting
    max_terms <= n_terms gives a fixed truncation.

    Attributes:
        params (ChannelParams): Channel parameters of the path.
        n_terms (int): Initial series truncation N (terms k = 0..N-1).
        tol (float): Absolute tolerance of each Meijer-G term.
        max_terms (int): Largest truncation the series may be extended to.
    """
    params: ChannelParams
    n_terms: int = SERIES_TERMS
    tol: float = MB_TOL
    max_terms: int = SERIES_MAX_TERMS
    alpha: float = field(init=False)
    beta: float = field(init=False)
    abscissa: float = field(init=False)

    def __post_init__(self):
        if self.n_terms < 1:
            raise DistributionException(f"n_terms must be >= 1, got {self.n_terms}")
        if not self.tol > 0.0:
            raise DistributionException(f"tol must be > 0, got {self.tol}")
        alpha, beta = separate_shapes(self.params.alpha, self.params.beta)
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "abscissa", series_abscissa(self.params, alpha, beta))

    @property
    def terms(self) -> int:
        # only k = 0 survives when v = 0
        return 1 if self.params.v == 0.0 else self.n_terms

    @property
    def term_limit(self) -> int:
        return self.terms if self.params.v == 0.0 else max(self.n_terms, self.max_terms)

    def argument(self, h: float) -> float:
        """Meijer-G argument alpha beta h / (a0 h_l)."""
        return self.alpha * self.beta * h / self.params.scale

    def _log_weights(self, log_prefactor: float, n: int) -> np.ndarray:
        k = np.arange(n)
        log_binom = special.gammaln(2 * k + 1) - 2.0 * special.gammaln(k + 1)
        if self.params.v == 0.0:
            log_power = np.zeros_like(log_binom)
        else:
            log_power = 2 * k * math.log(self.params.v / 2.0)
        return log_prefactor + log_binom + log_power

    @staticmethod
    def _gap(values: np.ndarray) -> float:
        if len(values) < 3:
            return 0.0
        total = float(np.sum(values))
        partial = float(np.sum(values[:-2]))
        return abs(total - partial) / abs(total) if total != 0.0 else abs(partial)

    def _series(self, family: MellinFamily, h: float, log_prefactor: float, abscissa: float, what: str) -> float:
        n = self.terms
        limit = self.term_limit
        while True:
            result = mellin_barnes_series(family, n, self.alpha, self.beta, self.params.c, self.argument(h),
                                          self._log_weights(log_prefactor, n), abscissa=abscissa, tol=self.tol)
            gap = self._gap(result.values)
            if gap <= SERIES_GAP_WARN or n >= limit:
                break
            n = min(max(2 * n, 3), limit)
            logger.debug(f"{what} series at h = {h:.6g}: gap {gap:.3g}, extending to N = {n}")
        if gap > SERIES_GAP_WARN:
            logger.warning(f"{what} series at h = {h:.6g}: N = {n} and N-2 partial sums differ by "
                           f"{gap:.3g} (relative)")
        total = float(np.sum(result.values))
        if total < NEGATIVE_CLAMP_WARN:
            logger.warning(f"{what} at h = {h:.6g} evaluated to {total:.3g}; clamped to 0")
        return max(total, 0.0)

    def pdf(self, h: float) -> float:
        """
        E2E channel density f_h(h).

        Args:
            h (float): Channel gain.

        Returns:
            float: Truncated series value, clamped at 0.

        Raises:
            SpecialFunctionException: Propagated from the Meijer-G quadrature.
        """
        if h <= 0.0:
            return 0.0
        p = self.params
        log_prefactor = (math.log(p.omega) + math.log(self.alpha) + math.log(self.beta) - math.log(p.scale)
                         - special.gammaln(self.alpha) - special.gammaln(self.beta))
        return self._series(MellinFamily.PDF, h, log_prefactor, self.abscissa - 1.0, "PDF")

    def cdf(self, h: float) -> float:
        """
        E2E channel CDF F_h(h), clamped to [0, 1].

        Args:
            h (float): Channel gain, h >= 0.

        Returns:
            float: Truncated series value.
        """
        if h <= 0.0:
            return 0.0
        p = self.params
        log_prefactor = math.log(p.omega) - special.gammaln(self.alpha) - special.gammaln(self.beta)
        return min(self._series(MellinFamily.CDF, h, log_prefactor, self.abscissa, "CDF"), 1.0)

    def asymptotic_form(self, log_series_terms: int = LOG_SERIES_TERMS) -> AsymptoticCdf:
        """
        Small-h asymptote of the CDF, without raising when it does not apply.
        """
        p = self.params
        m, big = min(self.alpha, self.beta), max(self.alpha, self.beta)
        degenerate = abs(m - p.c) < ASYMPTOTIC_DEGENERATE_GAP
        if m < p.c:
            converges = (p.v < p.c - m) and not degenerate
            coefficient = math.nan
            if converges:
                log_coefficient = (math.log(p.omega) + special.gammaln(big - m)
                                   - 0.5 * (math.log(p.c - m - p.v) + math.log(p.c - m + p.v))
                                   - special.gammaln(m + 1.0) - special.gammaln(big))
                coefficient = math.exp(log_coefficient)
            return AsymptoticCdf(Branch.TURBULENCE_LIMITED, coefficient, m, log_series_terms, converges,
                                 degenerate=degenerate)

        coefficient = math.nan
        if not degenerate:
            # Gamma(alpha - c) Gamma(beta - c) > 0 since c < min(alpha, beta)
            log_coefficient = (math.log(p.omega) + special.gammaln(self.alpha - p.c)
                               + special.gammaln(self.beta - p.c) - math.log(p.c)
                               - special.gammaln(self.alpha) - special.gammaln(self.beta))
            coefficient = math.exp(log_coefficient)
        if p.v == 0.0:
            log_coefficients = (1.0,) + (0.0,) * (log_series_terms - 1)
        else:
            log_coefficients = tuple(math.exp(_log_pointing_coefficient(k, p.v)) for k in range(log_series_terms))
        return AsymptoticCdf(Branch.POINTING_LIMITED, coefficient, p.c, log_series_terms, not degenerate,
                             log_coefficients, degenerate)

    def cdf_asymptotic(self, h: float, log_series_terms: int = LOG_SERIES_TERMS) -> Tuple[AsymptoticCdf, float]:
        """
        Small-h asymptote of the CDF evaluated at h.

        Args:
            h (float): Channel gain, small.
            log_series_terms (int): Terms of the ln z series in the pointing-limited branch.

        Returns:
            Tuple[AsymptoticCdf, float]: The asymptotic form and its value at h.

        Raises:
            DegenerateAsymptoticException: If |min(alpha, beta) - c| < 1e-6.
            NonConvergentAsymptoticException: If the turbulence-limited branch needs v < c - min(alpha, beta)
                and this does not hold.
        """
        form = self.asymptotic_form(log_series_terms)
        if form.degenerate:
            raise DegenerateAsymptoticException(
                f"min(alpha, beta) = {form.exponent:.9g} and c = {self.params.c:.9g} coincide")
        if not form.converges:
            raise NonConvergentAsymptoticException(
                f"v = {self.params.v:.6g} >= c - min(alpha, beta) = {self.params.c - form.exponent:.6g}")
        z = self.argument(h)
        if form.branch is Branch.POINTING_LIMITED and z > 0.0 and z != 1.0 and self.params.v > 0.0:
            k = log_series_terms
            # first omitted term against the last kept one
            log_ratio = (_log_pointing_coefficient(k, self.params.v) - _log_pointing_coefficient(k - 1, self.params.v)
                         + 2.0 * math.log(abs(math.log(z))))
            if log_ratio > math.log(LOG_SERIES_RATIO_WARN):
                logger.warning(f"ln z series cut after {k} terms at z = {z:.3g}: next-term ratio "
                               f"{math.exp(log_ratio):.3g} > {LOG_SERIES_RATIO_WARN:g}")
        return form, form.value(z)


def _quad(func, lower: float, upper: float, **kwargs) -> float:
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", integrate.IntegrationWarning)
        value, error = integrate.quad(func, lower, upper, epsrel=ORACLE_EPSREL, limit=ORACLE_LIMIT, **kwargs)
    issues = [w for w in caught if issubclass(w.category, integrate.IntegrationWarning)]
    if issues:
        raise QuadratureException(f"quadrature on [{lower:.6g}, {upper:.6g}] unreliable (error estimate "
                                  f"{error:.3g}): {issues[0].message}")
    return value


def _depth_window(params: ChannelParams, log_chi: float) -> Tuple[float, float]:
    """
    Integration range in depth t = ln(x / chi) and the end of its steep head.

    Beyond the range the pointing tail is below 1e-16 or the turbulence density
    is negligible; the head [0, 60 / (c - v)] carries the fast pointing decay.
    """
    rate = params.c - params.v
    t_cut = (math.log(max(params.omega / rate, 1.0)) + 37.0) / rate
    y_far = math.log(3600.0 / (params.alpha * params.beta))
    t_max = max(min(t_cut, y_far - log_chi), 1e-12)
    return min(60.0 / rate, t_max), t_max


def _integrate_depth(func, params: ChannelParams, log_chi: float) -> float:
    head, t_max = _depth_window(params, log_chi)
    rate = params.c - params.v
    total = _quad(lambda tau: func(tau / rate), 0.0, rate * head) / rate
    if t_max > head:
        # turbulence density peaks at x = 1, i.e. t = -ln(chi)
        points = [-log_chi] if head < -log_chi < t_max else None
        total += _quad(func, head, t_max, points=points)
    return total


def oracle_cdf(params: ChannelParams, h: float) -> float:
    """
    E2E CDF by nested adaptive quadrature of the factor distributions.

    F_h(h) = F_s(chi) + Int_{chi}^inf F_g(a0 chi / x) f_s(x) dx with chi = h / (a0 h_l),
    integrated in the depth t = ln(x / chi).

    Args:
        params (ChannelParams): Channel parameters.
        h (float): Channel gain.

    Returns:
        float: CDF value in [0, 1].

    Raises:
        QuadratureException: If scipy reports an unreliable integral.
    """
    if h <= 0.0:
        return 0.0
    chi = h / params.scale
    log_chi = math.log(chi)

    def integrand(t):
        y = log_chi + t
        log_density = float(log_pdf_turbulence(math.exp(y), params))
        if not np.isfinite(log_density):
            return 0.0
        return pointing_tail(t, params) * math.exp(y + log_density)

    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", integrate.IntegrationWarning)
        below = cdf_turbulence(chi, params)
    issues = [w for w in caught if issubclass(w.category, integrate.IntegrationWarning)]
    if issues:
        raise QuadratureException(f"turbulence CDF quadrature unreliable at chi = {chi:.6g}: {issues[0].message}")
    return min(1.0, max(0.0, below + _integrate_depth(integrand, params, log_chi)))


def oracle_pdf(params: ChannelParams, h: float) -> float:
    """
    E2E density by direct quadrature of Int (1/(x h_l)) f_g(h/(x h_l)) f_s(x) dx over x >= h/(a0 h_l).
    """
    if h <= 0.0:
        return 0.0
    log_chi = math.log(h / params.scale)
    log_loss = math.log(params.h_l)

    def integrand(t):
        log_f = (float(log_pointing_density(t, params)) + float(log_pdf_turbulence(math.exp(log_chi + t), params))
                 - log_loss)
        return math.exp(log_f) if np.isfinite(log_f) else 0.0

    return _integrate_depth(integrand, params, log_chi)
