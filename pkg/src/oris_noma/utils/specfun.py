"""
Special-function kernel.

Log-Gamma, I0 and K_nu come straight from scipy.special. The two Meijer-G
families of the E2E channel statistics are evaluated as Mellin-Barnes
integrals on a vertical line with the trapezoid rule, after the Gamma
ratios Gamma(x)/Gamma(x+1) have been reduced to 1/x:

    CDF family:  (1/2 pi i) Int Gamma(a-s) Gamma(b-s) z^s / [s (c-s)^(2k+1)] ds,   0 < Re s < min(a, b, c)
    PDF family:  (1/2 pi i) Int Gamma(a-1-s) Gamma(b-1-s) z^s / (c-1-s)^(2k+1) ds,  Re s < min(a, b, c) - 1

All products are accumulated in log-space and exponentiated once per node.
"""
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy import special

from oris_noma.config import (MB_HALF_HEIGHT, MB_IMAG_RTOL, MB_MAX_HALF_HEIGHT, MB_NODES, MB_TOL,
                              SHAPE_PERTURBATION)
from oris_noma.utils.logging import logger


class SpecialFunctionException(ValueError):
    """
    Base exception for special-function evaluation errors.

    Attributes:
        message (str): Explanation of the error that occurred.
    """

    def __init__(self, message):
        super().__init__(message)
        logger.error(f"{type(self).__name__}: {message}")


class PoleException(SpecialFunctionException):
    """Raised when a function is evaluated at one of its poles."""


class DomainException(SpecialFunctionException):
    """Raised when an argument lies outside the domain of a function."""


class ContourException(SpecialFunctionException):
    """Raised when no vertical line separates the pole families of a Mellin-Barnes integrand."""


class ToleranceException(SpecialFunctionException):
    """Raised when the truncated-tail bound stays above tolerance at the maximum half height."""


def log_gamma(z: complex) -> complex:
    """
    Principal branch of log Gamma(z).

    Args:
        z (complex): Argument, anywhere except the non-positive real integers.

    Returns:
        complex: log Gamma(z) with exp(log_gamma(z)) == Gamma(z).

    Raises:
        PoleException: If z is a non-positive integer on the real axis.
    """
    z = complex(z)
    if z.imag == 0.0 and z.real <= 0.0 and z.real == math.floor(z.real):
        raise PoleException(f"log_gamma has a pole at z = {z.real:g}")
    return complex(special.loggamma(z))


def bessel_i0(x: float) -> float:
    """Modified Bessel function of the first kind, order zero."""
    if not math.isfinite(x):
        raise DomainException(f"bessel_i0 needs a finite argument, got {x}")
    return float(special.i0(x))


def bessel_k(nu: float, x: float) -> float:
    """
    Modified Bessel function of the second kind K_nu(x).

    Raises:
        DomainException: If x <= 0.
    """
    if not x > 0.0:
        raise DomainException(f"bessel_k is defined for x > 0, got x = {x}")
    return float(special.kv(nu, x))


def separate_shapes(alpha: float, beta: float) -> Tuple[float, float]:
    """
    Nudges beta away from alpha + integer.

    The series representation of the E2E statistics assumes alpha - beta is not an
    integer. Within SHAPE_PERTURBATION of an integer, beta is moved by
    SHAPE_PERTURBATION away from that integer and a warning is logged.

    Returns:
        Tuple[float, float]: (alpha, beta), beta possibly perturbed.
    """
    gap = alpha - beta - round(alpha - beta)
    if abs(gap) < SHAPE_PERTURBATION:
        # move beta so that alpha - beta leaves the integer by one more step
        shifted = beta - SHAPE_PERTURBATION if gap >= 0 else beta + SHAPE_PERTURBATION
        logger.warning(f"alpha - beta = {alpha - beta:.9g} is an integer; beta perturbed "
                       f"{beta:.9g} -> {shifted:.9g}")
        return alpha, shifted
    return alpha, beta


class MellinFamily(Enum):
    PDF = "pdf"
    CDF = "cdf"


@dataclass(frozen=True)
class MellinIntegrand:
    """
    Parameters of one Meijer-G term of the E2E series.

    Attributes:
        alpha (float): Large-scale turbulence shape.
        beta (float): Small-scale turbulence shape.
        c (float): Pointing-error exponent (1+q^2) omega / 2q.
        k (int): Series index; the c-pole has order 2k+1.
        family (MellinFamily): PDF or CDF family.
        reduced (bool): Use the reduced integrand (True) or the Gamma-ratio form (False).
    """
    alpha: float
    beta: float
    c: float
    k: int
    family: MellinFamily
    reduced: bool = True

    def __post_init__(self):
        for name in ("alpha", "beta", "c"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0.0):
                raise ContourException(f"{name} must be finite and > 0, got {value}")
        if self.k < 0:
            raise ContourException(f"series index k must be >= 0, got {self.k}")

    def pole_bounds(self) -> Tuple[float, float]:
        """
        Open interval of admissible abscissas.

        Returns:
            Tuple[float, float]: (lower, upper); lower is -inf for the PDF family, which has no left poles.
        """
        m = min(self.alpha, self.beta, self.c)
        if self.family is MellinFamily.CDF:
            return 0.0, m
        return -math.inf, m - 1.0

    def decay_power(self, abscissa: float) -> float:
        """Exponent p of the |t|^p factor multiplying exp(-pi |t|) along the line."""
        if self.family is MellinFamily.CDF:
            return self.alpha + self.beta - 2.0 * abscissa - 1.0 - 1.0 - (2 * self.k + 1)
        return self.alpha + self.beta - 2.0 - 2.0 * abscissa - 1.0 - (2 * self.k + 1)


@dataclass(frozen=True)
class ContourSpec:
    """
    Truncated vertical integration line Re(s) = abscissa, |Im(s)| <= half_height.
    """
    abscissa: float
    half_height: float = MB_HALF_HEIGHT
    nodes: int = MB_NODES

    def __post_init__(self):
        if not self.half_height > 0.0:
            raise ContourException(f"half_height must be > 0, got {self.half_height}")
        if self.nodes < 3:
            raise ContourException(f"at least 3 nodes are needed, got {self.nodes}")

    @property
    def spacing(self) -> float:
        return 2.0 * self.half_height / (self.nodes - 1)

    @classmethod
    def default_for(cls, integrand: MellinIntegrand) -> "ContourSpec":
        """
        Line through the midpoint of the admissible strip.

        The PDF family is pole-free on the left; its strip is taken one unit wide.
        """
        lower, upper = integrand.pole_bounds()
        if math.isinf(lower):
            lower = upper - 1.0
        return cls(abscissa=0.5 * (lower + upper))

    def doubled(self) -> "ContourSpec":
        """Twice the half height at the same node spacing."""
        return ContourSpec(self.abscissa, 2.0 * self.half_height, 2 * (self.nodes - 1) + 1)


@dataclass(frozen=True)
class MellinResult:
    """
    Outcome of a Mellin-Barnes quadrature.

    Attributes:
        values (np.ndarray): One real value per series term.
        imag_residue (np.ndarray): |imaginary part| of each quadrature sum.
        tail_bound (float): Estimated truncated-tail contribution.
        contour (ContourSpec): Line actually used after refinement.
    """
    values: np.ndarray
    imag_residue: np.ndarray
    tail_bound: float
    contour: ContourSpec

    @property
    def value(self) -> float:
        return float(self.values[0])

    def conjugate_symmetric(self, rtol: float = MB_IMAG_RTOL, atol: float = 0.0) -> bool:
        return bool(np.all(self.imag_residue <= rtol * np.abs(self.values) + atol))


@dataclass(frozen=True)
class _SeriesIntegrand:
    family: MellinFamily
    alpha: float
    beta: float
    c: float
    ks: np.ndarray
    log_weights: np.ndarray
    reduced: bool = True
    probe: MellinIntegrand = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        # the k = min term decays slowest and fixes the tail estimate for the whole batch
        object.__setattr__(self, "probe", MellinIntegrand(self.alpha, self.beta, self.c, int(self.ks.min()),
                                                          self.family, self.reduced))

    def log_values(self, s: np.ndarray, log_z: float) -> np.ndarray:
        """log of the integrand at nodes s, one row per term."""
        if self.family is MellinFamily.CDF:
            a, b, c = self.alpha, self.beta, self.c
        else:
            a, b, c = self.alpha - 1.0, self.beta - 1.0, self.c - 1.0
        common = special.loggamma(a - s) + special.loggamma(b - s) + s * log_z
        if self.reduced:
            pole = np.log(c - s)
            if self.family is MellinFamily.CDF:
                common = common - np.log(s)
        else:
            pole = special.loggamma(c + 1.0 - s) - special.loggamma(c - s)
            if self.family is MellinFamily.CDF:
                common = common + special.loggamma(s) - special.loggamma(1.0 + s)
        orders = (2 * self.ks + 1)[:, None]
        return common[None, :] - orders * pole[None, :] + self.log_weights[:, None]


def _trapezoid(integrand: _SeriesIntegrand, log_z: float, contour: ContourSpec):
    t = np.linspace(-contour.half_height, contour.half_height, contour.nodes)
    s = contour.abscissa + 1j * t
    f = np.exp(integrand.log_values(s, log_z))
    weights = np.full(contour.nodes, contour.spacing / (2.0 * math.pi))
    weights[0] *= 0.5
    weights[-1] *= 0.5
    total = f @ weights
    mass = float(np.max(np.abs(f) @ weights))
    edge = float(np.max(np.maximum(np.abs(f[:, 0]), np.abs(f[:, -1]))))
    return total, mass, edge


def _tail_bound(integrand: _SeriesIntegrand, contour: ContourSpec, edge: float) -> float:
    power = integrand.probe.decay_power(contour.abscissa)
    rate = math.pi - max(power, 0.0) / contour.half_height
    if rate <= 0.5 * math.pi:
        return math.inf
    # (1/2pi) * 2 * Int_H^inf |f(H)| exp(-rate (t - H)) dt
    return edge / (math.pi * rate)


def _evaluate(integrand: _SeriesIntegrand, z: float, contour: Optional[ContourSpec], tol: float) -> MellinResult:
    if not (z > 0.0 and math.isfinite(z)):
        raise DomainException(f"Meijer-G argument must be finite and > 0, got z = {z}")
    lower, upper = integrand.probe.pole_bounds()
    if not upper > lower:
        raise ContourException(f"no abscissa separates the poles: interval ({lower}, {upper}) is empty")
    if contour is None:
        contour = ContourSpec.default_for(integrand.probe)
    if not lower < contour.abscissa < upper:
        raise ContourException(f"abscissa {contour.abscissa:g} outside the admissible strip ({lower:g}, {upper:g})")

    log_z = math.log(z)
    strip = 0.75 * min(contour.abscissa - lower, upper - contour.abscissa)
    while True:
        total, mass, edge = _trapezoid(integrand, log_z, contour)
        # discretisation error ~ exp(-2 pi d / h) * mass * z^(+-d)
        budget = math.log(max(mass / tol, math.e)) + strip * abs(log_z)
        spacing = 2.0 * math.pi * strip / budget
        if contour.spacing > spacing:
            nodes = 2 * math.ceil(contour.half_height / spacing) + 1
            logger.debug(f"Mellin-Barnes: refining to {nodes} nodes (spacing {spacing:.3g})")
            contour = ContourSpec(contour.abscissa, contour.half_height, nodes)
            total, mass, edge = _trapezoid(integrand, log_z, contour)
        tail = _tail_bound(integrand, contour, edge)
        if tail <= tol:
            break
        if contour.half_height * 2.0 > MB_MAX_HALF_HEIGHT:
            raise ToleranceException(f"tail bound {tail:.3g} above tolerance {tol:.3g} at "
                                     f"half height {contour.half_height:g}")
        contour = contour.doubled()

    result = MellinResult(values=total.real.copy(), imag_residue=np.abs(total.imag), tail_bound=tail,
                          contour=contour)
    if not result.conjugate_symmetric(atol=tol):
        logger.warning(f"Mellin-Barnes imaginary residue {float(result.imag_residue.max()):.3g} exceeds "
                       f"{MB_IMAG_RTOL:g} x |value|")
    return result


def mellin_barnes(integrand: MellinIntegrand, z: float, contour: Optional[ContourSpec] = None,
                  tol: float = MB_TOL, log_weight: float = 0.0) -> MellinResult:
    """
    Quadrature of a single Meijer-G term on a vertical line.

    Args:
        integrand (MellinIntegrand): Family, shapes and series index.
        z (float): Meijer-G argument, > 0.
        contour (Optional[ContourSpec]): Line to start from; midpoint of the strip by default.
        tol (float): Absolute tolerance on exp(log_weight) * G.
        log_weight (float): Log of a constant folded into the integrand before exponentiation.

    Returns:
        MellinResult: Value and quadrature diagnostics.

    Raises:
        ContourException: If the contour does not separate the poles.
        ToleranceException: If the tail bound cannot be brought under tol.
    """
    series = _SeriesIntegrand(integrand.family, integrand.alpha, integrand.beta, integrand.c,
                              np.array([integrand.k]), np.array([float(log_weight)]), integrand.reduced)
    return _evaluate(series, z, contour, tol)


def mellin_barnes_series(family: MellinFamily, n_terms: int, alpha: float, beta: float, c: float, z: float,
                         log_weights: Sequence[float], abscissa: Optional[float] = None,
                         tol: float = MB_TOL, reduced: bool = True) -> MellinResult:
    """
    Terms k = 0..n_terms-1 of a Meijer-G series on one common line.

    Args:
        family (MellinFamily): PDF or CDF family.
        n_terms (int): Number of terms.
        alpha (float): Turbulence shape alpha.
        beta (float): Turbulence shape beta.
        c (float): Pointing-error exponent.
        z (float): Meijer-G argument, > 0.
        log_weights (Sequence[float]): Log of the coefficient multiplying each term.
        abscissa (Optional[float]): Real part of the line; midpoint of the strip by default.
        tol (float): Absolute tolerance on each weighted term.
        reduced (bool): Reduced integrand (default) or Gamma-ratio form.

    Returns:
        MellinResult: values[k] = exp(log_weights[k]) * G_k(z).
    """
    ks = np.arange(n_terms)
    weights = np.asarray(log_weights, dtype=float)
    if weights.shape != ks.shape:
        raise ContourException(f"expected {n_terms} log-weights, got {weights.shape}")
    series = _SeriesIntegrand(family, alpha, beta, c, ks, weights, reduced)
    contour = None if abscissa is None else ContourSpec(abscissa)
    return _evaluate(series, z, contour, tol)


def meijer_g_cdf_family(k: int, alpha: float, beta: float, c: float, z: float, tol: float = MB_TOL) -> float:
    """
    G_{2k+2,2k+4}^{2k+3,1}(z | 1, {c+1}; alpha, beta, {c}, 0) by Mellin-Barnes quadrature.

    Args:
        k (int): Series index.
        alpha (float): Shape alpha > 0.
        beta (float): Shape beta > 0.
        c (float): Repeated parameter c > 0.
        z (float): Argument > 0.
        tol (float): Absolute tolerance.

    Returns:
        float: The Meijer-G value.
    """
    alpha, beta = separate_shapes(alpha, beta)
    return mellin_barnes(MellinIntegrand(alpha, beta, c, k, MellinFamily.CDF), z, tol=tol).value


def meijer_g_pdf_family(k: int, alpha: float, beta: float, c: float, z: float, tol: float = MB_TOL) -> float:
    """
    G_{2k+1,2k+3}^{2k+3,0}(z | {c}; alpha-1, beta-1, {c-1}) by Mellin-Barnes quadrature.

    Same arguments as meijer_g_cdf_family.
    """
    alpha, beta = separate_shapes(alpha, beta)
    return mellin_barnes(MellinIntegrand(alpha, beta, c, k, MellinFamily.PDF), z, tol=tol).value


def cdf_family_small_z(k: int, alpha: float, beta: float, c: float, z: float) -> float:
    """
    Residue expansion of the CDF family for z -> 0.

    Simple poles at alpha and beta plus the leading logarithmic term of the
    order-(2k+1) pole at c.
    """
    log_z = math.log(z)
    terms = [
        special.gamma(beta - alpha) / (alpha * (c - alpha) ** (2 * k + 1)) * z ** alpha,
        special.gamma(alpha - beta) / (beta * (c - beta) ** (2 * k + 1)) * z ** beta,
        special.gamma(alpha - c) * special.gamma(beta - c) / (c * math.factorial(2 * k)) * log_z ** (2 * k) * z ** c,
    ]
    return float(sum(terms))


def log_bessel_i0(x: np.ndarray) -> np.ndarray:
    """log I0(x) through the exponentially scaled i0e, finite for any finite x."""
    ax = np.abs(np.asarray(x, dtype=float))
    return np.log(special.i0e(ax)) + ax


def log_bessel_k(nu: float, x: np.ndarray) -> np.ndarray:
    """
    log K_nu(x) through the exponentially scaled kve.

    Where kve overflows (x -> 0, large order) the small-argument form
    Gamma(|nu|) / 2 (2/x)^|nu| is used instead.

    Raises:
        DomainException: If any x <= 0.
    """
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0.0):
        raise DomainException("log_bessel_k is defined for x > 0")
    with np.errstate(over="ignore", divide="ignore"):
        values = np.log(special.kve(nu, x)) - x
    overflow = ~np.isfinite(values)
    if np.any(overflow) and nu != 0.0:
        order = abs(nu)
        values = np.where(overflow, special.gammaln(order) - math.log(2.0) + order * np.log(2.0 / x), values)
    return values
