import math
from dataclasses import dataclass, field
from enum import Enum
from typing import List, NamedTuple, Optional, Union

import numpy as np
from scipy import integrate, special

from oris_noma.config import (BEAM_WIDTH, CN2, CN2_MAX, CN2_MIN, D_TO, D_Z1, D_Z2, LENS_LENGTH, ORACLE_EPSREL,
                              ORACLE_LIMIT, PHI_P, PHI_R, RHO, SIGMA_ATM, SWAY_SIGMA, TURBULENCE_TAIL_EXTENT,
                              WAVELENGTH)
from oris_noma.utils.logging import logger
from oris_noma.utils.specfun import log_bessel_i0, log_bessel_k

ArrayLike = Union[float, np.ndarray]


class ChannelException(ValueError):
    """
    Custom exception for invalid physical scenarios.

    Attributes:
        message (str): Explanation of the error that occurred.
        violations (List[str]): Every invariant the scenario breaks.
    """

    def __init__(self, message, violations: Optional[List[str]] = None):
        super().__init__(message)
        self.violations = list(violations or [message])
        logger.warning(f"{type(self).__name__}: {message}")


class DegenerateGeometryException(ChannelException):
    """Raised when the reflected beam grazes the PD plane (sin(phi_p) = 0) or the misalignment collapses."""


class TurbulenceRegime(Enum):
    WEAK = "weak"
    MODERATE = "moderate"
    STRONG = "strong"


@dataclass(frozen=True)
class GeometryConfig:
    """
    Physical description of one Tx -> ORIS -> Rx path, SI units throughout.

    The beam width at the receiver is either given directly (w_dz) or derived
    from a Gaussian beam waist (w0). a0 and rytov_sq override the collected
    power fraction and the turbulence strength derived from the geometry.

    Attributes:
        d_to (float): Tx -> ORIS distance [m].
        d_or (float): ORIS -> Rx distance [m].
        phi_p (float): Angle between the reflected beam and the PD plane [rad].
        phi_r (float): Angle between the laser beam and the ORIS plane [rad].
        l_d (float): PD (lens) length [m].
        w_dz (Optional[float]): Beam width at the Rx [m].
        w0 (Optional[float]): Beam waist [m], used when w_dz is not given.
        sigma_s (float): Tx sway standard deviation [m].
        sigma_r (float): ORIS sway standard deviation [m].
        sigma_p (float): Rx sway standard deviation [m] (sigma_l in the parameter table).
        wavelength (float): Optical wavelength [m].
        cn2 (float): Refraction-structure parameter [m^-2/3].
        sigma_atm (float): Attenuation coefficient [1/m].
        rho (float): Reflection efficiency in (0, 1].
        a0 (Optional[float]): Collected power fraction at the PD centre.
        rytov_sq (Optional[float]): Rytov variance.
    """
    d_to: float = D_TO
    d_or: float = D_Z1 - D_TO
    phi_p: float = PHI_P[0]
    phi_r: float = PHI_R[0]
    l_d: float = LENS_LENGTH
    w_dz: Optional[float] = BEAM_WIDTH[0]
    w0: Optional[float] = None
    sigma_s: float = SWAY_SIGMA
    sigma_r: float = SWAY_SIGMA
    sigma_p: float = SWAY_SIGMA
    wavelength: float = WAVELENGTH
    cn2: float = CN2
    sigma_atm: float = SIGMA_ATM
    rho: float = RHO
    a0: Optional[float] = None
    rytov_sq: Optional[float] = None

    @classmethod
    def table1(cls, receiver: int = 1, **overrides) -> "GeometryConfig":
        """
        Default geometry of receiver 1 (far, d_z = 1000 m) or receiver 2 (near, d_z = 800 m).
        """
        if receiver not in (1, 2):
            raise ChannelException(f"receiver must be 1 or 2, got {receiver}")
        i = receiver - 1
        d_z = (D_Z1, D_Z2)[i]
        base = dict(d_or=d_z - D_TO, phi_p=PHI_P[i], phi_r=PHI_R[i], w_dz=BEAM_WIDTH[i])
        base.update(overrides)
        return cls(**base)

    @property
    def d_z(self) -> float:
        return self.d_to + self.d_or

    @property
    def beam_width(self) -> float:
        if self.w_dz is not None:
            return self.w_dz
        return beam_width(self.w0, self.wavelength, self.d_z)

    def violations(self) -> List[str]:
        """
        Lists every broken invariant without raising.

        Returns:
            List[str]: Human-readable violations; empty when the geometry is valid.
        """
        problems = []
        for name in ("d_to", "d_or", "l_d", "wavelength"):
            if not getattr(self, name) > 0.0:
                problems.append(f"{name} must be > 0")
        if not 0.0 < self.phi_p < math.pi or abs(math.sin(self.phi_p)) < 1e-12:
            problems.append("phi_p must lie in (0, pi): degenerate geometry, sin(phi_p) = 0")
        if not 0.0 < self.phi_r < math.pi:
            problems.append("phi_r must lie in (0, pi)")
        if not 0.0 < self.rho <= 1.0:
            problems.append("rho must lie in (0, 1]")
        if self.sigma_atm < 0.0:
            problems.append("sigma_atm must be >= 0")
        if self.w_dz is None and self.w0 is None:
            problems.append("either w_dz or w0 is required")
        elif self.w_dz is not None and not self.w_dz > 0.0:
            problems.append("w_dz must be > 0")
        elif self.w_dz is None and not self.w0 > 0.0:
            problems.append("w0 must be > 0")
        for name in ("sigma_s", "sigma_r", "sigma_p"):
            if getattr(self, name) < 0.0:
                problems.append(f"{name} must be >= 0")
        if self.sigma_s == 0.0 and self.sigma_p == 0.0:
            problems.append("sigma_s and sigma_p cannot both be 0: degenerate misalignment")
        if self.rytov_sq is None and not self.cn2 > 0.0:
            problems.append("cn2 must be > 0")
        if self.rytov_sq is not None and not self.rytov_sq > 0.0:
            problems.append("rytov_sq must be > 0")
        if self.a0 is not None and not 0.0 < self.a0 <= 1.0:
            problems.append("a0 must lie in (0, 1]")
        return problems

    def validate(self):
        """
        Raises:
            ChannelException: Listing every violation.
        """
        problems = self.violations()
        if problems:
            raise ChannelException("; ".join(problems), problems)
        if self.rytov_sq is None and not CN2_MIN <= self.cn2 <= CN2_MAX:
            logger.warning(f"Cn2 = {self.cn2:.3g} outside the usual terrestrial range [{CN2_MIN:g}, {CN2_MAX:g}]")


class PointingParams(NamedTuple):
    omega: float
    q: float
    c: float
    v: float
    a0: float
    sigma_u1_sq: float
    sigma_u2_sq: float
    t1: float
    t2: float
    t: float
    nu1: float
    nu2: float


class TurbulenceParams(NamedTuple):
    alpha: float
    beta: float
    rytov_sq: float


@dataclass(frozen=True)
class ChannelParams:
    """
    Distribution parameters of the three channel factors of one path.

    h = h_l * h_s * h_g with h_l deterministic, h_s Gamma-Gamma(alpha, beta)
    and h_g the 3D pointing-error gain on (0, a0].
    """
    h_l: float
    a0: float
    omega: float
    q: float
    c: float
    v: float
    alpha: float
    beta: float
    sigma_u1_sq: float = math.nan
    sigma_u2_sq: float = math.nan
    t1: float = math.nan
    t2: float = math.nan
    t: float = math.nan
    nu1: float = math.nan
    nu2: float = math.nan
    rytov_sq: float = math.nan
    d_z: float = math.nan
    geometry: Optional[GeometryConfig] = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        problems = []
        if not 0.0 < self.h_l <= 1.0:
            problems.append(f"h_l must lie in (0, 1], got {self.h_l}")
        if not 0.0 < self.a0 <= 1.0:
            problems.append(f"a0 must lie in (0, 1], got {self.a0}")
        for name in ("omega", "q", "c", "alpha", "beta"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0.0):
                problems.append(f"{name} must be finite and > 0, got {value}")
        if not self.c > abs(self.v):
            problems.append(f"c = {self.c} must exceed |v| = {abs(self.v)}")
        if problems:
            raise ChannelException("; ".join(problems), problems)

    @classmethod
    def synthetic(cls, alpha: float, beta: float, omega: float, q: float, a0: float = 1.0,
                  h_l: float = 1.0) -> "ChannelParams":
        """
        Geometry-free parameter set, c and v derived from (omega, q).
        """
        c = (1.0 + q * q) * omega / (2.0 * q)
        v = (1.0 - q * q) * omega / (2.0 * q)
        return cls(h_l=h_l, a0=a0, omega=omega, q=q, c=c, v=v, alpha=alpha, beta=beta)

    @property
    def scale(self) -> float:
        """a0 * h_l, the largest value the pointing and loss factors allow."""
        return self.a0 * self.h_l


def beam_width(w0: float, wavelength: float, d: float) -> float:
    """
    Gaussian-beam width at distance d from a waist w0.

    Args:
        w0 (float): Beam waist [m].
        wavelength (float): Wavelength [m].
        d (float): Propagation distance [m].

    Returns:
        float: w0 * sqrt(1 + (lambda d / (pi w0^2))^2).
    """
    return w0 * math.sqrt(1.0 + (wavelength * d / (math.pi * w0 * w0)) ** 2)


def path_loss(g: GeometryConfig) -> float:
    """
    Deterministic atmospheric loss h_l = rho * 10^(-sigma d_z / 10).
    """
    g.validate()
    return g.rho * 10.0 ** (-g.sigma_atm * g.d_z / 10.0)


def _erf_gain(nu: float) -> float:
    # sqrt(pi) erf(nu) / (2 nu exp(-nu^2)), -> 1 as nu -> 0
    if nu < 1e-8:
        return 1.0
    return math.sqrt(math.pi) * math.erf(nu) * math.exp(nu * nu) / (2.0 * nu)


def pointing_params(g: GeometryConfig) -> PointingParams:
    """
    Pointing-error parameters of the 3D building-sway model.

    Args:
        g (GeometryConfig): Path geometry.

    Returns:
        PointingParams: omega, q, c, v, a0 and the intermediate quantities.

    Raises:
        DegenerateGeometryException: If sin(phi_p) = 0 or the resulting omega is not finite.
        ChannelException: For any other invalid geometry.
    """
    sin_p = math.sin(g.phi_p)
    if abs(sin_p) < 1e-12:
        raise DegenerateGeometryException(f"sin(phi_p) = 0 for phi_p = {g.phi_p}")
    g.validate()

    sin_sq = sin_p * sin_p
    sigma_u1_sq = (g.sigma_s ** 2 + 4.0 * math.cos(g.phi_r) ** 2 * g.sigma_r ** 2 + g.sigma_p ** 2) / sin_sq
    sigma_u2_sq = (g.sigma_s ** 2 + g.sigma_p ** 2) / sin_sq
    q = math.sqrt(sigma_u2_sq / sigma_u1_sq)
    big_omega = sigma_u1_sq + sigma_u2_sq

    w = g.beam_width
    nu1 = g.l_d / (2.0 * w) * math.sqrt(math.pi / 2.0)
    nu2 = nu1 * abs(sin_p)
    t1 = _erf_gain(nu1)
    t2 = _erf_gain(nu2) / sin_sq
    t = math.sqrt(t1 * t2)

    omega = (1.0 + q * q) * t * w * w / (4.0 * q * big_omega)
    if not math.isfinite(omega):
        raise DegenerateGeometryException(f"omega overflows for beam width {w:g} m and lens {g.l_d:g} m")
    c = (1.0 + q * q) * omega / (2.0 * q)
    v = (1.0 - q * q) * omega / (2.0 * q)
    a0 = g.a0 if g.a0 is not None else math.erf(nu1) * math.erf(nu2)
    return PointingParams(omega, q, c, v, a0, sigma_u1_sq, sigma_u2_sq, t1, t2, t, nu1, nu2)


def rytov_variance(g: GeometryConfig) -> float:
    """sigma_R^2 = 1.23 Cn2 k^(7/6) d_z^(11/6), unless the geometry overrides it."""
    if g.rytov_sq is not None:
        return g.rytov_sq
    k = 2.0 * math.pi / g.wavelength
    return 1.23 * g.cn2 * k ** (7.0 / 6.0) * g.d_z ** (11.0 / 6.0)


def cn2_for_rytov(rytov_sq: float, wavelength: float, d_z: float) -> float:
    """Refraction-structure parameter that yields rytov_sq over d_z."""
    k = 2.0 * math.pi / wavelength
    return rytov_sq / (1.23 * k ** (7.0 / 6.0) * d_z ** (11.0 / 6.0))


def turbulence_regime(rytov_sq: float) -> TurbulenceRegime:
    if rytov_sq < 0.9:
        return TurbulenceRegime.WEAK
    if rytov_sq <= 1.1:
        return TurbulenceRegime.MODERATE
    return TurbulenceRegime.STRONG


def turbulence_params(g: GeometryConfig) -> TurbulenceParams:
    """
    Gamma-Gamma shapes from the Rytov variance of the path.

    Returns:
        TurbulenceParams: (alpha, beta, rytov_sq).
    """
    g.validate()
    s2 = rytov_variance(g)
    s12_5 = s2 ** 1.2  # sigma_R^(12/5)
    alpha = 1.0 / math.expm1(0.49 * s2 / (1.0 + 1.11 * s12_5) ** (7.0 / 6.0))
    beta = 1.0 / math.expm1(0.51 * s2 / (1.0 + 0.69 * s12_5) ** (5.0 / 6.0))
    logger.debug(f"Rytov variance {s2:.4g} ({turbulence_regime(s2).value}): alpha={alpha:.4g}, beta={beta:.4g}")
    return TurbulenceParams(alpha, beta, s2)


def derive_channel_params(g: GeometryConfig) -> ChannelParams:
    """
    Bundles path loss, pointing-error and turbulence parameters of a geometry.
    """
    pointing = pointing_params(g)
    turbulence = turbulence_params(g)
    params = ChannelParams(h_l=path_loss(g), a0=pointing.a0, omega=pointing.omega, q=pointing.q, c=pointing.c,
                           v=pointing.v, alpha=turbulence.alpha, beta=turbulence.beta,
                           sigma_u1_sq=pointing.sigma_u1_sq, sigma_u2_sq=pointing.sigma_u2_sq, t1=pointing.t1,
                           t2=pointing.t2, t=pointing.t, nu1=pointing.nu1, nu2=pointing.nu2,
                           rytov_sq=turbulence.rytov_sq, d_z=g.d_z, geometry=g)
    logger.debug(f"Channel parameters for d_z = {g.d_z:g} m: {params}")
    return params


def _as_output(values: np.ndarray, like: ArrayLike) -> ArrayLike:
    return float(values) if np.ndim(like) == 0 else values


def log_pointing_density(depth: ArrayLike, p: ChannelParams) -> np.ndarray:
    """
    log of the pointing-error density at h_g = a0 exp(-depth), depth >= 0.

    Working in depth keeps full precision when c - v is large and the density
    is concentrated within a tiny distance of a0.
    """
    t = np.asarray(depth, dtype=float)
    return math.log(p.omega / p.a0) - (p.c - 1.0) * t + log_bessel_i0(p.v * t)


def log_pdf_pointing(h_g: ArrayLike, p: ChannelParams) -> np.ndarray:
    """
    log f_{h_g}; -inf outside (0, a0].
    """
    h = np.asarray(h_g, dtype=float)
    inside = (h > 0.0) & (h <= p.a0)
    depth = -np.log(np.where(inside, h, p.a0) / p.a0)
    return np.where(inside, log_pointing_density(depth, p), -np.inf)


def pdf_pointing(h_g: ArrayLike, p: ChannelParams) -> ArrayLike:
    """
    Pointing-error density (omega/a0) (h_g/a0)^(c-1) I0(-v ln(h_g/a0)) on (0, a0], zero elsewhere.

    Args:
        h_g (ArrayLike): Pointing gain(s).
        p (ChannelParams): Channel parameters.

    Returns:
        ArrayLike: Density value(s).
    """
    return _as_output(np.exp(log_pdf_pointing(h_g, p)), h_g)


def log_pdf_turbulence(h_s: ArrayLike, p: ChannelParams) -> np.ndarray:
    h = np.asarray(h_s, dtype=float)
    inside = h > 0.0
    safe = np.where(inside, h, 1.0)
    a, b = p.alpha, p.beta
    log_norm = math.log(2.0) + 0.5 * (a + b) * math.log(a * b) - special.gammaln(a) - special.gammaln(b)
    with np.errstate(over="ignore", divide="ignore"):
        log_f = (log_norm + (0.5 * (a + b) - 1.0) * np.log(safe)
                 + log_bessel_k(a - b, 2.0 * np.sqrt(a * b * safe)))
    return np.where(inside, log_f, -np.inf)


def pdf_turbulence(h_s: ArrayLike, p: ChannelParams) -> ArrayLike:
    """
    Gamma-Gamma density with unit mean; zero for h_s <= 0.
    """
    return _as_output(np.exp(log_pdf_turbulence(h_s, p)), h_s)


def pointing_tail(depth: float, p: ChannelParams) -> float:
    """
    P(-ln(h_g/a0) >= depth), the pointing-error CDF at h_g = a0 exp(-depth).

    -ln(h_g/a0) has density omega exp(-c t) I0(v t); after t = depth + tau/(c-v)
    the integrand is exp(-tau) i0e(v t), bounded by 1.
    """
    if depth <= 0.0:
        return 1.0
    if p.v == 0.0:
        return math.exp(-p.omega * depth)
    rate = p.c - p.v

    def integrand(tau):
        return math.exp(-tau) * special.i0e(p.v * (depth + tau / rate))

    value, _ = integrate.quad(integrand, 0.0, np.inf, epsrel=ORACLE_EPSREL, limit=ORACLE_LIMIT)
    return min(1.0, p.omega / rate * math.exp(-rate * depth) * value)


def cdf_pointing(h_g: float, p: ChannelParams) -> float:
    """
    Pointing-error CDF by one-dimensional quadrature of its density.
    """
    if h_g <= 0.0:
        return 0.0
    return pointing_tail(-math.log(h_g / p.a0), p)


def cdf_turbulence(h_s: float, p: ChannelParams) -> float:
    """
    Gamma-Gamma CDF by quadrature in the log variable y = ln(h_s).

    The smaller of the two tails is integrated and the CDF built from it. The
    upper tail stops where 2 sqrt(alpha beta h_s) reaches 800, beyond which the
    density is below exp(-800).
    """
    if h_s <= 0.0:
        return 0.0

    def integrand(y):
        log_f = y + float(log_pdf_turbulence(math.exp(y), p))
        return math.exp(log_f) if math.isfinite(log_f) else 0.0

    split = math.log(h_s)
    if split <= 0.0:
        value, _ = integrate.quad(integrand, -np.inf, split, epsrel=ORACLE_EPSREL, limit=ORACLE_LIMIT)
        return min(1.0, value)
    y_max = math.log(TURBULENCE_TAIL_EXTENT / (p.alpha * p.beta))
    if split >= y_max:
        return 1.0
    upper, _ = integrate.quad(integrand, split, y_max, epsrel=ORACLE_EPSREL, limit=ORACLE_LIMIT)
    return max(0.0, 1.0 - upper)
