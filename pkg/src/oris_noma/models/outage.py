import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Dict, List, Optional, Tuple

from oris_noma.config import A1, A2, B1, B2, GUARD_RTOL, R1, R2
from oris_noma.models.distribution import E2EChannelDist
from oris_noma.utils.helpers import db_to_linear, rate_threshold
from oris_noma.utils.logging import logger


class OutageException(ValueError):
    """
    Custom exception for invalid NOMA configurations.

    Attributes:
        message (str): Explanation of the error that occurred.
        violations (List[str]): Every invariant the configuration breaks.
    """

    def __init__(self, message, violations: Optional[List[str]] = None):
        super().__init__(message)
        self.violations = list(violations or [message])
        logger.warning(f"OutageException: {message}")


class Receiver(Enum):
    """Receiver an outage probability refers to; SINGLE is the one-user link without NOMA."""
    RX1 = "rx1"
    RX2 = "rx2"
    SINGLE = "single"


class Method(Enum):
    """How an outage probability is obtained; OMA is the TDMA benchmark."""
    ANALYTIC = "analytic"
    ASYMPTOTIC = "asymptotic"
    MONTE_CARLO = "mc"
    OMA = "oma"


@dataclass(frozen=True)
class NomaConfig:
    """
    Power allocation, beam splitting and target rates of the two-user downlink.

    Attributes:
        a1 (float): Power share of the far user's message x1.
        a2 (float): Power share of the near user's message x2.
        b1 (float): Share of the incident beam reflected towards Rx1.
        b2 (float): Share of the incident beam reflected towards Rx2.
        r1 (float): Target rate of Rx1 [bit/s/Hz].
        r2 (float): Target rate of Rx2 [bit/s/Hz].
        snr_db (float): Transmit SNR P / sigma_n^2 [dB].
    """
    a1: float = A1
    a2: float = A2
    b1: float = B1
    b2: float = B2
    r1: float = R1
    r2: float = R2
    snr_db: float = 100.0

    @property
    def gamma_th1(self) -> float:
        return rate_threshold(self.r1)

    @property
    def gamma_th2(self) -> float:
        return rate_threshold(self.r2)

    @property
    def snr(self) -> float:
        return db_to_linear(self.snr_db)

    def with_changes(self, **changes) -> "NomaConfig":
        """
        Copy of the configuration with the given fields replaced.

        Args:
            **changes: Field values, e.g. a1=0.8, a2=0.2.

        Returns:
            NomaConfig: The new configuration; self is left unchanged.
        """
        return replace(self, **changes)

    def violations(self) -> List[str]:
        """
        Lists every broken invariant without raising.
        """
        problems = []
        if not self.a2 > 0.0:
            problems.append("a2 > 0 required")
        if not self.a1 > self.a2:
            problems.append("a1 > a2 required")
        if abs(self.a1 + self.a2 - 1.0) > 1e-9:
            problems.append("a1 + a2 = 1 required")
        for name in ("b1", "b2"):
            if not 0.0 < getattr(self, name) < 1.0:
                problems.append(f"{name} must lie in (0, 1)")
        if self.b1 + self.b2 > 1.0 + 1e-12:
            problems.append("b1 + b2 <= 1 required")
        for name in ("r1", "r2"):
            if not getattr(self, name) > 0.0:
                problems.append(f"{name} must be > 0")
        if not math.isfinite(self.snr_db):
            problems.append("snr_db must be finite")
        return problems

    def validate(self):
        problems = self.violations()
        if problems:
            raise OutageException("; ".join(problems), problems)


@dataclass(frozen=True)
class OutageResult:
    """
    Outage probability of one receiver.

    Attributes:
        p_out (float): Outage probability in [0, 1].
        method (Method): How p_out was obtained.
        condition_violated (bool): True when a1/a2 <= gamma_th1, in which case p_out = 1.
        diversity_order (Optional[float]): High-SNR slope, attached to asymptotic results.
        receiver (Optional[Receiver]): Receiver the result refers to.
        std_err (Optional[float]): Standard error, Monte Carlo only.
        diagnostics (Dict[str, object]): CDF argument, active SIC branch, asymptotic branch.
    """
    p_out: float
    method: Method
    condition_violated: bool = False
    diversity_order: Optional[float] = None
    receiver: Optional[Receiver] = None
    std_err: Optional[float] = None
    diagnostics: Dict[str, object] = field(default_factory=dict)


def operation_condition(cfg: NomaConfig) -> bool:
    """
    True when a1/a2 > gamma_th1, the condition for Rx1 (and Rx2's SIC stage) to ever decode x1.

    A relative slack of GUARD_RTOL puts the boundary a1/a2 == gamma_th1 on the outage side
    despite rounding in 2^R - 1.
    """
    return cfg.a1 > cfg.a2 * cfg.gamma_th1 * (1.0 + GUARD_RTOL)


def cdf_argument(cfg: NomaConfig, which: Receiver) -> Tuple[float, Dict[str, object]]:
    """
    Channel gain at which the receiver's CDF gives its outage probability.

    Args:
        cfg (NomaConfig): NOMA configuration.
        which (Receiver): Rx1, Rx2 or Single (rate r1, no power or beam split).

    Returns:
        Tuple[float, Dict[str, object]]: The argument (inf when the operation condition fails)
            and the squared terms it was built from.
    """
    snr = cfg.snr
    if which is Receiver.SINGLE:
        squared = cfg.gamma_th1 / snr
        return math.sqrt(squared), {"argument_sq": squared}
    if not operation_condition(cfg):
        return math.inf, {"argument_sq": math.inf}
    margin = cfg.a1 - cfg.a2 * cfg.gamma_th1
    if which is Receiver.RX1:
        squared = cfg.gamma_th1 / (cfg.b1 * snr * margin)
        return math.sqrt(squared), {"argument_sq": squared}
    sic = cfg.gamma_th1 / (cfg.b2 * snr * margin)
    own = cfg.gamma_th2 / (cfg.a2 * cfg.b2 * snr)
    squared = max(sic, own)
    return math.sqrt(squared), {"argument_sq": squared, "sic_term": sic, "own_term": own,
                                "active": "sic" if sic >= own else "own"}


def op_single(dist: E2EChannelDist, snr_db: float, rate: float) -> OutageResult:
    """
    Outage probability of a single receiver, F_h(sqrt(gamma_th / snr)).

    Args:
        dist (E2EChannelDist): E2E channel distribution.
        snr_db (float): Transmit SNR [dB].
        rate (float): Target rate [bit/s/Hz], >= 0.

    Returns:
        OutageResult: Analytic outage probability.
    """
    if rate < 0.0:
        raise OutageException(f"rate must be >= 0, got {rate}")
    argument = math.sqrt(rate_threshold(rate) / db_to_linear(snr_db))
    return OutageResult(dist.cdf(argument), Method.ANALYTIC, receiver=Receiver.SINGLE,
                        diagnostics={"argument": argument})


def _guarded(cfg: NomaConfig, which: Receiver, method: Method) -> OutageResult:
    logger.debug(f"{which.value}: a1/a2 = {cfg.a1 / cfg.a2:.6g} <= gamma_th1 = {cfg.gamma_th1:.6g}, constant outage")
    return OutageResult(1.0, method, condition_violated=True, receiver=which)


def op_rx1(dist1: E2EChannelDist, cfg: NomaConfig) -> OutageResult:
    """
    Outage probability of the far user Rx1, which decodes x1 treating x2 as noise.

    Args:
        dist1 (E2EChannelDist): E2E channel of Rx1.
        cfg (NomaConfig): NOMA configuration.

    Returns:
        OutageResult: 1 with condition_violated when a1/a2 <= gamma_th1.
    """
    cfg.validate()
    if not operation_condition(cfg):
        return _guarded(cfg, Receiver.RX1, Method.ANALYTIC)
    argument, diagnostics = cdf_argument(cfg, Receiver.RX1)
    diagnostics["argument"] = argument
    return OutageResult(dist1.cdf(argument), Method.ANALYTIC, receiver=Receiver.RX1, diagnostics=diagnostics)


def op_rx2(dist2: E2EChannelDist, cfg: NomaConfig) -> OutageResult:
    """
    Outage probability of the near user Rx2, which must decode x1 (SIC) and then x2.

    The diagnostics record which of the two SINR conditions sets the CDF argument.
    """
    cfg.validate()
    if not operation_condition(cfg):
        return _guarded(cfg, Receiver.RX2, Method.ANALYTIC)
    argument, diagnostics = cdf_argument(cfg, Receiver.RX2)
    diagnostics["argument"] = argument
    return OutageResult(dist2.cdf(argument), Method.ANALYTIC, receiver=Receiver.RX2, diagnostics=diagnostics)


def op_oma(dist_j: E2EChannelDist, cfg: NomaConfig, which: Receiver) -> OutageResult:
    """
    Two-slot TDMA benchmark: receiver j gets B_j * snr for half the time.

    Args:
        dist_j (E2EChannelDist): E2E channel of receiver j.
        cfg (NomaConfig): Only b_j, r_j and snr_db are used.
        which (Receiver): Rx1 or Rx2.

    Returns:
        OutageResult: F_hj(sqrt((2^(2 R_j) - 1) / (B_j snr))).
    """
    if which is Receiver.RX1:
        rate, split = cfg.r1, cfg.b1
    elif which is Receiver.RX2:
        rate, split = cfg.r2, cfg.b2
    else:
        raise OutageException(f"OMA benchmark needs Rx1 or Rx2, got {which.value}")
    threshold = rate_threshold(2.0 * rate)
    argument = math.sqrt(threshold / (split * cfg.snr))
    return OutageResult(dist_j.cdf(argument), Method.OMA, receiver=which,
                        diagnostics={"argument": argument, "threshold": threshold})


def diversity_order(dist: E2EChannelDist) -> float:
    """min(alpha, beta, c) / 2."""
    return min(dist.alpha, dist.beta, dist.params.c) / 2.0


def op_asymptotic(dist_j: E2EChannelDist, cfg: NomaConfig, which: Receiver) -> OutageResult:
    """
    High-SNR outage probability from the small-h asymptote of the CDF.

    For Single the rate r1 is used with no power or beam split.

    Raises:
        NonConvergentAsymptoticException: If the turbulence-limited branch does not converge.
        DegenerateAsymptoticException: If min(alpha, beta) coincides with c.
    """
    if which is not Receiver.SINGLE:
        cfg.validate()
        if not operation_condition(cfg):
            result = _guarded(cfg, which, Method.ASYMPTOTIC)
            return replace(result, diversity_order=diversity_order(dist_j))
    argument, diagnostics = cdf_argument(cfg, which)
    form, value = dist_j.cdf_asymptotic(argument)
    diagnostics.update(argument=argument, branch=form.branch.value)
    return OutageResult(min(value, 1.0), Method.ASYMPTOTIC, diversity_order=diversity_order(dist_j),
                        receiver=which, diagnostics=diagnostics)
