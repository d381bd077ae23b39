"""
Monte Carlo verification path: exact samplers for the channel factors and a
sharded, seeded outage estimator.

The pointing gain is drawn as h_g = a0 exp(-(lambda1 G1^2 + lambda2 G2^2)) with
G1, G2 standard normal. With t = -ln(h_g/a0) the pointing density becomes
omega exp(-c t) I0(v t), the density of that weighted chi-square sum when
lambda1 + lambda2 = c/omega^2 and lambda1 - lambda2 = v/omega^2.
"""
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np

from oris_noma.config import MC_SHARD_SIZE, THREADS
from oris_noma.models.channel import ChannelParams
from oris_noma.models.outage import NomaConfig, Receiver
from oris_noma.utils.helpers import rate_threshold
from oris_noma.utils.logging import logger


class MonteCarloException(ValueError):
    """
    Custom exception for invalid Monte Carlo requests.

    Attributes:
        message (str): Explanation of the error that occurred.
    """

    def __init__(self, message):
        super().__init__(message)
        logger.warning(f"MonteCarloException: {message}")


@dataclass(frozen=True)
class SamplerParams:
    """
    Parameters of the channel samplers.

    Attributes:
        lambda1 (float): Weight of the first chi-square component, 1/(2 q omega).
        lambda2 (float): Weight of the second chi-square component, q/(2 omega).
        alpha (float): Turbulence shape alpha.
        beta (float): Turbulence shape beta.
        a0 (float): Collected power fraction at the PD centre.
        h_l (float): Deterministic path loss.
    """
    lambda1: float
    lambda2: float
    alpha: float
    beta: float
    a0: float = 1.0
    h_l: float = 1.0

    def __post_init__(self):
        for name in ("lambda1", "lambda2", "alpha", "beta", "a0", "h_l"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0.0):
                raise MonteCarloException(f"{name} must be finite and > 0, got {value}")

    @classmethod
    def from_channel_params(cls, p: ChannelParams) -> "SamplerParams":
        return cls(lambda1=1.0 / (2.0 * p.q * p.omega), lambda2=p.q / (2.0 * p.omega), alpha=p.alpha, beta=p.beta,
                   a0=p.a0, h_l=p.h_l)


@dataclass(frozen=True)
class McEstimate:
    """
    Monte Carlo outage estimate.

    Attributes:
        p_hat (float): Outage frequency.
        n (int): Number of trials.
        std_err (float): sqrt(p_hat (1 - p_hat) / n).
        seed (int): Master seed of the trial streams.
    """
    p_hat: float
    n: int
    std_err: float
    seed: int

    @classmethod
    def from_count(cls, outages: int, n: int, seed: int) -> "McEstimate":
        p_hat = outages / n
        return cls(p_hat, n, math.sqrt(p_hat * (1.0 - p_hat) / n), seed)


@dataclass(frozen=True)
class McScenario:
    """
    What one estimate_op call simulates.

    Attributes:
        sampler (SamplerParams): Channel of the simulated receiver.
        noma (NomaConfig): Power split, beam split, rates and SNR.
        which (Receiver): Rx1, Rx2 or Single (rate r1, no splits).
        oma (bool): Simulate the two-slot TDMA benchmark instead of NOMA.
    """
    sampler: SamplerParams
    noma: NomaConfig
    which: Receiver
    oma: bool = False


def sample_turbulence(rng: np.random.Generator, alpha: float, beta: float, size=None):
    """
    Gamma-Gamma draws as the product of two unit-mean Gamma variates.
    """
    return rng.gamma(alpha, 1.0 / alpha, size) * rng.gamma(beta, 1.0 / beta, size)


def sample_pointing(rng: np.random.Generator, p: SamplerParams, size=None):
    """
    Pointing gains a0 exp(-(lambda1 G1^2 + lambda2 G2^2)), always in (0, a0].
    """
    g1 = rng.standard_normal(size)
    g2 = rng.standard_normal(size)
    return p.a0 * np.exp(-(p.lambda1 * g1 * g1 + p.lambda2 * g2 * g2))


def sample_channel(rng: np.random.Generator, p: SamplerParams, size=None):
    """
    E2E gains h = h_l * h_s * h_g.
    """
    return p.h_l * sample_turbulence(rng, p.alpha, p.beta, size) * sample_pointing(rng, p, size)


def outage_mask(h: np.ndarray, scenario: McScenario) -> np.ndarray:
    """
    Per-trial outage events for channel gains h.

    The SINRs are formed directly from the received signal and interference
    powers, independently of the closed-form rearrangement:
    gamma_1 = a1 B snr h^2 / (a2 B snr h^2 + 1) and gamma_22 = a2 B2 snr h^2.
    """
    cfg = scenario.noma
    received = cfg.snr * h * h
    if scenario.oma:
        split, rate = (cfg.b1, cfg.r1) if scenario.which is Receiver.RX1 else (cfg.b2, cfg.r2)
        return split * received < rate_threshold(2.0 * rate)
    if scenario.which is Receiver.SINGLE:
        return received < cfg.gamma_th1
    split = cfg.b1 if scenario.which is Receiver.RX1 else cfg.b2
    signal = split * received
    sinr_x1 = cfg.a1 * signal / (cfg.a2 * signal + 1.0)
    if scenario.which is Receiver.RX1:
        return sinr_x1 < cfg.gamma_th1
    snr_x2 = cfg.a2 * signal
    return ~((sinr_x1 >= cfg.gamma_th1) & (snr_x2 >= cfg.gamma_th2))


def _shard_sizes(n: int) -> List[int]:
    full, rest = divmod(n, MC_SHARD_SIZE)
    return [MC_SHARD_SIZE] * full + ([rest] if rest else [])


def _run_shards(seed: int, n: int, task, workers: Optional[int]) -> list:
    sizes = _shard_sizes(n)
    streams = np.random.SeedSequence(seed).spawn(len(sizes))
    workers = max(1, workers or THREADS)
    logger.debug(f"Monte Carlo: {n} trials in {len(sizes)} shards on {workers} workers (seed {seed})")
    if workers == 1 or len(sizes) == 1:
        return [task(np.random.default_rng(stream), size) for stream, size in zip(streams, sizes)]
    with ThreadPoolExecutor(max_workers=workers) as executor:
        return list(executor.map(lambda job: task(np.random.default_rng(job[0]), job[1]), zip(streams, sizes)))


def estimate_op(rng_seed: int, scenario: McScenario, n: int, workers: Optional[int] = None) -> McEstimate:
    """
    Seeded Monte Carlo estimate of an outage probability.

    Trials are split into shards of MC_SHARD_SIZE, each with its own stream spawned
    from the master seed; the estimate is the sum of per-shard counts and does not
    depend on the number of workers.

    Args:
        rng_seed (int): Master seed.
        scenario (McScenario): Channel, configuration and receiver.
        n (int): Number of trials, >= 1.
        workers (Optional[int]): Thread count, ORIS_NOMA_THREADS by default.

    Returns:
        McEstimate: Outage frequency and its standard error.

    Raises:
        MonteCarloException: If n < 1.
    """
    if n < 1:
        raise MonteCarloException(f"at least one trial is needed, got n = {n}")
    def count(rng, size):
        return int(np.count_nonzero(outage_mask(sample_channel(rng, scenario.sampler, size), scenario)))

    outages = sum(_run_shards(rng_seed, n, count, workers))
    return McEstimate.from_count(outages, n, rng_seed)


def empirical_cdf(seed: int, p: SamplerParams, grid: Sequence[float], n: int,
                  workers: Optional[int] = None) -> np.ndarray:
    """
    Fraction of n sampled E2E gains at or below each grid point.
    """
    if n < 1:
        raise MonteCarloException(f"at least one sample is needed, got n = {n}")
    points = np.asarray(grid, dtype=float)

    def count(rng, size):
        draws = np.sort(sample_channel(rng, p, size))
        return np.searchsorted(draws, points, side="right")

    return np.sum(_run_shards(seed, n, count, workers), axis=0) / n
