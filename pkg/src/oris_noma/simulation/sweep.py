import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, TextIO, Tuple

import numpy as np

from oris_noma.config import THREADS
from oris_noma.models.channel import ChannelException, derive_channel_params
from oris_noma.models.distribution import DistributionException, E2EChannelDist
from oris_noma.models.outage import (Method, OutageException, OutageResult, Receiver, op_asymptotic, op_oma, op_rx1,
                                     op_rx2, op_single, operation_condition)
from oris_noma.simulation.monte_carlo import McScenario, MonteCarloException, SamplerParams, estimate_op
from oris_noma.simulation.scenario import Scenario
from oris_noma.utils.helpers import derived_seed
from oris_noma.utils.logging import logger
from oris_noma.utils.specfun import SpecialFunctionException

CSV_COLUMNS = ["scenario", "sweep_var", "value", "receiver", "method", "p_out", "std_err", "condition_violated",
               "diversity_order"]

NUMERICAL_FAILURES = (DistributionException, SpecialFunctionException, ChannelException, OutageException,
                      MonteCarloException, ArithmeticError)


@dataclass(frozen=True)
class SweepRow:
    """
    One CSV row: a receiver evaluated by one method at one sweep point.
    """
    scenario: str
    sweep_var: str
    value: float
    receiver: Receiver
    method: Method
    p_out: float
    std_err: Optional[float] = None
    condition_violated: bool = False
    diversity_order: Optional[float] = None

    @property
    def failed(self) -> bool:
        return math.isnan(self.p_out)

    def as_csv(self) -> List[str]:
        def number(x: Optional[float]) -> str:
            return "" if x is None else format(x, ".17g")

        return [self.scenario, self.sweep_var, number(self.value), self.receiver.value, self.method.value,
                number(self.p_out), number(self.std_err), "true" if self.condition_violated else "false",
                number(self.diversity_order)]

    @classmethod
    def from_csv(cls, record: Dict[str, str]) -> "SweepRow":
        def number(text: str) -> Optional[float]:
            return None if text == "" else float(text)

        return cls(record["scenario"], record["sweep_var"], float(record["value"]), Receiver(record["receiver"]),
                   Method(record["method"]), float(record["p_out"]), number(record["std_err"]),
                   record["condition_violated"] == "true", number(record["diversity_order"]))


def _mc_seed(scenario: Scenario, *path: int) -> int:
    return int(derived_seed(scenario.seed, *path).generate_state(1, dtype=np.uint64)[0])


def _evaluate(scenario: Scenario, dist: E2EChannelDist, noma, receiver: Receiver, method: Method,
              seed: int, mc_workers: int) -> OutageResult:
    if method is Method.ANALYTIC:
        if receiver is Receiver.SINGLE:
            return op_single(dist, noma.snr_db, noma.r1)
        return op_rx1(dist, noma) if receiver is Receiver.RX1 else op_rx2(dist, noma)
    if method is Method.ASYMPTOTIC:
        return op_asymptotic(dist, noma, receiver)
    if method is Method.OMA:
        return op_oma(dist, noma, receiver)
    mc = McScenario(SamplerParams.from_channel_params(dist.params), noma, receiver)
    estimate = estimate_op(seed, mc, scenario.mc_trials, workers=mc_workers)
    violated = receiver is not Receiver.SINGLE and not operation_condition(noma)
    return OutageResult(estimate.p_hat, Method.MONTE_CARLO, condition_violated=violated, receiver=receiver,
                        std_err=estimate.std_err)


def evaluate_point(scenario: Scenario, scenario_index: int, point_index: int, value: float,
                   mc_workers: int = 1) -> List[SweepRow]:
    """
    Rows of one sweep point, receivers and methods in the scenario's order.

    Numerical failures are logged and give a row with p_out = nan.
    """
    g1, g2, noma = scenario.at(value)
    geometries = {Receiver.RX1: g1, Receiver.RX2: g2, Receiver.SINGLE: g1}
    rows = []
    for r, receiver in enumerate(scenario.receivers):
        dist = None
        for m, method in enumerate(scenario.methods):
            if method is Method.OMA and receiver is Receiver.SINGLE:
                continue
            try:
                if dist is None:
                    dist = E2EChannelDist(derive_channel_params(geometries[receiver]), scenario.series_terms)
                result = _evaluate(scenario, dist, noma, receiver, method,
                                   _mc_seed(scenario, scenario_index, point_index, r, m), mc_workers)
                rows.append(SweepRow(scenario.name, scenario.sweep.variable.value, value, receiver, method,
                                     result.p_out, result.std_err, result.condition_violated,
                                     result.diversity_order))
            except NUMERICAL_FAILURES as e:
                logger.error(f"{scenario.name}: {receiver.value}/{method.value} failed at "
                             f"{scenario.sweep.variable.value} = {value:g}: {e}")
                rows.append(SweepRow(scenario.name, scenario.sweep.variable.value, value, receiver, method, math.nan))
    return rows


def run_sweep(scenarios: Iterable[Scenario], workers: Optional[int] = None) -> List[SweepRow]:
    """
    Evaluates every sweep point of every scenario on a thread pool.

    Rows come back in scenario, sweep-point, receiver, method order whatever
    the number of workers, and Monte Carlo seeds depend only on that position.

    Args:
        scenarios (Iterable[Scenario]): Validated scenarios.
        workers (Optional[int]): Thread count, ORIS_NOMA_THREADS by default.

    Returns:
        List[SweepRow]: All rows.
    """
    points: List[Tuple[Scenario, int, int, float]] = []
    for s, scenario in enumerate(scenarios):
        scenario.validate()
        points += [(scenario, s, i, value) for i, value in enumerate(scenario.sweep.values())]
    workers = max(1, workers or THREADS)
    logger.info(f"Running {len(points)} sweep points on {workers} workers")
    if workers == 1:
        chunks = [evaluate_point(*point, mc_workers=THREADS) for point in points]
    else:
        with ThreadPoolExecutor(max_workers=workers) as executor:
            chunks = list(executor.map(lambda point: evaluate_point(*point), points))
    rows = [row for chunk in chunks for row in chunk]
    failed = sum(row.failed for row in rows)
    if failed:
        logger.warning(f"{failed} of {len(rows)} rows could not be evaluated")
    return rows


def write_csv(rows: Iterable[SweepRow], out: TextIO):
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for row in rows:
        writer.writerow(row.as_csv())


def read_csv(source: TextIO) -> List[SweepRow]:
    return [SweepRow.from_csv(record) for record in csv.DictReader(source)]
