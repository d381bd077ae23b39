"""
Scenario files, figure presets and the validation report.

A scenario file is a JSON object; every physical quantity is in SI base units
(metres, radians), SNR in dB:

    {
      "name": "table1",
      "geometry": {"rx1": {"w_dz": 0.0045}, "rx2": {"d_or": 400.0}},
      "noma": {"a1": 0.9, "a2": 0.1, "b1": 0.4, "b2": 0.6, "r1": 2.0, "r2": 4.5},
      "sweep": {"variable": "snr_db", "from": 60, "to": 160, "steps": 11},
      "methods": ["analytic", "mc", "oma"],
      "receivers": ["rx1", "rx2"],
      "mc_trials": 1000000, "seed": 20240601, "series_terms": 10
    }

Geometry entries start from the parameter-table defaults of their receiver.
"""
import dataclasses
import json
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any, Dict, List, Optional, Sequence, Tuple

from oris_noma.config import DEFAULT_SEED, MC_TRIALS, SERIES_TERMS
from oris_noma.models.channel import ChannelException, GeometryConfig, derive_channel_params
from oris_noma.models.distribution import E2EChannelDist
from oris_noma.models.outage import Method, NomaConfig, Receiver, operation_condition
from oris_noma.simulation.monte_carlo import SamplerParams
from oris_noma.utils.helpers import linspace
from oris_noma.utils.logging import logger


class ScenarioException(ValueError):
    """
    Custom exception for unreadable or invalid scenario files.

    Attributes:
        message (str): Explanation of the error that occurred.
        violations (List[str]): Violations, each prefixed with the dotted path of the field.
        line (Optional[int]): Line of a JSON syntax error.
    """

    def __init__(self, message, violations: Optional[List[str]] = None, line: Optional[int] = None):
        super().__init__(message)
        self.violations = list(violations or [message])
        self.line = line
        logger.warning(f"ScenarioException: {message}")


class SweepVariable(Enum):
    SNR_DB = "snr_db"
    A1 = "a1"
    B1 = "B1"
    D_Z2 = "d_z2"
    SWAY_SIGMA = "sway_sigma"

    @classmethod
    def parse(cls, name: str) -> "SweepVariable":
        for member in cls:
            if member.value.lower() == str(name).lower():
                return member
        raise ValueError(f"unknown sweep variable '{name}' (expected one of {[m.value for m in cls]})")


@dataclass(frozen=True)
class Sweep:
    variable: SweepVariable = SweepVariable.SNR_DB
    start: float = 60.0
    stop: float = 160.0
    steps: int = 11

    def values(self) -> List[float]:
        return linspace(self.start, self.stop, self.steps)

    def violations(self) -> List[str]:
        problems = []
        if not (math.isfinite(self.start) and math.isfinite(self.stop)):
            problems.append("sweep bounds must be finite")
        elif self.start == self.stop:
            problems.append("sweep range is empty (from == to)")
        if self.steps < 2:
            problems.append("sweep needs steps >= 2")
        return problems


@dataclass(frozen=True)
class Scenario:
    """
    One curve family: two receiver geometries, a NOMA configuration and a sweep.

    Attributes:
        name (str): Label written to the scenario column of the CSV.
        geometry1 (GeometryConfig): Path to Rx1 (also used by the single-receiver case).
        geometry2 (GeometryConfig): Path to Rx2.
        noma (NomaConfig): NOMA configuration at the base point of the sweep.
        sweep (Sweep): Swept variable and range.
        methods (Tuple[Method, ...]): Evaluations per sweep point.
        receivers (Tuple[Receiver, ...]): Receivers to evaluate.
        mc_trials (int): Trials per Monte Carlo estimate.
        seed (int): Master seed.
        series_terms (int): Initial series truncation N; the series is extended while it has not converged.
    """
    name: str = "table1"
    geometry1: GeometryConfig = field(default_factory=lambda: GeometryConfig.table1(1))
    geometry2: GeometryConfig = field(default_factory=lambda: GeometryConfig.table1(2))
    noma: NomaConfig = field(default_factory=NomaConfig)
    sweep: Sweep = field(default_factory=Sweep)
    methods: Tuple[Method, ...] = (Method.ANALYTIC, Method.MONTE_CARLO)
    receivers: Tuple[Receiver, ...] = (Receiver.RX1, Receiver.RX2)
    mc_trials: int = MC_TRIALS
    seed: int = DEFAULT_SEED
    series_terms: int = SERIES_TERMS

    def at(self, value: float) -> Tuple[GeometryConfig, GeometryConfig, NomaConfig]:
        """
        Geometries and NOMA configuration at one sweep point.
        """
        g1, g2, noma = self.geometry1, self.geometry2, self.noma
        variable = self.sweep.variable
        if variable is SweepVariable.SNR_DB:
            noma = noma.with_changes(snr_db=value)
        elif variable is SweepVariable.A1:
            noma = noma.with_changes(a1=value, a2=1.0 - value)
        elif variable is SweepVariable.B1:
            noma = noma.with_changes(b1=value, b2=1.0 - value)
        elif variable is SweepVariable.D_Z2:
            g2 = replace(g2, d_or=value - g2.d_to)
        elif variable is SweepVariable.SWAY_SIGMA:
            g1 = replace(g1, sigma_s=value, sigma_r=value, sigma_p=value)
            g2 = replace(g2, sigma_s=value, sigma_r=value, sigma_p=value)
        return g1, g2, noma

    def violations(self) -> List[str]:
        """
        Every invariant the scenario breaks, prefixed with the dotted path of the field.

        Geometry and NOMA invariants are checked at both ends of the sweep.
        """
        problems = [f"sweep: {p}" for p in self.sweep.violations()]
        if not self.methods:
            problems.append("methods: at least one method is required")
        if not self.receivers:
            problems.append("receivers: at least one receiver is required")
        if Method.OMA in self.methods and self.receivers == (Receiver.SINGLE,):
            problems.append("methods: oma needs rx1 or rx2")
        if self.mc_trials < 1:
            problems.append("mc_trials: must be >= 1")
        if self.series_terms < 1:
            problems.append("series_terms: must be >= 1")
        if problems:
            return problems

        seen = set()
        for value in (self.sweep.start, self.sweep.stop):
            g1, g2, noma = self.at(value)
            where = f" (at {self.sweep.variable.value} = {value:g})"
            found = [f"geometry.rx1.{p}" for p in g1.violations()]
            if Receiver.RX2 in self.receivers:
                found += [f"geometry.rx2.{p}" for p in g2.violations()]
            if self.receivers != (Receiver.SINGLE,):
                found += [f"noma: {p}" for p in noma.violations()]
            elif not noma.r1 > 0.0:
                found.append("noma: r1 must be > 0")
            for problem in found:
                if problem not in seen:
                    seen.add(problem)
                    problems.append(problem + where)
        return problems

    def validate(self):
        problems = self.violations()
        if problems:
            raise ScenarioException(f"scenario '{self.name}': " + "; ".join(problems), problems)


_SCENARIO_KEYS = {"name", "geometry", "noma", "sweep", "methods", "receivers", "mc_trials", "seed", "series_terms",
                  "preset"}
_GEOMETRY_KEYS = {f.name for f in dataclasses.fields(GeometryConfig)}
_NOMA_KEYS = {f.name for f in dataclasses.fields(NomaConfig)}


def _number(value: Any, path: str, problems: List[str], integer: bool = False):
    if isinstance(value, bool) or not isinstance(value, (int, float)) or (integer and not float(value).is_integer()):
        problems.append(f"{path}: expected {'an integer' if integer else 'a number'}, got {value!r}")
        return None
    return int(value) if integer else float(value)


def _fields(raw: Any, path: str, allowed, problems: List[str], optional=()) -> Dict[str, Any]:
    if not isinstance(raw, dict):
        problems.append(f"{path}: expected an object")
        return {}
    values = {}
    for key, value in raw.items():
        if key not in allowed:
            problems.append(f"{path}.{key}: unknown field")
        elif value is None and key in optional:
            values[key] = None
        else:
            number = _number(value, f"{path}.{key}", problems)
            if number is not None:
                values[key] = number
    return values


def _enum_list(raw: Any, path: str, parse, problems: List[str]) -> Tuple:
    if not isinstance(raw, list) or not raw:
        problems.append(f"{path}: expected a non-empty list")
        return ()
    members = []
    for i, item in enumerate(raw):
        try:
            members.append(parse(item))
        except ValueError:
            problems.append(f"{path}[{i}]: unknown value {item!r}")
    return tuple(members)


def scenario_from_dict(raw: Dict[str, Any], validate: bool = True) -> Scenario:
    """
    Builds a scenario from a parsed JSON tree.

    Raises:
        ScenarioException: Listing every unknown, mistyped or invalid field.
    """
    problems: List[str] = []
    if not isinstance(raw, dict):
        raise ScenarioException("scenario: expected a JSON object")
    for key in raw:
        if key not in _SCENARIO_KEYS:
            problems.append(f"{key}: unknown field")

    geometry = raw.get("geometry", {})
    geometries = []
    if not isinstance(geometry, dict):
        problems.append("geometry: expected an object with rx1/rx2 entries")
        geometry = {}
    for key in geometry:
        if key not in ("rx1", "rx2"):
            problems.append(f"geometry.{key}: unknown receiver")
    for i, key in enumerate(("rx1", "rx2"), start=1):
        values = _fields(geometry.get(key, {}), f"geometry.{key}", _GEOMETRY_KEYS, problems,
                         optional=("w_dz", "w0", "a0", "rytov_sq"))
        geometries.append(GeometryConfig.table1(i, **values))

    noma = NomaConfig(**_fields(raw.get("noma", {}), "noma", _NOMA_KEYS, problems))

    sweep_raw = raw.get("sweep", {})
    sweep = Sweep()
    if not isinstance(sweep_raw, dict):
        problems.append("sweep: expected an object")
    else:
        unknown = set(sweep_raw) - {"variable", "from", "to", "steps"}
        problems += [f"sweep.{key}: unknown field" for key in sorted(unknown)]
        variable = sweep.variable
        if "variable" in sweep_raw:
            try:
                variable = SweepVariable.parse(sweep_raw["variable"])
            except ValueError as e:
                problems.append(f"sweep.variable: {e}")
        start = _number(sweep_raw.get("from", sweep.start), "sweep.from", problems)
        stop = _number(sweep_raw.get("to", sweep.stop), "sweep.to", problems)
        steps = _number(sweep_raw.get("steps", sweep.steps), "sweep.steps", problems, integer=True)
        if None not in (start, stop, steps):
            sweep = Sweep(variable, start, stop, steps)

    scenario = Scenario(geometry1=geometries[0], geometry2=geometries[1], noma=noma, sweep=sweep)
    changes = {}
    if "name" in raw:
        changes["name"] = str(raw["name"])
    if "methods" in raw:
        changes["methods"] = _enum_list(raw["methods"], "methods", Method, problems)
    if "receivers" in raw:
        changes["receivers"] = _enum_list(raw["receivers"], "receivers", Receiver, problems)
    for key in ("mc_trials", "seed", "series_terms"):
        if key in raw:
            value = _number(raw[key], key, problems, integer=True)
            if value is not None:
                changes[key] = value
    if problems:
        raise ScenarioException("; ".join(problems), problems)
    scenario = replace(scenario, **changes)
    if validate:
        scenario.validate()
    return scenario


def load_scenario(path: str, validate: bool = True) -> Tuple[Scenario, Optional[str]]:
    """
    Reads a scenario file.

    Args:
        path (str): JSON scenario file.
        validate (bool): Also check the scenario invariants; parsing errors are always raised.

    Returns:
        Tuple[Scenario, Optional[str]]: The scenario and the preset named in the file, if any.

    Raises:
        ScenarioException: With the line number of a JSON syntax error or the dotted paths of invalid fields.
    """
    try:
        with open(path, encoding="utf-8") as handle:
            raw = json.load(handle)
    except json.JSONDecodeError as e:
        raise ScenarioException(f"{path}: line {e.lineno}, column {e.colno}: {e.msg}", line=e.lineno)
    except OSError as e:
        raise ScenarioException(f"{path}: {e.strerror}")
    scenario = scenario_from_dict(raw, validate)
    preset = raw.get("preset") if isinstance(raw, dict) else None
    return scenario, preset


def _with_rytov(scenario: Scenario, sigma_r: float) -> Scenario:
    rytov_sq = sigma_r * sigma_r
    return replace(scenario, geometry1=replace(scenario.geometry1, rytov_sq=rytov_sq),
                   geometry2=replace(scenario.geometry2, rytov_sq=rytov_sq))


def _fig3(base: Scenario, distances: Sequence[float] = (400.0, 600.0, 800.0, 1000.0)) -> List[Scenario]:
    # single receiver, R = 1, 1 mm waist, Tx -> ORIS and ORIS -> Rx legs of equal length
    scenarios = []
    for d_z in distances:
        geometry = replace(base.geometry1, d_to=d_z / 2.0, d_or=d_z / 2.0, w_dz=None, w0=1e-3)
        scenarios.append(replace(base, name=f"fig3_dz_{d_z:g}", geometry1=geometry, noma=replace(base.noma, r1=1.0),
                                 sweep=Sweep(SweepVariable.SNR_DB, 60.0, 160.0, 21),
                                 methods=(Method.ANALYTIC, Method.ASYMPTOTIC, Method.MONTE_CARLO),
                                 receivers=(Receiver.SINGLE,)))
    return scenarios


def _fig4(base: Scenario) -> List[Scenario]:
    return [replace(_with_rytov(base, sigma_r), name=f"fig4_sigmaR_{sigma_r:g}",
                    sweep=Sweep(SweepVariable.SNR_DB, 60.0, 160.0, 21),
                    methods=(Method.ANALYTIC, Method.OMA, Method.MONTE_CARLO), receivers=(Receiver.RX1, Receiver.RX2))
            for sigma_r in (0.7, 1.0, 1.3)]


def _fig5(base: Scenario) -> List[Scenario]:
    # a1 <= 0.75 violates a1/a2 > gamma_th1 = 3 and shows the constant-outage plateau
    return [replace(base, name=f"fig5_snr_{snr:g}", noma=replace(base.noma, snr_db=snr),
                    sweep=Sweep(SweepVariable.A1, 0.55, 0.99, 23), methods=(Method.ANALYTIC, Method.MONTE_CARLO),
                    receivers=(Receiver.RX1, Receiver.RX2))
            for snr in (80.0, 100.0, 120.0)]


def _fig6(base: Scenario) -> List[Scenario]:
    scenarios = []
    for cn2 in (1e-14, 5e-14):
        for a2 in (0.1, 0.2):
            geometry1 = replace(base.geometry1, cn2=cn2, rytov_sq=None)
            geometry2 = replace(base.geometry2, cn2=cn2, rytov_sq=None)
            scenarios.append(replace(base, name=f"fig6_cn2_{cn2:g}_a2_{a2:g}", geometry1=geometry1,
                                     geometry2=geometry2, noma=replace(base.noma, a1=1.0 - a2, a2=a2, snr_db=80.0),
                                     sweep=Sweep(SweepVariable.D_Z2, 500.0, 1000.0, 11),
                                     methods=(Method.ANALYTIC, Method.OMA, Method.MONTE_CARLO),
                                     receivers=(Receiver.RX2,)))
    return scenarios


def _fig7(base: Scenario) -> List[Scenario]:
    return [replace(base, name=f"fig7_snr_{snr:g}", noma=replace(base.noma, snr_db=snr),
                    sweep=Sweep(SweepVariable.B1, 0.1, 0.9, 17), methods=(Method.ANALYTIC, Method.MONTE_CARLO),
                    receivers=(Receiver.RX1, Receiver.RX2))
            for snr in (80.0, 100.0)]


def _fig8(base: Scenario) -> List[Scenario]:
    return [replace(_with_rytov(base, sigma_r), name=f"fig8_sigmaR_{sigma_r:g}", noma=replace(base.noma, snr_db=100.0),
                    sweep=Sweep(SweepVariable.SWAY_SIGMA, 0.005, 0.05, 10),
                    methods=(Method.ANALYTIC, Method.OMA, Method.MONTE_CARLO), receivers=(Receiver.RX1, Receiver.RX2))
            for sigma_r in (0.8, 1.0, 1.3)]


PRESETS = {
    "fig3": _fig3,
    "fig4": _fig4,
    "fig5": _fig5,
    "fig6": _fig6,
    "fig7": _fig7,
    "fig8": _fig8,
}


def preset_scenarios(name: str, base: Optional[Scenario] = None, **options) -> List[Scenario]:
    """
    Expands a figure preset into its curve families.

    Args:
        name (str): fig3 .. fig8.
        base (Optional[Scenario]): Scenario supplying the defaults (parameter table when omitted).
        **options: Preset parameters, e.g. distances for fig3.

    Returns:
        List[Scenario]: One validated scenario per curve family.

    Raises:
        ScenarioException: For an unknown preset.
    """
    if name not in PRESETS:
        raise ScenarioException(f"unknown preset '{name}' (expected one of {sorted(PRESETS)})")
    scenarios = PRESETS[name](base or Scenario(), **options)
    for scenario in scenarios:
        scenario.validate()
    return scenarios


def _derived_block(label: str, geometry: GeometryConfig, series_terms: int) -> Tuple[List[str], bool]:
    lines = [f"[{label}] d_z = {geometry.d_z:g} m"]
    try:
        params = derive_channel_params(geometry)
    except ChannelException as e:
        return lines + [f"  FAIL {v}" for v in e.violations], False
    lines[0] += f", beam width = {geometry.beam_width:.6g} m"
    sampler = SamplerParams.from_channel_params(params)
    form = E2EChannelDist(params, series_terms).asymptotic_form()
    lines += [
        f"  alpha = {params.alpha:.6g}, beta = {params.beta:.6g}, rytov_sq = {params.rytov_sq:.6g}",
        f"  omega = {params.omega:.6g}, q = {params.q:.6g}, c = {params.c:.6g}, v = {params.v:.6g}",
        f"  a0 = {params.a0:.6g}, h_l = {params.h_l:.6g}",
        f"  lambda1 = {sampler.lambda1:.6g}, lambda2 = {sampler.lambda2:.6g}",
        f"  asymptote: {form.branch.value}, exponent {form.exponent:.6g}, "
        f"{'valid' if form.converges else 'not applicable'}",
    ]
    return lines, True


def validation_report(scenario: Scenario) -> Tuple[bool, str]:
    """
    Human-readable check of a scenario and its derived parameters.

    Returns:
        Tuple[bool, str]: Whether every check passed and the report text.
    """
    problems = scenario.violations()
    lines = [f"scenario '{scenario.name}': {'PASS' if not problems else 'FAIL'}"]
    lines += [f"  FAIL {p}" for p in problems]
    ok = not problems
    receivers = [("rx1", scenario.geometry1)]
    if Receiver.RX2 in scenario.receivers:
        receivers.append(("rx2", scenario.geometry2))
    for label, geometry in receivers:
        block, derived = _derived_block(label, geometry, scenario.series_terms)
        lines += block
        ok = ok and derived
    noma = scenario.noma
    ratio = f"{noma.a1 / noma.a2:.6g}" if noma.a2 > 0.0 else "inf"
    lines.append(f"[noma] gamma_th1 = {noma.gamma_th1:.6g}, gamma_th2 = {noma.gamma_th2:.6g}, "
                 f"a1/a2 = {ratio}, operation condition {'holds' if operation_condition(noma) else 'fails'}")
    return ok, "\n".join(lines)
