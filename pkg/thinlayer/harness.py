from __future__ import annotations

import argparse
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Callable, Mapping, Sequence

import numpy as np
import pandas as pd
from jsonschema import Draft202012Validator, ValidationError
from scipy.sparse.linalg import spsolve

from thinlayer import __version__
from thinlayer._shared import (
    CONSERVATIVE_TOL,
    CSV_FLOAT_FORMAT,
    RESIDUAL_TARGET,
    SOLVE_RESIDUAL_REL,
    TAU_BC_REL,
    AcceptanceError,
    InternalError,
    ParameterError,
    ThinLayerError,
    strictly_decreasing,
    sup_norm,
    write_frame,
    write_json,
)
from thinlayer.core import (
    CirclePoint,
    LayerField,
    ReferenceGrid,
    Scenario,
    ScenarioTag,
    TransmissionParams,
    TwoCircles,
    build_reference_grid,
    lift_limit_state,
)
from thinlayer.evolve import evolve, matrix_exponential_2x2, occupancy_curve
from thinlayer.generator2d import RESCALED_FLAVOR, Flavor, apply_generator, assemble_generator, log_conjugate
from thinlayer.limit import (
    apply_slow_operator,
    assemble_limit_generator,
    corrector_lift,
    kurtz_fast_residual,
    project,
    two_state_rates,
)
from thinlayer.montecarlo import (
    Geometry,
    calibrate_crossing,
    family_member_setup,
    simulate_limit_jump_diffusion,
    simulate_membrane_bm,
    total_variation,
)
from thinlayer.radial1d import TwoSidedInterval, resolvent_closed_form

logger = logging.getLogger(__name__)

MANIFEST_VERSION = 1
KAPPA_SEQUENCE = [1.0, 4.0, 16.0, 64.0, 256.0]
ORACLE_SIZES = (513, 1025, 2049)
GAMMAS = (0.5, 1.0, 2.0)


# -------------------------
# Configuration
# -------------------------
DEFAULTS: dict[str, Any] = {
    "alpha": 1.0,
    "beta": 1.0,
    "kappa": 1.0,
    "gamma": 1.0,
    "r": 0.5,
    "outer_radius": 1.5,
    "nrad": 65,
    "nang": 64,
    "dt": 1e-3,
    "t": 0.5,
    "thicknesses": [0.1, 0.05, 0.025, 0.0125],
    "seed": 12345,
    "lam": 1.0,
    "scheme": "implicit_euler",
    "point_rate": "conservative",
    "corrector": "quadratic",
    "crossing_calibration": 1.0,
    "calibration_residual": None,
    "particles": 20000,
    "mc_dt": 1e-3,
    "t_end": 1.0,
    "format": "csv",
    "jobs": 1,
    "angular": "spectral",
    "scenario": "a",
    "reference": "evolve",
    "out": "results",
    "sizes": list(ORACLE_SIZES),
    "input": None,
    "gamma_sweep": False,
    "process": "membrane",
    "start": "uniform",
    "mirror": False,
}

_POSITIVE = {"type": "number", "exclusiveMinimum": 0}
_NONNEG = {"type": "number", "minimum": 0}

CONFIG_SCHEMA: dict[str, Any] = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "properties": {
        "alpha": _NONNEG,
        "beta": _NONNEG,
        "kappa": _POSITIVE,
        "gamma": _POSITIVE,
        "r": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
        "outer_radius": {"type": "number", "exclusiveMinimum": 1},
        "nrad": {"type": "integer", "minimum": 4},
        "nang": {"type": "integer", "minimum": 4, "multipleOf": 2},
        "dt": _POSITIVE,
        "t": _NONNEG,
        "thicknesses": {"type": "array", "items": _POSITIVE, "minItems": 1},
        "seed": {"type": "integer", "minimum": 0},
        "lam": _POSITIVE,
        "scheme": {"enum": ["implicit_euler", "crank_nicolson"]},
        "point_rate": {"enum": ["conservative", "area", "integral"]},
        "corrector": {"enum": ["sine", "quadratic"]},
        "crossing_calibration": _POSITIVE,
        "calibration_residual": {"type": ["number", "null"], "minimum": 0},
        "particles": {"type": "integer", "minimum": 1},
        "mc_dt": _POSITIVE,
        "t_end": _POSITIVE,
        "format": {"enum": ["csv", "json"]},
        "jobs": {"type": "integer", "minimum": 1},
        "angular": {"enum": ["spectral", "fd"]},
        "scenario": {"enum": ["a", "b", "c", "two_thin", "thin_over_thick", "thin_over_fast"]},
        "reference": {"enum": ["evolve", "analytic"]},
        "out": {"type": "string"},
        "sizes": {"type": "array", "items": {"type": "integer", "minimum": 4}, "minItems": 1},
        "input": {"type": ["string", "null"]},
        "gamma_sweep": {"type": "boolean"},
        "process": {"enum": ["membrane", "limit"]},
        "start": {"enum": ["uniform", "upper", "lower"]},
        "mirror": {"type": "boolean"},
    },
}
_VALIDATOR = Draft202012Validator(CONFIG_SCHEMA)


@dataclass(frozen=True)
class RunConfig:
    alpha: float
    beta: float
    kappa: float
    gamma: float
    r: float
    outer_radius: float
    nrad: int
    nang: int
    dt: float
    t: float
    thicknesses: list[float]
    seed: int
    lam: float
    scheme: str
    point_rate: str
    corrector: str
    crossing_calibration: float
    calibration_residual: float | None
    particles: int
    mc_dt: float
    t_end: float
    format: str
    jobs: int
    angular: str
    scenario: str
    reference: str
    out: str
    sizes: list[int]
    input: str | None
    gamma_sweep: bool
    process: str
    start: str
    mirror: bool

    @classmethod
    def from_mapping(cls, values: Mapping[str, Any]) -> "RunConfig":
        merged = {**DEFAULTS, **values}
        _VALIDATOR.validate(merged)
        return cls(**{f.name: merged[f.name] for f in fields(cls)})

    def as_dict(self) -> dict[str, Any]:
        return asdict(self)

    @property
    def params(self) -> TransmissionParams:
        return TransmissionParams(alpha=self.alpha, beta=self.beta, kappa=self.kappa, gamma=self.gamma)

    @property
    def tag(self) -> ScenarioTag:
        return ScenarioTag.parse(self.scenario)

    def sequence(self) -> list[float]:
        """Thickness sequence; a fast lower layer uses kappa values unless thicknesses were set explicitly."""
        if self.tag is ScenarioTag.THIN_OVER_FAST and list(self.thicknesses) == DEFAULTS["thicknesses"]:
            return list(KAPPA_SEQUENCE)
        return [float(v) for v in self.thicknesses]


def _read_json(path: Path) -> Any:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Config not found: {path}")
    text = path.read_text(encoding="utf-8")
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParameterError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc


def load_config(path: Path | None = None, overrides: Mapping[str, Any] | None = None) -> RunConfig:
    """
    Effective run configuration.

    Precedence: defaults < file < overrides. A run manifest is accepted as a file;
    its "config" member is replayed. Unknown keys are ignored with a warning.
    """
    values: dict[str, Any] = {}
    if path is not None:
        data = _read_json(path)
        if isinstance(data, dict) and "manifest_version" in data and isinstance(data.get("config"), dict):
            data = data["config"]
        if not isinstance(data, dict):
            raise ParameterError(f"{path}: config must be a JSON object, got {type(data).__name__}")
        values.update(data)
    values.update(overrides or {})
    unknown = sorted(k for k in values if k not in DEFAULTS)
    if unknown:
        logger.warning("Ignoring unknown config keys: %s", unknown)
        for key in unknown:
            values.pop(key)
    return RunConfig.from_mapping(values)


def write_manifest(out_dir: Path, config: RunConfig, command: str, outputs: Sequence[Path], extra: Mapping[str, Any] | None = None) -> Path:
    manifest = {
        "manifest_version": MANIFEST_VERSION,
        "version": __version__,
        "command": command,
        "config": config.as_dict(),
        "seed": config.seed,
        "grid": {"n_rad_lower": config.nrad, "n_rad_upper": config.nrad, "n_ang": config.nang},
        "tolerances": {
            "boundary_rel": TAU_BC_REL,
            "residual_target": RESIDUAL_TARGET,
            "solve_residual_rel": SOLVE_RESIDUAL_REL,
            "conservative": CONSERVATIVE_TOL,
            "float_format": CSV_FLOAT_FORMAT,
        },
        "outputs": [Path(p).name for p in outputs],
        **(extra or {}),
    }
    return write_json(manifest, Path(out_dir) / "manifest.json")


# -------------------------
# Core test elements
# -------------------------
def default_initial_field(grid: ReferenceGrid) -> LayerField:
    """cos(phi) on the upper layer, zero below."""
    return LayerField.from_functions(grid, lambda x, phi: 0.0 * x * phi, lambda x, phi: np.cos(phi) + 0.0 * x)


def upper_indicator(grid: ReferenceGrid) -> LayerField:
    return LayerField.from_functions(grid, lambda x, phi: 0.0 * x * phi, lambda x, phi: 1.0 + 0.0 * x * phi)


def default_core_elements(grid: ReferenceGrid) -> dict[str, LayerField]:
    elements = {"cos_phi_upper": default_initial_field(grid)}
    if grid.tag is ScenarioTag.THIN_OVER_THICK:
        elements["cos_phi_annulus"] = LayerField.from_functions(grid, lambda x, phi: x**2 * np.cos(phi), lambda x, phi: np.cos(phi) + 0.0 * x)
    return elements


# -------------------------
# Experiments
# -------------------------
def _check_sequence(tag: ScenarioTag, thicknesses: Sequence[float]) -> list[float]:
    values = [float(v) for v in thicknesses]
    if not values:
        raise ParameterError("Thickness sequence is empty")
    # a fast lower layer approaches its limit as kappa grows
    steps = np.diff(values)
    ok = np.all(steps > 0.0) if tag is ScenarioTag.THIN_OVER_FAST else np.all(steps < 0.0)
    if not ok:
        direction = "increasing" if tag is ScenarioTag.THIN_OVER_FAST else "decreasing"
        raise ParameterError(f"Thickness sequence must be strictly {direction} for {tag.value}, got {values}")
    return values


def _reduction_ratio(values: pd.Series) -> pd.Series:
    return values.shift(1) / values


def _analytic_limit(scenario: Scenario, params: TransmissionParams, state, t: float, point_rate: str):
    if isinstance(state, TwoCircles):
        pair = (state.g_plus, state.g_minus)
    elif isinstance(state, CirclePoint):
        pair = (state.g_plus, np.full_like(state.g_plus, state.k_minus))
    else:
        raise ParameterError("The analytic reference exists only for two_thin and thin_over_fast")
    if sup_norm(pair[0] - pair[0].mean()) > RESIDUAL_TARGET or sup_norm(pair[1] - pair[1].mean()) > RESIDUAL_TARGET:
        raise ParameterError("The analytic reference needs phi-independent initial data")
    upper, lower = matrix_exponential_2x2(two_state_rates(scenario, params, point_rate), t, (pair[0][0], pair[1][0]))
    ones = np.ones_like(state.g_plus)
    if isinstance(state, TwoCircles):
        return TwoCircles(upper * ones, lower * ones)
    return CirclePoint(upper * ones, float(lower))


def _convergence_member(task: tuple) -> float:
    scenario, params, u0, t, dt, scheme, angular, reference_values = task
    gen = assemble_generator(scenario, RESCALED_FLAVOR[scenario.tag], params, u0.grid, angular)
    solved = evolve(gen, u0, t, dt, scheme)
    error = sup_norm(solved.values - reference_values)
    logger.info("converge %s thickness=%g error=%.6e", scenario.tag.value, scenario.thickness, error)
    return error


def run_convergence_study(
    tag: ScenarioTag | str,
    params: TransmissionParams,
    u0: LayerField | None,
    t: float,
    thicknesses: Sequence[float],
    grid: ReferenceGrid,
    r: float = 0.5,
    dt: float = 1e-3,
    scheme: str = "implicit_euler",
    point_rate: str = "conservative",
    angular: str = "spectral",
    reference: str = "evolve",
    jobs: int = 1,
) -> pd.DataFrame:
    """
    Sup-norm distance between each family member's evolution and the lifted limit evolution.

    The limit is solved once on the same reference grid; `reference="analytic"` uses the
    two-state closed form instead (phi-independent data only).
    """
    tag = ScenarioTag.parse(tag)
    values = _check_sequence(tag, thicknesses)
    if u0 is None:
        u0 = default_initial_field(grid)
    base = Scenario(tag, values[0], r)
    state = project(base, u0)
    if reference == "analytic":
        limit_state = _analytic_limit(base, params, state, t, point_rate)
    elif reference == "evolve":
        limit_gen = assemble_limit_generator(base, params, grid, point_rate, angular)
        limit_state = evolve(limit_gen, state, t, dt, scheme)
    else:
        raise ParameterError(f"Unknown reference: {reference!r} (allowed: evolve, analytic)")
    reference_values = lift_limit_state(limit_state, grid).values

    tasks = [(Scenario(tag, v, r), params, u0, t, dt, scheme, angular, reference_values) for v in values]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            errors = list(pool.map(_convergence_member, tasks))
    else:
        errors = [_convergence_member(task) for task in tasks]

    df = pd.DataFrame({"thickness": values, "error": errors})
    df["ratio"] = _reduction_ratio(df["error"])
    return df


@dataclass(frozen=True)
class KurtzReport:
    fast: pd.DataFrame
    slow: pd.DataFrame
    meta: dict = field(default_factory=dict)


def run_kurtz_suite(
    tag: ScenarioTag | str,
    params: TransmissionParams,
    elements: Mapping[str, LayerField],
    thicknesses: Sequence[float],
    r: float = 0.5,
    profile: str = "quadratic",
    angular: str = "spectral",
) -> KurtzReport:
    """
    Fast-scale residuals per element, plus the slow-scale checks on the same lifts:

      lift_gap      = |lift_theta(u) - u|
      slow_residual = |C_theta(lift_theta u) - O u| over dynamic rows
    """
    tag = ScenarioTag.parse(tag)
    values = _check_sequence(tag, thicknesses)
    fast_tables = []
    slow_rows = []
    for name, u in elements.items():
        base = Scenario(tag, values[0], r)
        fast = kurtz_fast_residual(base, u, values, params, profile, angular)
        fast.insert(0, "element", name)
        fast_tables.append(fast)

        slow = apply_slow_operator(base, params, project(base, u), u.grid, profile, angular)
        for v in values:
            member = Scenario(tag, v, r)
            lifted = corrector_lift(member, u, v, params, u.grid, profile)
            gen = assemble_generator(member, RESCALED_FLAVOR[tag], params, u.grid, angular)
            applied = apply_generator(gen, lifted, mode="raw")
            slow_rows.append(
                {
                    "element": name,
                    "thickness": v,
                    "lift_gap": sup_norm(lifted.values - u.values),
                    "slow_residual": sup_norm((applied.values - slow.values)[gen.systems[0].interior]),
                }
            )
    report = KurtzReport(
        fast=pd.concat(fast_tables, ignore_index=True),
        slow=pd.DataFrame(slow_rows, columns=["element", "thickness", "lift_gap", "slow_residual"]),
        meta={"scenario": tag.value, "profile": profile},
    )
    return report


def _oracle_source(x):
    return 1.0 + x + np.cos(3.0 * x)


def run_oracle_study(
    lam: float = 1.0,
    params: TransmissionParams | None = None,
    r: float = 0.5,
    R: float = 1.5,
    sizes: Sequence[int] = ORACLE_SIZES,
) -> pd.DataFrame:
    """
    Mode-0 discrete resolvent of the log-conjugated physical generator against the
    closed form in x = ln(rho), with g(x) = 1 + x + cos 3x.
    """
    params = params or TransmissionParams(alpha=1.0, beta=1.0, kappa=2.0)
    scenario = Scenario(ScenarioTag.THIN_OVER_THICK, R - 1.0, r)
    physical = TransmissionParams(alpha=params.alpha, beta=params.beta, kappa=params.kappa, gamma=1.0)
    iv = TwoSidedInterval.from_radii(r, R)
    rows = []
    for n in sizes:
        grid = build_reference_grid(scenario, int(n), int(n), 4)
        gen = log_conjugate(assemble_generator(scenario, Flavor.PHYSICAL, physical, grid))
        x_low, x_up = np.log(gen.physical_lower), np.log(gen.physical_upper)
        system = gen.systems[0]
        rhs = system.interior * _oracle_source(np.concatenate([x_low, x_up]))
        discrete = spsolve((lam * system.mass - system.matrix).tocsc(), rhs)
        exact = resolvent_closed_form(lam, _oracle_source, physical, iv, at=(x_low, x_up))
        reference = np.concatenate([exact.lower, exact.upper])
        error = sup_norm(discrete - reference)
        rows.append({"n": int(n), "error": error, "rel_error": error / sup_norm(reference)})
        logger.info("oracle n=%d error=%.6e", n, error)
    df = pd.DataFrame(rows, columns=["n", "error", "rel_error"])
    df["ratio"] = _reduction_ratio(df["error"])
    df["order"] = np.log2(df["ratio"])
    return df


def run_gamma_sweep(
    params: TransmissionParams,
    gammas: Sequence[float] = GAMMAS,
    times: Sequence[float] = (0.0, 0.25, 0.5, 1.0),
    thickness: float = 0.025,
    n_rad: int = 65,
    dt: float = 1e-3,
) -> pd.DataFrame:
    """Upper-layer occupancy of a thin two-layer member against the two-circle limit, per gamma."""
    rows = []
    for gamma in gammas:
        p = TransmissionParams(alpha=params.alpha, beta=params.beta, kappa=params.kappa, gamma=float(gamma))
        scenario = Scenario(ScenarioTag.TWO_THIN, thickness)
        grid = build_reference_grid(scenario, n_rad, n_rad, 4)
        gen = assemble_generator(scenario, Flavor.RESCALED_INNER, p, grid)
        family = occupancy_curve(gen, times, start="upper", dt=dt)
        rates = two_state_rates(scenario, p)
        for t, member in zip(family["t"], family["frac_upper"]):
            limit = float(matrix_exponential_2x2(rates, t, (1.0, 0.0))[0])
            rows.append({"gamma": float(gamma), "t": float(t), "limit_upper": limit, "family_upper": float(member), "gap": abs(member - limit)})
    return pd.DataFrame(rows, columns=["gamma", "t", "limit_upper", "family_upper", "gap"])


def run_thin_layer_consistency(
    params: TransmissionParams,
    thicknesses: Sequence[float],
    n_particles: int = 100_000,
    t: float = 0.5,
    dt: float = 2.5e-4,
    seed: int = 12345,
    start_angle: float = 0.0,
) -> pd.DataFrame:
    """
    Total variation between the (side, angle) histogram of thin two-layer members and
    that of the two-circle jump diffusion, all started on the upper side at one angle.
    """
    values = _check_sequence(ScenarioTag.TWO_THIN, thicknesses)
    limit = simulate_limit_jump_diffusion(
        Scenario(ScenarioTag.TWO_THIN, values[0]), params, n_particles, t, dt, seed,
        start="upper", start_angle=start_angle,
    )
    rows = []
    for theta in values:
        physical, geometry = family_member_setup(Scenario(ScenarioTag.TWO_THIN, theta), params)
        member = simulate_membrane_bm(
            physical, geometry, n_particles, t, dt, seed, start="upper", start_angle=start_angle,
        )
        tv = total_variation(member, limit)
        rows.append({"thickness": theta, "total_variation": tv, "frac_upper": member.final_upper_fraction()})
        logger.info("thin-layer consistency thickness=%g tv=%.4f", theta, tv)
    return pd.DataFrame(rows, columns=["thickness", "total_variation", "frac_upper"])


# -------------------------
# Acceptance checks
# -------------------------
def check_convergence(table: pd.DataFrame, tag: ScenarioTag, min_ratio: float = 1.5) -> None:
    if not strictly_decreasing(table["error"]):
        if tag is ScenarioTag.TWO_THIN:
            raise AcceptanceError(f"Errors not strictly decreasing: {table['error'].tolist()}")
        logger.warning("Errors not strictly decreasing for %s: %s", tag.value, table["error"].tolist())
        return
    if tag is ScenarioTag.TWO_THIN and (table["ratio"].iloc[1:] < min_ratio).any():
        raise AcceptanceError(f"Error reduction below {min_ratio} per step: {table['ratio'].tolist()}")


def check_kurtz(table: pd.DataFrame, final_fraction: float = 0.05) -> None:
    for name, group in table.groupby("element", sort=False):
        residual = group["residual"].to_numpy()
        if residual[0] <= RESIDUAL_TARGET:
            continue
        if not strictly_decreasing(residual) or residual[-1] > final_fraction * residual[0]:
            raise AcceptanceError(f"Kurtz residuals for {name} fail: {residual.tolist()}")


def check_oracle(table: pd.DataFrame, band: tuple[float, float] = (3.5, 4.5)) -> None:
    ratios = table["ratio"].iloc[1:]
    if not ratios.between(*band).all():
        raise AcceptanceError(f"Oracle error ratios {ratios.tolist()} outside {band}")


# -------------------------
# CLI
# -------------------------
class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from exc


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    common.add_argument("--config", type=Path, help="JSON config or run manifest")
    common.add_argument("--scenario", choices=["a", "b", "c"])
    for name in ("alpha", "beta", "kappa", "gamma", "r", "t", "dt"):
        common.add_argument(f"--{name}", type=float)
    common.add_argument("--calibration", dest="crossing_calibration", type=float)
    common.add_argument("--outer-radius", dest="outer_radius", type=float)
    common.add_argument("--lambda", dest="lam", type=float)
    common.add_argument("--thicknesses", type=_float_list)
    common.add_argument("--nrad", type=int)
    common.add_argument("--nang", type=int)
    common.add_argument("--seed", type=int)
    common.add_argument("--jobs", type=int)
    common.add_argument("--particles", type=int)
    common.add_argument("--mc-dt", dest="mc_dt", type=float)
    common.add_argument("--t-end", dest="t_end", type=float)
    common.add_argument("--out", type=str)
    common.add_argument("--format", choices=["csv", "json"])
    common.add_argument("--scheme", choices=["implicit_euler", "crank_nicolson"])
    common.add_argument("--angular", choices=["spectral", "fd"])
    common.add_argument("--corrector", choices=["sine", "quadratic"])
    common.add_argument("--point-rate", dest="point_rate", choices=["conservative", "area", "integral"])
    common.add_argument("--paper-literal", dest="point_rate", action="store_const", const="integral", help="same as --point-rate integral")
    common.add_argument("--verbose", action="store_true")

    parser = _Parser(prog="thinlayer", description="Thin-layer membrane diffusion experiments")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    # subcommand flags stay unset unless given, so file and manifest values survive
    oracle = sub.add_parser("oracle", parents=[common], argument_default=argparse.SUPPRESS, help="closed-form vs discrete resolvent")
    oracle.add_argument("--sizes", type=_int_list)
    solve = sub.add_parser("solve", parents=[common], argument_default=argparse.SUPPRESS, help="evolve one family member")
    solve.add_argument("--input", type=str, help="field CSV (varrho,phi,side,value)")
    converge = sub.add_parser("converge", parents=[common], argument_default=argparse.SUPPRESS, help="convergence table towards the limit")
    converge.add_argument("--reference", choices=["evolve", "analytic"])
    converge.add_argument("--gamma-sweep", dest="gamma_sweep", action="store_true")
    sub.add_parser("kurtz", parents=[common], argument_default=argparse.SUPPRESS, help="fast and slow scale residuals")
    mc = sub.add_parser("mc", parents=[common], argument_default=argparse.SUPPRESS, help="Monte Carlo runs")
    mc.add_argument("--process", choices=["membrane", "limit"])
    mc.add_argument("--start", choices=["uniform", "upper", "lower"])
    mc.add_argument("--mirror", action="store_true")
    sub.add_parser("calibrate-mc", parents=[common], argument_default=argparse.SUPPRESS, help="fit the crossing-probability factor")
    return parser


_CLI_ONLY = {"config", "verbose", "command"}


def _effective_config(args: argparse.Namespace) -> RunConfig:
    overrides = {k: v for k, v in vars(args).items() if k not in _CLI_ONLY}
    return load_config(getattr(args, "config", None), overrides)


@dataclass(frozen=True)
class CommandResult:
    paths: list[Path]
    extra: dict = field(default_factory=dict)
    check: Callable[[], None] | None = None
    config_updates: dict = field(default_factory=dict)


def _write(df: pd.DataFrame, out_dir: Path, stem: str, cfg: RunConfig) -> Path:
    path = write_frame(df, out_dir / f"{stem}.{cfg.format}", cfg.format)
    print(f"wrote {path}")
    return path


def _grid_for(cfg: RunConfig, thickness: float) -> ReferenceGrid:
    return build_reference_grid(Scenario(cfg.tag, thickness, cfg.r), cfg.nrad, cfg.nrad, cfg.nang)


def _cmd_oracle(cfg: RunConfig, out_dir: Path) -> CommandResult:
    table = run_oracle_study(cfg.lam, cfg.params, cfg.r, cfg.outer_radius, cfg.sizes)
    return CommandResult([_write(table, out_dir, "oracle", cfg)], check=lambda: check_oracle(table))


def _cmd_solve(cfg: RunConfig, out_dir: Path) -> CommandResult:
    thickness = cfg.sequence()[0]
    scenario = Scenario(cfg.tag, thickness, cfg.r)
    grid = _grid_for(cfg, thickness)
    u0 = LayerField.read_csv(Path(cfg.input), grid) if cfg.input else default_initial_field(grid)
    gen = assemble_generator(scenario, RESCALED_FLAVOR[scenario.tag], cfg.params, grid, cfg.angular)
    dt = min(cfg.dt, cfg.t) if cfg.t > 0 else cfg.dt
    solved = evolve(gen, u0, cfg.t, dt, cfg.scheme, workers=cfg.jobs)
    if cfg.format == "csv":
        path = solved.write_csv(out_dir / "solve_field.csv")
        print(f"wrote {path}")
    else:
        path = _write(solved.to_frame(), out_dir, "solve_field", cfg)
    return CommandResult([path], {"thickness": thickness})


def _cmd_converge(cfg: RunConfig, out_dir: Path) -> CommandResult:
    if cfg.gamma_sweep:
        table = run_gamma_sweep(cfg.params, dt=cfg.dt, n_rad=cfg.nrad)
        return CommandResult([_write(table, out_dir, "gamma_sweep", cfg)])
    values = cfg.sequence()
    grid = _grid_for(cfg, values[0])
    u0 = upper_indicator(grid) if cfg.reference == "analytic" else default_initial_field(grid)
    table = run_convergence_study(
        cfg.tag, cfg.params, u0, cfg.t, values, grid,
        r=cfg.r, dt=cfg.dt, scheme=cfg.scheme, point_rate=cfg.point_rate,
        angular=cfg.angular, reference=cfg.reference, jobs=cfg.jobs,
    )
    path = _write(table, out_dir, f"converge_{cfg.tag.letter}", cfg)
    return CommandResult([path], check=lambda: check_convergence(table, cfg.tag))


def _cmd_kurtz(cfg: RunConfig, out_dir: Path) -> CommandResult:
    values = cfg.sequence()
    grid = _grid_for(cfg, values[0])
    report = run_kurtz_suite(cfg.tag, cfg.params, default_core_elements(grid), values, cfg.r, cfg.corrector, cfg.angular)
    paths = [
        _write(report.fast, out_dir, f"kurtz_fast_{cfg.tag.letter}", cfg),
        _write(report.slow, out_dir, f"kurtz_slow_{cfg.tag.letter}", cfg),
    ]
    return CommandResult(paths, check=lambda: check_kurtz(report.fast))


def _cmd_mc(cfg: RunConfig, out_dir: Path) -> CommandResult:
    if cfg.process == "limit":
        scenario = Scenario(cfg.tag, cfg.sequence()[0], cfg.r)
        summary = simulate_limit_jump_diffusion(
            scenario, cfg.params, cfg.particles, cfg.t_end, cfg.mc_dt, cfg.seed,
            point_rate=cfg.point_rate, start=cfg.start, mirror=cfg.mirror, workers=cfg.jobs,
        )
    else:
        summary = simulate_membrane_bm(
            cfg.params, Geometry(cfg.r, cfg.outer_radius), cfg.particles, cfg.t_end, cfg.mc_dt, cfg.seed,
            calibration=cfg.crossing_calibration, start=cfg.start, mirror=cfg.mirror, workers=cfg.jobs,
        )
    paths = summary.write(out_dir, "mc", cfg.format)
    for path in paths:
        print(f"wrote {path}")
    return CommandResult(paths, {"crossings": summary.crossings, "mc": summary.meta})


def _cmd_calibrate(cfg: RunConfig, out_dir: Path) -> CommandResult:
    result = calibrate_crossing(
        cfg.params, Geometry(cfg.r, cfg.outer_radius), cfg.particles, cfg.t_end, cfg.mc_dt, cfg.seed,
        n_rad=cfg.nrad, pde_dt=cfg.dt, workers=cfg.jobs,
    )
    path = _write(result.table, out_dir, "calibration", cfg)
    print(f"calibration factor {result.factor:.6f} (residual {result.residual:.4g})")
    updates = {"crossing_calibration": result.factor, "calibration_residual": result.residual}
    return CommandResult([path], {"calibration_evaluations": result.evaluations}, config_updates=updates)


_COMMANDS = {
    "oracle": _cmd_oracle,
    "solve": _cmd_solve,
    "converge": _cmd_converge,
    "kurtz": _cmd_kurtz,
    "mc": _cmd_mc,
    "calibrate-mc": _cmd_calibrate,
}


def cli_main(argv: Sequence[str] | None = None) -> int:
    """Exit codes: 0 ok, 1 bad parameters or config, 2 failed acceptance or internal check."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    logging.basicConfig(
        level=logging.DEBUG if getattr(args, "verbose", False) else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        cfg = _effective_config(args)
        out_dir = Path(cfg.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        result = _COMMANDS[args.command](cfg, out_dir)
        cfg = replace(cfg, **result.config_updates)
        manifest = write_manifest(out_dir, cfg, args.command, result.paths, result.extra)
        print(f"wrote {manifest}")
        if result.check is not None:
            result.check()
    except (AcceptanceError, InternalError) as exc:
        logger.error("%s", exc)
        return 2
    except (ThinLayerError, ValidationError, FileNotFoundError) as exc:
        logger.error("%s", getattr(exc, "message", exc))
        return 1
    return 0
