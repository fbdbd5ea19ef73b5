from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
import pandas as pd
from scipy.optimize import minimize_scalar
from scipy.stats import chisquare

from thinlayer._shared import ParameterError, require_positive, sup_norm, write_frame
from thinlayer.core import Scenario, ScenarioTag, Side, TransmissionParams, build_reference_grid
from thinlayer.evolve import matrix_exponential_2x2, occupancy_curve
from thinlayer.generator2d import RESCALED_FLAVOR, Flavor, assemble_generator, physical_permeabilities
from thinlayer.limit import point_rate_constant

logger = logging.getLogger(__name__)

CHUNK_SIZE = 8192
N_BINS = 8
STARTS = ("uniform", "upper", "lower")
OCCUPANCY_COLUMNS = ["t", "frac_upper", "frac_lower"]
HISTOGRAM_COLUMNS = ["bin_phi", "side", "count"]


# -------------------------
# Geometry and particles
# -------------------------
@dataclass(frozen=True)
class Geometry:
    """Physical annuli r < rho < 1 (lower) and 1 < rho < R (upper)."""

    inner: float
    outer: float

    def __post_init__(self) -> None:
        if not 0.0 < self.inner < 1.0 < self.outer:
            raise ParameterError(f"Need 0 < r < 1 < R, got r={self.inner}, R={self.outer}")

    @property
    def lower_width(self) -> float:
        return 1.0 - self.inner

    @property
    def upper_width(self) -> float:
        return self.outer - 1.0

    def upper_area_fraction(self) -> float:
        return (self.outer**2 - 1.0) / (self.outer**2 - self.inner**2)


@dataclass(frozen=True)
class Particle:
    rho: float
    phi: float
    side: Side
    stream: int


@dataclass(frozen=True, eq=False)
class Particles:
    """A batch of particles in Cartesian form; side 1 is upper, 0 is lower."""

    x: np.ndarray
    y: np.ndarray
    side: np.ndarray
    stream: int

    @property
    def rho(self) -> np.ndarray:
        return np.hypot(self.x, self.y)

    @property
    def phi(self) -> np.ndarray:
        return np.mod(np.arctan2(self.y, self.x), 2.0 * np.pi)

    def particle(self, i: int) -> Particle:
        side = Side.UPPER if self.side[i] else Side.LOWER
        return Particle(float(self.rho[i]), float(self.phi[i]), side, self.stream)


@dataclass(frozen=True, eq=False)
class EmpiricalSummary:
    occupancy: pd.DataFrame
    histogram: pd.DataFrame
    n_particles: int
    seed: int
    crossings: int = 0
    meta: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        total = int(self.histogram["count"].sum())
        if total != self.n_particles:
            raise ParameterError(f"Histogram mass {total} differs from particle count {self.n_particles}")

    def angular_counts(self) -> np.ndarray:
        return self.histogram.groupby("bin_phi")["count"].sum().to_numpy()

    def final_upper_fraction(self) -> float:
        return float(self.occupancy["frac_upper"].iloc[-1])

    def write(self, out_dir: Path, prefix: str = "mc", fmt: str = "csv") -> list[Path]:
        out_dir = Path(out_dir)
        suffix = "csv" if fmt == "csv" else "json"
        return [
            write_frame(self.occupancy, out_dir / f"{prefix}_occupancy.{suffix}", fmt),
            write_frame(self.histogram, out_dir / f"{prefix}_histogram.{suffix}", fmt),
        ]


def _streams(seed: int, n_particles: int) -> list[tuple[np.random.Generator, int, int]]:
    """One counter-based stream per chunk of particles: (generator, chunk size, chunk id)."""
    n_particles = int(n_particles)
    if n_particles < 1:
        raise ParameterError(f"n_particles must be >= 1, got {n_particles}")
    sizes = [CHUNK_SIZE] * (n_particles // CHUNK_SIZE)
    if n_particles % CHUNK_SIZE:
        sizes.append(n_particles % CHUNK_SIZE)
    children = np.random.SeedSequence(int(seed)).spawn(len(sizes))
    return [(np.random.Generator(np.random.Philox(child)), size, i) for i, (child, size) in enumerate(zip(children, sizes))]


def _step_count(t_end: float, dt: float) -> int:
    t_end = require_positive("t_end", t_end)
    dt = require_positive("dt", dt)
    n_steps = int(round(t_end / dt))
    if n_steps < 1 or abs(n_steps * dt - t_end) > 1e-9 * t_end:
        raise ParameterError(f"t_end must be a whole multiple of dt, got t_end={t_end}, dt={dt}")
    return n_steps


def _record_steps(n_steps: int, n_records: int) -> np.ndarray:
    every = max(1, n_steps // max(1, int(n_records)))
    steps = np.arange(0, n_steps + 1, every)
    if steps[-1] != n_steps:
        steps = np.append(steps, n_steps)
    return steps


def _run_chunks(worker: Callable, streams: list, workers: int) -> list:
    if workers <= 1 or len(streams) == 1:
        return [worker(*s) for s in streams]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda s: worker(*s), streams))


def _angle_bins(phi: np.ndarray) -> np.ndarray:
    bins = np.floor(np.mod(phi, 2.0 * np.pi) / (2.0 * np.pi / N_BINS)).astype(int)
    return np.clip(bins, 0, N_BINS - 1)


def _summarize(results: list, record_steps: np.ndarray, dt: float, n_particles: int, seed: int, meta: dict) -> EmpiricalSummary:
    upper_counts = np.sum([r[0] for r in results], axis=0)
    hist = np.sum([r[1] for r in results], axis=0)
    crossings = int(sum(r[2] for r in results))
    frac_upper = upper_counts / n_particles
    occupancy = pd.DataFrame({"t": record_steps * dt, "frac_upper": frac_upper, "frac_lower": 1.0 - frac_upper})
    histogram = pd.DataFrame(
        [{"bin_phi": b, "side": side.value, "count": int(hist[s, b])} for s, side in ((1, Side.UPPER), (0, Side.LOWER)) for b in range(N_BINS)],
        columns=HISTOGRAM_COLUMNS,
    )
    return EmpiricalSummary(occupancy, histogram, int(n_particles), int(seed), crossings, meta)


# -------------------------
# Membrane Brownian motion
# -------------------------
def crossing_probabilities(params: TransmissionParams, dt: float, calibration: float = 1.0) -> tuple[float, float]:
    """
    Per-contact crossing probability c_s sqrt(pi D_s dt) times the calibration factor (upper, lower).

    A layer with generator D_s Laplacian moves sqrt(2 D_s dt) per coordinate and step, and
    its membrane condition reads f' = c_s [jump]: c_upper = alpha, c_lower = beta, so the lower
    side gets beta sqrt(pi kappa dt). Writing the lower condition as kappa f' = beta [jump]
    instead gives c_lower = beta / kappa and the equivalent form beta sqrt(pi dt / kappa).
    """
    p_up = params.alpha * np.sqrt(np.pi * dt) * calibration
    p_low = params.beta * np.sqrt(np.pi * params.kappa * dt) * calibration
    for name, p in (("upper", p_up), ("lower", p_low)):
        if p > 1.0:
            raise ParameterError(f"Crossing probability from the {name} side is {p:.3g} > 1; reduce dt")
    return float(p_up), float(p_low)


def check_step_size(geometry: Geometry, kappa: float, dt: float) -> None:
    for name, diffusivity, width in (("upper", 1.0, geometry.upper_width), ("lower", kappa, geometry.lower_width)):
        step = np.sqrt(2.0 * diffusivity * dt)
        if step >= 0.25 * width:
            raise ParameterError(f"dt={dt} too large: {name} step {step:.3g} >= width/4 = {0.25 * width:.3g}")


def _initial_radii(rng: np.random.Generator, n: int, geometry: Geometry, start: str) -> np.ndarray:
    lo, hi = {"uniform": (geometry.inner, geometry.outer), "upper": (1.0, geometry.outer), "lower": (geometry.inner, 1.0)}[start]
    # uniform in area
    return np.sqrt(lo**2 + rng.random(n) * (hi**2 - lo**2))


def simulate_membrane_bm(
    params: TransmissionParams,
    geometry: Geometry,
    n_particles: int,
    t_end: float,
    dt: float,
    seed: int,
    calibration: float = 1.0,
    start: str = "uniform",
    start_angle: float | None = None,
    mirror: bool = False,
    n_records: int = 50,
    workers: int = 1,
) -> EmpiricalSummary:
    """
    Reflected Brownian motion in two annuli (diffusivity 1 above the membrane, kappa below).

    A step that ends across the membrane crosses with the side's probability, the overshoot
    rescaled by the ratio of step lengths; otherwise it is mirrored back. The outer walls
    mirror radially. `mirror` flips the y axis of every draw.
    """
    if start not in STARTS:
        raise ParameterError(f"Unknown start: {start!r} (allowed: {', '.join(STARTS)})")
    n_steps = _step_count(t_end, dt)
    check_step_size(geometry, params.kappa, dt)
    p_up, p_low = crossing_probabilities(params, dt, calibration)
    s_up = np.sqrt(2.0 * dt)
    s_low = np.sqrt(2.0 * params.kappa * dt)
    ratio = np.sqrt(params.kappa)
    r, R = geometry.inner, geometry.outer
    record = _record_steps(n_steps, n_records)
    sign = -1.0 if mirror else 1.0

    def chunk(rng: np.random.Generator, n: int, stream: int):
        rho = _initial_radii(rng, n, geometry, start)
        phi = rng.random(n) * 2.0 * np.pi
        if start_angle is not None:
            phi[:] = start_angle
        x = rho * np.cos(phi)
        y = sign * rho * np.sin(phi)
        side = (rho >= 1.0).astype(np.int8)
        upper_counts = np.zeros(record.size, dtype=np.int64)
        upper_counts[0] = side.sum()
        crossings = 0
        k = 1
        for step in range(1, n_steps + 1):
            noise = rng.standard_normal((2, n))
            u = rng.random(n)
            upper = side == 1
            sd = np.where(upper, s_up, s_low)
            x = x + sd * noise[0]
            y = y + sign * sd * noise[1]
            rho = np.hypot(x, y)

            hit_up = upper & (rho < 1.0)
            hit_low = ~upper & (rho > 1.0)
            cross_up = hit_up & (u < p_up)
            cross_low = hit_low & (u < p_low)
            target = rho.copy()
            bounce = (hit_up | hit_low) & ~(cross_up | cross_low)
            target[bounce] = 2.0 - rho[bounce]
            target[cross_up] = 1.0 - (1.0 - rho[cross_up]) * ratio
            target[cross_low] = 1.0 + (rho[cross_low] - 1.0) / ratio
            side[cross_up] = 0
            side[cross_low] = 1
            crossings += int(cross_up.sum() + cross_low.sum())

            upper = side == 1
            target = np.where(upper & (target > R), 2.0 * R - target, target)
            target = np.where(~upper & (target < r), 2.0 * r - target, target)
            target = np.where(upper, np.clip(target, 1.0, R), np.clip(target, r, 1.0))
            x = x * (target / rho)
            y = y * (target / rho)

            if k < record.size and step == record[k]:
                upper_counts[k] = side.sum()
                k += 1

        final = Particles(x, y, side, stream)
        hist = np.zeros((2, N_BINS), dtype=np.int64)
        np.add.at(hist, (final.side, _angle_bins(final.phi)), 1)
        return upper_counts, hist, crossings

    results = _run_chunks(chunk, _streams(seed, n_particles), workers)
    meta = {"process": "membrane_bm", "p_upper": p_up, "p_lower": p_low, "calibration": calibration, "dt": dt}
    summary = _summarize(results, record, dt, n_particles, seed, meta)
    logger.info(
        "membrane bm: %d particles, t_end=%g, crossings=%d, final upper fraction %.4f",
        n_particles, t_end, summary.crossings, summary.final_upper_fraction(),
    )
    return summary


def family_member_setup(scenario: Scenario, params: TransmissionParams) -> tuple[TransmissionParams, Geometry]:
    """Physical permeabilities, lower diffusivity and annuli of one member of a thin-layer family."""
    alpha, beta = physical_permeabilities(scenario, RESCALED_FLAVOR[scenario.tag], params)
    physical = TransmissionParams(alpha=alpha, beta=beta, kappa=scenario.lower_diffusivity(params), gamma=1.0)
    return physical, Geometry(scenario.inner_radius(), scenario.outer_radius(params.gamma))


# -------------------------
# Limit jump diffusions
# -------------------------
def simulate_limit_jump_diffusion(
    scenario: Scenario,
    params: TransmissionParams,
    n_particles: int,
    t_end: float,
    dt: float,
    seed: int,
    point_rate: str = "conservative",
    start: str = "upper",
    start_angle: float | None = None,
    mirror: bool = False,
    n_records: int = 50,
    workers: int = 1,
) -> EmpiricalSummary:
    """
    Circle Brownian motion with side switching.

    - two circles: rates alpha/gamma (upper -> lower) and kappa beta, the angle is kept,
      the lower circle diffuses with kappa
    - circle + point: rates alpha and the point rate; leaving or entering the point
      draws a fresh uniform angle

    Switching uses the exact two-state transition probabilities over each step.
    """
    if scenario.tag is ScenarioTag.THIN_OVER_THICK:
        raise ParameterError("thin_over_thick has no jump-diffusion limit")
    if point_rate == "integral":
        raise ParameterError("The 'integral' point rate is not conservative and has no jump-process counterpart")
    if start not in STARTS:
        raise ParameterError(f"Unknown start: {start!r} (allowed: {', '.join(STARTS)})")
    n_steps = _step_count(t_end, dt)
    two_circles = scenario.tag is ScenarioTag.TWO_THIN
    if two_circles:
        rates = (params.alpha / params.gamma, params.kappa * params.beta)
        up_weight = params.gamma / (1.0 + params.gamma)
    else:
        rates = (params.alpha, point_rate_constant(params, scenario.fixed_inner_radius, point_rate))
        up_weight = 0.0
    to_lower = matrix_exponential_2x2(rates, dt, (0.0, 1.0))
    p_up_low = float(to_lower[0])
    p_low_up = float(1.0 - to_lower[1])
    s_up = np.sqrt(2.0 * dt)
    s_low = np.sqrt(2.0 * params.kappa * dt) if two_circles else 0.0
    record = _record_steps(n_steps, n_records)
    sign = -1.0 if mirror else 1.0

    def chunk(rng: np.random.Generator, n: int, stream: int):
        draw = rng.random(n)
        phi = sign * rng.random(n) * 2.0 * np.pi
        if start_angle is not None:
            phi[:] = sign * start_angle
        if start == "upper":
            side = np.ones(n, dtype=np.int8)
        elif start == "lower":
            side = np.zeros(n, dtype=np.int8)
        else:
            side = (draw < up_weight).astype(np.int8)
        upper_counts = np.zeros(record.size, dtype=np.int64)
        upper_counts[0] = side.sum()
        k = 1
        for step in range(1, n_steps + 1):
            noise = rng.standard_normal(n)
            u = rng.random(n)
            fresh = sign * rng.random(n) * 2.0 * np.pi
            upper = side == 1
            phi = phi + sign * np.where(upper, s_up, s_low) * noise
            switch = np.where(upper, u < p_up_low, u < p_low_up)
            side = np.where(switch, 1 - side, side).astype(np.int8)
            if not two_circles:
                phi = np.where(switch, fresh, phi)
            if k < record.size and step == record[k]:
                upper_counts[k] = side.sum()
                k += 1
        hist = np.zeros((2, N_BINS), dtype=np.int64)
        np.add.at(hist, (side, _angle_bins(phi)), 1)
        return upper_counts, hist, 0

    results = _run_chunks(chunk, _streams(seed, n_particles), workers)
    meta = {"process": "limit_jump_diffusion", "scenario": scenario.tag.value, "rates": list(rates), "dt": dt}
    summary = _summarize(results, record, dt, n_particles, seed, meta)
    logger.info("limit jump diffusion %s: final upper fraction %.4f", scenario.tag.value, summary.final_upper_fraction())
    return summary


# -------------------------
# Statistics and calibration
# -------------------------
def chi_square_uniformity(summary: EmpiricalSummary) -> float:
    """p-value of the angular histogram (both sides pooled) against the uniform law."""
    return float(chisquare(summary.angular_counts()).pvalue)


def total_variation(a: EmpiricalSummary, b: EmpiricalSummary) -> float:
    p = a.histogram["count"].to_numpy() / a.n_particles
    q = b.histogram["count"].to_numpy() / b.n_particles
    return 0.5 * float(np.abs(p - q).sum())


@dataclass(frozen=True)
class CalibrationResult:
    factor: float
    residual: float
    evaluations: int
    table: pd.DataFrame


def calibrate_crossing(
    params: TransmissionParams,
    geometry: Geometry,
    n_particles: int = 20000,
    t_end: float = 1.0,
    dt: float = 1e-3,
    seed: int = 12345,
    start: str = "upper",
    n_rad: int = 65,
    pde_dt: float = 1e-3,
    bounds: tuple[float, float] = (0.25, 4.0),
    n_records: int = 20,
    workers: int = 1,
) -> CalibrationResult:
    """
    Fit the crossing-probability factor so the simulated upper-layer occupancy tracks the
    backward-equation curve; every evaluation reuses the same random streams.
    """
    scenario = Scenario(ScenarioTag.THIN_OVER_THICK, geometry.upper_width, geometry.inner)
    pde_params = TransmissionParams(alpha=params.alpha, beta=params.beta, kappa=params.kappa, gamma=1.0)
    grid = build_reference_grid(scenario, n_rad, n_rad, 4)
    gen = assemble_generator(scenario, Flavor.PHYSICAL, pde_params, grid)
    times = _record_steps(_step_count(t_end, dt), n_records) * dt
    pde = occupancy_curve(gen, times, start=start, dt=pde_dt)
    evaluations = 0

    def objective(factor: float) -> float:
        nonlocal evaluations
        evaluations += 1
        mc = simulate_membrane_bm(
            pde_params, geometry, n_particles, t_end, dt, seed,
            calibration=factor, start=start, n_records=n_records, workers=workers,
        )
        gap = sup_norm(mc.occupancy["frac_upper"].to_numpy() - pde["frac_upper"].to_numpy())
        logger.info("calibration factor=%.6f sup gap=%.6f", factor, gap)
        return gap

    fit = minimize_scalar(objective, bounds=bounds, method="bounded", options={"xatol": 1e-3})
    factor = float(fit.x)
    final = simulate_membrane_bm(
        pde_params, geometry, n_particles, t_end, dt, seed,
        calibration=factor, start=start, n_records=n_records, workers=workers,
    )
    table = pd.DataFrame(
        {
            "t": times,
            "frac_upper_pde": pde["frac_upper"].to_numpy(),
            "frac_upper_mc": final.occupancy["frac_upper"].to_numpy(),
        }
    )
    residual = sup_norm(table["frac_upper_pde"] - table["frac_upper_mc"])
    return CalibrationResult(factor, residual, evaluations, table)
