from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Any, Callable, Iterable, Sequence

import numpy as np
import pandas as pd
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from thinlayer._shared import (
    SOLVE_RESIDUAL_REL,
    InternalError,
    ParameterError,
    require_positive,
    sup_norm,
)
from thinlayer.core import CoordinateMap, LayerField, Side
from thinlayer.generator2d import AngularModes, DiscreteGenerator, ModeOperator, ModeSystem, layer_trapezoid_weights

logger = logging.getLogger(__name__)

SCHEMES = ("implicit_euler", "crank_nicolson")
EXACT_TOL = 1e-10
_SNAP_REL = 1e-9


# -------------------------
# Per-mode linear algebra
# -------------------------
def _factorize(matrix: sp.spmatrix, label: str):
    try:
        return splu(sp.csc_matrix(matrix))
    except RuntimeError as exc:
        raise InternalError(f"Singular {label} system: {exc}") from exc


def _map_modes(fn: Callable[[int, ModeSystem], np.ndarray], systems: Sequence[ModeSystem], workers: int) -> list[np.ndarray]:
    """Run fn over independent angular modes, optionally on a thread pool; order is preserved."""
    if workers <= 1 or len(systems) == 1:
        return [fn(n, s) for n, s in enumerate(systems)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, range(len(systems)), systems))


def _collect(pairs: list[np.ndarray], template: AngularModes) -> AngularModes:
    cos = np.empty_like(template.cos)
    sin = np.empty_like(template.sin)
    for n, pair in enumerate(pairs):
        cos[:, n] = pair[:, 0]
        sin[:, n] = pair[:, 1]
    return AngularModes(cos, sin, template.n_ang)


# -------------------------
# Resolvent
# -------------------------
def resolvent_solve(gen: ModeOperator, lam: float, g: Any, workers: int = 1) -> Any:
    """
    Solve (lam - L) f = g mode by mode.

    Dynamic rows get lam f - L f = g, algebraic rows get -L f = 0, so f lands in the
    operator's domain whatever the boundary values of g are.
    """
    lam = require_positive("lambda", lam)
    modes = gen.to_modes(g)
    scale = max(gen.state_norm(g), 1.0)

    def solve(n: int, system: ModeSystem) -> np.ndarray:
        mass = system.mass
        lhs = sp.csr_matrix(lam * mass - system.matrix)
        rhs = mass @ modes.channel_pair(n)
        out = _factorize(lhs, f"resolvent (mode {n})").solve(rhs)
        residual = sup_norm(lhs @ out - rhs)
        limit = SOLVE_RESIDUAL_REL * (scale + sup_norm(abs(lhs).sum(axis=1)) * sup_norm(out))
        if residual > limit:
            raise InternalError(f"Resolvent residual {residual:.3e} exceeds {limit:.3e} in mode {n}")
        return out

    solved = _collect(_map_modes(solve, gen.systems, workers), modes)
    return gen.from_modes(solved)


# -------------------------
# Time stepping
# -------------------------
def _step_plan(t: float, dt: float) -> tuple[int, float]:
    """Number of full steps and the final partial step landing exactly on t."""
    n_full = int(np.floor(t / dt + _SNAP_REL))
    remainder = t - n_full * dt
    if remainder <= _SNAP_REL * max(t, dt):
        remainder = 0.0
    return n_full, remainder


def _stepper(system: ModeSystem, dt: float, scheme: str):
    mass = system.mass
    if scheme == "implicit_euler":
        lu = _factorize(mass - dt * system.matrix, f"implicit Euler (mode {system.mode_n})")
        return lambda v: lu.solve(mass @ v)
    lu = _factorize(mass - 0.5 * dt * system.matrix, f"Crank-Nicolson (mode {system.mode_n})")
    explicit = sp.csr_matrix(mass + 0.5 * dt * (mass @ system.matrix))
    return lambda v: lu.solve(explicit @ v)


def evolve_modes(gen: ModeOperator, modes: AngularModes, t: float, dt: float, scheme: str = "implicit_euler", workers: int = 1) -> AngularModes:
    n_full, remainder = _step_plan(t, dt)

    def run(n: int, system: ModeSystem) -> np.ndarray:
        v = modes.channel_pair(n)
        if n_full:
            step = _stepper(system, dt, scheme)
            for _ in range(n_full):
                v = step(v)
        if remainder:
            v = _stepper(system, remainder, scheme)(v)
        return v

    return _collect(_map_modes(run, gen.systems, workers), modes)


def evolve(
    gen: ModeOperator,
    u0: Any,
    t: float,
    dt: float,
    scheme: str = "implicit_euler",
    workers: int = 1,
) -> Any:
    """
    Approximate e^{tL} u0.

    - implicit Euler (default): (E - dt L) u_{k+1} = E u_k with E the dynamic-row mask
    - crank_nicolson: (E - dt/2 L) u_{k+1} = (E + dt/2 E L) u_k
    - a last partial step lands exactly on t
    """
    if scheme not in SCHEMES:
        raise ParameterError(f"Unknown time scheme: {scheme!r} (allowed: {', '.join(SCHEMES)})")
    t = require_positive("t", t, allow_zero=True)
    dt = require_positive("dt", dt)
    if t == 0.0:
        return u0
    if dt > t * (1.0 + _SNAP_REL):
        raise ParameterError(f"dt must not exceed t, got dt={dt} > t={t}")
    modes = gen.to_modes(u0)
    out = gen.from_modes(evolve_modes(gen, modes, t, dt, scheme, workers))
    logger.debug("evolved to t=%g with dt=%g (%s)", t, dt, scheme)
    return out


def matrix_exponential_2x2(rates: tuple[float, float], t: float, v0) -> np.ndarray:
    """exp(t [[-a, a], [b, -b]]) v0 in closed form; v0 may carry trailing axes."""
    a, b = (require_positive(name, value, allow_zero=True) for name, value in zip(("a", "b"), rates))
    v0 = np.asarray(v0, dtype=float)
    if a + b == 0.0:
        return v0.copy()
    stationary = (b * v0[0] + a * v0[1]) / (a + b)
    decay = np.exp(-(a + b) * float(t))
    return stationary + decay * (v0 - stationary)


@dataclass(frozen=True)
class StepOrder:
    order: float
    exact: bool
    differences: tuple[float, float]


def step_order_check(gen: ModeOperator, u0: Any, t: float, dt: float, scheme: str = "implicit_euler") -> StepOrder:
    """Observed order from runs at dt, dt/2 and dt/4."""
    runs = [gen.as_array(evolve(gen, u0, t, dt / 2**k, scheme)) for k in range(3)]
    d1 = sup_norm(runs[0] - runs[1])
    d2 = sup_norm(runs[1] - runs[2])
    if d1 <= EXACT_TOL and d2 <= EXACT_TOL:
        return StepOrder(float("nan"), True, (d1, d2))
    return StepOrder(float(np.log2(d1 / d2)), False, (d1, d2))


# -------------------------
# Layer occupancy from the backward equation
# -------------------------
def physical_area_weights(gen: DiscreteGenerator) -> tuple[np.ndarray, np.ndarray]:
    """Radial weights of rho d(rho) per layer on the reference nodes."""
    cmap = CoordinateMap(gen.scenario, gen.params.gamma)
    grid = gen.grid
    lower = layer_trapezoid_weights(grid.lower_nodes) * gen.physical_lower * cmap.slope(Side.LOWER)
    upper = layer_trapezoid_weights(grid.upper_nodes) * gen.physical_upper * cmap.slope(Side.UPPER)
    return lower, upper


def occupancy_curve(
    gen: DiscreteGenerator,
    times: Iterable[float],
    start: str = "uniform",
    dt: float = 1e-3,
    scheme: str = "implicit_euler",
) -> pd.DataFrame:
    """
    Probability of being in the upper layer at each time, for a particle started
    uniformly over the area of the chosen region ("uniform", "upper" or "lower").
    """
    if start not in ("uniform", "upper", "lower"):
        raise ParameterError(f"Unknown start: {start!r} (allowed: uniform, upper, lower)")
    times = np.asarray(list(times), dtype=float)
    if times.size and (times[0] < 0.0 or np.any(np.diff(times) < 0.0)):
        raise ParameterError("times must be nonnegative and nondecreasing")
    grid = gen.grid
    w_lower, w_upper = physical_area_weights(gen)
    if start == "upper":
        w_lower = np.zeros_like(w_lower)
    elif start == "lower":
        w_upper = np.zeros_like(w_upper)
    weights = np.concatenate([w_lower, w_upper])
    weights /= weights.sum()

    values = np.zeros(grid.shape)
    values[grid.upper_slice] = 1.0
    u = LayerField(values, grid)
    previous = 0.0
    rows = []
    for t in times:
        step = t - previous
        if step > 0.0:
            u = evolve(gen, u, step, min(dt, step), scheme)
        previous = t
        frac_upper = float(weights @ np.mean(u.values, axis=1))
        rows.append({"t": float(t), "frac_upper": frac_upper, "frac_lower": 1.0 - frac_upper})
    return pd.DataFrame(rows, columns=["t", "frac_upper", "frac_lower"])
