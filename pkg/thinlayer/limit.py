from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np
import pandas as pd
import scipy.sparse as sp

from thinlayer._shared import GridMismatchError, ParameterError, one_sided_end, one_sided_start
from thinlayer.core import (
    CircleAnnulus,
    CirclePoint,
    LayerField,
    LimitState,
    ReferenceGrid,
    Scenario,
    ScenarioTag,
    TransmissionParams,
    TwoCircles,
    angular_symbol,
    check_limit_grid,
    lift_limit_state,
)
from thinlayer.generator2d import (
    RESCALED_FLAVOR,
    AngularModes,
    DiscreteGenerator,
    Flavor,
    ModeOperator,
    ModeSystem,
    apply_generator,
    apply_layer,
    assemble_generator,
    circle_laplacian,
    fourier_coefficients,
    fourier_synthesis,
    layer_band,
    layer_trapezoid_weights,
    polar_coefficients,
    transmission_coefficients,
)

__all__ = [
    "CircleAnnulus",
    "CirclePoint",
    "CorrectorProfile",
    "LimitGenerator",
    "LimitState",
    "TwoCircles",
    "admissible_annulus_state",
    "apply_slow_operator",
    "assemble_fast_operator",
    "assemble_limit_generator",
    "build_corrector",
    "constant_limit_state",
    "corrector_lift",
    "kurtz_fast_residual",
    "project",
    "two_state_rates",
]

logger = logging.getLogger(__name__)

POINT_RATES = ("conservative", "area", "integral")
PROFILES = ("sine", "quadratic")


# -------------------------
# Projection onto the lumped description
# -------------------------
def _require_tag(scenario: Scenario, grid: ReferenceGrid) -> None:
    if scenario.tag is not grid.tag:
        raise GridMismatchError(f"Field grid belongs to {grid.tag.value}, scenario is {scenario.tag.value}")


def project(scenario: Scenario, u: LayerField) -> LimitState:
    """Radial averages over thin layers; the fast lower layer collapses to its area average."""
    grid = u.grid
    _require_tag(scenario, grid)
    g_plus = layer_trapezoid_weights(grid.upper_nodes) @ u.upper
    if scenario.tag is ScenarioTag.TWO_THIN:
        g_minus = layer_trapezoid_weights(grid.lower_nodes) @ u.lower
        return TwoCircles(g_plus, g_minus)
    if scenario.tag is ScenarioTag.THIN_OVER_THICK:
        return CircleAnnulus(g_plus, np.array(u.lower))
    length = 1.0 - grid.lower_start
    k_minus = float(np.mean(layer_trapezoid_weights(grid.lower_nodes) @ u.lower)) / length
    return CirclePoint(g_plus, k_minus)


def constant_limit_state(grid: ReferenceGrid, value: float) -> LimitState:
    ones = np.full(grid.n_ang, float(value))
    if grid.tag is ScenarioTag.TWO_THIN:
        return TwoCircles(ones, ones)
    if grid.tag is ScenarioTag.THIN_OVER_THICK:
        return CircleAnnulus(ones, np.full((grid.n_rad_lower, grid.n_ang), float(value)))
    return CirclePoint(ones, float(value))


def admissible_annulus_state(g_plus, base, params: TransmissionParams, grid: ReferenceGrid) -> CircleAnnulus:
    """
    Circle + annulus state whose lower part meets the reflecting row at r and the
    membrane row u'(1-) = beta (g+ - u(1-)) exactly, also under one-sided stencils.
    """
    if grid.tag is not ScenarioTag.THIN_OVER_THICK:
        raise GridMismatchError(f"Annulus states need a thin_over_thick grid, got {grid.tag.value}")
    g_plus = np.broadcast_to(np.asarray(g_plus, dtype=float), (grid.n_ang,))
    base = np.broadcast_to(np.asarray(base, dtype=float), (grid.n_ang,))
    r = grid.lower_start
    length = 1.0 - r
    x = grid.lower_nodes
    shape = (x - r) ** 2 / (2.0 * length) - 0.5 * length
    shape[-1] = 0.0
    u_minus = base[None, :] + params.beta * shape[:, None] * (g_plus - base)[None, :]
    return CircleAnnulus(g_plus, u_minus)


# -------------------------
# Correctors
# -------------------------
@dataclass(frozen=True, eq=False)
class CorrectorProfile:
    tag: ScenarioTag
    profile: str
    lower: np.ndarray
    lower_d1: np.ndarray
    lower_d2: np.ndarray
    upper: np.ndarray
    upper_d1: np.ndarray
    upper_d2: np.ndarray
    slopes: dict[str, float] = field(default_factory=dict)

    def second_integral(self, side: str) -> float:
        """Integral of psi'' over one layer, from the analytic end slopes."""
        if side == "lower":
            return self.slopes["lower_membrane"] - self.slopes["lower_start"]
        return self.slopes["upper_end"] - self.slopes["upper_membrane"]

    def stacked(self) -> np.ndarray:
        return np.concatenate([self.lower, self.upper])


def _sine_upper(amp: float, x):
    x = np.asarray(x, dtype=float)
    c = amp / np.pi
    psi = c * (2.0 - x) * np.sin(np.pi * x)
    d1 = c * (-np.sin(np.pi * x) + np.pi * (2.0 - x) * np.cos(np.pi * x))
    d2 = c * (-2.0 * np.pi * np.cos(np.pi * x) - np.pi**2 * (2.0 - x) * np.sin(np.pi * x))
    return psi, d1, d2


def _sine_lower_unit(beta: float, x):
    x = np.asarray(x, dtype=float)
    c = beta / np.pi
    psi = c * x * np.sin(np.pi * x)
    d1 = c * (np.sin(np.pi * x) + np.pi * x * np.cos(np.pi * x))
    d2 = c * (2.0 * np.pi * np.cos(np.pi * x) - np.pi**2 * x * np.sin(np.pi * x))
    return psi, d1, d2


def _sine_lower_shifted(beta: float, r: float, x):
    """beta (1-r)(x-r)/pi * sin(pi (x-r)/(1-r)); its slope at 1- is -beta (1-r)."""
    length = 1.0 - r
    z = (np.asarray(x, dtype=float) - r) / length
    psi = beta * length**2 / np.pi * z * np.sin(np.pi * z)
    d1 = beta * length / np.pi * (np.sin(np.pi * z) + np.pi * z * np.cos(np.pi * z))
    d2 = beta / np.pi * (2.0 * np.pi * np.cos(np.pi * z) - np.pi**2 * z * np.sin(np.pi * z))
    return psi, d1, d2


def _quadratic_upper(amp: float, x):
    y = np.asarray(x, dtype=float) - 1.0
    return -amp * y + 0.5 * amp * y**2, -amp + amp * y, np.full(y.shape, amp)


def _quadratic_lower(beta: float, start: float, x):
    length = 1.0 - start
    y = 1.0 - np.asarray(x, dtype=float)
    return beta * y - 0.5 * beta / length * y**2, -beta + beta / length * y, np.full(y.shape, -beta / length)


def _smoothstep(x, lo: float, hi: float):
    """Quintic cutoff: 0 below lo, 1 above hi, with value and two derivatives."""
    width = hi - lo
    t = np.clip((np.asarray(x, dtype=float) - lo) / width, 0.0, 1.0)
    chi = t**3 * (10.0 - 15.0 * t + 6.0 * t**2)
    d1 = 30.0 * t**2 * (1.0 - t) ** 2 / width
    d2 = 60.0 * t * (1.0 - t) * (1.0 - 2.0 * t) / width**2
    return chi, d1, d2


def boundary_layers(x, r: float, eps: float):
    """
    Unit-slope boundary layers on [r, 1] built from eta(s) = -s exp(-s):

      membrane: zeta(1) = 0, zeta'(1) = 1, zeta'(r) = 0
      inner:    zeta(1) = 0, zeta'(r) = 1, zeta'(1) = 0

    Both are O(eps) in sup norm.
    """
    x = np.asarray(x, dtype=float)
    length = 1.0 - r
    chi, chi1, chi2 = _smoothstep(x, r + 0.25 * length, r + 0.75 * length)

    s = (1.0 - x) / eps
    decay = np.exp(-s)
    m = -eps * s * decay  # eps * eta(s)
    m1 = (1.0 - s) * decay
    m2 = (2.0 - s) * decay / eps
    membrane = (m * chi, m1 * chi + m * chi1, m2 * chi + 2.0 * m1 * chi1 + m * chi2)

    s_r = (x - r) / eps
    decay_r = np.exp(-s_r)
    n = eps * s_r * decay_r  # -eps * eta(s_r)
    n1 = (1.0 - s_r) * decay_r
    n2 = -(2.0 - s_r) * decay_r / eps
    inner = (n * (1.0 - chi), n1 * (1.0 - chi) - n * chi1, n2 * (1.0 - chi) - 2.0 * n1 * chi1 - n * chi2)
    return membrane, inner


def _upper_amplitude(tag: ScenarioTag, params: TransmissionParams) -> float:
    if tag is ScenarioTag.THIN_OVER_THICK:
        return params.alpha
    return params.alpha * params.gamma


def build_corrector(
    scenario: Scenario,
    params: TransmissionParams,
    grid: ReferenceGrid,
    profile: str = "sine",
) -> CorrectorProfile:
    """
    Corrector psi with psi(1-) = psi(1+) = 0, reflecting ends, and membrane slopes
    psi'(1+) = -A (A = alpha gamma, or alpha over a thick lower layer) and psi'(1-) = -beta.
    """
    if profile not in PROFILES:
        raise ParameterError(f"Unknown corrector profile: {profile!r} (allowed: {', '.join(PROFILES)})")
    tag = scenario.tag
    amp = _upper_amplitude(tag, params)
    r = grid.lower_start
    upper_fn = _sine_upper if profile == "sine" else _quadratic_upper
    upper = upper_fn(amp, grid.upper_nodes)
    up_ends = upper_fn(amp, np.array([1.0, 2.0]))[1]

    if tag is ScenarioTag.THIN_OVER_THICK:
        eps = float(np.sqrt(scenario.thickness))
        membrane, _ = boundary_layers(grid.lower_nodes, r, eps)
        lower = tuple(-params.beta * part for part in membrane)
        ends = boundary_layers(np.array([r, 1.0]), r, eps)[0][1]
        low_ends = -params.beta * ends
    elif profile == "quadratic":
        lower = _quadratic_lower(params.beta, r, grid.lower_nodes)
        low_ends = _quadratic_lower(params.beta, r, np.array([r, 1.0]))[1]
    elif tag is ScenarioTag.TWO_THIN:
        lower = _sine_lower_unit(params.beta, grid.lower_nodes)
        low_ends = _sine_lower_unit(params.beta, np.array([0.0, 1.0]))[1]
    else:
        lower = _sine_lower_shifted(params.beta, r, grid.lower_nodes)
        low_ends = _sine_lower_shifted(params.beta, r, np.array([r, 1.0]))[1]

    lower_vals, lower_d1, lower_d2 = (np.array(a, dtype=float) for a in lower)
    upper_vals, upper_d1, upper_d2 = (np.array(a, dtype=float) for a in upper)
    # membrane values vanish identically; drop sin(pi) round-off
    lower_vals[-1] = 0.0
    upper_vals[0] = 0.0
    return CorrectorProfile(
        tag=tag,
        profile=profile,
        lower=lower_vals,
        lower_d1=lower_d1,
        lower_d2=lower_d2,
        upper=upper_vals,
        upper_d1=upper_d1,
        upper_d2=upper_d2,
        slopes={
            "lower_start": float(low_ends[0]),
            "lower_membrane": float(low_ends[1]),
            "upper_membrane": float(up_ends[0]),
            "upper_end": float(up_ends[1]),
        },
    )


def _close_boundary_rows(values: np.ndarray, grid: ReferenceGrid, c_lower: float, c_upper: float) -> np.ndarray:
    """
    Add quadratic bumps, each vanishing at the membrane, so that the four one-sided
    boundary rows hold exactly; membrane traces (hence the jump) are left untouched.
    """
    out = np.array(values, dtype=float)
    lower = out[grid.lower_slice]
    upper = out[grid.upper_slice]
    jump = upper[0] - lower[-1]

    start = grid.lower_start
    x_l, len_l = grid.lower_nodes, 1.0 - start
    bump_start = -((1.0 - x_l) ** 2) / (2.0 * len_l)
    bump_membrane_l = (x_l - start) ** 2 / (2.0 * len_l) - 0.5 * len_l
    bump_membrane_l[-1] = 0.0
    x_u = grid.upper_nodes
    bump_membrane_u = -((2.0 - x_u) ** 2) / 2.0 + 0.5
    bump_membrane_u[0] = 0.0
    bump_end = (x_u - 1.0) ** 2 / 2.0

    h_l, h_u = grid.h_lower, grid.h_upper
    fix_start = -one_sided_start(lower, h_l)
    fix_membrane_l = c_lower * jump - one_sided_end(lower, h_l)
    fix_membrane_u = c_upper * jump - one_sided_start(upper, h_u)
    fix_end = -one_sided_end(upper, h_u)

    lower += bump_start[:, None] * fix_start[None, :] + bump_membrane_l[:, None] * fix_membrane_l[None, :]
    upper += bump_membrane_u[:, None] * fix_membrane_u[None, :] + bump_end[:, None] * fix_end[None, :]
    out[grid.lower_slice] = lower
    out[grid.upper_slice] = upper
    return out


def corrector_lift(
    scenario: Scenario,
    u: LayerField | LimitState,
    thickness: float,
    params: TransmissionParams,
    grid: ReferenceGrid,
    profile: str = "quadratic",
) -> LayerField:
    """
    Lift an element into the domain of the rescaled generator with the given thickness.

    - two_thin:        u - theta^2 psi (x) jump
    - thin_over_thick: upper u - theta^2 psi+ (x) jump, lower gets boundary layers of width sqrt(theta)
    - thin_over_fast:  u - psi (x) jump / kappa
    """
    if not isinstance(u, LayerField):
        u = lift_limit_state(u, grid)
    u.require_grid(grid)
    member = Scenario(scenario.tag, thickness, scenario.fixed_inner_radius)
    _require_tag(member, grid)
    c_lower, c_upper = transmission_coefficients(member, RESCALED_FLAVOR[member.tag], params)
    corr = build_corrector(member, params, grid, profile)

    values = np.array(u.values)
    jump = u.upper[0] - u.lower[-1]
    theta = member.thickness
    if member.tag is ScenarioTag.TWO_THIN:
        values -= theta**2 * corr.stacked()[:, None] * jump[None, :]
    elif member.tag is ScenarioTag.THIN_OVER_FAST:
        values -= corr.stacked()[:, None] * jump[None, :] / theta
    else:
        values[grid.upper_slice] -= theta**2 * corr.upper[:, None] * jump[None, :]
        membrane, inner = boundary_layers(grid.lower_nodes, grid.lower_start, float(np.sqrt(theta)))
        lower = u.lower
        amp_membrane = c_lower * jump - one_sided_end(lower, grid.h_lower)
        amp_inner = -one_sided_start(lower, grid.h_lower)
        zeta_membrane = np.array(membrane[0])
        zeta_membrane[-1] = 0.0
        values[grid.lower_slice] += zeta_membrane[:, None] * amp_membrane[None, :] + inner[0][:, None] * amp_inner[None, :]

    return LayerField(_close_boundary_rows(values, grid, c_lower, c_upper), grid)


# -------------------------
# Fast and slow operators
# -------------------------
def assemble_fast_operator(scenario: Scenario, params: TransmissionParams, grid: ReferenceGrid, angular_scheme: str = "spectral") -> DiscreteGenerator:
    return assemble_generator(scenario, Flavor.FAST, params, grid, angular_scheme)


def _kurtz_scale(tag: ScenarioTag, thickness: float) -> float:
    return 1.0 / thickness if tag is ScenarioTag.THIN_OVER_FAST else thickness**2


def kurtz_fast_residual(
    scenario: Scenario,
    u: LayerField,
    thicknesses: Iterable[float],
    params: TransmissionParams,
    profile: str = "quadratic",
    angular_scheme: str = "spectral",
) -> pd.DataFrame:
    """sup over interior nodes of |scale(theta) C_theta(lift_theta u) - Q u| for each thickness."""
    grid = u.grid
    _require_tag(scenario, grid)
    fast = apply_generator(assemble_fast_operator(scenario, params, grid, angular_scheme), u, mode="raw")
    rows = []
    for theta in thicknesses:
        member = Scenario(scenario.tag, float(theta), scenario.fixed_inner_radius)
        gen = assemble_generator(member, RESCALED_FLAVOR[member.tag], params, grid, angular_scheme)
        lifted = corrector_lift(member, u, member.thickness, params, grid, profile)
        applied = apply_generator(gen, lifted, mode="raw")
        residual = float(np.max(np.abs(_kurtz_scale(member.tag, member.thickness) * applied.values - fast.values)))
        rows.append({"thickness": member.thickness, "residual": residual})
        logger.info("kurtz %s thickness=%g residual=%.6e", scenario.tag.value, member.thickness, residual)
    df = pd.DataFrame(rows, columns=["thickness", "residual"])
    df["ratio"] = df["residual"].shift(1) / df["residual"]
    return df


def apply_slow_operator(
    scenario: Scenario,
    params: TransmissionParams,
    state: LimitState,
    grid: ReferenceGrid,
    profile: str = "quadratic",
    angular_scheme: str = "spectral",
) -> LayerField:
    """Slow part O: layer diffusion minus the corrector coupling psi'' (x) jump. Rows from apply_layer keep zero end rows."""
    check_limit_grid(state, grid)
    corr = build_corrector(scenario, params, grid, profile)
    lap = lambda g: circle_laplacian(g, angular_scheme)  # noqa: E731
    values = np.zeros(grid.shape)
    g_plus = state.g_plus
    rho = grid.lower_nodes

    if isinstance(state, TwoCircles):
        jump = g_plus - state.g_minus
        values[grid.upper_slice] = lap(g_plus)[None, :] - corr.upper_d2[:, None] * jump[None, :] / params.gamma**2
        values[grid.lower_slice] = params.kappa * (lap(state.g_minus)[None, :] - corr.lower_d2[:, None] * jump[None, :])
    elif isinstance(state, CircleAnnulus):
        jump = g_plus - state.u_minus[-1]
        values[grid.upper_slice] = lap(g_plus)[None, :] - corr.upper_d2[:, None] * jump[None, :]
        values[grid.lower_slice] = apply_layer(state.u_minus, polar_coefficients(params.kappa, 1.0, rho), grid.h_lower, angular_scheme)
    else:
        jump = g_plus - state.k_minus
        values[grid.upper_slice] = lap(g_plus)[None, :] - corr.upper_d2[:, None] * jump[None, :] / params.gamma
        values[grid.lower_slice] = -apply_layer(corr.lower[:, None] * jump[None, :], polar_coefficients(1.0, 1.0, rho), grid.h_lower, angular_scheme)

    return LayerField(values, grid)


# -------------------------
# Limit generators
# -------------------------
def two_state_rates(scenario: Scenario, params: TransmissionParams, point_rate: str = "conservative") -> tuple[float, float]:
    """(upper -> lower, lower -> upper) rates of the phi-independent reduction."""
    if scenario.tag is ScenarioTag.TWO_THIN:
        return params.alpha / params.gamma, params.kappa * params.beta
    if scenario.tag is ScenarioTag.THIN_OVER_FAST:
        return params.alpha, point_rate_constant(params, scenario.fixed_inner_radius, point_rate)
    raise ParameterError("thin_over_thick has no two-state reduction")


def point_rate_constant(params: TransmissionParams, r: float, point_rate: str) -> float:
    if point_rate not in POINT_RATES:
        raise ParameterError(f"Unknown point rate: {point_rate!r} (allowed: {', '.join(POINT_RATES)})")
    if point_rate == "area":
        return 2.0 * params.beta / (1.0 - r**2)
    return params.beta / params.gamma


@dataclass(frozen=True, eq=False)
class LimitGenerator(ModeOperator):
    scenario: Scenario
    params: TransmissionParams
    grid: ReferenceGrid
    systems: tuple[ModeSystem, ...]
    point_rate: str = "conservative"
    angular_scheme: str = "spectral"

    def as_array(self, state: LimitState) -> np.ndarray:
        check_limit_grid(state, self.grid)
        if isinstance(state, TwoCircles):
            return np.vstack([state.g_minus, state.g_plus])
        if isinstance(state, CircleAnnulus):
            return np.vstack([state.u_minus, state.g_plus])
        return np.vstack([np.full(self.grid.n_ang, state.k_minus), state.g_plus])

    def to_modes(self, state: LimitState) -> AngularModes:
        cos, sin = fourier_coefficients(self.as_array(state))
        return AngularModes(cos, sin, self.grid.n_ang)

    def from_modes(self, modes: AngularModes) -> LimitState:
        values = fourier_synthesis(modes.cos, modes.sin, modes.n_ang)
        if self.scenario.tag is ScenarioTag.TWO_THIN:
            return TwoCircles(values[1], values[0])
        if self.scenario.tag is ScenarioTag.THIN_OVER_THICK:
            return CircleAnnulus(values[-1], values[:-1])
        return CirclePoint(values[1], float(np.mean(values[0])))


def _two_circle_system(n: int, symbol: float, params: TransmissionParams) -> ModeSystem:
    a = params.alpha / params.gamma
    b = params.kappa * params.beta
    matrix = sp.csr_matrix(np.array([[-params.kappa * symbol - b, b], [a, -symbol - a]]))
    return ModeSystem(n, matrix, np.ones(2, dtype=bool), slice(0, 1), slice(1, 2))


def _circle_annulus_system(n: int, symbol: float, params: TransmissionParams, grid: ReferenceGrid) -> ModeSystem:
    nl = grid.n_rad_lower
    h = grid.h_lower
    dense = np.zeros((nl + 1, nl + 1))
    lo, di, hi = layer_band(polar_coefficients(params.kappa, 1.0, grid.lower_nodes), h, symbol)
    idx = np.arange(1, nl - 1)
    dense[idx, idx - 1] = lo[idx]
    dense[idx, idx] = di[idx]
    dense[idx, idx + 1] = hi[idx]
    m, g = nl - 1, nl
    dense[0, :3] = np.array([-3.0, 4.0, -1.0]) / (2.0 * h)
    dense[m, m - 2:m + 1] = np.array([1.0, -4.0, 3.0]) / (2.0 * h)
    dense[m, m] += params.beta
    dense[m, g] -= params.beta
    dense[g, m] = params.alpha
    dense[g, g] = -symbol - params.alpha
    interior = np.ones(nl + 1, dtype=bool)
    interior[[0, m]] = False
    return ModeSystem(n, sp.csr_matrix(dense), interior, slice(0, nl), slice(nl, nl + 1))


def _circle_point_system(n: int, symbol: float, params: TransmissionParams, rate: float, weight: float) -> ModeSystem:
    if n == 0:
        k_row = [-rate, rate * weight]
        interior = np.ones(2, dtype=bool)
    else:
        # k carries no angular dependence
        k_row = [1.0, 0.0]
        interior = np.array([False, True])
    matrix = sp.csr_matrix(np.array([k_row, [params.alpha, -symbol - params.alpha]]))
    return ModeSystem(n, matrix, interior, slice(0, 1), slice(1, 2))


def assemble_limit_generator(
    scenario: Scenario,
    params: TransmissionParams,
    grid: ReferenceGrid,
    point_rate: str = "conservative",
    angular_scheme: str = "spectral",
) -> LimitGenerator:
    """
    Per-mode matrices of the limit generator.

    - two circles: diag(Delta, kappa Delta) + [[-alpha/gamma, alpha/gamma], [kappa beta, -kappa beta]]
    - circle + annulus: Delta g+ - alpha (g+ - u(1-)), kappa-polar diffusion below with the beta Robin row
    - circle + point: Delta g+ - alpha (g+ - k), dk/dt = c (mean g+ - k); "integral" uses 2 pi mean g+
    """
    _require_tag(scenario, grid)
    systems = []
    for n in range(grid.n_modes):
        symbol = angular_symbol(n, grid.n_ang, angular_scheme)
        if scenario.tag is ScenarioTag.TWO_THIN:
            systems.append(_two_circle_system(n, symbol, params))
        elif scenario.tag is ScenarioTag.THIN_OVER_THICK:
            systems.append(_circle_annulus_system(n, symbol, params, grid))
        else:
            rate = point_rate_constant(params, scenario.fixed_inner_radius, point_rate)
            weight = 2.0 * np.pi if point_rate == "integral" else 1.0
            systems.append(_circle_point_system(n, symbol, params, rate, weight))
    logger.debug("assembled limit generator for %s (point_rate=%s)", scenario.tag.value, point_rate)
    return LimitGenerator(
        scenario=scenario,
        params=params,
        grid=grid,
        systems=tuple(systems),
        point_rate=point_rate,
        angular_scheme=angular_scheme,
    )
