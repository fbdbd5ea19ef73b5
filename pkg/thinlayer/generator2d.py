from __future__ import annotations

import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass
from enum import Enum
from typing import Any

import numpy as np
import scipy.sparse as sp

from thinlayer._shared import (
    GridMismatchError,
    ParameterError,
    PreconditionError,
    boundary_tolerance,
    sup_norm,
)
from thinlayer.core import (
    CoordinateMap,
    LayerField,
    ReferenceGrid,
    Scenario,
    ScenarioTag,
    Side,
    TransmissionParams,
    angular_symbol,
    physical_radius,
)

logger = logging.getLogger(__name__)


class Flavor(str, Enum):
    PHYSICAL = "physical"
    RESCALED_INNER = "rescaled_inner"  # C_r, two thin layers
    RESCALED_OUTER = "rescaled_outer"  # C_R, thin over thick
    RESCALED_FAST = "rescaled_fast"  # C_kappa, thin over fast
    FAST = "fast"  # Q, the fast radial part only


RESCALED_FLAVOR = {
    ScenarioTag.TWO_THIN: Flavor.RESCALED_INNER,
    ScenarioTag.THIN_OVER_THICK: Flavor.RESCALED_OUTER,
    ScenarioTag.THIN_OVER_FAST: Flavor.RESCALED_FAST,
}


# -------------------------
# Angular Fourier modes
# -------------------------
@dataclass(frozen=True, eq=False)
class AngularModes:
    """Real Fourier coefficients along phi: column n of `cos`/`sin` holds wavenumber n."""

    cos: np.ndarray
    sin: np.ndarray
    n_ang: int

    @property
    def n_modes(self) -> int:
        return self.cos.shape[1]

    def channel_pair(self, n: int) -> np.ndarray:
        return np.column_stack([self.cos[:, n], self.sin[:, n]])


def fourier_coefficients(values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Cosine and sine coefficients of the last axis (periodic, even length)."""
    n_ang = values.shape[-1]
    spectrum = np.fft.rfft(values, axis=-1)
    cos = 2.0 * spectrum.real / n_ang
    sin = -2.0 * spectrum.imag / n_ang
    cos[..., 0] *= 0.5
    cos[..., -1] *= 0.5
    sin[..., 0] = 0.0
    sin[..., -1] = 0.0
    return cos, sin


def fourier_synthesis(cos: np.ndarray, sin: np.ndarray, n_ang: int) -> np.ndarray:
    spectrum = 0.5 * n_ang * (cos - 1j * sin)
    spectrum[..., 0] = n_ang * cos[..., 0]
    spectrum[..., -1] = n_ang * cos[..., -1]
    return np.fft.irfft(spectrum, n=n_ang, axis=-1)


def mode_transform(u: LayerField) -> AngularModes:
    if u.grid.n_ang % 2:
        raise ParameterError(f"n_ang must be even, got {u.grid.n_ang}")
    cos, sin = fourier_coefficients(u.values)
    return AngularModes(cos, sin, u.grid.n_ang)


def inverse_mode_transform(modes: AngularModes, grid: ReferenceGrid) -> LayerField:
    return LayerField(fourier_synthesis(modes.cos, modes.sin, modes.n_ang), grid)


def circle_laplacian(g: np.ndarray, scheme: str = "spectral") -> np.ndarray:
    """Laplace-Beltrami operator on the unit circle applied along the last axis."""
    g = np.asarray(g, dtype=float)
    n_ang = g.shape[-1]
    spectrum = np.fft.rfft(g, axis=-1)
    spectrum *= -angular_symbol(np.arange(spectrum.shape[-1]), n_ang, scheme)
    return np.fft.irfft(spectrum, n=n_ang, axis=-1)


# -------------------------
# Per-mode radial systems
# -------------------------
@dataclass(frozen=True)
class LayerCoefficients:
    """Node-wise radial coefficients: second * f'' + first * f' - symbol * angular * f."""

    second: np.ndarray
    first: np.ndarray
    angular: np.ndarray


def layer_band(coef: LayerCoefficients, step: float, symbol: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Centered second-order stencil weights (sub, main, super) at every node of one layer."""
    lo = coef.second / step**2 - coef.first / (2.0 * step)
    di = -2.0 * coef.second / step**2 - symbol * coef.angular
    hi = coef.second / step**2 + coef.first / (2.0 * step)
    return lo, di, hi


def apply_layer(values: np.ndarray, coef: LayerCoefficients, step: float, scheme: str = "spectral") -> np.ndarray:
    """Interior action of one layer's polar stencil on an (n_rad, n_ang) block; end rows are left at zero."""
    values = np.asarray(values, dtype=float)
    out = np.zeros_like(values)
    radial = coef.second[1:-1, None] * (values[2:] - 2.0 * values[1:-1] + values[:-2]) / step**2
    radial += coef.first[1:-1, None] * (values[2:] - values[:-2]) / (2.0 * step)
    out[1:-1] = radial + coef.angular[1:-1, None] * circle_laplacian(values[1:-1], scheme)
    return out


@dataclass(frozen=True, eq=False)
class ModeSystem:
    mode_n: int
    matrix: sp.csr_matrix
    interior: np.ndarray
    lower: slice
    upper: slice

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    @property
    def lower_block(self) -> sp.csr_matrix:
        return self.matrix[self.lower, self.lower]

    @property
    def upper_block(self) -> sp.csr_matrix:
        return self.matrix[self.upper, self.upper]

    @property
    def boundary_rows(self) -> np.ndarray:
        return np.flatnonzero(~self.interior)

    @property
    def transmission_rows(self) -> sp.csr_matrix:
        return self.matrix[[self.lower.stop - 1, self.upper.start], :]

    @property
    def neumann_rows(self) -> sp.csr_matrix:
        return self.matrix[[self.lower.start, self.upper.stop - 1], :]

    @property
    def mass(self) -> sp.dia_matrix:
        return sp.diags(self.interior.astype(float))


def is_frozen(coef: LayerCoefficients) -> bool:
    """A layer whose coefficients all vanish does not move."""
    return not (coef.second.any() or coef.first.any() or coef.angular.any())


def build_mode_matrix(
    lower: LayerCoefficients,
    upper: LayerCoefficients,
    h_lower: float,
    h_upper: float,
    c_lower: float,
    c_upper: float,
    symbol: float,
) -> sp.csr_matrix:
    """
    Lower block followed by upper block, boundary rows by second-order one-sided differences:

      row 0        : f'(start) = 0
      row m = nl-1 : f'(1-) - c_lower * (u_p - w_m) = 0
      row p = nl   : f'(1+) - c_upper * (u_p - w_m) = 0
      last row     : f'(end) = 0

    A frozen layer (see `is_frozen`) keeps all-zero rows, its end rows included.
    """
    nl = lower.second.size
    nu = upper.second.size
    size = nl + nu
    rows: list[np.ndarray] = []
    cols: list[np.ndarray] = []
    vals: list[np.ndarray] = []

    def add(r, c, v) -> None:
        c = np.atleast_1d(c)
        rows.append(np.broadcast_to(np.atleast_1d(r), c.shape))
        cols.append(c)
        vals.append(np.broadcast_to(np.asarray(v, dtype=float), c.shape))

    for offset, coef, step, n in ((0, lower, h_lower, nl), (nl, upper, h_upper, nu)):
        lo, di, hi = layer_band(coef, step, symbol)
        idx = np.arange(1, n - 1)
        add(offset + idx, offset + idx - 1, lo[idx])
        add(offset + idx, offset + idx, di[idx])
        add(offset + idx, offset + idx + 1, hi[idx])

    m, p = nl - 1, nl
    if not is_frozen(lower):
        add(0, [0, 1, 2], np.array([-3.0, 4.0, -1.0]) / (2.0 * h_lower))
        add(m, [m, m - 1, m - 2], np.array([3.0, -4.0, 1.0]) / (2.0 * h_lower))
        add(m, [p, m], [-c_lower, c_lower])
    if not is_frozen(upper):
        add(p, [p, p + 1, p + 2], np.array([-3.0, 4.0, -1.0]) / (2.0 * h_upper))
        add(p, [p, m], [-c_upper, c_upper])
        last = size - 1
        add(last, [last, last - 1, last - 2], np.array([3.0, -4.0, 1.0]) / (2.0 * h_upper))

    return sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(size, size),
    )


def interior_mask(lower: LayerCoefficients, upper: LayerCoefficients) -> np.ndarray:
    """Dynamic rows: everything but the end rows of layers that move."""
    nl, nu = lower.second.size, upper.second.size
    mask = np.ones(nl + nu, dtype=bool)
    if not is_frozen(lower):
        mask[[0, nl - 1]] = False
    if not is_frozen(upper):
        mask[[nl, nl + nu - 1]] = False
    return mask


# -------------------------
# Mode operators (shared by approximating and limit generators)
# -------------------------
class ModeOperator(ABC):
    """An operator that is block diagonal in the angular Fourier basis."""

    systems: tuple[ModeSystem, ...]

    @abstractmethod
    def to_modes(self, state: Any) -> AngularModes: ...

    @abstractmethod
    def from_modes(self, modes: AngularModes) -> Any: ...

    @abstractmethod
    def as_array(self, state: Any) -> np.ndarray: ...

    def state_norm(self, state: Any) -> float:
        return sup_norm(self.as_array(state))

    def apply_modes(self, modes: AngularModes) -> AngularModes:
        cos = np.empty_like(modes.cos)
        sin = np.empty_like(modes.sin)
        for n, system in enumerate(self.systems):
            out = system.matrix @ modes.channel_pair(n)
            cos[:, n] = out[:, 0]
            sin[:, n] = out[:, 1]
        return AngularModes(cos, sin, modes.n_ang)

    def boundary_residual(self, modes: AngularModes) -> float:
        """
        Largest violation of the algebraic (non-dynamic) rows.

        Rows that are algebraic in every mode are checked pointwise in phi,
        rows that are algebraic only in some modes are checked coefficient-wise.
        """
        applied = self.apply_modes(modes)
        always = np.logical_and.reduce([~s.interior for s in self.systems])
        worst = 0.0
        if always.any():
            values = fourier_synthesis(applied.cos[always], applied.sin[always], applied.n_ang)
            worst = float(np.max(np.abs(values)))
        for n, system in enumerate(self.systems):
            extra = ~system.interior & ~always
            if extra.any():
                worst = max(worst, float(np.max(np.abs(applied.channel_pair(n)[extra]))))
        return worst

    def apply(self, state: Any, strict: bool = True, tol: float | None = None) -> Any:
        modes = self.to_modes(state)
        if strict:
            worst = self.boundary_residual(modes)
            limit = boundary_tolerance(self.state_norm(state), tol=tol)
            if worst > limit:
                raise PreconditionError(f"Boundary rows violated: residual {worst:.3e} > tolerance {limit:.3e}")
        return self.from_modes(self.apply_modes(modes))


@dataclass(frozen=True, eq=False)
class DiscreteGenerator(ModeOperator):
    scenario: Scenario
    params: TransmissionParams
    grid: ReferenceGrid
    flavor: Flavor
    systems: tuple[ModeSystem, ...]
    lower_coef: LayerCoefficients
    upper_coef: LayerCoefficients
    c_lower: float
    c_upper: float
    angular_scheme: str = "spectral"

    def to_modes(self, state: LayerField) -> AngularModes:
        if not isinstance(state, LayerField):
            raise GridMismatchError(f"Expected a LayerField, got {type(state).__name__}")
        state.require_grid(self.grid)
        return mode_transform(state)

    def from_modes(self, modes: AngularModes) -> LayerField:
        return inverse_mode_transform(modes, self.grid)

    def as_array(self, state: LayerField) -> np.ndarray:
        return state.values

    @property
    def physical_lower(self) -> np.ndarray:
        return physical_radius(self.scenario, self.scenario.thickness, self.grid.lower_nodes, Side.LOWER, self.params.gamma)

    @property
    def physical_upper(self) -> np.ndarray:
        return physical_radius(self.scenario, self.scenario.thickness, self.grid.upper_nodes, Side.UPPER, self.params.gamma)


# -------------------------
# Assembly
# -------------------------
def physical_permeabilities(scenario: Scenario, flavor: Flavor, params: TransmissionParams) -> tuple[float, float]:
    """Permeabilities (alpha', beta') of the physical problem a flavor is the reference image of."""
    theta = scenario.thickness
    a, b = params.alpha, params.beta
    if flavor is Flavor.PHYSICAL:
        return a, b
    if flavor is Flavor.RESCALED_INNER:
        return theta * a, theta * b
    if flavor is Flavor.RESCALED_OUTER:
        return theta * a, b
    if flavor is Flavor.RESCALED_FAST:
        return a * float(np.sqrt(params.gamma / theta)), b / theta
    return 0.0, 0.0


def transmission_coefficients(scenario: Scenario, flavor: Flavor, params: TransmissionParams) -> tuple[float, float]:
    """Reference-coordinate Robin coefficients (c_lower, c_upper): slope times permeability."""
    cmap = CoordinateMap(scenario, params.gamma)
    a_phys, b_phys = physical_permeabilities(scenario, flavor, params)
    return cmap.slope(Side.LOWER) * b_phys, cmap.slope(Side.UPPER) * a_phys


def polar_coefficients(diffusivity: float, slope: float, rho: np.ndarray) -> LayerCoefficients:
    return LayerCoefficients(
        second=np.full(rho.size, diffusivity / slope**2),
        first=diffusivity / (slope * rho),
        angular=diffusivity / rho**2,
    )


def _fast_coefficients(scenario: Scenario, params: TransmissionParams, grid: ReferenceGrid) -> tuple[LayerCoefficients, LayerCoefficients]:
    nl, nu = grid.n_rad_lower, grid.n_rad_upper
    zero_l, zero_u = np.zeros(nl), np.zeros(nu)
    tag = scenario.tag
    if tag is ScenarioTag.TWO_THIN:
        lower = LayerCoefficients(np.full(nl, params.kappa), zero_l, zero_l)
        upper = LayerCoefficients(np.full(nu, 1.0 / params.gamma**2), zero_u, zero_u)
    elif tag is ScenarioTag.THIN_OVER_THICK:
        lower = LayerCoefficients(zero_l, zero_l, zero_l)
        upper = LayerCoefficients(np.ones(nu), zero_u, zero_u)
    else:
        rho = grid.lower_nodes
        lower = LayerCoefficients(np.ones(nl), 1.0 / rho, 1.0 / rho**2)
        upper = LayerCoefficients(np.full(nu, 1.0 / params.gamma), zero_u, zero_u)
    return lower, upper


def _check_flavor(scenario: Scenario, flavor: Flavor) -> None:
    if flavor in (Flavor.PHYSICAL, Flavor.FAST):
        return
    if RESCALED_FLAVOR[scenario.tag] is not flavor:
        raise ParameterError(f"Flavor {flavor.value} does not apply to scenario {scenario.tag.value}")


def assemble_generator(
    scenario: Scenario,
    flavor: Flavor | str,
    params: TransmissionParams,
    grid: ReferenceGrid,
    angular_scheme: str = "spectral",
) -> DiscreteGenerator:
    flavor = Flavor(flavor)
    _check_flavor(scenario, flavor)
    if grid.tag is not scenario.tag:
        raise ParameterError(f"Grid built for {grid.tag.value}, scenario is {scenario.tag.value}")

    cmap = CoordinateMap(scenario, params.gamma)
    if flavor is Flavor.FAST:
        lower, upper = _fast_coefficients(scenario, params, grid)
        c_lower, c_upper = 0.0, 0.0
    else:
        rho_lower = physical_radius(scenario, scenario.thickness, grid.lower_nodes, Side.LOWER, params.gamma)
        rho_upper = physical_radius(scenario, scenario.thickness, grid.upper_nodes, Side.UPPER, params.gamma)
        lower = polar_coefficients(scenario.lower_diffusivity(params), cmap.slope(Side.LOWER), rho_lower)
        upper = polar_coefficients(1.0, cmap.slope(Side.UPPER), rho_upper)
        c_lower, c_upper = transmission_coefficients(scenario, flavor, params)

    interior = interior_mask(lower, upper)
    systems = tuple(
        ModeSystem(
            mode_n=n,
            matrix=build_mode_matrix(
                lower, upper, grid.h_lower, grid.h_upper, c_lower, c_upper,
                angular_symbol(n, grid.n_ang, angular_scheme),
            ),
            interior=interior,
            lower=grid.lower_slice,
            upper=grid.upper_slice,
        )
        for n in range(grid.n_modes)
    )
    logger.debug(
        "assembled %s generator for %s (thickness=%s, c_lower=%.6g, c_upper=%.6g)",
        flavor.value, scenario.tag.value, scenario.thickness, c_lower, c_upper,
    )
    return DiscreteGenerator(
        scenario=scenario,
        params=params,
        grid=grid,
        flavor=flavor,
        systems=systems,
        lower_coef=lower,
        upper_coef=upper,
        c_lower=c_lower,
        c_upper=c_upper,
        angular_scheme=angular_scheme,
    )


def apply_generator(gen: DiscreteGenerator, u: LayerField, mode: str = "strict", tol: float | None = None) -> LayerField:
    """
    Pointwise action of the assembled stencils.

    - "strict": boundary rows must hold within tolerance; they carry their residuals in the output
    - "raw": no check, boundary rows are zeroed so only interior values remain
    """
    if mode not in ("strict", "raw"):
        raise ParameterError(f"Unknown apply mode: {mode!r} (allowed: strict, raw)")
    out = gen.apply(u, strict=(mode == "strict"), tol=tol)
    if mode == "raw":
        values = np.array(out.values)
        values[~gen.systems[0].interior] = 0.0
        out = out.with_values(values)
    return out


def log_conjugate(gen: DiscreteGenerator) -> DiscreteGenerator:
    """Interior rows multiplied by rho^2; the radial part of mode 0 becomes rho^2 f'' + rho f' (kappa below)."""
    rho = np.concatenate([gen.physical_lower, gen.physical_upper])
    scale = np.where(gen.systems[0].interior, rho**2, 1.0)
    row_scale = sp.diags(scale)
    systems = tuple(
        ModeSystem(s.mode_n, sp.csr_matrix(row_scale @ s.matrix), s.interior, s.lower, s.upper)
        for s in gen.systems
    )
    return DiscreteGenerator(
        scenario=gen.scenario,
        params=gen.params,
        grid=gen.grid,
        flavor=gen.flavor,
        systems=systems,
        lower_coef=gen.lower_coef,
        upper_coef=gen.upper_coef,
        c_lower=gen.c_lower,
        c_upper=gen.c_upper,
        angular_scheme=gen.angular_scheme,
    )


def conservativity_defect(op: ModeOperator, constant_state: Any) -> float:
    """Sup norm of the operator applied to a constant state."""
    return float(op.state_norm(op.from_modes(op.apply_modes(op.to_modes(constant_state)))))


def layer_trapezoid_weights(nodes: np.ndarray) -> np.ndarray:
    step = (nodes[-1] - nodes[0]) / (nodes.size - 1)
    weights = np.full(nodes.size, step)
    weights[[0, -1]] = 0.5 * step
    return weights
