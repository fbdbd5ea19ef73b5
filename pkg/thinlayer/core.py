from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from pathlib import Path
from typing import Callable, ClassVar, Union

import numpy as np
import pandas as pd

from thinlayer._shared import (
    DomainError,
    GridMismatchError,
    ParameterError,
    load_table,
    require_positive,
    write_frame,
)

logger = logging.getLogger(__name__)

MEMBRANE = 1.0
UPPER_END = 2.0
_EDGE_SLACK = 1e-12


# -------------------------
# Scenario tags and sides
# -------------------------
class ScenarioTag(str, Enum):
    TWO_THIN = "two_thin"
    THIN_OVER_THICK = "thin_over_thick"
    THIN_OVER_FAST = "thin_over_fast"

    @classmethod
    def parse(cls, label: "str | ScenarioTag") -> "ScenarioTag":
        if isinstance(label, cls):
            return label
        key = str(label).strip().lower()
        aliases = {"a": cls.TWO_THIN, "b": cls.THIN_OVER_THICK, "c": cls.THIN_OVER_FAST}
        if key in aliases:
            return aliases[key]
        for tag in cls:
            if tag.value == key:
                return tag
        raise ParameterError(f"Unknown scenario: {label!r} (allowed: a, b, c or {[t.value for t in cls]})")

    @property
    def letter(self) -> str:
        return {"two_thin": "a", "thin_over_thick": "b", "thin_over_fast": "c"}[self.value]


class Side(str, Enum):
    LOWER = "lower"
    UPPER = "upper"


# -------------------------
# Parameters and scenarios
# -------------------------
@dataclass(frozen=True)
class TransmissionParams:
    alpha: float = 1.0
    beta: float = 1.0
    kappa: float = 1.0
    gamma: float = 1.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "alpha", require_positive("alpha", self.alpha, allow_zero=True))
        object.__setattr__(self, "beta", require_positive("beta", self.beta, allow_zero=True))
        object.__setattr__(self, "kappa", require_positive("kappa", self.kappa))
        object.__setattr__(self, "gamma", require_positive("gamma", self.gamma))

    def as_dict(self) -> dict[str, float]:
        return {"alpha": self.alpha, "beta": self.beta, "kappa": self.kappa, "gamma": self.gamma}


@dataclass(frozen=True)
class Scenario:
    """
    One member of a thin-layer family.

    - two_thin: thickness is 1 - r (both layers shrink, lower reference interval [0, 1])
    - thin_over_thick: thickness is R - 1, the lower annulus [r, 1] is fixed
    - thin_over_fast: thickness is the lower diffusivity kappa, R - 1 = sqrt(gamma / kappa)
    """

    tag: ScenarioTag
    thickness: float
    fixed_inner_radius: float = 0.5

    def __post_init__(self) -> None:
        tag = ScenarioTag.parse(self.tag)
        object.__setattr__(self, "tag", tag)
        thickness = require_positive("thickness", self.thickness)
        if tag is ScenarioTag.TWO_THIN and thickness >= 1.0:
            raise ParameterError(f"two_thin thickness 1 - r must lie in (0, 1), got {thickness}")
        object.__setattr__(self, "thickness", thickness)
        r = float(self.fixed_inner_radius)
        if not 0.0 < r < 1.0:
            raise ParameterError(f"fixed_inner_radius must lie in (0, 1), got {r}")
        object.__setattr__(self, "fixed_inner_radius", r)

    @property
    def reference_start(self) -> float:
        return 0.0 if self.tag is ScenarioTag.TWO_THIN else self.fixed_inner_radius

    def inner_radius(self) -> float:
        if self.tag is ScenarioTag.TWO_THIN:
            return 1.0 - self.thickness
        return self.fixed_inner_radius

    def outer_radius(self, gamma: float = 1.0) -> float:
        return CoordinateMap(self, gamma).to_physical(UPPER_END, Side.UPPER)

    def lower_diffusivity(self, params: TransmissionParams) -> float:
        if self.tag is ScenarioTag.THIN_OVER_FAST:
            return self.thickness
        return params.kappa


# -------------------------
# Coordinate maps
# -------------------------
@dataclass(frozen=True)
class CoordinateMap:
    """Affine reference <-> physical radius map; both layers pivot on the membrane at 1."""

    scenario: Scenario
    gamma: float = 1.0

    def slope(self, side: Side) -> float:
        tag = self.scenario.tag
        theta = self.scenario.thickness
        side = Side(side)
        if tag is ScenarioTag.TWO_THIN:
            return self.gamma * theta if side is Side.UPPER else theta
        if tag is ScenarioTag.THIN_OVER_THICK:
            return theta if side is Side.UPPER else 1.0
        return float(np.sqrt(self.gamma / theta)) if side is Side.UPPER else 1.0

    def to_physical(self, varrho, side: Side):
        side = Side(side)
        arr = np.asarray(varrho, dtype=float)
        lo, hi = (self.scenario.reference_start, MEMBRANE) if side is Side.LOWER else (MEMBRANE, UPPER_END)
        if np.any(arr < lo - _EDGE_SLACK) or np.any(arr > hi + _EDGE_SLACK) or not np.all(np.isfinite(arr)):
            raise DomainError(f"Reference radius outside the {side.value} layer [{lo}, {hi}]: {varrho}")
        out = MEMBRANE + self.slope(side) * (arr - MEMBRANE)
        return float(out) if out.ndim == 0 else out

    def to_reference(self, rho, side: Side):
        side = Side(side)
        arr = np.asarray(rho, dtype=float)
        out = MEMBRANE + (arr - MEMBRANE) / self.slope(side)
        lo, hi = (self.scenario.reference_start, MEMBRANE) if side is Side.LOWER else (MEMBRANE, UPPER_END)
        if np.any(out < lo - 1e-10) or np.any(out > hi + 1e-10):
            raise DomainError(f"Physical radius outside the {side.value} layer: {rho}")
        return float(out) if out.ndim == 0 else out


def physical_radius(scenario: Scenario, thickness: float, varrho, side: Side, gamma: float = 1.0):
    member = Scenario(scenario.tag, thickness, scenario.fixed_inner_radius)
    return CoordinateMap(member, gamma).to_physical(varrho, side)


# -------------------------
# Reference grid
# -------------------------
@dataclass(frozen=True)
class ReferenceGrid:
    tag: ScenarioTag
    lower_start: float
    n_rad_lower: int
    n_rad_upper: int
    n_ang: int

    @cached_property
    def lower_nodes(self) -> np.ndarray:
        return np.linspace(self.lower_start, MEMBRANE, self.n_rad_lower)

    @cached_property
    def upper_nodes(self) -> np.ndarray:
        return np.linspace(MEMBRANE, UPPER_END, self.n_rad_upper)

    @cached_property
    def phi(self) -> np.ndarray:
        return 2.0 * np.pi * np.arange(self.n_ang) / self.n_ang

    @property
    def h_lower(self) -> float:
        return (MEMBRANE - self.lower_start) / (self.n_rad_lower - 1)

    @property
    def h_upper(self) -> float:
        return (UPPER_END - MEMBRANE) / (self.n_rad_upper - 1)

    @property
    def d_phi(self) -> float:
        return 2.0 * np.pi / self.n_ang

    @property
    def n_rad_total(self) -> int:
        return self.n_rad_lower + self.n_rad_upper

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n_rad_total, self.n_ang)

    @property
    def lower_slice(self) -> slice:
        return slice(0, self.n_rad_lower)

    @property
    def upper_slice(self) -> slice:
        return slice(self.n_rad_lower, self.n_rad_total)

    @property
    def membrane_lower_index(self) -> int:
        return self.n_rad_lower - 1

    @property
    def membrane_upper_index(self) -> int:
        return self.n_rad_lower

    @property
    def n_modes(self) -> int:
        return self.n_ang // 2 + 1


def build_reference_grid(scenario: Scenario, n_rad_lower: int, n_rad_upper: int, n_ang: int) -> ReferenceGrid:
    counts = {"n_rad_lower": n_rad_lower, "n_rad_upper": n_rad_upper, "n_ang": n_ang}
    for name, value in counts.items():
        if int(value) != value or value < 4:
            raise ParameterError(f"{name} must be an integer >= 4, got {value}")
    if n_ang % 2:
        raise ParameterError(f"n_ang must be even, got {n_ang}")
    grid = ReferenceGrid(
        tag=scenario.tag,
        lower_start=scenario.reference_start,
        n_rad_lower=int(n_rad_lower),
        n_rad_upper=int(n_rad_upper),
        n_ang=int(n_ang),
    )
    logger.debug("built %s grid %s x %s x %s", scenario.tag.value, n_rad_lower, n_rad_upper, n_ang)
    return grid


def angular_symbol(n, n_ang: int, scheme: str = "spectral"):
    """Eigenvalue of -d^2/dphi^2 on wavenumber n for the chosen angular discretization."""
    n = np.asarray(n, dtype=float)
    if scheme == "spectral":
        out = n * n
    elif scheme == "fd":
        d_phi = 2.0 * np.pi / n_ang
        out = (4.0 / d_phi**2) * np.sin(0.5 * n * d_phi) ** 2
    else:
        raise ParameterError(f"Unknown angular scheme: {scheme!r} (allowed: spectral, fd)")
    return float(out) if out.ndim == 0 else out


# -------------------------
# Fields
# -------------------------
FIELD_COLUMNS = ["varrho", "phi", "side", "value"]


@dataclass(frozen=True, eq=False)
class LayerField:
    values: np.ndarray
    grid: ReferenceGrid

    def __post_init__(self) -> None:
        arr = np.array(self.values, dtype=float)
        if arr.shape != self.grid.shape:
            raise GridMismatchError(f"Field shape {arr.shape} does not match grid shape {self.grid.shape}")
        if not np.all(np.isfinite(arr)):
            raise ParameterError("Field values must be finite")
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    @classmethod
    def constant(cls, grid: ReferenceGrid, value: float) -> "LayerField":
        return cls(np.full(grid.shape, float(value)), grid)

    @classmethod
    def from_functions(
        cls,
        grid: ReferenceGrid,
        lower: Callable[[np.ndarray, np.ndarray], np.ndarray],
        upper: Callable[[np.ndarray, np.ndarray], np.ndarray],
    ) -> "LayerField":
        """Sample f(varrho, phi) per layer; callables receive broadcastable column/row arrays."""
        phi = grid.phi[None, :]
        values = np.empty(grid.shape)
        values[grid.lower_slice] = np.broadcast_to(lower(grid.lower_nodes[:, None], phi), (grid.n_rad_lower, grid.n_ang))
        values[grid.upper_slice] = np.broadcast_to(upper(grid.upper_nodes[:, None], phi), (grid.n_rad_upper, grid.n_ang))
        return cls(values, grid)

    @property
    def lower(self) -> np.ndarray:
        return self.values[self.grid.lower_slice]

    @property
    def upper(self) -> np.ndarray:
        return self.values[self.grid.upper_slice]

    def with_values(self, values: np.ndarray) -> "LayerField":
        return LayerField(values, self.grid)

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values)))

    def require_grid(self, grid: ReferenceGrid) -> None:
        if self.grid != grid:
            raise GridMismatchError(f"Field lives on {self.grid}, expected {grid}")

    # -------------------------
    # CSV contract: varrho,phi,side,value; lower block then upper block, radial-major
    # -------------------------
    def to_frame(self) -> pd.DataFrame:
        g = self.grid
        varrho = np.concatenate([g.lower_nodes, g.upper_nodes])
        sides = np.array([Side.LOWER.value] * g.n_rad_lower + [Side.UPPER.value] * g.n_rad_upper)
        return pd.DataFrame(
            {
                "varrho": np.repeat(varrho, g.n_ang),
                "phi": np.tile(g.phi, g.n_rad_total),
                "side": np.repeat(sides, g.n_ang),
                "value": self.values.reshape(-1),
            },
            columns=FIELD_COLUMNS,
        )

    @classmethod
    def from_frame(cls, df: pd.DataFrame, grid: ReferenceGrid) -> "LayerField":
        missing = [c for c in FIELD_COLUMNS if c not in df.columns]
        if missing:
            raise ParameterError(f"Missing required columns: {missing}. Found: {list(df.columns)}")
        if len(df) != grid.n_rad_total * grid.n_ang:
            raise GridMismatchError(f"Field table has {len(df)} rows, grid needs {grid.n_rad_total * grid.n_ang}")

        sides = df["side"].astype(str).str.strip().str.lower()
        bad_side = sorted(set(sides) - {Side.LOWER.value, Side.UPPER.value})
        if bad_side:
            raise ParameterError(f"Invalid side values: {bad_side} (allowed: lower, upper)")
        expected = np.repeat([Side.LOWER.value, Side.UPPER.value], [grid.n_rad_lower * grid.n_ang, grid.n_rad_upper * grid.n_ang])
        if not np.array_equal(sides.to_numpy(), expected):
            raise GridMismatchError("Field rows must list the lower block before the upper block")

        values = pd.to_numeric(df["value"], errors="raise").to_numpy(dtype=float)
        return cls(values.reshape(grid.shape), grid)

    def write_csv(self, path: Path) -> Path:
        return write_frame(self.to_frame(), path)

    @classmethod
    def read_csv(cls, path: Path, grid: ReferenceGrid) -> "LayerField":
        return cls.from_frame(load_table(path, FIELD_COLUMNS), grid)


# -------------------------
# Limit states (lumped descriptions of the layers)
# -------------------------
def _circle(values, n_ang: int | None = None) -> np.ndarray:
    arr = np.array(values, dtype=float).reshape(-1)
    if n_ang is not None and arr.size != n_ang:
        raise GridMismatchError(f"Circle function has {arr.size} samples, grid has {n_ang}")
    if not np.all(np.isfinite(arr)):
        raise ParameterError("Circle function values must be finite")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class TwoCircles:
    g_plus: np.ndarray
    g_minus: np.ndarray
    tag: ClassVar[ScenarioTag] = ScenarioTag.TWO_THIN

    def __post_init__(self) -> None:
        object.__setattr__(self, "g_plus", _circle(self.g_plus))
        object.__setattr__(self, "g_minus", _circle(self.g_minus, self.g_plus.size))


@dataclass(frozen=True, eq=False)
class CircleAnnulus:
    g_plus: np.ndarray
    u_minus: np.ndarray
    tag: ClassVar[ScenarioTag] = ScenarioTag.THIN_OVER_THICK

    def __post_init__(self) -> None:
        g = _circle(self.g_plus)
        u = np.array(self.u_minus, dtype=float)
        if u.ndim != 2 or u.shape[1] != g.size:
            raise GridMismatchError(f"u_minus shape {u.shape} does not match {g.size} angular samples")
        if not np.all(np.isfinite(u)):
            raise ParameterError("u_minus values must be finite")
        u.setflags(write=False)
        object.__setattr__(self, "g_plus", g)
        object.__setattr__(self, "u_minus", u)


@dataclass(frozen=True, eq=False)
class CirclePoint:
    g_plus: np.ndarray
    k_minus: float = field(default=0.0)
    tag: ClassVar[ScenarioTag] = ScenarioTag.THIN_OVER_FAST

    def __post_init__(self) -> None:
        object.__setattr__(self, "g_plus", _circle(self.g_plus))
        k = float(self.k_minus)
        if not np.isfinite(k):
            raise ParameterError("k_minus must be finite")
        object.__setattr__(self, "k_minus", k)


LimitState = Union[TwoCircles, CircleAnnulus, CirclePoint]


def check_limit_grid(limit: LimitState, grid: ReferenceGrid) -> None:
    if limit.tag is not grid.tag:
        raise GridMismatchError(f"{type(limit).__name__} belongs to {limit.tag.value}, grid is {grid.tag.value}")
    if limit.g_plus.size != grid.n_ang:
        raise GridMismatchError(f"Circle function has {limit.g_plus.size} samples, grid has {grid.n_ang}")
    if isinstance(limit, CircleAnnulus) and limit.u_minus.shape != (grid.n_rad_lower, grid.n_ang):
        raise GridMismatchError(f"u_minus shape {limit.u_minus.shape} does not match the lower block")


def lift_limit_state(limit: LimitState, grid: ReferenceGrid) -> LayerField:
    check_limit_grid(limit, grid)
    values = np.empty(grid.shape)
    values[grid.upper_slice] = limit.g_plus[None, :]
    if isinstance(limit, TwoCircles):
        values[grid.lower_slice] = limit.g_minus[None, :]
    elif isinstance(limit, CircleAnnulus):
        values[grid.lower_slice] = limit.u_minus
    else:
        values[grid.lower_slice] = limit.k_minus
    return LayerField(values, grid)
