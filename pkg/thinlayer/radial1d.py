from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Union

import numpy as np
import scipy.sparse as sp
from scipy.interpolate import CubicSpline
from scipy.signal import lfilter

from thinlayer._shared import (
    InternalError,
    ParameterError,
    PreconditionError,
    RESIDUAL_TARGET,
    boundary_tolerance,
    one_sided_end,
    one_sided_start,
    require_positive,
)
from thinlayer.core import TransmissionParams
from thinlayer.generator2d import LayerCoefficients, build_mode_matrix

logger = logging.getLogger(__name__)

QUADRATURE_RTOL = 1e-10
_MIN_PANELS = 256
_MAX_PANELS = 2**20
_MAX_NEUMANN_ITERATIONS = 10_000


# -------------------------
# Types
# -------------------------
@dataclass(frozen=True)
class TwoSidedInterval:
    a: float
    b: float

    def __post_init__(self) -> None:
        if not (np.isfinite(self.a) and np.isfinite(self.b)) or not self.a < 0.0 < self.b:
            raise ParameterError(f"Two-sided interval needs a < 0 < b, got a={self.a}, b={self.b}")

    @classmethod
    def from_radii(cls, r: float, R: float) -> "TwoSidedInterval":
        return cls(float(np.log(r)), float(np.log(R)))

    def grid(self, n: int) -> tuple[np.ndarray, np.ndarray]:
        return np.linspace(self.a, 0.0, n), np.linspace(0.0, self.b, n)


@dataclass(frozen=True, eq=False)
class RadialProfile:
    """Samples on a two-sided grid; lower_x ends at the membrane from below, upper_x starts there from above."""

    lower_x: np.ndarray
    lower: np.ndarray
    upper_x: np.ndarray
    upper: np.ndarray

    def __post_init__(self) -> None:
        for name in ("lower_x", "lower", "upper_x", "upper"):
            arr = np.array(getattr(self, name), dtype=float).reshape(-1)
            if not np.all(np.isfinite(arr)):
                raise ParameterError(f"RadialProfile.{name} must be finite")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if self.lower.size != self.lower_x.size or self.upper.size != self.upper_x.size:
            raise ParameterError("RadialProfile values and nodes differ in length")

    def sup_norm(self) -> float:
        return float(max(np.max(np.abs(self.lower)), np.max(np.abs(self.upper))))

    def scaled(self, factor: float) -> "RadialProfile":
        return RadialProfile(self.lower_x, factor * self.lower, self.upper_x, factor * self.upper)

    def minus(self, other: "RadialProfile") -> "RadialProfile":
        return RadialProfile(self.lower_x, self.lower - other.lower, self.upper_x, self.upper - other.upper)

    def side_function(self, side: str) -> Callable[[np.ndarray], np.ndarray]:
        x, y = (self.lower_x, self.lower) if side == "lower" else (self.upper_x, self.upper)
        if x.size == 1:
            return lambda t: np.full(np.shape(t), y[0])
        return CubicSpline(x, y)


Source = Union[Callable[[np.ndarray], np.ndarray], RadialProfile]


def _side_source(g: Source, side: str) -> Callable[[np.ndarray], np.ndarray]:
    if isinstance(g, RadialProfile):
        return g.side_function(side)
    return lambda x: np.broadcast_to(np.asarray(g(x), dtype=float), np.shape(x))


# -------------------------
# Particular solutions of (lam - D d^2/dx^2) h = g
# -------------------------
@dataclass(frozen=True, eq=False)
class _Particular:
    x: np.ndarray
    h: np.ndarray
    dh: np.ndarray
    rate: float


def _exponential_sweeps(g_vals: np.ndarray, step: float, rate: float) -> tuple[np.ndarray, np.ndarray]:
    """
    Trapezoid recursions for
      left(x)  = int_lo^x exp(-rate (x - y)) g(y) dy
      right(x) = int_x^hi exp(-rate (y - x)) g(y) dy
    """
    decay = np.exp(-rate * step)
    w = np.zeros_like(g_vals)
    w[1:] = 0.5 * step * (decay * g_vals[:-1] + g_vals[1:])
    left = lfilter([1.0], [1.0, -decay], w)
    g_rev = g_vals[::-1]
    w_rev = np.zeros_like(g_rev)
    w_rev[1:] = 0.5 * step * (decay * g_rev[:-1] + g_rev[1:])
    right = lfilter([1.0], [1.0, -decay], w_rev)[::-1]
    return left, right


def _particular_solution(g: Callable[[np.ndarray], np.ndarray], lo: float, hi: float, lam: float, diffusivity: float) -> _Particular:
    """Free-space Green's function convolution on [lo, hi], refined with Richardson until QUADRATURE_RTOL."""
    rate = float(np.sqrt(lam / diffusivity))
    panels = _MIN_PANELS
    previous: tuple[np.ndarray, np.ndarray] | None = None
    coarse: tuple[np.ndarray, np.ndarray] | None = None

    while True:
        x = np.linspace(lo, hi, panels + 1)
        sweeps = _exponential_sweeps(np.asarray(g(x), dtype=float), x[1] - x[0], rate)
        if coarse is not None:
            left = (4.0 * sweeps[0][::2] - coarse[0]) / 3.0
            right = (4.0 * sweeps[1][::2] - coarse[1]) / 3.0
            if previous is not None:
                scale = max(1.0, float(np.max(np.abs(left) + np.abs(right))))
                change = max(
                    float(np.max(np.abs(left[::2] - previous[0]))),
                    float(np.max(np.abs(right[::2] - previous[1]))),
                )
                if change <= QUADRATURE_RTOL * scale:
                    break
            previous = (left, right)
        if panels >= _MAX_PANELS:
            raise InternalError(f"Quadrature did not reach {QUADRATURE_RTOL:g} with {panels} panels")
        coarse = sweeps
        panels *= 2

    x = np.linspace(lo, hi, panels // 2 + 1)
    h = (left + right) / (2.0 * diffusivity * rate)
    dh = (right - left) / (2.0 * diffusivity)
    return _Particular(x=x, h=h, dh=dh, rate=rate)


def _evaluate(x_fine: np.ndarray, values: np.ndarray, at: np.ndarray | None) -> tuple[np.ndarray, np.ndarray]:
    if at is None:
        return x_fine, values
    at = np.asarray(at, dtype=float)
    return at, CubicSpline(x_fine, values)(at)


# -------------------------
# Closed-form resolvents
# -------------------------
def transmission_determinant(lam: float, p: TransmissionParams, iv: TwoSidedInterval) -> float:
    lam = require_positive("lambda", lam)
    s = np.sqrt(lam)
    mu = np.sqrt(lam / p.kappa)
    s_a, c_a = np.sinh(-mu * iv.a), np.cosh(-mu * iv.a)
    s_b, c_b = np.sinh(s * iv.b), np.cosh(s * iv.b)
    return float(mu * s * s_a * s_b + p.alpha * mu * s_a * c_b + p.beta * s * c_a * s_b)


def resolvent_closed_form(
    lam: float,
    g: Source,
    p: TransmissionParams,
    iv: TwoSidedInterval,
    at: tuple[np.ndarray, np.ndarray] | None = None,
) -> RadialProfile:
    """
    Solve lam f - A f = g on [a, 0-] u [0+, b] with A f = kappa f'' below and f'' above,
    f'(a) = f'(b) = 0, f'(0+) = alpha [f(0+) - f(0-)], f'(0-) = beta [f(0+) - f(0-)].

    Representation:
      upper  f = C2 cosh s(b - x) - h+(b) sinh s(b - x) + h+(x),   s  = sqrt(lam)
      lower  f = C1 cosh mu(x - a) - h-(a) sinh mu(x - a) + h-(x), mu = sqrt(lam / kappa)
    where h+- are the free-space convolutions, so the outer Neumann conditions hold for any C1, C2.
    """
    lam = require_positive("lambda", lam)
    if at is None and isinstance(g, RadialProfile):
        at = (g.lower_x, g.upper_x)

    low = _particular_solution(_side_source(g, "lower"), iv.a, 0.0, lam, p.kappa)
    up = _particular_solution(_side_source(g, "upper"), 0.0, iv.b, lam, 1.0)
    mu, s = low.rate, up.rate
    span_a, span_b = -iv.a, iv.b
    s_a, c_a = np.sinh(mu * span_a), np.cosh(mu * span_a)
    s_b, c_b = np.sinh(s * span_b), np.cosh(s * span_b)

    # traces at the membrane, with C1 = C2 = 0
    p_minus = -low.h[0] * s_a + low.h[-1]
    q_minus = -mu * low.h[0] * c_a + low.dh[-1]
    p_plus = -up.h[-1] * s_b + up.h[0]
    q_plus = s * up.h[-1] * c_b + up.dh[0]
    jump = p_plus - p_minus

    system = np.array([[mu * s_a + p.beta * c_a, -p.beta * c_b], [-p.alpha * c_a, s * s_b + p.alpha * c_b]])
    rhs = np.array([-q_minus + p.beta * jump, q_plus - p.alpha * jump])
    det = float(np.linalg.det(system))
    if not det > 0.0:
        raise InternalError(f"Transmission system is singular (determinant {det:g})")
    c1, c2 = np.linalg.solve(system, rhs)

    f_low = c1 * np.cosh(mu * (low.x - iv.a)) - low.h[0] * np.sinh(mu * (low.x - iv.a)) + low.h
    f_up = c2 * np.cosh(s * (iv.b - up.x)) - up.h[-1] * np.sinh(s * (iv.b - up.x)) + up.h
    lower_x, lower = _evaluate(low.x, f_low, None if at is None else at[0])
    upper_x, upper = _evaluate(up.x, f_up, None if at is None else at[1])
    return RadialProfile(lower_x, lower, upper_x, upper)


def neumann_resolvent_interval(
    lam: float,
    g: Callable[[np.ndarray], np.ndarray],
    lo: float,
    hi: float,
    diffusivity: float = 1.0,
    at: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """lam f - D f'' = g on [lo, hi] with f'(lo) = f'(hi) = 0."""
    lam = require_positive("lambda", lam)
    part = _particular_solution(_side_source(g, "lower"), lo, hi, lam, diffusivity)
    mu = part.rate
    span = hi - lo
    c = (part.h[0] * np.cosh(mu * span) + part.h[-1]) / np.sinh(mu * span)
    f = c * np.cosh(mu * (part.x - lo)) - part.h[0] * np.sinh(mu * (part.x - lo)) + part.h
    return _evaluate(part.x, f, at)


def circle_point_resolvent(
    lam: float,
    g: tuple[Callable[[np.ndarray], np.ndarray] | np.ndarray, float],
    p: TransmissionParams,
    r: float,
    at: np.ndarray | None = None,
    fallback_nodes: int = 2049,
) -> tuple[RadialProfile, float]:
    """
    Resolvent of the interval-plus-point operator on [ln r, 0-] u {0+}:

      A f = kappa f''                on [a, 0-], f'(a) = 0, f'(0-) = beta (f(0+) - f(0-))
      A f(0+) = alpha (f(0-) - f(0+))

    Returns (lower profile, point value).
    """
    lam = require_positive("lambda", lam)
    if not 0.0 < r < 1.0:
        raise ParameterError(f"Inner radius must lie in (0, 1), got {r}")
    g_lower, g_point = g
    if not callable(g_lower):
        samples = np.asarray(g_lower, dtype=float)
        nodes = np.linspace(np.log(r), 0.0, samples.size) if at is None else np.asarray(at, dtype=float)
        g_lower = CubicSpline(nodes, samples)
    g_point = float(g_point)
    a = float(np.log(r))

    if p.alpha > 0.0 and lam <= 2.0 * p.alpha:
        logger.warning("lambda=%g <= 2 alpha=%g: using the dense discrete solve", lam, 2.0 * p.alpha)
        return _circle_point_dense(lam, g_lower, g_point, p, a, at, fallback_nodes)

    part = _particular_solution(_side_source(g_lower, "lower"), a, 0.0, lam, p.kappa)
    mu = part.rate
    s_a, c_a = np.sinh(-mu * a), np.cosh(-mu * a)

    # With f(0+) known, f = C cosh mu(x - a) - h(a) sinh mu(x - a) + h(x) gives
    #   f(0-)  = C cosh(mu|a|) + p0,          p0 = h(0) - h(a) sinh(mu|a|)
    #   f'(0-) = C mu sinh(mu|a|) + q0,       q0 = h'(0) - mu h(a) cosh(mu|a|)
    # and the membrane condition f'(0-) = beta (f(0+) - f(0-)) fixes
    #   C (mu sinh(mu|a|) + beta cosh(mu|a|)) = beta (f(0+) - p0) - q0.
    # The right-hand side is the functional F_beta(g) once f(0+) = g(0+) / lam (alpha = 0).
    p0 = part.h[-1] - part.h[0] * s_a
    q0 = part.dh[-1] - mu * part.h[0] * c_a
    denom = mu * s_a + p.beta * c_a

    def lower_for(point_value: float) -> tuple[float, np.ndarray]:
        c = (p.beta * (point_value - p0) - q0) / denom
        return c, c * np.cosh(mu * (part.x - a)) - part.h[0] * np.sinh(mu * (part.x - a)) + part.h

    f_point = g_point / lam
    if p.alpha > 0.0:
        # f(0-) is affine in f(0+): f(0-) = base + slope * f(0+)
        base = p0 - p.beta * p0 / denom * c_a - q0 / denom * c_a
        slope = p.beta * c_a / denom
        for iteration in range(_MAX_NEUMANN_ITERATIONS):
            trace = base + slope * f_point
            updated = (g_point + p.alpha * (trace - f_point)) / lam
            if abs(updated - f_point) < RESIDUAL_TARGET * max(1.0, abs(updated)):
                f_point = updated
                break
            f_point = updated
        else:
            raise InternalError("Perturbation series did not converge")
        logger.debug("circle+point perturbation series converged after %d sweeps", iteration + 1)

    _, f_low = lower_for(f_point)
    x, values = _evaluate(part.x, f_low, at)
    return RadialProfile(x, values, np.array([0.0]), np.array([f_point])), f_point


def _circle_point_dense(
    lam: float,
    g_lower: Callable[[np.ndarray], np.ndarray],
    g_point: float,
    p: TransmissionParams,
    a: float,
    at: np.ndarray | None,
    n: int,
) -> tuple[RadialProfile, float]:
    x = np.linspace(a, 0.0, n)
    step = x[1] - x[0]
    m = n - 1
    mat = np.zeros((n + 1, n + 1))
    rhs = np.zeros(n + 1)
    idx = np.arange(1, m)
    mat[idx, idx - 1] = -p.kappa / step**2
    mat[idx, idx] = lam + 2.0 * p.kappa / step**2
    mat[idx, idx + 1] = -p.kappa / step**2
    rhs[idx] = g_lower(x[idx])
    mat[0, :3] = np.array([-3.0, 4.0, -1.0]) / (2.0 * step)
    mat[m, m - 2:m + 1] = np.array([1.0, -4.0, 3.0]) / (2.0 * step)
    mat[m, m] += p.beta
    mat[m, n] -= p.beta
    mat[n, n] = lam + p.alpha
    mat[n, m] = -p.alpha
    rhs[n] = g_point
    sol = np.linalg.solve(mat, rhs)
    xs, values = _evaluate(x, sol[:n], at)
    return RadialProfile(xs, values, np.array([0.0]), np.array([sol[n]])), float(sol[n])


# -------------------------
# Log-coordinate image operator on V = [r, 1-] u [1+, R]
# -------------------------
def _uniform_step(nodes: np.ndarray) -> float:
    nodes = np.asarray(nodes, dtype=float)
    if nodes.size < 4:
        raise ParameterError(f"Need at least 4 nodes per side, got {nodes.size}")
    step = (nodes[-1] - nodes[0]) / (nodes.size - 1)
    if not np.allclose(np.diff(nodes), step, rtol=1e-9, atol=0.0):
        raise ParameterError("Radial nodes must be uniformly spaced on each side")
    return float(step)


def log_conjugate_matrix(lower_rho: np.ndarray, upper_rho: np.ndarray, p: TransmissionParams) -> sp.csr_matrix:
    """
    Discretization of rho^2 f'' + rho f' (times kappa on the lower side) with the boundary rows

      f'(r) = 0, f'(1-) = beta [f(1+) - f(1-)], f'(1+) = alpha [f(1+) - f(1-)], f'(R) = 0

    written in physical radius.
    """
    lower_rho = np.asarray(lower_rho, dtype=float)
    upper_rho = np.asarray(upper_rho, dtype=float)
    h_low, h_up = _uniform_step(lower_rho), _uniform_step(upper_rho)
    lower = LayerCoefficients(p.kappa * lower_rho**2, p.kappa * lower_rho, np.zeros(lower_rho.size))
    upper = LayerCoefficients(upper_rho**2, upper_rho, np.zeros(upper_rho.size))
    return build_mode_matrix(lower, upper, h_low, h_up, p.beta, p.alpha, 0.0)


def log_conjugate_apply(f: RadialProfile, p: TransmissionParams, tol: float | None = None) -> RadialProfile:
    """
    A^I f at every node. Interior values use centered stencils; the four end values
    are extrapolated quadratically from the neighbouring interior values.
    """
    matrix = log_conjugate_matrix(f.lower_x, f.upper_x, p)
    stacked = np.concatenate([f.lower, f.upper])
    out = matrix @ stacked

    nl = f.lower.size
    boundary = np.array([0, nl - 1, nl, stacked.size - 1])
    limit = boundary_tolerance(stacked, tol=tol)
    worst = float(np.max(np.abs(out[boundary])))
    if worst > limit:
        raise PreconditionError(f"Boundary/transmission conditions violated: residual {worst:.3e} > {limit:.3e}")

    lower, upper = out[:nl], out[nl:]
    for block in (lower, upper):
        block[0] = 3.0 * block[1] - 3.0 * block[2] + block[3]
        block[-1] = 3.0 * block[-2] - 3.0 * block[-3] + block[-4]
    return RadialProfile(f.lower_x, lower, f.upper_x, upper)


def boundary_slopes(f: RadialProfile) -> dict[str, float]:
    """One-sided second-order slopes at the four ends of a profile."""
    h_low, h_up = _uniform_step(f.lower_x), _uniform_step(f.upper_x)
    return {
        "lower_start": float(one_sided_start(f.lower, h_low)),
        "lower_membrane": float(one_sided_end(f.lower, h_low)),
        "upper_membrane": float(one_sided_start(f.upper, h_up)),
        "upper_end": float(one_sided_end(f.upper, h_up)),
    }
