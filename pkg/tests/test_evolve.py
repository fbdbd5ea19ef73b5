from __future__ import annotations

import numpy as np
import pytest
from numpy.testing import assert_allclose

from conftest import angular_field, small_grid
from thinlayer._shared import ParameterError
from thinlayer.core import CirclePoint, LayerField, Scenario, ScenarioTag, TransmissionParams, TwoCircles
from thinlayer.evolve import (
    evolve,
    matrix_exponential_2x2,
    occupancy_curve,
    physical_area_weights,
    resolvent_solve,
    step_order_check,
)
from thinlayer.generator2d import RESCALED_FLAVOR, Flavor, assemble_generator
from thinlayer.limit import admissible_annulus_state, assemble_limit_generator, two_state_rates

SCENARIOS = [
    Scenario(ScenarioTag.TWO_THIN, 0.1),
    Scenario(ScenarioTag.THIN_OVER_THICK, 0.1),
    Scenario(ScenarioTag.THIN_OVER_FAST, 16.0),
]


# -------------------------
# Resolvent
# -------------------------
@pytest.mark.parametrize("scenario", SCENARIOS, ids=lambda s: s.tag.value)
def test_resolvent_of_constants(scenario, params):
    grid = small_grid(scenario, 17, 8)
    gen = assemble_generator(scenario, RESCALED_FLAVOR[scenario.tag], params, grid)
    f = resolvent_solve(gen, 2.0, LayerField.constant(grid, 1.0))
    assert_allclose(f.values, 0.5, atol=1e-10)


def test_resolvent_solution_lies_in_domain(two_thin, params):
    grid = small_grid(two_thin, 17, 8)
    gen = assemble_generator(two_thin, Flavor.PHYSICAL, params, grid)
    g = LayerField.from_functions(grid, lambda x, phi: x * np.cos(phi), lambda x, phi: np.sin(phi) + x)
    f = resolvent_solve(gen, 1.0, g, workers=2)
    assert gen.boundary_residual(gen.to_modes(f)) <= 1e-10
    out = gen.apply(f)
    interior = gen.systems[0].interior
    assert_allclose((f.values - out.values)[interior], g.values[interior], atol=1e-9)


def test_resolvent_keeps_nonnegative_sources_nonnegative(two_thin, params):
    grid = small_grid(two_thin, 17, 16)
    gen = assemble_generator(two_thin, Flavor.RESCALED_INNER, params, grid)
    g = angular_field(grid, seed=3)
    f = resolvent_solve(gen, 1.0, g)
    assert f.values.min() >= -1e-12


def test_resolvent_needs_positive_lambda(two_thin, params):
    grid = small_grid(two_thin, 9, 8)
    gen = assemble_generator(two_thin, Flavor.PHYSICAL, params, grid)
    with pytest.raises(ParameterError):
        resolvent_solve(gen, 0.0, LayerField.constant(grid, 1.0))


# -------------------------
# Time stepping
# -------------------------
def test_zero_time_returns_initial_state(two_thin, params):
    grid = small_grid(two_thin, 9, 8)
    gen = assemble_generator(two_thin, Flavor.PHYSICAL, params, grid)
    u0 = angular_field(grid)
    assert evolve(gen, u0, 0.0, 1e-3) is u0


def test_step_larger_than_horizon_is_rejected(two_thin, params):
    grid = small_grid(two_thin, 9, 8)
    gen = assemble_generator(two_thin, Flavor.PHYSICAL, params, grid)
    with pytest.raises(ParameterError):
        evolve(gen, angular_field(grid), 0.1, 0.2)
    with pytest.raises(ParameterError):
        evolve(gen, angular_field(grid), 0.1, 0.01, scheme="rk4")


@pytest.mark.parametrize("scheme", ["implicit_euler", "crank_nicolson"])
def test_constants_are_preserved(scheme, params):
    for scenario in SCENARIOS:
        grid = small_grid(scenario, 17, 8)
        gen = assemble_generator(scenario, RESCALED_FLAVOR[scenario.tag], params, grid)
        out = evolve(gen, LayerField.constant(grid, 1.0), 1.0, 0.05, scheme)
        assert_allclose(out.values, 1.0, atol=1e-8)


def test_partial_last_step_lands_on_horizon(two_thin, params):
    grid = small_grid(two_thin, 9, 8)
    gen = assemble_generator(two_thin, Flavor.PHYSICAL, params, grid)
    u0 = angular_field(grid)
    a = evolve(gen, u0, 0.25, 0.1)
    b = evolve(gen, evolve(gen, u0, 0.2, 0.1), 0.05, 0.05)
    assert_allclose(a.values, b.values, atol=1e-12)


def test_semigroup_property(two_thin, params):
    grid = small_grid(two_thin, 17, 8)
    gen = assemble_generator(two_thin, Flavor.RESCALED_INNER, params, grid)
    u0 = angular_field(grid, seed=5)
    whole = evolve(gen, u0, 0.3, 0.01)
    split = evolve(gen, evolve(gen, u0, 0.1, 0.01), 0.2, 0.01)
    assert_allclose(whole.values, split.values, atol=1e-12)


def _flavor_cases():
    for scenario in SCENARIOS:
        for flavor in (Flavor.PHYSICAL, RESCALED_FLAVOR[scenario.tag], Flavor.FAST):
            yield scenario, flavor


@pytest.mark.parametrize("angular", ["spectral", "fd"])
@pytest.mark.parametrize("scenario, flavor", list(_flavor_cases()), ids=lambda v: getattr(v, "value", None) or v.tag.value)
def test_evolution_is_positive_and_contractive(scenario, flavor, angular):
    params = TransmissionParams(alpha=1.0, beta=2.0, kappa=1.5, gamma=1.0)
    grid = small_grid(scenario, 17, 16)
    gen = assemble_generator(scenario, flavor, params, grid, angular)
    for seed in range(50):
        u0 = LayerField(np.random.default_rng(seed).random(grid.shape), grid)
        out = evolve(gen, u0, 0.1, 0.01)
        assert out.values.min() >= -1e-12, seed
        assert out.values.max() <= u0.values.max() + 1e-12, seed


def test_fast_operator_leaves_the_thick_layer_alone(thin_over_thick):
    params = TransmissionParams(alpha=1.0, beta=2.0, kappa=1.5, gamma=1.0)
    grid = small_grid(thin_over_thick, 17, 16)
    gen = assemble_generator(thin_over_thick, Flavor.FAST, params, grid)
    u0 = LayerField(np.random.default_rng(0).random(grid.shape), grid)
    out = evolve(gen, u0, 0.1, 0.01)
    assert_allclose(out.lower, u0.lower, atol=1e-12)


# -------------------------
# Two-state reductions
# -------------------------
def test_matrix_exponential_limits():
    assert_allclose(matrix_exponential_2x2((1.0, 2.0), 50.0, (1.0, 0.0)), [2.0 / 3.0, 2.0 / 3.0], atol=1e-12)
    assert_allclose(matrix_exponential_2x2((1.0, 2.0), 0.7, (0.4, 0.4)), [0.4, 0.4], atol=1e-15)
    assert_allclose(matrix_exponential_2x2((0.0, 0.0), 3.0, (1.0, 0.0)), [1.0, 0.0])
    with pytest.raises(ParameterError):
        matrix_exponential_2x2((-1.0, 1.0), 1.0, (1.0, 0.0))


def test_two_circles_match_matrix_exponential(two_thin):
    params = TransmissionParams(alpha=1.0, beta=1.0, kappa=1.0, gamma=1.0)
    grid = small_grid(two_thin, 9, 4)
    gen = assemble_limit_generator(two_thin, params, grid)
    out = evolve(gen, TwoCircles(np.ones(4), np.zeros(4)), 1.0, 1e-4, "crank_nicolson")
    upper, lower = matrix_exponential_2x2(two_state_rates(two_thin, params), 1.0, (1.0, 0.0))
    assert_allclose(out.g_plus, upper, atol=1e-8)
    assert_allclose(out.g_minus, lower, atol=1e-8)


def test_circle_point_matches_matrix_exponential(thin_over_fast):
    params = TransmissionParams(alpha=1.0, beta=1.0, kappa=1.0, gamma=1.0)
    grid = small_grid(thin_over_fast, 9, 4)
    gen = assemble_limit_generator(thin_over_fast, params, grid)
    out = evolve(gen, CirclePoint(np.ones(4), 0.0), 1.0, 1e-4, "crank_nicolson")
    upper, lower = matrix_exponential_2x2(two_state_rates(thin_over_fast, params), 1.0, (1.0, 0.0))
    assert_allclose(out.g_plus, upper, atol=1e-8)
    assert out.k_minus == pytest.approx(lower, abs=1e-8)


# -------------------------
# Step order
# -------------------------
def test_step_order_of_constants_is_exact(two_thin, params):
    grid = small_grid(two_thin, 9, 8)
    gen = assemble_generator(two_thin, Flavor.PHYSICAL, params, grid)
    result = step_order_check(gen, LayerField.constant(grid, 1.0), 0.2, 0.02)
    assert result.exact
    assert np.isnan(result.order)


def test_implicit_euler_is_first_order(params):
    scenario = Scenario(ScenarioTag.TWO_THIN, 0.5)
    grid = small_grid(scenario, 17, 8)
    gen = assemble_generator(scenario, Flavor.PHYSICAL, params, grid)
    u0 = LayerField.from_functions(grid, lambda x, phi: 1.0 + np.cos(phi) + 0.0 * x, lambda x, phi: 1.0 + np.cos(phi) + 0.0 * x)
    result = step_order_check(gen, u0, 0.5, 0.01)
    assert not result.exact
    assert 0.8 <= result.order <= 1.2


def test_annulus_limit_is_first_order(thin_over_thick, params):
    grid = small_grid(thin_over_thick, 17, 8)
    gen = assemble_limit_generator(thin_over_thick, params, grid)
    state = admissible_annulus_state(1.0 + np.cos(grid.phi), 1.0 + 0.5 * np.cos(grid.phi), params, grid)
    result = step_order_check(gen, state, 0.5, 0.01)
    assert 0.8 <= result.order <= 1.2


# -------------------------
# Occupancy
# -------------------------
def test_area_weights_sum_to_annulus_area(params):
    scenario = Scenario(ScenarioTag.THIN_OVER_THICK, 0.5)
    gen = assemble_generator(scenario, Flavor.PHYSICAL, params, small_grid(scenario, 17, 8))
    lower, upper = physical_area_weights(gen)
    assert lower.sum() == pytest.approx(0.5 * (1.0 - 0.25))
    assert upper.sum() == pytest.approx(0.5 * (2.25 - 1.0))


def test_uniform_symmetric_start_stays_balanced(params):
    scenario = Scenario(ScenarioTag.THIN_OVER_THICK, 0.5)
    gen = assemble_generator(scenario, Flavor.PHYSICAL, params, small_grid(scenario, 33, 4))
    curve = occupancy_curve(gen, [0.0, 0.25, 0.5], start="uniform", dt=5e-3)
    assert list(curve.columns) == ["t", "frac_upper", "frac_lower"]
    assert curve["frac_upper"].iloc[0] == pytest.approx(0.625, abs=1e-12)
    assert_allclose(curve["frac_upper"], 0.625, atol=5e-3)
    assert_allclose(curve["frac_upper"] + curve["frac_lower"], 1.0)


def test_upper_start_drains_towards_lower(params):
    scenario = Scenario(ScenarioTag.THIN_OVER_THICK, 0.5)
    gen = assemble_generator(scenario, Flavor.PHYSICAL, params, small_grid(scenario, 17, 4))
    curve = occupancy_curve(gen, [0.0, 0.1, 0.5], start="upper", dt=5e-3)
    assert curve["frac_upper"].iloc[0] == pytest.approx(1.0)
    assert curve["frac_upper"].is_monotonic_decreasing
    with pytest.raises(ParameterError):
        occupancy_curve(gen, [0.5, 0.1])
