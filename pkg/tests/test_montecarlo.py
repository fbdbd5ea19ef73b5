from __future__ import annotations

import numpy as np
import pandas as pd
import pytest
from pandas.testing import assert_frame_equal

from thinlayer._shared import ParameterError
from thinlayer.core import Scenario, ScenarioTag, Side, TransmissionParams
from thinlayer.harness import run_thin_layer_consistency
from thinlayer.montecarlo import (
    CHUNK_SIZE,
    N_BINS,
    Geometry,
    Particles,
    calibrate_crossing,
    check_step_size,
    chi_square_uniformity,
    crossing_probabilities,
    family_member_setup,
    simulate_limit_jump_diffusion,
    simulate_membrane_bm,
    total_variation,
)

ANNULI = Geometry(0.5, 1.5)


def test_geometry_validation():
    with pytest.raises(ParameterError):
        Geometry(1.2, 1.5)
    assert ANNULI.upper_area_fraction() == pytest.approx(0.625)


def test_impermeable_membrane_never_crosses():
    params = TransmissionParams(alpha=0.0, beta=0.0)
    summary = simulate_membrane_bm(params, ANNULI, 2000, 0.1, 1e-3, seed=7)
    assert summary.crossings == 0
    assert summary.occupancy["frac_upper"].nunique() == 1
    assert int(summary.histogram["count"].sum()) == 2000


def test_same_seed_reproduces_frames():
    params = TransmissionParams(alpha=1.0, beta=1.0)
    a = simulate_membrane_bm(params, ANNULI, 500, 0.05, 1e-3, seed=3)
    b = simulate_membrane_bm(params, ANNULI, 500, 0.05, 1e-3, seed=3)
    assert_frame_equal(a.occupancy, b.occupancy)
    assert_frame_equal(a.histogram, b.histogram)


def test_results_do_not_depend_on_worker_count(two_thin, params):
    n = CHUNK_SIZE + 1000
    serial = simulate_limit_jump_diffusion(two_thin, params, n, 1.0, 0.1, seed=11, workers=1)
    threaded = simulate_limit_jump_diffusion(two_thin, params, n, 1.0, 0.1, seed=11, workers=2)
    assert_frame_equal(serial.occupancy, threaded.occupancy)
    assert_frame_equal(serial.histogram, threaded.histogram)


def test_histogram_layout(params):
    summary = simulate_membrane_bm(params, ANNULI, 1234, 0.02, 1e-3, seed=1)
    assert list(summary.histogram.columns) == ["bin_phi", "side", "count"]
    assert len(summary.histogram) == 2 * N_BINS
    assert int(summary.histogram["count"].sum()) == 1234
    assert summary.occupancy["t"].iloc[-1] == pytest.approx(0.02)


def test_mirrored_runs_reflect_the_histogram(params):
    base = simulate_membrane_bm(params, ANNULI, 3000, 0.05, 1e-3, seed=5)
    mirrored = simulate_membrane_bm(params, ANNULI, 3000, 0.05, 1e-3, seed=5, mirror=True)
    for side in ("upper", "lower"):
        a = base.histogram.query("side == @side")["count"].to_numpy()
        b = mirrored.histogram.query("side == @side")["count"].to_numpy()
        np.testing.assert_array_equal(a, b[::-1])
    assert base.crossings == mirrored.crossings


def test_two_circle_jumps_reach_stationary_split(two_thin):
    params = TransmissionParams(alpha=1.0, beta=2.0, kappa=1.0, gamma=1.0)
    n = 100_000
    summary = simulate_limit_jump_diffusion(two_thin, params, n, 50.0, 0.5, seed=2)
    sigma = np.sqrt((2.0 / 3.0) * (1.0 / 3.0) / n)
    assert summary.final_upper_fraction() == pytest.approx(2.0 / 3.0, abs=3.0 * sigma)


def test_circle_point_without_outflow_stays_on_circle(thin_over_fast):
    params = TransmissionParams(alpha=0.0, beta=1.0)
    summary = simulate_limit_jump_diffusion(thin_over_fast, params, 1000, 1.0, 0.1, seed=4)
    assert (summary.occupancy["frac_upper"] == 1.0).all()


def test_limit_angles_spread_uniformly(two_thin, params):
    summary = simulate_limit_jump_diffusion(two_thin, params, 20_000, 20.0, 0.1, seed=12345, start_angle=0.0)
    assert chi_square_uniformity(summary) > 0.01


def test_symmetric_membrane_keeps_uniform_occupancy(params):
    summary = simulate_membrane_bm(params, ANNULI, 20_000, 0.5, 1e-3, seed=12345)
    assert summary.occupancy["frac_upper"].iloc[0] == pytest.approx(0.625, abs=0.02)
    assert summary.final_upper_fraction() == pytest.approx(0.625, abs=0.02)


def test_step_size_and_probability_limits(params):
    with pytest.raises(ParameterError, match="too large"):
        check_step_size(Geometry(0.9, 1.1), 1.0, 1e-2)
    with pytest.raises(ParameterError):
        simulate_membrane_bm(params, Geometry(0.9, 1.1), 10, 0.1, 1e-2, seed=0)
    with pytest.raises(ParameterError, match="> 1"):
        crossing_probabilities(TransmissionParams(alpha=100.0), 1e-2)
    with pytest.raises(ParameterError, match="whole multiple"):
        simulate_membrane_bm(params, ANNULI, 10, 0.0105, 1e-3, seed=0)


def test_limit_process_rejects_unsupported_cases(thin_over_thick, thin_over_fast, params):
    with pytest.raises(ParameterError):
        simulate_limit_jump_diffusion(thin_over_thick, params, 10, 0.1, 0.01, seed=0)
    with pytest.raises(ParameterError):
        simulate_limit_jump_diffusion(thin_over_fast, params, 10, 0.1, 0.01, seed=0, point_rate="integral")
    with pytest.raises(ParameterError):
        simulate_limit_jump_diffusion(thin_over_fast, params, 10, 0.1, 0.01, seed=0, start="middle")


def test_family_member_setup_uses_physical_values(params):
    physical, geometry = family_member_setup(Scenario(ScenarioTag.TWO_THIN, 0.2), params)
    assert (physical.alpha, physical.beta) == pytest.approx((0.2, 0.2))
    assert (geometry.inner, geometry.outer) == pytest.approx((0.8, 1.2))


def test_total_variation_of_identical_runs_is_zero(params):
    summary = simulate_membrane_bm(params, ANNULI, 200, 0.01, 1e-3, seed=9)
    assert total_variation(summary, summary) == 0.0


def test_summary_write(tmp_path, params):
    summary = simulate_membrane_bm(params, ANNULI, 100, 0.01, 1e-3, seed=9)
    occupancy, histogram = summary.write(tmp_path, prefix="bm")
    assert occupancy.name == "bm_occupancy.csv"
    assert list(pd.read_csv(occupancy).columns) == ["t", "frac_upper", "frac_lower"]
    assert list(pd.read_csv(histogram).columns) == ["bin_phi", "side", "count"]


@pytest.mark.slow
def test_calibration_tracks_backward_equation(params):
    result = calibrate_crossing(params, ANNULI, n_particles=20_000, t_end=0.5, dt=1e-3, n_rad=33)
    assert 0.25 <= result.factor <= 4.0
    assert result.residual <= 0.02
    assert list(result.table.columns) == ["t", "frac_upper_pde", "frac_upper_mc"]


@pytest.mark.slow
def test_thin_members_approach_the_jump_diffusion(params):
    table = run_thin_layer_consistency(params, [0.4, 0.2, 0.1], n_particles=100_000, t=0.5, dt=2.5e-4)
    tv = table["total_variation"].to_numpy()
    assert tv[0] > tv[1] > tv[2]


def test_particles_expose_polar_view():
    batch = Particles(np.array([0.0, -1.2]), np.array([0.8, 0.0]), np.array([0, 1], dtype=np.int8), stream=3)
    np.testing.assert_allclose(batch.rho, [0.8, 1.2])
    np.testing.assert_allclose(batch.phi, [0.5 * np.pi, np.pi])
    second = batch.particle(1)
    assert second.side is Side.UPPER and second.stream == 3
    assert second.rho == pytest.approx(1.2)


def test_crossing_probabilities_scale_with_layer_diffusivity():
    params = TransmissionParams(alpha=0.5, beta=2.0, kappa=4.0)
    p_up, p_low = crossing_probabilities(params, 1e-4, calibration=1.5)
    assert p_up == pytest.approx(1.5 * 0.5 * np.sqrt(np.pi * 1e-4))
    assert p_low == pytest.approx(1.5 * 2.0 * np.sqrt(np.pi * 4.0 * 1e-4))
    # flux form kappa f' = beta' [jump] with beta' = beta kappa
    assert p_low == pytest.approx(1.5 * (2.0 * 4.0) * np.sqrt(np.pi * 1e-4 / 4.0))
