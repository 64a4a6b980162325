import dataclasses
import math

import numpy as np
import pytest

from chevronflow import (
    Grid,
    InitialProfile,
    PhysicalParams,
    build_initial_state,
    energy_breakdown,
    initial_energy_sweep,
    loglog_slope,
    validate,
)
from chevronflow.errors import RealizabilityViolated
from chevronflow.fields import d1
from chevronflow.initialdata import grid_for_wave_number, load_initial_state
from chevronflow.scenario import write_state_csv


def test_profile_normalization(preset):
    state = build_initial_state(preset, Grid.regular(1.0, 129))
    psi = state.psi.values
    mid = 64  # x = 0
    assert psi[mid] == pytest.approx(1.0 + 0.0j, abs=1e-14)
    assert np.max(np.abs(np.abs(psi) - 1.0)) <= 1e-14


def test_displacement_slope_endpoints(preset):
    profile = InitialProfile(preset)
    ends = profile.gprime(np.array([-preset.L, preset.L]))
    assert ends[0] == pytest.approx(preset.b, rel=1e-12)
    assert ends[1] == pytest.approx(-preset.b, rel=1e-12)
    assert profile.g(np.array([0.0]))[0] == 0.0


def test_antiderivative_consistency(preset):
    # numerical derivative of g matches gprime to 1e-10 (Richardson central)
    profile = InitialProfile(preset)
    xs = np.array([-0.8, -0.3, 0.05, 0.4, 0.9])
    for x in xs:
        slopes = []
        for eps in (1e-5, 5e-6):
            gp = (profile.g(np.array([x + eps]))[0] - profile.g(np.array([x - eps]))[0]) / (2 * eps)
            slopes.append(gp)
        richardson = (4 * slopes[1] - slopes[0]) / 3
        assert richardson == pytest.approx(profile.gprime(np.array([x]))[0], abs=1e-10)


def test_wall_layer_condition_second_order(preset):
    # discrete psi' conj(psi) at +L approaches i q b / sqrt(1+b^2) at O(h^2)
    p = validate(dataclasses.replace(preset, q=10.0))
    bs = math.sqrt(1.0 + p.b**2)
    target = 1j * p.q * p.b / bs
    errs = []
    for n in (65, 129, 257):
        state = build_initial_state(p, Grid.regular(1.0, n))
        dpsi = d1(state.psi.values, state.grid)  # one-sided, no pin information
        errs.append(abs(dpsi[-1] * np.conj(state.psi.values[-1]) - target))
    assert 3.0 < errs[0] / errs[1] < 5.0
    assert 3.0 < errs[1] / errs[2] < 5.0


def test_sampled_derivative_matches_analytic(preset):
    p = validate(dataclasses.replace(preset, q=10.0))
    profile = InitialProfile(p)
    errs = []
    for n in (65, 129):
        grid = Grid.regular(1.0, n)
        state = build_initial_state(p, grid)
        dpsi = d1(state.psi.values, grid, bc=state.psi.pins)
        errs.append(np.max(np.abs(dpsi - profile.psi0_prime(grid.nodes))))
    assert 3.0 < errs[0] / errs[1] < 5.0


def test_initial_energy_sweep_is_q_flat(preset):
    table = initial_energy_sweep(preset, [25.0, 50.0, 100.0, 200.0])
    slope = loglog_slope(table)
    assert abs(slope) <= 0.1


def test_sweep_grid_resolution_rule(preset):
    p = validate(dataclasses.replace(preset, q=200.0))
    grid = grid_for_wave_number(p)
    assert grid.h * p.q <= 0.25 + 1e-12


def test_no_mismatch_limit(preset):
    p = validate(dataclasses.replace(preset, b=0.0))
    state = build_initial_state(p, Grid.regular(1.0, 65))
    assert np.allclose(state.psi.values, 1.0, atol=1e-15)
    bd = energy_breakdown(state, p)
    assert bd.penalization <= 1e-15
    assert bd.total == pytest.approx(bd.perp_term + bd.electrostatic, abs=1e-12)


def test_sweep_entries_stable_under_refinement(preset):
    coarse = initial_energy_sweep(preset, [25.0, 50.0])
    fine = initial_energy_sweep(
        preset,
        [25.0, 50.0],
        grid_factory=lambda p: Grid.regular(p.L, 2 * grid_for_wave_number(p).n_nodes - 1),
    )
    for (q1, e1), (q2, e2) in zip(coarse, fine):
        assert abs(e1 - e2) <= 0.01 * abs(e1)


def test_realizability_propagates():
    bad = PhysicalParams(theta=math.radians(15.0), b=math.tan(math.radians(20.0)))
    with pytest.raises(RealizabilityViolated):
        build_initial_state(bad, Grid.regular(1.0, 33))


def test_state_csv_roundtrip(tmp_path, preset):
    state = build_initial_state(preset, Grid.regular(1.0, 65))
    path = tmp_path / "state.csv"
    write_state_csv(path, state)
    loaded = load_initial_state(path, preset)
    assert loaded.grid.same_as(state.grid)
    assert np.allclose(loaded.psi.values, state.psi.values, atol=1e-15)
    assert np.allclose(loaded.director.values, state.director.values, atol=1e-15)
    assert loaded.psi.pins.dvalue_hi == pytest.approx(state.psi.pins.dvalue_hi, rel=1e-12)
    assert loaded.psi.pins.dvalue_lo == pytest.approx(state.psi.pins.dvalue_lo, rel=1e-12)
