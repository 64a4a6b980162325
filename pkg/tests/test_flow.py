import dataclasses
import math

import numpy as np
import pytest

from chevronflow import (
    FlowConfig,
    Grid,
    PhysicalParams,
    build_initial_state,
    check_ledger_csv,
    inner_minimize,
    minimize_energy,
    rothe_step,
    run_flow,
    total_energy,
    validate,
)
from chevronflow.errors import LineSearchStalled
from chevronflow.flow import RotheObjective
from chevronflow.variation import project_tangent, raw_gradient
from conftest import make_random_state


class MovementOnlyObjective:
    """The step objective with the energy replaced by zero."""

    def __init__(self, prev, tau):
        self.prev = prev
        self.tau = tau
        self.natural_step = tau
        self._w = prev.grid.trapezoid_weights

    def value(self, state):
        w = self._w
        dn = state.director.values - self.prev.director.values
        dpsi = state.psi.values - self.prev.psi.values
        return float(w @ np.sum(dn * dn, axis=1)) / (2 * self.tau) + float(
            w @ (dpsi * dpsi.conj()).real
        ) / (2 * self.tau)

    def gradient_arrays(self, state):
        w = self._w
        r_n = (w[:, None] / self.tau) * (state.director.values - self.prev.director.values)
        a_psi = (w / (2 * self.tau)) * (state.psi.values - self.prev.psi.values)
        return r_n, a_psi

    def make_preconditioner(self, state):
        return None


class SingleDofObjective:
    """Convex 1-DOF surrogate: (Re psi[mid] - 0.25)^2."""

    natural_step = 1.0

    def __init__(self, mid):
        self.mid = mid

    def value(self, state):
        return float((state.psi.values[self.mid].real - 0.25) ** 2)

    def gradient_arrays(self, state):
        n = state.grid.n_nodes
        r_n = np.zeros((n, 3))
        a_psi = np.zeros(n, dtype=complex)
        # dE = 2 Re <a, dpsi> and dE/dRe = 2 (x - 0.25), so Re a = x - 0.25
        a_psi[self.mid] = complex(state.psi.values[self.mid].real - 0.25, 0.0)
        return r_n, a_psi

    def make_preconditioner(self, state):
        return None


class LyingObjective:
    """Reports a large gradient but admits no descent anywhere."""

    natural_step = 1.0

    def __init__(self, start):
        self.start = start

    def value(self, state):
        return 0.0 if state is self.start else 1.0

    def gradient_arrays(self, state):
        n = state.grid.n_nodes
        w = state.grid.trapezoid_weights
        a_psi = np.zeros(n, dtype=complex)
        a_psi[1:-1] = 1.0 * w[1:-1]
        return np.zeros((n, 3)), a_psi

    def make_preconditioner(self, state):
        return None


@pytest.fixture
def small_cfg():
    return FlowConfig(tau=2.0**-10, T=2.0**-11, n_steps=1, inner_tol=1e-9,
                      inner_max_iters=400, n_nodes=33)


def test_movement_only_returns_prev_in_one_step(preset, small_cfg):
    rng = np.random.default_rng(20)
    prev = make_random_state(16, rng)
    start = prev.with_fields(
        psi_values=prev.psi.values
        + 0.1 * (rng.normal(size=16) + 1j * rng.normal(size=16))
        * np.concatenate(([0.0], np.ones(14), [0.0])),
    )
    objective = MovementOnlyObjective(prev, tau=2.0**-10)
    result = inner_minimize(objective, start, small_cfg)
    # tau a power of two: the unit step along -(psi - prev)/tau lands exactly
    assert result.accepted == 1
    assert np.array_equal(result.state.psi.values, prev.psi.values)
    assert result.converged


def test_single_dof_surrogate_converges(preset):
    rng = np.random.default_rng(21)
    start = make_random_state(17, rng)
    cfg = FlowConfig(tau=1e-3, T=5e-4, n_steps=1, inner_tol=1e-10,
                     inner_max_iters=200, n_nodes=17)
    result = inner_minimize(SingleDofObjective(mid=8), start, cfg)
    assert abs(result.state.psi.values[8].real - 0.25) <= 1e-8


def test_inner_j_history_strictly_decreasing(preset):
    grid = Grid.regular(1.0, 33)
    prev = build_initial_state(preset, grid)
    cfg = FlowConfig(tau=1e-3, T=5e-4, n_steps=1, inner_tol=1e-12,
                     inner_max_iters=60, n_nodes=33)
    objective = RotheObjective(prev, cfg.tau, preset)
    result = inner_minimize(objective, prev, cfg)
    js = result.j_history
    assert len(js) >= 2
    assert all(b < a for a, b in zip(js, js[1:]))


def test_rothe_step_dissipates_from_random_state(preset):
    rng = np.random.default_rng(22)
    cfg = FlowConfig(tau=1e-3, T=5e-4, n_steps=1, inner_tol=1e-7,
                     inner_max_iters=200, n_nodes=16)
    for _ in range(3):
        prev = make_random_state(16, rng)
        nxt, stats = rothe_step(prev, cfg.tau, preset, cfg)
        assert stats.dissipation_residual >= -1e-10 * abs(stats.energy_before)
        assert stats.energy_after <= stats.energy_before + 1e-12 * abs(stats.energy_before)
        assert nxt.director.unit_error() <= 1e-12
        assert nxt.psi.values[0] == prev.psi.values[0]
        assert nxt.psi.values[-1] == prev.psi.values[-1]


def test_toy_step_matches_descent_oracle(preset):
    """Fixed-step projected descent agrees with the inner solve at N=8."""
    rng = np.random.default_rng(23)
    prev = make_random_state(8, rng)
    tau = 1e-3
    cfg = FlowConfig(tau=tau, T=tau / 2, n_steps=1, inner_tol=1e-10,
                     inner_max_iters=2000, n_nodes=16)
    nxt, stats = rothe_step(prev, tau, preset, cfg)

    objective = RotheObjective(prev, tau, preset, precondition=False)
    state = prev
    w = prev.grid.trapezoid_weights
    alpha = 2e-4
    for _ in range(200_000):
        r_n, a_psi = objective.gradient_arrays(state)
        gn = project_tangent(r_n / w[:, None], state.director.values)
        gpsi = 2.0 * a_psi / w
        gpsi[0] = gpsi[-1] = 0.0
        sq = float(w @ np.sum(gn * gn, axis=1)) + float(w @ (gpsi * gpsi.conj()).real)
        if math.sqrt(sq) < 1e-7:
            break
        from chevronflow import DirectorField

        state = state.with_fields(
            director=DirectorField(state.director.values - alpha * gn).renormalized(),
            psi_values=state.psi.values - alpha * gpsi,
        )
    oracle_energy_after = total_energy(state, preset)
    assert stats.energy_after == pytest.approx(oracle_energy_after, abs=1e-8)


def test_equilibrium_start_produces_no_motion(preset):
    grid = Grid.regular(1.0, 33)
    state = build_initial_state(preset, grid)
    cfg = FlowConfig(tau=1e-3, T=3e-3, n_steps=4, inner_tol=5e-9,
                     inner_max_iters=3000, n_nodes=33)
    relaxed = minimize_energy(state, preset, cfg).state
    result = run_flow(relaxed, preset, cfg)
    for stats in result.ledger.steps:
        assert stats.movement_n + stats.movement_psi <= 1e-12
        assert abs(stats.energy_after - stats.energy_before) <= 1e-12 * abs(
            stats.energy_before
        )


def test_flow_ledger_valid_and_deterministic(preset):
    grid = Grid.regular(1.0, 65)
    state = build_initial_state(preset, grid)
    cfg = FlowConfig(tau=1e-3, T=0.02, n_steps=21, inner_tol=1e-8,
                     inner_max_iters=200, n_nodes=65)
    res1 = run_flow(state, preset, cfg)
    res2 = run_flow(state, preset, cfg)
    assert res1.ledger.check() == []
    rows1 = [s.csv_row(cfg.tau) for s in res1.ledger.steps]
    rows2 = [s.csv_row(cfg.tau) for s in res2.ledger.steps]
    assert rows1 == rows2  # bit-identical ledgers
    assert np.array_equal(res1.final_state.psi.values, res2.final_state.psi.values)


def test_ledger_csv_roundtrip(tmp_path, preset):
    grid = Grid.regular(1.0, 33)
    state = build_initial_state(preset, grid)
    cfg = FlowConfig(tau=1e-3, T=5e-3, n_steps=6, inner_tol=1e-8,
                     inner_max_iters=150, n_nodes=33)
    result = run_flow(state, preset, cfg)
    path = tmp_path / "ledger.csv"
    result.ledger.write_csv(path)
    ok, problems = check_ledger_csv(path)
    assert ok, problems


def test_line_search_stalled_raises_with_state(preset):
    rng = np.random.default_rng(24)
    start = make_random_state(16, rng)
    cfg = FlowConfig(tau=1e-3, T=5e-4, n_steps=1, inner_tol=1e-10,
                     inner_max_iters=50, n_nodes=16)
    with pytest.raises(LineSearchStalled) as exc:
        inner_minimize(LyingObjective(start), start, cfg)
    assert exc.value.state is start


def test_flow_attaches_partial_ledger_on_failure(preset, monkeypatch):
    import chevronflow.flow as flow_mod

    grid = Grid.regular(1.0, 33)
    state = build_initial_state(preset, grid)
    cfg = FlowConfig(tau=1e-3, T=4e-3, n_steps=5, inner_tol=1e-8,
                     inner_max_iters=150, n_nodes=33)
    real_step = flow_mod.rothe_step
    calls = {"n": 0}

    def flaky(prev, tau, params, flow_cfg):
        calls["n"] += 1
        if calls["n"] == 3:
            raise LineSearchStalled("rigged", state=prev)
        return real_step(prev, tau, params, flow_cfg)

    monkeypatch.setattr(flow_mod, "rothe_step", flaky)
    with pytest.raises(LineSearchStalled) as exc:
        flow_mod.run_flow(state, preset, cfg)
    assert len(exc.value.partial_ledger.steps) == 2


def test_unpreconditioned_path_descends(preset):
    grid = Grid.regular(1.0, 33)
    state = build_initial_state(preset, grid)
    cfg = FlowConfig(tau=1e-3, T=1e-3, n_steps=2, inner_tol=1e-8,
                     inner_max_iters=80, n_nodes=33, precondition=False)
    result = run_flow(state, preset, cfg)
    assert result.ledger.check() == []
    assert result.ledger.steps[0].energy_after < result.ledger.f_initial
