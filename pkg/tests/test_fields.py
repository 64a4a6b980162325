import numpy as np
import pytest

from chevronflow import BoundaryPins, DirectorField, Grid, d1, d2, d3, free_dof_mask, make_grid
from chevronflow.errors import GridTooCoarse
from chevronflow.fields import stencil_weights
from conftest import make_random_state


def test_make_grid_gate():
    with pytest.raises(GridTooCoarse):
        make_grid(1.0, 8)
    grid = make_grid(1.0, 17)
    assert grid.h == pytest.approx(0.125)
    assert grid.nodes[0] == -1.0 and grid.nodes[-1] == 1.0


def test_regular_grid_bypass_for_tests():
    tiny = Grid.regular(1.0, 3)
    assert list(tiny.nodes) == [-1.0, 0.0, 1.0]
    assert Grid.regular(2.0, 9).h == pytest.approx(0.5)


def test_stencil_weights_match_tables():
    # cross-check the generator against hand-checked literals
    assert stencil_weights([-1, 0, 1], 1) == pytest.approx([-0.5, 0.0, 0.5])
    assert stencil_weights([0, 1, 2], 1) == pytest.approx([-1.5, 2.0, -0.5])
    assert stencil_weights([0, 1, 2, 3], 2) == pytest.approx([2.0, -5.0, 4.0, -1.0])
    assert stencil_weights([-2, -1, 0, 1, 2], 3) == pytest.approx([-0.5, 1.0, 0.0, -1.0, 0.5])
    assert stencil_weights([-1, 0, 1, 2, 3], 3) == pytest.approx([-1.5, 5.0, -6.0, 3.0, -0.5])
    assert stencil_weights([0, 1, 2, 3, 4], 3) == pytest.approx([-2.5, 9.0, -12.0, 7.0, -1.5])


def test_d1_exact_on_linear():
    grid = Grid.regular(1.0, 21)
    out = d1(grid.nodes.copy(), grid)
    assert np.allclose(out, 1.0, atol=1e-12)


def test_d2_exact_on_quadratic():
    grid = Grid.regular(1.0, 21)
    out = d2(grid.nodes**2, grid)
    assert np.allclose(out, 2.0, atol=1e-11)


def test_d3_exact_on_cubic():
    # the 5-point stencils integrate cubics exactly, interior and ends
    grid = Grid.regular(1.0, 21)
    out = d3(grid.nodes**3, grid)
    assert np.allclose(out[2:-2], 6.0, atol=1e-9)
    assert np.allclose(out, 6.0, atol=1e-8)


def test_ghost_derivative_matches_pin_exactly():
    grid = Grid.regular(1.0, 33)
    k = 3.0
    psi = np.exp(1j * k * grid.nodes)
    pins = BoundaryPins(
        value_lo=complex(psi[0]),
        value_hi=complex(psi[-1]),
        dvalue_lo=complex(1j * k * psi[0]),
        dvalue_hi=complex(1j * k * psi[-1]),
    )
    dp = d1(psi, grid, bc=pins)
    # at the walls the ghost construction reproduces the pinned value exactly
    assert dp[0] == pytest.approx(pins.dvalue_lo, rel=1e-14)
    assert dp[-1] == pytest.approx(pins.dvalue_hi, rel=1e-14)


def test_operators_are_linear():
    rng = np.random.default_rng(3)
    grid = Grid.regular(1.0, 25)
    f = rng.normal(size=25) + 1j * rng.normal(size=25)
    g = rng.normal(size=25) + 1j * rng.normal(size=25)
    a, b = 2.5, -1.25
    for op in (d1, d2, d3):
        lhs = op(a * f + b * g, grid)
        rhs = a * op(f, grid) + b * op(g, grid)
        assert np.allclose(lhs, rhs, atol=1e-10)


def test_interior_convergence_is_second_order():
    errs = {}
    for n in (33, 65, 129):
        grid = Grid.regular(1.0, n)
        x = grid.nodes
        e1 = np.max(np.abs(d1(np.sin(x), grid)[4:-4] - np.cos(x)[4:-4]))
        e2 = np.max(np.abs(d2(np.sin(x), grid)[4:-4] + np.sin(x)[4:-4]))
        errs[n] = (e1, e2)
    for idx in range(2):
        r1 = errs[33][idx] / errs[65][idx]
        r2 = errs[65][idx] / errs[129][idx]
        assert 3.0 < r1 < 5.0
        assert 3.0 < r2 < 5.0


def test_renormalize_idempotent():
    rng = np.random.default_rng(11)
    field = DirectorField(rng.normal(size=(40, 3)))
    once = field.renormalized()
    twice = once.renormalized()
    assert once.unit_error() <= 1e-15
    assert np.allclose(once.values, twice.values, atol=1e-15)


def test_free_dof_mask_counts():
    rng = np.random.default_rng(5)
    state = make_random_state(17, rng)
    mask = free_dof_mask(state)
    assert mask.n_free_director_nodes == 17
    assert mask.n_free_psi_nodes == 15


def test_mask_zeroes_fixed_entries():
    rng = np.random.default_rng(6)
    state = make_random_state(17, rng)
    mask = free_dof_mask(state)
    g = rng.normal(size=17) + 1j * rng.normal(size=17)
    masked = mask.mask_psi(g)
    assert masked[0] == 0 and masked[-1] == 0
    assert np.array_equal(masked[1:-1], g[1:-1])


def test_pack_unpack_roundtrip():
    rng = np.random.default_rng(7)
    state = make_random_state(17, rng)
    mask = free_dof_mask(state)
    dn = rng.normal(size=(17, 3))
    dpsi = rng.normal(size=17) + 1j * rng.normal(size=17)
    dpsi_masked = mask.mask_psi(dpsi)
    dn2, dpsi2 = mask.unpack(mask.pack(dn, dpsi_masked))
    assert np.array_equal(dn2, dn)
    assert np.array_equal(dpsi2, dpsi_masked)
