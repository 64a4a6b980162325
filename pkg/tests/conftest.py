import numpy as np
import pytest

from chevronflow import (
    BoundaryPins,
    DirectorField,
    Grid,
    OrderParameter,
    PhysicalParams,
    State,
    validate,
)


@pytest.fixture
def preset():
    return validate(PhysicalParams())


def make_random_state(n_nodes: int, rng: np.random.Generator, L: float = 1.0) -> State:
    """A generic admissible-shaped state with random fields and random pins."""
    grid = Grid.regular(L, n_nodes)
    director = rng.normal(size=(n_nodes, 3))
    director /= np.linalg.norm(director, axis=1, keepdims=True)
    modulus = 1.0 + 0.3 * rng.normal(size=n_nodes)
    phase = rng.uniform(-np.pi, np.pi, size=n_nodes)
    psi = modulus * np.exp(1j * phase)
    pins = BoundaryPins(
        value_lo=complex(psi[0]),
        value_hi=complex(psi[-1]),
        dvalue_lo=complex(rng.normal() + 1j * rng.normal()),
        dvalue_hi=complex(rng.normal() + 1j * rng.normal()),
    )
    return State(
        grid=grid,
        director=DirectorField(director),
        psi=OrderParameter(values=psi, pins=pins),
    )


def make_zero_psi_state(n_nodes: int, L: float = 1.0) -> State:
    """Constant director, psi identically zero, zero pins (wall-violating test state)."""
    grid = Grid.regular(L, n_nodes)
    director = np.tile([1.0, 0.0, 0.0], (n_nodes, 1))
    pins = BoundaryPins(0j, 0j, 0j, 0j)
    return State(
        grid=grid,
        director=DirectorField(director),
        psi=OrderParameter(values=np.zeros(n_nodes, dtype=complex), pins=pins),
    )


def rotate_state(state: State, alpha: float) -> State:
    """Global phase rotation of the order parameter, pins included."""
    phase = complex(np.exp(1j * alpha))
    return State(
        grid=state.grid,
        director=state.director,
        psi=OrderParameter(
            values=state.psi.values * phase, pins=state.psi.pins.rotated(phase)
        ),
        t=state.t,
    )


def random_tangent_perturbation(state: State, rng: np.random.Generator):
    """Unit-norm masked perturbation (tangent director part, free psi part)."""
    n = state.grid.n_nodes
    w = state.grid.trapezoid_weights
    dn = rng.normal(size=(n, 3))
    nvals = state.director.values
    dn -= np.sum(dn * nvals, axis=1, keepdims=True) * nvals
    dpsi = rng.normal(size=n) + 1j * rng.normal(size=n)
    dpsi[0] = dpsi[-1] = 0.0
    norm = np.sqrt(
        float(w @ np.sum(dn * dn, axis=1)) + float(w @ (dpsi * dpsi.conj()).real)
    )
    return dn / norm, dpsi / norm
