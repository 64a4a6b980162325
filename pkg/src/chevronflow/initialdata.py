"""Well-prepared initial configurations and the wall profile they pin.

The built-in profile is a chevron with layer displacement
``g(x) = -b ln(cosh(q x)) / (q tanh(q L))`` (so ``g'(x) = -b tanh(q x) / tanh(q L)``),
a constant director on the tilt cone, and a pure-phase order parameter
``psi0(x) = exp(-i q g(x) / sqrt(1 + b^2))``.  Its energy stays bounded as the
wave number grows, which makes it a good starting point for the flow.  The
antiderivative constant is fixed by ``g(0) = 0``; by gauge invariance of the
energy this choice is harmless.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

from .energy import total_energy
from .fields import (
    BoundaryPins,
    DirectorField,
    Grid,
    OrderParameter,
    State,
)
from .params import PhysicalParams, validate


def _log_cosh(z: np.ndarray) -> np.ndarray:
    # overflow-safe: ln cosh z = |z| + ln(1 + e^{-2|z|}) - ln 2
    az = np.abs(z)
    return az + np.log1p(np.exp(-2.0 * az)) - math.log(2.0)


@dataclass(frozen=True)
class InitialProfile:
    """Closed-form layer displacement, its slope, the director, and psi0."""

    params: PhysicalParams

    def g(self, x: np.ndarray) -> np.ndarray:
        p = self.params
        return -p.b * _log_cosh(p.q * np.asarray(x)) / (p.q * math.tanh(p.q * p.L))

    def gprime(self, x: np.ndarray) -> np.ndarray:
        p = self.params
        return -p.b * np.tanh(p.q * np.asarray(x)) / math.tanh(p.q * p.L)

    def director0(self) -> np.ndarray:
        p = self.params
        bs = math.sqrt(1.0 + p.b * p.b)
        ct = math.cos(p.theta)
        n1 = ct * bs
        n3 = math.sqrt(max(0.0, 1.0 - ct * ct * (1.0 + p.b * p.b)))
        return np.array([n1, 0.0, n3])

    def psi0(self, x: np.ndarray) -> np.ndarray:
        p = self.params
        bs = math.sqrt(1.0 + p.b * p.b)
        return np.exp(-1j * p.q * self.g(x) / bs)

    def psi0_prime(self, x: np.ndarray) -> np.ndarray:
        p = self.params
        bs = math.sqrt(1.0 + p.b * p.b)
        return -1j * (p.q / bs) * self.gprime(x) * self.psi0(x)

    def boundary_pins(self, grid: Grid) -> BoundaryPins:
        lo, hi = -grid.L, grid.L
        return BoundaryPins(
            value_lo=complex(self.psi0(np.array([lo]))[0]),
            value_hi=complex(self.psi0(np.array([hi]))[0]),
            dvalue_lo=complex(self.psi0_prime(np.array([lo]))[0]),
            dvalue_hi=complex(self.psi0_prime(np.array([hi]))[0]),
        )


def build_initial_state(params: PhysicalParams, grid: Grid) -> State:
    """Sample the built-in profile on the grid, recording the wall pins."""
    params = validate(params)
    profile = InitialProfile(params)
    n0 = profile.director0()
    director = DirectorField(np.tile(n0, (grid.n_nodes, 1)))
    psi_values = profile.psi0(grid.nodes)
    psi = OrderParameter(values=psi_values, pins=profile.boundary_pins(grid))
    return State(grid=grid, director=director, psi=psi, t=0.0)


def grid_for_wave_number(
    params: PhysicalParams, min_nodes: int = 33, hq_max: float = 0.25
) -> Grid:
    """A grid fine enough that ``h * q <= hq_max`` (at least ``min_nodes``)."""
    n_needed = int(math.ceil(2.0 * params.L * params.q / hq_max)) + 1
    return Grid.regular(params.L, max(min_nodes, n_needed))


def initial_energy_sweep(
    params_base: PhysicalParams,
    q_list: Sequence[float],
    grid_factory: Callable[[PhysicalParams], Grid] | None = None,
) -> list[tuple[float, float]]:
    """Initial-state total energy per wave number, on grids with h q <= 1/4."""
    from dataclasses import replace

    factory = grid_factory or grid_for_wave_number
    table = []
    for q in q_list:
        p = validate(replace(params_base, q=float(q)))
        grid = factory(p)
        state = build_initial_state(p, grid)
        table.append((float(q), total_energy(state, p)))
    return table


def loglog_slope(table: Iterable[tuple[float, float]]) -> float | None:
    """Least-squares slope of log(value) against log(key); None if degenerate."""
    pts = [(x, y) for x, y in table if x > 0 and y > 0]
    if len(pts) < 2:
        return None
    lx = np.log([x for x, _ in pts])
    ly = np.log([y for _, y in pts])
    return float(np.polyfit(lx, ly, 1)[0])


def load_initial_state(path, params: PhysicalParams) -> State:
    """Read a field snapshot CSV as initial data.

    Expects the snapshot column layout ``x,n1,n2,n3,re_psi,im_psi,abs_psi``.
    The wall pins are reconstructed from the admissibility conditions:
    endpoint values are taken from the file (their modulus must be 1) and the
    wall derivatives are ``-+ i q b / sqrt(1+b^2)`` times those values.
    """
    from .errors import ValidationError

    params = validate(params)
    raw = np.genfromtxt(path, delimiter=",", names=True)
    if raw.shape == ():  # single row
        raise ValidationError("initial_state", f"{path}: need at least 3 rows")
    x = raw["x"]
    spacings = np.diff(x)
    if np.any(spacings <= 0) or np.max(np.abs(spacings - spacings[0])) > 1e-9 * abs(
        spacings[0]
    ):
        raise ValidationError("initial_state", f"{path}: grid must be uniform")
    grid = Grid.regular(L=float(abs(x[-1])), n_nodes=len(x))
    if abs(x[0] + grid.L) > 1e-9 or abs(x[-1] - grid.L) > 1e-9:
        raise ValidationError("initial_state", f"{path}: domain must be [-L, L]")
    director = DirectorField(
        np.stack([raw["n1"], raw["n2"], raw["n3"]], axis=1)
    ).renormalized()
    psi = raw["re_psi"] + 1j * raw["im_psi"]
    for idx, side in ((0, "left"), (-1, "right")):
        if abs(abs(psi[idx]) - 1.0) > 1e-6:
            raise ValidationError(
                "initial_state",
                f"{path}: |psi| at the {side} wall must be 1, got {abs(psi[idx]):.6f}",
            )
    bs = math.sqrt(1.0 + params.b * params.b)
    coef = 1j * params.q * params.b / bs
    pins = BoundaryPins(
        value_lo=complex(psi[0]),
        value_hi=complex(psi[-1]),
        dvalue_lo=complex(-coef * psi[0]),
        dvalue_hi=complex(coef * psi[-1]),
    )
    return State(grid=grid, director=director, psi=OrderParameter(psi, pins), t=0.0)
