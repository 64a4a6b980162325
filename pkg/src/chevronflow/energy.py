"""Total free energy of the discrete state and its per-term breakdown.

The density couples the director n and the complex order parameter psi
through three elastic blocks (each the squared modulus of an expression
linear in psi and its derivatives), a penalization of the layering amplitude
|psi|^2, a small third-derivative regularizer, the one-constant director
elasticity, and the polarization-field coupling.  The derivative of nodal
products like ``[(...) n2]'`` is taken by sampling the inner expression at
the nodes and applying the one-sided first-derivative operator, so the
discrete energy is an exact function of the nodal values and its gradient is
well defined.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import ClassVar

import numpy as np

from .errors import NonFiniteEnergy
from .fields import GridOperators, State, extend_with_ghosts, grid_operators
from .params import PhysicalParams


@dataclass(frozen=True)
class EnergyBreakdown:
    """Per-term energies; every term except the field coupling is >= 0."""

    perp_term: float
    par_term: float
    cpar_term: float
    penalization: float
    regularizer: float
    nematic: float
    electrostatic: float
    total: float

    CSV_HEADER: ClassVar[str] = "t,perp,par,cpar,penal,reg,nematic,electro,total"

    def csv_row(self, t: float) -> str:
        vals = (
            self.perp_term, self.par_term, self.cpar_term, self.penalization,
            self.regularizer, self.nematic, self.electrostatic, self.total,
        )
        return ",".join([f"{t:.12g}"] + [f"{v:.17g}" for v in vals])


@dataclass
class Forward:
    """Nodal fields shared by the energy evaluation and the gradient assembly."""

    ops: GridOperators
    psi_ext: np.ndarray
    p: np.ndarray
    p1: np.ndarray
    p2: np.ndarray
    p3: np.ndarray
    u: np.ndarray
    u1: np.ndarray
    u2: np.ndarray
    u3: np.ndarray
    n1: np.ndarray
    n2: np.ndarray
    n3: np.ndarray
    dn1: np.ndarray
    dn2: np.ndarray
    dn3: np.ndarray
    inner_perp: np.ndarray
    inner_par: np.ndarray
    w_perp: np.ndarray
    w_par: np.ndarray
    dw_perp: np.ndarray
    dw_par: np.ndarray
    s_par: np.ndarray
    core_par: np.ndarray
    b_perp: np.ndarray
    b_par: np.ndarray


def forward_fields(state: State, params: PhysicalParams) -> Forward:
    """Evaluate every intermediate nodal field entering the energy."""
    with np.errstate(invalid="ignore", over="ignore"):
        return _forward_fields(state, params)


def _forward_fields(state: State, params: PhysicalParams) -> Forward:
    grid = state.grid
    ops = grid_operators(grid)
    p = state.psi.values
    psi_ext = extend_with_ghosts(p, grid, state.psi.pins)
    p1 = ops.d1g @ psi_ext
    p2 = ops.d2g @ psi_ext
    p3 = ops.d3g @ psi_ext
    u = (p * p.conj()).real
    u1 = ops.d1n @ u
    u2 = ops.d2n @ u
    u3 = ops.d3n @ u

    n = state.director.values
    n1, n2, n3 = n[:, 0], n[:, 1], n[:, 2]
    dn1 = ops.d1n @ n1
    dn2 = ops.d1n @ n2
    dn3 = ops.d1n @ n3

    q = params.q
    bs = math.sqrt(1.0 + params.b * params.b)
    ct = math.cos(params.theta)
    qb2 = q / (1.0 + params.b * params.b)

    inner_perp = (1j / bs) * n1 * p + (n2 / q) * p1
    inner_par = inner_perp - 1j * ct * p
    w_perp = inner_perp * n2
    w_par = inner_par * n2
    dw_perp = ops.d1n @ w_perp
    dw_par = ops.d1n @ w_par
    s_par = n1 / bs - ct
    core_par = (-(q / bs) * n1 + q * ct) * p + (1j * n2) * p1

    b_perp = (
        p2 / q
        - dw_perp
        - qb2 * p
        + qb2 * (n1 * n1) * p
        - (1j / bs) * (n1 * n2) * p1
        + (params.c_perp * q / (2.0 * params.a_perp)) * p
    )
    b_par = s_par * core_par + dw_par

    return Forward(
        ops=ops, psi_ext=psi_ext, p=p, p1=p1, p2=p2, p3=p3,
        u=u, u1=u1, u2=u2, u3=u3,
        n1=n1, n2=n2, n3=n3, dn1=dn1, dn2=dn2, dn3=dn3,
        inner_perp=inner_perp, inner_par=inner_par,
        w_perp=w_perp, w_par=w_par, dw_perp=dw_perp, dw_par=dw_par,
        s_par=s_par, core_par=core_par, b_perp=b_perp, b_par=b_par,
    )


def _abs2(z: np.ndarray) -> np.ndarray:
    return (z * z.conj()).real


def breakdown_from_forward(f: Forward, params: PhysicalParams) -> EnergyBreakdown:
    with np.errstate(invalid="ignore", over="ignore"):
        return _breakdown_from_forward(f, params)


def _breakdown_from_forward(f: Forward, params: PhysicalParams) -> EnergyBreakdown:
    w = f.ops.w
    q = params.q
    bs = math.sqrt(1.0 + params.b * params.b)

    perp = (params.a_perp / q) * float(w @ _abs2(f.b_perp))
    par = (params.a_par / q) * float(w @ _abs2(f.b_par))
    cpar = q * params.c_par * float(w @ _abs2(f.inner_par))
    penal = float(
        w @ (
            params.g_coef * (f.u - 1.0) ** 2
            + f.u1**2
            + f.u2**2 / q**2
            + f.u3**2 / q**6
        )
    )
    reg = (params.rho / q**6) * float(w @ _abs2(f.p3))
    nematic = 0.5 * params.K * float(w @ (f.dn1**2 + f.dn2**2 + f.dn3**2))
    electro = (params.P_pol * params.E_field / bs) * float(w @ (f.u * f.n3))
    total = perp + par + cpar + penal + reg + nematic + electro
    if not math.isfinite(total):
        raise NonFiniteEnergy(
            f"non-finite energy: perp={perp}, par={par}, cpar={cpar}, "
            f"penal={penal}, reg={reg}, nematic={nematic}, electro={electro}"
        )
    return EnergyBreakdown(
        perp_term=perp, par_term=par, cpar_term=cpar, penalization=penal,
        regularizer=reg, nematic=nematic, electrostatic=electro, total=total,
    )


def energy_breakdown(state: State, params: PhysicalParams) -> EnergyBreakdown:
    """Per-term free energy of a state (trapezoid quadrature over the grid)."""
    return breakdown_from_forward(forward_fields(state, params), params)


def total_energy(state: State, params: PhysicalParams) -> float:
    return energy_breakdown(state, params).total
