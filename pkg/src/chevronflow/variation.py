"""Exact first variation of the discrete energy.

The gradient is the derivative of the discrete energy as implemented in
:mod:`chevronflow.energy` (differentiate-the-discretization), assembled by
reverse accumulation through the same intermediate fields.  Director
components are projected onto the tangent space of the per-node unit sphere;
order-parameter components use the convention that an energy change under a
perturbation ``dpsi`` is ``2 Re <d_psi, dpsi>_h`` with the weighted inner
product ``<u, v>_h = sum_j w_j conj(u_j) v_j``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .energy import Forward, forward_fields
from .errors import NonFiniteGradient
from .fields import State, free_dof_mask
from .params import PhysicalParams


@dataclass(frozen=True)
class GradientPair:
    """Per-node gradient directions: tangent 3-vectors and masked complex values."""

    d_director: np.ndarray  # (N, 3), tangent to the sphere at n
    d_psi: np.ndarray       # (N,), complex, zero at pinned boundary nodes


@dataclass(frozen=True)
class ElResidualNorms:
    """Weighted L2 norms of the discrete flow-equation residuals."""

    n1: float
    n2: float
    n3: float
    psi: float

    @property
    def total(self) -> float:
        return math.sqrt(self.n1**2 + self.n2**2 + self.n3**2 + self.psi**2)


def project_tangent(vector_field: np.ndarray, director: np.ndarray) -> np.ndarray:
    """Remove the radial component: v - (v . n) n nodewise."""
    radial = np.sum(vector_field * director, axis=1, keepdims=True)
    return vector_field - radial * director


def raw_gradient(
    state: State, params: PhysicalParams, f: Forward | None = None
) -> tuple[np.ndarray, np.ndarray]:
    """Unweighted partial derivatives of the discrete energy.

    Returns ``(r_n, a_psi)`` with ``dE = sum r_n . dn + 2 Re sum conj(a_psi) dpsi``
    over all nodes (boundary psi nodes included; masking is the caller's job).
    """
    if f is None:
        f = forward_fields(state, params)
    ops = f.ops
    w = ops.w
    q = params.q
    bs = math.sqrt(1.0 + params.b * params.b)
    ct = math.cos(params.theta)
    qb2 = q / (1.0 + params.b * params.b)
    pe = params.P_pol * params.E_field / bs

    n1, n2 = f.n1, f.n2
    p, p1 = f.p, f.p1

    # adjoint seeds of the squared-modulus blocks
    a_b_perp = (params.a_perp / q) * w * f.b_perp
    a_b_par = (params.a_par / q) * w * f.b_par
    a_inner_par = q * params.c_par * w * f.inner_par
    a_p3 = (params.rho / q**6) * w * f.p3

    # penalization and field coupling act through u = |psi|^2
    r_u = w * (2.0 * params.g_coef * (f.u - 1.0)) + pe * w * f.n3
    r_u += ops.d1n_t @ (2.0 * w * f.u1)
    r_u += ops.d2n_t @ ((2.0 / q**2) * w * f.u2)
    r_u += ops.d3n_t @ ((2.0 / q**6) * w * f.u3)

    r_n1 = np.zeros_like(f.n1)
    r_n2 = np.zeros_like(f.n2)
    r_n3 = pe * w * f.u
    r_n1 += ops.d1n_t @ (params.K * w * f.dn1)
    r_n2 += ops.d1n_t @ (params.K * w * f.dn2)
    r_n3 += ops.d1n_t @ (params.K * w * f.dn3)

    a_p = np.zeros_like(p)
    a_p1 = np.zeros_like(p)
    a_p2 = a_b_perp / q

    # perpendicular block
    cq2a = params.c_perp * q / (2.0 * params.a_perp)
    a_w_perp = -(ops.d1n_t @ a_b_perp)
    a_p += (-qb2 + qb2 * n1 * n1 + cq2a) * a_b_perp
    a_p1 += (1j / bs) * (n1 * n2) * a_b_perp
    r_n1 += 2.0 * np.real(
        np.conj(a_b_perp) * (2.0 * qb2 * n1 * p - (1j / bs) * n2 * p1)
    )
    r_n2 += 2.0 * np.real(np.conj(a_b_perp) * (-(1j / bs) * n1 * p1))

    # parallel block
    a_core = f.s_par * a_b_par
    r_n1 += (1.0 / bs) * 2.0 * np.real(np.conj(a_b_par) * f.core_par)
    a_w_par = ops.d1n_t @ a_b_par
    a_p += (-(q / bs) * n1 + q * ct) * a_core
    a_p1 += -1j * n2 * a_core
    r_n1 += 2.0 * np.real(np.conj(a_core) * (-(q / bs) * p))
    r_n2 += 2.0 * np.real(np.conj(a_core) * (1j * p1))

    # shared inner expressions (the c-parallel block seeds inner_par directly)
    a_inner_par = a_inner_par + n2 * a_w_par
    r_n2 += 2.0 * np.real(np.conj(a_w_par) * f.inner_par)
    a_inner_perp = n2 * a_w_perp + a_inner_par
    r_n2 += 2.0 * np.real(np.conj(a_w_perp) * f.inner_perp)
    a_p += 1j * ct * a_inner_par

    a_p += -(1j / bs) * n1 * a_inner_perp
    a_p1 += (n2 / q) * a_inner_perp
    r_n1 += 2.0 * np.real(np.conj(a_inner_perp) * (1j / bs) * p)
    r_n2 += 2.0 * np.real(np.conj(a_inner_perp) * (p1 / q))

    # |psi|^2 chain rule
    a_p += r_u * p

    # collapse the derivative chain onto the nodal psi values
    a_ext = ops.sel_t @ a_p
    a_ext += ops.d1g_t @ a_p1
    a_ext += ops.d2g_t @ a_p2
    a_ext += ops.d3g_t @ a_p3
    a_psi = a_ext[1:-1].copy()
    a_psi[1] += a_ext[0]      # ghost_lo depends on psi[1]
    a_psi[-2] += a_ext[-1]    # ghost_hi depends on psi[-2]

    r_n = np.stack([r_n1, r_n2, r_n3], axis=1)
    return r_n, a_psi


def gradient(state: State, params: PhysicalParams) -> GradientPair:
    """Tangent-projected, boundary-masked gradient of the discrete energy."""
    r_n, a_psi = raw_gradient(state, params)
    if not (np.all(np.isfinite(r_n)) and np.all(np.isfinite(a_psi.view(float)))):
        raise NonFiniteGradient("gradient assembly produced non-finite values")
    w = state.grid.trapezoid_weights
    d_director = project_tangent(r_n / w[:, None], state.director.values)
    d_psi = a_psi / w
    mask = free_dof_mask(state)
    d_psi = mask.mask_psi(d_psi)
    return GradientPair(d_director=d_director, d_psi=d_psi)


def el_residual(
    state_prev: State, state: State, tau: float, params: PhysicalParams
) -> ElResidualNorms:
    """Residual norms of the discrete flow equations at ``state``.

    Combines the time quotient against ``state_prev`` with the energy
    gradient; at an exact inner minimizer of the implicit step these vanish
    to the solver tolerance.
    """
    if not state_prev.grid.same_as(state.grid):
        from .errors import MismatchedGrids

        raise MismatchedGrids("states do not share a grid")
    gp = gradient(state, params)
    w = state.grid.trapezoid_weights
    n = state.director.values
    dtau_n = (n - state_prev.director.values) / tau
    r_n = project_tangent(dtau_n, n) + gp.d_director
    dtau_psi = (state.psi.values - state_prev.psi.values) / tau
    r_psi = 0.5 * dtau_psi + gp.d_psi
    r_psi = free_dof_mask(state).mask_psi(r_psi)
    norms = [math.sqrt(float(w @ (r_n[:, k] ** 2))) for k in range(3)]
    psi_norm = math.sqrt(float(w @ (np.abs(r_psi) ** 2)))
    return ElResidualNorms(n1=norms[0], n2=norms[1], n3=norms[2], psi=psi_norm)
