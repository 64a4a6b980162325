"""Discrete state representation and finite-difference operators.

The domain [-L, L] is sampled on a uniform grid.  Two families of derivative
operators coexist:

* ghost-based operators for the complex order parameter, whose value and
  first derivative are pinned at both walls.  One ghost node per end encodes
  the derivative pin as ``psi[-1] = psi[1] - 2 h dpsi(-L)`` (mirrored on the
  right), which keeps the fixed-DOF set minimal and is second-order accurate;
* one-sided operators for everything without boundary data (director
  components, |psi|^2 and nodal product fields), central in the interior and
  biased second-order stencils at the ends.

All operators are sparse matrices built once per grid and cached.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np
import scipy.sparse as sp

from .errors import GridTooCoarse

MIN_NODES = 16


def stencil_weights(offsets, order: int) -> np.ndarray:
    """Finite-difference weights (in units of 1/h**order) for integer offsets."""
    s = np.asarray(offsets, dtype=float)
    k = len(s)
    if k <= order:
        raise ValueError("not enough points for the requested derivative")
    vander = np.vander(s, k, increasing=True).T  # vander[i, j] = s[j] ** i
    rhs = np.zeros(k)
    rhs[order] = math.factorial(order)
    return np.linalg.solve(vander, rhs)


@dataclass(frozen=True, eq=False)
class Grid:
    """Uniform grid on [-L, L] with N nodes, spacing h = 2L / (N - 1)."""

    L: float
    n_nodes: int
    h: float
    nodes: np.ndarray

    @classmethod
    def regular(cls, L: float, n_nodes: int) -> "Grid":
        if n_nodes < 3:
            raise GridTooCoarse(f"need at least 3 nodes, got {n_nodes}")
        if L <= 0:
            raise ValueError(f"L must be > 0, got {L}")
        nodes = np.linspace(-L, L, n_nodes)
        return cls(L=float(L), n_nodes=int(n_nodes), h=2.0 * L / (n_nodes - 1), nodes=nodes)

    def same_as(self, other: "Grid") -> bool:
        return self.n_nodes == other.n_nodes and self.L == other.L

    @property
    def trapezoid_weights(self) -> np.ndarray:
        w = np.full(self.n_nodes, self.h)
        w[0] = w[-1] = 0.5 * self.h
        return w


def make_grid(L: float, n_nodes: int) -> Grid:
    """Public grid factory; enforces the production resolution gate."""
    if n_nodes < MIN_NODES:
        raise GridTooCoarse(f"n_nodes must be >= {MIN_NODES}, got {n_nodes}")
    return Grid.regular(L, n_nodes)


def _rows_to_csr(n_rows, n_cols, rows):
    data, ri, ci = [], [], []
    for i, (cols, weights) in enumerate(rows):
        for c, wgt in zip(cols, weights):
            ri.append(i)
            ci.append(c)
            data.append(wgt)
    return sp.csr_matrix((data, (ri, ci)), shape=(n_rows, n_cols))


def _interior_op(n: int, h: float, order: int) -> sp.csr_matrix:
    """N x N operator: central stencils inside, one-sided near the boundary.

    End stencils carry enough points to stay second-order accurate (3 for
    d1, 4 for d2, 5 for d3).
    """
    half, end_width = {1: (1, 3), 2: (1, 4), 3: (2, 5)}[order]
    width = 2 * half + 1
    rows = []
    for i in range(n):
        if i - half >= 0 and i + half <= n - 1:
            lo, k = i - half, width
        elif i - half < 0:
            lo, k = 0, end_width
        else:
            lo, k = n - end_width, end_width
        offsets = np.arange(lo - i, lo - i + k)
        w = stencil_weights(offsets, order) / h**order
        rows.append((range(lo, lo + k), w))
    return _rows_to_csr(n, n, rows)


def _ghost_op(n: int, h: float, order: int) -> sp.csr_matrix:
    """N x (N+2) operator on the ghost-extended vector [g_lo, f_0..f_{N-1}, g_hi]."""
    half = 1 if order < 3 else 2
    width = 2 * half + 1
    rows = []
    for i in range(n):
        lo = i - half  # node index; extended index is +1
        if lo < -1:
            lo = -1
        if lo + width > n + 1:
            lo = n + 1 - width
        offsets = np.arange(lo - i, lo - i + width)
        w = stencil_weights(offsets, order) / h**order
        rows.append((range(lo + 1, lo + 1 + width), w))
    return _rows_to_csr(n, n + 2, rows)


@dataclass(frozen=True)
class GridOperators:
    """Derivative matrices and quadrature weights for one grid."""

    grid: Grid
    w: np.ndarray            # trapezoid weights
    d1n: sp.csr_matrix       # one-sided family, N x N
    d2n: sp.csr_matrix
    d3n: sp.csr_matrix
    d1g: sp.csr_matrix       # ghost family, N x (N+2)
    d2g: sp.csr_matrix
    d3g: sp.csr_matrix
    sel: sp.csr_matrix       # node selection out of the extended vector
    d1n_t: sp.csr_matrix
    d2n_t: sp.csr_matrix
    d3n_t: sp.csr_matrix
    d1g_t: sp.csr_matrix
    d2g_t: sp.csr_matrix
    d3g_t: sp.csr_matrix
    sel_t: sp.csr_matrix


_OPERATOR_CACHE: dict = {}


def grid_operators(grid: Grid) -> GridOperators:
    key = (grid.n_nodes, grid.L)
    ops = _OPERATOR_CACHE.get(key)
    if ops is not None:
        return ops
    n, h = grid.n_nodes, grid.h
    sel = sp.csr_matrix(
        (np.ones(n), (np.arange(n), np.arange(1, n + 1))), shape=(n, n + 2)
    )
    d1n = _interior_op(n, h, 1)
    d2n = _interior_op(n, h, 2)
    d3n = _interior_op(n, h, 3)
    d1g = _ghost_op(n, h, 1)
    d2g = _ghost_op(n, h, 2)
    d3g = _ghost_op(n, h, 3)
    ops = GridOperators(
        grid=grid,
        w=grid.trapezoid_weights,
        d1n=d1n, d2n=d2n, d3n=d3n,
        d1g=d1g, d2g=d2g, d3g=d3g,
        sel=sel,
        d1n_t=sp.csr_matrix(d1n.T), d2n_t=sp.csr_matrix(d2n.T),
        d3n_t=sp.csr_matrix(d3n.T),
        d1g_t=sp.csr_matrix(d1g.T), d2g_t=sp.csr_matrix(d2g.T),
        d3g_t=sp.csr_matrix(d3g.T),
        sel_t=sp.csr_matrix(sel.T),
    )
    _OPERATOR_CACHE[key] = ops
    return ops


@dataclass(frozen=True)
class BoundaryPins:
    """Pinned wall values and wall derivatives of the order parameter."""

    value_lo: complex
    value_hi: complex
    dvalue_lo: complex
    dvalue_hi: complex

    def rotated(self, phase: complex) -> "BoundaryPins":
        return BoundaryPins(
            self.value_lo * phase,
            self.value_hi * phase,
            self.dvalue_lo * phase,
            self.dvalue_hi * phase,
        )


def extend_with_ghosts(psi: np.ndarray, grid: Grid, pins: BoundaryPins) -> np.ndarray:
    """Ghost-extended order parameter encoding the derivative pins."""
    lo = psi[1] - 2.0 * grid.h * pins.dvalue_lo
    hi = psi[-2] + 2.0 * grid.h * pins.dvalue_hi
    return np.concatenate(([lo], psi, [hi]))


def d1(field: np.ndarray, grid: Grid, bc: Optional[BoundaryPins] = None) -> np.ndarray:
    """First derivative; with ``bc`` the ghost route for the order parameter."""
    ops = grid_operators(grid)
    if bc is None:
        return ops.d1n @ field
    return ops.d1g @ extend_with_ghosts(field, grid, bc)


def d2(field: np.ndarray, grid: Grid, bc: Optional[BoundaryPins] = None) -> np.ndarray:
    ops = grid_operators(grid)
    if bc is None:
        return ops.d2n @ field
    return ops.d2g @ extend_with_ghosts(field, grid, bc)


def d3(field: np.ndarray, grid: Grid, bc: Optional[BoundaryPins] = None) -> np.ndarray:
    ops = grid_operators(grid)
    if bc is None:
        return ops.d3n @ field
    return ops.d3g @ extend_with_ghosts(field, grid, bc)


@dataclass(frozen=True, eq=False)
class DirectorField:
    """Per-node unit 3-vectors; |n| = 1 is restored by renormalization."""

    values: np.ndarray  # (N, 3)

    def unit_error(self) -> float:
        return float(np.max(np.abs(np.linalg.norm(self.values, axis=1) - 1.0)))

    def renormalized(self) -> "DirectorField":
        norms = np.linalg.norm(self.values, axis=1, keepdims=True)
        return DirectorField(self.values / norms)


@dataclass(frozen=True, eq=False)
class OrderParameter:
    """Complex order parameter samples with wall pins."""

    values: np.ndarray  # (N,) complex
    pins: BoundaryPins


@dataclass(frozen=True, eq=False)
class State:
    """Director plus order parameter on a shared grid, stamped with flow time."""

    grid: Grid
    director: DirectorField
    psi: OrderParameter
    t: float = 0.0

    def with_fields(self, director=None, psi_values=None, t=None) -> "State":
        director = self.director if director is None else director
        psi = self.psi if psi_values is None else replace(self.psi, values=psi_values)
        return State(
            grid=self.grid,
            director=director,
            psi=psi,
            t=self.t if t is None else t,
        )

    def copy(self) -> "State":
        return State(
            grid=self.grid,
            director=DirectorField(self.director.values.copy()),
            psi=OrderParameter(self.psi.values.copy(), self.psi.pins),
            t=self.t,
        )


@dataclass(frozen=True)
class FreeDofMask:
    """Which nodal unknowns are free: all director nodes, interior psi nodes."""

    n_nodes: int
    psi_free: np.ndarray  # (N,) bool

    @property
    def n_free_director_nodes(self) -> int:
        return self.n_nodes

    @property
    def n_free_psi_nodes(self) -> int:
        return int(np.count_nonzero(self.psi_free))

    def mask_psi(self, values: np.ndarray) -> np.ndarray:
        out = values.copy()
        out[~self.psi_free] = 0.0
        return out

    def pack(self, d_director: np.ndarray, d_psi: np.ndarray) -> np.ndarray:
        """Flatten free DOFs into one real vector (director, Re psi, Im psi)."""
        free = d_psi[self.psi_free]
        return np.concatenate([d_director.ravel(), free.real, free.imag])

    def unpack(self, vec: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        n3 = 3 * self.n_nodes
        k = self.n_free_psi_nodes
        d_director = vec[:n3].reshape(self.n_nodes, 3)
        d_psi = np.zeros(self.n_nodes, dtype=complex)
        d_psi[self.psi_free] = vec[n3:n3 + k] + 1j * vec[n3 + k:n3 + 2 * k]
        return d_director, d_psi


def free_dof_mask(state: State) -> FreeDofMask:
    n = state.grid.n_nodes
    psi_free = np.ones(n, dtype=bool)
    psi_free[0] = psi_free[-1] = False
    return FreeDofMask(n_nodes=n, psi_free=psi_free)
