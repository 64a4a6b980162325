"""Monitored quantities: derivative ratio, melting, tilt, tip, state label.

The local layer tilt is read off the order parameter as
``Im(conj(psi) psi') / (q |psi|^2)`` with a small modulus floor so melted
regions do not blow up the division.  Melting is reported against a
configurable threshold on |psi|; the threshold always travels with the
report.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from .errors import MismatchedGrids
from .fields import State, d1, d2
from .initialdata import loglog_slope
from .params import PhysicalParams

MODULUS_FLOOR = 1e-8
DEFAULT_MELT_THRESHOLD = 0.25

UP = "UP"
DOWN = "DOWN"
MIXED = "MIXED"


@dataclass(frozen=True)
class DiagnosticsRecord:
    sup_ratio: float
    min_modulus: float
    melt_interval: Optional[tuple[float, float]]
    melt_threshold: float
    tilt_profile: np.ndarray
    tip_x: Optional[float]
    state_label: str
    natural_bc_residual: float

    CSV_HEADER = "t,sup_ratio,min_modulus,melt_lo,melt_hi,tip_x,state_label,natural_bc_residual"

    def csv_row(self, t: float) -> str:
        melt_lo = f"{self.melt_interval[0]:.12g}" if self.melt_interval else ""
        melt_hi = f"{self.melt_interval[1]:.12g}" if self.melt_interval else ""
        tip = f"{self.tip_x:.12g}" if self.tip_x is not None else ""
        return ",".join(
            [
                f"{t:.12g}",
                f"{self.sup_ratio:.12g}",
                f"{self.min_modulus:.12g}",
                melt_lo,
                melt_hi,
                tip,
                self.state_label,
                f"{self.natural_bc_residual:.12g}",
            ]
        )


def _melt_interval(x: np.ndarray, modulus: np.ndarray, threshold: float):
    below = modulus < threshold
    if not np.any(below):
        return None
    best = None
    start = None
    for i, flag in enumerate(list(below) + [False]):
        if flag and start is None:
            start = i
        elif not flag and start is not None:
            length = i - start
            if best is None or length > best[0]:
                best = (length, start, i - 1)
            start = None
    _, lo, hi = best
    return (float(x[lo]), float(x[hi]))


def _tip_location(x: np.ndarray, tilt: np.ndarray) -> Optional[float]:
    crossings = []
    for i in range(len(tilt) - 1):
        a, b = tilt[i], tilt[i + 1]
        if a == 0.0:
            j = i - 1
            while j >= 0 and tilt[j] == 0.0:
                j -= 1
            if j >= 0 and b != 0.0 and tilt[j] * b < 0:
                crossings.append(float(x[i]))
        elif a * b < 0:
            crossings.append(float(x[i] - a * (x[i + 1] - x[i]) / (b - a)))
    if not crossings:
        return None
    return min(crossings, key=abs)


def diagnose(
    state: State,
    params: PhysicalParams,
    melt_threshold: float = DEFAULT_MELT_THRESHOLD,
) -> DiagnosticsRecord:
    """All monitored quantities of one state."""
    if not (0.0 < melt_threshold < 1.0):
        raise ValueError(f"melt_threshold must lie in (0, 1), got {melt_threshold}")
    grid = state.grid
    p = state.psi.values
    p1 = d1(p, grid, bc=state.psi.pins)
    modulus = np.abs(p)
    sup_ratio = float(np.max(np.abs(p1)) / params.q)
    min_modulus = float(np.min(modulus))
    tilt = np.imag(np.conj(p) * p1) / (
        params.q * np.maximum(modulus**2, MODULUS_FLOOR)
    )
    u = modulus**2
    u2 = d2(u, grid)
    n3 = state.director.values[:, 2]
    if np.min(n3) > 0:
        label = UP
    elif np.max(n3) < 0:
        label = DOWN
    else:
        label = MIXED
    return DiagnosticsRecord(
        sup_ratio=sup_ratio,
        min_modulus=min_modulus,
        melt_interval=_melt_interval(grid.nodes, modulus, melt_threshold),
        melt_threshold=melt_threshold,
        tilt_profile=tilt,
        tip_x=_tip_location(grid.nodes, tilt),
        state_label=label,
        natural_bc_residual=float(max(abs(u2[0]), abs(u2[-1]))),
    )


def ratio_sweep(
    ratios_by_q: Mapping[float, Iterable]
) -> tuple[list[tuple[float, float]], Optional[float]]:
    """Per-q maxima of the derivative ratio over a trajectory, with slope.

    Values may be ``DiagnosticsRecord`` instances or plain ratios.  The
    log-log slope is None when fewer than two wave numbers are given.
    """
    table = []
    for q in sorted(ratios_by_q):
        vals = [
            v.sup_ratio if isinstance(v, DiagnosticsRecord) else float(v)
            for v in ratios_by_q[q]
        ]
        if not vals:
            raise ValueError(f"empty trajectory for q={q}")
        table.append((float(q), max(vals)))
    return table, loglog_slope(table)


def _h1_distance(a: State, b: State) -> float:
    w = a.grid.trapezoid_weights
    dn = a.director.values - b.director.values
    ddn = d1(dn[:, 0], a.grid) ** 2 + d1(dn[:, 1], a.grid) ** 2 + d1(dn[:, 2], a.grid) ** 2
    return math.sqrt(float(w @ (np.sum(dn * dn, axis=1) + ddn)))


def _h2_distance(a: State, b: State) -> float:
    w = a.grid.trapezoid_weights
    d0 = a.psi.values - b.psi.values
    d1a = d1(a.psi.values, a.grid, bc=a.psi.pins) - d1(b.psi.values, b.grid, bc=b.psi.pins)
    d2a = d2(a.psi.values, a.grid, bc=a.psi.pins) - d2(b.psi.values, b.grid, bc=b.psi.pins)
    total = np.abs(d0) ** 2 + np.abs(d1a) ** 2 + np.abs(d2a) ** 2
    return math.sqrt(float(w @ total))


def rho_cauchy_check(
    states_by_rho: Sequence[tuple[float, State]]
) -> list[tuple[float, float, float]]:
    """Pairwise H1(director) + H2(psi) distances between consecutive states.

    Input pairs must share a grid and step index and be ordered by
    regularization weight.
    """
    rows = []
    for (rho_a, sa), (rho_b, sb) in zip(states_by_rho, states_by_rho[1:]):
        if not sa.grid.same_as(sb.grid):
            raise MismatchedGrids(
                f"states for rho={rho_a} and rho={rho_b} use different grids"
            )
        dist = _h1_distance(sa, sb) + _h2_distance(sa, sb)
        rows.append((float(rho_a), float(rho_b), dist))
    return rows
