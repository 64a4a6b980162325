"""Implicit gradient flow by sequential minimization.

Each time step minimizes ``J(state) = ||state - prev||_h^2 / (2 tau) + F(state)``
over the product of per-node unit spheres and the free order-parameter
nodes.  Any iterate the inner solver accepts satisfies ``J(next) <= J(prev)``,
which is all the energy-dissipation bookkeeping needs, so early stopping is
safe.  The inner solver is projected gradient descent with an Armijo line
search; by default the descent direction is preconditioned with a
Gauss-Newton model of the stiff quadratic part of the energy (quasi-Newton
acceleration behind the same contract), with the plain Barzilai-Borwein
stepped variant available via ``FlowConfig.precondition = False``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Protocol

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .energy import breakdown_from_forward, forward_fields
from .errors import LineSearchStalled, NonFiniteGradient
from .fields import DirectorField, State, free_dof_mask, grid_operators
from .params import FlowConfig, PhysicalParams, validate, validate_flow_config
from .variation import project_tangent, raw_gradient

ARMIJO_C = 1e-4
BACKTRACK = 0.5
STEP_FLOOR = 1e-16
STALL_GRACE = 1e3
PRECOND_REBUILD_EVERY = 40


@dataclass(frozen=True)
class StepStats:
    """Bookkeeping of one implicit step, proving its share of dissipation."""

    m: int
    inner_iters: int
    energy_before: float
    energy_after: float
    movement_n: float
    movement_psi: float
    grad_norm_final: float
    dissipation_residual: float

    CSV_HEADER = (
        "m,t,energy_before,energy_after,movement_n,movement_psi,"
        "dissipation_residual,inner_iters,grad_norm_final"
    )

    def csv_row(self, tau: float) -> str:
        return ",".join(
            [
                str(self.m),
                f"{self.m * tau:.12g}",
                f"{self.energy_before:.17g}",
                f"{self.energy_after:.17g}",
                f"{self.movement_n:.17g}",
                f"{self.movement_psi:.17g}",
                f"{self.dissipation_residual:.17g}",
                str(self.inner_iters),
                f"{self.grad_norm_final:.17g}",
            ]
        )


@dataclass
class DissipationLedger:
    """Ordered step records plus the initial energy, with inequality checks."""

    f_initial: float
    tau: float
    steps: list[StepStats] = field(default_factory=list)

    def append(self, stats: StepStats) -> None:
        self.steps.append(stats)

    def check(self, tol: float = 1e-10) -> list[str]:
        """Violation messages for the per-step and cumulative inequalities."""
        problems = []
        scale = abs(self.f_initial)
        moved = 0.0
        for k, s in enumerate(self.steps, start=1):
            if s.dissipation_residual < -tol * max(scale, 1e-300):
                problems.append(
                    f"step {s.m}: dissipation residual {s.dissipation_residual:.3e}"
                )
            moved += s.movement_n + s.movement_psi
            slack = self.f_initial + k * tol * max(scale, 1e-300) - (moved + s.energy_after)
            if slack < 0:
                problems.append(
                    f"step {s.m}: cumulative movement + energy exceeds initial "
                    f"energy by {-slack:.3e}"
                )
        return problems

    def write_csv(self, path) -> None:
        lines = [StepStats.CSV_HEADER]
        lines += [s.csv_row(self.tau) for s in self.steps]
        with open(path, "w") as fh:
            fh.write("\n".join(lines) + "\n")


def check_ledger_csv(path, tol: float = 1e-10) -> tuple[bool, list[str]]:
    """Re-run the dissipation checks line by line on a written ledger file."""
    with open(path) as fh:
        rows = [line.strip() for line in fh if line.strip()]
    if len(rows) < 2:
        return False, ["ledger has no step rows"]
    problems = []
    moved = 0.0
    f_initial = None
    for line in rows[1:]:
        cols = line.split(",")
        m = int(cols[0])
        before, after = float(cols[2]), float(cols[3])
        mv_n, mv_psi, resid = float(cols[4]), float(cols[5]), float(cols[6])
        if f_initial is None:
            f_initial = before
        scale = max(abs(f_initial), 1e-300)
        if resid < -tol * scale:
            problems.append(f"step {m}: dissipation residual {resid:.3e}")
        moved += mv_n + mv_psi
        if moved + after > f_initial + m * tol * scale:
            problems.append(f"step {m}: cumulative inequality violated")
    return not problems, problems


class Objective(Protocol):
    natural_step: float

    def value(self, state: State) -> float: ...

    def gradient_arrays(self, state: State) -> tuple[np.ndarray, np.ndarray]: ...

    def make_preconditioner(self, state: State) -> Optional["_Preconditioner"]: ...


def _real_form(h: sp.spmatrix) -> sp.csr_matrix:
    """Real 2N x 2N Hessian block of the quadratic form psi^H H psi (H Hermitian)."""
    hr = sp.csr_matrix(h.real)
    hi = sp.csr_matrix(h.imag)
    return sp.bmat([[2.0 * hr, -2.0 * hi], [2.0 * hi, 2.0 * hr]], format="csr")


def _extension_matrix(n: int) -> sp.csr_matrix:
    rows = [0] + list(range(1, n + 1)) + [n + 1]
    cols = [1] + list(range(n)) + [n - 2]
    return sp.csr_matrix((np.ones(n + 2), (rows, cols)), shape=(n + 2, n))


class _Preconditioner:
    """Factorized Gauss-Newton model of the stiff part of the objective."""

    def __init__(self, state: State, params: PhysicalParams, tau: Optional[float]):
        f = forward_fields(state, params)
        ops = f.ops
        n = state.grid.n_nodes
        q = params.q
        bs = math.sqrt(1.0 + params.b * params.b)
        ct = math.cos(params.theta)
        qb2 = q / (1.0 + params.b * params.b)
        w_diag = sp.diags(ops.w)
        ext = _extension_matrix(n)

        def dia(vals):
            return sp.diags(vals)

        op_inner_perp = dia(1j * f.n1 / bs) @ ops.sel + dia(f.n2 / q) @ ops.d1g
        op_inner_par = op_inner_perp - 1j * ct * ops.sel
        op_core = dia(-(q / bs) * f.n1 + q * ct) @ ops.sel + dia(1j * f.n2) @ ops.d1g
        cq2a = params.c_perp * q / (2.0 * params.a_perp)
        op_b_perp = (
            ops.d2g / q
            - ops.d1n @ (dia(f.n2) @ op_inner_perp)
            + dia(-qb2 + qb2 * f.n1**2 + cq2a) @ ops.sel
            + dia(-(1j / bs) * f.n1 * f.n2) @ ops.d1g
        )
        op_b_par = dia(f.s_par) @ op_core + ops.d1n @ (dia(f.n2) @ op_inner_par)

        h_c = None
        for coef, op in (
            (params.a_perp / q, op_b_perp),
            (params.a_par / q, op_b_par),
            (q * params.c_par, op_inner_par),
            (params.rho / q**6, ops.d3g),
        ):
            a = sp.csr_matrix(op @ ext)
            term = coef * (a.getH() @ (w_diag @ a))
            h_c = term if h_c is None else h_c + term
        p_psi = _real_form(h_c)

        # Gauss-Newton of the |psi|^2 penalization through u = |psi|^2
        hess_u = 2.0 * (
            params.g_coef * w_diag
            + ops.d1n_t @ (w_diag @ ops.d1n)
            + (1.0 / q**2) * (ops.d2n_t @ (w_diag @ ops.d2n))
            + (1.0 / q**6) * (ops.d3n_t @ (w_diag @ ops.d3n))
        )
        j_u = sp.hstack([dia(2.0 * f.p.real), dia(2.0 * f.p.imag)], format="csr")
        p_psi = p_psi + sp.csr_matrix(j_u.T @ (hess_u @ j_u))

        # field-coupling curvature bound and metric/ridge terms
        pe_abs = abs(params.P_pol * params.E_field) / bs
        ridge = 2.0 * pe_abs * np.abs(f.n3) * ops.w
        if tau is not None:
            ridge = ridge + ops.w / tau
        else:
            ridge = ridge + 1e-6 * np.max(p_psi.diagonal()) * np.ones(n)
        p_psi = p_psi + sp.diags(np.concatenate([ridge, ridge]))

        free = np.concatenate([np.arange(1, n - 1), n + np.arange(1, n - 1)])
        self._free = free
        self._n = n
        p_free = sp.csc_matrix(p_psi[free][:, free])
        self._lu_psi = splu(p_free)

        # director block: metric + one-constant elasticity + diagonal bound
        pmax2 = float(np.max(np.abs(f.p)) ** 2)
        p1max2 = float(np.max(np.abs(f.p1) / q) ** 2)
        umax = float(np.max(f.u))
        lam = (
            pe_abs * max(umax, 1.0)
            + 4.0 * q * (params.c_par + params.a_perp + params.a_par)
            * (1.0 + pmax2 + p1max2)
        )
        p_n = params.K * (ops.d1n_t @ (w_diag @ ops.d1n)) + lam * w_diag
        if tau is not None:
            p_n = p_n + w_diag / tau
        self._lu_n = splu(sp.csc_matrix(p_n))

    def solve_director(self, g: np.ndarray) -> np.ndarray:
        out = np.empty_like(g)
        for k in range(3):
            out[:, k] = self._lu_n.solve(g[:, k])
        return out

    def solve_psi(self, g_re: np.ndarray, g_im: np.ndarray) -> np.ndarray:
        rhs = np.concatenate([g_re[1:-1], g_im[1:-1]])
        sol = self._lu_psi.solve(rhs)
        k = self._n - 2
        d = np.zeros(self._n, dtype=complex)
        d[1:-1] = sol[:k] + 1j * sol[k:]
        return d


class RotheObjective:
    """One implicit step objective: squared movement over 2 tau plus the energy.

    ``tau=None`` drops the movement term, giving plain energy relaxation.
    """

    def __init__(
        self,
        prev: State,
        tau: Optional[float],
        params: PhysicalParams,
        precondition: bool = True,
    ):
        self.prev = prev
        self.tau = tau
        self.params = params
        self.precondition = precondition
        self.natural_step = tau if tau is not None else 1.0
        self._w = prev.grid.trapezoid_weights

    def value(self, state: State) -> float:
        total = breakdown_from_forward(forward_fields(state, self.params), self.params).total
        if self.tau is None:
            return total
        w = self._w
        dn = state.director.values - self.prev.director.values
        dpsi = state.psi.values - self.prev.psi.values
        movement = float(w @ np.sum(dn * dn, axis=1)) / (2.0 * self.tau) + float(
            w @ (dpsi * dpsi.conj()).real
        ) / (2.0 * self.tau)
        return movement + total

    def gradient_arrays(self, state: State) -> tuple[np.ndarray, np.ndarray]:
        r_n, a_psi = raw_gradient(state, self.params)
        if self.tau is not None:
            w = self._w
            r_n = r_n + (w[:, None] / self.tau) * (
                state.director.values - self.prev.director.values
            )
            a_psi = a_psi + (w / (2.0 * self.tau)) * (
                state.psi.values - self.prev.psi.values
            )
        return r_n, a_psi

    def make_preconditioner(self, state: State) -> Optional[_Preconditioner]:
        if not self.precondition:
            return None
        try:
            return _Preconditioner(state, self.params, self.tau)
        except RuntimeError:
            return None


@dataclass
class InnerResult:
    state: State
    iters: int
    grad_norm: float
    accepted: int
    j_final: float
    converged: bool
    stalled: bool
    j_history: list[float] = field(default_factory=list)


def _l2_gradients(state: State, r_n, a_psi):
    """Metric-normalized gradient fields and their squared weighted norm."""
    w = state.grid.trapezoid_weights
    g_proj = project_tangent(r_n, state.director.values)
    gn = g_proj / w[:, None]
    gpsi = 2.0 * a_psi / w
    gpsi[0] = gpsi[-1] = 0.0
    sq = float(w @ np.sum(gn * gn, axis=1)) + float(w @ (gpsi * gpsi.conj()).real)
    return g_proj, gn, gpsi, sq


def inner_minimize(objective, start: State, cfg: FlowConfig) -> InnerResult:
    """Constrained descent on the step objective.

    Stops at projected-gradient norm <= ``cfg.inner_tol``, at the iteration
    cap, or when the line search can no longer resolve a decrease; every
    accepted iterate strictly decreases the objective.  Raises
    :class:`LineSearchStalled` if not a single step could be accepted while
    the gradient is far from tolerance.
    """
    state = start
    j_cur = objective.value(state)
    j_history = [j_cur]
    precond = objective.make_preconditioner(state)
    mask = free_dof_mask(start)
    w = start.grid.trapezoid_weights

    accepted = 0
    grad_norm = math.inf
    alpha_prev = None
    prev_fields = None  # (director, psi, gn, gpsi) for the BB estimate
    iters = 0
    converged = False
    stalled = False

    for iters in range(1, cfg.inner_max_iters + 1):
        r_n, a_psi = objective.gradient_arrays(state)
        if not (np.all(np.isfinite(r_n)) and np.all(np.isfinite(a_psi))):
            raise NonFiniteGradient("inner solve hit a non-finite gradient")
        g_proj, gn, gpsi, sq = _l2_gradients(state, r_n, a_psi)
        grad_norm = math.sqrt(sq)
        if grad_norm <= cfg.inner_tol:
            converged = True
            break

        if precond is not None and iters % PRECOND_REBUILD_EVERY == 0:
            precond = objective.make_preconditioner(state)

        if precond is not None:
            d_n = -precond.solve_director(g_proj)
            d_n = project_tangent(d_n, state.director.values)
            a_free = mask.mask_psi(a_psi)
            d_psi = -precond.solve_psi(2.0 * a_free.real, 2.0 * a_free.imag)
            slope = float(np.sum(g_proj * d_n)) + float(
                np.sum(2.0 * a_free.real * d_psi.real + 2.0 * a_free.imag * d_psi.imag)
            )
            alpha = 1.0
        else:
            d_n = -gn
            d_psi = -gpsi
            slope = -sq
            alpha = objective.natural_step
            if prev_fields is not None:
                s_n = state.director.values - prev_fields[0]
                s_psi = state.psi.values - prev_fields[1]
                y_n = gn - prev_fields[2]
                y_psi = gpsi - prev_fields[3]
                num = float(w @ np.sum(s_n * s_n, axis=1)) + float(
                    w @ (s_psi * s_psi.conj()).real
                )
                den = float(w @ np.sum(s_n * y_n, axis=1)) + float(
                    w @ (s_psi * y_psi.conj()).real
                )
                if den > 0 and math.isfinite(den):
                    alpha = min(max(num / den, 1e-12), 1e12)
                elif alpha_prev is not None:
                    alpha = 2.0 * alpha_prev
            prev_fields = (
                state.director.values.copy(),
                state.psi.values.copy(),
                gn.copy(),
                gpsi.copy(),
            )

        if slope >= 0:  # numerically degenerate direction
            stalled = True
            break

        trial = None
        j_new = None
        while alpha >= STEP_FLOOR:
            n_new = DirectorField(state.director.values + alpha * d_n).renormalized()
            psi_new = state.psi.values + alpha * d_psi
            candidate = state.with_fields(director=n_new, psi_values=psi_new)
            j_cand = objective.value(candidate)
            if math.isfinite(j_cand) and j_cand < j_cur and (
                j_cand <= j_cur + ARMIJO_C * alpha * slope
            ):
                trial, j_new = candidate, j_cand
                break
            alpha *= BACKTRACK

        if trial is None:
            if accepted == 0 and grad_norm > STALL_GRACE * cfg.inner_tol:
                raise LineSearchStalled(
                    f"no acceptable step above {STEP_FLOOR:g} "
                    f"(gradient norm {grad_norm:.3e})",
                    state=state,
                )
            stalled = True
            break

        state, j_cur = trial, j_new
        j_history.append(j_cur)
        accepted += 1
        alpha_prev = alpha

    return InnerResult(
        state=state,
        iters=iters,
        grad_norm=grad_norm,
        accepted=accepted,
        j_final=j_cur,
        converged=converged,
        stalled=stalled,
        j_history=j_history,
    )


def rothe_step(
    prev: State, tau: float, params: PhysicalParams, flow_cfg: FlowConfig
) -> tuple[State, StepStats]:
    """One implicit step: descend on J from ``prev`` and record its ledger row."""
    objective = RotheObjective(prev, tau, params, precondition=flow_cfg.precondition)
    energy_before = objective.value(prev)  # movement vanishes at prev
    result = inner_minimize(objective, prev, flow_cfg)
    nxt = result.state.with_fields(t=prev.t + tau)

    w = prev.grid.trapezoid_weights
    dn = nxt.director.values - prev.director.values
    dpsi = nxt.psi.values - prev.psi.values
    movement_n = float(w @ np.sum(dn * dn, axis=1)) / (2.0 * tau)
    movement_psi = float(w @ (dpsi * dpsi.conj()).real) / (2.0 * tau)
    energy_after = breakdown_from_forward(forward_fields(nxt, params), params).total
    residual = energy_before - ((movement_n + movement_psi) + energy_after)
    stats = StepStats(
        m=0,
        inner_iters=result.iters,
        energy_before=energy_before,
        energy_after=energy_after,
        movement_n=movement_n,
        movement_psi=movement_psi,
        grad_norm_final=result.grad_norm,
        dissipation_residual=residual,
    )
    return nxt, stats


@dataclass
class FlowResult:
    final_state: State
    ledger: DissipationLedger
    snapshots: list[tuple[int, State]]


def run_flow(
    initial: State,
    params: PhysicalParams,
    flow_cfg: FlowConfig,
    snapshot_every: Optional[int] = None,
    on_step: Optional[Callable[[int, State, StepStats], None]] = None,
) -> FlowResult:
    """Run ``n_steps`` sequential implicit steps, collecting the ledger.

    Snapshots (including the initial state as step 0) are kept every
    ``snapshot_every`` steps.  Step errors propagate with the partial ledger
    attached to the exception as ``partial_ledger`` / ``partial_snapshots``.
    """
    params = validate(params)
    validate_flow_config(flow_cfg)
    f0 = breakdown_from_forward(forward_fields(initial, params), params).total
    ledger = DissipationLedger(f_initial=f0, tau=flow_cfg.tau)
    snapshots: list[tuple[int, State]] = []
    if snapshot_every:
        snapshots.append((0, initial))
    state = initial
    for m in range(1, flow_cfg.n_steps + 1):
        try:
            state, stats = rothe_step(state, flow_cfg.tau, params, flow_cfg)
        except Exception as err:
            err.partial_ledger = ledger
            err.partial_snapshots = snapshots
            raise
        stats = StepStats(**{**stats.__dict__, "m": m})
        ledger.append(stats)
        if on_step is not None:
            on_step(m, state, stats)
        if snapshot_every and m % snapshot_every == 0:
            snapshots.append((m, state))
    if snapshot_every and snapshots[-1][0] != flow_cfg.n_steps:
        snapshots.append((flow_cfg.n_steps, state))
    return FlowResult(final_state=state, ledger=ledger, snapshots=snapshots)


def minimize_energy(state: State, params: PhysicalParams, cfg: FlowConfig) -> InnerResult:
    """Relax the energy itself (no movement term); used to prepare equilibria."""
    objective = RotheObjective(state, None, params, precondition=cfg.precondition)
    return inner_minimize(objective, state, cfg)
