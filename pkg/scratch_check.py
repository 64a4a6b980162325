"""Scratch correctness probe (not part of the deliverable)."""
import sys
import numpy as np

sys.path.insert(0, "tests")
from reference_oracle import oracle_energy, oracle_report, oracle_gradient

from chevronflow import (
    BoundaryPins, DirectorField, Grid, OrderParameter, PhysicalParams, State,
    build_initial_state, energy_breakdown, gradient, total_energy, validate,
)
from chevronflow.variation import raw_gradient, project_tangent
from chevronflow.fields import free_dof_mask

rng = np.random.default_rng(7)


def random_state(n, params, rng):
    grid = Grid.regular(params.L, n)
    nvals = rng.normal(size=(n, 3))
    nvals /= np.linalg.norm(nvals, axis=1, keepdims=True)
    psi = (1.0 + 0.3 * rng.normal(size=n)) * np.exp(1j * rng.uniform(-np.pi, np.pi, size=n))
    pins = BoundaryPins(
        value_lo=complex(psi[0]), value_hi=complex(psi[-1]),
        dvalue_lo=complex(rng.normal() + 1j * rng.normal()),
        dvalue_hi=complex(rng.normal() + 1j * rng.normal()),
    )
    return State(grid=grid, director=DirectorField(nvals), psi=OrderParameter(psi, pins))


params = validate(PhysicalParams())
print("== 1. psi=0 state ==")
n = 16
grid = Grid.regular(1.0, n)
nv = np.tile([1.0, 0.0, 0.0], (n, 1))
zero = State(grid=grid, director=DirectorField(nv),
             psi=OrderParameter(np.zeros(n, complex), BoundaryPins(0j, 0j, 0j, 0j)))
bd = energy_breakdown(zero, params)
print("total:", bd.total, "expect", 2 * params.g_coef * params.L)
print(bd)

print("== 2. initial data cancellations ==")
grid = Grid.regular(1.0, 257)
st = build_initial_state(params, grid)
bd = energy_breakdown(st, params)
print(bd)

print("== 3. oracle vs production on random states ==")
worst = 0.0
for k in range(10):
    s = random_state(8, params, rng)
    e1 = total_energy(s, params)
    rep = oracle_report(s, params)
    rel = abs(e1 - rep.value) / max(1.0, abs(e1))
    worst = max(worst, rel)
    bdk = energy_breakdown(s, params)
    pairs = [
        (bdk.perp_term, rep.terms["perp"]), (bdk.par_term, rep.terms["par"]),
        (bdk.cpar_term, rep.terms["cpar"]), (bdk.penalization, rep.terms["penal"]),
        (bdk.regularizer, rep.terms["reg"]), (bdk.nematic, rep.terms["nematic"]),
        (bdk.electrostatic, rep.terms["electro"]),
    ]
    for a, b in pairs:
        worst = max(worst, abs(a - b) / max(1.0, abs(a)))
print("worst relative disagreement:", worst)

print("== 4. FD gradient check ==")
params_e = validate(PhysicalParams(E_field=2.0))
s = random_state(12, params_e, rng)
dn_o, dpsi_o = oracle_gradient(s, params_e, eps=1e-4)
gp = gradient(s, params_e)
mask = free_dof_mask(s)
err_n = np.max(np.abs(gp.d_director - dn_o)) / max(1.0, np.max(np.abs(dn_o)))
err_p = np.max(np.abs(gp.d_psi - dpsi_o)) / max(1.0, np.max(np.abs(dpsi_o)))
print("director rel err:", err_n, " psi rel err:", err_p)
print("tangency:", np.max(np.abs(np.sum(gp.d_director * s.director.values, axis=1))))

print("== 5. q sweep ==")
from chevronflow import initial_energy_sweep, loglog_slope
table = initial_energy_sweep(params, [25, 50, 100, 200])
print(table)
print("slope:", loglog_slope(table))

print("== 6. Richardson on initial state ==")
for q in (10.0, 25.0, 50.0):
    import dataclasses
    p = validate(dataclasses.replace(params, q=q))
    es = [total_energy(build_initial_state(p, Grid.regular(1.0, nn)), p) for nn in (65, 129, 257)]
    print(f"q={q}: F={es}, ratio={(es[0]-es[1])/(es[1]-es[2]):.3f}")
