"""Scratch flow probe: dissipation, inner iteration counts, timing."""
import time
import numpy as np

from chevronflow import (
    FlowConfig, Grid, PhysicalParams, build_initial_state, run_flow, validate,
)

params = validate(PhysicalParams())
grid = Grid.regular(1.0, 257)
state = build_initial_state(params, grid)

cfg = FlowConfig(tau=1e-3, T=0.02, n_steps=21, inner_tol=1e-8, inner_max_iters=400,
                 n_nodes=257, precondition=True)
t0 = time.perf_counter()
res = run_flow(state, params, cfg)
dt = time.perf_counter() - t0
led = res.ledger
iters = [s.inner_iters for s in led.steps]
print(f"preconditioned: {dt:.2f}s for {cfg.n_steps} steps; inner iters min/med/max = "
      f"{min(iters)}/{sorted(iters)[len(iters)//2]}/{max(iters)}")
print("violations:", led.check())
print("energy:", led.f_initial, "->", led.steps[-1].energy_after)
print("grad norms:", [f"{s.grad_norm_final:.2e}" for s in led.steps[:5]], "...")
resid_min = min(s.dissipation_residual for s in led.steps)
print("min dissipation residual:", resid_min)

cfg2 = FlowConfig(tau=1e-3, T=0.002, n_steps=3, inner_tol=1e-8, inner_max_iters=4000,
                  n_nodes=257, precondition=False)
t0 = time.perf_counter()
res2 = run_flow(state, params, cfg2)
dt2 = time.perf_counter() - t0
iters2 = [s.inner_iters for s in res2.ledger.steps]
print(f"plain BB: {dt2:.2f}s for {cfg2.n_steps} steps; iters = {iters2}")
print("violations:", res2.ledger.check())

# cross-check: do both modes land on comparable minimizers per step?
d = np.max(np.abs(res2.final_state.psi.values - res.snapshots[0][1].psi.values)) if False else None
