"""Scratch probe for sweep costs (q=100 grid) and switching dynamics."""
import dataclasses
import time

import numpy as np

from chevronflow import (
    FlowConfig, Grid, PhysicalParams, build_initial_state, diagnose, run_flow, validate,
)
from chevronflow.initialdata import grid_for_wave_number

base = validate(PhysicalParams())

# criterion-7 style: q=100, h*q<=0.25 -> N=801, a few steps to estimate cost
p = validate(dataclasses.replace(base, q=100.0))
grid = grid_for_wave_number(p)
print("q=100 grid N =", grid.n_nodes)
state = build_initial_state(p, grid)
cfg = FlowConfig(tau=1e-3, T=0.005, n_steps=6, inner_tol=1e-8, inner_max_iters=200)
t0 = time.perf_counter()
res = run_flow(state, p, cfg)
print(f"6 steps: {time.perf_counter()-t0:.2f}s, iters={[s.inner_iters for s in res.ledger.steps]}")
print("violations:", res.ledger.check())
recs = [diagnose(s, p) for _, s in res.snapshots] if res.snapshots else []
print("sup_ratio initial:", diagnose(state, p).sup_ratio)
print("sup_ratio final:", diagnose(res.final_state, p).sup_ratio)

# switching probe: moderate grid, E=+5 from UP initial state
p2 = validate(dataclasses.replace(base, E_field=5.0))
grid2 = Grid.regular(1.0, 129)
st2 = build_initial_state(p2, grid2)
d0 = diagnose(st2, p2)
print("initial label:", d0.state_label, "n3 range:",
      st2.director.values[:, 2].min(), st2.director.values[:, 2].max())
cfg2 = FlowConfig(tau=1e-3, T=0.06, n_steps=61, inner_tol=1e-8, inner_max_iters=200)
t0 = time.perf_counter()
labels = []
def watch(m, s, stats):
    if m % 5 == 0:
        d = diagnose(s, p2)
        labels.append((m, d.state_label, round(d.min_modulus, 4),
                       round(float(s.director.values[:,2].mean()), 4)))
res2 = run_flow(st2, p2, cfg2, on_step=watch)
print(f"switch probe: {time.perf_counter()-t0:.2f}s")
print("violations:", res2.ledger.check())
for row in labels:
    print(row)
