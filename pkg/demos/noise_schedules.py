"""Tour of the noise schedules and the forward/reverse process math.

Run:  python3 demos/noise_schedules.py
"""

import math

import numpy as np

from scanpath_diffusion import (KINDS, build_schedule, posterior_params,
                                q_sample)

# ---------------------------------------------------------------------------
# Every family at a glance: beta range and how much signal survives to t_max.

T = 200
print(f"schedule families at t_max={T}")
print(f"{'kind':14s} {'beta_1':>10s} {'beta_T':>10s} {'ab_T':>12s} {'beta_zero':>10s}")
for kind in KINDS:
    sched = build_schedule(kind, T)
    print(f"{kind:14s} {sched.beta_at(1):10.6f} {sched.beta_at(T):10.6f} "
          f"{sched.alpha_bar_at(T):12.3e} {sched.beta_zero:10.6f}")

# ---------------------------------------------------------------------------
# The closed-form jump to step t is distributed like t single steps.

sched = build_schedule("linear", 10)
rng = np.random.default_rng(0)
trials = 20_000
z0 = np.full((trials,), 2.0)

closed = q_sample(z0, 10, rng.standard_normal(trials), sched)
chain = z0.copy()
for t in range(1, 11):
    b = sched.beta_at(t)
    chain = math.sqrt(1 - b) * chain + math.sqrt(b) * rng.standard_normal(trials)

ab = sched.alpha_bar_at(10)
print("\nforward process from z0=2.0, linear schedule, t=10 "
      f"({trials} trials)")
print(f"{'':12s} {'mean':>8s} {'var':>8s}")
print(f"{'analytic':12s} {2 * math.sqrt(ab):8.4f} {1 - ab:8.4f}")
print(f"{'closed form':12s} {closed.mean():8.4f} {closed.var():8.4f}")
print(f"{'iterated':12s} {chain.mean():8.4f} {chain.var():8.4f}")

# ---------------------------------------------------------------------------
# Partial noising: rows outside the target mask ride along untouched.

frame = np.array([[1.0, 1.0], [1.0, 1.0]])
mask = np.array([False, True])  # row 0 is condition, row 1 is target
out = q_sample(frame, 10, rng.standard_normal(frame.shape), sched, mask)
print(f"\npartial noising at t=10: condition row {out[0]} (unchanged), "
      f"target row {np.round(out[1], 4)}")

# ---------------------------------------------------------------------------
# Reverse posterior: given z_t and a clean estimate z0, where was z_{t-1}?
# Early in the reverse pass (large t) the posterior mean tracks z_t; close
# to the end it tracks z0.

z0_est, z_t = 2.0, -1.0
print(f"\nposterior of z_(t-1) given z_t={z_t}, z0={z0_est}, linear t_max=200")
sched = build_schedule("linear", 200)
for t in (200, 100, 20, 2):
    mu, var = posterior_params(np.array([z_t]), np.array([z0_est]), t, sched)
    print(f"  t={t:3d}  mean {float(mu[0]):8.4f}  var {var:8.5f}")
