"""Impulsive orbits of the builtin systems.

The annulus system rotates at unit speed and folds the segment [1, 2] of the
positive x-axis onto [-3/2, -1] whenever the orbit reaches it.  Watch the
post-impulse radius contract to 1 along r -> 1/2 + r/2 while the gaps between
hits settle at pi exactly.
"""

import numpy as np

from impulseflow import build_fixture, first_hitting_time, impulsive_trajectory, psi

annulus = build_fixture("annulus")
x0 = np.array([0.0, 1.5])  # radius 1.5, angle pi/2

tau1, hit = first_hitting_time(annulus, x0, 10.0)
print(f"first hit of the impulsive set: t = {tau1:.12f}  (3*pi/2 = {1.5*np.pi:.12f})")
print(f"hit state: {hit}  -> post-impulse: {psi(annulus, x0, tau1)}")

traj = impulsive_trajectory(annulus, x0, 70.0, dt_sample=0.05)
print(f"\n{traj.n_impulses} impulses over [0, 70]:")
print(f"{'n':>3} {'tau_n':>12} {'gap':>10} {'radius':>12} {'1 + 0.5/2^n':>12}")
for n, tau in enumerate(traj.impulse_times[:10], start=1):
    gap = tau - (traj.impulse_times[n - 2] if n > 1 else 0.0)
    r = np.hypot(*traj.post_impulse_states[n - 1])
    print(f"{n:>3} {tau:>12.6f} {gap:>10.6f} {r:>12.9f} {1 + 0.5 / 2**n:>12.9f}")

print("\nThe prey-predator system decays toward the origin; the impulse")
print("rescales the plane x1+x2+x3 = 1 outward onto x1+x2+x3 = 2:")
pp = build_fixture("prey_predator")
trj = impulsive_trajectory(pp, np.array([0.7, 0.6, 0.5]), 15.0, 0.05)
for n, tau in enumerate(trj.impulse_times, start=1):
    s = trj.post_impulse_states[n - 1].sum()
    print(f"  hit {n} at t = {tau:.4f}, post-impulse coordinate sum = {s:.9f}")

print("\nStarting below the lower plane, the sum only decreases and the")
print("impulsive set is never reached:")
print("  first_hitting_time ->",
      first_hitting_time(pp, np.array([0.2, 0.3, 0.3]), 30.0))
