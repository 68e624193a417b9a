"""Identification classes and the min-over-representatives distance.

The impulse map identifies each point of the impulsive set with its image.
On finite point sets the class distance is computed exactly; its metric
axioms are audited, not assumed, because the min-over-representatives
construction genuinely fails the triangle inequality once classes bridge the
set and its image.
"""

import numpy as np

from impulseflow import (
    build_fixture,
    candidate_cloud,
    equivalence_class,
    metric_axiom_audit,
    quotient_distance,
    representative_pair,
    sample_impulsive_set,
)

annulus = build_fixture("annulus")

a = equivalence_class(annulus, np.array([1.0, 0.0]))
b = equivalence_class(annulus, np.array([-1.25, 0.0]))
print("class of (1, 0):     ", a.members.tolist())
print("class of (-1.25, 0): ", b.members.tolist())
print(f"class distance = {quotient_distance(a, b)}  (min of the four pair distances)")
p, q = representative_pair(a, b)
print(f"attained by p = {p}, q = {q}")

rng = np.random.default_rng(0)
interior = candidate_cloud(annulus, 200, rng)
audit = metric_axiom_audit(annulus, interior)
print(f"\naudit on 200 random interior points: triangle violations = "
      f"{audit.triangle_violations} (classes are singletons, distance is Euclidean)")

mixed = np.vstack([
    candidate_cloud(annulus, 60, rng),
    sample_impulsive_set(annulus, "D", 20),
    sample_impulsive_set(annulus, "ID", 20),
])
audit = metric_axiom_audit(annulus, mixed)
print(f"audit with on-set points added: triangle violations = "
      f"{audit.triangle_violations}, worst excess = {audit.worst_triangle_excess:.3f}")
print("  (two-member classes bridge the far-apart segments: the distance is a")
print("   metric only on the recurrent part, and the audit surfaces exactly that)")

doubling = build_fixture("doubling_suspension")
c = equivalence_class(doubling, np.array([np.cos(0.4), np.sin(0.4), 0.0]))
print(f"\ndoubling suspension: the impulse map is two-to-one, so a bottom-circle")
print(f"point carries {len(c)} members (itself plus both angle-halving preimages)")
