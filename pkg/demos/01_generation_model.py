#!/usr/bin/env python3
"""Walk through the two-stage candidate-set generation model.

A candidate set forms in two draws: the correct label comes from a
Categorical distribution over classes, then every other label slips into
the set independently with its own Bernoulli probability.  This script
evaluates the induced set density by hand, verifies the subset-sum
identity by brute force, and corrupts a tiny clean dataset both ways.
"""

import itertools

import numpy as np

from idgp.generation import (
    CleanScorerConfig,
    candidate_set_density,
    corrupt_instance_dependent,
    corrupt_uniform,
    make_clean_dataset,
    train_clean_scorer,
)

theta = np.array([0.7, 0.3])
z = np.array([0.2, 0.4])
print("two classes, theta =", theta, " z =", z)
for s in [(0,), (1,), (0, 1)]:
    print(f"  p(S = {tuple(j + 1 for j in s)}) = {candidate_set_density(s, theta, z):.4f}")

total = sum(candidate_set_density(s, theta, z) for s in [(0,), (1,), (0, 1)])
print(f"sum over nonempty subsets          = {total:.4f}")
print(f"closed form sum_j theta_j (1-z_j)  = {float((theta * (1 - z)).sum()):.4f}")

print("\nbrute-force identity for a random 6-class model:")
rng = np.random.default_rng(0)
theta6 = rng.dirichlet(np.ones(6))
z6 = rng.uniform(0.1, 0.9, size=6)
total6 = sum(candidate_set_density(s, theta6, z6)
             for size in range(1, 7)
             for s in itertools.combinations(range(6), size))
print(f"  enumerated over 2^6 subsets: {total6:.12f}")
print(f"  sum_j theta_j (1 - z_j):     {float((theta6 * (1 - z6)).sum()):.12f}")

# --- corrupting a clean dataset -------------------------------------------
print("\ncorrupting 300 clean instances (3 well-separated blobs):")
centers = np.array([[3.0, 0.0], [-3.0, 0.0], [0.0, 3.0]])
X = np.vstack([c + rng.normal(0, 0.9, (100, 2)) for c in centers])
y = np.repeat(np.arange(3), 100)
clean = make_clean_dataset(X, y, 3)

uniform, rep_u = corrupt_uniform(clean, p=0.3, seed=7)
# each wrong label flips in with p; an all-labels set drops one member,
# which happens with probability p^(c-1)
expect = 1 + 2 * 0.3 - 0.3 ** 2
print(f"  uniform p=0.3:        avg |S| = {rep_u.avg_set_size:.3f} "
      f"(expected {expect:.2f})")

scores, _ = train_clean_scorer(clean, CleanScorerConfig(epochs=3, lr=0.01, seed=1))
instance, rep_i = corrupt_instance_dependent(clean, scores, seed=7)
print(f"  instance-dependent:   avg |S| = {rep_i.avg_set_size:.3f}")
print(f"  per-class ambiguity (how often each label intrudes as a wrong "
      f"candidate):\n    uniform  {np.round(rep_u.per_class_ambiguity, 3)}"
      f"\n    instance {np.round(rep_i.per_class_ambiguity, 3)}")

sizes = np.bincount([len(s) for s in instance.candidates], minlength=4)[1:]
print("  instance-dependent set-size histogram |S|=1,2:",
      dict(enumerate(sizes.tolist(), start=1)))
print("\nboundary instances absorb neighbours into their candidate sets;"
      "\ninterior ones mostly stay unambiguous - that is what makes the"
      "\ncorruption instance-dependent rather than uniform.")
