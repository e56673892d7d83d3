"""Bring your own measure and let the axiom checker grade it.

A valid measure needs six properties; the checker samples each and returns a
named verdict with a witness on failure.  Two homemade candidates below: a
bounded concave transform of the conditional mean (fine) and a squared mean
(fails monotonicity and quasi-concavity, with receipts).
"""
import numpy as np

from perflat import (CustomMeasure, GainLossRatio, binomial_tree, check_axioms,
                     check_scale_invariance, cond_expect, lpm_ratio)
from perflat.lattice import XVar, atom_expect

tree = binomial_tree(2)


# -- candidate 1: tanh of the conditional mean, levels in (-1, 1) ----------------
def tanh_mean(space, t, leaf_values):
    return np.tanh(atom_expect(space, t, leaf_values))


m_ok = CustomMeasure(tanh_mean, z_d=-1.0, z_u=1.0, kind="tanh_mean")
rep = check_axioms(m_ok, tree, 1, trials=250, rng_seed=4)
print("tanh of the mean:")
for line in rep.summary_lines():
    print(" ", line)


# -- candidate 2: squared conditional mean, obviously not monotone ----------------
def squared_mean(space, t, leaf_values):
    return atom_expect(space, t, leaf_values) ** 2


m_bad = CustomMeasure(squared_mean, z_d=0.0, z_u=np.inf, kind="squared_mean")
rep = check_axioms(m_bad, tree, 1, trials=250, rng_seed=4)
print("\nsquared mean:")
for line in rep.summary_lines():
    print(" ", line)
bad = [r for r in rep.results if r.passed is False]
if bad and bad[0].witness:
    print("  first witness:", {k: v for k, v in bad[0].witness.items()
                               if k in ("x", "y", "note")} or bad[0].witness)

# -- scale invariance is extra, not part of the six -------------------------------
print("\nscale invariance:")
for m in (GainLossRatio(), lpm_ratio(2.0)):
    rep = check_scale_invariance(m, tree, 1, trials=250, rng_seed=4)
    print(f"  {m.label()}: {'passes' if rep.passed else 'fails'}")
