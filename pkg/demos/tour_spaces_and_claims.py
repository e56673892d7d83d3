"""Filtered spaces and claims in five minutes.

Builds the stock two-period coin tree, pokes at its atoms, then round-trips a
space and a claim through JSON.
"""
import numpy as np

from perflat import (XVar, binomial_tree, coin2, cond_expect, dump_json,
                     ess_inf, ess_sup, random_tree)

# -- the smallest interesting space: one coin flip ---------------------------
space = coin2()
print("coin2:", space.name, "times", space.times, "leaves", space.leaf_ids)

# -- a two-period recombining-looking (but not recombining) binomial ---------
tree = binomial_tree(2)
for t in tree.times:
    ids = [tree.atom_id(t, k) for k in range(tree.n_atoms(t))]
    print(f"stage {t}: {tree.n_atoms(t)} atoms {ids}")

# claims live on leaves; stage variables live on atoms
x = XVar(tree, [3.0, -1.0, 2.0, -2.0])
for t in tree.times:
    e = cond_expect(x, t)
    print(f"E[X | F_{t}] =", np.round(e.values, 4))

# tower property, numerically exact here
inner = cond_expect(x, 1).promote()
print("E[E[X|F_1]] =", cond_expect(inner, 0).values, "vs E[X] =",
      cond_expect(x, 0).values)

# conditional essential bounds
print("ess inf at stage 1:", ess_inf(x, 1).values)
print("ess sup at stage 1:", ess_sup(x, 1).values)

# -- serialization ------------------------------------------------------------
blob = tree.to_json()
print("\nspace as JSON:")
print(dump_json(blob)[:200], "...")

# a random tree for stress tests: probabilities renormalized, root split
rng = np.random.default_rng(7)
rt = random_tree(rng, periods=2, max_leaves=10)
print("\nrandom tree:", rt.n_leaves, "leaves, atom counts",
      [rt.n_atoms(t) for t in rt.times])
