"""From claims to payment streams and back.

A dividend process pays at several dates; at stage t only the tail from t on
matters, so the lifted measure is the plain measure of the aggregated tail.
That identity is exact, and witnesses of inconsistency transport across the
two levels.
"""
import json
from importlib import resources

import numpy as np

from perflat import (DividendProcess, DynamicMeasure, GainLossRatio, TVar,
                     binomial_tree, check_lift_axioms,
                     check_lift_time_consistency, lift_evaluate, lpm_ratio)

tree = binomial_tree(2)

# -- a stream paying at stages 1 and 2 -------------------------------------------
d1 = TVar(tree, 1, [1.0, -0.5], kind="bb")  # one amount per stage-1 atom
d2 = TVar(tree, 2, [2.0, -1.0, 1.0, -2.0], kind="bb")
dp = DividendProcess(tree, {1: d1, 2: d2})
print("payment dates:", sorted(dp.payments))

for t in tree.times:
    tail = dp.aggregate_from(t)
    print(f"tail from stage {t}:", tail.values)

# -- the lift is evaluation of the tail -------------------------------------------
m = GainLossRatio()
for t in tree.times:
    lifted = lift_evaluate(m, t, dp).values
    direct = m.evaluate(t, dp.aggregate_from(t)).values
    print(f"stage {t}: lifted {np.round(lifted, 6)} "
          f"(matches direct: {bool(np.array_equal(lifted, direct))})")

# past payments never matter: shifting the stage-1 payment is invisible at 2
dp_shift = DividendProcess(tree, {1: TVar(tree, 1, d1.values + 100.0, kind="bb"),
                                  2: d2})
same = np.array_equal(lift_evaluate(m, 2, dp).values,
                      lift_evaluate(m, 2, dp_shift).values)
print("stage-2 value ignores the stage-1 payment:", same)

# -- the lifted measure satisfies the same axioms ----------------------------------
rep = check_lift_axioms(m, tree, trials=60, rng_seed=2)
print("\nlift axioms:", "all pass" if rep.passed else "FAILURES")

# -- witness transport ---------------------------------------------------------------
# the pinned lpm counterexample, restated as a single terminal payment
pinned = json.loads(resources.files("perflat").joinpath(
    "fixtures/lpm_witness.json").read_text())
rep = check_lift_time_consistency(DynamicMeasure(lpm_ratio(2.0)), tree,
                                  trials=40, rng_seed=0, witness=pinned)
for line in rep.summary_lines():
    print(" ", line)
