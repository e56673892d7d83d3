"""The gain-loss ratio and the risk family it induces.

beta_t(X) = E[X|F_t] / E[X^-|F_t] wherever the numerator is positive.  The
induced risk at level z is the least capital whose addition lifts the ratio
to z; sweeping z traces a per-atom curve, monotone by construction.
"""
import numpy as np

from perflat import (GainLossRatio, XVar, binomial_tree, coin2, evaluate,
                     induce_risk, induced_family, reconstruct, risk_curve)

m = GainLossRatio()

# -- hand values on the coin space --------------------------------------------
space = coin2()
for vals in ([3.0, -1.0], [1.0, -1.0], [-1.0, -2.0], [1.0, 0.0]):
    b = evaluate(m, 0, XVar(space, vals)).values[0]
    print(f"beta({vals}) = {b:g}")

# -- conditional values and induced risks -------------------------------------
tree = binomial_tree(2)
x = XVar(tree, [2.0, -1.0, 4.0, -2.0])
print("\nstage-1 ratios:", evaluate(m, 1, x).values)

for z in (0.5, 1.0, 2.0, 4.0):
    rp = induce_risk(m, 0, z, x)
    print(f"rho^{z:g}(X) = {rp.values.values[0]: .6f}")

# capital that restores the ratio exactly: beta(X + rho) == z
z = 2.0
rho = induce_risk(m, 0, z, x).values.values[0]
shifted = evaluate(m, 0, XVar(tree, x.values + rho)).values[0]
print(f"\nbeta(X + rho^2) = {shifted:.9f} (target 2)")

# -- round trip: measure -> family -> measure ----------------------------------
fam = induced_family(m)
back = reconstruct(fam, 1, x)
print("reconstructed stage-1 ratios:", np.round(back.values, 9))

# -- a curve suitable for plotting or CSV export -------------------------------
curve = risk_curve(m, 1, x, np.linspace(0.25, 6.0, 12))
print("\ncurve rows (z, rho per atom):")
for zz, row in zip(curve.zs, curve.matrix()):
    print(f"  z = {zz:5.2f}  rho = {np.round(row, 5)}")
print("monotone per atom:", bool(np.all(np.diff(curve.matrix(), axis=0) >= 0)))
