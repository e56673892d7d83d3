"""Families of conditional convex risk measures attached to a performance measure.

For a level z strictly inside (z_d, z_u) the induced risk is the smallest stage-t
capital that lifts the claim to level z:

    rho_t^z(X) = essinf{xi stage-t measurable : beta_t(X + xi) >= z}

computed per atom by bracket expansion and bisection (locality reduces the essinf to a
scalar infimum on each atom, and c -> beta_t(X + c) is nondecreasing).  The key sign
equivalences are: beta_t(X) > z on B iff rho_t^z(X) < 0 on B, and beta_t(X) <= z on B
iff rho_t^z(X) >= 0 on B.

A standard family packages one risk measure per level (nondecreasing and continuous in
z, each level convex, translation invariant, local, continuous from below, with
rho^z(0) diverging to -inf as z does when the interval is unbounded below).  Any
standard family regenerates a performance measure through

    beta_t(X) = z_d on the set where all levels stay nonnegative,
                sup{z : rho_t^z(X) < 0 on the atom} elsewhere,

and the induced family is the unique standard family doing so; ``reconstruct``
implements that supremum by bisection over levels with a tan/atan change of variables
for unbounded intervals.  Duality helpers cover the gain-loss ratio (a per-atom linear
program over conditional densities), truncation limits, closure diagnostics, and a
weak-duality penalty probe.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .lattice import (INF, FilteredSpace, TVar, XVar, atom_expect, num_to_json,
                      sample_event, sample_tvar, sample_xvar)
from .measures import PerformanceMeasure, _resolve_stage_param
from .report import CheckResult, Report
from .simplex import solve_lp
from .solvers import group_logsumexp, vector_monotone_inf
from .util import derived_rng

TOL_C = 1e-10   # capital tolerance for the per-atom bisection
TOL_Z = 1e-8    # level tolerance (in atan coordinates) for reconstruction


# ---------------------------------------------------------------------------
# induced risks


@dataclass
class RiskPoint:
    """Per-atom risk at one level: stage, level(s), values (bounded above, -inf ok)."""

    stage: int
    level: float | np.ndarray
    values: TVar
    near_zero: np.ndarray
    capped: np.ndarray

    def to_json(self) -> dict:
        lv = self.level
        lv_json = [num_to_json(v) for v in np.atleast_1d(np.asarray(lv, dtype=float))]
        space = self.values.space
        return {"stage": self.stage,
                "z": lv_json[0] if np.ndim(lv) == 0 else lv_json,
                "rho": {space.atom_id(self.stage, k): num_to_json(v)
                        for k, v in enumerate(self.values.values)}}


def _induce_raw(m: PerformanceMeasure, t: int, z, x: XVar, tol: float = TOL_C):
    """Per-atom inf{c : beta_t(X + c) >= z}; z may be scalar or per-atom array."""
    space = x.space
    idx = space.atom_index[t]
    n = space.n_atoms(t)
    target = np.broadcast_to(np.asarray(z, dtype=float), (n,)).astype(float).copy()
    fmin, fmax = x.finite_min(), x.finite_max()
    if not math.isfinite(fmin):  # no finite leaf at all
        fmin, fmax = 0.0, 0.0
    lo0 = np.full(n, -fmax - 1.0)
    hi0 = np.full(n, -fmin + 1.0)

    def g(c):
        return m.values(space, t, x.values + c[idx])

    try:
        res = vector_monotone_inf(g, lo0, hi0, target, tol=tol)
    except RuntimeError as e:
        raise RuntimeError(
            "shift bracket never reached the level from below; the measure's upper "
            "threshold looks misdeclared") from e
    return res.values, res.hit_lower_cap, res.near_zero


def induce_risk(m: PerformanceMeasure, t: int, z: float, x: XVar,
                tol: float = TOL_C) -> RiskPoint:
    """Smallest stage-t capital lifting X to level z, per atom.

    Requires z strictly inside (z_d, z_u).  An atom whose value stays at or above z
    for arbitrarily negative capital reports -inf.
    """
    t = x.space.check_stage(t)
    z_arr = np.asarray(z, dtype=float)
    if np.any(z_arr <= m.z_d) or np.any(z_arr >= m.z_u):
        raise ValueError(f"level must lie strictly inside ({m.z_d}, {m.z_u})")
    vals, capped, near = _induce_raw(m, t, z, x, tol=tol)
    return RiskPoint(stage=t, level=(float(z) if np.ndim(z) == 0 else z_arr),
                     values=TVar(x.space, t, vals, kind="ba"),
                     near_zero=near, capped=capped)


def _entropic_raw(lam, t: int, z, x: XVar) -> np.ndarray:
    space = x.space
    lam_atom = _resolve_stage_param(lam, space, t, "risk_aversion")
    if np.any(lam_atom <= 0.0):
        raise ValueError("risk aversion must be positive")
    idx = space.atom_index[t]
    lam_leaf = lam_atom[idx]
    mass_leaf = space.atom_mass[t][idx]
    with np.errstate(invalid="ignore", over="ignore", divide="ignore"):
        v = -lam_leaf * x.values + np.log(space.probs / mass_leaf)
    v = np.where(np.isposinf(x.values), -INF, v)  # e^(-lam * inf) = 0 contribution
    lse = group_logsumexp(v, idx, space.n_atoms(t))
    return (lse - np.log1p(-np.asarray(z, dtype=float))) / lam_atom


def entropic_closed_form(lam, t: int, z: float, x: XVar) -> RiskPoint:
    """rho_t^z(X) = ln E_t[e^(-lam X)]/lam - ln(1-z)/lam, valid for z < 1.

    Exact-formula oracle for the exponential-utility measure's induced family.
    """
    t = x.space.check_stage(t)
    if not np.all(np.asarray(z, dtype=float) < 1.0):
        raise ValueError("the exponential-utility interval is (-inf, 1): need z < 1")
    vals = _entropic_raw(lam, t, z, x)
    near = np.abs(vals) <= TOL_C
    return RiskPoint(stage=t, level=z, values=TVar(x.space, t, vals, kind="ba"),
                     near_zero=near, capped=np.isneginf(vals))


# ---------------------------------------------------------------------------
# standard families


@dataclass
class StandardFamily:
    """One conditional convex risk measure per level z in an open interval.

    ``raw(z, t, x)`` returns the per-atom values; z may be a scalar or a per-atom
    array (each atom evaluated at its own level) — locality makes that well defined.
    ``zero_log_level(space, t, L)`` optionally evaluates rho^z(0) at z = -e^L, for
    probing the lower divergence far beyond float range.
    """

    interval: tuple[float, float]
    raw: Callable
    provenance: str = "user-supplied"
    label: str = "family"
    zero_log_level: Callable | None = None
    measure: PerformanceMeasure | None = None

    def risk(self, t: int, z: float, x: XVar) -> RiskPoint:
        z_d, z_u = self.interval
        z_arr = np.asarray(z, dtype=float)
        if np.any(z_arr <= z_d) or np.any(z_arr >= z_u):
            raise ValueError(f"level must lie strictly inside ({z_d}, {z_u})")
        vals = np.asarray(self.raw(z, t, x), dtype=float)
        return RiskPoint(stage=t, level=z, values=TVar(x.space, t, vals, kind="ba"),
                         near_zero=np.abs(vals) <= TOL_C, capped=np.isneginf(vals))


def induced_family(m: PerformanceMeasure, tol: float = TOL_C) -> StandardFamily:
    """The family inf{c : beta_t(X+c) >= z} for z in (z_d, z_u)."""

    def raw(z, t, x):
        return _induce_raw(m, t, z, x, tol=tol)[0]

    return StandardFamily(interval=(m.z_d, m.z_u), raw=raw,
                          provenance="induced-from-measure",
                          label=f"induced[{m.label()}]",
                          zero_log_level=m.risk_at_zero_log_level, measure=m)


def entropic_family(lam) -> StandardFamily:
    """Closed-form exponential-utility family on (-inf, 1)."""

    def raw(z, t, x):
        return _entropic_raw(lam, t, z, x)

    def zero_log_level(space, t, log_level):
        lam_atom = _resolve_stage_param(lam, space, t, "risk_aversion")
        return -np.logaddexp(0.0, log_level) / lam_atom

    return StandardFamily(interval=(-INF, 1.0), raw=raw, provenance="closed-form",
                          label="entropic", zero_log_level=zero_log_level)


def _lower_divergence(space: FilteredSpace, t: int, interval, raw,
                      zero_log_level) -> tuple[bool | None, str]:
    """Confirm esssup rho^z(0) < -1e6 for z far enough down (unbounded intervals)."""
    z_d, z_u = interval
    if math.isfinite(z_d):
        return None, "interval bounded below; divergence condition is vacuous"
    if zero_log_level is not None:
        level = 64.0
        while level <= 1e12:
            vals = np.asarray(zero_log_level(space, t, level), dtype=float)
            top = float(np.max(vals))
            if top < -1e6:
                return True, f"esssup rho(0) = {top:.4g} at z = -e^{level:g}"
            level *= 8.0
        return False, "closed form never fell below -1e6"
    zero = XVar.constant(space, 0.0)
    for k in (6, 8, 10, 12, 14, 16, 18, 24, 32, 48, 64, 96, 128, 192, 256, 300):
        z = -(10.0 ** k)
        if z <= z_d or z >= z_u:
            continue
        vals = np.asarray(raw(z, t, zero), dtype=float)
        top = float(np.max(vals))
        if top < -1e6:
            return True, f"esssup rho(0) = {top:.4g} at z = -1e{k}"
    return False, "rho(0) never fell below -1e6 down to z = -1e300"


@dataclass
class RiskCurve:
    """Risk values on a level grid for one claim; nondecreasing in z per atom."""

    stage: int
    zs: np.ndarray
    points: list
    x: XVar
    limit_note: str = ""
    suspect_jumps: list = field(default_factory=list)

    def matrix(self) -> np.ndarray:
        return np.vstack([p.values.values for p in self.points])

    def to_json(self) -> dict:
        space = self.x.space
        return {"stage": self.stage,
                "z": [num_to_json(z) for z in self.zs],
                "rho": {space.atom_id(self.stage, k):
                        [num_to_json(v) for v in self.matrix()[:, k]]
                        for k in range(space.n_atoms(self.stage))},
                "limit_note": self.limit_note,
                "suspect_jumps": self.suspect_jumps}

    def to_csv(self) -> str:
        space = self.x.space
        mat = self.matrix()
        lines = ["atom_id,z,rho"]
        for k in range(space.n_atoms(self.stage)):
            aid = space.atom_id(self.stage, k)
            for j, z in enumerate(self.zs):
                lines.append(f"{aid},{num_to_json(float(z))},{num_to_json(mat[j, k])}")
        return "\n".join(lines) + "\n"


def risk_curve(m: PerformanceMeasure, t: int, x: XVar, z_grid,
               tol: float = TOL_C, check_limit: bool = True) -> RiskCurve:
    """Induced risks over a strictly increasing grid inside (z_d, z_u).

    Monotonicity in z is asserted.  When the interval is unbounded below, the lower
    divergence of rho^z(0) is additionally confirmed (closed form when available,
    otherwise a downward level ladder) and recorded in ``limit_note``.
    """
    t = x.space.check_stage(t)
    zs = np.asarray(z_grid, dtype=float)
    if zs.ndim != 1 or zs.size == 0 or np.any(np.diff(zs) <= 0):
        raise ValueError("grid must be one-dimensional and strictly increasing")
    if zs[0] <= m.z_d or zs[-1] >= m.z_u:
        raise ValueError(f"grid must stay strictly inside ({m.z_d}, {m.z_u})")
    points = [induce_risk(m, t, float(z), x, tol=tol) for z in zs]
    curve = RiskCurve(stage=t, zs=zs, points=points, x=x)
    mat = curve.matrix()
    drops = np.diff(mat, axis=0) < -(3.0 * tol + 1e-9)
    if np.any(drops):
        j, k = map(int, np.argwhere(drops)[0])
        raise AssertionError(
            f"risk not nondecreasing in the level: atom {x.space.atom_id(t, k)} "
            f"drops between z={zs[j]:g} and z={zs[j + 1]:g}")
    if zs.size >= 3:
        gaps = np.abs(np.diff(mat, axis=0))
        med = float(np.median(gaps)) if gaps.size else 0.0
        big = np.argwhere(gaps > 50.0 * (med + 1e-9) + 1e-3)
        curve.suspect_jumps = [
            {"atom": x.space.atom_id(t, int(k)), "z_lo": float(zs[j]),
             "z_hi": float(zs[j + 1]), "gap": float(gaps[j, k])} for j, k in big]
    if check_limit and not math.isfinite(m.z_d):
        fam = induced_family(m, tol=tol)
        ok, note = _lower_divergence(x.space, t, fam.interval, fam.raw,
                                     fam.zero_log_level)
        if ok is False:
            raise RuntimeError(f"lower divergence of rho(0) not confirmed: {note}")
        curve.limit_note = note
    return curve


# ---------------------------------------------------------------------------
# reconstruction


def reconstruct(f: StandardFamily, t: int, x: XVar, tol_z: float = TOL_Z,
                tol_c: float = TOL_C) -> TVar:
    """Regenerate the measure value from a standard family, per atom.

    Returns z_d on atoms where every probed level keeps rho >= 0 (including probes at
    the far bottom of an unbounded interval), the exact upper endpoint on atoms whose
    risk stays negative at the far top, and otherwise sup{z : rho^z < 0} by bisection:
    first in u = atan(z) to tolerance tol_z, then a plain-z polish for absolute
    accuracy on moderate levels.  Strict negativity is decided as rho < -tol_c.
    """
    space = x.space
    t = space.check_stage(t)
    z_d, z_u = f.interval
    n = space.n_atoms(t)
    u_lo = np.full(n, np.nan)   # levels known to satisfy rho < -tol_c (below beta)
    u_hi = np.full(n, np.nan)   # levels known to satisfy rho >= -tol_c (at/above)
    out = np.full(n, np.nan)
    done = np.zeros(n, dtype=bool)
    z_fill = math.tan(0.5 * (math.atan(max(z_d, -1e12)) + math.atan(min(z_u, 1e12))))

    def probe(z_per_atom: np.ndarray, active: np.ndarray) -> np.ndarray:
        z_vec = np.where(active, z_per_atom, z_fill)
        vals = np.asarray(f.raw(z_vec, t, x), dtype=float)
        return vals < -tol_c  # strictly negative risk: the level sits below beta

    # top side: escalate until the risk stops being negative
    if math.isfinite(z_u):
        top_levels = [math.tan(math.atan(z_u) - max(tol_z, 1e-12))]
    else:
        top_levels = [1e8, 1e12, 1e16]
    pending = np.ones(n, dtype=bool)
    for lvl in top_levels:
        if not pending.any():
            break
        neg = probe(np.full(n, lvl), pending)
        u = math.atan(lvl)
        fresh_hi = pending & ~neg
        u_hi[fresh_hi] = u
        u_lo[pending & neg] = u
        pending = pending & neg
    out[pending] = z_u  # negative all the way up: the value is the upper endpoint
    done |= pending

    # bottom side: atoms that never showed a negative risk may sit at the lower end
    if math.isfinite(z_d):
        bottom_levels = [math.tan(math.atan(z_d) + max(tol_z, 1e-12))]
    else:
        bottom_levels = [-1e8, -1e12, -1e16]
    pending = ~done & np.isnan(u_lo)
    for lvl in bottom_levels:
        if not pending.any():
            break
        neg = probe(np.full(n, lvl), pending)
        u = math.atan(lvl)
        u_lo[pending & neg] = u
        u_hi[pending & ~neg] = np.minimum(
            np.where(np.isnan(u_hi[pending & ~neg]), INF, u_hi[pending & ~neg]), u)
        pending = pending & ~neg
    out[pending] = z_d  # rho >= 0 at every probed level: the B_X branch
    done |= pending

    # bisection in atan coordinates
    for _ in range(200):
        open_mask = ~done & ((u_hi - u_lo) > tol_z)
        if not open_mask.any():
            break
        mid = 0.5 * (u_lo + u_hi)
        neg = probe(np.where(open_mask, np.tan(mid), z_fill), open_mask)
        u_lo = np.where(open_mask & neg, mid, u_lo)
        u_hi = np.where(open_mask & ~neg, mid, u_hi)

    # plain-z polish where the tangent map stretched the tolerance
    todo = ~done
    if todo.any():
        z_lo = np.where(todo, np.tan(u_lo), 0.0)
        z_hi = np.where(todo, np.tan(u_hi), 0.0)
        for _ in range(80):
            width = z_hi - z_lo
            scale = np.maximum(1.0, np.minimum(np.abs(z_lo), 1e9) * 1e-3)
            active = todo & (width > 1e-7 * scale) & (np.abs(z_lo) < 1e9)
            if not active.any():
                break
            mid = 0.5 * (z_lo + z_hi)
            neg = probe(np.where(active, mid, z_fill), active)
            z_lo = np.where(active & neg, mid, z_lo)
            z_hi = np.where(active & ~neg, mid, z_hi)
        out = np.where(todo, 0.5 * (z_lo + z_hi), out)

    kind = None if np.any(np.isneginf(out)) else "bb"
    return TVar(space, t, out, kind=kind)


# ---------------------------------------------------------------------------
# family validation


def validate_standard_family(f: StandardFamily, space: FilteredSpace, t: int,
                             trials: int = 60, z_grid=None, rng_seed: int = 0,
                             tol: float = 1e-8) -> Report:
    """Property-based verification of the standard-family conditions.

    Per level: finite on bounded claims, convex, monotone nonincreasing, translation
    invariant, local, continuous from below.  Across levels: per-atom paths
    nondecreasing and continuous, with rho^z(0) diverging when the interval is
    unbounded below.  Positive homogeneity (coherence) is detected and reported.
    """
    t = space.check_stage(t)
    z_d, z_u = f.interval
    if z_grid is None:
        u_lo = math.atan(max(z_d, -1e6))
        u_hi = math.atan(min(z_u, 1e6))
        z_grid = [math.tan(u_lo + q * (u_hi - u_lo))
                  for q in (0.08, 0.2, 0.35, 0.5, 0.65, 0.8, 0.92)]
    zs = np.asarray(sorted(z_grid), dtype=float)
    rep = Report(title=f"standard_family[{f.label}] t={t}", seed=rng_seed,
                 meta={"space": space.name or "", "provenance": f.provenance,
                       "z_grid": [num_to_json(z) for z in zs]})

    def rand_z(rng):
        return float(zs[rng.integers(zs.size)])

    # a.1 finite values on bounded claims
    res = CheckResult("finite_on_bounded_claims", True, trials=trials)
    for k in range(trials):
        rng = derived_rng(rng_seed, 21, k)
        xv = sample_xvar(space, rng)
        vals = np.asarray(f.raw(rand_z(rng), t, xv), dtype=float)
        if not np.all(np.isfinite(vals)):
            res.passed, res.failures = False, res.failures + 1
            if res.witness is None:
                res.witness = {"X": xv.to_json(), "rho": [num_to_json(v) for v in vals]}
    rep.add(res)

    # a.2 convexity
    res = CheckResult("convexity", True, trials=trials)
    for k in range(trials):
        rng = derived_rng(rng_seed, 22, k)
        xv, yv = sample_xvar(space, rng), sample_xvar(space, rng)
        c = float(rng.uniform())
        z = rand_z(rng)
        mix = XVar(space, c * xv.values + (1.0 - c) * yv.values, validate=False)
        lhs = np.asarray(f.raw(z, t, mix), dtype=float)
        rhs = c * np.asarray(f.raw(z, t, xv), dtype=float) + \
            (1.0 - c) * np.asarray(f.raw(z, t, yv), dtype=float)
        if np.any(lhs > rhs + 1e-8):
            res.passed, res.failures = False, res.failures + 1
            if res.witness is None:
                res.witness = {"X": xv.to_json(), "Y": yv.to_json(), "c": c,
                               "z": num_to_json(z)}
    rep.add(res)

    # a.3 monotone nonincreasing
    res = CheckResult("monotone_nonincreasing", True, trials=trials)
    for k in range(trials):
        rng = derived_rng(rng_seed, 23, k)
        xv = sample_xvar(space, rng)
        bump = rng.uniform(0.0, 2.0, size=space.n_leaves)
        z = rand_z(rng)
        lo = np.asarray(f.raw(z, t, xv), dtype=float)
        hi = np.asarray(f.raw(z, t, XVar(space, xv.values + bump, validate=False)),
                        dtype=float)
        if np.any(hi > lo + tol):
            res.passed, res.failures = False, res.failures + 1
            if res.witness is None:
                res.witness = {"X": xv.to_json(), "z": num_to_json(z)}
    rep.add(res)

    # a.4 translation invariance
    res = CheckResult("translation_invariance", True, trials=trials)
    for k in range(trials):
        rng = derived_rng(rng_seed, 24, k)
        xv = sample_xvar(space, rng)
        xi = sample_tvar(space, t, rng)
        z = rand_z(rng)
        base = np.asarray(f.raw(z, t, xv), dtype=float)
        shifted = np.asarray(f.raw(z, t, xv + xi), dtype=float)
        if np.any(np.abs(shifted - (base - xi.values)) > tol):
            res.passed, res.failures = False, res.failures + 1
            if res.witness is None:
                res.witness = {"X": xv.to_json(), "xi": xi.to_json(),
                               "z": num_to_json(z)}
    rep.add(res)

    # a.5 locality
    res = CheckResult("locality", True, trials=trials)
    for k in range(trials):
        rng = derived_rng(rng_seed, 25, k)
        xv = sample_xvar(space, rng)
        mask = sample_event(space, t, rng)
        z = rand_z(rng)
        lhs = np.asarray(f.raw(z, t, xv), dtype=float)
        rhs = np.asarray(f.raw(z, t, xv.restrict(mask)), dtype=float)
        bad = mask.flags & (np.abs(lhs - rhs) > tol)
        if np.any(bad):
            res.passed, res.failures = False, res.failures + 1
            if res.witness is None:
                res.witness = {"X": xv.to_json(), "z": num_to_json(z)}
    rep.add(res)

    # a.6 continuity from below: rho(X - delta) decreases to rho(X)
    res = CheckResult("continuity_from_below", True, trials=max(10, trials // 2))
    deltas = [2.0 ** -e for e in (0, 4, 8, 16, 24, 32, 40)]
    for k in range(res.trials):
        rng = derived_rng(rng_seed, 26, k)
        xv = sample_xvar(space, rng, inf_prob=0.05 if k % 3 == 0 else 0.0)
        z = rand_z(rng)
        target = np.asarray(f.raw(z, t, xv), dtype=float)
        seq = [np.asarray(f.raw(z, t, XVar(space, xv.values - d, validate=False)),
                          dtype=float) for d in deltas]
        mono_ok = all(np.all(b <= a + tol) for a, b in zip(seq, seq[1:]))
        with np.errstate(invalid="ignore"):  # -inf minus -inf off the finite branch
            close = np.abs(seq[-1] - target) <= 1e-6
        lim_ok = np.all(np.where(np.isfinite(target), close,
                                 seq[-1] <= -1e6))
        if not (mono_ok and lim_ok):
            res.passed, res.failures = False, res.failures + 1
            if res.witness is None:
                res.witness = {"X": xv.to_json(), "z": num_to_json(z)}
    rep.add(res)

    # b) per-atom paths nondecreasing and continuous in the level
    res = CheckResult("z_paths_monotone", True, trials=max(10, trials // 2))
    worst = None
    for k in range(res.trials):
        rng = derived_rng(rng_seed, 27, k)
        xv = sample_xvar(space, rng)
        mat = np.vstack([np.asarray(f.raw(float(z), t, xv), dtype=float) for z in zs])
        if np.any(np.diff(mat, axis=0) < -tol):
            res.passed, res.failures = False, res.failures + 1
            if res.witness is None:
                j, a = map(int, np.argwhere(np.diff(mat, axis=0) < -tol)[0])
                res.witness = {"X": xv.to_json(), "z_lo": num_to_json(float(zs[j])),
                               "z_hi": num_to_json(float(zs[j + 1])),
                               "atom": space.atom_id(t, a)}
        gaps = np.abs(np.diff(mat, axis=0))
        j, a = np.unravel_index(int(np.argmax(gaps)), gaps.shape)
        if worst is None or gaps[j, a] > worst[0]:
            worst = (float(gaps[j, a]), float(zs[j]), float(zs[j + 1]), xv, int(a))
    rep.add(res)

    res = CheckResult("z_paths_continuous", True, trials=1)
    if worst is not None and worst[0] > 1e-6:
        gap0, lo, hi, xv, a = worst
        for _ in range(2):  # refine the worst interval; a genuine jump will not shrink
            mid = 0.5 * (lo + hi)
            v_lo = float(np.asarray(f.raw(lo, t, xv), dtype=float)[a])
            v_mid = float(np.asarray(f.raw(mid, t, xv), dtype=float)[a])
            v_hi = float(np.asarray(f.raw(hi, t, xv), dtype=float)[a])
            if abs(v_mid - v_lo) >= abs(v_hi - v_mid):
                hi = mid
            else:
                lo = mid
        sub = max(abs(v_mid - v_lo), abs(v_hi - v_mid))
        if sub > 0.7 * gap0 + 1e-7:
            res.passed = False
            res.witness = {"X": xv.to_json(), "atom": space.atom_id(t, a),
                           "bracket": [num_to_json(lo), num_to_json(hi)],
                           "jump": num_to_json(sub)}
    else:
        res.note = "all sampled increments already below 1e-6"
    rep.add(res)

    # c) divergence of rho(0) when the interval is unbounded below
    ok, note = _lower_divergence(space, t, f.interval, f.raw, f.zero_log_level)
    rep.add(CheckResult("lower_divergence", ok if ok is not None else None,
                        trials=1, failures=0 if ok in (True, None) else 1, note=note))

    # coherence detection (informational): rho(kX) = k rho(X)
    res = CheckResult("coherence", True, trials=min(trials, 30))
    homogeneous = True
    for k in range(res.trials):
        rng = derived_rng(rng_seed, 28, k)
        xv = sample_xvar(space, rng)
        c = float(np.exp(rng.uniform(np.log(0.1), np.log(10.0))))
        z = rand_z(rng)
        a = np.asarray(f.raw(z, t, XVar(space, c * xv.values, validate=False)),
                       dtype=float)
        b = c * np.asarray(f.raw(z, t, xv), dtype=float)
        if np.any(np.abs(a - b) > 1e-7 * max(1.0, c)):
            homogeneous = False
            break
    res.note = ("positive homogeneity detected: coherent levels"
                if homogeneous else "convex but not positively homogeneous")
    rep.add(res)
    return rep


# ---------------------------------------------------------------------------
# gain-loss duality


def glr_dual_risk(t: int, z: float, x: XVar, tol: float = 1e-11) -> RiskPoint:
    """Gain-loss risk as a per-atom linear program over conditional densities.

    Maximizes the conditional expectation of -X over probability weights w >= 0 on the
    atom's leaves with w_i pbar_j <= (1+z) w_j pbar_i for every leaf pair (densities
    whose ratios stay within 1+z).  Agreement with the bisection route is the
    correctness oracle for this dual-set shape.
    """
    space = x.space
    t = space.check_stage(t)
    z = float(z)
    if not (0.0 < z < INF):
        raise ValueError("the dual form needs a finite level z > 0")
    if not np.all(np.isfinite(x.values)):
        raise ValueError("the dual form needs a finite-valued claim")
    n = space.n_atoms(t)
    out = np.empty(n)
    for k in range(n):
        idx = np.fromiter(space.atoms[t][k], dtype=np.intp)
        if idx.size == 1:
            out[k] = -float(x.values[idx[0]])
            continue
        pb = space.probs[idx] / space.atom_mass[t][k]
        c = x.values[idx].astype(float)
        m_leaves = idx.size
        rows = []
        for i in range(m_leaves):
            for j in range(m_leaves):
                if i == j:
                    continue
                row = np.zeros(m_leaves)
                row[i] += pb[j]
                row[j] -= (1.0 + z) * pb[i]
                rows.append(row)
        a_ub = np.vstack(rows)
        b_ub = np.zeros(a_ub.shape[0])
        a_eq = np.ones((1, m_leaves))
        b_eq = np.ones(1)
        try:
            sol = solve_lp(c, A_ub=a_ub, b_ub=b_ub, A_eq=a_eq, b_eq=b_eq, tol=tol)
        except Exception as e:
            raise RuntimeError(
                f"density polytope solve failed on atom {space.atom_id(t, k)}") from e
        out[k] = -sol.value
    return RiskPoint(stage=t, level=z, values=TVar(space, t, out, kind="ba"),
                     near_zero=np.abs(out) <= TOL_C, capped=np.zeros(n, dtype=bool))


@dataclass
class DualMeasure:
    """Absolutely continuous scenario weighting that agrees with P up to stage t."""

    space: FilteredSpace
    stage: int
    density: np.ndarray

    def __post_init__(self):
        self.density = np.asarray(self.density, dtype=float)
        if self.density.shape != (self.space.n_leaves,):
            raise ValueError("density must assign one value per leaf")
        if np.any(self.density < 0.0):
            raise ValueError("density must be nonnegative")
        mass = atom_expect(self.space, self.stage, self.density)
        if np.any(np.abs(mass - 1.0) > 1e-10):
            raise ValueError("conditional mass per stage atom must equal one")

    def expect(self, s: int, leaf_values: np.ndarray):
        """E^Q at stage s: per-atom values plus the mask of Q-charged atoms."""
        s = self.space.check_stage(s)
        idx = self.space.atom_index[s]
        w = self.space.probs * self.density
        contrib = np.where(w > 0.0, w * leaf_values, 0.0)  # 0 * inf = 0 off support
        num = np.bincount(idx, weights=contrib, minlength=self.space.n_atoms(s))
        den = np.bincount(idx, weights=w, minlength=self.space.n_atoms(s))
        mask = den > 1e-15
        vals = np.where(mask, num / np.where(mask, den, 1.0), 0.0)
        return vals, mask

    def to_json(self) -> dict:
        return {"space": self.space.name or "", "stage": self.stage,
                "density": {s: num_to_json(v)
                            for s, v in zip(self.space.leaf_ids, self.density)}}

    @classmethod
    def from_json(cls, d, space: FilteredSpace) -> "DualMeasure":
        from .lattice import num_from_json
        dens = np.zeros(space.n_leaves)
        for key, v in d["density"].items():
            dens[space.leaf_pos(str(key))] = num_from_json(v)
        return cls(space, int(d["stage"]), dens)


def sample_glr_density(space: FilteredSpace, t: int, z: float,
                       rng: np.random.Generator) -> DualMeasure:
    """A vertex of the gain-loss dual polytope picked by a random objective."""
    t = space.check_stage(t)
    density = np.empty(space.n_leaves)
    for k in range(space.n_atoms(t)):
        idx = np.fromiter(space.atoms[t][k], dtype=np.intp)
        pb = space.probs[idx] / space.atom_mass[t][k]
        if idx.size == 1:
            density[idx] = 1.0
            continue
        m_leaves = idx.size
        c = rng.normal(size=m_leaves)
        rows = []
        for i in range(m_leaves):
            for j in range(m_leaves):
                if i != j:
                    row = np.zeros(m_leaves)
                    row[i] += pb[j]
                    row[j] -= (1.0 + z) * pb[i]
                    rows.append(row)
        sol = solve_lp(c, A_ub=np.vstack(rows), b_ub=np.zeros(len(rows)),
                       A_eq=np.ones((1, m_leaves)), b_eq=np.ones(1))
        w = np.clip(sol.x, 0.0, None)
        w = w / w.sum()  # scrub solver roundoff; rescaling preserves the ratio bounds
        density[idx] = w / pb
    return DualMeasure(space, t, density)


def penalty_lower_bound(m: PerformanceMeasure, t: int, z: float, q: DualMeasure,
                        probes) -> np.ndarray:
    """Certified lower bound on the penalty of q: max over probes of E^Q[-Z] - rho(Z).

    The true penalty is a supremum over all claims; any finite probe set therefore
    bounds it from below.  Only this direction is computable without conjugacy
    machinery.
    """
    if q.stage != t:
        raise ValueError("the weighting must agree with P at the evaluation stage")
    best = np.full(q.space.n_atoms(t), -INF)
    for zk in probes:
        ev, mask = q.expect(t, -zk.values)
        rho = _induce_raw(m, t, z, zk)[0]
        cand = np.where(mask, ev - rho, -INF)
        best = np.maximum(best, cand)
    return best


def weak_duality_probe(m: PerformanceMeasure, t: int, z: float, x: XVar,
                       q: DualMeasure, probes=()) -> Report:
    """Check E^Q[-X] - rho(X) <= penalty lower bound once X joins the probe set.

    With X included the inequality holds by construction; the value of the probe is
    the gap it reports, a certified distance to the dual bound at this weighting.
    """
    rep = Report(title="weak_duality_probe", meta={"z": num_to_json(z)})
    all_probes = list(probes) + [x]
    alpha_hat = penalty_lower_bound(m, t, z, q, all_probes)
    ev, mask = q.expect(t, -x.values)
    rho = _induce_raw(m, t, z, x)[0]
    lhs = np.where(mask, ev - rho, -INF)
    ok = bool(np.all(lhs <= alpha_hat + 1e-9))
    rep.add(CheckResult("weak_duality_consistency", ok, trials=1,
                        failures=0 if ok else 1,
                        note="penalty estimated from below by the probe set",
                        witness=None if ok else {
                            "lhs": [num_to_json(v) for v in lhs],
                            "alpha_hat": [num_to_json(v) for v in alpha_hat]}))
    return rep


# ---------------------------------------------------------------------------
# truncation and closure diagnostics


def truncation_limit_check(m: PerformanceMeasure, t: int, z: float, x: XVar,
                           n_grid=None) -> Report:
    """rho(X truncated at n) decreases to rho(X) as the cap rises."""
    space = x.space
    t = space.check_stage(t)
    rep = Report(title=f"truncation_limit[{m.label()}]", meta={"z": num_to_json(z)})
    fmax = x.finite_max()
    base = max(1.0, abs(fmax) if math.isfinite(fmax) else 1.0)
    if n_grid is None:
        n_grid = [base * (2.0 ** k) for k in range(0, 15, 2)]
    caps = sorted(float(v) for v in n_grid)
    rho_full = _induce_raw(m, t, z, x)[0]
    seq = [_induce_raw(m, t, z, x.truncate(cap))[0] for cap in caps]

    mono = all(np.all(b <= a + 1e-9) for a, b in zip(seq, seq[1:]))
    rep.add(CheckResult("nonincreasing_in_cap", mono, trials=len(caps),
                        failures=0 if mono else 1))
    tail = np.abs(seq[-1] - rho_full) <= 1e-6
    both_neg_inf = np.isneginf(seq[-1]) & np.isneginf(rho_full)
    conv = bool(np.all(tail | both_neg_inf))
    rep.add(CheckResult("limit_matches_untruncated", conv, trials=1,
                        failures=0 if conv else 1,
                        witness=None if conv else {
                            "rho_capped": [num_to_json(v) for v in seq[-1]],
                            "rho": [num_to_json(v) for v in rho_full]}))
    if np.all(np.isfinite(x.values)) and caps[-1] >= fmax:
        inactive = bool(np.all(seq[-1] == rho_full))
        rep.add(CheckResult("cap_inactive_on_finite_claims", inactive, trials=1,
                            failures=0 if inactive else 1))
    return rep


def closure_check(m: PerformanceMeasure, t: int, z: float, trials: int = 40,
                  rng_seed: int = 0, space: FilteredSpace | None = None,
                  sampler: Callable | None = None) -> Report:
    """Boundary behavior of {rho <= 0}: interior shifts, limits, and the strict gap.

    For claims on the boundary, adding 1/n gives rho = -1/n < 0 and the sequence
    returns to the boundary; limits of sampled points of {rho < 0} stay in
    {rho <= 0}.  When the level exceeds the value at 0 while rho(0) = 0, the claim 0
    witnesses the gap between {rho <= 0} and the strict acceptance set.
    """
    if space is None:
        raise ValueError("space is required")
    t = space.check_stage(t)
    rep = Report(title=f"closure[{m.label()}] z={z:g}", seed=rng_seed,
                 meta={"space": space.name or ""})
    if sampler is None:
        sampler = lambda rng: sample_xvar(space, rng)

    res = CheckResult("interior_shift", True, trials=trials)
    inv_ns = [1.0 / n for n in (1, 4, 16, 64, 256)]
    for k in range(trials):
        rng = derived_rng(rng_seed, 31, k)
        xv = sampler(rng)
        rho = _induce_raw(m, t, z, xv)[0]
        if np.any(np.isneginf(rho)):
            continue
        y = xv + TVar(space, t, rho)  # boundary claim: rho(Y) = 0
        rho_y = _induce_raw(m, t, z, y)[0]
        shifted = [_induce_raw(m, t, z, y + inv)[0] for inv in inv_ns]
        strict = all(np.all(s < 0.0) for s in shifted)
        back = np.all(np.abs(shifted[-1] - rho_y) <= 1e-6 + inv_ns[-1])
        if not (strict and back and np.all(np.abs(rho_y) <= 1e-8)):
            res.passed, res.failures = False, res.failures + 1
            if res.witness is None:
                res.witness = {"X": xv.to_json(),
                               "rho_y": [num_to_json(v) for v in rho_y]}
    rep.add(res)

    res = CheckResult("limits_stay_in_closed_set", True, trials=trials)
    for k in range(trials):
        rng = derived_rng(rng_seed, 32, k)
        xv = sampler(rng)
        rho = _induce_raw(m, t, z, xv)[0]
        if np.any(np.isneginf(rho)):
            continue
        y = xv + TVar(space, t, rho)  # limit of the interior sequence y + 1/n
        seq_ok = all(np.all(_induce_raw(m, t, z, y + 1.0 / n)[0] < 0.0)
                     for n in (2, 8, 32))
        lim = _induce_raw(m, t, z, y)[0]
        if not (seq_ok and np.all(lim <= 1e-9)):
            res.passed, res.failures = False, res.failures + 1
            if res.witness is None:
                res.witness = {"X": xv.to_json(), "rho_limit": [num_to_json(v)
                                                                for v in lim]}
    rep.add(res)

    zero = XVar.constant(space, 0.0)
    rho0 = _induce_raw(m, t, z, zero)[0]
    beta0 = m.values(space, t, zero.values)
    if np.all(np.abs(rho0) <= 1e-9) and np.all(beta0 < z - 1e-9):
        rep.add(CheckResult("boundary_gap_at_zero", True, trials=1,
                            note="0 sits in {rho <= 0} yet below level z"))
    else:
        rep.add(CheckResult("boundary_gap_at_zero", None, trials=1,
                            note="no gap instance at the zero claim"))
    return rep
