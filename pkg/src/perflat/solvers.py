"""Monotone inversion by bracket expansion and bisection, plus small numeric helpers.

The main entry point works on vectors: each component has its own bracket and all
components share one function evaluation per iteration, which is what makes atomwise
threshold searches cheap on a scenario tree.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

BRACKET_CAP = 2.0 ** 60


@dataclass
class InfShiftResult:
    values: np.ndarray        # lower endpoint of the final bracket; -inf if capped below
    hit_lower_cap: np.ndarray  # bool per component
    near_zero: np.ndarray      # |value| <= tol flags


def vector_monotone_inf(g, lo0: np.ndarray, hi0: np.ndarray, target: np.ndarray,
                        tol: float = 1e-10, cap: float = BRACKET_CAP) -> InfShiftResult:
    """Componentwise inf{c : g(c)_k >= target_k} for g nondecreasing in c.

    ``g`` maps a vector of candidate shifts (one per component) to a vector of values.
    Brackets are seeded with [lo0, hi0] and expanded by doubling steps.  If a component
    stays at/above target all the way down to -cap the infimum is reported as -inf; a
    component that never reaches target by +cap is an inconsistency in the caller's
    monotone function and raises.

    Returns the lower bracket endpoint: within ``tol`` of the infimum and strictly on
    the g < target side, so an exactly-probed threshold such as 0.0 survives intact.
    """
    lo = np.array(lo0, dtype=float)
    hi = np.array(hi0, dtype=float)
    target = np.asarray(target, dtype=float)
    n = lo.shape[0]
    if np.any(lo >= hi):
        raise ValueError("need lo0 < hi0")

    capped_below = np.zeros(n, dtype=bool)

    # expand the upper side until g(hi) >= target
    need = g(hi) < target
    step = np.ones(n)
    while np.any(need):
        hi[need] = hi[need] + step[need]
        step[need] *= 2.0
        if np.any(hi[need] > cap):
            over = need & (hi > cap)
            probe = np.where(over, cap, hi)
            if np.any(g(probe)[over] < target[over]):
                raise RuntimeError(
                    "upper bracket never closed: value below target at the cap "
                    "(monotone target unreachable)")
            hi[over] = cap
        need = g(hi) < target

    # expand the lower side until g(lo) < target; a floor at -cap means -inf
    vals = g(lo)
    need = vals >= target
    step = np.ones(n)
    while np.any(need):
        at_floor = need & (lo <= -cap)
        if np.any(at_floor):
            capped_below |= at_floor
            need &= ~at_floor
            if not np.any(need):
                break
        lo[need] = np.maximum(lo[need] - step[need], -cap)
        step[need] *= 2.0
        vals = g(lo)
        need = vals >= target
        need &= ~capped_below

    active = ~capped_below
    while True:
        width = hi - lo
        run = active & (width > tol)
        if not np.any(run):
            break
        mid = np.where(run, 0.5 * (lo + hi), lo)
        gm = g(mid)
        go_down = run & (gm >= target)
        hi[go_down] = mid[go_down]
        go_up = run & ~go_down
        lo[go_up] = mid[go_up]

    out = np.where(capped_below, -math.inf, lo)
    near_zero = np.abs(out) <= tol
    return InfShiftResult(values=out, hit_lower_cap=capped_below, near_zero=near_zero)


def scalar_monotone_inf(g, lo0: float = -1.0, hi0: float = 1.0, target: float = 0.0,
                        tol: float = 1e-10, cap: float = BRACKET_CAP) -> float:
    """Scalar wrapper around vector_monotone_inf."""
    res = vector_monotone_inf(lambda c: np.asarray([g(float(c[0]))]),
                              np.array([lo0]), np.array([hi0]),
                              np.array([target]), tol=tol, cap=cap)
    return float(res.values[0])


def logsumexp(values: np.ndarray) -> float:
    """log(sum(exp(values))) without overflow; handles -inf entries, empty is -inf."""
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        return -math.inf
    m = v.max()
    if not np.isfinite(m):
        return float(m)
    with np.errstate(under="ignore"):
        return float(m + np.log(np.exp(v - m).sum()))


def group_logsumexp(values: np.ndarray, index: np.ndarray, n_groups: int) -> np.ndarray:
    """Per-group logsumexp for grouped leaf terms."""
    out = np.empty(n_groups)
    for k in range(n_groups):
        out[k] = logsumexp(values[index == k])
    return out
