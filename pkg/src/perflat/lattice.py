"""Finite filtered probability spaces (scenario trees) and the random variables on them.

A space is a finite set of terminal leaves with strictly positive probabilities and a
chain of partitions, one per stage, refining from the trivial partition at time 0 down
to singletons at the terminal date.  Terminal variables (XVar) are leafwise, stage
variables (TVar) are constant on the atoms of their stage.

Extended reals follow the conventions inf - inf = 0, c + inf = inf, 0 * inf = 0.
XVar forbids -inf (bounded below); risk values may carry -inf and use the BA kind.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np

PROB_TOL = 1e-12
DEFAULT_TOL = 1e-9

INF = math.inf


# ---------------------------------------------------------------------------
# extended-real arithmetic


def ext_add(a, b):
    """Sum with inf - inf = 0 (IEEE would give nan)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    with np.errstate(invalid="ignore"):
        out = a + b
    conflict = np.isinf(a) & np.isinf(b) & (np.sign(a) != np.sign(b))
    out = np.where(conflict, 0.0, out)
    return out if out.ndim else float(out)


def ext_sub(a, b):
    return ext_add(a, np.negative(np.asarray(b, dtype=float)))


def ext_mul(a, b):
    """Product with 0 * inf = 0."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    with np.errstate(invalid="ignore"):
        out = a * b
    zero_inf = ((a == 0.0) & np.isinf(b)) | ((b == 0.0) & np.isinf(a))
    out = np.where(zero_inf, 0.0, out)
    return out if out.ndim else float(out)


def close_or_both_inf(a, b, tol=DEFAULT_TOL):
    """Elementwise |a - b| <= tol, with equal infinities compared symbolically."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    both_inf = np.isinf(a) & np.isinf(b) & (np.sign(a) == np.sign(b))
    with np.errstate(invalid="ignore"):
        near = np.abs(a - b) <= tol
    return np.where(both_inf, True, near)


# ---------------------------------------------------------------------------
# JSON number helpers: full double precision, infinities as strings


def num_to_json(v: float):
    v = float(v)
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    if math.isnan(v):
        raise ValueError("nan is not serializable")
    return v


def num_from_json(v) -> float:
    if isinstance(v, str):
        s = v.strip().lower()
        if s in ("inf", "+inf", "infinity"):
            return INF
        if s == "-inf" or s == "-infinity":
            return -INF
        return float(v)
    return float(v)


def dump_json(obj, path=None) -> str:
    text = json.dumps(obj, indent=2, sort_keys=True, allow_nan=False)
    if path is not None:
        with open(path, "w") as fh:
            fh.write(text + "\n")
    return text


# ---------------------------------------------------------------------------
# the space


class FilteredSpace:
    """Scenario tree: leaves with probabilities plus one partition per stage.

    atoms are stored as tuples of leaf indexes; ``atom_index[t]`` maps each leaf to the
    ordinal of its stage-t atom.  Construction validates: strictly positive probabilities
    summing to one, partitions refining in time, trivial partition at time 0, singletons
    at the terminal date.
    """

    __slots__ = ("name", "times", "leaf_ids", "probs", "atoms", "atom_index",
                 "atom_mass", "_leaf_pos")

    def __init__(self, times: Iterable[int], leaf_ids: Iterable[str],
                 probs: Iterable[float], atoms_by_stage: Iterable[Iterable[Iterable[int]]],
                 name: str | None = None):
        self.name = name
        self.times = tuple(int(t) for t in times)
        if list(self.times) != list(range(len(self.times))) or len(self.times) < 2:
            raise ValueError("times must be 0..T with T >= 1")
        self.leaf_ids = tuple(str(s) for s in leaf_ids)
        if len(set(self.leaf_ids)) != len(self.leaf_ids):
            raise ValueError("duplicate leaf ids")
        p = np.asarray(list(probs), dtype=float)
        if p.shape != (len(self.leaf_ids),):
            raise ValueError("probs shape mismatch")
        if not np.all(p > 0.0):
            raise ValueError("leaf probabilities must be strictly positive")
        if abs(p.sum() - 1.0) > PROB_TOL:
            raise ValueError(f"leaf probabilities sum to {float(p.sum())!r}, not 1")
        p.setflags(write=False)
        self.probs = p
        self._leaf_pos = {s: i for i, s in enumerate(self.leaf_ids)}

        n = len(self.leaf_ids)
        self.atoms = []
        self.atom_index = []
        for t, stage_atoms in enumerate(atoms_by_stage):
            atoms_t = [tuple(sorted(int(i) for i in a)) for a in stage_atoms]
            seen = [i for a in atoms_t for i in a]
            if sorted(seen) != list(range(n)):
                raise ValueError(f"stage {t} atoms are not a partition of the leaves")
            idx = np.empty(n, dtype=np.intp)
            for k, a in enumerate(atoms_t):
                if not a:
                    raise ValueError(f"stage {t} has an empty atom")
                for i in a:
                    idx[i] = k
            idx.setflags(write=False)
            self.atoms.append(tuple(atoms_t))
            self.atom_index.append(idx)
        if len(self.atoms) != len(self.times):
            raise ValueError("need one partition per stage")
        if len(self.atoms[0]) != 1:
            raise ValueError("time-0 partition must be trivial (single root atom)")
        if len(self.atoms[-1]) != n:
            raise ValueError("terminal partition must consist of singletons")
        for t in range(1, len(self.times)):
            # refinement: every stage-t atom sits inside one stage-(t-1) atom
            coarse = self.atom_index[t - 1]
            for a in self.atoms[t]:
                if len({coarse[i] for i in a}) != 1:
                    raise ValueError(f"stage {t} does not refine stage {t - 1}")
        self.atoms = tuple(self.atoms)
        self.atom_index = tuple(self.atom_index)
        masses = []
        for t in range(len(self.times)):
            m = np.bincount(self.atom_index[t], weights=self.probs,
                            minlength=len(self.atoms[t]))
            m.setflags(write=False)
            masses.append(m)
        self.atom_mass = tuple(masses)

    # -- shape helpers ------------------------------------------------------

    @property
    def n_leaves(self) -> int:
        return len(self.leaf_ids)

    @property
    def horizon(self) -> int:
        return self.times[-1]

    def n_atoms(self, t: int) -> int:
        return len(self.atoms[t])

    def check_stage(self, t: int) -> int:
        t = int(t)
        if t not in self.times:
            raise ValueError(f"stage {t} not in times {self.times}")
        return t

    def leaf_pos(self, leaf_id: str) -> int:
        try:
            return self._leaf_pos[leaf_id]
        except KeyError:
            raise KeyError(f"unknown leaf id {leaf_id!r}") from None

    def atom_of_leaf(self, t: int, leaf: int) -> int:
        return int(self.atom_index[t][leaf])

    def atom_id(self, t: int, k: int) -> str:
        # canonical representative: first leaf id of the atom
        return self.leaf_ids[self.atoms[t][k][0]]

    def atom_by_id(self, t: int, key: str) -> int:
        """Resolve an atom by any member leaf id."""
        return self.atom_of_leaf(t, self.leaf_pos(key))

    def subatoms(self, s: int, t: int, k: int) -> list[int]:
        """Stage-t atoms contained in stage-s atom k (s <= t)."""
        if s > t:
            raise ValueError("need s <= t")
        return sorted({int(self.atom_index[t][i]) for i in self.atoms[s][k]})

    def parent_atom(self, s: int, t: int, k: int) -> int:
        """Stage-s atom containing stage-t atom k (s <= t)."""
        return int(self.atom_index[s][self.atoms[t][k][0]])

    def fingerprint(self):
        return (self.times, self.leaf_ids, tuple(self.probs.tolist()),
                tuple(tuple(a) for a in self.atoms))

    def same_structure(self, other: "FilteredSpace") -> bool:
        return self is other or self.fingerprint() == other.fingerprint()

    def __repr__(self):
        return (f"FilteredSpace({self.name or 'unnamed'}: {self.n_leaves} leaves, "
                f"T={self.horizon})")

    # -- JSON ---------------------------------------------------------------

    def to_json(self) -> dict:
        out = {
            "times": list(self.times),
            "leaves": [{"id": s, "p": num_to_json(p)}
                       for s, p in zip(self.leaf_ids, self.probs)],
            "atoms": {str(t): [[self.leaf_ids[i] for i in a] for a in self.atoms[t]]
                      for t in self.times},
        }
        if self.name:
            out["name"] = self.name
        return out

    @classmethod
    def from_json(cls, d: Mapping, name: str | None = None) -> "FilteredSpace":
        # an embedded name anchors variable files; the argument is a fallback
        if "name" in d:
            name = str(d["name"])
        times = [int(t) for t in d["times"]]
        leaves = d["leaves"]
        leaf_ids = [str(row["id"]) for row in leaves]
        probs = [num_from_json(row["p"]) for row in leaves]
        pos = {s: i for i, s in enumerate(leaf_ids)}
        atoms_by_stage = []
        atoms_raw = d["atoms"]
        for t in times:
            key = str(t)
            if key not in atoms_raw:
                raise ValueError(f"missing atoms for stage {t}")
            atoms_by_stage.append([[pos[str(s)] for s in a] for a in atoms_raw[key]])
        return cls(times, leaf_ids, probs, atoms_by_stage, name=name)


def _check_same_space(a: FilteredSpace, b: FilteredSpace):
    if not a.same_structure(b):
        raise ValueError("operands live on different spaces")


# ---------------------------------------------------------------------------
# variables


def _validate_leaf_values(values: np.ndarray):
    if np.any(np.isnan(values)):
        raise ValueError("nan values are not allowed")
    if np.any(np.isneginf(values)):
        raise ValueError("-inf is not allowed in a terminal variable (bounded below)")


class XVar:
    """Terminal-date variable: one value per leaf, real or +inf, never -inf or nan."""

    __slots__ = ("space", "values")

    def __init__(self, space: FilteredSpace, values, validate: bool = True):
        v = np.array(values, dtype=float)
        if v.shape != (space.n_leaves,):
            raise ValueError("values shape mismatch")
        if validate:
            _validate_leaf_values(v)
        v.setflags(write=False)
        self.space = space
        self.values = v

    @classmethod
    def constant(cls, space: FilteredSpace, c: float) -> "XVar":
        return cls(space, np.full(space.n_leaves, float(c)))

    def __add__(self, other):
        if isinstance(other, XVar):
            _check_same_space(self.space, other.space)
            return XVar(self.space, ext_add(self.values, other.values), validate=False)
        if isinstance(other, TVar):
            return self + other.promote()
        return XVar(self.space, ext_add(self.values, float(other)), validate=False)

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, XVar):
            _check_same_space(self.space, other.space)
            return XVar(self.space, ext_sub(self.values, other.values))
        if isinstance(other, TVar):
            return self - other.promote()
        return XVar(self.space, ext_sub(self.values, float(other)))

    def __mul__(self, c):
        c = float(c)
        if c < 0 and np.any(np.isposinf(self.values)):
            raise ValueError("negative scaling of +inf leaves -inf")
        return XVar(self.space, ext_mul(self.values, c))

    __rmul__ = __mul__

    def __neg__(self):
        return self * (-1.0)

    def truncate(self, n: float) -> "XVar":
        """X ^ n, the pointwise minimum with the constant n."""
        return XVar(self.space, np.minimum(self.values, float(n)))

    def neg_part(self) -> "XVar":
        """X^- = max(-X, 0); finite because X is bounded below."""
        return XVar(self.space, np.maximum(-self.values, 0.0))

    def pos_part(self) -> "XVar":
        return XVar(self.space, np.maximum(self.values, 0.0))

    def restrict(self, mask: "EventMask") -> "XVar":
        """X * 1_B with the 0 * inf = 0 convention (off-event values become 0)."""
        _check_same_space(self.space, mask.space)
        return XVar(self.space, np.where(mask.leaf_values(), self.values, 0.0))

    def finite_min(self) -> float:
        finite = self.values[np.isfinite(self.values)]
        return float(finite.min()) if finite.size else INF

    def finite_max(self) -> float:
        finite = self.values[np.isfinite(self.values)]
        return float(finite.max()) if finite.size else -INF

    def to_json(self) -> dict:
        return {"space": self.space.name or "",
                "values": {s: num_to_json(v)
                           for s, v in zip(self.space.leaf_ids, self.values)}}

    @classmethod
    def from_json(cls, d: Mapping, space: FilteredSpace) -> "XVar":
        ref = d.get("space", "")
        if ref and space.name and ref != space.name:
            raise ValueError(f"variable references space {ref!r}, got {space.name!r}")
        vals = np.zeros(space.n_leaves)
        raw = d["values"]
        for key, v in raw.items():
            vals[space.leaf_pos(str(key))] = num_from_json(v)
        missing = set(space.leaf_ids) - {str(k) for k in raw}
        if missing:
            raise ValueError(f"values missing for leaves {sorted(missing)}")
        return cls(space, vals)

    def __repr__(self):
        return f"XVar({np.array2string(self.values, precision=6)})"


class TVar:
    """Stage variable: one value per stage-t atom.

    kind 'bb' forbids -inf (measure values, bounded below); 'ba' forbids +inf
    (risk values, bounded above); None allows both ends.
    """

    __slots__ = ("space", "stage", "values", "kind")

    def __init__(self, space: FilteredSpace, stage: int, values,
                 kind: str | None = "bb"):
        stage = space.check_stage(stage)
        v = np.array(values, dtype=float)
        if v.shape != (space.n_atoms(stage),):
            raise ValueError("values shape mismatch for stage atoms")
        if np.any(np.isnan(v)):
            raise ValueError("nan values are not allowed")
        if kind == "bb" and np.any(np.isneginf(v)):
            raise ValueError("-inf not allowed in a bounded-below stage variable")
        if kind == "ba" and np.any(np.isposinf(v)):
            raise ValueError("+inf not allowed in a bounded-above stage variable")
        v.setflags(write=False)
        self.space = space
        self.stage = stage
        self.values = v
        self.kind = kind

    @classmethod
    def constant(cls, space: FilteredSpace, stage: int, c: float,
                 kind: str | None = "bb") -> "TVar":
        return cls(space, stage, np.full(space.n_atoms(stage), float(c)), kind=kind)

    def promote(self) -> XVar:
        """Expand to a leafwise variable, constant on each atom."""
        return XVar(self.space, self.values[self.space.atom_index[self.stage]],
                    validate=False)

    def __add__(self, other):
        if isinstance(other, TVar):
            _check_same_space(self.space, other.space)
            if other.stage != self.stage:
                raise ValueError("stage mismatch")
            return TVar(self.space, self.stage, ext_add(self.values, other.values),
                        kind=None)
        return TVar(self.space, self.stage, ext_add(self.values, float(other)),
                    kind=None)

    def __sub__(self, other):
        if isinstance(other, TVar):
            _check_same_space(self.space, other.space)
            if other.stage != self.stage:
                raise ValueError("stage mismatch")
            return TVar(self.space, self.stage, ext_sub(self.values, other.values),
                        kind=None)
        return TVar(self.space, self.stage, ext_sub(self.values, float(other)),
                    kind=None)

    def __neg__(self):
        return TVar(self.space, self.stage, ext_mul(self.values, -1.0), kind=None)

    def to_json(self) -> dict:
        return {"space": self.space.name or "", "stage": self.stage,
                "values": {self.space.atom_id(self.stage, k): num_to_json(v)
                           for k, v in enumerate(self.values)}}

    def __repr__(self):
        return f"TVar(t={self.stage}, {np.array2string(self.values, precision=6)})"


class EventMask:
    """F_t-measurable event: a boolean flag per stage-t atom."""

    __slots__ = ("space", "stage", "flags")

    def __init__(self, space: FilteredSpace, stage: int, flags):
        stage = space.check_stage(stage)
        f = np.array(flags, dtype=bool)
        if f.shape != (space.n_atoms(stage),):
            raise ValueError("flags shape mismatch")
        f.setflags(write=False)
        self.space = space
        self.stage = stage
        self.flags = f

    @classmethod
    def full(cls, space: FilteredSpace, stage: int) -> "EventMask":
        return cls(space, stage, np.ones(space.n_atoms(stage), dtype=bool))

    @classmethod
    def of_atoms(cls, space: FilteredSpace, stage: int, atoms: Iterable[int]) -> "EventMask":
        f = np.zeros(space.n_atoms(stage), dtype=bool)
        for k in atoms:
            f[int(k)] = True
        return cls(space, stage, f)

    def leaf_values(self) -> np.ndarray:
        return self.flags[self.space.atom_index[self.stage]]

    def complement(self) -> "EventMask":
        return EventMask(self.space, self.stage, ~self.flags)

    def is_empty(self) -> bool:
        return not bool(self.flags.any())

    def __repr__(self):
        atoms = [self.space.atom_id(self.stage, k)
                 for k in np.flatnonzero(self.flags)]
        return f"EventMask(t={self.stage}, atoms={atoms})"


# ---------------------------------------------------------------------------
# conditional operations


def atom_expect(space: FilteredSpace, t: int, leaf_values: np.ndarray,
                weights: np.ndarray | None = None) -> np.ndarray:
    """Per-atom conditional expectation of raw leaf values (array-in, array-out).

    +inf leaves carry positive weight, so they propagate to +inf atom values.
    """
    idx = space.atom_index[t]
    if weights is None:
        w, mass = space.probs, space.atom_mass[t]
    else:
        w = np.asarray(weights, dtype=float)
        mass = np.bincount(idx, weights=w, minlength=space.n_atoms(t))
        if np.any(mass <= 0.0):
            raise ValueError("weights give an atom zero conditional mass")
    with np.errstate(invalid="ignore"):
        tot = np.bincount(idx, weights=w * leaf_values, minlength=space.n_atoms(t))
    # w * inf is inf (w > 0); nan can only come from inf - inf across leaves,
    # which XVar excludes, but guard bincount pairs of +inf anyway
    return tot / mass


def cond_expect(x: XVar, t: int, weights: np.ndarray | None = None) -> TVar:
    """E[X | F_t], optionally under another measure given by per-leaf weights.

    Weights must be nonnegative and sum to one; every stage-t atom needs strictly
    positive conditional mass.
    """
    t = x.space.check_stage(t)
    if weights is not None:
        w = np.asarray(weights, dtype=float)
        if w.shape != (x.space.n_leaves,):
            raise ValueError("weights shape mismatch")
        if np.any(w < 0.0):
            raise ValueError("weights must be nonnegative")
        if abs(w.sum() - 1.0) > 1e-9:
            raise ValueError("weights must sum to one")
    return TVar(x.space, t, atom_expect(x.space, t, x.values, weights), kind="bb")


def ess_inf(x: XVar, t: int) -> TVar:
    t = x.space.check_stage(t)
    out = np.full(x.space.n_atoms(t), INF)
    np.minimum.at(out, x.space.atom_index[t], x.values)
    return TVar(x.space, t, out, kind="bb")


def ess_sup(x: XVar, t: int) -> TVar:
    t = x.space.check_stage(t)
    out = np.full(x.space.n_atoms(t), -INF)
    np.maximum.at(out, x.space.atom_index[t], x.values)
    return TVar(x.space, t, out, kind=None)


def paste(x1: XVar, x2: XVar, mask: EventMask) -> XVar:
    """x1 on the event, x2 off it: 1_B x1 + 1_{B^c} x2 by leafwise selection."""
    _check_same_space(x1.space, x2.space)
    _check_same_space(x1.space, mask.space)
    return XVar(x1.space, np.where(mask.leaf_values(), x1.values, x2.values),
                validate=False)


# ---------------------------------------------------------------------------
# ready-made spaces and samplers


def coin2(p: float = 0.5, name: str = "coin2") -> FilteredSpace:
    """Two leaves, one period: the smallest nontrivial space."""
    return FilteredSpace([0, 1], ["u", "d"], [p, 1.0 - p],
                         [[[0, 1]], [[0], [1]]], name=name)


def binomial_tree(steps: int, p: float = 0.5, name: str | None = None) -> FilteredSpace:
    """Recombining-label binomial tree with 2**steps leaves (paths, not nodes)."""
    if steps < 1:
        raise ValueError("need at least one step")
    n = 2 ** steps
    leaf_ids = ["".join("ud"[(i >> (steps - 1 - b)) & 1] for b in range(steps))
                for i in range(n)]
    probs = []
    for s in leaf_ids:
        q = 1.0
        for ch in s:
            q *= p if ch == "u" else (1.0 - p)
        probs.append(q)
    atoms_by_stage = []
    for t in range(steps + 1):
        groups: dict[str, list[int]] = {}
        for i, s in enumerate(leaf_ids):
            groups.setdefault(s[:t], []).append(i)
        atoms_by_stage.append(list(groups.values()))
    return FilteredSpace(list(range(steps + 1)), leaf_ids, probs, atoms_by_stage,
                         name=name or f"binomial{steps}")


def random_tree(rng: np.random.Generator, periods: int = 2, max_leaves: int = 16,
                name: str | None = None) -> FilteredSpace:
    """Random tree with the given number of periods and at most max_leaves leaves.

    Leaf probabilities are normalized draws from [0.5, 1.5], so no leaf is vanishingly
    unlikely relative to the others.
    """
    if periods < 1:
        raise ValueError("need at least one period")
    # grow leaf counts per node, stage by stage
    shapes = [[1]]  # children count per node of each stage; start with the root
    n_leaves = 1
    for t in range(periods):
        row = []
        remaining_stages = periods - t - 1
        for _ in range(sum(shapes[-1])):
            # each later stage must be able to split, so cap the branching now
            room = max_leaves - n_leaves
            hi = min(3, 1 + room)
            k = int(rng.integers(1, hi + 1)) if hi >= 1 else 1
            if t == 0 and k == 1 and sum(shapes[-1]) == 1:
                k = 2  # the root must split or the filtration is degenerate
                k = min(k, 1 + max(0, max_leaves - n_leaves))
            row.append(k)
            n_leaves += k - 1
        shapes.append(row)
    # build leaf paths
    paths = [[]]
    for row in shapes[1:]:
        nxt = []
        for path, k in zip(paths, row):
            for c in range(k):
                nxt.append(path + [c])
        paths = nxt
    leaf_ids = ["n" + "".join(str(c) for c in path) for path in paths]
    w = rng.uniform(0.5, 1.5, size=len(paths))
    probs = (w / w.sum()).tolist()
    atoms_by_stage = []
    for t in range(periods + 1):
        groups: dict[tuple, list[int]] = {}
        for i, path in enumerate(paths):
            groups.setdefault(tuple(path[:t]), []).append(i)
        atoms_by_stage.append(list(groups.values()))
    return FilteredSpace(list(range(periods + 1)), leaf_ids, probs, atoms_by_stage,
                         name=name)


def sample_xvar(space: FilteredSpace, rng: np.random.Generator, low: float = -4.0,
                high: float = 4.0, min_abs: float = 0.0, inf_prob: float = 0.0) -> XVar:
    """Random terminal variable; min_abs keeps values away from 0, inf_prob adds +inf legs."""
    v = rng.uniform(low, high, size=space.n_leaves)
    if min_abs > 0.0:
        small = np.abs(v) < min_abs
        v[small] = np.sign(v[small] + (v[small] == 0.0)) * rng.uniform(
            min_abs, max(abs(low), abs(high)), size=int(small.sum()))
    if inf_prob > 0.0:
        v[rng.random(space.n_leaves) < inf_prob] = INF
    return XVar(space, v)


def sample_tvar(space: FilteredSpace, t: int, rng: np.random.Generator,
                low: float = -2.0, high: float = 2.0) -> TVar:
    return TVar(space, t, rng.uniform(low, high, size=space.n_atoms(t)))


def sample_event(space: FilteredSpace, t: int, rng: np.random.Generator,
                 allow_trivial: bool = False) -> EventMask:
    """Random F_t-event; proper (neither empty nor full) whenever the stage allows."""
    n = space.n_atoms(t)
    flags = rng.random(n) < 0.5
    if not allow_trivial and n > 1:
        if flags.all():
            flags[int(rng.integers(n))] = False
        if not flags.any():
            flags[int(rng.integers(n))] = True
    elif not flags.any():
        flags[:] = True
    return EventMask(space, t, flags)
