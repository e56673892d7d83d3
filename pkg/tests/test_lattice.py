import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from perflat import (INF, EventMask, FilteredSpace, TVar, XVar, atom_expect,
                     binomial_tree, close_or_both_inf, coin2, cond_expect,
                     dump_json, ess_inf, ess_sup, ext_add, ext_mul, ext_sub,
                     num_from_json, num_to_json, paste, random_tree,
                     sample_xvar)


# ---------------------------------------------------------------------------
# space invariants


def _tree_dict():
    return binomial_tree(2).to_json()


def test_space_rejects_bad_probability_mass():
    d = _tree_dict()
    d["leaves"][0]["p"] = 0.4
    with pytest.raises(ValueError, match="sum to"):
        FilteredSpace.from_json(d)


def test_space_rejects_nonpositive_probability():
    d = _tree_dict()
    d["leaves"][0]["p"] = 0.0
    d["leaves"][1]["p"] = 0.5
    with pytest.raises(ValueError, match="positive"):
        FilteredSpace.from_json(d)


def test_space_rejects_non_refining_partition():
    d = _tree_dict()
    # stage-1 blocks cut across the stage-2 ones
    d["atoms"]["1"] = [["uu", "du"], ["ud", "dd"]]
    d["atoms"]["2"] = [["uu", "ud"], ["du"], ["dd"]]
    with pytest.raises(ValueError):
        FilteredSpace.from_json(d)


def test_space_rejects_nontrivial_start():
    d = _tree_dict()
    d["atoms"]["0"] = [["uu", "ud"], ["du", "dd"]]
    with pytest.raises(ValueError):
        FilteredSpace.from_json(d)


def test_space_rejects_coarse_terminal_stage():
    d = _tree_dict()
    d["atoms"]["2"] = [["uu", "ud"], ["du"], ["dd"]]
    with pytest.raises(ValueError):
        FilteredSpace.from_json(d)


def test_space_json_round_trip():
    space = binomial_tree(3)
    back = FilteredSpace.from_json(space.to_json())
    assert back.same_structure(space)
    assert np.array_equal(back.probs, space.probs)
    assert back.leaf_ids == space.leaf_ids
    # the embedded name survives and beats the fallback argument
    assert back.name == space.name
    assert FilteredSpace.from_json(space.to_json(), name="other").name == space.name


def test_atom_bookkeeping(tree2):
    t_last = tree2.horizon
    for pos, leaf in enumerate(tree2.leaf_ids):
        assert tree2.leaf_pos(leaf) == pos
        k = tree2.atom_of_leaf(t_last, pos)
        assert tree2.atom_index[t_last][pos] == k
        assert tree2.atom_by_id(t_last, leaf) == k
    # every stage-2 atom sits inside its stage-1 parent
    for k in range(tree2.n_atoms(2)):
        parent = tree2.parent_atom(1, 2, k)
        assert k in tree2.subatoms(1, 2, parent)


def test_atom_mass_matches_probs(tree3):
    for t in tree3.times:
        sums = np.bincount(tree3.atom_index[t], weights=tree3.probs,
                           minlength=tree3.n_atoms(t))
        assert np.allclose(tree3.atom_mass[t], sums)


@given(seed=st.integers(0, 200))
@settings(max_examples=40, deadline=None)
def test_random_tree_is_a_valid_space(seed):
    space = random_tree(np.random.default_rng(seed))
    # constructor validation already ran; spot-check refinement by hand
    for s, t in zip(space.times[:-1], space.times[1:]):
        coarse = space.atom_index[s]
        fine = space.atom_index[t]
        for k in range(space.n_atoms(t)):
            parents = np.unique(coarse[fine == k])
            assert parents.size == 1


# ---------------------------------------------------------------------------
# extended arithmetic


def test_ext_conventions():
    assert ext_sub(np.array([INF]), np.array([INF]))[0] == 0.0
    assert ext_add(np.array([INF]), np.array([-3.0]))[0] == INF
    assert ext_mul(np.array([0.0]), np.array([INF]))[0] == 0.0
    assert ext_mul(np.array([2.0]), np.array([INF]))[0] == INF


def test_close_or_both_inf():
    a = np.array([1.0, INF, INF, 2.0])
    b = np.array([1.0 + 1e-12, INF, 5.0, -2.0])
    got = close_or_both_inf(a, b, 1e-9)
    assert got.tolist() == [True, True, False, False]


# ---------------------------------------------------------------------------
# random variables


def test_xvar_rejects_minus_inf(space2):
    with pytest.raises(ValueError):
        XVar(space2, [-INF, 1.0])
    x = XVar(space2, [INF, 1.0])  # +inf is a legal payoff
    assert x.finite_max() == 1.0


def test_xvar_arithmetic(space2):
    x = XVar(space2, [3.0, -1.0])
    y = x + 1.0
    assert y.values.tolist() == [4.0, 0.0]
    assert (x - 2.0).values.tolist() == [1.0, -3.0]
    assert x.neg_part().values.tolist() == [0.0, 1.0]
    assert x.pos_part().values.tolist() == [3.0, 0.0]
    assert x.truncate(2.0).values.tolist() == [2.0, -1.0]


def test_tvar_kinds(space2):
    with pytest.raises(ValueError):
        TVar(space2, 0, [-INF], kind="bb")
    with pytest.raises(ValueError):
        TVar(space2, 0, [INF], kind="ba")
    TVar(space2, 0, [-INF], kind="ba")
    TVar(space2, 0, [INF], kind="bb")


def test_tvar_promote(tree2):
    xi = TVar(tree2, 1, [5.0, -2.0])
    assert xi.promote().values.tolist() == [5.0, 5.0, -2.0, -2.0]


def test_paste_is_local(tree2, rng):
    x1 = sample_xvar(tree2, rng)
    x2 = sample_xvar(tree2, rng)
    b = EventMask.of_atoms(tree2, 1, [0])
    on = b.leaf_values()
    z = paste(x1, x2, b)
    assert np.array_equal(z.values[on], x1.values[on])
    assert np.array_equal(z.values[~on], x2.values[~on])


def test_event_mask_complement(tree2):
    b = EventMask.of_atoms(tree2, 1, [1])
    assert np.array_equal(b.complement().flags, ~b.flags)
    assert not EventMask.full(tree2, 1).is_empty()


# ---------------------------------------------------------------------------
# conditional expectation


@given(seed=st.integers(0, 500))
@settings(max_examples=50, deadline=None)
def test_tower_property(seed):
    space = binomial_tree(2)
    x = XVar(space, np.random.default_rng(seed).uniform(-4, 4, space.n_leaves))
    outer = cond_expect(cond_expect(x, 1).promote(), 0)
    direct = cond_expect(x, 0)
    assert np.allclose(outer.values, direct.values)


def test_atom_expect_uniform(tree2):
    vals = np.array([1.0, 2.0, 3.0, 4.0])
    assert np.allclose(atom_expect(tree2, 1, vals), [1.5, 3.5])


def test_ess_bounds(tree2):
    x = XVar(tree2, [1.0, -2.0, 3.0, 0.5])
    assert ess_inf(x, 1).values.tolist() == [-2.0, 0.5]
    assert ess_sup(x, 1).values.tolist() == [1.0, 3.0]


# ---------------------------------------------------------------------------
# serialization


def test_num_json_conventions():
    assert num_to_json(INF) == "inf"
    assert num_to_json(-INF) == "-inf"
    assert num_to_json(1.5) == 1.5
    with pytest.raises(ValueError):
        num_to_json(float("nan"))
    assert num_from_json("inf") == INF
    assert num_from_json("-inf") == -INF


def test_xvar_json_round_trip(space2):
    x = XVar(space2, [INF, -1.25])
    back = XVar.from_json(x.to_json(), space2)
    assert np.array_equal(back.values, x.values)


def test_dump_json_is_deterministic(tmp_path):
    obj = {"b": 1.0, "a": [num_to_json(INF), 2.0]}
    p1, p2 = tmp_path / "a.json", tmp_path / "b.json"
    dump_json(obj, p1)
    dump_json(obj, p2)
    assert p1.read_bytes() == p2.read_bytes()
    assert json.loads(p1.read_text())["a"][0] == "inf"
    with pytest.raises(ValueError):
        dump_json({"raw": INF})  # infinities must be encoded first
