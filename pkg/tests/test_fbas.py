from itertools import combinations

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import random_fbas, random_fbas_family, two_cliques
from sybilquorum.fbas import (
    Fbas,
    FbasError,
    build_fbas,
    check_fbas,
    delete_nodes,
    determine_dset,
    determine_safety,
    dumps_fbas,
    fbas_from_matrix,
    is_quorum,
    loads_fbas,
    min_slice_cardinality,
    quorum_size_bounds,
    two_thirds_threshold,
)
from sybilquorum.oracle import (
    OracleBoundError,
    brute_force_min_quorum,
    brute_force_min_quorums,
    brute_force_quorum_intersection,
    disjoint_quorums,
    enumerate_slices,
    fixpoint_any_order,
    is_quorum_by_slices,
    mask_to_set,
    quorum_masks,
)


def complete(n):
    return fbas_from_matrix(np.ones((n, n), dtype=bool))


@pytest.mark.parametrize("size, t", [(1, 1), (2, 2), (3, 3), (4, 3), (6, 5), (9, 7)])
def test_threshold_is_smallest_integer_above_two_thirds(size, t):
    assert two_thirds_threshold(size) == t
    assert 3 * t > 2 * size and 3 * (t - 1) <= 2 * size


def test_build_inserts_self_and_rejects_bad_sets():
    f = build_fbas({10: [20, 30], 20: [10, 20], 30: [30]})
    assert f.trust_set(f.index_of(10)) == {0, 1, 2}
    assert f.thresholds.tolist() == [3, 2, 1]
    with pytest.raises(FbasError):
        build_fbas({1: []})
    with pytest.raises(FbasError):
        build_fbas({1: [2]})


def test_min_slice_cardinality():
    f = build_fbas({0: [0, 1, 2, 3], 1: [1], 2: [2], 3: [3]})
    assert min_slice_cardinality(f, 0) == 3
    assert min_slice_cardinality(f, 1) == 1


def test_min_slice_cardinality_matches_enumeration():
    for f in random_fbas_family(11, 60, max_nodes=12):
        for v in range(f.n_nodes):
            assert min(len(q) for q in enumerate_slices(f, v)) == min_slice_cardinality(f, v)


def test_quorum_examples():
    f = complete(4)
    assert not is_quorum(f, [])
    assert all(is_quorum(f, u) for u in combinations(range(4), 3))
    assert not is_quorum(f, [0, 1])


def test_quorum_matches_slice_enumeration():
    rng = np.random.default_rng(3)
    for _ in range(6):
        f = random_fbas(rng, 10)
        for mask in range(1 << 10):
            u = mask_to_set(mask)
            assert is_quorum(f, sorted(u)) == is_quorum_by_slices(f, u)


def test_whole_system_is_a_quorum():
    for f in random_fbas_family(5, 50):
        assert is_quorum(f, range(f.n_nodes))


def test_dset_examples():
    f = complete(4)
    assert determine_dset(f, []).nodes == frozenset()
    assert determine_dset(f, [0]).nodes == {0}
    # b trusts {a, b, c}: one bad of three is not more than a third
    f = build_fbas({0: [0], 1: [0, 1, 2], 2: [2]})
    assert determine_dset(f, [0]).nodes == {0}
    # b trusts {a, b}: half is bad, b is befouled, which befouls c in turn
    f = build_fbas({0: [0], 1: [0, 1], 2: [1, 2]})
    d = determine_dset(f, [0])
    assert d.nodes == {0, 1, 2} and d.befouled == {1, 2}
    assert not d.available  # nothing is left to form a quorum


def test_dset_liveness_reports_residual_quorum():
    f = two_cliques(4)
    d = determine_dset(f, [0])
    assert d.nodes == {0}
    assert d.available == is_quorum(f, [1, 2, 3, 4, 5, 6, 7])


def test_dset_equals_shuffled_recomputation():
    rng = np.random.default_rng(99)
    for f in random_fbas_family(21, 200):
        bad = np.flatnonzero(rng.random(f.n_nodes) < rng.uniform(0, 0.5))
        d = determine_dset(f, bad)
        for _ in range(3):
            assert fixpoint_any_order(f, bad, rng) == d.nodes
        rest = [v for v in range(f.n_nodes) if v not in d.nodes]
        assert d.available == is_quorum(f, rest)


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_dset_monotone_and_idempotent(seed):
    rng = np.random.default_rng(seed)
    f = random_fbas(rng, int(rng.integers(1, 12)))
    small = rng.random(f.n_nodes) < 0.2
    big = small | (rng.random(f.n_nodes) < 0.2)
    a = determine_dset(f, small).nodes
    b = determine_dset(f, big).nodes
    assert a <= b
    assert determine_dset(f, sorted(a)).nodes == a


def test_safety_examples():
    safe, bounds = determine_safety(complete(4))
    assert safe and bounds.bounds.tolist() == [3, 3, 3, 3]
    f = two_cliques(4)
    safe, bounds = determine_safety(f)
    assert not safe and bounds.bounds.tolist() == [3] * 8
    assert not brute_force_quorum_intersection(f)
    a, b = disjoint_quorums(f)
    assert not a & b and is_quorum(f, sorted(a)) and is_quorum(f, sorted(b))


def test_bounds_nondecreasing_and_iterations_bounded():
    for f in random_fbas_family(8, 100):
        b = quorum_size_bounds(f, keep_history=True)
        hist = np.array(b.history)
        assert np.all(np.diff(hist, axis=0) >= 0)
        assert np.array_equal(hist[-1], hist[-2])
        assert np.all(hist[0] == f.thresholds)
        assert np.all(b.bounds <= f.n_nodes)
        assert b.iterations <= f.n_nodes * f.trust_sizes.max() + 1


def test_fixpoint_sound_against_oracle():
    for f in random_fbas_family(1, 200):
        exact = brute_force_min_quorums(f)
        safe, bounds = determine_safety(f)
        for v, e in enumerate(exact):
            if e is not None:
                assert bounds[v] <= e
        if safe:
            assert brute_force_quorum_intersection(f)
        if np.all(2 * f.thresholds > f.n_nodes):
            assert brute_force_quorum_intersection(f)


def test_oracle_examples_and_bound():
    assert brute_force_min_quorum(complete(4), 0) == 3
    assert brute_force_quorum_intersection(complete(4))
    loner = build_fbas({0: [0], 1: [0, 1]})
    assert brute_force_min_quorum(loner, 0) == 1
    with pytest.raises(OracleBoundError):
        brute_force_min_quorum(complete(17), 0)
    # t = 4: the five 4-subsets and the whole set
    assert len(quorum_masks(complete(5), bound=5)) == 6


def test_delete_identity_and_survivor():
    f = random_fbas(np.random.default_rng(0), 8)
    assert delete_nodes(f, []) == f
    assert delete_nodes(f, [], mode="recompute") == f
    for mode in ("literal", "recompute"):
        g = delete_nodes(f, range(1, 8), mode)
        assert g.n_nodes == 1 and g.thresholds.tolist() == [1]


def literal_quorums_by_definition(f, b):
    """Quorums of the deleted system, spelled out from the slice-level definition."""
    keep = [v for v in range(f.n_nodes) if v not in b]
    slices = {v: {q - b for q in enumerate_slices(f, v)} for v in keep}
    out = set()
    for r in range(1, len(keep) + 1):
        for u in combinations(keep, r):
            u = frozenset(u)
            if all(any(q <= u for q in slices[v]) for v in u):
                out.add(u)
    return out


def test_literal_delete_matches_slice_definition():
    rng = np.random.default_rng(44)
    for f in random_fbas_family(4, 120, max_nodes=9):
        b = frozenset(np.flatnonzero(rng.random(f.n_nodes) < 0.3).tolist())
        if len(b) == f.n_nodes:
            continue
        g = delete_nodes(f, sorted(b))
        keep = [v for v in range(f.n_nodes) if v not in b]
        got = {frozenset(keep[i] for i in mask_to_set(m)) for m in quorum_masks(g).tolist()}
        assert got == literal_quorums_by_definition(f, b)
        # every quorum of f that leaves something behind maps to a quorum of the deleted system
        for m in quorum_masks(f).tolist():
            rest = mask_to_set(m) - b
            if rest:
                assert rest in got


def test_recompute_delete_uses_two_thirds_of_survivors():
    f = complete(6)
    g = delete_nodes(f, [0, 1], mode="recompute")
    assert g.thresholds.tolist() == [3] * 4
    assert delete_nodes(f, [0, 1]).thresholds.tolist() == [3] * 4  # 5 - 2
    assert delete_nodes(complete(9), [0]).thresholds.tolist() == [6] * 8
    assert delete_nodes(complete(9), [0], mode="recompute").thresholds.tolist() == [6] * 8
    with pytest.raises(ValueError):
        delete_nodes(f, [0], mode="other")


def test_check_fbas_pipeline():
    rep = check_fbas(complete(7), [0, 1])
    assert rep.live and rep.safe and rep.residual_nodes == 5


def test_text_format_roundtrip():
    for f in random_fbas_family(6, 30):
        assert loads_fbas(dumps_fbas(f)) == f
        g = delete_nodes(f, [0])
        assert loads_fbas(dumps_fbas(g)) == g
    f = build_fbas({5: [5, 7], 7: [5, 7, 9], 9: [9]})
    text = dumps_fbas(f)
    assert text.splitlines()[1:] == ["5: 5 7", "7: 5 7 9", "9: 9"]


def test_text_format_errors():
    with pytest.raises(FbasError):
        loads_fbas("1: 1\n")
    with pytest.raises(FbasError):
        loads_fbas("# fbas v1\n1 1\n")
    with pytest.raises(FbasError):
        loads_fbas("# fbas v1\n1: 1\n1: 1\n")
    with pytest.raises(FbasError):
        loads_fbas("# fbas v1\n1: 2\n")


def test_fbas_invariants_enforced():
    with pytest.raises(FbasError):
        Fbas(np.zeros((2, 2), dtype=bool), np.array([1, 1]), np.arange(2))
    with pytest.raises(FbasError):
        Fbas(np.eye(2, dtype=bool), np.array([2, 1]), np.arange(2))
