import itertools

import numpy as np
import pytest

from pocrm.orderings import (
    DoseGrid,
    OrderingSet,
    SimpleOrdering,
    dump_orderings_file,
    load_orderings_file,
    standard_orderings,
    toxicity_sets,
    validate_orderings,
)

# The six traversal schemes on a 3x2 grid (3 levels of drug A, 2 of drug B),
# worked out by hand: rows, columns, and the four anti-diagonal variants.
THREE_BY_TWO_SEQUENCES = [
    (1, 2, 3, 4, 5, 6),
    (1, 3, 5, 2, 4, 6),
    (1, 3, 2, 5, 4, 6),
    (1, 2, 3, 4, 5, 6),
    (1, 2, 3, 5, 4, 6),
    (1, 3, 2, 4, 5, 6),
]

# Doses always less toxic / always more toxic than each dose on the 3x2 grid,
# derived by intersecting predecessor/successor sets over the six sequences.
THREE_BY_TWO_NU = [
    frozenset(),
    frozenset({1}),
    frozenset({1}),
    frozenset({1, 2, 3}),
    frozenset({1, 3}),
    frozenset({1, 2, 3, 4, 5}),
]
THREE_BY_TWO_XI = [
    frozenset({2, 3, 4, 5, 6}),
    frozenset({4, 6}),
    frozenset({4, 5, 6}),
    frozenset({6}),
    frozenset({6}),
    frozenset(),
]


def naive_sets(sequences, n_doses):
    """Reference implementation: intersect pre/post sets across orderings."""
    nu, xi = [], []
    for d in range(1, n_doses + 1):
        before = None
        after = None
        for seq in sequences:
            pos = seq.index(d)
            b = set(seq[:pos])
            a = set(seq[pos + 1 :])
            before = b if before is None else before & b
            after = a if after is None else after & a
        nu.append(frozenset(before))
        xi.append(frozenset(after))
    return nu, xi


def test_three_by_two_standard_sequences():
    oset = standard_orderings(DoseGrid(3, 2))
    assert [o.sequence for o in oset.orderings] == THREE_BY_TWO_SEQUENCES
    assert oset.prior_weights == tuple([1.0 / 6.0] * 6)


def test_three_by_two_toxicity_sets():
    sets = toxicity_sets(standard_orderings(DoseGrid(3, 2)))
    assert list(sets.nu) == THREE_BY_TWO_NU
    assert list(sets.xi) == THREE_BY_TWO_XI


def test_toxicity_sets_match_naive_reference():
    for rows, cols in [(3, 2), (2, 3), (4, 4), (2, 2), (1, 5)]:
        oset = standard_orderings(DoseGrid(rows, cols))
        sets = toxicity_sets(oset)
        nu, xi = naive_sets([o.sequence for o in oset.orderings], rows * cols)
        assert list(sets.nu) == nu
        assert list(sets.xi) == xi


def test_single_row_grid_collapses():
    # all six schemes visit a 1xK grid in the same order
    oset = standard_orderings(DoseGrid(1, 3))
    assert all(o.sequence == (1, 2, 3) for o in oset.orderings)
    merged = standard_orderings(DoseGrid(1, 3), dedupe=True)
    assert len(merged.orderings) == 1
    assert merged.orderings[0].sequence == (1, 2, 3)
    assert merged.prior_weights == pytest.approx((1.0,))


def test_two_by_two_matches_exhaustive_enumeration():
    # brute force: every permutation of 4 doses consistent with the grid order
    grid = DoseGrid(2, 2)
    consistent = set()
    for perm in itertools.permutations(range(1, 5)):
        ok = True
        for i in range(1, 5):
            for j in range(1, 5):
                ri, ci = grid.coords(i)
                rj, cj = grid.coords(j)
                if (ri <= rj and ci <= cj and (i != j)) and perm.index(i) > perm.index(j):
                    ok = False
        if ok:
            consistent.add(perm)
    assert consistent == {(1, 2, 3, 4), (1, 3, 2, 4)}

    merged = standard_orderings(grid, dedupe=True)
    assert {o.sequence for o in merged.orderings} == consistent


def test_dedupe_merges_prior_weight():
    oset = standard_orderings(DoseGrid(3, 2))
    merged = oset.deduplicated()
    assert len(merged.orderings) == 5
    weights = dict(zip((o.sequence for o in merged.orderings), merged.prior_weights))
    # rows and the "alternating starting down" diagonal agree on 3x2
    assert weights[(1, 2, 3, 4, 5, 6)] == pytest.approx(2.0 / 6.0)
    assert sum(merged.prior_weights) == pytest.approx(1.0)


def test_validate_accepts_standard_orderings():
    for rows, cols in [(2, 2), (3, 2), (3, 4), (4, 4)]:
        grid = DoseGrid(rows, cols)
        report = validate_orderings(grid, standard_orderings(grid))
        assert report.ok
        assert report.violations == ()


def test_validate_flags_same_row_swap():
    grid = DoseGrid(2, 2)
    report = validate_orderings(grid, [(2, 1, 3, 4)])
    assert not report.ok
    kinds = {v.kind for v in report.violations}
    assert kinds == {"monotonicity"}
    assert any(v.doses == (1, 2) for v in report.violations)
    assert "must precede" in report.violations[0].detail


def test_validate_flags_out_of_range_and_duplicates():
    grid = DoseGrid(2, 2)
    report = validate_orderings(grid, [(1, 2, 3, 5)])
    assert not report.ok
    assert any(v.kind == "out-of-range" for v in report.violations)

    report = validate_orderings(grid, [(1, 2, 2, 4)])
    assert not report.ok
    assert any(v.kind == "duplicate" for v in report.violations)


def test_validate_reports_every_violated_pair():
    grid = DoseGrid(1, 4)
    report = validate_orderings(grid, [(4, 3, 2, 1)])
    # all 6 ordered pairs are reversed on a single-row grid
    assert len([v for v in report.violations if v.kind == "monotonicity"]) == 6


def test_nu_xi_duality():
    rng = np.random.default_rng(1404)
    for _ in range(20):
        rows = int(rng.integers(1, 5))
        cols = int(rng.integers(1, 5))
        sets = toxicity_sets(standard_orderings(DoseGrid(rows, cols)))
        n = rows * cols
        for i in range(1, n + 1):
            for j in range(1, n + 1):
                assert (j in sets.nu[i - 1]) == (i in sets.xi[j - 1])
        # extremes of the grid are globally ordered against everything else
        assert sets.nu[0] == frozenset()
        assert sets.xi[n - 1] == frozenset()


def test_ordering_set_validation():
    with pytest.raises(ValueError):
        OrderingSet((SimpleOrdering((1, 2)),), (0.5,))  # weights do not sum to 1
    with pytest.raises(ValueError):
        OrderingSet((SimpleOrdering((1, 2)), SimpleOrdering((1, 2, 3))), (0.5, 0.5))
    with pytest.raises(ValueError):
        SimpleOrdering((1, 2, 2))


def test_uniform_constructor():
    oset = OrderingSet.uniform([SimpleOrdering((1, 2, 3)), SimpleOrdering((1, 3, 2))])
    assert oset.prior_weights == (0.5, 0.5)
    assert oset.m == 2
    assert oset.n_doses == 3


def test_json_file_round_trip(tmp_path):
    grid = DoseGrid(3, 2)
    oset = standard_orderings(grid, dedupe=True)
    path = tmp_path / "orderings.json"
    dump_orderings_file(path, grid, oset)
    grid2, oset2 = load_orderings_file(path)
    assert grid2 == grid
    assert oset2.sequences == oset.sequences
    assert oset2.prior_weights == pytest.approx(oset.prior_weights)


def test_grid_indexing():
    grid = DoseGrid(3, 2)
    assert grid.n_doses == 6
    assert grid.index(1, 1) == 1
    assert grid.index(2, 1) == 3
    assert grid.coords(4) == (2, 2)
    with pytest.raises(ValueError):
        grid.coords(7)
    with pytest.raises(ValueError):
        DoseGrid(0, 2)
