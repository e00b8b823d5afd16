# tests/test_search.py
from collections import deque

import numpy as np
import pytest

from laryngen.exceptions import InfeasibleError, OracleBoundError
from laryngen.grid import CellGrid, GridGeometry, SemClass, adjacent_subblocks, subblock_at
from laryngen.scene import ObjectSpec
from laryngen.search import (
    ContourPivot,
    LineKind,
    Rect,
    SearchOptions,
    bounding_rect,
    brute_force_min_cost,
    connect_pair,
    connect_pivots,
    guessable_region,
    path_cost,
)


def at(g, *positions):
    return [subblock_at(g, r, c) for r, c in positions]


def is_connected(g, refs):
    refs = set(refs)
    start = next(iter(refs))
    seen, queue = {start}, deque([start])
    while queue:
        for n in adjacent_subblocks(g, queue.popleft()):
            if n in refs and n not in seen:
                seen.add(n)
                queue.append(n)
    return seen == refs


# ---------------------------
# RECTANGLES
# ---------------------------
def test_bounding_rect():
    assert bounding_rect((0, 0), (3, 5)) == Rect(0, 3, 0, 5)
    assert bounding_rect((3, 5), (0, 0)) == Rect(0, 3, 0, 5)


def test_bounding_rect_contains_its_corners():
    r = bounding_rect((6, 1), (2, 9), padding=2)
    assert r.contains((6, 1)) and r.contains((2, 9))
    assert r.contains((0, -1)) and r.contains((8, 11))
    assert not r.contains((9, 5)) and not r.contains((4, 12))


def test_bounding_rect_degenerate():
    r = bounding_rect((7, 9), (7, 9))
    assert list(r.rows) == [7] and list(r.cols) == [9]


def test_bounding_rect_padding_and_clipping(small_geometry):
    assert bounding_rect((2, 2), (4, 4), padding=1) == Rect(1, 5, 1, 5)
    assert bounding_rect((0, 1), (15, 14), padding=3, geometry=small_geometry) == Rect(0, 15, 0, 15)


# ---------------------------
# COST
# ---------------------------
def test_adjacent_pair_costs_nothing(small_geometry):
    assert path_cost(at(small_geometry, (0, 0), (0, 1)), small_geometry) == 0
    assert path_cost(at(small_geometry, (0, 0), (1, 1)), small_geometry) == 0


def test_row_aligned_gap_costs_one(small_geometry):
    assert path_cost(at(small_geometry, (0, 0), (0, 2)), small_geometry) == 1


def test_column_aligned_pair_is_free_by_default(small_geometry):
    g4 = GridGeometry(16, 16, 8, 2, neighborhood=4)
    ell = at(g4, (0, 0), (1, 0), (2, 0), (2, 1))
    assert path_cost(ell, g4) == 0
    assert path_cost(ell, g4, column_penalty=True) == 1
    assert path_cost(at(g4, (0, 0), (1, 0), (1, 1)), g4) == 0


def test_full_row_counts_every_non_adjacent_pair(small_geometry):
    row = at(small_geometry, *[(3, c) for c in range(5)])
    # 10 pairs, 4 of them adjacent
    assert path_cost(row, small_geometry) == 6


def test_cost_is_monotone(small_geometry):
    base = at(small_geometry, (0, 0), (1, 1), (2, 2))
    grown = base + at(small_geometry, (2, 5))
    assert path_cost(grown, small_geometry) > path_cost(base, small_geometry)


# ---------------------------
# ORACLE
# ---------------------------
def test_oracle_adjacent_pivots(folds_only):
    g = folds_only.geometry
    a, b = at(g, (4, 4), (4, 5))
    assert brute_force_min_cost(folds_only, (a, b), [a, b]) == 0


def test_oracle_row_of_three(folds_only):
    g = folds_only.geometry
    a, mid, b = at(g, (2, 1), (2, 2), (2, 3))
    assert brute_force_min_cost(folds_only, (a, b), [a, mid, b]) == 1


def test_oracle_bound(folds_only):
    g = folds_only.geometry
    region = at(g, *[(r, c) for r in range(5) for c in range(5)])
    with pytest.raises(OracleBoundError):
        brute_force_min_cost(folds_only, (region[0], region[-1]), region)


def test_oracle_disconnected(folds_only):
    g = folds_only.geometry
    a, b = at(g, (0, 0), (0, 3))
    with pytest.raises(InfeasibleError):
        brute_force_min_cost(folds_only, (a, b), [a, b])


def _random_instances(geometry, n, seed):
    rnd = np.random.default_rng(seed)
    for _ in range(n):
        r0, c0 = (int(v) for v in rnd.integers(0, 6, size=2))
        window = [(r0 + dr, c0 + dc) for dr in range(3) for dc in range(3)]
        i, j = rnd.choice(9, size=2, replace=False)
        a, b = window[i], window[j]
        kept = [p for p in window if p in (a, b) or rnd.random() > 0.3]
        yield at(geometry, a)[0], at(geometry, b)[0], at(geometry, *kept)


@pytest.mark.parametrize("exhaustive", [True, False], ids=["exhaustive", "best_first"])
def test_search_matches_oracle(folds_only, exhaustive):
    g = folds_only.geometry
    options = SearchOptions(exhaustive=exhaustive)
    rng = np.random.default_rng(99)
    checked = 0
    for a, b, region in _random_instances(g, 100, seed=7):
        try:
            expected = brute_force_min_cost(folds_only, (a, b), region)
        except InfeasibleError:
            with pytest.raises(InfeasibleError):
                connect_pair(folds_only, a, b, region, rng, options)
            continue
        chosen, cost = connect_pair(folds_only, a, b, region, rng, options)
        assert cost == expected
        assert {a, b} <= chosen <= set(region)
        assert is_connected(g, chosen)
        assert path_cost(chosen, g) == cost
        checked += 1
    assert checked >= 50


def test_search_matches_oracle_with_column_penalty(folds_only):
    g = folds_only.geometry
    options = SearchOptions(exhaustive=True, column_penalty=True)
    rng = np.random.default_rng(3)
    for a, b, region in _random_instances(g, 40, seed=11):
        try:
            expected = brute_force_min_cost(folds_only, (a, b), region, column_penalty=True)
        except InfeasibleError:
            continue
        assert connect_pair(folds_only, a, b, region, rng, options)[1] == expected


def test_exhaustive_ties_are_sampled(folds_only):
    # two equally cheap detours around a missing middle
    g = folds_only.geometry
    a, b = at(g, (1, 0), (1, 2))
    region = at(g, (0, 1), (2, 1)) + [a, b]
    options = SearchOptions(exhaustive=True)
    picks = {
        frozenset(connect_pair(folds_only, a, b, region, np.random.default_rng(s), options)[0])
        for s in range(40)
    }
    assert len(picks) == 2


def test_tiny_budget_falls_back_to_shortest_path(folds_only):
    g = folds_only.geometry
    a, b = at(g, (0, 0), (0, 4))
    region = at(g, *[(r, c) for r in range(3) for c in range(5)])
    chosen, cost = connect_pair(folds_only, a, b, region, np.random.default_rng(0), SearchOptions(budget=1))
    assert {a, b} <= chosen
    assert is_connected(g, chosen)
    assert cost == path_cost(chosen, g)


# ---------------------------
# PIVOT PATHS
# ---------------------------
def pivot(idfp, cell):
    return ContourPivot(idfp, cell, LineKind.ROW)


def test_diagonal_pivots_select_two_subblocks(folds_only):
    g = folds_only.geometry
    spec = ObjectSpec(SemClass.PATHOLOGY, SemClass.VOCAL_FOLDS)
    sel = connect_pivots(folds_only, [pivot(0, (1, 1)), pivot(1, (2, 2))], spec,
                         np.random.default_rng(0), closed=False)
    assert sel.chosen == frozenset(at(g, (0, 0), (1, 1)))
    assert sel.cost == 0


def test_pivots_in_one_subblock(folds_only):
    spec = ObjectSpec(SemClass.PATHOLOGY, SemClass.VOCAL_FOLDS)
    sel = connect_pivots(folds_only, [pivot(0, (4, 4)), pivot(1, (5, 5))], spec,
                         np.random.default_rng(0), closed=False)
    assert len(sel.chosen) == 1


def test_corner_pivots_match_oracle(folds_only):
    g = folds_only.geometry
    spec = ObjectSpec(SemClass.PATHOLOGY, SemClass.VOCAL_FOLDS)
    p, q = (0, 5), (5, 0)
    region = guessable_region(folds_only, p, q, SemClass.VOCAL_FOLDS)
    assert len(region) == 9
    sel = connect_pivots(folds_only, [pivot(0, p), pivot(1, q)], spec, np.random.default_rng(1),
                         SearchOptions(exhaustive=True), closed=False)
    a, b = at(g, (0, 2), (2, 0))
    assert sel.pair_costs == (brute_force_min_cost(folds_only, (a, b), region),)


def test_region_keeps_to_placement_scope_and_centre(small_geometry):
    cells = np.full((16, 16), int(SemClass.VOCAL_FOLDS), dtype=np.uint8)
    cells[2, 2] = int(SemClass.VOID)
    grid = CellGrid(small_geometry, cells)
    centre = at(small_geometry, (0, 0))[0]
    region = guessable_region(grid, (0, 0), (9, 9), SemClass.VOCAL_FOLDS,
                              scope=centre.block, excluded=[centre])
    positions = {(r, c) for r in range(5) for c in range(5)}
    expected = set(at(small_geometry, *[p for p in positions if p[0] < 4 and p[1] < 4]))
    expected -= set(at(small_geometry, (0, 0), (1, 1)))
    # pivot sub-blocks are always guessable
    expected |= set(at(small_geometry, (0, 0), (4, 4)))
    assert region == frozenset(expected)


def test_closed_ring_joins_last_pivot_to_first(folds_only):
    spec = ObjectSpec(SemClass.PATHOLOGY, SemClass.VOCAL_FOLDS)
    pivots = [pivot(0, (8, 13)), pivot(1, (3, 8)), pivot(2, (8, 3)), pivot(3, (13, 8))]
    sel = connect_pivots(folds_only, pivots, spec, np.random.default_rng(5), center=(8, 8))
    assert len(sel.pair_costs) == 4
    assert is_connected(folds_only.geometry, sel.chosen)
    assert at(folds_only.geometry, (4, 4))[0] not in sel.chosen


def test_disconnected_pivots_raise(small_geometry):
    cells = np.full((16, 16), int(SemClass.VOCAL_FOLDS), dtype=np.uint8)
    cells[:, 6:10] = int(SemClass.GLOTTAL_SPACE)
    grid = CellGrid(small_geometry, cells)
    spec = ObjectSpec(SemClass.PATHOLOGY, SemClass.VOCAL_FOLDS)
    with pytest.raises(InfeasibleError) as info:
        connect_pivots(grid, [pivot(0, (1, 1)), pivot(1, (1, 14))], spec, np.random.default_rng(0),
                       closed=False)
    assert info.value.stage == "connect_pivots"
