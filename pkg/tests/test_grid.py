# tests/test_grid.py
import numpy as np
import pytest

from laryngen.exceptions import BoundsError, ContractError, GeometryError
from laryngen.grid import (
    BlockRef,
    CellGrid,
    GridGeometry,
    SemClass,
    SubBlockRef,
    adjacent_subblocks,
    all_subblocks,
    block_counts,
    cell_to_refs,
    chebyshev,
    eligible_blocks,
    subblock_at,
    subblock_cells,
    subblock_position,
)


def test_default_geometry_partitioning(geometry):
    assert geometry.blocks_per_row == 8
    assert geometry.block_count == 64
    assert geometry.subs_per_block == 64
    assert geometry.sub_rows == geometry.sub_cols == 64


@pytest.mark.parametrize(
    "kwargs",
    [
        {"width": 500},
        {"block_dim": 60},
        {"sub_dim": 7},
        {"neighborhood": 6},
        {"width": 0},
    ],
)
def test_invalid_geometry(kwargs):
    with pytest.raises(GeometryError):
        GridGeometry(**kwargs)


@pytest.mark.parametrize(
    "cell, idb, idsb",
    [
        ((0, 0), 0, 0),
        ((100, 200), 11, 33),
        ((511, 511), 63, 63),
        ((63, 64), 1, 56),
    ],
)
def test_cell_to_refs(geometry, cell, idb, idsb):
    block, sub = cell_to_refs(geometry, *cell)
    assert block == BlockRef(idb)
    assert sub == SubBlockRef(idb, idsb)


def test_cell_to_refs_out_of_bounds(geometry):
    with pytest.raises(BoundsError):
        cell_to_refs(geometry, 512, 0)
    with pytest.raises(BoundsError):
        cell_to_refs(geometry, 0, -1)


def test_subblock_cells_row_major_formula(small_geometry):
    cells = subblock_cells(small_geometry, SubBlockRef(3, 3))
    assert cells == [(8, 14), (8, 15), (9, 14), (9, 15)]
    cells = subblock_cells(small_geometry, SubBlockRef(3, 5))
    assert cells == [(10, 10), (10, 11), (11, 10), (11, 11)]


def test_subblock_cells_rejects_bad_ref(small_geometry):
    with pytest.raises(BoundsError):
        subblock_cells(small_geometry, SubBlockRef(4, 0))
    with pytest.raises(BoundsError):
        subblock_cells(small_geometry, SubBlockRef(0, 16))


def test_every_cell_maps_back_to_its_subblock(small_geometry):
    for x in range(16):
        for y in range(16):
            _, sub = cell_to_refs(small_geometry, x, y)
            assert (x, y) in subblock_cells(small_geometry, sub)


@pytest.mark.parametrize("g", [GridGeometry(16, 16, 8, 2), GridGeometry(), GridGeometry(128, 64, 32, 4)])
def test_subblocks_tile_the_grid(g):
    seen = np.zeros((g.height, g.width), dtype=int)
    refs = list(all_subblocks(g))
    assert len(refs) == g.block_count * g.subs_per_block
    for ref in refs:
        cells = subblock_cells(g, ref)
        assert len(cells) == g.sub_dim ** 2
        for x, y in cells:
            seen[x, y] += 1
    assert (seen == 1).all()


def test_adjacency_crosses_block_boundaries(small_geometry):
    # sub-block at global (1, 3) sits on the right edge of block 0
    s = subblock_at(small_geometry, 1, 3)
    neighbours = {subblock_position(small_geometry, n) for n in adjacent_subblocks(small_geometry, s)}
    assert neighbours == {(0, 2), (0, 3), (0, 4), (1, 2), (1, 4), (2, 2), (2, 3), (2, 4)}


def test_corner_adjacency_counts(small_geometry):
    corner = SubBlockRef(0, 0)
    assert len(adjacent_subblocks(small_geometry, corner)) == 3
    four = GridGeometry(16, 16, 8, 2, neighborhood=4)
    assert len(adjacent_subblocks(four, corner)) == 2


def test_adjacency_is_symmetric_and_irreflexive(small_geometry):
    for sr in range(small_geometry.sub_rows):
        for sc in range(small_geometry.sub_cols):
            s = subblock_at(small_geometry, sr, sc)
            around = adjacent_subblocks(small_geometry, s)
            assert s not in around
            for n in around:
                assert s in adjacent_subblocks(small_geometry, n)


def test_eligible_blocks_threshold(geometry):
    cells = np.full((512, 512), int(SemClass.OTHER_TISSUE), dtype=np.uint8)
    cells[:64, :64] = int(SemClass.VOCAL_FOLDS)
    cells[:32, 64:128] = int(SemClass.VOCAL_FOLDS)
    grid = CellGrid(geometry, cells)
    assert eligible_blocks(grid, SemClass.VOCAL_FOLDS, 1.0) == [BlockRef(0)]
    assert eligible_blocks(grid, SemClass.VOCAL_FOLDS, 0.5) == [BlockRef(0), BlockRef(1)]


def test_eligible_blocks_all_void(geometry):
    grid = CellGrid.filled(geometry, SemClass.VOID)
    assert eligible_blocks(grid, SemClass.VOCAL_FOLDS, 1.0) == []


@pytest.mark.parametrize("fraction", [0, -0.1, 1.5])
def test_eligible_blocks_rejects_fraction(folds_only, fraction):
    with pytest.raises(ContractError):
        eligible_blocks(folds_only, SemClass.VOCAL_FOLDS, fraction)


def test_block_counts(folds_only):
    assert block_counts(folds_only, SemClass.VOCAL_FOLDS).tolist() == [[64, 64], [64, 64]]


def test_cellgrid_is_immutable(folds_only):
    with pytest.raises(ValueError):
        folds_only.cells[0, 0] = 0
    changed = folds_only.replace(folds_only.mask(SemClass.VOCAL_FOLDS), SemClass.GLOTTAL_SPACE)
    assert folds_only[0, 0] is SemClass.VOCAL_FOLDS
    assert changed[0, 0] is SemClass.GLOTTAL_SPACE


def test_cellgrid_rejects_bad_shape_and_values(small_geometry):
    with pytest.raises(GeometryError):
        CellGrid(small_geometry, np.zeros((8, 8), dtype=np.uint8))
    with pytest.raises(ContractError):
        CellGrid(small_geometry, np.full((16, 16), 9, dtype=np.uint8))


def test_semclass_slugs():
    assert SemClass.from_slug("glottal_space") is SemClass.GLOTTAL_SPACE
    with pytest.raises(KeyError):
        SemClass.from_slug("tumour")
    assert chebyshev((0, 0), (3, -5)) == 5


def test_eligible_blocks_checkerboard(geometry):
    rows, cols = np.indices((512, 512)) // 64
    cells = np.where((rows + cols) % 2 == 0, int(SemClass.VOCAL_FOLDS), int(SemClass.OTHER_TISSUE))
    grid = CellGrid(geometry, cells.astype(np.uint8))
    found = eligible_blocks(grid, SemClass.VOCAL_FOLDS, 1.0)
    assert len(found) == 32
    assert BlockRef(0) in found and BlockRef(1) not in found


def test_eligible_blocks_shrink_as_fraction_grows(geometry):
    rng = np.random.default_rng(5)
    # per-block fill levels spread over (0, 1]
    levels = rng.random((8, 8))
    noise = rng.random((512, 512))
    cells = np.where(noise < np.kron(levels, np.ones((64, 64))), int(SemClass.VOCAL_FOLDS),
                     int(SemClass.OTHER_TISSUE))
    grid = CellGrid(geometry, cells.astype(np.uint8))
    fractions = [0.05, 0.2, 0.4, 0.6, 0.8, 0.95, 1.0]
    found = [set(eligible_blocks(grid, SemClass.VOCAL_FOLDS, f)) for f in fractions]
    for looser, stricter in zip(found, found[1:]):
        assert stricter <= looser
    assert len(found[0]) > len(found[-2])
