# laryngen/search.py
"""
Sub-block path search.

Consecutive contour pivots are joined by connected sets of sub-blocks drawn
from the pair's bounding rectangle. Among all such sets the search prefers
the lowest soft cost: the number of selected sub-block pairs that share a
sub-block row without touching. Ties are broken by fewer sub-blocks, then
uniformly at random under the caller's generator.

Two strategies are available. Exhaustive mode enumerates every connected set
grown from the first pivot, pruned by the best cost found so far. The default
best-first mode expands selections in order of (cost, size) and stops at the
first one containing the second pivot; past its expansion budget it falls
back to a breadth-first shortest path. ``brute_force_min_cost`` is a separate
bitmask enumeration kept as an oracle for both.
"""

import heapq
import itertools
from collections import defaultdict, deque
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Set, Tuple

import numpy as np

from .exceptions import InfeasibleError, OracleBoundError
from .grid import (
    BlockRef,
    Cell,
    CellGrid,
    GridGeometry,
    SemClass,
    SubBlockRef,
    cell_to_refs,
    neighbor_offsets,
    subblock_at,
    subblock_position,
)
from .scene import ObjectSpec


@dataclass(frozen=True)
class SearchOptions:
    """
    Search configuration.

    Attributes:
        exhaustive: Enumerate all connected selections when the region allows
        budget: Best-first expansions per pivot pair before the BFS fallback
        retries: Attempts per object before giving up
        column_penalty: Also penalise column-aligned non-adjacent pairs
        oracle_bound: Largest region (in sub-blocks) enumerated exhaustively
    """

    exhaustive: bool = False
    budget: int = 20000
    retries: int = 32
    column_penalty: bool = False
    oracle_bound: int = 20

    def to_dict(self) -> Dict[str, object]:
        return {
            "exhaustive": self.exhaustive,
            "budget": self.budget,
            "retries": self.retries,
            "column_penalty": self.column_penalty,
            "oracle_bound": self.oracle_bound,
        }


class LineKind(str, Enum):
    ROW = "row"
    COL = "col"
    MAIN_DIAG = "main_diag"
    SEC_DIAG = "sec_diag"


@dataclass(frozen=True)
class ContourPivot:
    """
    One guessed contour point.

    Attributes:
        idfp: Position in counterclockwise order, 0 is east of the centre
        position: (x, y) cell
        line_kind: Line through the centre the pivot lies on
    """

    idfp: int
    position: Cell
    line_kind: LineKind


@dataclass(frozen=True)
class PathSelection:
    """
    Sub-blocks recolored as the object's contour.

    Attributes:
        chosen: Union of the per-pair selections
        cost: Soft cost of the union
        pair_costs: Soft cost of each pair's own selection, in pair order
    """

    chosen: FrozenSet[SubBlockRef] = field(default_factory=frozenset)
    cost: int = 0
    pair_costs: Tuple[int, ...] = ()


@dataclass(frozen=True)
class Rect:
    """Inclusive cell rectangle."""

    x0: int
    x1: int
    y0: int
    y1: int

    @property
    def rows(self) -> range:
        return range(self.x0, self.x1 + 1)

    @property
    def cols(self) -> range:
        return range(self.y0, self.y1 + 1)

    def contains(self, cell: Cell) -> bool:
        return self.x0 <= cell[0] <= self.x1 and self.y0 <= cell[1] <= self.y1


def bounding_rect(p: Cell, q: Cell, padding: int = 0,
                  geometry: Optional[GridGeometry] = None) -> Rect:
    """
    Axis-aligned rectangle spanned by two cells, dilated by ``padding``.

    Args:
        p: First corner
        q: Opposite corner
        padding: Cells added on every side
        geometry: When given, the result is clipped to the grid

    Example:
        >>> bounding_rect((2, 2), (4, 4), padding=1)
        Rect(x0=1, x1=5, y0=1, y1=5)
    """
    x0, x1 = sorted((p[0], q[0]))
    y0, y1 = sorted((p[1], q[1]))
    x0, x1, y0, y1 = x0 - padding, x1 + padding, y0 - padding, y1 + padding
    if geometry is not None:
        x0, y0 = max(x0, 0), max(y0, 0)
        x1, y1 = min(x1, geometry.height - 1), min(y1, geometry.width - 1)
    return Rect(x0, x1, y0, y1)


# ---------------------------
# COST
# ---------------------------
def _lattice_cost(positions: Iterable[Cell], column_penalty: bool = False) -> int:
    cost = 0
    by_row: Dict[int, Set[int]] = defaultdict(set)
    by_col: Dict[int, Set[int]] = defaultdict(set)
    for r, c in positions:
        by_row[r].add(c)
        by_col[c].add(r)
    groups = list(by_row.values())
    if column_penalty:
        groups += list(by_col.values())
    for line in groups:
        n = len(line)
        cost += n * (n - 1) // 2 - sum(1 for v in line if v + 1 in line)
    return cost


def _added_cost(v: Cell, members: Iterable[Cell], column_penalty: bool) -> int:
    cost = 0
    for r, c in members:
        if r == v[0] and abs(c - v[1]) > 1:
            cost += 1
        if column_penalty and c == v[1] and abs(r - v[0]) > 1:
            cost += 1
    return cost


def path_cost(selection: Iterable[SubBlockRef], geometry: GridGeometry,
              column_penalty: bool = False) -> int:
    """
    Soft cost of a selection.

    Counts unordered pairs of selected sub-blocks that are not adjacent and
    whose row bands overlap. Sub-blocks sit on a common lattice, so the bands
    overlap exactly when both are in the same sub-block row. With
    ``column_penalty`` the same rule is also applied to columns.

    Example:
        >>> g = GridGeometry(16, 16, 8, 2)
        >>> path_cost([SubBlockRef(0, 0), SubBlockRef(0, 2)], g)
        1
    """
    return _lattice_cost({subblock_position(geometry, s) for s in selection}, column_penalty)


# ---------------------------
# REGION
# ---------------------------
def uniform_subblocks(grid: CellGrid, cls: SemClass) -> np.ndarray:
    """(sub_rows, sub_cols) boolean array: sub-blocks made only of ``cls`` cells."""
    g = grid.geometry
    m = grid.mask(cls).reshape(g.sub_rows, g.sub_dim, g.sub_cols, g.sub_dim)
    return m.all(axis=(1, 3))


def guessable_region(grid: CellGrid, p: Cell, q: Cell, placement_cls: SemClass,
                     padding: int = 0, scope: Optional[BlockRef] = None,
                     excluded: Iterable[SubBlockRef] = (),
                     uniform: Optional[np.ndarray] = None) -> FrozenSet[SubBlockRef]:
    """
    Sub-blocks the path between pivots ``p`` and ``q`` may use.

    Those intersecting the padded bounding rectangle, made only of placement
    cells, inside ``scope`` (a block) when given, and not ``excluded``. The
    pivots' own sub-blocks are always included.
    """
    g = grid.geometry
    if uniform is None:
        uniform = uniform_subblocks(grid, placement_cls)
    rect = bounding_rect(p, q, padding, g)
    excluded = set(excluded)
    found = set()
    for sr in range(rect.x0 // g.sub_dim, rect.x1 // g.sub_dim + 1):
        for sc in range(rect.y0 // g.sub_dim, rect.y1 // g.sub_dim + 1):
            if not uniform[sr, sc]:
                continue
            ref = subblock_at(g, sr, sc)
            if scope is not None and ref.idb != scope.idb:
                continue
            if ref not in excluded:
                found.add(ref)
    found.add(cell_to_refs(g, *p)[1])
    found.add(cell_to_refs(g, *q)[1])
    return frozenset(found)


# ---------------------------
# PAIR SEARCH
# ---------------------------
def _neighbors(v: Cell, cells: FrozenSet[Cell], offsets: Sequence[Cell]) -> List[Cell]:
    return [(v[0] + dr, v[1] + dc) for dr, dc in offsets if (v[0] + dr, v[1] + dc) in cells]


def _shortest_path(start: Cell, goal: Cell, cells: FrozenSet[Cell],
                   offsets: Sequence[Cell]) -> Optional[FrozenSet[Cell]]:
    parent: Dict[Cell, Optional[Cell]] = {start: None}
    queue = deque([start])
    while queue:
        v = queue.popleft()
        if v == goal:
            path = set()
            node: Optional[Cell] = v
            while node is not None:
                path.add(node)
                node = parent[node]
            return frozenset(path)
        for w in _neighbors(v, cells, offsets):
            if w not in parent:
                parent[w] = v
                queue.append(w)
    return None


def _enumerate(start: Cell, goal: Cell, cells: FrozenSet[Cell], offsets: Sequence[Cell],
               column_penalty: bool) -> List[FrozenSet[Cell]]:
    """All connected sets containing start and goal with the least (cost, size)."""
    best: List[Optional[Tuple[int, int]]] = [None]
    winners: List[FrozenSet[Cell]] = []

    def visit(members: FrozenSet[Cell], cost: int, frontier: List[Cell], banned: FrozenSet[Cell]):
        key = (cost, len(members))
        if goal in members:
            if best[0] is None or key < best[0]:
                best[0] = key
                winners[:] = [members]
            elif key == best[0]:
                winners.append(members)
            return
        if best[0] is not None and key >= best[0]:
            return
        frontier = list(frontier)
        local_banned = set(banned)
        while frontier:
            v = frontier.pop()
            ext = [w for w in _neighbors(v, cells, offsets)
                   if w not in members and w not in local_banned and w not in frontier]
            visit(members | {v}, cost + _added_cost(v, members, column_penalty),
                  frontier + ext, frozenset(local_banned))
            local_banned.add(v)

    visit(frozenset([start]), 0, _neighbors(start, cells, offsets), frozenset())
    return winners


def _best_first(start: Cell, goal: Cell, cells: FrozenSet[Cell], offsets: Sequence[Cell],
                column_penalty: bool, rng: np.random.Generator,
                budget: int) -> Optional[FrozenSet[Cell]]:
    counter = itertools.count()
    first = frozenset([start])
    heap = [(0, 1, float(rng.random()), next(counter), first)]
    seen = {first}
    expansions = 0
    while heap:
        cost, size, _, _, members = heapq.heappop(heap)
        if goal in members:
            return members
        expansions += 1
        if expansions > budget:
            return None
        boundary = sorted({w for v in members for w in _neighbors(v, cells, offsets)} - members)
        for v in boundary:
            nxt = members | {v}
            if nxt in seen:
                continue
            seen.add(nxt)
            heapq.heappush(heap, (cost + _added_cost(v, members, column_penalty), size + 1,
                                  float(rng.random()), next(counter), nxt))
    return None


def connect_pair(grid: CellGrid, a: SubBlockRef, b: SubBlockRef,
                 region: Iterable[SubBlockRef], rng: np.random.Generator,
                 options: Optional[SearchOptions] = None) -> Tuple[FrozenSet[SubBlockRef], int]:
    """
    Cheapest connected selection joining two pivot sub-blocks.

    Args:
        grid: Current grid (for its geometry)
        a: Sub-block of the first pivot
        b: Sub-block of the second pivot
        region: Guessable sub-blocks; ``a`` and ``b`` are added if missing
        rng: Tie-break generator
        options: Search options

    Returns:
        tuple: (selection, soft cost of the selection)

    Raises:
        InfeasibleError: If ``a`` and ``b`` are not connected within the region
    """
    options = options or SearchOptions()
    g = grid.geometry
    refs = set(region) | {a, b}
    pos = {s: subblock_position(g, s) for s in refs}
    back = {p: s for s, p in pos.items()}
    cells = frozenset(pos.values())
    offsets = neighbor_offsets(g.neighborhood)
    start, goal = pos[a], pos[b]

    if start == goal:
        return frozenset([a]), 0
    path = _shortest_path(start, goal, cells, offsets)
    if path is None:
        raise InfeasibleError(
            f"sub-blocks ({a.idb}, {a.idsb}) and ({b.idb}, {b.idsb}) are not connected",
            stage="connect_pivots",
        )

    members: Optional[FrozenSet[Cell]]
    if options.exhaustive and len(cells) <= options.oracle_bound:
        winners = sorted(_enumerate(start, goal, cells, offsets, options.column_penalty),
                         key=lambda m: sorted(m))
        members = winners[int(rng.integers(len(winners)))]
    else:
        members = _best_first(start, goal, cells, offsets, options.column_penalty, rng, options.budget)
        if members is None:
            members = path
    return frozenset(back[p] for p in members), _lattice_cost(members, options.column_penalty)


def connect_pivots(grid: CellGrid, pivots: Sequence[ContourPivot], spec: ObjectSpec,
                   rng: np.random.Generator, options: Optional[SearchOptions] = None,
                   center: Optional[Cell] = None,
                   scope: Optional[BlockRef] = None, closed: bool = True) -> PathSelection:
    """
    Join consecutive pivots and return the union of the pair selections.

    Args:
        grid: Current grid
        pivots: Pivots in idfp order
        spec: Object parameters (placement class and padding)
        rng: Tie-break generator
        options: Search options
        center: Its sub-block is never guessable
        scope: Restrict guessable sub-blocks to this block
        closed: Also join the last pivot back to the first

    Raises:
        InfeasibleError: If some pair cannot be connected
    """
    options = options or SearchOptions()
    g = grid.geometry
    pairs = list(zip(pivots, pivots[1:]))
    if closed and len(pivots) > 2:
        pairs.append((pivots[-1], pivots[0]))
    excluded = [cell_to_refs(g, *center)[1]] if center is not None else []
    uniform = uniform_subblocks(grid, spec.placement_cls)

    chosen: Set[SubBlockRef] = set()
    pair_costs = []
    for p, q in pairs:
        region = guessable_region(grid, p.position, q.position, spec.placement_cls,
                                  spec.padding, scope, excluded, uniform)
        a, b = cell_to_refs(g, *p.position)[1], cell_to_refs(g, *q.position)[1]
        selected, cost = connect_pair(grid, a, b, region, rng, options)
        chosen |= selected
        pair_costs.append(cost)
    return PathSelection(frozenset(chosen), path_cost(chosen, g, options.column_penalty), tuple(pair_costs))


# ---------------------------
# ORACLE
# ---------------------------
def brute_force_min_cost(grid: CellGrid, pivot_pair: Tuple[SubBlockRef, SubBlockRef],
                         guessable_region: Iterable[SubBlockRef],
                         column_penalty: bool = False, bound: int = 20) -> int:
    """
    Least soft cost over every connected subset of the region holding both pivots.

    Subsets are enumerated as bitmasks; connectivity is checked per subset.

    Raises:
        OracleBoundError: If the region has more than ``bound`` sub-blocks
        InfeasibleError: If no subset connects the pivots
    """
    g = grid.geometry
    region = sorted(set(guessable_region) | set(pivot_pair))
    n = len(region)
    if n > bound:
        raise OracleBoundError(f"region has {n} sub-blocks, bound is {bound}", size=n, bound=bound)
    positions = [subblock_position(g, s) for s in region]
    index = {p: i for i, p in enumerate(positions)}
    offsets = neighbor_offsets(g.neighborhood)
    adjacency = []
    for r, c in positions:
        bits = 0
        for dr, dc in offsets:
            j = index.get((r + dr, c + dc))
            if j is not None:
                bits |= 1 << j
        adjacency.append(bits)
    ia, ib = region.index(pivot_pair[0]), region.index(pivot_pair[1])
    required = (1 << ia) | (1 << ib)

    best: Optional[int] = None
    for mask in range(1 << n):
        if mask & required != required:
            continue
        reached, todo = 1 << ia, 1 << ia
        while todo:
            low = todo & -todo
            todo ^= low
            fresh = adjacency[low.bit_length() - 1] & mask & ~reached
            reached |= fresh
            todo |= fresh
        if reached != mask:
            continue
        cost = _lattice_cost([positions[i] for i in range(n) if mask >> i & 1], column_penalty)
        if best is None or cost < best:
            best = cost
    if best is None:
        raise InfeasibleError("no connected subset joins the pivots", stage="oracle")
    return best
