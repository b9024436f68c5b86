"""Orbitopal reduction: complete propagation of sorted columns over a matrix of variables.

For a ``p x q`` matrix ``X`` of variables whose columns may be permuted freely, the symmetry handling constraints
amount to "the columns of ``X`` are lexicographically non-increasing".
Over a box of integer domains the tightest reduction is determined by two matrices:
the lexicographically smallest (``lexmin``) and largest (``lexmax``) sorted matrix in the box.
Column ``j`` only needs fixing down to the first row where these two differ, see :py:func:`propagate_orbitope`.

>>> from symmkit.domains import Domain, DomainVector
>>> from symmkit.instance import OrbitopeLayout
>>> layout = OrbitopeLayout.row_major(1, 3)
>>> d = DomainVector.of([Domain.integer(0, 2), Domain.integer(1, 1), Domain.integer(0, 2)])
>>> new, status = propagate_orbitope(layout, d)
>>> print(new)
[1, 2] x {1} x [0, 1]

Both matrices are computed column by column in ``O(pq)``: ``lexmin`` from the last column to the first, each
column the smallest one in its box that is still lexicographically at least the column to its right, and
``lexmax`` mirrored from left to right.
"""

from collections.abc import Sequence
from logging import getLogger
from typing import TYPE_CHECKING, NamedTuple

from symmkit.domains import Bound, Domain, DomainVector, OpCounter, Status, status_of
from symmkit.exceptions import PrehandleError
from symmkit.instance import OrbitopeLayout
from symmkit.perms import PermGroup

if TYPE_CHECKING:
    from symmkit.prehandle import PrehandlingState

logger = getLogger(__name__)

type Matrix = tuple[tuple[int, ...], ...]
"""Row-major integer matrix"""


class ExtremeMatrices(NamedTuple):
    """The extreme sorted matrices of a box and, per column, the first row where they differ (``p`` if none)"""

    lexmin: Matrix
    lexmax: Matrix
    first_diff_row: tuple[int, ...]


def _transpose(columns: Sequence[Sequence[int]]) -> Matrix:
    return tuple(zip(*columns, strict=True))


def _min_column(doms: Sequence[Domain], ref: Sequence[int] | None, ops: OpCounter) -> list[int] | None:
    """Smallest column in ``doms`` that is lexicographically at least ``ref``"""
    column = [int(d.lo) for d in doms]
    if ref is None:
        ops.tick(len(doms))
        return column
    raisable = -1
    for i, dom in enumerate(doms):
        ops.tick()
        if dom.hi < ref[i]:
            if raisable < 0:
                return None
            column[raisable] = ref[raisable] + 1
            column[raisable + 1 :] = [int(d.lo) for d in doms[raisable + 1 :]]
            return column
        column[i] = max(int(dom.lo), ref[i])
        if column[i] > ref[i]:
            return column
        if dom.hi > ref[i]:
            raisable = i
    return column


def _max_column(doms: Sequence[Domain], ref: Sequence[int] | None, ops: OpCounter) -> list[int] | None:
    """Largest column in ``doms`` that is lexicographically at most ``ref``"""
    column = [int(d.hi) for d in doms]
    if ref is None:
        ops.tick(len(doms))
        return column
    lowerable = -1
    for i, dom in enumerate(doms):
        ops.tick()
        if dom.lo > ref[i]:
            if lowerable < 0:
                return None
            column[lowerable] = ref[lowerable] - 1
            column[lowerable + 1 :] = [int(d.hi) for d in doms[lowerable + 1 :]]
            return column
        column[i] = min(int(dom.hi), ref[i])
        if column[i] < ref[i]:
            return column
        if dom.lo < ref[i]:
            lowerable = i
    return column


def _cell_domains(cells: Sequence[Sequence[int]], d: DomainVector) -> list[list[Domain]] | None:
    """Column-wise cell domains, None if some cell is not a finite integer domain"""
    q = len(cells[0])
    columns = [[d[row[j]] for row in cells] for j in range(q)]
    if any(not (dom.is_integer and dom.is_finite) for col in columns for dom in col):
        return None
    return columns


def _finite_columns(cells: Sequence[Sequence[int]], d: DomainVector) -> list[list[Domain]]:
    columns = _cell_domains(cells, d)
    if columns is None:
        raise ValueError("Orbitope cells must have finite integer domains")
    return columns


def _lexmin_columns(columns: Sequence[Sequence[Domain]], ops: OpCounter) -> list[list[int]] | None:
    result: list[list[int]] = [[] for _ in columns]
    ref = None
    for j in reversed(range(len(columns))):
        col = _min_column(columns[j], ref, ops)
        if col is None:
            return None
        result[j] = ref = col
    return result


def _lexmax_columns(columns: Sequence[Sequence[Domain]], ops: OpCounter) -> list[list[int]] | None:
    result: list[list[int]] = [[] for _ in columns]
    ref = None
    for j in range(len(columns)):
        col = _max_column(columns[j], ref, ops)
        if col is None:
            return None
        result[j] = ref = col
    return result


def compute_lexmin(layout: OrbitopeLayout, d: DomainVector, ops: OpCounter | None = None) -> Matrix | None:
    """The lexicographically smallest matrix with sorted columns in the box, None if there is none"""
    columns = _lexmin_columns(_finite_columns(layout.cells, d), ops or OpCounter())
    return None if columns is None else _transpose(columns)


def compute_lexmax(layout: OrbitopeLayout, d: DomainVector, ops: OpCounter | None = None) -> Matrix | None:
    """The lexicographically largest matrix with sorted columns in the box, None if there is none"""
    columns = _lexmax_columns(_finite_columns(layout.cells, d), ops or OpCounter())
    return None if columns is None else _transpose(columns)


def compute_extremes(
    cells: Sequence[Sequence[int]], d: DomainVector, ops: OpCounter | None = None
) -> ExtremeMatrices | None:
    """Both extreme matrices of the cell grid ``cells``, None if the box holds no sorted matrix"""
    ops = ops or OpCounter()
    columns = _finite_columns(cells, d)
    low = _lexmin_columns(columns, ops)
    high = _lexmax_columns(columns, ops)
    if low is None or high is None:
        return None
    p = len(cells)
    first_diff = tuple(next((i for i in range(p) if lo[i] != hi[i]), p) for lo, hi in zip(low, high, strict=True))
    return ExtremeMatrices(_transpose(low), _transpose(high), first_diff)


def _propagate_cells(
    cells: Sequence[Sequence[int]], d: DomainVector, ops: OpCounter
) -> tuple[DomainVector, Status]:
    if _cell_domains(cells, d) is None:
        logger.debug("Skipping orbitopal reduction, some cells are not finite integer domains")
        return d, Status.UNCHANGED
    extremes = compute_extremes(cells, d, ops)
    if extremes is None:
        return d, Status.INFEASIBLE

    updates = {}
    for j, last_row in enumerate(extremes.first_diff_row):
        for i in range(min(last_row + 1, len(cells))):
            ops.tick()
            var = cells[i][j]
            new = d[var].with_lo(Bound(extremes.lexmin[i][j])).with_hi(Bound(extremes.lexmax[i][j]))
            if new != d[var]:
                updates[var] = new
    result = d.replace(updates)
    status = status_of(d, result)
    if status is Status.REDUCED:
        logger.debug(f"orbitopal reduction tightened {sorted(v + 1 for v in updates)}")
    return result, status


def propagate_orbitope(
    layout: OrbitopeLayout, d: DomainVector, ops: OpCounter | None = None
) -> tuple[DomainVector, Status]:
    """Tightest box keeping every sorted-column matrix of ``d``

    Cell ``(i, j)`` is intersected with ``[lexmin[i][j], lexmax[i][j]]`` for every row ``i`` up to and including
    the first row where the two extreme matrices differ in column ``j``; cells below stay as they are.
    Cells with continuous or unbounded domains make this a no-op.
    """
    return _propagate_cells(layout.cells, d, ops or OpCounter())


def propagate_orbitope_dynamic(
    layout: OrbitopeLayout, state: "PrehandlingState", d: DomainVector, ops: OpCounter | None = None
) -> tuple[DomainVector, Status]:
    """Orbitopal reduction on the rows seen so far, in the order and column arrangement of ``state``

    Row ``r`` and column ``c`` of the seen submatrix hold the variable at position ``r * q + c`` of sigma.
    """
    if state.layout is None or state.layout.q != layout.q:
        raise PrehandleError("Dynamic orbitopal reduction needs a state built for this orbitope")
    if state.m % layout.q:
        raise PrehandleError(f"sigma has {state.m} positions, not a multiple of the {layout.q} columns")
    if state.m == 0:
        return d, Status.UNCHANGED
    sigma = state.sigma_vars
    cells = [sigma[r * layout.q : (r + 1) * layout.q] for r in range(state.m // layout.q)]
    return _propagate_cells(cells, d, ops or OpCounter())


def detect_orbitope(
    g: PermGroup, n: int, hint: OrbitopeLayout | None = None
) -> OrbitopeLayout | None:
    """Recognize a group generated by column transpositions of some ``p x q`` variable matrix

    Every generator has to be a product of ``p`` disjoint transpositions, one per row, all swapping the same two
    columns, and the column transpositions have to connect all ``q`` columns (so they generate every column
    permutation). Rows are ordered by their smallest variable. When ``hint`` describes the same rows and columns
    its ordering is used instead.

    >>> from symmkit.perms import Permutation
    >>> detect_orbitope(PermGroup(4, (Permutation.parse("(1,2)(3,4)", 4),)), 4).cells
    ((0, 1), (2, 3))
    >>> detect_orbitope(PermGroup(4, (Permutation.parse("(1,2,3,4)", 4),)), 4) is None
    True
    """
    gens = [gen for gen in g.generators if not gen.is_identity]
    if not gens:
        return None
    cycle_lists = [gen.cycles() for gen in gens]
    if any(len(c) != 2 for cycles in cycle_lists for c in cycles):
        return None
    p = len(cycle_lists[0])
    if any(len(cycles) != p for cycles in cycle_lists):
        return None

    orbit_map = g.orbit_map
    rows = sorted({orbit_map[v] for v in g.support}, key=min)
    if len(rows) != p:
        return None
    q = len(rows[0])
    if q < 2 or any(len(row) != q for row in rows):
        return None
    row_of = {v: r for r, row in enumerate(rows) for v in row}

    # every generator moves exactly one pair in every row
    for cycles in cycle_lists:
        if sorted(row_of[a] for a, _ in cycles) != list(range(p)) or any(row_of[a] != row_of[b] for a, b in cycles):
            return None

    def signature(v: int) -> frozenset[int]:
        return frozenset(k for k, gen in enumerate(gens) if gen(v) != v)

    if q == 2:
        cells = [tuple(sorted(row)) for row in rows]
    else:
        by_signature = {signature(v): c for c, v in enumerate(rows[0])}
        if len(by_signature) != q:
            return None
        cells = []
        for row in rows:
            placed: list[int | None] = [None] * q
            for v in row:
                c = by_signature.get(signature(v))
                if c is None or placed[c] is not None:
                    return None
                placed[c] = v
            cells.append(tuple(v for v in placed if v is not None))

    col_of = {v: c for row in cells for c, v in enumerate(row)}
    parent = list(range(q))

    def find(c: int) -> int:
        while parent[c] != c:
            parent[c] = parent[parent[c]]
            c = parent[c]
        return c

    for cycles in cycle_lists:
        swaps = {frozenset((col_of[a], col_of[b])) for a, b in cycles}
        if len(swaps) != 1:
            return None
        a, b = sorted(next(iter(swaps)))
        parent[find(a)] = find(b)
    if len({find(c) for c in range(q)}) != 1:
        return None

    layout = OrbitopeLayout(p, q, tuple(cells))
    if hint is not None and _same_structure(layout, hint):
        layout = hint
    logger.debug(f"Detected a {p}x{q} orbitope on {len(g.support)} variables")
    return layout


def _same_structure(a: OrbitopeLayout, b: OrbitopeLayout) -> bool:
    def rows(layout: OrbitopeLayout) -> set[frozenset[int]]:
        return {frozenset(row) for row in layout.cells}

    def columns(layout: OrbitopeLayout) -> set[frozenset[int]]:
        return {frozenset(layout.column(j)) for j in range(layout.q)}

    return (a.p, a.q) == (b.p, b.q) and rows(a) == rows(b) and columns(a) == columns(b)
