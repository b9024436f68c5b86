import pytest
from conftest import box, random_box

from symmkit.domains import Domain, DomainVector, OpCounter, Status
from symmkit.exceptions import PrehandleError
from symmkit.instance import OrbitopeLayout
from symmkit.instances import ColumnSwaps, column_generators, ndb_shell
from symmkit.oracle import tightest_domains
from symmkit.orbitope import (
    compute_extremes,
    compute_lexmax,
    compute_lexmin,
    detect_orbitope,
    propagate_orbitope,
    propagate_orbitope_dynamic,
)
from symmkit.perms import PermGroup, Permutation
from symmkit.prehandle import BranchInfo, Placement, PrehandlingState, child_state


def _sorted_columns(layout: OrbitopeLayout):
    def holds(x: tuple[int, ...]) -> bool:
        columns = [tuple(x[v] for v in layout.column(j)) for j in range(layout.q)]
        return all(a >= b for a, b in zip(columns, columns[1:]))

    return holds


def test_extremes_on_the_shell_after_two_zero_branchings(shell):
    layout = shell.orbitope
    d = shell.domains.replace({layout.var(1, 2): Domain.integer(0, 0), layout.var(0, 1): Domain.integer(0, 0)})
    assert compute_lexmin(layout, d) == ((0,) * 5,) * 3
    assert compute_lexmax(layout, d) == ((1, 0, 0, 0, 0), (1, 1, 0, 0, 0), (1, 1, 1, 1, 1))

    result, status = propagate_orbitope(layout, d)
    assert status is Status.REDUCED
    assert set(d.changed(result)) == {2, 3, 4, 8, 9}
    assert all(result[v] == Domain.integer(0, 0) for v in d.changed(result))


def test_matches_tightest_domains(rng):
    """Random boxes: the propagated box is the hull of the sorted-column matrices inside the box"""
    for _ in range(500):
        p, q = int(rng.integers(1, 4)), int(rng.integers(1, 4))
        width = 2 if p * q <= 6 else 1
        layout = OrbitopeLayout.row_major(p, q)
        d = random_box(rng, p * q, width=width)
        result, status = propagate_orbitope(layout, d)
        hull = tightest_domains(_sorted_columns(layout), d)
        if hull is None:
            assert status is Status.INFEASIBLE, d
        else:
            assert result == hull.domains, (p, q, str(d))


def test_extremes_are_sorted_and_inside_the_box(rng):
    for _ in range(100):
        p, q = int(rng.integers(1, 5)), int(rng.integers(2, 5))
        layout = OrbitopeLayout.row_major(p, q)
        d = random_box(rng, p * q, width=2)
        extremes = compute_extremes(layout.cells, d)
        if extremes is None:
            assert propagate_orbitope(layout, d)[1] is Status.INFEASIBLE
            continue
        for matrix in (extremes.lexmin, extremes.lexmax):
            flat = tuple(matrix[i][j] for i in range(p) for j in range(q))
            assert _sorted_columns(layout)(flat)
            assert all(d[v].contains(x) for v, x in enumerate(flat))


def test_infeasible_and_skipped_boxes():
    layout = OrbitopeLayout.row_major(1, 2)
    assert propagate_orbitope(layout, box((0, 0), (1, 1)))[1] is Status.INFEASIBLE
    assert compute_lexmin(layout, box((0, 0), (1, 1))) is None

    continuous = DomainVector.of([Domain.continuous(0, 1), Domain.integer(1, 1)])
    assert propagate_orbitope(layout, continuous) == (continuous, Status.UNCHANGED)


def test_work_grows_with_matrix_size():
    small, large = OpCounter(), OpCounter()
    propagate_orbitope(OrbitopeLayout.row_major(3, 3), box(*[(0, 1)] * 9), small)
    propagate_orbitope(OrbitopeLayout.row_major(6, 6), box(*[(0, 1)] * 36), large)
    assert 0 < small.count < large.count <= 16 * small.count


@pytest.mark.parametrize("swaps", list(ColumnSwaps))
def test_detects_column_symmetry_of_the_shell(swaps):
    shell = ndb_shell(swaps=swaps)
    assert detect_orbitope(shell.group, shell.n) == OrbitopeLayout.row_major(3, 5)


def test_detection_uses_a_matching_hint():
    layout = OrbitopeLayout(2, 3, ((0, 1, 2), (3, 4, 5)))
    hint = OrbitopeLayout(2, 3, ((2, 1, 0), (5, 4, 3)))
    group = PermGroup(6, column_generators(layout, 6, ColumnSwaps.ALL))
    assert detect_orbitope(group, 6, hint) == hint
    assert detect_orbitope(group, 6) == layout


@pytest.mark.parametrize(
    "generators",
    [
        ["(1,2,3)"],
        ["(1,2)(3,4)", "(1,2)"],
        ["(1,2)(3,4)", "(1,3)(2,4)"],
        ["(1,2)", "(3,4)"],
    ],
)
def test_rejects_groups_that_are_not_orbitopes(generators):
    group = PermGroup(4, tuple(Permutation.parse(text, 4) for text in generators))
    assert detect_orbitope(group, 4) is None


def test_dynamic_reduction_follows_the_branched_row():
    layout = OrbitopeLayout.row_major(2, 3)
    d = box(*[(0, 1)] * 6)
    root = PrehandlingState.orbitope_dynamic(6, layout, Placement.FIRST)
    assert propagate_orbitope_dynamic(layout, root, d) == (d, Status.UNCHANGED)

    branched = layout.var(1, 2)
    state = child_state(root, BranchInfo(branched), d)
    assert state.row_order == (1,)
    assert state.sigma_vars[0] == branched
    assert sorted(state.sigma_vars) == list(layout.row(1))

    child = d.replace({branched: Domain.integer(0, 0)})
    result, status = propagate_orbitope_dynamic(layout, state, child)
    assert status is Status.REDUCED
    assert set(child.changed(result)) == {3, 4}
    assert all(result[v] == Domain.integer(0, 0) for v in (3, 4))


def test_dynamic_reduction_needs_its_own_state():
    layout = OrbitopeLayout.row_major(2, 3)
    with pytest.raises(PrehandleError):
        propagate_orbitope_dynamic(layout, PrehandlingState.branching(6), box(*[(0, 1)] * 6))
