"""Small branch-and-bound trees on the 3 x 5 shell, replayed by hand

Every tree branches on theta_23, theta_12, theta_13 (variables 7, 1, 2) in that order, zero child first, and
stops at depth 3. The expected fixings per node were worked out by hand.
"""

import pytest
from conftest import REPLAY_ORDER, fixings, node_at, zero

from symmkit.bnb import NodeStatus, SolveConfig, SolveResult, SolveStatus, SourceTag, isoprune_check, solve
from symmkit.dispatch import ShcMode
from symmkit.instance import Instance
from symmkit.instances import ColumnSwaps, ndb_shell
from symmkit.perms import PermGroup
from symmkit.prehandle import Placement, PrehandlePolicy


def _replay(inst: Instance, **options) -> SolveResult:
    cfg = SolveConfig(bound_pruning=False, branching_order=REPLAY_ORDER, depth_limit=3, **options)
    return solve(inst, cfg)


def _path(*values: int) -> tuple[tuple[int, int], ...]:
    return tuple(zip(REPLAY_ORDER, values, strict=False))


def _check(result: SolveResult, source: SourceTag, expected: dict[tuple[int, ...], set[tuple[int, int]]]):
    for values, fixed in expected.items():
        node = node_at(result, _path(*values))
        assert fixings(result, node, source) == fixed, values


def test_static_lexicographic_fixing():
    shell = ndb_shell()
    layout = shell.orbitope
    # only columns 2 and 3 are interchangeable
    inst = shell.with_group(PermGroup(shell.n, (layout.column_swap(shell.n, 1, 2),)), layout)
    result = _replay(inst, shc=ShcMode.LEXRED, prehandle=PrehandlePolicy.STATIC)
    _check(
        result,
        SourceTag.LEXRED,
        {
            (0,): set(),
            (1,): set(),
            (0, 0): zero(2),
            (0, 1): set(),
            (0, 1, 0): set(),
            (0, 1, 1): set(),
            (1, 0): zero(2) | {(6, 1)},
            (1, 1): set(),
            (1, 1, 0): set(),
            (1, 1, 1): {(6, 1)},
        },
    )


def test_static_orbitopal_fixing(shell):
    result = _replay(shell, shc=ShcMode.ORBITOPE, prehandle=PrehandlePolicy.STATIC)
    assert result.components == ("static orbitopal reduction",)
    _check(
        result,
        SourceTag.ORBITOPE,
        {
            (0,): set(),
            (1,): set(),
            (0, 0): zero(2, 3, 4, 8, 9),
            (0, 1): {(0, 1)},
            (0, 1, 0): zero(3, 4, 8, 9),
            (0, 1, 1): set(),
            (1, 0): zero(2, 3, 4) | {(6, 1)},
            (1, 1): {(0, 1)},
            (1, 1, 0): zero(3, 4),
            (1, 1, 1): {(5, 1), (6, 1)},
        },
    )


@pytest.mark.parametrize(
    ("placement", "below", "above"),
    [
        (Placement.MEDIAN, zero(8, 9), {(5, 1), (6, 1)}),
        (Placement.FIRST, zero(5, 6, 8, 9), set()),
    ],
)
def test_dynamic_orbitopal_fixing(shell, placement, below, above):
    result = _replay(shell, shc=ShcMode.ORBITOPE, prehandle=PrehandlePolicy.ORBITOPE_DYNAMIC, placement=placement)
    _check(result, SourceTag.ORBITOPE, {(0,): below, (1,): above})


def test_isomorphism_pruning(shell):
    result = _replay(shell, isoprune=True)
    pruned = [node for node in result.tree.nodes if node.status is NodeStatus.PRUNED_SYMMETRY]
    assert [node.id for node in pruned] == [node_at(result, _path(0, 0, 1))]
    assert result.reductions[SourceTag.ISOPRUNE] == 1

    (node,) = pruned
    (state,) = node.states
    assert isoprune_check(state, shell.group.elements, node.branch_box)
    sibling = result.tree.nodes[node_at(result, _path(0, 0, 0))]
    assert sibling.status is NodeStatus.OPEN
    assert not isoprune_check(sibling.states[0], shell.group.elements, sibling.branch_box)


def test_orbital_fixing():
    inst = ndb_shell(swaps=ColumnSwaps.ALL)
    result = _replay(inst, shc=ShcMode.ORBITAL)
    _check(
        result,
        SourceTag.ORBITAL,
        {
            (0,): zero(5, 6, 8, 9),
            (0, 0): zero(0, 2, 3, 4),
            (0, 1): set(),
            (0, 1, 0): zero(0, 3, 4),
            (0, 1, 1): set(),
            (1,): set(),
            (1, 0): zero(0, 3, 4),
            (1, 0, 0): set(),
            (1, 0, 1): set(),
            (1, 1): set(),
            (1, 1, 0): set(),
            (1, 1, 1): set(),
        },
    )


def test_orbital_fixing_sees_fewer_orbits_with_adjacent_swaps(shell):
    result = _replay(shell, shc=ShcMode.ORBITAL)
    assert fixings(result, node_at(result, _path(1, 0)), SourceTag.ORBITAL) == zero(0)


def test_depth_limit_leaves_nodes_open(shell):
    result = _replay(shell)
    assert result.status is SolveStatus.INCOMPLETE
    assert max(node.depth for node in result.tree.nodes) == 3
    assert all(node.status is NodeStatus.OPEN for node in result.tree.nodes if node.depth == 3)
    assert len(result.tree.nodes) == 1 + 2 + 4 + 8
