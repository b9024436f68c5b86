import numpy as np
import pytest
from conftest import box, random_box, random_permutation

from symmkit.domains import Domain, DomainVector, OpCounter, Status
from symmkit.exceptions import DimensionMismatchError
from symmkit.lexred import LexOrder, propagate_lex, propagate_lex_all
from symmkit.oracle import tightest_domains
from symmkit.perms import Permutation


def test_four_variable_cycle_fixes_last_entry():
    d = box((0, 0), (-1, 0), (1, 1), (-1, 1))
    gamma = Permutation.parse("(1,3,2,4)", 4)
    result, status = propagate_lex(LexOrder.static(gamma), d)
    assert status is Status.REDUCED
    assert d.changed(result) == [3]
    assert result[3] == Domain.integer(-1, -1)


def test_dynamic_order_reads_only_branched_positions():
    d = box((0, 1), (0, 1), (1, 1), (0, 0))
    order = LexOrder((2, 3), Permutation.identity(4))
    assert propagate_lex(order, d) == (d, Status.UNCHANGED)

    # (x3, x4) >= (x2, x3) with x3 = 1 and x4 = 0 forbids x2 = 1
    order = LexOrder((2, 3), Permutation.parse("(1,2,3,4)", 4))
    result, status = propagate_lex(order, d)
    assert d.changed(result) == [1]
    assert status is Status.REDUCED
    assert result[1] == Domain.integer(0, 0)


def test_infeasible_when_order_cannot_hold():
    d = box((0, 0), (1, 1))
    result, status = propagate_lex(LexOrder.static(Permutation.parse("(1,2)", 2)), d)
    assert status is Status.INFEASIBLE


def test_strict_continuous_bounds():
    d = DomainVector.of(
        [Domain.continuous(0, 1), Domain.continuous(0, 1), Domain.continuous(0, 0), Domain.continuous(1, 1)]
    )
    gamma = Permutation.parse("(1,2)(3,4)", 4)
    result, status = propagate_lex(LexOrder.static(gamma), d)
    assert status is Status.REDUCED
    assert str(result[0]) == "(0, 1]"
    assert str(result[1]) == "[0, 1)"
    assert result.reported() == d


def test_continuous_equality_is_propagated():
    d = DomainVector.of([Domain.continuous(0, 1), Domain.continuous(1, 2)])
    result, _ = propagate_lex(LexOrder.static(Permutation.parse("(1,2)", 2)), d)
    assert result[0] == Domain.continuous(1, 1)
    assert result[1] == Domain.continuous(1, 1)


def test_dimension_mismatch():
    with pytest.raises(DimensionMismatchError):
        propagate_lex(LexOrder.static(Permutation.identity(3)), box((0, 1)))


def _lex_predicate(order: LexOrder):
    pairs = order.pairs

    def holds(x: tuple[int, ...]) -> bool:
        return tuple(x[a] for a, _ in pairs) >= tuple(x[b] for _, b in pairs)

    return holds


def _random_order(rng: np.random.Generator, n: int) -> LexOrder:
    gamma = random_permutation(rng, n)
    if rng.random() < 0.5:
        return LexOrder.static(gamma)
    m = int(rng.integers(0, n + 1))
    positions = tuple(int(v) for v in rng.permutation(n)[:m])
    return LexOrder(positions, gamma)


def test_matches_tightest_domains(rng):
    """Random orders and boxes: the propagated box is the hull of the solutions inside the box"""
    for _ in range(600):
        n = int(rng.integers(1, 7))
        d = random_box(rng, n, width=3, low=int(rng.integers(-2, 2)))
        order = _random_order(rng, n)
        result, status = propagate_lex(order, d)
        hull = tightest_domains(_lex_predicate(order), d)
        if hull is None:
            assert status is Status.INFEASIBLE, (order, d)
        else:
            assert status is not Status.INFEASIBLE, (order, d)
            assert result == hull.domains, (order, d)


def test_all_orders_reach_a_fixpoint(rng):
    for _ in range(100):
        n = int(rng.integers(2, 6))
        d = random_box(rng, n, width=2)
        orders = [LexOrder.static(random_permutation(rng, n)) for _ in range(3)]
        result, status = propagate_lex_all(orders, d)
        if status is Status.INFEASIBLE:
            continue
        assert result.subset_of(d)
        for order in orders:
            assert propagate_lex(order, result)[1] is Status.UNCHANGED


def test_pair_visits_are_counted():
    d = box((0, 1), (0, 1), (0, 1))
    ops = OpCounter()
    propagate_lex(LexOrder.static(Permutation.parse("(1,2,3)", 3)), d, ops)
    assert 1 <= ops.count <= 3 * 3
