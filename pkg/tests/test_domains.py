from fractions import Fraction

import pytest

from symmkit.domains import INF, Bound, Domain, DomainVector, Status, as_number, status_of


def test_integer_domain_rounds_strict_bounds():
    dom = Domain.integer(0, 3).with_lo(Bound(0, 1)).with_hi(Bound(Fraction(5, 2)))
    assert (dom.lo, dom.hi) == (1, 2)
    assert not (dom.lo_strict or dom.hi_strict)


def test_continuous_domain_keeps_strict_bounds():
    dom = Domain.continuous(0, 1).with_lo(Bound(0, 1))
    assert dom.lo_strict
    assert not dom.contains(0)
    assert dom.contains(Fraction(1, 10**9))
    assert str(dom) == "(0, 1]"
    assert dom.reported() == Domain.continuous(0, 1)


def test_fixed_and_empty():
    assert Domain.integer(2, 2).is_fixed
    assert Domain.integer(3, 2).is_empty
    assert Domain.continuous(1, 1).with_hi(Bound(1, -1)).is_empty
    assert not Domain.integer(3, 2).is_fixed


@pytest.mark.parametrize(
    ("lo", "hi", "low", "high"),
    [
        (0, 1, (0, 0), (1, 1)),
        (0, 3, (0, 1), (2, 3)),
        (-3, 0, (-3, -2), (-1, 0)),
        (0, 4, (0, 2), (3, 4)),
    ],
)
def test_split(lo, hi, low, high):
    a, b = Domain.integer(lo, hi).split()
    assert (a.lo, a.hi) == low
    assert (b.lo, b.hi) == high


@pytest.mark.parametrize("dom", [Domain.integer(1, 1), Domain.continuous(0, 1), Domain.integer(0, INF)])
def test_split_refuses(dom):
    with pytest.raises(ValueError):
        dom.split()


def test_sizes():
    d = DomainVector.of([Domain.binary(), Domain.integer(0, 2), Domain.integer(5, 5)])
    assert d.box_size() == 6
    assert d.box_size([1]) == 3
    assert Domain.continuous(0, 1).size == INF
    assert Domain.integer(1, 0).size == 0


def test_status_of():
    d = DomainVector.of([Domain.binary(), Domain.binary()])
    assert status_of(d, d) is Status.UNCHANGED
    assert status_of(d, d.replace({0: Domain.integer(1, 1)})) is Status.REDUCED
    assert status_of(d, d.replace({1: Domain.integer(1, 0)})) is Status.INFEASIBLE


def test_changed_and_str():
    d = DomainVector.of([Domain.binary(), Domain.integer(-1, 1)])
    e = d.replace({1: Domain.integer(-1, -1)})
    assert d.changed(e) == [1]
    assert str(e) == "[0, 1] x {-1}"


def test_as_number_is_exact():
    assert as_number("0.1") == Fraction(1, 10)
    assert as_number(2.5) == Fraction(5, 2)
    with pytest.raises(TypeError):
        as_number([1])
