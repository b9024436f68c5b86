import pytest

from symmkit.exceptions import CapExceededError, DimensionMismatchError, InstanceFormatError
from symmkit.perms import PermGroup, Permutation, compose, decompose_components


def test_parse_and_print():
    p = Permutation.parse("(1,3,2,4)", 4)
    assert p.image == (2, 3, 1, 0)
    assert str(p) == "(1,3,2,4)"
    assert Permutation.parse("(1 2)(3,4)", 4) == Permutation.parse("(3,4)(1,2)", 4)
    assert Permutation.parse("()", 3).is_identity
    assert Permutation.parse("id", 3).is_identity


@pytest.mark.parametrize("text", ["(1,2", "(1,5)", "(1,2)(2,3)", "(a,b)"])
def test_parse_rejects(text):
    with pytest.raises(InstanceFormatError):
        Permutation.parse(text, 4)


def test_apply_moves_entries_forward():
    p = Permutation.parse("(1,2,3)", 3)
    assert p.apply(("a", "b", "c")) == ("c", "a", "b")
    assert p.inverse.apply(p.apply((1, 2, 3))) == (1, 2, 3)
    with pytest.raises(DimensionMismatchError):
        p.apply((1, 2))


def test_compose_is_right_to_left():
    a = Permutation.parse("(1,2)", 3)
    b = Permutation.parse("(2,3)", 3)
    ab = compose(a, b)
    assert [ab(i) for i in range(3)] == [a(b(i)) for i in range(3)]
    assert compose(ab, ab.inverse).is_identity


@pytest.mark.parametrize(
    ("generators", "order"),
    [
        (["(1,2)"], 2),
        (["(1,2)", "(2,3)"], 6),
        (["(1,2,3,4)"], 4),
        (["(1,2)", "(2,3)", "(3,4)"], 24),
        (["(1,2)(3,4)", "(1,3)(2,4)"], 4),
    ],
)
def test_group_order(generators, order):
    g = PermGroup(4, tuple(Permutation.parse(text, 4) for text in generators))
    assert len(g.elements) == order
    assert all(compose(a, b) in g.elements for a in g.elements for b in g.elements)


def test_enumeration_cap():
    gens = tuple(Permutation.transposition(8, i, i + 1) for i in range(7))
    with pytest.raises(CapExceededError) as err:
        _ = PermGroup(8, gens, enumeration_cap=100).elements
    assert err.value.cap == 100


def test_orbits():
    g = PermGroup(6, (Permutation.parse("(1,2)", 6), Permutation.parse("(2,3)", 6), Permutation.parse("(5,6)", 6)))
    assert g.orbit(0) == frozenset({0, 1, 2})
    assert g.orbit_map[3] == (3,)
    assert g.orbit_map[5] == (4, 5)
    assert g.support == frozenset({0, 1, 2, 4, 5})


def test_decompose_components():
    gens = (
        Permutation.parse("(5,6)", 6),
        Permutation.parse("(1,2)", 6),
        Permutation.parse("(2,3)", 6),
        Permutation.identity(6),
    )
    components = decompose_components(PermGroup(6, gens))
    assert [sorted(c.support) for c in components] == [[0, 1, 2], [4, 5]]
    assert len(components[0].generators) == 2
    assert decompose_components(PermGroup(3)) == []
