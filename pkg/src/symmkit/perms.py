"""Permutations of variable indices and the groups they generate.

A :py:class:`Permutation` ``gamma`` acts on vectors by moving entries,
``gamma(x)[gamma(i)] = x[i]``, or equivalently ``gamma(x)[i] = x[gamma^-1(i)]``.
Internally everything is 0-based, while the cycle notation read and printed by this module is 1-based.

>>> gamma = Permutation.parse("(1,2,3,4)", 4)
>>> gamma.apply(("a", "b", "c", "d"))
('d', 'a', 'b', 'c')
>>> print(compose(gamma, Permutation.parse("(1,4,3,2)", 4)))
()

Groups are only ever stored through their generators (:py:class:`PermGroup`), the full group is only
enumerated (:py:func:`enumerate_group`) by the oracles and by isomorphism pruning, and that enumeration is capped.
"""

import re
from collections import deque
from collections.abc import Iterable, Sequence
from dataclasses import dataclass
from functools import cached_property
from logging import getLogger

from symmkit.exceptions import (
    CapExceededError,
    DimensionMismatchError,
    InstanceFormatError,
)

logger = getLogger(__name__)

DEFAULT_ENUMERATION_CAP = 10_000
"""Largest group :py:func:`enumerate_group` will build before giving up"""

CYCLE_RE = re.compile(r"\(([^()]*)\)")


@dataclass(frozen=True)
class Permutation:
    """A bijection on ``{0, ..., n-1}`` stored as its image table, ``image[i] = gamma(i)``

    >>> p = Permutation.from_cycles(5, [(1, 3), (2, 4, 5)])
    >>> p.image
    (2, 3, 0, 4, 1)
    >>> print(p)
    (1,3)(2,4,5)
    >>> print(p.inverse)
    (1,3)(2,5,4)
    """

    image: tuple[int, ...]

    def __post_init__(self):
        if sorted(self.image) != list(range(len(self.image))):
            raise ValueError(f"Not a permutation of 0..{len(self.image) - 1}: {self.image}")

    @classmethod
    def identity(cls, n: int) -> "Permutation":
        return cls(tuple(range(n)))

    @classmethod
    def transposition(cls, n: int, a: int, b: int) -> "Permutation":
        """The permutation exchanging the (0-based) indices ``a`` and ``b``"""
        image = list(range(n))
        image[a], image[b] = b, a
        return cls(tuple(image))

    @classmethod
    def from_cycles(cls, n: int, cycles: Iterable[Sequence[int]], one_based: bool = True) -> "Permutation":
        """Build a permutation from disjoint cycles, 1-based unless ``one_based`` is False"""
        shift = 1 if one_based else 0
        image = list(range(n))
        seen: set[int] = set()
        for cycle in cycles:
            points = [c - shift for c in cycle]
            if any(not 0 <= p < n for p in points):
                raise InstanceFormatError(f"Cycle {tuple(cycle)} has entries outside of 1..{n}")
            if seen.intersection(points) or len(set(points)) != len(points):
                raise InstanceFormatError(f"Cycle {tuple(cycle)} is not disjoint from the others")
            seen.update(points)
            for a, b in zip(points, points[1:] + points[:1], strict=True):
                image[a] = b
        return cls(tuple(image))

    @classmethod
    def parse(cls, text: str, n: int) -> "Permutation":
        """Parse 1-based cycle notation like ``"(1,3)(2,4)"``, ``"()"`` or ``"id"`` is the identity"""
        stripped = text.strip()
        if stripped in ("", "id", "()"):
            return cls.identity(n)
        if CYCLE_RE.sub("", stripped).strip():
            raise InstanceFormatError(f"Could not read cycle notation {text!r}")
        cycles = []
        for body in CYCLE_RE.findall(stripped):
            entries = [e for e in re.split(r"[,\s]+", body.strip()) if e]
            try:
                cycles.append([int(e) for e in entries])
            except ValueError as err:
                raise InstanceFormatError(f"Could not read cycle notation {text!r}") from err
        return cls.from_cycles(n, cycles)

    @property
    def n(self) -> int:
        return len(self.image)

    def __call__(self, i: int) -> int:
        return self.image[i]

    @cached_property
    def inverse(self) -> "Permutation":
        inv = [0] * self.n
        for i, j in enumerate(self.image):
            inv[j] = i
        return Permutation(tuple(inv))

    @cached_property
    def support(self) -> frozenset[int]:
        """Indices moved by this permutation"""
        return frozenset(i for i, j in enumerate(self.image) if i != j)

    @property
    def is_identity(self) -> bool:
        return not self.support

    def apply[T](self, x: Sequence[T]) -> tuple[T, ...]:
        """Permute the entries of the vector ``x``, ``result[gamma(i)] = x[i]``"""
        if len(x) != self.n:
            raise DimensionMismatchError(f"Vector of length {len(x)} for permutation on {self.n}")
        inv = self.inverse.image
        return tuple(x[inv[i]] for i in range(self.n))

    def cycles(self) -> list[tuple[int, ...]]:
        """Non-trivial cycles, 0-based, each starting at its smallest entry"""
        seen = [False] * self.n
        result = []
        for start in range(self.n):
            if seen[start] or self.image[start] == start:
                continue
            cycle = [start]
            seen[start] = True
            nxt = self.image[start]
            while nxt != start:
                cycle.append(nxt)
                seen[nxt] = True
                nxt = self.image[nxt]
            result.append(tuple(cycle))
        return result

    def __str__(self) -> str:
        cycles = self.cycles()
        if not cycles:
            return "()"
        return "".join("(" + ",".join(str(c + 1) for c in cycle) + ")" for cycle in cycles)


def compose(a: Permutation, b: Permutation) -> Permutation:
    """``a ∘ b``, that is ``i -> a(b(i))``"""
    if a.n != b.n:
        raise DimensionMismatchError(f"Cannot compose permutations on {a.n} and {b.n} points")
    return Permutation(tuple(a.image[j] for j in b.image))


@dataclass(frozen=True)
class PermGroup:
    """A permutation group on ``n`` points, given by its generators"""

    n: int
    generators: tuple[Permutation, ...] = ()
    enumeration_cap: int = DEFAULT_ENUMERATION_CAP

    def __post_init__(self):
        for gen in self.generators:
            if gen.n != self.n:
                raise DimensionMismatchError(f"Generator {gen} acts on {gen.n} points, group on {self.n}")

    @cached_property
    def support(self) -> frozenset[int]:
        return frozenset().union(*(g.support for g in self.generators))

    @property
    def is_trivial(self) -> bool:
        return not self.support

    @cached_property
    def elements(self) -> frozenset[Permutation]:
        """The enumerated group, see :py:func:`enumerate_group`"""
        return enumerate_group(self)

    def orbit(self, i: int) -> frozenset[int]:
        return orbit(self, i)

    @cached_property
    def orbit_map(self) -> tuple[tuple[int, ...], ...]:
        """For every index ``i``, the sorted orbit of ``i``

        Computed with a union-find over the generator cycles, so it does not need the group enumerated.
        """
        parent = list(range(self.n))

        def find(i: int) -> int:
            while parent[i] != i:
                parent[i] = parent[parent[i]]
                i = parent[i]
            return i

        for gen in self.generators:
            for cycle in gen.cycles():
                root = find(cycle[0])
                for c in cycle[1:]:
                    other = find(c)
                    if other != root:
                        parent[other] = root

        members: dict[int, list[int]] = {}
        for i in range(self.n):
            members.setdefault(find(i), []).append(i)
        return tuple(tuple(members[find(i)]) for i in range(self.n))


def enumerate_group(g: PermGroup) -> frozenset[Permutation]:
    """Breadth first closure of the generators under composition, identity included

    :raises CapExceededError: when the group has more than ``g.enumeration_cap`` elements
    """
    identity = Permutation.identity(g.n)
    elements = {identity}
    queue = deque([identity])
    while queue:
        current = queue.popleft()
        for gen in g.generators:
            candidate = compose(gen, current)
            if candidate in elements:
                continue
            elements.add(candidate)
            if len(elements) > g.enumeration_cap:
                raise CapExceededError(
                    f"Group has more than {g.enumeration_cap} elements",
                    count=len(elements),
                    cap=g.enumeration_cap,
                )
            queue.append(candidate)
    logger.debug(f"Enumerated group of order {len(elements)} from {len(g.generators)} generators")
    return frozenset(elements)


def orbit(g: PermGroup, i: int) -> frozenset[int]:
    """Smallest set containing ``i`` that is closed under every generator"""
    if not 0 <= i < g.n:
        raise IndexError(f"Index {i} outside of 0..{g.n - 1}")
    found = {i}
    queue = deque([i])
    while queue:
        j = queue.popleft()
        for gen in g.generators:
            k = gen(j)
            if k not in found:
                found.add(k)
                queue.append(k)
    return frozenset(found)


def decompose_components(g: PermGroup) -> list[PermGroup]:
    """Split the generators into groups acting on disjoint sets of indices

    Two generators end up in the same component when their supports intersect, transitively.
    Identity generators are dropped. Components are ordered by their smallest moved index.
    """
    parent = list(range(g.n))

    def find(i: int) -> int:
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    moving = [gen for gen in g.generators if not gen.is_identity]
    for gen in moving:
        points = sorted(gen.support)
        root = find(points[0])
        for p in points[1:]:
            other = find(p)
            if other != root:
                parent[other] = root

    by_root: dict[int, list[Permutation]] = {}
    for gen in moving:
        by_root.setdefault(find(min(gen.support)), []).append(gen)

    components = [PermGroup(g.n, tuple(gens), g.enumeration_cap) for gens in by_root.values()]
    components.sort(key=lambda c: min(c.support))
    logger.debug(f"Group with {len(g.generators)} generators splits into {len(components)} components")
    return components
