"""Variable domains with infinitesimal strictness flags.

Every domain is an interval ``[lo, hi]`` over the integers or the reals.
A bound may be *strict*: the lower bound ``lo`` with ``lo_strict`` set stands for ``lo + ε`` with ``ε`` an
infinitesimal, likewise ``hi_strict`` stands for ``hi - ε``.
Strictness is only ever produced by the propagators and the ε is never used in further arithmetic:

* integer domains absorb it right away by rounding (``x > 2`` becomes ``x >= 3``),
* continuous domains keep it symbolically, and the externally reported domain (:py:meth:`Domain.reported`) replaces ε by 0.

Bounds including the ε part are :py:class:`Bound` tuples, which compare lexicographically:

>>> Bound(1, 1) > Bound(1) > Bound(1, -1)
True
>>> Domain.integer(0, 5).with_lo(Bound(2, 1))
Domain(kind=<VarKind.INTEGER: 'integer'>, lo=3, hi=5, lo_strict=False, hi_strict=False)
>>> d = Domain.continuous(0, 1).with_hi(Bound(1, -1))
>>> print(d)
[0, 1)
>>> print(d.reported())
[0, 1]
"""

import math
from collections.abc import Iterable, Iterator, Sequence
from dataclasses import dataclass, replace
from enum import StrEnum, auto
from fractions import Fraction
from typing import NamedTuple

type Number = int | Fraction | float
"""Exact values are ``int`` or :py:class:`~fractions.Fraction`, ``float`` only shows up as ``±inf``"""

INF = math.inf


class VarKind(StrEnum):
    """Kind of a variable: integer (binary is integer on [0, 1]) or continuous"""

    INTEGER = auto()
    CONTINUOUS = auto()


class Status(StrEnum):
    """Outcome of a propagation call"""

    REDUCED = auto()
    UNCHANGED = auto()
    INFEASIBLE = auto()


class Bound(NamedTuple):
    """A value with an infinitesimal offset: ``eps`` of -1, 0, 1 means ``value - ε``, ``value``, ``value + ε``"""

    value: Number
    eps: int = 0


def as_number(x: object) -> Number:
    """Normalize user input to an exact number, decimals are read exactly

    >>> as_number(0.1)
    Fraction(1, 10)
    >>> as_number(Fraction(4, 2)), as_number(3.0), as_number(None)
    (2, 3, inf)
    """
    match x:
        case None:
            return INF
        case bool():
            return int(x)
        case int():
            return x
        case Fraction():
            return x.numerator if x.denominator == 1 else x
        case float() if math.isinf(x):
            return x
        case float() if x.is_integer():
            return int(x)
        case float():
            return Fraction(repr(x))
        case str():
            return as_number(Fraction(x))
    raise TypeError(f"Cannot use {x!r} as a number")


def format_number(x: Number) -> str:
    """Short deterministic text for a number, integers stay integers"""
    if isinstance(x, float):
        return "inf" if x > 0 else "-inf"
    if isinstance(x, Fraction) and x.denominator != 1:
        return repr(float(x))
    return str(int(x))


def _floor(x: Number) -> Number:
    return x if isinstance(x, float) else math.floor(x)


def _ceil(x: Number) -> Number:
    return x if isinstance(x, float) else math.ceil(x)


@dataclass(frozen=True)
class Domain:
    """An interval domain, integer domains are kept normalized (integral bounds, no strict flags)"""

    kind: VarKind
    lo: Number
    hi: Number
    lo_strict: bool = False
    hi_strict: bool = False

    def __post_init__(self):
        if self.kind is not VarKind.INTEGER:
            return
        lo = _floor(self.lo) + 1 if self.lo_strict else _ceil(self.lo)
        hi = _ceil(self.hi) - 1 if self.hi_strict else _floor(self.hi)
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        object.__setattr__(self, "lo_strict", False)
        object.__setattr__(self, "hi_strict", False)

    @classmethod
    def integer(cls, lo: object, hi: object) -> "Domain":
        return cls(VarKind.INTEGER, as_number(lo), as_number(hi))

    @classmethod
    def binary(cls) -> "Domain":
        return cls(VarKind.INTEGER, 0, 1)

    @classmethod
    def continuous(cls, lo: object, hi: object) -> "Domain":
        return cls(VarKind.CONTINUOUS, as_number(lo), as_number(hi))

    @property
    def is_integer(self) -> bool:
        return self.kind is VarKind.INTEGER

    @property
    def min(self) -> Bound:
        return Bound(self.lo, 1 if self.lo_strict else 0)

    @property
    def max(self) -> Bound:
        return Bound(self.hi, -1 if self.hi_strict else 0)

    @property
    def is_empty(self) -> bool:
        return self.min > self.max

    @property
    def is_fixed(self) -> bool:
        return not self.is_empty and self.lo == self.hi

    @property
    def is_finite(self) -> bool:
        return not (isinstance(self.lo, float) or isinstance(self.hi, float))

    def normalized(self) -> "Domain":
        """Normalization happens on construction, so this is the identity; kept for symmetry with :py:meth:`reported`"""
        return replace(self)

    def reported(self) -> "Domain":
        """The domain with every ε replaced by 0"""
        if not (self.lo_strict or self.hi_strict):
            return self
        return replace(self, lo_strict=False, hi_strict=False)

    def with_lo(self, bound: Bound) -> "Domain":
        """Tighten the lower bound to at least ``bound``, bounds are expected to come from minima (``eps >= 0``)"""
        if bound <= self.min:
            return self
        return replace(self, lo=bound.value, lo_strict=bound.eps > 0)

    def with_hi(self, bound: Bound) -> "Domain":
        """Tighten the upper bound to at most ``bound``, bounds are expected to come from maxima (``eps <= 0``)"""
        if bound >= self.max:
            return self
        return replace(self, hi=bound.value, hi_strict=bound.eps < 0)

    def intersect(self, other: "Domain") -> "Domain":
        return self.with_lo(other.min).with_hi(other.max)

    def fix(self, value: Number) -> "Domain":
        return replace(self, lo=value, hi=value, lo_strict=False, hi_strict=False)

    def contains(self, value: Number) -> bool:
        return self.min <= Bound(value) <= self.max

    def subset_of(self, other: "Domain") -> bool:
        return self.is_empty or (self.min >= other.min and self.max <= other.max)

    @property
    def size(self) -> Number:
        """Number of integer points, ``inf`` for unbounded or (non-degenerate) continuous domains"""
        if self.is_empty:
            return 0
        if self.is_fixed:
            return 1
        if not self.is_integer or not self.is_finite:
            return INF
        return int(self.hi - self.lo) + 1

    def values(self) -> range:
        if not (self.is_integer and self.is_finite):
            raise ValueError(f"Cannot list the values of {self}")
        return range(int(self.lo), int(self.hi) + 1)

    def split(self) -> tuple["Domain", "Domain"]:
        """Bisect an integer domain, unit ranges split into their two values

        >>> [str(d) for d in Domain.integer(0, 3).split()]
        ['[0, 1]', '[2, 3]']
        """
        if not (self.is_integer and self.is_finite) or self.is_fixed or self.is_empty:
            raise ValueError(f"Cannot branch on {self}")
        mid = math.floor(Fraction(self.lo + self.hi, 2))
        return replace(self, hi=mid), replace(self, lo=mid + 1)

    def __str__(self) -> str:
        if self.is_empty:
            return "{}"
        if self.is_fixed:
            return "{" + format_number(self.lo) + "}"
        left = "(" if self.lo_strict else "["
        right = ")" if self.hi_strict else "]"
        return f"{left}{format_number(self.lo)}, {format_number(self.hi)}{right}"


@dataclass(frozen=True)
class DomainVector:
    """The box ``D = D_1 x ... x D_n``"""

    domains: tuple[Domain, ...]

    @classmethod
    def of(cls, domains: Iterable[Domain]) -> "DomainVector":
        return cls(tuple(domains))

    def __len__(self) -> int:
        return len(self.domains)

    def __getitem__(self, i: int) -> Domain:
        return self.domains[i]

    def __iter__(self) -> Iterator[Domain]:
        return iter(self.domains)

    def replace(self, updates: dict[int, Domain]) -> "DomainVector":
        domains = list(self.domains)
        for i, dom in updates.items():
            domains[i] = dom
        return DomainVector(tuple(domains))

    @property
    def is_empty(self) -> bool:
        return any(d.is_empty for d in self.domains)

    def subset_of(self, other: "DomainVector") -> bool:
        return all(a.subset_of(b) for a, b in zip(self.domains, other.domains, strict=True))

    def changed(self, other: "DomainVector") -> list[int]:
        """Indices whose domain differs between the two vectors"""
        return [i for i, (a, b) in enumerate(zip(self.domains, other.domains, strict=True)) if a != b]

    def reported(self) -> "DomainVector":
        return DomainVector(tuple(d.reported() for d in self.domains))

    def box_size(self, indices: Iterable[int] | None = None) -> Number:
        """Number of integer points of the box, restricted to ``indices`` if given"""
        chosen = range(len(self)) if indices is None else indices
        return math.prod(self.domains[i].size for i in chosen)

    def is_fixed(self, indices: Iterable[int]) -> bool:
        return all(self.domains[i].is_fixed for i in indices)

    def point(self, indices: Sequence[int]) -> tuple[Number, ...]:
        """Values of fixed variables"""
        return tuple(self.domains[i].lo for i in indices)

    def __str__(self) -> str:
        return " x ".join(str(d) for d in self.domains)


def status_of(before: DomainVector, after: DomainVector) -> Status:
    if after.is_empty:
        return Status.INFEASIBLE
    return Status.UNCHANGED if after == before else Status.REDUCED


@dataclass
class OpCounter:
    """Counts elementary domain operations so propagator running times can be checked independent of the clock"""

    count: int = 0

    def tick(self, k: int = 1):
        self.count += k
