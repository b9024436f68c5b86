"""Complete propagation of one lexicographic order constraint ``sigma(x) >= sigma(gamma(x))``.

With ``sigma`` reading the variables ``positions[0], positions[1], ...`` the constraint compares the pairs
``(positions[k], gamma^-1(positions[k]))`` lexicographically.
The propagation works in two passes over these pairs:

1. Walk the pairs in order, enforcing ``x_a >= x_b`` at each one, for as long as equality of the earlier pairs is
   forced (both sides fixed to the same value, or ``a == b``).
2. At the first pair where equality is not forced, test the two boundary cases where ``x_a == x_b`` is the only
   option: ``x_a`` at its minimum and ``x_b`` at its maximum. If continuing pass 1 on the remaining pairs from such an
   equality runs into an empty domain, that boundary value is excluded (strictly, i.e. ``+1``/``-1`` on integers).

The result is the smallest box that keeps every point of the old box satisfying the constraint.

>>> from symmkit.domains import Domain, DomainVector
>>> d = DomainVector.of([Domain.integer(0, 0), Domain.integer(-1, 0), Domain.integer(1, 1), Domain.integer(-1, 1)])
>>> order = LexOrder.static(Permutation.parse("(1,3,2,4)", 4))
>>> new, status = propagate_lex(order, d)
>>> print(new)
{0} x [-1, 0] x {1} x {-1}
"""

from collections.abc import Iterable, Sequence
from dataclasses import dataclass
from functools import cached_property
from logging import getLogger

from symmkit.domains import Bound, Domain, DomainVector, Number, OpCounter, Status, status_of
from symmkit.exceptions import DimensionMismatchError, InfeasibleError
from symmkit.perms import Permutation

logger = getLogger(__name__)


@dataclass(frozen=True)
class LexOrder:
    """The operands of ``sigma(x) >= sigma(gamma(x))``: the variables ``sigma`` reads, in order, and ``gamma``"""

    positions: tuple[int, ...]
    gamma: Permutation

    def __post_init__(self):
        if len(set(self.positions)) != len(self.positions):
            raise ValueError(f"Order positions repeat a variable: {self.positions}")
        if any(not 0 <= v < self.gamma.n for v in self.positions):
            raise DimensionMismatchError(f"Order positions outside of 0..{self.gamma.n - 1}")

    @classmethod
    def static(cls, gamma: Permutation) -> "LexOrder":
        """The order reading every variable by index, ``x >= gamma(x)``"""
        return cls(tuple(range(gamma.n)), gamma)

    @cached_property
    def pairs(self) -> tuple[tuple[int, int], ...]:
        inv = self.gamma.inverse
        return tuple((v, inv(v)) for v in self.positions)


def _forward(pairs: Sequence[tuple[int, int]], doms: list[Domain], start: int, ops: OpCounter) -> int:
    """Enforce ``x_a >= x_b`` pair by pair while equality is forced, returns the index of the first free pair

    :raises InfeasibleError: when a domain becomes empty
    """
    for t in range(start, len(pairs)):
        a, b = pairs[t]
        ops.tick()
        if a == b:
            continue
        da = doms[a].with_lo(doms[b].min)
        db = doms[b].with_hi(da.max)
        if da.is_empty or db.is_empty:
            raise InfeasibleError(f"x{a + 1} >= x{b + 1} cannot hold")
        doms[a], doms[b] = da, db
        if not (da.is_fixed and db.is_fixed and da.lo == db.lo):
            return t
    return len(pairs)


def _equality_is_consistent(
    pairs: Sequence[tuple[int, int]], doms: list[Domain], t: int, value: Number, ops: OpCounter
) -> bool:
    a, b = pairs[t]
    trial = list(doms)
    trial[a] = trial[a].fix(value)
    trial[b] = trial[b].fix(value)
    try:
        _forward(pairs, trial, t + 1, ops)
    except InfeasibleError:
        return False
    return True


def _attainable(bound: Bound) -> bool:
    return bound.eps == 0 and not isinstance(bound.value, float)


def propagate_lex(
    order: LexOrder, d: DomainVector, ops: OpCounter | None = None
) -> tuple[DomainVector, Status]:
    """Propagate ``sigma(x) >= sigma(gamma(x))`` over the box ``d``

    Pass ``ops`` to count the pair visits, which stay linear in the number of positions.
    """
    if len(d) != order.gamma.n:
        raise DimensionMismatchError(f"Box of {len(d)} variables for permutation on {order.gamma.n} points")
    ops = ops or OpCounter()
    pairs = order.pairs
    doms = list(d)
    try:
        t = _forward(pairs, doms, 0, ops)
    except InfeasibleError as err:
        logger.debug(f"lexred on {order.gamma}: {err}")
        return d, Status.INFEASIBLE

    if t < len(pairs):
        a, b = pairs[t]
        low = doms[a].min
        if low == doms[b].min and _attainable(low) and not _equality_is_consistent(pairs, doms, t, low.value, ops):
            doms[a] = doms[a].with_lo(Bound(low.value, 1))
        high = doms[b].max
        if high == doms[a].max and _attainable(high) and not _equality_is_consistent(pairs, doms, t, high.value, ops):
            doms[b] = doms[b].with_hi(Bound(high.value, -1))

    result = DomainVector(tuple(doms))
    status = status_of(d, result)
    if status is Status.REDUCED:
        logger.debug(f"lexred on {order.gamma} tightened {[i + 1 for i in d.changed(result)]}")
    return result, status


def propagate_lex_all(
    orders: Iterable[LexOrder], d: DomainVector, ops: OpCounter | None = None
) -> tuple[DomainVector, Status]:
    """Round-robin :py:func:`propagate_lex` over ``orders`` until none of them changes the box"""
    orders = list(orders)
    current = d
    changed = True
    while changed:
        changed = False
        for order in orders:
            current, status = propagate_lex(order, current, ops)
            if status is Status.INFEASIBLE:
                return current, status
            changed |= status is Status.REDUCED
    return current, status_of(d, current)
