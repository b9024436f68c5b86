"""Bound tightening on linear rows from their activity ranges.

For a row ``sum(a_j x_j) <= b`` the smallest possible activity of every other term gives an upper bound on
``a_j x_j``, the usual feasibility-based bound tightening.
All arithmetic is exact, integer variables round their new bounds inwards through :py:class:`~symmkit.domains.Domain`.

>>> from symmkit.domains import Domain, DomainVector
>>> from symmkit.instance import LinearConstraint, Sense
>>> row = LinearConstraint(((0, 1), (1, 1), (2, 1)), Sense.EQ, 1)
>>> d = DomainVector.of([Domain.binary(), Domain.integer(1, 1), Domain.binary()])
>>> new, status = propagate_rows([row], d)
>>> print(new)
{0} x {1} x {0}
>>> status
<Status.REDUCED: 'reduced'>
"""

from collections.abc import Sequence
from fractions import Fraction
from logging import getLogger

from symmkit.domains import Bound, Domain, DomainVector, Number, Status, as_number, status_of
from symmkit.exceptions import InfeasibleError
from symmkit.instance import Instance, LinearConstraint, Objective, Sense

logger = getLogger(__name__)

MAX_ROUNDS = 50
"""Passes over all rows before giving up on reaching a fixpoint"""


def _term_range(coef: Number, dom: Domain) -> tuple[Number, Number]:
    if coef > 0:
        return coef * dom.lo, coef * dom.hi
    return coef * dom.hi, coef * dom.lo


class _Activity:
    """Finite part and count of infinite terms, for both ends of the activity range of one row"""

    def __init__(self, row: LinearConstraint, domains: Sequence[Domain]):
        self.terms = [_term_range(c, domains[i]) for i, c in row.coefs]
        self.min_finite = sum((lo for lo, _ in self.terms if not isinstance(lo, float)), start=0)
        self.max_finite = sum((hi for _, hi in self.terms if not isinstance(hi, float)), start=0)
        self.min_inf = sum(1 for lo, _ in self.terms if isinstance(lo, float))
        self.max_inf = sum(1 for _, hi in self.terms if isinstance(hi, float))

    def min_without(self, k: int) -> Number | None:
        lo = self.terms[k][0]
        if isinstance(lo, float):
            return self.min_finite if self.min_inf == 1 else None
        return self.min_finite - lo if self.min_inf == 0 else None

    def max_without(self, k: int) -> Number | None:
        hi = self.terms[k][1]
        if isinstance(hi, float):
            return self.max_finite if self.max_inf == 1 else None
        return self.max_finite - hi if self.max_inf == 0 else None


def propagate_row(row: LinearConstraint, domains: list[Domain]) -> bool:
    """Tighten ``domains`` in place from one row, returns whether anything changed

    :raises InfeasibleError: if the row cannot be satisfied over the box
    """
    act = _Activity(row, domains)
    upper = row.rhs if row.sense in (Sense.LE, Sense.EQ) else None
    lower = row.rhs if row.sense in (Sense.GE, Sense.EQ) else None

    if upper is not None and act.min_inf == 0 and act.min_finite > upper:
        raise InfeasibleError(f"Row {row.name}: minimal activity {act.min_finite} exceeds {upper}")
    if lower is not None and act.max_inf == 0 and act.max_finite < lower:
        raise InfeasibleError(f"Row {row.name}: maximal activity {act.max_finite} is below {lower}")

    changed = False
    for k, (i, coef) in enumerate(row.coefs):
        dom = domains[i]
        new = dom
        if upper is not None and (rest := act.min_without(k)) is not None:
            limit = as_number(Fraction(upper - rest) / coef)
            new = new.with_hi(Bound(limit)) if coef > 0 else new.with_lo(Bound(limit))
        if lower is not None and (rest := act.max_without(k)) is not None:
            limit = as_number(Fraction(lower - rest) / coef)
            new = new.with_lo(Bound(limit)) if coef > 0 else new.with_hi(Bound(limit))
        if new != dom:
            if new.is_empty:
                raise InfeasibleError(f"Row {row.name} empties the domain of x{i + 1}")
            domains[i] = new
            changed = True
    return changed


def propagate_rows(
    rows: Sequence[LinearConstraint], d: DomainVector, max_rounds: int = MAX_ROUNDS
) -> tuple[DomainVector, Status]:
    """Round-robin :py:func:`propagate_row` over ``rows`` until nothing changes (or ``max_rounds`` passes)"""
    domains = list(d)
    try:
        for _ in range(max_rounds):
            changed = False
            for row in rows:
                changed |= propagate_row(row, domains)
            if not changed:
                break
        else:
            logger.debug(f"Row propagation stopped after {max_rounds} rounds without a fixpoint")
    except InfeasibleError as err:
        logger.debug(f"Row propagation: {err}")
        return DomainVector(tuple(domains)), Status.INFEASIBLE
    result = DomainVector(tuple(domains))
    return result, status_of(d, result)


def objective_bound(objective: Objective, d: DomainVector) -> Number:
    """Smallest objective value over the box, ``-inf`` if unbounded"""
    total: Number = 0
    for i, c in objective.coefs:
        lo, _ = _term_range(c, d[i])
        total = total + lo
    return total


def cutoff_row(objective: Objective, incumbent: Number) -> LinearConstraint:
    """``c·x <= incumbent - 1``, valid for pruning when every feasible objective value is an integer"""
    return LinearConstraint(objective.coefs, Sense.LE, incumbent - 1, name="cutoff")


def complete_point(
    inst: Instance, d: DomainVector, extra_rows: Sequence[LinearConstraint] = ()
) -> tuple[Number, ...] | None:
    """Turn a box with every integer variable fixed into a feasible point, or None

    Continuous variables are bounded by row propagation first, then each takes the bound its objective coefficient
    prefers (its lower bound when the coefficient is zero). This is exact when every row holds at most one
    continuous variable; the result is checked against all rows either way.
    """
    rows = (*inst.constraints, *extra_rows)
    box, status = propagate_rows(rows, d)
    if status is Status.INFEASIBLE:
        return None
    costs = inst.objective.dense(inst.n)
    point: list[Number] = []
    for i, dom in enumerate(box.reported()):
        value = dom.lo if dom.is_fixed or costs[i] >= 0 else dom.hi
        if isinstance(value, float):
            logger.warning(f"x{i + 1} has no finite bound to settle on in {inst.name}")
            return None
        point.append(value)
    if not all(row.satisfied(point) for row in rows):
        if inst.continuous_vars:
            logger.warning(f"Could not complete the continuous variables of {inst.name} at a fixed integer point")
        return None
    return tuple(point)
