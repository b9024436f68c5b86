"""Orbital reduction under the branching-based prehandling structure.

At a node with ``sigma`` listing the branched variables, a symmetry ``gamma`` whose image never decreases ``sigma``
anywhere on the node's box (``sigma(x) <= sigma(gamma(x))`` componentwise) can only map a solution satisfying the
symmetry handling constraints to one with the same ``sigma`` value.
The symmetries certified this way generate a group whose orbits give two reductions:

* :py:func:`branch_orbit_reduce`: right after branching on ``x_i``, ``x_i >= x_j`` for every ``j`` in the orbit of ``i``.
* :py:func:`orbit_intersection_reduce`: every variable can be restricted to the intersection of the domains in its orbit.

Generators are certified one at a time by a box test (:py:func:`filter_delta_generators`), so the orbits are those of
a subgroup of all symmetries with this property.

Other reductions at such a node must treat every orbit alike: :py:func:`keep_orbit_uniform` drops those that don't.
"""

from collections.abc import Iterable, Sequence
from dataclasses import dataclass
from functools import cached_property
from logging import getLogger

from symmkit.domains import DomainVector, Status, status_of
from symmkit.exceptions import PrehandleError
from symmkit.perms import PermGroup, Permutation
from symmkit.prehandle import PrehandlePolicy, PrehandlingState

logger = getLogger(__name__)


def filter_delta_generators(
    gens: Iterable[Permutation], state: PrehandlingState, d: DomainVector
) -> list[Permutation]:
    """Keep the generators certified to never decrease ``sigma`` on the box ``d``

    ``gamma`` is kept iff for every position ``k`` with ``v = sigma_vars[k]`` and ``u = gamma^-1(v)`` either
    ``u == v`` or ``max(D_v) <= min(D_u)``.
    """
    if state.policy is not PrehandlePolicy.BRANCHING:
        raise PrehandleError(f"Orbital reduction needs the branching policy, got {state.policy}")
    kept = []
    for gamma in gens:
        inv = gamma.inverse
        if all(inv(v) == v or d[v].max <= d[inv(v)].min for v in state.sigma_vars):
            kept.append(gamma)
    return kept


@dataclass(frozen=True)
class OrbitalContext:
    """Certified generators at one node, with their orbits"""

    state: PrehandlingState
    generators: tuple[Permutation, ...]
    domains: DomainVector

    @classmethod
    def build(cls, gens: Iterable[Permutation], state: PrehandlingState, d: DomainVector) -> "OrbitalContext":
        gens = list(gens)
        kept = filter_delta_generators(gens, state, d)
        logger.debug(f"{len(kept)} of {len(gens)} generators certified at m={state.m}")
        return cls(state, tuple(kept), d)

    @cached_property
    def orbit_map(self) -> tuple[tuple[int, ...], ...]:
        return PermGroup(self.state.n, self.generators).orbit_map

    def orbit(self, i: int) -> Sequence[int]:
        return self.orbit_map[i]


def branch_orbit_reduce(ctx: OrbitalContext, branch_var: int, d: DomainVector) -> tuple[DomainVector, Status]:
    """At a child of the node ``ctx`` was built for, propagate ``x_i >= x_j`` over the orbit of the branched ``x_i``

    Upper bounds of the orbit drop to ``max(D_i)`` and the lower bound of ``x_i`` rises to the largest lower bound in
    the orbit.
    """
    orbit = ctx.orbit(branch_var)
    if len(orbit) == 1:
        return d, Status.UNCHANGED
    top = d[branch_var].max
    updates = {j: d[j].with_hi(top) for j in orbit if j != branch_var}
    updates[branch_var] = d[branch_var].with_lo(max(d[j].min for j in orbit))
    result = d.replace(updates)
    return result, status_of(d, result)


def keep_orbit_uniform(orbits: Iterable[Sequence[int]], before: DomainVector, after: DomainVector) -> DomainVector:
    """Undo the tightenings from ``before`` to ``after`` on every orbit where they do not hold for all its variables

    A raised lower bound (or lowered upper bound) of one variable is kept only if every variable of its orbit ends up
    with a bound at least as tight, otherwise the whole orbit goes back to ``before``.

    >>> from symmkit.domains import Domain
    >>> before = DomainVector.of([Domain.integer(0, 2)] * 3)
    >>> after = DomainVector.of([Domain.integer(1, 2), Domain.integer(0, 2), Domain.integer(1, 2)])
    >>> keep_orbit_uniform([(0, 1)], before, after) == before.replace({2: Domain.integer(1, 2)})
    True
    >>> keep_orbit_uniform([(0, 2)], before, after) == after
    True
    """
    undo = {}
    for orbit in orbits:
        if len(orbit) == 1:
            continue
        raised = [after[j].min for j in orbit if after[j].min > before[j].min]
        lowered = [after[j].max for j in orbit if after[j].max < before[j].max]
        if not (raised or lowered):
            continue
        low = max(raised, default=None)
        high = min(lowered, default=None)
        if any((low is not None and after[j].min < low) or (high is not None and after[j].max > high) for j in orbit):
            undo.update({j: before[j] for j in orbit})
    return after.replace(undo) if undo else after


def orbit_intersection_reduce(ctx: OrbitalContext, d: DomainVector) -> tuple[DomainVector, Status]:
    """Restrict every variable to the intersection of the domains of its orbit"""
    updates = {}
    for orbit in set(ctx.orbit_map):
        if len(orbit) == 1:
            continue
        low = max(d[j].min for j in orbit)
        high = min(d[j].max for j in orbit)
        for j in orbit:
            new = d[j].with_lo(low).with_hi(high)
            if new != d[j]:
                updates[j] = new
    result = d.replace(updates)
    return result, status_of(d, result)
