"""Choice of symmetry handling per group component.

The symmetry group is split into components acting on disjoint variables and each one is handled on its own:

1. If orbitopal reduction is enabled and the component is an orbitope

   a. with a single row, the sorted-row chain ``x_1 >= x_2 >= ...`` is added as linear rows,
   b. with two columns, lexicographic reduction runs on the one column swap,
   c. of packing-partitioning type, this is noted and it is handled like (d),
   d. otherwise, orbitopal reduction runs on the rows seen so far (dynamic), or on the whole matrix
      under a static policy.

2. Otherwise lexicographic reduction runs on the component's generators (or its whole enumerated group) and,
   if enabled, orbital reduction on top over the same permutations, both with ``sigma`` following the branching
   order.

A forced prehandling policy overrides the choices above where they differ.
"""

from collections.abc import Sequence
from dataclasses import dataclass, replace
from enum import StrEnum
from logging import getLogger

from symmkit.exceptions import CapExceededError
from symmkit.instance import Instance, LinearConstraint, OrbitopeLayout, Sense
from symmkit.orbitope import detect_orbitope
from symmkit.perms import PermGroup, Permutation, decompose_components
from symmkit.prehandle import Placement, PrehandlePolicy, PrehandlingState

logger = getLogger(__name__)


class ShcMode(StrEnum):
    """Symmetry handling methods to run: none, lexred, orbitope, orbital (always with lexred), orbital+lexred, or all
    (orbitope where one is detected, orbital+lexred elsewhere)"""

    NONE = "none"
    LEXRED = "lexred"
    ORBITOPE = "orbitope"
    ORBITAL = "orbital"
    ORBITAL_LEXRED = "orbital+lexred"
    ALL = "all"

    @property
    def uses_lexred(self) -> bool:
        return self in (ShcMode.LEXRED, ShcMode.ORBITAL, ShcMode.ORBITAL_LEXRED, ShcMode.ALL)

    @property
    def uses_orbitope(self) -> bool:
        return self in (ShcMode.ORBITOPE, ShcMode.ALL)

    @property
    def uses_orbital(self) -> bool:
        return self in (ShcMode.ORBITAL, ShcMode.ORBITAL_LEXRED, ShcMode.ALL)


class LexredScope(StrEnum):
    """Symmetries lexicographic reduction is applied to: the generators, or every element of the enumerated group"""

    GENERATORS = "generators"
    GROUP = "group"


@dataclass(frozen=True)
class ComponentPlan:
    """How one component of the symmetry group is handled"""

    index: int
    group: PermGroup
    initial: PrehandlingState
    label: str
    lexred_perms: tuple[Permutation, ...] = ()
    orbitope: OrbitopeLayout | None = None
    orbital_perms: tuple[Permutation, ...] = ()
    chain_rows: tuple[LinearConstraint, ...] = ()
    isoprune_elements: frozenset[Permutation] | None = None

    @property
    def variables(self) -> frozenset[int]:
        return self.group.support

    @property
    def dynamic_orbitope(self) -> bool:
        return self.orbitope is not None and self.initial.policy is PrehandlePolicy.ORBITOPE_DYNAMIC


def chain_rows(layout: OrbitopeLayout) -> tuple[LinearConstraint, ...]:
    """``x[0][j] >= x[0][j + 1]`` for a single-row orbitope"""
    row = layout.row(0)
    return tuple(
        LinearConstraint(((a, 1), (b, -1)), Sense.GE, 0, name=f"chain{a + 1}_{b + 1}") for a, b in zip(row, row[1:])
    )


def is_packing_partitioning(inst: Instance, layout: OrbitopeLayout) -> bool:
    """At least three binary rows, each covered by a row ``sum(x) <= 1`` or ``sum(x) = 1``"""
    for v in layout.variables:
        dom = inst.domains[v]
        if not (dom.is_integer and dom.lo >= 0 and dom.hi <= 1):
            return False
    packing = [
        con.support
        for con in inst.constraints
        if con.sense in (Sense.LE, Sense.EQ) and con.rhs == 1 and all(c == 1 for _, c in con.coefs)
    ]
    covered = sum(1 for row in layout.cells if any(set(row) <= support for support in packing))
    return covered >= 3


def _elements(comp: PermGroup, what: str) -> frozenset[Permutation] | None:
    try:
        return comp.elements
    except CapExceededError as err:
        logger.warning(f"{what} disabled for a component: {err}")
        return None


def plan_components(
    inst: Instance,
    shc: ShcMode,
    prehandle: PrehandlePolicy | None = None,
    placement: Placement = Placement.MEDIAN,
    lexred_scope: LexredScope = LexredScope.GENERATORS,
    isoprune: bool = False,
) -> list[ComponentPlan]:
    """One :py:class:`ComponentPlan` per component of the instance's symmetry group, in component order"""
    assert inst.group is not None
    n = inst.n
    plans = []
    for k, comp in enumerate(decompose_components(inst.group)):
        plan = _plan_component(inst, k, comp, shc, prehandle, placement, lexred_scope)
        if isoprune:
            if plan.initial.policy is PrehandlePolicy.BRANCHING:
                plan = _with_isoprune(plan, comp)
            else:
                logger.warning(f"Component {k + 1}: isomorphism pruning needs the branching policy, skipped")
        logger.info(f"Component {k + 1} ({len(comp.support)} variables, {len(comp.generators)} generators): {plan.label}")
        plans.append(plan)
    if not plans:
        logger.debug(f"No symmetry on {n} variables")
    return plans


def _with_isoprune(plan: ComponentPlan, comp: PermGroup) -> ComponentPlan:
    elements = _elements(comp, "Isomorphism pruning")
    return replace(plan, isoprune_elements=elements) if elements is not None else plan


def _lexred_perms(comp: PermGroup, scope: LexredScope) -> tuple[Permutation, ...]:
    if scope is LexredScope.GROUP and (elements := _elements(comp, "Lexicographic reduction over the whole group")):
        return tuple(sorted((g for g in elements if not g.is_identity), key=lambda g: g.image))
    return comp.generators


def _plan_component(
    inst: Instance,
    k: int,
    comp: PermGroup,
    shc: ShcMode,
    prehandle: PrehandlePolicy | None,
    placement: Placement,
    scope: LexredScope,
) -> ComponentPlan:
    n = inst.n
    layout = detect_orbitope(comp, n, inst.orbitope) if shc.uses_orbitope else None

    if layout is not None:
        if layout.p == 1 and prehandle in (None, PrehandlePolicy.STATIC):
            return ComponentPlan(k, comp, PrehandlingState.static(n), "orbitope row chain", chain_rows=chain_rows(layout))
        if layout.q == 2 and prehandle in (None, PrehandlePolicy.BRANCHING):
            swap = layout.column_swap(n, 0, 1)
            return ComponentPlan(k, comp, PrehandlingState.branching(n), "two-column orbitope, lexred", lexred_perms=(swap,))
        if prehandle is PrehandlePolicy.STATIC:
            return ComponentPlan(k, comp, PrehandlingState.static(n), "static orbitopal reduction", orbitope=layout)
        if prehandle is PrehandlePolicy.BRANCHING:
            logger.warning(f"Component {k + 1}: orbitopal reduction needs a static or orbitope policy, using lexred")
        else:
            if is_packing_partitioning(inst, layout):
                logger.warning(
                    f"Component {k + 1} is a packing-partitioning orbitope, handled by dynamic orbitopal reduction"
                )
            state = PrehandlingState.orbitope_dynamic(n, layout, placement)
            return ComponentPlan(k, comp, state, f"dynamic orbitopal reduction ({placement})", orbitope=layout)

    policy = prehandle or PrehandlePolicy.BRANCHING
    if policy is PrehandlePolicy.ORBITOPE_DYNAMIC:
        logger.warning(f"Component {k + 1} is not an orbitope, using the branching policy")
        policy = PrehandlePolicy.BRANCHING
    state = PrehandlingState.initial(policy, n)

    if not (shc.uses_lexred or shc.uses_orbital):
        return ComponentPlan(k, comp, state, "no symmetry handling")

    lexred_perms = _lexred_perms(comp, scope)
    orbital_perms: tuple[Permutation, ...] = ()
    if shc.uses_orbital:
        if policy is PrehandlePolicy.BRANCHING:
            # certified one at a time, so the whole group certifies more than its generators
            orbital_perms = lexred_perms
        else:
            logger.warning(f"Component {k + 1}: orbital reduction needs the branching policy, disabled")
    label = f"lexred ({policy}, {scope})" + (" + orbital" if orbital_perms else "")
    return ComponentPlan(k, comp, state, label, lexred_perms=lexred_perms, orbital_perms=orbital_perms)


def component_of(plans: Sequence[ComponentPlan], var: int) -> int | None:
    """Index of the plan whose component moves ``var``"""
    return next((p.index for p in plans if var in p.variables), None)
