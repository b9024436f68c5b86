"""Per-node symmetry prehandling structures and their correctness audit.

Every node ``beta`` of the branch-and-bound tree carries a triple ``(m, pi, phi)`` defining
``sigma(x) = ((pi ∘ phi)(x))`` restricted to the first ``m`` coordinates, and the node enforces
``sigma(x) >= sigma(gamma(x))`` for the symmetries ``gamma``.
Three policies decide how the triple evolves from parent to child:

* :py:attr:`PrehandlePolicy.STATIC`: ``(n, id, id)`` everywhere, the classical static constraints ``x >= gamma(x)``.
* :py:attr:`PrehandlePolicy.BRANCHING`: ``sigma`` lists the branched variables in the order they were first branched on.
* :py:attr:`PrehandlePolicy.ORBITOPE_DYNAMIC`: ``sigma`` lists whole orbitope rows in the order they were first
  touched by branching, and ``phi`` permutes columns so the branched variable sits in the first (or middle) of its
  interchangeable columns.

Only proper branchings (domain splits) change the structure; reductions found by symmetry handling never do.
:py:func:`audit_conditions` checks a finished tree against the four conditions that make the per-node
constraints handle symmetry correctly.
"""

from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from enum import StrEnum
from functools import cached_property
from logging import getLogger
from typing import TYPE_CHECKING, NamedTuple

from symmkit.domains import DomainVector, Number
from symmkit.exceptions import CapExceededError, PrehandleError
from symmkit.instance import Instance, OrbitopeLayout
from symmkit.oracle import enumerate_feasible
from symmkit.perms import PermGroup, Permutation, compose, decompose_components

if TYPE_CHECKING:
    from symmkit.bnb import BnbTree

logger = getLogger(__name__)


class PrehandlePolicy(StrEnum):
    """How sigma evolves along the tree: static (full index order), branching (branched variables in branching
    order), or orbitope-dynamic (orbitope rows in branching order, columns rearranged)"""

    STATIC = "static"
    BRANCHING = "branching"
    ORBITOPE_DYNAMIC = "orbitope-dynamic"


class Placement(StrEnum):
    """Column the branched variable is moved to among its interchangeable columns: first or (lower) median"""

    FIRST = "first"
    MEDIAN = "median"


class BranchInfo(NamedTuple):
    """A branching decision on variable ``var``, ``proper`` unless it came from symmetry handling"""

    var: int
    proper: bool = True


def _order_permutation(n: int, order: Sequence[int]) -> Permutation:
    """``pi`` with ``pi(order[k]) = k``, the remaining indices following in increasing order"""
    chosen = set(order)
    rest = [i for i in range(n) if i not in chosen]
    image = [0] * n
    for k, v in enumerate([*order, *rest]):
        image[v] = k
    return Permutation(tuple(image))


@dataclass(frozen=True)
class PrehandlingState:
    """The triple ``(m, pi, phi)`` plus what the policy needs to extend it

    ``row_order`` and ``column_map`` are only used by the orbitope-dynamic policy: the orbitope rows seen so far and,
    for every column position of the rearranged matrix, the original column shown there.
    """

    n: int
    m: int
    pi: Permutation
    phi: Permutation
    policy: PrehandlePolicy
    placement: Placement = Placement.FIRST
    layout: OrbitopeLayout | None = None
    row_order: tuple[int, ...] = ()
    column_map: tuple[int, ...] = ()

    def __post_init__(self):
        if not 0 <= self.m <= self.n:
            raise PrehandleError(f"m={self.m} outside of [0, {self.n}]")
        if self.pi.n != self.n or self.phi.n != self.n:
            raise PrehandleError(f"pi and phi must act on {self.n} points")

    @classmethod
    def static(cls, n: int) -> "PrehandlingState":
        identity = Permutation.identity(n)
        return cls(n, n, identity, identity, PrehandlePolicy.STATIC)

    @classmethod
    def branching(cls, n: int) -> "PrehandlingState":
        identity = Permutation.identity(n)
        return cls(n, 0, identity, identity, PrehandlePolicy.BRANCHING)

    @classmethod
    def orbitope_dynamic(
        cls, n: int, layout: OrbitopeLayout | None, placement: Placement = Placement.FIRST
    ) -> "PrehandlingState":
        if layout is None:
            raise PrehandleError("The orbitope-dynamic policy needs an orbitope layout")
        identity = Permutation.identity(n)
        return cls(
            n, 0, identity, identity, PrehandlePolicy.ORBITOPE_DYNAMIC, placement, layout, (), tuple(range(layout.q))
        )

    @classmethod
    def initial(
        cls, policy: PrehandlePolicy, n: int, layout: OrbitopeLayout | None = None, placement: Placement = Placement.FIRST
    ) -> "PrehandlingState":
        match policy:
            case PrehandlePolicy.STATIC:
                return cls.static(n)
            case PrehandlePolicy.BRANCHING:
                return cls.branching(n)
        return cls.orbitope_dynamic(n, layout, placement)

    @cached_property
    def sigma_vars(self) -> tuple[int, ...]:
        """The variables sigma reads, ``(pi ∘ phi)^-1(k)`` for ``k < m``"""
        pi_inv = self.pi.inverse
        phi_inv = self.phi.inverse
        return tuple(phi_inv(pi_inv(k)) for k in range(self.m))

    def describe(self) -> str:
        return f"{self.policy} m={self.m} sigma={[v + 1 for v in self.sigma_vars]} phi={self.phi}"


def sigma_apply[T](s: PrehandlingState, x: Sequence[T]) -> tuple[T, ...]:
    """``sigma(x)``, the entries of ``x`` that the state's constraints compare, in order

    >>> s = child_state(PrehandlingState.branching(4), BranchInfo(2), DomainVector(()))
    >>> s = child_state(s, BranchInfo(3), DomainVector(()))
    >>> sigma_apply(s, ("x1", "x2", "x3", "x4"))
    ('x3', 'x4')
    """
    if len(x) != s.n:
        raise PrehandleError(f"Vector of length {len(x)} for a state on {s.n} variables")
    return tuple(x[v] for v in s.sigma_vars)


def _column_signature(layout: OrbitopeLayout, j: int, *boxes: DomainVector) -> tuple:
    return tuple(tuple(box[v] for v in layout.column(j)) for box in boxes)


def interchangeable_columns(layout: OrbitopeLayout, j: int, domains: DomainVector, box: DomainVector) -> list[int]:
    """Original columns whose domains equal those of column ``j`` in both the node box and the branching box"""
    target = _column_signature(layout, j, domains, box)
    return [c for c in range(layout.q) if _column_signature(layout, c, domains, box) == target]


def child_state(
    parent: PrehandlingState, branch: BranchInfo, domains: DomainVector, box: DomainVector | None = None
) -> PrehandlingState:
    """Prehandling structure of the children created by ``branch`` at a node with ``parent``'s structure

    ``domains`` are the parent's propagated domains and ``box`` the parent's proper-branching box (defaults to
    ``domains``); both only matter for the orbitope-dynamic column choice. Every child of one branching shares the
    returned state.
    """
    if not 0 <= branch.var < parent.n:
        raise PrehandleError(f"Branching variable {branch.var} outside of [0, {parent.n})")
    if not branch.proper:
        return parent

    match parent.policy:
        case PrehandlePolicy.STATIC:
            return parent
        case PrehandlePolicy.BRANCHING:
            if branch.var in parent.sigma_vars:
                return parent
            order = (*parent.sigma_vars, branch.var)
            return PrehandlingState(parent.n, parent.m + 1, _order_permutation(parent.n, order), parent.phi, parent.policy)

    layout = parent.layout
    if layout is None:
        raise PrehandleError("The orbitope-dynamic policy needs an orbitope layout")
    if branch.var not in layout.positions:
        return parent
    row, col = layout.position(branch.var)
    if row in parent.row_order:
        return parent

    box = domains if box is None else box
    equivalent = set(interchangeable_columns(layout, col, domains, box))
    views = [c for c, original in enumerate(parent.column_map) if original in equivalent]
    target = views[0] if parent.placement is Placement.FIRST else views[(len(views) - 1) // 2]
    current = parent.column_map.index(col)

    column_map = list(parent.column_map)
    column_map[target], column_map[current] = column_map[current], column_map[target]
    psi = layout.column_swap(parent.n, col, parent.column_map[target])
    phi = compose(parent.phi, psi)

    row_order = (*parent.row_order, row)
    order = [layout.var(r, c) for r in row_order for c in range(layout.q)]
    logger.debug(f"Row {row + 1} enters sigma, column {col + 1} moves to position {target + 1}")
    return PrehandlingState(
        parent.n,
        parent.m + layout.q,
        _order_permutation(parent.n, order),
        phi,
        parent.policy,
        parent.placement,
        layout,
        row_order,
        tuple(column_map),
    )


class CheckStatus(StrEnum):
    PASS = "pass"
    FAIL = "fail"
    UNCHECKED = "unchecked"


class Witness(NamedTuple):
    """Evidence for a failed condition"""

    condition: str
    node: int
    other: int | None
    component: int
    detail: str
    permutation: str = ""
    point: tuple[Number, ...] = ()


@dataclass
class AuditReport:
    """Outcome per condition, ``C1`` to ``C4``, with a witness for every violation found"""

    results: dict[str, CheckStatus] = field(default_factory=lambda: dict.fromkeys(CONDITIONS, CheckStatus.PASS))
    witnesses: list[Witness] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(status is CheckStatus.PASS for status in self.results.values())

    def fail(self, witness: Witness) -> None:
        self.results[witness.condition] = CheckStatus.FAIL
        self.witnesses.append(witness)
        logger.debug(f"{witness.condition} violated at node {witness.node}: {witness.detail}")

    def unchecked(self, condition: str) -> None:
        if self.results[condition] is CheckStatus.PASS:
            self.results[condition] = CheckStatus.UNCHECKED


CONDITIONS = ("C1", "C2", "C3", "C4")


def _feasible_in(inst: Instance, box: DomainVector, x: Sequence[Number]) -> bool:
    return all(d.contains(v) for d, v in zip(box, x, strict=True)) and inst.is_feasible(x)


def audit_conditions(
    tree: "BnbTree",
    states: Mapping[int, Sequence[PrehandlingState]] | None,
    inst: Instance,
    components: Sequence[PermGroup] | None = None,
    cap: int | None = None,
) -> AuditReport:
    """Check the correctness conditions on a recorded tree

    ``states[node_id][k]`` is the structure of component ``k`` at that node (defaults to what the tree recorded).
    With ``F(beta)`` the feasible points inside the proper-branching box of ``beta``:

    * C1: along every edge ``m`` does not shrink and the first ``m`` positions of ``pi`` are kept.
    * C2: ``psi = phi_parent^-1 ∘ phi_child`` is a symmetry mapping ``F(parent)`` onto itself.
    * C3: siblings have identical structures.
    * C4: for ``x`` in ``F(beta)`` and ``xi`` in the group with ``sigma(x) = sigma(xi(x))``, ``xi(x)`` is in ``F(beta)``.

    C2 and C4 enumerate feasible points and group elements; if that exceeds the caps they are reported unchecked.
    """
    if states is None:
        states = {node.id: node.states for node in tree.nodes}
    if components is None:
        assert inst.group is not None
        components = decompose_components(inst.group)
    report = AuditReport()

    for node in tree.nodes:
        if node.parent is None:
            continue
        parent_states, node_states = states[node.parent], states[node.id]
        for k, (alpha, beta) in enumerate(zip(parent_states, node_states, strict=True)):
            if beta.m < alpha.m:
                report.fail(Witness("C1", node.id, node.parent, k, f"m drops from {alpha.m} to {beta.m}"))
            elif any(alpha.pi.inverse(i) != beta.pi.inverse(i) for i in range(alpha.m)):
                report.fail(Witness("C1", node.id, node.parent, k, "pi changes on the first m positions"))

    for node in tree.nodes:
        siblings = tree.children(node.id)
        for a, b in zip(siblings, siblings[1:]):
            for k, (sa, sb) in enumerate(zip(states[a], states[b], strict=True)):
                if (sa.m, sa.pi, sa.phi) != (sb.m, sb.pi, sb.phi):
                    report.fail(Witness("C3", b, a, k, "siblings disagree on (m, pi, phi)"))

    try:
        groups = [comp.elements for comp in components]
        feasible = enumerate_feasible(inst, cap=cap)
    except CapExceededError as err:
        logger.info(f"Audit skips C2 and C4: {err}")
        report.unchecked("C2")
        report.unchecked("C4")
        return report

    def in_box(box: DomainVector) -> list[tuple[Number, ...]]:
        return [x for x in feasible if all(d.contains(v) for d, v in zip(box, x, strict=True))]

    for node in tree.nodes:
        if node.parent is None:
            continue
        parent_box = tree.nodes[node.parent].branch_box
        parent_points = None
        for k, (alpha, beta) in enumerate(zip(states[node.parent], states[node.id], strict=True)):
            psi = compose(alpha.phi.inverse, beta.phi)
            if psi.is_identity:
                continue
            if psi not in groups[k]:
                report.fail(Witness("C2", node.id, node.parent, k, "psi is not a symmetry", str(psi)))
                continue
            parent_points = parent_points if parent_points is not None else in_box(parent_box)
            for x in parent_points:
                image = psi.apply(x)
                if not _feasible_in(inst, parent_box, image):
                    report.fail(Witness("C2", node.id, node.parent, k, "psi leaves F(parent)", str(psi), tuple(x)))
                    break

    for node in tree.nodes:
        points = in_box(node.branch_box)
        for k, beta in enumerate(states[node.id]):
            violation = _c4_violation(inst, node.branch_box, beta, groups[k], points)
            if violation is not None:
                xi, x = violation
                report.fail(Witness("C4", node.id, None, k, "xi(x) is not feasible", str(xi), tuple(x)))

    logger.info(f"Audit of {len(tree.nodes)} nodes: " + ", ".join(f"{c} {s}" for c, s in report.results.items()))
    return report


def _c4_violation(
    inst: Instance,
    box: DomainVector,
    state: PrehandlingState,
    group: Iterable[Permutation],
    points: Sequence[Sequence[Number]],
) -> tuple[Permutation, Sequence[Number]] | None:
    for x in points:
        key = sigma_apply(state, x)
        for xi in group:
            if xi.is_identity:
                continue
            image = xi.apply(x)
            if sigma_apply(state, image) == key and not _feasible_in(inst, box, image):
                return xi, x
    return None
