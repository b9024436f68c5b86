"""Depth-first branch-and-bound with symmetry handling.

The search keeps the whole tree it explores in a :py:class:`BnbTree`: every node records its proper-branching
box, its propagated domains, the prehandling structure of every group component and each reduction it found,
tagged with the propagator that found it.
Reductions never change the prehandling structures; only branching does.

Nodes are processed in this order:

1. isomorphism pruning (if enabled) on the 1-branching incidence vector,
2. propagation to a fixpoint (:py:meth:`BranchAndBound.propagate_node`); while a component runs orbital reduction,
   model rows only keep the tightenings that hold for whole orbits of its certified symmetries,
3. bound pruning against the incumbent,
4. a leaf if every integer variable is fixed, otherwise two children by :py:meth:`BranchAndBound.branch`.

Children are explored low half first.
"""

import time
from collections import Counter
from collections.abc import Callable, Iterator, Sequence
from contextlib import contextmanager
from dataclasses import dataclass, field
from enum import StrEnum
from logging import getLogger
from typing import NamedTuple

import numpy as np

from symmkit.activity import complete_point, cutoff_row, objective_bound, propagate_rows
from symmkit.dispatch import ComponentPlan, LexredScope, ShcMode, component_of, plan_components
from symmkit.domains import Domain, DomainVector, Number, Status, status_of
from symmkit.exceptions import LimitReachedError, PrehandleError
from symmkit.instance import Instance, LinearConstraint, validate_symmetry
from symmkit.lexred import LexOrder, propagate_lex_all
from symmkit.orbital import OrbitalContext, branch_orbit_reduce, keep_orbit_uniform, orbit_intersection_reduce
from symmkit.orbitope import propagate_orbitope, propagate_orbitope_dynamic
from symmkit.perms import Permutation
from symmkit.prehandle import BranchInfo, Placement, PrehandlePolicy, PrehandlingState, child_state

logger = getLogger(__name__)

MAX_NODE_ROUNDS = 100
"""Passes over all propagators at one node before settling for the current domains"""

type Point = tuple[Number, ...]
type Propagator = Callable[[DomainVector], tuple[DomainVector, Status]]


class NodeStatus(StrEnum):
    OPEN = "open"
    PRUNED_INFEASIBLE = "infeasible"
    PRUNED_BOUND = "bound"
    PRUNED_SYMMETRY = "symmetry"
    LEAF = "leaf"
    BRANCHED = "branched"


class SourceTag(StrEnum):
    """Which propagator found a reduction"""

    MODEL = "model"
    LEXRED = "lexred"
    ORBITOPE = "orbitope"
    ORBITAL = "orbital"
    ISOPRUNE = "isoprune"


class BranchingRule(StrEnum):
    """Variable to branch on: lowest index, widest domain (lowest index on ties), or a seeded random priority"""

    INDEX = "index"
    WIDEST = "widest"
    RANDOM = "random"


class SolveStatus(StrEnum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    INCOMPLETE = "incomplete"
    LIMIT = "limit"


class Reduction(NamedTuple):
    var: int
    old: Domain
    new: Domain
    source: SourceTag


class Branch(NamedTuple):
    """The branching decision leading to a node: ``var`` was restricted to ``domain``"""

    var: int
    domain: Domain


@dataclass
class BnbNode:
    id: int
    parent: int | None
    depth: int
    branch_box: DomainVector
    domains: DomainVector
    states: tuple[PrehandlingState, ...]
    branch: Branch | None = None
    status: NodeStatus = NodeStatus.OPEN
    reductions: list[Reduction] = field(default_factory=list)
    children: list[int] = field(default_factory=list)
    solution: Point | None = None


@dataclass
class BnbTree:
    """All nodes of one search, ``nodes[i].id == i``"""

    nodes: list[BnbNode] = field(default_factory=list)

    def add(self, node: BnbNode) -> BnbNode:
        if node.id != len(self.nodes):
            raise ValueError(f"Node {node.id} added as number {len(self.nodes)}")
        self.nodes.append(node)
        if node.parent is not None:
            self.nodes[node.parent].children.append(node.id)
        return node

    @property
    def root(self) -> BnbNode:
        return self.nodes[0]

    def children(self, node_id: int) -> list[int]:
        return self.nodes[node_id].children

    def leaves(self) -> list[BnbNode]:
        return [node for node in self.nodes if node.status is NodeStatus.LEAF]

    def leaf_solutions(self) -> list[Point]:
        return [node.solution for node in self.leaves() if node.solution is not None]

    def incomplete_nodes(self) -> list[int]:
        """Nodes whose subtree was not fully explored"""
        return [node.id for node in self.nodes if node.status in (NodeStatus.OPEN, NodeStatus.PRUNED_BOUND)]

    def reduction_counts(self) -> Counter[SourceTag]:
        counts: Counter[SourceTag] = Counter(r.source for node in self.nodes for r in node.reductions)
        counts[SourceTag.ISOPRUNE] += sum(1 for node in self.nodes if node.status is NodeStatus.PRUNED_SYMMETRY)
        return counts

    def path(self, node_id: int) -> list[Branch]:
        """Branching decisions from the root down to ``node_id``"""
        decisions = []
        node = self.nodes[node_id]
        while node.branch is not None and node.parent is not None:
            decisions.append(node.branch)
            node = self.nodes[node.parent]
        return decisions[::-1]


@dataclass(frozen=True)
class SolveConfig:
    """Everything that changes how a solve runs, see the ``solve`` command for the meaning of each option"""

    shc: ShcMode = ShcMode.NONE
    prehandle: PrehandlePolicy | None = None
    placement: Placement = Placement.MEDIAN
    bound_pruning: bool = True
    isoprune: bool = False
    lexred_scope: LexredScope = LexredScope.GENERATORS
    branching: BranchingRule = BranchingRule.INDEX
    branching_order: tuple[int, ...] = ()
    depth_limit: int | None = None
    node_limit: int | None = None
    time_limit: float | None = None
    seed: int = 0

    def describe(self) -> str:
        parts = [f"shc={self.shc}", f"prehandle={self.prehandle or 'auto'}", f"placement={self.placement}"]
        parts.append(f"bound-pruning={'on' if self.bound_pruning else 'off'}")
        if self.isoprune:
            parts.append("isoprune")
        if self.lexred_scope is not LexredScope.GENERATORS:
            parts.append(f"lexred-scope={self.lexred_scope}")
        if self.branching is not BranchingRule.INDEX:
            parts.append(f"branching={self.branching}")
        return " ".join(parts)


@dataclass
class SolveResult:
    status: SolveStatus
    objective: Number | None
    solution: Point | None
    nodes: int
    reductions: Counter[SourceTag]
    wall_time: float
    symmetry_time: float
    tree: BnbTree
    config: SolveConfig
    instance: str = "instance"
    components: tuple[str, ...] = ()

    @property
    def leaves(self) -> list[Point]:
        """Solutions of all feasible leaves, the full leaf set when bound pruning was off"""
        return self.tree.leaf_solutions()


def isoprune_check(state: PrehandlingState, elements: frozenset[Permutation], box: DomainVector) -> bool:
    """True if some group element ``gamma`` gives ``sigma(y) < sigma(gamma(y))`` for the 1-branching incidence ``y``

    Needs every variable of ``sigma`` fixed to 0 or 1 by branching; otherwise nothing is pruned.
    """
    sigma = state.sigma_vars
    if not sigma:
        return False
    if any(not (box[v].is_fixed and box[v].lo in (0, 1)) for v in sigma):
        logger.debug("Isomorphism pruning skipped, a branched variable is not binary")
        return False
    y = [0] * state.n
    for v in sigma:
        y[v] = int(box[v].lo)
    key = tuple(y[v] for v in sigma)
    for gamma in elements:
        image = gamma.apply(y)
        if tuple(image[v] for v in sigma) > key:
            return True
    return False


class BranchAndBound:
    """One solve of ``inst`` under ``cfg``, confined to this object"""

    def __init__(self, inst: Instance, cfg: SolveConfig):
        self.inst = inst
        self.cfg = cfg
        self.start = time.perf_counter()
        self.symmetry_time = 0.0
        with self._timed():
            self.plans = plan_components(
                inst, cfg.shc, cfg.prehandle, cfg.placement, cfg.lexred_scope, cfg.isoprune
            )
            self._check_symmetries()
        self.tree = BnbTree()
        self.incumbent: tuple[Number, Point] | None = None
        self.processed = 0
        self._pending: dict[int, list[OrbitalContext]] = {}
        # latest context per component, valid for one (node, domains) pair
        self._contexts: dict[int, tuple[int, OrbitalContext]] = {}
        self._priority = np.random.default_rng(cfg.seed).permutation(inst.n).tolist()

    def _check_symmetries(self):
        if self.cfg.shc is ShcMode.NONE and not self.cfg.isoprune:
            return
        for gamma in self.inst.generators:
            if not validate_symmetry(self.inst, gamma):
                raise PrehandleError(f"{gamma} is not a symmetry of {self.inst.name}")

    @contextmanager
    def _timed(self) -> Iterator[None]:
        start = time.perf_counter()
        try:
            yield
        finally:
            self.symmetry_time += time.perf_counter() - start

    def _model_rows(self) -> Sequence[LinearConstraint]:
        rows = self.inst.constraints
        if self.cfg.bound_pruning and self.incumbent is not None and self.inst.objective_is_integral:
            rows = (*rows, cutoff_row(self.inst.objective, self.incumbent[0]))
        return rows

    def _step(
        self,
        node: BnbNode,
        d: DomainVector,
        source: SourceTag,
        propagator: Propagator,
    ) -> tuple[DomainVector, Status]:
        if source is SourceTag.MODEL:
            result, status = propagator(d)
        else:
            with self._timed():
                result, status = propagator(d)
        if status is Status.INFEASIBLE:
            logger.debug(f"Node {node.id}: {source} reports infeasibility")
        elif status is Status.REDUCED:
            node.reductions.extend(Reduction(i, d[i], result[i], source) for i in d.changed(result))
        return result, status

    def propagate_node(self, node: BnbNode) -> Status:
        """Run model propagation and the enabled symmetry propagators to a fixpoint on ``node.domains``"""
        d = node.domains
        var = node.branch.var if node.branch is not None else None
        for ctx in self._pending.pop(node.id, []):
            if var is not None:
                d, status = self._step(
                    node, d, SourceTag.ORBITAL, lambda d, ctx=ctx: branch_orbit_reduce(ctx, var, d)
                )
                if status is Status.INFEASIBLE:
                    node.domains = d
                    return status

        for _ in range(MAX_NODE_ROUNDS):
            before = d
            for source, propagator in self._propagators(node):
                d, status = self._step(node, d, source, propagator)
                if status is Status.INFEASIBLE:
                    node.domains = d
                    return status
            if d == before:
                break
        else:
            logger.debug(f"Node {node.id}: no fixpoint after {MAX_NODE_ROUNDS} rounds")
        result = Status.UNCHANGED if d == node.domains else Status.REDUCED
        node.domains = d
        return result

    def orbital_context(
        self, node: BnbNode, plan: ComponentPlan, state: PrehandlingState, d: DomainVector
    ) -> OrbitalContext:
        """The certified symmetries of ``plan``'s component at ``node`` for the domains ``d``"""
        cached = self._contexts.get(plan.index)
        if cached is not None and cached[0] == node.id and cached[1].domains == d:
            return cached[1]
        ctx = OrbitalContext.build(plan.orbital_perms, state, d)
        self._contexts[plan.index] = (node.id, ctx)
        return ctx

    def node_orbits(self, node: BnbNode, d: DomainVector) -> list[tuple[int, ...]]:
        """Orbits of more than one variable under the certified symmetries of every component with orbital reduction"""
        orbits = []
        for plan, state in zip(self.plans, node.states, strict=True):
            if plan.orbital_perms:
                ctx = self.orbital_context(node, plan, state, d)
                orbits.extend(orbit for orbit in set(ctx.orbit_map) if len(orbit) > 1)
        return orbits

    def _uniform_model_step(
        self, node: BnbNode, rows: Sequence[LinearConstraint], d: DomainVector
    ) -> tuple[DomainVector, Status]:
        result, status = propagate_rows(rows, d)
        if status is not Status.REDUCED:
            return result, status
        with self._timed():
            kept = keep_orbit_uniform(self.node_orbits(node, d), d, result)
        if kept != result:
            dropped = ", ".join(f"x{i + 1}" for i in kept.changed(result))
            logger.debug(f"Node {node.id}: model reductions on {dropped} dropped, not uniform over their orbits")
        return kept, status_of(d, kept)

    def _propagators(self, node: BnbNode) -> Iterator[tuple[SourceTag, Propagator]]:
        rows = self._model_rows()
        if any(plan.orbital_perms for plan in self.plans):
            yield SourceTag.MODEL, lambda d: self._uniform_model_step(node, rows, d)
        else:
            yield SourceTag.MODEL, lambda d: propagate_rows(rows, d)
        for plan, state in zip(self.plans, node.states, strict=True):
            if plan.chain_rows:
                yield SourceTag.ORBITOPE, lambda d, plan=plan: propagate_rows(plan.chain_rows, d)
            if plan.lexred_perms:
                orders = [LexOrder(state.sigma_vars, gamma) for gamma in plan.lexred_perms]
                yield SourceTag.LEXRED, lambda d, orders=orders: propagate_lex_all(orders, d)
            if plan.orbitope is not None:
                if plan.dynamic_orbitope:
                    layout = plan.orbitope
                    yield SourceTag.ORBITOPE, lambda d, layout=layout, state=state: propagate_orbitope_dynamic(
                        layout, state, d
                    )
                else:
                    yield SourceTag.ORBITOPE, lambda d, layout=plan.orbitope: propagate_orbitope(layout, d)
            if plan.orbital_perms:
                yield SourceTag.ORBITAL, lambda d, plan=plan, state=state: orbit_intersection_reduce(
                    self.orbital_context(node, plan, state, d), d
                )

    def _choose_variable(self, d: DomainVector) -> int | None:
        candidates = [i for i in self.inst.integer_vars if not d[i].is_fixed]
        if not candidates:
            return None
        chosen = set(candidates)
        for v in self.cfg.branching_order:
            if v in chosen:
                return v
        match self.cfg.branching:
            case BranchingRule.WIDEST:
                return max(candidates, key=lambda i: (d[i].size, -i))
            case BranchingRule.RANDOM:
                return min(candidates, key=lambda i: self._priority[i])
        return candidates[0]

    def branch(self, node: BnbNode, var: int) -> list[BnbNode]:
        """Split the domain of ``var`` at ``node`` into two children sharing one prehandling structure"""
        low, high = node.domains[var].split()
        info = BranchInfo(var)
        k = component_of(self.plans, var)
        with self._timed():
            states = tuple(
                child_state(state, info, node.domains, node.branch_box) if plan.index == k else state
                for plan, state in zip(self.plans, node.states, strict=True)
            )
            contexts = [
                self.orbital_context(node, plan, state, node.domains)
                for plan, state in zip(self.plans, node.states, strict=True)
                if plan.index == k and plan.orbital_perms
            ]
        children = []
        box = node.branch_box[var]
        for half, cut in ((low, box.with_hi(low.max)), (high, box.with_lo(high.min))):
            child = BnbNode(
                len(self.tree.nodes),
                node.id,
                node.depth + 1,
                node.branch_box.replace({var: cut}),
                node.domains.replace({var: half}),
                states,
                Branch(var, half),
            )
            self.tree.add(child)
            if contexts:
                self._pending[child.id] = contexts
            children.append(child)
        node.status = NodeStatus.BRANCHED
        logger.debug(f"Node {node.id}: branched on x{var + 1} into {low} and {high}")
        return children

    def _isopruned(self, node: BnbNode) -> bool:
        with self._timed():
            for plan, state in zip(self.plans, node.states, strict=True):
                if plan.isoprune_elements is not None and isoprune_check(state, plan.isoprune_elements, node.branch_box):
                    return True
        return False

    def _check_limits(self):
        cfg = self.cfg
        reason = None
        if cfg.node_limit is not None and self.processed >= cfg.node_limit:
            reason = f"node limit {cfg.node_limit}"
        elif cfg.time_limit is not None and time.perf_counter() - self.start >= cfg.time_limit:
            reason = f"time limit {cfg.time_limit}s"
        if reason is not None:
            logger.info(f"Stopping {self.inst.name} at the {reason}")
            raise LimitReachedError(f"Reached the {reason}", self.result(SolveStatus.LIMIT))

    def process(self, node: BnbNode) -> list[BnbNode]:
        """Handle one open node, returns its children (if any)"""
        self.processed += 1
        if self._isopruned(node):
            node.status = NodeStatus.PRUNED_SYMMETRY
            logger.debug(f"Node {node.id}: pruned by isomorphism")
            return []
        if self.propagate_node(node) is Status.INFEASIBLE:
            node.status = NodeStatus.PRUNED_INFEASIBLE
            return []
        if self.cfg.bound_pruning and self.incumbent is not None:
            if objective_bound(self.inst.objective, node.domains) >= self.incumbent[0]:
                node.status = NodeStatus.PRUNED_BOUND
                return []

        var = self._choose_variable(node.domains)
        if var is None:
            return self._leaf(node)
        if self.cfg.depth_limit is not None and node.depth >= self.cfg.depth_limit:
            return []
        return self.branch(node, var)

    def _leaf(self, node: BnbNode) -> list[BnbNode]:
        point = complete_point(self.inst, node.domains)
        if point is None:
            node.status = NodeStatus.PRUNED_INFEASIBLE
            return []
        node.status = NodeStatus.LEAF
        node.solution = point
        value = self.inst.objective_value(point)
        if self.incumbent is None or value < self.incumbent[0]:
            logger.debug(f"Node {node.id}: new incumbent {value}")
            self.incumbent = (value, point)
        return []

    def run(self) -> SolveResult:
        root = self.tree.add(
            BnbNode(0, None, 0, self.inst.domains, self.inst.domains, tuple(plan.initial for plan in self.plans))
        )
        stack = [root]
        while stack:
            self._check_limits()
            node = stack.pop()
            stack.extend(reversed(self.process(node)))

        if any(node.status is NodeStatus.OPEN for node in self.tree.nodes):
            status = SolveStatus.INCOMPLETE
        elif self.incumbent is None:
            status = SolveStatus.INFEASIBLE
        else:
            status = SolveStatus.OPTIMAL
        result = self.result(status)
        logger.info(
            f"{self.inst.name}: {status} {result.objective if result.objective is not None else ''} "
            f"after {self.processed} nodes in {result.wall_time:.3f}s"
        )
        return result

    def result(self, status: SolveStatus) -> SolveResult:
        objective, solution = self.incumbent if self.incumbent is not None else (None, None)
        return SolveResult(
            status,
            objective,
            solution,
            self.processed,
            self.tree.reduction_counts(),
            time.perf_counter() - self.start,
            self.symmetry_time,
            self.tree,
            self.cfg,
            self.inst.name,
            tuple(plan.label for plan in self.plans),
        )


def solve(inst: Instance, cfg: SolveConfig | None = None) -> SolveResult:
    """Minimize ``inst`` by depth-first branch-and-bound

    :raises LimitReachedError: when the node or time limit is hit, with the partial result attached
    """
    return BranchAndBound(inst, cfg or SolveConfig()).run()

