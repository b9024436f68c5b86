from collections.abc import Sequence
from dataclasses import replace

import pytest
from conftest import random_permutation

from symmkit.bench import toy_suite
from symmkit.bnb import BranchAndBound, BranchingRule, NodeStatus, SolveConfig, SolveStatus, SourceTag, solve
from symmkit.dispatch import LexredScope, ShcMode
from symmkit.domains import Domain, DomainVector, Status
from symmkit.exceptions import LimitReachedError, PrehandleError
from symmkit.instance import Instance, LinearConstraint, Objective, Sense
from symmkit.instances import CoveringParams, add_sherali_smith, build_covering, build_random_symmetric, ndb_toy
from symmkit.oracle import exhaustive_optimum
from symmkit.perms import PermGroup, Permutation
from symmkit.prehandle import Placement, PrehandlePolicy

SUITE = toy_suite()

EXTRA_CONFIGS = {
    "static lexred": SolveConfig(shc=ShcMode.LEXRED, prehandle=PrehandlePolicy.STATIC),
    "lexred over the group": SolveConfig(shc=ShcMode.LEXRED, lexred_scope=LexredScope.GROUP),
    "isoprune": SolveConfig(isoprune=True),
    "orbitope first": SolveConfig(shc=ShcMode.ORBITOPE, placement=Placement.FIRST),
    "all widest": SolveConfig(shc=ShcMode.ALL, branching=BranchingRule.WIDEST),
    "all random": SolveConfig(shc=ShcMode.ALL, branching=BranchingRule.RANDOM, seed=3),
}
CONFIGS = {cfg.name: cfg.solve for cfg in SUITE.configs} | EXTRA_CONFIGS


@pytest.fixture(scope="module")
def optima() -> dict[str, object]:
    return {inst.name: exhaustive_optimum(inst)[0] for inst in SUITE.instances}


@pytest.mark.parametrize("inst", SUITE.instances, ids=SUITE.instance_names)
@pytest.mark.parametrize("config", list(CONFIGS))
def test_optimum_does_not_depend_on_symmetry_handling(inst, config, optima):
    result = solve(inst, CONFIGS[config])
    assert result.status is SolveStatus.OPTIMAL
    assert result.objective == optima[inst.name]
    assert inst.is_feasible(result.solution)
    assert inst.objective_value(result.solution) == result.objective


def test_toy_optimum_and_continuous_completion():
    result = solve(ndb_toy(), SolveConfig(shc=ShcMode.ALL))
    assert result.objective == 3
    assert result.solution[-1] == 3
    assert result.components == ("dynamic orbitopal reduction (median)",)


def test_symmetry_handling_saves_nodes_on_the_toy():
    inst = ndb_toy()
    plain = solve(inst, SolveConfig(bound_pruning=False))
    handled = solve(inst, SolveConfig(bound_pruning=False, shc=ShcMode.ALL))
    assert handled.nodes < plain.nodes
    assert len(handled.leaves) < len(plain.leaves)
    assert handled.reductions[SourceTag.ORBITOPE] > 0


COVERINGS = [
    (2, 4, 3, 2),
    (2, 4, 3, 3),
    (2, 5, 4, 2),
    (2, 5, 4, 3),
    (3, 5, 4, 2),
    (3, 5, 4, 3),
    (2, 6, 5, 2),
    (2, 6, 5, 3),
    (3, 6, 5, 2),
    (4, 6, 5, 2),
]


def test_orbital_reduction_rarely_costs_nodes():
    fewer = 0
    for params in COVERINGS:
        inst = build_covering(CoveringParams(*params))
        plain = solve(inst, SolveConfig())
        handled = solve(inst, SolveConfig(shc=ShcMode.ORBITAL_LEXRED))
        assert handled.objective == plain.objective
        fewer += handled.nodes <= plain.nodes
    assert fewer >= 9


class RecordingSolve(BranchAndBound):
    """Keeps every model propagation step that changed the domains"""

    def __init__(self, inst: Instance, cfg: SolveConfig):
        super().__init__(inst, cfg)
        self.model_steps = []

    def _step(self, node, d, source, propagator):
        result, status = super()._step(node, d, source, propagator)
        if source is SourceTag.MODEL and status is Status.REDUCED:
            self.model_steps.append((node, d, result))
        return result, status


def _holds_for_whole_orbit(orbit: Sequence[int], before: DomainVector, after: DomainVector) -> bool:
    for j in orbit:
        if after[j].min > before[j].min and any(after[k].min < after[j].min for k in orbit):
            return False
        if after[j].max < before[j].max and any(after[k].max > after[j].max for k in orbit):
            return False
    return True


@pytest.mark.parametrize("scope", list(LexredScope))
def test_model_reductions_hold_for_whole_orbits(rng, scope):
    """Replay every model step of orbital solves against the orbits certified at its node"""
    steps = 0
    for _ in range(40):
        n = int(rng.integers(3, 6))
        inst = build_random_symmetric(rng, n, [random_permutation(rng, n)])
        engine = RecordingSolve(inst, SolveConfig(shc=ShcMode.ORBITAL_LEXRED, lexred_scope=scope, bound_pruning=False))
        result = engine.run()
        optimum = exhaustive_optimum(inst)
        assert result.objective == (optimum[0] if optimum is not None else None)
        for node, before, after in engine.model_steps:
            assert all(_holds_for_whole_orbit(orbit, before, after) for orbit in engine.node_orbits(node, before))
        steps += len(engine.model_steps)
    assert steps > 0


def test_orbital_contexts_are_reused_for_the_same_domains():
    engine = BranchAndBound(build_covering(CoveringParams(2, 4, 3, 2)), SolveConfig(shc=ShcMode.ORBITAL_LEXRED))
    engine.run()
    root = engine.tree.root
    (plan,) = engine.plans
    ctx = engine.orbital_context(root, plan, root.states[0], root.domains)
    assert engine.orbital_context(root, plan, root.states[0], root.domains) is ctx
    narrowed = root.domains.replace({0: Domain.integer(0, 0)})
    assert engine.orbital_context(root, plan, root.states[0], narrowed) is not ctx


def test_sherali_smith_rows_keep_the_optimum():
    inst = add_sherali_smith(ndb_toy())
    assert inst.group.is_trivial
    assert solve(inst).objective == 3


def _binary(n: int) -> DomainVector:
    return DomainVector.of(Domain.binary() for _ in range(n))


def test_infeasible_instance():
    inst = Instance(_binary(2), (LinearConstraint(((0, 1), (1, 1)), Sense.GE, 3),), Objective(((0, 1),)))
    result = solve(inst)
    assert result.status is SolveStatus.INFEASIBLE
    assert result.objective is None
    assert result.tree.root.status is NodeStatus.PRUNED_INFEASIBLE


def test_integer_branching_bisects_the_domain():
    inst = Instance(DomainVector.of([Domain.integer(0, 3)]), (), Objective(((0, 1),)))
    result = solve(inst, SolveConfig(bound_pruning=False))
    first, second = result.tree.children(0)
    assert result.tree.nodes[first].branch.domain == Domain.integer(0, 1)
    assert result.tree.nodes[second].branch.domain == Domain.integer(2, 3)
    assert len(result.leaves) == 4
    assert result.objective == 0


def test_branching_order_comes_first():
    inst = Instance(_binary(3), (), Objective(((0, 1), (1, 1), (2, 1))))
    result = solve(inst, SolveConfig(bound_pruning=False, branching_order=(2, 0)))
    assert [b.var for b in result.tree.path(5)] == [2, 0, 1]


def test_random_branching_is_seeded():
    inst = build_covering(CoveringParams(2, 5, 3, 2))
    cfg = SolveConfig(branching=BranchingRule.RANDOM, seed=7)
    assert solve(inst, cfg).nodes == solve(inst, cfg).nodes


@pytest.mark.parametrize("limit", [{"node_limit": 3}, {"time_limit": 0.0}])
def test_limits_raise_with_the_partial_result(limit):
    inst = build_covering(CoveringParams(2, 5, 3, 2))
    with pytest.raises(LimitReachedError) as err:
        solve(inst, SolveConfig(**limit))
    assert err.value.result.status is SolveStatus.LIMIT
    assert err.value.result.nodes <= 3


def test_refuses_a_generator_that_is_not_a_symmetry():
    swap = Permutation.parse("(1,2)", 2)
    inst = Instance(_binary(2), (), Objective(((0, 1), (1, 2))), PermGroup(2, (swap,)))
    with pytest.raises(PrehandleError):
        solve(inst, SolveConfig(shc=ShcMode.LEXRED))
    assert solve(inst).objective == 0


def test_components_are_handled_separately():
    gens = (Permutation.parse("(1,2)", 5), Permutation.parse("(3,4)", 5))
    rows = (
        LinearConstraint(((0, 1), (1, 1)), Sense.GE, 1),
        LinearConstraint(((2, 1), (3, 1)), Sense.GE, 1),
    )
    inst = Instance(_binary(5), rows, Objective(tuple((i, 1) for i in range(5))), PermGroup(5, gens))
    result = solve(inst, SolveConfig(shc=ShcMode.LEXRED))
    assert len(result.components) == 2
    assert result.objective == 2


def test_config_description():
    cfg = replace(SolveConfig(), shc=ShcMode.ORBITAL, isoprune=True, bound_pruning=False)
    assert cfg.describe() == "shc=orbital prehandle=auto placement=median bound-pruning=off isoprune"
