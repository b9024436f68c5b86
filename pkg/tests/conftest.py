from collections.abc import Sequence

import numpy as np
import pytest

from symmkit.bnb import SolveResult, SourceTag
from symmkit.domains import Domain, DomainVector
from symmkit.instance import Instance
from symmkit.instances import ndb_shell
from symmkit.perms import PermGroup, Permutation

THETA_23, THETA_12, THETA_13 = 7, 1, 2
"""Row-major variables of the 3 x 5 shell the hand-replayed trees branch on, in branching order"""
REPLAY_ORDER = (THETA_23, THETA_12, THETA_13)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240611)


@pytest.fixture
def shell() -> Instance:
    return ndb_shell()


def box(*domains: tuple[int, int]) -> DomainVector:
    """An integer box from ``(lo, hi)`` pairs"""
    return DomainVector.of(Domain.integer(lo, hi) for lo, hi in domains)


def random_box(rng: np.random.Generator, n: int, width: int = 3, low: int = 0) -> DomainVector:
    """A box of ``n`` integer domains inside ``[low, low + width]``, some of them fixed"""
    domains = []
    for _ in range(n):
        lo = int(rng.integers(low, low + width + 1))
        hi = int(rng.integers(lo, low + width + 1))
        domains.append(Domain.integer(lo, hi))
    return DomainVector.of(domains)


def random_permutation(rng: np.random.Generator, n: int) -> Permutation:
    return Permutation(tuple(int(i) for i in rng.permutation(n)))


def random_group(rng: np.random.Generator, n: int, generators: int = 2) -> PermGroup:
    return PermGroup(n, tuple(random_permutation(rng, n) for _ in range(generators)))


def node_at(result: SolveResult, decisions: Sequence[tuple[int, int]]) -> int:
    """Id of the node reached by fixing ``(var, value)`` in order from the root"""
    for node in result.tree.nodes:
        path = [(b.var, int(b.domain.lo)) for b in result.tree.path(node.id)]
        if path == list(decisions):
            return node.id
    raise LookupError(f"No node at {decisions}")


def fixings(result: SolveResult, node_id: int, source: SourceTag) -> set[tuple[int, int]]:
    """``(var, value)`` of every variable ``source`` fixed at a node"""
    node = result.tree.nodes[node_id]
    return {(r.var, int(r.new.lo)) for r in node.reductions if r.source is source and r.new.is_fixed}


def zero(*variables: int) -> set[tuple[int, int]]:
    return {(v, 0) for v in variables}
