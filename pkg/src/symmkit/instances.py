"""Builders and random generators for the instance families the symmetry handling is exercised on.

* Noise dosage: ``p`` machines with ``d_i`` work cycles of ``t_i`` hours and ``alpha_i`` noise units each, shared
  between ``q`` identical workers with ``H`` hours; minimize the largest noise dosage ``eta`` of a worker.
  Worker schedules are the columns of the ``p x q`` matrix ``theta``, binary (each worker at most once per machine)
  or integer.
* Covering designs: ``t-(v, k, lambda)``, the multiplicity of every ``k``-subset of ``v`` elements so that every
  ``t``-subset is covered at least ``lambda`` times.
* Random instances whose rows are closed under a given group, for property checks.

Noise instances are sampled with a PCG64 generator seeded by the instance seed; normal samples come from the
Box-Muller transform on pairs of uniforms, so a seed always gives the same file.
"""

import math
from collections.abc import Sequence
from dataclasses import dataclass
from enum import StrEnum
from fractions import Fraction
from itertools import combinations
from logging import getLogger

import numpy as np

from symmkit.domains import INF, Domain, DomainVector
from symmkit.exceptions import CapExceededError, DimensionMismatchError
from symmkit.instance import Instance, LinearConstraint, Objective, OrbitopeLayout, Sense
from symmkit.perms import DEFAULT_ENUMERATION_CAP, PermGroup, Permutation

logger = getLogger(__name__)

DEFAULT_HOURS = 480
COEFFICIENT_WARNING_THRESHOLD = 10**6
"""Sherali-Smith rows with a larger coefficient are reported as numerically risky"""
MAX_COVERING_VARIABLES = 5_000
DECIMALS = 6


class ColumnSwaps(StrEnum):
    """Generators of the column symmetry: adjacent column swaps, or every transposition of two columns"""

    ADJACENT = "adjacent"
    ALL = "all"


class MuMode(StrEnum):
    """Mean time per task: ``sum(d) / (2H)`` from the total demand, or ``2qH / sum(d)`` so the workers are needed for
    about half of the machine time"""

    DEMAND = "demand"
    BALANCED = "balanced"


def column_generators(layout: OrbitopeLayout, n: int, swaps: ColumnSwaps = ColumnSwaps.ADJACENT) -> tuple[Permutation, ...]:
    if swaps is ColumnSwaps.ADJACENT:
        pairs = [(j, j + 1) for j in range(layout.q - 1)]
    else:
        pairs = list(combinations(range(layout.q), 2))
    return tuple(layout.column_swap(n, a, b) for a, b in pairs)


def ndb_shell(p: int = 3, q: int = 5, swaps: ColumnSwaps = ColumnSwaps.ADJACENT) -> Instance:
    """The bare binary ``p x q`` matrix of the noise dosage model, no rows and a zero objective

    Symmetry handling is the only source of reductions on it, which makes it the instance for replaying
    branch-and-bound trees by hand.
    """
    layout = OrbitopeLayout.row_major(p, q)
    n = p * q
    domains = DomainVector.of(Domain.binary() for _ in range(n))
    group = PermGroup(n, column_generators(layout, n, swaps))
    return Instance(domains, (), Objective(), group, layout, name=f"ndb_shell{p}_{q}")


def build_ndb(
    p: int,
    q: int,
    d: Sequence[int],
    t: Sequence[object],
    alpha: Sequence[object],
    hours: object = DEFAULT_HOURS,
    integer: bool = False,
    swaps: ColumnSwaps = ColumnSwaps.ADJACENT,
    name: str | None = None,
) -> Instance:
    """Noise dosage instance, ``theta[i][j]`` is variable ``i * q + j`` and ``eta`` the last one

    With ``integer`` set, ``theta[i][j]`` ranges over ``0..d[i]`` instead of being binary.

    >>> inst = build_ndb(3, 5, [1, 1, 1], [1, 1, 1], [1, 2, 3], 3)
    >>> inst.n, len(inst.constraints), len(inst.generators)
    (16, 13, 4)
    """
    if not (len(d) == len(t) == len(alpha) == p):
        raise DimensionMismatchError(f"Machine data of lengths {len(d)}, {len(t)}, {len(alpha)} for {p} machines")
    if p < 1 or q < 1:
        raise ValueError(f"Need at least one machine and one worker, got {p}x{q}")
    layout = OrbitopeLayout.row_major(p, q)
    eta = p * q
    n = eta + 1
    theta = [Domain.integer(0, d[i]) if integer else Domain.binary() for i in range(p) for _ in range(q)]
    domains = DomainVector.of([*theta, Domain.continuous(0, INF)])

    rows = []
    for j in range(q):
        col = layout.column(j)
        rows.append(LinearConstraint(((*zip(col, alpha, strict=True), (eta, -1))), Sense.LE, 0, name=f"noise{j + 1}"))
    for i in range(p):
        rows.append(LinearConstraint(tuple((v, 1) for v in layout.row(i)), Sense.EQ, d[i], name=f"demand{i + 1}"))
    for j in range(q):
        rows.append(LinearConstraint(tuple(zip(layout.column(j), t, strict=True)), Sense.LE, hours, name=f"time{j + 1}"))

    group = PermGroup(n, column_generators(layout, n, swaps))
    kind = "nd" if integer else "ndb"
    return Instance(domains, tuple(rows), Objective(((eta, 1),)), group, layout, name=name or f"{kind}{p}_{q}")


def ndb_toy(swaps: ColumnSwaps = ColumnSwaps.ADJACENT) -> Instance:
    """3 machines with one unit-time task each, noise 1, 2, 3, five workers with 3 hours; optimum 3"""
    return build_ndb(3, 5, [1, 1, 1], [1, 1, 1], [1, 2, 3], 3, swaps=swaps, name="ndb_toy")


@dataclass(frozen=True)
class NoiseParams:
    p: int
    q: int
    hours: int = DEFAULT_HOURS
    seed: int = 0
    mu_mode: MuMode = MuMode.DEMAND
    integer: bool = True
    swaps: ColumnSwaps = ColumnSwaps.ADJACENT

    def __post_init__(self):
        if self.p < 1 or self.q < 1 or self.hours <= 0:
            raise ValueError(f"Invalid noise parameters p={self.p} q={self.q} H={self.hours}")

    @property
    def name(self) -> str:
        return f"noise{self.p}_{self.q}_{self.hours}_s{self.seed}"


class _Sampler:
    """Uniform integers and Box-Muller normals from one PCG64 stream

    The stream is numpy's ``PCG64`` (PCG XSL RR 128/64) with its state derived from ``SeedSequence(seed)``.
    Integers come from ``Generator.integers`` (Lemire's bounded method), uniforms from ``Generator.random``
    (53-bit doubles in ``[0, 1)``), and each normal uses one pair ``u1, u2`` and only the cosine branch.
    The tasks of all machines are drawn first, then all hours per task, then all noise levels; negative normal
    samples are drawn again.
    """

    def __init__(self, seed: int):
        self.rng = np.random.Generator(np.random.PCG64(seed))

    def integer(self, low: int, high: int) -> int:
        """Uniform on ``low..high`` inclusive"""
        return int(self.rng.integers(low, high + 1))

    def normal(self, mean: float, sd: float) -> float:
        u1, u2 = self.rng.random(2)
        return mean + sd * math.sqrt(-2 * math.log(1 - u1)) * math.cos(2 * math.pi * u2)

    def nonnegative_normal(self, mean: float, sd: float) -> float:
        while (x := self.normal(mean, sd)) < 0:
            pass
        return x


def _decimal(x: float) -> Fraction:
    return Fraction(round(x * 10**DECIMALS), 10**DECIMALS)


def mean_task_time(params: NoiseParams, d: Sequence[int]) -> float:
    """Mean hours per task

    >>> params = NoiseParams(6, 3, hours=8, mu_mode=MuMode.BALANCED)
    >>> mean_task_time(params, [4] * 6) * 24 == 2 * 3 * 8
    True
    """
    if params.mu_mode is MuMode.DEMAND:
        return sum(d) / (2 * params.hours)
    return 2 * params.q * params.hours / sum(d)


def sample_noise_data(params: NoiseParams) -> tuple[list[int], list[Fraction], list[Fraction]]:
    """Tasks ``d``, hours per task ``t`` and noise per task ``alpha`` for every machine"""
    sampler = _Sampler(params.seed)
    d = [sampler.integer(4, 10) for _ in range(params.p)]
    mu = mean_task_time(params, d)
    t = [_decimal(sampler.nonnegative_normal(mu, mu / 5)) for _ in range(params.p)]
    alpha = [_decimal(sampler.nonnegative_normal(18, 4)) for _ in range(params.p)]
    logger.debug(f"{params.name}: d={d} mu={mu:.6f}")
    return d, t, alpha


def generate_noise(params: NoiseParams) -> Instance:
    d, t, alpha = sample_noise_data(params)
    return build_ndb(
        params.p, params.q, d, t, alpha, params.hours, params.integer, params.swaps, name=params.name
    )


def sherali_smith_shc(inst: Instance) -> list[LinearConstraint]:
    """Column ordering rows ``sum_i M^(p-1-i) theta[i][j] >= sum_i M^(p-1-i) theta[i][j+1]``

    ``M`` is one more than the largest upper bound in the matrix, so the rows order the columns lexicographically.
    """
    layout = inst.orbitope
    if layout is None:
        raise ValueError(f"{inst.name} has no orbitope to order")
    uppers = [inst.domains[v].hi for v in layout.variables]
    if any(isinstance(u, float) for u in uppers):
        raise ValueError(f"{inst.name} has unbounded orbitope variables")
    big_m = int(max(uppers)) + 1
    weights = [big_m ** (layout.p - 1 - i) for i in range(layout.p)]
    if weights[0] > COEFFICIENT_WARNING_THRESHOLD:
        logger.warning(f"Column ordering rows of {inst.name} have coefficients up to {weights[0]}")
    rows = []
    for j in range(layout.q - 1):
        left = [(v, w) for v, w in zip(layout.column(j), weights, strict=True)]
        right = [(v, -w) for v, w in zip(layout.column(j + 1), weights, strict=True)]
        rows.append(LinearConstraint((*left, *right), Sense.GE, 0, name=f"order{j + 1}"))
    return rows


def add_sherali_smith(inst: Instance) -> Instance:
    """The instance with its column symmetry broken by :py:func:`sherali_smith_shc` rows instead of handled"""
    return inst.with_constraints(sherali_smith_shc(inst)).with_group(None)


@dataclass(frozen=True)
class CoveringParams:
    t: int
    v: int
    k: int
    lam: int

    def __post_init__(self):
        if not (self.v >= self.k >= self.t >= 1 and self.lam >= 1):
            raise ValueError(f"Need v >= k >= t >= 1 and lambda >= 1, got {self}")

    @property
    def name(self) -> str:
        return f"cov{self.t}_{self.v}_{self.k}_{self.lam}"


def build_covering(params: CoveringParams, cap: int = MAX_COVERING_VARIABLES) -> Instance:
    """Minimum covering design, one variable per ``k``-subset in lexicographic order

    The symmetry group relabels the ``v`` elements, generated by swapping neighbouring elements.

    >>> inst = build_covering(CoveringParams(2, 4, 3, 2))
    >>> inst.n, len(inst.constraints), len(inst.generators)
    (4, 6, 3)
    """
    blocks = list(combinations(range(params.v), params.k))
    if len(blocks) > cap:
        raise CapExceededError(f"{len(blocks)} blocks exceed the covering instance cap", len(blocks), cap)
    index = {block: i for i, block in enumerate(blocks)}
    n = len(blocks)
    domains = DomainVector.of(Domain.integer(0, params.lam) for _ in range(n))
    rows = []
    for subset in combinations(range(params.v), params.t):
        covering = [index[b] for b in blocks if set(subset) <= set(b)]
        name = "cover" + "_".join(str(e + 1) for e in subset)
        rows.append(LinearConstraint(tuple((i, 1) for i in covering), Sense.GE, params.lam, name=name))

    generators = []
    for a in range(params.v - 1):
        relabel = list(range(params.v))
        relabel[a], relabel[a + 1] = a + 1, a
        image = tuple(index[tuple(sorted(relabel[e] for e in block))] for block in blocks)
        if any(i != j for i, j in enumerate(image)):
            generators.append(Permutation(image))
    objective = Objective(tuple((i, 1) for i in range(n)))
    return Instance(domains, tuple(rows), objective, PermGroup(n, tuple(generators)), name=params.name)


def build_random_symmetric(
    rng: np.random.Generator,
    n: int,
    generators: Sequence[Permutation],
    rows: int = 2,
    hi: int = 2,
    max_coef: int = 3,
    cap: int = DEFAULT_ENUMERATION_CAP,
) -> Instance:
    """Random integer instance on ``0..hi`` for which every element of the group of ``generators`` is a symmetry

    Each random row is added together with all of its images under the group, and objective coefficients are
    constant on orbits.
    """
    group = PermGroup(n, tuple(generators), cap)
    elements = group.elements
    keyed: dict[tuple, LinearConstraint] = {}
    for _ in range(rows):
        support = rng.choice(n, size=int(rng.integers(1, n + 1)), replace=False)
        coefs = tuple((int(i), int(rng.integers(1, max_coef + 1))) for i in support)
        sense = Sense.LE if rng.random() < 0.5 else Sense.GE
        total = sum(c for _, c in coefs) * hi
        row = LinearConstraint(coefs, sense, int(rng.integers(0, total + 1)))
        for gamma in elements:
            image = row.permuted(gamma)
            keyed.setdefault(image.key(), image)

    costs = {}
    for orbit in sorted(set(group.orbit_map)):
        cost = int(rng.integers(-2, 3))
        costs.update(dict.fromkeys(orbit, cost))
    domains = DomainVector.of(Domain.integer(0, hi) for _ in range(n))
    objective = Objective(tuple(costs.items()))
    ordered = tuple(keyed[key] for key in sorted(keyed))
    return Instance(domains, ordered, objective, group, name=f"random{n}")
