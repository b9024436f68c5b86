"""Brute-force ground truth for small instances.

Everything here enumerates integer boxes point by point, so every function refuses boxes larger than the
oracle cap: ``10**6`` points by default, overridden by the ``SYMMKIT_ORACLE_CAP`` environment variable.
Box points are generated and filtered with numpy; the exact checks run on Python numbers.
"""

import math
from collections import Counter
from collections.abc import Callable, Iterable, Sequence
from dataclasses import dataclass, field, replace
from fractions import Fraction
from logging import getLogger
from os import environ
from typing import TYPE_CHECKING, NamedTuple

import numpy as np

from symmkit.activity import complete_point
from symmkit.domains import DomainVector, Number
from symmkit.exceptions import CapExceededError
from symmkit.instance import Instance, LinearConstraint, Sense
from symmkit.perms import Permutation

if TYPE_CHECKING:
    from symmkit.bnb import BnbTree

logger = getLogger(__name__)

ORACLE_CAP_ENV = "SYMMKIT_ORACLE_CAP"
DEFAULT_ORACLE_CAP = 10**6

type Point = tuple[Number, ...]


def oracle_cap() -> int:
    """The box size limit, from ``SYMMKIT_ORACLE_CAP`` if set"""
    raw = environ.get(ORACLE_CAP_ENV)
    if raw is None:
        return DEFAULT_ORACLE_CAP
    try:
        return int(raw)
    except ValueError:
        logger.warning(f"Ignoring {ORACLE_CAP_ENV}={raw!r}, not an integer")
        return DEFAULT_ORACLE_CAP


def box_points(d: DomainVector, cap: int | None = None) -> np.ndarray:
    """All integer points of a finite integer box as the rows of an array, last coordinate varying fastest

    >>> from symmkit.domains import Domain
    >>> box_points(DomainVector.of([Domain.integer(0, 1), Domain.integer(2, 3)])).tolist()
    [[0, 2], [0, 3], [1, 2], [1, 3]]
    """
    cap = oracle_cap() if cap is None else cap
    for i, dom in enumerate(d):
        if not (dom.is_integer and dom.is_finite):
            raise ValueError(f"Cannot enumerate x{i + 1} in {dom}")
    size = d.box_size()
    if size > cap:
        raise CapExceededError(f"Box of {size} points exceeds the oracle cap", size, cap)
    if d.is_empty:
        return np.empty((0, len(d)), dtype=np.int64)
    if len(d) == 0:
        return np.empty((1, 0), dtype=np.int64)
    axes = [np.arange(int(dom.lo), int(dom.hi) + 1, dtype=np.int64) for dom in d]
    return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, len(d))


class Hull(NamedTuple):
    """Per-coordinate interval hull of a point set, with the exact value sets"""

    domains: DomainVector
    values: tuple[frozenset[int], ...]

    @property
    def gaps(self) -> list[int]:
        """Coordinates whose value set is not an interval"""
        return [i for i, vals in enumerate(self.values) if len(vals) != max(vals) - min(vals) + 1]


def tightest_domains(
    predicate: Callable[[tuple[int, ...]], bool], d: DomainVector, cap: int | None = None
) -> Hull | None:
    """The smallest box containing every point of ``d`` satisfying ``predicate``, None if no point does

    >>> from symmkit.domains import Domain
    >>> d = DomainVector.of([Domain.integer(0, 2), Domain.integer(0, 2)])
    >>> print(tightest_domains(lambda x: x[0] > x[1], d).domains)
    [1, 2] x [0, 1]
    """
    kept = [tuple(row) for row in box_points(d, cap).tolist() if predicate(tuple(row))]
    if not kept:
        return None
    columns = list(zip(*kept, strict=True)) if d.domains else []
    values = tuple(frozenset(col) for col in columns)
    hull = DomainVector(tuple(replace(dom, lo=min(vals), hi=max(vals)) for dom, vals in zip(d, values, strict=True)))
    result = Hull(hull, values)
    if gaps := result.gaps:
        logger.debug(f"Value sets of {[i + 1 for i in gaps]} have gaps inside their hull")
    return result


def _scaled_row(row: LinearConstraint) -> tuple[dict[int, int], Fraction]:
    """Integer coefficients with the right-hand side scaled alike"""
    scale = math.lcm(*(Fraction(c).denominator for _, c in row.coefs), Fraction(row.rhs).denominator)
    return {i: int(c * scale) for i, c in row.coefs}, Fraction(row.rhs) * scale


def _compare(act: int, sense: Sense, rhs: Fraction) -> bool:
    match sense:
        case Sense.LE:
            return act <= rhs
        case Sense.GE:
            return act >= rhs
    return act == rhs


def _filter_rows(points: np.ndarray, rows: Iterable[LinearConstraint], columns: Sequence[int]) -> np.ndarray:
    """Rows of ``points`` (over the variables ``columns``) satisfying every constraint"""
    where = {v: k for k, v in enumerate(columns)}
    mask = np.ones(len(points), dtype=bool)
    bound = int(np.abs(points).max()) if points.size else 0
    for row in rows:
        coefs, rhs = _scaled_row(row)
        if sum(abs(c) for c in coefs.values()) * max(bound, 1) >= 2**62:
            # too wide for int64, check with Python integers
            exact = [sum(c * x[where[i]] for i, c in coefs.items()) for x in points.tolist()]
            mask &= np.array([_compare(act, row.sense, rhs) for act in exact], dtype=bool)
            continue
        act = np.zeros(len(points), dtype=np.int64)
        for i, c in coefs.items():
            act += c * points[:, where[i]]
        match row.sense:
            case Sense.LE:
                mask &= act <= math.floor(rhs)
            case Sense.GE:
                mask &= act >= math.ceil(rhs)
            case Sense.EQ:
                mask &= (act == int(rhs)) if rhs.denominator == 1 else False
    return points[mask]


def enumerate_feasible(inst: Instance, box: DomainVector | None = None, cap: int | None = None) -> list[Point]:
    """All feasible points of ``inst`` inside ``box`` (the instance's domains by default), sorted

    Continuous variables are not enumerated: every feasible integer assignment contributes the one point
    :py:func:`~symmkit.activity.complete_point` settles on, or none if it finds no completion.
    """
    if box is None:
        box = inst.domains
    else:
        box = DomainVector(tuple(a.intersect(b) for a, b in zip(inst.domains, box, strict=True)))
    integer = inst.integer_vars
    pure = [row for row in inst.constraints if row.support <= set(integer)]
    points = _filter_rows(box_points(DomainVector(tuple(box[i] for i in integer)), cap), pure, integer)

    if not inst.continuous_vars:
        found = [tuple(x) for x in points.tolist()]
    else:
        found = []
        for x in points.tolist():
            fixed = box.replace({i: box[i].fix(v) for i, v in zip(integer, x, strict=True)})
            if (point := complete_point(inst, fixed)) is not None:
                found.append(point)
    found.sort()
    logger.debug(f"{len(found)} feasible points of {inst.name} out of {len(points)} integer candidates")
    return found


def exhaustive_optimum(inst: Instance, cap: int | None = None) -> tuple[Number, Point] | None:
    """Smallest objective value over the enumerated feasible points and the first point attaining it"""
    best = None
    for x in enumerate_feasible(inst, cap=cap):
        value = inst.objective_value(x)
        if best is None or value < best[0]:
            best = (value, x)
    return best


def orbit_partition(points: Iterable[Point], group: Iterable[Permutation]) -> list[tuple[Point, ...]]:
    """Split ``points`` into the orbits of the enumerated ``group``, each orbit sorted, orbits ordered by first point

    Images falling outside of ``points`` are dropped, so for a group of symmetries of the point set every orbit
    is complete.
    """
    elements = list(group)
    remaining = set(points)
    orbits = []
    for x in sorted(remaining):
        if x not in remaining:
            continue
        orbit = {x} | {g.apply(x) for g in elements}
        orbit &= remaining
        remaining -= orbit
        orbits.append(tuple(sorted(orbit)))
    return orbits


@dataclass
class Certificate:
    """Outcome of :py:func:`certify_leaf_uniqueness`: for every orbit, the number of leaves holding one of its points"""

    exact: bool
    orbits: list[tuple[Point, ...]] = field(default_factory=list)
    counts: list[int] = field(default_factory=list)
    counterexample: Point | None = None
    detail: str = ""

    @property
    def ok(self) -> bool:
        return self.counterexample is None

    def __str__(self) -> str:
        if self.ok:
            mode = "exactly one" if self.exact else "at least one"
            return f"{len(self.orbits)} orbits, {mode} leaf each"
        return f"counterexample {list(self.counterexample or ())}: {self.detail}"


def certify_leaf_uniqueness(tree: "BnbTree", inst: Instance, exact: bool = True, cap: int | None = None) -> Certificate:
    """Check that the leaves of a complete tree hold exactly one (``exact``) or at least one point of every orbit

    The tree must come from a solve without bound pruning that ran to completion, i.e. every node is a leaf, was
    pruned as infeasible or by symmetry, or was branched on.

    :raises ValueError: when the tree has open or bound-pruned nodes
    :raises CapExceededError: when the feasible set or the group is too large to enumerate
    """
    if incomplete := tree.incomplete_nodes():
        raise ValueError(f"The tree has {len(incomplete)} open or bound-pruned nodes, starting with {incomplete[0]}")
    assert inst.group is not None
    orbits = orbit_partition(enumerate_feasible(inst, cap=cap), inst.group.elements)
    owner = {x: k for k, orbit in enumerate(orbits) for x in orbit}
    counts: Counter[int] = Counter()
    cert = Certificate(exact, orbits)
    for solution in tree.leaf_solutions():
        if solution not in owner:
            cert.counterexample, cert.detail = solution, "leaf solution is not a feasible point"
            return cert
        counts[owner[solution]] += 1
    cert.counts = [counts[k] for k in range(len(orbits))]
    for k, count in enumerate(cert.counts):
        if count == 0 or (exact and count > 1):
            cert.counterexample = orbits[k][-1]
            cert.detail = f"orbit of {len(orbits[k])} points is held by {count} leaves"
            break
    logger.info(f"Leaf certificate for {inst.name}: {cert}")
    return cert


def never_decreases_sigma(
    gamma: Permutation, sigma_vars: Sequence[int], d: DomainVector, cap: int | None = None
) -> bool:
    """True if ``sigma(x) <= sigma(gamma(x))`` componentwise at every integer point ``x`` of the box ``d``"""
    points = box_points(d, cap)
    if not sigma_vars or len(points) == 0:
        return True
    columns = list(sigma_vars)
    images = points[:, list(gamma.inverse.image)]
    return bool((points[:, columns] <= images[:, columns]).all())


def classical_orbital_fixing(elements: Iterable[Permutation], zeros: Iterable[int], ones: Iterable[int]) -> frozenset[int]:
    """Variables classical orbital fixing sets to 0 at a binary node

    With ``zeros`` and ``ones`` the variables branched to 0 and 1, the group elements stabilizing ``ones`` as a set
    carry every variable in ``zeros`` to one that can be fixed to 0.
    """
    ones = frozenset(ones)
    zeros = list(zeros)
    stabilizer = [g for g in elements if frozenset(g(i) for i in ones) == ones]
    return frozenset(g(i) for g in stabilizer for i in zeros)
