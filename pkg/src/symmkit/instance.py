"""Bounded-variable linear optimization instances and their file format.

An :py:class:`Instance` is ``min c·x`` subject to linear rows ``a·x (<=|=|>=) b`` over a box of integer and continuous
variables, together with the symmetry generators of the formulation and, optionally, an orbitope annotation
(:py:class:`OrbitopeLayout`).

Instances are stored as JSON documents:

.. code-block:: json

    {
      "name": "toy",
      "n": 2,
      "vars": [{"kind": "binary"}, {"kind": "integer", "lo": 0, "hi": 3}],
      "cons": [{"coefs": [[1, 1], [2, 1]], "sense": "<=", "rhs": 2}],
      "obj": {"coefs": [[2, -1]], "sense": "min"},
      "perms": [[[1, 2]]],
      "orbitope": {"p": 1, "q": 2, "index_map": [[1, 2]]}
    }

All indices in files (coefficients, cycles, the orbitope index map) are 1-based, ``null`` bounds are infinite
and a missing ``lo`` is 0.
Decimals are read exactly as :py:class:`~fractions.Fraction` so reading and writing an instance never changes it.
"""

import json
from collections import Counter
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field, replace
from enum import StrEnum
from fractions import Fraction
from functools import cached_property
from logging import getLogger
from pathlib import Path
from typing import Any

from symmkit.domains import INF, Domain, DomainVector, Number, VarKind, as_number
from symmkit.exceptions import DimensionMismatchError, InstanceFormatError
from symmkit.perms import PermGroup, Permutation

logger = getLogger(__name__)


class Sense(StrEnum):
    """Sense of a linear row"""

    LE = "<="
    EQ = "="
    GE = ">="


def _normalize_coefs(coefs: Iterable[tuple[int, object]]) -> tuple[tuple[int, Number], ...]:
    merged: dict[int, Number] = {}
    for idx, val in coefs:
        merged[idx] = merged.get(idx, 0) + as_number(val)
    return tuple(sorted((i, as_number(v)) for i, v in merged.items() if v != 0))


@dataclass(frozen=True)
class LinearConstraint:
    """A sparse row ``sum(coef * x[idx]) sense rhs``, coefficients sorted by index with zeros dropped"""

    coefs: tuple[tuple[int, Number], ...]
    sense: Sense
    rhs: Number
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "coefs", _normalize_coefs(self.coefs))
        object.__setattr__(self, "sense", Sense(self.sense))
        object.__setattr__(self, "rhs", as_number(self.rhs))

    def activity(self, x: Sequence[Number]) -> Number:
        return sum((c * x[i] for i, c in self.coefs), start=0)

    def satisfied(self, x: Sequence[Number]) -> bool:
        lhs = self.activity(x)
        match self.sense:
            case Sense.LE:
                return lhs <= self.rhs
            case Sense.GE:
                return lhs >= self.rhs
        return lhs == self.rhs

    def permuted(self, gamma: Permutation) -> "LinearConstraint":
        """The row with the coefficient of ``x[i]`` moved onto ``x[gamma(i)]``"""
        return replace(self, coefs=tuple((gamma(i), c) for i, c in self.coefs))

    @property
    def support(self) -> frozenset[int]:
        return frozenset(i for i, _ in self.coefs)

    def key(self) -> tuple:
        """Everything but the name, used to compare rows as a multiset"""
        return (self.coefs, self.sense, self.rhs)


@dataclass(frozen=True)
class Objective:
    """A linear objective, always minimized"""

    coefs: tuple[tuple[int, Number], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "coefs", _normalize_coefs(self.coefs))

    def value(self, x: Sequence[Number]) -> Number:
        return sum((c * x[i] for i, c in self.coefs), start=0)

    def dense(self, n: int) -> tuple[Number, ...]:
        values: list[Number] = [0] * n
        for i, c in self.coefs:
            values[i] = c
        return tuple(values)

    def permuted(self, gamma: Permutation) -> "Objective":
        return Objective(tuple((gamma(i), c) for i, c in self.coefs))


@dataclass(frozen=True)
class OrbitopeLayout:
    """A ``p x q`` matrix of distinct variables whose columns may be permuted arbitrarily

    ``cells[i][j]`` is the (0-based) variable in row ``i`` and column ``j``.

    >>> layout = OrbitopeLayout.row_major(2, 3)
    >>> layout.column(1), layout.position(4)
    ((1, 4), (1, 1))
    >>> print(layout.column_swap(6, 0, 2))
    (1,3)(4,6)
    """

    p: int
    q: int
    cells: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        if self.p < 1 or self.q < 1:
            raise InstanceFormatError(f"Orbitope needs positive dimensions, got {self.p}x{self.q}")
        if len(self.cells) != self.p or any(len(row) != self.q for row in self.cells):
            raise InstanceFormatError(f"Orbitope index map is not {self.p}x{self.q}")
        flat = [v for row in self.cells for v in row]
        if len(set(flat)) != len(flat):
            raise InstanceFormatError("Orbitope index map repeats a variable")

    @classmethod
    def row_major(cls, p: int, q: int, offset: int = 0) -> "OrbitopeLayout":
        return cls(p, q, tuple(tuple(offset + i * q + j for j in range(q)) for i in range(p)))

    def var(self, i: int, j: int) -> int:
        return self.cells[i][j]

    def row(self, i: int) -> tuple[int, ...]:
        return self.cells[i]

    def column(self, j: int) -> tuple[int, ...]:
        return tuple(row[j] for row in self.cells)

    @cached_property
    def positions(self) -> dict[int, tuple[int, int]]:
        return {v: (i, j) for i, row in enumerate(self.cells) for j, v in enumerate(row)}

    def position(self, var: int) -> tuple[int, int]:
        return self.positions[var]

    @property
    def variables(self) -> frozenset[int]:
        return frozenset(self.positions)

    def column_permutation(self, n: int, mapping: Sequence[int]) -> Permutation:
        """The variable permutation sending column ``c`` onto column ``mapping[c]`` in every row"""
        image = list(range(n))
        for row in self.cells:
            for c, v in enumerate(row):
                image[v] = row[mapping[c]]
        return Permutation(tuple(image))

    def column_swap(self, n: int, a: int, b: int) -> Permutation:
        mapping = list(range(self.q))
        mapping[a], mapping[b] = b, a
        return self.column_permutation(n, mapping)


@dataclass(frozen=True)
class Instance:
    """``min objective`` over the box ``domains`` subject to ``constraints``, with formulation symmetries ``group``"""

    domains: DomainVector
    constraints: tuple[LinearConstraint, ...] = ()
    objective: Objective = field(default_factory=Objective)
    group: PermGroup | None = None
    orbitope: OrbitopeLayout | None = None
    name: str = "instance"

    def __post_init__(self):
        n = len(self.domains)
        if self.group is None:
            object.__setattr__(self, "group", PermGroup(n))
        elif self.group.n != n:
            raise DimensionMismatchError(f"Group acts on {self.group.n} points, instance has {n} variables")
        for con in self.constraints:
            if any(not 0 <= i < n for i, _ in con.coefs):
                raise InstanceFormatError(f"Constraint {con.name or con.coefs} refers to a variable outside of 1..{n}")
        if any(not 0 <= i < n for i, _ in self.objective.coefs):
            raise InstanceFormatError(f"Objective refers to a variable outside of 1..{n}")
        if self.orbitope is not None and any(not 0 <= v < n for v in self.orbitope.variables):
            raise InstanceFormatError(f"Orbitope refers to a variable outside of 1..{n}")

    @property
    def n(self) -> int:
        return len(self.domains)

    @property
    def generators(self) -> tuple[Permutation, ...]:
        assert self.group is not None
        return self.group.generators

    @cached_property
    def integer_vars(self) -> tuple[int, ...]:
        return tuple(i for i, d in enumerate(self.domains) if d.is_integer)

    @cached_property
    def continuous_vars(self) -> tuple[int, ...]:
        return tuple(i for i, d in enumerate(self.domains) if not d.is_integer)

    @property
    def objective_is_integral(self) -> bool:
        """True when every feasible objective value is an integer"""
        return all(self.domains[i].is_integer and Fraction(c).denominator == 1 for i, c in self.objective.coefs)

    def with_constraints(self, extra: Iterable[LinearConstraint]) -> "Instance":
        return replace(self, constraints=self.constraints + tuple(extra))

    def with_group(self, group: PermGroup | None, orbitope: OrbitopeLayout | None = None) -> "Instance":
        return replace(self, group=group or PermGroup(self.n), orbitope=orbitope)

    def is_feasible(self, x: Sequence[Number]) -> bool:
        if len(x) != self.n:
            raise DimensionMismatchError(f"Point of length {len(x)} for instance with {self.n} variables")
        if not all(d.contains(v) for d, v in zip(self.domains, x, strict=True)):
            return False
        if any(d.is_integer and Fraction(v).denominator != 1 for d, v in zip(self.domains, x, strict=True)):
            return False
        return all(con.satisfied(x) for con in self.constraints)

    def objective_value(self, x: Sequence[Number]) -> Number:
        return self.objective.value(x)


def validate_symmetry(inst: Instance, p: Permutation) -> bool:
    """Check that ``p`` is a formulation symmetry of ``inst``

    Permuting the variables must map the objective onto itself, the rows onto the same multiset of rows, and keep
    every variable kind and bound. All comparisons are exact.
    """
    if p.n != inst.n:
        raise DimensionMismatchError(f"Permutation on {p.n} points for instance with {inst.n} variables")
    if any(inst.domains[p(i)] != inst.domains[i] for i in range(inst.n)):
        logger.debug(f"{p} does not preserve variable domains")
        return False
    if inst.objective.permuted(p) != inst.objective:
        logger.debug(f"{p} does not preserve the objective")
        return False
    before = Counter(con.key() for con in inst.constraints)
    after = Counter(con.permuted(p).key() for con in inst.constraints)
    if before != after:
        logger.debug(f"{p} does not map the constraint rows onto themselves")
        return False
    return True


def _dump_number(x: Number) -> Any:
    if isinstance(x, float):
        return None
    if isinstance(x, int):
        return x
    if Fraction(repr(float(x))) == x:
        return float(x)
    return str(x)


def _load_bound(value: Any, default: Number) -> Number:
    if value is None:
        return default
    try:
        return as_number(value)
    except (TypeError, ValueError, ZeroDivisionError) as err:
        raise InstanceFormatError(f"Could not read bound {value!r}") from err


def _load_coefs(raw: Any, n: int, what: str) -> tuple[tuple[int, Number], ...]:
    try:
        coefs = [(int(idx) - 1, as_number(val)) for idx, val in raw]
    except (TypeError, ValueError, ZeroDivisionError) as err:
        raise InstanceFormatError(f"Could not read the coefficients of {what}") from err
    if any(not 0 <= i < n for i, _ in coefs):
        raise InstanceFormatError(f"{what} refers to a variable outside of 1..{n}")
    return tuple(coefs)


def _load_domain(raw: Mapping[str, Any]) -> Domain:
    kind = str(raw.get("kind", "continuous")).lower()
    match kind:
        case "binary":
            lo, hi = _load_bound(raw.get("lo"), 0), _load_bound(raw.get("hi"), 1)
            return Domain(VarKind.INTEGER, lo, hi)
        case "integer" | "continuous":
            lo = _load_bound(raw.get("lo", 0), -INF)
            hi = _load_bound(raw.get("hi"), INF)
            return Domain(VarKind(kind), lo, hi)
    raise InstanceFormatError(f"Unknown variable kind {kind!r}")


def _load_perm(raw: Any, n: int) -> Permutation:
    if isinstance(raw, str):
        return Permutation.parse(raw, n)
    try:
        cycles = [[int(c) for c in cycle] for cycle in raw]
    except (TypeError, ValueError) as err:
        raise InstanceFormatError(f"Could not read permutation {raw!r}") from err
    return Permutation.from_cycles(n, cycles)


def _load_orbitope(raw: Mapping[str, Any], n: int) -> OrbitopeLayout:
    try:
        p, q = int(raw["p"]), int(raw["q"])
        index_map = raw.get("index_map")
        if index_map is None:
            return OrbitopeLayout.row_major(p, q)
        if index_map and not isinstance(index_map[0], list):
            index_map = [index_map[i * q : (i + 1) * q] for i in range(p)]
        cells = tuple(tuple(int(v) - 1 for v in row) for row in index_map)
    except (KeyError, TypeError, ValueError) as err:
        raise InstanceFormatError("Could not read the orbitope annotation") from err
    return OrbitopeLayout(p, q, cells)


def instance_from_dict(doc: Mapping[str, Any]) -> Instance:
    """Build an instance from a parsed JSON document, see the module docs for the layout"""
    if not isinstance(doc, Mapping):
        raise InstanceFormatError("Instance document must be an object")
    raw_vars = doc.get("vars")
    if raw_vars is None:
        raise InstanceFormatError("Instance document has no 'vars'")
    n = int(doc.get("n", len(raw_vars)))
    if n != len(raw_vars):
        raise InstanceFormatError(f"Instance declares n={n} but lists {len(raw_vars)} variables")

    domains = DomainVector.of(_load_domain(v) for v in raw_vars)

    constraints = []
    for k, raw in enumerate(doc.get("cons", [])):
        name = str(raw.get("name", f"c{k + 1}"))
        try:
            sense = Sense(raw["sense"])
            rhs = as_number(raw["rhs"])
        except (KeyError, ValueError, TypeError) as err:
            raise InstanceFormatError(f"Constraint {name} needs a sense in <=, =, >= and a rhs") from err
        constraints.append(LinearConstraint(_load_coefs(raw.get("coefs", []), n, name), sense, rhs, name))

    raw_obj = doc.get("obj", {})
    if raw_obj.get("sense", "min") != "min":
        raise InstanceFormatError(f"Only minimization is supported, got {raw_obj.get('sense')!r}")
    objective = Objective(_load_coefs(raw_obj.get("coefs", []), n, "objective"))

    generators = tuple(_load_perm(raw, n) for raw in doc.get("perms", []))
    orbitope = _load_orbitope(doc["orbitope"], n) if doc.get("orbitope") else None

    return Instance(
        domains=domains,
        constraints=tuple(constraints),
        objective=objective,
        group=PermGroup(n, generators),
        orbitope=orbitope,
        name=str(doc.get("name", "instance")),
    )


def instance_to_dict(inst: Instance) -> dict[str, Any]:
    def var_doc(d: Domain) -> dict[str, Any]:
        if d.is_integer and d.lo == 0 and d.hi == 1:
            return {"kind": "binary"}
        return {"kind": str(d.kind), "lo": _dump_number(d.lo), "hi": _dump_number(d.hi)}

    def coefs_doc(coefs: Iterable[tuple[int, Number]]) -> list[list[Any]]:
        return [[i + 1, _dump_number(c)] for i, c in coefs]

    doc: dict[str, Any] = {
        "name": inst.name,
        "n": inst.n,
        "vars": [var_doc(d) for d in inst.domains],
        "cons": [
            {"name": con.name, "coefs": coefs_doc(con.coefs), "sense": str(con.sense), "rhs": _dump_number(con.rhs)}
            for con in inst.constraints
        ],
        "obj": {"coefs": coefs_doc(inst.objective.coefs), "sense": "min"},
        "perms": [[[c + 1 for c in cycle] for cycle in gen.cycles()] for gen in inst.generators],
    }
    if inst.orbitope is not None:
        layout = inst.orbitope
        doc["orbitope"] = {"p": layout.p, "q": layout.q, "index_map": [[v + 1 for v in row] for row in layout.cells]}
    return doc


def loads_instance(text: str) -> Instance:
    try:
        doc = json.loads(text, parse_float=Fraction)
    except json.JSONDecodeError as err:
        raise InstanceFormatError(f"Instance is not valid JSON: {err}") from err
    return instance_from_dict(doc)


def dumps_instance(inst: Instance) -> str:
    return json.dumps(instance_to_dict(inst), indent=1) + "\n"


def read_instance(path: Path) -> Instance:
    logger.debug(f"Reading instance {path}")
    inst = loads_instance(Path(path).read_text())
    logger.info(f"Read {inst.name}: {inst.n} variables, {len(inst.constraints)} rows, {len(inst.generators)} generators")
    return inst


def write_instance(inst: Instance, path: Path) -> None:
    Path(path).write_text(dumps_instance(inst))
    logger.info(f"Wrote {inst.name} to {path}")
