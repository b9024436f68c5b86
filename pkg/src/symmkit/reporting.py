"""Solve reports, recorded trees and audit results, as plain text and XML.

The XML documents are built with the lxml builder so the code reads like the documents it writes.
A recorded tree (:py:func:`tree_element`) holds, for every node, the proper-branching box, the propagated domains,
the prehandling structure of each group component and the reduction log; :py:func:`read_tree` turns it back into
a :py:class:`~symmkit.bnb.BnbTree` for :py:func:`~symmkit.prehandle.audit_conditions` and the leaf certificate.

Variables are numbered from 1 in every document. Numbers are written exactly (``1/3``, not ``0.333...``).
"""

from datetime import UTC, datetime
from fractions import Fraction
from pathlib import Path

from lxml import etree
from lxml.builder import ElementMaker
from lxml.etree import _Element

from symmkit import __version__
from symmkit.bnb import BnbNode, BnbTree, Branch, NodeStatus, Reduction, SolveResult, SourceTag
from symmkit.domains import INF, Domain, DomainVector, Number, format_number
from symmkit.exceptions import InstanceFormatError
from symmkit.instance import Instance
from symmkit.oracle import Certificate
from symmkit.perms import Permutation
from symmkit.prehandle import AuditReport, Placement, PrehandlePolicy, PrehandlingState

E = ElementMaker()

# solve report
SolveReport = E.solve
Update = E.update
Config = E.config
Components = E.components
Component = E.component
Result = E.result
Reductions = E.reductions
Count = E.count

# recorded tree
Tree = E.tree
Node = E.node
Box = E.box
Domains = E.domains
State = E.state
ReductionElement = E.reduction
Solution = E.solution

# audit
Audit = E.audit
Condition = E.condition
Witness = E.witness
LeafCertificate = E.certificate

DOMAIN_SEPARATOR = "; "


def exact(x: Number) -> str:
    """Text for a number that reads back to the same value, see :py:func:`read_number`

    >>> exact(Fraction(1, 3)), exact(4), exact(-INF)
    ('1/3', '4', '-inf')
    """
    if isinstance(x, float):
        return "inf" if x > 0 else "-inf"
    return str(x)


def read_number(text: str) -> Number:
    text = text.strip()
    if text in ("inf", "-inf"):
        return INF if text == "inf" else -INF
    value = Fraction(text)
    return value.numerator if value.denominator == 1 else value


def domain_text(dom: Domain) -> str:
    if dom.is_empty:
        return "{}"
    if dom.is_fixed:
        return "{" + exact(dom.lo) + "}"
    left = "(" if dom.lo_strict else "["
    right = ")" if dom.hi_strict else "]"
    return f"{left}{exact(dom.lo)}, {exact(dom.hi)}{right}"


def read_domain(text: str, like: Domain) -> Domain:
    """Parse :py:func:`domain_text` output, the variable kind is taken from ``like``"""
    text = text.strip()
    try:
        if text == "{}":
            return Domain(like.kind, 1, 0)
        if text.startswith("{"):
            return like.fix(read_number(text[1:-1]))
        lo, hi = text[1:-1].split(",")
        return Domain(like.kind, read_number(lo), read_number(hi), text[0] == "(", text[-1] == ")")
    except (ValueError, IndexError, ZeroDivisionError) as err:
        raise InstanceFormatError(f"Could not read domain {text!r}") from err


def box_text(d: DomainVector) -> str:
    return DOMAIN_SEPARATOR.join(domain_text(dom) for dom in d)


def read_box(text: str, like: DomainVector) -> DomainVector:
    parts = text.split(DOMAIN_SEPARATOR.strip())
    if len(parts) != len(like):
        raise InstanceFormatError(f"Box with {len(parts)} domains for {len(like)} variables")
    return DomainVector(tuple(read_domain(part, dom) for part, dom in zip(parts, like, strict=True)))


def reduction_counts_text(result: SolveResult) -> str:
    return " ".join(f"{tag}={result.reductions.get(tag, 0)}" for tag in SourceTag)


def format_report(result: SolveResult) -> str:
    """Plain text report, everything but the first line is reproducible for a fixed instance and configuration"""
    stamp = datetime.now(tz=UTC).strftime("%Y-%m-%dT%H:%M:%SZ")
    lines = [
        f"# symmkit {__version__} {stamp} wall={result.wall_time:.4f}s symmetry={result.symmetry_time:.4f}s",
        f"instance: {result.instance}",
        f"config: {result.config.describe()}",
    ]
    lines.extend(f"component {k + 1}: {label}" for k, label in enumerate(result.components))
    lines.append(f"status: {result.status}")
    if result.objective is not None:
        lines.append(f"optimum: {format_number(result.objective)}")
    if result.solution is not None:
        lines.append("solution: " + " ".join(format_number(x) for x in result.solution))
    lines.append(f"nodes: {result.nodes}")
    lines.append(f"reductions: {reduction_counts_text(result)}")
    if not result.config.bound_pruning:
        lines.append(f"leaves: {len(result.leaves)}")
    return "\n".join(lines) + "\n"


def get_update_record() -> _Element:
    return Update(
        process="symmkit", version=__version__, time=datetime.now(tz=UTC).strftime("%Y-%m-%dT%H:%M:%SZ")
    )


def solve_element(result: SolveResult) -> _Element:
    """The solve report as XML"""
    attrs = {"status": str(result.status), "nodes": str(result.nodes)}
    if result.objective is not None:
        attrs["objective"] = exact(result.objective)
    children = [
        get_update_record(),
        Config(result.config.describe()),
        Components(*(Component(label, index=str(k + 1)) for k, label in enumerate(result.components))),
        Result(
            Reductions(*(Count(str(result.reductions.get(tag, 0)), source=str(tag)) for tag in SourceTag)),
            wall_time=f"{result.wall_time:.6f}",
            symmetry_time=f"{result.symmetry_time:.6f}",
            **attrs,
        ),
    ]
    if result.solution is not None:
        children.append(Solution(" ".join(exact(x) for x in result.solution)))
    return SolveReport(*children, instance=result.instance)


def state_element(k: int, state: PrehandlingState) -> _Element:
    attrs = {
        "component": str(k + 1),
        "policy": str(state.policy),
        "m": str(state.m),
        "pi": str(state.pi),
        "phi": str(state.phi),
        "placement": str(state.placement),
    }
    if state.row_order:
        attrs["rows"] = " ".join(str(r + 1) for r in state.row_order)
    if state.column_map:
        attrs["columns"] = " ".join(str(c + 1) for c in state.column_map)
    return State(**attrs)


def node_element(node: BnbNode) -> _Element:
    attrs = {"id": str(node.id), "depth": str(node.depth), "status": str(node.status)}
    if node.parent is not None:
        attrs["parent"] = str(node.parent)
    if node.branch is not None:
        attrs["var"] = str(node.branch.var + 1)
        attrs["branch"] = domain_text(node.branch.domain)
    children = [
        Box(box_text(node.branch_box)),
        Domains(box_text(node.domains)),
        *(state_element(k, state) for k, state in enumerate(node.states)),
        *(
            ReductionElement(
                var=str(r.var + 1), old=domain_text(r.old), new=domain_text(r.new), source=str(r.source)
            )
            for r in node.reductions
        ),
    ]
    if node.solution is not None:
        children.append(Solution(" ".join(exact(x) for x in node.solution)))
    return Node(*children, **attrs)


def tree_element(result: SolveResult, inst: Instance) -> _Element:
    return Tree(
        *(node_element(node) for node in result.tree.nodes),
        instance=result.instance,
        n=str(inst.n),
        config=result.config.describe(),
    )


def _read_state(el: _Element, n: int) -> PrehandlingState:
    try:
        return PrehandlingState(
            n,
            int(el.get("m")),
            Permutation.parse(el.get("pi", "()"), n),
            Permutation.parse(el.get("phi", "()"), n),
            PrehandlePolicy(el.get("policy")),
            Placement(el.get("placement", "first")),
            None,
            tuple(int(r) - 1 for r in el.get("rows", "").split()),
            tuple(int(c) - 1 for c in el.get("columns", "").split()),
        )
    except (TypeError, ValueError) as err:
        raise InstanceFormatError(f"Could not read prehandling state {dict(el.attrib)}") from err


def read_tree(path: Path, inst: Instance) -> BnbTree:
    """Rebuild a tree written by :py:func:`write_tree`, variable kinds come from ``inst``"""
    try:
        root = etree.parse(str(path), etree.XMLParser(remove_blank_text=True)).getroot()
    except (OSError, etree.XMLSyntaxError) as err:
        raise InstanceFormatError(f"Could not read tree {path}: {err}") from err
    if root.tag != "tree":
        raise InstanceFormatError(f"{path} is not a recorded tree")
    n = int(root.get("n", inst.n))
    if n != inst.n:
        raise InstanceFormatError(f"Tree over {n} variables for an instance with {inst.n}")

    tree = BnbTree()
    for el in root.iter("node"):
        parent = el.get("parent")
        branch = None
        if el.get("var") is not None:
            var = int(el.get("var")) - 1
            branch = Branch(var, read_domain(el.get("branch"), inst.domains[var]))
        node = BnbNode(
            int(el.get("id")),
            int(parent) if parent is not None else None,
            int(el.get("depth", 0)),
            read_box(el.findtext("box", ""), inst.domains),
            read_box(el.findtext("domains", ""), inst.domains),
            tuple(_read_state(s, n) for s in el.iter("state")),
            branch,
            NodeStatus(el.get("status", "open")),
        )
        for r in el.iter("reduction"):
            var = int(r.get("var")) - 1
            like = inst.domains[var]
            node.reductions.append(
                Reduction(var, read_domain(r.get("old"), like), read_domain(r.get("new"), like), SourceTag(r.get("source")))
            )
        if (text := el.findtext("solution")) is not None:
            node.solution = tuple(read_number(x) for x in text.split())
        tree.add(node)
    return tree


def audit_element(report: AuditReport, certificate: Certificate | None = None) -> _Element:
    children = [get_update_record()]
    children.extend(Condition(str(status), name=name) for name, status in report.results.items())
    for w in report.witnesses:
        attrs = {"condition": w.condition, "node": str(w.node), "component": str(w.component + 1)}
        if w.other is not None:
            attrs["other"] = str(w.other)
        if w.permutation:
            attrs["permutation"] = w.permutation
        if w.point:
            attrs["point"] = " ".join(exact(x) for x in w.point)
        children.append(Witness(w.detail, **attrs))
    if certificate is not None:
        children.append(
            LeafCertificate(
                str(certificate),
                ok=str(certificate.ok).lower(),
                mode="exact" if certificate.exact else "at-least-one",
                orbits=str(len(certificate.orbits)),
            )
        )
    return Audit(*children, ok=str(report.ok and (certificate is None or certificate.ok)).lower())


def write_xml(element: _Element, path: Path):
    with Path(path).open("wb") as f:
        etree.ElementTree(element).write(f, pretty_print=True, xml_declaration=True, method="xml", encoding="UTF-8")


def write_tree(result: SolveResult, inst: Instance, path: Path):
    write_xml(tree_element(result, inst), path)
