"""The command line interface, the :py:func:`cli` group with one command per task:

* ``solve``: run :py:func:`~symmkit.bnb.solve` on an instance file (or a built-in toy) and print the report,
  optionally writing the report and the recorded tree as XML.
* ``propagate``: run lexicographic or orbitopal reduction once on a box given on the command line.
* ``audit``: read a recorded tree back and check the prehandling conditions and, for complete trees, that the
  leaves hold one point per symmetry class.
* ``generate``: write instance files of the built-in families.
* ``bench``: run a manifest of instances and configurations and tabulate shifted geometric means.

Unreadable input exits with code 2; a solve stopped by its node or time limit prints what it has and exits with 3.
"""

import logging
from dataclasses import replace
from pathlib import Path

import click
from rich.console import Console
from rich.logging import RichHandler

from symmkit.bench import load_manifest, run_bench, summarize, summary_table, toy_suite, write_summary_csv
from symmkit.bnb import BranchingRule, SolveConfig, SolveResult, solve
from symmkit.dispatch import LexredScope, ShcMode
from symmkit.domains import Domain, DomainVector, Status, VarKind
from symmkit.exceptions import CapExceededError, InstanceFormatError, LimitReachedError, PrehandleError
from symmkit.instance import Instance, OrbitopeLayout, dumps_instance, read_instance
from symmkit.instances import (
    ColumnSwaps,
    CoveringParams,
    MuMode,
    NoiseParams,
    add_sherali_smith,
    build_covering,
    generate_noise,
    ndb_shell,
    ndb_toy,
)
from symmkit.lexred import LexOrder, propagate_lex
from symmkit.oracle import certify_leaf_uniqueness
from symmkit.orbitope import propagate_orbitope
from symmkit.perms import Permutation
from symmkit.prehandle import CheckStatus, Placement, PrehandlePolicy, audit_conditions
from symmkit.reporting import (
    audit_element,
    domain_text,
    format_report,
    read_box,
    read_tree,
    solve_element,
    write_tree,
    write_xml,
)

BUILTIN_INSTANCES = {
    "ndb_toy": ndb_toy,
    "ndb_shell": ndb_shell,
}
"""Instances that can be named on the command line instead of given as a file"""

EXIT_LIMIT = 3


class InstanceParam(click.ParamType):
    """An instance JSON file, or the name of a built-in instance"""

    name = "instance"

    def convert(self, value, param, ctx) -> Instance:
        if isinstance(value, Instance):
            return value
        if value in BUILTIN_INSTANCES:
            return BUILTIN_INSTANCES[value]()
        path = Path(value)
        if not path.exists():
            self.fail(f"{value} is neither a file nor one of {', '.join(BUILTIN_INSTANCES)}", param, ctx)
        try:
            return read_instance(path)
        except InstanceFormatError as err:
            self.fail(str(err), param, ctx)


INSTANCE = InstanceParam()


@click.group()
@click.version_option()
@click.option("-q", "--quiet", count=True)
def cli(quiet):
    FORMAT = "%(message)s"
    logging.basicConfig(
        level=(quiet + 1) * 10,
        format=FORMAT,
        datefmt="[%X]",
        handlers=[RichHandler(console=Console(stderr=True))],
    )


def _parse_order(text: str | None, n: int) -> tuple[int, ...]:
    if not text:
        return ()
    try:
        order = tuple(int(v) - 1 for v in text.replace(",", " ").split())
    except ValueError as err:
        raise click.BadParameter(f"expected variable numbers, got {text!r}", param_hint="--branching-order") from err
    if any(not 0 <= v < n for v in order):
        raise click.BadParameter(f"variables must be in 1..{n}", param_hint="--branching-order")
    return order


def _echo_result(result: SolveResult, inst: Instance, emit_tree: Path | None, xml: Path | None):
    click.echo(format_report(result), nl=False)
    if emit_tree is not None:
        write_tree(result, inst, emit_tree)
    if xml is not None:
        write_xml(solve_element(result), xml)


@cli.command("solve")
@click.argument("instance", type=INSTANCE)
@click.option(
    "--shc",
    show_default=True,
    default=ShcMode.NONE,
    type=click.Choice(ShcMode, case_sensitive=False),
    help=ShcMode.__doc__,
)
@click.option(
    "--prehandle",
    default=None,
    type=click.Choice(PrehandlePolicy, case_sensitive=False),
    help=PrehandlePolicy.__doc__,
)
@click.option(
    "--placement",
    show_default=True,
    default=Placement.MEDIAN,
    type=click.Choice(Placement, case_sensitive=False),
    help=Placement.__doc__,
)
@click.option(
    "--lexred-scope",
    show_default=True,
    default=LexredScope.GENERATORS,
    type=click.Choice(LexredScope, case_sensitive=False),
    help=LexredScope.__doc__,
)
@click.option(
    "--branching",
    show_default=True,
    default=BranchingRule.INDEX,
    type=click.Choice(BranchingRule, case_sensitive=False),
    help=BranchingRule.__doc__,
)
@click.option("--branching-order", help="Variables (1-based) to branch on first, in this order")
@click.option("--bound-pruning/--no-bound-pruning", default=True, show_default=True)
@click.option("--isoprune", is_flag=True, help="Prune nodes whose 1-branched variables are not lexicographically maximal")
@click.option("--sherali-smith", is_flag=True, help="Replace the orbitope symmetry by column ordering rows")
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--time-limit", default=60.0, show_default=True, type=float, help="Seconds")
@click.option("--node-limit", default=None, type=int)
@click.option("--depth-limit", default=None, type=int, help="Nodes at this depth are left open")
@click.option("--emit-tree", default=None, type=click.Path(dir_okay=False, writable=True, path_type=Path))
@click.option("--xml", default=None, type=click.Path(dir_okay=False, writable=True, path_type=Path))
@click.pass_context
def solve_cmd(
    ctx: click.Context,
    instance: Instance,
    shc: ShcMode,
    prehandle: PrehandlePolicy | None,
    placement: Placement,
    lexred_scope: LexredScope,
    branching: BranchingRule,
    branching_order: str | None,
    bound_pruning: bool,
    isoprune: bool,
    sherali_smith: bool,
    seed: int,
    time_limit: float,
    node_limit: int | None,
    depth_limit: int | None,
    emit_tree: Path | None,
    xml: Path | None,
):
    """Minimize an instance by branch-and-bound and print the optimum, node count and reductions by source."""
    if sherali_smith:
        try:
            instance = add_sherali_smith(instance)
        except ValueError as err:
            raise click.UsageError(str(err)) from err
    cfg = SolveConfig(
        shc=shc,
        prehandle=prehandle,
        placement=placement,
        bound_pruning=bound_pruning,
        isoprune=isoprune,
        lexred_scope=lexred_scope,
        branching=branching,
        branching_order=_parse_order(branching_order, instance.n),
        depth_limit=depth_limit,
        node_limit=node_limit,
        time_limit=time_limit,
        seed=seed,
    )
    try:
        result = solve(instance, cfg)
    except LimitReachedError as err:
        _echo_result(err.result, instance, emit_tree, xml)
        ctx.exit(EXIT_LIMIT)
    except PrehandleError as err:
        raise click.UsageError(str(err)) from err
    _echo_result(result, instance, emit_tree, xml)


def _parse_box(text: str, kind: VarKind) -> DomainVector:
    parts = [part for part in text.split(";") if part.strip()]
    like = DomainVector.of(Domain(kind, 0, 0) for _ in parts)
    try:
        return read_box(";".join(parts), like)
    except InstanceFormatError as err:
        raise click.BadParameter(str(err), param_hint="BOX") from err


@cli.command()
@click.argument("box")
@click.option("--perm", default="()", show_default=True, help="Symmetry in 1-based cycle notation, for lexred")
@click.option("--orbitope", "shape", default=None, help="Orbitope rows x columns (e.g. 3x2) over the box, row major")
@click.option("--continuous", is_flag=True, help="Read the box as continuous domains")
def propagate(box: str, perm: str, shape: str | None, continuous: bool):
    """Propagate x >= perm(x) (or the orbitope constraint) once on BOX and print what changed.

    BOX lists the domains separated by semicolons, e.g. "{0}; [-1, 0]; {1}; [-1, 1]".
    """
    d = _parse_box(box, VarKind.CONTINUOUS if continuous else VarKind.INTEGER)
    if shape is not None:
        try:
            p, q = (int(k) for k in shape.lower().split("x"))
        except ValueError as err:
            raise click.BadParameter(f"expected ROWSxCOLUMNS, got {shape!r}", param_hint="--orbitope") from err
        if p * q != len(d):
            raise click.BadParameter(f"{p}x{q} orbitope over {len(d)} variables", param_hint="--orbitope")
        result, status = propagate_orbitope(OrbitopeLayout.row_major(p, q), d)
    else:
        try:
            gamma = Permutation.parse(perm, len(d))
        except (InstanceFormatError, ValueError) as err:
            raise click.BadParameter(str(err), param_hint="--perm") from err
        result, status = propagate_lex(LexOrder.static(gamma), d)
    click.echo(f"before: {'; '.join(domain_text(dom) for dom in d)}")
    click.echo(f"after: {'; '.join(domain_text(dom) for dom in result)}")
    click.echo(f"status: {status}")
    if status is not Status.INFEASIBLE:
        for i in d.changed(result):
            click.echo(f"x{i + 1}: {domain_text(d[i])} -> {domain_text(result[i])}")


@cli.command()
@click.argument("instance", type=INSTANCE)
@click.argument("tree", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option(
    "--exact/--at-least-one",
    default=True,
    show_default=True,
    help="Leaf certificate: every symmetry class in exactly one leaf, or in at least one",
)
@click.option("--xml", default=None, type=click.Path(dir_okay=False, writable=True, path_type=Path))
@click.pass_context
def audit(ctx: click.Context, instance: Instance, tree: Path, exact: bool, xml: Path | None):
    """Check a tree written by solve --emit-tree: conditions C1 to C4, then the leaf certificate if the tree is complete."""
    try:
        recorded = read_tree(tree, instance)
    except InstanceFormatError as err:
        raise click.UsageError(str(err)) from err
    report = audit_conditions(recorded, None, instance)
    for name, status in report.results.items():
        click.echo(f"{name}: {status}")
    for w in report.witnesses:
        click.echo(f"  {w.condition} at node {w.node} (component {w.component + 1}): {w.detail}")

    certificate = None
    if incomplete := recorded.incomplete_nodes():
        click.echo(f"certificate: skipped, {len(incomplete)} nodes were not explored to the end")
    else:
        try:
            certificate = certify_leaf_uniqueness(recorded, instance, exact)
        except CapExceededError as err:
            click.echo(f"certificate: skipped, {err}")
        else:
            click.echo(f"certificate: {'pass' if certificate.ok else 'fail'}, {certificate}")

    if xml is not None:
        write_xml(audit_element(report, certificate), xml)
    failed = any(status is CheckStatus.FAIL for status in report.results.values())
    if failed or (certificate is not None and not certificate.ok):
        ctx.exit(1)


def _write_instance(inst: Instance, output: Path | None):
    if output is None:
        click.echo(dumps_instance(inst))
    else:
        output.write_text(dumps_instance(inst))
        logging.getLogger(__name__).info(f"Wrote {inst.name} to {output}")


output_option = click.option(
    "-o", "--output", default=None, type=click.Path(dir_okay=False, writable=True, path_type=Path)
)
swaps_option = click.option(
    "--swaps",
    show_default=True,
    default=ColumnSwaps.ADJACENT,
    type=click.Choice(ColumnSwaps, case_sensitive=False),
    help=ColumnSwaps.__doc__,
)


@cli.group()
def generate():
    """Write an instance file of one of the built-in families (to stdout without -o)."""


@generate.command("noise")
@click.option("-p", "--p", "--machines", "p", default=3, show_default=True, type=int)
@click.option("-q", "--q", "--workers", "q", default=5, show_default=True, type=int)
@click.option("-H", "--H", "--hours", "hours", default=480, show_default=True, type=int)
@click.option("--seed", default=0, show_default=True, type=int)
@click.option(
    "--mu-mode",
    show_default=True,
    default=MuMode.DEMAND,
    type=click.Choice(MuMode, case_sensitive=False),
    help=MuMode.__doc__,
)
@click.option("--binary", is_flag=True, help="At most one task of a machine per worker")
@click.option("--sherali-smith", is_flag=True, help="Replace the column symmetry by column ordering rows")
@swaps_option
@output_option
def generate_noise_cmd(
    p: int,
    q: int,
    hours: int,
    seed: int,
    mu_mode: MuMode,
    binary: bool,
    sherali_smith: bool,
    swaps: ColumnSwaps,
    output: Path | None,
):
    """Random noise dosage instance."""
    try:
        inst = generate_noise(NoiseParams(p, q, hours, seed, mu_mode, not binary, swaps))
    except ValueError as err:
        raise click.UsageError(str(err)) from err
    _write_instance(add_sherali_smith(inst) if sherali_smith else inst, output)


@generate.command("covering")
@click.option("-t", "--t", "t", default=2, show_default=True, type=int)
@click.option("-v", "--v", "v", default=4, show_default=True, type=int)
@click.option("-k", "--k", "k", default=3, show_default=True, type=int)
@click.option("--lam", "--lambda", "lam", default=2, show_default=True, type=int)
@output_option
def generate_covering_cmd(t: int, v: int, k: int, lam: int, output: Path | None):
    """Minimum t-(v, k, lambda) covering design."""
    try:
        inst = build_covering(CoveringParams(t, v, k, lam))
    except (ValueError, CapExceededError) as err:
        raise click.UsageError(str(err)) from err
    _write_instance(inst, output)


@generate.command("ndb-demo")
@swaps_option
@output_option
def generate_ndb_demo_cmd(swaps: ColumnSwaps, output: Path | None):
    """The 3 x 5 binary noise dosage toy with optimum 3."""
    _write_instance(ndb_toy(swaps), output)


@generate.command("ndb-shell")
@click.option("-p", "--machines", "p", default=3, show_default=True, type=int)
@click.option("-q", "--workers", "q", default=5, show_default=True, type=int)
@swaps_option
@output_option
def generate_ndb_shell_cmd(p: int, q: int, swaps: ColumnSwaps, output: Path | None):
    """The bare binary p x q matrix with its column symmetry."""
    _write_instance(ndb_shell(p, q, swaps), output)


@cli.command()
@click.argument("manifest", required=False, type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--toy", is_flag=True, help="Run the toy suite shipped with the package")
@click.option("--cache-dir", default=None, type=click.Path(file_okay=False, path_type=Path))
@click.option("--workers", default=None, type=int, help="Worker processes, 1 runs everything in this process")
@click.option("--time-limit", default=None, type=float, help="Override the manifest time limit")
@click.option("--csv", "csv_path", default=None, type=click.Path(dir_okay=False, path_type=Path))
def bench(
    manifest: Path | None,
    toy: bool,
    cache_dir: Path | None,
    workers: int | None,
    time_limit: float | None,
    csv_path: Path | None,
):
    """Run every (instance, config, seed) of MANIFEST, reusing cached runs, and print shifted geometric means."""
    if (manifest is None) == (not toy):
        raise click.UsageError("Give either a MANIFEST or --toy")
    try:
        loaded = toy_suite(cache_dir or Path("bench")) if toy else load_manifest(manifest, cache_dir)
    except InstanceFormatError as err:
        raise click.UsageError(str(err)) from err
    if time_limit is not None:
        loaded = replace(loaded, time_limit=time_limit)

    summary = summarize(run_bench(loaded, workers))
    Console().print(summary_table(summary))
    write_summary_csv(summary, csv_path or loaded.cache_dir / "summary.csv")


if __name__ == "__main__":
    cli()
