"""Benchmark runs over a manifest of instances, solver configurations and seeds.

A manifest is a TOML document::

    time_limit = 60
    seeds = [0, 1, 2]

    [[instance]]
    generator = "noise"
    p = 3
    q = 5
    seed = 7

    [[instance]]
    path = "instances/cov2_5_3_2.json"

    [[config]]
    name = "orbitope"
    shc = "orbitope"
    placement = "median"

Every (instance, config, seed) run is cached with :py:func:`symmkit.state.get_or_run`, so rerunning a manifest
only solves what is missing.
Runs that hit the time (or node) limit count as unsolved and are reported at the time limit.

Times are summarized by the shifted geometric mean ``prod(t_i + 1)^(1/n) - 1`` over three instance subsets:
all instances, those solved by at least one configuration and those solved by every configuration.
"""

import tomllib
from collections.abc import Mapping, Sequence
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from importlib.resources import read_text
from logging import getLogger
from pathlib import Path
from typing import Any

import numpy as np
import xarray as xr
from rich.table import Table

import symmkit
from symmkit.bnb import BranchingRule, SolveConfig, SolveStatus, SourceTag, solve
from symmkit.dispatch import LexredScope, ShcMode
from symmkit.exceptions import InstanceFormatError, LimitReachedError
from symmkit.instance import Instance, read_instance
from symmkit.instances import (
    ColumnSwaps,
    CoveringParams,
    MuMode,
    NoiseParams,
    add_sherali_smith,
    build_covering,
    build_ndb,
    generate_noise,
    ndb_shell,
    ndb_toy,
)
from symmkit.prehandle import Placement, PrehandlePolicy
from symmkit.reporting import exact
from symmkit.state import RunRecord, get_or_run, get_run_path, runs_dataset

logger = getLogger(__name__)

DEFAULT_TIME_LIMIT = 60.0
DEFAULT_SEEDS = (0, 1, 2)
SHIFT = 1.0
SUBSETS = ("all", "solved-by-some", "solved-by-all")

GENERATORS = ("noise", "covering", "ndb", "ndb-toy", "ndb-shell")


def shifted_geomean(values: Sequence[float] | np.ndarray, shift: float = SHIFT) -> float:
    """``prod(v + shift)^(1/n) - shift``, NaN for no values

    >>> round(shifted_geomean([1, 1, 1]), 12), round(shifted_geomean([0, 3]), 12)
    (1.0, 1.0)
    """
    arr = np.asarray(values, dtype=float)
    if arr.size == 0:
        return float("nan")
    return float(np.exp(np.mean(np.log(arr + shift))) - shift)


@dataclass(frozen=True)
class BenchConfig:
    name: str
    solve: SolveConfig


@dataclass(frozen=True)
class Manifest:
    instances: tuple[Instance, ...]
    configs: tuple[BenchConfig, ...]
    seeds: tuple[int, ...] = DEFAULT_SEEDS
    time_limit: float = DEFAULT_TIME_LIMIT
    cache_dir: Path = field(default_factory=lambda: Path("bench"))

    @property
    def instance_names(self) -> list[str]:
        return [inst.name for inst in self.instances]

    @property
    def config_names(self) -> list[str]:
        return [cfg.name for cfg in self.configs]


def _enum[T](kind: type[T], value: Any, key: str) -> T:
    try:
        return kind(str(value).lower())  # type: ignore[call-arg]
    except ValueError as err:
        raise InstanceFormatError(f"Invalid {key} {value!r}") from err


def config_from_table(table: Mapping[str, Any]) -> BenchConfig:
    """A named :py:class:`~symmkit.bnb.SolveConfig` from a ``[[config]]`` table, options as on the command line"""
    table = dict(table)
    try:
        name = str(table.pop("name"))
    except KeyError as err:
        raise InstanceFormatError(f"Config without a name: {table}") from err
    options: dict[str, Any] = {}
    for key, value in table.items():
        match key.replace("-", "_"):
            case "shc":
                options["shc"] = _enum(ShcMode, value, key)
            case "prehandle":
                options["prehandle"] = _enum(PrehandlePolicy, value, key)
            case "placement":
                options["placement"] = _enum(Placement, value, key)
            case "lexred_scope":
                options["lexred_scope"] = _enum(LexredScope, value, key)
            case "branching":
                options["branching"] = _enum(BranchingRule, value, key)
            case "bound_pruning" | "isoprune" as flag:
                options[flag] = bool(value)
            case "node_limit" | "depth_limit" as limit:
                options[limit] = int(value)
            case _:
                raise InstanceFormatError(f"Unknown option {key!r} in config {name}")
    return BenchConfig(name, SolveConfig(**options))


def build_generated(generator: str, params: Mapping[str, Any]) -> Instance:
    """Build an instance from a generator name and its parameters, as found in an ``[[instance]]`` table"""
    params = dict(params)
    swaps = _enum(ColumnSwaps, params.pop("swaps", ColumnSwaps.ADJACENT), "swaps")
    try:
        match generator:
            case "noise":
                mu_mode = _enum(MuMode, params.pop("mu_mode", MuMode.DEMAND), "mu_mode")
                return generate_noise(NoiseParams(**params, mu_mode=mu_mode, swaps=swaps))
            case "covering":
                return build_covering(CoveringParams(**params))
            case "ndb":
                return build_ndb(**params, swaps=swaps)
            case "ndb-toy":
                return ndb_toy(swaps)
            case "ndb-shell":
                return ndb_shell(**params, swaps=swaps)
    except TypeError as err:
        raise InstanceFormatError(f"Bad parameters for the {generator} generator: {err}") from err
    raise InstanceFormatError(f"Unknown generator {generator!r}, expected one of {', '.join(GENERATORS)}")


def instance_from_table(table: Mapping[str, Any], base_dir: Path) -> Instance:
    """The instance of an ``[[instance]]`` table: a ``path`` relative to the manifest, or a ``generator``

    ``name`` renames the instance and ``sherali_smith = true`` swaps its symmetry group for column ordering rows.
    """
    table = dict(table)
    name = table.pop("name", None)
    sherali = bool(table.pop("sherali_smith", False))
    if "path" in table:
        path = base_dir / table.pop("path")
        if not path.exists():
            raise InstanceFormatError(f"Missing instance {path}")
        inst = read_instance(path)
    elif "generator" in table:
        inst = build_generated(table.pop("generator"), table)
    else:
        raise InstanceFormatError(f"Instance table needs a path or a generator: {table}")
    if sherali:
        inst = add_sherali_smith(inst)
        name = name or f"{inst.name}_ss"
    return replace(inst, name=name) if name else inst


def manifest_from_dict(doc: Mapping[str, Any], base_dir: Path, cache_dir: Path | None = None) -> Manifest:
    instances = tuple(instance_from_table(table, base_dir) for table in doc.get("instance", []))
    configs = tuple(config_from_table(table) for table in doc.get("config", []))
    if not instances or not configs:
        raise InstanceFormatError("A manifest needs at least one [[instance]] and one [[config]]")
    for kind, names in (("instance", [i.name for i in instances]), ("config", [c.name for c in configs])):
        if len(set(names)) != len(names):
            raise InstanceFormatError(f"Duplicate {kind} names in manifest: {names}")
    return Manifest(
        instances,
        configs,
        tuple(int(s) for s in doc.get("seeds", DEFAULT_SEEDS)),
        float(doc.get("time_limit", DEFAULT_TIME_LIMIT)),
        cache_dir or base_dir / "bench",
    )


def load_manifest(path: Path, cache_dir: Path | None = None) -> Manifest:
    try:
        doc = tomllib.loads(Path(path).read_text())
    except (OSError, tomllib.TOMLDecodeError) as err:
        raise InstanceFormatError(f"Could not read manifest {path}: {err}") from err
    return manifest_from_dict(doc, Path(path).parent, cache_dir)


def toy_suite(cache_dir: Path = Path("bench")) -> Manifest:
    """The toy suite shipped with the package: noise dosage toys and small covering designs"""
    doc = tomllib.loads(read_text(symmkit, "data/toy_suite.toml"))
    return manifest_from_dict(doc, Path.cwd(), cache_dir)


@dataclass(frozen=True)
class BenchTask:
    instance: Instance
    config: BenchConfig
    seed: int
    time_limit: float
    path: Path


def _solve_record(task: BenchTask) -> RunRecord:
    cfg = replace(task.config.solve, seed=task.seed, time_limit=task.time_limit)
    try:
        result = solve(task.instance, cfg)
    except LimitReachedError as err:
        result = err.result
    solved = result.status in (SolveStatus.OPTIMAL, SolveStatus.INFEASIBLE)
    record: RunRecord = {
        "status": str(result.status),
        "objective": exact(result.objective) if result.objective is not None else None,
        "nodes": result.nodes,
        "wall_time": result.wall_time if solved else task.time_limit,
        "symmetry_time": result.symmetry_time,
        "solved": solved,
    }
    record.update({f"reductions_{tag}": result.reductions.get(tag, 0) for tag in SourceTag})
    return record


def run_task(task: BenchTask) -> RunRecord:
    """Solve one (instance, config, seed) triple unless its result is cached, runs in a worker process"""
    return get_or_run(
        task.path,
        lambda: _solve_record(task),
        instance=task.instance.name,
        config=task.config.name,
        seed=task.seed,
    )


def tasks(manifest: Manifest) -> list[BenchTask]:
    """All runs of a manifest, in manifest order: instances, then configs, then seeds"""
    return [
        BenchTask(inst, cfg, seed, manifest.time_limit, get_run_path(manifest.cache_dir, inst.name, cfg.name, seed))
        for inst in manifest.instances
        for cfg in manifest.configs
        for seed in manifest.seeds
    ]


def run_bench(manifest: Manifest, workers: int | None = None) -> xr.Dataset:
    """Run (or read back) every run of ``manifest`` and gather the results, see :py:func:`symmkit.state.runs_dataset`

    With ``workers == 1`` everything runs in this process, otherwise in a process pool; the results are always
    collected in manifest order.
    """
    todo = tasks(manifest)
    logger.info(f"Bench of {len(todo)} runs, cache in {manifest.cache_dir}")
    if workers == 1:
        records = [run_task(task) for task in todo]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(run_task, todo))
    for task, record in zip(todo, records, strict=True):
        logger.debug(f"{task.instance.name} {task.config.name} s{task.seed}: {record['status']}")
    keyed = {(t.instance.name, t.config.name, t.seed): r for t, r in zip(todo, records, strict=True)}
    ds = runs_dataset(keyed, manifest.instance_names, manifest.config_names, list(manifest.seeds))
    ds.attrs["time_limit"] = manifest.time_limit
    return ds


def summarize(ds: xr.Dataset) -> xr.Dataset:
    """Shifted geometric means per subset and configuration

    The time of an instance under a configuration is the mean over its seeds; an instance counts as solved by
    a configuration when every seed solved it.
    """
    time = ds.wall_time.mean("seed")
    symmetry = ds.symmetry_time.mean("seed")
    solved = (ds.solved == 1).all("seed")
    masks = {
        "all": xr.ones_like(solved.any("config")),
        "solved-by-some": solved.any("config"),
        "solved-by-all": solved.all("config"),
    }
    configs = list(ds.config.values)
    shape = (len(SUBSETS), len(configs))
    count = np.zeros(shape, dtype=np.int64)
    n_solved = np.zeros(shape, dtype=np.int64)
    time_mean = np.full(shape, np.nan)
    symmetry_mean = np.full(shape, np.nan)
    for a, subset in enumerate(SUBSETS):
        mask = masks[subset].values.astype(bool)
        for b, config in enumerate(configs):
            count[a, b] = mask.sum()
            n_solved[a, b] = solved.sel(config=config).values[mask].sum()
            time_mean[a, b] = shifted_geomean(time.sel(config=config).values[mask])
            symmetry_mean[a, b] = shifted_geomean(symmetry.sel(config=config).values[mask])
    dims = ("subset", "config")
    return xr.Dataset(
        {
            "instances": (dims, count),
            "solved": (dims, n_solved),
            "time": (dims, time_mean, {"units": "s", "shift": SHIFT}),
            "symmetry_time": (dims, symmetry_mean, {"units": "s", "shift": SHIFT}),
        },
        coords={"subset": list(SUBSETS), "config": configs},
        attrs=dict(ds.attrs),
    )


def summary_table(summary: xr.Dataset) -> Table:
    limit = summary.attrs.get("time_limit")
    title = f"shifted geometric means (time limit {limit:g}s)" if limit is not None else "shifted geometric means"
    table = Table(title=title)
    for column in ("subset", "config", "instances", "solved", "time [s]", "symmetry [s]"):
        table.add_column(column, justify="left" if column in ("subset", "config") else "right")
    for subset in summary.subset.values:
        for config in summary.config.values:
            row = summary.sel(subset=subset, config=config)
            table.add_row(
                str(subset),
                str(config),
                str(int(row.instances)),
                str(int(row.solved)),
                f"{float(row.time):.2f}",
                f"{float(row.symmetry_time):.2f}",
            )
    return table


def write_summary_csv(summary: xr.Dataset, path: Path):
    summary.to_dataframe().to_csv(path, float_format="%.6f")
    logger.info(f"Bench summary written to {path}")
