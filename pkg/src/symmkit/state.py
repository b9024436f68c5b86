"""Functions for reading and writing the bench result cache.

Every (instance, config, seed) run of a bench manifest gets its own small netCDF file in the cache directory,
so an interrupted bench picks up where it stopped.
Anything that reads or writes a cached run must go through the functions here.
"""

from collections.abc import Callable, Mapping, Sequence
from logging import getLogger
from pathlib import Path
from typing import Any

import numpy as np
import xarray as xr

BENCH_VARNAME = "symmkit_run"
"""Variable name used within the run netCDF files as an attribute key-value container.
The run results live on its attributes instead of being global attributes of the file."""

REDUCTION_PREFIX = "reductions_"

logger = getLogger(__name__)

type RunRecord = dict[str, Any]
"""Result of one run: ``status``, ``objective`` (exact text, empty if none), ``nodes``, ``wall_time``,
``symmetry_time``, ``solved`` and one ``reductions_<source>`` count per reduction source."""


def get_run_path(cache_dir: Path, instance: str, config: str, seed: int) -> Path:
    """Where the cached result of one run is kept, creating the cache directory if necessary"""
    if not cache_dir.exists():
        logger.debug(f"Making bench cache directory {cache_dir}")
    cache_dir.mkdir(exist_ok=True, parents=True)
    return cache_dir / f"{instance}__{config}__s{seed}.nc"


def write_ds_run(ds: xr.Dataset) -> None:
    """Serialize ``ds`` to the path on its ``__path`` attribute, which is itself not written"""
    path = ds.attrs.pop("__path")
    ds.to_netcdf(path, mode="w")
    logger.debug(f"Run saved to {path}")
    ds.attrs["__path"] = path


def _to_attrs(record: Mapping[str, Any]) -> dict[str, Any]:
    """netCDF has neither booleans nor None, ``solved`` is stored as 1 or 0 and a missing objective as ``""``"""
    attrs = {}
    for key, value in record.items():
        if isinstance(value, bool):
            value = np.int8(value)
        elif value is None:
            value = ""
        attrs[key] = value
    return attrs


def _from_attrs(attrs: Mapping[str, Any]) -> RunRecord:
    record: RunRecord = {}
    for key, value in attrs.items():
        if isinstance(value, np.generic):
            value = value.item()
        record[key] = value
    record["solved"] = bool(record.get("solved", 0))
    record["nodes"] = int(record.get("nodes", 0))
    return record


def read_run(path: Path) -> RunRecord | None:
    """The cached record at ``path``, None if there is none or it was left incomplete"""
    if not path.exists():
        return None
    with xr.open_dataset(path) as ds:
        if BENCH_VARNAME not in ds or "status" not in ds[BENCH_VARNAME].attrs:
            logger.debug(f"{path} has no finished run, ignoring it")
            return None
        return _from_attrs(ds[BENCH_VARNAME].attrs)


def get_or_run(path: Path, func: Callable[[], RunRecord], **labels: str | int) -> RunRecord:
    """Get a run record from the cache, or from the result of ``func`` which is then written to the cache

    ``labels`` (instance, config and seed names) are stored alongside as global attributes.
    """
    if (record := read_run(path)) is not None:
        logger.debug(f"{path.name}: found cached result {record['status']}, skipping run")
        return record

    logger.debug(f"{path.name}: no cached result, running")
    record = func()
    ds = xr.Dataset(attrs=dict(labels))
    ds[BENCH_VARNAME] = xr.DataArray()
    ds[BENCH_VARNAME].attrs.update(_to_attrs(record))
    ds.attrs["__path"] = path
    write_ds_run(ds)
    return record


def runs_dataset(
    records: Mapping[tuple[str, str, int], RunRecord],
    instances: Sequence[str],
    configs: Sequence[str],
    seeds: Sequence[int],
) -> xr.Dataset:
    """Gather run records into arrays over the ``instance``, ``config`` and ``seed`` dimensions

    Missing runs are NaN in the float variables and unsolved in ``solved``.
    """
    shape = (len(instances), len(configs), len(seeds))
    wall = np.full(shape, np.nan)
    symmetry = np.full(shape, np.nan)
    nodes = np.full(shape, np.nan)
    solved = np.zeros(shape, dtype=np.int8)
    for (instance, config, seed), record in records.items():
        at = (instances.index(instance), configs.index(config), seeds.index(seed))
        wall[at] = record["wall_time"]
        symmetry[at] = record["symmetry_time"]
        nodes[at] = record["nodes"]
        solved[at] = record["solved"]
    dims = ("instance", "config", "seed")
    return xr.Dataset(
        {
            "wall_time": (dims, wall, {"units": "s"}),
            "symmetry_time": (dims, symmetry, {"units": "s"}),
            "nodes": (dims, nodes),
            "solved": (dims, solved),
        },
        coords={"instance": list(instances), "config": list(configs), "seed": list(seeds)},
    )
