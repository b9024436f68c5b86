import logging
from dataclasses import replace
from itertools import combinations

import pytest
from conftest import random_permutation

from symmkit.bnb import SolveConfig, solve
from symmkit.dispatch import ShcMode
from symmkit.exceptions import CapExceededError, DimensionMismatchError
from symmkit.instance import Sense, validate_symmetry
from symmkit.instances import (
    ColumnSwaps,
    CoveringParams,
    MuMode,
    NoiseParams,
    add_sherali_smith,
    build_covering,
    build_ndb,
    build_random_symmetric,
    generate_noise,
    mean_task_time,
    ndb_toy,
    sample_noise_data,
    sherali_smith_shc,
)
from symmkit.oracle import exhaustive_optimum
from symmkit.perms import Permutation


def test_noise_generation_is_seeded():
    params = NoiseParams(3, 4, seed=11)
    assert generate_noise(params) == generate_noise(params)
    assert sample_noise_data(params) != sample_noise_data(NoiseParams(3, 4, seed=12))


def test_noise_data_ranges():
    d, t, alpha = sample_noise_data(NoiseParams(6, 5, seed=2))
    assert all(4 <= x <= 10 for x in d)
    assert all(x >= 0 for x in (*t, *alpha))
    assert all(x.denominator <= 10**6 for x in (*t, *alpha))


def test_mean_task_time_modes_differ():
    demand = sample_noise_data(NoiseParams(3, 4, seed=5))
    balanced = sample_noise_data(NoiseParams(3, 4, seed=5, mu_mode=MuMode.BALANCED))
    assert demand[0] == balanced[0]
    assert demand[1] != balanced[1]


def test_balanced_workers_cover_half_the_machine_time():
    params = NoiseParams(6, 3, hours=8, mu_mode=MuMode.BALANCED)
    d = [4, 5, 6, 7, 8, 10]
    machine_hours = mean_task_time(params, d) * sum(d)
    assert params.q * params.hours / machine_hours == pytest.approx(0.5)
    assert mean_task_time(NoiseParams(6, 3, hours=8), d) == pytest.approx(40 / 16)


def test_noise_instance_shape():
    inst = generate_noise(NoiseParams(3, 4, hours=40, seed=1, swaps=ColumnSwaps.ALL))
    assert inst.n == 13
    assert inst.orbitope.p == 3 and inst.orbitope.q == 4
    assert len(inst.generators) == 6
    assert inst.continuous_vars == (12,)
    assert all(validate_symmetry(inst, g) for g in inst.generators)


def test_ndb_rows():
    inst = ndb_toy()
    senses = [row.sense for row in inst.constraints]
    assert senses.count(Sense.EQ) == 3
    assert senses.count(Sense.LE) == 10
    with pytest.raises(DimensionMismatchError):
        build_ndb(2, 2, [1], [1, 1], [1, 1])


@pytest.mark.parametrize(
    ("params", "n", "rows"),
    [
        ((2, 4, 3, 2), 4, 6),
        ((2, 5, 3, 1), 10, 10),
        ((3, 6, 5, 2), 6, 20),
    ],
)
def test_covering_sizes(params, n, rows):
    inst = build_covering(CoveringParams(*params))
    assert inst.n == n
    assert len(inst.constraints) == rows
    assert all(row.rhs == params[3] for row in inst.constraints)
    assert all(validate_symmetry(inst, g) for g in inst.generators)


def test_covering_cap_and_parameters():
    with pytest.raises(CapExceededError):
        build_covering(CoveringParams(2, 10, 5, 1), cap=100)
    with pytest.raises(ValueError):
        CoveringParams(3, 4, 2, 1)


def _relabeling(params: CoveringParams, labels: list[int]) -> Permutation:
    blocks = list(combinations(range(params.v), params.k))
    index = {block: i for i, block in enumerate(blocks)}
    return Permutation(tuple(index[tuple(sorted(labels[e] for e in block))] for block in blocks))


def test_covering_optimum_survives_relabeling(rng):
    params = CoveringParams(2, 5, 3, 2)
    inst = build_covering(params)
    best = solve(inst, SolveConfig(shc=ShcMode.ORBITAL_LEXRED))
    for _ in range(3):
        rho = _relabeling(params, [int(e) for e in rng.permutation(params.v)])
        assert validate_symmetry(inst, rho)
        relabeled = replace(inst, constraints=tuple(row.permuted(rho) for row in reversed(inst.constraints)))
        assert solve(relabeled).objective == best.objective
        image = rho.apply(best.solution)
        assert inst.is_feasible(image)
        assert inst.objective_value(image) == best.objective


def test_block_swap_that_is_no_relabeling_is_not_a_symmetry():
    inst = build_covering(CoveringParams(2, 5, 3, 1))
    # blocks {1,2,3} and {1,2,4} trade places, {1,3,5} and {1,4,5} stay
    assert not validate_symmetry(inst, Permutation.parse("(1,2)", inst.n))
    assert validate_symmetry(inst, _relabeling(CoveringParams(2, 5, 3, 1), [0, 1, 3, 2, 4]))


def test_sherali_smith_rows_replace_the_group():
    inst = ndb_toy()
    rows = sherali_smith_shc(inst)
    assert len(rows) == inst.orbitope.q - 1
    ordered = add_sherali_smith(inst)
    assert ordered.group.is_trivial
    assert len(ordered.constraints) == len(inst.constraints) + 4
    assert exhaustive_optimum(ordered)[0] == exhaustive_optimum(inst)[0]


def test_sherali_smith_warns_about_large_coefficients(caplog):
    inst = build_ndb(7, 2, [10] * 7, [1] * 7, [1] * 7, 100, integer=True)
    with caplog.at_level(logging.WARNING):
        rows = sherali_smith_shc(inst)
    assert max(c for _, c in rows[0].coefs) == 11**6
    assert "coefficients" in caplog.text


def test_sherali_smith_needs_an_orbitope():
    with pytest.raises(ValueError):
        sherali_smith_shc(build_covering(CoveringParams(2, 4, 3, 2)))


def test_random_symmetric_instances_carry_their_group(rng):
    for _ in range(30):
        n = int(rng.integers(2, 6))
        inst = build_random_symmetric(rng, n, [random_permutation(rng, n)])
        assert all(validate_symmetry(inst, g) for g in inst.group.elements)
