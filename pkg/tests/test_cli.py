import json

import pytest
from click.testing import CliRunner

from symmkit.__main__ import EXIT_LIMIT, cli

MANIFEST = """
seeds = [0]
time_limit = 20

[[instance]]
generator = "covering"
t = 2
v = 4
k = 3
lam = 2

[[config]]
name = "none"
shc = "none"

[[config]]
name = "orbital"
shc = "orbital+lexred"
"""


@pytest.fixture
def runner() -> CliRunner:
    return CliRunner()


def test_solve_the_toy(runner):
    result = runner.invoke(cli, ["solve", "ndb_toy", "--shc", "all"])
    assert result.exit_code == 0, result.output
    assert "optimum: 3" in result.stdout.splitlines()
    assert "status: optimal" in result.stdout


def test_solve_report_is_reproducible(runner):
    first = runner.invoke(cli, ["solve", "ndb_toy", "--shc", "lexred"]).stdout.splitlines()
    second = runner.invoke(cli, ["solve", "ndb_toy", "--shc", "lexred"]).stdout.splitlines()
    assert first[1:] == second[1:]


def test_solve_writes_xml(runner, tmp_path):
    path = tmp_path / "solve.xml"
    result = runner.invoke(cli, ["solve", "ndb_toy", "--xml", str(path)])
    assert result.exit_code == 0
    assert path.read_text().startswith("<?xml")


def test_lexicographic_propagation_of_a_box(runner):
    result = runner.invoke(cli, ["propagate", "{0}; [-1, 0]; {1}; [-1, 1]", "--perm", "(1,3,2,4)"])
    assert result.exit_code == 0, result.output
    assert "x4: [-1, 1] -> {-1}" in result.stdout.splitlines()
    assert "status: reduced" in result.stdout


def test_orbitopal_propagation_of_a_box(runner):
    result = runner.invoke(cli, ["propagate", "{0}; [0, 1]; [0, 1]", "--orbitope", "1x3"])
    assert result.exit_code == 0, result.output
    assert "x2: [0, 1] -> {0}" in result.stdout
    assert "x3: [0, 1] -> {0}" in result.stdout


@pytest.mark.parametrize(
    "args",
    [
        ["propagate", "{0}; [a, 1]"],
        ["propagate", "{0}; [0, 1]", "--orbitope", "2x2"],
        ["propagate", "{0}; [0, 1]", "--perm", "(1,5)"],
    ],
)
def test_propagate_rejects_bad_input(runner, args):
    assert runner.invoke(cli, args).exit_code == 2


def test_audit_a_recorded_tree(runner, tmp_path):
    instance = tmp_path / "shell.json"
    tree = tmp_path / "tree.xml"
    assert runner.invoke(cli, ["generate", "ndb-shell", "-p", "2", "-q", "2", "-o", str(instance)]).exit_code == 0

    result = runner.invoke(
        cli, ["solve", str(instance), "--shc", "lexred", "--no-bound-pruning", "--emit-tree", str(tree)]
    )
    assert result.exit_code == 0, result.output
    result = runner.invoke(cli, ["audit", str(instance), str(tree)])
    assert result.exit_code == 0, result.output
    assert "C1: pass" in result.stdout
    assert "certificate: pass" in result.stdout

    # without symmetry handling every symmetry class of size two is held by two leaves
    runner.invoke(cli, ["solve", str(instance), "--no-bound-pruning", "--emit-tree", str(tree)])
    assert runner.invoke(cli, ["audit", str(instance), str(tree)]).exit_code == 1
    assert runner.invoke(cli, ["audit", str(instance), str(tree), "--at-least-one"]).exit_code == 0


def test_generate_to_stdout(runner):
    result = runner.invoke(cli, ["generate", "covering", "-t", "2", "-v", "4", "-k", "3", "--lam", "2"])
    assert result.exit_code == 0, result.output
    doc = json.loads(result.stdout)
    assert len(doc["vars"]) == 4


def test_generate_noise_is_seeded(runner, tmp_path):
    paths = [tmp_path / "a.json", tmp_path / "b.json"]
    for path in paths:
        result = runner.invoke(cli, ["generate", "noise", "-p", "2", "-q", "3", "--seed", "4", "-o", str(path)])
        assert result.exit_code == 0, result.output
    assert paths[0].read_text() == paths[1].read_text()


def test_generate_noise_flag_spellings(runner):
    short = runner.invoke(cli, ["generate", "noise", "-p", "2", "-q", "3", "-H", "40", "--seed", "1"])
    long = runner.invoke(cli, ["generate", "noise", "--p", "2", "--q", "3", "--H", "40", "--seed", "1"])
    assert short.exit_code == long.exit_code == 0, long.output
    assert short.stdout == long.stdout
    balanced = runner.invoke(
        cli, ["generate", "noise", "--p", "2", "--q", "3", "--H", "40", "--seed", "1", "--mu-mode", "balanced"]
    )
    assert balanced.exit_code == 0, balanced.output
    assert balanced.stdout != long.stdout


def test_generate_covering_flag_spellings(runner):
    short = runner.invoke(cli, ["generate", "covering", "-t", "2", "-v", "4", "-k", "3", "--lam", "2"])
    long = runner.invoke(cli, ["generate", "covering", "--t", "2", "--v", "4", "--k", "3", "--lambda", "2"])
    assert long.exit_code == 0, long.output
    assert short.stdout == long.stdout


def test_unreadable_instance_exits_2(runner, tmp_path):
    path = tmp_path / "broken.json"
    path.write_text("{")
    assert runner.invoke(cli, ["solve", str(path)]).exit_code == 2
    assert runner.invoke(cli, ["solve", str(tmp_path / "missing.json")]).exit_code == 2


def test_node_limit_exits_3(runner):
    result = runner.invoke(cli, ["solve", "ndb_toy", "--node-limit", "2"])
    assert result.exit_code == EXIT_LIMIT
    assert "status: limit" in result.stdout


def test_bench_a_manifest(runner, tmp_path):
    manifest = tmp_path / "bench.toml"
    manifest.write_text(MANIFEST)
    csv = tmp_path / "summary.csv"
    args = ["bench", str(manifest), "--cache-dir", str(tmp_path / "cache"), "--workers", "1", "--csv", str(csv)]
    result = runner.invoke(cli, args)
    assert result.exit_code == 0, result.output
    assert csv.exists()
    assert len(list((tmp_path / "cache").rglob("*.nc"))) == 2


def test_bench_needs_a_manifest_or_the_toy_suite(runner):
    assert runner.invoke(cli, ["bench"]).exit_code == 2
