"""Command-line surface."""

from __future__ import annotations

import json

import pytest
from click.testing import CliRunner

from policy_tighten import __version__
from policy_tighten.cedar.parser import parse_policy
from policy_tighten.cedar.printer import format_expr
from policy_tighten.cli import _int_list, main
from policy_tighten.errors import ConfigError

GUARDED_AREA = "principal has pcMember && principal.pcMember == resource.area"
CROSS_AREA = '(User::"pc0", Action::"Read", Paper::"paper1")'


@pytest.fixture
def runner():
    return CliRunner()


@pytest.fixture
def demo_args(demo_dir):
    return [
        "--schema", str(demo_dir / "schema.cedarschema"),
        "--entities", str(demo_dir / "entities.yaml"),
        "--log", str(demo_dir / "log.jsonl"),
    ]


@pytest.fixture
def policy_arg(demo_dir):
    return ["--policy", str(demo_dir / "policy.cedar")]


@pytest.fixture
def bad_log(demo_dir, tmp_path):
    path = tmp_path / "log.jsonl"
    extra = ('{"principal": "User::\\"pc0\\"", "action": "Read", '
             '"resource": "Paper::\\"paper1\\"", "decision": "denied"}\n')
    path.write_text((demo_dir / "log.jsonl").read_text() + extra)
    return path


def test_version(runner):
    result = runner.invoke(main, ["--version"])
    assert result.exit_code == 0
    assert __version__ in result.output


def test_tighten_writes_policy_and_report(runner, demo_args, policy_arg, demo_schema, tmp_path):
    out = tmp_path / "out" / "policy.cedar"
    report = tmp_path / "report.json"
    result = runner.invoke(main, ["tighten", *policy_arg, *demo_args, "--out", str(out),
                                  "--report", str(report), "--omit-timing", "--no-color"])
    assert result.exit_code == 0, result.output
    assert "TIGHTENED" in result.output

    tightened = parse_policy(out.read_text(), demo_schema)
    assert format_expr(tightened.get("pc-read").body) == GUARDED_AREA

    data = json.loads(report.read_text())
    assert data["config"] == {"max_failures": 2, "targets_per_iteration": 3,
                              "chain_depth": 2, "seed": 0}
    assert data["rules"][0]["termination"] == "popEmpty"
    assert data["changes"][0]["added_conjuncts"] == ["principal.pcMember == resource.area"]
    assert "wall_time_ms" not in data["summary"]

    check = runner.invoke(main, ["check", "--policy", str(out), *demo_args])
    assert check.exit_code == 0
    assert "Consistent" in check.output


def test_tighten_to_stdout(runner, demo_args, policy_arg):
    result = runner.invoke(main, ["-q", "tighten", *policy_arg, *demo_args])
    assert result.exit_code == 0
    assert '@id("pc-read")' in result.output
    assert GUARDED_AREA in result.output


def test_tighten_rejects_inconsistent_log(runner, demo_dir, policy_arg, bad_log):
    args = ["--schema", str(demo_dir / "schema.cedarschema"),
            "--entities", str(demo_dir / "entities.yaml"), "--log", str(bad_log)]
    result = runner.invoke(main, ["tighten", *policy_arg, *args])
    assert result.exit_code == 2
    assert f"{CROSS_AREA}: logged denied, policy says allowed" in result.output

    allowed = runner.invoke(main, ["tighten", *policy_arg, *args, "--allow-inconsistent",
                                   "--out", str(bad_log.parent / "p.cedar")])
    assert allowed.exit_code == 0


def test_check_json_reports_violations(runner, demo_dir, policy_arg, bad_log):
    result = runner.invoke(main, [
        "check", *policy_arg, "-o", "json",
        "--schema", str(demo_dir / "schema.cedarschema"),
        "--entities", str(demo_dir / "entities.yaml"), "--log", str(bad_log),
    ])
    assert result.exit_code == 2
    assert '"consistent": false' in result.output


def test_missing_option_is_an_input_error(runner, demo_dir):
    result = runner.invoke(main, ["tighten", "--schema", str(demo_dir / "schema.cedarschema")])
    assert result.exit_code == 1
    assert "Missing option" in result.output


def test_malformed_input(runner, demo_dir, policy_arg, tmp_path):
    log = tmp_path / "broken.jsonl"
    log.write_text("{not json\n")
    result = runner.invoke(main, [
        "tighten", *policy_arg,
        "--schema", str(demo_dir / "schema.cedarschema"),
        "--entities", str(demo_dir / "entities.yaml"), "--log", str(log),
    ])
    assert result.exit_code == 1
    assert "Error:" in result.output
    assert "broken.jsonl:1" in result.output


def test_unknown_kind(runner, demo_args, policy_arg):
    result = runner.invoke(main, ["tighten", *policy_arg, *demo_args, "--kinds", "regex"])
    assert result.exit_code == 1
    assert "unknown candidate kind" in result.output


def test_export_sygus(runner, demo_args, policy_arg, tmp_path):
    out = tmp_path / "pc-read.sl"
    result = runner.invoke(main, ["export-sygus", *policy_arg, *demo_args,
                                  "--rule", "pc-read", "--out", str(out)])
    assert result.exit_code == 0, result.output
    text = out.read_text()
    assert "(set-logic ALL)" in text
    assert text.rstrip().endswith("(check-synth)")


def test_export_sygus_unknown_rule(runner, demo_args, policy_arg):
    result = runner.invoke(main, ["export-sygus", *policy_arg, *demo_args, "--rule", "nope"])
    assert result.exit_code == 1
    assert "no rule with id 'nope'" in result.output


def test_enumerate_pop(runner, demo_args, policy_arg):
    result = runner.invoke(main, ["enumerate-pop", *policy_arg, *demo_args, "--no-color"])
    assert result.exit_code == 0
    assert "rule pc-read: 48 potential over-privilege(s)" in result.output
    assert CROSS_AREA in result.output


def test_enumerate_pop_cap(runner, demo_args, policy_arg):
    result = runner.invoke(main, ["enumerate-pop", *policy_arg, *demo_args, "--pop-cap", "10"])
    assert result.exit_code == 3


def test_dump_candidates(runner, demo_dir, policy_arg):
    result = runner.invoke(main, [
        "dump-candidates", *policy_arg, "--rule", "pc-read",
        "--schema", str(demo_dir / "schema.cedarschema"),
        "--entities", str(demo_dir / "entities.yaml"),
    ])
    assert result.exit_code == 0
    assert any(line.startswith(GUARDED_AREA + "  // equality")
               for line in result.output.splitlines())


def test_metrics(runner, demo_dir, demo_args, policy_arg, tmp_path):
    star = tmp_path / "star.cedar"
    runner.invoke(main, ["tighten", *policy_arg, *demo_args, "--out", str(star)])
    result = runner.invoke(main, [
        "metrics", "--init", str(demo_dir / "policy.cedar"), "--star", str(star),
        "--tight", str(star), *demo_args, "-o", "json",
    ])
    assert result.exit_code == 0
    data = json.loads(result.output[result.output.index("{"):])
    assert data["policy"]["over_privilege_remaining"] == 0.0
    assert data["policy"]["over_privileges"] == 48


def test_gen(runner, tmp_path):
    result = runner.invoke(main, ["-q", "gen", "--study", "classroom", "--sizes", "1,2",
                                  "--density", "50", "--outdir", str(tmp_path)])
    assert result.exit_code == 0, result.output
    assert (tmp_path / "size-1" / "log.jsonl").is_file()
    assert (tmp_path / "size-2" / "entities.yaml").is_file()
    assert (tmp_path / "policy-init.cedar").is_file()


def test_gen_unknown_study(runner, tmp_path):
    result = runner.invoke(main, ["gen", "--study", "nope", "--outdir", str(tmp_path)])
    assert result.exit_code == 1
    assert "unknown study" in result.output


def test_study(runner, tmp_path):
    out = tmp_path / "results.csv"
    result = runner.invoke(main, ["-q", "study", "--study", "classroom", "--seeds", "0",
                                  "--sizes", "1", "--densities", "100", "--omit-timing",
                                  "--out", str(out)])
    assert result.exit_code == 0, result.output
    lines = out.read_text().splitlines()
    assert lines[0].startswith("seed,size,density,rule_id,exactRecovery")
    assert len(lines) == 1 + 5


def test_study_passes_parallel_flag(mocker, runner):
    run = mocker.patch("policy_tighten.cli.run_study", return_value=[])
    result = runner.invoke(main, ["study", "--study", "classroom", "--seeds", "0-2",
                                  "--densities", "50,100", "--parallel"])
    assert result.exit_code == 0
    spec, seeds, sizes, densities, cfg, repeats = run.call_args.args
    assert seeds == [0, 1, 2]
    assert sizes == [5, 10, 20]
    assert densities == [50, 100]
    assert cfg.parallel is True


@pytest.mark.parametrize("text, expected", [
    ("5,10,20", [5, 10, 20]),
    ("0-3", [0, 1, 2, 3]),
    ("30-100/10", [30, 40, 50, 60, 70, 80, 90, 100]),
    ("1, 4-5", [1, 4, 5]),
])
def test_int_list(text, expected):
    assert _int_list(text, "size") == expected


@pytest.mark.parametrize("text", ["", "a", "1-b", "0-10/0"])
def test_int_list_rejects(text):
    with pytest.raises(ConfigError):
        _int_list(text, "size")
