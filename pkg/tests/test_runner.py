"""Task runner: sequential and process-pool execution."""

from __future__ import annotations

import operator

import pytest

from policy_tighten.config import WORKERS_ENV_VAR, parse_kinds
from policy_tighten.core.runner import RunError, run_tasks, worker_count
from policy_tighten.errors import ConfigError
from policy_tighten.tighten.driver import rule_seed

TASKS = [(0, "a"), (0, "b"), (1, "a"), (5, "z")]


def test_sequential_keeps_order():
    assert run_tasks(rule_seed, TASKS) == [rule_seed(*t) for t in TASKS]


def test_parallel_matches_sequential():
    assert run_tasks(rule_seed, TASKS, parallel=True, workers=2) == run_tasks(rule_seed, TASKS)


def test_sequential_errors_propagate():
    with pytest.raises(ConfigError):
        run_tasks(parse_kinds, [("all",), ("bogus",)])


def test_parallel_errors_name_the_task():
    with pytest.raises(RunError) as excinfo:
        run_tasks(parse_kinds, [("all",), ("bogus",)], labels=["ok", "bad"],
                  parallel=True, workers=2)
    assert excinfo.value.task == "bad"
    assert excinfo.value.exit_code == 1
    assert "unknown candidate kind" in str(excinfo.value)


def test_parallel_unexpected_exception():
    with pytest.raises(RunError, match="ZeroDivisionError"):
        run_tasks(operator.truediv, [(1, 1), (1, 0)], parallel=True, workers=2)


def test_single_task_runs_in_process(mocker):
    pool = mocker.patch("policy_tighten.core.runner.ProcessPoolExecutor")
    assert run_tasks(rule_seed, [(0, "a")], parallel=True) == [rule_seed(0, "a")]
    pool.assert_not_called()


@pytest.mark.parametrize("env, expected", [
    ({WORKERS_ENV_VAR: "3"}, 3),
    ({WORKERS_ENV_VAR: " 1 "}, 1),
])
def test_worker_count_from_env(env, expected):
    assert worker_count(env) == expected


def test_worker_count_defaults_to_cpus(mocker):
    mocker.patch("policy_tighten.core.runner.os.cpu_count", return_value=6)
    assert worker_count({}) == 6
    assert worker_count({WORKERS_ENV_VAR: ""}) == 6


@pytest.mark.parametrize("raw", ["zero", "0", "-2"])
def test_worker_count_rejects(raw):
    with pytest.raises(ConfigError, match=WORKERS_ENV_VAR):
        worker_count({WORKERS_ENV_VAR: raw})
