"""Case studies: recovery of the loosened rules and the results table."""

from __future__ import annotations

import statistics

import pytest

from policy_tighten.analysis.request_space import policy_denotation
from policy_tighten.config import STUDY_COLUMNS, WORKERS_ENV_VAR, TightenConfig
from policy_tighten.errors import ConfigError
from policy_tighten.evaluation.generator import generate_family
from policy_tighten.evaluation.spec import load_study, parse_study, shipped_studies
from policy_tighten.evaluation.study import POLICY_ROW, run_cell, run_study
from policy_tighten.logs.access_log import check_consistency
from policy_tighten.output.table import render_table
from policy_tighten.tighten.driver import restrict

DENSITIES = list(range(30, 101, 10))
# adjacent density steps may rise by this much from seed noise
TREND_TOLERANCE = 0.05


def by_rule(rows):
    return {row.rule_id: row for row in rows}


def test_shipped_studies():
    assert shipped_studies() == ["classroom", "conference"]
    with pytest.raises(ConfigError, match="unknown study"):
        load_study("nope")


def test_classroom_recovers_loosened_rules(classroom):
    rows = by_rule(run_cell(classroom, 0, [5], 100, TightenConfig(), 1))
    assert set(rows) == {"teacher-edit", "student-view", "teacher-grade", "course-view",
                         POLICY_ROW}
    for rule_id in ("teacher-edit", "student-view", "teacher-grade"):
        assert rows[rule_id].loosened
        assert rows[rule_id].exact_recovery, rule_id
        assert rows[rule_id].over_priv_remaining == 0.0
        assert rows[rule_id].intended_removed == 0.0
    assert not rows["course-view"].loosened


def test_conference_recovers_single_conjunct_rules(conference):
    rows = by_rule(run_cell(conference, 0, [5], 100, TightenConfig(), 1))
    for rule_id in ("paper-read-pc", "review-read-author", "review-write"):
        assert rows[rule_id].exact_recovery, rule_id
    # a full log never costs intended privileges
    assert rows[POLICY_ROW].intended_removed == 0.0


def test_row_order(classroom):
    rows = run_study(classroom, seeds=[0, 1], sizes=[1, 2], densities=[100, 50])
    keys = [(r.seed, r.density, r.size) for r in rows]
    expected = [(s, d, z) for s in (0, 1) for d in (100, 50) for z in (1, 2)]
    per_cell = len(classroom.loose.permits()) + 1
    assert keys == [k for k in expected for _ in range(per_cell)]


def test_repeats_must_be_positive(classroom):
    with pytest.raises(ConfigError, match="repeats"):
        run_study(classroom, [0], [1], [100], repeats=0)


def test_table(classroom):
    rows = run_cell(classroom, 2, [1], 80, TightenConfig(), 2)
    text = render_table(rows, timing=False)
    lines = text.splitlines()
    assert lines[0] == ",".join(STUDY_COLUMNS)
    assert len(lines) == len(rows) + 1
    assert all(line.endswith(",") for line in lines[1:])
    assert render_table(rows) != text


def test_weakening_is_checked(classroom):
    text = f"""
name: broken
schema: |
{_indent(classroom.schema_text)}
tight_policy: |
  @id("r") permit (principal is Teacher, action == Action::"ViewCourse", resource)
  when {{ resource.teacher == principal }};
loose_policy: |
  @id("r") permit (principal is Teacher, action == Action::"ViewCourse", resource)
  when {{ resource.teacher != principal }};
populations: []
"""
    with pytest.raises(ConfigError, match="not a weakening"):
        parse_study(text)


def _indent(text):
    return "\n".join("  " + line for line in text.splitlines())



def test_parallel_table_matches_sequential(monkeypatch, classroom):
    monkeypatch.setenv(WORKERS_ENV_VAR, "2")
    args = dict(seeds=[0, 1], sizes=[1, 2], densities=[100, 50])
    sequential = run_study(classroom, cfg=TightenConfig(parallel=False), **args)
    parallel = run_study(classroom, cfg=TightenConfig(parallel=True), **args)
    assert render_table(parallel, timing=False) == render_table(sequential, timing=False)


def check_conditions(spec, seed, sizes, densities):
    """Every tightened policy agrees with its log and only removes privileges."""
    for density in densities:
        family = generate_family(spec, seed, sizes, density)
        for member in family.members:
            star, _ = restrict(spec.loose, member.log, spec.schema, member.store)
            report = check_consistency(star, member.log, member.store)
            assert report.consistent, (spec.name, seed, member.size, density)
            assert policy_denotation(star, spec.schema, member.store) <= \
                policy_denotation(spec.loose, spec.schema, member.store)


@pytest.mark.parametrize("study", ["classroom", "conference"])
@pytest.mark.parametrize("seed", [0, 1])
def test_generated_logs_keep_both_conditions(study, seed):
    check_conditions(load_study(study), seed, [5], [30, 100])


@pytest.mark.slow
@pytest.mark.parametrize("study", ["classroom", "conference"])
@pytest.mark.parametrize("seed", range(30))
def test_generated_logs_keep_both_conditions_full_grid(study, seed):
    check_conditions(load_study(study), seed, [5, 10, 20], DENSITIES)


def mean_curve(rows, rule_id, attr):
    return [
        statistics.mean(getattr(r, attr) for r in rows
                        if r.rule_id == rule_id and r.density == density)
        for density in DENSITIES
    ]


@pytest.mark.slow
@pytest.mark.parametrize("study", ["classroom", "conference"])
def test_similarity_does_not_grow_with_density(study):
    spec = load_study(study)
    rows = run_study(spec, seeds=list(range(30)), sizes=[5], densities=DENSITIES)
    full = [r for r in rows if r.density == 100]
    partial = [
        rule_id for rule_id in spec.loosened
        if not all(r.exact_recovery for r in full if r.rule_id == rule_id)
    ]
    for rule_id in partial + [POLICY_ROW]:
        for attr in ("over_priv_remaining", "intended_removed"):
            curve = mean_curve(rows, rule_id, attr)
            rises = [b - a for a, b in zip(curve, curve[1:])]
            assert max(rises) <= TREND_TOLERANCE, (rule_id, attr, curve)
    assert mean_curve(rows, POLICY_ROW, "intended_removed")[-1] == 0.0


@pytest.mark.slow
def test_tightening_time_grows_gently(classroom, record_property):
    sizes = [5, 10, 20, 40]
    rows = run_study(classroom, seeds=[0], sizes=sizes, densities=[60], repeats=3)
    times = {r.size: max(r.median_time_ms, 1.0) for r in rows if r.rule_id == POLICY_ROW}
    by_density = run_study(classroom, seeds=[0], sizes=[10], densities=[30, 60, 100], repeats=3)
    density_times = {r.density: r.median_time_ms for r in by_density if r.rule_id == POLICY_ROW}
    record_property("median_time_ms_by_size", times)
    record_property("median_time_ms_by_density", density_times)
    print(f"median tightening time by size: {times}")
    print(f"median tightening time by density at size 10: {density_times}")

    assert times[40] / times[20] <= max(times[20] / times[10], 2.0) ** 2
