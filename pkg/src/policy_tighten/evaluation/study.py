"""Run a case study over seeds, sizes and log densities."""

from __future__ import annotations

import logging
import statistics
from dataclasses import dataclass, replace
from typing import Any

from policy_tighten.config import TightenConfig
from policy_tighten.core.runner import run_tasks
from policy_tighten.errors import ConfigError
from policy_tighten.evaluation.generator import generate_family
from policy_tighten.evaluation.metrics import exact_recovery, semantic_similarity
from policy_tighten.evaluation.spec import StudySpec
from policy_tighten.logs.access_log import permitted_log
from policy_tighten.tighten.driver import restrict

logger = logging.getLogger(__name__)

POLICY_ROW = "*"


@dataclass(frozen=True)
class StudyRow:
    seed: int
    size: int
    density: int
    rule_id: str
    exact_recovery: bool
    over_priv_remaining: float
    intended_removed: float
    median_time_ms: float
    loosened: bool = False

    def cells(self, timing: bool = True) -> list[str]:
        """Values in table column order."""
        return [
            str(self.seed),
            str(self.size),
            str(self.density),
            self.rule_id,
            "true" if self.exact_recovery else "false",
            f"{self.over_priv_remaining:.4f}",
            f"{self.intended_removed:.4f}",
            f"{self.median_time_ms:.1f}" if timing else "",
        ]

    def to_dict(self) -> dict[str, Any]:
        return {
            "seed": self.seed,
            "size": self.size,
            "density": self.density,
            "rule_id": self.rule_id,
            "exact_recovery": self.exact_recovery,
            "over_priv_remaining": self.over_priv_remaining,
            "intended_removed": self.intended_removed,
            "median_time_ms": self.median_time_ms,
            "loosened": self.loosened,
        }


def run_cell(spec: StudySpec, seed: int, sizes: list[int], density: int,
             cfg: TightenConfig, repeats: int) -> list[StudyRow]:
    """Rows for one (seed, density) family: one per permit rule plus a policy row, per size."""
    family = generate_family(spec, seed, sizes, density)
    loosened = set(spec.loosened)
    rows: list[StudyRow] = []
    for member in family.members:
        runs = [restrict(spec.loose, member.log, spec.schema, member.store, cfg)
                for _ in range(repeats)]
        p_star, _ = runs[0]
        metrics = semantic_similarity(
            spec.loose, p_star, spec.tight, spec.schema, member.store,
            permitted_log(member.log), cfg.pop_cap,
        )
        all_exact = True
        recovered = 0
        for rule in spec.loose.permits():
            exact = exact_recovery(p_star.get(rule.id), spec.tight.get(rule.id),
                                   spec.schema, member.store, cfg.pop_cap)
            all_exact = all_exact and exact
            if exact and rule.id in loosened:
                recovered += 1
            m = metrics.rules[rule.id]
            times = [r.rule(rule.id).wall_time_ms for _, r in runs]
            rows.append(StudyRow(
                seed, member.size, density, rule.id, exact,
                m.over_privilege_remaining, m.intended_privilege_removed,
                statistics.median(times), loosened=rule.id in loosened,
            ))
        rows.append(StudyRow(
            seed, member.size, density, POLICY_ROW, all_exact,
            metrics.policy.over_privilege_remaining, metrics.policy.intended_privilege_removed,
            statistics.median(r.wall_time_ms for _, r in runs),
        ))
        logger.info("study %s seed %d size %d density %d: %d/%d loosened rule(s) recovered",
                    spec.name, seed, member.size, density, recovered, len(loosened))
    return rows


def run_study(spec: StudySpec, seeds: list[int], sizes: list[int], densities: list[int],
              cfg: TightenConfig | None = None, repeats: int = 1) -> list[StudyRow]:
    """Results table rows ordered by (seed, density, size, rule order).

    With `cfg.parallel`, cells run in worker processes and each cell tightens
    sequentially; row content does not depend on the mode.
    """
    if repeats < 1:
        raise ConfigError(f"repeats must be >= 1, got {repeats}")
    cfg = (cfg or TightenConfig()).validate()
    inner = replace(cfg, parallel=False)
    tasks = [
        (spec, seed, list(sizes), density, inner, repeats)
        for seed in seeds
        for density in densities
    ]
    labels = [f"seed {seed} density {density}" for seed in seeds for density in densities]
    cells = run_tasks(run_cell, tasks, labels=labels, parallel=cfg.parallel)
    return [row for cell in cells for row in cell]
