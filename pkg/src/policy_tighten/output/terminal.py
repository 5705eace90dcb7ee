"""Rich terminal colored output."""

from __future__ import annotations

from rich.console import Console
from rich.panel import Panel
from rich.table import Table
from rich.text import Text

from policy_tighten.analysis.request_space import PopSet
from policy_tighten.diff.engine import ChangeRecord, FieldChange
from policy_tighten.evaluation.metrics import PolicyMetrics, SimilarityMetrics
from policy_tighten.logs.access_log import ConsistencyReport
from policy_tighten.tighten.report import RuleReport, Termination, TighteningReport

# Style mappings
STATUS_STYLES = {
    "added": ("ADDED", "green bold"),
    "removed": ("REMOVED", "red bold"),
    "changed": ("TIGHTENED", "yellow bold"),
}

TERMINATION_STYLES = {
    Termination.POP_EMPTY: ("POP empty", "green"),
    Termination.FAILURE_BUDGET: ("failure budget", "yellow"),
}


def make_console(no_color: bool = False, stderr: bool = False) -> Console:
    return Console(no_color=no_color, highlight=False, stderr=stderr)


def render_tightening(
    report: TighteningReport,
    changes: list[ChangeRecord],
    console: Console | None = None,
    no_color: bool = False,
) -> None:
    """Print per-rule diffs followed by the run summary."""
    console = console or make_console(no_color)
    if not changes:
        console.print("[dim]No rule was tightened.[/dim]")
    for change in changes:
        rule = _find(report, change.rule_id)
        _render_change(console, change, rule)
    _render_summary(console, report)


def _find(report: TighteningReport, rule_id: str) -> RuleReport | None:
    try:
        return report.rule(rule_id)
    except KeyError:
        return None


def _render_change(console: Console, change: ChangeRecord, rule: RuleReport | None) -> None:
    """Render a single rule change."""
    status_label, status_style = STATUS_STYLES[change.status]
    title = Text()
    title.append(f"[{status_label}] ", style=status_style)
    title.append(f"{change.effect} {change.rule_id}", style="bold")
    if rule is not None:
        term_label, term_style = TERMINATION_STYLES[rule.termination]
        title.append(f"  ({term_label}, {len(rule.iterations)} iteration(s))", style=term_style)

    if change.status in ("added", "removed"):
        console.print(Panel(title, border_style=status_style.split()[0]))
        return

    content = Text()
    for fc in change.changes:
        _render_field_change(content, fc)
    if rule is not None and rule.pop_initial:
        content.append(f"  POP {rule.pop_initial} -> {rule.pop_final}\n", style="dim")
    console.print(Panel(content, title=title, title_align="left", border_style="yellow"))


def _render_field_change(content: Text, fc: FieldChange) -> None:
    if fc.change_type == "item_added":
        content.append(f"  + {fc.new_value}\n", style="green")
    elif fc.change_type == "item_removed":
        content.append(f"  - {fc.old_value}\n", style="red")
    else:
        content.append(f"  ~ {fc.path}\n", style="yellow")
        content.append(f"    - {fc.old_value}\n", style="red")
        content.append(f"    + {fc.new_value}\n", style="green")


def _render_summary(console: Console, report: TighteningReport) -> None:
    """Render summary table at the bottom."""
    table = Table(title="Summary", show_header=False, box=None)
    table.add_row("Permit rules", str(len(report.rules)))
    table.add_row("[green]Tightened[/green]", str(len(report.tightened)))
    table.add_row("Forbid rules kept", str(len(report.forbids)))
    table.add_row("Iterations", str(report.total_iterations))
    if report.total_failures:
        table.add_row("[yellow]Failures[/yellow]", str(report.total_failures))
    if report.violations:
        table.add_row("[red]Inconsistent log entries[/red]", str(report.violations))
    table.add_row(
        "[dim]Settings[/dim]",
        f"[dim]max failures {report.max_failures}, "
        f"{report.targets_per_iteration} target(s) per iteration[/dim]",
    )
    console.print(table)


def render_violations(
    consistency: ConsistencyReport,
    console: Console | None = None,
    no_color: bool = False,
    limit: int = 50,
) -> None:
    console = console or make_console(no_color)
    if consistency.consistent:
        console.print(f"[green]Consistent[/green]: {consistency.checked} log entries agree "
                      "with the policy.")
        return
    table = Table(title=f"{len(consistency.violations)} inconsistent log entries",
                  show_header=True)
    table.add_column("Request")
    table.add_column("Logged")
    table.add_column("Policy")
    for v in consistency.violations[:limit]:
        table.add_row(str(v.request), v.logged.value, f"[red]{v.actual.value}[/red]")
    console.print(table)
    hidden = len(consistency.violations) - limit
    if hidden > 0:
        console.print(f"[dim]... and {hidden} more[/dim]")


def render_pop(pop: PopSet, console: Console | None = None, no_color: bool = False) -> None:
    console = console or make_console(no_color)
    console.print(f"[bold]rule {pop.rule_id}[/bold]: {len(pop)} potential over-privilege(s)")
    for req in pop.sorted():
        console.print(f"  {req}")


def _metric_cells(m: SimilarityMetrics) -> list[str]:
    return [
        f"{m.over_privilege_remaining:.4f}",
        f"{m.intended_privilege_removed:.4f}",
        str(m.over_privileges),
        str(m.intended_unexercised),
    ]


def render_metrics(metrics: PolicyMetrics, console: Console | None = None,
                   no_color: bool = False) -> None:
    console = console or make_console(no_color)
    table = Table(title="Semantic similarity (lower is better)", show_header=True)
    table.add_column("Scope", style="bold")
    table.add_column("Over-privilege remaining")
    table.add_column("Intended privilege removed")
    table.add_column("|OP|")
    table.add_column("|IU|")
    for rule_id, m in metrics.rules.items():
        table.add_row(f"rule {rule_id}", *_metric_cells(m))
    table.add_row("policy", *_metric_cells(metrics.policy))
    console.print(table)
