"""Click CLI entry point for policy-tighten."""

from __future__ import annotations

import functools
import logging
import sys
from pathlib import Path
from typing import Any, Callable

import click
from rich.logging import RichHandler

from policy_tighten import __version__
from policy_tighten.analysis.predicates import enumerate_candidates, format_candidates
from policy_tighten.analysis.request_space import compute_pop, universe_size
from policy_tighten.cedar.ast import Policy, Rule
from policy_tighten.cedar.entities import EntityStore, parse_entities
from policy_tighten.cedar.parser import parse_policy
from policy_tighten.cedar.printer import format_policy
from policy_tighten.cedar.schema import Schema, parse_schema
from policy_tighten.config import DEFAULT_CHAIN_DEPTH, DEFAULT_MAX_CANDIDATES, DEFAULT_MAX_FAILURES
from policy_tighten.config import DEFAULT_POP_CAP, DEFAULT_SEED, DEFAULT_TARGETS_PER_ITERATION
from policy_tighten.config import TightenConfig, parse_kinds
from policy_tighten.diff.engine import diff_policies
from policy_tighten.errors import EXIT_INCONSISTENT, EXIT_INPUT, ConfigError
from policy_tighten.errors import InconsistentLogError, PolicyToolError
from policy_tighten.evaluation.generator import generate_family, write_family
from policy_tighten.evaluation.metrics import semantic_similarity
from policy_tighten.evaluation.spec import load_study
from policy_tighten.evaluation.study import run_study
from policy_tighten.logs.access_log import AccessLog, check_consistency, log_slice, parse_log
from policy_tighten.logs.access_log import permitted_log
from policy_tighten.output.json_out import render_consistency, render_metrics_json
from policy_tighten.output.json_out import render_report
from policy_tighten.output.table import render_table
from policy_tighten.output.terminal import make_console, render_metrics, render_pop
from policy_tighten.output.terminal import render_tightening, render_violations
from policy_tighten.synth.sygus import encode_sygus, make_mapping
from policy_tighten.tighten.driver import first_problem, restrict

logger = logging.getLogger(__name__)

_INPUT = click.Path(exists=True, dir_okay=False, path_type=Path)


class _ToolGroup(click.Group):
    """Click group whose usage errors exit with the input-error code."""

    def main(self, *args: Any, **kwargs: Any) -> Any:
        kwargs["standalone_mode"] = False
        try:
            rv = super().main(*args, **kwargs)
        except click.exceptions.Abort:
            click.echo("Aborted!", err=True)
            sys.exit(EXIT_INPUT)
        except click.ClickException as e:
            e.show()
            sys.exit(EXIT_INPUT)
        sys.exit(rv if isinstance(rv, int) else 0)


def _configure_logging(verbose: bool, quiet: bool) -> None:
    level = logging.DEBUG if verbose else logging.WARNING if quiet else logging.INFO
    handler = RichHandler(console=make_console(stderr=True), show_time=False,
                          show_path=False, markup=False)
    root = logging.getLogger("policy_tighten")
    root.handlers = [handler]
    root.setLevel(level)
    root.propagate = False


def _handle_errors(fn: Callable[..., Any]) -> Callable[..., Any]:
    """Map PolicyToolError to `Error: ...` on stderr and its exit code."""

    @functools.wraps(fn)
    def wrapper(*args: Any, **kwargs: Any) -> Any:
        try:
            return fn(*args, **kwargs)
        except InconsistentLogError as e:
            click.echo(f"Error: {e}", err=True)
            for v in e.violations:
                click.echo(f"  {v.request}: logged {v.logged.value}, policy says "
                           f"{v.actual.value}", err=True)
            sys.exit(e.exit_code)
        except PolicyToolError as e:
            click.echo(f"Error: {e}", err=True)
            sys.exit(e.exit_code)
        except OSError as e:
            click.echo(f"Error: {e}", err=True)
            sys.exit(EXIT_INPUT)

    return wrapper


def _read(path: Path) -> str:
    return Path(path).read_text(encoding="utf-8")


def _write(path: Path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")


def _load_schema(path: Path) -> Schema:
    return parse_schema(_read(path), str(path))


def _load_policy(path: Path, schema: Schema) -> Policy:
    return parse_policy(_read(path), schema, str(path))


def _load_store(path: Path, schema: Schema) -> EntityStore:
    return parse_entities(_read(path), schema, str(path))


def _load_log(path: Path, schema: Schema) -> AccessLog:
    return parse_log(_read(path), schema, str(path))


def _int_list(text: str, what: str) -> list[int]:
    """Parse `5,10,20` or ranges such as `0-29` and `30-100/10`."""
    values: list[int] = []
    try:
        for item in (part.strip() for part in text.split(",")):
            if not item:
                continue
            step = 1
            if "/" in item:
                item, step_text = item.split("/", 1)
                step = int(step_text)
                if step < 1:
                    raise ValueError(step_text)
            if "-" in item.lstrip("-"):
                lo_text, hi_text = item.rsplit("-", 1)
                values.extend(range(int(lo_text), int(hi_text) + 1, step))
            else:
                values.append(int(item))
    except ValueError:
        raise ConfigError(f"invalid {what} list '{text}'") from None
    if not values:
        raise ConfigError(f"empty {what} list '{text}'")
    return values


def _tighten_config(seed: int, max_failures: int, targets_per_iter: int, chain_depth: int,
                    pop_cap: int, kinds: str | None, max_candidates: int, parallel: bool,
                    allow_inconsistent: bool = False) -> TightenConfig:
    return TightenConfig(
        max_failures=max_failures,
        targets_per_iteration=targets_per_iter,
        chain_depth=chain_depth,
        seed=seed,
        pop_cap=pop_cap,
        enabled_kinds=parse_kinds(kinds),
        max_candidates=max_candidates,
        parallel=parallel,
        allow_inconsistent=allow_inconsistent,
    ).validate()


def _input_options(log: bool = True) -> Callable[[Callable[..., Any]], Callable[..., Any]]:
    def decorate(fn: Callable[..., Any]) -> Callable[..., Any]:
        if log:
            fn = click.option("--log", "log_path", required=True, type=_INPUT,
                              help="Access log (JSON lines)")(fn)
        fn = click.option("--entities", required=True, type=_INPUT,
                          help="Entity store (YAML or JSON)")(fn)
        fn = click.option("--schema", required=True, type=_INPUT, help="Cedar schema")(fn)
        return fn
    return decorate


def _search_options(fn: Callable[..., Any]) -> Callable[..., Any]:
    options = [
        click.option("--seed", default=DEFAULT_SEED, type=int, show_default=True,
                     help="Seed for target sampling"),
        click.option("--max-failures", default=DEFAULT_MAX_FAILURES, type=int,
                     show_default=True, help="Failed searches allowed per rule"),
        click.option("--targets-per-iter", default=DEFAULT_TARGETS_PER_ITERATION, type=int,
                     show_default=True, help="Over-privileges sampled per search"),
        click.option("--chain-depth", default=DEFAULT_CHAIN_DEPTH, type=int,
                     show_default=True, help="Maximum attribute chain length"),
        click.option("--pop-cap", default=DEFAULT_POP_CAP, type=int, show_default=True,
                     help="Abort when a request set grows beyond this size"),
        click.option("--kinds", default=None,
                     help="Comma-separated candidate kinds (default: all)"),
        click.option("--max-candidates", default=DEFAULT_MAX_CANDIDATES, type=int,
                     show_default=True, help="Candidate list cap per rule"),
    ]
    for option in reversed(options):
        fn = option(fn)
    return fn


@click.group(cls=_ToolGroup)
@click.version_option(version=__version__, prog_name="policy-tighten")
@click.option("-v", "--verbose", is_flag=True, help="Log every tightening iteration")
@click.option("-q", "--quiet", is_flag=True, help="Only log warnings and errors")
def main(verbose: bool, quiet: bool) -> None:
    """policy-tighten: tighten over-permissive Cedar policies against access logs."""
    _configure_logging(verbose, quiet)


@main.command()
@click.option("--policy", required=True, type=_INPUT, help="Policy to tighten")
@_input_options()
@click.option("--out", default=None, type=click.Path(dir_okay=False, path_type=Path),
              help="Write the tightened policy here (default: stdout)")
@click.option("--report", default=None, type=click.Path(dir_okay=False, path_type=Path),
              help="Write the JSON report here")
@_search_options
@click.option("--parallel", is_flag=True, help="Tighten rules in worker processes")
@click.option("--allow-inconsistent", is_flag=True,
              help="Warn instead of failing when the policy disagrees with the log")
@click.option("--omit-timing", is_flag=True, help="Leave wall-clock figures out of the report")
@click.option("--no-color", is_flag=True, help="Disable colored output")
@_handle_errors
def tighten(policy: Path, schema: Path, entities: Path, log_path: Path, out: Path | None,
            report: Path | None, seed: int, max_failures: int, targets_per_iter: int,
            chain_depth: int, pop_cap: int, kinds: str | None, max_candidates: int,
            parallel: bool, allow_inconsistent: bool, omit_timing: bool,
            no_color: bool) -> None:
    """Tighten every permit rule of a policy against an access log."""
    cfg = _tighten_config(seed, max_failures, targets_per_iter, chain_depth, pop_cap, kinds,
                          max_candidates, parallel, allow_inconsistent)
    parsed_schema = _load_schema(schema)
    p_init = _load_policy(policy, parsed_schema)
    store = _load_store(entities, parsed_schema)
    log = _load_log(log_path, parsed_schema)

    p_star, run_report = restrict(p_init, log, parsed_schema, store, cfg)
    changes = diff_policies(p_init, p_star)

    text = format_policy(p_star)
    if out is not None:
        _write(out, text)
        render_tightening(run_report, changes, console=make_console(no_color))
    else:
        click.echo(text, nl=False)
        render_tightening(run_report, changes, console=make_console(no_color, stderr=True))
    if report is not None:
        _write(report, render_report(run_report, changes, timing=not omit_timing))


@main.command()
@click.option("--policy", required=True, type=_INPUT, help="Policy to check")
@_input_options()
@click.option(
    "-o", "--output", "output_format",
    type=click.Choice(["terminal", "json"]),
    default="terminal",
    help="Output format",
)
@click.option("--no-color", is_flag=True, help="Disable colored output")
@_handle_errors
def check(policy: Path, schema: Path, entities: Path, log_path: Path, output_format: str,
          no_color: bool) -> None:
    """Check that a policy reproduces every logged decision."""
    parsed_schema = _load_schema(schema)
    p = _load_policy(policy, parsed_schema)
    store = _load_store(entities, parsed_schema)
    log = _load_log(log_path, parsed_schema)

    consistency = check_consistency(p, log, store)
    if output_format == "json":
        click.echo(render_consistency(consistency), nl=False)
    else:
        render_violations(consistency, console=make_console(no_color))
    if not consistency.consistent:
        sys.exit(EXIT_INCONSISTENT)


@main.command()
@click.option("--init", "init_path", required=True, type=_INPUT, help="Loose input policy")
@click.option("--star", "star_path", required=True, type=_INPUT, help="Tightened policy")
@click.option("--tight", "tight_path", required=True, type=_INPUT, help="Reference policy")
@_input_options()
@click.option("--pop-cap", default=DEFAULT_POP_CAP, type=int, show_default=True,
              help="Abort when a denotation grows beyond this size")
@click.option(
    "-o", "--output", "output_format",
    type=click.Choice(["terminal", "json"]),
    default="terminal",
    help="Output format",
)
@click.option("--no-color", is_flag=True, help="Disable colored output")
@_handle_errors
def metrics(init_path: Path, star_path: Path, tight_path: Path, schema: Path, entities: Path,
            log_path: Path, pop_cap: int, output_format: str, no_color: bool) -> None:
    """Compare a tightened policy with the reference policy it should recover."""
    if pop_cap < 1:
        raise ConfigError(f"pop cap must be >= 1, got {pop_cap}")
    parsed_schema = _load_schema(schema)
    p_init = _load_policy(init_path, parsed_schema)
    p_star = _load_policy(star_path, parsed_schema)
    p_tight = _load_policy(tight_path, parsed_schema)
    store = _load_store(entities, parsed_schema)
    log = _load_log(log_path, parsed_schema)

    result = semantic_similarity(p_init, p_star, p_tight, parsed_schema, store,
                                 permitted_log(log), pop_cap)
    if output_format == "json":
        click.echo(render_metrics_json(result), nl=False)
    else:
        render_metrics(result, console=make_console(no_color))


@main.command()
@click.option("--study", required=True, help="Shipped study name or path to a study file")
@click.option("--seed", default=DEFAULT_SEED, type=int, show_default=True)
@click.option("--sizes", default="5,10,20", show_default=True, help="Family sizes")
@click.option("--density", default=100, type=int, show_default=True,
              help="Percentage of intended privileges that appear in the log")
@click.option("--outdir", required=True, type=click.Path(file_okay=False, path_type=Path))
@_handle_errors
def gen(study: str, seed: int, sizes: str, density: int, outdir: Path) -> None:
    """Generate a nested family of entity stores and logs for a study."""
    spec = load_study(study)
    family = generate_family(spec, seed, _int_list(sizes, "size"), density)
    for target in write_family(spec, family, outdir):
        click.echo(str(target))


@main.command("export-sygus")
@click.option("--policy", required=True, type=_INPUT)
@_input_options()
@click.option("--rule", "rule_id", required=True, help="Id of the permit rule to export")
@click.option("--mapping-seed", default=DEFAULT_SEED, type=int, show_default=True,
              help="Seed for the entity integer codes")
@click.option("--out", default=None, type=click.Path(dir_okay=False, path_type=Path),
              help="Write the document here (default: stdout)")
@_search_options
@_handle_errors
def export_sygus(policy: Path, schema: Path, entities: Path, log_path: Path, rule_id: str,
                 mapping_seed: int, out: Path | None, seed: int, max_failures: int,
                 targets_per_iter: int, chain_depth: int, pop_cap: int, kinds: str | None,
                 max_candidates: int) -> None:
    """Export the first tightening step of one rule as a SyGuS problem."""
    cfg = _tighten_config(seed, max_failures, targets_per_iter, chain_depth, pop_cap, kinds,
                          max_candidates, parallel=False)
    parsed_schema = _load_schema(schema)
    p = _load_policy(policy, parsed_schema)
    store = _load_store(entities, parsed_schema)
    log = _load_log(log_path, parsed_schema)

    rule = _permit_rule(p, rule_id)
    prob = first_problem(rule, permitted_log(log), parsed_schema, store, cfg)
    text = encode_sygus(prob, make_mapping(store, mapping_seed, parsed_schema))
    if out is not None:
        _write(out, text)
    else:
        click.echo(text, nl=False)


@main.command("enumerate-pop")
@click.option("--policy", required=True, type=_INPUT)
@_input_options()
@click.option("--rule", "rule_ids", multiple=True, help="Restrict to these rule ids")
@click.option("--pop-cap", default=DEFAULT_POP_CAP, type=int, show_default=True)
@click.option("--no-color", is_flag=True, help="Disable colored output")
@_handle_errors
def enumerate_pop(policy: Path, schema: Path, entities: Path, log_path: Path,
                  rule_ids: tuple[str, ...], pop_cap: int, no_color: bool) -> None:
    """List the requests each permit rule allows but the log never exercised."""
    if pop_cap < 1:
        raise ConfigError(f"pop cap must be >= 1, got {pop_cap}")
    parsed_schema = _load_schema(schema)
    p = _load_policy(policy, parsed_schema)
    store = _load_store(entities, parsed_schema)
    log_plus = permitted_log(_load_log(log_path, parsed_schema))

    rules = [_permit_rule(p, r) for r in rule_ids] if rule_ids else p.permits()
    console = make_console(no_color)
    for rule in rules:
        logger.debug("rule %s: %d request(s) in scope", rule.id,
                     universe_size(parsed_schema, store, rule.scope))
        pop = compute_pop(rule, log_slice(rule, log_plus, store), parsed_schema, store, pop_cap)
        render_pop(pop, console=console)


@main.command("dump-candidates")
@click.option("--policy", required=True, type=_INPUT)
@_input_options(log=False)
@click.option("--rule", "rule_id", required=True, help="Id of the permit rule")
@click.option("--chain-depth", default=DEFAULT_CHAIN_DEPTH, type=int, show_default=True)
@click.option("--kinds", default=None, help="Comma-separated candidate kinds (default: all)")
@click.option("--max-candidates", default=DEFAULT_MAX_CANDIDATES, type=int, show_default=True)
@_handle_errors
def dump_candidates(policy: Path, schema: Path, entities: Path, rule_id: str,
                    chain_depth: int, kinds: str | None, max_candidates: int) -> None:
    """Print the candidate conjuncts considered for one rule."""
    cfg = _tighten_config(DEFAULT_SEED, DEFAULT_MAX_FAILURES, DEFAULT_TARGETS_PER_ITERATION,
                          chain_depth, DEFAULT_POP_CAP, kinds, max_candidates, parallel=False)
    parsed_schema = _load_schema(schema)
    p = _load_policy(policy, parsed_schema)
    store = _load_store(entities, parsed_schema)
    candidates = enumerate_candidates(parsed_schema, store, _permit_rule(p, rule_id),
                                      cfg.enum_config())
    click.echo(format_candidates(candidates), nl=False)


@main.command()
@click.option("--study", required=True, help="Shipped study name or path to a study file")
@click.option("--seeds", default="0-29", show_default=True, help="Seeds, e.g. 0-29 or 1,2,3")
@click.option("--sizes", default="5,10,20", show_default=True)
@click.option("--densities", default="30-100/10", show_default=True)
@click.option("--repeats", default=1, type=int, show_default=True,
              help="Timed runs per cell (median is reported)")
@click.option("--out", default=None, type=click.Path(dir_okay=False, path_type=Path),
              help="Write the results table here (default: stdout)")
@_search_options
@click.option("--parallel", is_flag=True, help="Run cells in worker processes")
@click.option("--omit-timing", is_flag=True, help="Leave the time column blank")
@_handle_errors
def study(study: str, seeds: str, sizes: str, densities: str, repeats: int, out: Path | None,
          seed: int, max_failures: int, targets_per_iter: int, chain_depth: int, pop_cap: int,
          kinds: str | None, max_candidates: int, parallel: bool, omit_timing: bool) -> None:
    """Run a case study and write the results table.

    `--seed` seeds the tightening search; `--seeds` picks the generated datasets.
    """
    cfg = _tighten_config(seed, max_failures, targets_per_iter, chain_depth, pop_cap, kinds,
                          max_candidates, parallel)
    spec = load_study(study)
    rows = run_study(spec, _int_list(seeds, "seed"), _int_list(sizes, "size"),
                     _int_list(densities, "density"), cfg, repeats)
    text = render_table(rows, timing=not omit_timing)
    if out is not None:
        _write(out, text)
        logger.info("wrote %d row(s) to %s", len(rows), out)
    else:
        click.echo(text, nl=False)


def _permit_rule(policy: Policy, rule_id: str) -> Rule:
    try:
        rule = policy.get(rule_id)
    except KeyError:
        raise ConfigError(
            f"no rule with id '{rule_id}' (known: {', '.join(policy.ids())})"
        ) from None
    if not rule.is_permit:
        raise ConfigError(f"rule '{rule_id}' is a forbid rule; only permit rules are tightened")
    return rule
