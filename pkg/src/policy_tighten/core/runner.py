"""Process-pool task runner with error handling."""

from __future__ import annotations

import logging
import os
from concurrent.futures import ProcessPoolExecutor
from typing import Any, Callable, Sequence

from policy_tighten.config import WORKERS_ENV_VAR
from policy_tighten.errors import EXIT_INPUT, ConfigError, PolicyToolError

logger = logging.getLogger(__name__)


class RunError(PolicyToolError):
    """Raised when a worker task fails; keeps the original exit code."""

    def __init__(self, task: str, exit_code: int, message: str) -> None:
        self.task = task
        self.exit_code = exit_code
        self.detail = message
        super().__init__(f"task {task} failed: {message}")


def worker_count(environ: dict[str, str] | None = None) -> int:
    """Worker processes for parallel mode: POLICY_TIGHTEN_WORKERS, else the CPU count."""
    env = os.environ if environ is None else environ
    raw = env.get(WORKERS_ENV_VAR)
    if raw is None or not raw.strip():
        return os.cpu_count() or 1
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"{WORKERS_ENV_VAR} must be an integer, got {raw!r}") from None
    if n < 1:
        raise ConfigError(f"{WORKERS_ENV_VAR} must be >= 1, got {n}")
    return n


def _call(fn: Callable[..., Any], args: tuple) -> tuple[bool, Any]:
    # Exceptions with custom constructors do not survive pickling; ship text instead.
    try:
        return True, fn(*args)
    except PolicyToolError as e:
        return False, (e.exit_code, str(e))
    except Exception as e:  # noqa: BLE001
        return False, (EXIT_INPUT, f"{type(e).__name__}: {e}")


def run_tasks(
    fn: Callable[..., Any],
    tasks: Sequence[tuple],
    labels: Sequence[str] | None = None,
    parallel: bool = False,
    workers: int | None = None,
) -> list[Any]:
    """Apply `fn(*args)` to every task; results come back in task order.

    Sequential mode calls `fn` in-process and lets its exceptions propagate.
    Parallel mode fans out to a process pool; `fn` and its arguments must be
    picklable and a failing task raises RunError.
    """
    labels = list(labels) if labels is not None else [str(i) for i in range(len(tasks))]
    if not parallel or len(tasks) < 2:
        return [fn(*args) for args in tasks]

    n = min(workers or worker_count(), len(tasks))
    logger.debug("running %d task(s) on %d worker(s)", len(tasks), n)
    with ProcessPoolExecutor(max_workers=n) as pool:
        futures = [pool.submit(_call, fn, args) for args in tasks]
        outcomes = [f.result() for f in futures]

    results = []
    for label, (ok, value) in zip(labels, outcomes):
        if not ok:
            exit_code, message = value
            raise RunError(label, exit_code, message)
        results.append(value)
    return results
