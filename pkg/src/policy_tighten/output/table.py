"""Delimited study results table."""

from __future__ import annotations

import csv
import io
from typing import Iterable

from policy_tighten.config import STUDY_COLUMNS
from policy_tighten.evaluation.study import StudyRow


def render_table(rows: Iterable[StudyRow], timing: bool = True, delimiter: str = ",") -> str:
    """CSV text with a header row; blank time cells when `timing` is off."""
    buf = io.StringIO()
    writer = csv.writer(buf, delimiter=delimiter, lineterminator="\n")
    writer.writerow(STUDY_COLUMNS)
    for row in rows:
        writer.writerow(row.cells(timing))
    return buf.getvalue()
