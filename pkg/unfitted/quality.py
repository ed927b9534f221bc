"""
🔍 Quality Checks
=================
Acceptance checks declared in YAML (``include/checks/*.yml``) and
evaluated against a StudyReport.

    checks:
      - name: "H1 slope in the optimal band"
        table: slopes          # rows (default) or a derived table
        column: h1_slope
        between: [0.85, 1.25]  # or min: / max:
      - name: "No failed case"
        failed_rows: 0
      - name: "Rotation variability does not grow"
        table: ratios
        column: h1_ratio
        non_increasing: {order_by: n, start: 32, factor: 1.3}
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import yaml

from unfitted.errors import ConfigError

CHECK_KINDS = ("between", "min", "max", "failed_rows", "non_increasing")


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str


def load_checks(path) -> list[dict]:
    path = Path(path)
    try:
        with open(path, "r", encoding="utf-8") as f:
            document = yaml.safe_load(f) or {}
    except FileNotFoundError as e:
        raise ConfigError(f"❌ Check file not found: {path}") from e
    except yaml.YAMLError as e:
        raise ConfigError(f"❌ Check file {path} is not valid YAML: {e}") from e
    checks = document.get("checks") if isinstance(document, dict) else None
    if not isinstance(checks, list) or not checks:
        raise ConfigError(f"❌ Check file {path} needs a nonempty 'checks' list")
    for check in checks:
        if not isinstance(check, dict) or not any(kind in check for kind in CHECK_KINDS):
            raise ConfigError(f"❌ Check {check!r} in {path} declares none of: {', '.join(CHECK_KINDS)}")
    return checks


def _column(report, check: dict):
    table_name = check.get("table", "rows")
    table = report.rows if table_name == "rows" else report.tables.get(table_name)
    if table is None:
        raise ConfigError(f"❌ Report '{report.study}' has no table '{table_name}'")
    column = check.get("column")
    if column not in table.columns:
        raise ConfigError(f"❌ Table '{table_name}' has no column '{column}'")
    if table_name == "rows" and "status" in table.columns:
        table = table[table["status"] == "ok"]
    return table, table[column].to_numpy(dtype=float)


def evaluate_check(report, check: dict) -> CheckResult:
    name = check.get("name", "unnamed check")

    if "failed_rows" in check:
        limit = int(check["failed_rows"])
        return CheckResult(name, report.failed <= limit, f"{report.failed} failed row(s), allowed {limit}")

    table, values = _column(report, check)
    if len(values) == 0:
        return CheckResult(name, False, "no values to check")
    if np.any(~np.isfinite(values)):
        return CheckResult(name, False, f"non-finite values in {check['column']}")

    if "non_increasing" in check:
        options = check["non_increasing"] or {}
        factor = float(options.get("factor", 1.0))
        order_by = options.get("order_by", "n")
        if "start" in options:
            table = table[table[order_by] >= options["start"]]
        ordered = table.sort_values(order_by, kind="mergesort")[check["column"]].to_numpy(dtype=float)
        growth = ordered[1:] / ordered[:-1] if len(ordered) > 1 else np.ones(1)
        worst = float(growth.max())
        return CheckResult(name, worst <= factor, f"worst growth × {worst:.3f}, allowed × {factor:g}")

    low, high = -np.inf, np.inf
    if "between" in check:
        low, high = (float(v) for v in check["between"])
    if "min" in check:
        low = float(check["min"])
    if "max" in check:
        high = float(check["max"])
    passed = bool(np.all((values >= low) & (values <= high)))
    return CheckResult(name, passed, f"{check['column']} in [{values.min():.4g}, {values.max():.4g}], required [{low:g}, {high:g}]")


def run_checks(report, path) -> list[CheckResult]:
    """Evaluate every check in ``path``; each outcome is logged."""
    results = [evaluate_check(report, check) for check in load_checks(path)]
    for result in results:
        if result.passed:
            logging.info(f"✅ {result.name}: {result.detail}")
        else:
            logging.error(f"❌ {result.name}: {result.detail}")
    passed = sum(r.passed for r in results)
    logging.info(f"📊 Quality checks: {passed}/{len(results)} passed")
    return results
