"""CSV report emission.

Dialect is fixed for reproducibility: comma-separated, fields quoted only
when needed, LF line endings, UTF-8.  Column orders follow the traceability
reports this tool is replacing, so downstream spreadsheets keep working.
"""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Iterable, List, Sequence

from .callgraph import TestCase
from .features import FeatureSpan
from .tracing import RankedTest, TraceRecord

FEATURES_HEADER = ["Target File", "Feature Name", "Feat From", "Feat To"]
TEST_LINES_HEADER = ["Test File", "Test Case", "Target File", "Target Function",
                     "Line From", "Line To"]
TEST_FEATURES_HEADER = ["Test File", "Test Case", "Target File", "Target Function",
                        "Line From", "Line To", "Feature Name", "Feat From", "Feat To"]
SELECTED_HEADER = ["Test File", "Test Case"]
PRIORITIZED_HEADER = ["Index", "TestFile", "TestCase", "FeatureNameList", "Count"]
METRICS_HEADER = ["commit", "approach", "n_selected", "n_total", "reduction_pct",
                  "detected", "failures", "gamma_pct", "select_seconds"]


def _write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence]) -> int:
    count = 0
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow(row)
            count += 1
    return count


def write_features_csv(path: Path, spans: List[FeatureSpan]) -> int:
    rows = sorted(spans, key=lambda s: (s.file, s.from_line, s.feature))
    return _write_csv(path, FEATURES_HEADER,
                      [(s.file, s.feature, s.from_line, s.to_line) for s in rows])


def write_test_lines_csv(path: Path, reach) -> int:
    rows = []
    for rs in reach:
        for target_file, fd in rs.targets:
            rows.append((rs.test.test_file, rs.test.name, target_file,
                         fd.name, fd.from_line, fd.to_line))
    rows.sort()
    return _write_csv(path, TEST_LINES_HEADER, rows)


def write_test_features_csv(path: Path, traces: List[TraceRecord]) -> int:
    rows = [(t.test_file, t.test_case, t.target_file, t.target_function,
             t.line_from, t.line_to, t.feature_name, t.feat_from, t.feat_to)
            for t in traces]
    rows.sort()
    return _write_csv(path, TEST_FEATURES_HEADER, rows)


def write_selected_csv(path: Path, selected: Iterable[TestCase]) -> int:
    rows = sorted((t.test_file, t.name) for t in set(selected))
    return _write_csv(path, SELECTED_HEADER, rows)


def format_feature_list(names: Sequence[str]) -> str:
    # bracketed, comma-separated, single-quoted: ['BASE', 'WITH_SSH1']
    return "[" + ", ".join(f"'{n}'" for n in names) + "]"


def write_prioritized_csv(path: Path, ranked: List[RankedTest]) -> int:
    rows = [(rt.index, rt.test_file, rt.test_case,
             format_feature_list(rt.feature_names), rt.count) for rt in ranked]
    return _write_csv(path, PRIORITIZED_HEADER, rows)


def write_metrics_csv(path: Path, rows: List[Sequence]) -> int:
    return _write_csv(path, METRICS_HEADER, rows)
